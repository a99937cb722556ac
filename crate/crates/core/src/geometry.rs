//! The graph map between the moving fluid domain `{0 < y < 1 + η(x)}` and the
//! reference channel: `(x, y) ↦ (x, y / (1 + η(x)))`.

use crate::error::{FsiError, Result};
use crate::fields::{BeamField, Grid, ScalarField};
use crate::interp::{periodic_cubic, periodic_linear};
use crate::scalar::Real;

/// Beam displacement together with the derived quantities every transformed
/// formula needs. Immutable once built; construction enforces
/// `1 + η >= δ₀` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry<T> {
    pub eta: BeamField<T>,
    pub eta_x: BeamField<T>,
    pub eta_xx: BeamField<T>,
    pub one_plus_eta: BeamField<T>,
    pub inv_one_plus_eta: BeamField<T>,
    pub delta0: T,
}

pub fn build_geometry<T: Real>(eta: &BeamField<T>, delta0: T) -> Result<BeamGeometry<T>> {
    if !(delta0 > T::zero() && delta0 < T::one()) {
        return Err(FsiError::invalid("delta0", "must lie in (0, 1)"));
    }
    let one_plus_eta = eta.map(|e| T::one() + e);
    let (mut node, mut min) = (0, T::infinity());
    for (i, &v) in one_plus_eta.values.iter().enumerate() {
        // NaN compares false everywhere; treat it as a violation
        if v < min || v.is_nan() {
            min = v;
            node = i;
            if v.is_nan() {
                break;
            }
        }
    }
    if min.is_nan() || min < delta0 {
        return Err(FsiError::AdmissibilityViolated {
            min_one_plus_eta: min.as_f64(),
            node,
            delta0: delta0.as_f64(),
        });
    }
    Ok(BeamGeometry {
        eta_x: eta.ddx(),
        eta_xx: eta.d2x(),
        inv_one_plus_eta: one_plus_eta.map(|v| T::one() / v),
        one_plus_eta,
        eta: eta.clone(),
        delta0,
    })
}

impl<T: Real> BeamGeometry<T> {
    pub fn grid(&self) -> Grid<T> {
        self.eta.grid
    }

    /// Geometry of the undeformed channel.
    pub fn flat(grid: Grid<T>) -> Self {
        build_geometry(&BeamField::zeros(grid), T::lit(0.5)).expect("flat geometry is admissible")
    }

    pub fn min_one_plus_eta(&self) -> T {
        self.one_plus_eta.min()
    }
}

/// Reference point `(x, z)` to physical point `(x, z (1 + η(x)))`, with `η`
/// sampled by periodic linear interpolation.
pub fn map_to_physical<T: Real>(x: T, z: T, geometry: &BeamGeometry<T>) -> (T, T) {
    let eta = periodic_linear(&geometry.eta, x);
    (x, z * (T::one() + eta))
}

/// Physical point `(x, y)` to reference point `(x, y / (1 + η(x)))`.
pub fn map_to_reference<T: Real>(x: T, y: T, geometry: &BeamGeometry<T>) -> (T, T) {
    let eta = periodic_linear(&geometry.eta, x);
    (x, y / (T::one() + eta))
}

/// Outward unit normal `(-η_x, 1) / sqrt(1 + η_x²)` of the deformed wall.
pub fn normal_vector<T: Real>(eta_x: T) -> [T; 2] {
    let s = (T::one() + eta_x * eta_x).sqrt();
    [-eta_x / s, T::one() / s]
}

/// Area element of the inverse map: `1 + η(x)` in every column.
pub fn jacobian_weight<T: Real>(geometry: &BeamGeometry<T>) -> ScalarField<T> {
    ScalarField::from_columns(geometry.grid(), &geometry.one_plus_eta)
}

/// Samples a function given on the moving domain at the images of the
/// reference nodes of `grid`. When `grid` differs from the beam grid, `η` is
/// sampled with periodic cubic interpolation.
pub fn pull_back_field<T: Real>(
    physical: impl Fn(T, T) -> T,
    geometry: &BeamGeometry<T>,
    grid: Grid<T>,
) -> ScalarField<T> {
    let same = grid.same_shape(&geometry.grid());
    let eta_col: Vec<T> = (0..grid.nx)
        .map(|i| {
            if same {
                geometry.eta.values[i]
            } else {
                periodic_cubic(&geometry.eta, grid.x(i))
            }
        })
        .collect();
    let mut out = ScalarField::zeros(grid);
    for j in 0..=grid.nz {
        let z = grid.z(j);
        for (i, &e) in eta_col.iter().enumerate() {
            let x = grid.x(i);
            out.set(i, j, physical(x, z * (T::one() + e)));
        }
    }
    out
}
