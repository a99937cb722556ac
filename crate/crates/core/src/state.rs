//! Physical constants and one time level of the homogenized unknowns.

use crate::error::{FsiError, Result};
use crate::fields::{BeamField, Grid, ScalarField, VectorField};
use crate::geometry::{build_geometry, BeamGeometry};
use crate::scalar::Real;

/// Fluid and beam constants. Pressure law `p(ρ) = a ρ^γ`; the external
/// pressure is `p_ext = a ρ̄^γ`, so `(ρ̄, 0, 0)` is a steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams<T> {
    pub mu: T,
    pub mu_prime: T,
    pub a: T,
    pub gamma: T,
    pub rho_bar: T,
    /// Beam rigidity.
    pub alpha: T,
    /// Beam stretching.
    pub beta: T,
    /// Structural damping.
    pub delta: T,
    pub length: T,
}

impl<T: Real> Default for PhysParams<T> {
    fn default() -> Self {
        Self {
            mu: T::lit(0.1),
            mu_prime: T::lit(0.05),
            a: T::one(),
            gamma: T::lit(1.4),
            rho_bar: T::one(),
            alpha: T::one(),
            beta: T::one(),
            delta: T::one(),
            length: T::one(),
        }
    }
}

impl<T: Real> PhysParams<T> {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool, &str); 9] = [
            ("mu", self.mu > T::zero(), "must be > 0"),
            ("mu_prime", self.mu_prime >= T::zero(), "must be >= 0"),
            ("a", self.a > T::zero(), "must be > 0"),
            ("gamma", self.gamma > T::one(), "must be > 1"),
            ("rho_bar", self.rho_bar > T::zero(), "must be > 0"),
            ("alpha", self.alpha > T::zero(), "must be > 0"),
            ("beta", self.beta >= T::zero(), "must be >= 0"),
            ("delta", self.delta > T::zero(), "must be > 0"),
            ("L", self.length > T::zero(), "must be > 0"),
        ];
        for (name, ok, why) in checks {
            if !ok {
                return Err(FsiError::invalid(name, why));
            }
        }
        let all = [
            self.mu,
            self.mu_prime,
            self.a,
            self.gamma,
            self.rho_bar,
            self.alpha,
            self.beta,
            self.delta,
            self.length,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::invalid("physics", "all constants must be finite"));
        }
        Ok(())
    }

    /// External pressure `a ρ̄^γ`.
    pub fn p_ext(&self) -> T {
        self.a * self.rho_bar.powf(self.gamma)
    }
}

/// One time level of `(σ, w, η, η_t)` with `σ = ρ̂ − ρ̄` and
/// `w = v − z η_t e₂` vanishing on both walls.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState<T> {
    pub sigma: ScalarField<T>,
    pub w: VectorField<T>,
    pub eta: BeamField<T>,
    pub eta_t: BeamField<T>,
    pub t: T,
}

/// Time derivatives carried alongside a state: `w_t` and `η_tt`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRates<T> {
    pub w_t: VectorField<T>,
    pub eta_tt: BeamField<T>,
}

impl<T: Real> StateRates<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            w_t: VectorField::zeros(grid),
            eta_tt: BeamField::zeros(grid),
        }
    }
}

impl<T: Real> CoupledState<T> {
    /// The rest state `(ρ̄, 0, 0, 0)` at time `t`.
    pub fn steady(grid: Grid<T>, t: T) -> Self {
        Self {
            sigma: ScalarField::zeros(grid),
            w: VectorField::zeros(grid),
            eta: BeamField::zeros(grid),
            eta_t: BeamField::zeros(grid),
            t,
        }
    }

    pub fn grid(&self) -> Grid<T> {
        self.sigma.grid
    }

    /// Density `σ + ρ̄` on the reference grid.
    pub fn density(&self, params: &PhysParams<T>) -> ScalarField<T> {
        let rb = params.rho_bar;
        self.sigma.map(|s| s + rb)
    }

    /// Transformed velocity `v = w + z η_t e₂`.
    pub fn velocity(&self) -> VectorField<T> {
        lift_velocity(&self.w, &self.eta_t)
    }

    pub fn geometry(&self, delta0: T) -> Result<BeamGeometry<T>> {
        build_geometry(&self.eta, delta0)
    }

    pub fn all_finite(&self) -> bool {
        self.sigma.all_finite()
            && self.w.all_finite()
            && self.eta.all_finite()
            && self.eta_t.all_finite()
            && self.t.is_finite()
    }

    /// Checks that all fields live on `grid`.
    pub fn check_shape(&self, grid: &Grid<T>) -> Result<()> {
        let ok = self.sigma.grid.same_shape(grid)
            && self.w.c1.grid.same_shape(grid)
            && self.w.c2.grid.same_shape(grid)
            && self.eta.grid.same_shape(grid)
            && self.eta_t.grid.same_shape(grid)
            && self.sigma.values.len() == grid.len()
            && self.w.c1.values.len() == grid.len()
            && self.w.c2.values.len() == grid.len()
            && self.eta.values.len() == grid.nx
            && self.eta_t.values.len() == grid.nx;
        if ok {
            Ok(())
        } else {
            Err(FsiError::ShapeMismatch(format!(
                "state does not match grid {}x{}",
                grid.nx, grid.nz
            )))
        }
    }
}

/// `w + z g e₂` for a beam function `g`.
pub fn lift_velocity<T: Real>(w: &VectorField<T>, g: &BeamField<T>) -> VectorField<T> {
    VectorField {
        c1: w.c1.clone(),
        c2: w.c2.map_with_column(g, |v, gi, z| v + z * gi),
    }
}

/// `z g e₂`.
pub fn lift<T: Real>(g: &BeamField<T>) -> VectorField<T> {
    lift_velocity(&VectorField::zeros(g.grid), g)
}
