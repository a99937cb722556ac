//! Grids, nodal fields and second-order finite-difference calculus on the
//! reference channel `T_L x (0, 1)`.
//!
//! Storage is row-major with `x` as the fastest index: node `(i, j)` lives at
//! `j * nx + i`, `i` in `0..nx` (periodic, no duplicated endpoint) and `j` in
//! `0..=nz` (both walls included).

use crate::error::{FsiError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub nx: usize,
    pub nz: usize,
    pub length: T,
    pub dx: T,
    pub dz: T,
}

impl<T: Real> Grid<T> {
    pub fn new(nx: usize, nz: usize, length: T) -> Result<Self> {
        if nx < 4 || nz < 4 {
            return Err(FsiError::DimensionTooSmall { nx, nz });
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(FsiError::NonpositiveLength(length.as_f64()));
        }
        Ok(Self {
            nx,
            nz,
            length,
            dx: length / T::from_usize_lossy(nx),
            dz: T::one() / T::from_usize_lossy(nz),
        })
    }

    /// Number of nodes in a scalar field, `nx * (nz + 1)`.
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * (self.nz + 1)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.dx
    }

    #[inline]
    pub fn z(&self, j: usize) -> T {
        if j == self.nz {
            T::one()
        } else {
            T::from_usize_lossy(j) * self.dz
        }
    }

    /// Area of the reference rectangle.
    pub fn area(&self) -> T {
        self.length
    }

    #[inline]
    pub(crate) fn east(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub(crate) fn west(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }

    pub(crate) fn same_shape(&self, other: &Grid<T>) -> bool {
        self.nx == other.nx && self.nz == other.nz && self.length == other.length
    }
}

/// Builds a grid; see [`Grid::new`].
pub fn make_grid<T: Real>(nx: usize, nz: usize, length: T) -> Result<Grid<T>> {
    Grid::new(nx, nz, length)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub c1: ScalarField<T>,
    pub c2: ScalarField<T>,
}

/// Function of `x` alone on the periodic line `z = 1` (beam unknowns).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamField<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..=grid.nz {
            let z = grid.z(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), z));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FsiError::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Field equal to `z` at every node.
    pub fn z_coordinate(grid: Grid<T>) -> Self {
        Self::from_fn(grid, |_, z| z)
    }

    /// Extends a beam function constantly in `z`.
    pub fn from_columns(grid: Grid<T>, beam: &BeamField<T>) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..=grid.nz {
            values.extend_from_slice(&beam.values);
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn row(&self, j: usize) -> &[T] {
        let nx = self.grid.nx;
        &self.values[j * nx..(j + 1) * nx]
    }

    /// Trace on the top wall `z = 1` as a beam function.
    pub fn top_trace(&self) -> BeamField<T> {
        BeamField {
            grid: self.grid,
            values: self.row(self.grid.nz).to_vec(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(self.grid.same_shape(&other.grid));
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Applies `f(value, beam[i], z)` column by column.
    pub fn map_with_column(&self, beam: &BeamField<T>, f: impl Fn(T, T, T) -> T) -> Self {
        let g = self.grid;
        let mut values = Vec::with_capacity(g.len());
        for j in 0..=g.nz {
            let z = g.z(j);
            for i in 0..g.nx {
                values.push(f(self.at(i, j), beam.values[i], z));
            }
        }
        Self { grid: g, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Centered difference in `x` with periodic wrap.
    pub fn ddx(&self) -> Self {
        let g = self.grid;
        let inv = T::one() / (T::lit(2.0) * g.dx);
        let mut out = Self::zeros(g);
        for j in 0..=g.nz {
            for i in 0..g.nx {
                let v = (self.at(g.east(i), j) - self.at(g.west(i), j)) * inv;
                out.set(i, j, v);
            }
        }
        out
    }

    /// Centered difference in `z`; second-order one-sided at the walls.
    pub fn ddz(&self) -> Self {
        let g = self.grid;
        let nz = g.nz;
        let inv = T::one() / (T::lit(2.0) * g.dz);
        let (three, four) = (T::lit(3.0), T::lit(4.0));
        let mut out = Self::zeros(g);
        for i in 0..g.nx {
            let b = (-three * self.at(i, 0) + four * self.at(i, 1) - self.at(i, 2)) * inv;
            out.set(i, 0, b);
            for j in 1..nz {
                out.set(i, j, (self.at(i, j + 1) - self.at(i, j - 1)) * inv);
            }
            let t = (three * self.at(i, nz) - four * self.at(i, nz - 1) + self.at(i, nz - 2)) * inv;
            out.set(i, nz, t);
        }
        out
    }

    /// Compact three-point second difference in `x`, periodic.
    pub fn d2x(&self) -> Self {
        let g = self.grid;
        let inv = T::one() / (g.dx * g.dx);
        let two = T::lit(2.0);
        let mut out = Self::zeros(g);
        for j in 0..=g.nz {
            for i in 0..g.nx {
                let v = (self.at(g.east(i), j) - two * self.at(i, j) + self.at(g.west(i), j)) * inv;
                out.set(i, j, v);
            }
        }
        out
    }

    /// Three-point second difference in `z`; four-point one-sided at the walls
    /// (exact on cubics).
    pub fn d2z(&self) -> Self {
        let g = self.grid;
        let nz = g.nz;
        let inv = T::one() / (g.dz * g.dz);
        let (two, four, five) = (T::lit(2.0), T::lit(4.0), T::lit(5.0));
        let mut out = Self::zeros(g);
        for i in 0..g.nx {
            let b = (two * self.at(i, 0) - five * self.at(i, 1) + four * self.at(i, 2)
                - self.at(i, 3))
                * inv;
            out.set(i, 0, b);
            for j in 1..nz {
                let v = (self.at(i, j + 1) - two * self.at(i, j) + self.at(i, j - 1)) * inv;
                out.set(i, j, v);
            }
            let t = (two * self.at(i, nz) - five * self.at(i, nz - 1)
                + four * self.at(i, nz - 2)
                - self.at(i, nz - 3))
                * inv;
            out.set(i, nz, t);
        }
        out
    }

    /// Mixed derivative `ddx(ddz(f))`.
    pub fn dxz(&self) -> Self {
        self.ddz().ddx()
    }

    /// Five-point Laplacian (compact second differences in both directions).
    pub fn laplacian(&self) -> Self {
        self.d2x().add(&self.d2z())
    }

    pub fn gradient(&self) -> VectorField<T> {
        VectorField {
            c1: self.ddx(),
            c2: self.ddz(),
        }
    }
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            c1: ScalarField::zeros(grid),
            c2: ScalarField::zeros(grid),
        }
    }

    pub fn new(c1: ScalarField<T>, c2: ScalarField<T>) -> Result<Self> {
        if !c1.grid.same_shape(&c2.grid) {
            return Err(FsiError::ShapeMismatch(
                "vector components on different grids".into(),
            ));
        }
        Ok(Self { c1, c2 })
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(T, T) -> (T, T)) -> Self {
        Self {
            c1: ScalarField::from_fn(grid, |x, z| f(x, z).0),
            c2: ScalarField::from_fn(grid, |x, z| f(x, z).1),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid<T> {
        self.c1.grid
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            c1: self.c1.add(&other.c1),
            c2: self.c2.add(&other.c2),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            c1: self.c1.sub(&other.c1),
            c2: self.c2.sub(&other.c2),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            c1: self.c1.scale(s),
            c2: self.c2.scale(s),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            c1: self.c1.map(&f),
            c2: self.c2.map(&f),
        }
    }

    /// Multiplies both components by a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField<T>) -> Self {
        Self {
            c1: self.c1.mul(s),
            c2: self.c2.mul(s),
        }
    }

    pub fn max_abs(&self) -> T {
        self.c1.max_abs().max(self.c2.max_abs())
    }

    pub fn all_finite(&self) -> bool {
        self.c1.all_finite() && self.c2.all_finite()
    }

    pub fn divergence(&self) -> ScalarField<T> {
        self.c1.ddx().add(&self.c2.ddz())
    }

    /// Largest absolute value on the wall rows `z = 0` and `z = 1`.
    pub fn max_abs_on_walls(&self) -> T {
        let nz = self.grid().nz;
        [&self.c1, &self.c2]
            .iter()
            .flat_map(|c| c.row(0).iter().chain(c.row(nz).iter()))
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Overwrites both wall rows with exact zeros.
    pub fn zero_walls(&mut self) {
        let g = self.grid();
        for c in [&mut self.c1, &mut self.c2] {
            for i in 0..g.nx {
                c.set(i, 0, T::zero());
                c.set(i, g.nz, T::zero());
            }
        }
    }
}

impl<T: Real> BeamField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.nx],
        }
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> T) -> Self {
        Self {
            grid,
            values: (0..grid.nx).map(|i| f(grid.x(i))).collect(),
        }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.nx {
            return Err(FsiError::ShapeMismatch(format!(
                "expected {} beam values, got {}",
                grid.nx,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ddx(&self) -> Self {
        let g = self.grid;
        let inv = T::one() / (T::lit(2.0) * g.dx);
        Self {
            grid: g,
            values: (0..g.nx)
                .map(|i| (self.values[g.east(i)] - self.values[g.west(i)]) * inv)
                .collect(),
        }
    }

    pub fn d2x(&self) -> Self {
        let g = self.grid;
        let inv = T::one() / (g.dx * g.dx);
        let two = T::lit(2.0);
        Self {
            grid: g,
            values: (0..g.nx)
                .map(|i| {
                    (self.values[g.east(i)] - two * self.values[i] + self.values[g.west(i)]) * inv
                })
                .collect(),
        }
    }

    /// Rectangle rule over one period (exact for trigonometric polynomials of
    /// degree below `nx`).
    pub fn integrate(&self) -> T {
        let mut s = T::zero();
        for &v in &self.values {
            s += v;
        }
        s * self.grid.dx
    }

    pub fn l2_norm(&self) -> T {
        self.map(|v| v * v).integrate().sqrt()
    }
}

/// Trapezoid weight of row `j` in `z`.
#[inline]
fn z_weight<T: Real>(grid: &Grid<T>, j: usize) -> T {
    if j == 0 || j == grid.nz {
        T::lit(0.5)
    } else {
        T::one()
    }
}

/// `∫_Ω f * wgt`: trapezoid in `z`, rectangle rule in `x`. Summation order is
/// fixed (row by row) so results are reproducible bit for bit.
pub fn integrate_weighted<T: Real>(f: &ScalarField<T>, wgt: &ScalarField<T>) -> Result<T> {
    if !f.grid.same_shape(&wgt.grid) {
        return Err(FsiError::ShapeMismatch(
            "integrand and weight on different grids".into(),
        ));
    }
    let g = f.grid;
    let mut total = T::zero();
    for j in 0..=g.nz {
        let mut row = T::zero();
        for i in 0..g.nx {
            row += f.at(i, j) * wgt.at(i, j);
        }
        total += z_weight(&g, j) * row;
    }
    Ok(total * g.dx * g.dz)
}

/// `∫_Ω f` with the same rule as [`integrate_weighted`].
pub fn integrate<T: Real>(f: &ScalarField<T>) -> T {
    let g = f.grid;
    let mut total = T::zero();
    for j in 0..=g.nz {
        let mut row = T::zero();
        for &v in f.row(j) {
            row += v;
        }
        total += z_weight(&g, j) * row;
    }
    total * g.dx * g.dz
}

/// Discrete `L²(Ω)` norm.
pub fn l2_norm<T: Real>(f: &ScalarField<T>) -> T {
    integrate(&f.map(|v| v * v)).sqrt()
}

/// Discrete `L²(Ω)` norm of a vector field.
pub fn l2_norm_vec<T: Real>(u: &VectorField<T>) -> T {
    integrate(&u.c1.zip_map(&u.c2, |a, b| a * a + b * b)).sqrt()
}
