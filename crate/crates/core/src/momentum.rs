//! Linear momentum solver: `ρ w_t − μΔw − (μ+μ')∇div w = G2`, `w = 0` on both
//! walls, by implicit Euler with a frozen density coefficient. Each step is a
//! Jacobi-preconditioned conjugate-gradient solve.

use crate::error::{FsiError, Result};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::scalar::Real;
use crate::state::PhysParams;

/// Matrix-free discrete Lamé operator `−μΔ − (μ+μ')∇div` on interior rows,
/// with the wall values eliminated (read as zero). Centered second
/// differences and the 4-point cross stencil for `∂x∂z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameOperator<T> {
    pub grid: Grid<T>,
    pub mu: T,
    /// `μ + μ'`.
    pub lambda: T,
    /// Diagonal entries for the two components.
    pub diag: [T; 2],
}

pub fn assemble_lame<T: Real>(grid: Grid<T>, params: &PhysParams<T>) -> LameOperator<T> {
    let two = T::lit(2.0);
    let (ix2, iz2) = (T::one() / (grid.dx * grid.dx), T::one() / (grid.dz * grid.dz));
    let mu = params.mu;
    let lambda = params.mu + params.mu_prime;
    let lap = mu * (two * ix2 + two * iz2);
    LameOperator {
        grid,
        mu,
        lambda,
        diag: [lap + lambda * two * ix2, lap + lambda * two * iz2],
    }
}

impl<T: Real> LameOperator<T> {
    /// Applies the operator to a flat `[c1 | c2]` vector. Wall rows of the
    /// input are ignored and wall rows of the output are zero.
    fn apply_flat(&self, u: &[T], out: &mut [T]) {
        let g = &self.grid;
        let n = g.len();
        let (u1, u2) = u.split_at(n);
        let (o1, o2) = out.split_at_mut(n);
        let two = T::lit(2.0);
        let ix2 = T::one() / (g.dx * g.dx);
        let iz2 = T::one() / (g.dz * g.dz);
        let ixz = T::one() / (T::lit(4.0) * g.dx * g.dz);
        let (mu, la) = (self.mu, self.lambda);
        let at = |f: &[T], i: usize, j: usize| -> T {
            if j == 0 || j == g.nz {
                T::zero()
            } else {
                f[g.idx(i, j)]
            }
        };
        for i in 0..g.nx {
            o1[g.idx(i, 0)] = T::zero();
            o2[g.idx(i, 0)] = T::zero();
            o1[g.idx(i, g.nz)] = T::zero();
            o2[g.idx(i, g.nz)] = T::zero();
        }
        for j in 1..g.nz {
            for i in 0..g.nx {
                let (e, w) = (g.east(i), g.west(i));
                let k = g.idx(i, j);
                let d2 = |f: &[T]| {
                    let c = f[k];
                    ((at(f, e, j) - two * c + at(f, w, j)) * ix2, (at(f, i, j + 1) - two * c + at(f, i, j - 1)) * iz2)
                };
                let cross = |f: &[T]| (at(f, e, j + 1) - at(f, e, j - 1) - at(f, w, j + 1) + at(f, w, j - 1)) * ixz;
                let (a_xx, a_zz) = d2(u1);
                let (b_xx, b_zz) = d2(u2);
                o1[k] = -mu * (a_xx + a_zz) - la * (a_xx + cross(u2));
                o2[k] = -mu * (b_xx + b_zz) - la * (cross(u1) + b_zz);
            }
        }
    }

    pub fn apply(&self, u: &VectorField<T>) -> VectorField<T> {
        let n = self.grid.len();
        let mut flat = Vec::with_capacity(2 * n);
        flat.extend_from_slice(&u.c1.values);
        flat.extend_from_slice(&u.c2.values);
        let mut out = vec![T::zero(); 2 * n];
        self.apply_flat(&flat, &mut out);
        unflatten(self.grid, out)
    }

    /// Number of unknowns (interior nodes times two).
    pub fn unknowns(&self) -> usize {
        2 * self.grid.nx * (self.grid.nz - 1)
    }
}

fn flatten<T: Real>(u: &VectorField<T>) -> Vec<T> {
    let mut v = Vec::with_capacity(2 * u.c1.values.len());
    v.extend_from_slice(&u.c1.values);
    v.extend_from_slice(&u.c2.values);
    v
}

fn unflatten<T: Real>(grid: Grid<T>, mut v: Vec<T>) -> VectorField<T> {
    let c2 = v.split_off(grid.len());
    VectorField {
        c1: ScalarField { grid, values: v },
        c2: ScalarField { grid, values: c2 },
    }
}

fn zero_wall_rows<T: Real>(grid: &Grid<T>, v: &mut [T]) {
    let n = grid.len();
    for c in 0..2 {
        for i in 0..grid.nx {
            v[c * n + grid.idx(i, 0)] = T::zero();
            v[c * n + grid.idx(i, grid.nz)] = T::zero();
        }
    }
}

/// Fixed-order dot product.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats<T> {
    pub iterations: usize,
    pub relative_residual: T,
}

/// Implicit-Euler stepper for one `(grid, params, dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSolver<T> {
    pub op: LameOperator<T>,
    pub dt: T,
    pub rho_bar: T,
    pub lin_tol: T,
    /// Admissible band for `σ + ρ̄` (`[m/2, 2M]`); `None` only requires
    /// positivity.
    pub density_band: Option<(T, T)>,
    /// Iteration cap; defaults to `10 √(unknowns)`.
    pub max_iterations: usize,
}

impl<T: Real> MomentumSolver<T> {
    pub fn new(grid: Grid<T>, params: &PhysParams<T>, dt: T, lin_tol: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(FsiError::invalid("dt", "must be > 0"));
        }
        if !(lin_tol > T::zero()) {
            return Err(FsiError::invalid("lin_tol", "must be > 0"));
        }
        let op = assemble_lame(grid, params);
        Ok(Self {
            max_iterations: (10.0 * (op.unknowns() as f64).sqrt()).ceil() as usize,
            op,
            dt,
            rho_bar: params.rho_bar,
            lin_tol,
            density_band: None,
        })
    }

    pub fn with_density_band(mut self, lower: T, upper: T) -> Self {
        self.density_band = Some((lower, upper));
        self
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iterations
    }

    fn coefficient(&self, sigma_bar: &ScalarField<T>) -> Result<Vec<T>> {
        let g = &self.op.grid;
        let (lower, upper) = match self.density_band {
            Some(b) => b,
            None => (T::min_positive_value(), T::infinity()),
        };
        let mut rho = Vec::with_capacity(g.len());
        for (k, &s) in sigma_bar.values.iter().enumerate() {
            let r = s + self.rho_bar;
            if !(r >= lower && r <= upper) {
                return Err(FsiError::CoefficientOutOfBounds {
                    value: r.as_f64(),
                    node: k,
                    lower: lower.as_f64(),
                    upper: upper.as_f64(),
                });
            }
            rho.push(r);
        }
        Ok(rho)
    }

    /// Solves `(ρ/dt + A) w = ρ w_n / dt + G2` with `ρ = σ̄ + ρ̄`. `guess`
    /// warm-starts the iteration.
    pub fn step(
        &self,
        w_n: &VectorField<T>,
        sigma_bar: &ScalarField<T>,
        g2: &VectorField<T>,
        guess: Option<&VectorField<T>>,
    ) -> Result<(VectorField<T>, SolveStats<T>)> {
        let g = self.op.grid;
        for f in [&w_n.c1, &w_n.c2, &g2.c1, &g2.c2, sigma_bar] {
            if !f.grid.same_shape(&g) {
                return Err(FsiError::ShapeMismatch("momentum step input is not on the solver grid".into()));
            }
        }
        let rho = self.coefficient(sigma_bar)?;
        let n = g.len();
        let inv_dt = T::one() / self.dt;
        let mass: Vec<T> = (0..2 * n).map(|k| rho[k % n] * inv_dt).collect();

        let wn = flatten(w_n);
        let f = flatten(g2);
        let mut b: Vec<T> = (0..2 * n).map(|k| mass[k] * wn[k] + f[k]).collect();
        zero_wall_rows(&g, &mut b);
        let b_norm = dot(&b, &b).sqrt();
        if b_norm == T::zero() {
            return Ok((
                VectorField::zeros(g),
                SolveStats {
                    iterations: 0,
                    relative_residual: T::zero(),
                },
            ));
        }
        if !b_norm.is_finite() {
            return Err(FsiError::LinearSolveDiverged {
                iterations: 0,
                residual: f64::NAN,
            });
        }

        let diag: Vec<T> = (0..2 * n).map(|k| mass[k] + self.op.diag[k / n]).collect();
        let apply = |x: &[T], out: &mut [T]| {
            self.op.apply_flat(x, out);
            for k in 0..2 * n {
                out[k] += mass[k] * x[k];
            }
            zero_wall_rows(&g, out);
        };

        let mut x = guess.map(flatten).unwrap_or_else(|| vec![T::zero(); 2 * n]);
        zero_wall_rows(&g, &mut x);
        let mut ax = vec![T::zero(); 2 * n];
        apply(&x, &mut ax);
        let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let mut z: Vec<T> = r.iter().zip(&diag).map(|(&ri, &di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![T::zero(); 2 * n];
        let tol = self.lin_tol * b_norm;
        let cap = self.iteration_cap();
        let mut res = dot(&r, &r).sqrt();
        let mut it = 0;
        while res > tol {
            if it == cap || !res.is_finite() {
                return Err(FsiError::LinearSolveDiverged {
                    iterations: it,
                    residual: (res / b_norm).as_f64(),
                });
            }
            apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for k in 0..2 * n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            for k in 0..2 * n {
                z[k] = r[k] / diag[k];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..2 * n {
                p[k] = z[k] + beta * p[k];
            }
            res = dot(&r, &r).sqrt();
            it += 1;
        }
        zero_wall_rows(&g, &mut x);
        Ok((
            unflatten(g, x),
            SolveStats {
                iterations: it,
                relative_residual: res / b_norm,
            },
        ))
    }

    /// Steps through a window: level `n` uses `σ̄` and `G2` at level `n`.
    /// Returns `w` at levels `0..=N` (level 0 is `w0`).
    pub fn solve_window(
        &self,
        w0: &VectorField<T>,
        sigma_traj: &[ScalarField<T>],
        g2_traj: &[VectorField<T>],
    ) -> Result<Vec<VectorField<T>>> {
        if sigma_traj.len() != g2_traj.len() || sigma_traj.is_empty() {
            return Err(FsiError::ShapeMismatch(format!(
                "sigma has {} levels, G2 has {}",
                sigma_traj.len(),
                g2_traj.len()
            )));
        }
        let mut out = Vec::with_capacity(sigma_traj.len());
        out.push(w0.clone());
        for k in 1..sigma_traj.len() {
            let (w, _) = self.step(&out[k - 1], &sigma_traj[k], &g2_traj[k], Some(&out[k - 1]))?;
            out.push(w);
        }
        Ok(out)
    }
}

/// One implicit-Euler step with a freshly assembled operator.
pub fn momentum_step<T: Real>(
    w_n: &VectorField<T>,
    sigma_bar: &ScalarField<T>,
    g2: &VectorField<T>,
    dt: T,
    params: &PhysParams<T>,
    lin_tol: T,
) -> Result<VectorField<T>> {
    let s = MomentumSolver::new(w_n.grid(), params, dt, lin_tol)?;
    Ok(s.step(w_n, sigma_bar, g2, None)?.0)
}
