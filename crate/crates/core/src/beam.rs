//! Damped Euler–Bernoulli beam on the torus,
//! `η_tt − β η_xx − δ η_txx + α η_xxxx = G3`, written as the first-order
//! system `Y_t = A Y + (0, G3)` with `Y = (η, η_t)` and integrated mode by
//! mode with Crank–Nicolson. Fourier diagonalization is exact, so the only
//! discretization error is temporal.

use num_complex::Complex;

use crate::fields::{BeamField, Grid};
use crate::scalar::Real;
use crate::spectral::{wavenumber, LineTransform};
use crate::state::PhysParams;

pub type Mat2<T> = [[T; 2]; 2];

/// Fourier symbol of the beam operator for wavenumber `κ`:
/// `[[0, 1], [−ακ⁴ − βκ², −δκ²]]`.
pub fn symbol<T: Real>(kappa: T, params: &PhysParams<T>) -> Mat2<T> {
    let k2 = kappa * kappa;
    [
        [T::zero(), T::one()],
        [-params.alpha * k2 * k2 - params.beta * k2, -params.delta * k2],
    ]
}

/// `A_j` for storage index `j` of the beam grid.
pub fn mode_matrix<T: Real>(j: usize, grid: &Grid<T>, params: &PhysParams<T>) -> Mat2<T> {
    symbol(wavenumber(grid, j), params)
}

/// Roots of `λ² + δκ²λ + (ακ⁴ + βκ²) = 0` (eigenvalues of the symbol).
pub fn dispersion_roots(kappa: f64, alpha: f64, beta: f64, delta: f64) -> [Complex<f64>; 2] {
    let k2 = kappa * kappa;
    let b = delta * k2;
    let c = alpha * k2 * k2 + beta * k2;
    let disc = Complex::new(b * b - 4.0 * c, 0.0).sqrt();
    [(-b + disc) / 2.0, (-b - disc) / 2.0]
}

fn inv2<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

fn mul2<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut c = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Crank–Nicolson propagator `(I − dt/2 A)⁻¹ (I + dt/2 A)` and the forcing
/// map `dt (I − dt/2 A)⁻¹`.
pub fn cn_matrices<T: Real>(a: &Mat2<T>, dt: T) -> (Mat2<T>, Mat2<T>) {
    let h = dt / T::lit(2.0);
    let minus = [
        [T::one() - h * a[0][0], -h * a[0][1]],
        [-h * a[1][0], T::one() - h * a[1][1]],
    ];
    let plus = [
        [T::one() + h * a[0][0], h * a[0][1]],
        [h * a[1][0], T::one() + h * a[1][1]],
    ];
    let mi = inv2(&minus);
    let forcing = [[mi[0][0] * dt, mi[0][1] * dt], [mi[1][0] * dt, mi[1][1] * dt]];
    (mul2(&mi, &plus), forcing)
}

/// Beam energies `½∫η_t²`, `β/2 ∫η_x²`, `α/2 ∫η_xx²` and the damping rate
/// `δ∫η_tx²`, all by Parseval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BeamEnergy<T> {
    pub kinetic: T,
    pub stretch: T,
    pub bend: T,
    pub dissipation: T,
}

impl<T: Real> BeamEnergy<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.stretch + self.bend
    }
}

/// Beam solver for one grid and time step: cached transform and per-mode
/// propagators.
#[derive(Debug, Clone)]
pub struct BeamSolver<T: Real> {
    transform: LineTransform<T>,
    params: PhysParams<T>,
    dt: T,
    propagators: Vec<(Mat2<T>, Mat2<T>)>,
}

/// Output of [`BeamSolver::solve_window`]: levels `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWindow<T> {
    pub eta: Vec<BeamField<T>>,
    pub eta_t: Vec<BeamField<T>>,
    pub eta_tt: Vec<BeamField<T>>,
    /// Largest imaginary residue discarded on the way back to real space.
    pub max_residue: T,
}

impl<T: Real> BeamSolver<T> {
    pub fn new(grid: Grid<T>, params: PhysParams<T>, dt: T) -> Self {
        let propagators = (0..grid.nx)
            .map(|j| cn_matrices(&mode_matrix(j, &grid, &params), dt))
            .collect();
        Self {
            transform: LineTransform::new(grid),
            params,
            dt,
            propagators,
        }
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// One Crank–Nicolson step with the forcing `g3_half` held over the step.
    pub fn step(
        &self,
        eta: &BeamField<T>,
        eta_t: &BeamField<T>,
        g3_half: &BeamField<T>,
    ) -> (BeamField<T>, BeamField<T>, T) {
        let e = self.transform.forward(eta);
        let v = self.transform.forward(eta_t);
        let g = self.transform.forward(g3_half);
        let n = e.len();
        let mut e1 = vec![Complex::new(T::zero(), T::zero()); n];
        let mut v1 = e1.clone();
        for j in 0..n {
            let (p, f) = &self.propagators[j];
            e1[j] = e[j] * p[0][0] + v[j] * p[0][1] + g[j] * f[0][1];
            v1[j] = e[j] * p[1][0] + v[j] * p[1][1] + g[j] * f[1][1];
        }
        enforce_conjugate_symmetry(&mut e1);
        enforce_conjugate_symmetry(&mut v1);
        let (eta1, r1) = self.transform.inverse_with_residue(&e1);
        let (eta_t1, r2) = self.transform.inverse_with_residue(&v1);
        (eta1, eta_t1, r1.max(r2))
    }

    /// `η_tt = G3 + β η_xx + δ η_txx − α η_xxxx`, spectrally.
    pub fn acceleration(&self, g3: &BeamField<T>, eta: &BeamField<T>, eta_t: &BeamField<T>) -> BeamField<T> {
        acceleration_with(&self.transform, &self.params, g3, eta, eta_t)
    }

    /// Steps through a window. `g3` holds the forcing at levels `0..=n`; the
    /// step from level `k` to `k+1` uses the average of levels `k` and `k+1`.
    pub fn solve_window(
        &self,
        eta0: &BeamField<T>,
        eta_t0: &BeamField<T>,
        g3: &[BeamField<T>],
    ) -> BeamWindow<T> {
        let half = T::lit(0.5);
        let mut out = BeamWindow {
            eta: vec![eta0.clone()],
            eta_t: vec![eta_t0.clone()],
            eta_tt: vec![self.acceleration(&g3[0], eta0, eta_t0)],
            max_residue: T::zero(),
        };
        for k in 0..g3.len().saturating_sub(1) {
            let g_half = g3[k].zip_map(&g3[k + 1], |a, b| half * (a + b));
            let (e, v, r) = self.step(&out.eta[k], &out.eta_t[k], &g_half);
            out.max_residue = out.max_residue.max(r);
            out.eta_tt.push(self.acceleration(&g3[k + 1], &e, &v));
            out.eta.push(e);
            out.eta_t.push(v);
        }
        out
    }

    pub fn energy(&self, eta: &BeamField<T>, eta_t: &BeamField<T>) -> BeamEnergy<T> {
        energy_with(&self.transform, &self.params, eta, eta_t)
    }
}

/// Makes mode `N − j` the conjugate of mode `j` and zeroes the imaginary part
/// of the self-conjugate modes, so the inverse transform is real.
fn enforce_conjugate_symmetry<T: Real>(m: &mut [Complex<T>]) {
    let n = m.len();
    let half = T::lit(0.5);
    m[0].im = T::zero();
    for j in 1..=(n - 1) / 2 {
        let a = m[j];
        let b = m[n - j].conj();
        let avg = (a + b) * half;
        m[j] = avg;
        m[n - j] = avg.conj();
    }
    if n % 2 == 0 {
        m[n / 2].im = T::zero();
    }
}

fn acceleration_with<T: Real>(
    tr: &LineTransform<T>,
    p: &PhysParams<T>,
    g3: &BeamField<T>,
    eta: &BeamField<T>,
    eta_t: &BeamField<T>,
) -> BeamField<T> {
    let e = tr.forward(eta);
    let v = tr.forward(eta_t);
    let mut m = vec![Complex::new(T::zero(), T::zero()); e.len()];
    for j in 0..e.len() {
        let k2 = {
            let k = tr.wavenumber(j);
            k * k
        };
        m[j] = e[j] * (-p.beta * k2 - p.alpha * k2 * k2) + v[j] * (-p.delta * k2);
    }
    enforce_conjugate_symmetry(&mut m);
    g3.add(&tr.inverse(&m))
}

fn energy_with<T: Real>(
    tr: &LineTransform<T>,
    p: &PhysParams<T>,
    eta: &BeamField<T>,
    eta_t: &BeamField<T>,
) -> BeamEnergy<T> {
    let half = T::lit(0.5);
    BeamEnergy {
        kinetic: half * tr.derivative_energy(eta_t, 0),
        stretch: half * p.beta * tr.derivative_energy(eta, 1),
        bend: half * p.alpha * tr.derivative_energy(eta, 2),
        dissipation: p.delta * tr.derivative_energy(eta_t, 1),
    }
}

/// One-off beam step; see [`BeamSolver::step`].
pub fn beam_step<T: Real>(
    eta: &BeamField<T>,
    eta_t: &BeamField<T>,
    g3_half: &BeamField<T>,
    dt: T,
    params: &PhysParams<T>,
) -> (BeamField<T>, BeamField<T>) {
    let (e, v, _) = BeamSolver::new(eta.grid, *params, dt).step(eta, eta_t, g3_half);
    (e, v)
}

/// `η_tt` from the beam equation; see [`BeamSolver::acceleration`].
pub fn beam_acceleration<T: Real>(
    g3: &BeamField<T>,
    eta: &BeamField<T>,
    eta_t: &BeamField<T>,
    params: &PhysParams<T>,
) -> BeamField<T> {
    acceleration_with(&LineTransform::new(eta.grid), params, g3, eta, eta_t)
}

pub fn beam_energy<T: Real>(
    eta: &BeamField<T>,
    eta_t: &BeamField<T>,
    params: &PhysParams<T>,
) -> BeamEnergy<T> {
    energy_with(&LineTransform::new(eta.grid), params, eta, eta_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dft_x;
    use std::f64::consts::PI;

    fn unit_params(l: f64) -> PhysParams<f64> {
        PhysParams {
            alpha: 1.0,
            beta: 1.0,
            delta: 1.0,
            length: l,
            ..PhysParams::default()
        }
    }

    #[test]
    fn mode_matrix_examples() {
        let l = 2.0 * PI;
        let g = Grid::new(8, 4, l).unwrap();
        let p = unit_params(l);
        assert_eq!(mode_matrix(0, &g, &p), [[0.0, 1.0], [0.0, 0.0]]);
        let a = mode_matrix(1, &g, &p);
        assert!((a[1][0] + 2.0).abs() < 1e-14 && (a[1][1] + 1.0).abs() < 1e-14);
        let r = dispersion_roots(1.0, 1.0, 1.0, 1.0);
        assert!((r[0] - Complex::new(-0.5, 7f64.sqrt() / 2.0)).norm() < 1e-14);
        // trace and determinant of A agree with the roots
        assert!(((r[0] + r[1]).re - (a[0][0] + a[1][1])).abs() < 1e-14);
        assert!(((r[0] * r[1]).re - (a[0][0] * a[1][1] - a[0][1] * a[1][0])).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_have_negative_real_part() {
        for j in 1..20 {
            for r in dispersion_roots(j as f64 * 0.7, 0.3, 0.0, 0.01) {
                assert!(r.re < 0.0);
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Grid::new(16, 4, 1.0).unwrap();
        let z = BeamField::zeros(g);
        let (e, v) = beam_step(&z, &z, &z, 0.01, &unit_params(1.0));
        assert!(e.values.iter().chain(&v.values).all(|&x| x == 0.0));
    }

    #[test]
    fn mean_mode_is_exact_for_constant_forcing() {
        let g = Grid::new(16, 4, 1.0).unwrap();
        let p = unit_params(1.0);
        let solver = BeamSolver::new(g, p, 0.013);
        let gval = 0.37;
        let g3: Vec<_> = (0..=50).map(|_| BeamField::constant(g, gval)).collect();
        let z = BeamField::zeros(g);
        let w = solver.solve_window(&z, &z, &g3);
        let t = 50.0 * 0.013;
        for &v in &w.eta.last().unwrap().values {
            assert!((v - gval * t * t / 2.0).abs() < 1e-12);
        }
        for &v in &w.eta_t.last().unwrap().values {
            assert!((v - gval * t).abs() < 1e-12);
        }
        for a in &w.eta_tt {
            assert!(a.values.iter().all(|&v| (v - gval).abs() < 1e-12));
        }
    }

    #[test]
    fn mean_is_conserved_without_forcing() {
        let g = Grid::new(16, 4, 2.0).unwrap();
        let p = unit_params(2.0);
        let eta0 = BeamField::from_fn(g, |x| 0.3 + 0.1 * (PI * x).sin() + 0.05 * (2.0 * PI * x).cos());
        let solver = BeamSolver::new(g, p, 0.01);
        let g3 = vec![BeamField::zeros(g); 101];
        let w = solver.solve_window(&eta0, &BeamField::zeros(g), &g3);
        for e in &w.eta {
            assert!((e.integrate() / 2.0 - 0.3).abs() < 1e-13);
        }
        assert!(w.max_residue < 1e-13);
    }

    #[test]
    fn single_mode_matches_cn_rational_approximation() {
        let l = 2.0 * PI;
        let g = Grid::new(16, 4, l).unwrap();
        let p = unit_params(l);
        let dt = 0.02;
        let solver = BeamSolver::new(g, p, dt);
        let eta0 = BeamField::from_fn(g, |x| (2.0 * x).cos());
        let steps = 40;
        let g3 = vec![BeamField::zeros(g); steps + 1];
        let w = solver.solve_window(&eta0, &BeamField::zeros(g), &g3);
        // independent: CN on the 2x2 system for κ = 2 applied to (1, 0)
        let k2: f64 = 4.0;
        let (a, b) = (-(k2 * k2) - k2, -k2);
        let (mut y0, mut y1) = (1.0f64, 0.0f64);
        let h = dt / 2.0;
        for _ in 0..steps {
            // (I - hA) y' = (I + hA) y
            let r0 = y0 + h * y1;
            let r1 = h * a * y0 + (1.0 + h * b) * y1;
            let det = (1.0 - h * b) - (-h) * (-h * a);
            let n0 = ((1.0 - h * b) * r0 + h * r1) / det;
            let n1 = (h * a * r0 + r1) / det;
            y0 = n0;
            y1 = n1;
        }
        let last = w.eta.last().unwrap();
        for i in 0..g.nx {
            assert!((last.values[i] - y0 * (2.0 * g.x(i)).cos()).abs() < 1e-12);
        }
        let m = dft_x(last);
        assert!((m[2].re / 8.0 - y0).abs() < 1e-12);
    }

    #[test]
    fn energy_is_non_increasing() {
        let g = Grid::new(32, 4, 1.0).unwrap();
        let p = PhysParams {
            alpha: 0.01,
            beta: 0.5,
            delta: 0.02,
            length: 1.0,
            ..PhysParams::default()
        };
        for &dt in &[1e-2, 1e-3] {
            let solver = BeamSolver::new(g, p, dt);
            let eta1 = BeamField::from_fn(g, |x| 0.01 * (2.0 * PI * x).sin());
            let z = BeamField::zeros(g);
            let g3 = vec![z.clone(); 200];
            let w = solver.solve_window(&z, &eta1, &g3);
            let e: Vec<f64> = w.eta.iter().zip(&w.eta_t).map(|(a, b)| solver.energy(a, b).total()).collect();
            for k in 1..e.len() {
                assert!(e[k] <= e[k - 1] * (1.0 + 1e-12));
            }
            assert!(e.last().unwrap() < &e[0]);
        }
    }

    #[test]
    fn acceleration_matches_equation() {
        let l = 2.0;
        let g = Grid::new(32, 4, l).unwrap();
        let p = PhysParams {
            alpha: 0.3,
            beta: 0.7,
            delta: 0.2,
            length: l,
            ..PhysParams::default()
        };
        let k = PI;
        let eta = BeamField::from_fn(g, |x| (k * x).sin());
        let eta_t = BeamField::from_fn(g, |x| (k * x).cos());
        let g3 = BeamField::constant(g, 0.5);
        let acc = beam_acceleration(&g3, &eta, &eta_t, &p);
        // roundoff in the high modes is amplified by κ⁴
        for i in 0..g.nx {
            let x = g.x(i);
            let expect = 0.5 - p.beta * k * k * (k * x).sin() - p.delta * k * k * (k * x).cos()
                - p.alpha * k.powi(4) * (k * x).sin();
            assert!((acc.values[i] - expect).abs() < 1e-9, "{} {}", acc.values[i], expect);
        }
        let e = beam_energy(&eta, &eta_t, &p);
        assert!((e.kinetic - 0.5 * l / 2.0).abs() < 1e-12);
        assert!((e.dissipation - p.delta * k * k * l / 2.0).abs() < 1e-11);
    }
}
