//! Linear continuity solver: `σ_t + W·∇σ = G1` over one window by the method
//! of characteristics,
//!
//! `σ(x, t_n) = σ₀(X(0)) + ∫₀^{t_n} G1(X(s), s) ds`
//!
//! where `X` is the characteristic through `(x, t_n)`. Characteristics are
//! traced backward with midpoint RK2 (`W` sampled bilinearly, periodic in `x`,
//! clamped in `z`); `σ₀` is sampled with a tensor cubic and the `G1` integral
//! uses the trapezoid rule on the RK2 step points.

use crate::error::{FsiError, Result};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::interp::{bicubic, bilinear};
use crate::scalar::Real;
use crate::state::PhysParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransportOptions {
    /// Clamp the cubic sample of `σ₀` to the enclosing cell's range, which
    /// gives a discrete maximum principle.
    pub monotone: bool,
}

/// Departure points `(x*, z*)` at level `to` of the characteristics arriving
/// at every node at level `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFootprints<T> {
    pub from: usize,
    pub to: usize,
    /// Indexed like the grid nodes.
    pub points: Vec<[T; 2]>,
}

#[inline]
fn wrap_x<T: Real>(x: T, l: T) -> T {
    let r = x % l;
    let r = if r < T::zero() { r + l } else { r };
    // `-tiny + l` can round to `l`
    if r >= l {
        T::zero()
    } else {
        r
    }
}

#[inline]
fn clamp_z<T: Real>(z: T) -> T {
    z.max(T::zero()).min(T::one())
}

#[inline]
fn sample_w<T: Real>(w: &VectorField<T>, x: T, z: T) -> [T; 2] {
    [bilinear(&w.c1, x, z), bilinear(&w.c2, x, z)]
}

/// One backward midpoint step from level `k` to level `k − 1`. The midpoint
/// velocity is the average of the two levels.
#[inline]
fn rk2_back<T: Real>(w_hi: &VectorField<T>, w_lo: &VectorField<T>, p: [T; 2], dt: T, l: T) -> [T; 2] {
    let half = T::lit(0.5);
    let v = sample_w(w_hi, p[0], p[1]);
    let mx = wrap_x(p[0] - half * dt * v[0], l);
    let mz = clamp_z(p[1] - half * dt * v[1]);
    let a = sample_w(w_hi, mx, mz);
    let b = sample_w(w_lo, mx, mz);
    let vm = [half * (a[0] + b[0]), half * (a[1] + b[1])];
    [wrap_x(p[0] - dt * vm[0], l), clamp_z(p[1] - dt * vm[1])]
}

fn check_traj<T: Real>(grid: &Grid<T>, w: &[VectorField<T>], what: &str) -> Result<()> {
    for (k, f) in w.iter().enumerate() {
        if !f.grid().same_shape(grid) {
            return Err(FsiError::ShapeMismatch(format!("{what} level {k} is not on the transport grid")));
        }
    }
    Ok(())
}

/// Traces the characteristics through every node at level `from` back to
/// level `to`.
pub fn backtrack<T: Real>(
    w_traj: &[VectorField<T>],
    from: usize,
    to: usize,
    grid: &Grid<T>,
    dt: T,
) -> Result<CharacteristicFootprints<T>> {
    if from < to || from >= w_traj.len() {
        return Err(FsiError::invalid(
            "backtrack",
            format!("need to <= from < {} (got from {from}, to {to})", w_traj.len()),
        ));
    }
    check_traj(grid, w_traj, "W")?;
    let mut points = Vec::with_capacity(grid.len());
    for j in 0..=grid.nz {
        for i in 0..grid.nx {
            let mut p = [grid.x(i), grid.z(j)];
            for k in (to + 1..=from).rev() {
                p = rk2_back(&w_traj[k], &w_traj[k - 1], p, dt, grid.length);
            }
            points.push(p);
        }
    }
    Ok(CharacteristicFootprints { from, to, points })
}

/// `σ` at every level of the window (level 0 is `σ₀` itself).
pub fn solve_window<T: Real>(
    sigma0: &ScalarField<T>,
    w_traj: &[VectorField<T>],
    g1_traj: &[ScalarField<T>],
    dt: T,
    opts: TransportOptions,
) -> Result<Vec<ScalarField<T>>> {
    let grid = sigma0.grid;
    if w_traj.is_empty() || w_traj.len() != g1_traj.len() {
        return Err(FsiError::ShapeMismatch(format!(
            "W has {} levels, G1 has {}",
            w_traj.len(),
            g1_traj.len()
        )));
    }
    check_traj(&grid, w_traj, "W")?;
    for (k, g) in g1_traj.iter().enumerate() {
        if !g.grid.same_shape(&grid) {
            return Err(FsiError::ShapeMismatch(format!("G1 level {k} is not on the transport grid")));
        }
    }
    let half_dt = T::lit(0.5) * dt;
    let mut out = Vec::with_capacity(w_traj.len());
    out.push(sigma0.clone());
    for n in 1..w_traj.len() {
        let mut s = ScalarField::zeros(grid);
        for j in 0..=grid.nz {
            for i in 0..grid.nx {
                let mut p = [grid.x(i), grid.z(j)];
                let mut g_hi = g1_traj[n].at(i, j);
                let mut integral = T::zero();
                for k in (1..=n).rev() {
                    p = rk2_back(&w_traj[k], &w_traj[k - 1], p, dt, grid.length);
                    let g_lo = bilinear(&g1_traj[k - 1], p[0], p[1]);
                    integral += half_dt * (g_hi + g_lo);
                    g_hi = g_lo;
                }
                s.set(i, j, bicubic(sigma0, p[0], p[1], opts.monotone) + integral);
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Density extrema against the admissible band `[m/2, 2M]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport<T> {
    pub min: T,
    pub max: T,
    pub min_node: usize,
    pub max_node: usize,
    pub lower: T,
    pub upper: T,
    pub passed: bool,
}

impl<T: Real> DensityReport<T> {
    /// The violating node as an error, if any.
    pub fn to_error(&self) -> Option<FsiError> {
        if self.passed {
            return None;
        }
        let (value, node) = if !(self.min >= self.lower) {
            (self.min, self.min_node)
        } else {
            (self.max, self.max_node)
        };
        Some(FsiError::CoefficientOutOfBounds {
            value: value.as_f64(),
            node,
            lower: self.lower.as_f64(),
            upper: self.upper.as_f64(),
        })
    }
}

pub fn check_density_bounds<T: Real>(sigma: &ScalarField<T>, params: &PhysParams<T>, m: T, big_m: T) -> DensityReport<T> {
    let (mut min, mut max) = (T::infinity(), T::neg_infinity());
    let (mut min_node, mut max_node) = (0, 0);
    let mut nan = false;
    for (k, &s) in sigma.values.iter().enumerate() {
        let rho = s + params.rho_bar;
        if rho.is_nan() {
            nan = true;
            min = rho;
            min_node = k;
            break;
        }
        if rho < min {
            min = rho;
            min_node = k;
        }
        if rho > max {
            max = rho;
            max_node = k;
        }
    }
    let lower = T::lit(0.5) * m;
    let upper = T::lit(2.0) * big_m;
    DensityReport {
        min,
        max,
        min_node,
        max_node,
        lower,
        upper,
        passed: !nan && min >= lower && max <= upper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> Grid<f64> {
        Grid::new(16, 12, 1.0).unwrap()
    }

    fn constant_w(g: Grid<f64>, a: f64, b: f64, levels: usize) -> Vec<VectorField<f64>> {
        vec![
            VectorField {
                c1: ScalarField::constant(g, a),
                c2: ScalarField::constant(g, b),
            };
            levels
        ]
    }

    #[test]
    fn zero_velocity_fixes_points() {
        let g = grid();
        let fp = backtrack(&constant_w(g, 0.0, 0.0, 4), 3, 0, &g, 0.1).unwrap();
        for j in 0..=g.nz {
            for i in 0..g.nx {
                assert_eq!(fp.points[g.idx(i, j)], [g.x(i), g.z(j)]);
            }
        }
    }

    #[test]
    fn constant_velocity_single_step() {
        let g = grid();
        let fp = backtrack(&constant_w(g, 0.3, 0.0, 2), 1, 0, &g, 0.1).unwrap();
        for i in 0..g.nx {
            let expect = (g.x(i) - 0.03).rem_euclid(1.0);
            assert!((fp.points[g.idx(i, 5)][0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_levels_rejected() {
        let g = grid();
        assert!(backtrack(&constant_w(g, 0.0, 0.0, 2), 0, 1, &g, 0.1).is_err());
        assert!(backtrack(&constant_w(g, 0.0, 0.0, 2), 5, 0, &g, 0.1).is_err());
    }

    /// `W = (cos(t) z, 0)`: `x* = x − z sin(t_n)`; the level-averaged
    /// midpoint is second order in `Δt`.
    #[test]
    fn time_dependent_shear_converges_at_second_order() {
        let g = Grid::new(8, 8, 4.0).unwrap();
        let t_end = 1.0;
        let err = |n: usize| {
            let dt = t_end / n as f64;
            let w: Vec<_> = (0..=n)
                .map(|k| {
                    let c = (k as f64 * dt).cos();
                    VectorField::from_fn(g, |_, z| (c * z, 0.0))
                })
                .collect();
            let fp = backtrack(&w, n, 0, &g, dt).unwrap();
            let mut e = 0.0f64;
            for j in 0..=g.nz {
                for i in 0..g.nx {
                    let exact = (g.x(i) - g.z(j) * t_end.sin()).rem_euclid(4.0);
                    let got = fp.points[g.idx(i, j)][0];
                    let d = (got - exact).abs();
                    e = e.max(d.min(4.0 - d));
                }
            }
            e
        };
        let es: Vec<f64> = [10, 20, 40].iter().map(|&n| err(n)).collect();
        for w in es.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "{es:?}");
        }
    }

    #[test]
    fn zero_data_is_identity() {
        let g = grid();
        let s0 = ScalarField::from_fn(g, |x, z| (2.0 * PI * x).sin() + z * z);
        let out = solve_window(&s0, &constant_w(g, 0.0, 0.0, 5), &vec![ScalarField::zeros(g); 5], 0.1, TransportOptions::default()).unwrap();
        assert_eq!(out.len(), 5);
        for s in &out {
            assert_eq!(s, &s0);
        }
    }

    #[test]
    fn constant_source_accumulates_linearly() {
        let g = grid();
        let s0 = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).cos());
        let out = solve_window(&s0, &constant_w(g, 0.0, 0.0, 6), &vec![ScalarField::constant(g, 0.7); 6], 0.05, TransportOptions::default()).unwrap();
        for (n, s) in out.iter().enumerate() {
            let diff = s.sub(&s0.map(|v| v + 0.7 * 0.05 * n as f64)).max_abs();
            assert!(diff < 1e-13, "level {n}: {diff}");
        }
    }

    #[test]
    fn translation_converges() {
        // a half-period shift lands on nodes and is exact
        let g = Grid::new(16, 8, 1.0).unwrap();
        let s0 = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let out = solve_window(&s0, &constant_w(g, 1.0, 0.0, 5), &vec![ScalarField::zeros(g); 5], 0.125, TransportOptions::default()).unwrap();
        assert!(out[4].add(&s0).max_abs() < 1e-14);

        let err = |n: usize| {
            let g = Grid::new(n, 8, 1.0).unwrap();
            let s0 = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
            let steps = n / 4;
            let dt = 0.3 / steps as f64;
            let out = solve_window(&s0, &constant_w(g, 1.0, 0.0, steps + 1), &vec![ScalarField::zeros(g); steps + 1], dt, TransportOptions::default()).unwrap();
            let exact = ScalarField::from_fn(g, |x, _| (2.0 * PI * (x - 0.3)).sin());
            out.last().unwrap().sub(&exact).max_abs()
        };
        let es: Vec<f64> = [16, 32, 64].iter().map(|&n| err(n)).collect();
        for w in es.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{es:?}");
        }
    }

    #[test]
    fn density_bounds_examples() {
        let g = grid();
        let p = PhysParams::<f64>::default();
        assert!(check_density_bounds(&ScalarField::zeros(g), &p, 1.0, 1.0).passed);
        let r = check_density_bounds(&ScalarField::constant(g, -1.0), &p, 1.0, 1.0);
        assert!(!r.passed);
        assert!(matches!(r.to_error(), Some(FsiError::CoefficientOutOfBounds { .. })));
        assert!(!check_density_bounds(&ScalarField::constant(g, 3.0 - 1.0), &p, 1.0, 1.0).passed);
        let mut s = ScalarField::zeros(g);
        s.values[7] = f64::NAN;
        assert!(!check_density_bounds(&s, &p, 1.0, 1.0).passed);
    }

    fn swirl(g: Grid<f64>, amp: f64) -> VectorField<f64> {
        VectorField::from_fn(g, |x, z| {
            let s = (PI * z).sin();
            (0.4 + amp * (2.0 * PI * x).cos() * s, amp * (2.0 * PI * x).sin() * s)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn constants_are_preserved_exactly(c in -5.0f64..5.0, amp in 0.0f64..1.0, dt in 0.01f64..0.2) {
            let g = grid();
            let w = vec![swirl(g, amp); 4];
            let out = solve_window(&ScalarField::constant(g, c), &w, &vec![ScalarField::zeros(g); 4], dt, TransportOptions::default()).unwrap();
            for s in &out {
                prop_assert!(s.values.iter().all(|&v| v == c));
            }
        }

        #[test]
        fn monotone_option_keeps_range(seed in 0u64..1000, amp in 0.0f64..1.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let g = grid();
            let s0 = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
            let (lo, hi) = (s0.min(), s0.max());
            let w = vec![swirl(g, amp); 5];
            let out = solve_window(&s0, &w, &vec![ScalarField::zeros(g); 5], 0.05, TransportOptions { monotone: true }).unwrap();
            for s in &out {
                prop_assert!(s.min() >= lo && s.max() <= hi);
            }
        }

        #[test]
        fn departure_points_stay_in_domain(amp in 0.0f64..3.0, dt in 0.01f64..0.5) {
            let g = grid();
            let w = vec![swirl(g, amp); 3];
            let fp = backtrack(&w, 2, 0, &g, dt).unwrap();
            for p in &fp.points {
                prop_assert!(p[0] >= 0.0 && p[0] < 1.0);
                prop_assert!(p[1] >= 0.0 && p[1] <= 1.0);
            }
        }
    }
}
