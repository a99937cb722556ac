//! Verification oracles: manufactured solutions for the transformed
//! equations, a translation test with an upwind reference for transport, and
//! a dispersion study for the beam.
//!
//! These run in `f64` only; they are tools, not part of the solver.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::beam::{dispersion_roots, BeamSolver};
use crate::error::Result;
use crate::fields::{BeamField, Grid, ScalarField, VectorField};
use crate::geometry::build_geometry;
use crate::interp::bilinear;
use crate::sources::{
    compute_f3, compute_f3_alternate, f1_node, f2_node, pressure, pressure_at, pressure_prime_at,
    ColumnGeo, F2Form, FieldJets, Jet, F2_TERM_NAMES,
};
use crate::spectral::dft_x;
use crate::state::PhysParams;
use crate::transport::{solve_window as transport_window, TransportOptions};

// ---------------------------------------------------------------------------
// manufactured solutions

/// `mean + amp · cos(k (x − c t) + φ) · Y(y)` with a cubic profile `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub mean: f64,
    pub amp: f64,
    pub k: f64,
    pub speed: f64,
    pub phase: f64,
    pub profile: [f64; 4],
}

/// Value and derivatives of a physical field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhysJet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Wave {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> PhysJet {
        let [a0, a1, a2, a3] = self.profile;
        let yv = a0 + y * (a1 + y * (a2 + y * a3));
        let yd = a1 + y * (2.0 * a2 + 3.0 * a3 * y);
        let ydd = 2.0 * a2 + 6.0 * a3 * y;
        let arg = self.k * (x - self.speed * t) + self.phase;
        let (s, c) = arg.sin_cos();
        let a = self.amp;
        PhysJet {
            v: self.mean + a * c * yv,
            x: -a * self.k * s * yv,
            y: a * c * yd,
            t: a * self.k * self.speed * s * yv,
            xx: -a * self.k * self.k * c * yv,
            yy: a * c * ydd,
            xy: -a * self.k * s * yd,
        }
    }
}

/// `η(x, t) = amp · sin(k x − ω t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamWave {
    pub amp: f64,
    pub k: f64,
    pub omega: f64,
}

impl BeamWave {
    /// `(η, η_x, η_xx, η_t)`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64, f64, f64) {
        let arg = self.k * x - self.omega * t;
        let (s, c) = arg.sin_cos();
        (
            self.amp * s,
            self.amp * self.k * c,
            -self.amp * self.k * self.k * s,
            -self.amp * self.omega * c,
        )
    }
}

/// A smooth `(ρ, u, η)` on the moving domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub rho: Wave,
    pub u1: Wave,
    pub u2: Wave,
    pub eta: BeamWave,
    pub t: f64,
}

impl Manufactured {
    /// A generic mode-one state on a channel of length `l` with
    /// `max |η| = 0.2`.
    pub fn standard(l: f64) -> Self {
        let k = 2.0 * PI / l;
        Self {
            rho: Wave {
                mean: 1.0,
                amp: 0.1,
                k,
                speed: 0.5,
                phase: 0.3,
                profile: [1.0, 0.5, -0.3, 0.0],
            },
            u1: Wave {
                mean: 0.0,
                amp: 0.3,
                k,
                speed: 0.4,
                phase: 1.1,
                profile: [0.2, 1.0, -0.5, 0.1],
            },
            u2: Wave {
                mean: 0.0,
                amp: 0.2,
                k,
                speed: -0.3,
                phase: -0.4,
                profile: [-0.3, 0.7, 0.4, -0.2],
            },
            eta: BeamWave {
                amp: 0.2,
                k,
                omega: 0.7,
            },
            t: 0.3,
        }
    }
}

/// Reference jet of the pulled-back field `f̂(x, z) = f(x, z(1+η))`, and its
/// time derivative at fixed `(x, z)`.
fn pull_back_jet(f: &PhysJet, g: &ColumnGeo<f64>, z: f64) -> (Jet<f64>, f64) {
    let zx = z * g.eta_x;
    let jet = Jet {
        v: f.v,
        x: f.x + f.y * zx,
        z: f.y * g.j,
        xx: f.xx + 2.0 * f.xy * zx + f.yy * zx * zx + f.y * z * g.eta_xx,
        zz: f.yy * g.j * g.j,
        xz: f.xy * g.j + f.yy * g.j * zx + f.y * g.eta_x,
    };
    (jet, f.t + f.y * z * g.eta_t)
}

/// Physical continuity and momentum residuals from a set of jets.
fn physical_residuals(r: &PhysJet, a: &PhysJet, b: &PhysJet, params: &PhysParams<f64>) -> (f64, [f64; 2]) {
    let (mu, mm) = (params.mu, params.mu + params.mu_prime);
    let rc = r.t + (r.x * a.v + r.v * a.x) + (r.y * b.v + r.v * b.y);
    let pp = pressure_prime_at(r.v, params);
    let div_x = a.xx + b.xy;
    let div_y = a.xy + b.yy;
    let rm = [
        r.v * (a.t + a.v * a.x + b.v * a.y) - mu * (a.xx + a.yy) - mm * div_x + pp * r.x,
        r.v * (b.t + a.v * b.x + b.v * b.y) - mu * (b.xx + b.yy) - mm * div_y + pp * r.y,
    ];
    (rc, rm)
}

/// Centered-difference jet of `w` at `(x, y)` with spacings `(hx, hy)`; the
/// time derivative is exact.
fn fitted_jet(w: &Wave, x: f64, y: f64, t: f64, hx: f64, hy: f64) -> PhysJet {
    let f = |dx: f64, dy: f64| w.eval(x + dx, y + dy, t).v;
    let c = f(0.0, 0.0);
    PhysJet {
        v: c,
        x: (f(hx, 0.0) - f(-hx, 0.0)) / (2.0 * hx),
        y: (f(0.0, hy) - f(0.0, -hy)) / (2.0 * hy),
        t: w.eval(x, y, t).t,
        xx: (f(hx, 0.0) - 2.0 * c + f(-hx, 0.0)) / (hx * hx),
        yy: (f(0.0, hy) - 2.0 * c + f(0.0, -hy)) / (hy * hy),
        xy: (f(hx, hy) - f(hx, -hy) - f(-hx, hy) + f(-hx, -hy)) / (4.0 * hx * hy),
    }
}

/// Per-grid result of the transformation-consistency oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceOracleRow {
    pub n: usize,
    /// `max |R̂_c − R_c|` with `R̂_c` from finite differences.
    pub continuity_abs: f64,
    pub continuity_rel: f64,
    /// `max |R̂_m − (1+η) R_m|`.
    pub momentum_abs: f64,
    pub momentum_rel: f64,
    /// Discrepancies against physical residuals computed by centered
    /// differences on the fitted moving-domain grid.
    pub continuity_fitted_rel: f64,
    pub momentum_fitted_rel: f64,
    /// Same quantities with exact (analytic) reference derivatives: checks
    /// the formulas themselves, independent of discretization.
    pub continuity_formula_rel: f64,
    pub momentum_formula_rel: f64,
    /// Formula check with the alternate sign in the `(μ+μ')` column.
    pub momentum_alternate_formula_rel: f64,
    /// Per-subterm discrepancy (finite differences vs exact derivatives),
    /// relative to the momentum scale; `F1` first, then the `F2` pieces.
    pub terms: Vec<(String, f64)>,
    /// `max |F3_alt − F3|` on the wall, and `max |F3|`.
    pub f3_alternate_difference: f64,
    pub f3_scale: f64,
}

/// Evaluates the oracle on an `n × n` grid.
pub fn source_oracle(n: usize, params: &PhysParams<f64>, m: &Manufactured) -> Result<SourceOracleRow> {
    let l = params.length;
    let grid = Grid::new(n, n, l)?;
    let t = m.t;
    let eta = BeamField::from_fn(grid, |x| m.eta.eval(x, t).0);
    let geo = build_geometry(&eta, 0.1)?;
    let mu = params.mu;
    let mm = params.mu + params.mu_prime;

    // exact column geometry (the oracle compares against analytic η too)
    let cols: Vec<ColumnGeo<f64>> = (0..n)
        .map(|i| {
            let (e, ex, exx, et) = m.eta.eval(grid.x(i), t);
            ColumnGeo::new(e, ex, exx, et)
        })
        .collect();

    // pulled-back nodal data
    let mut rho = ScalarField::zeros(grid);
    let mut u = VectorField::zeros(grid);
    let nn = grid.len();
    let mut exact = Vec::with_capacity(nn);
    for j in 0..=grid.nz {
        let z = grid.z(j);
        for (i, col) in cols.iter().enumerate() {
            let (x, y) = (grid.x(i), z * col.j);
            let r = m.rho.eval(x, y, t);
            let a = m.u1.eval(x, y, t);
            let b = m.u2.eval(x, y, t);
            let k = grid.idx(i, j);
            rho.values[k] = r.v;
            u.c1.values[k] = a.v;
            u.c2.values[k] = b.v;
            exact.push((r, a, b));
        }
    }
    let p = pressure(&rho, params)?;
    let (p_x, p_z) = (p.ddx(), p.ddz());
    let (r_j, a_j, b_j) = (FieldJets::new(&rho), FieldJets::new(&u.c1), FieldJets::new(&u.c2));

    let mut cont_abs = 0.0f64;
    let mut cont_formula = 0.0f64;
    let mut cont_scale = 0.0f64;
    let mut mom_abs = 0.0f64;
    let mut mom_formula = 0.0f64;
    let mut mom_alternate = 0.0f64;
    let mut mom_scale = 0.0f64;
    let (mut cont_fit, mut mom_fit) = (0.0f64, 0.0f64);
    let mut term_err = vec![0.0f64; 1 + F2_TERM_NAMES.len()];

    for j in 0..=grid.nz {
        let z = grid.z(j);
        for i in 0..n {
            let k = grid.idx(i, j);
            let col = cols[i];
            // the discrete path uses the nodal geometry, like the solver
            let dcol = ColumnGeo::new(geo.eta.values[i], geo.eta_x.values[i], geo.eta_xx.values[i], col.eta_t);
            let (r, a, b) = exact[k];

            // physical residuals: exact, and by differences on the fitted
            // grid (spacing dx by dz (1+η) around the physical node)
            let (rc_phys, rm_phys) = physical_residuals(&r, &a, &b, params);
            let (x, y) = (grid.x(i), z * col.j);
            let (hx, hy) = (grid.dx, grid.dz * col.j);
            let (rc_fit, rm_fit) = physical_residuals(
                &fitted_jet(&m.rho, x, y, t, hx, hy),
                &fitted_jet(&m.u1, x, y, t, hx, hy),
                &fitted_jet(&m.u2, x, y, t, hx, hy),
                params,
            );
            let pp = pressure_prime_at(r.v, params);

            // exact reference jets
            let (rj, rt) = pull_back_jet(&r, &col, z);
            let (aj, at) = pull_back_jet(&a, &col, z);
            let (bj, bt) = pull_back_jet(&b, &col, z);
            let (px_e, pz_e) = (pp * rj.x, pp * rj.z);

            // discrete reference jets; time derivatives are data
            let (rd, ad, bd) = (r_j.at(k), a_j.at(k), b_j.at(k));
            let (px_d, pz_d) = (p_x.values[k], p_z.values[k]);

            let cont = |rj: &Jet<f64>, aj: &Jet<f64>, bj: &Jet<f64>, g: &ColumnGeo<f64>| {
                let w2 = (bj.v - g.eta_t * z - aj.v * z * g.eta_x) * g.inv_j;
                let terms = [rt, aj.v * rj.x + w2 * rj.z, rj.v * (aj.x + bj.z), -f1_node(rj.v, aj, bj, g, z)];
                (terms.iter().sum::<f64>(), terms)
            };
            let (rc_fd, _) = cont(&rd, &ad, &bd, &dcol);
            let (rc_ex, cterms) = cont(&rj, &aj, &bj, &col);
            cont_scale = cterms.iter().fold(cont_scale, |s, v| s.max(v.abs())).max(rc_phys.abs());
            cont_abs = cont_abs.max((rc_fd - rc_phys).abs());
            cont_fit = cont_fit.max((rc_fd - rc_fit).abs());
            cont_formula = cont_formula.max((rc_ex - rc_phys).abs());

            let mom = |rj: &Jet<f64>, aj: &Jet<f64>, bj: &Jet<f64>, px: f64, pz: f64, g: &ColumnGeo<f64>, form| {
                let f2 = f2_node(rj.v, px, pz, [aj, bj], [at, bt], g, z, params, form);
                let tot = f2.total();
                let gd = [aj.xx + bj.xz, aj.xz + bj.zz];
                let lhs = [
                    [rj.v * at, -mu * (aj.xx + aj.zz), -mm * gd[0], px],
                    [rj.v * bt, -mu * (bj.xx + bj.zz), -mm * gd[1], pz],
                ];
                let res = [
                    lhs[0].iter().sum::<f64>() - tot[0],
                    lhs[1].iter().sum::<f64>() - tot[1],
                ];
                (res, lhs, f2)
            };
            let (rm_fd, _, f2_fd) = mom(&rd, &ad, &bd, px_d, pz_d, &dcol, F2Form::Corrected);
            let (rm_ex, lhs_ex, f2_ex) = mom(&rj, &aj, &bj, px_e, pz_e, &col, F2Form::Corrected);
            let (rm_pr, _, _) = mom(&rj, &aj, &bj, px_e, pz_e, &col, F2Form::Alternate);
            for c in 0..2 {
                let target = col.j * rm_phys[c];
                for v in lhs_ex[c] {
                    mom_scale = mom_scale.max(v.abs());
                }
                for tm in f2_ex.terms() {
                    mom_scale = mom_scale.max(tm[c].abs());
                }
                mom_scale = mom_scale.max(target.abs());
                mom_abs = mom_abs.max((rm_fd[c] - target).abs());
                mom_fit = mom_fit.max((rm_fd[c] - col.j * rm_fit[c]).abs());
                mom_formula = mom_formula.max((rm_ex[c] - target).abs());
                mom_alternate = mom_alternate.max((rm_pr[c] - target).abs());
                for (e, (tf, te)) in term_err[1..].iter_mut().zip(f2_fd.terms().iter().zip(f2_ex.terms())) {
                    *e = e.max((tf[c] - te[c]).abs());
                }
            }
            let f1d = f1_node(rd.v, &ad, &bd, &dcol, z) - f1_node(rj.v, &aj, &bj, &col, z);
            term_err[0] = term_err[0].max(f1d.abs());
        }
    }

    let mut terms = vec![("F1".to_string(), term_err[0] / cont_scale)];
    for (name, e) in F2_TERM_NAMES.iter().zip(&term_err[1..]) {
        terms.push((format!("F2.{name}"), e / mom_scale));
    }

    let f3 = compute_f3(&rho.top_trace(), &u, &geo, params)?;
    let f3p = compute_f3_alternate(&rho.top_trace(), &u, &geo, params)?;
    Ok(SourceOracleRow {
        n,
        continuity_abs: cont_abs,
        continuity_rel: cont_abs / cont_scale,
        continuity_fitted_rel: cont_fit / cont_scale,
        momentum_fitted_rel: mom_fit / mom_scale,
        momentum_abs: mom_abs,
        momentum_rel: mom_abs / mom_scale,
        continuity_formula_rel: cont_formula / cont_scale,
        momentum_formula_rel: mom_formula / mom_scale,
        momentum_alternate_formula_rel: mom_alternate / mom_scale,
        terms,
        f3_alternate_difference: f3.sub(&f3p).max_abs(),
        f3_scale: f3.max_abs(),
    })
}

/// Observed orders `log2(e_k / e_{k+1})` for successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Refinement table as CSV.
pub fn source_table_csv(rows: &[SourceOracleRow]) -> String {
    let mut s = String::from(
        "n,continuity_rel,momentum_rel,continuity_fitted_rel,momentum_fitted_rel,continuity_formula_rel,momentum_formula_rel,momentum_alternate_formula_rel,f3_alternate_difference,f3_scale",
    );
    if let Some(r) = rows.first() {
        for (name, _) in &r.terms {
            s.push(',');
            s.push_str(name);
        }
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.n,
            r.continuity_rel,
            r.momentum_rel,
            r.continuity_fitted_rel,
            r.momentum_fitted_rel,
            r.continuity_formula_rel,
            r.momentum_formula_rel,
            r.momentum_alternate_formula_rel,
            r.f3_alternate_difference,
            r.f3_scale
        ));
        for (_, e) in &r.terms {
            s.push_str(&format!(",{e:.6e}"));
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// transport

/// One row of the translation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportRow {
    pub n: usize,
    pub dt: f64,
    pub error: f64,
}

/// Translates `σ₀ = sin(2πx/L) (1 + z²)/2`... with `W = (c, 0)` over `[0, t_end]`
/// and reports the max-norm error against the exact translate.
pub fn translation_error(n: usize, steps: usize, t_end: f64, length: f64, speed: f64) -> Result<TransportRow> {
    let grid = Grid::new(n, n, length)?;
    let k = 2.0 * PI / length;
    let profile = |x: f64, z: f64| (k * x).sin() * (1.0 + z * z) * 0.5;
    let sigma0 = ScalarField::from_fn(grid, profile);
    let dt = t_end / steps as f64;
    let w = VectorField {
        c1: ScalarField::constant(grid, speed),
        c2: ScalarField::zeros(grid),
    };
    let ws = vec![w; steps + 1];
    let g1 = vec![ScalarField::zeros(grid); steps + 1];
    let out = transport_window(&sigma0, &ws, &g1, dt, TransportOptions::default())?;
    let exact = ScalarField::from_fn(grid, |x, z| profile(x - speed * t_end, z));
    Ok(TransportRow {
        n,
        dt,
        error: out.last().expect("window has levels").sub(&exact).max_abs(),
    })
}

/// First-order upwind solution of `σ_t + W·∇σ = 0` with constant-in-time
/// `W`, at CFL `cfl`. Reference scheme for the semi-Lagrangian solver.
pub fn upwind_solve(sigma0: &ScalarField<f64>, w: &VectorField<f64>, t_end: f64, cfl: f64) -> ScalarField<f64> {
    let g = sigma0.grid;
    let vmax = w.max_abs().max(1e-300);
    let h = g.dx.min(g.dz);
    let steps = ((t_end * vmax / (cfl * h)).ceil() as usize).max(1);
    let dt = t_end / steps as f64;
    let mut s = sigma0.clone();
    for _ in 0..steps {
        let mut next = s.clone();
        for j in 0..=g.nz {
            for i in 0..g.nx {
                let (a, b) = (w.c1.at(i, j), w.c2.at(i, j));
                let sx = if a > 0.0 {
                    (s.at(i, j) - s.at(g.west(i), j)) / g.dx
                } else {
                    (s.at(g.east(i), j) - s.at(i, j)) / g.dx
                };
                let sz = if b > 0.0 && j > 0 {
                    (s.at(i, j) - s.at(i, j - 1)) / g.dz
                } else if b < 0.0 && j < g.nz {
                    (s.at(i, j + 1) - s.at(i, j)) / g.dz
                } else {
                    0.0
                };
                next.set(i, j, s.at(i, j) - dt * (a * sx + b * sz));
            }
        }
        s = next;
    }
    s
}

/// Semi-Lagrangian vs upwind on a steady rotational field vanishing on the
/// walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpwindComparison {
    pub n: usize,
    /// `max |σ_SL − σ_UW|` on the `n × n` grid.
    pub discrepancy: f64,
    /// `max |σ_UW(n) − σ_UW(2n)|` sampled on the coarse nodes: the upwind
    /// self-convergence error estimate.
    pub upwind_self_estimate: f64,
}

fn swirl(grid: Grid<f64>) -> VectorField<f64> {
    let k = 2.0 * PI / grid.length;
    VectorField::from_fn(grid, |x, z| {
        let s = (PI * z).sin();
        (0.5 + 0.3 * (k * x).cos() * s, 0.3 * (k * x).sin() * s * (PI * z).sin() * 0.5)
    })
}

pub fn upwind_comparison(n: usize, t_end: f64) -> Result<UpwindComparison> {
    let grid = Grid::new(n, n, 1.0)?;
    let fine = Grid::new(2 * n, 2 * n, 1.0)?;
    let init = |x: f64, z: f64| (2.0 * PI * x).cos() * (1.0 + 0.5 * z);
    let s0 = ScalarField::from_fn(grid, init);
    let w = swirl(grid);
    let uw = upwind_solve(&s0, &w, t_end, 0.4);
    let uw_fine = upwind_solve(&ScalarField::from_fn(fine, init), &swirl(fine), t_end, 0.4);
    let steps = (t_end / (0.4 * grid.dx)).ceil() as usize;
    let dt = t_end / steps as f64;
    let sl = transport_window(
        &s0,
        &vec![w; steps + 1],
        &vec![ScalarField::zeros(grid); steps + 1],
        dt,
        TransportOptions::default(),
    )?;
    let sl = sl.last().expect("levels");
    let mut est = 0.0f64;
    for j in 0..=grid.nz {
        for i in 0..grid.nx {
            let v = bilinear(&uw_fine, grid.x(i), grid.z(j));
            est = est.max((v - uw.at(i, j)).abs());
        }
    }
    Ok(UpwindComparison {
        n,
        discrepancy: sl.sub(&uw).max_abs(),
        upwind_self_estimate: est,
    })
}

// ---------------------------------------------------------------------------
// beam dispersion

/// Prony fit of two exponentials: finds real `p, q` with
/// `y_{n+2} = p y_{n+1} + q y_n` in least squares and returns the continuous
/// rates `ln(μ)/dt` of the roots of `μ² − pμ − q`.
pub fn prony_rates(y: &[Complex<f64>], dt: f64) -> [Complex<f64>; 2] {
    // normal equations for real unknowns with complex data
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in y.windows(3) {
        let (u, v, r) = (w[1], w[0], w[2]);
        a11 += u.norm_sqr();
        a12 += (u.conj() * v).re;
        a22 += v.norm_sqr();
        b1 += (u.conj() * r).re;
        b2 += (v.conj() * r).re;
    }
    let det = a11 * a22 - a12 * a12;
    let p = (b1 * a22 - b2 * a12) / det;
    let q = (a11 * b2 - a12 * b1) / det;
    let disc = Complex::new(p * p + 4.0 * q, 0.0).sqrt();
    let m1 = (p + disc) / 2.0;
    let m2 = (p - disc) / 2.0;
    [m1.ln() / dt, m2.ln() / dt]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRow {
    pub mode: usize,
    pub dt: f64,
    pub measured: Complex<f64>,
    pub exact: Complex<f64>,
    pub rel_error: f64,
}

/// Runs the beam with `G3 = 0` from `η = cos(κ x)`, `η_t = 0` and extracts the
/// mode's complex rate (the root with positive imaginary part).
pub fn beam_dispersion(mode: usize, dt: f64, params: &PhysParams<f64>, nx: usize, steps: usize) -> Result<DispersionRow> {
    let grid = Grid::new(nx, 4, params.length)?;
    let kappa = 2.0 * PI * mode as f64 / params.length;
    let solver = BeamSolver::new(grid, *params, dt);
    let eta0 = BeamField::from_fn(grid, |x| (kappa * x).cos());
    let g3 = vec![BeamField::zeros(grid); steps + 1];
    let w = solver.solve_window(&eta0, &BeamField::zeros(grid), &g3);
    let series: Vec<Complex<f64>> = w.eta.iter().map(|e| dft_x(e)[mode]).collect();
    let rates = prony_rates(&series, dt);
    let measured = if rates[0].im >= rates[1].im { rates[0] } else { rates[1] };
    let roots = dispersion_roots(kappa, params.alpha, params.beta, params.delta);
    let exact = if roots[0].im >= roots[1].im { roots[0] } else { roots[1] };
    Ok(DispersionRow {
        mode,
        dt,
        measured,
        exact,
        rel_error: (measured - exact).norm() / exact.norm(),
    })
}

/// `p(ρ)` at the steady state is the external pressure.
pub fn reference_pressure_is_external(params: &PhysParams<f64>) -> bool {
    pressure_at(params.rho_bar, params) == 0.0
}
