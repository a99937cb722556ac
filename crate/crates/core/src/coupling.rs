//! The fixed-point map `L` and its Picard iteration over one time window.
//!
//! Given an iterate `X = (σ̃, w̃, η̃)` on the window, `L(X)` freezes every
//! nonlinear term at `X` — sources `G1, G2, G3`, the transport velocity `W̃`
//! and the momentum coefficient `σ̃ + ρ̄` — and solves the three linear
//! problems from the window's initial data.

use serde::Serialize;

use crate::beam::BeamSolver;
use crate::error::{FsiError, Result};
use crate::fields::{l2_norm, l2_norm_vec, BeamField, Grid};
use crate::geometry::{build_geometry, BeamGeometry};
use crate::momentum::MomentumSolver;
use crate::scalar::Real;
use crate::sources::{compute_sources, compute_w_tilde};
use crate::state::{CoupledState, PhysParams, StateRates};
use crate::transport::{check_density_bounds, solve_window as transport_window, TransportOptions};

/// Initial data of a window: the state and its time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStart<T> {
    pub state: CoupledState<T>,
    pub rates: StateRates<T>,
}

/// Levels `t₀ … t_N` of one window with `η_tt` at every level. Level 0
/// always equals the window's initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dt: T,
    pub states: Vec<CoupledState<T>>,
    pub eta_tt: Vec<BeamField<T>>,
    /// `w_t` at level 0 (later levels use backward differences).
    pub w_t0: crate::fields::VectorField<T>,
}

impl<T: Real> Trajectory<T> {
    /// Constant-in-time extension of the window start over `steps` steps.
    pub fn seed(start: &WindowStart<T>, steps: usize, dt: T) -> Self {
        let states = (0..=steps)
            .map(|k| {
                let mut s = start.state.clone();
                s.t = start.state.t + dt * T::from_usize_lossy(k);
                s
            })
            .collect();
        Self {
            dt,
            states,
            eta_tt: vec![start.rates.eta_tt.clone(); steps + 1],
            w_t0: start.rates.w_t.clone(),
        }
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> &CoupledState<T> {
        self.states.last().expect("trajectory has levels")
    }

    /// Rates at level `k`: `w_t` by backward difference for `k ≥ 1`.
    pub fn rates(&self, k: usize) -> StateRates<T> {
        let w_t = if k == 0 {
            self.w_t0.clone()
        } else {
            self.states[k].w.sub(&self.states[k - 1].w).scale(T::one() / self.dt)
        };
        StateRates {
            w_t,
            eta_tt: self.eta_tt[k].clone(),
        }
    }

    /// Initial data for the window that follows this one.
    pub fn end_start(&self) -> WindowStart<T> {
        let n = self.steps();
        WindowStart {
            state: self.last().clone(),
            rates: self.rates(n),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.states.iter().all(|s| s.all_finite()) && self.eta_tt.iter().all(|e| e.all_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Picard over whole windows.
    Window,
    /// Picard per time step.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig<T> {
    pub dt: T,
    pub tol_pic: T,
    pub max_iter: usize,
    pub lin_tol: T,
    pub delta0: T,
    /// `(m, M)`: density must stay in `[m/2, 2M]`.
    pub density_bounds: (T, T),
    pub transport: TransportOptions,
}

impl<T: Real> PicardConfig<T> {
    pub fn new(dt: T, density_bounds: (T, T)) -> Self {
        Self {
            dt,
            tol_pic: T::lit(1e-8),
            max_iter: 50,
            lin_tol: T::lit(1e-10),
            delta0: T::lit(0.5),
            density_bounds,
            transport: TransportOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum PicardOutcome {
    Converged,
    MaxIterations,
    AdmissibilityViolated(String),
    DensityBoundsViolated(String),
    /// Linear-solver failure or non-finite values.
    SolverFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub deltas: Vec<f64>,
    pub outcome: PicardOutcome,
}

impl PicardReport {
    pub fn converged(&self) -> bool {
        self.outcome == PicardOutcome::Converged
    }
}

/// The three linear solvers for one `(grid, params, dt)`.
#[derive(Debug, Clone)]
pub struct LinearSolvers<T: Real> {
    pub beam: BeamSolver<T>,
    pub momentum: MomentumSolver<T>,
    pub params: PhysParams<T>,
    pub config: PicardConfig<T>,
}

impl<T: Real> LinearSolvers<T> {
    pub fn new(grid: Grid<T>, params: PhysParams<T>, config: PicardConfig<T>) -> Result<Self> {
        params.validate()?;
        let (m, big_m) = config.density_bounds;
        let momentum = MomentumSolver::new(grid, &params, config.dt, config.lin_tol)?
            .with_density_band(T::lit(0.5) * m, T::lit(2.0) * big_m);
        Ok(Self {
            beam: BeamSolver::new(grid, params, config.dt),
            momentum,
            params,
            config,
        })
    }
}

fn classify(err: FsiError) -> PicardOutcome {
    match err {
        FsiError::AdmissibilityViolated { .. } => PicardOutcome::AdmissibilityViolated(err.to_string()),
        FsiError::CoefficientOutOfBounds { .. } | FsiError::NonpositiveDensity { .. } => {
            PicardOutcome::DensityBoundsViolated(err.to_string())
        }
        other => PicardOutcome::SolverFailure(other.to_string()),
    }
}

fn check_admissible<T: Real>(
    traj: &Trajectory<T>,
    params: &PhysParams<T>,
    cfg: &PicardConfig<T>,
) -> Result<Vec<BeamGeometry<T>>> {
    if !traj.all_finite() {
        return Err(FsiError::LinearSolveDiverged {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let mut geos = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        geos.push(build_geometry(&s.eta, cfg.delta0)?);
        let (m, big_m) = cfg.density_bounds;
        if let Some(e) = check_density_bounds(&s.sigma, params, m, big_m).to_error() {
            return Err(e);
        }
    }
    Ok(geos)
}

/// One application of `L`. The iterate must be admissible; the output is
/// checked for admissibility and density bounds.
pub fn apply_l<T: Real>(iterate: &Trajectory<T>, solvers: &LinearSolvers<T>) -> Result<Trajectory<T>> {
    let params = &solvers.params;
    let cfg = &solvers.config;
    let geos = check_admissible(iterate, params, cfg)?;
    let n = iterate.states.len();
    let mut g1 = Vec::with_capacity(n);
    let mut g2 = Vec::with_capacity(n);
    let mut g3 = Vec::with_capacity(n);
    let mut w_tilde = Vec::with_capacity(n);
    for (k, (s, geo)) in iterate.states.iter().zip(&geos).enumerate() {
        let src = compute_sources(s, &iterate.rates(k), params, geo)?;
        w_tilde.push(compute_w_tilde(&s.w, geo));
        g1.push(src.g1);
        g2.push(src.g2);
        g3.push(src.g3);
    }
    let start = &iterate.states[0];
    let sigma = transport_window(&start.sigma, &w_tilde, &g1, cfg.dt, cfg.transport)?;
    let sig_coef: Vec<_> = iterate.states.iter().map(|s| s.sigma.clone()).collect();
    let w = solvers.momentum.solve_window(&start.w, &sig_coef, &g2)?;
    let beam = solvers.beam.solve_window(&start.eta, &start.eta_t, &g3);

    let states = (0..n)
        .map(|k| CoupledState {
            sigma: sigma[k].clone(),
            w: w[k].clone(),
            eta: beam.eta[k].clone(),
            eta_t: beam.eta_t[k].clone(),
            t: iterate.states[k].t,
        })
        .collect();
    let mut eta_tt = beam.eta_tt;
    // level 0 is initial data, not a solver output
    eta_tt[0] = iterate.eta_tt[0].clone();
    let out = Trajectory {
        dt: iterate.dt,
        states,
        eta_tt,
        w_t0: iterate.w_t0.clone(),
    };
    check_admissible(&out, params, cfg)?;
    Ok(out)
}

/// Per-field normalization scales: the window sup of the `L²` norms of
/// `σ, w, η, η_t` in `a`, floored at `√ε`.
pub fn trajectory_scales<T: Real>(a: &Trajectory<T>) -> [T; 4] {
    let floor = T::epsilon().sqrt();
    let mut s = [floor; 4];
    for st in &a.states {
        s[0] = s[0].max(l2_norm(&st.sigma));
        s[1] = s[1].max(l2_norm_vec(&st.w));
        s[2] = s[2].max(st.eta.l2_norm());
        s[3] = s[3].max(st.eta_t.l2_norm());
    }
    s
}

/// `max_k Σ_f ‖f_a − f_b‖₂ / scale_f` with fixed scales.
pub fn composite_delta_with_scales<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>, scales: &[T; 4]) -> Result<T> {
    if a.states.len() != b.states.len() {
        return Err(FsiError::ShapeMismatch(format!(
            "trajectories have {} and {} levels",
            a.states.len(),
            b.states.len()
        )));
    }
    let mut worst = T::zero();
    for (x, y) in a.states.iter().zip(&b.states) {
        if !x.grid().same_shape(&y.grid()) {
            return Err(FsiError::ShapeMismatch("trajectories on different grids".into()));
        }
        let d = l2_norm(&x.sigma.sub(&y.sigma)) / scales[0]
            + l2_norm_vec(&x.w.sub(&y.w)) / scales[1]
            + x.eta.sub(&y.eta).l2_norm() / scales[2]
            + x.eta_t.sub(&y.eta_t).l2_norm() / scales[3];
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Window distance normalized by the field scales of `a`.
pub fn composite_delta<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<T> {
    composite_delta_with_scales(a, b, &trajectory_scales(a))
}

/// Iterates `X ← L(X)` from the constant seed until the composite delta
/// drops below `tol_pic`. Failures are reported, not thrown; the returned
/// trajectory is the last admissible iterate.
pub fn picard_solve<T: Real>(start: &WindowStart<T>, steps: usize, solvers: &LinearSolvers<T>) -> (Trajectory<T>, PicardReport) {
    let cfg = &solvers.config;
    let mut x = Trajectory::seed(start, steps, cfg.dt);
    let mut report = PicardReport {
        iterations: 0,
        deltas: Vec::new(),
        outcome: PicardOutcome::MaxIterations,
    };
    if let Err(e) = check_admissible(&x, &solvers.params, cfg) {
        report.outcome = classify(e);
        return (x, report);
    }
    while report.iterations < cfg.max_iter {
        let y = match apply_l(&x, solvers) {
            Ok(y) => y,
            Err(e) => {
                report.outcome = classify(e);
                return (x, report);
            }
        };
        report.iterations += 1;
        let delta = match composite_delta(&x, &y) {
            Ok(d) => d,
            Err(e) => {
                report.outcome = classify(e);
                return (x, report);
            }
        };
        report.deltas.push(delta.as_f64());
        log::debug!("picard iteration {} delta {:e}", report.iterations, delta.as_f64());
        x = y;
        if delta < cfg.tol_pic {
            report.outcome = PicardOutcome::Converged;
            break;
        }
    }
    (x, report)
}
