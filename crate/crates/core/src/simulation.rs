//! Window-by-window driver: builds the initial data from a [`SimConfig`],
//! runs the Picard iteration on successive windows, halves the window on
//! failure and writes the timeseries, snapshots and event log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{InitialPreset, SimConfig, VelocityInit};
use crate::coupling::{picard_solve, CouplingMode, LinearSolvers, PicardConfig, Trajectory, WindowStart};
use crate::diagnostics::{energy_budget, energy_terms, monitor_norms, steady_residual, EnergyReport, MonitorThresholds};
use crate::error::{FsiError, Result};
use crate::fields::{BeamField, ScalarField, VectorField};
use crate::geometry::build_geometry;
use crate::snapshot::{read_snapshot, write_snapshot};
use crate::sources::{check_compatibility, derive_rates, initial_values, CompatReport};
use crate::state::{lift, lift_velocity, StateRates};
use crate::transport::TransportOptions;
use crate::{CoupledState, Grid};

pub const TIMESERIES_COLUMNS: [&str; 15] = [
    "t",
    "kinetic",
    "internal",
    "beam_kinetic",
    "beam_stretch",
    "beam_bend",
    "viscous_dissipation",
    "beam_dissipation",
    "pext_work",
    "budget_residual",
    "steady_residual",
    "min_one_plus_eta",
    "min_density",
    "max_density",
    "picard_iters",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeseriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: EnergyReport<f64>,
    pub steady_residual: f64,
    pub min_one_plus_eta: f64,
    pub min_density: f64,
    pub max_density: f64,
    pub picard_iters: usize,
}

impl TimeseriesRow {
    pub fn csv_line(&self) -> String {
        let e = &self.energy;
        let vals = [
            self.t,
            e.kinetic,
            e.internal,
            e.beam_kinetic,
            e.beam_stretch,
            e.beam_bend,
            e.viscous_dissipation,
            e.beam_dissipation,
            e.pext_work,
            e.budget_residual,
            self.steady_residual,
            self.min_one_plus_eta,
            self.min_density,
            self.max_density,
        ];
        let mut s: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
        s.push(self.picard_iters.to_string());
        s.join(",")
    }
}

/// The analytic initial data `(ρ₀, u₀, η₁)` of a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub rho0: ScalarField<f64>,
    pub u0: VectorField<f64>,
    pub eta1: BeamField<f64>,
}

pub fn initial_data(cfg: &SimConfig) -> Result<InitialData> {
    let g = cfg.grid()?;
    let p = &cfg.physics;
    let tau = 2.0 * std::f64::consts::PI / g.length;
    let mut rho0 = ScalarField::constant(g, p.rho_bar);
    let mut eta1 = BeamField::zeros(g);
    match &cfg.initial.preset {
        InitialPreset::Steady => {}
        InitialPreset::DensityBump { amplitude, mode } => {
            let k = tau * *mode as f64;
            rho0 = ScalarField::from_fn(g, |x, _| p.rho_bar * (1.0 + amplitude * (k * x).cos()));
        }
        InitialPreset::BeamKick { amplitude, mode } => {
            let k = tau * *mode as f64;
            eta1 = BeamField::from_fn(g, |x| amplitude * (k * x).sin());
        }
        InitialPreset::FromSnapshot { .. } => {
            return Err(FsiError::invalid("preset", "snapshot presets carry a full state, not initial data"));
        }
    }
    let u0 = match cfg.initial.velocity {
        VelocityInit::Matched => lift(&eta1),
        VelocityInit::Rest => VectorField::zeros(g),
        VelocityInit::UnitLift => lift(&BeamField::constant(g, 1.0)),
    };
    Ok(InitialData { rho0, u0, eta1 })
}

/// Compatibility of the configured initial data; `None` for snapshots.
pub fn compatibility(cfg: &SimConfig) -> Result<Option<CompatReport<f64>>> {
    if matches!(cfg.initial.preset, InitialPreset::FromSnapshot { .. }) {
        return Ok(None);
    }
    let d = initial_data(cfg)?;
    check_compatibility(&d.rho0, &d.u0, &d.eta1, &cfg.physics, cfg.numerics.compat_tol).map(Some)
}

/// Initial state and rates. Analytic presets start from `η(0) = 0`,
/// `η_t(0) = η₁`, `w₀ = u₀ − z η₁ e₂`; snapshots get rates consistent with
/// the equations at the stored state.
pub fn initial_start(cfg: &SimConfig) -> Result<WindowStart<f64>> {
    let g = cfg.grid()?;
    let p = &cfg.physics;
    if let InitialPreset::FromSnapshot { path } = &cfg.initial.preset {
        let state = read_snapshot(path, Some(&g))?;
        let geo = build_geometry(&state.eta, cfg.numerics.delta0)?;
        let rates = derive_rates(&state, p, &geo)?;
        return Ok(WindowStart { state, rates });
    }
    let d = initial_data(cfg)?;
    let iv = initial_values(&d.rho0, &d.u0, &d.eta1, p)?;
    let mut w = lift_velocity(&d.u0, &d.eta1.scale(-1.0));
    // w vanishes on the walls for all t > 0; incompatible data is projected
    w.zero_walls();
    let state = CoupledState {
        sigma: d.rho0.map(|r| r - p.rho_bar),
        w,
        eta: BeamField::zeros(g),
        eta_t: d.eta1,
        t: 0.0,
    };
    Ok(WindowStart {
        state,
        rates: StateRates {
            w_t: iv.w_t,
            eta_tt: iv.eta_tt,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_state: CoupledState,
    pub timeseries: Vec<TimeseriesRow>,
    /// JSON records, one per line of `events.jsonl`.
    pub events: Vec<serde_json::Value>,
    pub windows: usize,
    pub halvings: usize,
    /// Picard iterations of every accepted window.
    pub picard_iterations: Vec<usize>,
    /// Composite deltas of every accepted window.
    pub picard_deltas: Vec<Vec<f64>>,
}

struct Sink {
    dir: Option<PathBuf>,
    timeseries: Option<BufWriter<File>>,
    events: Option<BufWriter<File>>,
}

impl Sink {
    fn open(dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self {
                dir: None,
                timeseries: None,
                events: None,
            });
        };
        std::fs::create_dir_all(dir).map_err(|e| FsiError::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| FsiError::io(p, e))
        };
        let mut ts = create("timeseries.csv")?;
        writeln!(ts, "{}", TIMESERIES_COLUMNS.join(",")).map_err(|e| FsiError::io(dir, e))?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            timeseries: Some(ts),
            events: Some(create("events.jsonl")?),
        })
    }

    fn row(&mut self, row: &TimeseriesRow) -> Result<()> {
        if let (Some(w), Some(dir)) = (&mut self.timeseries, &self.dir) {
            writeln!(w, "{}", row.csv_line()).map_err(|e| FsiError::io(dir, e))?;
        }
        Ok(())
    }

    fn event(&mut self, ev: &serde_json::Value) -> Result<()> {
        if let (Some(w), Some(dir)) = (&mut self.events, &self.dir) {
            writeln!(w, "{ev}").map_err(|e| FsiError::io(dir, e))?;
        }
        Ok(())
    }

    fn snapshot(&self, state: &CoupledState, step: usize) -> Result<()> {
        match &self.dir {
            Some(dir) => write_snapshot(state, dir.join(format!("snap_{step:06}.txt"))),
            None => Ok(()),
        }
    }

    fn flush(&mut self) -> Result<()> {
        for w in [&mut self.timeseries, &mut self.events].into_iter().flatten() {
            w.flush().map_err(|e| FsiError::io(self.dir.clone().unwrap_or_default(), e))?;
        }
        Ok(())
    }
}

fn row_for(
    cfg: &SimConfig,
    step: usize,
    prev: Option<&CoupledState>,
    curr: &CoupledState,
    iters: usize,
) -> Result<TimeseriesRow> {
    let p = &cfg.physics;
    let d0 = cfg.numerics.delta0;
    let energy = match prev {
        Some(prev) => energy_budget(prev, curr, cfg.numerics.dt, p, d0)?,
        None => energy_terms(curr, p, d0)?,
    };
    let rho = curr.density(p);
    Ok(TimeseriesRow {
        step,
        t: curr.t,
        energy,
        steady_residual: steady_residual(curr),
        min_one_plus_eta: 1.0 + curr.eta.min(),
        min_density: rho.min(),
        max_density: rho.max(),
        picard_iters: iters,
    })
}

fn steps_between(t0: f64, t_end: f64, dt: f64) -> usize {
    let n = (t_end - t0) / dt;
    if n <= 1e-9 {
        return 0;
    }
    (n - 1e-9 * n.max(1.0)).ceil().max(1.0) as usize
}

/// Runs the configured simulation, writing into `cfg.output.dir`.
pub fn run_simulation(cfg: &SimConfig) -> Result<RunResult> {
    run_simulation_to(cfg, Some(&cfg.output.dir))
}

/// Runs the configured simulation; `out = None` keeps everything in memory.
/// On window underflow the files written so far are flushed (with a final
/// `abort` event) before the error is returned.
pub fn run_simulation_to(cfg: &SimConfig, out: Option<&Path>) -> Result<RunResult> {
    cfg.validate()?;
    if let Some(rep) = compatibility(cfg)? {
        if !rep.b1_pass && !cfg.flags.allow_incompatible {
            return Err(FsiError::IncompatibleInitialData(format!(
                "boundary velocity defect {:e} exceeds {:e}",
                rep.b1_residual, rep.tol
            )));
        }
        if !rep.passed() {
            log::warn!(
                "initial data: velocity defect {:e}, momentum wall defect {:e}",
                rep.b1_residual,
                rep.b2_residual
            );
        }
    }
    let grid: Grid = cfg.grid()?;
    let n = &cfg.numerics;
    let mut start = initial_start(cfg)?;
    let t0 = start.state.t;
    let rho = start.state.density(&cfg.physics);
    let bounds = (rho.min(), rho.max());
    if !(bounds.0 > 0.0) {
        return Err(FsiError::NonpositiveDensity {
            value: bounds.0,
            node: 0,
        });
    }
    let pic = PicardConfig {
        dt: n.dt,
        tol_pic: n.tol_pic,
        max_iter: n.max_iter,
        lin_tol: n.lin_tol,
        delta0: n.delta0,
        density_bounds: bounds,
        transport: TransportOptions { monotone: n.monotone },
    };
    let solvers = LinearSolvers::new(grid, cfg.physics, pic)?;
    let thresholds = MonitorThresholds {
        sigma: cfg.monitor.sigma,
        w: cfg.monitor.w,
        eta: cfg.monitor.eta,
    };
    let base_window = match n.coupling_mode {
        CouplingMode::Window => n.window_steps,
        CouplingMode::Step => 1,
    };
    let min_window = n.min_window_steps.min(base_window);
    let total = steps_between(t0, n.t_end, n.dt);
    if total == 0 {
        return Err(FsiError::invalid("t_end", format!("must exceed the initial time {t0}")));
    }

    let mut sink = Sink::open(out)?;
    let mut result = RunResult {
        final_state: start.state.clone(),
        timeseries: Vec::new(),
        events: Vec::new(),
        windows: 0,
        halvings: 0,
        picard_iterations: Vec::new(),
        picard_deltas: Vec::new(),
    };
    fn emit(sink: &mut Sink, events: &mut Vec<serde_json::Value>, ev: serde_json::Value) -> Result<()> {
        sink.event(&ev)?;
        events.push(ev);
        Ok(())
    }

    emit(
        &mut sink,
        &mut result.events,
        json!({"event": "start", "steps": total, "dt": n.dt, "window_steps": base_window,
               "density_bounds": [bounds.0, bounds.1]}),
    )?;
    let row0 = row_for(cfg, 0, None, &start.state, 0)?;
    sink.row(&row0)?;
    result.timeseries.push(row0);
    if cfg.output.snapshot_every > 0 {
        sink.snapshot(&start.state, 0)?;
    }

    let mut step = 0;
    let mut window = base_window;
    while step < total {
        let len = window.min(total - step);
        let (traj, report) = picard_solve(&start, len, &solvers);
        emit(
            &mut sink,
            &mut result.events,
            json!({"event": "window", "index": result.windows, "t": start.state.t, "steps": len,
                   "iterations": report.iterations, "deltas": report.deltas, "outcome": report.outcome}),
        )?;
        if !report.converged() {
            result.halvings += 1;
            let reason = serde_json::to_string(&report.outcome).unwrap_or_default();
            if len <= min_window || len / 2 < min_window {
                emit(
                    &mut sink,
                    &mut result.events,
                    json!({"event": "abort", "t": start.state.t, "window_steps": len,
                           "min_window_steps": min_window, "reason": report.outcome}),
                )?;
                sink.flush()?;
                return Err(FsiError::WindowUnderflow {
                    t: start.state.t,
                    window_steps: len,
                    min_window_steps: min_window,
                    reason,
                });
            }
            window = len / 2;
            emit(
                &mut sink,
                &mut result.events,
                json!({"event": "halving", "t": start.state.t, "window_steps": window}),
            )?;
            continue;
        }
        let mut traj: Trajectory<f64> = traj;
        for (k, s) in traj.states.iter_mut().enumerate() {
            s.t = t0 + (step + k) as f64 * n.dt;
        }
        let mon = monitor_norms(&traj.states, n.dt, &thresholds);
        if !mon.exceeded.is_empty() {
            emit(
                &mut sink,
                &mut result.events,
                json!({"event": "monitor", "t": start.state.t, "exceeded": mon.exceeded, "report": mon}),
            )?;
        }
        for k in 1..=len {
            let gstep = step + k;
            if gstep % cfg.output.timeseries_every == 0 || gstep == total {
                let row = row_for(cfg, gstep, Some(&traj.states[k - 1]), &traj.states[k], report.iterations)?;
                sink.row(&row)?;
                result.timeseries.push(row);
            }
            if cfg.output.snapshot_every > 0 && (gstep % cfg.output.snapshot_every == 0 || gstep == total) {
                sink.snapshot(&traj.states[k], gstep)?;
            }
        }
        result.windows += 1;
        result.picard_iterations.push(report.iterations);
        result.picard_deltas.push(report.deltas);
        step += len;
        start = traj.end_start();
        window = base_window;
    }
    result.final_state = start.state;
    emit(
        &mut sink,
        &mut result.events,
        json!({"event": "done", "t": result.final_state.t, "windows": result.windows, "halvings": result.halvings}),
    )?;
    sink.flush()?;
    Ok(result)
}
