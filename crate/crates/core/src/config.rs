//! Run configuration: a line-based `key = value` file with `[section]`
//! headers. `#` starts a comment. Unknown sections or keys, duplicate keys
//! and malformed values are parse errors carrying the line number;
//! out-of-range values are validation errors naming the field.
//!
//! | section     | key                | default     |
//! |-------------|--------------------|-------------|
//! | `grid`      | `nx`               | 32          |
//! |             | `nz`               | 16          |
//! |             | `length`           | 1.0         |
//! | `physics`   | `mu`               | 0.1         |
//! |             | `mu_prime`         | 0.05        |
//! |             | `a`                | 1.0         |
//! |             | `gamma`            | 1.4         |
//! |             | `rho_bar`          | 1.0         |
//! |             | `alpha`            | 1.0         |
//! |             | `beta`             | 1.0         |
//! |             | `delta`            | 1.0         |
//! | `initial`   | `preset`           | `steady`    |
//! |             | `amplitude`        | 1e-3        |
//! |             | `mode`             | 1           |
//! |             | `path`             | (none)      |
//! |             | `velocity`         | `matched`   |
//! | `numerics`  | `dt`               | 1e-3        |
//! |             | `t_end`            | required    |
//! |             | `window_steps`     | 20          |
//! |             | `min_window_steps` | 1           |
//! |             | `tol_pic`          | 1e-8        |
//! |             | `max_iter`         | 50          |
//! |             | `lin_tol`          | 1e-10       |
//! |             | `delta0`           | 0.5         |
//! |             | `coupling_mode`    | `window`    |
//! |             | `monotone`         | false       |
//! |             | `compat_tol`       | 1e-10       |
//! | `output`    | `dir`              | `out`       |
//! |             | `snapshot_every`   | 0 (never)   |
//! |             | `timeseries_every` | 1           |
//! | `flags`     | `allow_incompatible` | false     |
//! | `monitor`   | `sigma`, `w`, `eta` | (no threshold) |
//!
//! `preset` is one of `steady`, `density_bump`, `beam_kick`,
//! `from_snapshot`. `velocity` picks the initial fluid velocity for the
//! analytic presets: `matched` (`u₀ = z η₁ e₂`, compatible with the beam),
//! `rest` (`u₀ = 0`) or `unit_lift` (`u₀ = z e₂`, deliberately incompatible).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coupling::CouplingMode;
use crate::error::{FsiError, Result};
use crate::state::PhysParams;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    Steady,
    DensityBump { amplitude: f64, mode: usize },
    BeamKick { amplitude: f64, mode: usize },
    FromSnapshot { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityInit {
    Matched,
    Rest,
    UnitLift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub nz: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub preset: InitialPreset,
    pub velocity: VelocityInit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub dt: f64,
    pub t_end: f64,
    pub window_steps: usize,
    pub min_window_steps: usize,
    pub tol_pic: f64,
    pub max_iter: usize,
    pub lin_tol: f64,
    pub delta0: f64,
    pub coupling_mode: CouplingMode,
    pub monotone: bool,
    pub compat_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshot_every: usize,
    pub timeseries_every: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Flags {
    pub allow_incompatible: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MonitorConfig {
    pub sigma: Option<f64>,
    pub w: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub physics: PhysParams<f64>,
    pub initial: InitialConfig,
    pub numerics: Numerics,
    pub output: OutputConfig,
    pub flags: Flags,
    pub monitor: MonitorConfig,
}

impl SimConfig {
    /// Defaults everywhere, with the given end time.
    pub fn with_t_end(t_end: f64) -> Self {
        Self {
            grid: GridConfig {
                nx: 32,
                nz: 16,
                length: 1.0,
            },
            physics: PhysParams::default(),
            initial: InitialConfig {
                preset: InitialPreset::Steady,
                velocity: VelocityInit::Matched,
            },
            numerics: Numerics {
                dt: 1e-3,
                t_end,
                window_steps: 20,
                min_window_steps: 1,
                tol_pic: 1e-8,
                max_iter: 50,
                lin_tol: 1e-10,
                delta0: 0.5,
                coupling_mode: CouplingMode::Window,
                monotone: false,
                compat_tol: 1e-10,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                snapshot_every: 0,
                timeseries_every: 1,
            },
            flags: Flags::default(),
            monitor: MonitorConfig::default(),
        }
    }

    pub fn grid(&self) -> Result<crate::Grid> {
        crate::Grid::new(self.grid.nx, self.grid.nz, self.grid.length)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.physics.validate()?;
        let n = &self.numerics;
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FsiError::invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("dt", n.dt)?;
        positive("t_end", n.t_end)?;
        positive("tol_pic", n.tol_pic)?;
        positive("lin_tol", n.lin_tol)?;
        positive("compat_tol", n.compat_tol)?;
        if !(n.delta0 > 0.0 && n.delta0 < 1.0) {
            return Err(FsiError::invalid("delta0", format!("must lie in (0, 1), got {}", n.delta0)));
        }
        if n.window_steps == 0 {
            return Err(FsiError::invalid("window_steps", "must be at least 1"));
        }
        if n.min_window_steps == 0 {
            return Err(FsiError::invalid("min_window_steps", "must be at least 1"));
        }
        if n.min_window_steps > n.window_steps {
            return Err(FsiError::invalid(
                "min_window_steps",
                format!("{} exceeds window_steps = {}", n.min_window_steps, n.window_steps),
            ));
        }
        if n.max_iter == 0 {
            return Err(FsiError::invalid("max_iter", "must be at least 1"));
        }
        if self.output.timeseries_every == 0 {
            return Err(FsiError::invalid("timeseries_every", "must be at least 1"));
        }
        match &self.initial.preset {
            InitialPreset::DensityBump { amplitude, mode } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(FsiError::invalid("amplitude", "density bump must keep rho positive (|amplitude| < 1)"));
                }
                if *mode == 0 || 2 * mode >= self.grid.nx {
                    return Err(FsiError::invalid("mode", format!("must lie in 1..{}", self.grid.nx / 2)));
                }
            }
            InitialPreset::BeamKick { amplitude, mode } => {
                if !amplitude.is_finite() {
                    return Err(FsiError::invalid("amplitude", "must be finite"));
                }
                if *mode == 0 || 2 * mode >= self.grid.nx {
                    return Err(FsiError::invalid("mode", format!("must lie in 1..{}", self.grid.nx / 2)));
                }
            }
            _ => {}
        }
        for (name, v) in [("sigma", self.monitor.sigma), ("w", self.monitor.w), ("eta", self.monitor.eta)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        Ok(())
    }

    /// Serializes every field; parsing the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "[grid]\nnx = {}\nnz = {}\nlength = {:?}\n", g.nx, g.nz, g.length);
        let p = &self.physics;
        let _ = writeln!(
            s,
            "[physics]\nmu = {:?}\nmu_prime = {:?}\na = {:?}\ngamma = {:?}\nrho_bar = {:?}\nalpha = {:?}\nbeta = {:?}\ndelta = {:?}\n",
            p.mu, p.mu_prime, p.a, p.gamma, p.rho_bar, p.alpha, p.beta, p.delta
        );
        s.push_str("[initial]\n");
        match &self.initial.preset {
            InitialPreset::Steady => s.push_str("preset = steady\n"),
            InitialPreset::DensityBump { amplitude, mode } => {
                let _ = writeln!(s, "preset = density_bump\namplitude = {amplitude:?}\nmode = {mode}");
            }
            InitialPreset::BeamKick { amplitude, mode } => {
                let _ = writeln!(s, "preset = beam_kick\namplitude = {amplitude:?}\nmode = {mode}");
            }
            InitialPreset::FromSnapshot { path } => {
                let _ = writeln!(s, "preset = from_snapshot\npath = {}", path.display());
            }
        }
        let vel = match self.initial.velocity {
            VelocityInit::Matched => "matched",
            VelocityInit::Rest => "rest",
            VelocityInit::UnitLift => "unit_lift",
        };
        let _ = writeln!(s, "velocity = {vel}\n");
        let n = &self.numerics;
        let mode = match n.coupling_mode {
            CouplingMode::Window => "window",
            CouplingMode::Step => "step",
        };
        let _ = writeln!(
            s,
            "[numerics]\ndt = {:?}\nt_end = {:?}\nwindow_steps = {}\nmin_window_steps = {}\ntol_pic = {:?}\nmax_iter = {}\nlin_tol = {:?}\ndelta0 = {:?}\ncoupling_mode = {}\nmonotone = {}\ncompat_tol = {:?}\n",
            n.dt, n.t_end, n.window_steps, n.min_window_steps, n.tol_pic, n.max_iter, n.lin_tol, n.delta0, mode, n.monotone, n.compat_tol
        );
        let o = &self.output;
        let _ = writeln!(
            s,
            "[output]\ndir = {}\nsnapshot_every = {}\ntimeseries_every = {}\n",
            o.dir.display(),
            o.snapshot_every,
            o.timeseries_every
        );
        let _ = writeln!(s, "[flags]\nallow_incompatible = {}", self.flags.allow_incompatible);
        let m = &self.monitor;
        let mut mon = String::new();
        for (k, v) in [("sigma", m.sigma), ("w", m.w), ("eta", m.eta)] {
            if let Some(v) = v {
                let _ = writeln!(mon, "{k} = {v:?}");
            }
        }
        if !mon.is_empty() {
            let _ = write!(s, "\n[monitor]\n{mon}");
        }
        s
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["nx", "nz", "length"]),
    (
        "physics",
        &["mu", "mu_prime", "a", "gamma", "rho_bar", "alpha", "beta", "delta"],
    ),
    ("initial", &["preset", "amplitude", "mode", "path", "velocity"]),
    (
        "numerics",
        &[
            "dt",
            "t_end",
            "window_steps",
            "min_window_steps",
            "tol_pic",
            "max_iter",
            "lin_tol",
            "delta0",
            "coupling_mode",
            "monotone",
            "compat_tol",
        ],
    ),
    ("output", &["dir", "snapshot_every", "timeseries_every"]),
    ("flags", &["allow_incompatible"]),
    ("monitor", &["sigma", "w", "eta"]),
];

struct Entry {
    value: String,
    line: usize,
}

struct Table {
    path: PathBuf,
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn err(&self, line: usize, message: impl Into<String>) -> FsiError {
        FsiError::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn get<V: FromStr>(&self, section: &str, key: &str) -> Result<Option<V>> {
        match self.entries.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| self.err(e.line, format!("cannot parse `{}` as a value for `{key}`", e.value))),
        }
    }

    fn set<V: FromStr>(&self, section: &str, key: &str, slot: &mut V) -> Result<()> {
        if let Some(v) = self.get(section, key)? {
            *slot = v;
        }
        Ok(())
    }

    fn word(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| (e.value.as_str(), e.line))
    }
}

fn tokenize(text: &str, path: &Path) -> Result<Table> {
    let mut table = Table {
        path: path.to_path_buf(),
        entries: BTreeMap::new(),
    };
    let mut section: Option<&str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| table.err(line, "unterminated section header"))?
                .trim();
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| table.err(line, format!("unknown section `[{name}]`")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| table.err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        let sec = section.ok_or_else(|| table.err(line, format!("key `{key}` outside any section")))?;
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(table.err(line, format!("unknown key `{key}` in [{sec}]")));
        }
        if value.is_empty() {
            return Err(table.err(line, format!("empty value for `{key}`")));
        }
        let slot = (sec.to_string(), key.to_string());
        if let Some(prev) = table.entries.get(&slot) {
            return Err(table.err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        table.entries.insert(
            slot,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(table)
}

/// Parses configuration text; `path` is only used in error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<SimConfig> {
    let t = tokenize(text, path)?;
    let t_end: f64 = t
        .get("numerics", "t_end")?
        .ok_or_else(|| FsiError::invalid("t_end", "required in [numerics]"))?;
    let mut c = SimConfig::with_t_end(t_end);

    t.set("grid", "nx", &mut c.grid.nx)?;
    t.set("grid", "nz", &mut c.grid.nz)?;
    t.set("grid", "length", &mut c.grid.length)?;

    let p = &mut c.physics;
    t.set("physics", "mu", &mut p.mu)?;
    t.set("physics", "mu_prime", &mut p.mu_prime)?;
    t.set("physics", "a", &mut p.a)?;
    t.set("physics", "gamma", &mut p.gamma)?;
    t.set("physics", "rho_bar", &mut p.rho_bar)?;
    t.set("physics", "alpha", &mut p.alpha)?;
    t.set("physics", "beta", &mut p.beta)?;
    t.set("physics", "delta", &mut p.delta)?;
    p.length = c.grid.length;

    let amplitude: f64 = t.get("initial", "amplitude")?.unwrap_or(1e-3);
    let mode: usize = t.get("initial", "mode")?.unwrap_or(1);
    c.initial.preset = match t.word("initial", "preset") {
        None | Some(("steady", _)) => InitialPreset::Steady,
        Some(("density_bump", _)) => InitialPreset::DensityBump { amplitude, mode },
        Some(("beam_kick", _)) => InitialPreset::BeamKick { amplitude, mode },
        Some(("from_snapshot", line)) => {
            let path: String = t
                .get("initial", "path")?
                .ok_or_else(|| t.err(line, "preset `from_snapshot` needs `path`"))?;
            InitialPreset::FromSnapshot { path: path.into() }
        }
        Some((other, line)) => return Err(t.err(line, format!("unknown preset `{other}`"))),
    };
    c.initial.velocity = match t.word("initial", "velocity") {
        None | Some(("matched", _)) => VelocityInit::Matched,
        Some(("rest", _)) => VelocityInit::Rest,
        Some(("unit_lift", _)) => VelocityInit::UnitLift,
        Some((other, line)) => return Err(t.err(line, format!("unknown velocity `{other}`"))),
    };

    let n = &mut c.numerics;
    t.set("numerics", "dt", &mut n.dt)?;
    t.set("numerics", "window_steps", &mut n.window_steps)?;
    t.set("numerics", "min_window_steps", &mut n.min_window_steps)?;
    t.set("numerics", "tol_pic", &mut n.tol_pic)?;
    t.set("numerics", "max_iter", &mut n.max_iter)?;
    t.set("numerics", "lin_tol", &mut n.lin_tol)?;
    t.set("numerics", "delta0", &mut n.delta0)?;
    t.set("numerics", "monotone", &mut n.monotone)?;
    t.set("numerics", "compat_tol", &mut n.compat_tol)?;
    n.coupling_mode = match t.word("numerics", "coupling_mode") {
        None | Some(("window", _)) => CouplingMode::Window,
        Some(("step", _)) => CouplingMode::Step,
        Some((other, line)) => return Err(t.err(line, format!("unknown coupling_mode `{other}`"))),
    };

    if let Some(dir) = t.get::<String>("output", "dir")? {
        c.output.dir = dir.into();
    }
    t.set("output", "snapshot_every", &mut c.output.snapshot_every)?;
    t.set("output", "timeseries_every", &mut c.output.timeseries_every)?;
    t.set("flags", "allow_incompatible", &mut c.flags.allow_incompatible)?;
    c.monitor.sigma = t.get("monitor", "sigma")?;
    c.monitor.w = t.get("monitor", "w")?;
    c.monitor.eta = t.get("monitor", "eta")?;

    c.validate()?;
    Ok(c)
}

/// Reads and parses a configuration file. A relative snapshot path is
/// resolved against the directory of the file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FsiError::io(path, e))?;
    let mut c = parse_config_str(&text, path)?;
    if let InitialPreset::FromSnapshot { path: snap } = &mut c.initial.preset {
        if snap.is_relative() {
            if let Some(dir) = path.parent() {
                *snap = dir.join(&*snap);
            }
        }
    }
    Ok(c)
}
