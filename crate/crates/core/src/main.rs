use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fsisim::beam::dispersion_roots;
use fsisim::config::parse_config;
use fsisim::simulation::{compatibility, run_simulation};
use fsisim::verify::{
    beam_dispersion, observed_orders, source_oracle, source_table_csv, translation_error, upwind_comparison,
    Manufactured,
};
use fsisim::{FsiError, Result};

#[derive(Parser)]
#[command(name = "fsisim", version, about = "Compressible channel flow under a damped elastic beam")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `[output] dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the initial data against the boundary conditions.
    CheckCompat {
        #[arg(long)]
        config: PathBuf,
        /// Also require the momentum wall condition.
        #[arg(long)]
        strict: bool,
    },
    /// Verification studies.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Transformed vs physical residuals under grid refinement.
    SourceTerms {
        #[arg(long)]
        config: PathBuf,
    },
    /// Translation study and upwind comparison.
    Transport {
        #[arg(long)]
        config: PathBuf,
    },
    /// Measured vs exact beam mode rates.
    Beam {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(out: Option<PathBuf>, config: PathBuf) -> Result<bool> {
    let mut cfg = parse_config(&config)?;
    if let Some(out) = out {
        cfg.output.dir = out;
    }
    let r = run_simulation(&cfg)?;
    println!(
        "finished at t = {} after {} windows ({} halvings); output in {}",
        r.final_state.t,
        r.windows,
        r.halvings,
        cfg.output.dir.display()
    );
    Ok(true)
}

fn check_compat(config: PathBuf, strict: bool) -> Result<bool> {
    let cfg = parse_config(&config)?;
    let Some(rep) = compatibility(&cfg)? else {
        println!("snapshot initial data: nothing to check");
        return Ok(true);
    };
    let verdict = |b: bool| if b { "pass" } else { "FAIL" };
    println!("velocity wall defect   {:.3e}  {}", rep.b1_residual, verdict(rep.b1_pass));
    println!("momentum wall defect   {:.3e}  {}", rep.b2_residual, verdict(rep.b2_pass));
    println!("tolerance              {:.3e}", rep.tol);
    Ok(if strict { rep.passed() } else { rep.b1_pass })
}

fn oracle_sources(config: PathBuf) -> Result<bool> {
    let cfg = parse_config(&config)?;
    let p = cfg.physics;
    let m = Manufactured::standard(p.length);
    let rows = [16, 32, 64, 128]
        .iter()
        .map(|&n| source_oracle(n, &p, &m))
        .collect::<Result<Vec<_>>>()?;
    print!("{}", source_table_csv(&rows));
    let orders = |f: fn(&fsisim::verify::SourceOracleRow) -> f64| {
        observed_orders(&rows.iter().map(f).collect::<Vec<_>>())
            .iter()
            .map(|o| format!("{o:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("# continuity orders: {}", orders(|r| r.continuity_abs));
    println!("# momentum orders:   {}", orders(|r| r.momentum_abs));
    let last = rows.last().expect("rows");
    println!(
        "# wall normal stress: alternate vs first-principles max difference {:.3e} (scale {:.3e})",
        last.f3_alternate_difference, last.f3_scale
    );
    Ok(true)
}

fn oracle_transport(config: PathBuf) -> Result<bool> {
    let cfg = parse_config(&config)?;
    let l = cfg.grid.length;
    println!("n,dt,error");
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let row = translation_error(n, n / 4, 0.3 * l, l, 1.0)?;
        println!("{},{:e},{:e}", row.n, row.dt, row.error);
        errs.push(row.error);
    }
    let o: Vec<String> = observed_orders(&errs).iter().map(|o| format!("{o:.2}")).collect();
    println!("# orders: {}", o.join(" "));
    let (a, b) = (upwind_comparison(16, 0.25)?, upwind_comparison(32, 0.25)?);
    for u in [&a, &b] {
        println!(
            "# upwind comparison on {0}x{0}: discrepancy {1:.3e}, upwind self-estimate {2:.3e}",
            u.n, u.discrepancy, u.upwind_self_estimate
        );
    }
    let ok = a.discrepancy <= 3.0 * a.upwind_self_estimate && b.discrepancy < a.discrepancy;
    println!("# agreement within 3x upwind self-estimate and shrinking: {ok}");
    Ok(ok)
}

fn oracle_beam(config: PathBuf) -> Result<bool> {
    let cfg = parse_config(&config)?;
    let p = cfg.physics;
    println!("mode,dt,measured_re,measured_im,exact_re,exact_im,rel_error");
    for mode in 1..=4 {
        let kappa = 2.0 * std::f64::consts::PI * mode as f64 / p.length;
        let lam = dispersion_roots(kappa, p.alpha, p.beta, p.delta)
            .iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        for scale in [0.1, 0.05, 0.025] {
            let dt = scale / lam;
            let r = beam_dispersion(mode, dt, &p, cfg.grid.nx.max(2 * mode + 2), 200)?;
            println!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.mode, r.dt, r.measured.re, r.measured.im, r.exact.re, r.exact.im, r.rel_error
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(out, config),
        Command::CheckCompat { config, strict } => check_compat(config, strict),
        Command::Oracle { which } => match which {
            Oracle::SourceTerms { config } => oracle_sources(config),
            Oracle::Transport { config } => oracle_transport(config),
            Oracle::Beam { config } => oracle_beam(config),
        },
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, FsiError::Parse { .. } | FsiError::InvalidParameter { .. }) {
                eprintln!("(see the configuration table in the README)");
            }
            ExitCode::from(1)
        }
    }
}
