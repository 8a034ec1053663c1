use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsch_core::error::{NschError, Result};
use nsch_core::io::analysis::{
    attraction_experiment, audit_ledger, mass_decay, separation_from_snapshots,
    smoothing_experiment,
};
use nsch_core::io::run::META_FILE;
use nsch_core::io::{load_config, read_ledger, read_meta, run, run_in, Meta};
use nsch_core::stepper::bel_tolerance_for;

#[derive(Parser)]
#[command(
    name = "nsch",
    version,
    about = "Navier-Stokes-Cahn-Hilliard-Oono simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured trajectory and run its audits.
    Run {
        config: PathBuf,
        /// Write here instead of the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the energy-law residuals recorded in a ledger.
    AuditEnergy {
        ledger: PathBuf,
        /// Time step; read from the neighbouring meta.json if omitted.
        #[arg(long)]
        tau: Option<f64>,
        /// Largest grid spacing; read from meta.json if omitted.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Fit the decay of the mean phase recorded in a ledger.
    MassDecay { ledger: PathBuf },
    /// Separation gap over the snapshots of a directory.
    Separation {
        dir: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
    },
    /// Smoothing ratio of a perturbed pair started from the configured state.
    Smoothing {
        config: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        t: f64,
    },
    /// Exponential approach of a seeded ensemble to the late-time set of the
    /// configured run.
    Attract {
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        ensemble: usize,
        /// Start of the fitted window; earlier samples are transient.
        #[arg(long, default_value_t = 0.1)]
        fit_from: f64,
    },
}

fn meta_next_to(path: &Path) -> Result<Meta> {
    let dir = path.parent().unwrap_or(Path::new("."));
    read_meta(dir.join(META_FILE))
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, output } => {
            let cfg = load_config(&config)?;
            let report = match output {
                Some(dir) => run_in(&cfg, &dir)?,
                None => run(&cfg)?,
            };
            println!("output {}", report.output_dir.display());
            println!("steps {}", report.steps);
            for a in &report.audits {
                println!(
                    "audit {} {} worst={:e} tol={:e}",
                    a.name,
                    if a.passed { "PASS" } else { "FAIL" },
                    a.worst,
                    a.tolerance
                );
            }
            Ok(report.passed())
        }
        Command::AuditEnergy { ledger, tau, h } => {
            let rows = read_ledger(&ledger)?;
            let (tau, h) = match (tau, h) {
                (Some(t), Some(h)) => (t, h),
                _ => {
                    let m = meta_next_to(&ledger)?;
                    (
                        tau.unwrap_or(m.config.time.tau),
                        h.unwrap_or(m.hx.max(m.hy)),
                    )
                }
            };
            let a = audit_ledger(&rows, bel_tolerance_for(tau, h));
            println!(
                "energy {} rows={} worst={:e} tol={:e}",
                if a.passed { "PASS" } else { "FAIL" },
                rows.len(),
                a.worst,
                a.tolerance
            );
            Ok(a.passed)
        }
        Command::MassDecay { ledger } => {
            let rows = read_ledger(&ledger)?;
            let m = meta_next_to(&ledger)?;
            let d = mass_decay(&rows, &m.config.params, m.config.time.tau)?;
            println!("identity_residual {:e}", d.identity_residual);
            println!("fitted_rate {}", d.fitted_rate);
            println!("discrete_rate {}", d.discrete_rate);
            println!("alpha {}", d.alpha);
            Ok(true)
        }
        Command::Separation { dir, t_min } => {
            let gap = separation_from_snapshots(&dir, t_min)?;
            println!("gap {gap}");
            Ok(gap > 0.0)
        }
        Command::Smoothing { config, eps, t } => {
            let cfg = load_config(&config)?;
            let r = smoothing_experiment(&cfg, eps, t)?;
            println!("smoothing_ratio {r}");
            Ok(r.is_finite())
        }
        Command::Attract {
            config,
            ensemble,
            fit_from,
        } => {
            let cfg = load_config(&config)?;
            let r = attraction_experiment(&cfg, ensemble, fit_from)?;
            println!("t,dist");
            for (t, d) in r.times.iter().zip(&r.dists) {
                println!("{t},{d:e}");
            }
            println!(
                "fit J={} omega={} rms_log_residual={} points={} reference_states={}",
                r.fit.j, r.fit.omega, r.fit.rms_log_residual, r.fit.points, r.reference_size
            );
            Ok(r.fit.omega > 0.0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let NschError::Config { .. } | NschError::Hypothesis { .. } = e {
                return ExitCode::from(3);
            }
            ExitCode::from(2)
        }
    }
}
