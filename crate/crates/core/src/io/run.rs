//! Trajectory orchestration: initial state, stepping, ledger and snapshot
//! output, per-step audits and the run metadata file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Audit, RunConfig};
use super::init::initial_state;
use super::ledger::{LedgerRow, LedgerWriter};
use super::snapshot::write_snapshot;
use crate::error::{NschError, Result};
use crate::grid::DIVERGENCE_TOL;
use crate::physics::verify_hypotheses;
use crate::stepper::{bel_audit, bel_tolerance, c1_constant, energy, step, State, C_AUDIT};

/// Per-step tolerance of the mass audits.
pub const MASS_TOL: f64 = 1e-11;

pub const LEDGER_FILE: &str = "ledger.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the audited quantity.
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub format_version: u32,
    pub config: RunConfig,
    pub steps: usize,
    pub hx: f64,
    pub hy: f64,
    pub c1: f64,
    pub c_audit: f64,
    pub bel_tolerance: f64,
    pub h3_constant: f64,
    pub eta_star: f64,
    pub status: String,
    pub steps_done: usize,
    pub audits: Vec<AuditResult>,
}

pub fn read_meta(path: impl AsRef<Path>) -> Result<Meta> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| NschError::Ledger(format!("bad meta file: {e}")))
}

fn write_meta(dir: &Path, meta: &Meta) -> Result<()> {
    let text = serde_json::to_string_pretty(meta)
        .map_err(|e| NschError::Ledger(format!("cannot encode meta: {e}")))?;
    std::fs::write(dir.join(META_FILE), text + "\n")?;
    Ok(())
}

pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:08}.nsch")
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub steps: usize,
    pub final_state: State,
    pub audits: Vec<AuditResult>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed)
    }
}

struct Tracker {
    /// Largest energy-law residual, floored at zero.
    energy: f64,
    mass: f64,
    divergence: f64,
    gap: f64,
}

impl Tracker {
    fn results(&self, enabled: &[Audit], tol: f64) -> Vec<AuditResult> {
        let audit = |name: &str, worst: f64, tolerance: f64, passed: bool| AuditResult {
            name: name.into(),
            passed,
            worst,
            tolerance,
        };
        enabled
            .iter()
            .map(|a| match a {
                Audit::Energy => audit("energy", self.energy, tol, self.energy <= tol),
                Audit::Mass => audit("mass", self.mass, MASS_TOL, self.mass <= MASS_TOL),
                Audit::Divergence => audit(
                    "divergence",
                    self.divergence,
                    DIVERGENCE_TOL,
                    self.divergence <= DIVERGENCE_TOL,
                ),
                // smallest gap 1 - max|phi|; must stay positive
                Audit::Separation => audit("separation", self.gap, 0.0, self.gap > 0.0),
            })
            .collect()
    }
}

/// Integrates the configured trajectory from its initial time (zero, or the
/// snapshot time on restart) to `t_end` into `dir`, writing a ledger
/// row every `ledger_every` steps and a snapshot every `snapshot_every`
/// steps (plus the first and last state). A failing step flushes the last
/// valid state as a snapshot before the error is returned.
pub fn run_in(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let p = cfg.params;
    let step_cfg = cfg.time.step_config();
    let g = cfg.grid.build()?;
    let mut state = initial_state(cfg)?;
    let steps = cfg.time.steps_from(state.t);
    let tol = bel_tolerance(cfg.time.tau, &g);
    let hyp = verify_hypotheses(&p, 400);
    let mut meta = Meta {
        format_version: super::snapshot::VERSION,
        config: cfg.clone(),
        steps,
        hx: g.hx,
        hy: g.hy,
        c1: c1_constant(&g, &p),
        c_audit: C_AUDIT,
        bel_tolerance: tol,
        h3_constant: hyp.h3_constant,
        eta_star: hyp.eta_star,
        status: "running".into(),
        steps_done: 0,
        audits: Vec::new(),
    };
    write_meta(dir, &meta)?;

    let mut ledger = LedgerWriter::create(dir.join(LEDGER_FILE))?;
    let mut prev = energy(&state, &p);
    ledger.push(&LedgerRow::new(&state, &prev, 0))?;
    write_snapshot(&state, dir.join(snapshot_name(0)))?;
    let mut track = Tracker {
        energy: 0.0,
        mass: 0.0,
        divergence: crate::stepper::div_residual(&state),
        gap: 1.0 - state.phi.max_abs(),
    };

    for k in 1..=steps {
        let (next, info) = match step(&state, &p, &step_cfg) {
            Ok(r) => r,
            Err(e) => {
                ledger.flush()?;
                write_snapshot(&state, dir.join(snapshot_name(k - 1)))?;
                meta.status = format!("failed at step {k}: {e}");
                meta.steps_done = k - 1;
                meta.audits = track.results(&cfg.diagnostics, tol);
                write_meta(dir, &meta)?;
                return Err(e);
            }
        };
        let mut e = energy(&next, &p);
        e.residual = bel_audit(&prev, &e, cfg.time.tau);
        track.energy = track.energy.max(e.residual);
        track.mass = track.mass.max(info.mass_residual).max(info.sigma_drift);
        track.divergence = track.divergence.max(info.div_residual);
        track.gap = track.gap.min(1.0 - next.phi.max_abs());
        if k % cfg.time.ledger_every == 0 || k == steps {
            ledger.push(&LedgerRow::new(&next, &e, info.newton_iters))?;
        }
        if k % cfg.time.snapshot_every == 0 || k == steps {
            write_snapshot(&next, dir.join(snapshot_name(k)))?;
        }
        prev = e;
        state = next;
    }
    ledger.flush()?;
    let audits = track.results(&cfg.diagnostics, tol);
    meta.status = if audits.iter().all(|a| a.passed) {
        "ok".into()
    } else {
        "audit failure".into()
    };
    meta.steps_done = steps;
    meta.audits = audits.clone();
    write_meta(dir, &meta)?;
    Ok(RunReport {
        output_dir: dir.to_path_buf(),
        steps,
        final_state: state,
        audits,
    })
}

/// [`run_in`] at the configured output directory (after the root override).
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    run_in(cfg, &cfg.resolved_output_dir())
}
