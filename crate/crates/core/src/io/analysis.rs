//! Post-hoc analyses of ledgers and snapshot directories, and the ensemble
//! experiments behind the `smoothing` and `attract` commands.

use std::path::{Path, PathBuf};

use super::config::{InitKind, RunConfig};
use super::init::{initial_state, initial_state_with};
use super::ledger::LedgerRow;
use super::run::AuditResult;
use super::snapshot::read_snapshot_data;
use crate::diagnostics::{
    fit_exponential_attraction, hausdorff_semidist, separation_gap_from_samples, smoothing_ratio,
    AttractionFit,
};
use crate::error::{NschError, Result};
use crate::physics::PhysParams;
use crate::stepper::{step, State};

/// Checks the recorded energy-law residuals against a tolerance.
pub fn audit_ledger(rows: &[LedgerRow], tolerance: f64) -> AuditResult {
    let worst = rows.iter().map(|r| r.bel_residual).fold(0.0f64, f64::max);
    AuditResult {
        name: "energy".into(),
        passed: worst <= tolerance,
        worst,
        tolerance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassDecay {
    /// Largest deviation from the one-step geometric law between rows.
    pub identity_residual: f64,
    pub fitted_rate: f64,
    /// `ln(1 + alpha tau) / tau`
    pub discrete_rate: f64,
    pub alpha: f64,
}

pub fn mass_decay(rows: &[LedgerRow], p: &PhysParams, tau: f64) -> Result<MassDecay> {
    let q = 1.0 + p.alpha * tau;
    let mut identity_residual = 0.0f64;
    for w in rows.windows(2) {
        let n = ((w[1].t - w[0].t) / tau).round() as i32;
        let predicted = (w[0].mean_phi - p.c0) * q.powi(-n);
        identity_residual = identity_residual.max(((w[1].mean_phi - p.c0) - predicted).abs());
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let dists: Vec<f64> = rows.iter().map(|r| (r.mean_phi - p.c0).abs()).collect();
    let fit = fit_exponential_attraction(&times, &dists)?;
    Ok(MassDecay {
        identity_residual,
        fitted_rate: fit.omega,
        discrete_rate: q.ln() / tau,
        alpha: p.alpha,
    })
}

/// Snapshot files of a directory, sorted by name.
pub fn snapshot_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "nsch"))
        .collect();
    files.sort();
    Ok(files)
}

/// Separation gap over the snapshots of a directory.
pub fn separation_from_snapshots(dir: impl AsRef<Path>, t_min: f64) -> Result<f64> {
    let mut samples = Vec::new();
    for f in snapshot_files(dir)? {
        let d = read_snapshot_data(&f)?;
        samples.push((d.t, d.phi.max_abs()));
    }
    separation_gap_from_samples(&samples, t_min)
}

pub fn smoothing_experiment(cfg: &RunConfig, eps: f64, t: f64) -> Result<f64> {
    let s0 = initial_state(cfg)?;
    smoothing_ratio(&s0, eps, t, &cfg.params, &cfg.time.step_config())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    pub times: Vec<f64>,
    /// Semidistance of the ensemble to the reference set at each time.
    pub dists: Vec<f64>,
    pub reference_size: usize,
    pub fit: AttractionFit,
}

/// Runs the configured (reference) trajectory to `t_end`, keeps its states in
/// `[t_end - 1, t_end]` as the candidate attracting set, and measures how an
/// ensemble of `members` differently seeded spinodal starts approaches it.
/// The exponential fit uses the samples with `t >= fit_from`.
pub fn attraction_experiment(
    cfg: &RunConfig,
    members: usize,
    fit_from: f64,
) -> Result<AttractionReport> {
    if cfg.init.kind != InitKind::Spinodal {
        return Err(NschError::InvalidParameter(
            "the attraction experiment needs a seeded spinodal initialization".into(),
        ));
    }
    if members == 0 {
        return Err(NschError::InvalidParameter(
            "ensemble must be nonempty".into(),
        ));
    }
    let tau = cfg.time.tau;
    let steps = cfg.time.steps();
    let window = (1.0 / tau).round() as usize;
    if steps <= window {
        return Err(NschError::InvalidParameter(format!(
            "t_end = {} leaves no time before the unit reference window",
            cfg.time.t_end
        )));
    }
    let p = cfg.params;
    let step_cfg = cfg.time.step_config();
    let g = cfg.grid.build()?;
    let every = (steps / 50).max(1);

    let mut reference = Vec::new();
    let mut s = initial_state(cfg)?;
    for k in 1..=steps {
        s = step(&s, &p, &step_cfg)?.0;
        if k >= steps - window {
            reference.push(s.clone());
        }
    }

    // Each member is stepped independently; states are sampled before the
    // reference window opens.
    let sample_steps: Vec<usize> = (0..steps - window).step_by(every).collect();
    let runs: Vec<Result<Vec<State>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..members)
            .map(|m| {
                let mut init = cfg.init.clone();
                init.seed = cfg.init.seed.wrapping_add(1 + m as u64);
                let sample_steps = &sample_steps;
                scope.spawn(move || -> Result<Vec<State>> {
                    let mut s = initial_state_with(g, &p, &init)?;
                    let mut out = Vec::with_capacity(sample_steps.len());
                    let mut k = 0;
                    for &target in sample_steps {
                        while k < target {
                            s = step(&s, &p, &step_cfg)?.0;
                            k += 1;
                        }
                        out.push(s.clone());
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ensemble member panicked"))
            .collect()
    });
    let runs: Vec<Vec<State>> = runs.into_iter().collect::<Result<_>>()?;

    let mut times = Vec::with_capacity(sample_steps.len());
    let mut dists = Vec::with_capacity(sample_steps.len());
    for (i, &k) in sample_steps.iter().enumerate() {
        let at: Vec<State> = runs.iter().map(|r| r[i].clone()).collect();
        times.push(k as f64 * tau);
        dists.push(hausdorff_semidist(&at, &reference)?);
    }
    let keep: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= fit_from).collect();
    let fit = fit_exponential_attraction(
        &keep.iter().map(|&i| times[i]).collect::<Vec<_>>(),
        &keep.iter().map(|&i| dists[i]).collect::<Vec<_>>(),
    )?;
    Ok(AttractionReport {
        times,
        dists,
        reference_size: reference.len(),
        fit,
    })
}
