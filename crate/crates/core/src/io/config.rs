use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cahn_hilliard::CHStepConfig;
use crate::error::{NschError, Result};
use crate::grid::Grid;
use crate::physics::{verify_hypotheses, PhysParams};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "NSCH_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    pub t_end: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_ledger_every")]
    pub ledger_every: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max")]
    pub newton_max: usize,
}

fn default_snapshot_every() -> usize {
    100
}
fn default_ledger_every() -> usize {
    1
}
fn default_newton_tol() -> f64 {
    CHStepConfig::new(1.0).newton_tol
}
fn default_newton_max() -> usize {
    CHStepConfig::new(1.0).newton_max
}

impl TimeConfig {
    pub fn step_config(&self) -> CHStepConfig {
        CHStepConfig {
            newton_tol: self.newton_tol,
            newton_max: self.newton_max,
            ..CHStepConfig::new(self.tau)
        }
    }

    /// Number of whole steps that fit in `[0, t_end]`.
    pub fn steps(&self) -> usize {
        self.steps_from(0.0)
    }

    /// Number of whole steps that fit in `[t0, t_end]`.
    pub fn steps_from(&self, t0: f64) -> usize {
        let span = self.t_end - t0;
        if span < self.tau * (1.0 - 1e-12) {
            return 0;
        }
        (span / self.tau * (1.0 + 1e-12)).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Spinodal,
    Bubble,
    Quiescent,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    #[serde(default)]
    pub seed: u64,
    /// Noise amplitude (spinodal) or plateau value (bubble).
    pub amplitude: Option<f64>,
    /// Bubble radius; defaults to the radius enclosing half the domain.
    pub radius: Option<f64>,
    /// Constant initial nutrient; defaults to `m2 / 2`.
    pub sigma0: Option<f64>,
    /// Peak of the stream function `s sin^2(pi x/Lx) sin^2(pi y/Ly)`.
    #[serde(default)]
    pub stream_amplitude: f64,
    /// Snapshot file for `kind = "snapshot"`.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audit {
    Energy,
    Mass,
    Divergence,
    Separation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub params: PhysParams,
    pub time: TimeConfig,
    pub init: InitConfig,
    #[serde(default = "default_audits")]
    pub diagnostics: Vec<Audit>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_audits() -> Vec<Audit> {
    vec![
        Audit::Energy,
        Audit::Mass,
        Audit::Divergence,
        Audit::Separation,
    ]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.params.validate()?;
        let rep = verify_hypotheses(&self.params, 400);
        if !rep.h3_ok {
            return Err(NschError::Hypothesis {
                hypothesis: "H3",
                message: "convex curvature is not exponentially controlled by the slope".into(),
            });
        }
        self.time.step_config().validate()?;
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            return Err(NschError::InvalidParameter(format!(
                "t_end must be >= 0, got {}",
                self.time.t_end
            )));
        }
        if self.time.snapshot_every == 0 || self.time.ledger_every == 0 {
            return Err(NschError::InvalidParameter(
                "snapshot_every and ledger_every must be >= 1".into(),
            ));
        }
        let init = &self.init;
        if let Some(a) = init.amplitude {
            if !(0.0..1.0).contains(&a) {
                return Err(NschError::Hypothesis {
                    hypothesis: "phase space",
                    message: format!("initial amplitude must lie in [0, 1), got {a}"),
                });
            }
        }
        if let Some(r) = init.radius {
            if !(r > 0.0) {
                return Err(NschError::InvalidParameter(format!(
                    "bubble radius must be > 0, got {r}"
                )));
            }
        }
        if let Some(s) = init.sigma0 {
            if !(s.abs() <= self.params.m2) {
                return Err(NschError::Hypothesis {
                    hypothesis: "phase space",
                    message: format!("|sigma0| = {} exceeds m2 = {}", s.abs(), self.params.m2),
                });
            }
        }
        if !init.stream_amplitude.is_finite() {
            return Err(NschError::NonFinite("stream amplitude"));
        }
        if init.kind == InitKind::Snapshot && init.path.is_none() {
            return Err(NschError::InvalidParameter(
                "snapshot initialization needs init.path".into(),
            ));
        }
        Ok(())
    }

    /// Output directory after applying the output-root override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
        self.output_dir_under(root.as_deref())
    }

    pub fn output_dir_under(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(root) if self.output_dir.is_relative() => root.join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| NschError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a TOML run configuration. Relative snapshot paths are
/// taken relative to the config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text, path)?;
    if let Some(p) = cfg.init.path.as_mut() {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}
