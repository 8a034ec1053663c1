//! Long-time diagnostics: distances between states, separation, set
//! distances, attraction fits and the smoothing ratio.

use crate::cahn_hilliard::CHStepConfig;
use crate::error::{NschError, Result};
use crate::fluid::{leray_project, stokes_solve};
use crate::grid::{h1_dual_squared, h1_semi_sq, h2_norm, w23_norm, ScalarField};
use crate::physics::{psi, PhysParams};
use crate::stepper::{integrate, State};

/// Distances below this are treated as round-off and left out of fits.
pub const CENSOR_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDistance {
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakDistance {
    pub w: f64,
    /// Velocity, phase, nutrient and mean-phase parts.
    pub components: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractionFit {
    pub j: f64,
    pub omega: f64,
    pub rms_log_residual: f64,
    pub points: usize,
}

fn h1(f: &ScalarField) -> f64 {
    (f.dot(f) + h1_semi_sq(f)).sqrt()
}

pub fn phase_distance(a: &State, b: &State) -> Result<PhaseDistance> {
    a.grid().ensure_same(&b.grid())?;
    let dv = a.v.sub(&b.v);
    let dphi = a.phi.sub(&b.phi);
    let ds = a.sigma.sub(&b.sigma);
    Ok(PhaseDistance {
        d: dv.l2() + h1(&dphi) + ds.l2(),
    })
}

pub fn weak_distance(a: &State, b: &State) -> Result<WeakDistance> {
    a.grid().ensure_same(&b.grid())?;
    let dv = leray_project(&a.v.sub(&b.v))?;
    let vel = if dv.max_abs() == 0.0 {
        0.0
    } else {
        0.5 * stokes_solve(&dv)?.u.grad_norm_sq()
    };
    let dphi = a.phi.sub(&b.phi);
    let ds = a.sigma.sub(&b.sigma);
    let components = [
        vel,
        0.5 * h1_dual_squared(&dphi)?.max(0.0),
        0.5 * h1_dual_squared(&ds)?.max(0.0),
        (a.phi.mean() - b.phi.mean()).abs(),
    ];
    Ok(WeakDistance {
        w: components.iter().sum(),
        components,
    })
}

/// Single-trajectory integrand of the higher-order functional.
pub fn z_integrand(s: &State, p: &PhysParams) -> Result<f64> {
    let mut psi_l1 = 0.0;
    for &r in &s.phi.values {
        psi_l1 += psi(r, p)?.first.abs();
    }
    let h2 = h2_norm(&s.phi);
    let w23 = w23_norm(&s.phi);
    Ok(s.v.grad_norm_sq()
        + w23 * w23
        + h2.powi(4)
        + psi_l1 * s.grid().cell_area()
        + s.sigma.dot(&s.sigma)
        + h1_semi_sq(&s.sigma)
        + 1.0)
}

/// `min (1 - max|phi|)` over samples `(t, max|phi|)` with `t >= t_min`.
pub fn separation_gap_from_samples(samples: &[(f64, f64)], t_min: f64) -> Result<f64> {
    samples
        .iter()
        .filter(|(t, _)| *t >= t_min)
        .map(|(_, m)| 1.0 - m)
        .reduce(f64::min)
        .ok_or_else(|| NschError::EmptyWindow(format!("no samples with t >= {t_min}")))
}

pub fn separation_gap(trajectory: &[State], t_min: f64) -> Result<f64> {
    let samples: Vec<(f64, f64)> = trajectory.iter().map(|s| (s.t, s.phi.max_abs())).collect();
    separation_gap_from_samples(&samples, t_min)
}

/// `max_a min_b d(a, b)`.
pub fn hausdorff_semidist(a: &[State], b: &[State]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(NschError::InsufficientData("empty state set".into()));
    }
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = f64::INFINITY;
        for y in b {
            best = best.min(phase_distance(x, y)?.d);
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

/// Least-squares line through `(t, ln d)` for `d > 1e-13`.
pub fn fit_exponential_attraction(times: &[f64], dists: &[f64]) -> Result<AttractionFit> {
    if times.len() != dists.len() {
        return Err(NschError::ShapeMismatch(format!(
            "{} times but {} distances",
            times.len(),
            dists.len()
        )));
    }
    if dists.iter().any(|d| !(*d >= 0.0)) {
        return Err(NschError::InvalidParameter(
            "distances must be nonnegative".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(dists)
        .filter(|(_, d)| **d > CENSOR_FLOOR)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(NschError::InsufficientData(format!(
            "{} distances above {CENSOR_FLOOR:e}, need 4",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NschError::InsufficientData(
            "all sample times coincide".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(AttractionFit {
        j: intercept.exp(),
        omega: -slope,
        rms_log_residual: (ss / n).sqrt(),
        points: pts.len(),
    })
}

/// Mean-free smooth bump in `phi` with unit `H^1` norm.
fn unit_bump(s: &State) -> ScalarField {
    let g = s.grid();
    let (kx, ky) = (std::f64::consts::PI / g.lx, std::f64::consts::PI / g.ly);
    let b = ScalarField::from_fn(g, |x, y| (kx * x).cos() * (ky * y).cos()).mean_free();
    let n = h1(&b);
    b.scale(1.0 / n)
}

/// Evolves `s0` and a copy whose phase is bumped by `size` (in phase
/// distance) for time `t`, and returns
/// `(|dv|_H1 + |dphi|_H2 + |dsigma|_H1) / d0`.
pub fn smoothing_ratio(
    s0: &State,
    size: f64,
    t: f64,
    p: &PhysParams,
    cfg: &CHStepConfig,
) -> Result<f64> {
    if size == 0.0 {
        return Err(NschError::DegeneratePair);
    }
    if !(size > 0.0 && size <= 1e-2) {
        return Err(NschError::InvalidParameter(format!(
            "perturbation size must lie in (0, 1e-2], got {size}"
        )));
    }
    if !(t > 0.0) {
        return Err(NschError::InvalidParameter(format!(
            "time must be > 0, got {t}"
        )));
    }
    let mut s1 = s0.clone();
    s1.phi = s0.phi.add(&unit_bump(s0).scale(size));
    s1.mu = crate::physics::chemical_potential(&s1.phi, &s1.sigma, p)?;
    s1.check(p)?;
    let d0 = phase_distance(s0, &s1)?.d;
    if d0 == 0.0 {
        return Err(NschError::DegeneratePair);
    }
    let steps = ((t / cfg.tau).round() as usize).max(1);
    let a = integrate(s0, p, cfg, steps, |_, _| Ok(()))?;
    let b = integrate(&s1, p, cfg, steps, |_, _| Ok(()))?;
    let dv = a.v.sub(&b.v);
    let dv_h1 = (dv.dot(&dv) + dv.grad_norm_sq()).sqrt();
    Ok((dv_h1 + h2_norm(&a.phi.sub(&b.phi)) + h1(&a.sigma.sub(&b.sigma))) / d0)
}
