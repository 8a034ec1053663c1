//! Model constants, the logarithmic potential, viscosity law and chemical
//! potential.

use serde::{Deserialize, Serialize};

use crate::error::{NschError, Result};
use crate::grid::{laplacian_neumann, ScalarField};

/// Guard band below `|r| = 1` inside which the potential refuses to evaluate.
pub const OVERFLOW_GUARD: f64 = 1e-14;

/// Width of the band `[1 - EPS0, 1)` where monotonicity of the convex
/// curvature is checked.
pub const EPS0: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysParams {
    #[serde(alias = "A")]
    pub a: f64,
    #[serde(alias = "B")]
    pub b: f64,
    pub chi: f64,
    pub alpha: f64,
    pub c0: f64,
    pub theta: f64,
    pub theta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            chi: 0.5,
            alpha: 0.5,
            c0: 0.0,
            theta: 1.0,
            theta0: 2.0,
            eta1: 1.0,
            eta2: 2.0,
            m1: 0.5,
            m2: 10.0,
        }
    }
}

fn violation(hypothesis: &'static str, message: impl Into<String>) -> NschError {
    NschError::Hypothesis {
        hypothesis,
        message: message.into(),
    }
}

impl PhysParams {
    /// Checks every algebraic constraint; the error names the violated one.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.chi,
            self.alpha,
            self.c0,
            self.theta,
            self.theta0,
            self.eta1,
            self.eta2,
            self.m1,
            self.m2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(NschError::NonFinite("physical parameters"));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(violation("H1", "eta1 and eta2 must be > 0"));
        }
        if !(self.theta > 0.0) {
            return Err(violation("H2", "theta must be > 0"));
        }
        if !(self.theta0 > self.theta) {
            return Err(violation("H2", "theta0 - theta must be > 0"));
        }
        if !(self.a > 0.0) {
            return Err(violation("H4", "A must be > 0"));
        }
        if !(self.b > 0.0) {
            return Err(violation("H4", "B must be > 0"));
        }
        if !(self.alpha >= 0.0) {
            return Err(violation("H4", "alpha must be >= 0"));
        }
        if !(self.c0 > -1.0 && self.c0 < 1.0) {
            return Err(violation("H4", "c0 must lie in (-1, 1)"));
        }
        if !(0.0..1.0).contains(&self.m1) {
            return Err(violation("phase space", "m1 must lie in [0, 1)"));
        }
        if !(self.m2 >= 0.0) {
            return Err(violation("phase space", "m2 must be >= 0"));
        }
        if self.c0.abs() > self.m1 {
            return Err(violation(
                "phase space",
                format!(
                    "c0 = {} must lie in [-m1, m1] = [-{}, {}]",
                    self.c0, self.m1, self.m1
                ),
            ));
        }
        Ok(())
    }

    pub fn eta_min(&self) -> f64 {
        self.eta1.min(self.eta2)
    }

    pub fn eta_max(&self) -> f64 {
        self.eta1.max(self.eta2)
    }
}

/// Potential and derivatives at one point. `second` and `third` belong to the
/// convex part only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub value: f64,
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

fn check_domain(r: f64) -> Result<()> {
    if !(r.abs() < 1.0) {
        return Err(NschError::PotentialDomain(r));
    }
    if r.abs() > 1.0 - OVERFLOW_GUARD {
        return Err(NschError::PotentialOverflow(r.abs()));
    }
    Ok(())
}

pub fn psi(r: f64, p: &PhysParams) -> Result<PotentialEval> {
    check_domain(r)?;
    let one_m = 1.0 - r * r;
    Ok(PotentialEval {
        value: psi_value(r, p),
        first: psi0_prime(r, p.theta) - p.theta0 * r,
        second: p.theta / one_m,
        third: 2.0 * p.theta * r / (one_m * one_m),
    })
}

#[inline]
pub(crate) fn psi_value(r: f64, p: &PhysParams) -> f64 {
    // (1-r)ln(1-r) + (1+r)ln(1+r) via ln1p keeps full accuracy near r = 0.
    let ent = (1.0 - r) * (-r).ln_1p() + (1.0 + r) * r.ln_1p();
    0.5 * p.theta * ent + 0.5 * p.theta0 * (1.0 - r * r)
}

/// `atanh` evaluated on `|r|` so it is exactly odd; the std version loses
/// digits near `r = -1`.
#[inline]
fn atanh(r: f64) -> f64 {
    let a = r.abs();
    (0.5 * (2.0 * a / (1.0 - a)).ln_1p()).copysign(r)
}

/// Derivative of the convex (logarithmic) part.
#[inline]
pub(crate) fn psi0_prime(r: f64, theta: f64) -> f64 {
    theta * atanh(r)
}

#[inline]
pub(crate) fn psi0_second(r: f64, theta: f64) -> f64 {
    theta / (1.0 - r * r)
}

/// Minimum of the potential over `(-1, 1)`; attained at the positive root of
/// `theta atanh(r) = theta0 r` (or at 0 when that root is trivial).
pub fn psi_min(p: &PhysParams) -> f64 {
    if p.theta0 <= p.theta {
        return psi_value(0.0, p);
    }
    let (mut lo, mut hi) = (1e-12f64, 1.0 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi0_prime(mid, p.theta) - p.theta0 * mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    psi_value(0.5 * (lo + hi), p)
}

/// Viscosity law with the argument clamped to `[-1, 1]`.
#[inline]
pub fn eta(r: f64, p: &PhysParams) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    // Written around eta2 so equal endpoints give exactly eta2.
    p.eta2 + (p.eta1 - p.eta2) * 0.5 * (1.0 + r)
}

/// `mu = A Psi'(phi) - B Lap phi - chi sigma`.
pub fn chemical_potential(
    phi: &ScalarField,
    sigma: &ScalarField,
    p: &PhysParams,
) -> Result<ScalarField> {
    let g = phi.grid;
    phi.check_shape(&g)?;
    sigma.check_shape(&g)?;
    for &r in &phi.values {
        check_domain(r)?;
    }
    let lap = laplacian_neumann(phi)?;
    let values = phi
        .values
        .iter()
        .zip(&lap.values)
        .zip(&sigma.values)
        .map(|((&r, &l), &s)| p.a * (psi0_prime(r, p.theta) - p.theta0 * r) - p.b * l - p.chi * s)
        .collect();
    Ok(ScalarField { grid: g, values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    pub h1_ok: bool,
    pub h2_ok: bool,
    pub h3_ok: bool,
    pub h4_ok: bool,
    pub eta_star: f64,
    pub eta_star_upper: f64,
    /// Smallest relative slack of the exponential bound at the fitted constant.
    pub worst_h3_margin: f64,
    /// Fitted constant `C` of the exponential curvature bound.
    pub h3_constant: f64,
    pub epsilon0: f64,
    pub n_samples: usize,
}

/// Smallest `C` with `s <= C exp(C a)` (the right side is increasing in `C`).
fn fit_exponential_constant(s: f64, a: f64) -> f64 {
    let f = |c: f64| c.ln() + c * a - s.ln();
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    if f(lo) >= 0.0 {
        return lo;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = if hi / lo > 2.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Samples the hypotheses on `n_samples` Chebyshev nodes of `(-1, 1)`, which
/// cluster toward the singular endpoints.
pub fn verify_hypotheses(p: &PhysParams, n_samples: usize) -> HypothesisReport {
    let n = n_samples.max(100);
    let mut rs: Vec<f64> = (0..n)
        .map(|k| ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect();
    rs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let etas: Vec<f64> = rs.iter().chain(&[-1.0, 1.0]).map(|&r| eta(r, p)).collect();
    let eta_star = etas.iter().cloned().fold(f64::INFINITY, f64::min);
    let eta_star_upper = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h1_ok = eta_star > 0.0
        && eta_star >= p.eta_min() * (1.0 - 1e-15)
        && eta_star_upper <= p.eta_max() * (1.0 + 1e-15);

    let theta_ok = p.theta > 0.0 && p.theta0 - p.theta > 0.0;
    let curv: Vec<f64> = rs.iter().map(|&r| psi0_second(r, p.theta)).collect();
    let lower_ok = curv.iter().all(|&c| c >= p.theta);
    let mut mono_ok = true;
    for k in 1..n {
        if rs[k - 1] >= 1.0 - EPS0 && curv[k] < curv[k - 1] {
            mono_ok = false;
        }
        if rs[k] <= -1.0 + EPS0 && curv[k] > curv[k - 1] {
            mono_ok = false;
        }
    }
    let h2_ok = theta_ok && lower_ok && mono_ok;

    let (mut c_fit, mut h3_ok) = (0.0f64, p.theta > 0.0);
    if h3_ok {
        for &r in &rs {
            let s = psi0_second(r, p.theta);
            let a = psi0_prime(r, p.theta).abs();
            c_fit = c_fit.max(fit_exponential_constant(s, a));
        }
        // The bound must keep holding beyond the sampled range, so C also has
        // to dominate the log-slope of the curvature against |Psi0'| at the
        // outermost samples.
        let (r1, r2) = (rs[n - 2], rs[n - 1]);
        let slope = (psi0_second(r2, p.theta).ln() - psi0_second(r1, p.theta).ln())
            / (psi0_prime(r2, p.theta) - psi0_prime(r1, p.theta));
        c_fit = c_fit.max(slope) * (1.0 + 1e-9);
        h3_ok = c_fit.is_finite();
    }
    let worst_h3_margin = rs
        .iter()
        .map(|&r| {
            let s = psi0_second(r, p.theta);
            let a = psi0_prime(r, p.theta).abs();
            (c_fit * (c_fit * a).exp() - s) / s
        })
        .fold(f64::INFINITY, f64::min);
    h3_ok &= worst_h3_margin >= 0.0;

    let h4_ok = p.a > 0.0 && p.b > 0.0 && p.chi.is_finite() && p.alpha >= 0.0 && p.c0.abs() < 1.0;

    HypothesisReport {
        h1_ok,
        h2_ok,
        h3_ok,
        h4_ok,
        eta_star,
        eta_star_upper,
        worst_h3_margin,
        h3_constant: c_fit,
        epsilon0: EPS0,
        n_samples: n,
    }
}
