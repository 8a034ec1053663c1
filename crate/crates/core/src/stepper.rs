//! Full time step (phase field, then nutrient, then velocity), energy
//! bookkeeping and the energy-law audit.

use crate::cahn_hilliard::{ch_step, CHStepConfig};
use crate::error::{NschError, Result};
use crate::fluid::{ns_step, viscous_dissipation};
use crate::grid::ops::{advect_into, check_divergence_free};
use crate::grid::{divergence_mac, h1_semi_sq, Grid, ScalarField, VectorField};
use crate::nutrient::sigma_step;
use crate::physics::{chemical_potential, psi_min, psi_value, PhysParams};

/// Constant of the energy-audit tolerance `c_audit * tau * (tau + h^2)`,
/// calibrated once on the reference coupled spinodal run and frozen.
pub const C_AUDIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: VectorField,
    pub phi: ScalarField,
    pub sigma: ScalarField,
    /// Chemical potential: the scheme's value after a step, the pointwise
    /// definition for freshly built states.
    pub mu: ScalarField,
    pub p: ScalarField,
}

impl State {
    /// Builds a state at rest pressure with `mu` from its definition and
    /// checks phase-space membership.
    pub fn new(
        t: f64,
        v: VectorField,
        phi: ScalarField,
        sigma: ScalarField,
        params: &PhysParams,
    ) -> Result<Self> {
        let g = phi.grid;
        v.check_shape(&g)?;
        sigma.check_shape(&g)?;
        let mu = chemical_potential(&phi, &sigma, params)?;
        let s = Self {
            t,
            v,
            phi,
            sigma,
            mu,
            p: ScalarField::zeros(g),
        };
        s.check(params)?;
        Ok(s)
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid
    }

    /// Phase-space membership: `|phi| < 1`, mean bounds, solenoidal no-slip
    /// velocity.
    pub fn check(&self, params: &PhysParams) -> Result<()> {
        let g = self.grid();
        self.v.check_shape(&g)?;
        self.sigma.check_shape(&g)?;
        self.mu.check_shape(&g)?;
        self.p.check_shape(&g)?;
        if !(self.phi.is_finite() && self.sigma.is_finite() && self.v.is_finite()) {
            return Err(NschError::NonFinite("state"));
        }
        if let Some(&r) = self.phi.values.iter().find(|r| r.abs() >= 1.0) {
            return Err(NschError::PotentialDomain(r));
        }
        let (mp, ms) = (self.phi.mean(), self.sigma.mean());
        if mp.abs() > params.m1 + 1e-12 {
            return Err(NschError::Hypothesis {
                hypothesis: "phase space",
                message: format!("|mean phi| = {} exceeds m1 = {}", mp.abs(), params.m1),
            });
        }
        if ms.abs() > params.m2 + 1e-12 {
            return Err(NschError::Hypothesis {
                hypothesis: "phase space",
                message: format!("|mean sigma| = {} exceeds m2 = {}", ms.abs(), params.m2),
            });
        }
        if self.v.boundary_max_abs() != 0.0 {
            return Err(NschError::InvalidParameter(
                "velocity must vanish on boundary faces".into(),
            ));
        }
        check_divergence_free(&self.v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub newton_iters: usize,
    pub mass_residual: f64,
    pub sigma_drift: f64,
    pub div_residual: f64,
    pub momentum_iters: usize,
}

/// One full step; on error the input state is untouched.
pub fn step(s: &State, params: &PhysParams, cfg: &CHStepConfig) -> Result<(State, StepInfo)> {
    let tau = cfg.tau;
    let ch = ch_step(&s.phi, &s.sigma, &s.v, params, cfg)?;
    let nut = sigma_step(&s.sigma, &ch.phi_next, &s.v, params, tau)?;
    let fl = ns_step(
        &s.v,
        &s.p,
        &ch.phi_next,
        &ch.mu_next,
        &nut.sigma_next,
        params,
        tau,
    )?;
    let info = StepInfo {
        newton_iters: ch.newton_iters,
        mass_residual: ch.mass_residual,
        sigma_drift: nut.mean_drift,
        div_residual: fl.div_residual,
        momentum_iters: fl.momentum_iters,
    };
    Ok((
        State {
            t: s.t + tau,
            v: fl.v_next,
            phi: ch.phi_next,
            sigma: nut.sigma_next,
            mu: ch.mu_next,
            p: fl.p_next,
        },
        info,
    ))
}

/// Advances `steps` times, calling `observe` after every accepted step.
pub fn integrate(
    s: &State,
    params: &PhysParams,
    cfg: &CHStepConfig,
    steps: usize,
    mut observe: impl FnMut(&State, &StepInfo) -> Result<()>,
) -> Result<State> {
    let mut cur = s.clone();
    for _ in 0..steps {
        let (next, info) = step(&cur, params, cfg)?;
        observe(&next, &info)?;
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    pub t: f64,
    pub e: f64,
    pub d: f64,
    pub source: f64,
    /// Energy-law residual against the previous entry (0 for the first).
    pub residual: f64,
    pub e_tilde: f64,
    pub lambda1: f64,
}

/// Constant making the augmented energy at least 1 on admissible states.
pub fn c1_constant(g: &Grid, p: &PhysParams) -> f64 {
    let area = g.area();
    area * (p.a * (-psi_min(p)).max(0.0) + p.chi.abs() * (p.m2 * area.sqrt() + 2.0)) + 1.0
}

/// Energy, dissipation, Oono source and the higher-order functional.
pub fn energy(s: &State, p: &PhysParams) -> EnergyLedger {
    let g = s.grid();
    let da = g.cell_area();
    let mut bulk = 0.0;
    let mut source = 0.0;
    for k in 0..g.cells() {
        let (r, sg) = (s.phi.values[k], s.sigma.values[k]);
        bulk += p.a * psi_value(r, p) + 0.5 * sg * sg + p.chi * sg * (1.0 - r);
        source += -p.alpha * (r - p.c0) * s.mu.values[k];
    }
    let e = 0.5 * s.v.dot(&s.v) + bulk * da + 0.5 * p.b * h1_semi_sq(&s.phi);
    let flux = s.sigma.zip_map(&s.phi, |sg, r| sg + p.chi * (1.0 - r));
    let d = viscous_dissipation(&s.v, &s.phi, p) + h1_semi_sq(&s.mu) + h1_semi_sq(&flux);
    let e_tilde = e + 0.5 * (s.phi.dot(&s.phi) + s.sigma.dot(&s.sigma)) + c1_constant(&g, p);
    let mut adv = vec![0.0; g.cells()];
    advect_into(&g, &s.v.u, &s.v.w, &s.phi.values, &mut adv);
    let transport = crate::grid::dot(&adv, &s.mu.values) * da;
    let lambda1 =
        0.5 * s.v.grad_norm_sq() + 0.5 * h1_semi_sq(&s.mu) + transport + 0.5 * h1_semi_sq(&s.sigma);
    EnergyLedger {
        t: s.t,
        e,
        d,
        source: source * da,
        residual: 0.0,
        e_tilde,
        lambda1,
    }
}

/// `E_next - E_prev + tau D_next - tau source_next`; positive values beyond
/// [`bel_tolerance`] violate the energy law.
pub fn bel_audit(prev: &EnergyLedger, next: &EnergyLedger, tau: f64) -> f64 {
    next.e - prev.e + tau * next.d - tau * next.source
}

pub fn bel_tolerance(tau: f64, g: &Grid) -> f64 {
    bel_tolerance_for(tau, g.hx.max(g.hy))
}

/// Audit tolerance for time step `tau` and largest spacing `h`.
pub fn bel_tolerance_for(tau: f64, h: f64) -> f64 {
    C_AUDIT * tau * (tau + h * h)
}

/// Largest cell divergence of the state's velocity.
pub fn div_residual(s: &State) -> f64 {
    divergence_mac(&s.v)
        .map(|d| d.max_abs())
        .unwrap_or(f64::INFINITY)
}
