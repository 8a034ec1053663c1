//! Convective Cahn-Hilliard-Oono step: convex part of the potential implicit,
//! concave part, nutrient coupling and transport explicit. The `(phi, mu)`
//! pair is solved together by a damped Newton iteration that keeps every
//! iterate strictly inside `(-1, 1)`.

use crate::error::{NschError, Result};
use crate::grid::ops::{advect_into, check_divergence_free, laplacian_into};
use crate::grid::solve::gmres;
use crate::grid::spectral::Basis2d;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::physics::{psi0_prime, psi0_second, PhysParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CHStepConfig {
    pub tau: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub clip_margin: f64,
}

impl CHStepConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            newton_tol: 1e-11,
            newton_max: 50,
            clip_margin: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(NschError::InvalidParameter(format!(
                "time step must be > 0, got {}",
                self.tau
            )));
        }
        if !(self.clip_margin > 0.0 && self.clip_margin < 1e-6) {
            return Err(NschError::InvalidParameter(format!(
                "clip margin must lie in (0, 1e-6), got {}",
                self.clip_margin
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return Err(NschError::InvalidParameter(
                "Newton tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CHStepResult {
    pub phi_next: ScalarField,
    pub mu_next: ScalarField,
    pub newton_iters: usize,
    pub mass_residual: f64,
    /// Mean of the input phase field.
    pub mean_prev: f64,
    /// Scaled residual before each Newton update and after the last one.
    pub residual_history: Vec<f64>,
}

/// Linear solve tolerance inside each Newton iteration, relative to the
/// current residual.
const LINEAR_TOL: f64 = 1e-8;
const GMRES_RESTART: usize = 40;
const GMRES_MAX: usize = 600;
const MAX_HALVINGS: usize = 30;

struct System<'a> {
    g: Grid,
    p: &'a PhysParams,
    tau: f64,
    c1: f64,
    /// `-phi^n + tau div(v phi^n) - alpha tau c0`
    e1: Vec<f64>,
    /// `A theta0 phi^n + chi sigma^n`
    e2: Vec<f64>,
}

struct Residual {
    f1: Vec<f64>,
    f2: Vec<f64>,
    w1: f64,
    w2: f64,
}

impl Residual {
    fn scaled_max(&self) -> f64 {
        let m1 = self.f1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m2 = self.f2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (m1 * self.w1).max(m2 * self.w2)
    }

    fn merit(&self, w1: f64, w2: f64) -> f64 {
        let s1: f64 = self.f1.iter().map(|v| v * v).sum();
        let s2: f64 = self.f2.iter().map(|v| v * v).sum();
        (w1 * w1 * s1 + w2 * w2 * s2).sqrt()
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

impl System<'_> {
    fn residual(&self, phi: &[f64], mu: &[f64]) -> Residual {
        let n = phi.len();
        let (a, b, theta) = (self.p.a, self.p.b, self.p.theta);
        let mut lap_mu = vec![0.0; n];
        let mut lap_phi = vec![0.0; n];
        laplacian_into(&self.g, mu, &mut lap_mu);
        laplacian_into(&self.g, phi, &mut lap_phi);
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; n];
        let (mut s1, mut s2) = (max_abs(&self.e1), max_abs(&self.e2).max(max_abs(mu)));
        for k in 0..n {
            let t1 = self.c1 * phi[k];
            let t2 = self.tau * lap_mu[k];
            f1[k] = t1 - t2 + self.e1[k];
            let c = a * psi0_prime(phi[k], theta);
            let d = b * lap_phi[k];
            f2[k] = mu[k] - c + d + self.e2[k];
            s1 = s1.max(t1.abs()).max(t2.abs());
            s2 = s2.max(c.abs()).max(d.abs());
        }
        Residual {
            f1,
            f2,
            w1: 1.0 / (1.0 + s1),
            w2: 1.0 / (1.0 + s2),
        }
    }
}

/// One step of the convective Cahn-Hilliard-Oono equation.
pub fn ch_step(
    phi_n: &ScalarField,
    sigma_n: &ScalarField,
    v_n: &VectorField,
    p: &PhysParams,
    cfg: &CHStepConfig,
) -> Result<CHStepResult> {
    cfg.validate()?;
    let g = phi_n.grid;
    phi_n.check_shape(&g)?;
    sigma_n.check_shape(&g)?;
    v_n.check_shape(&g)?;
    if !phi_n.is_finite() || !sigma_n.is_finite() || !v_n.is_finite() {
        return Err(NschError::NonFinite("Cahn-Hilliard input"));
    }
    if let Some(&r) = phi_n.values.iter().find(|r| r.abs() >= 1.0) {
        return Err(NschError::PotentialDomain(r));
    }
    check_divergence_free(v_n)?;

    let n = g.cells();
    let tau = cfg.tau;
    let c1 = 1.0 + p.alpha * tau;
    let mean_prev = phi_n.mean();
    let target_mean = p.c0 + (mean_prev - p.c0) / c1;
    let bound = 1.0 - cfg.clip_margin;

    let mut adv = vec![0.0; n];
    advect_into(&g, &v_n.u, &v_n.w, &phi_n.values, &mut adv);
    let sys = System {
        g,
        p,
        tau,
        c1,
        e1: (0..n)
            .map(|k| -phi_n.values[k] + tau * adv[k] - p.alpha * tau * p.c0)
            .collect(),
        e2: (0..n)
            .map(|k| p.a * p.theta0 * phi_n.values[k] + p.chi * sigma_n.values[k])
            .collect(),
    };

    // Initial guess: the old field shifted to the known new mean, with mu
    // chosen to satisfy the second equation exactly.
    let shift = target_mean - mean_prev;
    let mut phi: Vec<f64> = phi_n
        .values
        .iter()
        .map(|&r| (r + shift).clamp(-bound, bound))
        .collect();
    let mut mu = vec![0.0; n];
    {
        let mut lap = vec![0.0; n];
        laplacian_into(&g, &phi, &mut lap);
        for k in 0..n {
            mu[k] = p.a * psi0_prime(phi[k], p.theta) - p.b * lap[k] - sys.e2[k];
        }
    }

    let mut basis = Basis2d::neumann(&g);
    let mut res = sys.residual(&phi, &mu);
    let mut history = vec![res.scaled_max()];
    let mut damped_run = 0usize;
    let mut iters = 0usize;
    let mut lap_buf = vec![0.0; n];
    let mut curv = vec![0.0; n];

    while history[history.len() - 1] > cfg.newton_tol {
        if iters >= cfg.newton_max {
            return Err(NschError::NewtonNotConverged {
                iterations: iters,
                residual: history[history.len() - 1],
            });
        }
        iters += 1;
        let (w1, w2) = (res.w1, res.w2);
        for k in 0..n {
            curv[k] = p.a * psi0_second(phi[k], p.theta);
        }
        let s_ref = curv.iter().sum::<f64>() / n as f64;

        let mut rhs = vec![0.0; 2 * n];
        for k in 0..n {
            rhs[k] = -w1 * res.f1[k];
            rhs[n + k] = -w2 * res.f2[k];
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            let (dphi, dmu) = x.split_at(n);
            let (o1, o2) = out.split_at_mut(n);
            laplacian_into(&g, dmu, o1);
            laplacian_into(&g, dphi, o2);
            for k in 0..n {
                o1[k] = w1 * (c1 * dphi[k] - tau * o1[k]);
                o2[k] = w2 * (dmu[k] - curv[k] * dphi[k] + p.b * o2[k]);
            }
        };
        let precond = |r: &[f64], z: &mut [f64]| {
            let (r1, r2) = r.split_at(n);
            let (x, y) = z.split_at_mut(n);
            // Undo the row scaling, then invert the constant-curvature block.
            for k in 0..n {
                y[k] = r2[k] / w2;
            }
            laplacian_into(&g, y, &mut lap_buf);
            for k in 0..n {
                x[k] = r1[k] / w1 + tau * lap_buf[k];
            }
            basis.apply_symbol(x, |lam| 1.0 / (c1 + tau * lam * (s_ref + p.b * lam)));
            laplacian_into(&g, x, &mut lap_buf);
            for k in 0..n {
                y[k] += s_ref * x[k] - p.b * lap_buf[k];
            }
        };
        let mut delta = vec![0.0; 2 * n];
        gmres(
            apply,
            precond,
            &rhs,
            &mut delta,
            LINEAR_TOL,
            GMRES_RESTART,
            GMRES_MAX,
            "Cahn-Hilliard GMRES",
        )?;
        let (dphi, dmu) = delta.split_at_mut(n);
        // The exact Newton direction lands on the known mean; remove the
        // linear-solver error in that single mode.
        let cur_mean = phi.iter().sum::<f64>() / n as f64;
        let d_mean = dphi.iter().sum::<f64>() / n as f64;
        let fix = (target_mean - cur_mean) - d_mean;
        dphi.iter_mut().for_each(|d| *d += fix);

        let merit0 = res.merit(w1, w2);
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut barrier_hit = false;
        for _ in 0..=MAX_HALVINGS {
            let trial_phi: Vec<f64> = (0..n).map(|k| phi[k] + lambda * dphi[k]).collect();
            if trial_phi.iter().all(|r| r.abs() <= bound) {
                let trial_mu: Vec<f64> = (0..n).map(|k| mu[k] + lambda * dmu[k]).collect();
                let trial = sys.residual(&trial_phi, &trial_mu);
                let m = trial.merit(w1, w2);
                if m < merit0 || trial.scaled_max() <= cfg.newton_tol {
                    accepted = Some((trial_phi, trial_mu, trial));
                    break;
                }
            } else {
                barrier_hit = true;
            }
            lambda *= 0.5;
        }
        let Some((new_phi, new_mu, new_res)) = accepted else {
            return Err(NschError::LineSearch {
                halvings: MAX_HALVINGS,
                residual: history[history.len() - 1],
            });
        };
        if barrier_hit {
            damped_run += 1;
            if damped_run > cfg.newton_max / 2 {
                return Err(NschError::BarrierFailure {
                    consecutive: damped_run,
                    residual: new_res.scaled_max(),
                });
            }
        } else {
            damped_run = 0;
        }
        phi = new_phi;
        mu = new_mu;
        res = new_res;
        history.push(res.scaled_max());
    }

    let phi_next = ScalarField {
        grid: g,
        values: phi,
    };
    let mass_residual = (phi_next.mean() - target_mean).abs();
    Ok(CHStepResult {
        phi_next,
        mu_next: ScalarField {
            grid: g,
            values: mu,
        },
        newton_iters: iters,
        mass_residual,
        mean_prev,
        residual_history: history,
    })
}

/// Largest deviation of the recorded means from the geometric law
/// `(mean_n - c0) = (mean_0 - c0) (1 + alpha tau)^(-n)`.
pub fn discrete_mass_law(
    history: &[CHStepResult],
    p: &PhysParams,
    cfg: &CHStepConfig,
) -> Result<f64> {
    let first = history
        .first()
        .ok_or_else(|| NschError::InsufficientData("mass law needs at least one step".into()))?;
    let d0 = first.mean_prev - p.c0;
    let q = 1.0 / (1.0 + p.alpha * cfg.tau);
    let mut worst = 0.0f64;
    let mut factor = 1.0;
    for r in history {
        factor *= q;
        worst = worst.max(((r.phi_next.mean() - p.c0) - d0 * factor).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn noisy(g: Grid, mean: f64, amp: f64, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_fn(g, |_, _| mean + amp * rng.random_range(-1.0..1.0))
    }

    fn decoupled() -> PhysParams {
        PhysParams {
            chi: 0.0,
            alpha: 0.0,
            b: 0.01,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_equilibrium_is_a_fixed_point() {
        let g = Grid::unit(8).unwrap();
        let p = PhysParams {
            chi: 0.0,
            c0: 0.2,
            ..Default::default()
        };
        let phi = ScalarField::constant(g, 0.2);
        let r = ch_step(
            &phi,
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &p,
            &CHStepConfig::new(0.1),
        )
        .unwrap();
        assert!(r.phi_next.sub(&phi).max_abs() < 1e-14);
    }

    #[test]
    fn mass_is_conserved_without_oono_term() {
        let g = Grid::unit(16).unwrap();
        let p = decoupled();
        let phi = noisy(g, 0.1, 0.05, 3);
        let r = ch_step(
            &phi,
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &p,
            &CHStepConfig::new(0.01),
        )
        .unwrap();
        assert!((r.phi_next.mean() - phi.mean()).abs() < 1e-12);
        assert!(r.mass_residual < 1e-12);
    }

    #[test]
    fn single_step_oono_identity() {
        let g = Grid::unit(16).unwrap();
        let p = PhysParams::default();
        let cfg = CHStepConfig::new(0.01);
        let phi = noisy(g, 0.2, 0.05, 1);
        let sigma = ScalarField::from_fn(g, |x, y| 5.0 + (PI * x).cos() * y);
        let v = VectorField::from_stream_function(g, |x, y| {
            0.3 * (PI * x).sin().powi(2) * (PI * y).sin().powi(2)
        });
        let r = ch_step(&phi, &sigma, &v, &p, &cfg).unwrap();
        let lhs = (r.phi_next.mean() - p.c0) * (1.0 + p.alpha * cfg.tau);
        assert!((lhs - (phi.mean() - p.c0)).abs() < 1e-12);
        assert!(r.phi_next.max_abs() < 1.0);
    }

    #[test]
    fn newton_converges_quadratically_on_smooth_state() {
        let g = Grid::unit(16).unwrap();
        let p = decoupled();
        let phi = ScalarField::from_fn(g, |x, y| 0.5 * (PI * x).cos() * (PI * y).cos());
        let r = ch_step(
            &phi,
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &p,
            &CHStepConfig::new(0.05),
        )
        .unwrap();
        let h = &r.residual_history;
        assert!(h.len() >= 3, "{h:?}");
        assert!(*h.last().unwrap() <= 1e-11);
        // Before the linear solve tolerance takes over, each residual is
        // bounded by a moderate multiple of the square of the previous one.
        let (r0, r1) = (h[0], h[1]);
        assert!(r1 <= 10.0 * r0 * r0 + LINEAR_TOL * r0 * 10.0, "{h:?}");
    }

    #[test]
    fn decoupled_energy_is_non_increasing_for_large_steps() {
        let g = Grid::unit(16).unwrap();
        let p = decoupled();
        let energy = |phi: &ScalarField| {
            let psi: f64 = phi
                .values
                .iter()
                .map(|&r| crate::physics::psi_value(r, &p))
                .sum::<f64>()
                * g.cell_area();
            p.a * psi + 0.5 * p.b * crate::grid::h1_semi_sq(phi)
        };
        for tau in [0.01, 0.1, 1.0] {
            let mut phi = noisy(g, 0.0, 0.05, 7);
            let mut e = energy(&phi);
            for _ in 0..5 {
                let r = ch_step(
                    &phi,
                    &ScalarField::zeros(g),
                    &VectorField::zeros(g),
                    &p,
                    &CHStepConfig::new(tau),
                )
                .unwrap();
                let e_new = energy(&r.phi_next);
                assert!(e_new <= e + 1e-12 * e.abs(), "tau {tau}: {e} -> {e_new}");
                phi = r.phi_next;
                e = e_new;
            }
        }
    }

    #[test]
    fn mass_law_history() {
        let g = Grid::unit(8).unwrap();
        let p = PhysParams::default();
        let cfg = CHStepConfig::new(0.01);
        let mut phi = noisy(g, 0.2, 0.02, 2);
        let sigma = ScalarField::constant(g, 5.0);
        let mut hist = Vec::new();
        for _ in 0..20 {
            let r = ch_step(&phi, &sigma, &VectorField::zeros(g), &p, &cfg).unwrap();
            phi = r.phi_next.clone();
            hist.push(r);
        }
        assert!(discrete_mass_law(&hist, &p, &cfg).unwrap() < 1e-13);
        assert!(discrete_mass_law(&[], &p, &cfg).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::unit(8).unwrap();
        let p = PhysParams::default();
        let z = ScalarField::zeros(g);
        let v = VectorField::zeros(g);
        assert!(ch_step(&z, &z, &v, &p, &CHStepConfig::new(0.0)).is_err());
        let mut bad = z.clone();
        bad.values[0] = 1.0;
        assert!(matches!(
            ch_step(&bad, &z, &v, &p, &CHStepConfig::new(0.1)),
            Err(NschError::PotentialDomain(_))
        ));
        let mut comp = VectorField::zeros(g);
        comp.u[g.uidx(3, 3)] = 1.0;
        assert!(matches!(
            ch_step(&z, &z, &comp, &p, &CHStepConfig::new(0.1)),
            Err(NschError::NotDivergenceFree { .. })
        ));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = Grid::unit(16).unwrap();
        let p = decoupled();
        let phi = noisy(g, 0.0, 0.5, 9);
        let cfg = CHStepConfig {
            newton_max: 1,
            ..CHStepConfig::new(1.0)
        };
        assert!(matches!(
            ch_step(
                &phi,
                &ScalarField::zeros(g),
                &VectorField::zeros(g),
                &p,
                &cfg
            ),
            Err(NschError::NewtonNotConverged { .. })
        ));
    }
}
