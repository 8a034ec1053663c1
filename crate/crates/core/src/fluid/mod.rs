//! Incompressible flow: Leray projection, the discrete Stokes inverse and the
//! pressure-correction Navier-Stokes step.

mod viscous;

pub use viscous::{sym_grad_norm_sq, viscous_dissipation, Viscosity};

use crate::error::{NschError, Result};
use crate::grid::ops::{divergence_into, gradient_into};
use crate::grid::solve::pcg;
use crate::grid::spectral::{gather_u, gather_w, scatter_u, scatter_w, Basis2d};
use crate::grid::{
    divergence_mac, solve_helmholtz_neumann_with, Grid, ScalarField, SolverSettings, VectorField,
};
use crate::physics::PhysParams;
use viscous::{momentum_advection, vector_laplacian_apply, viscous_apply};

/// Relative tolerance of the momentum and Stokes iterations.
const FLUID_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidStepResult {
    pub v_next: VectorField,
    pub p_next: ScalarField,
    /// `max |div v_next|`.
    pub div_residual: f64,
    pub momentum_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub u: VectorField,
    pub p: ScalarField,
    /// `(f, u)`, equal to `|grad u|^2`.
    pub energy_pairing: f64,
    pub iterations: usize,
}

/// Componentwise spectral inverse of `a - b Lap` on no-slip faces.
struct VectorSpectral {
    grid: Grid,
    bu: Basis2d,
    bw: Basis2d,
    cu: Vec<f64>,
    cw: Vec<f64>,
}

impl VectorSpectral {
    fn new(g: &Grid) -> Self {
        Self {
            grid: *g,
            bu: Basis2d::u_component(g),
            bw: Basis2d::w_component(g),
            cu: vec![0.0; (g.nx - 1) * g.ny],
            cw: vec![0.0; g.nx * (g.ny - 1)],
        }
    }

    /// `out = (a + b lambda)^-1 r` for each component; boundary faces stay 0.
    fn solve(&mut self, a: f64, b: f64, ru: &[f64], rw: &[f64], ou: &mut [f64], ow: &mut [f64]) {
        let g = self.grid;
        gather_u(&g, ru, &mut self.cu);
        self.bu
            .apply_symbol(&mut self.cu, |lam| 1.0 / (a + b * lam));
        scatter_u(&g, &self.cu, ou);
        gather_w(&g, rw, &mut self.cw);
        self.bw
            .apply_symbol(&mut self.cw, |lam| 1.0 / (a + b * lam));
        scatter_w(&g, &self.cw, ow);
    }
}

/// Pure-Neumann Poisson solve `Lap g = d` (mean-free `g`), exact to round-off.
fn neumann_potential(grid: Grid, d: Vec<f64>) -> Result<Vec<f64>> {
    let neg = ScalarField {
        grid,
        values: d.into_iter().map(|x| -x).collect(),
    };
    let settings = SolverSettings {
        tol: 1e-14,
        ..Default::default()
    };
    Ok(solve_helmholtz_neumann_with(0.0, 1.0, &neg, &settings)?
        .0
        .values)
}

/// Helmholtz-Leray projection onto discretely solenoidal fields with zero
/// normal component. Boundary faces of the input are ignored.
pub fn leray_project(u: &VectorField) -> Result<VectorField> {
    let g = u.grid;
    u.check_shape(&g)?;
    if !u.is_finite() {
        return Err(NschError::NonFinite("projection input"));
    }
    let mut out = u.clone();
    out.zero_boundary();
    let mut d = vec![0.0; g.cells()];
    divergence_into(&g, &out.u, &out.w, &mut d);
    let phi = neumann_potential(g, d)?;
    let mut gu = vec![0.0; g.u_len()];
    let mut gw = vec![0.0; g.w_len()];
    gradient_into(&g, &phi, &mut gu, &mut gw);
    for (a, b) in out.u.iter_mut().zip(&gu) {
        *a -= b;
    }
    for (a, b) in out.w.iter_mut().zip(&gw) {
        *a -= b;
    }
    Ok(out)
}

/// Discrete Stokes problem `-Lap u + grad p = P f`, `div u = 0`, no-slip,
/// solved by conjugate gradients on the pressure Schur complement with exact
/// fast inner solves.
pub fn stokes_solve(f: &VectorField) -> Result<StokesSolution> {
    let g = f.grid;
    let pf = leray_project(f)?;
    let mut spec = VectorSpectral::new(&g);
    let (nu, nw, nc) = (g.u_len(), g.w_len(), g.cells());

    // u0 = L^-1 Pf; the Schur system is  -div L^-1 grad p = -div u0, whose
    // operator is positive semidefinite because div = -grad^T.
    let mut u0 = VectorField::zeros(g);
    spec.solve(0.0, 1.0, &pf.u, &pf.w, &mut u0.u, &mut u0.w);
    let mut rhs = vec![0.0; nc];
    divergence_into(&g, &u0.u, &u0.w, &mut rhs);
    rhs.iter_mut().for_each(|x| *x = -*x);

    let mut gu = vec![0.0; nu];
    let mut gw = vec![0.0; nw];
    let mut lu = vec![0.0; nu];
    let mut lw = vec![0.0; nw];
    let schur = |p: &[f64], out: &mut [f64]| {
        gradient_into(&g, p, &mut gu, &mut gw);
        spec.solve(0.0, 1.0, &gu, &gw, &mut lu, &mut lw);
        divergence_into(&g, &lu, &lw, out);
        let m = out.iter().sum::<f64>() / out.len() as f64;
        out.iter_mut().for_each(|x| *x = m - *x);
    };
    let mut p = vec![0.0; nc];
    let outcome = pcg(
        schur,
        |r, z| z.copy_from_slice(r),
        &rhs,
        &mut p,
        FLUID_TOL,
        10 * (g.nx + g.ny),
        "Stokes Schur CG",
    )?;
    let m = p.iter().sum::<f64>() / nc as f64;
    p.iter_mut().for_each(|x| *x -= m);

    // u = L^-1 (Pf - grad p)
    let mut gu = vec![0.0; nu];
    let mut gw = vec![0.0; nw];
    gradient_into(&g, &p, &mut gu, &mut gw);
    for k in 0..nu {
        gu[k] = pf.u[k] - gu[k];
    }
    for k in 0..nw {
        gw[k] = pf.w[k] - gw[k];
    }
    let mut u = VectorField::zeros(g);
    spec.solve(0.0, 1.0, &gu, &gw, &mut u.u, &mut u.w);
    let energy_pairing = f.dot(&u);
    Ok(StokesSolution {
        u,
        p: ScalarField { grid: g, values: p },
        energy_pairing,
        iterations: outcome.iterations,
    })
}

/// Residual `-Lap u + grad p - P f` of a Stokes solution (for audits).
pub fn stokes_residual(f: &VectorField, sol: &StokesSolution) -> Result<VectorField> {
    let g = f.grid;
    let pf = leray_project(f)?;
    let mut r = VectorField::zeros(g);
    vector_laplacian_apply(&g, &sol.u.u, &sol.u.w, &mut r.u, &mut r.w);
    let mut gu = vec![0.0; g.u_len()];
    let mut gw = vec![0.0; g.w_len()];
    gradient_into(&g, &sol.p.values, &mut gu, &mut gw);
    for k in 0..r.u.len() {
        r.u[k] += gu[k] - pf.u[k];
    }
    for k in 0..r.w.len() {
        r.w[k] += gw[k] - pf.w[k];
    }
    Ok(r)
}

/// Capillary and chemotactic force `(mu + chi sigma) grad phi` on interior
/// faces, with the prefactor averaged to the face.
pub fn interface_force(
    phi: &ScalarField,
    mu: &ScalarField,
    sigma: &ScalarField,
    p: &PhysParams,
) -> VectorField {
    let g = phi.grid;
    let m: Vec<f64> = mu
        .values
        .iter()
        .zip(&sigma.values)
        .map(|(a, s)| a + p.chi * s)
        .collect();
    let mut f = VectorField::zeros(g);
    gradient_into(&g, &phi.values, &mut f.u, &mut f.w);
    for j in 0..g.ny {
        for i in 1..g.nx {
            f.u[g.uidx(i, j)] *= 0.5 * (m[g.idx(i - 1, j)] + m[g.idx(i, j)]);
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            f.w[g.widx(i, j)] *= 0.5 * (m[g.idx(i, j - 1)] + m[g.idx(i, j)]);
        }
    }
    f
}

/// One pressure-correction step of the momentum equation.
pub fn ns_step(
    v_n: &VectorField,
    p_n: &ScalarField,
    phi_next: &ScalarField,
    mu_next: &ScalarField,
    sigma_next: &ScalarField,
    params: &PhysParams,
    tau: f64,
) -> Result<FluidStepResult> {
    let g = v_n.grid;
    phi_next.check_shape(&g)?;
    if let Some(&r) = phi_next.values.iter().find(|r| r.abs() >= 1.0) {
        return Err(NschError::PotentialDomain(r));
    }
    let visc = Viscosity::from_phase(phi_next, params);
    let force = interface_force(phi_next, mu_next, sigma_next, params);
    ns_step_with_viscosity(v_n, p_n, &force, &visc, tau)
}

/// [`ns_step`] with an explicit force and viscosity field.
pub fn ns_step_with_viscosity(
    v_n: &VectorField,
    p_n: &ScalarField,
    force: &VectorField,
    visc: &Viscosity,
    tau: f64,
) -> Result<FluidStepResult> {
    let g = v_n.grid;
    v_n.check_shape(&g)?;
    p_n.check_shape(&g)?;
    force.check_shape(&g)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(NschError::InvalidParameter(format!(
            "time step must be > 0, got {tau}"
        )));
    }
    if !v_n.is_finite() || !p_n.is_finite() || !force.is_finite() {
        return Err(NschError::NonFinite("momentum input"));
    }
    let (nu, nw) = (g.u_len(), g.w_len());

    let mut rhs = vec![0.0; nu + nw];
    {
        let (ru, rw) = rhs.split_at_mut(nu);
        let mut au = vec![0.0; nu];
        let mut aw = vec![0.0; nw];
        momentum_advection(&g, &v_n.u, &v_n.w, &mut au, &mut aw);
        let mut pu = vec![0.0; nu];
        let mut pw = vec![0.0; nw];
        gradient_into(&g, &p_n.values, &mut pu, &mut pw);
        for k in 0..nu {
            ru[k] = v_n.u[k] / tau - au[k] - pu[k] + force.u[k];
        }
        for k in 0..nw {
            rw[k] = v_n.w[k] / tau - aw[k] - pw[k] + force.w[k];
        }
        for j in 0..g.ny {
            ru[g.uidx(0, j)] = 0.0;
            ru[g.uidx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            rw[g.widx(i, 0)] = 0.0;
            rw[g.widx(i, g.ny)] = 0.0;
        }
    }

    let inv_tau = 1.0 / tau;
    let eta_ref = (visc.min() * visc.max()).sqrt();
    let apply = |x: &[f64], out: &mut [f64]| {
        let (xu, xw) = x.split_at(nu);
        let (ou, ow) = out.split_at_mut(nu);
        viscous_apply(&g, visc, xu, xw, ou, ow);
        for k in 0..nu {
            ou[k] += inv_tau * xu[k];
        }
        for k in 0..nw {
            ow[k] += inv_tau * xw[k];
        }
        for j in 0..g.ny {
            ou[g.uidx(0, j)] = 0.0;
            ou[g.uidx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            ow[g.widx(i, 0)] = 0.0;
            ow[g.widx(i, g.ny)] = 0.0;
        }
    };
    let mut spec = VectorSpectral::new(&g);
    let precond = |r: &[f64], z: &mut [f64]| {
        let (ru, rw) = r.split_at(nu);
        let (zu, zw) = z.split_at_mut(nu);
        spec.solve(inv_tau, eta_ref, ru, rw, zu, zw);
    };
    let mut star: Vec<f64> = v_n.u.iter().chain(&v_n.w).cloned().collect();
    let outcome = pcg(
        apply,
        precond,
        &rhs,
        &mut star,
        FLUID_TOL,
        10 * (g.nx + g.ny),
        "momentum PCG",
    )?;
    let (su, sw) = star.split_at(nu);
    let mut v = VectorField::from_values(g, su.to_vec(), sw.to_vec())?;
    v.zero_boundary();

    // Projection: Lap psi = div v* / tau, v = v* - tau grad psi.
    let mut d = vec![0.0; g.cells()];
    divergence_into(&g, &v.u, &v.w, &mut d);
    d.iter_mut().for_each(|x| *x *= inv_tau);
    let psi = neumann_potential(g, d)?;
    let mut gu = vec![0.0; nu];
    let mut gw = vec![0.0; nw];
    gradient_into(&g, &psi, &mut gu, &mut gw);
    for k in 0..nu {
        v.u[k] -= tau * gu[k];
    }
    for k in 0..nw {
        v.w[k] -= tau * gw[k];
    }
    let mut p: Vec<f64> = p_n.values.iter().zip(&psi).map(|(a, b)| a + b).collect();
    let m = p.iter().sum::<f64>() / p.len() as f64;
    p.iter_mut().for_each(|x| *x -= m);

    let div_residual = divergence_mac(&v)?.max_abs();
    if !(div_residual <= crate::grid::DIVERGENCE_TOL) {
        return Err(NschError::NotDivergenceFree {
            norm: div_residual,
            tol: crate::grid::DIVERGENCE_TOL,
        });
    }
    Ok(FluidStepResult {
        v_next: v,
        p_next: ScalarField { grid: g, values: p },
        div_residual,
        momentum_iters: outcome.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_vector(g: Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VectorField::zeros(g);
        v.u.iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        v.w.iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        v.zero_boundary();
        v
    }

    fn swirl(g: Grid) -> VectorField {
        VectorField::from_stream_function(g, |x, y| {
            (PI * x / g.lx).sin().powi(2) * (PI * y / g.ly).sin().powi(2)
        })
    }

    #[test]
    fn projection_annihilates_gradients() {
        let g = Grid::new(20, 16, 1.0, 0.8).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() * (2.0 * y).cos() + x * x);
        let grad = crate::grid::gradient_cc(&f).unwrap();
        let out = leray_project(&grad).unwrap();
        assert!(out.l2() <= 1e-9 * grad.l2(), "{}", out.l2() / grad.l2());
    }

    #[test]
    fn projection_keeps_solenoidal_fields() {
        let g = Grid::unit(16).unwrap();
        let v = swirl(g);
        let out = leray_project(&v).unwrap();
        assert!(out.sub(&v).max_abs() <= 1e-10 * v.max_abs());
    }

    #[test]
    fn projection_is_idempotent_and_solenoidal() {
        let g = Grid::new(18, 14, 1.0, 0.9).unwrap();
        let u = random_vector(g, 3);
        let p1 = leray_project(&u).unwrap();
        let p2 = leray_project(&p1).unwrap();
        assert!(p2.sub(&p1).l2() <= 1e-10 * u.l2());
        assert!(divergence_mac(&p1).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn projection_is_linear() {
        let g = Grid::unit(12).unwrap();
        let a = random_vector(g, 1);
        let b = random_vector(g, 2);
        let lhs = leray_project(&a.scale(2.0).add(&b)).unwrap();
        let rhs = leray_project(&a)
            .unwrap()
            .scale(2.0)
            .add(&leray_project(&b).unwrap());
        assert!(lhs.sub(&rhs).l2() <= 1e-12 * lhs.l2());
    }

    #[test]
    fn stokes_zero_forcing() {
        let g = Grid::unit(8).unwrap();
        let s = stokes_solve(&VectorField::zeros(g)).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.p.max_abs(), 0.0);
        assert_eq!(s.energy_pairing, 0.0);
    }

    #[test]
    fn stokes_residual_and_pairing() {
        let g = Grid::new(24, 20, 1.0, 0.8).unwrap();
        let f = random_vector(g, 7);
        let s = stokes_solve(&f).unwrap();
        let r = stokes_residual(&f, &s).unwrap();
        assert!(r.l2() <= 1e-9 * f.l2(), "{}", r.l2() / f.l2());
        assert!(divergence_mac(&s.u).unwrap().max_abs() <= 1e-10);
        assert_eq!(s.u.boundary_max_abs(), 0.0);
        let grad = s.u.grad_norm_sq();
        assert!((s.energy_pairing - grad).abs() <= 1e-9 * s.energy_pairing);
    }

    #[test]
    fn stokes_ignores_gradient_forcing() {
        let g = Grid::unit(16).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (2.0 * x + y).sin());
        let s = stokes_solve(&crate::grid::gradient_cc(&f).unwrap()).unwrap();
        assert!(s.u.max_abs() < 1e-10);
    }

    #[test]
    fn quiescent_step_stays_at_rest() {
        let g = Grid::unit(8).unwrap();
        let r = ns_step_with_viscosity(
            &VectorField::zeros(g),
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &Viscosity::constant(&g, 1.0),
            0.1,
        )
        .unwrap();
        assert_eq!(r.v_next.max_abs(), 0.0);
        assert_eq!(r.p_next.max_abs(), 0.0);
    }

    #[test]
    fn unforced_flow_decays() {
        let g = Grid::unit(16).unwrap();
        let visc = Viscosity::constant(&g, 0.05);
        let mut v = swirl(g).scale(3.0);
        let mut p = ScalarField::zeros(g);
        let f = VectorField::zeros(g);
        for _ in 0..100 {
            let r = ns_step_with_viscosity(&v, &p, &f, &visc, 0.01).unwrap();
            assert!(r.v_next.l2() <= v.l2() * (1.0 + 1e-12));
            assert!(r.div_residual <= 1e-10);
            assert_eq!(r.v_next.boundary_max_abs(), 0.0);
            v = r.v_next;
            p = r.p_next;
        }
    }

    #[test]
    fn equal_viscosities_match_constant_step_bitwise() {
        let g = Grid::unit(12).unwrap();
        let params = PhysParams {
            eta1: 1.3,
            eta2: 1.3,
            ..Default::default()
        };
        let phi = ScalarField::from_fn(g, |x, y| 0.7 * (PI * x).cos() * (PI * y).cos());
        let mu = phi.scale(2.0);
        let sigma = ScalarField::constant(g, 5.0);
        let v = swirl(g);
        let p = ScalarField::zeros(g);
        let a = ns_step(&v, &p, &phi, &mu, &sigma, &params, 0.01).unwrap();
        let force = interface_force(&phi, &mu, &sigma, &params);
        let b =
            ns_step_with_viscosity(&v, &p, &force, &Viscosity::constant(&g, 1.3), 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn force_work_equals_transport_work() {
        let g = Grid::new(14, 12, 1.0, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = ScalarField::from_fn(g, |_, _| rng.random_range(-0.9..0.9));
        let mu = ScalarField::from_fn(g, |_, _| rng.random_range(-2.0..2.0));
        let params = PhysParams {
            chi: 0.0,
            ..Default::default()
        };
        let v = swirl(g);
        let force = interface_force(&phi, &mu, &ScalarField::zeros(g), &params);
        let adv = crate::grid::advect_conservative(&v, &phi).unwrap();
        let lhs = force.dot(&v);
        let rhs = mu.dot(&adv);
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
            "{lhs} {rhs}"
        );
    }
}
