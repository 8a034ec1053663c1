//! Implicit-diffusion step for the nutrient with explicit transport and the
//! chemotactic source.

use crate::error::{NschError, Result};
use crate::grid::ops::{advect_into, check_divergence_free, laplacian_into};
use crate::grid::{solve_helmholtz_neumann_with, ScalarField, SolverSettings, VectorField};
use crate::physics::PhysParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStepResult {
    pub sigma_next: ScalarField,
    pub mean_drift: f64,
}

/// Solves `(s - s^n)/tau + div(v s^n) = Lap s - chi Lap phi^{n+1}`.
pub fn sigma_step(
    sigma_n: &ScalarField,
    phi_next: &ScalarField,
    v_n: &VectorField,
    p: &PhysParams,
    tau: f64,
) -> Result<SigmaStepResult> {
    let g = sigma_n.grid;
    sigma_n.check_shape(&g)?;
    phi_next.check_shape(&g)?;
    v_n.check_shape(&g)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(NschError::InvalidParameter(format!(
            "time step must be > 0, got {tau}"
        )));
    }
    if !sigma_n.is_finite() || !phi_next.is_finite() {
        return Err(NschError::NonFinite("nutrient input"));
    }
    check_divergence_free(v_n)?;
    let n = g.cells();
    let mut adv = vec![0.0; n];
    let mut lap = vec![0.0; n];
    advect_into(&g, &v_n.u, &v_n.w, &sigma_n.values, &mut adv);
    laplacian_into(&g, &phi_next.values, &mut lap);
    let rhs: Vec<f64> = (0..n)
        .map(|k| sigma_n.values[k] / tau - adv[k] - p.chi * lap[k])
        .collect();
    let settings = SolverSettings {
        tol: 1e-13,
        ..Default::default()
    };
    let (sigma_next, _) = solve_helmholtz_neumann_with(
        1.0 / tau,
        1.0,
        &ScalarField {
            grid: g,
            values: rhs,
        },
        &settings,
    )?;
    let mean_drift = (sigma_next.mean() - sigma_n.mean()).abs();
    Ok(SigmaStepResult {
        sigma_next,
        mean_drift,
    })
}
