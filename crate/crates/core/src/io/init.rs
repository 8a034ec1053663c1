//! Named initial-condition generators.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{InitConfig, InitKind, RunConfig};
use super::snapshot::read_snapshot_on;
use crate::error::Result;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::physics::PhysParams;
use crate::stepper::State;

pub const SPINODAL_AMPLITUDE: f64 = 0.05;
pub const BUBBLE_AMPLITUDE: f64 = 0.9;

/// Uniform noise of the given amplitude about `c0`.
pub fn spinodal_phase(g: Grid, c0: f64, amplitude: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(g, |_, _| c0 + amplitude * rng.random_range(-1.0..1.0))
}

/// Centered tanh bubble of width `sqrt(B/A)`; the default radius encloses
/// half the domain so the mean stays near zero.
pub fn bubble_phase(g: Grid, p: &PhysParams, amplitude: f64, radius: Option<f64>) -> ScalarField {
    let r0 = radius.unwrap_or_else(|| (g.area() / (2.0 * std::f64::consts::PI)).sqrt());
    let width = (p.b / p.a).sqrt();
    let (cx, cy) = (0.5 * g.nx as f64 * g.hx, 0.5 * g.ny as f64 * g.hy);
    ScalarField::from_fn(g, |x, y| {
        let r = (x - cx).hypot(y - cy);
        amplitude * ((r0 - r) / width).tanh()
    })
}

/// Solenoidal no-slip field from `s sin^2(pi x/Lx) sin^2(pi y/Ly)`.
pub fn swirl(g: Grid, s: f64) -> VectorField {
    if s == 0.0 {
        return VectorField::zeros(g);
    }
    let (kx, ky) = (
        std::f64::consts::PI / (g.nx as f64 * g.hx),
        std::f64::consts::PI / (g.ny as f64 * g.hy),
    );
    VectorField::from_stream_function(g, |x, y| {
        s * (kx * x).sin().powi(2) * (ky * y).sin().powi(2)
    })
}

pub fn initial_state_with(g: Grid, p: &PhysParams, init: &InitConfig) -> Result<State> {
    if init.kind == InitKind::Snapshot {
        let path = init.path.as_ref().expect("validated");
        return read_snapshot_on(path, &g, p);
    }
    let phi = match init.kind {
        InitKind::Spinodal => spinodal_phase(
            g,
            p.c0,
            init.amplitude.unwrap_or(SPINODAL_AMPLITUDE),
            init.seed,
        ),
        InitKind::Bubble => bubble_phase(
            g,
            p,
            init.amplitude.unwrap_or(BUBBLE_AMPLITUDE),
            init.radius,
        ),
        InitKind::Quiescent | InitKind::Snapshot => ScalarField::constant(g, p.c0),
    };
    let sigma = ScalarField::constant(g, init.sigma0.unwrap_or(0.5 * p.m2));
    State::new(0.0, swirl(g, init.stream_amplitude), phi, sigma, p)
}

pub fn initial_state(cfg: &RunConfig) -> Result<State> {
    initial_state_with(cfg.grid.build()?, &cfg.params, &cfg.init)
}
