#![allow(dead_code)]

pub mod oracle;

use std::f64::consts::PI;

use nsch_core::grid::{Grid, ScalarField, VectorField};
use nsch_core::physics::PhysParams;
use nsch_core::stepper::State;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Admissible state with smooth-plus-noise phase, nutrient near 5, a swirl
/// and a nonzero mean-free pressure.
pub fn random_state(g: Grid, p: &PhysParams, seed: u64, amp: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let phi = ScalarField::from_fn(g, |x, y| {
        0.3 * (PI * a * x).cos() * (PI * b * y).cos() + 0.1 * rng.random_range(-1.0..1.0)
    });
    let sigma = ScalarField::from_fn(g, |_, _| 5.0 + rng.random_range(-1.0..1.0));
    let (lx, ly) = (g.nx as f64 * g.hx, g.ny as f64 * g.hy);
    let v = VectorField::from_stream_function(g, |x, y| {
        amp * (PI * x / lx).sin().powi(2) * (PI * y / ly).sin().powi(2) * (PI * (x + 2.0 * y)).cos()
    });
    let mut s = State::new(0.0, v, phi, sigma, p).unwrap();
    s.p = ScalarField::from_fn(g, |_, _| rng.random_range(-1.0..1.0)).mean_free();
    s
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
