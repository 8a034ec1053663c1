//! Staggered operators for the momentum equation: the variable-viscosity
//! stress divergence, the no-slip vector Laplacian and centered transport.

use crate::grid::{duy_node, dwx_node, Grid, ScalarField, VectorField};
use crate::physics::{eta, PhysParams};

/// Viscosity sampled at cell centers (normal stresses) and grid nodes (shear).
#[derive(Debug, Clone, PartialEq)]
pub struct Viscosity {
    pub cell: Vec<f64>,
    pub node: Vec<f64>,
}

impl Viscosity {
    pub fn constant(g: &Grid, value: f64) -> Self {
        Self {
            cell: vec![value; g.cells()],
            node: vec![value; g.nodes()],
        }
    }

    /// Node values use the phase field averaged over the adjacent cells.
    pub fn from_phase(phi: &ScalarField, p: &PhysParams) -> Self {
        let g = phi.grid;
        let cell = phi.values.iter().map(|&r| eta(r, p)).collect();
        let mut node = Vec::with_capacity(g.nodes());
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                let (mut sum, mut cnt) = (0.0, 0.0);
                for jj in j.saturating_sub(1)..(j + 1).min(g.ny) {
                    for ii in i.saturating_sub(1)..(i + 1).min(g.nx) {
                        sum += phi.values[g.idx(ii, jj)];
                        cnt += 1.0;
                    }
                }
                node.push(eta(sum / cnt, p));
            }
        }
        Self { cell, node }
    }

    pub fn min(&self) -> f64 {
        self.cell
            .iter()
            .chain(&self.node)
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.cell
            .iter()
            .chain(&self.node)
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `-div(2 eta D v)` on interior faces; boundary faces of the output are zero.
pub(crate) fn viscous_apply(
    g: &Grid,
    visc: &Viscosity,
    u: &[f64],
    w: &[f64],
    ou: &mut [f64],
    ow: &mut [f64],
) {
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let txx = |i: usize, j: usize| {
        2.0 * visc.cell[g.idx(i, j)] * (u[g.uidx(i + 1, j)] - u[g.uidx(i, j)]) / hx
    };
    let tyy = |i: usize, j: usize| {
        2.0 * visc.cell[g.idx(i, j)] * (w[g.widx(i, j + 1)] - w[g.widx(i, j)]) / hy
    };
    let txy = |i: usize, j: usize| {
        visc.node[g.nidx(i, j)] * (duy_node(g, u, i, j) + dwx_node(g, w, i, j))
    };
    for j in 0..ny {
        ou[g.uidx(0, j)] = 0.0;
        ou[g.uidx(nx, j)] = 0.0;
        for i in 1..nx {
            ou[g.uidx(i, j)] =
                -((txx(i, j) - txx(i - 1, j)) / hx + (txy(i, j + 1) - txy(i, j)) / hy);
        }
    }
    for i in 0..nx {
        ow[g.widx(i, 0)] = 0.0;
        ow[g.widx(i, ny)] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            ow[g.widx(i, j)] =
                -((txy(i + 1, j) - txy(i, j)) / hx + (tyy(i, j) - tyy(i, j - 1)) / hy);
        }
    }
}

/// `sum 2 eta |D v|^2`: normal strains at cells, shear at weighted nodes.
pub(crate) fn weighted_strain_sq(g: &Grid, visc: &Viscosity, v: &VectorField) -> f64 {
    let mut cells = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let exx = (v.u[g.uidx(i + 1, j)] - v.u[g.uidx(i, j)]) / g.hx;
            let eyy = (v.w[g.widx(i, j + 1)] - v.w[g.widx(i, j)]) / g.hy;
            cells += 2.0 * visc.cell[g.idx(i, j)] * (exx * exx + eyy * eyy);
        }
    }
    let mut nodes = 0.0;
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let exy = 0.5 * (v.duy_node(i, j) + v.dwx_node(i, j));
            nodes += 2.0 * visc.node[g.nidx(i, j)] * 2.0 * exy * exy * g.node_weight(i, j);
        }
    }
    cells * g.cell_area() + nodes
}

/// Viscous dissipation `sum 2 eta(phi) |D v|^2`.
pub fn viscous_dissipation(v: &VectorField, phi: &ScalarField, p: &PhysParams) -> f64 {
    weighted_strain_sq(&v.grid, &Viscosity::from_phase(phi, p), v)
}

/// `|D v|^2` summed with the same quadrature.
pub fn sym_grad_norm_sq(v: &VectorField) -> f64 {
    0.5 * weighted_strain_sq(&v.grid, &Viscosity::constant(&v.grid, 1.0), v)
}

/// `-Lap` applied componentwise with no-slip ghosts.
pub(crate) fn vector_laplacian_apply(
    g: &Grid,
    u: &[f64],
    w: &[f64],
    ou: &mut [f64],
    ow: &mut [f64],
) {
    let (nx, ny) = (g.nx, g.ny);
    let (ix2, iy2) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    for j in 0..ny {
        ou[g.uidx(0, j)] = 0.0;
        ou[g.uidx(nx, j)] = 0.0;
        for i in 1..nx {
            let c = u[g.uidx(i, j)];
            let d = if j > 0 { u[g.uidx(i, j - 1)] } else { -c };
            let t = if j + 1 < ny { u[g.uidx(i, j + 1)] } else { -c };
            ou[g.uidx(i, j)] = -(u[g.uidx(i - 1, j)] - 2.0 * c + u[g.uidx(i + 1, j)]) * ix2
                - (d - 2.0 * c + t) * iy2;
        }
    }
    for i in 0..nx {
        ow[g.widx(i, 0)] = 0.0;
        ow[g.widx(i, ny)] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = w[g.widx(i, j)];
            let l = if i > 0 { w[g.widx(i - 1, j)] } else { -c };
            let r = if i + 1 < nx { w[g.widx(i + 1, j)] } else { -c };
            ow[g.widx(i, j)] = -(l - 2.0 * c + r) * ix2
                - (w[g.widx(i, j - 1)] - 2.0 * c + w[g.widx(i, j + 1)]) * iy2;
        }
    }
}

/// Centered divergence-form transport `div(v v)` on interior faces.
pub(crate) fn momentum_advection(g: &Grid, u: &[f64], w: &[f64], ou: &mut [f64], ow: &mut [f64]) {
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let uc = |i: usize, j: usize| 0.5 * (u[g.uidx(i, j)] + u[g.uidx(i + 1, j)]);
    let wc = |i: usize, j: usize| 0.5 * (w[g.widx(i, j)] + w[g.widx(i, j + 1)]);
    // Node averages; both vanish on the walls where the normal component is 0.
    let un = |i: usize, j: usize| {
        if j == 0 || j == ny {
            0.0
        } else {
            0.5 * (u[g.uidx(i, j - 1)] + u[g.uidx(i, j)])
        }
    };
    let wn = |i: usize, j: usize| {
        if i == 0 || i == nx {
            0.0
        } else {
            0.5 * (w[g.widx(i - 1, j)] + w[g.widx(i, j)])
        }
    };
    for j in 0..ny {
        ou[g.uidx(0, j)] = 0.0;
        ou[g.uidx(nx, j)] = 0.0;
        for i in 1..nx {
            let fx = (uc(i, j).powi(2) - uc(i - 1, j).powi(2)) / hx;
            let fy = (wn(i, j + 1) * un(i, j + 1) - wn(i, j) * un(i, j)) / hy;
            ou[g.uidx(i, j)] = fx + fy;
        }
    }
    for i in 0..nx {
        ow[g.widx(i, 0)] = 0.0;
        ow[g.widx(i, ny)] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            let fx = (un(i + 1, j) * wn(i + 1, j) - un(i, j) * wn(i, j)) / hx;
            let fy = (wc(i, j).powi(2) - wc(i, j - 1).powi(2)) / hy;
            ow[g.widx(i, j)] = fx + fy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_no_slip(g: Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VectorField::zeros(g);
        v.u.iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        v.w.iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        v.zero_boundary();
        v
    }

    fn apply(g: &Grid, visc: &Viscosity, v: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(*g);
        viscous_apply(g, visc, &v.u, &v.w, &mut out.u, &mut out.w);
        out
    }

    #[test]
    fn viscous_operator_is_symmetric_and_matches_dissipation() {
        let g = Grid::new(10, 8, 1.0, 0.9).unwrap();
        let phi = ScalarField::from_fn(g, |x, y| 0.8 * (3.0 * x - 2.0 * y).sin());
        let visc = Viscosity::from_phase(&phi, &PhysParams::default());
        let a = random_no_slip(g, 1);
        let b = random_no_slip(g, 2);
        let ab = apply(&g, &visc, &a).dot(&b);
        let ba = apply(&g, &visc, &b).dot(&a);
        assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        let aa = apply(&g, &visc, &a).dot(&a);
        let diss = weighted_strain_sq(&g, &visc, &a);
        assert!((aa - diss).abs() <= 1e-12 * diss);
    }

    #[test]
    fn vector_laplacian_pairs_with_gradient_norm() {
        let g = Grid::new(9, 11, 1.2, 1.0).unwrap();
        let v = random_no_slip(g, 3);
        let mut out = VectorField::zeros(g);
        vector_laplacian_apply(&g, &v.u, &v.w, &mut out.u, &mut out.w);
        let lhs = out.dot(&v);
        let rhs = v.grad_norm_sq();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn korn_bounds_on_random_fields() {
        let g = Grid::unit(12).unwrap();
        for seed in 0..20 {
            let v = random_no_slip(g, seed);
            let grad = v.grad_norm_sq().sqrt();
            let sym = sym_grad_norm_sq(&v).sqrt();
            assert!(grad <= 2f64.sqrt() * sym * (1.0 + 1e-12));
            assert!(sym <= grad * (1.0 + 1e-12));
        }
    }

    #[test]
    fn advection_is_energy_neutral_for_solenoidal_fields() {
        let g = Grid::new(16, 12, 1.0, 0.75).unwrap();
        let v = VectorField::from_stream_function(g, |x, y| {
            (PI * x).sin().powi(2) * (PI * y / 0.75).sin().powi(2) * (1.0 + x * y)
        });
        let mut out = VectorField::zeros(g);
        momentum_advection(&g, &v.u, &v.w, &mut out.u, &mut out.w);
        let e = out.dot(&v);
        assert!(e.abs() <= 1e-12 * out.l2() * v.l2(), "{e}");
    }

    #[test]
    fn equal_endpoint_viscosity_is_constant() {
        let g = Grid::unit(8).unwrap();
        let p = PhysParams {
            eta1: 1.7,
            eta2: 1.7,
            ..Default::default()
        };
        let phi = ScalarField::from_fn(g, |x, y| 0.9 * (x - y));
        assert_eq!(
            Viscosity::from_phase(&phi, &p),
            Viscosity::constant(&g, 1.7)
        );
    }

    #[test]
    fn dissipation_is_nonnegative_and_bounded_below() {
        let g = Grid::unit(10).unwrap();
        let p = PhysParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5 {
            let v = random_no_slip(g, seed);
            let phi = ScalarField::from_fn(g, |_, _| rng.random_range(-0.99..0.99));
            let d = viscous_dissipation(&v, &phi, &p);
            assert!(d >= 2.0 * p.eta_min() * sym_grad_norm_sq(&v) * (1.0 - 1e-12));
        }
    }
}
