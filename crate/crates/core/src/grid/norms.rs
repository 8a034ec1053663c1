use super::ops::gradient_into;
use super::solve::solve_helmholtz_neumann;
use super::{dot, Grid, ScalarField};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1_dual: f64,
    pub mean: f64,
}

impl NormReport {
    /// Full `H^1` norm `(l2^2 + h1_semi^2)^(1/2)`.
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

pub fn norms(f: &ScalarField) -> Result<NormReport> {
    f.check_shape(&f.grid)?;
    Ok(NormReport {
        l2: f.l2(),
        h1_semi: h1_semi_sq(f).sqrt(),
        h1_dual: h1_dual_squared(f)?.max(0.0).sqrt(),
        mean: f.mean(),
    })
}

/// `sum |grad f|^2 hx hy` over interior faces.
pub(crate) fn h1_semi_sq(f: &ScalarField) -> f64 {
    let g = f.grid;
    let mut u = vec![0.0; g.u_len()];
    let mut w = vec![0.0; g.w_len()];
    gradient_into(&g, &f.values, &mut u, &mut w);
    (dot(&u, &u) + dot(&w, &w)) * g.cell_area()
}

/// `(f, u)` with `u - Lap u = f`: the squared dual norm of `H^1`.
pub fn h1_dual_squared(f: &ScalarField) -> Result<f64> {
    let u = solve_helmholtz_neumann(1.0, 1.0, f)?;
    Ok(f.dot(&u))
}

/// Pure second differences at cell centers (mirror ghosts).
fn second_differences(g: &Grid, f: &[f64], i: usize, j: usize) -> (f64, f64) {
    let c = f[g.idx(i, j)];
    let l = if i > 0 { f[g.idx(i - 1, j)] } else { c };
    let r = if i + 1 < g.nx { f[g.idx(i + 1, j)] } else { c };
    let d = if j > 0 { f[g.idx(i, j - 1)] } else { c };
    let u = if j + 1 < g.ny { f[g.idx(i, j + 1)] } else { c };
    (
        (l - 2.0 * c + r) / (g.hx * g.hx),
        (d - 2.0 * c + u) / (g.hy * g.hy),
    )
}

/// Mixed derivative at node `(i, j)`; zero on the walls, where one of the
/// first derivatives vanishes identically.
fn mixed_node(g: &Grid, f: &[f64], i: usize, j: usize) -> f64 {
    if i == 0 || j == 0 || i == g.nx || j == g.ny {
        return 0.0;
    }
    (f[g.idx(i, j)] - f[g.idx(i - 1, j)] - f[g.idx(i, j - 1)] + f[g.idx(i - 1, j - 1)])
        / (g.hx * g.hy)
}

/// `sum |D^2 f|_F^2`: pure second differences at cells, mixed ones at nodes.
pub fn second_derivative_norm_sq(f: &ScalarField) -> f64 {
    let g = f.grid;
    let mut cells = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (fxx, fyy) = second_differences(&g, &f.values, i, j);
            cells += fxx * fxx + fyy * fyy;
        }
    }
    let mut nodes = 0.0;
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let fxy = mixed_node(&g, &f.values, i, j);
            nodes += 2.0 * fxy * fxy * g.node_weight(i, j);
        }
    }
    cells * g.cell_area() + nodes
}

/// Full `H^2` norm.
pub fn h2_norm(f: &ScalarField) -> f64 {
    (f.dot(f) + h1_semi_sq(f) + second_derivative_norm_sq(f)).sqrt()
}

/// `W^{2,3}` norm from cell-centered values of `f`, `|grad f|` and `|D^2 f|_F`.
pub fn w23_norm(f: &ScalarField) -> f64 {
    let g = f.grid;
    let v = &f.values;
    let mut u = vec![0.0; g.u_len()];
    let mut w = vec![0.0; g.w_len()];
    gradient_into(&g, v, &mut u, &mut w);
    let mut acc = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let gx = 0.5 * (u[g.uidx(i, j)] + u[g.uidx(i + 1, j)]);
            let gy = 0.5 * (w[g.widx(i, j)] + w[g.widx(i, j + 1)]);
            let (fxx, fyy) = second_differences(&g, v, i, j);
            let fxy = 0.25
                * (mixed_node(&g, v, i, j)
                    + mixed_node(&g, v, i + 1, j)
                    + mixed_node(&g, v, i, j + 1)
                    + mixed_node(&g, v, i + 1, j + 1));
            let hess = (fxx * fxx + fyy * fyy + 2.0 * fxy * fxy).sqrt();
            acc += v[g.idx(i, j)].abs().powi(3) + gx.hypot(gy).powi(3) + hess.powi(3);
        }
    }
    (acc * g.cell_area()).cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::spectral::Basis2d;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_norms() {
        let g = Grid::unit(8).unwrap();
        let r = norms(&ScalarField::constant(g, -2.0)).unwrap();
        assert!((r.l2 - 2.0).abs() < 1e-14);
        assert!((r.mean + 2.0).abs() < 1e-14);
        assert_eq!(r.h1_semi, 0.0);
        assert!((r.h1_dual - 2.0).abs() < 1e-10);
    }

    #[test]
    fn cosine_h1_seminorm() {
        let err = |n| {
            let g = Grid::unit(n).unwrap();
            let f = ScalarField::from_fn(g, |x, _| (PI * x).cos());
            (norms(&f).unwrap().h1_semi.powi(2) - PI * PI / 2.0).abs()
        };
        let (e32, e64) = (err(32), err(64));
        assert!(e64 < 1e-3);
        assert!((e32 / e64 - 4.0).abs() < 0.6);
    }

    #[test]
    fn dual_norm_obeys_discrete_poincare_bound() {
        let g = Grid::new(24, 16, 1.0, 0.75).unwrap();
        // For mean-free f the dual norm is at most |f| / sqrt(1 + lambda_1).
        let lam1 = Basis2d::neumann(&g).smallest_nonzero_eigenvalue();
        let cp = 1.0 / (1.0 + lam1).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let f = ScalarField::from_fn(g, |_, _| rng.random_range(-1.0..1.0)).mean_free();
            let r = norms(&f).unwrap();
            assert!(r.h1_dual <= cp * r.l2 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn second_derivatives_of_cosine() {
        let g = Grid::unit(64).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
        // |D^2 f|^2 integrates to pi^4 (1/4 + 1/4 + 2/4).
        let exact = PI.powi(4);
        assert!((second_derivative_norm_sq(&f) - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn w23_norm_of_half_cosine() {
        let g = Grid::unit(128).unwrap();
        let f = ScalarField::from_fn(g, |x, _| 0.5 * (PI * x).cos());
        // Every term is c^3 * 4 / (3 pi) with c = 1/2, pi/2, pi^2/2.
        let base = 4.0 / (3.0 * PI);
        let exact = ((0.125 + (0.5 * PI).powi(3) + (0.5 * PI * PI).powi(3)) * base).cbrt();
        let rel = (w23_norm(&f) - exact).abs() / exact;
        assert!(rel < 2e-3, "rel {rel}");
    }
}
