//! Fast diagonalization of the constant-coefficient five-point Laplacian on
//! the staggered grid. Each direction uses the sine or cosine basis matching
//! its boundary treatment; the 2D operator is the Kronecker sum of the two
//! one-dimensional ones, so a separable transform diagonalizes it exactly.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, Dst1, TransformType2And3};

use super::Grid;

/// One-dimensional basis, determined by the boundary treatment of the unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Line {
    /// Cell-centered unknowns with mirror ghosts (homogeneous Neumann).
    Cos,
    /// Face unknowns strictly inside the domain, zero on the walls.
    SinFace,
    /// Cell-centered unknowns with odd ghosts (zero value on the walls).
    SinCell,
}

impl Line {
    fn len(self, cells: usize) -> usize {
        match self {
            Line::SinFace => cells - 1,
            _ => cells,
        }
    }

    /// Eigenvalues of the negative 1D second-difference operator.
    fn eigenvalues(self, cells: usize, h: f64) -> Vec<f64> {
        let shift = match self {
            Line::Cos => 0,
            Line::SinFace | Line::SinCell => 1,
        };
        (0..self.len(cells))
            .map(|k| {
                let s = (PI * (k + shift) as f64 / (2.0 * cells as f64)).sin();
                4.0 * s * s / (h * h)
            })
            .collect()
    }
}

enum Plan {
    Type23(Arc<dyn TransformType2And3<f64>>),
    Type1(Arc<dyn Dst1<f64>>),
}

thread_local! {
    static PLANNER: RefCell<DctPlanner<f64>> = RefCell::new(DctPlanner::new());
}

fn plan(line: Line, len: usize) -> Plan {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match line {
            Line::SinFace => Plan::Type1(p.plan_dst1(len)),
            _ => Plan::Type23(p.plan_dct2(len)),
        }
    })
}

struct LineTransform {
    line: Line,
    plan: Plan,
    scratch: Vec<f64>,
}

impl LineTransform {
    fn new(line: Line, len: usize) -> Self {
        let plan = plan(line, len);
        let scratch_len = match &plan {
            Plan::Type23(t) => rustdct::RequiredScratch::get_scratch_len(t.as_ref()),
            Plan::Type1(t) => rustdct::RequiredScratch::get_scratch_len(t.as_ref()),
        };
        Self {
            line,
            plan,
            scratch: vec![0.0; scratch_len],
        }
    }

    fn forward(&mut self, buf: &mut [f64]) {
        match (&self.plan, self.line) {
            (Plan::Type23(t), Line::Cos) => t.process_dct2_with_scratch(buf, &mut self.scratch),
            (Plan::Type23(t), _) => t.process_dst2_with_scratch(buf, &mut self.scratch),
            (Plan::Type1(t), _) => t.process_dst1_with_scratch(buf, &mut self.scratch),
        }
    }

    /// Unnormalized inverse; the caller applies the `2 / cells` factor.
    fn inverse(&mut self, buf: &mut [f64]) {
        match (&self.plan, self.line) {
            (Plan::Type23(t), Line::Cos) => t.process_dct3_with_scratch(buf, &mut self.scratch),
            (Plan::Type23(t), _) => t.process_dst3_with_scratch(buf, &mut self.scratch),
            (Plan::Type1(t), _) => t.process_dst1_with_scratch(buf, &mut self.scratch),
        }
    }
}

/// Separable 2D basis over a compact row-major array of `cols x rows` values.
pub struct Basis2d {
    pub cols: usize,
    pub rows: usize,
    lam_x: Vec<f64>,
    lam_y: Vec<f64>,
    fx: LineTransform,
    fy: LineTransform,
    norm: f64,
    column: Vec<f64>,
}

impl Basis2d {
    pub fn new(grid: &Grid, bx: Line, by: Line) -> Self {
        let cols = bx.len(grid.nx);
        let rows = by.len(grid.ny);
        Self {
            cols,
            rows,
            lam_x: bx.eigenvalues(grid.nx, grid.hx),
            lam_y: by.eigenvalues(grid.ny, grid.hy),
            fx: LineTransform::new(bx, cols),
            fy: LineTransform::new(by, rows),
            norm: (2.0 / grid.nx as f64) * (2.0 / grid.ny as f64),
            column: vec![0.0; rows],
        }
    }

    /// Basis for cell-centered scalars with homogeneous Neumann walls.
    pub fn neumann(grid: &Grid) -> Self {
        Self::new(grid, Line::Cos, Line::Cos)
    }

    /// Basis for the interior `u` faces of a no-slip velocity.
    pub fn u_component(grid: &Grid) -> Self {
        Self::new(grid, Line::SinFace, Line::SinCell)
    }

    /// Basis for the interior `w` faces of a no-slip velocity.
    pub fn w_component(grid: &Grid) -> Self {
        Self::new(grid, Line::SinCell, Line::SinFace)
    }

    /// Eigenvalue of `-Laplacian` for mode `(kx, ky)`.
    #[inline]
    pub fn eigenvalue(&self, kx: usize, ky: usize) -> f64 {
        self.lam_x[kx] + self.lam_y[ky]
    }

    /// Smallest nonzero eigenvalue of `-Laplacian`.
    pub fn smallest_nonzero_eigenvalue(&self) -> f64 {
        let mut m = f64::INFINITY;
        for ky in 0..self.rows {
            for kx in 0..self.cols {
                let l = self.eigenvalue(kx, ky);
                if l > 0.0 {
                    m = m.min(l);
                }
            }
        }
        m
    }

    fn transform(&mut self, data: &mut [f64], inverse: bool) {
        debug_assert_eq!(data.len(), self.cols * self.rows);
        for row in data.chunks_exact_mut(self.cols) {
            if inverse {
                self.fx.inverse(row);
            } else {
                self.fx.forward(row);
            }
        }
        for i in 0..self.cols {
            for j in 0..self.rows {
                self.column[j] = data[j * self.cols + i];
            }
            if inverse {
                self.fy.inverse(&mut self.column);
            } else {
                self.fy.forward(&mut self.column);
            }
            for j in 0..self.rows {
                data[j * self.cols + i] = self.column[j];
            }
        }
    }

    /// Applies the spectral multiplier `symbol(lambda)` where `lambda` is the
    /// eigenvalue of `-Laplacian` belonging to each mode.
    pub fn apply_symbol(&mut self, data: &mut [f64], symbol: impl Fn(f64) -> f64) {
        self.transform(data, false);
        for ky in 0..self.rows {
            for kx in 0..self.cols {
                let lam = self.eigenvalue(kx, ky);
                data[ky * self.cols + kx] *= symbol(lam) * self.norm;
            }
        }
        self.transform(data, true);
    }
}

/// Copies the interior faces of `u` into a compact `(nx - 1) x ny` array.
pub(crate) fn gather_u(g: &Grid, u: &[f64], out: &mut [f64]) {
    let cols = g.nx - 1;
    for j in 0..g.ny {
        for i in 1..g.nx {
            out[j * cols + i - 1] = u[g.uidx(i, j)];
        }
    }
}

pub(crate) fn scatter_u(g: &Grid, compact: &[f64], u: &mut [f64]) {
    let cols = g.nx - 1;
    for j in 0..g.ny {
        u[g.uidx(0, j)] = 0.0;
        u[g.uidx(g.nx, j)] = 0.0;
        for i in 1..g.nx {
            u[g.uidx(i, j)] = compact[j * cols + i - 1];
        }
    }
}

/// Interior faces of `w` as a compact `nx x (ny - 1)` array.
pub(crate) fn gather_w(g: &Grid, w: &[f64], out: &mut [f64]) {
    let len = g.nx * (g.ny - 1);
    out[..len].copy_from_slice(&w[g.nx..g.nx + len]);
}

pub(crate) fn scatter_w(g: &Grid, compact: &[f64], w: &mut [f64]) {
    let len = g.nx * (g.ny - 1);
    w[..g.nx].iter_mut().for_each(|x| *x = 0.0);
    w[g.nx..g.nx + len].copy_from_slice(&compact[..len]);
    w[g.nx + len..].iter_mut().for_each(|x| *x = 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Negative Laplacian on a compact array with the given boundary treatment.
    fn neg_lap(
        data: &[f64],
        cols: usize,
        rows: usize,
        bx: Line,
        by: Line,
        hx: f64,
        hy: f64,
    ) -> Vec<f64> {
        let ghost = |line: Line, inner: f64| match line {
            Line::Cos => inner,
            Line::SinFace => 0.0,
            Line::SinCell => -inner,
        };
        let mut out = vec![0.0; data.len()];
        for j in 0..rows {
            for i in 0..cols {
                let c = data[j * cols + i];
                let l = if i > 0 {
                    data[j * cols + i - 1]
                } else {
                    ghost(bx, c)
                };
                let r = if i + 1 < cols {
                    data[j * cols + i + 1]
                } else {
                    ghost(bx, c)
                };
                let d = if j > 0 {
                    data[(j - 1) * cols + i]
                } else {
                    ghost(by, c)
                };
                let u = if j + 1 < rows {
                    data[(j + 1) * cols + i]
                } else {
                    ghost(by, c)
                };
                out[j * cols + i] = -(l - 2.0 * c + r) / (hx * hx) - (d - 2.0 * c + u) / (hy * hy);
            }
        }
        out
    }

    #[test]
    fn identity_symbol_round_trips() {
        let g = Grid::new(12, 10, 1.0, 0.7).unwrap();
        for (bx, by) in [
            (Line::Cos, Line::Cos),
            (Line::SinFace, Line::SinCell),
            (Line::SinCell, Line::SinFace),
        ] {
            let mut b = Basis2d::new(&g, bx, by);
            let x = random(b.cols * b.rows, 7);
            let mut y = x.clone();
            b.apply_symbol(&mut y, |_| 1.0);
            let err = x
                .iter()
                .zip(&y)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-13, "{bx:?}/{by:?}: {err}");
        }
    }

    #[test]
    fn symbol_lambda_reproduces_the_stencil() {
        let g = Grid::new(16, 12, 1.0, 1.5).unwrap();
        for (bx, by) in [
            (Line::Cos, Line::Cos),
            (Line::SinFace, Line::SinCell),
            (Line::SinCell, Line::SinFace),
        ] {
            let mut b = Basis2d::new(&g, bx, by);
            let x = random(b.cols * b.rows, 11);
            let mut y = x.clone();
            b.apply_symbol(&mut y, |lam| lam);
            let expect = neg_lap(&x, b.cols, b.rows, bx, by, g.hx, g.hy);
            let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = y
                .iter()
                .zip(&expect)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-12 * scale, "{bx:?}/{by:?}: {err}");
        }
    }

    #[test]
    fn smallest_neumann_eigenvalue() {
        let g = Grid::unit(32).unwrap();
        let b = Basis2d::neumann(&g);
        let expect = 4.0 * 32.0f64.powi(2) * (PI / 64.0).sin().powi(2);
        assert!((b.smallest_nonzero_eigenvalue() - expect).abs() < 1e-10);
    }
}
