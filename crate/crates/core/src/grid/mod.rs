//! Staggered (MAC) grid on a rectangle `[0, lx] x [0, ly]`.
//!
//! Scalars live at cell centers, indexed `j * nx + i`. The horizontal velocity
//! component `u` lives on vertical faces (`(nx + 1) * ny` values, index
//! `j * (nx + 1) + i`, face `i` at `x = i * hx`); the vertical component `w`
//! lives on horizontal faces (`nx * (ny + 1)` values, index `j * nx + i`).
//! Boundary faces carry the no-slip value 0 for velocities.

mod norms;
pub(crate) mod ops;
pub mod solve;
pub mod spectral;

pub(crate) use norms::h1_semi_sq;
pub use norms::{h1_dual_squared, h2_norm, norms, second_derivative_norm_sq, w23_norm, NormReport};
pub use ops::{
    advect_conservative, advect_nonconservative, divergence_mac, gradient_cc, laplacian_neumann,
    DIVERGENCE_TOL,
};
pub use solve::{
    solve_helmholtz_neumann, solve_helmholtz_neumann_with, KrylovOutcome, Preconditioner,
    SolverSettings,
};

use crate::error::{NschError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(NschError::InvalidGrid(format!(
                "need at least 4 cells per direction, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(NschError::InvalidGrid(format!(
                "lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn u_len(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn w_len(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }

    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn uidx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn widx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index of grid node `(i, j)`, `0 <= i <= nx`, `0 <= j <= ny`.
    #[inline]
    pub fn nidx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Quadrature weight of grid node `(i, j)`, `0 <= i <= nx`, `0 <= j <= ny`.
    /// Nodes on a wall carry half a cell, corners a quarter.
    #[inline]
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        let fx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        let fy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
        fx * fy * self.cell_area()
    }

    /// Same cell counts and spacings (lengths may differ by rounding).
    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if (self.nx, self.ny, self.hx, self.hy) == (other.nx, other.ny, other.hx, other.hy) {
            Ok(())
        } else {
            Err(NschError::GridMismatch {
                expected: self.describe(),
                found: other.describe(),
            })
        }
    }

    pub fn describe(&self) -> String {
        format!("{}x{} on {}x{}", self.nx, self.ny, self.lx, self.ly)
    }
}

/// Cell-centered scalar samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(NschError::ShapeMismatch(format!(
                "scalar field needs {} values, got {}",
                grid.cells(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.xc(i), grid.yc(j)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        grid.ensure_same(&self.grid)?;
        if self.values.len() != grid.cells() {
            return Err(NschError::ShapeMismatch(format!(
                "scalar field holds {} values for a {} grid",
                self.values.len(),
                grid.describe()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Quadrature sum `sum f hx hy`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product `sum f g hx hy`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        dot(&self.values, &other.values) * self.grid.cell_area()
    }

    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Copy with the spatial mean removed.
    pub fn mean_free(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }
}

/// Face-staggered velocity samples.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            u: vec![0.0; grid.u_len()],
            w: vec![0.0; grid.w_len()],
        }
    }

    pub fn from_values(grid: Grid, u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if u.len() != grid.u_len() || w.len() != grid.w_len() {
            return Err(NschError::ShapeMismatch(format!(
                "vector field needs {}+{} values, got {}+{}",
                grid.u_len(),
                grid.w_len(),
                u.len(),
                w.len()
            )));
        }
        Ok(Self { grid, u, w })
    }

    /// Samples `(fu, fw)` at the face midpoints of every interior face; the
    /// boundary faces are left at zero.
    pub fn from_fn_interior(
        grid: Grid,
        fu: impl Fn(f64, f64) -> f64,
        fw: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut v = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 1..grid.nx {
                v.u[grid.uidx(i, j)] = fu(i as f64 * grid.hx, grid.yc(j));
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                v.w[grid.widx(i, j)] = fw(grid.xc(i), j as f64 * grid.hy);
            }
        }
        v
    }

    /// Divergence-free field `u = d(psi)/dy`, `w = -d(psi)/dx` built from a
    /// nodal stream function. `psi` is forced to zero on the boundary nodes so
    /// the result is no-slip in the normal direction and discretely solenoidal.
    pub fn from_stream_function(grid: Grid, psi: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let node = |i: usize, j: usize| -> f64 {
            if i == 0 || j == 0 || i == nx || j == ny {
                0.0
            } else {
                psi(i as f64 * grid.hx, j as f64 * grid.hy)
            }
        };
        let mut v = Self::zeros(grid);
        for j in 0..ny {
            for i in 1..nx {
                v.u[grid.uidx(i, j)] = (node(i, j + 1) - node(i, j)) / grid.hy;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                v.w[grid.widx(i, j)] = -(node(i + 1, j) - node(i, j)) / grid.hx;
            }
        }
        v
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        grid.ensure_same(&self.grid)?;
        if self.u.len() != grid.u_len() || self.w.len() != grid.w_len() {
            return Err(NschError::ShapeMismatch(format!(
                "vector field has {}+{} values for a {} grid",
                self.u.len(),
                self.w.len(),
                grid.describe()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.w).all(|v| v.is_finite())
    }

    /// Largest magnitude stored on a boundary face.
    pub fn boundary_max_abs(&self) -> f64 {
        let g = &self.grid;
        let mut m = 0.0f64;
        for j in 0..g.ny {
            m = m.max(self.u[g.uidx(0, j)].abs());
            m = m.max(self.u[g.uidx(g.nx, j)].abs());
        }
        for i in 0..g.nx {
            m = m.max(self.w[g.widx(i, 0)].abs());
            m = m.max(self.w[g.widx(i, g.ny)].abs());
        }
        m
    }

    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.u[g.uidx(0, j)] = 0.0;
            self.u[g.uidx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.w[g.widx(i, 0)] = 0.0;
            self.w[g.widx(i, g.ny)] = 0.0;
        }
    }

    /// `sum (u u' + w w') hx hy` over all faces.
    pub fn dot(&self, other: &VectorField) -> f64 {
        (dot(&self.u, &other.u) + dot(&self.w, &other.w)) * self.grid.cell_area()
    }

    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.w)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn zip_map(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            u: self
                .u
                .iter()
                .zip(&other.u)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            w: self
                .w
                .iter()
                .zip(&other.w)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &VectorField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            u: self.u.iter().map(|v| c * v).collect(),
            w: self.w.iter().map(|v| c * v).collect(),
        }
    }

    /// Squared gradient norm `sum |grad v|^2` with no-slip ghost values for
    /// tangential derivatives at the walls.
    pub fn grad_norm_sq(&self) -> f64 {
        let g = &self.grid;
        let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
        let mut cells = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let dux = (self.u[g.uidx(i + 1, j)] - self.u[g.uidx(i, j)]) / hx;
                let dwy = (self.w[g.widx(i, j + 1)] - self.w[g.widx(i, j)]) / hy;
                cells += dux * dux + dwy * dwy;
            }
        }
        let mut nodes = 0.0;
        for j in 0..=ny {
            for i in 0..=nx {
                let duy = self.duy_node(i, j);
                let dwx = self.dwx_node(i, j);
                nodes += (duy * duy + dwx * dwx) * g.node_weight(i, j);
            }
        }
        cells * g.cell_area() + nodes
    }

    /// `du/dy` at node `(i, j)`; zero on the vertical walls.
    #[inline]
    pub(crate) fn duy_node(&self, i: usize, j: usize) -> f64 {
        duy_node(&self.grid, &self.u, i, j)
    }

    /// `dw/dx` at node `(i, j)`; zero on the horizontal walls.
    #[inline]
    pub(crate) fn dwx_node(&self, i: usize, j: usize) -> f64 {
        dwx_node(&self.grid, &self.w, i, j)
    }
}

/// `du/dy` at node `(i, j)` with odd ghosts across the horizontal walls.
#[inline]
pub(crate) fn duy_node(g: &Grid, u: &[f64], i: usize, j: usize) -> f64 {
    if i == 0 || i == g.nx {
        return 0.0;
    }
    let below = if j == 0 {
        -u[g.uidx(i, 0)]
    } else {
        u[g.uidx(i, j - 1)]
    };
    let above = if j == g.ny {
        -u[g.uidx(i, g.ny - 1)]
    } else {
        u[g.uidx(i, j)]
    };
    (above - below) / g.hy
}

/// `dw/dx` at node `(i, j)` with odd ghosts across the vertical walls.
#[inline]
pub(crate) fn dwx_node(g: &Grid, w: &[f64], i: usize, j: usize) -> f64 {
    if j == 0 || j == g.ny {
        return 0.0;
    }
    let left = if i == 0 {
        -w[g.widx(0, j)]
    } else {
        w[g.widx(i - 1, j)]
    };
    let right = if i == g.nx {
        -w[g.widx(g.nx - 1, j)]
    } else {
        w[g.widx(i, j)]
    };
    (right - left) / g.hx
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0).is_err());
        let g = Grid::new(8, 4, 2.0, 1.0).unwrap();
        assert_eq!(g.hx, 0.25);
        assert_eq!(g.xc(0), 0.125);
    }

    #[test]
    fn node_weights_tile_the_domain() {
        let g = Grid::new(6, 5, 1.5, 1.0).unwrap();
        let total: f64 = (0..=g.ny)
            .flat_map(|j| (0..=g.nx).map(move |i| (i, j)))
            .map(|(i, j)| g.node_weight(i, j))
            .sum();
        assert!((total - g.area()).abs() < 1e-14);
    }

    #[test]
    fn stream_function_field_is_no_slip_and_solenoidal() {
        let g = Grid::unit(12).unwrap();
        let v = VectorField::from_stream_function(g, |x, y| {
            (std::f64::consts::PI * x).sin().powi(2) * (std::f64::consts::PI * y).sin().powi(2)
        });
        assert_eq!(v.boundary_max_abs(), 0.0);
        let div = divergence_mac(&v).unwrap();
        assert!(div.max_abs() < 1e-12);
    }

    #[test]
    fn shape_checks() {
        let g = Grid::unit(8).unwrap();
        assert!(ScalarField::from_values(g, vec![0.0; 10]).is_err());
        let other = Grid::unit(9).unwrap();
        assert!(ScalarField::zeros(other).check_shape(&g).is_err());
    }
}
