use super::{Grid, ScalarField, VectorField};
use crate::error::{NschError, Result};

/// Largest admissible `max |div v|` for velocities fed to transport operators.
pub const DIVERGENCE_TOL: f64 = 1e-10;

/// Five-point Laplacian with mirror ghosts (zero normal flux on every wall).
pub fn laplacian_neumann(f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid;
    f.check_shape(&g)?;
    let mut out = vec![0.0; g.cells()];
    laplacian_into(&g, &f.values, &mut out);
    Ok(ScalarField {
        grid: g,
        values: out,
    })
}

/// Unchecked kernel of [`laplacian_neumann`], writing into `out`.
pub(crate) fn laplacian_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let ix2 = 1.0 / (g.hx * g.hx);
    let iy2 = 1.0 / (g.hy * g.hy);
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let c = f[row + i];
            let mut acc = 0.0;
            if i > 0 {
                acc += (f[row + i - 1] - c) * ix2;
            }
            if i + 1 < nx {
                acc += (f[row + i + 1] - c) * ix2;
            }
            if j > 0 {
                acc += (f[row - nx + i] - c) * iy2;
            }
            if j + 1 < ny {
                acc += (f[row + nx + i] - c) * iy2;
            }
            out[row + i] = acc;
        }
    }
}

/// Face-centered gradient of a cell-centered scalar. Boundary faces are zero,
/// matching the homogeneous Neumann condition.
pub fn gradient_cc(f: &ScalarField) -> Result<VectorField> {
    let g = f.grid;
    f.check_shape(&g)?;
    let mut v = VectorField::zeros(g);
    gradient_into(&g, &f.values, &mut v.u, &mut v.w);
    Ok(v)
}

pub(crate) fn gradient_into(g: &Grid, f: &[f64], u: &mut [f64], w: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    for j in 0..ny {
        u[g.uidx(0, j)] = 0.0;
        u[g.uidx(nx, j)] = 0.0;
        for i in 1..nx {
            u[g.uidx(i, j)] = (f[g.idx(i, j)] - f[g.idx(i - 1, j)]) / g.hx;
        }
    }
    for i in 0..nx {
        w[g.widx(i, 0)] = 0.0;
        w[g.widx(i, ny)] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            w[g.widx(i, j)] = (f[g.idx(i, j)] - f[g.idx(i, j - 1)]) / g.hy;
        }
    }
}

/// Cell-centered divergence of a face field.
pub fn divergence_mac(v: &VectorField) -> Result<ScalarField> {
    let g = v.grid;
    v.check_shape(&g)?;
    let mut out = vec![0.0; g.cells()];
    divergence_into(&g, &v.u, &v.w, &mut out);
    Ok(ScalarField {
        grid: g,
        values: out,
    })
}

pub(crate) fn divergence_into(g: &Grid, u: &[f64], w: &[f64], out: &mut [f64]) {
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[g.idx(i, j)] = (u[g.uidx(i + 1, j)] - u[g.uidx(i, j)]) / g.hx
                + (w[g.widx(i, j + 1)] - w[g.widx(i, j)]) / g.hy;
        }
    }
}

pub(crate) fn check_divergence_free(v: &VectorField) -> Result<()> {
    let div = divergence_mac(v)?;
    let norm = div.max_abs();
    if norm > DIVERGENCE_TOL || !norm.is_finite() {
        return Err(NschError::NotDivergenceFree {
            norm,
            tol: DIVERGENCE_TOL,
        });
    }
    Ok(())
}

/// Conservative transport term `div(v f)` with centered face interpolation of
/// `f`. Boundary fluxes are zero, so the cell sum vanishes to round-off.
pub fn advect_conservative(v: &VectorField, f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid;
    f.check_shape(&g)?;
    v.check_shape(&g)?;
    check_divergence_free(v)?;
    let mut out = vec![0.0; g.cells()];
    advect_into(&g, &v.u, &v.w, &f.values, &mut out);
    Ok(ScalarField {
        grid: g,
        values: out,
    })
}

pub(crate) fn advect_into(g: &Grid, u: &[f64], w: &[f64], f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let flux_x = |i: usize, j: usize| -> f64 {
        if i == 0 || i == nx {
            0.0
        } else {
            u[g.uidx(i, j)] * 0.5 * (f[g.idx(i - 1, j)] + f[g.idx(i, j)])
        }
    };
    let flux_y = |i: usize, j: usize| -> f64 {
        if j == 0 || j == ny {
            0.0
        } else {
            w[g.widx(i, j)] * 0.5 * (f[g.idx(i, j - 1)] + f[g.idx(i, j)])
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            out[g.idx(i, j)] =
                (flux_x(i + 1, j) - flux_x(i, j)) / g.hx + (flux_y(i, j + 1) - flux_y(i, j)) / g.hy;
        }
    }
}

/// Non-conservative stencil `v . grad f` at cell centers (face velocities
/// averaged to the center, centered differences with mirror ghosts). Only used
/// to cross-check [`advect_conservative`].
pub fn advect_nonconservative(v: &VectorField, f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid;
    f.check_shape(&g)?;
    v.check_shape(&g)?;
    let (nx, ny) = (g.nx, g.ny);
    let fv = |i: isize, j: isize| -> f64 {
        let ii = i.clamp(0, nx as isize - 1) as usize;
        let jj = j.clamp(0, ny as isize - 1) as usize;
        f.values[g.idx(ii, jj)]
    };
    let mut out = vec![0.0; g.cells()];
    for j in 0..ny {
        for i in 0..nx {
            let uc = 0.5 * (v.u[g.uidx(i, j)] + v.u[g.uidx(i + 1, j)]);
            let wc = 0.5 * (v.w[g.widx(i, j)] + v.w[g.widx(i, j + 1)]);
            let (ii, jj) = (i as isize, j as isize);
            let fx = (fv(ii + 1, jj) - fv(ii - 1, jj)) / (2.0 * g.hx);
            let fy = (fv(ii, jj + 1) - fv(ii, jj - 1)) / (2.0 * g.hy);
            out[g.idx(i, j)] = uc * fx + wc * fy;
        }
    }
    Ok(ScalarField {
        grid: g,
        values: out,
    })
}
