//! Krylov solvers and the scalar Neumann Helmholtz solve built on them.

use super::ops::laplacian_into;
use super::spectral::Basis2d;
use super::{dot, Grid, ScalarField};
use crate::error::{NschError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// Exact inverse of the constant-coefficient operator via fast transforms.
    Spectral,
    /// Diagonal scaling.
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative residual target `|r| / |f|`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * (nx + ny)`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Spectral,
        }
    }
}

impl SolverSettings {
    pub fn cap(&self, grid: &Grid) -> usize {
        self.max_iter.unwrap_or(10 * (grid.nx + grid.ny))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator. `x` holds the initial guess on entry.
pub(crate) fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    solver: &'static str,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    apply(x, &mut q);
    for k in 0..n {
        r[k] = b[k] - q[k];
    }
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok(KrylovOutcome {
            iterations: 0,
            residual: res,
        });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&d, &mut q);
        let dq = dot(&d, &q);
        if !(dq > 0.0) {
            break;
        }
        let step = rz / dq;
        for k in 0..n {
            x[k] += step * d[k];
            r[k] -= step * q[k];
        }
        res = norm(&r) / bnorm;
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok(KrylovOutcome {
                iterations: it,
                residual: res,
            });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            d[k] = z[k] + beta * d[k];
        }
    }
    Err(NschError::NotConverged {
        solver,
        iterations: max_iter,
        residual: res,
    })
}

/// Restarted GMRES with right preconditioning. `x` holds the initial guess.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gmres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
    solver: &'static str,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = restart.max(1);
    let mut basis: Vec<Vec<f64>> = (0..=m).map(|_| vec![0.0; n]).collect();
    let mut h = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn, mut g) = (vec![0.0; m], vec![0.0; m], vec![0.0; m + 1]);
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut total = 0;
    let mut res;
    loop {
        apply(x, &mut w);
        for k in 0..n {
            basis[0][k] = b[k] - w[k];
        }
        let beta = norm(&basis[0]);
        res = beta / bnorm;
        if res <= tol {
            return Ok(KrylovOutcome {
                iterations: total,
                residual: res,
            });
        }
        if total >= max_iter || !res.is_finite() {
            break;
        }
        basis[0].iter_mut().for_each(|v| *v /= beta);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            precond(&basis[j], &mut z);
            apply(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                h[i][j] = hij;
                for k in 0..n {
                    w[k] -= hij * basis[i][k];
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            if hn > 0.0 {
                for k in 0..n {
                    basis[j + 1][k] = w[k] / hn;
                }
            }
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let r = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / r;
            sn[j] = h[j + 1][j] / r;
            h[j][j] = r;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            res = g[j + 1].abs() / bnorm;
            if res <= tol || hn == 0.0 || total >= max_iter {
                break;
            }
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (i, yi) in y.iter().enumerate() {
            for k in 0..n {
                w[k] += yi * basis[i][k];
            }
        }
        precond(&w, &mut z);
        for k in 0..n {
            x[k] += z[k];
        }
    }
    Err(NschError::NotConverged {
        solver,
        iterations: total,
        residual: res,
    })
}

/// Solves `a u - b Lap u = f` with homogeneous Neumann walls.
pub fn solve_helmholtz_neumann(a: f64, b: f64, f: &ScalarField) -> Result<ScalarField> {
    solve_helmholtz_neumann_with(a, b, f, &SolverSettings::default()).map(|(u, _)| u)
}

/// [`solve_helmholtz_neumann`] with explicit settings, also reporting the
/// iteration count and final relative residual.
pub fn solve_helmholtz_neumann_with(
    a: f64,
    b: f64,
    f: &ScalarField,
    settings: &SolverSettings,
) -> Result<(ScalarField, KrylovOutcome)> {
    let g = f.grid;
    f.check_shape(&g)?;
    if !(a >= 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(NschError::InvalidParameter(format!(
            "Helmholtz coefficients need a >= 0 and b > 0, got a = {a}, b = {b}"
        )));
    }
    if !f.is_finite() {
        return Err(NschError::NonFinite("Helmholtz right-hand side"));
    }
    let mut rhs = f.values.clone();
    let pure_neumann = a == 0.0;
    if pure_neumann {
        let mean = f.mean();
        let rms = f.l2() / g.area().sqrt();
        if mean.abs() > 1e-10 * rms.max(1.0) {
            return Err(NschError::Incompatible { mean });
        }
        rhs.iter_mut().for_each(|v| *v -= mean);
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        laplacian_into(&g, x, out);
        for k in 0..x.len() {
            out[k] = a * x[k] - b * out[k];
        }
    };
    let mut x = vec![0.0; g.cells()];
    let cap = settings.cap(&g);
    let outcome = match settings.preconditioner {
        Preconditioner::Spectral => {
            let mut basis = Basis2d::neumann(&g);
            let precond = |r: &[f64], z: &mut [f64]| {
                z.copy_from_slice(r);
                basis.apply_symbol(z, |lam| {
                    let d = a + b * lam;
                    if d > 0.0 {
                        1.0 / d
                    } else {
                        0.0
                    }
                });
            };
            pcg(
                apply,
                precond,
                &rhs,
                &mut x,
                settings.tol,
                cap,
                "Helmholtz PCG",
            )?
        }
        Preconditioner::Jacobi => {
            let diag = neumann_diagonal(&g, a, b);
            let precond = |r: &[f64], z: &mut [f64]| {
                for k in 0..r.len() {
                    z[k] = r[k] / diag[k];
                }
            };
            pcg(
                apply,
                precond,
                &rhs,
                &mut x,
                settings.tol,
                cap,
                "Helmholtz PCG",
            )?
        }
        Preconditioner::None => {
            let precond = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
            pcg(
                apply,
                precond,
                &rhs,
                &mut x,
                settings.tol,
                cap,
                "Helmholtz CG",
            )?
        }
    };
    if pure_neumann {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= m);
    }
    Ok((ScalarField { grid: g, values: x }, outcome))
}

fn neumann_diagonal(g: &Grid, a: f64, b: f64) -> Vec<f64> {
    let (ix2, iy2) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let mut d = Vec::with_capacity(g.cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let nxn = (i > 0) as u8 + (i + 1 < g.nx) as u8;
            let nyn = (j > 0) as u8 + (j + 1 < g.ny) as u8;
            let lap = nxn as f64 * ix2 + nyn as f64 * iy2;
            d.push(a + b * lap);
        }
    }
    d
}
