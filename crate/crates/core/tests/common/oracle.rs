//! Dense reference implementation of one coupled step, assembled entry by
//! entry from the discrete definitions and solved with LU factorizations.
//! Only the array layout is shared with the library.

use nalgebra::{DMatrix, DVector};
use nsch_core::grid::{Grid, ScalarField, VectorField};
use nsch_core::physics::PhysParams;

pub struct Layout {
    pub g: Grid,
    pub nc: usize,
    pub nu: usize,
    pub nw: usize,
}

impl Layout {
    pub fn new(g: Grid) -> Self {
        Self {
            g,
            nc: g.nx * g.ny,
            nu: (g.nx + 1) * g.ny,
            nw: g.nx * (g.ny + 1),
        }
    }
    pub fn c(&self, i: usize, j: usize) -> usize {
        j * self.g.nx + i
    }
    pub fn u(&self, i: usize, j: usize) -> usize {
        j * (self.g.nx + 1) + i
    }
    /// w faces come after the u faces in the stacked face vector.
    pub fn w(&self, i: usize, j: usize) -> usize {
        self.nu + j * self.g.nx + i
    }
    pub fn faces(&self) -> usize {
        self.nu + self.nw
    }
    pub fn interior_face(&self, k: usize) -> bool {
        let g = self.g;
        if k < self.nu {
            let i = k % (g.nx + 1);
            i != 0 && i != g.nx
        } else {
            let j = (k - self.nu) / g.nx;
            j != 0 && j != g.ny
        }
    }
}

/// Faces x cells: differences across interior faces, zero rows on walls.
pub fn gradient(l: &Layout) -> DMatrix<f64> {
    let g = l.g;
    let mut m = DMatrix::zeros(l.faces(), l.nc);
    for j in 0..g.ny {
        for i in 1..g.nx {
            m[(l.u(i, j), l.c(i, j))] += 1.0 / g.hx;
            m[(l.u(i, j), l.c(i - 1, j))] -= 1.0 / g.hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            m[(l.w(i, j), l.c(i, j))] += 1.0 / g.hy;
            m[(l.w(i, j), l.c(i, j - 1))] -= 1.0 / g.hy;
        }
    }
    m
}

/// Cells x faces.
pub fn divergence(l: &Layout) -> DMatrix<f64> {
    let g = l.g;
    let mut m = DMatrix::zeros(l.nc, l.faces());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = l.c(i, j);
            m[(c, l.u(i + 1, j))] += 1.0 / g.hx;
            m[(c, l.u(i, j))] -= 1.0 / g.hx;
            m[(c, l.w(i, j + 1))] += 1.0 / g.hy;
            m[(c, l.w(i, j))] -= 1.0 / g.hy;
        }
    }
    m
}

pub fn laplacian(l: &Layout) -> DMatrix<f64> {
    divergence(l) * gradient(l)
}

/// Cells x cells matrix of `f -> div(v f)` with face-averaged `f`.
pub fn advection(l: &Layout, v: &DVector<f64>) -> DMatrix<f64> {
    let g = l.g;
    let mut m = DMatrix::zeros(l.nc, l.nc);
    for j in 0..g.ny {
        for i in 1..g.nx {
            let flux = v[l.u(i, j)] * 0.5 / g.hx;
            for src in [l.c(i - 1, j), l.c(i, j)] {
                m[(l.c(i, j), src)] -= flux;
                m[(l.c(i - 1, j), src)] += flux;
            }
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let flux = v[l.w(i, j)] * 0.5 / g.hy;
            for src in [l.c(i, j - 1), l.c(i, j)] {
                m[(l.c(i, j), src)] -= flux;
                m[(l.c(i, j - 1), src)] += flux;
            }
        }
    }
    m
}

pub fn viscosity_law(r: f64, p: &PhysParams) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    0.5 * (p.eta1 * (1.0 + r) + p.eta2 * (1.0 - r))
}

/// Matrix `A` of the viscous operator on the stacked faces, defined by
/// `(A v, v) = sum_cells 2 eta |e_nn|^2 + sum_nodes wt eta |shear|^2` with
/// odd reflection of the tangential velocity across the walls.
pub fn viscous(l: &Layout, phi: &DVector<f64>, p: &PhysParams) -> DMatrix<f64> {
    let g = l.g;
    let area = g.hx * g.hy;
    let nf = l.faces();
    let mut h = DMatrix::zeros(nf, nf);
    let mut add_square = |row: &[(usize, f64)], weight: f64| {
        for &(a, ca) in row {
            for &(b, cb) in row {
                h[(a, b)] += weight * ca * cb;
            }
        }
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            let eta = viscosity_law(phi[l.c(i, j)], p);
            let exx = [(l.u(i + 1, j), 1.0 / g.hx), (l.u(i, j), -1.0 / g.hx)];
            let eyy = [(l.w(i, j + 1), 1.0 / g.hy), (l.w(i, j), -1.0 / g.hy)];
            add_square(&exx, 2.0 * eta * area);
            add_square(&eyy, 2.0 * eta * area);
        }
    }
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let mut shear: Vec<(usize, f64)> = Vec::new();
            if i != 0 && i != g.nx {
                // du/dy with the ghost -u below/above the wall
                match j {
                    0 => shear.push((l.u(i, 0), 2.0 / g.hy)),
                    _ if j == g.ny => shear.push((l.u(i, g.ny - 1), -2.0 / g.hy)),
                    _ => {
                        shear.push((l.u(i, j), 1.0 / g.hy));
                        shear.push((l.u(i, j - 1), -1.0 / g.hy));
                    }
                }
            }
            if j != 0 && j != g.ny {
                match i {
                    0 => shear.push((l.w(0, j), 2.0 / g.hx)),
                    _ if i == g.nx => shear.push((l.w(g.nx - 1, j), -2.0 / g.hx)),
                    _ => {
                        shear.push((l.w(i, j), 1.0 / g.hx));
                        shear.push((l.w(i - 1, j), -1.0 / g.hx));
                    }
                }
            }
            if shear.is_empty() {
                continue;
            }
            let mut avg = 0.0;
            let mut cnt = 0.0;
            for jj in j.saturating_sub(1)..(j + 1).min(g.ny) {
                for ii in i.saturating_sub(1)..(i + 1).min(g.nx) {
                    avg += phi[l.c(ii, jj)];
                    cnt += 1.0;
                }
            }
            let eta = viscosity_law(avg / cnt, p);
            let wx = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
            let wy = if j == 0 || j == g.ny { 0.5 } else { 1.0 };
            add_square(&shear, wx * wy * area * eta);
        }
    }
    h / area
}

/// `div(v v)` on interior faces with centered averages.
pub fn momentum_advection(l: &Layout, v: &DVector<f64>) -> DVector<f64> {
    let g = l.g;
    let u = |i: usize, j: usize| v[l.u(i, j)];
    let w = |i: usize, j: usize| v[l.w(i, j)];
    let u_node = |i: usize, j: usize| {
        if j == 0 || j == g.ny {
            0.0
        } else {
            0.5 * (u(i, j - 1) + u(i, j))
        }
    };
    let w_node = |i: usize, j: usize| {
        if i == 0 || i == g.nx {
            0.0
        } else {
            0.5 * (w(i - 1, j) + w(i, j))
        }
    };
    let mut out = DVector::zeros(l.faces());
    for j in 0..g.ny {
        for i in 1..g.nx {
            let east = 0.5 * (u(i, j) + u(i + 1, j));
            let west = 0.5 * (u(i - 1, j) + u(i, j));
            out[l.u(i, j)] = (east * east - west * west) / g.hx
                + (u_node(i, j + 1) * w_node(i, j + 1) - u_node(i, j) * w_node(i, j)) / g.hy;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let north = 0.5 * (w(i, j) + w(i, j + 1));
            let south = 0.5 * (w(i, j - 1) + w(i, j));
            out[l.w(i, j)] = (u_node(i + 1, j) * w_node(i + 1, j) - u_node(i, j) * w_node(i, j))
                / g.hx
                + (north * north - south * south) / g.hy;
        }
    }
    out
}

pub fn scalar(f: &ScalarField) -> DVector<f64> {
    DVector::from_column_slice(&f.values)
}

pub fn faces(v: &VectorField) -> DVector<f64> {
    DVector::from_iterator(v.u.len() + v.w.len(), v.u.iter().chain(&v.w).cloned())
}

pub fn to_vector_field(l: &Layout, x: &DVector<f64>) -> VectorField {
    VectorField::from_values(
        l.g,
        x.rows(0, l.nu).iter().cloned().collect(),
        x.rows(l.nu, l.nw).iter().cloned().collect(),
    )
    .unwrap()
}

pub fn to_scalar(l: &Layout, x: &DVector<f64>) -> ScalarField {
    ScalarField::from_values(l.g, x.iter().cloned().collect()).unwrap()
}

/// Reference Newton on the full `(phi, mu)` system with exact Jacobian.
pub fn ch_step(
    l: &Layout,
    phi_n: &DVector<f64>,
    sigma_n: &DVector<f64>,
    v_n: &DVector<f64>,
    p: &PhysParams,
    tau: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = l.nc;
    let lap = laplacian(l);
    let transport = advection(l, v_n) * phi_n;
    let c1 = 1.0 + p.alpha * tau;
    let mut phi = phi_n.clone();
    let mut mu = DVector::zeros(n);
    for _ in 0..60 {
        let r1 = &phi * c1 - &lap * &mu * tau - phi_n + &transport * tau
            - DVector::from_element(n, p.alpha * tau * p.c0);
        let r2 = &mu - phi.map(|r| p.a * p.theta * r.atanh())
            + phi_n * (p.a * p.theta0)
            + &lap * &phi * p.b
            + sigma_n * p.chi;
        let res = r1.amax().max(r2.amax());
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            jac[(k, k)] = c1;
            jac[(n + k, n + k)] = 1.0;
            jac[(n + k, k)] = -p.a * p.theta / (1.0 - phi[k] * phi[k]);
        }
        jac.view_mut((0, n), (n, n)).copy_from(&(&lap * -tau));
        let mut b = jac.view((n, 0), (n, n)).clone_owned();
        b += &lap * p.b;
        jac.view_mut((n, 0), (n, n)).copy_from(&b);
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, n).copy_from(&r1);
        rhs.rows_mut(n, n).copy_from(&r2);
        let dx = jac.lu().solve(&rhs).expect("singular Newton matrix");
        phi -= dx.rows(0, n);
        mu -= dx.rows(n, n);
        if res < 1e-14 {
            break;
        }
    }
    (phi, mu)
}

pub fn sigma_step(
    l: &Layout,
    sigma_n: &DVector<f64>,
    phi_next: &DVector<f64>,
    v_n: &DVector<f64>,
    p: &PhysParams,
    tau: f64,
) -> DVector<f64> {
    let lap = laplacian(l);
    let m = DMatrix::identity(l.nc, l.nc) / tau - &lap;
    let rhs = sigma_n / tau - advection(l, v_n) * sigma_n - &lap * phi_next * p.chi;
    m.lu().solve(&rhs).expect("singular nutrient matrix")
}

/// `(mu + chi sigma) grad phi` with the prefactor averaged to faces.
pub fn force(
    l: &Layout,
    phi: &DVector<f64>,
    mu: &DVector<f64>,
    sigma: &DVector<f64>,
    p: &PhysParams,
) -> DVector<f64> {
    let g = l.g;
    let pref = mu + sigma * p.chi;
    let mut f = gradient(l) * phi;
    for j in 0..g.ny {
        for i in 1..g.nx {
            f[l.u(i, j)] *= 0.5 * (pref[l.c(i - 1, j)] + pref[l.c(i, j)]);
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            f[l.w(i, j)] *= 0.5 * (pref[l.c(i, j - 1)] + pref[l.c(i, j)]);
        }
    }
    f
}

/// Pure-Neumann Poisson solve with the mean fixed to zero.
pub fn neumann_poisson(l: &Layout, rhs: &DVector<f64>) -> DVector<f64> {
    let n = l.nc;
    let m = laplacian(l) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let x = m.lu().solve(rhs).expect("singular Poisson matrix");
    let mean = x.mean();
    x.map(|v| v - mean)
}

/// Implicit viscous predictor with the old pressure, then projection.
#[allow(clippy::too_many_arguments)]
pub fn ns_step(
    l: &Layout,
    v_n: &DVector<f64>,
    p_n: &DVector<f64>,
    phi_next: &DVector<f64>,
    mu_next: &DVector<f64>,
    sigma_next: &DVector<f64>,
    p: &PhysParams,
    tau: f64,
) -> (DVector<f64>, DVector<f64>) {
    let inner: Vec<usize> = (0..l.faces()).filter(|&k| l.interior_face(k)).collect();
    let a = viscous(l, phi_next, p);
    let rhs = v_n / tau - momentum_advection(l, v_n) - gradient(l) * p_n
        + force(l, phi_next, mu_next, sigma_next, p);
    let k = inner.len();
    let mut m = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for (r, &fr) in inner.iter().enumerate() {
        b[r] = rhs[fr];
        for (c, &fc) in inner.iter().enumerate() {
            m[(r, c)] = a[(fr, fc)];
        }
        m[(r, r)] += 1.0 / tau;
    }
    let xs = m.lu().solve(&b).expect("singular momentum matrix");
    let mut star = DVector::zeros(l.faces());
    for (r, &fr) in inner.iter().enumerate() {
        star[fr] = xs[r];
    }
    let psi = neumann_poisson(l, &(divergence(l) * &star / tau));
    let v = star - gradient(l) * &psi * tau;
    let pn = p_n + psi;
    let mean = pn.mean();
    (v, pn.map(|x| x - mean))
}

pub struct OracleStep {
    pub phi: DVector<f64>,
    pub mu: DVector<f64>,
    pub sigma: DVector<f64>,
    pub v: DVector<f64>,
    pub p: DVector<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn coupled_step(
    l: &Layout,
    phi_n: &DVector<f64>,
    sigma_n: &DVector<f64>,
    v_n: &DVector<f64>,
    p_n: &DVector<f64>,
    p: &PhysParams,
    tau: f64,
) -> OracleStep {
    let (phi, mu) = ch_step(l, phi_n, sigma_n, v_n, p, tau);
    let sigma = sigma_step(l, sigma_n, &phi, v_n, p, tau);
    let (v, pr) = ns_step(l, v_n, p_n, &phi, &mu, &sigma, p, tau);
    OracleStep {
        phi,
        mu,
        sigma,
        v,
        p: pr,
    }
}
