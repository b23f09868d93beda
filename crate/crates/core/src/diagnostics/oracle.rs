//! Brute-force reference solver for a single step on tiny meshes.
//!
//! The grid is rebuilt here from `MeshSpec` alone and the objectives are
//! re-derived. Every Newton system is assembled and factored densely.
//! Only the model functions are shared with the production path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::FieldPair;
use crate::error::{Error, Result};
use crate::mesh::{Geometry, Mesh, MeshSpec};
use crate::model::ModelParams;

/// Largest node count the oracle accepts.
pub const MAX_ORACLE_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSelector {
    Theta,
    Eta,
}

struct Link {
    a: usize,
    b: usize,
    /// Quadrature weight divided by squared length.
    c: f64,
    weight: f64,
    len: f64,
}

struct Grid {
    vol: Vec<f64>,
    /// Surface measure per node (zero off the boundary).
    area: Vec<f64>,
    bulk: Vec<Link>,
    surf: Vec<Link>,
}

fn link(a: usize, b: usize, weight: f64, len: f64) -> Link {
    Link {
        a,
        b,
        c: weight / (len * len),
        weight,
        len,
    }
}

fn grid(spec: &MeshSpec) -> Grid {
    match spec.geometry {
        Geometry::Interval => {
            let n = spec.nx;
            let h = spec.lx / (n - 1) as f64;
            let mut vol = vec![h; n];
            vol[0] = h / 2.0;
            vol[n - 1] = h / 2.0;
            let mut area = vec![0.0; n];
            area[0] = 1.0;
            area[n - 1] = 1.0;
            Grid {
                vol,
                area,
                bulk: (1..n).map(|k| link(k - 1, k, h, h)).collect(),
                surf: Vec::new(),
            }
        }
        Geometry::PeriodicStrip => {
            let (nx, ny) = (spec.nx, spec.ny);
            let hx = spec.lx / nx as f64;
            let hy = spec.ly / (ny - 1) as f64;
            let at = |i: usize, j: usize| i + nx * j;
            let edge_row = |j: usize| j == 0 || j + 1 == ny;
            let mut vol = vec![0.0; nx * ny];
            let mut area = vec![0.0; nx * ny];
            let mut bulk = Vec::new();
            let mut surf = Vec::new();
            for j in 0..ny {
                let s = if edge_row(j) { 0.5 } else { 1.0 };
                for i in 0..nx {
                    vol[at(i, j)] = s * hx * hy;
                    bulk.push(link(at(i, j), at((i + 1) % nx, j), s * hx * hy, hx));
                    if j + 1 < ny {
                        bulk.push(link(at(i, j), at(i, j + 1), hx * hy, hy));
                    }
                    if edge_row(j) {
                        area[at(i, j)] = hx;
                        surf.push(link(at(i, j), at((i + 1) % nx, j), hx, hx));
                    }
                }
            }
            Grid { vol, area, bulk, surf }
        }
    }
}

fn relaxed(delta: f64, a: f64) -> (f64, f64, f64) {
    let r = (delta * delta + a * a).sqrt();
    (r - delta, a / r, delta * delta / (r * r * r))
}

struct Problem<'a> {
    grid: Grid,
    params: &'a ModelParams,
    selector: OracleSelector,
    prev: Vec<f64>,
    /// Node weight of the proximity term (already divided by τ).
    prox: Vec<f64>,
    /// θ-problem: α(η̄) averaged per bulk link. η-problem: f_δ(Dθ) per bulk link.
    per_link: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(
        spec: &MeshSpec,
        params: &'a ModelParams,
        selector: OracleSelector,
        eta_prev: &[f64],
        theta: &[f64],
    ) -> Self {
        let grid = grid(spec);
        let n = grid.vol.len();
        let tau = params.tau;
        let (prev, prox, per_link) = match selector {
            OracleSelector::Theta => {
                let prox = (0..n)
                    .map(|k| {
                        (grid.vol[k] * params.alpha0.value(eta_prev[k])
                            + grid.area[k] * params.alpha_gamma0.value(eta_prev[k]))
                            / tau
                    })
                    .collect();
                let beta = grid
                    .bulk
                    .iter()
                    .map(|l| (params.alpha.value(eta_prev[l.a]) + params.alpha.value(eta_prev[l.b])) / 2.0)
                    .collect();
                (theta.to_vec(), prox, beta)
            }
            OracleSelector::Eta => {
                let prox = (0..n).map(|k| (grid.vol[k] + grid.area[k]) / tau).collect();
                let len = grid
                    .bulk
                    .iter()
                    .map(|l| relaxed(params.delta, (theta[l.b] - theta[l.a]) / l.len).0)
                    .collect();
                (eta_prev.to_vec(), prox, len)
            }
        };
        Self {
            grid,
            params,
            selector,
            prev,
            prox,
            per_link,
        }
    }

    fn n(&self) -> usize {
        self.prev.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let p = self.params;
        let mut v = 0.0;
        for k in 0..self.n() {
            v += 0.5 * self.prox[k] * (x[k] - self.prev[k]).powi(2);
        }
        match self.selector {
            OracleSelector::Theta => {
                for (l, beta) in self.grid.bulk.iter().zip(&self.per_link) {
                    let a = (x[l.b] - x[l.a]) / l.len;
                    v += l.weight * (beta * relaxed(p.delta, a).0 + 0.5 * p.delta * p.delta * a * a);
                }
                for l in &self.grid.surf {
                    v += 0.5 * p.kappa_gamma * p.kappa_gamma * l.c * (x[l.b] - x[l.a]).powi(2);
                }
            }
            OracleSelector::Eta => {
                for (l, f) in self.grid.bulk.iter().zip(&self.per_link) {
                    v += 0.5 * p.kappa * p.kappa * l.c * (x[l.b] - x[l.a]).powi(2);
                    v += l.weight * f * (p.alpha.value(x[l.a]) + p.alpha.value(x[l.b])) / 2.0;
                }
                for l in &self.grid.surf {
                    v += 0.5 * p.epsilon * p.epsilon * l.c * (x[l.b] - x[l.a]).powi(2);
                }
                for k in 0..self.n() {
                    v += self.grid.vol[k] * p.g.primitive(x[k]) + self.grid.area[k] * p.g_gamma.primitive(x[k]);
                }
            }
        }
        v
    }

    fn gradient_hessian(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.params;
        let n = self.n();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            g[k] += self.prox[k] * (x[k] - self.prev[k]);
            h[(k, k)] += self.prox[k];
        }
        match self.selector {
            OracleSelector::Theta => {
                let d2 = p.delta * p.delta;
                for (l, beta) in self.grid.bulk.iter().zip(&self.per_link) {
                    let a = (x[l.b] - x[l.a]) / l.len;
                    let (_, d1, dd) = relaxed(p.delta, a);
                    couple(&mut g, &mut h, l.a, l.b, l.weight / l.len * (beta * d1 + d2 * a), l.c * (beta * dd + d2));
                }
                let k2 = p.kappa_gamma * p.kappa_gamma;
                for l in &self.grid.surf {
                    couple(&mut g, &mut h, l.a, l.b, k2 * l.c * (x[l.b] - x[l.a]), k2 * l.c);
                }
            }
            OracleSelector::Eta => {
                let k2 = p.kappa * p.kappa;
                for (l, f) in self.grid.bulk.iter().zip(&self.per_link) {
                    couple(&mut g, &mut h, l.a, l.b, k2 * l.c * (x[l.b] - x[l.a]), k2 * l.c);
                    for k in [l.a, l.b] {
                        let s = l.weight * f / 2.0;
                        g[k] += s * p.alpha.derivative(x[k]);
                        h[(k, k)] += s * p.alpha.second_derivative(x[k]);
                    }
                }
                let e2 = p.epsilon * p.epsilon;
                for l in &self.grid.surf {
                    couple(&mut g, &mut h, l.a, l.b, e2 * l.c * (x[l.b] - x[l.a]), e2 * l.c);
                }
                for k in 0..n {
                    g[k] += self.grid.vol[k] * p.g.value(x[k]) + self.grid.area[k] * p.g_gamma.value(x[k]);
                    h[(k, k)] += self.grid.vol[k] * p.g.derivative(x[k])
                        + self.grid.area[k] * p.g_gamma.derivative(x[k]);
                }
            }
        }
        (g, h)
    }
}

fn couple(g: &mut DVector<f64>, h: &mut DMatrix<f64>, a: usize, b: usize, flux: f64, stiff: f64) {
    g[b] += flux;
    g[a] -= flux;
    h[(a, a)] += stiff;
    h[(b, b)] += stiff;
    h[(a, b)] -= stiff;
    h[(b, a)] -= stiff;
}

fn setup<'a>(
    mesh: &Mesh,
    params: &'a ModelParams,
    selector: OracleSelector,
    eta_prev: &FieldPair,
    theta: &FieldPair,
) -> Result<Problem<'a>> {
    let n = mesh.n_nodes();
    if n > MAX_ORACLE_NODES {
        return Err(Error::Oracle(format!(
            "{n} nodes exceeds the oracle limit of {MAX_ORACLE_NODES}"
        )));
    }
    if eta_prev.bulk.len() != n || theta.bulk.len() != n {
        return Err(Error::Oracle("field sizes do not match the mesh".into()));
    }
    if params.delta <= 0.0 || params.tau <= 0.0 {
        return Err(Error::Oracle("delta and tau must be positive".into()));
    }
    Ok(Problem::new(mesh.spec(), params, selector, &eta_prev.bulk, &theta.bulk))
}

/// Value of the step objective selected by `selector` at `x`.
///
/// For [`OracleSelector::Theta`] the data are `(η_{i−1}, θ_{i−1})`; for
/// [`OracleSelector::Eta`] they are `(η_{i−1}, θ_i)`.
pub fn oracle_objective(
    mesh: &Mesh,
    params: &ModelParams,
    selector: OracleSelector,
    eta_prev: &FieldPair,
    theta: &FieldPair,
    x: &[f64],
) -> Result<f64> {
    let prob = setup(mesh, params, selector, eta_prev, theta)?;
    if x.len() != prob.n() {
        return Err(Error::Oracle("evaluation point has the wrong size".into()));
    }
    Ok(prob.value(x))
}

/// Minimizes the selected step objective by dense Newton with backtracking,
/// to a gradient ∞-norm of `1e-12`.
pub fn oracle_step(
    mesh: &Mesh,
    params: &ModelParams,
    selector: OracleSelector,
    eta_prev: &FieldPair,
    theta: &FieldPair,
) -> Result<FieldPair> {
    const GRAD_TOL: f64 = 1e-12;
    let prob = setup(mesh, params, selector, eta_prev, theta)?;
    let mut x = prob.prev.clone();
    let mut gnorm = f64::INFINITY;
    for _ in 0..10_000 {
        let (g, h) = prob.gradient_hessian(&x);
        gnorm = g.amax();
        if gnorm <= GRAD_TOL {
            return Ok(FieldPair::new(x));
        }
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Oracle("Hessian is not positive definite".into()))?;
        let step = chol.solve(&(-&g));
        let slope = g.dot(&step);
        let f0 = prob.value(&x);
        let mut t = 1.0;
        let mut next = x.clone();
        loop {
            for k in 0..x.len() {
                next[k] = x[k] + t * step[k];
            }
            let f1 = prob.value(&next);
            if f1 <= f0 + 1e-4 * t * slope {
                break;
            }
            // Within rounding of the minimum the decrease is invisible; accept on gradient progress.
            if (f1 - f0).abs() <= 1e-14 * f0.abs().max(1.0) && prob.gradient_hessian(&next).0.amax() < gnorm {
                break;
            }
            t /= 2.0;
            if t < 1e-30 {
                return Err(Error::Oracle(format!("line search stalled at gradient {gnorm:e}")));
            }
        }
        x = next;
    }
    Err(Error::Oracle(format!("no convergence, gradient {gnorm:e}")))
}
