//! Sparse SPD operators of the form `diag + Σ_e c_e (δ_e)(δ_e)ᵀ`, where each
//! `δ_e` is the difference of two node indicators, and solvers for them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Conjugate gradients with Jacobi preconditioning.
    Cg,
    /// Dense Cholesky; intended for small meshes only.
    Dense,
}

/// Weighted graph Laplacian plus diagonal, acting on node vectors.
#[derive(Clone, Debug)]
pub(crate) struct GraphOperator {
    diag: Vec<f64>,
    /// `(tail, head, coefficient)` per coupling.
    links: Vec<(usize, usize, f64)>,
}

impl GraphOperator {
    pub fn new(diag: Vec<f64>) -> Self {
        Self {
            diag,
            links: Vec::new(),
        }
    }

    /// Bulk edges, with `coef[e]` multiplying `w_e (D_e u)(D_e v)`.
    pub fn add_bulk_edges(&mut self, mesh: &Mesh, coef: impl Fn(usize) -> f64) {
        for (k, e) in mesh.edges().iter().enumerate() {
            let c = coef(k) * e.weight * e.inv_len * e.inv_len;
            self.links.push((e.tail, e.head, c));
        }
    }

    /// Surface edges with a uniform coefficient, mapped back to node indices.
    pub fn add_surface_edges(&mut self, mesh: &Mesh, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let b = mesh.boundary();
        for e in mesh.surface_edges() {
            let c = coef * e.weight * e.inv_len * e.inv_len;
            self.links.push((b[e.tail].node, b[e.head].node, c));
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = d * xi;
        }
        for &(t, h, c) in &self.links {
            let f = c * (x[h] - x[t]);
            y[h] += f;
            y[t] -= f;
        }
    }

    fn jacobi(&self) -> Vec<f64> {
        let mut d = self.diag.clone();
        for &(t, h, c) in &self.links {
            d[t] += c;
            d[h] += c;
        }
        d.iter().map(|v| 1.0 / v).collect()
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag));
        for &(t, h, c) in &self.links {
            a[(t, t)] += c;
            a[(h, h)] += c;
            a[(t, h)] -= c;
            a[(h, t)] -= c;
        }
        debug_assert_eq!(a.nrows(), n);
        a
    }

    /// Solves `A x = b`; returns the number of linear iterations (1 for dense).
    pub fn solve(
        &self,
        b: &[f64],
        x: &mut [f64],
        solver: LinearSolver,
        rel_tol: f64,
        max_iter: usize,
    ) -> Option<usize> {
        match solver {
            LinearSolver::Cg => pcg(self, b, x, rel_tol, max_iter),
            LinearSolver::Dense => {
                let chol = self.dense().cholesky()?;
                let sol = chol.solve(&DVector::from_column_slice(b));
                x.copy_from_slice(sol.as_slice());
                Some(1)
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG from the initial guess in `x`. Stops when
/// `‖r‖₂ ≤ rel_tol·‖b‖₂`. Returns `None` when `max_iter` is exhausted.
fn pcg(a: &GraphOperator, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Option<usize> {
    let n = a.len();
    let minv = a.jacobi();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Some(0);
    }
    let target = rel_tol * bnorm;
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= target {
            return Some(it);
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if dot(&r, &r).sqrt() <= target {
        Some(max_iter)
    } else {
        None
    }
}
