//! Coupled runs for the order-preservation and contraction estimates.
//!
//! A reference trajectory is computed from the first initial state. The
//! second η-sequence is stepped against the reference θ-values, and the
//! second θ-sequence against the reference η-values, so that each pair of
//! single steps shares its frozen coefficients.

use crate::energy::FieldPair;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::model::ModelParams;
use crate::scheme::{a0_mass, check_initial, eta_step, run_scheme, theta_step, SolverOptions, State};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonReport {
    /// `‖[η¹_i − η²_i]⁺‖_H` for `i = 0..=n`.
    pub eta_norms: Vec<f64>,
    /// `‖[θ¹_i − θ²_i]⁺‖_H` for `i = 0..=n`.
    pub theta_norms: Vec<f64>,
    /// `‖A₀(η̃_i)^{1/2}[θ¹_i − θ²_i]⁺‖_H` with `η̃_i` the shared coefficient of step `i`
    /// (entry 0 uses `η̃_1`).
    pub theta_weighted_norms: Vec<f64>,
    /// `‖A₀(η̃_i)^{1/2}[θ¹_{i−1} − θ²_{i−1}]⁺‖_H`, the weighted norm entering step `i` (entry 0 unused).
    pub theta_weighted_before: Vec<f64>,
}

impl ComparisonReport {
    /// Steps `i ≥ 1` where the η norm grew by more than `tol`.
    pub fn eta_increases(&self, tol: f64) -> Vec<usize> {
        (1..self.eta_norms.len())
            .filter(|&i| self.eta_norms[i] > self.eta_norms[i - 1] + tol)
            .collect()
    }

    /// Steps `i ≥ 1` where the weighted θ norm grew by more than `tol` across the step.
    pub fn theta_increases(&self, tol: f64) -> Vec<usize> {
        (1..self.theta_weighted_norms.len())
            .filter(|&i| self.theta_weighted_norms[i] > self.theta_weighted_before[i] + tol)
            .collect()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.eta_increases(tol).is_empty() && self.theta_increases(tol).is_empty()
    }
}

fn positive_part_norm(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| {
            let d = (x - y).max(0.0);
            w * d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn comparison_experiment(
    mesh: &Mesh,
    params: &ModelParams,
    first: &State,
    second: &State,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<ComparisonReport> {
    for (s, which) in [(first, "first"), (second, "second")] {
        if s.eta.bulk.len() != mesh.n_nodes() || s.theta.bulk.len() != mesh.n_nodes() {
            return Err(Error::InvalidPairing(format!("{which} state does not match the mesh")));
        }
    }
    check_initial(mesh, params, second)?;
    let reference = run_scheme(mesh, params, first, n_steps, opts)?;
    let hm = mesh.h_mass();

    let mut eta2 = second.eta.clone();
    let mut theta2 = second.theta.clone();
    let mut rep = ComparisonReport::default();
    let weights0 = a0_mass(mesh, params, &reference.states[0].eta.bulk);
    rep.eta_norms.push(positive_part_norm(&hm, &first.eta.bulk, &eta2.bulk));
    rep.theta_norms.push(positive_part_norm(&hm, &first.theta.bulk, &theta2.bulk));
    rep.theta_weighted_norms
        .push(positive_part_norm(&weights0, &first.theta.bulk, &theta2.bulk));
    rep.theta_weighted_before.push(f64::NAN);

    for i in 1..=n_steps {
        let prev = &reference.states[i - 1];
        let cur = &reference.states[i];
        let shared_eta: &FieldPair = &prev.eta;
        let weights = a0_mass(mesh, params, &shared_eta.bulk);
        let before = positive_part_norm(&weights, &prev.theta.bulk, &theta2.bulk);
        theta2 = theta_step(mesh, params, shared_eta, &theta2, opts)?.0;
        eta2 = eta_step(mesh, params, &eta2, &cur.theta, opts)?.0;

        rep.eta_norms.push(positive_part_norm(&hm, &cur.eta.bulk, &eta2.bulk));
        rep.theta_norms.push(positive_part_norm(&hm, &cur.theta.bulk, &theta2.bulk));
        rep.theta_weighted_before.push(before);
        rep.theta_weighted_norms
            .push(positive_part_norm(&weights, &cur.theta.bulk, &theta2.bulk));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec};

    fn setup() -> (Mesh, ModelParams) {
        let p = ModelParams {
            grid: MeshSpec::strip(8, 5, 1.0, 1.0),
            ..Default::default()
        };
        (build_mesh(&p.grid).unwrap(), p)
    }

    #[test]
    fn identical_data_gives_zero_norms() {
        let (m, p) = setup();
        let s = crate::initial::two_grain(&m, &p);
        let rep = comparison_experiment(&m, &p, &s, &s, 5, &SolverOptions::default()).unwrap();
        assert!(rep.eta_norms.iter().all(|&v| v == 0.0));
        assert!(rep.theta_norms.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ordered_eta_stays_ordered() {
        let (m, p) = setup();
        let a = crate::initial::random(&m, &p, 3);
        let mut b = crate::initial::random(&m, &p, 4);
        for (x, y) in b.eta.bulk.iter_mut().zip(&a.eta.bulk) {
            *x = x.max(*y);
        }
        let rep = comparison_experiment(&m, &p, &a, &b, 10, &SolverOptions::default()).unwrap();
        assert!(rep.eta_norms.iter().all(|&v| v <= 1e-10), "{:?}", rep.eta_norms);
        assert!(rep.passes(1e-10));
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let (m, p) = setup();
        let a = crate::initial::two_grain(&m, &p);
        let b = State::new(FieldPair::new(vec![1.0; 3]), FieldPair::new(vec![0.0; 3]));
        assert!(matches!(
            comparison_experiment(&m, &p, &a, &b, 2, &SolverOptions::default()),
            Err(Error::InvalidPairing(_))
        ));
    }
}
