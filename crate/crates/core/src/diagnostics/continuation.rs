//! Runs at a decreasing sequence of relaxation parameters.

use rayon::prelude::*;

use crate::energy::{
    alpha_field, eval_free_energy, eval_phi_delta, eval_weighted_tv, relaxation_gap_bound, EnergyMode, FieldPair,
};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::model::ModelParams;
use crate::scheme::{run_scheme, SolverOptions, State};

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationRow {
    pub delta: f64,
    pub relaxed_energy: f64,
    pub singular_energy: f64,
    /// `max |θ_Γ − θ(interior neighbour)|` at the final state.
    pub max_jump: f64,
    /// Set when the run at this δ failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationTable {
    pub rows: Vec<ContinuationRow>,
    /// `H`-distance between final θ of rows `k` and `k + 1`; `None` if either failed.
    pub distances: Vec<Option<f64>>,
    /// Same pairs measured in `L²(Ω)` alone.
    pub l2_distances: Vec<Option<f64>>,
}

impl ContinuationTable {
    /// Both distance sequences are complete and strictly decreasing.
    pub fn distances_strictly_decreasing(&self) -> bool {
        let decreasing = |ds: &[Option<f64>]| {
            let d: Option<Vec<f64>> = ds.iter().copied().collect();
            match d {
                Some(d) => d.windows(2).all(|w| w[1] < w[0]),
                None => false,
            }
        };
        decreasing(&self.distances) && decreasing(&self.l2_distances)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "delta,relaxed_energy,singular_energy,max_jump,h_distance_to_next,l2_distance_to_next,error\n",
        );
        let cell = |ds: &[Option<f64>], k: usize| ds.get(k).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
        for (k, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.delta,
                r.relaxed_energy,
                r.singular_energy,
                r.max_jump,
                cell(&self.distances, k),
                cell(&self.l2_distances, k),
                r.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}

fn h_distance(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    mesh.h_mass()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(m, (x, y))| m * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn l2_distance(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    mesh.integrate(&sq).sqrt()
}

fn max_jump(mesh: &Mesh, theta: &FieldPair) -> Result<f64> {
    let inner = mesh.trace_interior(&theta.bulk)?;
    Ok(theta
        .surface_values(mesh)
        .iter()
        .zip(&inner)
        .fold(0.0f64, |m, (g, t)| m.max((g - t).abs())))
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("no deltas given".into()));
    }
    if let Some(d) = deltas.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter(format!("deltas must be positive, found {d}")));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("deltas must be strictly decreasing".into()));
    }
    Ok(())
}

/// Runs `n_steps` from `initial` at every δ, on a pool of `workers` threads.
///
/// A failing run is recorded in its row and does not stop the sweep. Results
/// do not depend on `workers`.
pub fn delta_continuation(
    mesh: &Mesh,
    base: &ModelParams,
    initial: &State,
    deltas: &[f64],
    n_steps: usize,
    opts: &SolverOptions,
    workers: usize,
) -> Result<ContinuationTable> {
    check_deltas(deltas)?;
    let run_one = |&delta: &f64| -> (ContinuationRow, Option<FieldPair>) {
        let params = ModelParams {
            delta,
            ..base.clone()
        };
        let out = run_scheme(mesh, &params, initial, n_steps, opts).and_then(|traj| {
            let last = traj.last();
            let relaxed = eval_free_energy(mesh, &params, &last.eta, &last.theta, EnergyMode::Relaxed)?.total;
            let singular = eval_free_energy(mesh, &params, &last.eta, &last.theta, EnergyMode::Singular)?.total;
            let jump = max_jump(mesh, &last.theta)?;
            Ok((relaxed, singular, jump, last.theta.clone()))
        });
        match out {
            Ok((relaxed_energy, singular_energy, max_jump, theta)) => (
                ContinuationRow {
                    delta,
                    relaxed_energy,
                    singular_energy,
                    max_jump,
                    error: None,
                },
                Some(theta),
            ),
            Err(e) => (
                ContinuationRow {
                    delta,
                    relaxed_energy: f64::NAN,
                    singular_energy: f64::NAN,
                    max_jump: f64::NAN,
                    error: Some(e.to_string()),
                },
                None,
            ),
        }
    };
    let results: Vec<(ContinuationRow, Option<FieldPair>)> = if workers <= 1 {
        deltas.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
        pool.install(|| deltas.par_iter().map(run_one).collect())
    };
    let pairwise = |dist: fn(&Mesh, &[f64], &[f64]) -> f64| -> Vec<Option<f64>> {
        results
            .windows(2)
            .map(|w| match (&w[0].1, &w[1].1) {
                (Some(a), Some(b)) => Some(dist(mesh, &a.bulk, &b.bulk)),
                _ => None,
            })
            .collect()
    };
    let distances = pairwise(h_distance);
    let l2_distances = pairwise(l2_distance);
    Ok(ContinuationTable {
        rows: results.into_iter().map(|(r, _)| r).collect(),
        distances,
        l2_distances,
    })
}

/// Relaxed and singular θ-energies of a fixed state at one δ.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenGap {
    pub delta: f64,
    pub phi_delta: f64,
    pub phi_zero: f64,
    pub gap: f64,
    /// `δ Σ_e w_e β_e + δ²/2 Σ_e w_e (D_eθ)²`.
    pub bound: f64,
}

/// `|Φ_δ − Φ₀|` for a frozen state at each δ, without time stepping.
pub fn frozen_gaps(mesh: &Mesh, params: &ModelParams, state: &State, deltas: &[f64]) -> Result<Vec<FrozenGap>> {
    check_deltas(deltas)?;
    let beta = alpha_field(params, &state.eta.bulk);
    let gamma = state.theta.surface_values(mesh);
    let kg = params.kappa_gamma;
    let phi_zero_tv = eval_weighted_tv(mesh, &beta, &state.theta.bulk, &gamma)?;
    let phi_zero = phi_zero_tv
        + eval_free_energy(mesh, params, &state.eta, &state.theta, EnergyMode::Singular)?.theta_surface_dirichlet;
    deltas
        .iter()
        .map(|&delta| {
            let phi_delta = eval_phi_delta(mesh, delta, &beta, &state.theta, kg)?;
            Ok(FrozenGap {
                delta,
                phi_delta,
                phi_zero,
                gap: (phi_delta - phi_zero).abs(),
                bound: relaxation_gap_bound(mesh, delta, &beta, &state.theta.bulk),
            })
        })
        .collect()
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
    fn single_delta_has_no_distances() {
        let (m, p) = setup();
        let s = crate::initial::two_grain(&m, &p);
        let t = delta_continuation(&m, &p, &s, &[0.05], 2, &SolverOptions::default(), 1).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.distances.is_empty() && t.l2_distances.is_empty());
    }

    #[test]
    fn workers_do_not_change_results() {
        let (m, p) = setup();
        let s = crate::initial::two_grain(&m, &p);
        let d = [0.1, 0.05, 0.025];
        let a = delta_continuation(&m, &p, &s, &d, 3, &SolverOptions::default(), 1).unwrap();
        let b = delta_continuation(&m, &p, &s, &d, 3, &SolverOptions::default(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unordered_deltas() {
        let (m, p) = setup();
        let s = crate::initial::two_grain(&m, &p);
        assert!(delta_continuation(&m, &p, &s, &[0.05, 0.1], 1, &SolverOptions::default(), 1).is_err());
        assert!(delta_continuation(&m, &p, &s, &[0.05, 0.0], 1, &SolverOptions::default(), 1).is_err());
    }

    #[test]
    fn failed_run_is_recorded() {
        let (m, p) = setup();
        let s = crate::initial::two_grain(&m, &p);
        let opts = SolverOptions {
            max_outer: 0,
            ..Default::default()
        };
        let t = delta_continuation(&m, &p, &s, &[0.1, 0.05], 1, &opts, 1).unwrap();
        assert!(t.rows.iter().all(|r| r.error.is_some()));
        assert_eq!(t.distances, vec![None]);
        assert_eq!(t.l2_distances, vec![None]);
    }

    #[test]
    fn frozen_gaps_respect_bound() {
        let (m, p) = setup();
        let s = crate::initial::two_grain(&m, &p);
        for g in frozen_gaps(&m, &p, &s, &[0.1, 0.05, 0.025]).unwrap() {
            assert!(g.gap <= g.bound, "{g:?}");
        }
    }
}
