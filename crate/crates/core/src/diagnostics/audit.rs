//! Energy-dissipation and bound audits over a computed trajectory.

use crate::energy::{eval_free_energy, EnergyMode};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::model::ModelParams;
use crate::scheme::{dissipation_terms, Trajectory};

/// One step of the discrete energy inequality
/// `diss_eta + diss_theta + F(new) ≤ F(old)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub step: usize,
    pub diss_eta: f64,
    pub diss_theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; negative values are violations.
    pub slack: f64,
}

pub const SLACK_FACTOR: f64 = 1e-8;

/// Admissible negative slack: `1e-8 · (1 + F₀)`.
pub fn slack_tolerance(f0: f64) -> f64 {
    SLACK_FACTOR * (1.0 + f0)
}

/// Recomputes the relaxed energy of every state and the dissipation of every step.
pub fn audit_dissipation(traj: &Trajectory, mesh: &Mesh, params: &ModelParams) -> Result<Vec<AuditRow>> {
    let mut energies = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        energies.push(eval_free_energy(mesh, params, &s.eta, &s.theta, EnergyMode::Relaxed)?.total);
    }
    let rows = traj
        .states
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (diss_eta, diss_theta) = dissipation_terms(mesh, params, &w[0], &w[1]);
            let lhs = diss_eta + diss_theta + energies[k + 1];
            let rhs = energies[k];
            AuditRow {
                step: k + 1,
                diss_eta,
                diss_theta,
                lhs,
                rhs,
                slack: rhs - lhs,
            }
        })
        .collect();
    Ok(rows)
}

/// Steps whose slack falls below `−slack_tolerance(f0)`.
pub fn dissipation_violations(rows: &[AuditRow], f0: f64) -> Vec<usize> {
    let tol = slack_tolerance(f0);
    rows.iter().filter(|r| r.slack < -tol).map(|r| r.step).collect()
}

/// Largest excursions outside `[0, 1]` for η and `[r0, r1]` for θ.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundsReport {
    pub eta_below: f64,
    pub eta_above: f64,
    pub theta_below: f64,
    pub theta_above: f64,
    /// Step attaining the largest excursion.
    pub worst_step: usize,
}

impl BoundsReport {
    pub fn max_excursion(&self) -> f64 {
        self.eta_below.max(self.eta_above).max(self.theta_below).max(self.theta_above)
    }
}

pub fn audit_bounds(traj: &Trajectory, r0: f64, r1: f64) -> BoundsReport {
    let mut rep = BoundsReport::default();
    let mut worst = 0.0;
    for s in &traj.states {
        let eb = (0.0 - s.eta.min()).max(0.0);
        let ea = (s.eta.max() - 1.0).max(0.0);
        let tb = (r0 - s.theta.min()).max(0.0);
        let ta = (s.theta.max() - r1).max(0.0);
        rep.eta_below = rep.eta_below.max(eb);
        rep.eta_above = rep.eta_above.max(ea);
        rep.theta_below = rep.theta_below.max(tb);
        rep.theta_above = rep.theta_above.max(ta);
        let m = eb.max(ea).max(tb).max(ta);
        if m > worst {
            worst = m;
            rep.worst_step = s.step_index;
        }
    }
    rep
}
