//! Discrete free energies.
//!
//! Gradients are edge differences, so `f_δ` and `|·|` act on each edge
//! component separately; node-valued weights such as `α(η)` are averaged to
//! edges arithmetically.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::model::{ModelParams, RelaxedNorm};

/// A bulk field whose boundary nodes carry the surface unknown, optionally with
/// a detached surface array (used only for singular-mode evaluation where the
/// transmission condition is broken).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    pub bulk: Vec<f64>,
    pub surface: Option<Vec<f64>>,
}

impl FieldPair {
    pub fn new(bulk: Vec<f64>) -> Self {
        Self {
            bulk,
            surface: None,
        }
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self::new(vec![value; mesh.n_nodes()])
    }

    pub fn with_surface(bulk: Vec<f64>, surface: Vec<f64>) -> Self {
        Self {
            bulk,
            surface: Some(surface),
        }
    }

    /// Surface values: the detached array if present, otherwise the boundary rows.
    pub fn surface_values(&self, mesh: &Mesh) -> Vec<f64> {
        match &self.surface {
            Some(s) => s.clone(),
            None => mesh.boundary().iter().map(|b| self.bulk[b.node]).collect(),
        }
    }

    pub fn check(&self, mesh: &Mesh, what: &'static str) -> Result<()> {
        mesh.check_bulk(&self.bulk, what)?;
        if let Some(s) = &self.surface {
            mesh.check_surface(s, what)?;
        }
        let finite = self.bulk.iter().all(|v| v.is_finite())
            && self.surface.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.bulk
            .iter()
            .chain(self.surface.iter().flatten())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.bulk
            .iter()
            .chain(self.surface.iter().flatten())
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    Relaxed,
    Singular,
}

impl fmt::Display for EnergyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyMode::Relaxed => "relaxed",
            EnergyMode::Singular => "singular",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    /// `κ²/2 ∫|∇η|²`
    pub eta_bulk_dirichlet: f64,
    /// `½∫_Γ|∇_Γ(εη_Γ)|²`
    pub eta_surface_dirichlet: f64,
    /// `∫ĝ(η) + ∫_Γ ĝ_Γ(η_Γ)`
    pub potential_g: f64,
    pub weighted_length: f64,
    /// `κ_Γ²/2 ∫_Γ|∇_Γθ_Γ|²`
    pub theta_surface_dirichlet: f64,
    pub total: f64,
    pub mode: EnergyMode,
}

impl EnergyBreakdown {
    pub const CSV_HEADER: &'static str = "step,t,total,eta_bulk,eta_surf,potential,weighted_len,theta_surf,mode";

    pub fn csv_row(&self, step: usize, t: f64) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            step,
            t,
            self.total,
            self.eta_bulk_dirichlet,
            self.eta_surface_dirichlet,
            self.potential_g,
            self.weighted_length,
            self.theta_surface_dirichlet,
            self.mode
        )
    }

    pub fn components(&self) -> [f64; 5] {
        [
            self.eta_bulk_dirichlet,
            self.eta_surface_dirichlet,
            self.potential_g,
            self.weighted_length,
            self.theta_surface_dirichlet,
        ]
    }
}

/// Arithmetic edge average of a node field.
pub(crate) fn edge_average(mesh: &Mesh, beta: &[f64]) -> Vec<f64> {
    mesh.edges()
        .iter()
        .map(|e| 0.5 * (beta[e.tail] + beta[e.head]))
        .collect()
}

/// Node values of `α(η)`.
pub fn alpha_field(params: &ModelParams, eta: &[f64]) -> Vec<f64> {
    eta.iter().map(|&v| params.alpha.value(v)).collect()
}

fn surface_dirichlet(mesh: &Mesh, u_gamma: &[f64]) -> f64 {
    mesh.surface_edges()
        .iter()
        .map(|e| {
            let d = e.diff(u_gamma);
            0.5 * e.weight * d * d
        })
        .sum()
}

fn bulk_dirichlet(mesh: &Mesh, u: &[f64]) -> f64 {
    mesh.edges()
        .iter()
        .map(|e| {
            let d = e.diff(u);
            0.5 * e.weight * d * d
        })
        .sum()
}

/// `Σ_e w_e [β_e f_δ(D_eθ) + δ²/2 (D_eθ)²] + κ_Γ²/2 Σ_Γ |∇_Γθ_Γ|²`.
pub fn eval_phi_delta(
    mesh: &Mesh,
    delta: f64,
    beta: &[f64],
    theta: &FieldPair,
    kappa_gamma: f64,
) -> Result<f64> {
    let norm = RelaxedNorm::new(delta)?;
    mesh.check_bulk(beta, "beta")?;
    theta.check(mesh, "theta")?;
    if let Some(b) = beta.iter().find(|&&b| !(b > 0.0)) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, found {b}")));
    }
    Ok(relaxed_length(mesh, norm, beta, &theta.bulk)
        + kappa_gamma * kappa_gamma * surface_dirichlet(mesh, &theta.surface_values(mesh)))
}

fn relaxed_length(mesh: &Mesh, norm: RelaxedNorm, beta: &[f64], theta: &[f64]) -> f64 {
    let d2 = norm.delta() * norm.delta();
    mesh.edges()
        .iter()
        .map(|e| {
            let a = e.diff(theta);
            let b = 0.5 * (beta[e.tail] + beta[e.head]);
            e.weight * (b * norm.value(a) + 0.5 * d2 * a * a)
        })
        .sum()
}

/// `Σ_e w_e β_e |D_e u| + Σ_Γ β |u − γ| dΓ`, with `u` read at the boundary nodes.
pub fn eval_weighted_tv(mesh: &Mesh, beta: &[f64], u: &[f64], gamma: &[f64]) -> Result<f64> {
    mesh.check_bulk(beta, "beta")?;
    mesh.check_bulk(u, "u")?;
    mesh.check_surface(gamma, "gamma")?;
    if let Some(b) = beta.iter().find(|&&b| !(b >= 0.0)) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, found {b}")));
    }
    let bulk: f64 = mesh
        .edges()
        .iter()
        .map(|e| e.weight * 0.5 * (beta[e.tail] + beta[e.head]) * e.diff(u).abs())
        .sum();
    let mismatch: f64 = mesh
        .boundary()
        .iter()
        .zip(gamma)
        .map(|(b, g)| b.area * beta[b.node] * (u[b.node] - g).abs())
        .sum();
    Ok(bulk + mismatch)
}

/// Evaluates the relaxed (`δ > 0`) or singular (`δ = 0`) free energy of `(η, θ)`.
pub fn eval_free_energy(
    mesh: &Mesh,
    params: &ModelParams,
    eta: &FieldPair,
    theta: &FieldPair,
    mode: EnergyMode,
) -> Result<EnergyBreakdown> {
    eta.check(mesh, "eta")?;
    theta.check(mesh, "theta")?;
    let eta_gamma = eta.surface_values(mesh);
    let theta_gamma = theta.surface_values(mesh);

    let eta_bulk_dirichlet = params.kappa * params.kappa * bulk_dirichlet(mesh, &eta.bulk);
    let eta_surface_dirichlet = params.epsilon * params.epsilon * surface_dirichlet(mesh, &eta_gamma);
    let potential_g = mesh
        .volumes()
        .iter()
        .zip(&eta.bulk)
        .map(|(m, &v)| m * params.g.primitive(v))
        .sum::<f64>()
        + mesh
            .boundary()
            .iter()
            .zip(&eta_gamma)
            .map(|(b, &v)| b.area * params.g_gamma.primitive(v))
            .sum::<f64>();
    let beta = alpha_field(params, &eta.bulk);
    let weighted_length = match mode {
        EnergyMode::Relaxed => {
            let norm = RelaxedNorm::new(params.delta)?;
            relaxed_length(mesh, norm, &beta, &theta.bulk)
        }
        EnergyMode::Singular => eval_weighted_tv(mesh, &beta, &theta.bulk, &theta_gamma)?,
    };
    let theta_surface_dirichlet =
        params.kappa_gamma * params.kappa_gamma * surface_dirichlet(mesh, &theta_gamma);
    let total =
        eta_bulk_dirichlet + eta_surface_dirichlet + potential_g + weighted_length + theta_surface_dirichlet;
    Ok(EnergyBreakdown {
        eta_bulk_dirichlet,
        eta_surface_dirichlet,
        potential_g,
        weighted_length,
        theta_surface_dirichlet,
        total,
        mode,
    })
}

/// Upper bound on `|Φ_δ − Φ₀|` from the sandwich `0 ≤ |a| − f_δ(a) ≤ δ`:
/// `δ Σ_e w_e β_e + δ²/2 Σ_e w_e (D_eθ)²`.
pub fn relaxation_gap_bound(mesh: &Mesh, delta: f64, beta: &[f64], theta: &[f64]) -> f64 {
    let be = edge_average(mesh, beta);
    mesh.edges()
        .iter()
        .zip(&be)
        .map(|(e, b)| {
            let a = e.diff(theta);
            e.weight * (delta * b + 0.5 * delta * delta * a * a)
        })
        .sum()
}
