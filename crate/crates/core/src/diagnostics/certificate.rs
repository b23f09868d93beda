//! Discrete subdifferential certificate for the weighted total variation.
//!
//! At a relaxed solution the field `ω* = f_δ'(D_eθ)` is a candidate element of
//! the subdifferential of `|·|` on each edge. Its residual in the pairing
//! `|a| − ω* a` measures how far `ω*` is from saturating where θ varies, and
//! its normal component at the boundary is compared against the jump between
//! the surface value and the adjacent interior node.

use std::fmt;

use crate::error::Result;
use crate::mesh::{Axis, Mesh};
use crate::model::{ModelParams, RelaxedNorm};
use crate::scheme::State;

/// Jumps with `|j| > JUMP_FACTOR · δ · h` are treated as resolved.
pub const JUMP_FACTOR: f64 = 10.0;
/// A resolved jump must carry a flux at least this close to saturation.
pub const SATURATED_FLUX: f64 = 0.99;
/// Below this flux magnitude the boundary value must stay attached.
pub const ATTACHED_FLUX: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum B2Class {
    /// Small flux and small jump.
    Continuous,
    /// Small jump with a flux in `(0.9, 1)`: not constrained.
    Transitional,
    /// Resolved jump with a saturated flux of matching sign.
    Jump,
    /// Resolved jump whose flux has the wrong sign or is not saturated.
    Violation,
}

impl B2Class {
    pub fn is_violation(self) -> bool {
        self == B2Class::Violation
    }
}

impl fmt::Display for B2Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            B2Class::Continuous => "continuous",
            B2Class::Transitional => "transitional",
            B2Class::Jump => "jump",
            B2Class::Violation => "violation",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct B2Entry {
    pub node: usize,
    /// `θ_Γ − θ` at the adjacent interior node.
    pub jump: f64,
    /// Outward normal component of `ω*`.
    pub flux: f64,
    pub class: B2Class,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub delta: f64,
    /// One value per edge, along the edge axis.
    pub omega_star: Vec<f64>,
    pub max_norm_omega: f64,
    /// Per node: `Σ (|a| − ω* a)` over edges leaving the node.
    pub b1_residual: Vec<f64>,
    /// Per boundary slot.
    pub boundary_flux: Vec<f64>,
    pub b2_report: Vec<B2Entry>,
    pub jump_threshold: f64,
}

impl Certificate {
    pub fn b1_range(&self) -> (f64, f64) {
        let lo = self.b1_residual.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.b1_residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn b2_violations(&self) -> impl Iterator<Item = &B2Entry> {
        self.b2_report.iter().filter(|e| e.class.is_violation())
    }

    /// Strict unit bound on ω*, the b1 sandwich, and no b2 violations.
    pub fn passes(&self) -> bool {
        let (lo, hi) = self.b1_range();
        self.max_norm_omega < 1.0 && lo >= 0.0 && hi <= self.delta && self.b2_violations().next().is_none()
    }

    /// CSV with one row per edge: `tail,head,omega_x,omega_y`.
    pub fn omega_csv(&self, mesh: &Mesh) -> String {
        let mut out = String::from("tail,head,omega_x,omega_y\n");
        for (e, w) in mesh.edges().iter().zip(&self.omega_star) {
            let (x, y) = match e.axis {
                Axis::X => (*w, 0.0),
                Axis::Y => (0.0, *w),
            };
            out.push_str(&format!("{},{},{},{}\n", e.tail, e.head, x, y));
        }
        out
    }

    /// CSV with one row per boundary node: `node,jump,flux,class`.
    pub fn b2_csv(&self) -> String {
        let mut out = String::from("node,jump,flux,class\n");
        for e in &self.b2_report {
            out.push_str(&format!("{},{},{},{}\n", e.node, e.jump, e.flux, e.class));
        }
        out
    }
}

fn classify(jump: f64, flux: f64, threshold: f64) -> B2Class {
    if jump.abs() > threshold {
        if jump.signum() == flux.signum() && flux.abs() >= SATURATED_FLUX {
            B2Class::Jump
        } else {
            B2Class::Violation
        }
    } else if flux.abs() <= ATTACHED_FLUX {
        B2Class::Continuous
    } else {
        B2Class::Transitional
    }
}

pub fn compute_certificate(mesh: &Mesh, params: &ModelParams, state: &State) -> Result<Certificate> {
    let norm = RelaxedNorm::new(params.delta)?;
    state.theta.check(mesh, "theta")?;
    let theta = &state.theta.bulk;
    let mut omega = Vec::with_capacity(mesh.n_edges());
    let mut b1 = vec![0.0; mesh.n_nodes()];
    for e in mesh.edges() {
        let a = e.diff(theta);
        let w = norm.derivative(a);
        omega.push(w);
        b1[e.tail] += a.abs() - w * a;
    }
    // |a| − ω a is nonnegative exactly, but rounding can leave a tiny negative.
    for v in &mut b1 {
        *v = v.max(0.0);
    }
    let max_norm_omega = omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let threshold = JUMP_FACTOR * params.delta * mesh.normal_spacing();
    let surface = state.theta.surface_values(mesh);
    let mut flux = Vec::with_capacity(mesh.n_boundary());
    let mut b2 = Vec::with_capacity(mesh.n_boundary());
    for (b, g) in mesh.boundary().iter().zip(&surface) {
        let nu = b.normal_sign * omega[b.normal_edge];
        let jump = g - theta[b.interior];
        flux.push(nu);
        b2.push(B2Entry {
            node: b.node,
            jump,
            flux: nu,
            class: classify(jump, nu, threshold),
        });
    }
    Ok(Certificate {
        delta: params.delta,
        omega_star: omega,
        max_norm_omega,
        b1_residual: b1,
        boundary_flux: flux,
        b2_report: b2,
        jump_threshold: threshold,
    })
}
