//! Minimizing-movement time stepping.
//!
//! Each step first moves θ with the coefficients frozen at the previous η,
//! then moves η against the new θ. Both sub-steps minimize a strictly convex
//! functional; the θ-problem is solved by a lagged-diffusivity fixed point,
//! the η-problem by damped Newton. Neither solver clips its iterates.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::energy::{alpha_field, edge_average, eval_free_energy, EnergyBreakdown, EnergyMode, FieldPair};
use crate::error::{Error, Result};
use crate::linalg::{GraphOperator, LinearSolver};
use crate::mesh::Mesh;
use crate::model::{ModelParams, RelaxedNorm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping tolerance on the mass-scaled gradient, relative to `max(1, r₀)`
    /// where `r₀` is the residual at the previous time level.
    pub tol_inner: f64,
    pub max_outer: usize,
    /// Relative tolerance of each linear solve.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub linear: LinearSolver,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_inner: 1e-10,
            max_outer: 200,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
            linear: LinearSolver::Cg,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub eta: FieldPair,
    pub theta: FieldPair,
    pub step_index: usize,
    pub time: f64,
}

impl State {
    pub fn new(eta: FieldPair, theta: FieldPair) -> Self {
        Self {
            eta,
            theta,
            step_index: 0,
            time: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub outer_iterations: usize,
    pub inner_linear_iterations: usize,
    pub final_residual_inf_norm: f64,
    /// Objective at the starting iterate minus objective at the result.
    pub objective_decrease: f64,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct StepStats {
    pub theta: SolveStats,
    pub eta: SolveStats,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub tau: f64,
    pub states: Vec<State>,
    /// One entry per step (`states.len() − 1` entries).
    pub stats: Vec<StepStats>,
    /// Relaxed free energy of every state.
    pub energies: Vec<EnergyBreakdown>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn no_detached(f: &FieldPair, what: &'static str) -> Result<()> {
    if f.surface.is_some() {
        return Err(Error::InvalidParameter(format!(
            "{what} must carry its surface values on the boundary nodes"
        )));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled_inf(g: &[f64], mass: &[f64]) -> f64 {
    g.iter().zip(mass).map(|(g, m)| (g / m).abs()).fold(0.0, f64::max)
}

/// Weights of the `A₀(η)`-weighted `H` inner product at each node.
pub fn a0_mass(mesh: &Mesh, params: &ModelParams, eta: &[f64]) -> Vec<f64> {
    let mut mu: Vec<f64> = mesh
        .volumes()
        .iter()
        .zip(eta)
        .map(|(m, &e)| m * params.alpha0.value(e))
        .collect();
    for b in mesh.boundary() {
        mu[b.node] += b.area * params.alpha_gamma0.value(eta[b.node]);
    }
    mu
}

/// `θ ↦ (1/2τ)‖A₀(η̄)^{1/2}(θ − θ̄)‖²_H + Φ_δ(α(η̄); θ)`.
pub struct ThetaObjective<'a> {
    mesh: &'a Mesh,
    norm: RelaxedNorm,
    tau: f64,
    kappa_gamma2: f64,
    beta_edges: Vec<f64>,
    mu: Vec<f64>,
    h_mass: Vec<f64>,
    theta_prev: Vec<f64>,
}

impl<'a> ThetaObjective<'a> {
    pub fn new(
        mesh: &'a Mesh,
        params: &ModelParams,
        eta_prev: &FieldPair,
        theta_prev: &FieldPair,
    ) -> Result<Self> {
        params.check_constants()?;
        eta_prev.check(mesh, "eta_prev")?;
        theta_prev.check(mesh, "theta_prev")?;
        no_detached(eta_prev, "eta_prev")?;
        no_detached(theta_prev, "theta_prev")?;
        let beta = alpha_field(params, &eta_prev.bulk);
        Ok(Self {
            mesh,
            norm: RelaxedNorm::new(params.delta)?,
            tau: params.tau,
            kappa_gamma2: params.kappa_gamma * params.kappa_gamma,
            beta_edges: edge_average(mesh, &beta),
            mu: a0_mass(mesh, params, &eta_prev.bulk),
            h_mass: mesh.h_mass(),
            theta_prev: theta_prev.bulk.clone(),
        })
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let d2 = self.norm.delta() * self.norm.delta();
        let mass: f64 = self
            .mu
            .iter()
            .zip(theta.iter().zip(&self.theta_prev))
            .map(|(m, (t, p))| m * (t - p) * (t - p))
            .sum::<f64>()
            / (2.0 * self.tau);
        let bulk: f64 = self
            .mesh
            .edges()
            .iter()
            .zip(&self.beta_edges)
            .map(|(e, b)| {
                let a = e.diff(theta);
                e.weight * (b * self.norm.value(a) + 0.5 * d2 * a * a)
            })
            .sum();
        let surf: f64 = self
            .mesh
            .surface_edges()
            .iter()
            .map(|e| {
                let bd = self.mesh.boundary();
                let d = (theta[bd[e.head].node] - theta[bd[e.tail].node]) * e.inv_len;
                0.5 * e.weight * d * d
            })
            .sum();
        mass + bulk + self.kappa_gamma2 * surf
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d2 = self.norm.delta() * self.norm.delta();
        let mut g: Vec<f64> = self
            .mu
            .iter()
            .zip(theta.iter().zip(&self.theta_prev))
            .map(|(m, (t, p))| m * (t - p) / self.tau)
            .collect();
        for (e, b) in self.mesh.edges().iter().zip(&self.beta_edges) {
            let a = e.diff(theta);
            let flux = e.weight * e.inv_len * (b * self.norm.derivative(a) + d2 * a);
            g[e.head] += flux;
            g[e.tail] -= flux;
        }
        let bd = self.mesh.boundary();
        for e in self.mesh.surface_edges() {
            let (t, h) = (bd[e.tail].node, bd[e.head].node);
            let flux = self.kappa_gamma2 * e.weight * e.inv_len * (theta[h] - theta[t]) * e.inv_len;
            g[h] += flux;
            g[t] -= flux;
        }
        g
    }

    /// `‖∇E / m_H‖_∞`: the strong-form residual of the variational identity.
    pub fn residual(&self, theta: &[f64]) -> f64 {
        scaled_inf(&self.gradient(theta), &self.h_mass)
    }

    /// Frozen-coefficient operator; it majorizes the Hessian, so its step always descends.
    fn lagged_operator(&self, theta: &[f64]) -> GraphOperator {
        let d2 = self.norm.delta() * self.norm.delta();
        let mut op = GraphOperator::new(self.mu.iter().map(|m| m / self.tau).collect());
        let edges = self.mesh.edges();
        op.add_bulk_edges(self.mesh, |k| {
            self.beta_edges[k] * self.norm.lagged_coefficient(edges[k].diff(theta)) + d2
        });
        op.add_surface_edges(self.mesh, self.kappa_gamma2);
        op
    }

    fn hessian(&self, theta: &[f64]) -> GraphOperator {
        let d2 = self.norm.delta() * self.norm.delta();
        let mut op = GraphOperator::new(self.mu.iter().map(|m| m / self.tau).collect());
        let edges = self.mesh.edges();
        op.add_bulk_edges(self.mesh, |k| {
            self.beta_edges[k] * self.norm.second_derivative(edges[k].diff(theta)) + d2
        });
        op.add_surface_edges(self.mesh, self.kappa_gamma2);
        op
    }
}

/// `η ↦ (1/2τ)‖η − η̄‖²_H + Ψ(κη, εη_Γ) + G(η) + ∫α(η) f_δ(∇θ)`.
pub struct EtaObjective<'a> {
    mesh: &'a Mesh,
    params: &'a ModelParams,
    /// `½ Σ_{e∋n} w_e f_δ(D_eθ)`: the node share of the length density.
    length_share: Vec<f64>,
    h_mass: Vec<f64>,
    eta_prev: Vec<f64>,
}

impl<'a> EtaObjective<'a> {
    pub fn new(
        mesh: &'a Mesh,
        params: &'a ModelParams,
        eta_prev: &FieldPair,
        theta_new: &FieldPair,
    ) -> Result<Self> {
        params.check_constants()?;
        eta_prev.check(mesh, "eta_prev")?;
        theta_new.check(mesh, "theta_new")?;
        no_detached(eta_prev, "eta_prev")?;
        no_detached(theta_new, "theta_new")?;
        let norm = RelaxedNorm::new(params.delta)?;
        let mut share = vec![0.0; mesh.n_nodes()];
        for e in mesh.edges() {
            let f = 0.5 * e.weight * norm.value(e.diff(&theta_new.bulk));
            share[e.tail] += f;
            share[e.head] += f;
        }
        Ok(Self {
            mesh,
            params,
            length_share: share,
            h_mass: mesh.h_mass(),
            eta_prev: eta_prev.bulk.clone(),
        })
    }

    pub fn value(&self, eta: &[f64]) -> f64 {
        let p = self.params;
        let m = self.mesh;
        let mass: f64 = self
            .h_mass
            .iter()
            .zip(eta.iter().zip(&self.eta_prev))
            .map(|(w, (e, q))| w * (e - q) * (e - q))
            .sum::<f64>()
            / (2.0 * p.tau);
        let dir: f64 = m
            .edges()
            .iter()
            .map(|e| {
                let d = e.diff(eta);
                0.5 * e.weight * d * d
            })
            .sum();
        let bd = m.boundary();
        let surf: f64 = m
            .surface_edges()
            .iter()
            .map(|e| {
                let d = (eta[bd[e.head].node] - eta[bd[e.tail].node]) * e.inv_len;
                0.5 * e.weight * d * d
            })
            .sum();
        let pot: f64 = m
            .volumes()
            .iter()
            .zip(eta)
            .map(|(w, &e)| w * p.g.primitive(e))
            .sum::<f64>()
            + bd.iter().map(|b| b.area * p.g_gamma.primitive(eta[b.node])).sum::<f64>();
        let len: f64 = self
            .length_share
            .iter()
            .zip(eta)
            .map(|(s, &e)| s * p.alpha.value(e))
            .sum();
        mass + p.kappa * p.kappa * dir + p.epsilon * p.epsilon * surf + pot + len
    }

    pub fn gradient(&self, eta: &[f64]) -> Vec<f64> {
        let p = self.params;
        let m = self.mesh;
        let k2 = p.kappa * p.kappa;
        let e2 = p.epsilon * p.epsilon;
        let mut g: Vec<f64> = (0..eta.len())
            .map(|n| {
                self.h_mass[n] * (eta[n] - self.eta_prev[n]) / p.tau
                    + m.volumes()[n] * p.g.value(eta[n])
                    + self.length_share[n] * p.alpha.derivative(eta[n])
            })
            .collect();
        for b in m.boundary() {
            g[b.node] += b.area * p.g_gamma.value(eta[b.node]);
        }
        for e in m.edges() {
            let flux = k2 * e.weight * e.inv_len * e.diff(eta);
            g[e.head] += flux;
            g[e.tail] -= flux;
        }
        if e2 != 0.0 {
            let bd = m.boundary();
            for e in m.surface_edges() {
                let (t, h) = (bd[e.tail].node, bd[e.head].node);
                let flux = e2 * e.weight * e.inv_len * (eta[h] - eta[t]) * e.inv_len;
                g[h] += flux;
                g[t] -= flux;
            }
        }
        g
    }

    pub fn residual(&self, eta: &[f64]) -> f64 {
        scaled_inf(&self.gradient(eta), &self.h_mass)
    }

    fn hessian(&self, eta: &[f64]) -> GraphOperator {
        let p = self.params;
        let m = self.mesh;
        let mut diag: Vec<f64> = (0..eta.len())
            .map(|n| {
                self.h_mass[n] / p.tau
                    + m.volumes()[n] * p.g.derivative(eta[n])
                    + self.length_share[n] * p.alpha.second_derivative(eta[n])
            })
            .collect();
        for b in m.boundary() {
            diag[b.node] += b.area * p.g_gamma.derivative(eta[b.node]);
        }
        let mut op = GraphOperator::new(diag);
        let k2 = p.kappa * p.kappa;
        op.add_bulk_edges(m, |_| k2);
        op.add_surface_edges(m, p.epsilon * p.epsilon);
        op
    }
}

struct Best {
    x: Vec<f64>,
    residual: f64,
}

impl Best {
    fn offer(&mut self, x: &[f64], r: f64) {
        if r < self.residual {
            self.residual = r;
            self.x.copy_from_slice(x);
        }
    }
}

pub fn theta_step(
    mesh: &Mesh,
    params: &ModelParams,
    eta_prev: &FieldPair,
    theta_prev: &FieldPair,
    opts: &SolverOptions,
) -> Result<(FieldPair, SolveStats)> {
    theta_step_from(mesh, params, eta_prev, theta_prev, None, opts)
}

/// [`theta_step`] started from an arbitrary initial iterate.
pub fn theta_step_from(
    mesh: &Mesh,
    params: &ModelParams,
    eta_prev: &FieldPair,
    theta_prev: &FieldPair,
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(FieldPair, SolveStats)> {
    let start = Instant::now();
    let obj = ThetaObjective::new(mesh, params, eta_prev, theta_prev)?;
    let mut theta = match guess {
        Some(g) => {
            mesh.check_bulk(g, "initial guess")?;
            g.to_vec()
        }
        None => theta_prev.bulk.clone(),
    };
    let tol = opts.tol_inner * obj.residual(&theta_prev.bulk).max(1.0);
    let e0 = obj.value(&theta);
    let mut best = Best {
        x: theta.clone(),
        residual: f64::INFINITY,
    };
    let mut linear_iters = 0;
    let mut delta = vec![0.0; theta.len()];
    let mut trial = vec![0.0; theta.len()];
    let mut cooldown = 0usize;
    let mut backoff = 1usize;
    for outer in 0..=opts.max_outer {
        let g = obj.gradient(&theta);
        let r = scaled_inf(&g, &obj.h_mass);
        best.offer(&theta, r);
        if r <= tol {
            return Ok((
                FieldPair::new(theta.clone()),
                SolveStats {
                    outer_iterations: outer,
                    inner_linear_iterations: linear_iters,
                    final_residual_inf_norm: r,
                    objective_decrease: e0 - obj.value(&theta),
                    wall_time: start.elapsed(),
                },
            ));
        }
        if outer == opts.max_outer {
            break;
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        // Newton with a short backtracking search is tried first; when it fails the
        // lagged-diffusivity step is taken, which decreases the objective
        // unconditionally, and Newton is retried after an exponential back-off.
        if cooldown == 0 {
            let op = obj.hessian(&theta);
            delta.iter_mut().for_each(|d| *d = 0.0);
            if let Some(it) = op.solve(&rhs, &mut delta, opts.linear, opts.cg_tol, opts.cg_max_iter) {
                linear_iters += it;
                let f0 = obj.value(&theta);
                let slope = dot(&g, &delta);
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..4 {
                    for ((x, th), d) in trial.iter_mut().zip(&theta).zip(&delta) {
                        *x = th + t * d;
                    }
                    if obj.value(&trial) <= f0 + 1e-4 * t * slope + 1e-14 * f0.abs() {
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if accepted {
                    theta.copy_from_slice(&trial);
                    backoff = 1;
                    continue;
                }
            }
            cooldown = backoff;
            backoff = (2 * backoff).min(16);
        } else {
            cooldown -= 1;
        }
        let op = obj.lagged_operator(&theta);
        delta.iter_mut().for_each(|d| *d = 0.0);
        match op.solve(&rhs, &mut delta, opts.linear, opts.cg_tol, opts.cg_max_iter) {
            Some(it) => linear_iters += it,
            None => break,
        }
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t += d;
        }
    }
    Err(Error::Convergence {
        solver: "theta lagged-diffusivity/Newton",
        iterations: opts.max_outer,
        residual: best.residual,
        best: best.x,
    })
}

pub fn eta_step(
    mesh: &Mesh,
    params: &ModelParams,
    eta_prev: &FieldPair,
    theta_new: &FieldPair,
    opts: &SolverOptions,
) -> Result<(FieldPair, SolveStats)> {
    eta_step_from(mesh, params, eta_prev, theta_new, None, opts)
}

/// [`eta_step`] started from an arbitrary initial iterate.
pub fn eta_step_from(
    mesh: &Mesh,
    params: &ModelParams,
    eta_prev: &FieldPair,
    theta_new: &FieldPair,
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(FieldPair, SolveStats)> {
    let start = Instant::now();
    params.check_tau()?;
    let obj = EtaObjective::new(mesh, params, eta_prev, theta_new)?;
    let mut eta = match guess {
        Some(g) => {
            mesh.check_bulk(g, "initial guess")?;
            g.to_vec()
        }
        None => eta_prev.bulk.clone(),
    };
    let tol = opts.tol_inner * obj.residual(&eta_prev.bulk).max(1.0);
    let e0 = obj.value(&eta);
    let mut best = Best {
        x: eta.clone(),
        residual: f64::INFINITY,
    };
    let mut linear_iters = 0;
    let mut dir = vec![0.0; eta.len()];
    let mut trial = vec![0.0; eta.len()];
    for outer in 0..=opts.max_outer {
        let g = obj.gradient(&eta);
        let r = scaled_inf(&g, &obj.h_mass);
        best.offer(&eta, r);
        if r <= tol {
            return Ok((
                FieldPair::new(eta.clone()),
                SolveStats {
                    outer_iterations: outer,
                    inner_linear_iterations: linear_iters,
                    final_residual_inf_norm: r,
                    objective_decrease: e0 - obj.value(&eta),
                    wall_time: start.elapsed(),
                },
            ));
        }
        if outer == opts.max_outer {
            break;
        }
        let op = obj.hessian(&eta);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        dir.iter_mut().for_each(|d| *d = 0.0);
        match op.solve(&rhs, &mut dir, opts.linear, opts.cg_tol, opts.cg_max_iter) {
            Some(it) => linear_iters += it,
            None => break,
        }
        // Step halving on the objective; the slack absorbs rounding near the minimum.
        let f0 = obj.value(&eta);
        let slope = dot(&g, &dir);
        let mut t = 1.0;
        loop {
            for ((x, e), d) in trial.iter_mut().zip(&eta).zip(&dir) {
                *x = e + t * d;
            }
            let f1 = obj.value(&trial);
            if f1 <= f0 + 1e-4 * t * slope + 1e-14 * f0.abs() || t < 1e-8 {
                break;
            }
            t *= 0.5;
        }
        eta.copy_from_slice(&trial);
    }
    Err(Error::Convergence {
        solver: "eta Newton",
        iterations: opts.max_outer,
        residual: best.residual,
        best: best.x,
    })
}

/// `(1/2τ)‖η_i − η_{i−1}‖²_H` and `(1/2τ)‖A₀(η_{i−1})^{1/2}(θ_i − θ_{i−1})‖²_H`.
pub fn dissipation_terms(mesh: &Mesh, params: &ModelParams, prev: &State, next: &State) -> (f64, f64) {
    let hm = mesh.h_mass();
    let de: f64 = hm
        .iter()
        .zip(next.eta.bulk.iter().zip(&prev.eta.bulk))
        .map(|(m, (a, b))| m * (a - b) * (a - b))
        .sum();
    let mu = a0_mass(mesh, params, &prev.eta.bulk);
    let dt: f64 = mu
        .iter()
        .zip(next.theta.bulk.iter().zip(&prev.theta.bulk))
        .map(|(m, (a, b))| m * (a - b) * (a - b))
        .sum();
    (de / (2.0 * params.tau), dt / (2.0 * params.tau))
}

/// Checks `η ∈ [0, 1]` and `θ ∈ [r0, r1]` exactly, with no detached surfaces.
pub fn check_initial(mesh: &Mesh, params: &ModelParams, initial: &State) -> Result<()> {
    initial.eta.check(mesh, "initial eta")?;
    initial.theta.check(mesh, "initial theta")?;
    if initial.eta.surface.is_some() || initial.theta.surface.is_some() {
        return Err(Error::InvalidInitialData(
            "initial surface values must coincide with the boundary nodes".into(),
        ));
    }
    let (lo, hi) = (initial.eta.min(), initial.eta.max());
    if lo < 0.0 || hi > 1.0 {
        return Err(Error::InvalidInitialData(format!(
            "eta range [{lo}, {hi}] leaves [0, 1]"
        )));
    }
    let (lo, hi) = (initial.theta.min(), initial.theta.max());
    if lo < params.r0 || hi > params.r1 {
        return Err(Error::InvalidInitialData(format!(
            "theta range [{lo}, {hi}] leaves [{}, {}]",
            params.r0, params.r1
        )));
    }
    Ok(())
}

pub fn run_scheme(
    mesh: &Mesh,
    params: &ModelParams,
    initial: &State,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    run_scheme_with(mesh, params, initial, n_steps, opts, |_| {})
}

/// [`run_scheme`] with a callback invoked after every accepted state (including the initial one).
pub fn run_scheme_with(
    mesh: &Mesh,
    params: &ModelParams,
    initial: &State,
    n_steps: usize,
    opts: &SolverOptions,
    mut on_state: impl FnMut(&State),
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be positive".into()));
    }
    params.check_constants()?;
    let report = params.validate_assumptions();
    if !report.all_passed() {
        let msgs: Vec<String> = report
            .failures()
            .map(|c| format!("({}) {}", c.label, c.description))
            .collect();
        if report.failed("tau") {
            return Err(Error::StepSize {
                tau: params.tau,
                tau_star: report.tau_star,
            });
        }
        return Err(Error::InvalidParameter(msgs.join("; ")));
    }
    check_initial(mesh, params, initial)?;

    let mut first = initial.clone();
    first.step_index = 0;
    first.time = 0.0;
    let e0 = eval_free_energy(mesh, params, &first.eta, &first.theta, EnergyMode::Relaxed)?;
    on_state(&first);
    let mut traj = Trajectory {
        tau: params.tau,
        states: vec![first],
        stats: Vec::with_capacity(n_steps),
        energies: vec![e0],
    };
    for i in 1..=n_steps {
        let prev = traj.last();
        let step = theta_step(mesh, params, &prev.eta, &prev.theta, opts).and_then(|(theta, ts)| {
            let (eta, es) = eta_step(mesh, params, &prev.eta, &theta, opts)?;
            Ok((eta, theta, ts, es))
        });
        let (eta, theta, ts, es) = match step {
            Ok(v) => v,
            Err(source) => {
                return Err(Error::RunAborted {
                    step: i,
                    source: Box::new(source),
                    partial: Box::new(traj),
                })
            }
        };
        let state = State {
            eta,
            theta,
            step_index: i,
            time: i as f64 * params.tau,
        };
        let e = eval_free_energy(mesh, params, &state.eta, &state.theta, EnergyMode::Relaxed)?;
        on_state(&state);
        traj.states.push(state);
        traj.stats.push(StepStats { theta: ts, eta: es });
        traj.energies.push(e);
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationKind {
    /// Right-continuous piecewise constant: value `i` on `[t_{i−1}, t_i)`.
    Forward,
    /// Piecewise constant: value `i−1` on `[t_{i−1}, t_i)`.
    Backward,
    Linear,
}

fn blend(a: &FieldPair, b: &FieldPair, wa: f64, wb: f64) -> FieldPair {
    FieldPair::new(a.bulk.iter().zip(&b.bulk).map(|(x, y)| wa * x + wb * y).collect())
}

pub fn interpolate_trajectory(traj: &Trajectory, t: f64, kind: InterpolationKind) -> Result<State> {
    let n = traj.n_steps();
    let tau = traj.tau;
    let t_max = n as f64 * tau;
    if !(t >= 0.0 && t <= t_max) {
        return Err(Error::Range { t, t_max });
    }
    let s = t / tau;
    let knot = s.round();
    if (s - knot).abs() <= 1e-12 * (1.0 + s) {
        let mut st = traj.states[knot as usize].clone();
        st.time = t;
        return Ok(st);
    }
    let i = (s.floor() as usize + 1).min(n);
    let (left, right) = (&traj.states[i - 1], &traj.states[i]);
    let state = match kind {
        InterpolationKind::Forward => State {
            time: t,
            ..right.clone()
        },
        InterpolationKind::Backward => State {
            time: t,
            ..left.clone()
        },
        InterpolationKind::Linear => {
            let wr = (t - (i - 1) as f64 * tau) / tau;
            let wl = (i as f64 * tau - t) / tau;
            State {
                eta: blend(&left.eta, &right.eta, wl, wr),
                theta: blend(&left.theta, &right.theta, wl, wr),
                step_index: i - 1,
                time: t,
            }
        }
    };
    Ok(state)
}
