//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::time::Instant;

use kwc_core::diagnostics::{
    audit_bounds, audit_dissipation, comparison_experiment, compute_certificate, delta_continuation, frozen_gaps,
    oracle_step, B2Class, OracleSelector,
};
use kwc_core::energy::FieldPair;
use kwc_core::mesh::{build_mesh, Mesh, MeshSpec};
use kwc_core::model::{ModelParams, ScalarFn};
use kwc_core::scheme::{eta_step, run_scheme, theta_step, EtaObjective, SolverOptions, State, ThetaObjective};
use kwc_core::{initial, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn default_setup() -> (Mesh, ModelParams) {
    let p = ModelParams::default();
    let m = build_mesh(&p.grid).expect("default mesh");
    (m, p)
}

fn default_run() -> Result<(kwc_core::Trajectory, f64), String> {
    let (m, p) = default_setup();
    let init = initial::two_grain(&m, &p);
    let start = Instant::now();
    let traj = run_scheme(&m, &p, &init, 500, &SolverOptions::default()).map_err(|e| e.to_string())?;
    Ok((traj, start.elapsed().as_secs_f64()))
}

fn dissipation(traj: &kwc_core::Trajectory, secs: f64) -> Outcome {
    let (m, p) = default_setup();
    let rows = audit_dissipation(traj, &m, &p).map_err(|e| e.to_string())?;
    let f0 = traj.energies[0].total;
    let tol = 1e-8 * (1.0 + f0);
    let worst = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let f_end = traj.energies[500].total;
    ensure(rows.len() == 500, || format!("{} audit rows", rows.len()))?;
    ensure(worst >= -tol, || format!("min slack {worst:e} < -{tol:e}"))?;
    ensure(f_end < f0, || format!("F500 = {f_end} not below F0 = {f0}"))?;
    ensure(secs <= 60.0, || format!("run took {secs:.1} s"))?;
    Ok(format!(
        "min slack {worst:.3e} (tol -{tol:.3e}), F0 {f0:.6} -> F500 {f_end:.3e}, {secs:.2} s"
    ))
}

fn solver_sources() -> [(&'static str, &'static str); 2] {
    [
        ("scheme.rs", include_str!("../src/scheme.rs")),
        ("linalg.rs", include_str!("../src/linalg.rs")),
    ]
}

/// The solve path must not project iterates onto the admissible box.
fn no_clipping_in_solve_path() -> Result<(), String> {
    for (name, src) in solver_sources() {
        let body = src.split("#[cfg(test)]").next().unwrap_or(src);
        for pat in ["clamp(", "max(0.0", "min(1.0", ".r0", ".r1", "max(params", "min(params"] {
            if let Some(pos) = body.find(pat) {
                let line = body[..pos].lines().count();
                if name == "scheme.rs" && is_input_check(body, pos) {
                    continue;
                }
                return Err(format!("{name}:{line} contains `{pat}`"));
            }
        }
    }
    Ok(())
}

/// Bounds are read only by the initial-data validation.
fn is_input_check(body: &str, pos: usize) -> bool {
    let fn_start = body[..pos].rfind("\npub fn ").unwrap_or(0);
    body[fn_start..].starts_with("\npub fn check_initial")
}

fn bounds(traj: &kwc_core::Trajectory) -> Outcome {
    let p = ModelParams::default();
    let rep = audit_bounds(traj, p.r0, p.r1);
    no_clipping_in_solve_path()?;
    let eta = rep.eta_below.max(rep.eta_above);
    let theta = rep.theta_below.max(rep.theta_above);
    ensure(eta <= 1e-9 && theta <= 1e-9, || format!("excursions eta {eta:e}, theta {theta:e}"))?;
    Ok(format!("eta excursion {eta:.2e}, theta excursion {theta:.2e}, no clipping in solve path"))
}

fn tau_guard() -> Outcome {
    let mut p = ModelParams {
        tau: 1.0 / 6.0,
        grid: MeshSpec::strip(8, 5, 1.0, 1.0),
        ..Default::default()
    };
    let m = build_mesh(&p.grid).unwrap();
    let init = initial::two_grain(&m, &p);
    let opts = SolverOptions::default();
    let rejected = matches!(run_scheme(&m, &p, &init, 1, &opts), Err(Error::StepSize { .. }))
        && matches!(eta_step(&m, &p, &init.eta, &init.theta, &opts), Err(Error::StepSize { .. }));
    ensure(rejected, || "tau = 1/6 was not rejected".into())?;
    p.tau = 1.0 / 6.0 - 1e-6;
    let traj = run_scheme(&m, &p, &init, 1, &opts).map_err(|e| format!("tau = 1/6 - 1e-6 rejected: {e}"))?;
    ensure(traj.n_steps() == 1, || "no step taken".into())?;
    Ok(format!("tau_star = {:.12}", p.tau_star()))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Mesh, ModelParams, FieldPair, FieldPair) {
    let nx = rng.random_range(4..=16);
    let mut p = ModelParams {
        delta: rng.random_range(0.01..0.2),
        tau: rng.random_range(0.001..0.15),
        kappa: rng.random_range(0.02..0.5),
        kappa_gamma: rng.random_range(0.02..0.5),
        epsilon: rng.random_range(0.0..1.0),
        grid: MeshSpec::interval(nx, rng.random_range(0.5..2.0)),
        ..Default::default()
    };
    p.alpha = ScalarFn::QuadraticAlpha {
        base: rng.random_range(0.05..0.5),
        curvature: rng.random_range(0.0..3.0),
    };
    if rng.random_bool(0.5) {
        p.alpha0 = ScalarFn::Linear {
            intercept: 1.5,
            slope: rng.random_range(-0.5..0.5),
        };
    }
    let m = build_mesh(&p.grid).unwrap();
    let eta = FieldPair::new((0..nx).map(|_| rng.random::<f64>()).collect());
    let theta = FieldPair::new((0..nx).map(|_| rng.random::<f64>()).collect());
    (m, p, eta, theta)
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolverOptions::default();
    let (mut worst_t, mut worst_e) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let (m, p, eta, theta) = random_instance(&mut rng);
        let (th, _) = theta_step(&m, &p, &eta, &theta, &opts).map_err(|e| format!("instance {k}: {e}"))?;
        let th_o = oracle_step(&m, &p, OracleSelector::Theta, &eta, &theta).map_err(|e| format!("instance {k}: {e}"))?;
        let (et, _) = eta_step(&m, &p, &eta, &th, &opts).map_err(|e| format!("instance {k}: {e}"))?;
        let et_o = oracle_step(&m, &p, OracleSelector::Eta, &eta, &th).map_err(|e| format!("instance {k}: {e}"))?;
        let dt = inf_dist(&th.bulk, &th_o.bulk);
        let de = inf_dist(&et.bulk, &et_o.bulk);
        ensure(dt <= 1e-8 && de <= 1e-8, || format!("instance {k} (nx={}): theta {dt:e}, eta {de:e}", m.n_nodes()))?;
        worst_t = worst_t.max(dt);
        worst_e = worst_e.max(de);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("max deviation theta {worst_t:.2e}, eta {worst_e:.2e}, {secs:.2} s"))
}

fn comparison() -> Outcome {
    let (m, p) = default_setup();
    let opts = SolverOptions::default();
    let first = initial::two_grain(&m, &p);

    // Ordered data: second dominates first in both fields.
    let mut ordered = first.clone();
    for (k, c) in m.coords().iter().enumerate() {
        let bump = 0.1 * (1.0 + (6.0 * c[0]).sin() * (3.0 * c[1]).cos()) / 2.0;
        ordered.eta.bulk[k] = (first.eta.bulk[k] + bump).min(1.0);
        ordered.theta.bulk[k] = (first.theta.bulk[k] + bump).min(p.r1);
    }
    let rep = comparison_experiment(&m, &p, &first, &ordered, 100, &opts).map_err(|e| e.to_string())?;
    let eta_max = rep.eta_norms.iter().copied().fold(0.0, f64::max);
    ensure(eta_max <= 1e-10, || format!("ordered eta lost order: {eta_max:e}"))?;
    ensure(rep.passes(1e-10), || {
        format!("ordered data: eta {:?}, theta {:?}", rep.eta_increases(1e-10), rep.theta_increases(1e-10))
    })?;

    // Crossing data.
    let crossing = initial::random(&m, &p, 11);
    let rep2 = comparison_experiment(&m, &p, &first, &crossing, 100, &opts).map_err(|e| e.to_string())?;
    ensure(rep2.passes(1e-10), || {
        format!("crossing data: eta {:?}, theta {:?}", rep2.eta_increases(1e-10), rep2.theta_increases(1e-10))
    })?;
    Ok(format!(
        "ordered: max eta norm {eta_max:.1e}; crossing: eta {:.3e} -> {:.3e}, theta {:.3e} -> {:.3e}",
        rep2.eta_norms[0], rep2.eta_norms[100], rep2.theta_weighted_norms[0], rep2.theta_weighted_norms[100]
    ))
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], v: &[f64], h: f64) -> f64 {
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    (f(&plus) - f(&minus)) / (2.0 * h)
}

fn gradient_consistency() -> Outcome {
    let p = ModelParams {
        grid: MeshSpec::strip(12, 6, 1.0, 1.0),
        alpha0: ScalarFn::Linear {
            intercept: 1.5,
            slope: 0.5,
        },
        ..Default::default()
    };
    let m = build_mesh(&p.grid).unwrap();
    let n = m.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let field = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>()).collect() };
    let (mut worst_t, mut worst_e) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let eta_prev = FieldPair::new(field(&mut rng));
        let theta_prev = FieldPair::new(field(&mut rng));
        let x = field(&mut rng);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let obj = ThetaObjective::new(&m, &p, &eta_prev, &theta_prev).map_err(|e| e.to_string())?;
        let an: f64 = obj.gradient(&x).iter().zip(&v).map(|(g, d)| g * d).sum();
        let fd = central_difference(|y| obj.value(y), &x, &v, 1e-6);
        let rel = (fd - an).abs() / an.abs();
        ensure(rel < 1e-6, || format!("theta state {k}: rel err {rel:e}"))?;
        worst_t = worst_t.max(rel);

        let theta_new = FieldPair::new(field(&mut rng));
        let obj = EtaObjective::new(&m, &p, &eta_prev, &theta_new).map_err(|e| e.to_string())?;
        let an: f64 = obj.gradient(&x).iter().zip(&v).map(|(g, d)| g * d).sum();
        let fd = central_difference(|y| obj.value(y), &x, &v, 1e-6);
        let rel = (fd - an).abs() / an.abs();
        ensure(rel < 1e-6, || format!("eta state {k}: rel err {rel:e}"))?;
        worst_e = worst_e.max(rel);
    }
    Ok(format!("max relative error theta {worst_t:.2e}, eta {worst_e:.2e}"))
}

fn sandwich() -> Outcome {
    let (m, p) = default_setup();
    let state = initial::two_grain(&m, &p);
    let gaps = frozen_gaps(&m, &p, &state, &[0.1, 0.05, 0.025, 0.0125]).map_err(|e| e.to_string())?;
    for g in &gaps {
        ensure(g.gap <= g.bound, || format!("delta {}: gap {} > bound {}", g.delta, g.gap, g.bound))?;
    }
    ensure(gaps.windows(2).all(|w| w[1].gap < w[0].gap), || {
        format!("gaps not strictly decreasing: {:?}", gaps.iter().map(|g| g.gap).collect::<Vec<_>>())
    })?;
    Ok(gaps
        .iter()
        .map(|g| format!("d={} gap {:.3e}<={:.3e}", g.delta, g.gap, g.bound))
        .collect::<Vec<_>>()
        .join(", "))
}

fn certificate() -> Outcome {
    let p = ModelParams {
        delta: 0.0125,
        ..Default::default()
    };
    let m = build_mesh(&p.grid).unwrap();
    let opts = SolverOptions::default();
    let mut state = initial::two_grain(&m, &p);
    let mut jump_nodes = 0;
    let mut change = f64::INFINITY;
    let mut checked = 0;
    while change > 1e-6 && state.step_index < 1000 {
        let (theta, _) = theta_step(&m, &p, &state.eta, &state.theta, &opts).map_err(|e| e.to_string())?;
        let (eta, _) = eta_step(&m, &p, &state.eta, &theta, &opts).map_err(|e| e.to_string())?;
        change = inf_dist(&theta.bulk, &state.theta.bulk);
        let i = state.step_index + 1;
        state = State {
            eta,
            theta,
            step_index: i,
            time: i as f64 * p.tau,
        };
        // Every converged state along the way is certified, not only the last one.
        let c = compute_certificate(&m, &p, &state).map_err(|e| e.to_string())?;
        let (lo, hi) = c.b1_range();
        ensure(c.max_norm_omega < 1.0, || format!("step {i}: max |omega| = {}", c.max_norm_omega))?;
        ensure(lo >= 0.0 && hi <= p.delta, || format!("step {i}: b1 range [{lo:e}, {hi:e}]"))?;
        for e in &c.b2_report {
            ensure(!e.class.is_violation(), || format!("step {i}: node {} violates b2: {e:?}", e.node))?;
            ensure(e.flux.abs() > 0.9 || e.jump.abs() <= c.jump_threshold, || {
                format!("step {i}: node {} attached flux with jump {}", e.node, e.jump)
            })?;
        }
        jump_nodes += c.b2_report.iter().filter(|e| e.class == B2Class::Jump).count();
        checked += 1;
    }
    ensure(change <= 1e-6, || format!("not stationary after {} steps", state.step_index))?;
    Ok(format!(
        "stationary at step {} (change {change:.1e}); {checked} states certified, {jump_nodes} resolved-jump node visits",
        state.step_index
    ))
}

fn continuation() -> Outcome {
    let (m, p) = default_setup();
    let init = initial::two_grain(&m, &p);
    let t = delta_continuation(&m, &p, &init, &[0.1, 0.05, 0.025, 0.0125], 50, &SolverOptions::default(), 4)
        .map_err(|e| e.to_string())?;
    for r in &t.rows {
        ensure(r.error.is_none(), || format!("delta {} failed: {:?}", r.delta, r.error))?;
    }
    ensure(t.distances_strictly_decreasing(), || {
        format!("H distances {:?}, L2 distances {:?}", t.distances, t.l2_distances)
    })?;
    let chain = |ds: &[Option<f64>]| ds.iter().map(|d| format!("{:.4e}", d.unwrap())).collect::<Vec<_>>().join(" > ");
    Ok(format!("L2 {}; H {}", chain(&t.l2_distances), chain(&t.distances)))
}

fn discrete_calculus() -> Outcome {
    let specs = [MeshSpec::strip(24, 9, 2.0, 1.5), MeshSpec::interval(37, 3.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for spec in specs {
        let m = build_mesh(&spec).unwrap();
        let measure = if spec.ny > 1 && m.n_boundary() > 2 { spec.lx * spec.ly } else { spec.lx };
        let q = m.integrate(&vec![1.0; m.n_nodes()]);
        ensure((q - measure).abs() <= 1e-12 * measure, || format!("{:?}: integral of 1 = {q}", spec.geometry))?;
        for _ in 0..100 {
            let u: Vec<f64> = (0..m.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p: Vec<f64> = (0..m.n_edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let grad = m.apply_gradient(&u).unwrap();
            let div = m.divergence(&p).unwrap();
            let lhs = m.edge_inner(&grad, &p);
            let rhs = -m.bulk_inner(&u, &div) + m.boundary_flux(&u, &p).unwrap();
            let scale = lhs.abs().max(1.0);
            let rel = (lhs - rhs).abs() / scale;
            ensure(rel <= 1e-12, || format!("{:?}: summation by parts off by {rel:e}", spec.geometry))?;
            let gt = m.gradient_transpose(&p).unwrap();
            let adj: f64 = u.iter().zip(&gt).map(|(a, b)| a * b).sum();
            let rel_adj = (adj - lhs).abs() / scale;
            ensure(rel_adj <= 1e-12, || format!("{:?}: adjoint off by {rel_adj:e}", spec.geometry))?;
            worst = worst.max(rel).max(rel_adj);
        }
    }
    Ok(format!("max relative defect {worst:.2e} over 200 random pairs"))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("PASS criterion {id:>2} {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {id:>2} {name}: {why}");
            }
        }
    };
    match default_run() {
        Ok((traj, secs)) => {
            report(1, "energy dissipation", dissipation(&traj, secs));
            report(2, "bound preservation", bounds(&traj));
        }
        Err(e) => {
            report(1, "energy dissipation", Err(e.clone()));
            report(2, "bound preservation", Err(e));
        }
    }
    report(3, "step-size guard", tau_guard());
    report(4, "oracle equivalence", oracle_equivalence());
    report(5, "comparison contraction", comparison());
    report(6, "gradient consistency", gradient_consistency());
    report(7, "relaxation sandwich", sandwich());
    report(8, "subdifferential certificate", certificate());
    report(9, "delta continuation", continuation());
    report(10, "discrete calculus", discrete_calculus());
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
