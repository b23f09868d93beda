use kwc_core::diagnostics::{oracle_objective, oracle_step, OracleSelector};
use kwc_core::energy::{alpha_field, eval_free_energy, eval_phi_delta, EnergyMode, FieldPair};
use kwc_core::initial;
use kwc_core::mesh::{build_mesh, MeshSpec};
use kwc_core::model::ModelParams;
use kwc_core::scheme::{
    eta_step, eta_step_from, interpolate_trajectory, run_scheme, theta_step, theta_step_from, InterpolationKind,
    SolverOptions, ThetaObjective,
};
use proptest::prelude::*;

fn strip_params() -> ModelParams {
    ModelParams {
        grid: MeshSpec::strip(10, 5, 1.0, 1.0),
        ..Default::default()
    }
}

fn unit_field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_delta_is_midpoint_convex(a in unit_field(50), b in unit_field(50), eta in unit_field(50)) {
        let p = strip_params();
        let m = build_mesh(&p.grid).unwrap();
        let beta = alpha_field(&p, &eta);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let phi = |t: Vec<f64>| eval_phi_delta(&m, p.delta, &beta, &FieldPair::new(t), p.kappa_gamma).unwrap();
        let lhs = phi(mid);
        let rhs = 0.5 * phi(a) + 0.5 * phi(b);
        prop_assert!(lhs <= rhs + 1e-14 * rhs.abs());
    }

    #[test]
    fn breakdown_is_nonnegative_and_additive(eta in unit_field(50), theta in unit_field(50)) {
        let p = strip_params();
        let m = build_mesh(&p.grid).unwrap();
        for mode in [EnergyMode::Relaxed, EnergyMode::Singular] {
            let e = eval_free_energy(&m, &p, &FieldPair::new(eta.clone()), &FieldPair::new(theta.clone()), mode).unwrap();
            prop_assert!(e.components().iter().all(|&c| c >= 0.0));
            let sum: f64 = e.components().iter().sum();
            prop_assert!((sum - e.total).abs() <= 1e-14 * e.total.max(1.0));
        }
    }

    #[test]
    fn phi_delta_decreases_toward_tv_bound(theta in unit_field(50), eta in unit_field(50)) {
        let p = strip_params();
        let m = build_mesh(&p.grid).unwrap();
        let beta = alpha_field(&p, &eta);
        let th = FieldPair::new(theta);
        let sing = eval_free_energy(&m, &p, &FieldPair::new(eta.clone()), &th, EnergyMode::Singular).unwrap();
        let phi0 = sing.weighted_length + sing.theta_surface_dirichlet;
        for d in [0.1, 0.05, 0.025, 0.0125] {
            let phid = eval_phi_delta(&m, d, &beta, &th, p.kappa_gamma).unwrap();
            let bound = kwc_core::energy::relaxation_gap_bound(&m, d, &beta, &th.bulk);
            prop_assert!((phid - phi0).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn theta_step_does_not_increase_objective(eta in unit_field(50), theta in unit_field(50)) {
        let p = strip_params();
        let m = build_mesh(&p.grid).unwrap();
        let (eta, theta) = (FieldPair::new(eta), FieldPair::new(theta));
        let (out, stats) = theta_step(&m, &p, &eta, &theta, &SolverOptions::default()).unwrap();
        let obj = ThetaObjective::new(&m, &p, &eta, &theta).unwrap();
        prop_assert!(obj.value(&out.bulk) <= obj.value(&theta.bulk));
        prop_assert!(stats.objective_decrease >= 0.0);
    }

    #[test]
    fn step_solutions_do_not_depend_on_the_initial_guess(
        eta in unit_field(50), theta in unit_field(50), guess in unit_field(50)
    ) {
        let p = strip_params();
        let m = build_mesh(&p.grid).unwrap();
        let opts = SolverOptions::default();
        let (eta, theta) = (FieldPair::new(eta), FieldPair::new(theta));
        let (a, _) = theta_step(&m, &p, &eta, &theta, &opts).unwrap();
        let (b, _) = theta_step_from(&m, &p, &eta, &theta, Some(&guess), &opts).unwrap();
        let d = a.bulk.iter().zip(&b.bulk).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-8, "theta {d:e}");
        let (a, _) = eta_step(&m, &p, &eta, &a, &opts).unwrap();
        let (c, _) = eta_step_from(&m, &p, &eta, &b, Some(&guess), &opts).unwrap();
        let d = a.bulk.iter().zip(&c.bulk).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-8, "eta {d:e}");
    }
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let p = strip_params();
    let m = build_mesh(&p.grid).unwrap();
    let init = initial::random(&m, &p, 42);
    let a = run_scheme(&m, &p, &init, 10, &SolverOptions::default()).unwrap();
    let b = run_scheme(&m, &p, &init, 10, &SolverOptions::default()).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x, y);
    }
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert_eq!(x, y);
    }
}

#[test]
fn energy_never_exceeds_initial_value() {
    let p = strip_params();
    let m = build_mesh(&p.grid).unwrap();
    let init = initial::two_grain(&m, &p);
    let traj = run_scheme(&m, &p, &init, 40, &SolverOptions::default()).unwrap();
    let f0 = traj.energies[0].total;
    assert!(traj.energies.iter().all(|e| e.total <= f0 + 1e-8 * (1.0 + f0)));
}

#[test]
fn interpolants_agree_at_every_knot() {
    let p = strip_params();
    let m = build_mesh(&p.grid).unwrap();
    let init = initial::two_grain(&m, &p);
    let traj = run_scheme(&m, &p, &init, 6, &SolverOptions::default()).unwrap();
    for i in 0..=6 {
        let t = i as f64 * p.tau;
        let f = interpolate_trajectory(&traj, t, InterpolationKind::Forward).unwrap();
        let b = interpolate_trajectory(&traj, t, InterpolationKind::Backward).unwrap();
        let l = interpolate_trajectory(&traj, t, InterpolationKind::Linear).unwrap();
        assert_eq!(f.theta, traj.states[i].theta);
        assert_eq!(b.eta, traj.states[i].eta);
        assert_eq!(l.theta, traj.states[i].theta);
    }
}

#[test]
fn oracle_returns_flat_data_unchanged() {
    let p = ModelParams {
        grid: MeshSpec::interval(8, 1.0),
        ..Default::default()
    };
    let m = build_mesh(&p.grid).unwrap();
    let eta = FieldPair::new((0..8).map(|k| k as f64 / 8.0).collect());
    let flat = FieldPair::constant(&m, 0.4);
    let out = oracle_step(&m, &p, OracleSelector::Theta, &eta, &flat).unwrap();
    assert_eq!(out, flat);
}

#[test]
fn oracle_value_is_not_above_production_value() {
    let p = ModelParams {
        grid: MeshSpec::interval(8, 1.0),
        ..Default::default()
    };
    let m = build_mesh(&p.grid).unwrap();
    let eta = FieldPair::new(vec![0.9, 0.1, 0.5, 0.3, 0.8, 0.2, 0.6, 0.7]);
    let theta = FieldPair::new(vec![0.0, 0.1, 0.0, 1.0, 0.9, 1.0, 0.2, 0.5]);
    let (prod, _) = theta_step(&m, &p, &eta, &theta, &SolverOptions::default()).unwrap();
    let orc = oracle_step(&m, &p, OracleSelector::Theta, &eta, &theta).unwrap();
    let f = |x: &[f64]| oracle_objective(&m, &p, OracleSelector::Theta, &eta, &theta, x).unwrap();
    assert!(f(&orc.bulk) <= f(&prod.bulk) + 1e-12);
    let (prod_e, _) = eta_step(&m, &p, &eta, &prod, &SolverOptions::default()).unwrap();
    let orc_e = oracle_step(&m, &p, OracleSelector::Eta, &eta, &prod).unwrap();
    let g = |x: &[f64]| oracle_objective(&m, &p, OracleSelector::Eta, &eta, &prod, x).unwrap();
    assert!(g(&orc_e.bulk) <= g(&prod_e.bulk) + 1e-12);
}

#[test]
fn oracle_rejects_large_meshes() {
    let p = ModelParams::default();
    let m = build_mesh(&p.grid).unwrap();
    let s = initial::two_grain(&m, &p);
    assert!(oracle_step(&m, &p, OracleSelector::Eta, &s.eta, &s.theta).is_err());
}
