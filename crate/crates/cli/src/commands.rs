use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kwc_core::diagnostics::audit::{dissipation_violations, slack_tolerance};
use kwc_core::diagnostics::{
    audit_bounds, audit_dissipation, comparison_experiment, compute_certificate, delta_continuation,
    ComparisonReport,
};
use kwc_core::energy::{eval_free_energy, EnergyBreakdown, EnergyMode, FieldPair};
use kwc_core::mesh::{build_mesh, Mesh};
use kwc_core::scheme::{run_scheme, State, Trajectory};
use kwc_core::{initial, Error as CoreError};

use crate::config::{parse_config, ConfigError, InitialData, RunConfig};

/// Largest admissible excursion of η or θ outside its box.
pub const BOUND_TOL: f64 = 1e-9;
/// Tolerance of the positive-part norm comparisons.
pub const COMPARISON_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "kwc", version, about = "KWC grain-boundary solver and audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Config file, as a positional argument.
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    pub config_path: Option<PathBuf>,
    /// Override the number of time steps.
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override the inner-solver tolerance.
    #[arg(long, value_name = "X")]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a trajectory and write the energy CSV and field snapshots.
    Run(Common),
    /// Re-check dissipation and bounds on a saved run directory (`--out`).
    Audit(Common),
    /// Coupled runs from ordered and from crossing initial data.
    Compare(Common),
    /// Run, then check the subdifferential certificate of the final state.
    Certificate(Common),
    /// Repeat the run for a decreasing list of relaxation parameters.
    SweepDelta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Parse and validate a config.
    Validate(Common),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("audit failed: {0}")]
    Audit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Audit(_) => 1,
            CliError::Solver(_) => 3,
            CliError::Core(e) if e.is_convergence() => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn write_file(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_err(format!("cannot write {}", path.display())))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_err(format!("cannot read {}", path.display())))
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let path = common
        .config
        .as_ref()
        .or(common.config_path.as_ref())
        .ok_or_else(|| CliError::Usage("a config file is required (--config PATH)".into()))?;
    let mut cfg = parse_config(path)?;
    if let Some(n) = common.steps {
        if n == 0 {
            return Err(CliError::Usage("--steps must be positive".into()));
        }
        cfg.run.n_steps = n;
    }
    if let Some(out) = &common.out {
        cfg.run.output_dir = out.clone();
    }
    if let Some(tol) = common.tol {
        if !(tol > 0.0) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        cfg.solver.tol_inner = tol;
    }
    Ok(cfg)
}

fn prepare_output(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.run.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(format!("cannot create {}", dir.display())))?;
    Ok(dir)
}

pub fn initial_state(cfg: &RunConfig, mesh: &Mesh) -> CliResult<State> {
    let params = cfg.params();
    Ok(match cfg.run.initial {
        InitialData::TwoGrain => initial::two_grain(mesh, &params),
        InitialData::Ground => initial::ground(mesh, &params),
        InitialData::Random => initial::random(mesh, &params, cfg.run.seed),
        InitialData::FromFile => {
            let read = |p: &Option<PathBuf>| -> CliResult<Vec<f64>> {
                let p = p.as_ref().ok_or_else(|| CliError::Usage("from_file needs eta_file and theta_file".into()))?;
                Ok(mesh.parse_field_csv(&read_file(p)?)?)
            };
            State::new(FieldPair::new(read(&cfg.run.eta_file)?), FieldPair::new(read(&cfg.run.theta_file)?))
        }
    })
}

pub const ENERGY_HEADER_EXTRA: &str = "diss_eta,diss_theta,slack,theta_outer_iters,eta_outer_iters";
pub const BOUNDS_HEADER: &str = "step,eta_min,eta_max,theta_min,theta_max";

fn energy_csv(traj: &Trajectory, mesh: &Mesh, cfg: &RunConfig) -> CliResult<String> {
    let rows = audit_dissipation(traj, mesh, &cfg.params())?;
    let mut out = format!("{},{}\n", EnergyBreakdown::CSV_HEADER, ENERGY_HEADER_EXTRA);
    for (i, (s, e)) in traj.states.iter().zip(&traj.energies).enumerate() {
        out.push_str(&e.csv_row(i, s.time));
        if i == 0 {
            out.push_str(",0,0,0,0,0\n");
        } else {
            let r = &rows[i - 1];
            let st = &traj.stats[i - 1];
            out.push_str(&format!(
                ",{},{},{},{},{}\n",
                r.diss_eta, r.diss_theta, r.slack, st.theta.outer_iterations, st.eta.outer_iterations
            ));
        }
    }
    Ok(out)
}

fn bounds_csv(traj: &Trajectory) -> String {
    let mut out = format!("{BOUNDS_HEADER}\n");
    for s in &traj.states {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.step_index,
            s.eta.min(),
            s.eta.max(),
            s.theta.min(),
            s.theta.max()
        ));
    }
    out
}

fn snapshot_steps(n: usize, every: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = if every == 0 {
        vec![0]
    } else {
        (0..=n).step_by(every).collect()
    };
    if steps.last() != Some(&n) {
        steps.push(n);
    }
    steps
}

fn write_outputs(dir: &Path, cfg: &RunConfig, mesh: &Mesh, traj: &Trajectory) -> CliResult<()> {
    write_file(dir, "config.toml", &cfg.to_toml())?;
    write_file(dir, "energy.csv", &energy_csv(traj, mesh, cfg)?)?;
    write_file(dir, "bounds.csv", &bounds_csv(traj))?;
    for k in snapshot_steps(traj.n_steps(), cfg.run.snapshot_interval) {
        let s = &traj.states[k];
        write_file(dir, &format!("snap_{k}_eta.csv"), &mesh.field_csv(&s.eta.bulk)?)?;
        write_file(dir, &format!("snap_{k}_theta.csv"), &mesh.field_csv(&s.theta.bulk)?)?;
    }
    Ok(())
}

fn run_trajectory(cfg: &RunConfig, mesh: &Mesh, dir: Option<&Path>) -> CliResult<Trajectory> {
    let params = cfg.params();
    let init = initial_state(cfg, mesh)?;
    match run_scheme(mesh, &params, &init, cfg.run.n_steps, &cfg.solver_options()) {
        Ok(traj) => Ok(traj),
        Err(CoreError::RunAborted { step, source, partial }) => {
            if let Some(dir) = dir {
                write_outputs(dir, cfg, mesh, &partial)?;
                eprintln!("partial trajectory of {} steps written to {}", partial.n_steps(), dir.display());
            }
            let err = CoreError::RunAborted {
                step,
                source,
                partial,
            };
            if err.is_convergence() {
                Err(CliError::Solver(err.to_string()))
            } else {
                Err(err.into())
            }
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(common: &Common) -> CliResult<()> {
    let cfg = load(common)?;
    let dir = prepare_output(&cfg)?;
    let mesh = build_mesh(&cfg.grid)?;
    let traj = run_trajectory(&cfg, &mesh, Some(&dir))?;
    write_outputs(&dir, &cfg, &mesh, &traj)?;

    let params = cfg.params();
    let f0 = traj.energies[0].total;
    let rows = audit_dissipation(&traj, &mesh, &params)?;
    let bad = dissipation_violations(&rows, f0);
    let bounds = audit_bounds(&traj, params.r0, params.r1);
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    eprintln!(
        "{} steps: energy {:.6e} -> {:.6e}, min slack {:.3e}, max bound excursion {:.3e}",
        traj.n_steps(),
        f0,
        traj.energies.last().map(|e| e.total).unwrap_or(f0),
        min_slack,
        bounds.max_excursion()
    );
    if !bad.is_empty() {
        return Err(CliError::Audit(format!("energy inequality violated at steps {bad:?}")));
    }
    if bounds.max_excursion() > BOUND_TOL {
        return Err(CliError::Audit(format!("bounds violated: {bounds:?}")));
    }
    Ok(())
}

fn parse_csv(text: &str, path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Usage(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> CliResult<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Usage(format!("{} has no `{name}` column", path.display())))
}

fn number(row: &[String], idx: usize, path: &Path) -> CliResult<f64> {
    row.get(idx)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| CliError::Usage(format!("{}: malformed row {row:?}", path.display())))
}

fn cmd_audit(common: &Common) -> CliResult<()> {
    let dir = match (&common.out, load(common)) {
        (Some(d), _) => d.clone(),
        (None, Ok(cfg)) => cfg.run.output_dir,
        (None, Err(e)) => return Err(e),
    };
    let cfg = parse_config(&dir.join("config.toml"))?;
    let params = cfg.params();
    let mesh = build_mesh(&cfg.grid)?;
    let mut failures = Vec::new();

    let energy_path = dir.join("energy.csv");
    let (header, rows) = parse_csv(&read_file(&energy_path)?, &energy_path)?;
    let (c_step, c_total, c_de, c_dt) = (
        column(&header, "step", &energy_path)?,
        column(&header, "total", &energy_path)?,
        column(&header, "diss_eta", &energy_path)?,
        column(&header, "diss_theta", &energy_path)?,
    );
    let mut totals = Vec::with_capacity(rows.len());
    for r in &rows {
        let step = number(r, c_step, &energy_path)? as usize;
        if step != totals.len() {
            return Err(CliError::Usage(format!("{}: steps are not consecutive", energy_path.display())));
        }
        totals.push((number(r, c_total, &energy_path)?, number(r, c_de, &energy_path)?, number(r, c_dt, &energy_path)?));
    }
    let f0 = totals.first().map(|t| t.0).ok_or_else(|| CliError::Usage("energy.csv has no rows".into()))?;
    let tol = slack_tolerance(f0);
    let mut min_slack = f64::INFINITY;
    for i in 1..totals.len() {
        let slack = totals[i - 1].0 - (totals[i].1 + totals[i].2 + totals[i].0);
        min_slack = min_slack.min(slack);
        if slack < -tol {
            failures.push(format!("step {i}: slack {slack:e}"));
        }
    }

    let bounds_path = dir.join("bounds.csv");
    let (header, rows) = parse_csv(&read_file(&bounds_path)?, &bounds_path)?;
    let cols: Vec<usize> = ["eta_min", "eta_max", "theta_min", "theta_max"]
        .iter()
        .map(|c| column(&header, c, &bounds_path))
        .collect::<CliResult<_>>()?;
    let mut worst = 0.0f64;
    for r in &rows {
        let v: Vec<f64> = cols.iter().map(|&c| number(r, c, &bounds_path)).collect::<CliResult<_>>()?;
        let exc = (-v[0]).max(v[1] - 1.0).max(params.r0 - v[2]).max(v[3] - params.r1).max(0.0);
        worst = worst.max(exc);
    }
    if worst > BOUND_TOL {
        failures.push(format!("bound excursion {worst:e}"));
    }

    // Snapshots must reproduce the recorded energy and respect the bounds.
    let mut snaps = 0;
    for (k, t) in totals.iter().enumerate() {
        let (pe, pt) = (dir.join(format!("snap_{k}_eta.csv")), dir.join(format!("snap_{k}_theta.csv")));
        if !pe.exists() || !pt.exists() {
            continue;
        }
        let eta = FieldPair::new(mesh.parse_field_csv(&read_file(&pe)?)?);
        let theta = FieldPair::new(mesh.parse_field_csv(&read_file(&pt)?)?);
        let e = eval_free_energy(&mesh, &params, &eta, &theta, EnergyMode::Relaxed)?.total;
        if (e - t.0).abs() > 1e-9 * (1.0 + t.0.abs()) {
            failures.push(format!("snapshot {k}: energy {e} differs from recorded {}", t.0));
        }
        let exc = (-eta.min())
            .max(eta.max() - 1.0)
            .max(params.r0 - theta.min())
            .max(theta.max() - params.r1);
        if exc > BOUND_TOL {
            failures.push(format!("snapshot {k}: bound excursion {exc:e}"));
        }
        snaps += 1;
    }
    eprintln!(
        "audited {} steps and {snaps} snapshots: min slack {min_slack:.3e} (tolerance {tol:.3e}), max excursion {worst:.3e}",
        totals.len().saturating_sub(1)
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Audit(failures.join("; ")))
    }
}

fn comparison_rows(label: &str, rep: &ComparisonReport) -> String {
    let mut out = String::new();
    for i in 0..rep.eta_norms.len() {
        let before = rep.theta_weighted_before[i];
        let before = if before.is_nan() { String::new() } else { before.to_string() };
        out.push_str(&format!(
            "{label},{i},{},{},{},{before}\n",
            rep.eta_norms[i], rep.theta_norms[i], rep.theta_weighted_norms[i]
        ));
    }
    out
}

fn cmd_compare(common: &Common) -> CliResult<()> {
    let cfg = load(common)?;
    let dir = prepare_output(&cfg)?;
    let mesh = build_mesh(&cfg.grid)?;
    let params = cfg.params();
    let opts = cfg.solver_options();
    let first = initial_state(&cfg, &mesh)?;

    let mut ordered = first.clone();
    for (k, c) in mesh.coords().iter().enumerate() {
        let bump = 0.05 * (1.0 + (6.0 * c[0]).sin() * (3.0 * c[1]).cos());
        ordered.eta.bulk[k] = (first.eta.bulk[k] + bump).min(1.0);
        ordered.theta.bulk[k] = (first.theta.bulk[k] + bump).min(params.r1);
    }
    let crossing = initial::random(&mesh, &params, cfg.run.seed.wrapping_add(1));
    let n = cfg.run.n_steps;
    let wrap = |e: CoreError| if e.is_convergence() { CliError::Solver(e.to_string()) } else { e.into() };
    let a = comparison_experiment(&mesh, &params, &first, &ordered, n, &opts).map_err(wrap)?;
    let b = comparison_experiment(&mesh, &params, &first, &crossing, n, &opts).map_err(wrap)?;
    let mut csv = String::from("pair,step,eta_norm,theta_norm,theta_weighted_norm,theta_weighted_before\n");
    csv.push_str(&comparison_rows("ordered", &a));
    csv.push_str(&comparison_rows("crossing", &b));
    write_file(&dir, "comparison.csv", &csv)?;

    let ordered_max = a.eta_norms.iter().copied().fold(0.0, f64::max);
    eprintln!(
        "ordered: max eta positive part {ordered_max:.3e}; crossing: eta {:.3e} -> {:.3e}",
        b.eta_norms[0], b.eta_norms[n]
    );
    let mut failures = Vec::new();
    if ordered_max > COMPARISON_TOL {
        failures.push(format!("ordered eta data lost order ({ordered_max:e})"));
    }
    for (name, rep) in [("ordered", &a), ("crossing", &b)] {
        let (e, t) = (rep.eta_increases(COMPARISON_TOL), rep.theta_increases(COMPARISON_TOL));
        if !e.is_empty() || !t.is_empty() {
            failures.push(format!("{name}: eta grew at {e:?}, theta grew at {t:?}"));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Audit(failures.join("; ")))
    }
}

fn cmd_certificate(common: &Common) -> CliResult<()> {
    let cfg = load(common)?;
    let dir = prepare_output(&cfg)?;
    let mesh = build_mesh(&cfg.grid)?;
    let traj = run_trajectory(&cfg, &mesh, None)?;
    let cert = compute_certificate(&mesh, &cfg.params(), traj.last())?;
    write_file(&dir, "certificate.csv", &cert.omega_csv(&mesh))?;
    write_file(&dir, "certificate_b2.csv", &cert.b2_csv())?;
    let (lo, hi) = cert.b1_range();
    eprintln!(
        "max |omega| {:.6}, b1 in [{lo:.3e}, {hi:.3e}], {} b2 violations",
        cert.max_norm_omega,
        cert.b2_violations().count()
    );
    if cert.passes() {
        Ok(())
    } else {
        Err(CliError::Audit("certificate conditions not met".into()))
    }
}

fn cmd_sweep(common: &Common, deltas: &[f64], workers: usize) -> CliResult<()> {
    let cfg = load(common)?;
    if workers == 0 {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    let dir = prepare_output(&cfg)?;
    let mesh = build_mesh(&cfg.grid)?;
    let init = initial_state(&cfg, &mesh)?;
    let table = delta_continuation(
        &mesh,
        &cfg.params(),
        &init,
        deltas,
        cfg.run.n_steps,
        &cfg.solver_options(),
        workers,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    write_file(&dir, "continuation.csv", &table.to_csv())?;
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("delta {}: {e}", r.delta)))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Solver(failed.join("; ")));
    }
    eprintln!(
        "distances between consecutive deltas: H {:?}, L2 {:?}",
        table.distances, table.l2_distances
    );
    if table.distances.len() >= 2 && !table.distances_strictly_decreasing() {
        return Err(CliError::Audit("distances are not strictly decreasing".into()));
    }
    Ok(())
}

fn cmd_validate(common: &Common) -> CliResult<()> {
    let cfg = load(common)?;
    let p = cfg.params();
    eprintln!("config ok: tau = {} < tau_star = {}", p.tau, p.tau_star());
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Audit(c) => cmd_audit(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Certificate(c) => cmd_certificate(c),
        Command::SweepDelta { common, deltas, workers } => cmd_sweep(common, deltas, *workers),
        Command::Validate(c) => cmd_validate(c),
    }
}

/// Runs the command and maps the outcome to the process exit code.
pub fn dispatch(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
