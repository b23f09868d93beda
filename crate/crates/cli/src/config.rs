//! Run configuration: a sectioned TOML file.

use std::fmt;
use std::path::{Path, PathBuf};

use kwc_core::mesh::MeshSpec;
use kwc_core::model::{ModelParams, ScalarFn};
use kwc_core::scheme::SolverOptions;
use kwc_core::LinearSolver;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kappa: f64,
    pub kappa_gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub tau: f64,
    pub r0: f64,
    pub r1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSection {
    pub g: ScalarFn,
    pub g_gamma: ScalarFn,
    pub alpha: ScalarFn,
    pub alpha0: ScalarFn,
    pub alpha_gamma0: ScalarFn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    TwoGrain,
    Ground,
    Random,
    FromFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_steps: usize,
    /// Write field snapshots every this many steps; 0 writes only the first and last state.
    #[serde(default)]
    pub snapshot_interval: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub initial: InitialData,
    /// Field CSVs for `initial = "from_file"`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol_inner: f64,
    pub max_outer: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub linear: LinearSolver,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol_inner: o.tol_inner,
            max_outer: o.max_outer,
            cg_tol: o.cg_tol,
            cg_max_iter: o.cg_max_iter,
            linear: o.linear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub functions: FunctionSection,
    pub grid: MeshSpec,
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverSection,
}

impl RunConfig {
    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        let f = &self.functions;
        ModelParams {
            kappa: m.kappa,
            kappa_gamma: m.kappa_gamma,
            epsilon: m.epsilon,
            delta: m.delta,
            tau: m.tau,
            r0: m.r0,
            r1: m.r1,
            g: f.g,
            g_gamma: f.g_gamma,
            alpha: f.alpha,
            alpha0: f.alpha0,
            alpha_gamma0: f.alpha_gamma0,
            grid: self.grid.clone(),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            tol_inner: s.tol_inner,
            max_outer: s.max_outer,
            cg_tol: s.cg_tol,
            cg_max_iter: s.cg_max_iter,
            linear: s.linear,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The desk-scale defaults shipped as `configs/default.toml`.
    pub fn default_desk() -> Self {
        let p = ModelParams::default();
        Self {
            model: ModelSection {
                kappa: p.kappa,
                kappa_gamma: p.kappa_gamma,
                epsilon: p.epsilon,
                delta: p.delta,
                tau: p.tau,
                r0: p.r0,
                r1: p.r1,
            },
            functions: FunctionSection {
                g: p.g,
                g_gamma: p.g_gamma,
                alpha: p.alpha,
                alpha0: p.alpha0,
                alpha_gamma0: p.alpha_gamma0,
            },
            grid: p.grid,
            run: RunSection {
                n_steps: 500,
                snapshot_interval: 50,
                output_dir: PathBuf::from("out"),
                seed: 0,
                initial: InitialData::TwoGrain,
                eta_file: None,
                theta_file: None,
            },
            solver: SolverSection::default(),
        }
    }
}

/// One problem found while reading a config.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub key: String,
    pub line: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {}): {}", self.key, l, self.reason),
            None => write!(f, "{}: {}", self.key, self.reason),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", render(.0))]
    Invalid(Vec<Diagnostic>),
}

fn render(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]`, if present.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if key.is_empty() && current == section {
                return Some(k + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

fn syntax_diagnostic(text: &str, err: &toml::de::Error) -> Diagnostic {
    let msg = err.message().to_string();
    let line = err.span().map(|s| line_of_offset(text, s.start));
    let key = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("missing field") || msg.contains("unknown field"))
        .unwrap_or("<document>")
        .to_string();
    Diagnostic { key, line, reason: msg }
}

/// Where an assumption label is configured.
fn key_for_label(label: &str, description: &str) -> (&'static str, &'static str) {
    match label {
        "A1" if description.starts_with("g_gamma") || description.contains("of g_gamma") => ("functions", "g_gamma"),
        "A1" => ("functions", "g"),
        "A2" if description.starts_with("alpha_gamma0") => ("functions", "alpha_gamma0"),
        "A2" => ("functions", "alpha0"),
        "A3" => ("functions", "alpha"),
        "A4" => ("functions", ""),
        "tau" => ("model", "tau"),
        "grid" => ("grid", ""),
        _ => ("model", ""),
    }
}

/// Checks the config against every model assumption and the step-size bound.
pub fn validate(cfg: &RunConfig, text: &str) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let params = cfg.params();
    let report = params.validate_assumptions();
    for c in report.failures() {
        let (section, key) = key_for_label(c.label, &c.description);
        let reason = match c.label {
            "tau" => format!(
                "(tau < tau_star) violated: tau = {} but tau_star = {} from Lipschitz estimates {} and {}",
                cfg.model.tau, report.tau_star, report.lip_g, report.lip_g_gamma
            ),
            label => match c.witness {
                Some(w) => format!("({label}) {} fails at sample {w}", c.description),
                None => format!("({label}) {} fails", c.description),
            },
        };
        out.push(Diagnostic {
            key: if key.is_empty() {
                section.to_string()
            } else {
                format!("{section}.{key}")
            },
            line: line_of_key(text, section, key),
            reason,
        });
    }
    if cfg.run.n_steps == 0 {
        out.push(Diagnostic {
            key: "run.n_steps".into(),
            line: line_of_key(text, "run", "n_steps"),
            reason: "must be positive".into(),
        });
    }
    if cfg.run.initial == InitialData::FromFile && (cfg.run.eta_file.is_none() || cfg.run.theta_file.is_none()) {
        out.push(Diagnostic {
            key: "run.initial".into(),
            line: line_of_key(text, "run", "initial"),
            reason: "from_file needs both eta_file and theta_file".into(),
        });
    }
    let s = &cfg.solver;
    if !(s.tol_inner > 0.0) || !(s.cg_tol > 0.0) {
        out.push(Diagnostic {
            key: "solver".into(),
            line: line_of_key(text, "solver", ""),
            reason: "tolerances must be positive".into(),
        });
    }
    out
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(vec![syntax_diagnostic(text, &e)]))?;
    let diags = validate(&cfg, text);
    if diags.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(diags))
    }
}

/// Reads and fully validates a config. Relative input-file paths are resolved
/// against the directory of `path`.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for f in [&mut cfg.run.eta_file, &mut cfg.run.theta_file].into_iter().flatten() {
        if f.is_relative() {
            *f = base.join(&*f);
        }
    }
    Ok(cfg)
}
