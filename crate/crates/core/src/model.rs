//! Model functions, constants and assumption checks.
//!
//! Everything here is pure. The scalar model functions (`g`, `g_Γ`, `α`,
//! `α₀`, `α_{Γ,0}`) are chosen from a small closed family of selectors so
//! that primitives and derivatives are available in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::MeshSpec;

/// Sampling window and resolution used by every sample-based assumption check.
pub const SAMPLE_LO: f64 = -2.0;
pub const SAMPLE_HI: f64 = 3.0;
pub const SAMPLE_COUNT: usize = 1001;

/// Serialized form of a scalar model function: a selector tag plus coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnSpec {
    pub kind: String,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

/// Closed-form scalar function on ℝ with first and second derivatives and a primitive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FnSpec", into = "FnSpec")]
pub enum ScalarFn {
    /// `c`; primitive `c·x`.
    Constant(f64),
    /// `slope·(x − root)`; primitive `slope/2·(x − root)²`.
    LinearG { slope: f64, root: f64 },
    /// `intercept + slope·x`; primitive `intercept·x + slope/2·x²`.
    Linear { intercept: f64, slope: f64 },
    /// `base + curvature/2·x²`.
    QuadraticAlpha { base: f64, curvature: f64 },
}

impl ScalarFn {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Constant(c) => c,
            ScalarFn::LinearG { slope, root } => slope * (x - root),
            ScalarFn::Linear { intercept, slope } => intercept + slope * x,
            ScalarFn::QuadraticAlpha { base, curvature } => base + 0.5 * curvature * x * x,
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Constant(_) => 0.0,
            ScalarFn::LinearG { slope, .. } => slope,
            ScalarFn::Linear { slope, .. } => slope,
            ScalarFn::QuadraticAlpha { curvature, .. } => curvature * x,
        }
    }

    #[inline]
    pub fn second_derivative(&self, _x: f64) -> f64 {
        match *self {
            ScalarFn::QuadraticAlpha { curvature, .. } => curvature,
            _ => 0.0,
        }
    }

    /// The primitive used for the potential `ĝ`; zero at the natural anchor of each family.
    #[inline]
    pub fn primitive(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Constant(c) => c * x,
            ScalarFn::LinearG { slope, root } => 0.5 * slope * (x - root) * (x - root),
            ScalarFn::Linear { intercept, slope } => intercept * x + 0.5 * slope * x * x,
            ScalarFn::QuadraticAlpha { base, curvature } => {
                base * x + curvature * x * x * x / 6.0
            }
        }
    }
}

impl TryFrom<FnSpec> for ScalarFn {
    type Error = Error;

    fn try_from(spec: FnSpec) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if spec.coeffs.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "function kind `{}` takes {} coefficient(s), got {}",
                    spec.kind,
                    n,
                    spec.coeffs.len()
                )));
            }
            if spec.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "function kind `{}` has non-finite coefficients",
                    spec.kind
                )));
            }
            Ok(())
        };
        let c = &spec.coeffs;
        match spec.kind.as_str() {
            "constant" => {
                want(1)?;
                Ok(ScalarFn::Constant(c[0]))
            }
            "linear_g" => {
                want(2)?;
                Ok(ScalarFn::LinearG {
                    slope: c[0],
                    root: c[1],
                })
            }
            "linear" => {
                want(2)?;
                Ok(ScalarFn::Linear {
                    intercept: c[0],
                    slope: c[1],
                })
            }
            "quadratic_alpha" => {
                want(2)?;
                Ok(ScalarFn::QuadraticAlpha {
                    base: c[0],
                    curvature: c[1],
                })
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown function kind `{other}` (expected constant, linear_g, linear or quadratic_alpha)"
            ))),
        }
    }
}

impl From<ScalarFn> for FnSpec {
    fn from(f: ScalarFn) -> Self {
        let (kind, coeffs) = match f {
            ScalarFn::Constant(c) => ("constant", vec![c]),
            ScalarFn::LinearG { slope, root } => ("linear_g", vec![slope, root]),
            ScalarFn::Linear { intercept, slope } => ("linear", vec![intercept, slope]),
            ScalarFn::QuadraticAlpha { base, curvature } => ("quadratic_alpha", vec![base, curvature]),
        };
        FnSpec {
            kind: kind.to_string(),
            coeffs,
        }
    }
}

/// All constants and model functions of the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Bulk Dirichlet weight on η.
    pub kappa: f64,
    /// Surface Dirichlet weight on θ_Γ.
    pub kappa_gamma: f64,
    /// Surface Dirichlet weight on η_Γ (may be zero).
    pub epsilon: f64,
    /// Regularization of the Euclidean norm.
    pub delta: f64,
    pub tau: f64,
    pub r0: f64,
    pub r1: f64,
    pub g: ScalarFn,
    pub g_gamma: ScalarFn,
    pub alpha: ScalarFn,
    pub alpha0: ScalarFn,
    pub alpha_gamma0: ScalarFn,
    pub grid: MeshSpec,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            kappa: 0.05,
            kappa_gamma: 0.05,
            epsilon: 1.0,
            delta: 0.05,
            tau: 0.01,
            r0: 0.0,
            r1: 1.0,
            g: ScalarFn::LinearG {
                slope: 1.0,
                root: 1.0,
            },
            g_gamma: ScalarFn::LinearG {
                slope: 1.0,
                root: 1.0,
            },
            alpha: ScalarFn::QuadraticAlpha {
                base: 0.1,
                curvature: 1.0,
            },
            alpha0: ScalarFn::Constant(1.0),
            alpha_gamma0: ScalarFn::Constant(1.0),
            grid: MeshSpec::default(),
        }
    }
}

impl ModelParams {
    /// Structural invariants on the scalar constants (not the sampled assumptions).
    pub fn check_constants(&self) -> Result<()> {
        let finite = [
            self.kappa,
            self.kappa_gamma,
            self.epsilon,
            self.delta,
            self.tau,
            self.r0,
            self.r1,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite model constant".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!("kappa = {} must be > 0", self.kappa)));
        }
        if self.kappa_gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa_gamma = {} must be > 0",
                self.kappa_gamma
            )));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be >= 0",
                self.epsilon
            )));
        }
        if self.delta <= 0.0 {
            return Err(Error::InvalidParameter(format!("delta = {} must be > 0", self.delta)));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParameter(format!("tau = {} must be > 0", self.tau)));
        }
        if self.r0 > self.r1 {
            return Err(Error::InvalidParameter(format!(
                "r0 = {} must not exceed r1 = {}",
                self.r0, self.r1
            )));
        }
        Ok(())
    }

    /// Sampled Lipschitz constants of `g` and `g_Γ`.
    pub fn lipschitz_estimates(&self) -> (f64, f64) {
        (sampled_lipschitz(&self.g), sampled_lipschitz(&self.g_gamma))
    }

    pub fn tau_star(&self) -> f64 {
        let (lg, lgg) = self.lipschitz_estimates();
        // Inputs are nonnegative by construction.
        tau_star(lg, lgg).expect("sampled Lipschitz constants are nonnegative")
    }

    /// Refuse any step size at or above `tau_star`.
    pub fn check_tau(&self) -> Result<()> {
        let ts = self.tau_star();
        if !(self.tau < ts) {
            return Err(Error::StepSize {
                tau: self.tau,
                tau_star: ts,
            });
        }
        Ok(())
    }

    pub fn validate_assumptions(&self) -> ValidationReport {
        validate_assumptions(self)
    }
}

fn samples() -> impl Iterator<Item = f64> {
    let step = (SAMPLE_HI - SAMPLE_LO) / (SAMPLE_COUNT - 1) as f64;
    (0..SAMPLE_COUNT).map(move |k| SAMPLE_LO + step * k as f64)
}

/// Largest of the sampled difference quotients and sampled |f'| over the window.
fn sampled_lipschitz(f: &ScalarFn) -> f64 {
    let xs: Vec<f64> = samples().collect();
    let quotients = xs
        .windows(2)
        .map(|w| ((f.value(w[1]) - f.value(w[0])) / (w[1] - w[0])).abs());
    let slopes = xs.iter().map(|&x| f.derivative(x).abs());
    quotients.chain(slopes).fold(0.0, f64::max)
}

/// `√(δ² + |ω|²) − δ`, evaluated in a cancellation-free form.
pub fn eval_f_delta(delta: f64, omega: &[f64]) -> Result<f64> {
    check_delta(delta)?;
    let sq: f64 = omega.iter().map(|w| w * w).sum();
    Ok(sq / ((delta * delta + sq).sqrt() + delta))
}

/// `ω / √(δ² + |ω|²)`.
pub fn eval_grad_f_delta(delta: f64, omega: &[f64]) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let sq: f64 = omega.iter().map(|w| w * w).sum();
    let inv = 1.0 / (delta * delta + sq).sqrt();
    Ok(omega.iter().map(|w| w * inv).collect())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be > 0")));
    }
    Ok(())
}

/// Scalar (one-component) version of the relaxed norm, used on edges.
#[derive(Clone, Copy, Debug)]
pub struct RelaxedNorm {
    delta: f64,
}

impl RelaxedNorm {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn value(&self, a: f64) -> f64 {
        let d = self.delta;
        a * a / ((d * d + a * a).sqrt() + d)
    }

    #[inline]
    pub fn derivative(&self, a: f64) -> f64 {
        a / (self.delta * self.delta + a * a).sqrt()
    }

    /// `1/√(δ² + a²)`, the frozen diffusivity of the lagged fixed point.
    #[inline]
    pub fn lagged_coefficient(&self, a: f64) -> f64 {
        1.0 / (self.delta * self.delta + a * a).sqrt()
    }

    #[inline]
    pub fn second_derivative(&self, a: f64) -> f64 {
        let s = self.delta * self.delta + a * a;
        self.delta * self.delta / (s * s.sqrt())
    }
}

/// `1 / (2(1 + lip_g + lip_g_gamma))`.
pub fn tau_star(lip_g: f64, lip_g_gamma: f64) -> Result<f64> {
    if !(lip_g >= 0.0) || !(lip_g_gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Lipschitz constants must be >= 0, got {lip_g} and {lip_g_gamma}"
        )));
    }
    Ok(1.0 / (2.0 * (1.0 + lip_g + lip_g_gamma)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    /// Short label, e.g. `A1` or `tau`.
    pub label: &'static str,
    pub description: String,
    pub passed: bool,
    /// Sample point at which the check failed.
    pub witness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub lip_g: f64,
    pub lip_g_gamma: f64,
    pub tau_star: f64,
    pub delta_alpha: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed(&self, label: &str) -> bool {
        self.checks.iter().any(|c| c.label == label && !c.passed)
    }
}

fn first_violation(pred: impl Fn(f64) -> bool) -> Option<f64> {
    samples().find(|&x| !pred(x))
}

pub fn validate_assumptions(p: &ModelParams) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |label, description: String, witness: Option<f64>, passed: bool| {
        checks.push(AssumptionCheck {
            label,
            description,
            passed,
            witness,
        })
    };

    let constants = p.check_constants();
    push(
        "params",
        match &constants {
            Ok(()) => "kappa > 0, kappa_gamma > 0, epsilon >= 0, delta > 0, tau > 0, r0 <= r1".into(),
            Err(e) => e.to_string(),
        },
        None,
        constants.is_ok(),
    );
    let grid = p.grid.check();
    push(
        "grid",
        match &grid {
            Ok(()) => "mesh spec is well formed".into(),
            Err(e) => e.to_string(),
        },
        None,
        grid.is_ok(),
    );

    // (A1)
    for (name, f) in [("g", &p.g), ("g_gamma", &p.g_gamma)] {
        let at0 = f.value(0.0);
        push("A1", format!("{name}(0) = {at0} <= 0"), Some(0.0), at0 <= 0.0);
        let at1 = f.value(1.0);
        push("A1", format!("{name}(1) = {at1} >= 0"), Some(1.0), at1 >= 0.0);
        let w = first_violation(|x| f.primitive(x) >= 0.0);
        push("A1", format!("primitive of {name} is nonnegative on samples"), w, w.is_none());
    }

    // (A2)
    for (name, f) in [("alpha0", &p.alpha0), ("alpha_gamma0", &p.alpha_gamma0)] {
        let w = first_violation(|x| f.value(x) > 0.0);
        push("A2", format!("{name} > 0 on samples"), w, w.is_none());
    }

    // (A3)
    let d0 = p.alpha.derivative(0.0);
    push(
        "A3",
        format!("alpha'(0) = {d0} vanishes"),
        if d0 == 0.0 { None } else { Some(0.0) },
        d0 == 0.0,
    );
    let w = first_violation(|x| p.alpha.second_derivative(x) >= 0.0);
    push("A3", "alpha'' >= 0 on samples".into(), w, w.is_none());
    let w = first_violation(|x| p.alpha.value(x) > 0.0);
    push("A3", "alpha > 0 on samples".into(), w, w.is_none());

    // (A4)
    let delta_alpha = samples()
        .flat_map(|x| [p.alpha.value(x), p.alpha0.value(x), p.alpha_gamma0.value(x)])
        .fold(f64::INFINITY, f64::min);
    push(
        "A4",
        format!("delta_alpha = {delta_alpha} > 0"),
        None,
        delta_alpha > 0.0,
    );

    let (lip_g, lip_g_gamma) = p.lipschitz_estimates();
    let ts = tau_star(lip_g, lip_g_gamma).unwrap_or(f64::NAN);
    push(
        "tau",
        format!("tau = {} < tau_star = {}", p.tau, ts),
        None,
        p.tau < ts,
    );

    ValidationReport {
        checks,
        lip_g,
        lip_g_gamma,
        tau_star: ts,
        delta_alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn f_delta_examples() {
        assert_eq!(eval_f_delta(3.0, &[4.0, 0.0]).unwrap(), 2.0);
        assert_eq!(eval_f_delta(1.0, &[0.0, 0.0]).unwrap(), 0.0);
        let v = eval_f_delta(0.05, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(v, (0.0025f64 + 2.0).sqrt() - 0.05, max_relative = 1e-14);
        assert!(matches!(eval_f_delta(0.0, &[1.0]), Err(Error::InvalidParameter(_))));
        assert!(eval_f_delta(-1.0, &[1.0]).is_err());
    }

    #[test]
    fn grad_f_delta_examples() {
        let g = eval_grad_f_delta(4.0, &[3.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 0.6, max_relative = 1e-15);
        assert_eq!(g[1], 0.0);
        assert_eq!(eval_grad_f_delta(1.0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let g = eval_grad_f_delta(0.01, &[10.0, 0.0]).unwrap();
        let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!(n >= 0.9999 && n < 1.0);
        assert!(eval_grad_f_delta(0.0, &[1.0]).is_err());
    }

    #[test]
    fn tau_star_examples() {
        assert_relative_eq!(tau_star(1.0, 1.0).unwrap(), 1.0 / 6.0);
        assert_eq!(tau_star(0.0, 0.0).unwrap(), 0.5);
        assert_eq!(tau_star(3.0, 0.0).unwrap(), 0.125);
        assert!(tau_star(-1.0, 0.0).is_err());
    }

    #[test]
    fn default_params_pass() {
        let r = ModelParams::default().validate_assumptions();
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.delta_alpha, 0.1);
        assert!(r.lip_g >= 1.0 && r.lip_g < 1.0 + 1e-9);
    }

    #[test]
    fn linear_alpha_fails_a3_at_zero() {
        let p = ModelParams {
            alpha: ScalarFn::Linear {
                intercept: 0.0,
                slope: 1.0,
            },
            ..Default::default()
        };
        let r = p.validate_assumptions();
        let a3 = r.checks.iter().find(|c| c.label == "A3" && !c.passed).unwrap();
        assert_eq!(a3.witness, Some(0.0));
    }

    #[test]
    fn constant_positive_g_fails_a1() {
        let p = ModelParams {
            g: ScalarFn::Constant(1.0),
            ..Default::default()
        };
        let r = p.validate_assumptions();
        assert!(r.failed("A1"));
        let c = r
            .checks
            .iter()
            .find(|c| c.label == "A1" && c.description.starts_with("g(0)"))
            .unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn tau_guard_at_boundary() {
        let mut p = ModelParams {
            tau: 1.0 / 6.0,
            ..Default::default()
        };
        assert!(matches!(p.check_tau(), Err(Error::StepSize { .. })));
        p.tau = 1.0 / 6.0 - 1e-6;
        assert!(p.check_tau().is_ok());
    }

    #[test]
    fn fn_spec_rejects_bad_arity() {
        let bad = FnSpec {
            kind: "linear_g".into(),
            coeffs: vec![1.0],
        };
        assert!(ScalarFn::try_from(bad).is_err());
        let unknown = FnSpec {
            kind: "cubic".into(),
            coeffs: vec![],
        };
        assert!(ScalarFn::try_from(unknown).is_err());
    }

    #[test]
    fn primitives_differentiate_back() {
        let fns = [
            ScalarFn::Constant(0.7),
            ScalarFn::LinearG { slope: 2.0, root: 0.3 },
            ScalarFn::Linear { intercept: -0.5, slope: 1.5 },
            ScalarFn::QuadraticAlpha { base: 0.1, curvature: 2.0 },
        ];
        for f in fns {
            for x in [-1.3, 0.0, 0.4, 2.2] {
                let h = 1e-5;
                let fd = (f.primitive(x + h) - f.primitive(x - h)) / (2.0 * h);
                assert_relative_eq!(fd, f.value(x), epsilon = 1e-8, max_relative = 1e-8);
                let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                assert_relative_eq!(fd, f.derivative(x), epsilon = 1e-8, max_relative = 1e-8);
            }
        }
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 2)
    }

    proptest! {
        #[test]
        fn sandwich(w in vec2(), delta in 1e-3f64..5.0) {
            let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let f = eval_f_delta(delta, &w).unwrap();
            prop_assert!(f >= 0.0);
            prop_assert!(norm - f >= -1e-12);
            prop_assert!(norm - f <= delta + 1e-12);
        }

        #[test]
        fn monotone_in_delta(w in vec2(), d1 in 1e-3f64..2.0, extra in 1e-3f64..2.0) {
            let d2 = d1 + extra;
            prop_assert!(eval_f_delta(d1, &w).unwrap() >= eval_f_delta(d2, &w).unwrap() - 1e-14);
        }

        #[test]
        fn convex(a in vec2(), b in vec2(), lam in 0.0f64..1.0, delta in 1e-2f64..2.0) {
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
            let lhs = eval_f_delta(delta, &m).unwrap();
            let rhs = lam * eval_f_delta(delta, &a).unwrap() + (1.0 - lam) * eval_f_delta(delta, &b).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn gradient_matches_central_differences(w in vec2(), delta in 0.05f64..2.0) {
            let g = eval_grad_f_delta(delta, &w).unwrap();
            prop_assert!((g[0] * g[0] + g[1] * g[1]).sqrt() < 1.0);
            for k in 0..2 {
                let h = 1e-5 * (1.0 + w[k].abs());
                let mut p = w.clone();
                let mut m = w.clone();
                p[k] += h;
                m[k] -= h;
                let fd = (eval_f_delta(delta, &p).unwrap() - eval_f_delta(delta, &m).unwrap()) / (2.0 * h);
                let err = (fd - g[k]).abs() / g[k].abs().max(1e-3);
                prop_assert!(err < 1e-6, "k={} fd={} g={}", k, fd, g[k]);
            }
        }

        #[test]
        fn tau_star_range(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let t = tau_star(a, b).unwrap();
            prop_assert!(t > 0.0 && t <= 0.5);
        }
    }
}
