//! Test functions `h : [0,1] → ℝ` applied to truncated-projection spectra,
//! and membership checks for the admissible classes `ℍ_d`.
//!
//! The admissible class in dimension `d ≥ 2` asks for `h(0) = 0` together
//! with Hölder-type growth `|h(λ)| ≤ C λ^α` and `|h(1) - h(1-λ)| ≤ C λ^α`
//! for some exponent `α > 1/d`. In `d = 1` the class is instead pinned by
//! symmetry `h = h(1-·)` plus the little-o condition `h(λ) = o(λ ln λ)` at
//! the endpoints. The Rényi entropies `h_α` belong to `ℍ_d` exactly when
//! `d > 1/α`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{CoreError, Result};

/// Logarithm base for entropy functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LogBase {
    /// log₂ — entropies in bits.
    Bits,
    /// natural log — entropies in nats.
    Nats,
}

impl LogBase {
    fn ln_of_base(self) -> f64 {
        match self {
            LogBase::Bits => std::f64::consts::LN_2,
            LogBase::Nats => 1.0,
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogBase::Bits => write!(f, "bits"),
            LogBase::Nats => write!(f, "nats"),
        }
    }
}

/// A scalar test function applied spectrally to truncated projections.
///
/// Carries the evaluator plus the metadata the membership and prediction
/// machinery needs: the value at 1, an optionally declared Hölder exponent
/// for the growth at both endpoints, and the log base for entropies.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Evaluator for `h(1-μ)` taking μ directly, so that μ far below machine
    /// epsilon is not lost to the rounding of `1-μ`. Built-ins provide exact
    /// reflected forms.
    eval_refl: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    value_at_one: f64,
    holder: Option<f64>,
    base: Option<LogBase>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("value_at_one", &self.value_at_one)
            .field("holder", &self.holder)
            .finish()
    }
}

impl TestFunction {
    /// Evaluate `h(λ)`. Arguments are expected in `[0,1]`; endpoint values
    /// use the exact conventions (`0 log 0 := 0`).
    pub fn eval(&self, lambda: f64) -> f64 {
        (self.eval)(lambda)
    }

    /// Evaluate `h(1-μ)` given μ, preserving μ below machine epsilon when an
    /// exact reflected form is available.
    pub fn eval_one_minus(&self, mu: f64) -> f64 {
        match &self.eval_refl {
            Some(g) => g(mu),
            None => (self.eval)(1.0 - mu),
        }
    }

    /// Canonical name, e.g. `renyi:2:bits`, `s:1`, `id`.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// `h(1)`, evaluated once at construction.
    pub fn value_at_one(&self) -> f64 {
        self.value_at_one
    }

    /// Declared Hölder exponent, if the constructor knows one.
    pub fn holder_exponent(&self) -> Option<f64> {
        self.holder
    }

    /// Log base tag for entropy functions.
    pub fn log_base(&self) -> Option<LogBase> {
        self.base
    }

    /// The shifted function `h̃ = h - h(1)·id`, which vanishes at both ends.
    pub fn shift_to_vanishing(&self) -> TestFunction {
        let inner = self.eval.clone();
        let c = self.value_at_one;
        let refl = self.eval_refl.clone().map(|g| {
            let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
                Arc::new(move |mu: f64| g(mu) - c * (1.0 - mu));
            f
        });
        TestFunction {
            label: format!("shifted({})", self.label),
            eval: Arc::new(move |l| inner(l) - c * l),
            eval_refl: refl,
            value_at_one: 0.0,
            holder: self.holder,
            base: self.base,
        }
    }

    /// Build from a closure; `holder` is an optional declared exponent.
    pub fn from_closure(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        holder: Option<f64>,
    ) -> TestFunction {
        let value_at_one = f(1.0);
        TestFunction {
            label: label.into(),
            eval: Arc::new(f),
            eval_refl: None,
            value_at_one,
            holder,
            base: None,
        }
    }
}

/// Rényi entropy function of index `alpha > 0`.
///
/// For `alpha ≠ 1`: `h_α(λ) = (1-α)^{-1} log[λ^α + (1-λ)^α]`; at `alpha = 1`
/// the von Neumann limit `-λ log λ - (1-λ) log(1-λ)` with `0 log 0 := 0`.
pub fn renyi(alpha: f64, base: LogBase) -> Result<TestFunction> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "Rényi index must be positive and finite, got {alpha}"
        )));
    }
    let ln_base = base.ln_of_base();
    let (eval, eval_refl): (
        Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) = if alpha == 1.0 {
        (
            Arc::new(move |l: f64| {
                let l = l.clamp(0.0, 1.0);
                let mut s = 0.0;
                if l > 0.0 {
                    s -= l * l.ln();
                }
                if l < 1.0 {
                    s -= (1.0 - l) * (1.0 - l).ln();
                }
                s / ln_base
            }),
            // h(1-μ) with ln(1-μ) via ln_1p, exact for μ far below ε.
            Arc::new(move |mu: f64| {
                let mut s = 0.0;
                if mu > 0.0 {
                    s -= mu * mu.ln();
                }
                if mu < 1.0 {
                    s -= (1.0 - mu) * (-mu).ln_1p();
                }
                s / ln_base
            }),
        )
    } else {
        (
            Arc::new(move |l: f64| {
                let l = l.clamp(0.0, 1.0);
                ((l.powf(alpha) + (1.0 - l).powf(alpha)).ln() / ln_base) / (1.0 - alpha)
            }),
            Arc::new(move |mu: f64| {
                (((1.0 - mu).powf(alpha) + mu.powf(alpha)).ln() / ln_base) / (1.0 - alpha)
            }),
        )
    };
    // Near 0 the entropy behaves like λ^α for α < 1 and like λ (up to a log
    // factor at α = 1) otherwise; declare the exponent only when it is clean.
    let holder = if alpha == 1.0 {
        None
    } else {
        Some(alpha.min(1.0))
    };
    Ok(TestFunction {
        label: format!("renyi:{alpha}:{base}"),
        eval,
        eval_refl: Some(eval_refl),
        value_at_one: 0.0,
        holder,
        base: Some(base),
    })
}

/// Polynomial basis family: `s_n(λ) = [λ(1-λ)]^n` and `a_n(λ) = λ s_n(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyKind {
    S,
    A,
}

/// `s_n` or `a_n`, for `n ≥ 1`.
pub fn poly_basis(kind: PolyKind, n: u32) -> Result<TestFunction> {
    if n < 1 {
        return Err(CoreError::InvalidParam(format!(
            "polynomial basis index must be ≥ 1, got {n}"
        )));
    }
    let ni = n as i32;
    match kind {
        PolyKind::S => Ok(TestFunction {
            label: format!("s:{n}"),
            eval: Arc::new(move |l: f64| (l * (1.0 - l)).powi(ni)),
            eval_refl: Some(Arc::new(move |mu: f64| ((1.0 - mu) * mu).powi(ni))),
            value_at_one: 0.0,
            holder: Some(1.0),
            base: None,
        }),
        PolyKind::A => Ok(TestFunction {
            label: format!("a:{n}"),
            eval: Arc::new(move |l: f64| l * (l * (1.0 - l)).powi(ni)),
            eval_refl: Some(Arc::new(move |mu: f64| {
                (1.0 - mu) * ((1.0 - mu) * mu).powi(ni)
            })),
            value_at_one: 0.0,
            holder: Some(1.0),
            base: None,
        }),
    }
}

/// The identity `h(λ) = λ`; `tr id(P_L)` is the particle number.
pub fn identity() -> TestFunction {
    TestFunction {
        label: "id".to_string(),
        eval: Arc::new(|l| l),
        eval_refl: Some(Arc::new(|mu| 1.0 - mu)),
        value_at_one: 1.0,
        holder: Some(1.0),
        base: None,
    }
}

/// Resolve a test function by name: `id`, `s:<n>`, `a:<n>`,
/// `renyi:<alpha>:<bits|nats>`.
pub fn from_name(name: &str) -> Result<TestFunction> {
    let parts: Vec<&str> = name.split(':').collect();
    match parts.as_slice() {
        ["id"] => Ok(identity()),
        ["s", n] => {
            let n: u32 = n
                .parse()
                .map_err(|_| CoreError::InvalidParam(format!("bad index in '{name}'")))?;
            poly_basis(PolyKind::S, n)
        }
        ["a", n] => {
            let n: u32 = n
                .parse()
                .map_err(|_| CoreError::InvalidParam(format!("bad index in '{name}'")))?;
            poly_basis(PolyKind::A, n)
        }
        ["renyi", alpha, base] => {
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| CoreError::InvalidParam(format!("bad Rényi index in '{name}'")))?;
            let base = match *base {
                "bits" => LogBase::Bits,
                "nats" => LogBase::Nats,
                other => {
                    return Err(CoreError::InvalidParam(format!(
                        "log base must be bits|nats, got '{other}'"
                    )))
                }
            };
            renyi(alpha, base)
        }
        _ => Err(CoreError::InvalidParam(format!(
            "unknown test function '{name}' (expected id, s:<n>, a:<n>, renyi:<a>:<bits|nats>)"
        ))),
    }
}

/// Outcome of a membership check against `ℍ_d` / `ℍ_{d,0}`.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub dimension: u32,
    pub in_class: bool,
    /// Additionally `h(1) = 0`.
    pub in_class_vanishing: bool,
    /// Log-log slope of `|h|` near 0 (None if `h` vanishes identically there).
    pub alpha_estimate_left: Option<f64>,
    /// Log-log slope of `|h(1) - h(1-·)|` near 0.
    pub alpha_estimate_right: Option<f64>,
    /// The exponent the decision used (declared, if available).
    pub alpha_used: Option<f64>,
    pub used_declared: bool,
    /// d = 1 only: symmetry under λ ↦ 1-λ.
    pub symmetric: Option<bool>,
    /// d = 1 only: `|h(λ)|/(λ|ln λ| · sup|h|)` at the deep dyadic probe
    /// λ = 2⁻³⁰; small means `h(λ) = o(λ ln λ)` is credible.
    pub vanishing_ratio: Option<f64>,
    pub value_at_one: f64,
}

const DYADIC_LO: i32 = 5;
const DYADIC_HI: i32 = 30;
const AMBIGUITY_WINDOW: f64 = 0.05;
const VANISHING_TOL: f64 = 1e-12;

/// Least-squares slope of `ln|g|` against `ln λ` over the dyadic grid
/// `λ = 2^-5 .. 2^-30`. `None` when `g` is numerically zero there.
fn loglog_slope(g: &dyn Fn(f64) -> f64) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in DYADIC_LO..=DYADIC_HI {
        let lam = (2.0f64).powi(-j);
        let v = g(lam).abs();
        if v > 1e-280 {
            xs.push(lam.ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 4 {
        return None;
    }
    let n = xs.len() as f64;
    let mx: f64 = xs.iter().sum::<f64>() / n;
    let my: f64 = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    Some(sxy / sxx)
}

/// Decide membership of `h` in `ℍ_d` (and `ℍ_{d,0}`).
///
/// For `d ≥ 2` the decision compares a Hölder exponent against `1/d`:
/// a declared exponent is used as-is, otherwise the exponent is estimated
/// from log-log slopes at both endpoints and an estimate inside the
/// ambiguity window around `1/d` is refused rather than guessed.
/// For `d = 1` the check is symmetry plus decay of `|h(λ)|/(λ |ln λ|)`.
pub fn check_membership(h: &TestFunction, dimension: u32) -> Result<MembershipReport> {
    if dimension < 1 {
        return Err(CoreError::InvalidParam(format!(
            "dimension must be ≥ 1, got {dimension}"
        )));
    }
    let h1 = h.value_at_one();
    let left = loglog_slope(&|l| h.eval(l));
    let right = loglog_slope(&|l| h1 - h.eval(1.0 - l));

    if dimension == 1 {
        // Symmetry on a mixed uniform + dyadic grid, scaled by sup|h|.
        let mut sup = 0.0f64;
        for i in 0..=1000 {
            sup = sup.max(h.eval(i as f64 / 1000.0).abs());
        }
        let scale = sup.max(1.0);
        let mut asym = 0.0f64;
        for i in 1..1000 {
            let l = i as f64 / 1000.0;
            asym = asym.max((h.eval(l) - h.eval(1.0 - l)).abs());
        }
        for j in DYADIC_LO..=DYADIC_HI {
            let l = (2.0f64).powi(-j);
            asym = asym.max((h.eval(l) - h.eval(1.0 - l)).abs());
        }
        let symmetric = asym <= 1e-12 * scale;

        // h(λ) = o(λ ln λ) ⟺ ρ(λ) = |h|/(λ|ln λ|) → 0. Calibration on the
        // dyadic probe λ = 2⁻³⁰, normalized by sup|h| to make the test
        // scale-free: members of the class (which behave like λ^α·(analytic)
        // with α ≥ 1 up to log-free factors) have ρ̂ ≲ 0.2 there, while the
        // boundary case h ≍ λ|ln λ| has ρ̂ ≳ 1. Growth of ρ across the grid
        // (ratio ≥ 1.1) also rules membership out.
        let rho = |j: i32| {
            let l = (2.0f64).powi(-j);
            h.eval(l).abs() / (l * l.ln().abs())
        };
        let vanishing = if sup < 1e-300 {
            true // h ≡ 0 on the probe grid
        } else {
            let rho_head = rho(DYADIC_LO);
            let rho_tail = rho(DYADIC_HI);
            let rho_hat = rho_tail / sup;
            let growth = if rho_head > 1e-280 * sup {
                rho_tail / rho_head
            } else {
                0.0
            };
            if rho_hat >= 0.7 || growth >= 1.1 {
                false
            } else if rho_hat <= 0.3 {
                true
            } else {
                return Err(CoreError::MembershipAmbiguous {
                    estimate: rho_hat,
                    boundary: 0.5,
                    window: 0.2,
                });
            }
        };
        let in_class = symmetric && vanishing;
        return Ok(MembershipReport {
            dimension,
            in_class,
            in_class_vanishing: in_class && h1.abs() <= VANISHING_TOL,
            alpha_estimate_left: left,
            alpha_estimate_right: right,
            alpha_used: None,
            used_declared: false,
            symmetric: Some(symmetric),
            vanishing_ratio: Some(if sup < 1e-300 { 0.0 } else { rho(DYADIC_HI) / sup }),
            value_at_one: h1,
        });
    }

    let boundary = 1.0 / dimension as f64;
    let (alpha_used, used_declared) = match h.holder_exponent() {
        Some(a) => (Some(a), true),
        None => {
            let est = match (left, right) {
                (Some(l), Some(r)) => Some(l.min(r)),
                (Some(l), None) => Some(l),
                (None, Some(r)) => Some(r),
                (None, None) => None, // vanishes at both ends ⇒ any exponent works
            };
            (est, false)
        }
    };
    let in_class = match alpha_used {
        None => h.eval(0.0).abs() <= VANISHING_TOL,
        Some(a) => {
            if !used_declared && (a - boundary).abs() < AMBIGUITY_WINDOW {
                return Err(CoreError::MembershipAmbiguous {
                    estimate: a,
                    boundary,
                    window: AMBIGUITY_WINDOW,
                });
            }
            a > boundary && h.eval(0.0).abs() <= VANISHING_TOL
        }
    };
    Ok(MembershipReport {
        dimension,
        in_class,
        in_class_vanishing: in_class && h1.abs() <= VANISHING_TOL,
        alpha_estimate_left: left,
        alpha_estimate_right: right,
        alpha_used,
        used_declared,
        symmetric: None,
        vanishing_ratio: None,
        value_at_one: h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u32, k: u32) -> f64 {
        let mut v = 1.0;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        v
    }

    #[test]
    fn renyi_matches_hand_values_at_half() {
        let h2 = renyi(2.0, LogBase::Bits).unwrap();
        assert!(
            (h2.eval(0.5) - 1.0).abs() < 1e-15,
            "h_2(1/2) in bits must be exactly 1, got {}",
            h2.eval(0.5)
        );
        let h1 = renyi(1.0, LogBase::Bits).unwrap();
        assert!(
            (h1.eval(0.5) - 1.0).abs() < 1e-15,
            "binary entropy at 1/2 must be 1 bit, got {}",
            h1.eval(0.5)
        );
        let h1n = renyi(1.0, LogBase::Nats).unwrap();
        assert!(
            (h1n.eval(0.5) - std::f64::consts::LN_2).abs() < 1e-15,
            "entropy at 1/2 in nats must be ln 2"
        );
    }

    #[test]
    fn renyi_endpoint_convention_is_exact() {
        for alpha in [0.4, 1.0, 2.0, 5.0] {
            for base in [LogBase::Bits, LogBase::Nats] {
                let h = renyi(alpha, base).unwrap();
                assert_eq!(h.eval(0.0), 0.0, "h_{alpha}(0) must be exactly 0");
                assert_eq!(h.eval(1.0), 0.0, "h_{alpha}(1) must be exactly 0");
            }
        }
    }

    #[test]
    fn renyi_is_symmetric_to_machine_precision() {
        for alpha in [0.4, 0.6, 1.0, 1.5, 2.0, 5.0] {
            let h = renyi(alpha, LogBase::Nats).unwrap();
            for i in 1..200 {
                let l = i as f64 / 200.0;
                let d = (h.eval(l) - h.eval(1.0 - l)).abs();
                assert!(
                    d <= 1e-15,
                    "symmetry violation {d:.2e} for alpha={alpha} at λ={l}"
                );
            }
        }
    }

    #[test]
    fn renyi_rejects_nonpositive_index() {
        assert!(renyi(0.0, LogBase::Nats).is_err());
        assert!(renyi(-1.0, LogBase::Nats).is_err());
        assert!(renyi(f64::NAN, LogBase::Nats).is_err());
    }

    #[test]
    fn poly_values_and_bound() {
        let s1 = poly_basis(PolyKind::S, 1).unwrap();
        let a1 = poly_basis(PolyKind::A, 1).unwrap();
        assert_eq!(s1.eval(0.5), 0.25, "s_1(1/2) = 1/4");
        assert_eq!(a1.eval(0.5), 0.125, "a_1(1/2) = 1/8");
        for n in 1..=4u32 {
            let s = poly_basis(PolyKind::S, n).unwrap();
            let a = poly_basis(PolyKind::A, n).unwrap();
            let bound = 0.25f64.powi(n as i32);
            for i in 0..=1000 {
                let l = i as f64 / 1000.0;
                assert!(
                    s.eval(l) <= bound + 1e-16 && s.eval(l) >= 0.0,
                    "s_{n} out of [0, 4^-{n}] at λ={l}"
                );
                assert!(
                    a.eval(l) <= bound + 1e-16 && a.eval(l) >= 0.0,
                    "a_{n} out of [0, 4^-{n}] at λ={l}"
                );
            }
        }
        assert!(poly_basis(PolyKind::S, 0).is_err(), "s_0 must be rejected");
    }

    #[test]
    fn poly_span_reduces_to_s1_times_powers() {
        // s_n = Σ_j (-1)^j C(n-1,j) s_1·id^{n-1+j} and a_n = id·s_n, so both
        // families live in span{s_1·id^k}: evaluate the expansion pointwise.
        let s1 = poly_basis(PolyKind::S, 1).unwrap();
        for n in 1..=4u32 {
            let sn = poly_basis(PolyKind::S, n).unwrap();
            let an = poly_basis(PolyKind::A, n).unwrap();
            for i in 0..=1000 {
                let l = i as f64 / 1000.0;
                let mut expansion = 0.0;
                for j in 0..n {
                    expansion += (-1.0f64).powi(j as i32)
                        * binom(n - 1, j)
                        * s1.eval(l)
                        * l.powi((n - 1 + j) as i32);
                }
                assert!(
                    (sn.eval(l) - expansion).abs() < 1e-12,
                    "s_{n} expansion mismatch at λ={l}"
                );
                assert!(
                    (an.eval(l) - l * sn.eval(l)).abs() < 1e-15,
                    "a_{n} ≠ id·s_{n} at λ={l}"
                );
            }
        }
    }

    #[test]
    fn name_resolution_round_trips() {
        for name in ["id", "s:1", "s:3", "a:2", "renyi:2:bits", "renyi:1.5:nats"] {
            let h = from_name(name).unwrap();
            assert_eq!(h.label(), name, "canonical label should match input");
        }
        assert!(from_name("renyi:2").is_err());
        assert!(from_name("renyi:2:binary").is_err());
        assert!(from_name("b:1").is_err());
        assert!(from_name("s:x").is_err());
    }

    #[test]
    fn shift_to_vanishing_zeroes_the_right_endpoint() {
        let h = identity();
        let shifted = h.shift_to_vanishing();
        assert_eq!(shifted.value_at_one(), 0.0);
        for i in 0..=100 {
            let l = i as f64 / 100.0;
            assert!(
                (shifted.eval(l) - (h.eval(l) - l)).abs() < 1e-16,
                "shift must subtract h(1)·id"
            );
        }
    }

    #[test]
    fn membership_identity_in_dimension_two() {
        let rep = check_membership(&identity(), 2).unwrap();
        assert!(rep.in_class, "id belongs to ℍ_2");
        assert!(
            !rep.in_class_vanishing,
            "id(1) = 1 so id is not in ℍ_2,0"
        );
    }

    #[test]
    fn membership_renyi_rule_d_greater_than_inverse_alpha() {
        // h_α ∈ ℍ_d ⟺ d > 1/α, on the α-grid the acceptance suite pins.
        let alphas = [0.4, 0.6, 1.0, 1.5, 2.0, 5.0];
        for &alpha in &alphas {
            for d in [1u32, 2, 3] {
                let h = renyi(alpha, LogBase::Nats).unwrap();
                let rep = check_membership(&h, d).unwrap();
                let expected = (d as f64) > 1.0 / alpha;
                assert_eq!(
                    rep.in_class, expected,
                    "membership of renyi({alpha}) in H_{d}: got {}, want {expected}",
                    rep.in_class
                );
            }
        }
    }

    #[test]
    fn membership_von_neumann_fails_in_one_dimension() {
        // h_1(λ) ~ -λ ln λ is not o(λ ln λ).
        let h = renyi(1.0, LogBase::Bits).unwrap();
        let rep = check_membership(&h, 1).unwrap();
        assert!(!rep.in_class, "von Neumann entropy is not in ℍ_1");
        assert!(rep.symmetric.unwrap(), "it is symmetric though");
    }

    #[test]
    fn membership_polys_are_symmetric_only_for_s() {
        let s2 = poly_basis(PolyKind::S, 2).unwrap();
        let a2 = poly_basis(PolyKind::A, 2).unwrap();
        let rs = check_membership(&s2, 1).unwrap();
        let ra = check_membership(&a2, 1).unwrap();
        assert!(rs.in_class, "s_2 is symmetric and o(λ ln λ), so in ℍ_1");
        assert!(!ra.in_class, "a_2 is asymmetric, so not in ℍ_1");
        assert!(
            check_membership(&a2, 2).unwrap().in_class,
            "a_2 is in ℍ_2 by growth"
        );
    }
}
