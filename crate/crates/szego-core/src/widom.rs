//! Asymptotic coefficients for traces of truncated Fermi projections: the
//! integrated density of states `N₀(E)`, the boundary coefficient `Σ₀(E)`,
//! and the Widom functional
//!
//! ```text
//! I(h) = (1/4π²) ∫₀¹ (h(λ) - λ h(1)) / (λ(1-λ)) dλ .
//! ```
//!
//! `I` is linear, positive on non-negative `h` with `h(1) = 0`, kills the
//! identity, and depends on `h` only through `h - h(1)·id`.
//!
//! Two conventions for `N₀` are provided side by side: the expression with
//! `Γ((d+1)/2)` as it circulates in print, and the standard Weyl form with
//! `Γ(d/2+1)`. They disagree in every dimension; the lattice
//! eigenvalue-counting estimate arbitrates (see `lattice::ids_estimate`),
//! and it lands on the Weyl value.

use serde::{Deserialize, Serialize};

use crate::model::Domain;
use crate::quad::adaptive_gk15;
use crate::testfn::{renyi, LogBase, TestFunction};
use crate::{CoreError, Result};

/// Which Γ-factor to use in `N₀(E) = Γ^{-1} (E/4π)^{d/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum N0Convention {
    /// `Γ((d+1)/2)` — as the formula circulates in print.
    AsPrinted,
    /// `Γ(d/2+1)` — the standard Weyl volume of the Fermi ball.
    Weyl,
}

/// Γ(n/2) for positive integer `n`, exactly via the half-integer recursion.
fn gamma_half(n: u32) -> f64 {
    assert!(n >= 1);
    let mut x = n as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-15 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc // Γ(1) = 1
    }
}

/// Integrated density of states of the free Laplacian at energy `E > 0`.
pub fn n0(energy: f64, dimension: u32, convention: N0Convention) -> Result<f64> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "energy must be positive, got {energy}"
        )));
    }
    if dimension < 1 {
        return Err(CoreError::InvalidParam("dimension must be ≥ 1".into()));
    }
    let gamma = match convention {
        N0Convention::AsPrinted => gamma_half(dimension + 1),
        N0Convention::Weyl => gamma_half(dimension + 2),
    };
    Ok((energy / (4.0 * std::f64::consts::PI)).powf(dimension as f64 / 2.0) / gamma)
}

/// Boundary coefficient `Σ₀(E) = (2/Γ((d+1)/2)) (E/4π)^{(d-1)/2}`.
pub fn sigma0(energy: f64, dimension: u32) -> Result<f64> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "energy must be positive, got {energy}"
        )));
    }
    if dimension < 1 {
        return Err(CoreError::InvalidParam("dimension must be ≥ 1".into()));
    }
    Ok(2.0 / gamma_half(dimension + 1)
        * (energy / (4.0 * std::f64::consts::PI)).powf((dimension as f64 - 1.0) / 2.0))
}

/// The Widom functional `I(h)`, by adaptive Gauss–Kronrod quadrature to
/// absolute tolerance `abs_tol` on the final value.
///
/// The integral is split at 1/2 and both halves are regularized by the
/// substitution `λ = t²` (resp. `1-λ = t²`), which turns an integrable
/// endpoint singularity `λ^{α-1}` into `t^{2α-1}`. The right half evaluates
/// `h(1-t²)` through the exact reflected form when the test function carries
/// one, so fractional-power behaviour at λ = 1 survives in float.
pub fn widom_functional(h: &TestFunction, abs_tol: f64) -> Result<f64> {
    if h.eval(0.0).abs() > 1e-12 {
        return Err(CoreError::InvalidParam(format!(
            "Widom functional requires h(0) = 0, got {}",
            h.eval(0.0)
        )));
    }
    let h1 = h.value_at_one();
    let four_pi_sq = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let half_tol = abs_tol * four_pi_sq / 2.0;
    let upper = 0.5f64.sqrt();

    // Left half: λ = t², integrand (h(λ) - λ h(1))/(λ(1-λ)) · 2t.
    let mut left = |t: f64| {
        let lam = t * t;
        if lam <= 0.0 {
            return 0.0;
        }
        (h.eval(lam) - lam * h1) / (lam * (1.0 - lam)) * 2.0 * t
    };
    let l = adaptive_gk15(&mut left, 0.0, upper, half_tol, 4000, "Widom functional, left half")?;

    // Right half: 1-λ = t², numerator written via h(1-μ) with μ = t².
    let mut right = |t: f64| {
        let mu = t * t;
        if mu <= 0.0 {
            return 0.0;
        }
        let lam = 1.0 - mu;
        (h.eval_one_minus(mu) - lam * h1) / (lam * mu) * 2.0 * t
    };
    let r = adaptive_gk15(
        &mut right,
        0.0,
        upper,
        half_tol,
        4000,
        "Widom functional, right half",
    )?;

    Ok((l.value + r.value) / four_pi_sq)
}

/// Predicted two-term trace coefficients for `tr h(P_L)`:
/// volume term `a_pred·L^d` and boundary term `b_pred·L^{d-1} ln L`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticPrediction {
    pub test_function: String,
    pub dimension: u32,
    pub energy: f64,
    pub convention: N0Convention,
    /// `N₀(E) h(1) |Λ|`.
    pub volume_coeff: f64,
    /// `Σ₀(E) I(h) |∂Λ|`.
    pub boundary_coeff: f64,
    pub n0: f64,
    pub sigma0: f64,
    pub widom_value: f64,
}

/// Evaluate both predicted coefficients for the (unit-scale) domain `Λ`.
pub fn predict_trace(
    h: &TestFunction,
    energy: f64,
    domain: &Domain,
    convention: N0Convention,
) -> Result<AsymptoticPrediction> {
    let d = domain.dimension();
    let n0v = n0(energy, d, convention)?;
    let s0v = sigma0(energy, d)?;
    let iw = widom_functional(h, 1e-10)?;
    Ok(AsymptoticPrediction {
        test_function: h.label().to_string(),
        dimension: d,
        energy,
        convention,
        volume_coeff: n0v * h.value_at_one() * domain.volume(),
        boundary_coeff: s0v * iw * domain.surface(),
        n0: n0v,
        sigma0: s0v,
        widom_value: iw,
    })
}

/// Predicted coefficient of `L^{d-1} ln L` for the Rényi-α entropy:
/// `Σ₀(E) I(h_α) |∂Λ|`.
pub fn entropy_slope(alpha: f64, base: LogBase, energy: f64, domain: &Domain) -> Result<f64> {
    let h = renyi(alpha, base)?;
    let iw = widom_functional(&h, 1e-10)?;
    Ok(sigma0(energy, domain.dimension())? * iw * domain.surface())
}
