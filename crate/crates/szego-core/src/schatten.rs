//! Schatten quasi-norms of truncated-projection blocks, and executable
//! versions of the trace identities and inequalities that connect them:
//! the purity-defect identity ‖Q_L‖₂² = tr s₁(P_L), the telescope bound
//! |tr s_n(P_L) − tr s_n(P_{L,0})| ≤ n·φ(L), and the Schatten-norm
//! interpolation inequality.

use faer::Mat;
use serde::Serialize;

use crate::error::CoreError;
use crate::Result;
use crate::lattice::{FermiProjection, TruncatedSpectrum};
use crate::linalg;
use crate::model::Domain;
use crate::testfn::TestFunction;

/// Norm diagnostics for one truncation scale, comparing a projection `P`
/// (potential on) against a reference `P₀` (potential off) on the same
/// Dirichlet box. `Q` denotes the off-diagonal block of the full projection
/// between `Λ_L` and its in-box complement.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    /// Truncation scale the domain was scaled by.
    pub l: f64,
    /// ‖Q_L‖₂² for the perturbed projection.
    pub q2_sq: f64,
    /// ‖Q_{L,0}‖₂² for the reference projection.
    pub q2_free_sq: f64,
    /// ‖Q_L − Q_{L,0}‖₂.
    pub qdiff_2: f64,
    /// `(s, ‖Q_L − Q_{L,0}‖_{2s}^{2s})` for each configured exponent `s`.
    pub qdiff_pow: Vec<(f64, f64)>,
    /// ‖P_L − P_{L,0}‖₂ (Frobenius norm of the truncated difference).
    pub pdiff_2: f64,
    /// tr(P_L − P_{L,0}).
    pub trdiff: f64,
    /// φ(L) = ‖Q_L − Q_{L,0}‖₂² + 2‖Q_L − Q_{L,0}‖₂·‖Q_{L,0}‖₂, the
    /// quantity that bounds every symmetric-polynomial trace difference.
    pub phi: f64,
}

/// Two sides of an inequality evaluated by independent routes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `tr h(P_Λ)` over the full ambient truncated space: eigenvalues listed in
/// the spectrum plus `h(0)` for each of the remaining exact zeros.
pub fn trace_h(spec: &TruncatedSpectrum, h: &TestFunction) -> Result<f64> {
    let mut t = h.eval(0.0) * (spec.ambient_sites as f64 - spec.eigenvalues.len() as f64);
    for &mu in &spec.eigenvalues {
        t += h.eval(mu);
    }
    if !t.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "test function {} produced a non-finite trace",
            h.label()
        )));
    }
    Ok(t)
}

/// `(Σᵢ σᵢ^p)^{1/p}` and `Σᵢ σᵢ^p` for `p > 0` (a quasi-norm for `p < 1`).
pub fn schatten_qnorm(svals: &[f64], p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "Schatten exponent must be positive and finite, got {p}"
        )));
    }
    if let Some(&bad) = svals.iter().find(|&&s| !(s >= 0.0)) {
        return Err(CoreError::InvalidParam(format!(
            "singular values must be non-negative, got {bad}"
        )));
    }
    let pow: f64 = svals.iter().map(|&s| s.powf(p)).sum();
    Ok((pow.powf(1.0 / p), pow))
}

/// Index sets of an inside/outside split of the box sites.
fn split_sites(p: &FermiProjection, domain: &Domain) -> Result<(Vec<usize>, Vec<usize>)> {
    let inside = p.sites_in(domain);
    let n = p.box_info().n_sites;
    let mut mask = vec![false; n];
    for &s in &inside {
        mask[s] = true;
    }
    let outside: Vec<usize> = (0..n).filter(|&s| !mask[s]).collect();
    if inside.is_empty() {
        return Err(CoreError::InvalidParam(
            "truncation domain contains no lattice sites".into(),
        ));
    }
    if outside.is_empty() {
        return Err(CoreError::InvalidParam(
            "truncation domain covers the whole box; the off-diagonal block is empty".into(),
        ));
    }
    Ok((inside, outside))
}

/// Singular values (descending) of the off-diagonal block of the projection
/// between the complement of `Λ` and `Λ`, computed by dense SVD of the
/// explicitly formed block.
pub fn q_block_singular_values(p: &FermiProjection, domain: &Domain) -> Result<Vec<f64>> {
    let (inside, outside) = split_sites(p, domain)?;
    let q = p.dense_block(&outside, &inside);
    linalg::singular_values(q.as_ref())
}

fn frobenius(m: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc.sqrt()
}

fn same_geometry(a: &FermiProjection, b: &FermiProjection) -> bool {
    let (ba, bb) = (a.box_info(), b.box_info());
    ba.dim == bb.dim
        && ba.spacing == bb.spacing
        && ba.halfwidth == bb.halfwidth
        && ba.n_sites == bb.n_sites
}

/// All block-norm diagnostics for one pair of projections sharing a box.
/// `scale` is recorded in the report; `s_list` selects the quasi-norm
/// exponents `s` for which `‖Q − Q₀‖_{2s}^{2s}` is evaluated.
pub fn diff_stats(
    p: &FermiProjection,
    p0: &FermiProjection,
    domain: &Domain,
    scale: f64,
    s_list: &[f64],
) -> Result<NormReport> {
    if !same_geometry(p, p0) {
        return Err(CoreError::InvalidParam(
            "projections live on different lattice boxes; block differences are undefined".into(),
        ));
    }
    let (inside, outside) = split_sites(p, domain)?;

    let q = p.dense_block(&outside, &inside);
    let q0 = p0.dense_block(&outside, &inside);
    let q2_sq = {
        let f = frobenius(&q);
        f * f
    };
    let q2_free_sq = {
        let f = frobenius(&q0);
        f * f
    };
    let qdiff = &q - &q0;
    let qdiff_2 = frobenius(&qdiff);
    let mut qdiff_pow = Vec::with_capacity(s_list.len());
    if !s_list.is_empty() {
        let svals = linalg::singular_values(qdiff.as_ref())?;
        for &s in s_list {
            let (_, pow) = schatten_qnorm(&svals, 2.0 * s)?;
            qdiff_pow.push((s, pow));
        }
    }

    let pin = p.dense_block(&inside, &inside);
    let pin0 = p0.dense_block(&inside, &inside);
    let pdiff = &pin - &pin0;
    let pdiff_2 = frobenius(&pdiff);
    let trdiff = (0..pdiff.nrows()).map(|i| pdiff[(i, i)]).sum();

    let phi = qdiff_2 * qdiff_2 + 2.0 * qdiff_2 * q2_free_sq.sqrt();
    Ok(NormReport {
        l: scale,
        q2_sq,
        q2_free_sq,
        qdiff_2,
        qdiff_pow,
        pdiff_2,
        trdiff,
        phi,
    })
}

/// Evaluate `‖σ‖_{p_θ} ≤ ‖σ‖_{p₀}^{1−θ}·‖σ‖_{p₁}^θ` with
/// `1/p_θ = θ/p₁ + (1−θ)/p₀`.
pub fn interpolation_check(
    svals: &[f64],
    p0: f64,
    p1: f64,
    theta: f64,
) -> Result<InequalityCheck> {
    if !(p0 > 0.0) || !(p1 >= p0) || !p1.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "interpolation exponents need 0 < p₀ ≤ p₁ < ∞, got p₀ = {p0}, p₁ = {p1}"
        )));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(CoreError::InvalidParam(format!(
            "interpolation weight must lie in [0,1], got {theta}"
        )));
    }
    let p_theta = 1.0 / (theta / p1 + (1.0 - theta) / p0);
    let (lhs, _) = schatten_qnorm(svals, p_theta)?;
    let (n0, _) = schatten_qnorm(svals, p0)?;
    let (n1, _) = schatten_qnorm(svals, p1)?;
    let rhs = n0.powf(1.0 - theta) * n1.powf(theta);
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Evaluate `|tr s_n(P_L) − tr s_n(P_{L,0})| ≤ n·φ(L)` with the two sides
/// computed by independent routes: the left from the truncated spectra, the
/// right from the off-diagonal blocks.
pub fn telescope_bound_check(
    p: &FermiProjection,
    p0: &FermiProjection,
    domain: &Domain,
    n: u32,
) -> Result<InequalityCheck> {
    if n < 1 {
        return Err(CoreError::InvalidParam(format!(
            "telescope order must be ≥ 1, got {n}"
        )));
    }
    let sn = crate::testfn::poly_basis(crate::testfn::PolyKind::S, n)?;
    let spec = p.truncated_spectrum(domain)?;
    let spec0 = p0.truncated_spectrum(domain)?;
    let lhs = (trace_h(&spec, &sn)? - trace_h(&spec0, &sn)?).abs();
    let report = diff_stats(p, p0, domain, domain.scale(), &[])?;
    let rhs = n as f64 * report.phi;
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * rhs.max(1.0),
    })
}
