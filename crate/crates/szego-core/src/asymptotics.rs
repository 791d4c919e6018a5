//! Scale sweeps of truncated-projection traces, least-squares extraction of
//! the volume and boundary coefficients, and the stability verdict that
//! compares a perturbed sweep against its potential-free reference.

use std::sync::Arc;
use std::time::Instant;

use faer::Mat;
use serde::Serialize;

use crate::cache::{eigen_key, CacheStore};
use crate::continuum::{
    free_spectrum_disk, free_spectrum_interval, free_spectrum_square,
    perturbed_spectrum_interval, PerturbedKernel,
};
use crate::error::CoreError;
use crate::lattice::{fermi_projection, FermiProjection};
use crate::linalg;
use crate::model::{Engine, ModelConfig, Shape};
use crate::schatten::{diff_stats, trace_h, NormReport};
use crate::testfn::TestFunction;
use crate::widom::{predict_trace, AsymptoticPrediction};
use crate::Result;

/// Smallest admissible common ratio of a sweep grid.
pub const GRID_RATIO_MIN: f64 = 1.15;
/// Largest admissible common ratio of a sweep grid.
pub const GRID_RATIO_MAX: f64 = 1.6;
/// Minimum number of scales per sweep.
pub const GRID_MIN_POINTS: usize = 8;

/// Geometric grid from `min` to `max` inclusive with `points` entries,
/// validated against the sweep preconditions.
pub fn geometric_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "geometric grid needs 0 < min < max, got [{min}, {max}]"
        )));
    }
    if points < 2 {
        return Err(CoreError::InvalidParam(format!(
            "geometric grid needs ≥ 2 points, got {points}"
        )));
    }
    let step = (max / min).powf(1.0 / (points - 1) as f64);
    let mut grid: Vec<f64> = (0..points)
        .map(|i| min * step.powi(i as i32))
        .collect();
    grid[points - 1] = max;
    validate_grid(&grid)?;
    Ok(grid)
}

/// Default sweep grid in the scale variable `L`, chosen so that the
/// dimensionless product `k_F·L` covers the standard range for the
/// dimension: `[25, 400]` over 12 points in d = 1, `[8, 60]` over 8 points
/// in d = 2.
pub fn default_grid(dim: u32, energy: f64) -> Result<Vec<f64>> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "energy must be positive, got {energy}"
        )));
    }
    let k_f = energy.sqrt();
    match dim {
        1 => geometric_grid(25.0 / k_f, 400.0 / k_f, 12),
        2 => geometric_grid(8.0 / k_f, 60.0 / k_f, 8),
        _ => Err(CoreError::InvalidParam(format!(
            "no default grid for dimension {dim}"
        ))),
    }
}

/// Sweep-grid precondition: strictly increasing, at least
/// [`GRID_MIN_POINTS`] entries, geometric with a common ratio in
/// `[GRID_RATIO_MIN, GRID_RATIO_MAX]` (2% wobble allowed).
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < GRID_MIN_POINTS {
        return Err(CoreError::InvalidParam(format!(
            "sweep grid needs ≥ {GRID_MIN_POINTS} points, got {}",
            grid.len()
        )));
    }
    let mut ratios = Vec::with_capacity(grid.len() - 1);
    for w in grid.windows(2) {
        if !(w[0] > 0.0) || !(w[1] > w[0]) {
            return Err(CoreError::InvalidParam(
                "sweep grid must be positive and strictly increasing".into(),
            ));
        }
        ratios.push(w[1] / w[0]);
    }
    let geo_mean =
        (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    for &r in &ratios {
        if !(GRID_RATIO_MIN..=GRID_RATIO_MAX).contains(&r) {
            return Err(CoreError::InvalidParam(format!(
                "sweep grid ratio {r:.4} outside [{GRID_RATIO_MIN}, {GRID_RATIO_MAX}]"
            )));
        }
        if (r / geo_mean - 1.0).abs() > 0.02 {
            return Err(CoreError::InvalidParam(format!(
                "sweep grid is not geometric: ratio {r:.4} strays from the mean {geo_mean:.4}"
            )));
        }
    }
    Ok(())
}

/// One sweep scale: traces per configured test function (in the table's
/// label order), optional block-norm diagnostics, and the wall time spent.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub l: f64,
    pub traces: Vec<f64>,
    pub norms: Option<NormReport>,
    pub wall_time_s: f64,
}

/// Ordered sweep rows together with the configuration that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub config: ModelConfig,
    pub engine_tag: String,
    pub h_labels: Vec<String>,
    pub s_list: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Trace column for a test-function label.
    pub fn trace_column(&self, label: &str) -> Result<Vec<f64>> {
        let idx = self
            .h_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| {
                CoreError::InvalidParam(format!(
                    "no trace column '{label}'; sweep has {:?}",
                    self.h_labels
                ))
            })?;
        Ok(self.rows.iter().map(|r| r.traces[idx]).collect())
    }

    /// The scales of the sweep, in row order.
    pub fn scales(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l).collect()
    }
}

/// Fetch (or rebuild) a lattice projection, reusing the previous row's
/// eigendecomposition when the Dirichlet box is pinned and unchanged.
fn lattice_proj<'m>(
    memo: &'m mut Option<(String, FermiProjection)>,
    cfg: &ModelConfig,
    scale: f64,
    cache: Option<&CacheStore>,
) -> Result<&'m FermiProjection> {
    let key = cfg
        .lattice
        .box_halfwidth
        .map(|r| eigen_key(cfg.dimension(), cfg.lattice.spacing, r, &cfg.potential));
    let hit = matches!((&key, memo.as_ref()), (Some(k), Some((mk, _))) if k == mk);
    if !hit {
        let p = fermi_projection(cfg, scale, cache)?;
        *memo = Some((key.unwrap_or_default(), p));
    }
    Ok(&memo.as_ref().unwrap().1)
}

/// Sweep the configured model over a validated scale grid, evaluating
/// `tr h(P_L)` for every test function in `h_list`.
///
/// Block-norm diagnostics are filled only for the lattice engine and only
/// when `s_list` is provided (they materialize dense off-diagonal blocks,
/// which is prohibitive for very large boxes); each lattice row then also
/// solves the potential-free reference on the same box. Rows are computed
/// in grid order and handed to `on_row` as soon as they are finished, so a
/// caller can persist partial results if a later row fails.
pub fn run_sweep_with(
    cfg: &ModelConfig,
    grid: &[f64],
    h_list: &[TestFunction],
    s_list: Option<&[f64]>,
    cache: Option<&CacheStore>,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<SweepTable> {
    validate_grid(grid)?;
    if h_list.is_empty() {
        return Err(CoreError::InvalidParam(
            "sweep needs at least one test function".into(),
        ));
    }
    let mut labels = Vec::with_capacity(h_list.len());
    for h in h_list {
        if labels.iter().any(|l| l == h.label()) {
            return Err(CoreError::InvalidParam(format!(
                "duplicate test-function label '{}'",
                h.label()
            )));
        }
        labels.push(h.label().to_string());
    }

    // Continuum spectra are finite lists of non-negligible eigenvalues of
    // an operator on infinite volume; their traces only converge when the
    // test function vanishes at 0.
    let scattering = match cfg.engine {
        Engine::ContinuumKernel => {
            for h in h_list {
                if h.eval(0.0).abs() > 1e-12 {
                    return Err(CoreError::InvalidParam(format!(
                        "continuum traces require h(0) = 0, but {}(0) = {}",
                        h.label(),
                        h.eval(0.0)
                    )));
                }
            }
            if cfg.potential.is_zero() {
                None
            } else {
                if cfg.dimension() != 1 {
                    return Err(CoreError::InvalidParam(
                        "the scattering engine only covers one dimension; \
                         use the lattice engine for perturbed planar models"
                            .into(),
                    ));
                }
                let reach = grid.last().unwrap() * cfg.domain.extent();
                Some(PerturbedKernel::build(
                    &cfg.potential,
                    cfg.energy,
                    reach,
                    &cfg.continuum,
                )?)
            }
        }
        Engine::Lattice => None,
    };
    let engine_tag = match (cfg.engine, cfg.potential.is_zero()) {
        (Engine::Lattice, _) => "lattice",
        (Engine::ContinuumKernel, true) => "nystrom-free",
        (Engine::ContinuumKernel, false) => "nystrom-scattering",
    }
    .to_string();

    let mut memo_v: Option<(String, FermiProjection)> = None;
    let mut memo_0: Option<(String, FermiProjection)> = None;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(grid.len());
    for &l in grid {
        let started = Instant::now();
        let scaled = cfg.domain.scaled(l)?;
        let (spectrum, norms) = match cfg.engine {
            Engine::Lattice => {
                let p = lattice_proj(&mut memo_v, cfg, l, cache)?;
                let spectrum = p.truncated_spectrum(&scaled)?;
                let norms = if let Some(s_list) = s_list {
                    let mut cfg0 = cfg.clone();
                    cfg0.potential = cfg.potential.reference();
                    cfg0.lattice.box_halfwidth = Some(p.box_info().halfwidth);
                    let p0 = lattice_proj(&mut memo_0, &cfg0, l, cache)?;
                    Some(diff_stats(p, p0, &scaled, l, s_list)?)
                } else {
                    None
                };
                (spectrum, norms)
            }
            Engine::ContinuumKernel => {
                let spectrum = if let Some(kernel) = &scattering {
                    match scaled.shape() {
                        Shape::Interval { left, right } => perturbed_spectrum_interval(
                            kernel,
                            left * scaled.scale(),
                            right * scaled.scale(),
                            &cfg.continuum,
                        )?,
                        _ => unreachable!("scattering engine is one-dimensional"),
                    }
                } else {
                    match scaled.shape() {
                        Shape::Interval { left, right } => free_spectrum_interval(
                            cfg.energy,
                            left * scaled.scale(),
                            right * scaled.scale(),
                            &cfg.continuum,
                        )?,
                        Shape::Square { half_width } => free_spectrum_square(
                            cfg.energy,
                            half_width * scaled.scale(),
                            &cfg.continuum,
                        )?,
                        Shape::Disk { radius } => free_spectrum_disk(
                            cfg.energy,
                            radius * scaled.scale(),
                            &cfg.continuum,
                        )?,
                    }
                };
                (spectrum, None)
            }
        };
        let mut traces = Vec::with_capacity(h_list.len());
        for h in h_list {
            traces.push(trace_h(&spectrum, h)?);
        }
        let row = SweepRow {
            l,
            traces,
            norms,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        on_row(&row);
        rows.push(row);
    }

    Ok(SweepTable {
        config: cfg.clone(),
        engine_tag,
        h_labels: labels,
        s_list: s_list.map(|s| s.to_vec()).unwrap_or_default(),
        rows,
    })
}

/// [`run_sweep_with`] without a per-row callback.
pub fn run_sweep(
    cfg: &ModelConfig,
    grid: &[f64],
    h_list: &[TestFunction],
    s_list: Option<&[f64]>,
    cache: Option<&CacheStore>,
) -> Result<SweepTable> {
    run_sweep_with(cfg, grid, h_list, s_list, cache, |_| {})
}

/// Shared closure type for fit-basis terms.
pub type BasisFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisKind {
    Full,
    Leading,
    Custom,
}

/// Labeled basis functions of the scale for the asymptotic fit.
#[derive(Clone)]
pub struct FitBasis {
    kind: BasisKind,
    dim: u32,
    terms: Vec<(String, BasisFn)>,
}

impl FitBasis {
    /// The standard basis: `{L, ln L, 1}` in d = 1 and
    /// `{L², L·ln L, L, 1}` in d ≥ 2. The sub-leading terms absorb the
    /// `O(L^{d−1})` component that the asymptotic error permits; without
    /// them the boundary coefficient is biased at finite scale.
    pub fn full(dim: u32) -> Result<FitBasis> {
        let terms: Vec<(String, BasisFn)> = match dim {
            1 => vec![
                ("L".to_string(), Arc::new(|l: f64| l) as BasisFn),
                ("ln L".to_string(), Arc::new(|l: f64| l.ln())),
                ("1".to_string(), Arc::new(|_| 1.0)),
            ],
            2 => vec![
                ("L^2".to_string(), Arc::new(|l: f64| l * l) as BasisFn),
                ("L ln L".to_string(), Arc::new(|l: f64| l * l.ln())),
                ("L".to_string(), Arc::new(|l: f64| l)),
                ("1".to_string(), Arc::new(|_| 1.0)),
            ],
            _ => {
                return Err(CoreError::InvalidParam(format!(
                    "no fit basis for dimension {dim}"
                )))
            }
        };
        Ok(FitBasis {
            kind: BasisKind::Full,
            dim,
            terms,
        })
    }

    /// The two leading terms only: `{L^d, L^{d−1}·ln L}`.
    pub fn leading(dim: u32) -> Result<FitBasis> {
        let mut basis = FitBasis::full(dim)?;
        basis.terms.truncate(2);
        basis.kind = BasisKind::Leading;
        Ok(basis)
    }

    /// Arbitrary labeled terms (named coefficients and prediction
    /// comparisons are skipped for custom bases).
    pub fn custom(terms: Vec<(String, BasisFn)>) -> Result<FitBasis> {
        if terms.is_empty() {
            return Err(CoreError::InvalidParam("empty fit basis".into()));
        }
        Ok(FitBasis {
            kind: BasisKind::Custom,
            dim: 0,
            terms,
        })
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn design(&self, ls: &[f64]) -> Mat<f64> {
        Mat::from_fn(ls.len(), self.terms.len(), |i, j| (self.terms[j].1)(ls[i]))
    }

    /// Indices of the named coefficients (volume, boundary, sub-leading,
    /// constant) within this basis, if defined.
    fn named(&self) -> (Option<usize>, Option<usize>, Option<usize>, Option<usize>) {
        match (self.kind, self.dim) {
            (BasisKind::Full, 1) => (Some(0), Some(1), None, Some(2)),
            (BasisKind::Full, _) => (Some(0), Some(1), Some(2), Some(3)),
            (BasisKind::Leading, _) => (Some(0), Some(1), None, None),
            (BasisKind::Custom, _) => (None, None, None, None),
        }
    }
}

/// Least-squares coefficients of one trace column over the fit basis,
/// with leave-one-out uncertainty and the predicted-coefficient comparison.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub h_label: String,
    pub basis_labels: Vec<String>,
    pub coeffs: Vec<f64>,
    /// Coefficient of `L^d` (volume term), when the basis names one.
    pub a_hat: Option<f64>,
    /// Coefficient of `L^{d−1}·ln L` (boundary term).
    pub b_hat: Option<f64>,
    /// Coefficient of `L^{d−1}` (absent from the d = 1 basis, where it
    /// coincides with the constant).
    pub c_hat: Option<f64>,
    /// Constant coefficient.
    pub d_hat: Option<f64>,
    pub residual_norm: f64,
    pub condition: f64,
    /// Max − min of each coefficient over the leave-one-out refits.
    pub loo_spread: Vec<f64>,
    /// Leave-one-out spread of the boundary coefficient (0 if unnamed).
    pub b_uncertainty: f64,
    /// Closed-form coefficient prediction for the sweep's model, when one
    /// applies to this basis.
    pub prediction: Option<AsymptoticPrediction>,
    /// |â − predicted|/|predicted|, when the predicted volume coefficient
    /// is nonzero.
    pub rel_err_a: Option<f64>,
    /// |b̂ − predicted|/|predicted|, when the predicted boundary
    /// coefficient is nonzero.
    pub rel_err_b: Option<f64>,
}

/// Fit one trace column of a sweep against a basis of functions of `L`.
pub fn fit_asymptotics(
    table: &SweepTable,
    h: &TestFunction,
    basis: &FitBasis,
) -> Result<FitResult> {
    let y = table.trace_column(h.label())?;
    let ls = table.scales();
    let k = basis.len();
    if ls.len() < k + 2 {
        return Err(CoreError::InvalidParam(format!(
            "fit needs ≥ {} rows for {k} basis functions, got {}",
            k + 2,
            ls.len()
        )));
    }
    let a = basis.design(&ls);
    let fit = linalg::least_squares(a.as_ref(), &y)?;

    let mut loo = Vec::with_capacity(ls.len());
    for skip in 0..ls.len() {
        let sub_ls: Vec<f64> = ls
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &l)| l)
            .collect();
        let sub_y: Vec<f64> = y
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &t)| t)
            .collect();
        let sub = linalg::least_squares(basis.design(&sub_ls).as_ref(), &sub_y)?;
        loo.push(sub.coeffs);
    }
    let loo_spread: Vec<f64> = (0..k)
        .map(|j| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in &loo {
                lo = lo.min(c[j]);
                hi = hi.max(c[j]);
            }
            hi - lo
        })
        .collect();

    let (ia, ib, ic, id) = basis.named();
    let pick = |i: Option<usize>| i.map(|i| fit.coeffs[i]);
    let (a_hat, b_hat, c_hat, d_hat) =
        (pick(ia), pick(ib), pick(ic), pick(id));
    let b_uncertainty = ib.map(|i| loo_spread[i]).unwrap_or(0.0);

    // The prediction applies to the standard bases only; it is evaluated
    // for the sweep's base domain, whose scale the grid multiplies.
    let prediction = if basis.kind == BasisKind::Custom {
        None
    } else {
        predict_trace(h, table.config.energy, &table.config.domain, table.config.convention)
            .ok()
    };
    let rel = |fitted: Option<f64>, predicted: f64| -> Option<f64> {
        let f = fitted?;
        if predicted.abs() > 1e-14 {
            Some((f - predicted).abs() / predicted.abs())
        } else {
            None
        }
    };
    let (rel_err_a, rel_err_b) = match &prediction {
        Some(p) => (rel(a_hat, p.volume_coeff), rel(b_hat, p.boundary_coeff)),
        None => (None, None),
    };

    Ok(FitResult {
        h_label: h.label().to_string(),
        basis_labels: basis.labels(),
        coeffs: fit.coeffs,
        a_hat,
        b_hat,
        c_hat,
        d_hat,
        residual_norm: fit.residual_norm,
        condition: fit.condition,
        loo_spread,
        b_uncertainty,
        prediction,
        rel_err_a,
        rel_err_b,
    })
}

/// Outcome of the perturbed-versus-reference comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Trace difference grows sub-dominantly and the boundary
    /// coefficients agree.
    Pass,
    /// The difference ratio is not monotone over the top of the sweep;
    /// a longer sweep is needed — this is never evidence against decay.
    Inconclusive,
    /// Boundary coefficients disagree beyond the combined uncertainty.
    Fail,
}

/// One row of the stability comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityRow {
    pub l: f64,
    /// `tr h(P_L) − tr h(P_{L,0})`.
    pub delta: f64,
    /// `|delta| / (L^{d−1}·ln L)` — the growth rate that must die out if
    /// the boundary asymptotics is potential-independent.
    pub ratio: f64,
}

/// Full stability comparison between a perturbed and a reference sweep.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub h_label: String,
    pub rows: Vec<StabilityRow>,
    pub fit_perturbed: FitResult,
    pub fit_reference: FitResult,
    pub b_perturbed: f64,
    pub b_reference: f64,
    /// Sum of the two leave-one-out spreads plus a relative floor.
    pub combined_uncertainty: f64,
    pub trend_nonincreasing: bool,
    pub b_within_uncertainty: bool,
    pub verdict: Verdict,
}

fn nonincreasing_top_half(ratios: &[f64]) -> bool {
    let top = &ratios[ratios.len() / 2..];
    top.windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15)
}

/// Compare a perturbed sweep against its potential-free reference: rowwise
/// trace differences, their ratio to the boundary growth `L^{d−1}·ln L`,
/// and the boundary-coefficient agreement of the two fits.
///
/// The verdict passes when the ratio is non-increasing over the top half
/// of the sweep and the boundary coefficients agree within the combined
/// leave-one-out uncertainty; a non-monotone ratio yields `Inconclusive`
/// (the sweep is too short to call), never `Fail`.
pub fn stability_report(
    perturbed: &SweepTable,
    reference: &SweepTable,
    h: &TestFunction,
) -> Result<StabilityReport> {
    let cv = &perturbed.config;
    let cr = &reference.config;
    if cv.energy != cr.energy || cv.domain != cr.domain || cv.engine != cr.engine {
        return Err(CoreError::InvalidParam(
            "stability comparison needs matching energy, domain, and engine".into(),
        ));
    }
    let (lv, lr) = (perturbed.scales(), reference.scales());
    if lv.len() != lr.len()
        || lv
            .iter()
            .zip(&lr)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(CoreError::InvalidParam(
            "stability comparison needs identical sweep grids".into(),
        ));
    }
    if lv.iter().any(|&l| l <= 1.0 + 1e-9) {
        return Err(CoreError::InvalidParam(
            "stability ratios need scales greater than 1 (ln L must be positive)".into(),
        ));
    }

    let tv = perturbed.trace_column(h.label())?;
    let tr = reference.trace_column(h.label())?;
    let d = cv.dimension();
    let rows: Vec<StabilityRow> = lv
        .iter()
        .zip(tv.iter().zip(&tr))
        .map(|(&l, (&a, &b))| {
            let delta = a - b;
            let den = l.powi(d as i32 - 1) * l.ln();
            StabilityRow {
                l,
                delta,
                ratio: delta.abs() / den,
            }
        })
        .collect();

    let basis = FitBasis::full(d)?;
    let fit_perturbed = fit_asymptotics(perturbed, h, &basis)?;
    let fit_reference = fit_asymptotics(reference, h, &basis)?;
    let b_perturbed = fit_perturbed.b_hat.expect("full basis names b");
    let b_reference = fit_reference.b_hat.expect("full basis names b");
    let combined_uncertainty = fit_perturbed.b_uncertainty
        + fit_reference.b_uncertainty
        + 1e-9 * (b_perturbed.abs() + b_reference.abs());

    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let trend_nonincreasing = nonincreasing_top_half(&ratios);
    let b_within_uncertainty =
        (b_perturbed - b_reference).abs() <= combined_uncertainty;
    let verdict = if !trend_nonincreasing {
        Verdict::Inconclusive
    } else if !b_within_uncertainty {
        Verdict::Fail
    } else {
        Verdict::Pass
    };

    Ok(StabilityReport {
        h_label: h.label().to_string(),
        rows,
        fit_perturbed,
        fit_reference,
        b_perturbed,
        b_reference,
        combined_uncertainty,
        trend_nonincreasing,
        b_within_uncertainty,
        verdict,
    })
}
