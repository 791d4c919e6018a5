//! Finite-difference spectral engine.
//!
//! The Schrödinger operator `H = -Δ + V` is discretized on a square grid
//! inside a Dirichlet box `[-R, R]^d` chosen by the margin rule
//! `R ≥ L·extent(Λ) + max(8/√E, 2·supp V, 5)`, so that truncation effects
//! at the box wall are negligible on `Λ_L`. In d = 1 the matrix is
//! symmetric tridiagonal and eigenpairs below the Fermi level come from
//! Sturm bisection + inverse iteration; in d = 2 the five-point stencil is
//! diagonalized densely.
//!
//! The Fermi projection is kept in factored form `P = V Vᵀ` (sites ×
//! modes), so the spectrum of a truncation `1_Λ P 1_Λ` is read off the
//! modes × modes Gram matrix `V_Λᵀ V_Λ` — same nonzero spectrum, far
//! smaller eigenproblem.

use faer::Mat;

use crate::cache::{eigen_key, CacheStore};
use crate::linalg::{self, Tridiag};
use crate::model::{
    Domain, ModelConfig, Potential, FERMI_DEGENERACY_GUARD, SPECTRUM_CLIP_TOL,
};
use crate::widom::{n0, N0Convention};
use crate::{CoreError, Result};

/// A grid-snapped Dirichlet box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBox {
    pub dim: u32,
    pub spacing: f64,
    /// Snapped half-width: an exact multiple of the spacing.
    pub halfwidth: f64,
    half_steps: usize,
    /// Interior sites per axis (odd; the grid contains the origin).
    pub sites_per_axis: usize,
    pub n_sites: usize,
}

/// Resolve the box for a given scale: margin rule (or explicit override),
/// grid snapping, and the site-cap guard.
pub fn lattice_box(cfg: &ModelConfig, scale: f64) -> Result<LatticeBox> {
    let dim = cfg.dimension();
    let h = cfg.lattice.spacing;
    if !(h > 0.0) || !h.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "lattice spacing must be positive, got {h}"
        )));
    }
    if cfg.k_fermi() * h > crate::model::DISPERSION_GUARD {
        return Err(CoreError::InvalidParam(format!(
            "dispersion guard violated: √E·h = {:.4} > {}",
            cfg.k_fermi() * h,
            crate::model::DISPERSION_GUARD
        )));
    }
    let required = cfg.required_box(scale);
    let requested = match cfg.lattice.box_halfwidth {
        Some(r) => {
            if r < required {
                return Err(CoreError::BoxTooSmall {
                    required,
                    actual: r,
                    scale,
                });
            }
            r
        }
        None => required,
    };
    // Snap outward to a grid multiple (tolerating exact multiples).
    let half_steps = (requested / h - 1e-9).ceil().max(1.0) as usize;
    let sites_per_axis = 2 * half_steps - 1;
    let n_sites = match dim {
        1 => sites_per_axis,
        _ => sites_per_axis * sites_per_axis,
    };
    if n_sites > cfg.lattice.site_cap {
        return Err(CoreError::SiteCapExceeded {
            sites: n_sites,
            cap: cfg.lattice.site_cap,
        });
    }
    Ok(LatticeBox {
        dim,
        spacing: h,
        halfwidth: half_steps as f64 * h,
        half_steps,
        sites_per_axis,
        n_sites,
    })
}

impl LatticeBox {
    /// Coordinate of the axis site `i ∈ 0..sites_per_axis` (exact product
    /// of the spacing with a small integer, so ±pairs match bitwise).
    fn axis_coord(&self, i: usize) -> f64 {
        (i as i64 - (self.half_steps as i64 - 1)) as f64 * self.spacing
    }

    /// Full coordinates of site `s` (second entry 0 in d = 1).
    pub fn site_coord(&self, s: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.axis_coord(s), 0.0]
        } else {
            let ix = s / self.sites_per_axis;
            let iy = s % self.sites_per_axis;
            [self.axis_coord(ix), self.axis_coord(iy)]
        }
    }
}

enum Hamiltonian {
    Tridiagonal(Tridiag),
    Dense(Mat<f64>),
}

fn build_hamiltonian(boxr: &LatticeBox, potential: &Potential) -> Hamiltonian {
    let h = boxr.spacing;
    let inv_h2 = 1.0 / (h * h);
    match boxr.dim {
        1 => {
            let n = boxr.n_sites;
            let diag: Vec<f64> = (0..n)
                .map(|i| 2.0 * inv_h2 + potential.evaluate(&[boxr.axis_coord(i)]))
                .collect();
            let off = vec![-inv_h2; n - 1];
            Hamiltonian::Tridiagonal(Tridiag::new(diag, off).expect("n ≥ 1"))
        }
        _ => {
            let spa = boxr.sites_per_axis;
            let n = boxr.n_sites;
            let mut m = Mat::<f64>::zeros(n, n);
            for s in 0..n {
                let ix = s / spa;
                let iy = s % spa;
                let c = boxr.site_coord(s);
                m[(s, s)] = 4.0 * inv_h2 + potential.evaluate(&c);
                if ix + 1 < spa {
                    m[(s, s + spa)] = -inv_h2;
                    m[(s + spa, s)] = -inv_h2;
                }
                if iy + 1 < spa {
                    m[(s, s + 1)] = -inv_h2;
                    m[(s + 1, s)] = -inv_h2;
                }
            }
            Hamiltonian::Dense(m)
        }
    }
}

/// Fermi projection `1_{(-∞,E)}(H)` in factored form `P = V Vᵀ`.
pub struct FermiProjection {
    boxr: LatticeBox,
    energy: f64,
    vals: Vec<f64>,
    vecs: Mat<f64>,
    /// Whether the eigendecomposition was replayed from the cache.
    pub from_cache: bool,
}

/// Diagonalize (or fetch from cache) and keep the modes below the Fermi
/// level. Fails with `DegenerateFermiLevel` if the spectrum comes within
/// the relative guard of `E`.
pub fn fermi_projection(
    cfg: &ModelConfig,
    scale: f64,
    cache: Option<&CacheStore>,
) -> Result<FermiProjection> {
    let boxr = lattice_box(cfg, scale)?;
    let energy = cfg.energy;
    // Stored cutoff leaves headroom above E so the guard window around E
    // is fully visible to later lookups.
    let store_cut = energy * (1.0 + 1e-6);
    let key = eigen_key(boxr.dim, boxr.spacing, boxr.halfwidth, &cfg.potential);

    if let Some(store) = cache {
        if let Some(hit) = store.lookup(&key, store_cut) {
            let (vals, vecs) = filter_below(energy, &hit.vals, &hit.vecs)?;
            return Ok(FermiProjection {
                boxr,
                energy,
                vals,
                vecs,
                from_cache: true,
            });
        }
    }

    let (all_vals, all_vecs) = match build_hamiltonian(&boxr, &cfg.potential) {
        Hamiltonian::Tridiagonal(t) => {
            let guard = FERMI_DEGENERACY_GUARD * energy;
            if t.count_below(energy - guard) != t.count_below(energy + guard) {
                let vals = t.eigenvalues_below(energy + guard);
                let distance = vals
                    .iter()
                    .map(|v| (v - energy).abs())
                    .fold(f64::INFINITY, f64::min);
                return Err(CoreError::DegenerateFermiLevel {
                    energy,
                    distance,
                    guard,
                });
            }
            t.eigenpairs_below(store_cut)?
        }
        Hamiltonian::Dense(m) => {
            let (vals, vecs) = linalg::sym_eigh(m.as_ref())?;
            let keep = vals.iter().take_while(|&&v| v < store_cut).count();
            let kept_vals = vals[..keep].to_vec();
            let kept_vecs = vecs.as_ref().subcols(0, keep).to_owned();
            (kept_vals, kept_vecs)
        }
    };

    if let Some(store) = cache {
        store.store(&key, store_cut, &all_vals, all_vecs.as_ref())?;
    }
    let (vals, vecs) = filter_below(energy, &all_vals, &all_vecs)?;
    Ok(FermiProjection {
        boxr,
        energy,
        vals,
        vecs,
        from_cache: false,
    })
}

/// Keep modes with eigenvalue `< energy`, enforcing the degeneracy guard.
fn filter_below(energy: f64, vals: &[f64], vecs: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let guard = FERMI_DEGENERACY_GUARD * energy;
    if let Some(d) = vals
        .iter()
        .map(|v| (v - energy).abs())
        .fold(None::<f64>, |m, d| Some(m.map_or(d, |m| m.min(d))))
    {
        if d < guard {
            return Err(CoreError::DegenerateFermiLevel {
                energy,
                distance: d,
                guard,
            });
        }
    }
    let keep = vals.iter().take_while(|&&v| v < energy).count();
    Ok((vals[..keep].to_vec(), vecs.as_ref().subcols(0, keep).to_owned()))
}

/// Nonzero part of the spectrum of a truncated projection, plus the size
/// of the ambient truncated space (the rest of the spectrum is zeros).
#[derive(Debug, Clone)]
pub struct TruncatedSpectrum {
    /// Descending, clipped to `[0, 1]`.
    pub eigenvalues: Vec<f64>,
    pub ambient_sites: usize,
}

impl TruncatedSpectrum {
    /// `tr h(P_Λ)` over the ambient truncated space.
    pub fn trace(&self, h: &crate::testfn::TestFunction) -> f64 {
        let zero = h.eval(0.0);
        let mut t = self
            .eigenvalues
            .iter()
            .map(|&mu| h.eval(mu))
            .sum::<f64>();
        t += zero * (self.ambient_sites as f64 - self.eigenvalues.len() as f64);
        t
    }
}

impl FermiProjection {
    pub fn mode_count(&self) -> usize {
        self.vals.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.vals
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn box_info(&self) -> &LatticeBox {
        &self.boxr
    }

    /// Indices of sites inside a domain (boundary inclusive).
    pub fn sites_in(&self, domain: &Domain) -> Vec<usize> {
        let d = self.boxr.dim as usize;
        (0..self.boxr.n_sites)
            .filter(|&s| {
                let c = self.boxr.site_coord(s);
                domain.contains(&c[..d])
            })
            .collect()
    }

    /// Rows of the mode matrix `V` at the given sites (|sites| × modes).
    fn rows_at(&self, sites: &[usize]) -> Mat<f64> {
        Mat::<f64>::from_fn(sites.len(), self.vals.len(), |r, k| {
            self.vecs[(sites[r], k)]
        })
    }

    /// Gram matrix `V_Λᵀ V_Λ` for a site set; its spectrum is the nonzero
    /// spectrum of `1_Λ P 1_Λ`.
    pub fn restricted_gram(&self, sites: &[usize]) -> Mat<f64> {
        let v = self.rows_at(sites);
        v.transpose() * &v
    }

    /// Entries of `P = V Vᵀ` on a block of site pairs.
    pub fn dense_block(&self, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        let a = self.rows_at(rows);
        let b = self.rows_at(cols);
        a.as_ref() * b.transpose()
    }

    /// Spectrum of the projection truncated to `Λ_L`.
    pub fn truncated_spectrum(&self, domain: &Domain) -> Result<TruncatedSpectrum> {
        if domain.extent() > self.boxr.halfwidth + 1e-9 {
            return Err(CoreError::BoxTooSmall {
                required: domain.extent(),
                actual: self.boxr.halfwidth,
                scale: domain.scale(),
            });
        }
        let sites = self.sites_in(domain);
        if sites.is_empty() {
            return Ok(TruncatedSpectrum {
                eigenvalues: Vec::new(),
                ambient_sites: 0,
            });
        }
        let g = self.restricted_gram(&sites);
        let (vals, _) = linalg::sym_eigh(g.as_ref())?;
        let mut out = Vec::with_capacity(vals.len());
        for &v in vals.iter().rev() {
            if v < -SPECTRUM_CLIP_TOL || v > 1.0 + SPECTRUM_CLIP_TOL {
                return Err(CoreError::SpectrumOutOfRange {
                    value: v,
                    tol: SPECTRUM_CLIP_TOL,
                });
            }
            out.push(v.clamp(0.0, 1.0));
        }
        Ok(TruncatedSpectrum {
            eigenvalues: out,
            ambient_sites: sites.len(),
        })
    }
}

/// Integrated density of states of the free 1-d lattice Laplacian below
/// `energy`, from a Sturm count on `[-R, R]` (no eigenvectors, so this
/// path is exempt from the site cap).
pub fn ids_estimate(energy: f64, spacing: f64, halfwidth: f64) -> Result<f64> {
    if !(energy > 0.0) || !(spacing > 0.0) || !(halfwidth > spacing) {
        return Err(CoreError::InvalidParam(format!(
            "ids_estimate needs energy > 0, 0 < h < R; got E={energy}, h={spacing}, R={halfwidth}"
        )));
    }
    let half_steps = (halfwidth / spacing - 1e-9).ceil().max(1.0) as usize;
    let n = 2 * half_steps - 1;
    let inv_h2 = 1.0 / (spacing * spacing);
    let t = Tridiag::new(vec![2.0 * inv_h2; n], vec![-inv_h2; n - 1])?;
    let count = t.count_below(energy);
    Ok(count as f64 / (2.0 * half_steps as f64 * spacing))
}

/// Richardson-extrapolated IDS: the O(h²) lattice dispersion error of the
/// counting function cancels between `h` and `h/2`.
pub fn ids_estimate_refined(energy: f64, spacing: f64, halfwidth: f64) -> Result<f64> {
    let coarse = ids_estimate(energy, spacing, halfwidth)?;
    let fine = ids_estimate(energy, spacing / 2.0, halfwidth)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Outcome of pitting the two Γ-conventions for the volume coefficient
/// against a direct lattice count.
#[derive(Debug, Clone)]
pub struct ConventionArbitration {
    pub energy: f64,
    pub ids: f64,
    pub weyl: f64,
    pub as_printed: f64,
    pub chosen: N0Convention,
}

/// Estimate the IDS on a large box and pick the Γ-convention whose
/// prediction it matches (d = 1).
pub fn arbitrate_convention(energy: f64) -> Result<ConventionArbitration> {
    let ids = ids_estimate_refined(energy, 0.005, 500.0)?;
    let weyl = n0(energy, 1, N0Convention::Weyl)?;
    let as_printed = n0(energy, 1, N0Convention::AsPrinted)?;
    let chosen = if (ids - weyl).abs() <= (ids - as_printed).abs() {
        N0Convention::Weyl
    } else {
        N0Convention::AsPrinted
    };
    Ok(ConventionArbitration {
        energy,
        ids,
        weyl,
        as_printed,
        chosen,
    })
}

/// Frobenius norm of one unit-block of `P_V − P_0`.
#[derive(Debug, Clone, Copy)]
pub struct BlockNorm {
    pub row_block: i64,
    pub col_block: i64,
    /// `|n| + |m|` — the predicted d = 1 decay variable.
    pub sum_dist: f64,
    pub frobenius: f64,
}

/// Frobenius norms of unit-interval blocks `χ_n (P_a − P_b) χ_m` for a
/// pair of projections on the same box (d = 1). Block `n` covers
/// `[n, n+1)`.
pub fn difference_block_norms(
    a: &FermiProjection,
    b: &FermiProjection,
    row_blocks: &[i64],
    col_blocks: &[i64],
) -> Result<Vec<BlockNorm>> {
    if a.boxr != b.boxr {
        return Err(CoreError::InvalidParam(
            "block comparison needs identical boxes".into(),
        ));
    }
    if a.boxr.dim != 1 {
        return Err(CoreError::InvalidParam(
            "block decay analysis is 1-d".into(),
        ));
    }
    let sites_of = |blk: i64| -> Vec<usize> {
        (0..a.boxr.n_sites)
            .filter(|&s| {
                let x = a.boxr.axis_coord(s);
                x >= blk as f64 && x < (blk + 1) as f64
            })
            .collect()
    };
    let mut out = Vec::new();
    for &n in row_blocks {
        let rows = sites_of(n);
        if rows.is_empty() {
            return Err(CoreError::InvalidParam(format!(
                "block {n} lies outside the box"
            )));
        }
        for &m in col_blocks {
            let cols = sites_of(m);
            if cols.is_empty() {
                return Err(CoreError::InvalidParam(format!(
                    "block {m} lies outside the box"
                )));
            }
            let pa = a.dense_block(&rows, &cols);
            let pb = b.dense_block(&rows, &cols);
            let mut frob2 = 0.0;
            for i in 0..rows.len() {
                for j in 0..cols.len() {
                    let d = pa[(i, j)] - pb[(i, j)];
                    frob2 += d * d;
                }
            }
            out.push(BlockNorm {
                row_block: n,
                col_block: m,
                sum_dist: (n.abs() + m.abs()) as f64,
                frobenius: frob2.sqrt(),
            });
        }
    }
    Ok(out)
}

/// Log-log least-squares fit `‖block‖ ≈ c / sum_dist^p` → `(c, p)`.
pub fn fit_block_decay(blocks: &[BlockNorm]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = blocks
        .iter()
        .filter(|b| b.frobenius > 1e-300 && b.sum_dist > 0.0)
        .map(|b| (b.sum_dist.ln(), b.frobenius.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(CoreError::InvalidParam(
            "decay fit needs ≥ 3 nonzero blocks".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return Err(CoreError::InvalidParam(
            "decay fit is degenerate (all blocks at one distance)".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    Ok((intercept.exp(), -slope))
}
