//! Dense and tridiagonal symmetric eigensolvers.
//!
//! Dense paths wrap `faer` (pinned to sequential execution so results are
//! bit-identical regardless of thread environment). The symmetric
//! tridiagonal path — Sturm-sequence bisection for eigenvalues below a
//! threshold plus shifted inverse iteration with cluster
//! reorthogonalization for eigenvectors — is hand-rolled because only the
//! spectrum below the Fermi level is ever needed and full dense
//! diagonalization of 10⁴–10⁵-site chains would dominate the runtime.

use std::sync::Once;

use faer::{Mat, MatRef, Side};

use crate::{CoreError, Result};

static INIT: Once = Once::new();

/// Pin faer to sequential execution (deterministic across thread counts).
pub fn ensure_sequential() {
    INIT.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Eigendecomposition of a symmetric matrix; eigenvalues ascending,
/// eigenvectors as the columns of an orthogonal matrix.
pub fn sym_eigh(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    ensure_sequential();
    let n = a.nrows();
    if n != a.ncols() {
        return Err(CoreError::EigenFailed(format!(
            "expected square matrix, got {n}×{}",
            a.ncols()
        )));
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| CoreError::EigenFailed(format!("self-adjoint eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Singular values of a rectangular matrix, descending.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    ensure_sequential();
    a.singular_values()
        .map_err(|e| CoreError::EigenFailed(format!("singular values: {e:?}")))
}

/// Solution of an overdetermined linear least-squares problem.
#[derive(Debug, Clone)]
pub struct LsqFit {
    /// Minimizer of ‖A·c − y‖₂.
    pub coeffs: Vec<f64>,
    /// ‖A·c − y‖₂ at the minimizer.
    pub residual_norm: f64,
    /// σ_max/σ_min of the design matrix.
    pub condition: f64,
}

/// Least squares via SVD. Rejects underdetermined systems and design
/// matrices that are numerically rank-deficient (σ_min ≤ 1e−13·σ_max).
pub fn least_squares(a: MatRef<'_, f64>, y: &[f64]) -> Result<LsqFit> {
    ensure_sequential();
    let (n, k) = (a.nrows(), a.ncols());
    if n < k || k == 0 {
        return Err(CoreError::InvalidParam(format!(
            "least squares needs at least as many rows as columns, got {n}×{k}"
        )));
    }
    if y.len() != n {
        return Err(CoreError::InvalidParam(format!(
            "right-hand side has {} entries for {n} rows",
            y.len()
        )));
    }
    let svd = a
        .svd()
        .map_err(|e| CoreError::EigenFailed(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let (smax, smin) = (s[0], s[k - 1]);
    if !(smax > 0.0) || smin <= 1e-13 * smax {
        return Err(CoreError::EigenFailed(format!(
            "rank-deficient design matrix: σ_max = {smax:.3e}, σ_min = {smin:.3e}"
        )));
    }
    let (u, v) = (svd.U(), svd.V());
    let mut coeffs = vec![0.0; k];
    for i in 0..k {
        let proj: f64 = (0..n).map(|r| u[(r, i)] * y[r]).sum();
        let scaled = proj / s[i];
        for j in 0..k {
            coeffs[j] += v[(j, i)] * scaled;
        }
    }
    let mut res = 0.0;
    for r in 0..n {
        let fit: f64 = (0..k).map(|j| a[(r, j)] * coeffs[j]).sum();
        res += (fit - y[r]) * (fit - y[r]);
    }
    Ok(LsqFit {
        coeffs,
        residual_norm: res.sqrt(),
        condition: smax / smin,
    })
}

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n−1.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Tridiag> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(CoreError::InvalidParam(format!(
                "tridiagonal needs |off| = |diag| − 1, got {} and {}",
                off.len(),
                diag.len()
            )));
        }
        Ok(Tridiag { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// A scale for absolute tolerances: max Gershgorin radius.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Gershgorin bounds containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let max_off2 = self
            .off
            .iter()
            .fold(0.0f64, |m, &e| m.max(e * e))
            .max(1.0);
        f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * max_off2)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0usize;
        let mut q = self.diag[0] - x;
        // A vanishing pivot is replaced by -pivmin *before* the sign test
        // (LAPACK convention): an exact hit counts as "below" and the
        // recurrence continues with a well-defined denominator.
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k-th eigenvalue (0-based, ascending) by bisection.
    fn kth_eigenvalue(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        debug_assert!(self.count_below(lo) <= k && self.count_below(hi) > k);
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let tol = 4.0 * f64::EPSILON * scale;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= tol || mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues strictly below `bound`, ascending.
    pub fn eigenvalues_below(&self, bound: f64) -> Vec<f64> {
        let m = self.count_below(bound);
        let (glo, _) = self.gershgorin();
        let mut lo_bounds = vec![glo; m];
        let mut vals = Vec::with_capacity(m);
        // Each bisection tightens the lower bound for later (larger)
        // eigenvalues: once λ_k is found, eigenvalues k+1.. lie above it.
        for k in 0..m {
            let lo = lo_bounds[k];
            let lam = self.kth_eigenvalue(k, lo, bound);
            if k + 1 < m && lam > lo_bounds[k + 1] {
                let nudge = lam - 4.0 * f64::EPSILON * lam.abs().max(1.0);
                for b in lo_bounds.iter_mut().skip(k + 1) {
                    if *b < nudge {
                        *b = nudge;
                    }
                }
            }
            vals.push(lam);
        }
        vals
    }

    /// Eigenpairs below `bound`: ascending eigenvalues and the matching
    /// orthonormal eigenvectors as columns.
    pub fn eigenpairs_below(&self, bound: f64) -> Result<(Vec<f64>, Mat<f64>)> {
        let vals = self.eigenvalues_below(bound);
        let n = self.n();
        let m = vals.len();
        let mut vecs = Mat::<f64>::zeros(n, m);
        if m == 0 {
            return Ok((vals, vecs));
        }
        let scale = self.norm_bound().max(1.0);
        // Eigenvalues closer than this are treated as one cluster and the
        // corresponding vectors reorthogonalized against each other.
        let cluster_gap = 1e-7 * scale;
        let mut cluster_start = 0usize;
        let mut stored: Vec<Vec<f64>> = Vec::with_capacity(m);
        for k in 0..m {
            if k > 0 && vals[k] - vals[k - 1] > cluster_gap {
                cluster_start = k;
            }
            let v = self.inverse_iteration(vals[k], k, &stored[cluster_start..k], scale)?;
            for i in 0..n {
                vecs[(i, k)] = v[i];
            }
            stored.push(v);
        }
        Ok((vals, vecs))
    }

    fn inverse_iteration(
        &self,
        lambda: f64,
        index: usize,
        cluster_prev: &[Vec<f64>],
        scale: f64,
    ) -> Result<Vec<f64>> {
        let n = self.n();
        // Deterministic pseudo-random start vector (splitmix64 stream).
        let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ ((index as u64) << 32) ^ n as u64;
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^= z >> 31;
                (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut v);
        let lu = TridiagLu::factor(self, lambda, self.pivmin());
        let target = 1e-10 * scale;
        let mut best = v.clone();
        let mut best_res = f64::INFINITY;
        for _ in 0..8 {
            lu.solve_in_place(&mut v);
            for p in cluster_prev {
                let d = dot(&v, p);
                for (vi, pi) in v.iter_mut().zip(p) {
                    *vi -= d * pi;
                }
            }
            normalize(&mut v);
            let res = self.residual(&v, lambda);
            if res < best_res {
                best_res = res;
                best.copy_from_slice(&v);
            }
            if res <= target {
                break;
            }
        }
        if best_res > 1e-6 * scale {
            return Err(CoreError::NonConvergent(format!(
                "inverse iteration stalled at residual {best_res:.3e} for eigenvalue {lambda:.6e}"
            )));
        }
        Ok(best)
    }

    /// `‖T v − λ v‖₂` for a unit vector `v`.
    pub fn residual(&self, v: &[f64], lambda: f64) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            let mut r = (self.diag[i] - lambda) * v[i];
            if i > 0 {
                r += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                r += self.off[i] * v[i + 1];
            }
            s += r * r;
        }
        s.sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Partial-pivoting LU of `T − λI` for a symmetric tridiagonal `T`
/// (row swaps introduce a second superdiagonal).
struct TridiagLu {
    low: Vec<f64>,
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(t: &Tridiag, shift: f64, pivmin: f64) -> TridiagLu {
        let n = t.n();
        let mut d0: Vec<f64> = t.diag.iter().map(|&d| d - shift).collect();
        let mut d1: Vec<f64> = t.off.clone();
        let mut d2 = vec![0.0; n.saturating_sub(2)];
        let sub: Vec<f64> = t.off.clone();
        let mut low = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d0[i].abs() >= sub[i].abs() {
                let piv = if d0[i].abs() < pivmin {
                    if d0[i] < 0.0 {
                        -pivmin
                    } else {
                        pivmin
                    }
                } else {
                    d0[i]
                };
                d0[i] = piv;
                let m = sub[i] / piv;
                low[i] = m;
                d0[i + 1] -= m * d1[i];
                // No fill-in beyond the first superdiagonal without a swap.
            } else {
                // Swap rows i and i+1.
                swapped[i] = true;
                let m = d0[i] / sub[i];
                low[i] = m;
                d0[i] = sub[i];
                let old_d1 = d1[i];
                d1[i] = d0[i + 1];
                d0[i + 1] = old_d1 - m * d0[i + 1];
                if i + 2 < n {
                    d2[i] = d1[i + 1];
                    d1[i + 1] = -m * d2[i];
                }
            }
        }
        let last = n - 1;
        if d0[last].abs() < pivmin {
            d0[last] = if d0[last] < 0.0 { -pivmin } else { pivmin };
        }
        TridiagLu {
            low,
            d0,
            d1,
            d2,
            swapped,
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d0.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.low[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut x = b[i];
            if i + 1 < n {
                x -= self.d1[i] * b[i + 1];
            }
            if i + 2 < n {
                x -= self.d2[i] * b[i + 2];
            }
            b[i] = x / self.d0[i];
        }
        // Rescale to keep iterates in range.
        let max = b.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if max > 0.0 && !max.is_finite() {
            for x in b.iter_mut() {
                if !x.is_finite() {
                    *x = 0.0;
                }
            }
        } else if max > 1e100 {
            for x in b.iter_mut() {
                *x /= max;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Discrete Dirichlet Laplacian on n sites with spacing 1:
    /// eigenvalues 2 − 2cos(kπ/(n+1)), eigenvectors sin(k·iπ/(n+1)).
    fn chain(n: usize) -> Tridiag {
        Tridiag::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    fn chain_eigenvalue(n: usize, k: usize) -> f64 {
        let theta = (k as f64) * std::f64::consts::PI / ((n + 1) as f64);
        4.0 * (0.5 * theta).sin().powi(2)
    }

    #[test]
    fn least_squares_recovers_exact_and_noisy_coefficients() {
        // Exactly representable data: recovery to machine precision.
        let xs: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let a = Mat::<f64>::from_fn(xs.len(), 3, |i, j| match j {
            0 => xs[i],
            1 => xs[i].ln(),
            _ => 1.0,
        });
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 * x - 0.7 * x.ln() + 3.0).collect();
        let fit = least_squares(a.as_ref(), &y).unwrap();
        assert!((fit.coeffs[0] - 2.0).abs() < 1e-12);
        assert!((fit.coeffs[1] + 0.7).abs() < 1e-12);
        assert!((fit.coeffs[2] - 3.0).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
        assert!(fit.condition >= 1.0 && fit.condition.is_finite());

        // Residual orthogonality: Aᵀ(Ac − y) = 0 at the minimizer.
        let y2: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        let fit2 = least_squares(a.as_ref(), &y2).unwrap();
        for j in 0..3 {
            let dot: f64 = (0..xs.len())
                .map(|i| {
                    let pred: f64 = (0..3).map(|c| a[(i, c)] * fit2.coeffs[c]).sum();
                    a[(i, j)] * (pred - y2[i])
                })
                .sum();
            assert!(dot.abs() < 1e-9, "normal equations violated: {dot}");
        }
    }

    #[test]
    fn least_squares_rejects_degenerate_systems() {
        let a = Mat::<f64>::from_fn(6, 2, |i, _| i as f64 + 1.0);
        let y = vec![1.0; 6];
        assert!(least_squares(a.as_ref(), &y).is_err(), "duplicate columns");
        let tall = Mat::<f64>::from_fn(2, 3, |i, j| (i + j) as f64);
        assert!(least_squares(tall.as_ref(), &[1.0, 2.0]).is_err());
        let ok = Mat::<f64>::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        assert!(least_squares(ok.as_ref(), &[1.0, 2.0]).is_err(), "rhs length");
    }

    #[test]
    fn three_site_chain_matches_closed_form() {
        let t = chain(3);
        let vals = t.eigenvalues_below(10.0);
        let want = [
            2.0 - std::f64::consts::SQRT_2,
            2.0,
            2.0 + std::f64::consts::SQRT_2,
        ];
        assert_eq!(vals.len(), 3);
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-13, "got {v}, want {w}");
        }
        // 2.0 is exactly an eigenvalue; the pivmin convention counts an
        // exact hit as "below".
        assert_eq!(t.count_below(2.0 - 1e-12), 1);
        assert_eq!(t.count_below(2.0), 2);
        assert_eq!(t.count_below(2.0 + 1e-12), 2);
    }

    #[test]
    fn chain_eigenvalues_below_threshold_match_closed_form() {
        let n = 400;
        let t = chain(n);
        let bound = 1.3;
        let vals = t.eigenvalues_below(bound);
        let exact: Vec<f64> = (1..=n)
            .map(|k| chain_eigenvalue(n, k))
            .filter(|&l| l < bound)
            .collect();
        assert_eq!(vals.len(), exact.len());
        for (v, w) in vals.iter().zip(&exact) {
            assert!((v - w).abs() < 1e-12, "got {v}, want {w}");
        }
    }

    #[test]
    fn chain_eigenvectors_match_sine_modes() {
        let n = 60;
        let t = chain(n);
        let (vals, vecs) = t.eigenpairs_below(1.03).unwrap();
        assert!(!vals.is_empty());
        for (j, &lam) in vals.iter().enumerate() {
            let k = j + 1;
            assert!((lam - chain_eigenvalue(n, k)).abs() < 1e-12);
            let norm: f64 = (1..=n)
                .map(|i| {
                    let theta = (k * i) as f64 * std::f64::consts::PI / ((n + 1) as f64);
                    theta.sin().powi(2)
                })
                .sum::<f64>()
                .sqrt();
            let overlap: f64 = (1..=n)
                .map(|i| {
                    let theta = (k * i) as f64 * std::f64::consts::PI / ((n + 1) as f64);
                    vecs[(i - 1, j)] * theta.sin() / norm
                })
                .sum();
            assert!(
                (overlap.abs() - 1.0).abs() < 1e-10,
                "mode {k}: |overlap| = {}",
                overlap.abs()
            );
        }
    }

    #[test]
    fn degenerate_pair_yields_orthogonal_vectors() {
        // Two decoupled sites plus weak coupling: eigenvalues split by ~2e-14.
        let t = Tridiag::new(vec![1.0, 1.0, 5.0], vec![1e-14, 0.3]).unwrap();
        let (vals, vecs) = t.eigenpairs_below(2.0).unwrap();
        assert_eq!(vals.len(), 2);
        let mut d = 0.0;
        for i in 0..3 {
            d += vecs[(i, 0)] * vecs[(i, 1)];
        }
        assert!(d.abs() < 1e-10, "cluster vectors not orthogonal: {d:.3e}");
        for (j, &lam) in vals.iter().enumerate() {
            let v: Vec<f64> = (0..3).map(|i| vecs[(i, j)]).collect();
            assert!(t.residual(&v, lam) < 1e-10);
        }
    }

    #[test]
    fn random_tridiagonal_agrees_with_dense_solver() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 160;
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = Tridiag::new(diag.clone(), off.clone()).unwrap();

        let dense = Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i.abs_diff(j) == 1 {
                off[i.min(j)]
            } else {
                0.0
            }
        });
        let (dvals, _) = sym_eigh(dense.as_ref()).unwrap();

        let bound = 0.5;
        let vals = t.eigenvalues_below(bound);
        let dense_below: Vec<f64> = dvals.iter().copied().filter(|&l| l < bound).collect();
        assert_eq!(vals.len(), dense_below.len());
        let scale = t.norm_bound();
        for (v, w) in vals.iter().zip(&dense_below) {
            assert!((v - w).abs() < 1e-12 * scale, "got {v}, want {w}");
        }

        let (evals, evecs) = t.eigenpairs_below(bound).unwrap();
        for (j, &lam) in evals.iter().enumerate() {
            let v: Vec<f64> = (0..n).map(|i| evecs[(i, j)]).collect();
            assert!(t.residual(&v, lam) < 1e-10 * scale);
            for j2 in 0..j {
                let w: Vec<f64> = (0..n).map(|i| evecs[(i, j2)]).collect();
                assert!(dot(&v, &w).abs() < 1e-8, "vectors {j} and {j2} not orthogonal");
            }
        }
    }

    #[test]
    fn sturm_count_matches_closed_form_on_large_chain() {
        let n = 5000;
        let t = chain(n);
        for bound in [0.1, 0.5, 1.11, 2.0, 3.9] {
            let exact = (1..=n).filter(|&k| chain_eigenvalue(n, k) < bound).count();
            assert_eq!(t.count_below(bound), exact, "bound {bound}");
        }
        // Adversarial probe: 1.0 is exactly the 1667-th eigenvalue
        // (k = (n+1)/3); either side of the strict/weak fence is acceptable.
        let hit = t.count_below(1.0);
        assert!(hit == 1666 || hit == 1667, "exact-hit count {hit}");
    }

    #[test]
    fn dense_wrapper_solves_known_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1, 3 with vectors (1,∓1)/√2.
        let m = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let (vals, vecs) = sym_eigh(m.as_ref()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        let ratio0 = vecs[(0, 0)] / vecs[(1, 0)];
        let ratio1 = vecs[(0, 1)] / vecs[(1, 1)];
        assert!((ratio0 + 1.0).abs() < 1e-12);
        assert!((ratio1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_are_descending_and_exact_for_diagonal() {
        let m = Mat::<f64>::from_fn(3, 2, |i, j| {
            if i == j {
                if i == 0 {
                    3.0
                } else {
                    -7.0
                }
            } else {
                0.0
            }
        });
        let sv = singular_values(m.as_ref()).unwrap();
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 7.0).abs() < 1e-14);
        assert!((sv[1] - 3.0).abs() < 1e-14);
    }
}
