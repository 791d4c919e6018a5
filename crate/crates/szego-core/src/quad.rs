//! Quadrature primitives shared by the Widom functional and the continuum
//! engine: Gauss–Legendre nodes of arbitrary order and an adaptive
//! Gauss–Kronrod 7–15 integrator.

use crate::{CoreError, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are computed by Newton iteration on the Legendre recurrence and are
/// accurate to machine precision; they come out sorted ascending and exactly
/// antisymmetric (node `i` is the negation of node `n-1-i`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, d) = legendre_pair(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pair(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes/weights of `gauss_legendre` mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

// Gauss–Kronrod 7–15 abscissae and weights (positive half; the rule is
// symmetric). Even-indexed abscissae carry the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod 7–15 panel: returns (K15 value, |K15 - G7| error proxy).
fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut result_k = WGK[7] * fc;
    let mut result_g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        result_k += WGK[j] * fsum;
        if j % 2 == 1 {
            result_g += WG[j / 2] * fsum;
        }
    }
    result_k *= half;
    result_g *= half;
    // |K15 - G7| is a conservative error proxy; overestimation only costs
    // extra subdivision.
    (result_k, (result_k - result_g).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_bound: f64,
    pub panels: usize,
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `abs_tol`, subdividing the worst panel first.
///
/// Fails with [`CoreError::QuadratureNonConvergent`] when `max_panels`
/// subdivisions cannot push the global error bound under the tolerance;
/// the partial estimate is carried inside the error.
pub fn adaptive_gk15(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
    context: &str,
) -> Result<QuadResult> {
    assert!(b > a, "integration interval must be ordered");
    let (v, e) = gk15(f, a, b);
    // (lo, hi, value, error)
    let mut panels: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= abs_tol {
            return Ok(QuadResult {
                value: panels.iter().map(|p| p.2).sum(),
                error_bound: total_err,
                panels: panels.len(),
            });
        }
        if panels.len() >= max_panels {
            return Err(CoreError::QuadratureNonConvergent {
                context: context.to_string(),
                estimate: panels.iter().map(|p| p.2).sum(),
                error_bound: total_err,
                target: abs_tol,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("panel list cannot be empty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval shrank to machine width without converging.
            return Err(CoreError::QuadratureNonConvergent {
                context: context.to_string(),
                estimate: panels.iter().map(|p| p.2).sum(),
                error_bound: total_err,
                target: abs_tol,
            });
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}
