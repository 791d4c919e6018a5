//! Error taxonomy shared by all engines.
//!
//! Two broad families matter to callers: configuration mistakes (rejected
//! before any heavy numerics start) and numerical failures (a computation ran
//! and could not meet its accuracy or stability contract). The CLI maps the
//! former to exit code 2 and the latter to exit code 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter failed validation before any computation ran.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The Fermi energy sits too close to a spectral point of the operator,
    /// so the Fermi projection is numerically ill-defined.
    #[error(
        "Fermi level E = {energy} is within {distance:.3e} of an eigenvalue \
         (guard {guard:.3e}); move E or change the box"
    )]
    DegenerateFermiLevel {
        energy: f64,
        distance: f64,
        guard: f64,
    },

    /// An eigenvalue of a compressed projection left [0,1] by more than the
    /// clip tolerance, signalling a broken discretization.
    #[error("spectrum value {value} outside [0,1] beyond clip tolerance {tol:.1e}")]
    SpectrumOutOfRange { value: f64, tol: f64 },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error(
        "quadrature for {context} did not converge: estimate {estimate:.6e}, \
         error bound {error_bound:.3e}, target {target:.3e}"
    )]
    QuadratureNonConvergent {
        context: String,
        estimate: f64,
        error_bound: f64,
        target: f64,
    },

    /// Lattice site count exceeds the configured memory guard.
    #[error(
        "lattice would have {sites} sites, above the cap of {cap}; \
         increase the spacing, shrink the box, or raise lattice.site_cap"
    )]
    SiteCapExceeded { sites: usize, cap: usize },

    /// The Dirichlet box is too small for the requested truncation scale.
    #[error(
        "box half-width {actual} is below the margin rule requirement {required:.6} \
         for L = {scale}; enlarge the box or reduce L"
    )]
    BoxTooSmall {
        required: f64,
        actual: f64,
        scale: f64,
    },

    /// A bound state sits too close to the continuum edge to be resolved.
    #[error("bound state at E = {energy:.3e} is within {guard:.1e} of threshold; unreliable")]
    NearThresholdBoundState { energy: f64, guard: f64 },

    /// Dense eigendecomposition or SVD failed to converge.
    #[error("dense linear algebra failed: {0}")]
    EigenFailed(String),

    /// A root finder or ODE integrator failed its accuracy contract.
    #[error("numerical routine failed: {0}")]
    NonConvergent(String),

    /// Membership test landed inside the ambiguity window around 1/d.
    #[error(
        "Hölder exponent estimate {estimate:.4} is within {window} of the \
         boundary 1/d = {boundary:.4}; membership ambiguous"
    )]
    MembershipAmbiguous {
        estimate: f64,
        boundary: f64,
        window: f64,
    },

    /// Cache I/O or format problem.
    #[error("eigendecomposition cache: {0}")]
    Cache(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CoreError {
    /// True when the error reflects a configuration/user mistake rather than
    /// a numerical failure (CLI exit code 2 vs 1).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            CoreError::InvalidParam(_)
                | CoreError::SiteCapExceeded { .. }
                | CoreError::BoxTooSmall { .. }
        )
    }
}
