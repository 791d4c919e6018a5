//! Spectral engines and two-term trace asymptotics for truncated Fermi
//! projections.
//!
//! The objects of study are operators `P_L = 1_{Λ_L} 1_{(-∞,E)}(H) 1_{Λ_L}`:
//! a Fermi projection of a Schrödinger operator `H = -Δ + V`, compressed to a
//! scaled spatial domain `Λ_L = L·Λ`. Traces of the form `tr h(P_L)`, with
//! `h` an entropy-like test function vanishing at 0, obey an enhanced area
//! law
//!
//! ```text
//! tr h(P_L) = N₀(E) h(1) |Λ| L^d  +  Σ₀(E) I(h) |∂Λ| L^{d-1} ln L  +  o(L^{d-1} ln L),
//! ```
//!
//! where `N₀` is the integrated density of states of the free Laplacian,
//! `Σ₀` a boundary coefficient, and `I(h)` the Widom functional of `h`.
//! The leading two coefficients are insensitive to a compactly supported
//! potential `V`; the crate provides the machinery to check that stability
//! numerically:
//!
//! * [`model`] — domains, potentials, and validated model configurations;
//! * [`testfn`] — entropy-like test functions and membership in the
//!   admissible classes `ℍ_d`;
//! * [`widom`] — the coefficients `N₀`, `Σ₀` and the Widom functional `I(h)`;
//! * [`lattice`] — finite-difference engine: Dirichlet boxes, Fermi
//!   projections, truncated spectra, integrated density of states;
//! * [`continuum`] — continuum engine: sine/Bessel kernels, 1-d scattering
//!   states, perturbed kernels and Nyström discretization;
//! * [`schatten`] — Schatten–von Neumann (quasi-)norm diagnostics for the
//!   off-diagonal blocks `Q_L` and the difference `P_L - P_{L,0}`;
//! * [`asymptotics`] — scale sweeps, least-squares coefficient extraction,
//!   and stability verdicts;
//! * [`cache`] — a content-addressed store for lattice eigendecompositions.

pub mod asymptotics;
pub mod cache;
pub mod continuum;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod schatten;
pub mod testfn;
pub mod widom;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
