//! Geometry and physics configuration: scaled domains `Λ_L = L·Λ`,
//! compactly supported potentials, and the validated model description the
//! engines consume.

use serde::{Deserialize, Serialize};

use crate::widom::N0Convention;
use crate::{CoreError, Result};

/// Base shapes for `Λ`. Intervals live in d = 1, squares and disks in d = 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Interval { left: f64, right: f64 },
    Square { half_width: f64 },
    Disk { radius: f64 },
}

/// A base shape together with a scale factor `L ≥ 1`; `Λ_L = L·Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    shape: Shape,
    scale: f64,
}

impl Domain {
    pub fn interval(left: f64, right: f64) -> Result<Domain> {
        if !(left < right) || !left.is_finite() || !right.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "interval needs left < right, got [{left}, {right}]"
            )));
        }
        Ok(Domain {
            shape: Shape::Interval { left, right },
            scale: 1.0,
        })
    }

    pub fn square(half_width: f64) -> Result<Domain> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "square half-width must be positive, got {half_width}"
            )));
        }
        Ok(Domain {
            shape: Shape::Square { half_width },
            scale: 1.0,
        })
    }

    pub fn disk(radius: f64) -> Result<Domain> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Domain {
            shape: Shape::Disk { radius },
            scale: 1.0,
        })
    }

    pub fn dimension(&self) -> u32 {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `L·Λ` for `L ≥ 1`; scales compose multiplicatively.
    pub fn scaled(&self, l: f64) -> Result<Domain> {
        if !(l >= 1.0) || !l.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "scale factor must be ≥ 1, got {l}"
            )));
        }
        Ok(Domain {
            shape: self.shape,
            scale: self.scale * l,
        })
    }

    /// Lebesgue volume of `Λ_L` (length in d = 1, area in d = 2).
    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Interval { left, right } => (right - left) * self.scale,
            Shape::Square { half_width } => (2.0 * half_width * self.scale).powi(2),
            Shape::Disk { radius } => std::f64::consts::PI * (radius * self.scale).powi(2),
        }
    }

    /// Surface measure of `∂Λ_L`: endpoint count 2 in d = 1, perimeter in d = 2.
    pub fn surface(&self) -> f64 {
        match self.shape {
            Shape::Interval { .. } => 2.0,
            Shape::Square { half_width } => 8.0 * half_width * self.scale,
            Shape::Disk { radius } => 2.0 * std::f64::consts::PI * radius * self.scale,
        }
    }

    /// Sup-norm radius of `Λ_L`: the smallest `R` with `Λ_L ⊆ [-R, R]^d`.
    pub fn extent(&self) -> f64 {
        let base = match self.shape {
            Shape::Interval { left, right } => left.abs().max(right.abs()),
            Shape::Square { half_width } => half_width,
            Shape::Disk { radius } => radius,
        };
        base * self.scale
    }

    /// Point membership, boundary inclusive.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self.shape {
            Shape::Interval { left, right } => {
                x[0] >= left * self.scale && x[0] <= right * self.scale
            }
            Shape::Square { half_width } => {
                let hw = half_width * self.scale;
                x[0].abs() <= hw && x[1].abs() <= hw
            }
            Shape::Disk { radius } => {
                let r = radius * self.scale;
                x[0] * x[0] + x[1] * x[1] <= r * r
            }
        }
    }
}

/// One square-well component of a composite potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub half_width: f64,
}

/// Compactly supported potential kinds. Sharp edges evaluate to the well
/// value exactly on the jump (closed support).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    /// `v₀` on the sup-norm ball of radius `half_width`, 0 outside.
    /// Negative `v₀` is a well, positive a barrier.
    SquareWell { amplitude: f64, half_width: f64 },
    /// `v₀ exp(1 - 1/(1-(r/a)²))` for `r = |x|₂ < a`; C^∞ with compact support.
    Bump { amplitude: f64, radius: f64 },
    /// Finite sum of square wells with centers.
    WellSum { wells: Vec<Well> },
}

/// A compactly supported potential in dimension `d ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    dimension: u32,
    kind: PotentialKind,
}

impl Potential {
    pub fn zero(dimension: u32) -> Result<Potential> {
        check_dim(dimension)?;
        Ok(Potential {
            dimension,
            kind: PotentialKind::Zero,
        })
    }

    pub fn square_well(dimension: u32, amplitude: f64, half_width: f64) -> Result<Potential> {
        check_dim(dimension)?;
        if !(half_width > 0.0) || !amplitude.is_finite() || !half_width.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "square well needs finite amplitude and half_width > 0, got ({amplitude}, {half_width})"
            )));
        }
        Ok(Potential {
            dimension,
            kind: PotentialKind::SquareWell {
                amplitude,
                half_width,
            },
        })
    }

    pub fn bump(dimension: u32, amplitude: f64, radius: f64) -> Result<Potential> {
        check_dim(dimension)?;
        if !(radius > 0.0) || !amplitude.is_finite() || !radius.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "bump needs finite amplitude and radius > 0, got ({amplitude}, {radius})"
            )));
        }
        Ok(Potential {
            dimension,
            kind: PotentialKind::Bump { amplitude, radius },
        })
    }

    pub fn well_sum(dimension: u32, wells: Vec<Well>) -> Result<Potential> {
        check_dim(dimension)?;
        if wells.is_empty() {
            return Err(CoreError::InvalidParam("well sum needs ≥ 1 well".into()));
        }
        for w in &wells {
            if w.center.len() != dimension as usize {
                return Err(CoreError::InvalidParam(format!(
                    "well center {:?} has wrong dimension, expected {dimension}",
                    w.center
                )));
            }
            if !(w.half_width > 0.0) || !w.amplitude.is_finite() {
                return Err(CoreError::InvalidParam(
                    "well needs finite amplitude and half_width > 0".into(),
                ));
            }
        }
        Ok(Potential {
            dimension,
            kind: PotentialKind::WellSum { wells },
        })
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// The zero potential in the same dimension (the `V = 0` reference).
    pub fn reference(&self) -> Potential {
        Potential {
            dimension: self.dimension,
            kind: PotentialKind::Zero,
        }
    }

    /// `V(x)`; `x.len()` must equal the dimension.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension as usize);
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareWell {
                amplitude,
                half_width,
            } => {
                let inside = x.iter().all(|&c| c.abs() <= *half_width);
                if inside {
                    *amplitude
                } else {
                    0.0
                }
            }
            PotentialKind::Bump { amplitude, radius } => {
                let r2: f64 = x.iter().map(|c| c * c).sum::<f64>() / (radius * radius);
                if r2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            PotentialKind::WellSum { wells } => wells
                .iter()
                .map(|w| {
                    let inside = x
                        .iter()
                        .zip(&w.center)
                        .all(|(&c, &o)| (c - o).abs() <= w.half_width);
                    if inside {
                        w.amplitude
                    } else {
                        0.0
                    }
                })
                .sum(),
        }
    }

    /// Sup-norm radius of the support: `V(x) = 0` for `|x|_∞ >` this.
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareWell { half_width, .. } => *half_width,
            PotentialKind::Bump { radius, .. } => *radius,
            PotentialKind::WellSum { wells } => wells
                .iter()
                .map(|w| {
                    w.half_width
                        + w.center
                            .iter()
                            .fold(0.0f64, |m, &c| m.max(c.abs()))
                })
                .fold(0.0, f64::max),
        }
    }

    /// Upper bound on `sup |V|` (exact for single components).
    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareWell { amplitude, .. } => amplitude.abs(),
            PotentialKind::Bump { amplitude, .. } => amplitude.abs(),
            PotentialKind::WellSum { wells } => wells.iter().map(|w| w.amplitude.abs()).sum(),
        }
    }
}

fn check_dim(d: u32) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(CoreError::InvalidParam(format!(
            "dimension must be 1 or 2, got {d}"
        )))
    }
}

/// Which spectral engine realizes the Fermi projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Lattice,
    ContinuumKernel,
}

/// Finite-difference discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeParams {
    /// Grid spacing `h`; the guard `√E·h ≤ 0.15` keeps lattice dispersion
    /// error under control.
    pub spacing: f64,
    /// Dirichlet box half-width `R`; `None` derives it per scale from the
    /// margin rule.
    pub box_halfwidth: Option<f64>,
    /// Replaces the margin (diagnostics only; the default margin rule is
    /// what coefficient extractions should use).
    pub margin_override: Option<f64>,
    /// Memory guard: maximum site count for operators that materialize
    /// projections.
    pub site_cap: usize,
}

impl Default for LatticeParams {
    fn default() -> Self {
        LatticeParams {
            spacing: 0.05,
            box_halfwidth: None,
            margin_override: None,
            site_cap: 13_000,
        }
    }
}

/// Continuum-kernel (Nyström) discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuumParams {
    /// Quadrature nodes per Fermi wavelength `2π/√E` (≥ 6).
    pub nodes_per_wavelength: f64,
    /// Gauss–Legendre nodes per spatial panel.
    pub panel_nodes: usize,
    /// Relative accuracy target for the momentum quadrature of perturbed
    /// kernels (validated by node doubling).
    pub k_quad_rel_tol: f64,
}

impl Default for ContinuumParams {
    fn default() -> Self {
        ContinuumParams {
            nodes_per_wavelength: 8.0,
            panel_nodes: 16,
            k_quad_rel_tol: 1e-7,
        }
    }
}

/// Relative guard around the Fermi level: no eigenvalue may sit within
/// `FERMI_DEGENERACY_GUARD · E` of `E`.
pub const FERMI_DEGENERACY_GUARD: f64 = 1e-9;

/// Dispersion guard for the lattice engine: `√E · h` must stay below this.
pub const DISPERSION_GUARD: f64 = 0.15;

/// Eigenvalues of truncated projections may stray this far outside `[0,1]`
/// before the run is declared broken.
pub const SPECTRUM_CLIP_TOL: f64 = 1e-6;

/// A validated model: energy, geometry, potential, and engine selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub energy: f64,
    pub domain: Domain,
    pub potential: Potential,
    pub engine: Engine,
    pub convention: N0Convention,
    #[serde(default)]
    pub lattice: LatticeParams,
    #[serde(default)]
    pub continuum: ContinuumParams,
}

impl ModelConfig {
    pub fn dimension(&self) -> u32 {
        self.domain.dimension()
    }

    /// Fermi momentum `k_F = √E`.
    pub fn k_fermi(&self) -> f64 {
        self.energy.sqrt()
    }

    /// Margin between the scaled domain and the Dirichlet box:
    /// `max(8/√E, 2·(support radius of V), 5)`, unless overridden.
    pub fn margin(&self) -> f64 {
        if let Some(m) = self.lattice.margin_override {
            return m;
        }
        (8.0 / self.energy.sqrt())
            .max(2.0 * self.potential.support_radius())
            .max(5.0)
    }

    /// Box half-width required to host `Λ_L`: `L·extent(Λ) + margin`.
    pub fn required_box(&self, scale: f64) -> f64 {
        scale * self.domain.extent() + self.margin()
    }

    /// Validate the static parts of the configuration (scale-dependent box
    /// checks happen when an operator is built).
    pub fn validate(&self) -> Result<()> {
        if !(self.energy > 0.0) || !self.energy.is_finite() {
            return Err(CoreError::InvalidParam(format!(
                "energy must be positive and finite, got {}",
                self.energy
            )));
        }
        if self.potential.dimension() != self.domain.dimension() {
            return Err(CoreError::InvalidParam(format!(
                "potential dimension {} ≠ domain dimension {}",
                self.potential.dimension(),
                self.domain.dimension()
            )));
        }
        match self.engine {
            Engine::Lattice => {
                let h = self.lattice.spacing;
                if !(h > 0.0) || !h.is_finite() {
                    return Err(CoreError::InvalidParam(format!(
                        "lattice spacing must be positive, got {h}"
                    )));
                }
                if self.k_fermi() * h > DISPERSION_GUARD {
                    return Err(CoreError::InvalidParam(format!(
                        "dispersion guard violated: √E·h = {:.4} > {DISPERSION_GUARD}; \
                         reduce the spacing",
                        self.k_fermi() * h
                    )));
                }
            }
            Engine::ContinuumKernel => {
                if self.continuum.nodes_per_wavelength < 6.0 {
                    return Err(CoreError::InvalidParam(format!(
                        "Nyström needs ≥ 6 nodes per Fermi wavelength, got {}",
                        self.continuum.nodes_per_wavelength
                    )));
                }
                if self.continuum.panel_nodes < 4 || self.continuum.panel_nodes > 64 {
                    return Err(CoreError::InvalidParam(
                        "panel_nodes must be in [4, 64]".into(),
                    ));
                }
                if self.dimension() == 2 && !self.potential.is_zero() {
                    return Err(CoreError::InvalidParam(
                        "continuum engine supports potentials in d = 1 only".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
