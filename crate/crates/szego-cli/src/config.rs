//! Experiment configuration: a plain-text TOML file (nested key-value, one
//! assignment per line) that is the reproducibility artifact for every run
//! and is echoed into every output JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use szego_core::asymptotics::{default_grid, geometric_grid, validate_grid};
use szego_core::cache::CacheStore;
use szego_core::model::ModelConfig;
use szego_core::testfn::{from_name, TestFunction};

use crate::error::{CliError, CliResult};

/// How the sweep scales are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// The dimension-standard range of `k_F·L`.
    Default,
    /// Geometric grid between explicit scale bounds.
    Geometric { min: f64, max: f64, points: usize },
    /// Explicit scales (still validated as geometric).
    Explicit { values: Vec<f64> },
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_threads() -> usize {
    1
}

/// One experiment: the model, the test functions by name, the sweep grid,
/// and the bookkeeping knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name used for every output file of this experiment.
    pub experiment: String,
    pub model: ModelConfig,
    /// Test-function names: `id`, `s:<n>`, `a:<n>`,
    /// `renyi:<alpha>:<bits|nats>`.
    pub test_functions: Vec<String>,
    pub grid: GridSpec,
    /// Exponents `s` for the `‖Q_L − Q_{L,0}‖_{2s}^{2s}` columns.
    #[serde(default)]
    pub s_list: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Eigendecomposition cache directory; `SZEGO_CACHE_DIR` overrides it.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl ExperimentConfig {
    /// Parse and validate a config file.
    pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// All invariants that don't need an engine: names resolvable, grid
    /// well-formed, exponents positive.
    pub fn validate(&self) -> CliResult<()> {
        if self.experiment.trim().is_empty() {
            return Err(CliError::config("experiment name must not be empty"));
        }
        if self.threads == 0 {
            return Err(CliError::config("threads must be ≥ 1"));
        }
        if self.test_functions.is_empty() {
            return Err(CliError::config("at least one test function is required"));
        }
        self.model.validate().map_err(CliError::from)?;
        self.resolve_test_functions()?;
        self.resolve_grid()?;
        for &s in &self.s_list {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CliError::config(format!(
                    "quasi-norm exponent must be positive and finite, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn resolve_test_functions(&self) -> CliResult<Vec<TestFunction>> {
        self.test_functions
            .iter()
            .map(|name| from_name(name).map_err(CliError::from))
            .collect()
    }

    pub fn resolve_grid(&self) -> CliResult<Vec<f64>> {
        let grid = match &self.grid {
            GridSpec::Default => default_grid(self.model.dimension(), self.model.energy)?,
            GridSpec::Geometric { min, max, points } => geometric_grid(*min, *max, *points)?,
            GridSpec::Explicit { values } => {
                validate_grid(values)?;
                values.clone()
            }
        };
        Ok(grid)
    }

    /// Open the eigendecomposition cache: the `SZEGO_CACHE_DIR`
    /// environment variable wins over the config path; neither means no
    /// cache.
    pub fn open_cache(&self) -> CliResult<Option<CacheStore>> {
        if let Some(store) = CacheStore::from_env() {
            return Ok(Some(store));
        }
        match &self.cache_dir {
            Some(dir) => {
                let store = CacheStore::open(dir.clone()).map_err(|e| {
                    CliError::config(format!("cache dir {}: {e}", dir.display()))
                })?;
                Ok(Some(store))
            }
            None => Ok(None),
        }
    }

    /// Canonical text form (used to echo the config and in tests for
    /// round-trip stability).
    pub fn emit(&self) -> CliResult<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::numerical(format!("config serialization: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use szego_core::model::{Domain, Engine, Potential};
    use szego_core::widom::N0Convention;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            experiment: "sample".into(),
            model: ModelConfig {
                energy: 4.0,
                domain: Domain::interval(-1.0, 1.0).unwrap(),
                potential: Potential::square_well(1, -5.0, 1.0).unwrap(),
                engine: Engine::ContinuumKernel,
                convention: N0Convention::Weyl,
                lattice: Default::default(),
                continuum: Default::default(),
            },
            test_functions: vec!["renyi:1:nats".into(), "s:1".into()],
            grid: GridSpec::Geometric {
                min: 12.5,
                max: 200.0,
                points: 12,
            },
            s_list: vec![0.6, 1.0],
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            threads: 1,
        }
    }

    #[test]
    fn config_round_trip_is_stable() {
        let cfg = sample();
        let text = cfg.emit().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // Emitting the reparsed config reproduces the exact bytes.
        assert_eq!(text, back.emit().unwrap());
    }

    #[test]
    fn validation_catches_unresolvable_names_and_bad_grids() {
        let mut cfg = sample();
        cfg.test_functions.push("renyi:oops:nats".into());
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("renyi:oops:nats"), "{err}");
        assert_eq!(err.exit_code(), 2);

        let mut cfg = sample();
        cfg.grid = GridSpec::Explicit {
            values: vec![10.0, 20.0],
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);

        let mut cfg = sample();
        cfg.threads = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = sample();
        cfg.s_list = vec![-0.5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = sample().emit().unwrap();
        text.push_str("\nmystery_knob = 3\n");
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn default_grid_spec_resolves_to_the_standard_range() {
        let mut cfg = sample();
        cfg.grid = GridSpec::Default;
        let grid = cfg.resolve_grid().unwrap();
        assert_eq!(grid.len(), 12);
        assert!((grid[0] - 12.5).abs() < 1e-12);
        assert!((grid[11] - 200.0).abs() < 1e-12);
    }
}
