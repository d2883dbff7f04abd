//! Run configuration: strict JSON, no defaults for `s`, `q` or `R`.

use fraclap::domain::{BoundaryCondition, DomainSpec};
use fraclap::solver::{GridSpec, Init, SolveConfig, SweepOptions};
use fraclap::tiling::TilingSpec;
use fraclap::Error;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Shape and dilation `R` (the `scale` field).
    pub domain: DomainSpec,
    pub bc: BoundaryCondition,
    pub grid: GridSpec,
    pub solve: SolveConfig,
    /// Seeds every random initial guess; overridden by `--seed`.
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub tiling: Option<TilingSpec>,
    #[serde(default)]
    pub stverify: Option<StVerifySection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub scales: Vec<f64>,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl SweepSection {
    pub fn options(&self) -> SweepOptions {
        SweepOptions { warm_start: self.warm_start, epsilon: self.epsilon }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StVerifySection {
    /// Orders checked; the solve order when empty.
    #[serde(default)]
    pub orders: Vec<f64>,
    /// Random fields per order.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Geometric `t` nodes.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl Default for StVerifySection {
    fn default() -> Self {
        StVerifySection { orders: Vec::new(), samples: default_samples(), nodes: default_nodes() }
    }
}

/// File names relative to `--out`; each command has its own defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub field: Option<String>,
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub image: Option<String>,
    /// Mark the density maxima on rendered images.
    #[serde(default)]
    pub overlay: bool,
}

fn default_epsilon() -> f64 {
    fraclap::diagnostics::DEFAULT_EPSILON
}
fn default_samples() -> usize {
    3
}
fn default_nodes() -> usize {
    fraclap::stx::DEFAULT_NODES
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.domain.validate()?;
        self.bc.validate()?;
        self.solve.validate()?;
        if let Some(t) = &self.tiling {
            t.validate()?;
        }
        if let Some(s) = &self.sweep {
            if s.scales.is_empty() {
                return Err(Error::Validation("sweep.scales is empty".into()));
            }
        }
        Ok(())
    }

    /// Writes `seed` into every random start; extra starts get `seed + k`.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        let starts = std::iter::once(&mut self.solve.init).chain(self.solve.extra_starts.iter_mut());
        for (k, init) in starts.enumerate() {
            if let Init::ConstantPlusNoise { seed: s, .. } = init {
                *s = seed.wrapping_add(k as u64);
            }
        }
    }
}
