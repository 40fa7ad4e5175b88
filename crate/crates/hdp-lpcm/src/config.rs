//! Run configuration: one TOML file whose values command-line flags
//! override. The resolved configuration is echoed into every manifest.

use std::path::{Path, PathBuf};

use hdp_lpcm_core::sim::SimSpec;
use hdp_lpcm_core::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::chain_io::ChainFormat;
use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "HDP_LPCM_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; chain `k` (zero-based) uses `seed + k`. Falls back to
    /// `sampler.seed` when absent.
    pub seed: Option<u64>,
    pub chains: usize,
    /// Where a run writes. This and `quiet` are left out of manifests so
    /// that identical runs produce identical bundles.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub quiet: bool,
    pub sampler: SamplerConfig,
    pub simulation: SimulationConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
    pub evaluate: EvaluateConfig,
    pub diagnose: DiagnoseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            chains: 1,
            out: None,
            quiet: false,
            sampler: SamplerConfig::default(),
            simulation: SimulationConfig::default(),
            data: DataConfig::default(),
            output: OutputConfig::default(),
            evaluate: EvaluateConfig::default(),
            diagnose: DiagnoseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// `homogeneous` or `inhomogeneous`.
    pub preset: Option<String>,
    /// A complete custom specification; its `seed` is replaced by the run
    /// seed when one is given.
    pub spec: Option<SimSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Edge list, or a simulation bundle directory.
    pub edges: Option<PathBuf>,
    pub n_actors: Option<usize>,
    pub n_times: Option<usize>,
    /// Consecutive time steps merged into one slice.
    pub window: usize,
    /// Actors whose degree never reaches this value are dropped.
    pub min_degree: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { edges: None, n_actors: None, n_times: None, window: 1, min_degree: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub chain_format: ChainFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Simulation bundle or `t,actor,group` table holding the true labels.
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub max_lag: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { max_lag: 100 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(self.sampler.seed)
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Usage("an output directory is required (--out)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Usage("chains must be at least 1".into()));
        }
        if self.data.window == 0 {
            return Err(Error::Usage("data.window must be at least 1".into()));
        }
        if self.diagnose.max_lag == 0 {
            return Err(Error::Usage("diagnose.max_lag must be at least 1".into()));
        }
        self.sampler.validate().map_err(|e| Error::Usage(format!("sampler: {e}")))?;
        if let Some(spec) = &self.simulation.spec {
            spec.validate().map_err(|e| Error::Usage(format!("simulation.spec: {e}")))?;
        }
        Ok(())
    }
}

/// Worker threads: the environment override if set, otherwise the
/// available parallelism, never more than `jobs`.
pub fn worker_count(jobs: usize) -> Result<usize> {
    let requested = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::Usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |k| k.get()),
    };
    Ok(requested.min(jobs).max(1))
}
