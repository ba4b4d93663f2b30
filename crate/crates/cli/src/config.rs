//! Run configuration file: JSON, every key optional, unknown keys rejected.

use std::path::Path;

use amr_core::baseline::{default_median_grid, default_threshold_grid, BaselineConfig};
use amr_core::embeddings::MockWorldSpec;
use amr_core::losses::LossWeights;
use amr_core::metrics::{MAP_THRESHOLDS, R1_THRESHOLDS};
use amr_core::simulate::SimulationConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneGrid {
    pub thresholds: Vec<f64>,
    pub medians: Vec<usize>,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid {
            thresholds: default_threshold_grid(),
            medians: default_median_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub r1_thresholds: Vec<f64>,
    pub map_thresholds: Vec<f64>,
    pub frame_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            r1_thresholds: R1_THRESHOLDS.to_vec(),
            map_thresholds: MAP_THRESHOLDS.to_vec(),
            frame_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sets the seed of every section that has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `error`, `warn`, `info`, `debug` or `trace`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_level: Option<String>,
    pub simulate: SimulationConfig,
    pub baseline: BaselineConfig,
    pub tune: TuneGrid,
    pub mock: MockWorldSpec,
    pub loss: LossWeights,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Failure::Config(msg) => Failure::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(seed) = cfg.seed {
            cfg.simulate.seed = seed;
            cfg.mock.seed = seed;
        }
        if let Some(level) = &cfg.log_level {
            level
                .parse::<log::LevelFilter>()
                .map_err(|_| Failure::Config(format!("unknown log_level {level:?}")))?;
        }
        Ok(cfg)
    }
}
