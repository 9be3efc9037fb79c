//! Run configuration: a sectioned key/value document (TOML syntax) with
//! documented defaults for every key; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimConfig;
use crate::voxels::SegmentAxis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub tr_s: f64,
    pub microtime_bins: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            tr_s: 2.0,
            microtime_bins: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectConfig {
    pub t_threshold: f64,
    pub gain_threshold_pct: f64,
    pub segment_axis: SegmentAxis,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            t_threshold: 4.0,
            gain_threshold_pct: 8.0,
            segment_axis: SegmentAxis::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub n_draws: u64,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            n_draws: 1_000_000,
            seed: 42,
        }
    }
}

/// Full pipeline configuration; every section and key is optional and
/// falls back to its documented default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub design: DesignConfig,
    pub fit: FitConfig,
    pub select: SelectConfig,
    pub stats: StatsConfig,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    /// Override both random seeds (the `--seed` flag).
    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.stats.seed = seed;
        self.sim.seed = seed;
        self
    }
}
