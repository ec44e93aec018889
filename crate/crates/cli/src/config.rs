//! Shared configuration schemas for the CLI commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pragma_core::dissimilarity::DissimilaritySpec;
use pragma_core::family::{ParametricFamily, ReplicatedFamily};
use pragma_core::grid::{GridGeometry, ParameterGrid};
use pragma_core::pragmatic::{ParamMap, PragmaticSpec};
use pragma_core::PragmaError;

use crate::CliError;

/// A predictive experiment: a family plus an iid replication count.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: ParametricFamily,
    #[serde(default = "default_replication")]
    pub replication: u32,
}

fn default_replication() -> u32 {
    1
}

impl ExperimentConfig {
    pub fn replicated(&self) -> Result<ReplicatedFamily, PragmaError> {
        self.family.replicate(self.replication)
    }
}

/// A hypothesis set: one point, a grid geometry, or explicit points.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisConfig {
    Singleton(Vec<f64>),
    Grid(GridGeometry),
    Points(Vec<Vec<f64>>),
}

impl HypothesisConfig {
    pub fn build(&self) -> Result<ParameterGrid, PragmaError> {
        match self {
            HypothesisConfig::Singleton(theta) => ParameterGrid::from_points(vec![theta.clone()]),
            HypothesisConfig::Grid(geometry) => ParameterGrid::new(geometry.clone()),
            HypothesisConfig::Points(points) => ParameterGrid::from_points(points.clone()),
        }
    }
}

/// Configuration of the `region` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub dissimilarity: DissimilaritySpec,
    pub epsilon: f64,
    pub hypothesis: HypothesisConfig,
    pub grid: GridGeometry,
}

impl RegionConfig {
    pub fn pragmatic_spec(&self) -> Result<PragmaticSpec, PragmaError> {
        let family = self.experiment.replicated()?;
        let dissim = self.dissimilarity.clone().resolved_for(self.experiment.family());
        PragmaticSpec::new(family, dissim, self.epsilon)
    }
}

impl ExperimentConfig {
    pub fn family(&self) -> &ParametricFamily {
        &self.family
    }
}

/// Configuration of the `convergence` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub family: ParametricFamily,
    pub dissimilarity: DissimilaritySpec,
    pub epsilon: f64,
    pub hypothesis: HypothesisConfig,
    pub grid: GridGeometry,
    pub m_list: Vec<u32>,
}

/// Configuration of the `invariance` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub dissimilarity: DissimilaritySpec,
    pub epsilon: f64,
    pub hypothesis: HypothesisConfig,
    pub grid: GridGeometry,
    pub map: ParamMap,
}

/// Observed data for the `test` command: either a raw outcome list or a
/// single trinomial count vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    #[serde(default)]
    pub observations: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub counts: Option<[u64; 3]>,
}

impl DataFile {
    pub fn observations(&self) -> Result<Vec<Vec<f64>>, CliError> {
        match (&self.observations, &self.counts) {
            (Some(obs), None) => Ok(obs.clone()),
            (None, Some(counts)) => Ok(vec![counts.iter().map(|c| *c as f64).collect()]),
            _ => Err(CliError::config(
                "data file must contain exactly one of `observations` or `counts`",
            )),
        }
    }
}

/// Configuration of the `test` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub observation_family: ParametricFamily,
    #[serde(default)]
    pub prior: pragma_core::agnostic::PriorSpec,
    #[serde(default = "default_hpd_level")]
    pub hpd_level: f64,
    pub grid: GridGeometry,
    pub pragmatic: RegionConfig,
}

fn default_hpd_level() -> f64 {
    0.95
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
}
