//! `pragma convergence`: pragmatic-region member counts over a growing
//! replication ladder.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use pragma_core::grid::ParameterGrid;
use pragma_core::pragmatic::{shrinkage_sequence, PragmaticSpec};

use crate::config::{load_json, ConvergenceConfig};
use crate::sidecar::RunProduct;
use crate::CliError;

#[derive(Args)]
pub struct ConvergenceArgs {
    /// JSON configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured epsilon
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Re-validate an earlier run's sidecar instead of writing
    #[arg(long)]
    check: bool,
}

pub fn run(args: ConvergenceArgs) -> Result<(), CliError> {
    let mut config: ConvergenceConfig = load_json(&args.config)?;
    if let Some(eps) = args.epsilon {
        config.epsilon = eps;
    }
    let spec = PragmaticSpec::new(
        config.family.replicate(1)?,
        config.dissimilarity.clone().resolved_for(&config.family),
        config.epsilon,
    )?;
    let hypothesis = config.hypothesis.build()?;
    let grid = ParameterGrid::new(config.grid.clone())?.into_shared();
    let regions = shrinkage_sequence(&spec, &hypothesis, &grid, &config.m_list)?;

    let mut csv = String::from("m,member_count,member_fraction\n");
    for (m, region) in config.m_list.iter().zip(&regions) {
        csv.push_str(&format!(
            "{m},{},{}\n",
            region.member_count(),
            region.member_fraction()
        ));
    }
    let counts: Vec<usize> = regions.iter().map(|r| r.member_count()).collect();
    let summary = format!("member counts over m {:?}: {:?}", config.m_list, counts);
    let product = RunProduct {
        command: "convergence",
        resolved_config: json!(&config),
        outputs: vec![(args.out.clone(), csv.into_bytes())],
        summary,
    };
    product.finish(args.check)
}
