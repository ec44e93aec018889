//! `pragma invariance`: symmetric-difference report between a pragmatic
//! region and its image under a bijective reparametrization.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use pragma_core::grid::ParameterGrid;
use pragma_core::pragmatic::check_invariance;

use crate::config::{load_json, InvarianceConfig};
use crate::sidecar::RunProduct;
use crate::CliError;

#[derive(Args)]
pub struct InvarianceArgs {
    /// JSON configuration
    #[arg(long)]
    config: PathBuf,
    /// Output report JSON path
    #[arg(long)]
    out: PathBuf,
    /// Re-validate an earlier run's sidecar instead of writing
    #[arg(long)]
    check: bool,
}

pub fn run(args: InvarianceArgs) -> Result<(), CliError> {
    let config: InvarianceConfig = load_json(&args.config)?;
    let spec = pragma_core::pragmatic::PragmaticSpec::new(
        config.experiment.replicated()?,
        config
            .dissimilarity
            .clone()
            .resolved_for(config.experiment.family()),
        config.epsilon,
    )?;
    let hypothesis = config.hypothesis.build()?;
    let grid = ParameterGrid::new(config.grid.clone())?.into_shared();
    let report = check_invariance(&spec, &hypothesis, &config.map, &grid)?;

    let mismatched_points: Vec<&[f64]> = report
        .mismatched_indices
        .iter()
        .map(|i| grid.points()[*i].as_slice())
        .collect();
    let outcome = json!({
        "grid_size": report.grid_size,
        "symmetric_difference": report.symmetric_difference,
        "invariant": report.is_invariant(),
        "mismatched_indices": report.mismatched_indices,
        "mismatched_points": mismatched_points,
    });
    let bytes = (serde_json::to_string_pretty(&outcome).expect("serializes") + "\n").into_bytes();
    let summary = format!(
        "symmetric difference {} over {} grid points",
        report.symmetric_difference, report.grid_size
    );
    let product = RunProduct {
        command: "invariance",
        resolved_config: json!(&config),
        outputs: vec![(args.out.clone(), bytes)],
        summary,
    };
    product.finish(args.check)
}
