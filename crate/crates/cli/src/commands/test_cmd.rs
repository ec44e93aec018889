//! `pragma test`: posterior, HPD region, and the three-valued decision for
//! observed data against a pragmatic hypothesis.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use pragma_core::agnostic::{agnostic_test, hpd_region, posterior_grid};
use pragma_core::grid::ParameterGrid;
use pragma_core::pragmatic::composite_region;

use crate::config::{load_json, DataFile, TestConfig};
use crate::sidecar::RunProduct;
use crate::CliError;

#[derive(Args)]
pub struct TestArgs {
    /// JSON configuration
    #[arg(long)]
    config: PathBuf,
    /// JSON data file: `{"observations": [[..]]}` or `{"counts": [a,b,c]}`
    #[arg(long)]
    data: PathBuf,
    /// Output decision JSON path
    #[arg(long)]
    out: PathBuf,
    /// Re-validate an earlier run's sidecar instead of writing
    #[arg(long)]
    check: bool,
}

pub fn run(args: TestArgs) -> Result<(), CliError> {
    let config: TestConfig = load_json(&args.config)?;
    let data: DataFile = load_json(&args.data)?;
    let observations = data.observations()?;

    let grid = ParameterGrid::new(config.grid.clone())?.into_shared();
    let posterior = posterior_grid(&config.observation_family, &config.prior, &observations, &grid)?;
    let estimate = hpd_region(&posterior, config.hpd_level)?;

    let spec = config.pragmatic.pragmatic_spec()?;
    let hypothesis_grid = config.pragmatic.hypothesis.build()?;
    let eval_grid = ParameterGrid::new(config.pragmatic.grid.clone())?.into_shared();
    if eval_grid.points() != grid.points() {
        return Err(CliError::config(
            "the posterior grid and the pragmatic-region grid must coincide",
        ));
    }
    let hypothesis = composite_region(&spec, &hypothesis_grid, &grid)?;

    let decision = agnostic_test(&estimate, &hypothesis)?;
    let outcome = json!({
        "decision": decision,
        "decision_value": decision.value(),
        "hpd_points": estimate.region.member_count(),
        "hpd_mass": estimate.posterior_mass,
        "hpd_in_hypothesis": estimate.region.intersection_count(&hypothesis)?,
        "hypothesis_points": hypothesis.member_count(),
        "grid_points": grid.len(),
    });
    let bytes = (serde_json::to_string_pretty(&outcome).expect("serializes") + "\n").into_bytes();
    let product = RunProduct {
        command: "test",
        resolved_config: json!({"config": &config, "data": &data}),
        outputs: vec![(args.out.clone(), bytes)],
        summary: format!("decision: {decision}"),
    };
    product.finish(args.check)
}
