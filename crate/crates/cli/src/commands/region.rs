//! `pragma region`: build a singleton or composite pragmatic region and
//! export the labeled grid as CSV.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use pragma_core::grid::ParameterGrid;
use pragma_core::pragmatic::composite_region;

use crate::config::{load_json, RegionConfig};
use crate::sidecar::RunProduct;
use crate::CliError;

#[derive(Args)]
pub struct RegionArgs {
    /// JSON configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured epsilon
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Also write the JSON mirror (geometry header plus 0/1 mask)
    #[arg(long)]
    json: Option<PathBuf>,
    /// Re-validate an earlier run's sidecar instead of writing
    #[arg(long)]
    check: bool,
}

pub fn run(args: RegionArgs) -> Result<(), CliError> {
    let mut config: RegionConfig = load_json(&args.config)?;
    if let Some(eps) = args.epsilon {
        config.epsilon = eps;
    }
    let spec = config.pragmatic_spec()?;
    let hypothesis = config.hypothesis.build()?;
    let grid = ParameterGrid::new(config.grid.clone())?.into_shared();
    let region = composite_region(&spec, &hypothesis, &grid)?;

    let mut csv = Vec::new();
    region
        .write_csv(&mut csv)
        .map_err(|e| CliError::config(format!("cannot serialize region: {e}")))?;
    let mut outputs = vec![(args.out.clone(), csv)];
    if let Some(json_path) = &args.json {
        let doc = serde_json::to_string_pretty(&region.to_json()).expect("serializes") + "\n";
        outputs.push((json_path.clone(), doc.into_bytes()));
    }
    let summary = format!(
        "{} of {} grid points inside the pragmatic region (epsilon {})",
        region.member_count(),
        grid.len(),
        config.epsilon
    );
    let product = RunProduct {
        command: "region",
        resolved_config: json!(&config),
        outputs,
        summary,
    };
    product.finish(args.check)
}
