//! `pragma dissim`: evaluate one dissimilarity value or a grid sweep.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use pragma_core::dissimilarity::{evaluate, DissimKind, DissimilaritySpec, PairEvaluator};
use pragma_core::family::ParametricFamily;
use pragma_core::grid::{GridGeometry, ParameterGrid};

use crate::config::{load_json, ExperimentConfig};
use crate::sidecar::RunProduct;
use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissimConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub dissimilarity: DissimilaritySpec,
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
    /// When set, evaluate against every point of this grid instead of a
    /// single alternative.
    #[serde(default)]
    pub sweep_grid: Option<GridGeometry>,
}

#[derive(Args)]
pub struct DissimArgs {
    /// JSON configuration (general families and sweeps)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shorthand family: `gauss1d` (with --sigma0)
    #[arg(long)]
    family: Option<String>,
    /// Known standard deviation for --family gauss1d
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,
    /// KL, BP or CD
    #[arg(long)]
    kind: Option<String>,
    /// Reference parameter (1-D shorthand)
    #[arg(long)]
    theta0: Option<f64>,
    /// Alternative parameter (1-D shorthand)
    #[arg(long)]
    thetastar: Option<f64>,
    /// Write sweep rows (or the single value) to this CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-validate an earlier run's sidecar instead of writing
    #[arg(long)]
    check: bool,
}

fn parse_kind(s: &str) -> Result<DissimKind, CliError> {
    match s.to_ascii_uppercase().as_str() {
        "KL" => Ok(DissimKind::Kl),
        "BP" => Ok(DissimKind::Bp),
        "CD" => Ok(DissimKind::Cd),
        other => Err(CliError::config(format!("unknown dissimilarity kind `{other}`"))),
    }
}

fn config_from_flags(args: &DissimArgs) -> Result<DissimConfig, CliError> {
    let family = match args.family.as_deref() {
        Some("gauss1d") => {
            // the negated form also rejects NaN
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(args.sigma0 > 0.0) {
                return Err(CliError::config("--sigma0 must be positive"));
            }
            ParametricFamily::gaussian_1d(args.sigma0)
        }
        Some(other) => {
            return Err(CliError::config(format!(
                "unknown --family `{other}` (flag shorthand supports gauss1d; use --config for others)"
            )))
        }
        None => return Err(CliError::config("provide --config or --family")),
    };
    let kind = parse_kind(
        args.kind
            .as_deref()
            .ok_or_else(|| CliError::config("--kind is required with --family"))?,
    )?;
    let theta0 = args
        .theta0
        .ok_or_else(|| CliError::config("--theta0 is required with --family"))?;
    let theta_star = args
        .thetastar
        .ok_or_else(|| CliError::config("--thetastar is required with --family"))?;
    Ok(DissimConfig {
        experiment: ExperimentConfig { family, replication: 1 },
        dissimilarity: DissimilaritySpec::new(kind),
        theta0: vec![theta0],
        theta_star: Some(vec![theta_star]),
        sweep_grid: None,
    })
}

pub fn run(args: DissimArgs) -> Result<(), CliError> {
    let config: DissimConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => config_from_flags(&args)?,
    };
    let family = config.experiment.replicated()?;
    let dissim = config
        .dissimilarity
        .clone()
        .resolved_for(config.experiment.family());

    match (&config.theta_star, &config.sweep_grid) {
        (Some(theta_star), None) => {
            let est = evaluate(&dissim, &family, &config.theta0, theta_star)?;
            let mut line = format!("{}", est.value);
            if let Some(se) = est.std_err {
                line.push_str(&format!(" (std err {se})"));
            }
            match &args.out {
                None => {
                    println!("{line}");
                    Ok(())
                }
                Some(out) => {
                    let mut csv = String::from("theta_star,value,std_err\n");
                    csv.push_str(&format!(
                        "{:?},{},{}\n",
                        theta_star,
                        est.value,
                        est.std_err.map(|s| s.to_string()).unwrap_or_default()
                    ));
                    let product = RunProduct {
                        command: "dissim",
                        resolved_config: json!(&config),
                        outputs: vec![(out.clone(), csv.into_bytes())],
                        summary: line,
                    };
                    product.finish(args.check)
                }
            }
        }
        (None, Some(geometry)) => {
            let out = args
                .out
                .clone()
                .ok_or_else(|| CliError::config("sweep mode requires --out"))?;
            let grid = ParameterGrid::new(geometry.clone())?;
            let eval = PairEvaluator::new(&dissim, &family)?;
            let reference = eval.prepare(&config.theta0)?;
            let monte_carlo = matches!(dissim.backend, pragma_core::dissimilarity::Backend::MonteCarlo { .. });
            let mut csv = String::new();
            for i in 1..=grid.dim() {
                csv.push_str(&format!("theta_{i},"));
            }
            csv.push_str(if monte_carlo { "value,std_err\n" } else { "value\n" });
            for point in grid.points() {
                let candidate = eval.prepare(point)?;
                let est = eval.eval_full(&reference, &candidate)?;
                for x in point {
                    csv.push_str(&format!("{x},"));
                }
                match (monte_carlo, est.std_err) {
                    (true, Some(se)) => csv.push_str(&format!("{},{se}\n", est.value)),
                    (true, None) => csv.push_str(&format!("{},\n", est.value)),
                    (false, _) => csv.push_str(&format!("{}\n", est.value)),
                }
            }
            let summary = format!("wrote {} sweep rows to {}", grid.len(), out.display());
            let product = RunProduct {
                command: "dissim",
                resolved_config: json!(&config),
                outputs: vec![(out, csv.into_bytes())],
                summary,
            };
            product.finish(args.check)
        }
        (Some(_), Some(_)) => Err(CliError::config(
            "set exactly one of `theta_star` or `sweep_grid`",
        )),
        (None, None) => Err(CliError::config(
            "set one of `theta_star` or `sweep_grid`",
        )),
    }
}
