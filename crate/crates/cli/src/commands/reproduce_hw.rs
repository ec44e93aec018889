//! `pragma reproduce-hw`: the bundled Hardy-Weinberg genotype case study.
//!
//! Runs the agnostic test for every group against the pragmatic
//! Hardy-Weinberg region of each configured dissimilarity and emits a
//! decision table. With `--strict`, exits 4 unless every row reproduces
//! its reference decision.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use pragma_core::agnostic::{run_hw_study, HwStudyConfig, HwStudyReport};

use crate::config::load_json;
use crate::sidecar::RunProduct;
use crate::CliError;

#[derive(Args)]
pub struct ReproduceHwArgs {
    /// JSON configuration (all fields optional; defaults follow the study)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the HPD level
    #[arg(long)]
    hpd_level: Option<f64>,
    /// Override the simplex resolution
    #[arg(long)]
    resolution: Option<u32>,
    /// Override the curve knot count
    #[arg(long)]
    knots: Option<usize>,
    /// Override the predictive trial count m
    #[arg(long)]
    replication: Option<u64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Exit 4 unless every reference decision is reproduced
    #[arg(long)]
    strict: bool,
    /// Re-validate an earlier run's sidecar instead of writing
    #[arg(long)]
    check: bool,
}

fn table_csv(report: &HwStudyReport) -> String {
    let mut csv = String::from("group,aa,ad,dd,hpd_points,hpd_mass");
    for (kind, eps) in report.kinds.iter().zip(&report.epsilons) {
        csv.push_str(&format!(",decision_{kind}_eps_{eps}"));
        csv.push_str(&format!(",hpd_in_hypothesis_{kind}"));
    }
    csv.push_str(",reference,matches\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}",
            row.group, row.counts[0], row.counts[1], row.counts[2], row.hpd_points, row.hpd_mass
        ));
        for r in &row.results {
            csv.push_str(&format!(",{},{}", r.decision, r.hpd_in_hypothesis));
        }
        match row.reference {
            Some(expect) => {
                let matched = row.results.iter().all(|r| r.decision == expect);
                csv.push_str(&format!(",{expect},{}", if matched { 1 } else { 0 }));
            }
            None => csv.push_str(",,"),
        }
        csv.push('\n');
    }
    csv
}

pub fn run(args: ReproduceHwArgs) -> Result<(), CliError> {
    let mut config: HwStudyConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => HwStudyConfig::default(),
    };
    if let Some(level) = args.hpd_level {
        config.hpd_level = level;
    }
    if let Some(res) = args.resolution {
        config.simplex_resolution = res;
    }
    if let Some(knots) = args.knots {
        config.curve_knots = knots;
    }
    if let Some(m) = args.replication {
        config.replication_m = m;
    }

    let report = run_hw_study(&config)?;
    let csv = table_csv(&report);
    let matches = report.reference_matches();
    let with_reference = report.rows.iter().filter(|r| r.reference.is_some()).count();
    let summary = format!(
        "{} groups tested; {}/{} reference decisions reproduced (kinds: {})",
        report.rows.len(),
        matches,
        with_reference,
        report
            .kinds
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("/")
    );
    let product = RunProduct {
        command: "reproduce-hw",
        resolved_config: json!(&config),
        outputs: vec![(args.out.clone(), csv.into_bytes())],
        summary,
    };
    product.finish(args.check)?;

    if args.strict && matches < with_reference {
        let mismatched: Vec<String> = report
            .rows
            .iter()
            .filter(|r| {
                r.reference
                    .map(|e| r.results.iter().any(|k| k.decision != e))
                    .unwrap_or(false)
            })
            .map(|r| {
                format!(
                    "group {} expected {} got [{}]",
                    r.group,
                    r.reference.expect("filtered"),
                    r.results
                        .iter()
                        .map(|k| format!("{}={}", k.kind, k.decision))
                        .collect::<Vec<_>>()
                        .join(" ")
                )
            })
            .collect();
        return Err(CliError::Mismatch(mismatched.join("; ")));
    }
    Ok(())
}
