//! Region-estimator agnostic tests.
//!
//! A posterior over a parameter grid yields a highest-posterior-density
//! region; testing a hypothesis region then has three outcomes: accept
//! when the HPD region is contained in the hypothesis, reject when the two
//! are disjoint, agnostic otherwise. Decisions produced this way from one
//! region estimate are logically coherent across arbitrary hypothesis
//! collections, which `coherence_audit` verifies mechanically.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissimilarity::{DissimKind, DissimilaritySpec, MonotoneMap, QuadFormSpec};
use crate::error::{PragmaError, Result};
use crate::family::ParametricFamily;
use crate::grid::{CurveKind, GridGeometry, GridRegion, ParameterGrid};
use crate::pragmatic::{composite_region, PragmaticSpec};

/// Prior over the parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// Equal weight on every grid point.
    UniformOnGrid,
    /// Dirichlet density on the 2-simplex (trinomial family only).
    Dirichlet { alpha: [f64; 3] },
    /// Flat improper prior on the mean; on a bounded grid this weighs
    /// points equally and is kept as a distinct, documented choice.
    FlatImproperMean,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Dirichlet { alpha: [1.0, 1.0, 1.0] }
    }
}

impl PriorSpec {
    fn validate(&self, family: &ParametricFamily) -> Result<()> {
        match self {
            PriorSpec::Dirichlet { alpha } => {
                if alpha.iter().any(|a| !(*a > 0.0)) {
                    return Err(PragmaError::Config(
                        "dirichlet concentrations must be positive".into(),
                    ));
                }
                if !matches!(family, ParametricFamily::TrinomialCounts { .. }) {
                    return Err(PragmaError::Config(
                        "dirichlet prior applies to the trinomial family".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn log_weight(&self, theta: &[f64]) -> Result<f64> {
        Ok(match self {
            PriorSpec::UniformOnGrid | PriorSpec::FlatImproperMean => 0.0,
            PriorSpec::Dirichlet { alpha } => {
                let mut lw = 0.0;
                for (t, a) in theta.iter().zip(alpha) {
                    if *t > 0.0 {
                        lw += (a - 1.0) * t.ln();
                    } else if *a > 1.0 {
                        return Ok(f64::NEG_INFINITY);
                    } else if *a < 1.0 {
                        return Err(PragmaError::DegeneratePosterior(
                            "dirichlet density with alpha < 1 diverges at a boundary grid point; \
                             use alpha >= 1 or an interior grid"
                                .into(),
                        ));
                    }
                }
                lw
            }
        })
    }
}

/// Normalized posterior weights over a parameter grid.
#[derive(Clone, Debug)]
pub struct PosteriorGrid {
    grid: Arc<ParameterGrid>,
    weights: Vec<f64>,
}

impl PosteriorGrid {
    /// Wrap externally computed weights; they must be nonnegative and sum
    /// to one within 1e-12.
    pub fn from_weights(grid: Arc<ParameterGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(PragmaError::GridMismatch(format!(
                "{} weights for a grid of {} points",
                weights.len(),
                grid.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(PragmaError::Config("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PragmaError::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(PosteriorGrid { grid, weights })
    }

    pub fn grid(&self) -> &Arc<ParameterGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode_index(&self) -> usize {
        self.weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty grid")
    }
}

/// Posterior `weight[i] ~ prior(points[i]) * likelihood(data | points[i])`,
/// normalized to sum to one.
///
/// `data` is a list of observed outcomes of the family: one count vector
/// for the trinomial, a sample of reals for the Gaussian families.
pub fn posterior_grid(
    family: &ParametricFamily,
    prior: &PriorSpec,
    data: &[Vec<f64>],
    grid: &Arc<ParameterGrid>,
) -> Result<PosteriorGrid> {
    family.validate()?;
    prior.validate(family)?;
    if data.is_empty() {
        return Err(PragmaError::Config("posterior needs at least one observation".into()));
    }
    let log_w: Result<Vec<f64>> = grid
        .points()
        .par_iter()
        .map(|theta| {
            let mut lw = prior.log_weight(theta)?;
            if lw > f64::NEG_INFINITY {
                for z in data {
                    lw += family.log_density(theta, z)?;
                    if lw == f64::NEG_INFINITY {
                        break;
                    }
                }
            }
            Ok(lw)
        })
        .collect();
    let log_w = log_w?;
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(PragmaError::DegeneratePosterior(
            "likelihood is zero at every grid point".into(),
        ));
    }
    let mut weights: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(PosteriorGrid { grid: Arc::clone(grid), weights })
}

/// A data-dependent region of the parameter space with its captured
/// posterior mass.
#[derive(Clone, Debug)]
pub struct RegionEstimate {
    pub region: GridRegion,
    pub level: f64,
    pub posterior_mass: f64,
}

/// Smallest set of grid points, taken in decreasing weight order, whose
/// total mass reaches `level`; points tied with the cut weight are all
/// included so the estimator is a well-defined set function.
pub fn hpd_region(posterior: &PosteriorGrid, level: f64) -> Result<RegionEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(PragmaError::Config(format!("hpd level must lie in (0,1), got {level}")));
    }
    let mut order: Vec<usize> = (0..posterior.weights.len()).collect();
    order.sort_by(|a, b| {
        posterior.weights[*b]
            .total_cmp(&posterior.weights[*a])
            .then(a.cmp(b))
    });
    let mut mask = vec![false; posterior.weights.len()];
    let mut mass = 0.0;
    let mut cut = 0.0;
    let mut taken = 0usize;
    for &i in &order {
        mask[i] = true;
        mass += posterior.weights[i];
        cut = posterior.weights[i];
        taken += 1;
        if mass >= level {
            break;
        }
    }
    for &i in order.iter().skip(taken) {
        if posterior.weights[i] == cut {
            mask[i] = true;
            mass += posterior.weights[i];
        } else {
            break;
        }
    }
    Ok(RegionEstimate {
        region: GridRegion::new(Arc::clone(&posterior.grid), mask)?,
        level,
        posterior_mass: mass,
    })
}

/// Outcome of a three-valued test. `value()` gives the conventional
/// numeric encoding: accept 0, agnostic 1/2, reject 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgnosticDecision {
    Accept,
    Agnostic,
    Reject,
}

impl AgnosticDecision {
    pub fn value(&self) -> f64 {
        match self {
            AgnosticDecision::Accept => 0.0,
            AgnosticDecision::Agnostic => 0.5,
            AgnosticDecision::Reject => 1.0,
        }
    }
}

impl std::fmt::Display for AgnosticDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgnosticDecision::Accept => "Accept",
            AgnosticDecision::Agnostic => "Agnostic",
            AgnosticDecision::Reject => "Reject",
        })
    }
}

/// The region-estimator test: accept if the estimate is contained in the
/// hypothesis, reject if it misses it entirely, stay agnostic otherwise.
pub fn agnostic_test(estimate: &RegionEstimate, hypothesis: &GridRegion) -> Result<AgnosticDecision> {
    if estimate.region.subset(hypothesis)? {
        Ok(AgnosticDecision::Accept)
    } else if estimate.region.disjoint(hypothesis)? {
        Ok(AgnosticDecision::Reject)
    } else {
        Ok(AgnosticDecision::Agnostic)
    }
}

/// Logical-coherence violations over a decision list.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// Pairs (i, j) with hypothesis i contained in hypothesis j, i
    /// accepted, but j not accepted.
    pub monotonicity_violations: Vec<(usize, usize)>,
    /// Indices of hypotheses covered by the union of all rejected
    /// hypotheses but not themselves rejected.
    pub consonance_violations: Vec<usize>,
}

impl CoherenceReport {
    pub fn is_clean(&self) -> bool {
        self.monotonicity_violations.is_empty() && self.consonance_violations.is_empty()
    }
}

/// Audit a batch of (hypothesis, decision) pairs, all over one grid, for
/// the two coherence conditions: acceptance must propagate to supersets,
/// and rejection of a covering family must propagate to the covered
/// hypothesis.
pub fn coherence_audit(items: &[(GridRegion, AgnosticDecision)]) -> Result<CoherenceReport> {
    let mut report = CoherenceReport::default();
    if items.is_empty() {
        return Ok(report);
    }
    for (region, _) in &items[1..] {
        // surfaces grid mismatches early
        items[0].0.subset(region)?;
    }
    for (i, (ri, di)) in items.iter().enumerate() {
        if *di != AgnosticDecision::Accept {
            continue;
        }
        for (j, (rj, dj)) in items.iter().enumerate() {
            if i != j && *dj != AgnosticDecision::Accept && ri.subset(rj)? {
                report.monotonicity_violations.push((i, j));
            }
        }
    }
    let rejected: Vec<&GridRegion> = items
        .iter()
        .filter(|(_, d)| *d == AgnosticDecision::Reject)
        .map(|(r, _)| r)
        .collect();
    let rejected_union = if rejected.is_empty() {
        items[0].0.complement().intersect(&items[0].0)? // empty region
    } else {
        GridRegion::union(&rejected)?
    };
    for (i, (ri, di)) in items.iter().enumerate() {
        if *di != AgnosticDecision::Reject && ri.subset(&rejected_union)? {
            report.consonance_violations.push(i);
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Hardy-Weinberg case study
// ---------------------------------------------------------------------------

/// Genotype counts (AA / AD / DD) for the APOE-e4 groups of Brentani et
/// al. (2011), plus two synthetic control groups: group 9 was generated
/// off the Hardy-Weinberg curve, group 10 on it. The paired decisions are
/// the reference outcomes used by the reproduction gate.
pub const HW_STUDY_GROUPS: [([u64; 3], AgnosticDecision); 10] = [
    ([4, 18, 94], AgnosticDecision::Agnostic),
    ([6, 53, 74], AgnosticDecision::Accept),
    ([57, 118, 100], AgnosticDecision::Agnostic),
    ([58, 97, 48], AgnosticDecision::Agnostic),
    ([120, 361, 194], AgnosticDecision::Agnostic),
    ([206, 309, 142], AgnosticDecision::Accept),
    ([110, 148, 44], AgnosticDecision::Accept),
    ([34, 22, 12], AgnosticDecision::Agnostic),
    ([198, 282, 520], AgnosticDecision::Reject),
    ([641, 314, 45], AgnosticDecision::Accept),
];

/// Default tolerances for the study: BP and CD at 0.1, KL at 0.01.
pub fn hw_default_epsilon(kind: DissimKind) -> f64 {
    match kind {
        DissimKind::Kl => 0.01,
        DissimKind::Bp | DissimKind::Cd => 0.1,
    }
}

/// Configuration of the Hardy-Weinberg study.
///
/// By default all three dissimilarities run at their default tolerances;
/// supplying `dissimilarity` (and optionally `epsilon`) restricts the run
/// to that single spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HwStudyConfig {
    pub prior: PriorSpec,
    pub hpd_level: f64,
    /// Trial count of the predictive experiment the pragmatic region is
    /// built for.
    pub replication_m: u64,
    pub simplex_resolution: u32,
    pub curve_knots: usize,
    pub dissimilarity: Option<DissimilaritySpec>,
    pub epsilon: Option<f64>,
    /// Custom groups (counts); defaults to the bundled dataset.
    pub groups: Option<Vec<[u64; 3]>>,
}

impl Default for HwStudyConfig {
    fn default() -> Self {
        HwStudyConfig {
            prior: PriorSpec::default(),
            hpd_level: 0.95,
            replication_m: 20,
            simplex_resolution: 200,
            curve_knots: 500,
            dissimilarity: None,
            epsilon: None,
            groups: None,
        }
    }
}

impl HwStudyConfig {
    fn plans(&self) -> Vec<(DissimilaritySpec, f64)> {
        let trinomial = ParametricFamily::TrinomialCounts { trials: self.replication_m };
        match &self.dissimilarity {
            Some(spec) => {
                let eps = self.epsilon.unwrap_or_else(|| hw_default_epsilon(spec.kind));
                vec![(spec.clone().resolved_for(&trinomial), eps)]
            }
            None => vec![
                (
                    DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt),
                    hw_default_epsilon(DissimKind::Bp),
                ),
                (DissimilaritySpec::kl(), hw_default_epsilon(DissimKind::Kl)),
                (
                    DissimilaritySpec::cd().resolved_for(&trinomial),
                    hw_default_epsilon(DissimKind::Cd),
                ),
            ],
        }
    }
}

/// Per-kind decision and overlap diagnostics for one group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HwKindResult {
    pub kind: DissimKind,
    pub epsilon: f64,
    pub decision: AgnosticDecision,
    /// Points of the HPD region inside the pragmatic hypothesis.
    pub hpd_in_hypothesis: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HwGroupRow {
    /// 1-based group number.
    pub group: usize,
    pub counts: [u64; 3],
    pub hpd_points: usize,
    pub hpd_mass: f64,
    pub results: Vec<HwKindResult>,
    /// Reference decision, when the bundled dataset is used.
    pub reference: Option<AgnosticDecision>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HwStudyReport {
    pub kinds: Vec<DissimKind>,
    pub epsilons: Vec<f64>,
    pub hypothesis_sizes: Vec<usize>,
    pub grid_points: usize,
    pub rows: Vec<HwGroupRow>,
}

impl HwStudyReport {
    /// Rows whose decisions agree with the reference for every kind run.
    pub fn reference_matches(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| {
                r.reference
                    .map(|expect| r.results.iter().all(|k| k.decision == expect))
                    .unwrap_or(false)
            })
            .count()
    }
}

/// Run the full study: posterior and HPD region per group, one pragmatic
/// Hardy-Weinberg region per dissimilarity, and the three-valued decision
/// of each group against each region.
pub fn run_hw_study(config: &HwStudyConfig) -> Result<HwStudyReport> {
    if !(config.hpd_level > 0.0 && config.hpd_level < 1.0) {
        return Err(PragmaError::Config("hpd_level must lie in (0,1)".into()));
    }
    if config.replication_m == 0 {
        return Err(PragmaError::Config("replication_m must be >= 1".into()));
    }
    let grid = ParameterGrid::new(GridGeometry::Simplex {
        resolution: config.simplex_resolution,
    })?
    .into_shared();
    let curve = ParameterGrid::new(GridGeometry::Curve {
        curve: CurveKind::HardyWeinberg,
        knots: config.curve_knots,
    })?;

    let plans = config.plans();
    let future = ParametricFamily::TrinomialCounts { trials: config.replication_m };
    let mut regions = Vec::with_capacity(plans.len());
    for (dissim, eps) in &plans {
        let spec = PragmaticSpec::new(future.replicated(), dissim.clone(), *eps)?;
        regions.push(composite_region(&spec, &curve, &grid)?);
    }

    let default_groups: Vec<[u64; 3]> = HW_STUDY_GROUPS.iter().map(|(c, _)| *c).collect();
    let (groups, references): (Vec<[u64; 3]>, Vec<Option<AgnosticDecision>>) =
        match &config.groups {
            Some(custom) => (custom.clone(), vec![None; custom.len()]),
            None => (
                default_groups,
                HW_STUDY_GROUPS.iter().map(|(_, d)| Some(*d)).collect(),
            ),
        };

    let mut rows = Vec::with_capacity(groups.len());
    for (gi, counts) in groups.iter().enumerate() {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(PragmaError::Config(format!("group {} has no observations", gi + 1)));
        }
        let obs_family = ParametricFamily::TrinomialCounts { trials: n };
        let data = vec![counts.iter().map(|c| *c as f64).collect::<Vec<f64>>()];
        let posterior = posterior_grid(&obs_family, &config.prior, &data, &grid)?;
        let estimate = hpd_region(&posterior, config.hpd_level)?;

        let mut results = Vec::with_capacity(plans.len());
        for ((dissim, eps), region) in plans.iter().zip(&regions) {
            let decision = agnostic_test(&estimate, region)?;
            results.push(HwKindResult {
                kind: dissim.kind,
                epsilon: *eps,
                decision,
                hpd_in_hypothesis: estimate.region.intersection_count(region)?,
            });
        }
        rows.push(HwGroupRow {
            group: gi + 1,
            counts: *counts,
            hpd_points: estimate.region.member_count(),
            hpd_mass: estimate.posterior_mass,
            results,
            reference: references[gi],
        });
    }

    Ok(HwStudyReport {
        kinds: plans.iter().map(|(d, _)| d.kind).collect(),
        epsilons: plans.iter().map(|(_, e)| *e).collect(),
        hypothesis_sizes: regions.iter().map(GridRegion::member_count).collect(),
        grid_points: grid.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::numeric::special;

    fn simplex(res: u32) -> Arc<ParameterGrid> {
        ParameterGrid::new(GridGeometry::Simplex { resolution: res })
            .unwrap()
            .into_shared()
    }

    #[test]
    fn dirichlet_posterior_mode_at_vertex() {
        let grid = simplex(40);
        let fam = ParametricFamily::TrinomialCounts { trials: 2 };
        let post = posterior_grid(
            &fam,
            &PriorSpec::default(),
            &[vec![2.0, 0.0, 0.0]],
            &grid,
        )
        .unwrap();
        let mode = &grid.points()[post.mode_index()];
        assert_eq!(mode, &vec![1.0, 0.0, 0.0]);
        let total: f64 = post.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_posterior_matches_conjugate_dirichlet_shape() {
        // prior Dirichlet(alpha) x multinomial counts z should be
        // proportional to the Dirichlet(alpha + z) density at every
        // interior knot: the two routes go through different code
        // (multinomial pmf with its coefficient vs direct density).
        let grid = simplex(30);
        let fam = ParametricFamily::TrinomialCounts { trials: 12 };
        let alpha = [2.0, 1.0, 3.0];
        let counts = [5.0, 4.0, 3.0];
        let post = posterior_grid(
            &fam,
            &PriorSpec::Dirichlet { alpha },
            &[counts.to_vec()],
            &grid,
        )
        .unwrap();
        let target = [
            alpha[0] + counts[0],
            alpha[1] + counts[1],
            alpha[2] + counts[2],
        ];
        let mut direct: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| {
                if p.iter().any(|t| *t <= 0.0) {
                    0.0
                } else {
                    p.iter()
                        .zip(&target)
                        .map(|(t, a)| (a - 1.0) * t.ln())
                        .sum::<f64>()
                        .exp()
                }
            })
            .collect();
        let total: f64 = direct.iter().sum();
        for d in direct.iter_mut() {
            *d /= total;
        }
        // boundary knots carry zero weight under both routes here (counts
        // are all positive), so the normalized vectors must agree
        for (w, d) in post.weights().iter().zip(&direct) {
            assert!((w - d).abs() < 1e-10, "{w} vs {d}");
        }
    }

    #[test]
    fn uniform_prior_no_data_updates_needs_observation() {
        let grid = simplex(10);
        let fam = ParametricFamily::TrinomialCounts { trials: 3 };
        assert!(posterior_grid(&fam, &PriorSpec::UniformOnGrid, &[], &grid).is_err());
    }

    #[test]
    fn gaussian_flat_posterior_centers_at_sample_mean() {
        let fam = ParametricFamily::gaussian_1d(1.0);
        let grid = ParameterGrid::new(GridGeometry::Rectangular {
            axes: vec![Axis::new(-2.0, 2.0, 401)],
        })
        .unwrap()
        .into_shared();
        let data = vec![vec![0.4], vec![0.6], vec![0.2], vec![0.8]];
        let post = posterior_grid(&fam, &PriorSpec::FlatImproperMean, &data, &grid).unwrap();
        let mode = grid.points()[post.mode_index()][0];
        assert!((mode - 0.5).abs() <= 0.01 + 1e-12, "{mode}");
        // posterior mean as well
        let mean: f64 = grid
            .points()
            .iter()
            .zip(post.weights())
            .map(|(p, w)| p[0] * w)
            .sum();
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn degenerate_posterior_errors() {
        let grid = ParameterGrid::from_points(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap()
        .into_shared();
        let fam = ParametricFamily::TrinomialCounts { trials: 2 };
        let err = posterior_grid(
            &fam,
            &PriorSpec::UniformOnGrid,
            &[vec![0.0, 0.0, 2.0]],
            &grid,
        )
        .unwrap_err();
        assert!(matches!(err, PragmaError::DegeneratePosterior(_)));
    }

    #[test]
    fn hpd_basics() {
        let grid = ParameterGrid::from_points(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]])
            .unwrap()
            .into_shared();
        let post = PosteriorGrid {
            grid: Arc::clone(&grid),
            weights: vec![0.5, 0.3, 0.15, 0.05],
        };
        let r = hpd_region(&post, 0.8).unwrap();
        assert_eq!(r.region.mask(), &[true, true, false, false]);
        assert!((r.posterior_mass - 0.8).abs() < 1e-15);

        // near-full level keeps everything
        let r = hpd_region(&post, 0.999).unwrap();
        assert_eq!(r.region.member_count(), 4);

        // single spike
        let spike = PosteriorGrid {
            grid: Arc::clone(&grid),
            weights: vec![0.0, 1.0, 0.0, 0.0],
        };
        let r = hpd_region(&spike, 0.9).unwrap();
        assert_eq!(r.region.member_count(), 1);
    }

    #[test]
    fn hpd_includes_ties_at_the_cut() {
        let grid = ParameterGrid::from_points(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]])
            .unwrap()
            .into_shared();
        let post = PosteriorGrid {
            grid,
            weights: vec![0.4, 0.25, 0.25, 0.1],
        };
        let r = hpd_region(&post, 0.6).unwrap();
        // cut falls on a 0.25 weight; both tied points enter
        assert_eq!(r.region.mask(), &[true, true, true, false]);
        assert!((r.posterior_mass - 0.9).abs() < 1e-15);
    }

    #[test]
    fn hpd_mass_reaches_level_and_is_minimal() {
        let grid = simplex(25);
        let fam = ParametricFamily::TrinomialCounts { trials: 30 };
        let post = posterior_grid(
            &fam,
            &PriorSpec::default(),
            &[vec![12.0, 10.0, 8.0]],
            &grid,
        )
        .unwrap();
        let r = hpd_region(&post, 0.8).unwrap();
        assert!(r.posterior_mass >= 0.8);
        // removing the lightest member drops below the level
        let min_w = post
            .weights()
            .iter()
            .zip(r.region.mask())
            .filter(|(_, m)| **m)
            .map(|(w, _)| *w)
            .fold(f64::INFINITY, f64::min);
        assert!(r.posterior_mass - min_w < 0.8);
    }

    #[test]
    fn agnostic_test_three_cases() {
        let grid = ParameterGrid::from_points(vec![vec![0.0], vec![1.0], vec![2.0]])
            .unwrap()
            .into_shared();
        let estimate = RegionEstimate {
            region: GridRegion::new(Arc::clone(&grid), vec![true, true, false]).unwrap(),
            level: 0.9,
            posterior_mass: 0.95,
        };
        let superset = GridRegion::new(Arc::clone(&grid), vec![true, true, true]).unwrap();
        let disjoint = GridRegion::new(Arc::clone(&grid), vec![false, false, true]).unwrap();
        let straddle = GridRegion::new(Arc::clone(&grid), vec![true, false, false]).unwrap();
        assert_eq!(agnostic_test(&estimate, &superset).unwrap(), AgnosticDecision::Accept);
        assert_eq!(agnostic_test(&estimate, &disjoint).unwrap(), AgnosticDecision::Reject);
        assert_eq!(agnostic_test(&estimate, &straddle).unwrap(), AgnosticDecision::Agnostic);
        // full and empty hypotheses
        let empty = GridRegion::new(Arc::clone(&grid), vec![false, false, false]).unwrap();
        assert_eq!(agnostic_test(&estimate, &empty).unwrap(), AgnosticDecision::Reject);
    }

    #[test]
    fn audit_accepts_decisions_from_one_estimate() {
        let grid = simplex(15);
        let fam = ParametricFamily::TrinomialCounts { trials: 9 };
        let post =
            posterior_grid(&fam, &PriorSpec::default(), &[vec![3.0, 3.0, 3.0]], &grid).unwrap();
        let estimate = hpd_region(&post, 0.7).unwrap();
        // nested hypothesis family around the barycenter plus a cover
        let mut items = Vec::new();
        for radius in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let h = GridRegion::from_predicate(&grid, |p| {
                (p[0] - 1.0 / 3.0).abs() < radius && (p[1] - 1.0 / 3.0).abs() < radius
            });
            let d = agnostic_test(&estimate, &h).unwrap();
            items.push((h, d));
        }
        let report = coherence_audit(&items).unwrap();
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn audit_nested_hardy_weinberg_hypotheses() {
        // the pragmatic region of one point of the curve (p = 1/3, i.e.
        // genotype frequencies (1/9, 4/9, 4/9)) is contained in the
        // pragmatic region of the whole curve; decisions of one estimate
        // across both are coherent
        use crate::dissimilarity::{DissimilaritySpec, MonotoneMap, QuadFormSpec};
        use crate::pragmatic::{singleton_region, PragmaticSpec};

        let grid = simplex(50);
        let curve = ParameterGrid::new(GridGeometry::Curve {
            curve: CurveKind::HardyWeinberg,
            knots: 150,
        })
        .unwrap();
        let family = ParametricFamily::TrinomialCounts { trials: 20 };
        let spec = PragmaticSpec::new(
            family.replicated(),
            DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt),
            0.1,
        )
        .unwrap();
        let p = 1.0 / 3.0;
        let point = [p * p, 2.0 * p * (1.0 - p), (1.0 - p) * (1.0 - p)];
        let small = singleton_region(&spec, &point, &grid).unwrap();
        let big = composite_region(&spec, &curve, &grid).unwrap();
        assert!(small.subset(&big).unwrap());

        let post = posterior_grid(
            &ParametricFamily::TrinomialCounts { trials: 90 },
            &PriorSpec::default(),
            &[vec![10.0, 40.0, 40.0]],
            &grid,
        )
        .unwrap();
        let estimate = hpd_region(&post, 0.9).unwrap();
        let items = vec![
            (small.clone(), agnostic_test(&estimate, &small).unwrap()),
            (big.clone(), agnostic_test(&estimate, &big).unwrap()),
        ];
        let report = coherence_audit(&items).unwrap();
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn audit_flags_synthetic_incoherence() {
        let grid = ParameterGrid::from_points(vec![vec![0.0], vec![1.0], vec![2.0]])
            .unwrap()
            .into_shared();
        let small = GridRegion::new(Arc::clone(&grid), vec![true, false, false]).unwrap();
        let big = GridRegion::new(Arc::clone(&grid), vec![true, true, false]).unwrap();
        // B subset of A accepted while A agnostic: monotonicity violation;
        // big covered by rejected pieces: consonance violation
        let items = vec![
            (small.clone(), AgnosticDecision::Accept),
            (big.clone(), AgnosticDecision::Agnostic),
            (
                GridRegion::new(Arc::clone(&grid), vec![true, false, false]).unwrap(),
                AgnosticDecision::Reject,
            ),
            (
                GridRegion::new(Arc::clone(&grid), vec![false, true, true]).unwrap(),
                AgnosticDecision::Reject,
            ),
        ];
        let report = coherence_audit(&items).unwrap();
        assert!(!report.monotonicity_violations.is_empty());
        assert!(report.consonance_violations.contains(&1));
    }

    #[test]
    fn audit_single_hypothesis_is_clean() {
        let grid = ParameterGrid::from_points(vec![vec![0.0]]).unwrap().into_shared();
        let h = GridRegion::new(Arc::clone(&grid), vec![true]).unwrap();
        let report = coherence_audit(&[(h, AgnosticDecision::Agnostic)]).unwrap();
        assert!(report.is_clean());
    }

    #[test]
    fn decisions_survive_grid_relabeling() {
        // permuting the grid point order (and weights/masks with it) must
        // not change the decision
        let points = vec![vec![0.1], vec![0.2], vec![0.3], vec![0.4]];
        let weights = [0.4, 0.3, 0.2, 0.1];
        let hyp_mask = [true, true, false, false];
        let perm = [2usize, 0, 3, 1];

        let g1 = ParameterGrid::from_points(points.clone()).unwrap().into_shared();
        let post1 = PosteriorGrid { grid: Arc::clone(&g1), weights: weights.to_vec() };
        let est1 = hpd_region(&post1, 0.65).unwrap();
        let h1 = GridRegion::new(Arc::clone(&g1), hyp_mask.to_vec()).unwrap();
        let d1 = agnostic_test(&est1, &h1).unwrap();

        let g2 = ParameterGrid::from_points(perm.iter().map(|i| points[*i].clone()).collect())
            .unwrap()
            .into_shared();
        let post2 = PosteriorGrid {
            grid: Arc::clone(&g2),
            weights: perm.iter().map(|i| weights[*i]).collect(),
        };
        let est2 = hpd_region(&post2, 0.65).unwrap();
        let h2 =
            GridRegion::new(Arc::clone(&g2), perm.iter().map(|i| hyp_mask[*i]).collect()).unwrap();
        let d2 = agnostic_test(&est2, &h2).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn hw_study_small_resolution_runs() {
        let config = HwStudyConfig {
            simplex_resolution: 60,
            curve_knots: 120,
            ..HwStudyConfig::default()
        };
        let report = run_hw_study(&config).unwrap();
        assert_eq!(report.rows.len(), 10);
        assert_eq!(report.kinds.len(), 3);
        // group 9 was generated far off the curve; every dissimilarity
        // rejects it at any reasonable resolution
        let row9 = &report.rows[8];
        for r in &row9.results {
            assert_eq!(r.decision, AgnosticDecision::Reject, "{:?}", r.kind);
            assert_eq!(r.hpd_in_hypothesis, 0);
        }
        // pragmatic regions contain the curve trace, so no hypothesis is
        // empty
        for size in &report.hypothesis_sizes {
            assert!(*size > 0);
        }
        // deterministic rerun
        let again = run_hw_study(&config).unwrap();
        for (a, b) in report.rows.iter().zip(&again.rows) {
            for (x, y) in a.results.iter().zip(&b.results) {
                assert_eq!(x.decision, y.decision);
            }
        }
    }

    #[test]
    fn hw_epsilon_defaults_follow_kind() {
        assert_eq!(hw_default_epsilon(DissimKind::Kl), 0.01);
        assert_eq!(hw_default_epsilon(DissimKind::Bp), 0.1);
        assert_eq!(hw_default_epsilon(DissimKind::Cd), 0.1);
    }

    #[test]
    fn hw_config_json_schema() {
        let json = r#"{
            "prior": {"kind":"dirichlet","alpha":[1,1,1]},
            "hpd_level": 0.95,
            "dissimilarity": {"kind":"BP","S":"identity","g":"sqrt","backend":{"type":"closed_form"}},
            "epsilon": 0.1,
            "replication_m": 20,
            "simplex_resolution": 200
        }"#;
        let config: HwStudyConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.hpd_level, 0.95);
        assert_eq!(config.replication_m, 20);
        assert_eq!(config.simplex_resolution, 200);
        assert_eq!(config.curve_knots, 500);
        let plans = config.plans();
        assert_eq!(plans.len(), 1);
        assert_eq!(plans[0].0.kind, DissimKind::Bp);
        assert_eq!(plans[0].1, 0.1);

        // defaults: all three kinds at their default tolerances
        let config: HwStudyConfig = serde_json::from_str("{}").unwrap();
        let plans = config.plans();
        assert_eq!(plans.len(), 3);
        assert_eq!(plans[1].0.kind, DissimKind::Kl);
        assert_eq!(plans[1].1, 0.01);
    }

    #[test]
    fn normal_quantile_available_for_study_checks() {
        // Phi^{-1}(0.975): the usual two-sided 5% point, used in
        // diagnostics around the study
        assert!((special::normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
    }
}
