//! Construction of pragmatic hypotheses: epsilon-neighborhoods of precise
//! hypotheses under a predictive dissimilarity.
//!
//! A singleton hypothesis grows into `{theta* : d(theta0, theta*) <= eps}`
//! (closed boundary, by convention). A composite hypothesis grows into the
//! union of its singleton neighborhoods, realized on a grid as a minimum
//! over discretization knots of the hypothesis set.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissimilarity::{DissimKind, DissimilaritySpec, PairEvaluator};
use crate::error::{PragmaError, Result};
use crate::family::{ParametricFamily, ReplicatedFamily};
use crate::grid::{GridRegion, ParameterGrid};
use crate::numeric::{bisect_increasing, special};

/// Everything needed to build pragmatic regions: the predictive experiment,
/// the dissimilarity, and the tolerance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PragmaticSpec {
    pub family: ReplicatedFamily,
    pub dissim: DissimilaritySpec,
    pub epsilon: f64,
}

impl PragmaticSpec {
    pub fn new(family: ReplicatedFamily, dissim: DissimilaritySpec, epsilon: f64) -> Result<Self> {
        dissim.validate()?;
        if !(epsilon > 0.0) {
            return Err(PragmaError::Config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if dissim.kind == DissimKind::Cd && epsilon >= 0.5 {
            return Err(PragmaError::Config(format!(
                "classification distance is bounded by 1/2; epsilon {epsilon} can never bind"
            )));
        }
        Ok(PragmaticSpec { family, dissim, epsilon })
    }
}

fn tag_point(err: PragmaError, index: usize, point: &[f64]) -> PragmaError {
    match err {
        PragmaError::Numeric { what, achieved } => PragmaError::Numeric {
            what: format!("at grid point {index} {point:?}: {what}"),
            achieved,
        },
        other => other,
    }
}

/// `{theta* on the grid : d(theta0, theta*) <= epsilon}`.
pub fn singleton_region(
    spec: &PragmaticSpec,
    theta0: &[f64],
    grid: &Arc<ParameterGrid>,
) -> Result<GridRegion> {
    let eval = PairEvaluator::new(&spec.dissim, &spec.family)?;
    let reference = eval.prepare(theta0)?;
    let eps = spec.epsilon;
    let mask: Result<Vec<bool>> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let candidate = eval.prepare(p).map_err(|e| tag_point(e, i, p))?;
            let d = eval.eval(&reference, &candidate).map_err(|e| tag_point(e, i, p))?;
            Ok(d <= eps)
        })
        .collect();
    GridRegion::new(Arc::clone(grid), mask?)
}

/// Union of the singleton regions over a discretized hypothesis set:
/// membership is `min over knots of d(knot, theta*) <= epsilon`.
pub fn composite_region(
    spec: &PragmaticSpec,
    hypothesis: &ParameterGrid,
    grid: &Arc<ParameterGrid>,
) -> Result<GridRegion> {
    if hypothesis.is_empty() {
        return Err(PragmaError::Config("hypothesis grid is empty".into()));
    }
    let eval = PairEvaluator::new(&spec.dissim, &spec.family)?;
    let knots: Vec<_> = hypothesis
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| eval.prepare(p).map_err(|e| tag_point(e, i, p)))
        .collect::<Result<_>>()?;
    let eps = spec.epsilon;
    let mask: Result<Vec<bool>> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let candidate = eval.prepare(p).map_err(|e| tag_point(e, i, p))?;
            for knot in &knots {
                let d = eval.eval(knot, &candidate).map_err(|e| tag_point(e, i, p))?;
                if d <= eps {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect();
    GridRegion::new(Arc::clone(grid), mask?)
}

/// Closed-form pragmatic interval for a 1-D Gaussian with known standard
/// deviation `sigma0` (BP taken with the identity form and g = sqrt).
pub fn gaussian_interval(
    theta0: f64,
    sigma0: f64,
    kind: DissimKind,
    epsilon: f64,
) -> Result<(f64, f64)> {
    if !(sigma0 > 0.0) {
        return Err(PragmaError::Domain(format!("sigma0 must be positive, got {sigma0}")));
    }
    if !(epsilon >= 0.0) {
        return Err(PragmaError::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let half = match kind {
        DissimKind::Bp => epsilon * sigma0,
        DissimKind::Kl => (2.0 * epsilon).sqrt() * sigma0,
        DissimKind::Cd => {
            if epsilon >= 0.5 {
                return Err(PragmaError::Domain(
                    "classification distance is bounded by 1/2".into(),
                ));
            }
            if epsilon == 0.0 {
                0.0
            } else {
                2.0 * special::normal_quantile(0.5 + epsilon) * sigma0
            }
        }
    };
    Ok((theta0 - half, theta0 + half))
}

/// Analytic pragmatic regions for the two-arm bioequivalence model
/// `Z = (X, Y) ~ N((mu1, mu2), sigma^2 I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BioequivRegion {
    /// Neighborhood of a single point on the diagonal.
    Circle { center: (f64, f64), radius: f64 },
    /// Neighborhood of the whole diagonal `mu1 = mu2`:
    /// `|mu2 - mu1| <= half_width`.
    Strip { half_width: f64 },
}

/// Pragmatic region of the singleton `(mu0, mu0)`.
pub fn bioequiv_singleton(
    sigma: f64,
    epsilon: f64,
    kind: DissimKind,
    mu0: f64,
) -> Result<BioequivRegion> {
    if !(sigma > 0.0) {
        return Err(PragmaError::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(epsilon > 0.0) {
        return Err(PragmaError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let radius = match kind {
        DissimKind::Bp => std::f64::consts::SQRT_2 * epsilon * sigma,
        DissimKind::Kl => (2.0 * epsilon).sqrt() * sigma,
        DissimKind::Cd => {
            if epsilon >= 0.5 {
                return Err(PragmaError::Domain(
                    "classification distance is bounded by 1/2".into(),
                ));
            }
            2.0 * special::normal_quantile(0.5 + epsilon) * sigma
        }
    };
    Ok(BioequivRegion::Circle { center: (mu0, mu0), radius })
}

/// Pragmatic region of the composite hypothesis `mu1 = mu2`: the union of
/// the singleton circles along the diagonal, which is the strip of
/// perpendicular width equal to the circle radius. In `|mu2 - mu1|` terms
/// the half-width is sqrt(2) times the radius.
///
/// For CD the half-width is found by bisection (to 1e-8) on the monotone
/// map from strip width to the classification distance of the nearest
/// diagonal point.
pub fn bioequiv_strip(sigma: f64, epsilon: f64, kind: DissimKind) -> Result<BioequivRegion> {
    let BioequivRegion::Circle { radius, .. } = bioequiv_singleton(sigma, epsilon, kind, 0.0)?
    else {
        unreachable!()
    };
    let half_width = match kind {
        DissimKind::Bp | DissimKind::Kl => std::f64::consts::SQRT_2 * radius,
        DissimKind::Cd => {
            let family = ParametricFamily::BivariateGaussianIso { sigma }.replicated();
            let spec = DissimilaritySpec::cd();
            let eval = PairEvaluator::new(&spec, &family)?;
            let origin = eval.prepare(&[0.0, 0.0])?;
            let cd_at_width = |w: f64| {
                let p = eval.prepare(&[0.5 * w, -0.5 * w])?;
                eval.eval(&origin, &p)
            };
            let mut hi = sigma;
            for _ in 0..200 {
                if cd_at_width(hi)? >= epsilon {
                    break;
                }
                hi *= 2.0;
            }
            bisect_increasing(cd_at_width, 0.0, hi, epsilon, 1e-8)?
        }
    };
    Ok(BioequivRegion::Strip { half_width })
}

/// A bijective reparametrization of the parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamMap {
    /// Coordinatewise `theta_i -> scale_i * theta_i + offset_i`.
    Affine { scale: Vec<f64>, offset: Vec<f64> },
}

impl ParamMap {
    pub fn identity(dim: usize) -> Self {
        ParamMap::Affine {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamMap::Affine { scale, .. } => scale.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParamMap::Affine { scale, offset } => {
                if scale.len() != offset.len() || scale.is_empty() {
                    return Err(PragmaError::Config(
                        "affine map needs matching nonempty scale and offset".into(),
                    ));
                }
                if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
                    return Err(PragmaError::Config(
                        "affine map with a zero scale collapses grid points (not bijective)".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>> {
        match self {
            ParamMap::Affine { scale, offset } => {
                if theta.len() != scale.len() {
                    return Err(PragmaError::Config(format!(
                        "map of dimension {} applied to a point of dimension {}",
                        scale.len(),
                        theta.len()
                    )));
                }
                Ok(theta
                    .iter()
                    .zip(scale)
                    .zip(offset)
                    .map(|((t, s), o)| s * t + o)
                    .collect())
            }
        }
    }

    pub fn inverse(&self) -> Result<ParamMap> {
        self.validate()?;
        match self {
            ParamMap::Affine { scale, offset } => Ok(ParamMap::Affine {
                scale: scale.iter().map(|s| 1.0 / s).collect(),
                offset: scale.iter().zip(offset).map(|(s, o)| -o / s).collect(),
            }),
        }
    }

    /// The family expressing the same predictive laws in the image
    /// coordinates (data space rescaled along with the means).
    pub fn transform_family(&self, family: &ReplicatedFamily) -> Result<ReplicatedFamily> {
        self.validate()?;
        let ParamMap::Affine { scale, .. } = self;
        let base = match family.base() {
            ParametricFamily::GaussianKnownVar { dim, cov } => {
                if scale.len() != *dim {
                    return Err(PragmaError::Config(format!(
                        "map dimension {} does not match parameter dimension {dim}",
                        scale.len()
                    )));
                }
                let mut scaled = cov.clone();
                for i in 0..*dim {
                    for j in 0..*dim {
                        scaled[i][j] = scale[i] * cov[i][j] * scale[j];
                    }
                }
                ParametricFamily::GaussianKnownVar { dim: *dim, cov: scaled }
            }
            ParametricFamily::BivariateGaussianIso { sigma } => {
                if scale.len() != 2 {
                    return Err(PragmaError::Config("map must be 2-dimensional".into()));
                }
                if (scale[0].abs() - scale[1].abs()).abs() > 1e-12 * scale[0].abs() {
                    return Err(PragmaError::Config(
                        "non-uniform scaling breaks the isotropic family".into(),
                    ));
                }
                ParametricFamily::BivariateGaussianIso { sigma: sigma * scale[0].abs() }
            }
            other => {
                return Err(PragmaError::Config(format!(
                    "reparametrized family is not constructible for {other:?}"
                )))
            }
        };
        ReplicatedFamily::new(base, family.replication())
    }
}

/// Result of comparing a pragmatic region with its image under a
/// reparametrization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub grid_size: usize,
    pub symmetric_difference: usize,
    /// Indices (into the evaluation grid) where exactly one of the two
    /// constructions includes the point.
    pub mismatched_indices: Vec<usize>,
}

impl InvarianceReport {
    pub fn is_invariant(&self) -> bool {
        self.symmetric_difference == 0
    }
}

/// Build the pragmatic region in the original coordinates and in the image
/// of a bijective reparametrization, on corresponding grids, and count the
/// points on which the two disagree.
pub fn check_invariance(
    spec: &PragmaticSpec,
    hypothesis: &ParameterGrid,
    map: &ParamMap,
    grid: &Arc<ParameterGrid>,
) -> Result<InvarianceReport> {
    map.validate()?;
    let transformed = map.transform_family(&spec.family)?;

    let original = composite_region(spec, hypothesis, grid)?;

    let mapped_hypothesis = ParameterGrid::from_points(
        hypothesis
            .points()
            .iter()
            .map(|p| map.apply(p))
            .collect::<Result<_>>()?,
    )?;
    let mapped_grid = ParameterGrid::from_points(
        grid.points()
            .iter()
            .map(|p| map.apply(p))
            .collect::<Result<_>>()?,
    )?
    .into_shared();

    let spec2 = PragmaticSpec {
        family: transformed,
        dissim: spec.dissim.clone(),
        epsilon: spec.epsilon,
    };
    let reparametrized = composite_region(&spec2, &mapped_hypothesis, &mapped_grid)?;

    let mismatched_indices: Vec<usize> = original
        .mask()
        .iter()
        .zip(reparametrized.mask())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();
    Ok(InvarianceReport {
        grid_size: grid.len(),
        symmetric_difference: mismatched_indices.len(),
        mismatched_indices,
    })
}

/// Pragmatic regions of one hypothesis under increasing replication.
///
/// Covers KL and CD (whose regions shrink toward the hypothesis as the
/// experiment grows); BP admits no such guarantee and is rejected. The
/// spec's family must be unreplicated: entries of `m_list` are absolute
/// replication counts. Closed-form CD over a trinomial base is evaluated
/// by exact enumeration.
pub fn shrinkage_sequence(
    spec: &PragmaticSpec,
    hypothesis: &ParameterGrid,
    grid: &Arc<ParameterGrid>,
    m_list: &[u32],
) -> Result<Vec<GridRegion>> {
    if spec.dissim.kind == DissimKind::Bp {
        return Err(PragmaError::Unsupported(
            "shrinkage sequences cover the KL and CD dissimilarities only; \
             BP carries no monotone-in-replication guarantee"
                .into(),
        ));
    }
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) || m_list[0] == 0 {
        return Err(PragmaError::Config(
            "m_list must be a strictly increasing sequence of positive replications".into(),
        ));
    }
    if spec.family.replication() != 1 {
        return Err(PragmaError::Config(
            "shrinkage replications are absolute; supply an unreplicated family".into(),
        ));
    }
    let base = spec.family.base().clone();
    let dissim = spec.dissim.clone().resolved_for(&base);
    m_list
        .iter()
        .map(|m| {
            let spec_m = PragmaticSpec {
                family: base.replicate(*m)?,
                dissim: dissim.clone(),
                epsilon: spec.epsilon,
            };
            composite_region(&spec_m, hypothesis, grid)
        })
        .collect()
}

/// Grid points within `radius` (L2) of some knot of a hypothesis set: the
/// grid realization of the hypothesis itself, used as the shrinkage limit.
pub fn hypothesis_neighborhood(
    hypothesis: &ParameterGrid,
    grid: &Arc<ParameterGrid>,
    radius: f64,
) -> GridRegion {
    let r2 = radius * radius;
    GridRegion::from_predicate(grid, |p| {
        hypothesis.points().iter().any(|k| {
            let d2: f64 = k.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 <= r2
        })
    })
}
