//! Parametric families for the future experiment `Z`, plus the iid
//! replication wrapper turning a single-observation model into the
//! m-observation experiment.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PragmaError, Result};
use crate::numeric::{linalg, rng, special};

/// Relative slack accepted when renormalizing simplex points on input.
pub const SIMPLEX_INPUT_TOL: f64 = 1e-9;
/// Tolerance at which stored simplex points must sum to one.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;
/// Default variance floor for the unknown-variance family, as a fraction
/// of the variance cap. Grids cannot carry the open lower endpoint, and
/// densities blow up as the variance approaches zero.
pub const DEFAULT_VAR_FLOOR_FRACTION: f64 = 1e-6;

/// A predictive model for the future experiment `Z` given a parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ParametricFamily {
    /// `Z ~ N(theta, cov)` on R^dim with known covariance.
    GaussianKnownVar { dim: usize, cov: Vec<Vec<f64>> },
    /// `Z ~ N(mu, v)` with `theta = (mu, v)` and `v` in `(var_floor, var_cap]`.
    Gaussian1dUnknownVar {
        var_cap: f64,
        #[serde(default)]
        var_floor: Option<f64>,
    },
    /// `Z ~ Multinomial(trials, theta)` over three categories; outcomes are
    /// count vectors summing to `trials`.
    TrinomialCounts { trials: u64 },
    /// `Z = (X, Y) ~ N((mu1, mu2), sigma^2 I)`.
    BivariateGaussianIso { sigma: f64 },
}

impl ParametricFamily {
    pub fn gaussian_1d(sigma0: f64) -> Self {
        ParametricFamily::GaussianKnownVar {
            dim: 1,
            cov: vec![vec![sigma0 * sigma0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricFamily::GaussianKnownVar { dim, cov } => {
                if *dim == 0 {
                    return Err(PragmaError::Config("gaussian dimension must be >= 1".into()));
                }
                if cov.len() != *dim || cov.iter().any(|r| r.len() != *dim) {
                    return Err(PragmaError::Config(format!(
                        "covariance must be {dim}x{dim}"
                    )));
                }
                if !linalg::is_symmetric(cov, 1e-12) {
                    return Err(PragmaError::Config("covariance must be symmetric".into()));
                }
                linalg::cholesky(cov)
                    .map_err(|_| PragmaError::Config("covariance must be positive definite".into()))?;
                Ok(())
            }
            ParametricFamily::Gaussian1dUnknownVar { var_cap, var_floor } => {
                if !(*var_cap > 0.0) {
                    return Err(PragmaError::Config("variance cap must be positive".into()));
                }
                let floor = var_floor.unwrap_or(DEFAULT_VAR_FLOOR_FRACTION * var_cap);
                if !(floor > 0.0 && floor < *var_cap) {
                    return Err(PragmaError::Config(
                        "variance floor must lie in (0, var_cap)".into(),
                    ));
                }
                Ok(())
            }
            ParametricFamily::TrinomialCounts { trials } => {
                if *trials == 0 {
                    return Err(PragmaError::Config("trial count must be >= 1".into()));
                }
                Ok(())
            }
            ParametricFamily::BivariateGaussianIso { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(PragmaError::Config("sigma must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Dimension of the parameter vector.
    pub fn theta_dim(&self) -> usize {
        match self {
            ParametricFamily::GaussianKnownVar { dim, .. } => *dim,
            ParametricFamily::Gaussian1dUnknownVar { .. } => 2,
            ParametricFamily::TrinomialCounts { .. } => 3,
            ParametricFamily::BivariateGaussianIso { .. } => 2,
        }
    }

    /// Dimension of a single outcome of `Z`.
    pub fn outcome_dim(&self) -> usize {
        match self {
            ParametricFamily::GaussianKnownVar { dim, .. } => *dim,
            ParametricFamily::Gaussian1dUnknownVar { .. } => 1,
            ParametricFamily::TrinomialCounts { .. } => 3,
            ParametricFamily::BivariateGaussianIso { .. } => 2,
        }
    }

    pub fn var_floor_value(&self) -> Option<f64> {
        match self {
            ParametricFamily::Gaussian1dUnknownVar { var_cap, var_floor } => {
                Some(var_floor.unwrap_or(DEFAULT_VAR_FLOOR_FRACTION * var_cap))
            }
            _ => None,
        }
    }

    /// Check a parameter against the parameter space and return its
    /// canonical form. Simplex points within `1e-9` of unit sum are
    /// renormalized; larger violations are domain errors.
    pub fn validate_theta(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.theta_dim() {
            return Err(PragmaError::Domain(format!(
                "parameter has length {}, expected {}",
                theta.len(),
                self.theta_dim()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(PragmaError::Domain("parameter has non-finite entries".into()));
        }
        match self {
            ParametricFamily::GaussianKnownVar { .. }
            | ParametricFamily::BivariateGaussianIso { .. } => Ok(theta.to_vec()),
            ParametricFamily::Gaussian1dUnknownVar { var_cap, .. } => {
                let floor = self.var_floor_value().expect("unknown-variance family");
                let v = theta[1];
                if v <= floor || v > *var_cap {
                    return Err(PragmaError::Domain(format!(
                        "variance {v} outside ({floor}, {var_cap}]"
                    )));
                }
                Ok(theta.to_vec())
            }
            ParametricFamily::TrinomialCounts { .. } => {
                let mut th = [theta[0], theta[1], theta[2]];
                for t in th.iter_mut() {
                    if *t < -SIMPLEX_SUM_TOL {
                        return Err(PragmaError::Domain(format!(
                            "simplex coordinate {t} is negative"
                        )));
                    }
                    if *t < 0.0 {
                        *t = 0.0;
                    }
                }
                let sum: f64 = th.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_INPUT_TOL {
                    return Err(PragmaError::Domain(format!(
                        "simplex coordinates sum to {sum}, outside 1 +- {SIMPLEX_INPUT_TOL}"
                    )));
                }
                let th: Vec<f64> = th.iter().map(|t| t / sum).collect();
                debug_assert!((th.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_SUM_TOL);
                Ok(th)
            }
        }
    }

    fn validate_outcome(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.outcome_dim() {
            return Err(PragmaError::Domain(format!(
                "outcome has length {}, expected {}",
                z.len(),
                self.outcome_dim()
            )));
        }
        match self {
            ParametricFamily::TrinomialCounts { trials } => {
                let mut total = 0u64;
                for &c in z {
                    if !(c.is_finite() && c >= 0.0 && (c - c.round()).abs() <= 1e-9) {
                        return Err(PragmaError::Domain(format!(
                            "trinomial outcome entry {c} is not a nonnegative integer"
                        )));
                    }
                    total += c.round() as u64;
                }
                if total != *trials {
                    return Err(PragmaError::Domain(format!(
                        "trinomial counts sum to {total}, expected {trials}"
                    )));
                }
                Ok(())
            }
            _ => {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(PragmaError::Domain("outcome has non-finite entries".into()));
                }
                Ok(())
            }
        }
    }

    /// Log density (or log pmf) of `Z` at `z` under `theta`.
    ///
    /// For the trinomial family a category with zero probability and a
    /// positive count yields `-inf`, not an error.
    pub fn log_density(&self, theta: &[f64], z: &[f64]) -> Result<f64> {
        let theta = self.validate_theta(theta)?;
        self.validate_outcome(z)?;
        Ok(match self {
            ParametricFamily::GaussianKnownVar { dim, cov } => {
                let l = linalg::cholesky(cov)?;
                let diff = linalg::sub(z, &theta);
                -0.5 * (*dim as f64) * (2.0 * std::f64::consts::PI).ln()
                    - 0.5 * linalg::log_det_from_chol(&l)
                    - 0.5 * linalg::quad_form_inv(&l, &diff)
            }
            ParametricFamily::Gaussian1dUnknownVar { .. } => {
                let (mu, v) = (theta[0], theta[1]);
                let d = z[0] - mu;
                -0.5 * (2.0 * std::f64::consts::PI * v).ln() - d * d / (2.0 * v)
            }
            ParametricFamily::TrinomialCounts { trials } => {
                let counts = [
                    z[0].round() as u64,
                    z[1].round() as u64,
                    z[2].round() as u64,
                ];
                let mut lp = special::ln_trinomial_coef(*trials, counts);
                for (c, t) in counts.iter().zip(theta.iter()) {
                    if *c > 0 {
                        if *t <= 0.0 {
                            return Ok(f64::NEG_INFINITY);
                        }
                        lp += (*c as f64) * t.ln();
                    }
                }
                lp
            }
            ParametricFamily::BivariateGaussianIso { sigma } => {
                let v = sigma * sigma;
                let r2 = (z[0] - theta[0]).powi(2) + (z[1] - theta[1]).powi(2);
                -(2.0 * std::f64::consts::PI * v).ln() - r2 / (2.0 * v)
            }
        })
    }

    /// E[Z | theta].
    pub fn predictive_mean(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let theta = self.validate_theta(theta)?;
        Ok(match self {
            ParametricFamily::GaussianKnownVar { .. } => theta,
            ParametricFamily::Gaussian1dUnknownVar { .. } => vec![theta[0]],
            ParametricFamily::TrinomialCounts { trials } => {
                theta.iter().map(|t| *trials as f64 * t).collect()
            }
            ParametricFamily::BivariateGaussianIso { .. } => theta,
        })
    }

    /// V[Z | theta].
    pub fn predictive_cov(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let theta = self.validate_theta(theta)?;
        Ok(match self {
            ParametricFamily::GaussianKnownVar { cov, .. } => cov.clone(),
            ParametricFamily::Gaussian1dUnknownVar { .. } => vec![vec![theta[1]]],
            ParametricFamily::TrinomialCounts { trials } => {
                let m = *trials as f64;
                let mut cov = vec![vec![0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        cov[i][j] = if i == j {
                            m * theta[i] * (1.0 - theta[i])
                        } else {
                            -m * theta[i] * theta[j]
                        };
                    }
                }
                cov
            }
            ParametricFamily::BivariateGaussianIso { sigma } => {
                let v = sigma * sigma;
                vec![vec![v, 0.0], vec![0.0, v]]
            }
        })
    }

    /// Draw `n` iid outcomes; deterministic given `seed`.
    pub fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(PragmaError::Config("sample size must be >= 1".into()));
        }
        let theta = self.validate_theta(theta)?;
        let mut gen = rng::derive_rng(seed, "family-sample", &[&theta]);
        let mut out = Vec::with_capacity(n);
        match self {
            ParametricFamily::GaussianKnownVar { dim, cov } => {
                let l = linalg::cholesky(cov)?;
                for _ in 0..n {
                    let xi: Vec<f64> = (0..*dim).map(|_| StandardNormal.sample(&mut gen)).collect();
                    let mut z = theta.clone();
                    for i in 0..*dim {
                        for k in 0..=i {
                            z[i] += l[i][k] * xi[k];
                        }
                    }
                    out.push(z);
                }
            }
            ParametricFamily::Gaussian1dUnknownVar { .. } => {
                let (mu, sd) = (theta[0], theta[1].sqrt());
                for _ in 0..n {
                    let xi: f64 = StandardNormal.sample(&mut gen);
                    out.push(vec![mu + sd * xi]);
                }
            }
            ParametricFamily::TrinomialCounts { trials } => {
                let c1 = theta[0];
                let c2 = theta[0] + theta[1];
                for _ in 0..n {
                    let mut counts = [0u64; 3];
                    for _ in 0..*trials {
                        let u: f64 = gen.random();
                        if u < c1 {
                            counts[0] += 1;
                        } else if u < c2 {
                            counts[1] += 1;
                        } else {
                            counts[2] += 1;
                        }
                    }
                    out.push(counts.iter().map(|c| *c as f64).collect());
                }
            }
            ParametricFamily::BivariateGaussianIso { sigma } => {
                for _ in 0..n {
                    let x: f64 = StandardNormal.sample(&mut gen);
                    let y: f64 = StandardNormal.sample(&mut gen);
                    out.push(vec![theta[0] + sigma * x, theta[1] + sigma * y]);
                }
            }
        }
        Ok(out)
    }

    /// Wrap into the m-fold iid experiment.
    pub fn replicate(&self, m: u32) -> Result<ReplicatedFamily> {
        ReplicatedFamily::new(self.clone(), m)
    }

    /// The trivial (m = 1) replication, for APIs that take the wrapper.
    pub fn replicated(&self) -> ReplicatedFamily {
        self.replicate(1).expect("m = 1 is always valid")
    }
}

/// The experiment `Z_m = (Z_1, ..., Z_m)` of m iid copies of a base family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicatedFamily {
    base: ParametricFamily,
    replication: u32,
}

impl ReplicatedFamily {
    pub fn new(base: ParametricFamily, replication: u32) -> Result<Self> {
        base.validate()?;
        if replication == 0 {
            return Err(PragmaError::Config("replication must be >= 1".into()));
        }
        Ok(ReplicatedFamily { base, replication })
    }

    pub fn base(&self) -> &ParametricFamily {
        &self.base
    }

    pub fn replication(&self) -> u32 {
        self.replication
    }

    /// Log density of the joint outcome: the sum of the base log densities.
    pub fn log_density(&self, theta: &[f64], outcomes: &[Vec<f64>]) -> Result<f64> {
        if outcomes.len() != self.replication as usize {
            return Err(PragmaError::Domain(format!(
                "replicated outcome has {} components, expected {}",
                outcomes.len(),
                self.replication
            )));
        }
        let mut total = 0.0;
        for z in outcomes {
            total += self.base.log_density(theta, z)?;
        }
        Ok(total)
    }

    /// Draw `n` joint outcomes (each a list of m base outcomes).
    pub fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
        let flat = self
            .base
            .sample(theta, n * self.replication as usize, seed)?;
        Ok(flat
            .chunks(self.replication as usize)
            .map(|c| c.to_vec())
            .collect())
    }

    /// A single-observation family equivalent to this replicated experiment
    /// for dissimilarity purposes, where the family admits one: the m-fold
    /// Gaussian average is `N(theta, cov/m)`, and m multinomials with t
    /// trials aggregate into one with `t * m` trials.
    pub fn sufficient_equivalent(&self) -> Option<ParametricFamily> {
        if self.replication == 1 {
            return Some(self.base.clone());
        }
        let m = self.replication as f64;
        match &self.base {
            ParametricFamily::GaussianKnownVar { dim, cov } => {
                let scaled = cov
                    .iter()
                    .map(|row| row.iter().map(|v| v / m).collect())
                    .collect();
                Some(ParametricFamily::GaussianKnownVar { dim: *dim, cov: scaled })
            }
            ParametricFamily::TrinomialCounts { trials } => Some(ParametricFamily::TrinomialCounts {
                trials: trials * self.replication as u64,
            }),
            ParametricFamily::BivariateGaussianIso { sigma } => {
                Some(ParametricFamily::BivariateGaussianIso { sigma: sigma / m.sqrt() })
            }
            ParametricFamily::Gaussian1dUnknownVar { .. } => None,
        }
    }

    /// Predictive mean of the aggregated experiment (the average for the
    /// Gaussian families, the summed counts for the trinomial).
    pub fn predictive_mean(&self, theta: &[f64]) -> Result<Vec<f64>> {
        match self.sufficient_equivalent() {
            Some(eff) => eff.predictive_mean(theta),
            None => self.base.predictive_mean(theta),
        }
    }

    /// Predictive covariance of the aggregated experiment.
    pub fn predictive_cov(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self.sufficient_equivalent() {
            Some(eff) => eff.predictive_cov(theta),
            None => {
                let m = self.replication as f64;
                let mut cov = self.base.predictive_cov(theta)?;
                for row in cov.iter_mut() {
                    for v in row.iter_mut() {
                        *v /= m;
                    }
                }
                Ok(cov)
            }
        }
    }
}

impl From<ParametricFamily> for ReplicatedFamily {
    fn from(base: ParametricFamily) -> Self {
        base.replicated()
    }
}
