//! Predictive dissimilarities between parameter values.
//!
//! `kl` is the relative entropy KL(P_star || P_ref), integrated under the
//! alternative `P_star` — the argument order is pinned and asymmetric.
//! `bp` is the relative excess of the quadratic prediction loss when
//! predicting with the alternative's mean instead of the reference's,
//! passed through a monotone map. `cd` is half the total variation
//! distance, equivalently the excess utility of the best two-point
//! classifier.
//!
//! Values can be produced by closed forms, adaptive quadrature, exact
//! enumeration (trinomial), or seeded Monte Carlo. Monte Carlo derives a
//! substream from `(seed, theta_ref, theta_star)`, so batch evaluation
//! order never changes results.

use serde::{Deserialize, Serialize};

use crate::error::{PragmaError, Result};
use crate::family::{ParametricFamily, ReplicatedFamily};
use crate::numeric::linalg::{self, Matrix};
use crate::numeric::{quad, rng, special};

/// Which dissimilarity to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DissimKind {
    #[serde(rename = "KL")]
    Kl,
    #[serde(rename = "BP")]
    Bp,
    #[serde(rename = "CD")]
    Cd,
}

impl std::fmt::Display for DissimKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DissimKind::Kl => "KL",
            DissimKind::Bp => "BP",
            DissimKind::Cd => "CD",
        })
    }
}

/// The quadratic-form matrix in the BP loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadFormSpec {
    #[default]
    Identity,
    /// S = V[Z | theta_ref]^{-1}, recomputed per reference point.
    InverseCov,
    /// A fixed symmetric positive definite matrix.
    Explicit(Vec<Vec<f64>>),
}

/// The monotone (increasing) map `g` applied to the BP loss ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneMap {
    #[default]
    Sqrt,
    Identity,
    /// Phi(sqrt(x)/2) - 1/2, which puts BP on the classification-distance
    /// scale for equal-variance Gaussian families.
    GaussianCd,
}

impl MonotoneMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::Sqrt => x.sqrt(),
            MonotoneMap::Identity => x,
            MonotoneMap::GaussianCd => {
                if x.is_infinite() {
                    0.5
                } else {
                    special::normal_cdf(0.5 * x.sqrt()) - 0.5
                }
            }
        }
    }
}

/// Evaluation backend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Backend {
    #[default]
    ClosedForm,
    Quadrature {
        #[serde(default = "default_abs_tol")]
        abs_tol: f64,
    },
    #[serde(alias = "exact")]
    ExactEnumeration,
    MonteCarlo {
        n: u64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_abs_tol() -> f64 {
    1e-8
}

/// Minimum Monte Carlo sample size.
pub const MONTE_CARLO_MIN_N: u64 = 10_000;
/// Quadrature windows extend this many combined standard deviations
/// around the predictive means.
pub const QUAD_SIGMA_SPAN: f64 = 12.0;

/// Full dissimilarity configuration. The JSON shape is
/// `{"kind":"BP","S":"identity","g":"sqrt","backend":{"type":"exact"}}`;
/// `S` and `g` only matter for BP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissimilaritySpec {
    pub kind: DissimKind,
    #[serde(rename = "S", default)]
    pub s: QuadFormSpec,
    #[serde(default)]
    pub g: MonotoneMap,
    #[serde(default)]
    pub backend: Backend,
}

impl DissimilaritySpec {
    pub fn new(kind: DissimKind) -> Self {
        DissimilaritySpec {
            kind,
            s: QuadFormSpec::default(),
            g: MonotoneMap::default(),
            backend: Backend::default(),
        }
    }

    pub fn kl() -> Self {
        Self::new(DissimKind::Kl)
    }

    pub fn bp(s: QuadFormSpec, g: MonotoneMap) -> Self {
        DissimilaritySpec {
            kind: DissimKind::Bp,
            s,
            g,
            backend: Backend::default(),
        }
    }

    pub fn cd() -> Self {
        Self::new(DissimKind::Cd)
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let QuadFormSpec::Explicit(s) = &self.s {
            if !linalg::is_symmetric(s, 1e-12) {
                return Err(PragmaError::Config("explicit S must be symmetric".into()));
            }
            linalg::cholesky(s)
                .map_err(|_| PragmaError::Config("explicit S must be positive definite".into()))?;
        }
        match self.backend {
            Backend::Quadrature { abs_tol } if !(abs_tol > 0.0) => {
                Err(PragmaError::Config("quadrature abs_tol must be positive".into()))
            }
            Backend::MonteCarlo { n, .. } if n < MONTE_CARLO_MIN_N => Err(PragmaError::Config(
                format!("monte carlo n must be >= {MONTE_CARLO_MIN_N}, got {n}"),
            )),
            _ => Ok(()),
        }
    }

    /// Swap a closed-form backend for exact enumeration where the family is
    /// discrete and no closed form exists (trinomial CD). Used by config
    /// front ends; the library itself stays strict.
    pub fn resolved_for(mut self, family: &ParametricFamily) -> Self {
        if self.kind == DissimKind::Cd
            && self.backend == Backend::ClosedForm
            && matches!(family, ParametricFamily::TrinomialCounts { .. })
        {
            self.backend = Backend::ExactEnumeration;
        }
        self
    }
}

/// A dissimilarity value, with a standard error when it came from
/// Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: Option<f64>,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate { value, std_err: None }
    }
}

/// Which of the two hypotheses the classifier picks for an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChosenParam {
    Reference,
    Alternative,
}

/// KL dissimilarity KL(P_star || P_ref).
pub fn kl(
    family: &ReplicatedFamily,
    theta_ref: &[f64],
    theta_star: &[f64],
    spec: &DissimilaritySpec,
) -> Result<Estimate> {
    let spec = DissimilaritySpec { kind: DissimKind::Kl, ..spec.clone() };
    evaluate(&spec, family, theta_ref, theta_star)
}

/// Best-prediction dissimilarity under the configured quadratic form.
pub fn bp(
    family: &ReplicatedFamily,
    theta_ref: &[f64],
    theta_star: &[f64],
    spec: &DissimilaritySpec,
) -> Result<Estimate> {
    let spec = DissimilaritySpec { kind: DissimKind::Bp, ..spec.clone() };
    evaluate(&spec, family, theta_ref, theta_star)
}

/// Classification distance (half the total variation), in [0, 1/2].
pub fn cd(
    family: &ReplicatedFamily,
    theta_ref: &[f64],
    theta_star: &[f64],
    spec: &DissimilaritySpec,
) -> Result<Estimate> {
    let spec = DissimilaritySpec { kind: DissimKind::Cd, ..spec.clone() };
    evaluate(&spec, family, theta_ref, theta_star)
}

/// Evaluate `spec.kind` for one pair.
pub fn evaluate(
    spec: &DissimilaritySpec,
    family: &ReplicatedFamily,
    theta_ref: &[f64],
    theta_star: &[f64],
) -> Result<Estimate> {
    let eval = PairEvaluator::new(spec, family)?;
    let r = eval.prepare(theta_ref)?;
    let c = eval.prepare(theta_star)?;
    eval.eval_full(&r, &c)
}

/// Maximum-likelihood two-point classifier; ties go to the reference.
pub fn classify(
    family: &ReplicatedFamily,
    theta_ref: &[f64],
    theta_star: &[f64],
    outcomes: &[Vec<f64>],
) -> Result<ChosenParam> {
    let lp_ref = family.log_density(theta_ref, outcomes)?;
    let lp_star = family.log_density(theta_star, outcomes)?;
    Ok(if lp_star > lp_ref {
        ChosenParam::Alternative
    } else {
        ChosenParam::Reference
    })
}

// ---------------------------------------------------------------------------
// Pair evaluator: prepared per-point data for fast grid sweeps
// ---------------------------------------------------------------------------

/// Enumeration of all trinomial outcomes for a fixed trial count.
struct EnumTable {
    outcomes: Vec<[u64; 3]>,
    ln_coef: Vec<f64>,
}

impl EnumTable {
    fn new(trials: u64) -> Self {
        let n = trials;
        let mut outcomes = Vec::new();
        let mut ln_coef = Vec::new();
        for i in 0..=n {
            for j in 0..=(n - i) {
                let z = [i, j, n - i - j];
                ln_coef.push(special::ln_trinomial_coef(n, z));
                outcomes.push(z);
            }
        }
        EnumTable { outcomes, ln_coef }
    }

    fn log_pmf_row(&self, theta: &[f64]) -> Vec<f64> {
        let ln_t: Vec<f64> = theta
            .iter()
            .map(|t| if *t > 0.0 { t.ln() } else { f64::NEG_INFINITY })
            .collect();
        self.outcomes
            .iter()
            .zip(&self.ln_coef)
            .map(|(z, lc)| {
                let mut lp = *lc;
                for (c, lt) in z.iter().zip(&ln_t) {
                    if *c > 0 {
                        if lt.is_infinite() {
                            return f64::NEG_INFINITY;
                        }
                        lp += *c as f64 * lt;
                    }
                }
                lp
            })
            .collect()
    }

    fn pmf_row(&self, theta: &[f64]) -> Vec<f64> {
        self.log_pmf_row(theta).iter().map(|lp| lp.exp()).collect()
    }
}

enum PrepData {
    Theta,
    /// Per-coordinate logs for the closed-form trinomial KL.
    ThetaLogs { ln: Vec<f64> },
    /// BP with a fixed quadratic form: aggregated predictive mean and the
    /// loss denominator tr(S V[Z|theta]).
    BpMoments { mean: Vec<f64>, denom: f64 },
    /// BP with S = inverse predictive covariance: `chol` is None when the
    /// covariance at this point is singular, which is an error only if the
    /// point is used as the reference.
    BpMeanChol { mean: Vec<f64>, chol: Option<Matrix> },
    /// Trinomial pmf row over the enumeration table.
    Pmf { p: Vec<f64> },
    /// Pmf row plus logs, for enumerated KL.
    PmfLogs { p: Vec<f64>, lp: Vec<f64> },
}

/// A prepared parameter point, ready for repeated pairwise evaluation.
pub struct PreparedPoint {
    theta: Vec<f64>,
    data: PrepData,
}

impl PreparedPoint {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// Evaluates one dissimilarity for many (reference, candidate) pairs,
/// amortizing per-point work: pmf rows for enumeration, predictive moments
/// for BP, Cholesky factors for Gaussian closed forms.
pub struct PairEvaluator {
    kind: DissimKind,
    backend: Backend,
    s: QuadFormSpec,
    g: MonotoneMap,
    family: ReplicatedFamily,
    effective: Option<ParametricFamily>,
    enumeration: Option<EnumTable>,
    /// Cholesky of the effective covariance for Gaussian closed forms.
    chol_eff_cov: Option<Matrix>,
    /// Cholesky of the base covariance, for the replication-exact KL.
    chol_base_cov: Option<Matrix>,
}

impl PairEvaluator {
    pub fn new(spec: &DissimilaritySpec, family: &ReplicatedFamily) -> Result<Self> {
        spec.validate()?;
        let effective = family.sufficient_equivalent();

        let enumeration = match (&spec.backend, &effective) {
            (Backend::ExactEnumeration, Some(ParametricFamily::TrinomialCounts { trials })) => {
                Some(EnumTable::new(*trials))
            }
            (Backend::ExactEnumeration, _) => {
                return Err(PragmaError::Unsupported(
                    "exact enumeration applies to the trinomial family only".into(),
                ))
            }
            _ => None,
        };

        let chol_eff_cov = match &effective {
            Some(ParametricFamily::GaussianKnownVar { cov, .. }) => Some(linalg::cholesky(cov)?),
            _ => None,
        };
        let chol_base_cov = match family.base() {
            ParametricFamily::GaussianKnownVar { cov, .. } => Some(linalg::cholesky(cov)?),
            _ => None,
        };

        Ok(PairEvaluator {
            kind: spec.kind,
            backend: spec.backend,
            s: spec.s.clone(),
            g: spec.g,
            family: family.clone(),
            effective,
            enumeration,
            chol_eff_cov,
            chol_base_cov,
        })
    }

    pub fn prepare(&self, theta: &[f64]) -> Result<PreparedPoint> {
        let theta = self.family.base().validate_theta(theta)?;
        let data = match (self.kind, &self.backend) {
            (DissimKind::Kl, Backend::ClosedForm) => match self.family.base() {
                ParametricFamily::TrinomialCounts { .. } => PrepData::ThetaLogs {
                    ln: theta
                        .iter()
                        .map(|t| if *t > 0.0 { t.ln() } else { f64::NEG_INFINITY })
                        .collect(),
                },
                _ => PrepData::Theta,
            },
            (DissimKind::Kl, Backend::ExactEnumeration) => {
                let table = self.enumeration.as_ref().expect("enumeration table");
                let lp = table.log_pmf_row(&theta);
                let p = lp.iter().map(|l| l.exp()).collect();
                PrepData::PmfLogs { p, lp }
            }
            (DissimKind::Cd, Backend::ExactEnumeration) => {
                let table = self.enumeration.as_ref().expect("enumeration table");
                PrepData::Pmf { p: table.pmf_row(&theta) }
            }
            (DissimKind::Bp, backend) => self.prepare_bp(&theta, backend)?,
            _ => PrepData::Theta,
        };
        Ok(PreparedPoint { theta, data })
    }

    fn prepare_bp(&self, theta: &[f64], backend: &Backend) -> Result<PrepData> {
        let (mean, cov) = match backend {
            Backend::ClosedForm => (
                self.family.predictive_mean(theta)?,
                self.family.predictive_cov(theta)?,
            ),
            Backend::ExactEnumeration => {
                let table = self.enumeration.as_ref().expect("enumeration table");
                moments_by_enumeration(table, theta)
            }
            Backend::Quadrature { abs_tol } => self.moments_by_quadrature(theta, *abs_tol)?,
            Backend::MonteCarlo { n, seed } => self.moments_by_sampling(theta, *n, *seed)?,
        };
        Ok(match &self.s {
            QuadFormSpec::Identity => PrepData::BpMoments {
                mean,
                denom: linalg::trace(&cov),
            },
            QuadFormSpec::Explicit(s) => PrepData::BpMoments {
                mean,
                denom: linalg::trace_product(s, &cov),
            },
            QuadFormSpec::InverseCov => PrepData::BpMeanChol {
                mean,
                chol: linalg::cholesky(&cov).ok(),
            },
        })
    }

    /// Predictive mean and covariance of the aggregated experiment obtained
    /// by integrating the base density, for the quadrature BP route.
    fn moments_by_quadrature(&self, theta: &[f64], abs_tol: f64) -> Result<(Vec<f64>, Matrix)> {
        let base = self.family.base();
        let m = self.family.replication() as f64;
        match base.outcome_dim() {
            1 => {
                let (lo, hi) = self.window_1d(&[theta, theta])?;
                let pdf = |z: f64| base.log_density(theta, &[z]).map(f64::exp).unwrap_or(0.0);
                let (mean, _) = quad::adaptive(|z| z * pdf(z), lo, hi, abs_tol)?;
                let (m2, _) = quad::adaptive(|z| (z - mean) * (z - mean) * pdf(z), lo, hi, abs_tol)?;
                Ok((vec![mean], vec![vec![m2 / m]]))
            }
            2 => {
                let (bx, by) = self.window_2d(&[theta, theta])?;
                let pdf =
                    |x: f64, y: f64| base.log_density(theta, &[x, y]).map(f64::exp).unwrap_or(0.0);
                let (mx, _) = quad::adaptive_2d(|x, y| x * pdf(x, y), bx, by, abs_tol)?;
                let (my, _) = quad::adaptive_2d(|x, y| y * pdf(x, y), bx, by, abs_tol)?;
                let (vxx, _) =
                    quad::adaptive_2d(|x, y| (x - mx) * (x - mx) * pdf(x, y), bx, by, abs_tol)?;
                let (vyy, _) =
                    quad::adaptive_2d(|x, y| (y - my) * (y - my) * pdf(x, y), bx, by, abs_tol)?;
                let (vxy, _) =
                    quad::adaptive_2d(|x, y| (x - mx) * (y - my) * pdf(x, y), bx, by, abs_tol)?;
                Ok((
                    vec![mx, my],
                    vec![vec![vxx / m, vxy / m], vec![vxy / m, vyy / m]],
                ))
            }
            d => Err(PragmaError::Unsupported(format!(
                "quadrature moments not available in dimension {d}"
            ))),
        }
    }

    fn moments_by_sampling(&self, theta: &[f64], n: u64, seed: u64) -> Result<(Vec<f64>, Matrix)> {
        let eff = self
            .effective
            .clone()
            .unwrap_or_else(|| self.family.base().clone());
        let scale = if self.effective.is_some() {
            1.0
        } else {
            self.family.replication() as f64
        };
        let draws = eff.sample(theta, n as usize, seed)?;
        let d = eff.outcome_dim();
        let nf = draws.len() as f64;
        let mut mean = vec![0.0; d];
        for z in &draws {
            for i in 0..d {
                mean[i] += z[i] / nf;
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for z in &draws {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (z[i] - mean[i]) * (z[j] - mean[j]) / nf;
                }
            }
        }
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
        Ok((mean, cov))
    }

    /// Evaluate the dissimilarity from `reference` to `candidate`.
    pub fn eval(&self, reference: &PreparedPoint, candidate: &PreparedPoint) -> Result<f64> {
        Ok(self.eval_full(reference, candidate)?.value)
    }

    /// As `eval`, additionally reporting the Monte Carlo standard error.
    pub fn eval_full(&self, reference: &PreparedPoint, candidate: &PreparedPoint) -> Result<Estimate> {
        match self.kind {
            DissimKind::Kl => self.eval_kl(reference, candidate),
            DissimKind::Bp => self.eval_bp(reference, candidate).map(Estimate::exact),
            DissimKind::Cd => self.eval_cd(reference, candidate),
        }
    }

    // -- KL ---------------------------------------------------------------

    fn eval_kl(&self, r: &PreparedPoint, c: &PreparedPoint) -> Result<Estimate> {
        match &self.backend {
            Backend::ClosedForm => self.kl_closed(r, c).map(Estimate::exact),
            Backend::ExactEnumeration => {
                let (PrepData::PmfLogs { p: _, lp: lp_r }, PrepData::PmfLogs { p: p_c, lp: lp_c }) =
                    (&r.data, &c.data)
                else {
                    unreachable!("enumerated KL points carry pmf logs")
                };
                let mut total = 0.0;
                for ((ps, lps), lpr) in p_c.iter().zip(lp_c).zip(lp_r) {
                    if *ps > 0.0 {
                        if lpr.is_infinite() {
                            return Ok(Estimate::exact(f64::INFINITY));
                        }
                        total += ps * (lps - lpr);
                    }
                }
                Ok(Estimate::exact(total.max(0.0)))
            }
            Backend::Quadrature { abs_tol } => {
                let m = self.family.replication() as f64;
                let v = self.kl_quadrature(&r.theta, &c.theta, *abs_tol)?;
                Ok(Estimate::exact(m * v))
            }
            Backend::MonteCarlo { n, seed } => self.kl_monte_carlo(&r.theta, &c.theta, *n, *seed),
        }
    }

    /// Closed-form KL of the base experiment, multiplied by the
    /// replication count (the iid factorization is exact, and computing it
    /// as a product keeps grid masks at replication m bit-identical to
    /// masks at m = 1 with epsilon / m).
    fn kl_closed(&self, r: &PreparedPoint, c: &PreparedPoint) -> Result<f64> {
        let m = self.family.replication() as f64;
        let base = match self.family.base() {
            ParametricFamily::GaussianKnownVar { .. } => {
                let chol = self.chol_base_cov.as_ref().expect("base covariance factor");
                let diff = linalg::sub(&r.theta, &c.theta);
                0.5 * linalg::quad_form_inv(chol, &diff)
            }
            ParametricFamily::Gaussian1dUnknownVar { .. } => {
                let (mu0, v0) = (r.theta[0], r.theta[1]);
                let (mu1, v1) = (c.theta[0], c.theta[1]);
                0.5 * (v0 / v1).ln() + (v1 + (mu1 - mu0).powi(2)) / (2.0 * v0) - 0.5
            }
            ParametricFamily::TrinomialCounts { trials } => {
                let (PrepData::ThetaLogs { ln: ln_r }, PrepData::ThetaLogs { ln: ln_c }) =
                    (&r.data, &c.data)
                else {
                    unreachable!("closed trinomial KL points carry logs")
                };
                let mut s = 0.0;
                for i in 0..3 {
                    let ts = c.theta[i];
                    if ts > 0.0 {
                        if ln_r[i].is_infinite() {
                            return Ok(f64::INFINITY);
                        }
                        s += ts * (ln_c[i] - ln_r[i]);
                    }
                }
                (*trials as f64) * s.max(0.0)
            }
            ParametricFamily::BivariateGaussianIso { sigma } => {
                let d2 = linalg::norm_sq(&linalg::sub(&r.theta, &c.theta));
                d2 / (2.0 * sigma * sigma)
            }
        };
        Ok(m * base)
    }

    fn kl_quadrature(&self, theta_r: &[f64], theta_c: &[f64], abs_tol: f64) -> Result<f64> {
        let base = self.family.base();
        match base.outcome_dim() {
            1 => {
                let (lo, hi) = self.window_1d(&[theta_r, theta_c])?;
                let f = |z: f64| {
                    let lp_c = base.log_density(theta_c, &[z]).unwrap_or(f64::NEG_INFINITY);
                    let lp_r = base.log_density(theta_r, &[z]).unwrap_or(f64::NEG_INFINITY);
                    if lp_c == f64::NEG_INFINITY {
                        0.0
                    } else {
                        lp_c.exp() * (lp_c - lp_r)
                    }
                };
                let (v, _) = quad::adaptive(f, lo, hi, abs_tol)?;
                Ok(v.max(0.0))
            }
            2 => {
                let (bx, by) = self.window_2d(&[theta_r, theta_c])?;
                let f = |x: f64, y: f64| {
                    let lp_c = base.log_density(theta_c, &[x, y]).unwrap_or(f64::NEG_INFINITY);
                    let lp_r = base.log_density(theta_r, &[x, y]).unwrap_or(f64::NEG_INFINITY);
                    if lp_c == f64::NEG_INFINITY {
                        0.0
                    } else {
                        lp_c.exp() * (lp_c - lp_r)
                    }
                };
                let (v, _) = quad::adaptive_2d(f, bx, by, abs_tol)?;
                Ok(v.max(0.0))
            }
            _ => Err(PragmaError::Unsupported(
                "KL quadrature applies to continuous families of dimension <= 2; \
                 use exact_enumeration for the trinomial"
                    .into(),
            )),
        }
    }

    fn kl_monte_carlo(&self, theta_r: &[f64], theta_c: &[f64], n: u64, seed: u64) -> Result<Estimate> {
        let mut gen = rng::derive_rng(seed, "kl-mc", &[theta_r, theta_c]);
        use rand::Rng;
        let draw_seed: u64 = gen.random();
        let draws = self.family.sample(theta_c, n as usize, draw_seed)?;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for zs in &draws {
            let lp_c = self.family.log_density(theta_c, zs)?;
            let lp_r = self.family.log_density(theta_r, zs)?;
            if lp_r == f64::NEG_INFINITY && lp_c > f64::NEG_INFINITY {
                return Ok(Estimate::exact(f64::INFINITY));
            }
            let t = lp_c - lp_r;
            sum += t;
            sum_sq += t * t;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum_sq / nf - mean * mean).max(0.0);
        Ok(Estimate {
            value: mean,
            std_err: Some((var / nf).sqrt()),
        })
    }

    // -- BP ---------------------------------------------------------------

    fn eval_bp(&self, r: &PreparedPoint, c: &PreparedPoint) -> Result<f64> {
        let ratio = match (&r.data, &c.data) {
            (
                PrepData::BpMoments { mean: mean_r, denom },
                PrepData::BpMoments { mean: mean_c, .. },
            ) => {
                let diff = linalg::sub(mean_r, mean_c);
                let num = match &self.s {
                    QuadFormSpec::Identity => linalg::norm_sq(&diff),
                    QuadFormSpec::Explicit(s) => linalg::quad_form(s, &diff),
                    QuadFormSpec::InverseCov => unreachable!("inverse-cov uses BpMeanChol"),
                };
                if *denom > 0.0 {
                    num / denom
                } else if num == 0.0 {
                    // A reference with zero predictive variance predicts
                    // itself exactly.
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (
                PrepData::BpMeanChol { mean: mean_r, chol },
                PrepData::BpMeanChol { mean: mean_c, .. },
            ) => {
                let chol = chol.as_ref().ok_or_else(|| {
                    PragmaError::numeric(format!(
                        "singular predictive covariance at reference theta = {:?}",
                        r.theta
                    ))
                })?;
                let diff = linalg::sub(mean_r, mean_c);
                linalg::quad_form_inv(chol, &diff) / self.family.base().outcome_dim() as f64
            }
            _ => unreachable!("BP points carry moments"),
        };
        Ok(self.g.apply(ratio))
    }

    // -- CD ---------------------------------------------------------------

    fn eval_cd(&self, r: &PreparedPoint, c: &PreparedPoint) -> Result<Estimate> {
        match &self.backend {
            Backend::ClosedForm => self.cd_closed(&r.theta, &c.theta).map(Estimate::exact),
            Backend::ExactEnumeration => {
                let (PrepData::Pmf { p: p_r }, PrepData::Pmf { p: p_c }) = (&r.data, &c.data)
                else {
                    unreachable!("enumerated CD points carry pmf rows")
                };
                let l1: f64 = p_r.iter().zip(p_c).map(|(a, b)| (a - b).abs()).sum();
                Ok(Estimate::exact(0.25 * l1))
            }
            Backend::Quadrature { abs_tol } => {
                self.cd_quadrature(&r.theta, &c.theta, *abs_tol).map(Estimate::exact)
            }
            Backend::MonteCarlo { n, seed } => self.cd_monte_carlo(&r.theta, &c.theta, *n, *seed),
        }
    }

    fn cd_closed(&self, theta_r: &[f64], theta_c: &[f64]) -> Result<f64> {
        let eff = self.effective.clone();
        match eff {
            Some(ParametricFamily::GaussianKnownVar { .. }) => {
                let chol = self.chol_eff_cov.as_ref().expect("factor for gaussian closed form");
                let diff = linalg::sub(theta_r, theta_c);
                let mahal = linalg::quad_form_inv(chol, &diff).sqrt();
                Ok(special::normal_cdf(0.5 * mahal) - 0.5)
            }
            Some(ParametricFamily::BivariateGaussianIso { sigma }) => {
                let dist = linalg::norm_sq(&linalg::sub(theta_r, theta_c)).sqrt();
                Ok(special::normal_cdf(dist / (2.0 * sigma)) - 0.5)
            }
            Some(ParametricFamily::Gaussian1dUnknownVar { .. }) => {
                Ok(cd_two_normals(theta_r[0], theta_r[1], theta_c[0], theta_c[1]))
            }
            Some(ParametricFamily::TrinomialCounts { .. }) => Err(PragmaError::Unsupported(
                "no closed form for the trinomial classification distance; use exact_enumeration"
                    .into(),
            )),
            // TODO: reduce to the sufficient pair (mean, sum of squares)
            // and integrate its 2-D joint density instead of sampling
            None => Err(PragmaError::Unsupported(
                "no closed-form classification distance for the replicated unknown-variance \
                 family; use the monte_carlo backend"
                    .into(),
            )),
        }
    }

    fn cd_quadrature(&self, theta_r: &[f64], theta_c: &[f64], abs_tol: f64) -> Result<f64> {
        if self.family.replication() > 1 && self.effective.is_none() {
            return Err(PragmaError::Unsupported(
                "CD quadrature for the replicated unknown-variance family is not available; \
                 use the monte_carlo backend"
                    .into(),
            ));
        }
        let fam = self.effective.clone().unwrap_or_else(|| self.family.base().clone());
        match fam.outcome_dim() {
            1 => {
                let (lo, hi) = self.window_1d(&[theta_r, theta_c])?;
                let f = |z: f64| {
                    let p_r = fam.log_density(theta_r, &[z]).map(f64::exp).unwrap_or(0.0);
                    let p_c = fam.log_density(theta_c, &[z]).map(f64::exp).unwrap_or(0.0);
                    (p_r - p_c).abs()
                };
                let (v, _) = quad::adaptive(f, lo, hi, abs_tol)?;
                Ok(0.25 * v)
            }
            2 => {
                let (bx, by) = self.window_2d(&[theta_r, theta_c])?;
                let f = |x: f64, y: f64| {
                    let p_r = fam.log_density(theta_r, &[x, y]).map(f64::exp).unwrap_or(0.0);
                    let p_c = fam.log_density(theta_c, &[x, y]).map(f64::exp).unwrap_or(0.0);
                    (p_r - p_c).abs()
                };
                let (v, _) = quad::adaptive_2d(f, bx, by, abs_tol)?;
                Ok(0.25 * v)
            }
            _ => Err(PragmaError::Unsupported(
                "CD quadrature applies to continuous families of dimension <= 2; \
                 use exact_enumeration for the trinomial"
                    .into(),
            )),
        }
    }

    fn cd_monte_carlo(&self, theta_r: &[f64], theta_c: &[f64], n: u64, seed: u64) -> Result<Estimate> {
        use rand::Rng;
        let mut gen = rng::derive_rng(seed, "cd-mc", &[theta_r, theta_c]);
        let seed_r: u64 = gen.random();
        let seed_c: u64 = gen.random();
        let half = (n / 2) as usize;
        let draws_r = self.family.sample(theta_r, half, seed_r)?;
        let draws_c = self.family.sample(theta_c, n as usize - half, seed_c)?;

        let ln_half = 0.5f64.ln();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for zs in draws_r.iter().chain(draws_c.iter()) {
            let lp_r = self.family.log_density(theta_r, zs)?;
            let lp_c = self.family.log_density(theta_c, zs)?;
            // mixture density q = (p_r + p_c) / 2, in log space
            let hi = lp_r.max(lp_c);
            let lq = ln_half + hi + ((lp_r - hi).exp() + (lp_c - hi).exp()).ln();
            let w = ((lp_r - lq).exp() - (lp_c - lq).exp()).abs();
            sum += w;
            sum_sq += w * w;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum_sq / nf - mean * mean).max(0.0);
        Ok(Estimate {
            value: 0.25 * mean,
            std_err: Some(0.25 * (var / nf).sqrt()),
        })
    }

    // -- integration windows ------------------------------------------------

    fn window_1d(&self, thetas: &[&[f64]]) -> Result<(f64, f64)> {
        let base = self.family.base();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for th in thetas {
            let mean = base.predictive_mean(th)?[0];
            let sd = base.predictive_cov(th)?[0][0].sqrt();
            lo = lo.min(mean - QUAD_SIGMA_SPAN * sd);
            hi = hi.max(mean + QUAD_SIGMA_SPAN * sd);
        }
        Ok((lo, hi))
    }

    fn window_2d(&self, thetas: &[&[f64]]) -> Result<((f64, f64), (f64, f64))> {
        let base = self.family.base();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for th in thetas {
            let mean = base.predictive_mean(th)?;
            let cov = base.predictive_cov(th)?;
            for i in 0..2 {
                let sd = cov[i][i].sqrt();
                lo[i] = lo[i].min(mean[i] - QUAD_SIGMA_SPAN * sd);
                hi[i] = hi[i].max(mean[i] + QUAD_SIGMA_SPAN * sd);
            }
        }
        Ok(((lo[0], hi[0]), (lo[1], hi[1])))
    }
}

fn moments_by_enumeration(table: &EnumTable, theta: &[f64]) -> (Vec<f64>, Matrix) {
    let p = table.pmf_row(theta);
    let mut mean = vec![0.0; 3];
    for (z, pz) in table.outcomes.iter().zip(&p) {
        for i in 0..3 {
            mean[i] += z[i] as f64 * pz;
        }
    }
    let mut cov = vec![vec![0.0; 3]; 3];
    for (z, pz) in table.outcomes.iter().zip(&p) {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (z[i] as f64 - mean[i]) * (z[j] as f64 - mean[j]) * pz;
            }
        }
    }
    (mean, cov)
}

/// Classification distance between N(mu0, v0) and N(mu1, v1) via the
/// density crossing points.
fn cd_two_normals(mu0: f64, v0: f64, mu1: f64, v1: f64) -> f64 {
    if mu0 == mu1 && v0 == v1 {
        return 0.0;
    }
    let (s0, s1) = (v0.sqrt(), v1.sqrt());
    if (v0 - v1).abs() <= 1e-14 * v0.max(v1) {
        return special::normal_cdf((mu0 - mu1).abs() / (2.0 * s0)) - 0.5;
    }
    let a = 0.5 * (1.0 / v1 - 1.0 / v0);
    let b = mu0 / v0 - mu1 / v1;
    let c = mu1 * mu1 / (2.0 * v1) - mu0 * mu0 / (2.0 * v0) + 0.5 * (v1 / v0).ln();
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let sq = disc.sqrt();
    let r1 = (-b - sq) / (2.0 * a);
    let r2 = (-b + sq) / (2.0 * a);
    let (z1, z2) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    let mass0 = special::normal_cdf((z2 - mu0) / s0) - special::normal_cdf((z1 - mu0) / s0);
    let mass1 = special::normal_cdf((z2 - mu1) / s1) - special::normal_cdf((z1 - mu1) / s1);
    0.5 * (mass0 - mass1).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ParametricFamily;

    fn gauss1(sigma0: f64) -> ReplicatedFamily {
        ParametricFamily::gaussian_1d(sigma0).replicated()
    }

    fn tri(trials: u64) -> ReplicatedFamily {
        ParametricFamily::TrinomialCounts { trials }.replicated()
    }

    #[test]
    fn kl_gaussian_closed_form() {
        let v = kl(&gauss1(1.0), &[0.0], &[1.0], &DissimilaritySpec::kl()).unwrap();
        assert!((v.value - 0.5).abs() < 1e-15);
        let same = kl(&gauss1(1.0), &[0.7], &[0.7], &DissimilaritySpec::kl()).unwrap();
        assert_eq!(same.value, 0.0);
    }

    #[test]
    fn kl_argument_order_is_pinned() {
        // Unknown-variance pair where KL(P_star || P_ref) differs from the
        // swapped order: the first argument is the reference.
        let fam = ParametricFamily::Gaussian1dUnknownVar { var_cap: 4.0, var_floor: None }
            .replicated();
        let spec = DissimilaritySpec::kl();
        let t_ref = [0.0, 1.0];
        let t_star = [0.5, 2.0];
        let forward = kl(&fam, &t_ref, &t_star, &spec).unwrap().value;
        let (mu0, v0, mu1, v1) = (0.0f64, 1.0f64, 0.5f64, 2.0f64);
        let expect = 0.5 * (v0 / v1).ln() + (v1 + (mu1 - mu0).powi(2)) / (2.0 * v0) - 0.5;
        assert!((forward - expect).abs() < 1e-14, "{forward} vs {expect}");
        let backward = kl(&fam, &t_star, &t_ref, &spec).unwrap().value;
        assert!((forward - backward).abs() > 1e-3);
    }

    #[test]
    fn kl_trinomial_enumeration_matches_closed_form() {
        let fam = tri(20);
        let closed = kl(&fam, &[0.25, 0.5, 0.25], &[0.3, 0.5, 0.2], &DissimilaritySpec::kl())
            .unwrap()
            .value;
        let spec = DissimilaritySpec::kl().with_backend(Backend::ExactEnumeration);
        let enumerated = kl(&fam, &[0.25, 0.5, 0.25], &[0.3, 0.5, 0.2], &spec).unwrap().value;
        assert!((closed - enumerated).abs() < 1e-10, "{closed} vs {enumerated}");
    }

    #[test]
    fn kl_boundary_simplex_point_is_infinite() {
        let fam = tri(20);
        let v = kl(&fam, &[0.5, 0.5, 0.0], &[0.4, 0.5, 0.1], &DissimilaritySpec::kl()).unwrap();
        assert_eq!(v.value, f64::INFINITY);
        // and the reverse direction is finite: the alternative never puts
        // mass where the reference has none
        let v = kl(&fam, &[0.4, 0.5, 0.1], &[0.5, 0.5, 0.0], &DissimilaritySpec::kl()).unwrap();
        assert!(v.value.is_finite());
    }

    #[test]
    fn kl_quadrature_matches_closed_form() {
        let fam = gauss1(1.3);
        let spec = DissimilaritySpec::kl().with_backend(Backend::Quadrature { abs_tol: 1e-10 });
        let q = kl(&fam, &[-0.4], &[0.9], &spec).unwrap().value;
        let c = kl(&fam, &[-0.4], &[0.9], &DissimilaritySpec::kl()).unwrap().value;
        assert!((q - c).abs() < 1e-8, "{q} vs {c}");
    }

    #[test]
    fn kl_replication_multiplies() {
        let base = ParametricFamily::gaussian_1d(1.0);
        let spec = DissimilaritySpec::kl();
        let k1 = kl(&base.replicated(), &[0.0], &[0.7], &spec).unwrap().value;
        let k5 = kl(&base.replicate(5).unwrap(), &[0.0], &[0.7], &spec).unwrap().value;
        assert_eq!(k5, 5.0 * k1);
    }

    #[test]
    fn bp_gaussian_matches_absolute_difference_over_sigma() {
        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt);
        let v = bp(&gauss1(2.0), &[1.0], &[0.2], &spec).unwrap().value;
        assert!((v - 0.4).abs() < 1e-14);
        let zero = bp(&gauss1(2.0), &[1.0], &[1.0], &spec).unwrap().value;
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn bp_inverse_cov_identity_relation_to_kl() {
        // With S = Sigma0^{-1} and g = identity, BP = 2 d^{-1} KL.
        let cov = vec![vec![2.0, 0.3], vec![0.3, 1.0]];
        let fam = ParametricFamily::GaussianKnownVar { dim: 2, cov: cov.clone() }.replicated();
        let spec = DissimilaritySpec::bp(QuadFormSpec::InverseCov, MonotoneMap::Identity);
        let t0 = [0.2, -0.5];
        let t1 = [1.0, 0.4];
        let b = bp(&fam, &t0, &t1, &spec).unwrap().value;
        let k = kl(&fam, &t0, &t1, &DissimilaritySpec::kl()).unwrap().value;
        assert!((b - 2.0 * k / 2.0).abs() < 1e-12, "{b} vs {}", 2.0 * k / 2.0);

        // The explicit-S route with S = Sigma0^{-1} agrees.
        let inv = vec![
            vec![1.0 / 1.91, -0.3 / 1.91],
            vec![-0.3 / 1.91, 2.0 / 1.91],
        ];
        let spec_explicit = DissimilaritySpec::bp(QuadFormSpec::Explicit(inv), MonotoneMap::Identity);
        let be = bp(&fam, &t0, &t1, &spec_explicit).unwrap().value;
        assert!((b - be).abs() < 1e-12);
    }

    #[test]
    fn bp_trinomial_enumeration_cross_checks_closed_form() {
        let fam = tri(20);
        let theta0 = [1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0];
        let theta1 = [1.0 / 9.0 + 0.05, 4.0 / 9.0 - 0.05, 4.0 / 9.0];
        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt);
        let closed = bp(&fam, &theta0, &theta1, &spec).unwrap().value;
        let spec_enum = spec.clone().with_backend(Backend::ExactEnumeration);
        let enumerated = bp(&fam, &theta0, &theta1, &spec_enum).unwrap().value;
        assert!((closed - enumerated).abs() < 1e-12, "{closed} vs {enumerated}");

        // direct value of the quadratic-form expression
        let num = 20.0 * 0.005;
        let den: f64 = [1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0]
            .iter()
            .map(|t| t * (1.0 - t))
            .sum();
        assert!((closed - (num / den).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bp_replication_scales_by_sqrt_m() {
        let base = ParametricFamily::gaussian_1d(1.0);
        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt);
        let b1 = bp(&base.replicated(), &[0.0], &[0.3], &spec).unwrap().value;
        let b9 = bp(&base.replicate(9).unwrap(), &[0.0], &[0.3], &spec).unwrap().value;
        assert!((b9 - 3.0 * b1).abs() < 1e-12);
    }

    #[test]
    fn bp_singular_inverse_cov_reports_reference_point() {
        let fam = tri(20);
        let spec = DissimilaritySpec::bp(QuadFormSpec::InverseCov, MonotoneMap::Sqrt);
        let err = bp(&fam, &[1.0, 0.0, 0.0], &[0.5, 0.3, 0.2], &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("singular predictive covariance"), "{msg}");
        assert!(msg.contains("1.0"), "{msg}");
    }

    #[test]
    fn bp_degenerate_reference_with_identity_form() {
        let fam = tri(20);
        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt);
        let v = bp(&fam, &[1.0, 0.0, 0.0], &[0.5, 0.3, 0.2], &spec).unwrap().value;
        assert_eq!(v, f64::INFINITY);
        let same = bp(&fam, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &spec).unwrap().value;
        assert_eq!(same, 0.0);
    }

    #[test]
    fn cd_gaussian_closed_form_value() {
        let v = cd(&gauss1(1.0), &[0.0], &[2.0], &DissimilaritySpec::cd()).unwrap().value;
        assert!((v - 0.3413447460685429).abs() < 1e-12, "{v}");
        let zero = cd(&gauss1(1.0), &[0.3], &[0.3], &DissimilaritySpec::cd()).unwrap().value;
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn cd_quadrature_matches_closed_form() {
        let fam = gauss1(0.8);
        let spec = DissimilaritySpec::cd().with_backend(Backend::Quadrature { abs_tol: 1e-9 });
        let q = cd(&fam, &[0.0], &[1.1], &spec).unwrap().value;
        let c = cd(&fam, &[0.0], &[1.1], &DissimilaritySpec::cd()).unwrap().value;
        assert!((q - c).abs() < 1e-7, "{q} vs {c}");
    }

    #[test]
    fn cd_unknown_variance_crossing_formula_matches_quadrature() {
        let fam = ParametricFamily::Gaussian1dUnknownVar { var_cap: 4.0, var_floor: None }
            .replicated();
        let spec_q = DissimilaritySpec::cd().with_backend(Backend::Quadrature { abs_tol: 1e-10 });
        for (t0, t1) in [
            ([0.0, 1.0], [0.4, 2.5]),
            ([0.2, 0.5], [0.2, 3.0]),
            ([-1.0, 2.0], [1.0, 0.3]),
        ] {
            let closed = cd(&fam, &t0, &t1, &DissimilaritySpec::cd()).unwrap().value;
            let quad = cd(&fam, &t0, &t1, &spec_q).unwrap().value;
            assert!((closed - quad).abs() < 1e-7, "{t0:?} {t1:?}: {closed} vs {quad}");
        }
    }

    #[test]
    fn cd_trinomial_enumeration_and_monte_carlo_agree() {
        let fam = tri(20);
        let t0 = [0.25, 0.5, 0.25];
        let t1 = [0.2, 0.5, 0.3];
        let exact = cd(&fam, &t0, &t1, &DissimilaritySpec::cd().with_backend(Backend::ExactEnumeration))
            .unwrap()
            .value;
        let mc = cd(
            &fam,
            &t0,
            &t1,
            &DissimilaritySpec::cd().with_backend(Backend::MonteCarlo { n: 1_000_000, seed: 11 }),
        )
        .unwrap();
        let se = mc.std_err.expect("monte carlo attaches a standard error");
        assert!(
            (mc.value - exact).abs() < 3.0 * se,
            "exact {exact}, mc {} +- {se}",
            mc.value
        );
    }

    #[test]
    fn cd_symmetry_exact_enumeration() {
        let fam = tri(12);
        let spec = DissimilaritySpec::cd().with_backend(Backend::ExactEnumeration);
        let a = cd(&fam, &[0.1, 0.6, 0.3], &[0.3, 0.3, 0.4], &spec).unwrap().value;
        let b = cd(&fam, &[0.3, 0.3, 0.4], &[0.1, 0.6, 0.3], &spec).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn classify_examples() {
        let fam = gauss1(1.0);
        assert_eq!(
            classify(&fam, &[0.0], &[2.0], &[vec![0.9]]).unwrap(),
            ChosenParam::Reference
        );
        assert_eq!(
            classify(&fam, &[0.0], &[2.0], &[vec![1.1]]).unwrap(),
            ChosenParam::Alternative
        );
        // equidistant outcome ties to the reference
        assert_eq!(
            classify(&fam, &[0.0], &[2.0], &[vec![1.0]]).unwrap(),
            ChosenParam::Reference
        );
        let tri2 = tri(2);
        assert_eq!(
            classify(&tri2, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[vec![2.0, 0.0, 0.0]]).unwrap(),
            ChosenParam::Reference
        );
    }

    #[test]
    fn two_dimensional_quadrature_matches_closed_forms() {
        let iso = ParametricFamily::BivariateGaussianIso { sigma: 0.9 }.replicated();
        let t0 = [0.2, -0.4];
        let t1 = [1.0, 0.3];
        let quad = Backend::Quadrature { abs_tol: 1e-7 };

        let kl_closed = kl(&iso, &t0, &t1, &DissimilaritySpec::kl()).unwrap().value;
        let kl_quad = kl(&iso, &t0, &t1, &DissimilaritySpec::kl().with_backend(quad))
            .unwrap()
            .value;
        assert!((kl_closed - kl_quad).abs() < 1e-6, "{kl_closed} vs {kl_quad}");

        let cd_closed = cd(&iso, &t0, &t1, &DissimilaritySpec::cd()).unwrap().value;
        let cd_quad = cd(&iso, &t0, &t1, &DissimilaritySpec::cd().with_backend(quad))
            .unwrap()
            .value;
        assert!((cd_closed - cd_quad).abs() < 1e-6, "{cd_closed} vs {cd_quad}");
    }

    #[test]
    fn bp_quadrature_moments_match_closed_route() {
        let quad = Backend::Quadrature { abs_tol: 1e-9 };
        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt);

        let fam = gauss1(1.6);
        let closed = bp(&fam, &[0.3], &[-0.9], &spec).unwrap().value;
        let by_quad = bp(&fam, &[0.3], &[-0.9], &spec.clone().with_backend(quad))
            .unwrap()
            .value;
        assert!((closed - by_quad).abs() < 1e-6, "{closed} vs {by_quad}");

        let iso = ParametricFamily::BivariateGaussianIso { sigma: 1.2 }.replicated();
        let quad2 = Backend::Quadrature { abs_tol: 1e-7 };
        let closed = bp(&iso, &[0.0, 0.5], &[0.8, -0.2], &spec).unwrap().value;
        let by_quad = bp(&iso, &[0.0, 0.5], &[0.8, -0.2], &spec.clone().with_backend(quad2))
            .unwrap()
            .value;
        assert!((closed - by_quad).abs() < 1e-5, "{closed} vs {by_quad}");
    }

    #[test]
    fn monte_carlo_backends_agree_with_closed_forms() {
        let fam = gauss1(1.0);
        let mc = Backend::MonteCarlo { n: 200_000, seed: 12 };

        let est = kl(&fam, &[0.0], &[0.8], &DissimilaritySpec::kl().with_backend(mc)).unwrap();
        let closed = kl(&fam, &[0.0], &[0.8], &DissimilaritySpec::kl()).unwrap().value;
        let se = est.std_err.expect("kl monte carlo reports a standard error");
        assert!(
            (est.value - closed).abs() < 4.0 * se,
            "mc {} +- {se} vs closed {closed}",
            est.value
        );

        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::Sqrt)
            .with_backend(mc);
        let est = bp(&fam, &[0.0], &[0.8], &spec).unwrap();
        assert!((est.value - 0.8).abs() < 0.02, "{}", est.value);
    }

    #[test]
    fn classify_on_replicated_experiments() {
        let fam = ParametricFamily::gaussian_1d(1.0).replicate(3).unwrap();
        let zs = vec![vec![0.2], vec![0.1], vec![0.4]];
        assert_eq!(
            classify(&fam, &[0.0], &[2.0], &zs).unwrap(),
            ChosenParam::Reference
        );
        // outcome count must match the replication
        assert!(classify(&fam, &[0.0], &[2.0], &[vec![0.2]]).is_err());
    }

    #[test]
    fn monte_carlo_is_deterministic_and_order_independent() {
        let fam = gauss1(1.0);
        let spec = DissimilaritySpec::kl().with_backend(Backend::MonteCarlo { n: 20_000, seed: 3 });
        let a = kl(&fam, &[0.0], &[0.5], &spec).unwrap();
        let b = kl(&fam, &[0.0], &[0.5], &spec).unwrap();
        assert_eq!(a.value, b.value);
        // evaluating another pair in between does not shift the stream
        let _ = kl(&fam, &[0.2], &[0.9], &spec).unwrap();
        let c = kl(&fam, &[0.0], &[0.5], &spec).unwrap();
        assert_eq!(a.value, c.value);
    }

    #[test]
    fn monte_carlo_sample_floor_enforced() {
        let spec = DissimilaritySpec::kl().with_backend(Backend::MonteCarlo { n: 100, seed: 1 });
        assert!(matches!(
            kl(&gauss1(1.0), &[0.0], &[1.0], &spec),
            Err(PragmaError::Config(_))
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"kind":"BP","S":"identity","g":"sqrt","backend":{"type":"exact"}}"#;
        let spec: DissimilaritySpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.kind, DissimKind::Bp);
        assert_eq!(spec.s, QuadFormSpec::Identity);
        assert_eq!(spec.g, MonotoneMap::Sqrt);
        assert_eq!(spec.backend, Backend::ExactEnumeration);

        let json = r#"{"kind":"KL","backend":{"type":"monte_carlo","n":50000,"seed":7}}"#;
        let spec: DissimilaritySpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.backend, Backend::MonteCarlo { n: 50_000, seed: 7 });

        let json = r#"{"kind":"CD"}"#;
        let spec: DissimilaritySpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.backend, Backend::ClosedForm);
    }

    #[test]
    fn gaussian_cd_map_aligns_bp_with_cd() {
        // For the known-variance Gaussian, BP with g = GaussianCd equals CD.
        let fam = gauss1(1.4);
        let spec = DissimilaritySpec::bp(QuadFormSpec::Identity, MonotoneMap::GaussianCd);
        let b = bp(&fam, &[0.0], &[1.0], &spec).unwrap().value;
        let c = cd(&fam, &[0.0], &[1.0], &DissimilaritySpec::cd()).unwrap().value;
        assert!((b - c).abs() < 1e-12, "{b} vs {c}");
    }
}
