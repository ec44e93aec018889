//! Independent oracles for the closed forms: hand-coded enumerations and
//! root-finding routes that share no code with the library paths they
//! check.

use pragma_core::dissimilarity::{cd, kl, Backend, DissimKind, DissimilaritySpec};
use pragma_core::family::ParametricFamily;
use pragma_core::pragmatic::gaussian_interval;

/// Trinomial pmf via plain factorials (not log-gamma), usable for small
/// trial counts.
fn pmf_direct(trials: u64, theta: &[f64], z: [u64; 3]) -> f64 {
    fn factorial(n: u64) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }
    let coef = factorial(trials) / (factorial(z[0]) * factorial(z[1]) * factorial(z[2]));
    coef * theta[0].powi(z[0] as i32) * theta[1].powi(z[1] as i32) * theta[2].powi(z[2] as i32)
}

fn outcomes(trials: u64) -> Vec<[u64; 3]> {
    let mut out = Vec::new();
    for i in 0..=trials {
        for j in 0..=(trials - i) {
            out.push([i, j, trials - i - j]);
        }
    }
    out
}

#[test]
fn trinomial_kl_closed_form_vs_direct_enumeration() {
    let trials = 12u64;
    let family = ParametricFamily::TrinomialCounts { trials }.replicated();
    let pairs = [
        ([0.25, 0.5, 0.25], [0.3, 0.5, 0.2]),
        ([0.1, 0.2, 0.7], [0.2, 0.2, 0.6]),
        ([0.4, 0.35, 0.25], [0.38, 0.37, 0.25]),
    ];
    for (t0, t1) in pairs {
        let closed = kl(&family, &t0, &t1, &DissimilaritySpec::kl()).unwrap().value;
        let mut direct = 0.0;
        for z in outcomes(trials) {
            let p0 = pmf_direct(trials, &t0, z);
            let p1 = pmf_direct(trials, &t1, z);
            if p1 > 0.0 {
                direct += p1 * (p1 / p0).ln();
            }
        }
        assert!((closed - direct).abs() < 1e-10, "{closed} vs {direct}");
    }
}

#[test]
fn trinomial_cd_enumeration_vs_direct_l1() {
    let trials = 12u64;
    let family = ParametricFamily::TrinomialCounts { trials }.replicated();
    let spec = DissimilaritySpec::cd().with_backend(Backend::ExactEnumeration);
    let pairs = [
        ([0.25, 0.5, 0.25], [0.2, 0.5, 0.3]),
        ([0.05, 0.9, 0.05], [0.1, 0.8, 0.1]),
    ];
    for (t0, t1) in pairs {
        let v = cd(&family, &t0, &t1, &spec).unwrap().value;
        let l1: f64 = outcomes(trials)
            .into_iter()
            .map(|z| (pmf_direct(trials, &t0, z) - pmf_direct(trials, &t1, z)).abs())
            .sum();
        assert!((v - 0.25 * l1).abs() < 1e-12, "{v} vs {}", 0.25 * l1);
    }
}

#[test]
fn cd_interval_endpoint_vs_bisection_on_the_distance() {
    // the CD interval endpoint solves cd(theta0, theta0 + h) = eps; find
    // h by bisection on the implementation's classification distance and
    // compare with the quantile-based closed form
    let family = ParametricFamily::gaussian_1d(1.0).replicated();
    let spec = DissimilaritySpec::cd();
    for eps in [0.05, 0.1, 0.25, 0.4] {
        let (_, hi) = gaussian_interval(0.0, 1.0, DissimKind::Cd, eps).unwrap();
        let mut lo_b = 0.0f64;
        let mut hi_b = 8.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo_b + hi_b);
            if cd(&family, &[0.0], &[mid], &spec).unwrap().value < eps {
                lo_b = mid;
            } else {
                hi_b = mid;
            }
        }
        let root = 0.5 * (lo_b + hi_b);
        assert!((root - hi).abs() < 1e-9, "eps {eps}: {root} vs {hi}");
    }
}

#[test]
fn kl_interval_endpoint_inverts_the_closed_form() {
    // KL = h^2 / (2 sigma^2) at the endpoint h = sqrt(2 eps) sigma
    let family = ParametricFamily::gaussian_1d(1.4).replicated();
    for eps in [0.01, 0.1, 0.3] {
        let (_, hi) = gaussian_interval(0.0, 1.4, DissimKind::Kl, eps).unwrap();
        let at_end = kl(&family, &[0.0], &[hi], &DissimilaritySpec::kl()).unwrap().value;
        assert!((at_end - eps).abs() < 1e-12, "{at_end} vs {eps}");
    }
}
