//! Shared numeric machinery: special functions, adaptive quadrature,
//! small dense linear algebra, root finding, and deterministic RNG streams.

pub mod linalg;
pub mod quad;
pub mod rng;
pub mod special;

use crate::error::{PragmaError, Result};

/// Bisection on a monotonically increasing map, solving `f(x) = target`
/// on `[lo, hi]` to an interval of width `xtol`.
pub fn bisect_increasing<F>(mut f: F, mut lo: f64, mut hi: f64, target: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if flo > target || fhi < target {
        return Err(PragmaError::numeric(format!(
            "bisection target {target} not bracketed by [{lo}, {hi}] (f = [{flo}, {fhi}])"
        )));
    }
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
