//! Scalar bracketing and bisection shared by the local-map analysis.

use crate::error::{DynError, Result};

/// Bracket width at which bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-12;

/// Bisection on `[lo, hi]` for a sign change of `g`.
///
/// Stops when the bracket is narrower than `width` (relative to the larger
/// endpoint magnitude when that exceeds one) or when `g` hits zero exactly.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, width: f64) -> Result<f64> {
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo.signum() == g_hi.signum() {
        return Err(DynError::NoBracket(format!(
            "g({lo}) = {g_lo}, g({hi}) = {g_hi}"
        )));
    }
    // 200 halvings exhaust any double-precision bracket.
    for _ in 0..200 {
        let scale = lo.abs().max(hi.abs()).max(1.0);
        if hi - lo <= width * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Doubles `hi` starting from `start` until `pred(hi)` holds.
pub fn expand_upward<P: FnMut(f64) -> bool>(
    start: f64,
    mut pred: P,
    max_doublings: usize,
) -> Option<f64> {
    let mut hi = start;
    for _ in 0..=max_doublings {
        if pred(hi) {
            return Some(hi);
        }
        hi *= 2.0;
    }
    None
}
