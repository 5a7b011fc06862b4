//! The one-patch Ricker map with a strong Allee effect,
//!
//! ```text
//! f(x) = x * exp(r (1 - x/K) (x/A - 1)),
//! ```
//!
//! together with its derivative, critical point, Schwartzian derivative and
//! the bistability / essential-extinction classification of its dynamics.

use crate::error::{DynError, Result};
use crate::roots::{bisect, expand_upward, BISECTION_WIDTH};

/// Densities below this are replaced by exactly zero during iteration.
pub const UNDERFLOW_FLUSH: f64 = 1e-300;

/// Absolute band on `f(M) - A` inside which the map counts as semistable.
pub const SEMISTABILITY_BAND: f64 = 1e-9;

/// Growth-rate scan used to bracket the essential-extinction threshold.
pub const R_SCAN_STEP: f64 = 0.01;
pub const R_SCAN_MAX: f64 = 5.0;

/// Growth rate `r`, carrying capacity `K` and Allee threshold `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalParams {
    r: f64,
    k: f64,
    a: f64,
}

impl LocalParams {
    pub fn new(r: f64, k: f64, a: f64) -> Result<Self> {
        if !(r.is_finite() && k.is_finite() && a.is_finite()) {
            return Err(DynError::InvalidParams(format!(
                "non-finite parameters r={r}, K={k}, A={a}"
            )));
        }
        if r <= 0.0 {
            return Err(DynError::InvalidParams(format!("r must be > 0, got {r}")));
        }
        if k <= 0.0 {
            return Err(DynError::InvalidParams(format!("K must be > 0, got {k}")));
        }
        if !(a > 0.0 && a < k) {
            return Err(DynError::InvalidParams(format!(
                "A must satisfy 0 < A < K, got A={a}, K={k}"
            )));
        }
        Ok(Self { r, k, a })
    }

    /// `K = 1`, `A = 0.2`, the normalization used throughout the simulations.
    pub fn normalized(r: f64) -> Result<Self> {
        Self::new(r, 1.0, 0.2)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Copy with a different growth rate.
    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(r, self.k, self.a)
    }

    /// Exponent `r (1 - x/K) (x/A - 1)`.
    #[inline]
    pub fn exponent(&self, x: f64) -> f64 {
        self.r * (1.0 - x / self.k) * (x / self.a - 1.0)
    }

    /// Derivative of the exponent; equals `q1(x)` when `K = 1`.
    #[inline]
    pub fn exponent_slope(&self, x: f64) -> f64 {
        self.r * ((1.0 - 2.0 * x / self.k) / self.a + 1.0 / self.k)
    }

    /// Unchecked map evaluation used on hot paths.
    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        x * self.exponent(x).exp()
    }

    /// Unchecked derivative, `e^g (1 + x g')`.
    #[inline]
    pub fn f_prime(&self, x: f64) -> f64 {
        self.exponent(x).exp() * (1.0 + x * self.exponent_slope(x))
    }

    pub fn eval_f(&self, x: f64) -> Result<f64> {
        check_density(x)?;
        Ok(self.f(x))
    }

    pub fn eval_f_prime(&self, x: f64) -> Result<f64> {
        check_density(x)?;
        Ok(self.f_prime(x))
    }

    /// The unique positive critical point `D` (the maximizer of `f`).
    ///
    /// Closed form when `K = 1`; otherwise bisection on the sign of
    /// `1 + x g'(x)`, which carries the sign of `f'`.
    pub fn critical_point(&self) -> Result<f64> {
        if self.k == 1.0 {
            let (r, a) = (self.r, self.a);
            let radicand = (8.0 * a + r + 2.0 * a * r + a * a * r) / r;
            return Ok((1.0 + a) / 4.0 + 0.25 * radicand.sqrt());
        }
        let sign = |x: f64| 1.0 + x * self.exponent_slope(x);
        let hi = expand_upward(self.k + self.a, |x| sign(x) < 0.0, 64)
            .ok_or_else(|| DynError::NoBracket("no sign change of f' above K + A".into()))?;
        bisect(sign, 0.0, hi, BISECTION_WIDTH)
    }

    /// Largest preimage of `A`, the upper edge of the persistence interval.
    pub fn a_star(&self) -> Result<f64> {
        let d = self.critical_point()?;
        let a = self.a;
        let g = |x: f64| self.f(x) - a;
        let hi = expand_upward(2.0 * d.max(self.k), |x| g(x) < 0.0, 64)
            .ok_or_else(|| DynError::NoBracket("f stays above A beyond D".into()))?;
        bisect(g, d, hi, BISECTION_WIDTH)
    }

    /// Classifies the map as bistable, essentially extinct or semistable by
    /// comparing the second iterate of the critical point with `A`.
    pub fn regime(&self, tol: f64) -> Result<RegimeReport> {
        let d = self.critical_point()?;
        let m = self.f(d);
        let a_star = self.a_star()?;
        let side = self.f(m) - self.a;
        let regime = if side.abs() <= tol {
            Regime::ChaoticSemistability
        } else if side > 0.0 {
            Regime::Bistable
        } else {
            Regime::EssentialExtinction
        };
        Ok(RegimeReport {
            d,
            m,
            a_star,
            r_th_side: side,
            regime,
        })
    }

    /// Closed-form Schwartzian derivative `f'''/f' - 3/2 (f''/f')^2`.
    ///
    /// The formula is written for `K = 1`; other capacities are handled by
    /// rescaling, since `S[K φ(x/K)](x) = S[φ](x/K) / K^2`.
    pub fn schwartzian(&self, x: f64) -> Result<f64> {
        check_density(x)?;
        if x <= 0.0 {
            return Err(DynError::Domain(format!(
                "Schwartzian requires x > 0, got {x}"
            )));
        }
        let u = x / self.k;
        let a = self.a / self.k;
        let r = self.r;
        let q1 = r * ((1.0 - 2.0 * u) / a + 1.0);
        let denom_root = 1.0 + u * q1;
        if denom_root.abs() < 1e-12 {
            return Err(DynError::Singular { x });
        }
        let q2 = q2(u, q1);
        let numer = q1 * q1 * q2 + 12.0 * r * r * u * u / (a * a) + 12.0 * r / a;
        Ok(-numer / (2.0 * denom_root * denom_root) / (self.k * self.k))
    }

    /// Forward orbit `x0, f(x0), ..., f^steps(x0)`.
    pub fn iterate(&self, x0: f64, steps: usize) -> Result<Vec<f64>> {
        check_density(x0)?;
        let mut orbit = Vec::with_capacity(steps + 1);
        let mut x = x0;
        orbit.push(x);
        for step in 1..=steps {
            x = self.f(x);
            if !x.is_finite() {
                return Err(DynError::NonFinite {
                    what: "local orbit",
                    step,
                });
            }
            if x < UNDERFLOW_FLUSH {
                x = 0.0;
            }
            orbit.push(x);
        }
        Ok(orbit)
    }
}

/// `q2(x) = 6 + x^2 q1^2 + 4 x q1 = (x q1 + 2)^2 + 2`, hence `q2 >= 2`.
pub fn q2(x: f64, q1: f64) -> f64 {
    6.0 + x * x * q1 * q1 + 4.0 * x * q1
}

fn check_density(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(DynError::Domain(format!("density must be finite, got {x}")));
    }
    if x < 0.0 {
        return Err(DynError::Domain(format!("density must be >= 0, got {x}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Bistable,
    EssentialExtinction,
    ChaoticSemistability,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Bistable => "Bistable",
            Regime::EssentialExtinction => "EssentialExtinction",
            Regime::ChaoticSemistability => "ChaoticSemistability",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    /// Critical point.
    pub d: f64,
    /// Maximal production `f(D)`.
    pub m: f64,
    /// Largest preimage of `A`.
    pub a_star: f64,
    /// `f(f(D)) - A`.
    pub r_th_side: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    pub r: f64,
    /// `|f(f(D)) - A|` at the returned growth rate.
    pub residual: f64,
}

/// `f(f(D(r))) - A` as a function of the growth rate.
pub fn threshold_residual(r: f64, k: f64, a: f64) -> Result<f64> {
    let p = LocalParams::new(r, k, a)?;
    let d = p.critical_point()?;
    Ok(p.f(p.f(d)) - a)
}

/// Growth rate at which the overshoot of the maximal production lands
/// exactly on the Allee threshold.
///
/// Scans `r` upward in steps of [`R_SCAN_STEP`] for the first sign change of
/// [`threshold_residual`], then bisects.
pub fn solve_r_th(k: f64, a: f64, tol: f64) -> Result<ThresholdSolution> {
    LocalParams::new(1.0, k, a)?;
    let steps = (R_SCAN_MAX / R_SCAN_STEP).round() as usize;
    let mut prev_r = R_SCAN_STEP;
    let mut prev = threshold_residual(prev_r, k, a)?;
    for i in 2..=steps {
        let r = i as f64 * R_SCAN_STEP;
        let cur = threshold_residual(r, k, a)?;
        if prev == 0.0 {
            return Ok(ThresholdSolution {
                r: prev_r,
                residual: 0.0,
            });
        }
        if cur.signum() != prev.signum() {
            let root = bisect(
                |r| threshold_residual(r, k, a).unwrap_or(f64::NAN),
                prev_r,
                r,
                0.0,
            )?;
            let residual = threshold_residual(root, k, a)?.abs();
            if residual > tol {
                return Err(DynError::NoBracket(format!(
                    "bisection stalled at r = {root} with residual {residual} > {tol}"
                )));
            }
            return Ok(ThresholdSolution { r: root, residual });
        }
        prev_r = r;
        prev = cur;
    }
    Err(DynError::NoBracket(format!(
        "f(f(D)) - A keeps its sign for r in (0, {R_SCAN_MAX}]"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff<F: Fn(f64) -> f64>(g: F, x: f64, h: f64) -> f64 {
        (g(x + h) - g(x - h)) / (2.0 * h)
    }

    #[test]
    fn construction_rejects_bad_params() {
        assert!(LocalParams::new(0.0, 1.0, 0.2).is_err());
        assert!(LocalParams::new(0.5, 1.0, 1.0).is_err());
        assert!(LocalParams::new(0.5, 1.0, 0.0).is_err());
        assert!(LocalParams::new(0.5, -1.0, 0.2).is_err());
        assert!(LocalParams::new(f64::NAN, 1.0, 0.2).is_err());
    }

    #[test]
    fn eval_rejects_non_finite_and_negative() {
        let p = LocalParams::normalized(0.63).unwrap();
        assert!(matches!(p.eval_f(f64::INFINITY), Err(DynError::Domain(_))));
        assert!(matches!(p.eval_f(f64::NAN), Err(DynError::Domain(_))));
        assert!(matches!(p.eval_f_prime(-0.1), Err(DynError::Domain(_))));
    }

    #[test]
    fn fixed_points_are_exact() {
        for &(r, k, a) in &[(0.63, 1.0, 0.2), (0.3, 2.5, 0.7), (1.7, 10.0, 3.0)] {
            let p = LocalParams::new(r, k, a).unwrap();
            assert_eq!(p.eval_f(0.0).unwrap(), 0.0);
            assert_eq!(p.eval_f(a).unwrap(), a);
            assert_eq!(p.eval_f(k).unwrap(), k);
        }
    }

    #[test]
    fn slope_at_capacity() {
        // f'(1) = 1 + r (1 - 1/A) with K = 1
        let p = LocalParams::normalized(0.63).unwrap();
        assert!((p.eval_f_prime(1.0).unwrap() - (-1.52)).abs() < 1e-12);
        let fd = central_diff(|x| p.f(x), 1.0, 1e-6);
        assert!((fd - (-1.52)).abs() < 1e-8);
    }

    #[test]
    fn slope_at_origin() {
        let p = LocalParams::normalized(0.5).unwrap();
        let expect = (-0.5f64).exp();
        assert!((p.eval_f_prime(0.0).unwrap() - expect).abs() < 1e-15);
        let h = 1e-8;
        let one_sided = p.f(h) / h;
        assert!((one_sided - expect).abs() < 1e-7);
    }

    #[test]
    fn critical_point_values() {
        let d = LocalParams::normalized(0.63)
            .unwrap()
            .critical_point()
            .unwrap();
        let expect = 0.3 + 0.25 * ((1.6 + 0.63 + 0.252 + 0.0252) / 0.63f64).sqrt();
        assert!((d - expect).abs() < 1e-15);
        assert!((d - 0.7987).abs() < 5e-5);
        let d = LocalParams::normalized(0.88)
            .unwrap()
            .critical_point()
            .unwrap();
        assert!((d - 0.7513).abs() < 5e-5);
    }

    #[test]
    fn critical_point_general_k_matches_quadratic() {
        // f' = 0  <=>  2r x^2 / (K A) - r (1/A + 1/K) x - 1 = 0
        for &(r, k, a) in &[(0.63, 2.0, 0.4), (1.3, 5.0, 0.5), (0.2, 0.5, 0.1)] {
            let p = LocalParams::new(r, k, a).unwrap();
            let qa = 2.0 * r / (k * a);
            let qb = -r * (1.0 / a + 1.0 / k);
            let root = (-qb + (qb * qb + 4.0 * qa).sqrt()) / (2.0 * qa);
            let d = p.critical_point().unwrap();
            assert!((d - root).abs() < 1e-9 * k, "{d} vs {root}");
            assert!(p.f_prime(d).abs() < 1e-10);
        }
    }

    #[test]
    fn regime_examples() {
        let tol = SEMISTABILITY_BAND;
        let bi = LocalParams::normalized(0.87).unwrap().regime(tol).unwrap();
        assert_eq!(bi.regime, Regime::Bistable);
        assert!(bi.a_star > bi.d);
        assert!((LocalParams::normalized(0.87).unwrap().f(bi.a_star) - 0.2).abs() < 1e-10);
        let ee = LocalParams::normalized(0.888).unwrap().regime(tol).unwrap();
        assert_eq!(ee.regime, Regime::EssentialExtinction);
        let th = solve_r_th(1.0, 0.2, 1e-10).unwrap();
        let semi = LocalParams::normalized(th.r).unwrap().regime(tol).unwrap();
        assert_eq!(semi.regime, Regime::ChaoticSemistability);
    }

    #[test]
    fn q2_at_zero() {
        let q1 = LocalParams::normalized(0.63).unwrap().exponent_slope(0.0);
        assert_eq!(q2(0.0, q1), 6.0);
    }

    #[test]
    fn schwartzian_singular_at_critical_point() {
        let p = LocalParams::normalized(0.63).unwrap();
        let d = p.critical_point().unwrap();
        assert!(matches!(p.schwartzian(d), Err(DynError::Singular { .. })));
        assert!(p.schwartzian(0.0).is_err());
    }

    #[test]
    fn schwartzian_negative_example() {
        let p = LocalParams::normalized(0.63).unwrap();
        assert!(p.schwartzian(0.5).unwrap() < 0.0);
    }

    #[test]
    fn iterate_reports_length_and_start() {
        let p = LocalParams::normalized(0.87).unwrap();
        let orbit = p.iterate(0.5, 10).unwrap();
        assert_eq!(orbit.len(), 11);
        assert_eq!(orbit[0], 0.5);
        assert_eq!(orbit[1], p.f(0.5));
        assert!(p.iterate(-1.0, 3).is_err());
    }

    #[test]
    fn below_threshold_decreases_monotonically() {
        let p = LocalParams::normalized(0.63).unwrap();
        let orbit = p.iterate(0.1, 2000).unwrap();
        for w in orbit.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert_eq!(*orbit.last().unwrap(), 0.0);
    }
}
