//! Two identical patches coupled by symmetric dispersal after reproduction:
//!
//! ```text
//! x' = (1 - d) f(x) + d f(y)
//! y' = (1 - d) f(y) + d f(x)
//! ```

use crate::error::{DynError, Result};
use crate::local::{LocalParams, UNDERFLOW_FLUSH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledParams {
    local: LocalParams,
    d: f64,
}

impl CoupledParams {
    /// `d` is the dispersing fraction; 0.5 means complete mixing.
    pub fn new(local: LocalParams, d: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&d) {
            return Err(DynError::InvalidParams(format!(
                "dispersal fraction must lie in [0, 0.5], got {d}"
            )));
        }
        Ok(Self { local, d })
    }

    /// `K = 1`, `A = 0.2` with the given growth rate and dispersal.
    pub fn normalized(r: f64, d: f64) -> Result<Self> {
        Self::new(LocalParams::normalized(r)?, d)
    }

    pub fn local(&self) -> &LocalParams {
        &self.local
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn r(&self) -> f64 {
        self.local.r()
    }

    pub fn k(&self) -> f64 {
        self.local.k()
    }

    pub fn a(&self) -> f64 {
        self.local.a()
    }

    /// One application of the coupled map without input validation.
    ///
    /// Both outputs use the same expression shape so that swapping the
    /// input swaps the output bit for bit.
    #[inline]
    pub fn apply(&self, s: PatchState) -> PatchState {
        let fx = self.local.f(s.x);
        let fy = self.local.f(s.y);
        let stay = 1.0 - self.d;
        PatchState {
            x: flush(stay * fx + self.d * fy),
            y: flush(stay * fy + self.d * fx),
        }
    }

    /// Checked single step.
    pub fn step(&self, s: PatchState) -> Result<PatchState> {
        s.validate()?;
        let next = self.apply(s);
        if !next.x.is_finite() {
            return Err(DynError::NonFinite {
                what: "patch x",
                step: 1,
            });
        }
        if !next.y.is_finite() {
            return Err(DynError::NonFinite {
                what: "patch y",
                step: 1,
            });
        }
        Ok(next)
    }

    /// Iterates `steps` times and keeps the states from `record_from` on.
    pub fn iterate(
        &self,
        s0: PatchState,
        steps: usize,
        record_from: usize,
    ) -> Result<OrbitSegment> {
        if record_from > steps {
            return Err(DynError::InvalidParams(format!(
                "record_from ({record_from}) exceeds steps ({steps})"
            )));
        }
        s0.validate()?;
        let mut states = Vec::with_capacity(steps - record_from + 1);
        let mut s = s0;
        if record_from == 0 {
            states.push(s);
        }
        for t in 1..=steps {
            s = self.apply(s);
            if !s.is_finite() {
                return Err(DynError::NonFinite {
                    what: "coupled orbit",
                    step: t,
                });
            }
            if t >= record_from {
                states.push(s);
            }
        }
        Ok(OrbitSegment {
            states,
            start_index: record_from,
        })
    }

    /// Advances `steps` times, returning only the final state.
    pub fn advance(&self, s0: PatchState, steps: usize) -> Result<PatchState> {
        let mut s = s0;
        for t in 1..=steps {
            s = self.apply(s);
            if !s.is_finite() {
                return Err(DynError::NonFinite {
                    what: "coupled orbit",
                    step: t,
                });
            }
        }
        Ok(s)
    }

    /// `M_d diag(f'(x), f'(y))` with `M_d = [[1-d, d], [d, 1-d]]`.
    pub fn jacobian(&self, s: PatchState) -> Result<Mat2> {
        s.validate()?;
        let jx = self.local.f_prime(s.x);
        let jy = self.local.f_prime(s.y);
        if !(jx.is_finite() && jy.is_finite()) {
            return Err(DynError::NonFinite {
                what: "jacobian",
                step: 0,
            });
        }
        let stay = 1.0 - self.d;
        Ok(Mat2([[stay * jx, self.d * jy], [self.d * jx, stay * jy]]))
    }

    /// Product of Jacobians along `points`, in orbit order.
    pub fn cycle_jacobian(&self, points: &[PatchState]) -> Result<Mat2> {
        let mut acc = Mat2::identity();
        for &p in points {
            acc = self.jacobian(p)?.mul(&acc);
        }
        Ok(acc)
    }
}

#[inline]
fn flush(v: f64) -> f64 {
    if v < UNDERFLOW_FLUSH {
        0.0
    } else {
        v
    }
}

/// Densities `(x, y)` in the two patches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PatchState {
    pub x: f64,
    pub y: f64,
}

impl PatchState {
    pub const ORIGIN: PatchState = PatchState { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn swapped(self) -> Self {
        Self {
            x: self.y,
            y: self.x,
        }
    }

    pub fn total(self) -> f64 {
        self.x + self.y
    }

    pub fn max_dist(self, other: PatchState) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Checks membership of the nonnegative cone.
    pub fn validate(self) -> Result<()> {
        if !self.is_finite() || self.x < 0.0 || self.y < 0.0 {
            return Err(DynError::Domain(format!(
                "state ({}, {}) is outside the nonnegative cone",
                self.x, self.y
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub states: Vec<PatchState>,
    /// Time index of `states[0]`.
    pub start_index: usize,
}

impl OrbitSegment {
    /// Re-checks that consecutive entries are exact images under the map.
    pub fn is_consistent_with(&self, cp: &CoupledParams) -> bool {
        self.states.windows(2).all(|w| cp.apply(w[0]) == w[1])
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Eigenvalues as `(re, im)` pairs; the first has the larger real part.
    pub fn eigenvalues(&self) -> [(f64, f64); 2] {
        let half_tr = 0.5 * self.trace();
        let disc = half_tr * half_tr - self.det();
        if disc >= 0.0 {
            let s = disc.sqrt();
            [(half_tr + s, 0.0), (half_tr - s, 0.0)]
        } else {
            let s = (-disc).sqrt();
            [(half_tr, s), (half_tr, -s)]
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|&(re, im)| re.hypot(im))
            .fold(0.0, f64::max)
    }

    /// Solves `self * v = rhs`; `None` when singular.
    pub fn solve(&self, rhs: [f64; 2]) -> Option<[f64; 2]> {
        let det = self.det();
        let scale = self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if det == 0.0 || !det.is_finite() || det.abs() < 1e-300 * scale.max(1.0) {
            return None;
        }
        let m = &self.0;
        Some([
            (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(r: f64, d: f64) -> CoupledParams {
        CoupledParams::normalized(r, d).unwrap()
    }

    #[test]
    fn rejects_dispersal_out_of_range() {
        assert!(CoupledParams::normalized(0.5, 0.51).is_err());
        assert!(CoupledParams::normalized(0.5, -0.01).is_err());
        assert!(CoupledParams::normalized(0.5, 0.5).is_ok());
    }

    #[test]
    fn uncoupled_step_is_local_map() {
        let cp = params(0.63, 0.0);
        let s = PatchState::new(0.38, 0.58);
        let n = cp.step(s).unwrap();
        assert_eq!(n.x, cp.local().f(0.38));
        assert_eq!(n.y, cp.local().f(0.58));
    }

    #[test]
    fn carrying_capacity_is_fixed() {
        let cp = params(0.77, 0.3);
        assert_eq!(
            cp.step(PatchState::new(1.0, 1.0)).unwrap(),
            PatchState::new(1.0, 1.0)
        );
    }

    #[test]
    fn origin_is_fixed() {
        let cp = params(0.63, 0.01);
        let seg = cp.iterate(PatchState::ORIGIN, 50, 0).unwrap();
        assert!(seg.states.iter().all(|&s| s == PatchState::ORIGIN));
    }

    #[test]
    fn step_rejects_outside_cone() {
        let cp = params(0.63, 0.01);
        assert!(cp.step(PatchState::new(-0.1, 0.3)).is_err());
        assert!(cp.step(PatchState::new(f64::NAN, 0.3)).is_err());
    }

    #[test]
    fn iterate_records_tail() {
        let cp = params(0.63, 0.01);
        let seg = cp.iterate(PatchState::new(0.38, 0.58), 100, 90).unwrap();
        assert_eq!(seg.start_index, 90);
        assert_eq!(seg.states.len(), 11);
        assert!(seg.is_consistent_with(&cp));
        assert!(cp.iterate(PatchState::new(0.38, 0.58), 5, 6).is_err());
    }

    #[test]
    fn jacobian_at_capacity() {
        let cp = params(0.63, 0.01);
        let j = cp.jacobian(PatchState::new(1.0, 1.0)).unwrap();
        let ev = j.eigenvalues();
        let mut re = [ev[0].0, ev[1].0];
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] - (-1.52)).abs() < 1e-12);
        assert!((re[1] - (-1.52 * 0.98)).abs() < 1e-12);
    }

    #[test]
    fn jacobian_at_origin_is_contracting() {
        for &(r, d) in &[(0.3, 0.0), (0.63, 0.01), (0.9, 0.5)] {
            let cp = params(r, d);
            let j = cp.jacobian(PatchState::ORIGIN).unwrap();
            let ev = j.eigenvalues();
            let decay = (-r).exp();
            assert!((ev[0].0 - decay).abs() < 1e-14, "{ev:?} vs {decay}");
            assert!((ev[1].0 - (1.0 - 2.0 * d) * decay).abs() < 1e-14, "{ev:?}");
            assert!(j.spectral_radius() < 1.0);
        }
    }

    #[test]
    fn uncoupled_jacobian_is_diagonal() {
        let cp = params(0.7, 0.0);
        let s = PatchState::new(0.3, 1.1);
        let j = cp.jacobian(s).unwrap();
        assert_eq!(j.0[0][1], 0.0);
        assert_eq!(j.0[1][0], 0.0);
        assert_eq!(j.0[0][0], cp.local().f_prime(0.3));
        assert_eq!(j.0[1][1], cp.local().f_prime(1.1));
    }

    #[test]
    fn complex_eigenvalues() {
        let m = Mat2([[0.0, -2.0], [2.0, 0.0]]);
        assert!((m.spectral_radius() - 2.0).abs() < 1e-15);
        assert_eq!(m.solve([2.0, 4.0]), Some([2.0, -1.0]));
        assert_eq!(Mat2([[1.0, 2.0], [2.0, 4.0]]).solve([1.0, 1.0]), None);
    }
}
