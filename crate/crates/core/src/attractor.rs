//! Limit-set detection for the coupled map: period search, the
//! extinction / asymmetric / symmetric taxonomy, phase labelling, linear
//! stability, coexisting-attractor census, extinction times and ghost
//! switching along long transients.

use crate::coupled::{CoupledParams, OrbitSegment, PatchState};
use crate::error::{DynError, Result};

/// Which patches sit above the Allee threshold on the attractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Extinction,
    AsymmetricXHigh,
    AsymmetricYHigh,
    Symmetric,
    /// Tail crosses the threshold intermittently; not yet converged.
    Transitional,
}

impl Category {
    pub fn swapped(self) -> Self {
        match self {
            Category::AsymmetricXHigh => Category::AsymmetricYHigh,
            Category::AsymmetricYHigh => Category::AsymmetricXHigh,
            other => other,
        }
    }

    pub fn is_asymmetric(self) -> bool {
        matches!(self, Category::AsymmetricXHigh | Category::AsymmetricYHigh)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Extinction => "Extinction",
            Category::AsymmetricXHigh => "AsymmetricXHigh",
            Category::AsymmetricYHigh => "AsymmetricYHigh",
            Category::Symmetric => "Symmetric",
            Category::Transitional => "Transitional",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    InPhase,
    OutOfPhase,
    Undefined,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::InPhase => "InPhase",
            Phase::OutOfPhase => "OutOfPhase",
            Phase::Undefined => "Undefined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSettings {
    pub transient: usize,
    pub max_period: usize,
    /// Max-norm recurrence tolerance.
    pub match_tol: f64,
    /// `x + y` below this counts as extinct.
    pub extinct_tol: f64,
    /// Orbit-set distance below which census records are merged.
    pub dedup_tol: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            transient: 5000,
            max_period: 8,
            match_tol: 1e-6,
            extinct_tol: 1e-4,
            dedup_tol: 1e-4,
        }
    }
}

impl DetectorSettings {
    pub fn with_transient(self, transient: usize) -> Self {
        Self { transient, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.transient < 1 {
            return Err(DynError::InvalidParams("transient must be >= 1".into()));
        }
        if !(1..=64).contains(&self.max_period) {
            return Err(DynError::InvalidParams(format!(
                "max_period must lie in [1, 64], got {}",
                self.max_period
            )));
        }
        Ok(())
    }

    fn tail_window(&self) -> usize {
        (3 * self.max_period).max(100)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorRecord {
    pub category: Category,
    /// 0 means no period up to `max_period` was found (long cycle or chaos).
    pub period: usize,
    pub phase: Phase,
    /// One traversal of the detected cycle; empty when `period == 0`.
    pub orbit_points: Vec<PatchState>,
    /// Spectral radius of the Jacobian product around the cycle.
    pub stability: Option<f64>,
}

impl AttractorRecord {
    fn extinction(cp: &CoupledParams) -> Result<Self> {
        let stability = cp.jacobian(PatchState::ORIGIN)?.spectral_radius();
        Ok(Self {
            category: Category::Extinction,
            period: 1,
            phase: Phase::Undefined,
            orbit_points: vec![PatchState::ORIGIN],
            stability: Some(stability),
        })
    }

    /// Linear stability of a detected cycle.
    pub fn is_linearly_stable(&self) -> bool {
        self.stability.is_some_and(|rho| rho < 1.0)
    }

    /// Same attractor up to cyclic rotation of the orbit points.
    pub fn same_attractor(&self, other: &AttractorRecord, tol: f64) -> bool {
        if self.category != other.category || self.period != other.period {
            return false;
        }
        if self.period == 0 {
            // Chaotic or long cycles carry no points; merged by category.
            return true;
        }
        let n = self.orbit_points.len();
        if n != other.orbit_points.len() {
            return false;
        }
        (0..n).any(|shift| {
            (0..n).all(|i| self.orbit_points[i].max_dist(other.orbit_points[(i + shift) % n]) < tol)
        })
    }
}

impl std::fmt::Display for AttractorRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} period={} phase={}",
            self.category, self.period, self.phase
        )
    }
}

/// Running label of a single state.
pub fn label_state(s: PatchState, a: f64, extinct_tol: f64) -> Category {
    if s.total() < extinct_tol {
        Category::Extinction
    } else if s.x > a && s.y > a {
        Category::Symmetric
    } else if s.x > a && s.y < a {
        Category::AsymmetricXHigh
    } else if s.y > a && s.x < a {
        Category::AsymmetricYHigh
    } else {
        Category::Transitional
    }
}

/// Category shared by every state of a tail window, or `Transitional`.
pub fn classify_tail(tail: &[PatchState], a: f64, extinct_tol: f64) -> Category {
    let mut labels = tail.iter().map(|&s| label_state(s, a, extinct_tol));
    let Some(first) = labels.next() else {
        return Category::Transitional;
    };
    if labels.all(|l| l == first) {
        first
    } else {
        Category::Transitional
    }
}

/// Phase of a cycle from the circular lag at which the deviations of `y`
/// from its cycle mean best correlate with those of `x`.
///
/// Lag 0 is in phase; any other winning lag is out of phase. For 2-cycles
/// this is the sign of the lag-0 correlation. A best normalized correlation
/// below 0.2 (or a 1-cycle) leaves the phase undefined.
pub fn cycle_phase(points: &[PatchState]) -> Phase {
    let n = points.len();
    if n < 2 {
        return Phase::Undefined;
    }
    let mean_x = points.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let mean_y = points.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let dx: Vec<f64> = points.iter().map(|p| p.x - mean_x).collect();
    let dy: Vec<f64> = points.iter().map(|p| p.y - mean_y).collect();
    let norm =
        (dx.iter().map(|v| v * v).sum::<f64>() * dy.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if norm == 0.0 {
        return Phase::Undefined;
    }
    let mut best_lag = 0;
    let mut best = f64::NEG_INFINITY;
    for lag in 0..n {
        let c = (0..n).map(|t| dx[(t + lag) % n] * dy[t]).sum::<f64>() / norm;
        // strict improvement keeps the smallest lag on ties
        if c > best + 1e-12 {
            best = c;
            best_lag = lag;
        }
    }
    if best < 0.2 {
        Phase::Undefined
    } else if best_lag == 0 {
        Phase::InPhase
    } else {
        Phase::OutOfPhase
    }
}

/// Both coordinates strictly below `A` guarantees extinction: every image
/// is a convex combination of values `f(x) < x`, so the larger coordinate
/// decreases strictly towards the only fixed point in `[0, A)`.
#[inline]
fn certainly_extinct(s: PatchState, a: f64) -> bool {
    s.x < a && s.y < a
}

/// Smallest `n <= max_period` with `|s_{k+n} - s_k| < tol` for every
/// `k <= 2n`, i.e. recurrence confirmed over three traversals.
fn find_period(samples: &[PatchState], max_period: usize, tol: f64) -> Option<usize> {
    (1..=max_period).find(|&n| (0..=2 * n).all(|k| samples[k + n].max_dist(samples[k]) < tol))
}

/// Runs past the transient and reports the attractor reached from `s0`.
///
/// A tail that still crosses the threshold gets one extra transient of the
/// same length before being reported as `Transitional`.
pub fn detect_attractor(
    cp: &CoupledParams,
    s0: PatchState,
    settings: &DetectorSettings,
) -> Result<AttractorRecord> {
    settings.validate()?;
    s0.validate()?;
    let a = cp.a();
    let mut s = s0;
    for attempt in 0..2 {
        for t in 1..=settings.transient {
            if certainly_extinct(s, a) {
                return AttractorRecord::extinction(cp);
            }
            s = cp.apply(s);
            if !s.is_finite() {
                return Err(DynError::NonFinite {
                    what: "attractor transient",
                    step: attempt * settings.transient + t,
                });
            }
        }
        if certainly_extinct(s, a) {
            return AttractorRecord::extinction(cp);
        }
        let window = settings.tail_window().max(3 * settings.max_period + 1);
        let mut tail = Vec::with_capacity(window);
        tail.push(s);
        for step in 1..window {
            let next = cp.apply(tail[step - 1]);
            if !next.is_finite() {
                return Err(DynError::NonFinite {
                    what: "attractor tail",
                    step: settings.transient + step,
                });
            }
            tail.push(next);
        }
        let category = classify_tail(&tail, a, settings.extinct_tol);
        if category == Category::Extinction {
            return AttractorRecord::extinction(cp);
        }
        if category == Category::Transitional && attempt == 0 {
            s = *tail.last().unwrap();
            continue;
        }
        let period = find_period(&tail, settings.max_period, settings.match_tol).unwrap_or(0);
        let orbit_points = tail[..period].to_vec();
        let stability = if period > 0 {
            Some(cp.cycle_jacobian(&orbit_points)?.spectral_radius())
        } else {
            None
        };
        let phase = if category == Category::Symmetric && period >= 2 {
            cycle_phase(&orbit_points)
        } else {
            Phase::Undefined
        };
        return Ok(AttractorRecord {
            category,
            period,
            phase,
            orbit_points,
            stability,
        });
    }
    unreachable!("second attempt always returns")
}

/// Detects the attractor of every seed and merges duplicates, keeping the
/// first record seen for each distinct attractor (in seed order).
pub fn census(
    cp: &CoupledParams,
    seeds: &[PatchState],
    settings: &DetectorSettings,
) -> Result<Vec<AttractorRecord>> {
    if seeds.is_empty() {
        return Err(DynError::InvalidParams(
            "census needs at least one seed".into(),
        ));
    }
    let mut found: Vec<AttractorRecord> = Vec::new();
    for &seed in seeds {
        let rec = detect_attractor(cp, seed, settings)?;
        if !found
            .iter()
            .any(|f| f.same_attractor(&rec, settings.dedup_tol))
        {
            found.push(rec);
        }
    }
    Ok(found)
}

/// A positive stable cycle of the local map, found by iterating from `x0`.
pub fn local_cycle(
    cp: &CoupledParams,
    x0: f64,
    transient: usize,
    max_period: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let local = cp.local();
    let orbit = local.iterate(x0, transient + 3 * max_period + 1)?;
    let tail = &orbit[transient..];
    let period = (1..=max_period)
        .find(|&n| (0..=2 * n).all(|k| (tail[k + n] - tail[k]).abs() < tol))
        .ok_or_else(|| {
            DynError::NoBracket(format!(
                "no local cycle of period <= {max_period} from x0 = {x0}"
            ))
        })?;
    if tail[0] <= cp.a() {
        return Err(DynError::Domain(format!(
            "local orbit from x0 = {x0} collapses to extinction"
        )));
    }
    Ok(tail[..period].to_vec())
}

/// Periodic points of the uncoupled product map built from one local cycle
/// `{p, f(p), ..., f^{n-1}(p)}`:
/// `(0,0), (0,p), (p,0)` and `(p, f^k(p))` for `k = 0..n`.
pub fn product_periodic_points(cycle: &[f64]) -> Vec<PatchState> {
    let p = cycle[0];
    let mut pts = vec![
        PatchState::ORIGIN,
        PatchState::new(0.0, p),
        PatchState::new(p, 0.0),
    ];
    pts.extend(cycle.iter().map(|&q| PatchState::new(p, q)));
    pts
}

/// Census seeds: each product periodic point plus small perturbations.
pub fn perturbed_seeds(points: &[PatchState], eps: f64) -> Vec<PatchState> {
    let offsets = [(0.0, 0.0), (eps, 0.0), (0.0, eps), (eps, -eps), (-eps, eps)];
    points
        .iter()
        .flat_map(|p| {
            offsets
                .iter()
                .map(move |&(dx, dy)| PatchState::new((p.x + dx).max(0.0), (p.y + dy).max(0.0)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtinctionTime {
    At(usize),
    NotExtinct,
}

impl ExtinctionTime {
    /// Grid encoding: `NotExtinct` becomes `cap + 1`.
    pub fn encode(self, cap: usize) -> usize {
        match self {
            ExtinctionTime::At(t) => t,
            ExtinctionTime::NotExtinct => cap + 1,
        }
    }
}

/// First `t <= cap` with `x_t + y_t < extinct_tol`.
pub fn time_to_extinction(
    cp: &CoupledParams,
    s0: PatchState,
    cap: usize,
    extinct_tol: f64,
) -> Result<ExtinctionTime> {
    if cap < 1 {
        return Err(DynError::InvalidParams("cap must be >= 1".into()));
    }
    s0.validate()?;
    let mut s = s0;
    for t in 0..=cap {
        if s.total() < extinct_tol {
            return Ok(ExtinctionTime::At(t));
        }
        if t == cap {
            break;
        }
        s = cp.apply(s);
        if !s.is_finite() {
            return Err(DynError::NonFinite {
                what: "extinction run",
                step: t + 1,
            });
        }
    }
    Ok(ExtinctionTime::NotExtinct)
}

/// Minimum run length for a label change to count as a regime switch.
pub const SWITCH_PERSISTENCE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSegment {
    pub label: Category,
    /// Time of the first step in the segment.
    pub start: usize,
    /// One past the last step.
    pub end: usize,
}

impl RegimeSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientTrace {
    pub orbit: OrbitSegment,
    pub segments: Vec<RegimeSegment>,
    pub extinction: ExtinctionTime,
}

impl TransientTrace {
    /// Number of segment boundaries.
    pub fn switches(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    /// Changes of side between the two asymmetric ghosts, ignoring any
    /// other segments in between.
    pub fn asymmetric_switches(&self) -> usize {
        let asym: Vec<Category> = self
            .segments
            .iter()
            .map(|s| s.label)
            .filter(|l| l.is_asymmetric())
            .collect();
        asym.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Merges per-step labels into segments; a new segment opens only when a
/// different label persists for at least `persistence` steps, shorter
/// excursions are absorbed into the running segment.
pub fn segment_labels(labels: &[Category], persistence: usize) -> Vec<RegimeSegment> {
    let mut segments: Vec<RegimeSegment> = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let label = labels[i];
        let mut j = i;
        while j < labels.len() && labels[j] == label {
            j += 1;
        }
        let run_len = j - i;
        match segments.last_mut() {
            None => segments.push(RegimeSegment {
                label,
                start: i,
                end: j,
            }),
            Some(last) if last.label == label || run_len < persistence => last.end = j,
            Some(_) => segments.push(RegimeSegment {
                label,
                start: i,
                end: j,
            }),
        }
        i = j;
    }
    // A short opening run is relabelled by whatever follows it.
    if segments.len() >= 2 && segments[0].len() < persistence {
        let first = segments.remove(0);
        segments[0].start = first.start;
    }
    segments
}

/// Full orbit until extinction or `cap`, segmented by which patches sit
/// above the Allee threshold.
pub fn transient_trace(
    cp: &CoupledParams,
    s0: PatchState,
    cap: usize,
    extinct_tol: f64,
) -> Result<TransientTrace> {
    if cap < 1 {
        return Err(DynError::InvalidParams("cap must be >= 1".into()));
    }
    s0.validate()?;
    let a = cp.a();
    let mut states = vec![s0];
    let mut extinction = ExtinctionTime::NotExtinct;
    let mut s = s0;
    for t in 0..=cap {
        if s.total() < extinct_tol {
            extinction = ExtinctionTime::At(t);
            break;
        }
        if t == cap {
            break;
        }
        s = cp.apply(s);
        if !s.is_finite() {
            return Err(DynError::NonFinite {
                what: "transient trace",
                step: t + 1,
            });
        }
        states.push(s);
    }
    let labels: Vec<Category> = states
        .iter()
        .map(|&s| label_state(s, a, extinct_tol))
        .collect();
    let segments = segment_labels(&labels, SWITCH_PERSISTENCE);
    Ok(TransientTrace {
        orbit: OrbitSegment {
            states,
            start_index: 0,
        },
        segments,
        extinction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Category::*;

    #[test]
    fn segmentation_absorbs_short_runs() {
        let mut labels = vec![AsymmetricXHigh; 100];
        labels.extend(vec![Transitional; 10]);
        labels.extend(vec![AsymmetricXHigh; 100]);
        labels.extend(vec![AsymmetricYHigh; 60]);
        labels.extend(vec![Extinction; 1]);
        let segs = segment_labels(&labels, 50);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].label, AsymmetricXHigh);
        assert_eq!(segs[0].end, 210);
        assert_eq!(segs[1].label, AsymmetricYHigh);
        assert_eq!(segs[1].end, 271);
    }

    #[test]
    fn segmentation_relabels_short_prefix() {
        let mut labels = vec![Symmetric; 3];
        labels.extend(vec![AsymmetricYHigh; 200]);
        let segs = segment_labels(&labels, 50);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].label, AsymmetricYHigh);
        assert_eq!(segs[0].start, 0);
    }

    #[test]
    fn phase_labels() {
        let inph = [PatchState::new(0.5, 0.6), PatchState::new(1.2, 1.3)];
        assert_eq!(cycle_phase(&inph), Phase::InPhase);
        let outph = [PatchState::new(0.5, 1.3), PatchState::new(1.2, 0.6)];
        assert_eq!(cycle_phase(&outph), Phase::OutOfPhase);
        // 4-cycle with y lagging x by two steps
        let xs = [0.77, 1.16, 0.71, 1.13];
        let shifted: Vec<PatchState> = (0..4)
            .map(|t| PatchState::new(xs[t], xs[(t + 2) % 4]))
            .collect();
        assert_eq!(cycle_phase(&shifted), Phase::OutOfPhase);
        let sync: Vec<PatchState> = xs.iter().map(|&v| PatchState::new(v, v)).collect();
        assert_eq!(cycle_phase(&sync), Phase::InPhase);
        assert_eq!(cycle_phase(&inph[..1]), Phase::Undefined);
    }

    #[test]
    fn settings_are_validated() {
        let cp = CoupledParams::normalized(0.63, 0.01).unwrap();
        let bad = DetectorSettings {
            max_period: 65,
            ..Default::default()
        };
        assert!(detect_attractor(&cp, PatchState::new(0.5, 0.5), &bad).is_err());
        let bad = DetectorSettings {
            transient: 0,
            ..Default::default()
        };
        assert!(detect_attractor(&cp, PatchState::new(0.5, 0.5), &bad).is_err());
        assert!(census(&cp, &[], &DetectorSettings::default()).is_err());
    }

    #[test]
    fn extinction_time_at_origin_is_zero() {
        let cp = CoupledParams::normalized(0.8, 0.1).unwrap();
        assert_eq!(
            time_to_extinction(&cp, PatchState::ORIGIN, 10, 1e-4).unwrap(),
            ExtinctionTime::At(0)
        );
        assert_eq!(ExtinctionTime::NotExtinct.encode(2000), 2001);
    }

    #[test]
    fn product_points_count() {
        let pts = product_periodic_points(&[0.5, 1.2, 0.4, 1.3]);
        assert_eq!(pts.len(), 7);
        assert_eq!(pts[3], PatchState::new(0.5, 0.5));
    }
}
