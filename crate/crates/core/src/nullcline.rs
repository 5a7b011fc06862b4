//! Nullclines of the first and second iterate of the coupled map, extracted
//! as zero contours by marching squares, and fixed points of those iterates
//! refined by damped Newton iteration.

use std::collections::HashMap;

use crate::coupled::{CoupledParams, Mat2, PatchState};
use crate::error::{DynError, Result};
use crate::sweep::{AxisValues, GridSpec, SweepRunner};

/// Residual bound at extracted curve vertices.
pub const CURVE_TOL: f64 = 1e-3;
/// Newton stops once the max-norm residual drops below this.
pub const NEWTON_TOL: f64 = 1e-10;
pub const MAX_HALVINGS: usize = 30;
pub const MAX_NEWTON_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `(F^k)_x(x, y) = x`
    XNullcline,
    /// `(F^k)_y(x, y) = y`
    YNullcline,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::XNullcline => "x",
            Family::YNullcline => "y",
        }
    }
}

fn check_iterate(iterate: usize) -> Result<()> {
    if !(1..=2).contains(&iterate) {
        return Err(DynError::InvalidParams(format!(
            "iterate must be 1 or 2, got {iterate}"
        )));
    }
    Ok(())
}

/// `F^k(s) - s`, componentwise.
pub fn residual(cp: &CoupledParams, iterate: usize, s: PatchState) -> (f64, f64) {
    let mut img = s;
    for _ in 0..iterate {
        img = cp.apply(img);
    }
    (img.x - s.x, img.y - s.y)
}

/// Default display domain `[0, 1.5]^2` at `n x n` nodes.
pub fn default_domain(n: usize) -> Result<GridSpec> {
    GridSpec::square_ic(0.0, 1.5, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub family: Family,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub iterate: usize,
    pub domain: GridSpec,
    pub curves: Vec<Polyline>,
    /// Cells skipped because a corner residual was not finite.
    pub skipped_cells: usize,
}

impl CurveSet {
    pub fn family(&self, family: Family) -> impl Iterator<Item = &Polyline> {
        self.curves.iter().filter(move |c| c.family == family)
    }

    /// Smallest distance from `p` to any segment of the given family.
    pub fn distance_to(&self, family: Family, p: [f64; 2]) -> f64 {
        let mut best = f64::INFINITY;
        for c in self.family(family) {
            if c.points.len() == 1 {
                best = best.min(dist(c.points[0], p));
            }
            for w in c.points.windows(2) {
                best = best.min(segment_distance(w[0], w[1], p));
            }
        }
        best
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0);
    dist([a[0] + t * vx, a[1] + t * vy], p)
}

/// Node residuals of both families on a uniform two-dimensional domain.
struct ResidualGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl ResidualGrid {
    fn evaluate(
        runner: &SweepRunner,
        cp: &CoupledParams,
        iterate: usize,
        domain: &GridSpec,
    ) -> Result<Self> {
        let Some(axis2) = &domain.axis2 else {
            return Err(DynError::InvalidParams(
                "nullclines need a two-dimensional domain".into(),
            ));
        };
        for axis in [&domain.axis1, axis2] {
            if let AxisValues::Uniform { min, .. } = axis.values {
                if min < 0.0 {
                    return Err(DynError::Domain(
                        "domain must lie in the nonnegative cone".into(),
                    ));
                }
            }
            if axis.len() < 2 {
                return Err(DynError::InvalidParams(
                    "domain axes need >= 2 nodes".into(),
                ));
            }
        }
        let xs: Vec<f64> = domain.axis1.iter().collect();
        let ys: Vec<f64> = axis2.iter().collect();
        if xs.iter().chain(&ys).any(|&v| v < 0.0) {
            return Err(DynError::Domain(
                "domain must lie in the nonnegative cone".into(),
            ));
        }
        let n1 = xs.len();
        let values = runner.map_cells(n1 * ys.len(), |idx| {
            residual(cp, iterate, PatchState::new(xs[idx % n1], ys[idx / n1]))
        });
        let (gx, gy) = values.into_iter().unzip();
        Ok(Self { xs, ys, gx, gy })
    }

    fn values(&self, family: Family) -> &[f64] {
        match family {
            Family::XNullcline => &self.gx,
            Family::YNullcline => &self.gy,
        }
    }

    fn n1(&self) -> usize {
        self.xs.len()
    }

    fn n2(&self) -> usize {
        self.ys.len()
    }
}

#[inline]
fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Edges are keyed `2 * node` for the edge to the right of a node and
/// `2 * node + 1` for the edge above it.
#[derive(Clone, Copy)]
struct Edge {
    id: usize,
    a: (usize, usize),
    b: (usize, usize),
}

struct Marcher<'a> {
    grid: &'a ResidualGrid,
    family: Family,
    cp: &'a CoupledParams,
    iterate: usize,
    curve_tol: f64,
}

impl Marcher<'_> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.grid.values(self.family)[j * self.grid.n1() + i]
    }

    fn node(&self, (i, j): (usize, usize)) -> [f64; 2] {
        [self.grid.xs[i], self.grid.ys[j]]
    }

    fn family_residual(&self, p: [f64; 2]) -> f64 {
        let (gx, gy) = residual(self.cp, self.iterate, PatchState::new(p[0], p[1]));
        match self.family {
            Family::XNullcline => gx,
            Family::YNullcline => gy,
        }
    }

    /// Linear interpolation along the edge, tightened by bisection when the
    /// interpolated vertex misses the residual bound.
    fn crossing(&self, e: Edge) -> [f64; 2] {
        let (va, vb) = (self.value(e.a.0, e.a.1), self.value(e.b.0, e.b.1));
        let (pa, pb) = (self.node(e.a), self.node(e.b));
        let t = if va == vb { 0.5 } else { va / (va - vb) };
        let lerp = |t: f64| [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
        let p = lerp(t);
        if self.family_residual(p).abs() < 0.5 * self.curve_tol {
            return p;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let side_a = positive(va);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if positive(self.family_residual(lerp(mid))) == side_a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lerp(0.5 * (lo + hi))
    }

    /// Crossing segments as pairs of edges, cell by cell in row-major order.
    fn segments(&self) -> (Vec<(Edge, Edge)>, usize) {
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let mut segs = Vec::new();
        let mut skipped = 0;
        for j in 0..n2 - 1 {
            for i in 0..n1 - 1 {
                let v = [
                    self.value(i, j),
                    self.value(i + 1, j),
                    self.value(i + 1, j + 1),
                    self.value(i, j + 1),
                ];
                if v.iter().any(|x| !x.is_finite()) {
                    skipped += 1;
                    continue;
                }
                let node = |i: usize, j: usize| j * n1 + i;
                let bottom = Edge {
                    id: 2 * node(i, j),
                    a: (i, j),
                    b: (i + 1, j),
                };
                let right = Edge {
                    id: 2 * node(i + 1, j) + 1,
                    a: (i + 1, j),
                    b: (i + 1, j + 1),
                };
                let top = Edge {
                    id: 2 * node(i, j + 1),
                    a: (i, j + 1),
                    b: (i + 1, j + 1),
                };
                let left = Edge {
                    id: 2 * node(i, j) + 1,
                    a: (i, j),
                    b: (i, j + 1),
                };
                let s = v.map(positive);
                let crosses = |p: usize, q: usize| s[p] != s[q];
                let mut hit = Vec::with_capacity(4);
                if crosses(0, 1) {
                    hit.push(bottom);
                }
                if crosses(1, 2) {
                    hit.push(right);
                }
                if crosses(3, 2) {
                    hit.push(top);
                }
                if crosses(0, 3) {
                    hit.push(left);
                }
                match hit.len() {
                    2 => segs.push((hit[0], hit[1])),
                    4 => {
                        let cx = 0.5 * (self.grid.xs[i] + self.grid.xs[i + 1]);
                        let cy = 0.5 * (self.grid.ys[j] + self.grid.ys[j + 1]);
                        let center = positive(self.family_residual([cx, cy]));
                        if center == s[0] {
                            // corners 0 and 2 joined through the centre
                            segs.push((bottom, right));
                            segs.push((left, top));
                        } else {
                            segs.push((left, bottom));
                            segs.push((right, top));
                        }
                    }
                    _ => {}
                }
            }
        }
        (segs, skipped)
    }

    fn polylines(&self) -> (Vec<Polyline>, usize) {
        let (segs, skipped) = self.segments();
        let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, (e1, e2)) in segs.iter().enumerate() {
            by_edge.entry(e1.id).or_default().push(k);
            by_edge.entry(e2.id).or_default().push(k);
        }
        let mut points: HashMap<usize, [f64; 2]> = HashMap::new();
        let point = |e: Edge, points: &mut HashMap<usize, [f64; 2]>| {
            *points.entry(e.id).or_insert_with(|| self.crossing(e))
        };
        let mut used = vec![false; segs.len()];
        let mut out = Vec::new();
        let is_end = |k: usize| {
            let (e1, e2) = segs[k];
            by_edge[&e1.id].len() == 1 || by_edge[&e2.id].len() == 1
        };
        // open chains first (starting at a dangling end), then loops
        let order: Vec<usize> = (0..segs.len())
            .filter(|&k| is_end(k))
            .chain(0..segs.len())
            .collect();
        for start in order {
            if used[start] {
                continue;
            }
            used[start] = true;
            let (e1, e2) = segs[start];
            // orient so that the dangling edge, if any, comes first
            let (first, mut tail_edge) = if by_edge[&e2.id].len() == 1 && by_edge[&e1.id].len() != 1
            {
                (e2, e1)
            } else {
                (e1, e2)
            };
            let mut pts = vec![point(first, &mut points), point(tail_edge, &mut points)];
            let mut closed = false;
            loop {
                let next = by_edge[&tail_edge.id].iter().copied().find(|&k| !used[k]);
                let Some(k) = next else {
                    if tail_edge.id == first.id && pts.len() > 2 {
                        closed = true;
                    }
                    break;
                };
                used[k] = true;
                let (a, b) = segs[k];
                let other = if a.id == tail_edge.id { b } else { a };
                if other.id == first.id {
                    pts.push(pts[0]);
                    closed = true;
                    break;
                }
                pts.push(point(other, &mut points));
                tail_edge = other;
            }
            out.push(Polyline {
                family: self.family,
                points: pts,
                closed,
            });
        }
        (out, skipped)
    }
}

/// Zero contours of `(F^k)_x - x` and `(F^k)_y - y` over `domain`.
pub fn nullclines(
    runner: &SweepRunner,
    cp: &CoupledParams,
    iterate: usize,
    domain: &GridSpec,
) -> Result<CurveSet> {
    check_iterate(iterate)?;
    let grid = ResidualGrid::evaluate(runner, cp, iterate, domain)?;
    let mut curves = Vec::new();
    let mut skipped = 0;
    for family in [Family::XNullcline, Family::YNullcline] {
        let marcher = Marcher {
            grid: &grid,
            family,
            cp,
            iterate,
            curve_tol: CURVE_TOL,
        };
        let (mut c, s) = marcher.polylines();
        curves.append(&mut c);
        skipped += s;
    }
    Ok(CurveSet {
        iterate,
        domain: domain.clone(),
        curves,
        skipped_cells: skipped,
    })
}

/// Centres of grid cells in which both residuals change sign; candidate
/// seeds for fixed points of the iterate.
pub fn intersection_seeds(
    runner: &SweepRunner,
    cp: &CoupledParams,
    iterate: usize,
    domain: &GridSpec,
) -> Result<Vec<PatchState>> {
    check_iterate(iterate)?;
    let grid = ResidualGrid::evaluate(runner, cp, iterate, domain)?;
    let (n1, n2) = (grid.n1(), grid.n2());
    let changes = |vals: &[f64], i: usize, j: usize| {
        let c = [
            vals[j * n1 + i],
            vals[j * n1 + i + 1],
            vals[(j + 1) * n1 + i],
            vals[(j + 1) * n1 + i + 1],
        ];
        c.iter().all(|v| v.is_finite()) && {
            let first = positive(c[0]);
            c.iter().any(|&v| positive(v) != first) || c.contains(&0.0)
        }
    };
    let mut seeds = Vec::new();
    for j in 0..n2 - 1 {
        for i in 0..n1 - 1 {
            if changes(&grid.gx, i, j) && changes(&grid.gy, i, j) {
                seeds.push(PatchState::new(
                    0.5 * (grid.xs[i] + grid.xs[i + 1]),
                    0.5 * (grid.ys[j] + grid.ys[j + 1]),
                ));
            }
        }
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub state: PatchState,
    /// Spectral radius of the Jacobian of the iterate at the point.
    pub spectral_radius: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub iterate: usize,
    /// Distinct fixed points, sorted by `x` then `y`.
    pub points: Vec<FixedPoint>,
    /// Seeds from which Newton did not converge.
    pub failed: Vec<PatchState>,
}

fn iterate_jacobian(cp: &CoupledParams, iterate: usize, s: PatchState) -> Result<Mat2> {
    let mut pts = Vec::with_capacity(iterate);
    let mut p = s;
    for _ in 0..iterate {
        pts.push(p);
        p = cp.apply(p);
    }
    cp.cycle_jacobian(&pts)
}

fn clamp_to_cone(v: f64) -> Option<f64> {
    if v >= 0.0 {
        Some(v)
    } else if v > -1e-12 {
        Some(0.0)
    } else {
        None
    }
}

/// Damped Newton on `F^k(s) - s`, halving the step up to
/// [`MAX_HALVINGS`] times until the residual decreases and the iterate
/// stays in the nonnegative cone.
pub fn refine_fixed_point(
    cp: &CoupledParams,
    iterate: usize,
    seed: PatchState,
) -> Result<PatchState> {
    check_iterate(iterate)?;
    seed.validate()?;
    let norm = |s: PatchState| {
        let (gx, gy) = residual(cp, iterate, s);
        gx.abs().max(gy.abs())
    };
    let fail = || DynError::NoConvergence {
        x: seed.x,
        y: seed.y,
    };
    let mut s = seed;
    let mut res = norm(s);
    for _ in 0..MAX_NEWTON_STEPS {
        if res < NEWTON_TOL {
            return Ok(s);
        }
        let mut jac = iterate_jacobian(cp, iterate, s)?;
        jac.0[0][0] -= 1.0;
        jac.0[1][1] -= 1.0;
        let (gx, gy) = residual(cp, iterate, s);
        let step = jac.solve([-gx, -gy]).ok_or_else(fail)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = match (
                clamp_to_cone(s.x + lambda * step[0]),
                clamp_to_cone(s.y + lambda * step[1]),
            ) {
                (Some(x), Some(y)) => Some(PatchState::new(x, y)),
                _ => None,
            };
            if let Some(c) = cand {
                let r = norm(c);
                if r.is_finite() && r < res {
                    s = c;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(fail());
        }
    }
    if res < NEWTON_TOL {
        Ok(s)
    } else {
        Err(fail())
    }
}

/// Distance below which refined points are merged.
pub const FIXED_POINT_DEDUP: f64 = 1e-7;

/// Refines every seed, labels stability and merges duplicates.
pub fn fixed_points(
    cp: &CoupledParams,
    iterate: usize,
    seeds: &[PatchState],
) -> Result<FixedPointReport> {
    check_iterate(iterate)?;
    let mut points: Vec<FixedPoint> = Vec::new();
    let mut failed = Vec::new();
    for &seed in seeds {
        match refine_fixed_point(cp, iterate, seed) {
            Ok(state) => {
                if points
                    .iter()
                    .any(|p| p.state.max_dist(state) < FIXED_POINT_DEDUP)
                {
                    continue;
                }
                let rho = iterate_jacobian(cp, iterate, state)?.spectral_radius();
                points.push(FixedPoint {
                    state,
                    spectral_radius: rho,
                    stable: rho < 1.0,
                });
            }
            Err(DynError::NoConvergence { .. }) => failed.push(seed),
            Err(e) => return Err(e),
        }
    }
    points.sort_by(|a, b| {
        a.state
            .x
            .total_cmp(&b.state.x)
            .then(a.state.y.total_cmp(&b.state.y))
    });
    Ok(FixedPointReport {
        iterate,
        points,
        failed,
    })
}

/// Fixed points seeded from nullcline intersections on `domain`.
pub fn fixed_points_on_domain(
    runner: &SweepRunner,
    cp: &CoupledParams,
    iterate: usize,
    domain: &GridSpec,
) -> Result<FixedPointReport> {
    let seeds = intersection_seeds(runner, cp, iterate, domain)?;
    fixed_points(cp, iterate, &seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_iterate() {
        let cp = CoupledParams::normalized(0.6, 0.1).unwrap();
        let dom = default_domain(10).unwrap();
        assert!(nullclines(&SweepRunner::serial(), &cp, 3, &dom).is_err());
        assert!(refine_fixed_point(&cp, 0, PatchState::new(0.5, 0.5)).is_err());
    }

    #[test]
    fn segment_distance_basics() {
        assert_eq!(segment_distance([0.0, 0.0], [1.0, 0.0], [0.5, 1.0]), 1.0);
        assert_eq!(segment_distance([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]), 1.0);
    }

    #[test]
    fn window_without_zeros_has_no_curves() {
        // f(x) < x strictly inside (0, A) and > x inside (A, K): no zero here
        let cp = CoupledParams::normalized(0.6, 0.0).unwrap();
        let dom = GridSpec::square_ic(0.3, 0.35, 5).unwrap();
        let cs = nullclines(&SweepRunner::serial(), &cp, 1, &dom).unwrap();
        assert!(cs.curves.is_empty());
    }

    #[test]
    fn origin_seed_is_stable_fixed_point() {
        let cp = CoupledParams::normalized(0.7, 0.2).unwrap();
        let rep = fixed_points(&cp, 1, &[PatchState::ORIGIN]).unwrap();
        assert_eq!(rep.points.len(), 1);
        assert_eq!(rep.points[0].state, PatchState::ORIGIN);
        assert!(rep.points[0].stable);
    }
}
