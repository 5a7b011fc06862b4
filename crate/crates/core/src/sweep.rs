//! Deterministic data-parallel sweeps over parameter and initial-condition
//! grids.
//!
//! Every cell is a pure function of its coordinates and the shared settings;
//! results are gathered in cell order, so the output does not depend on the
//! number of worker threads. Random initial conditions come from a ChaCha
//! stream keyed by the cell index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attractor::{detect_attractor, time_to_extinction, Category, DetectorSettings};
use crate::coupled::{CoupledParams, PatchState};
use crate::error::{DynError, Result};
use crate::local::LocalParams;

/// Period-plane code for extinction.
pub const CODE_EXTINCT: i32 = -1;
/// Code for cells whose tail never settled on one side of the threshold.
pub const CODE_UNRESOLVED: i32 = -2;

#[derive(Debug, Clone, PartialEq)]
pub enum AxisValues {
    Uniform { min: f64, max: f64, count: usize },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: AxisValues,
}

impl Axis {
    pub fn uniform(name: impl Into<String>, min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(DynError::InvalidParams(format!(
                "axis needs count >= 2, got {count}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(DynError::InvalidParams(format!(
                "axis needs finite min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self {
            name: name.into(),
            values: AxisValues::Uniform { min, max, count },
        })
    }

    pub fn explicit(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(DynError::InvalidParams(
                "explicit axis needs at least one finite value".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            values: AxisValues::Explicit(values),
        })
    }

    pub fn len(&self) -> usize {
        match &self.values {
            AxisValues::Uniform { count, .. } => *count,
            AxisValues::Explicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `min + i (max - min) / (count - 1)`.
    pub fn value(&self, i: usize) -> f64 {
        match &self.values {
            AxisValues::Uniform { min, max, count } => {
                min + i as f64 * ((max - min) / (*count - 1) as f64)
            }
            AxisValues::Explicit(v) => v[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.value(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
}

impl GridSpec {
    pub fn one_d(axis: Axis) -> Self {
        Self {
            axis1: axis,
            axis2: None,
        }
    }

    pub fn two_d(axis1: Axis, axis2: Axis) -> Self {
        Self {
            axis1,
            axis2: Some(axis2),
        }
    }

    /// Square `n x n` grid of initial conditions over `[lo, hi]^2`.
    pub fn square_ic(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Ok(Self::two_d(
            Axis::uniform("x0", lo, hi, n)?,
            Axis::uniform("y0", lo, hi, n)?,
        ))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.axis1.len(), self.axis2.as_ref().map_or(1, Axis::len))
    }

    pub fn cell_count(&self) -> usize {
        let (n1, n2) = self.dims();
        n1 * n2
    }

    /// Cell `index = j * n1 + i`, axis 1 running fastest.
    pub fn coords(&self, index: usize) -> (f64, f64) {
        let n1 = self.axis1.len();
        let (i, j) = (index % n1, index / n1);
        let c2 = self.axis2.as_ref().map_or(f64::NAN, |a| a.value(j));
        (self.axis1.value(i), c2)
    }

    fn require_two_d(&self) -> Result<()> {
        if self.axis2.is_none() {
            return Err(DynError::InvalidParams(
                "sweep needs a two-dimensional grid".into(),
            ));
        }
        Ok(())
    }
}

/// Settings recorded alongside a sweep result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepMeta {
    pub k: f64,
    pub a: f64,
    pub r: Option<f64>,
    pub d: Option<f64>,
    pub settings: Option<DetectorSettings>,
    pub seed: Option<u64>,
    pub cap: Option<usize>,
    pub n_random: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedGrid<T> {
    pub spec: GridSpec,
    /// One entry per cell in [`GridSpec::coords`] order.
    pub cells: Vec<Result<T>>,
    pub meta: SweepMeta,
}

impl<T> ClassifiedGrid<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.spec.dims()
    }

    pub fn get(&self, i: usize, j: usize) -> &Result<T> {
        &self.cells[j * self.spec.axis1.len() + i]
    }

    pub fn ok_values(&self) -> impl Iterator<Item = &T> {
        self.cells.iter().filter_map(|c| c.as_ref().ok())
    }

    pub fn error_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_err()).count()
    }

    /// Same grid with every successful cell transformed.
    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> ClassifiedGrid<U> {
        ClassifiedGrid {
            spec: self.spec.clone(),
            cells: self
                .cells
                .iter()
                .map(|c| c.as_ref().map(&f).map_err(Clone::clone))
                .collect(),
            meta: self.meta.clone(),
        }
    }
}

impl ClassifiedGrid<BasinCell> {
    pub fn labels(&self) -> ClassifiedGrid<BasinLabel> {
        self.map(|c| c.label)
    }

    pub fn label_count(&self, label: BasinLabel) -> usize {
        self.ok_values().filter(|c| c.label == label).count()
    }

    pub fn label_fraction(&self, label: BasinLabel) -> f64 {
        self.label_count(label) as f64 / self.cells.len() as f64
    }
}

impl ClassifiedGrid<BasinLabel> {
    pub fn label_count(&self, label: BasinLabel) -> usize {
        self.ok_values().filter(|&&l| l == label).count()
    }

    pub fn label_fraction(&self, label: BasinLabel) -> f64 {
        self.label_count(label) as f64 / self.cells.len() as f64
    }
}

impl<T: PartialEq> ClassifiedGrid<T> {
    /// Fraction of cells with at least one 4-neighbour holding a different
    /// value (errors compare unequal to everything).
    pub fn boundary_fraction(&self) -> f64 {
        let (n1, n2) = self.dims();
        let same = |a: &Result<T>, b: &Result<T>| match (a, b) {
            (Ok(x), Ok(y)) => x == y,
            _ => false,
        };
        let mut boundary = 0usize;
        for j in 0..n2 {
            for i in 0..n1 {
                let c = self.get(i, j);
                let mut differs = false;
                if i > 0 && !same(c, self.get(i - 1, j)) {
                    differs = true;
                }
                if i + 1 < n1 && !same(c, self.get(i + 1, j)) {
                    differs = true;
                }
                if j > 0 && !same(c, self.get(i, j - 1)) {
                    differs = true;
                }
                if j + 1 < n2 && !same(c, self.get(i, j + 1)) {
                    differs = true;
                }
                if differs {
                    boundary += 1;
                }
            }
        }
        boundary as f64 / (n1 * n2) as f64
    }
}

/// Basin colour of an initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasinLabel {
    Extinction,
    AsymmetricXHigh,
    AsymmetricYHigh,
    Symmetric,
    Unresolved,
}

impl BasinLabel {
    pub fn name(self) -> &'static str {
        match self {
            BasinLabel::Extinction => "Extinction",
            BasinLabel::AsymmetricXHigh => "AsymmetricXHigh",
            BasinLabel::AsymmetricYHigh => "AsymmetricYHigh",
            BasinLabel::Symmetric => "Symmetric",
            BasinLabel::Unresolved => "Unresolved",
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            BasinLabel::AsymmetricXHigh => BasinLabel::AsymmetricYHigh,
            BasinLabel::AsymmetricYHigh => BasinLabel::AsymmetricXHigh,
            other => other,
        }
    }
}

impl From<Category> for BasinLabel {
    fn from(c: Category) -> Self {
        match c {
            Category::Extinction => BasinLabel::Extinction,
            Category::AsymmetricXHigh => BasinLabel::AsymmetricXHigh,
            Category::AsymmetricYHigh => BasinLabel::AsymmetricYHigh,
            Category::Symmetric => BasinLabel::Symmetric,
            Category::Transitional => BasinLabel::Unresolved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasinCell {
    pub label: BasinLabel,
    pub period: usize,
}

/// How `parameter_plane` picks the initial condition of a cell.
#[derive(Debug, Clone, PartialEq)]
pub enum IcPolicy {
    /// Cell `i` uses `ics[i % ics.len()]`.
    FixedList(Vec<PatchState>),
    /// One seeded draw per cell from `(0, K)^2`, redrawn while both
    /// coordinates are at or below `A`.
    RandomPerCell { seed: u64 },
}

/// Counter-based per-cell generator: the stream id is the cell index.
pub fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

/// Uniform draw from `[lo, hi)^2`.
pub fn draw_state(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> PatchState {
    let x = lo + (hi - lo) * rng.gen::<f64>();
    let y = lo + (hi - lo) * rng.gen::<f64>();
    PatchState::new(x, y)
}

/// Uniform draw from `(0, K)^2` conditioned on at least one coordinate above `A`.
pub fn draw_persistent_ic(rng: &mut ChaCha8Rng, k: f64, a: f64) -> PatchState {
    loop {
        let s = draw_state(rng, 0.0, k);
        if s.x > a || s.y > a {
            return s;
        }
    }
}

/// Thread-pool wrapper; one worker runs serially on the calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepRunner {
    workers: usize,
}

impl Default for SweepRunner {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl SweepRunner {
    pub fn new(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }

    pub fn serial() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Evaluates `cell(i)` for `i in 0..n` and returns the results in index order.
    pub fn map_cells<T, F>(&self, n: usize, cell: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.workers == 1 {
            return (0..n).map(cell).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&cell).collect()),
            Err(_) => (0..n).map(cell).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationColumn {
    pub r: f64,
    /// Final states per initial condition, in input order.
    pub tails: Vec<Result<Vec<PatchState>>>,
}

/// Bifurcation run: growth rates on `r_axis`, fixed `K`, `A`, `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationSpec {
    pub k: f64,
    pub a: f64,
    pub d: f64,
    pub r_axis: Axis,
    pub ics: Vec<PatchState>,
    pub steps: usize,
    /// Number of final states kept per run.
    pub tail: usize,
}

/// Tail states of every initial condition for each growth rate.
pub fn bifurcation_sweep(
    runner: &SweepRunner,
    spec: &BifurcationSpec,
) -> Result<Vec<BifurcationColumn>> {
    let BifurcationSpec {
        k,
        a,
        d,
        steps,
        tail,
        ..
    } = *spec;
    if steps <= tail {
        return Err(DynError::InvalidParams(format!(
            "steps ({steps}) must exceed tail ({tail})"
        )));
    }
    if spec.ics.is_empty() {
        return Err(DynError::InvalidParams(
            "bifurcation sweep needs initial conditions".into(),
        ));
    }
    CoupledParams::new(LocalParams::new(1.0, k, a)?, d)?;
    let n_ics = spec.ics.len();
    let flat = runner.map_cells(spec.r_axis.len() * n_ics, |idx| {
        let r = spec.r_axis.value(idx / n_ics);
        let ic = spec.ics[idx % n_ics];
        let cp = CoupledParams::new(LocalParams::new(r, k, a)?, d)?;
        cp.iterate(ic, steps, steps - tail + 1)
            .map(|seg| seg.states)
    });
    let mut flat = flat.into_iter();
    Ok(spec
        .r_axis
        .iter()
        .map(|r| BifurcationColumn {
            r,
            tails: flat.by_ref().take(n_ics).collect(),
        })
        .collect())
}

/// `(r, d)` parameter plane at fixed `K` and `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSpec {
    pub k: f64,
    pub a: f64,
    pub r_axis: Axis,
    pub d_axis: Axis,
}

impl PlaneSpec {
    fn grid(&self) -> Result<GridSpec> {
        LocalParams::new(1.0, self.k, self.a)?;
        Ok(GridSpec::two_d(self.r_axis.clone(), self.d_axis.clone()))
    }
}

fn plane_code(rec: &crate::attractor::AttractorRecord) -> i32 {
    match rec.category {
        Category::Extinction => CODE_EXTINCT,
        Category::Transitional => CODE_UNRESOLVED,
        _ => rec.period as i32,
    }
}

/// Period code per `(r, d)` cell: the period, 0 for long cycles or chaos,
/// [`CODE_EXTINCT`] and [`CODE_UNRESOLVED`].
pub fn parameter_plane(
    runner: &SweepRunner,
    plane: &PlaneSpec,
    ic_policy: &IcPolicy,
    settings: &DetectorSettings,
) -> Result<ClassifiedGrid<i32>> {
    let (k, a) = (plane.k, plane.a);
    let spec = plane.grid()?;
    if let IcPolicy::FixedList(ics) = ic_policy {
        if ics.is_empty() {
            return Err(DynError::InvalidParams("fixed IC list is empty".into()));
        }
    }
    let cells = runner.map_cells(spec.cell_count(), |idx| {
        let (r, d) = spec.coords(idx);
        let cp = CoupledParams::new(LocalParams::new(r, k, a)?, d)?;
        let ic = match ic_policy {
            IcPolicy::FixedList(ics) => ics[idx % ics.len()],
            IcPolicy::RandomPerCell { seed } => draw_persistent_ic(&mut cell_rng(*seed, idx), k, a),
        };
        detect_attractor(&cp, ic, settings).map(|rec| plane_code(&rec))
    });
    Ok(ClassifiedGrid {
        spec,
        cells,
        meta: SweepMeta {
            k,
            a,
            settings: Some(*settings),
            seed: match ic_policy {
                IcPolicy::RandomPerCell { seed } => Some(*seed),
                IcPolicy::FixedList(_) => None,
            },
            ..Default::default()
        },
    })
}

/// Whether any of `n_random` seeded initial conditions from `(0, K)^2`
/// reaches an asymmetric attractor, per `(r, d)` cell.
pub fn asymmetric_region_probe(
    runner: &SweepRunner,
    plane: &PlaneSpec,
    n_random: usize,
    seed: u64,
    settings: &DetectorSettings,
) -> Result<ClassifiedGrid<bool>> {
    if n_random < 1 {
        return Err(DynError::InvalidParams("n_random must be >= 1".into()));
    }
    let (k, a) = (plane.k, plane.a);
    let spec = plane.grid()?;
    let cells = runner.map_cells(spec.cell_count(), |idx| {
        let (r, d) = spec.coords(idx);
        let cp = CoupledParams::new(LocalParams::new(r, k, a)?, d)?;
        let mut rng = cell_rng(seed, idx);
        for _ in 0..n_random {
            let ic = draw_state(&mut rng, 0.0, k);
            if detect_attractor(&cp, ic, settings)?
                .category
                .is_asymmetric()
            {
                return Ok(true);
            }
        }
        Ok(false)
    });
    Ok(ClassifiedGrid {
        spec,
        cells,
        meta: SweepMeta {
            k,
            a,
            settings: Some(*settings),
            seed: Some(seed),
            n_random: Some(n_random),
            ..Default::default()
        },
    })
}

/// Detector settings for basin pictures: 2000-step runs.
pub fn basin_settings() -> DetectorSettings {
    DetectorSettings::default().with_transient(2000)
}

/// Attractor label of each initial condition on a `(x0, y0)` grid.
pub fn basin_grid(
    runner: &SweepRunner,
    cp: &CoupledParams,
    ic_grid: &GridSpec,
    settings: &DetectorSettings,
) -> Result<ClassifiedGrid<BasinCell>> {
    ic_grid.require_two_d()?;
    let cells = runner.map_cells(ic_grid.cell_count(), |idx| {
        let (x0, y0) = ic_grid.coords(idx);
        detect_attractor(cp, PatchState::new(x0, y0), settings).map(|rec| BasinCell {
            label: rec.category.into(),
            period: rec.period,
        })
    });
    Ok(ClassifiedGrid {
        spec: ic_grid.clone(),
        cells,
        meta: SweepMeta {
            k: cp.k(),
            a: cp.a(),
            r: Some(cp.r()),
            d: Some(cp.d()),
            settings: Some(*settings),
            ..Default::default()
        },
    })
}

/// Extinction time per initial condition; never-extinct cells hold `cap + 1`.
pub fn extinction_time_grid(
    runner: &SweepRunner,
    cp: &CoupledParams,
    ic_grid: &GridSpec,
    cap: usize,
    extinct_tol: f64,
) -> Result<ClassifiedGrid<usize>> {
    ic_grid.require_two_d()?;
    if cap < 1 {
        return Err(DynError::InvalidParams("cap must be >= 1".into()));
    }
    let cells = runner.map_cells(ic_grid.cell_count(), |idx| {
        let (x0, y0) = ic_grid.coords(idx);
        time_to_extinction(cp, PatchState::new(x0, y0), cap, extinct_tol).map(|t| t.encode(cap))
    });
    Ok(ClassifiedGrid {
        spec: ic_grid.clone(),
        cells,
        meta: SweepMeta {
            k: cp.k(),
            a: cp.a(),
            r: Some(cp.r()),
            d: Some(cp.d()),
            cap: Some(cap),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_validation() {
        assert!(Axis::uniform("r", 0.0, 1.0, 1).is_err());
        assert!(Axis::uniform("r", 1.0, 1.0, 3).is_err());
        assert!(Axis::explicit("r", vec![]).is_err());
        let ax = Axis::uniform("r", 0.0, 1.0, 5).unwrap();
        assert_eq!(ax.value(0), 0.0);
        assert_eq!(ax.value(4), 1.0);
        assert_eq!(ax.value(2), 0.5);
    }

    #[test]
    fn coords_are_axis1_fastest() {
        let g = GridSpec::two_d(
            Axis::uniform("a", 0.0, 1.0, 3).unwrap(),
            Axis::uniform("b", 10.0, 20.0, 2).unwrap(),
        );
        assert_eq!(g.cell_count(), 6);
        assert_eq!(g.coords(0), (0.0, 10.0));
        assert_eq!(g.coords(2), (1.0, 10.0));
        assert_eq!(g.coords(3), (0.0, 20.0));
    }

    #[test]
    fn cell_streams_are_independent_of_order() {
        let a: Vec<f64> = (0..4).map(|c| cell_rng(7, c).gen::<f64>()).collect();
        let b: Vec<f64> = (0..4).rev().map(|c| cell_rng(7, c).gen::<f64>()).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn persistent_draws_respect_condition() {
        let mut rng = cell_rng(3, 0);
        for _ in 0..1000 {
            let s = draw_persistent_ic(&mut rng, 1.0, 0.2);
            assert!(s.x > 0.2 || s.y > 0.2);
            assert!(s.x < 1.0 && s.y < 1.0);
        }
    }

    #[test]
    fn boundary_fraction_of_halves() {
        let spec = GridSpec::square_ic(0.0, 1.0, 4).unwrap();
        let cells = (0..16).map(|i| Ok(i % 4 < 2)).collect();
        let g = ClassifiedGrid {
            spec,
            cells,
            meta: SweepMeta::default(),
        };
        assert!((g.boundary_fraction() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweeps_require_two_d_grids() {
        let cp = CoupledParams::normalized(0.6, 0.1).unwrap();
        let g = GridSpec::one_d(Axis::uniform("x0", 0.0, 1.0, 3).unwrap());
        assert!(basin_grid(&SweepRunner::serial(), &cp, &g, &basin_settings()).is_err());
        assert!(extinction_time_grid(&SweepRunner::serial(), &cp, &g, 10, 1e-4).is_err());
    }

    #[test]
    fn bad_cells_do_not_abort() {
        // d = 0.6 is invalid for every cell but the sweep still returns.
        let plane = PlaneSpec {
            k: 1.0,
            a: 0.2,
            r_axis: Axis::explicit("r", vec![0.4]).unwrap(),
            d_axis: Axis::explicit("d", vec![0.1, 0.6]).unwrap(),
        };
        let g = parameter_plane(
            &SweepRunner::serial(),
            &plane,
            &IcPolicy::FixedList(vec![PatchState::new(0.9, 0.9)]),
            &DetectorSettings::default(),
        )
        .unwrap();
        assert_eq!(g.cells[0], Ok(1));
        assert!(g.cells[1].is_err());
        assert_eq!(g.error_count(), 1);
    }
}
