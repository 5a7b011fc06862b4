use std::path::{Path, PathBuf};
use std::time::Instant;

use ricker_allee::attractor::{label_state, local_cycle, perturbed_seeds, product_periodic_points};
use ricker_allee::nullcline::{fixed_points, intersection_seeds};
use ricker_allee::sweep::{
    asymmetric_region_probe, basin_grid, bifurcation_sweep, extinction_time_grid, parameter_plane,
    Axis, BasinCell, BasinLabel, BifurcationSpec, ClassifiedGrid, GridSpec, IcPolicy, PlaneSpec,
    SweepRunner,
};
use ricker_allee::{
    census, detect_attractor, nullclines, solve_r_th, transient_trace, CoupledParams,
    ExtinctionTime, PatchState, Result as DynResult,
};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output::{csv_sink, num, sibling, write_pgm, CsvSink, Manifest};

/// Everything a command needs besides its own flags.
pub struct Run {
    pub runner: SweepRunner,
    pub manifest: Manifest,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(runner: SweepRunner, manifest: Manifest) -> Self {
        Self {
            runner,
            manifest,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    /// Summary lines go to stdout when data goes to a file, else to stderr.
    fn note(&self, out: Option<&Path>, msg: &str) {
        if out.is_some() {
            println!("{msg}");
        } else {
            eprintln!("{msg}");
        }
    }

    /// Records an effective setting that has no flag default of its own.
    fn record(&mut self, key: &str, value: impl ToString) {
        let key = format!("param.{key}");
        if self.manifest.get(&key).is_none() {
            self.manifest.push(key, value.to_string());
        }
    }

    fn extra_output(&mut self, p: PathBuf) {
        self.outputs.push(p);
    }

    /// Writes `<out>.manifest` when the data went to a file.
    pub fn finish(mut self, out: Option<&Path>) -> CliResult<()> {
        let Some(out) = out else { return Ok(()) };
        self.outputs.insert(0, out.to_path_buf());
        let list: Vec<String> = self
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        self.manifest.push("outputs", list.join(";"));
        self.manifest.push(
            "duration_s",
            format!("{:.6}", self.started.elapsed().as_secs_f64()),
        );
        self.manifest.write(&sibling(out, ".manifest"))
    }
}

const SHOWCASE_SEEDS: [(f64, f64); 6] = [
    (0.03, 0.04),
    (0.16, 0.86),
    (0.86, 0.16),
    (0.64, 0.38),
    (0.82, 0.98),
    (0.38, 0.58),
];
const BIFURCATION_ICS: [(f64, f64); 5] = [
    (0.08, 0.19),
    (0.44, 0.14),
    (0.73, 0.11),
    (0.76, 0.73),
    (0.99, 0.17),
];

fn states(pairs: &[(f64, f64)]) -> Vec<PatchState> {
    pairs.iter().map(|&(x, y)| PatchState::new(x, y)).collect()
}

fn finish_csv(mut w: CsvSink) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io("csv output", e))
}

fn error_text<T>(cell: &DynResult<T>) -> String {
    cell.as_ref()
        .err()
        .map(ToString::to_string)
        .unwrap_or_default()
}

fn ic_grid(lo: f64, hi: f64, n: usize) -> CliResult<GridSpec> {
    Ok(GridSpec::square_ic(lo, hi, n)?)
}

pub fn regime(a: &RegimeArgs) -> CliResult<()> {
    let lp = a.local.params()?;
    let rep = lp.regime(a.tol)?;
    println!("D={}", num(rep.d));
    println!("M={}", num(rep.m));
    println!("A_star={}", num(rep.a_star));
    println!("f(M)-A={}", num(rep.r_th_side));
    println!("regime={}", rep.regime);
    Ok(())
}

pub fn rth(a: &RthArgs) -> CliResult<()> {
    let th = solve_r_th(a.k, a.a, a.tol)?;
    println!("r_th={}", num(th.r));
    println!("residual={}", num(th.residual));
    Ok(())
}

pub fn orbit(run: Run, a: &OrbitArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let seg = cp.iterate(a.start.state(), a.steps, a.record_from)?;
    let mut w = csv_sink(a.out.out.as_deref())?;
    w.write_record(["t", "x", "y"])?;
    for (i, s) in seg.states.iter().enumerate() {
        w.write_record([(seg.start_index + i).to_string(), num(s.x), num(s.y)])?;
    }
    finish_csv(w)?;
    run.finish(a.out.out.as_deref())
}

pub fn attractor(a: &AttractorArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let rec = detect_attractor(&cp, a.start.state(), &a.detector.settings(5000))?;
    println!("{rec}");
    if let Some(rho) = rec.stability {
        println!("spectral_radius={}", num(rho));
    }
    for p in &rec.orbit_points {
        println!("point={},{}", num(p.x), num(p.y));
    }
    Ok(())
}

pub fn census_cmd(mut run: Run, a: &CensusArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let settings = a.detector.settings(5000);
    run.record("transient", settings.transient);
    let seeds = if a.product_seeds {
        let uncoupled = CoupledParams::new(*cp.local(), 0.0)?;
        let cycle = local_cycle(
            &uncoupled,
            0.5 * (cp.a() + cp.k()),
            settings.transient,
            settings.max_period,
            1e-10,
        )?;
        perturbed_seeds(&product_periodic_points(&cycle), a.eps)
    } else if a.ics.is_empty() {
        states(&SHOWCASE_SEEDS)
    } else {
        a.ics.clone()
    };
    let found = census(&cp, &seeds, &settings)?;
    let out = a.out.out.as_deref();
    println!("attractors={}", found.len());
    for (i, rec) in found.iter().enumerate() {
        let rho = rec.stability.map(num).unwrap_or_else(|| "NA".into());
        println!("{i}: {rec} spectral_radius={rho}");
    }
    if out.is_some() {
        let mut w = csv_sink(out)?;
        w.write_record([
            "attractor",
            "category",
            "period",
            "phase",
            "spectral_radius",
            "x",
            "y",
        ])?;
        for (i, rec) in found.iter().enumerate() {
            let rho = rec.stability.map(num).unwrap_or_else(|| "NA".into());
            let head = [
                i.to_string(),
                rec.category.to_string(),
                rec.period.to_string(),
                rec.phase.to_string(),
                rho,
            ];
            if rec.orbit_points.is_empty() {
                w.write_record(head.iter().cloned().chain(["NA".into(), "NA".into()]))?;
            }
            for p in &rec.orbit_points {
                w.write_record(head.iter().cloned().chain([num(p.x), num(p.y)]))?;
            }
        }
        finish_csv(w)?;
    }
    run.finish(out)
}

pub fn bifurcation(run: Run, a: &BifurcationArgs) -> CliResult<()> {
    let spec = BifurcationSpec {
        k: a.k,
        a: a.a,
        d: a.d,
        r_axis: Axis::uniform("r", a.r_min, a.r_max, a.r_count)?,
        ics: if a.ics.is_empty() {
            states(&BIFURCATION_ICS)
        } else {
            a.ics.clone()
        },
        steps: a.steps,
        tail: a.tail,
    };
    let cols = bifurcation_sweep(&run.runner, &spec)?;
    let mut w = csv_sink(a.out.out.as_deref())?;
    w.write_record(["r", "ic", "x", "y", "error"])?;
    for col in &cols {
        for (ic, tail) in col.tails.iter().enumerate() {
            match tail {
                Ok(states) => {
                    for s in states {
                        w.write_record([
                            num(col.r),
                            ic.to_string(),
                            num(s.x),
                            num(s.y),
                            String::new(),
                        ])?;
                    }
                }
                Err(e) => w.write_record([
                    num(col.r),
                    ic.to_string(),
                    "NA".into(),
                    "NA".into(),
                    e.to_string(),
                ])?,
            }
        }
    }
    finish_csv(w)?;
    run.finish(a.out.out.as_deref())
}

fn plane_spec(a: &PlaneAxesArgs) -> CliResult<PlaneSpec> {
    Ok(PlaneSpec {
        k: a.k,
        a: a.a,
        r_axis: Axis::uniform("r", a.r_min, a.r_max, a.r_count)?,
        d_axis: Axis::uniform("d", a.d_min, a.d_max, a.d_count)?,
    })
}

fn write_plane<T>(
    w: &mut CsvSink,
    g: &ClassifiedGrid<T>,
    value_col: &str,
    value: impl Fn(&T) -> String,
) -> CliResult<()> {
    w.write_record(["r", "d", value_col, "error"])?;
    for (idx, cell) in g.cells.iter().enumerate() {
        let (r, d) = g.spec.coords(idx);
        let v = cell.as_ref().map(&value).unwrap_or_else(|_| "NA".into());
        w.write_record([num(r), num(d), v, error_text(cell)])?;
    }
    Ok(())
}

pub fn plane(mut run: Run, a: &PlaneArgs) -> CliResult<()> {
    let policy = if a.ics.is_empty() {
        IcPolicy::RandomPerCell { seed: a.seed }
    } else {
        IcPolicy::FixedList(a.ics.clone())
    };
    let settings = a.detector.settings(5000);
    run.record("transient", settings.transient);
    let g = parameter_plane(&run.runner, &plane_spec(&a.axes)?, &policy, &settings)?;
    let mut w = csv_sink(a.out.out.as_deref())?;
    write_plane(&mut w, &g, "code", i32::to_string)?;
    finish_csv(w)?;
    run.finish(a.out.out.as_deref())
}

pub fn region_probe(mut run: Run, a: &RegionProbeArgs) -> CliResult<()> {
    let settings = a.detector.settings(5000);
    run.record("transient", settings.transient);
    let g = asymmetric_region_probe(
        &run.runner,
        &plane_spec(&a.axes)?,
        a.n_random,
        a.seed,
        &settings,
    )?;
    let mut w = csv_sink(a.out.out.as_deref())?;
    write_plane(&mut w, &g, "asymmetric", |b| u8::from(*b).to_string())?;
    finish_csv(w)?;
    run.finish(a.out.out.as_deref())
}

/// Gray levels of basin labels.
pub fn basin_gray(cell: &DynResult<BasinCell>) -> u8 {
    match cell.as_ref().map(|c| c.label) {
        Ok(BasinLabel::Extinction) => 0,
        Ok(BasinLabel::AsymmetricXHigh) => 85,
        Ok(BasinLabel::AsymmetricYHigh) => 170,
        Ok(BasinLabel::Symmetric) => 255,
        Ok(BasinLabel::Unresolved) | Err(_) => 128,
    }
}

/// White for immediate extinction, black for `cap` or never.
pub fn time_gray(cell: &DynResult<usize>, cap: usize) -> u8 {
    match cell {
        Ok(t) if *t <= cap => 255 - (255.0 * *t as f64 / cap as f64).round() as u8,
        _ => 0,
    }
}

/// Pixels with the largest `y0` on the top row.
fn image_rows<T>(
    g: &ClassifiedGrid<T>,
    gray: impl Fn(&DynResult<T>) -> u8,
) -> (usize, usize, Vec<u8>) {
    let (n1, n2) = g.dims();
    let mut px = Vec::with_capacity(n1 * n2);
    for j in (0..n2).rev() {
        for i in 0..n1 {
            px.push(gray(g.get(i, j)));
        }
    }
    (n1, n2, px)
}

fn maybe_pgm<T>(
    run: &mut Run,
    out: Option<&Path>,
    image: &ImageArgs,
    g: &ClassifiedGrid<T>,
    gray: impl Fn(&DynResult<T>) -> u8,
) -> CliResult<()> {
    if !image.pgm {
        return Ok(());
    }
    let out = out.ok_or_else(|| usage("--pgm needs --out"))?;
    let path = sibling(out, ".pgm");
    let (w, h, px) = image_rows(g, gray);
    write_pgm(&path, w, h, &px, image.binary)?;
    run.extra_output(path);
    Ok(())
}

pub fn basin(mut run: Run, a: &BasinArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let grid = ic_grid(a.grid.lo, a.grid.hi, a.grid.grid)?;
    let out = a.out.out.as_deref();
    if a.image.pgm && out.is_none() {
        return Err(usage("--pgm needs --out"));
    }
    let settings = a.detector.settings(2000);
    run.record("transient", settings.transient);
    let g = basin_grid(&run.runner, &cp, &grid, &settings)?;
    let mut w = csv_sink(out)?;
    w.write_record(["x0", "y0", "label", "period", "error"])?;
    for (idx, cell) in g.cells.iter().enumerate() {
        let (x0, y0) = grid.coords(idx);
        let (label, period) = match cell {
            Ok(c) => (c.label.name().to_string(), c.period.to_string()),
            Err(_) => ("NA".into(), "NA".into()),
        };
        w.write_record([num(x0), num(y0), label, period, error_text(cell)])?;
    }
    finish_csv(w)?;
    maybe_pgm(&mut run, out, &a.image, &g, basin_gray)?;
    let labels = g.labels();
    let counts: Vec<String> = [
        BasinLabel::Extinction,
        BasinLabel::AsymmetricXHigh,
        BasinLabel::AsymmetricYHigh,
        BasinLabel::Symmetric,
        BasinLabel::Unresolved,
    ]
    .iter()
    .map(|&l| format!("{}={}", l.name(), labels.label_count(l)))
    .collect();
    run.note(
        out,
        &format!(
            "{} errors={} boundary_fraction={:.6}",
            counts.join(" "),
            g.error_count(),
            labels.boundary_fraction()
        ),
    );
    run.finish(out)
}

pub fn ext_time(mut run: Run, a: &ExtTimeArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let grid = ic_grid(a.grid.lo, a.grid.hi, a.grid.grid)?;
    let out = a.out.out.as_deref();
    if a.image.pgm && out.is_none() {
        return Err(usage("--pgm needs --out"));
    }
    let g = extinction_time_grid(&run.runner, &cp, &grid, a.cap, a.extinct_tol)?;
    let mut w = csv_sink(out)?;
    w.write_record(["x0", "y0", "time", "error"])?;
    for (idx, cell) in g.cells.iter().enumerate() {
        let (x0, y0) = grid.coords(idx);
        let t = cell
            .as_ref()
            .map(ToString::to_string)
            .unwrap_or_else(|_| "NA".into());
        w.write_record([num(x0), num(y0), t, error_text(cell)])?;
    }
    finish_csv(w)?;
    let cap = a.cap;
    maybe_pgm(&mut run, out, &a.image, &g, |c| time_gray(c, cap))?;
    let min = g.ok_values().min().copied().unwrap_or(0);
    let max = g.ok_values().max().copied().unwrap_or(0);
    run.note(
        out,
        &format!("min_time={min} max_time={max} errors={}", g.error_count()),
    );
    run.finish(out)
}

pub fn nullclines_cmd(run: Run, a: &NullclineArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let set = nullclines(&run.runner, &cp, a.iterate, &ic_grid(a.lo, a.hi, a.grid)?)?;
    let out = a.out.out.as_deref();
    let mut w = csv_sink(out)?;
    w.write_record(["family", "curve", "vertex", "x", "y"])?;
    for (ci, c) in set.curves.iter().enumerate() {
        for (vi, p) in c.points.iter().enumerate() {
            w.write_record([
                c.family.name().to_string(),
                ci.to_string(),
                vi.to_string(),
                num(p[0]),
                num(p[1]),
            ])?;
        }
    }
    finish_csv(w)?;
    run.note(
        out,
        &format!(
            "curves={} skipped_cells={}",
            set.curves.len(),
            set.skipped_cells
        ),
    );
    run.finish(out)
}

pub fn fixed_points_cmd(run: Run, a: &FixedPointArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let mut seeds = intersection_seeds(&run.runner, &cp, a.iterate, &ic_grid(a.lo, a.hi, a.grid)?)?;
    seeds.extend(a.ics.iter().copied());
    let rep = fixed_points(&cp, a.iterate, &seeds)?;
    let out = a.out.out.as_deref();
    let mut w = csv_sink(out)?;
    w.write_record(["x", "y", "spectral_radius", "stable"])?;
    for p in &rep.points {
        w.write_record([
            num(p.state.x),
            num(p.state.y),
            num(p.spectral_radius),
            p.stable.to_string(),
        ])?;
    }
    finish_csv(w)?;
    run.note(
        out,
        &format!(
            "fixed_points={} seeds={} non_convergent={}",
            rep.points.len(),
            seeds.len(),
            rep.failed.len()
        ),
    );
    run.finish(out)
}

pub fn transient(run: Run, a: &TransientArgs) -> CliResult<()> {
    let cp = a.cp.params()?;
    let tr = transient_trace(&cp, a.start.state(), a.cap, a.extinct_tol)?;
    let out = a.out.out.as_deref();
    let mut w = csv_sink(out)?;
    w.write_record(["t", "x", "y", "label"])?;
    for (i, s) in tr.orbit.states.iter().enumerate() {
        let label = label_state(*s, cp.a(), a.extinct_tol);
        w.write_record([
            (tr.orbit.start_index + i).to_string(),
            num(s.x),
            num(s.y),
            label.to_string(),
        ])?;
    }
    finish_csv(w)?;
    let ext = match tr.extinction {
        ExtinctionTime::At(t) => t.to_string(),
        ExtinctionTime::NotExtinct => "none".into(),
    };
    run.note(
        out,
        &format!(
            "extinction={ext} switches={} ghost_switches={}",
            tr.switches(),
            tr.asymmetric_switches()
        ),
    );
    for s in &tr.segments {
        run.note(out, &format!("segment {} {}..{}", s.label, s.start, s.end));
    }
    run.finish(out)
}
