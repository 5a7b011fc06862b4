use proptest::prelude::*;
use ricker_allee::attractor::{
    local_cycle, perturbed_seeds, product_periodic_points, segment_labels,
};
use ricker_allee::{
    census, detect_attractor, time_to_extinction, transient_trace, Category, CoupledParams,
    DetectorSettings, ExtinctionTime, PatchState, Phase,
};

fn cp(r: f64, d: f64) -> CoupledParams {
    CoupledParams::normalized(r, d).unwrap()
}

fn settings() -> DetectorSettings {
    DetectorSettings::default()
}

fn showcase_seeds() -> Vec<PatchState> {
    [
        (0.03, 0.04),
        (0.16, 0.86),
        (0.86, 0.16),
        (0.64, 0.38),
        (0.82, 0.98),
        (0.38, 0.58),
    ]
    .iter()
    .map(|&(x, y)| PatchState::new(x, y))
    .collect()
}

fn returns_after(c: &CoupledParams, p: PatchState, n: usize, tol: f64) -> bool {
    c.advance(p, n).unwrap().max_dist(p) < tol
}

#[test]
fn out_of_phase_two_cycle() {
    let rec = detect_attractor(&cp(0.63, 0.01), PatchState::new(0.38, 0.58), &settings()).unwrap();
    assert_eq!(
        (rec.category, rec.period, rec.phase),
        (Category::Symmetric, 2, Phase::OutOfPhase)
    );
    assert_eq!(rec.to_string(), "Symmetric period=2 phase=OutOfPhase");
}

#[test]
fn in_phase_four_cycle() {
    let rec = detect_attractor(&cp(0.63, 0.01), PatchState::new(0.64, 0.38), &settings()).unwrap();
    assert_eq!(
        (rec.category, rec.period, rec.phase),
        (Category::Symmetric, 4, Phase::InPhase)
    );
}

#[test]
fn x_high_asymmetry() {
    let rec = detect_attractor(&cp(0.63, 0.01), PatchState::new(0.86, 0.16), &settings()).unwrap();
    assert_eq!(rec.category, Category::AsymmetricXHigh);
    assert!(rec.orbit_points.iter().all(|p| p.x > 0.2 && p.y < 0.2));
}

#[test]
fn low_growth_equilibrium() {
    let rec = detect_attractor(&cp(0.4, 0.1), PatchState::new(0.9, 0.9), &settings()).unwrap();
    assert_eq!((rec.category, rec.period), (Category::Symmetric, 1));
    assert!(rec.orbit_points[0].max_dist(PatchState::new(1.0, 1.0)) < 1e-9);
    assert_eq!(rec.phase, Phase::Undefined);
}

#[test]
fn extinction_record() {
    let c = cp(0.63, 0.01);
    let rec = detect_attractor(&c, PatchState::new(0.03, 0.04), &settings()).unwrap();
    assert_eq!(rec.category, Category::Extinction);
    assert_eq!(rec.orbit_points, vec![PatchState::ORIGIN]);
    assert!((rec.stability.unwrap() - (-0.63f64).exp()).abs() < 1e-14);
}

#[test]
fn detector_validates_settings() {
    let c = cp(0.63, 0.01);
    let s = PatchState::new(0.5, 0.5);
    assert!(detect_attractor(&c, s, &settings().with_transient(0)).is_err());
    let bad = DetectorSettings {
        max_period: 65,
        ..settings()
    };
    assert!(detect_attractor(&c, s, &bad).is_err());
    let bad = DetectorSettings {
        max_period: 0,
        ..settings()
    };
    assert!(detect_attractor(&c, s, &bad).is_err());
}

#[test]
fn chaotic_orbit_reports_period_zero() {
    let rec = detect_attractor(&cp(0.87, 0.0), PatchState::new(0.5, 0.6), &settings()).unwrap();
    assert_eq!(rec.period, 0);
    assert!(rec.orbit_points.is_empty());
    assert!(rec.stability.is_none());
}

#[test]
fn detected_periods_are_minimal_and_stable() {
    let s = settings();
    for &(r, d) in &[
        (0.63, 0.01),
        (0.63, 0.05),
        (0.5, 0.01),
        (0.7, 0.2),
        (0.4, 0.1),
    ] {
        let c = cp(r, d);
        for i in 0..6 {
            for j in 0..6 {
                let s0 = PatchState::new(0.1 + 0.25 * i as f64, 0.1 + 0.25 * j as f64);
                let rec = detect_attractor(&c, s0, &s).unwrap();
                let n = rec.period;
                if n == 0 {
                    continue;
                }
                for p in &rec.orbit_points {
                    assert!(returns_after(&c, *p, n, s.match_tol));
                }
                for m in (1..n).filter(|m| n.is_multiple_of(*m)) {
                    assert!(
                        !rec.orbit_points
                            .iter()
                            .all(|p| returns_after(&c, *p, m, s.match_tol)),
                        "period {n} not minimal at r={r} d={d}"
                    );
                }
                assert!(rec.stability.unwrap() <= 1.0 + 1e-6, "r={r} d={d} {rec}");
            }
        }
    }
}

#[test]
fn showcase_seeds_give_six_attractors() {
    let found = census(&cp(0.63, 0.01), &showcase_seeds(), &settings()).unwrap();
    assert_eq!(found.len(), 6);
    assert!(found.iter().all(|r| r.is_linearly_stable()));
}

#[test]
fn census_is_idempotent_under_duplicates() {
    let c = cp(0.63, 0.01);
    let seeds = showcase_seeds();
    let once = census(&c, &seeds, &settings()).unwrap();
    let doubled: Vec<PatchState> = seeds.iter().chain(seeds.iter()).copied().collect();
    let twice = census(&c, &doubled, &settings()).unwrap();
    assert_eq!(once, twice);
    assert!(census(&c, &[], &settings()).is_err());
}

fn product_census(r: f64, d: f64) -> (usize, Vec<ricker_allee::AttractorRecord>) {
    let c = cp(r, d);
    let cycle = local_cycle(&cp(r, 0.0), 0.5, 5000, 8, 1e-10).unwrap();
    let seeds = perturbed_seeds(&product_periodic_points(&cycle), 1e-3);
    (cycle.len(), census(&c, &seeds, &settings()).unwrap())
}

#[test]
fn uncoupled_census_has_n_plus_three_orbits() {
    let (n, found) = product_census(0.63, 0.0);
    assert_eq!(n, 4);
    assert_eq!(found.len(), n + 3);
    assert!(found.iter().all(|r| r.is_linearly_stable()));
}

#[test]
fn weak_coupling_keeps_n_plus_three_stable_orbits() {
    for &d in &[1e-3, 1e-4] {
        let (n, found) = product_census(0.63, d);
        assert_eq!(found.len(), n + 3, "d={d}");
        assert!(found.iter().all(|r| r.stability.unwrap() < 1.0), "d={d}");
    }
}

#[test]
fn uncoupled_low_growth_has_four_equilibria() {
    let c = cp(0.4, 0.0);
    let seeds: Vec<PatchState> = [(0.1, 0.1), (0.1, 0.9), (0.9, 0.1), (0.9, 0.9)]
        .iter()
        .map(|&(x, y)| PatchState::new(x, y))
        .collect();
    let found = census(&c, &seeds, &settings()).unwrap();
    assert_eq!(found.len(), 4);
    let expected = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
    for (rec, &(x, y)) in found.iter().zip(expected.iter()) {
        assert_eq!(rec.period, 1);
        assert!(rec.orbit_points[0].max_dist(PatchState::new(x, y)) < 1e-9);
    }
}

#[test]
fn extinction_times() {
    let c = cp(0.89, 0.186);
    assert_eq!(
        time_to_extinction(&c, PatchState::ORIGIN, 10, 1e-4).unwrap(),
        ExtinctionTime::At(0)
    );
    assert!(time_to_extinction(&c, PatchState::ORIGIN, 0, 1e-4).is_err());
    let mut times = Vec::new();
    let coord = |i: usize| 0.001 + 1.498 * i as f64 / 30.0;
    for i in 0..=30 {
        for j in 0..=30 {
            let s0 = PatchState::new(coord(i), coord(j));
            times.push(time_to_extinction(&c, s0, 3000, 1e-4).unwrap().encode(3000));
        }
    }

    assert!(times.iter().any(|&t| t <= 5));
    assert!(times.iter().any(|&t| t > 2000));
    let bistable = cp(0.63, 0.01);
    let t = time_to_extinction(&bistable, PatchState::new(0.38, 0.58), 5000, 1e-4).unwrap();
    assert_eq!(t, ExtinctionTime::NotExtinct);
    assert_eq!(t.encode(5000), 5001);
}

#[test]
fn long_transient_from_reference_start() {
    let c = cp(0.898, 0.0415);
    let t = time_to_extinction(&c, PatchState::new(0.07381, 0.53102), 100_000, 1e-4).unwrap();
    assert!(matches!(t, ExtinctionTime::At(_)));
}

#[test]
fn long_transients_near_reference_start() {
    // The exact lifetime of a single orbit on the chaotic saddle depends on
    // the last bits of arithmetic, so the neighbourhood is sampled instead.
    let c = cp(0.898, 0.0415);
    let mut long = 0;
    let mut long_with_switches = 0;
    for i in 0..20 {
        for j in 0..20 {
            let s0 = PatchState::new(
                0.07381 + 1e-8 * (i as f64 - 10.0),
                0.53102 + 1e-8 * (j as f64 - 10.0),
            );
            let tr = transient_trace(&c, s0, 100_000, 1e-4).unwrap();
            if let ExtinctionTime::At(t) = tr.extinction {
                if t > 10_000 {
                    long += 1;
                    if tr.asymmetric_switches() >= 2 {
                        long_with_switches += 1;
                    }
                }
            }
        }
    }
    assert!(long >= 40, "only {long} of 400 lifetimes exceed 1e4");
    assert!(long_with_switches >= 1);
}

#[test]
fn trace_without_switches() {
    let tr = transient_trace(&cp(0.4, 0.1), PatchState::new(0.9, 0.9), 2000, 1e-4).unwrap();
    assert_eq!(tr.segments.len(), 1);
    assert_eq!(tr.switches(), 0);
    assert_eq!(tr.extinction, ExtinctionTime::NotExtinct);
    assert!(tr.orbit.is_consistent_with(&cp(0.4, 0.1)));
}

#[test]
fn trace_of_asymmetric_orbit() {
    let tr = transient_trace(&cp(0.63, 0.01), PatchState::new(0.16, 0.86), 3000, 1e-4).unwrap();
    assert_eq!(tr.segments.len(), 1);
    assert_eq!(tr.segments[0].label, Category::AsymmetricYHigh);
}

#[test]
fn short_excursions_are_absorbed() {
    use Category::*;
    let mut labels = vec![AsymmetricXHigh; 200];
    labels.extend(vec![Transitional; 10]);
    labels.extend(vec![AsymmetricYHigh; 100]);
    labels.extend(vec![AsymmetricXHigh; 20]);
    let seg = segment_labels(&labels, 50);
    assert_eq!(seg.len(), 2);
    assert_eq!(seg[0].label, AsymmetricXHigh);
    assert_eq!(seg[1].label, AsymmetricYHigh);
    assert_eq!(seg[1].end, labels.len());
}

fn start() -> impl Strategy<Value = PatchState> {
    (0.0f64..1.5, 0.0f64..1.5).prop_map(|(x, y)| PatchState::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn swap_covariance(s0 in start(), d in prop::sample::select(vec![0.0, 0.01, 0.05, 0.2])) {
        let c = cp(0.63, d);
        let a = detect_attractor(&c, s0, &settings()).unwrap();
        let b = detect_attractor(&c, s0.swapped(), &settings()).unwrap();
        prop_assert_eq!(b.category, a.category.swapped());
        prop_assert_eq!(b.period, a.period);
    }

    #[test]
    fn reached_cycles_are_stable(s0 in start(), r in 0.3f64..0.87, d in 0.0f64..0.5) {
        let rec = detect_attractor(&cp(r, d), s0, &settings()).unwrap();
        if rec.period > 0 {
            prop_assert!(rec.stability.unwrap() <= 1.0 + 1e-6, "{}", rec);
        }
    }
}
