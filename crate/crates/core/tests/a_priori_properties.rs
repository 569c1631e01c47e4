use igo_core::hybridsim::{simulate, Horizon};
use igo_core::model::{Modulation, ModulationBounds};
use igo_core::numerics::{ChainPlant, StateVec};
use igo_core::poincare::{
    fixed_point_analytic, fixed_point_multistart, fixed_point_numeric, iterate, ultimate_bound,
    CycleSpec, FixedPoint,
};
use igo_core::stability::StabilityReport;
use igo_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn atracurium() -> (ChainPlant, FixedPoint) {
    let plant = ChainPlant::atracurium();
    let fp = fixed_point_analytic(&plant, CycleSpec::new(300.0, 20.0).unwrap()).unwrap();
    (plant, fp)
}

fn affine(fp: &FixedPoint, f_slope: f64, phi_slope: f64) -> Modulation {
    Modulation::saturated_affine(
        fp.output,
        fp.spec.weight,
        fp.spec.period,
        f_slope,
        phi_slope,
        ModulationBounds::around(fp.spec.weight, fp.spec.period),
    )
}

fn random_plant(rng: &mut ChaCha8Rng) -> ChainPlant {
    loop {
        let mut a = [0.0; 3].map(|_| 10f64.powf(rng.gen_range(-2.0..0.0)));
        a.sort_by(f64::total_cmp);
        if a[1] - a[0] < 1e-3 || a[2] - a[1] < 1e-3 {
            continue;
        }
        let g = [0.0; 2].map(|_| 10f64.powf(rng.gen_range(-2.0..0.0)));
        return ChainPlant::new(a, g).unwrap();
    }
}

fn random_starts(rng: &mut ChaCha8Rng, around: &StateVec, n: usize) -> Vec<StateVec> {
    (0..n)
        .map(|_| around.map(|v| v * rng.gen_range(0.0..2.0)))
        .collect()
}

#[test]
fn fixed_point_unique_from_random_starts() {
    let (plant, fp) = atracurium();
    let m = affine(&fp, -1.0, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let starts = random_starts(&mut rng, &fp.state, 100);
    for r in fixed_point_multistart(&plant, &m, &starts, Execution::Parallel) {
        let found = r.unwrap();
        assert!((found.state - fp.state).amax() <= 1e-6 * fp.state.amax());
    }
}

#[test]
fn multistart_parallel_matches_sequential() {
    let (plant, fp) = atracurium();
    let m = affine(&fp, -1.0, 5.5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let starts = random_starts(&mut rng, &fp.state, 40);
    let a = fixed_point_multistart(&plant, &m, &starts, Execution::Sequential);
    let b = fixed_point_multistart(&plant, &m, &starts, Execution::Parallel);
    assert_eq!(a, b);
}

#[test]
fn numeric_fixed_point_matches_analytic_on_random_plants() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let plant = random_plant(&mut rng);
        let spec = CycleSpec::new(rng.gen_range(1.0..1000.0), rng.gen_range(1.0..50.0)).unwrap();
        let fp = fixed_point_analytic(&plant, spec).unwrap();
        let f_slope = -rng.gen_range(0.0..1.0) * spec.weight / fp.output;
        let phi_slope = rng.gen_range(0.0..1.0) * spec.period / fp.output;
        for m in [
            affine(&fp, f_slope, phi_slope),
            Modulation::hill(
                fp.output,
                spec.weight,
                spec.period,
                f_slope,
                phi_slope,
                ModulationBounds::around(spec.weight, spec.period),
            ),
        ] {
            let found = fixed_point_numeric(&plant, &m, &(fp.state * 0.9)).unwrap();
            let rel = (found.state - fp.state).amax() / fp.state.amax();
            assert!(rel <= 1e-8, "{rel:e} for {plant:?} {spec:?}");
        }
    }
}

#[test]
fn orbits_enter_ultimate_bound() {
    let (plant, fp) = atracurium();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for phi_slope in [0.0, 2.0, 4.0, 5.5, 6.0] {
        let m = affine(&fp, -1.0, phi_slope);
        let bound = ultimate_bound(&plant, &m);
        for x0 in random_starts(&mut rng, &(fp.state * 5.0), 10) {
            let orbit = iterate(&plant, &m, &x0, 300).unwrap();
            let tail = &orbit[200..];
            assert!(tail.iter().all(|x| x.amax() <= bound && x.min() >= 0.0));
        }
    }
}

#[test]
fn simulation_agrees_with_map_on_random_plants() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..30 {
        let plant = random_plant(&mut rng);
        let spec = CycleSpec::new(rng.gen_range(1.0..1000.0), rng.gen_range(1.0..50.0)).unwrap();
        let fp = fixed_point_analytic(&plant, spec).unwrap();
        let m = affine(
            &fp,
            -0.5 * spec.weight / fp.output,
            2.0 * spec.period / fp.output,
        );
        let x0 = fp.state * rng.gen_range(0.5..1.5);
        let trace = simulate(&plant, &m, &x0, Horizon::Firings(40), spec.period / 7.0).unwrap();
        let orbit = iterate(&plant, &m, &x0, 39).unwrap();
        for (e, x) in trace.events.iter().zip(&orbit) {
            assert!((e.state - x).amax() <= 1e-10 * (1.0 + x.amax()));
        }
        assert!(trace.samples.iter().all(|s| s.x.min() >= 0.0));
    }
}

#[test]
fn verdicts_agree_on_atracurium_slope_plane() {
    let (plant, fp) = atracurium();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..500 {
        let f_slope = -rng.gen_range(0.0..2.0);
        let phi_slope = rng.gen_range(0.0..6.0);
        let r = StabilityReport::evaluate(&plant, &fp, f_slope, phi_slope).unwrap();
        if (r.spectral_radius - 1.0).abs() < 1e-6 {
            continue;
        }
        assert!(r.verdicts_agree(), "({f_slope}, {phi_slope}): {r:?}");
        assert!(r.spectral_radius >= r.spectral_floor - 1e-9);
    }
}
