//! Simulation, exact solves and estimators used together.

use kcsm_core::constraints::ConstraintModel;
use kcsm_core::dynamics::{simulate_env, simulate_joint, track_distinguished_zero, Seed};
use kcsm_core::estimate::{estimate_d, sandwich_check, FitOptions};
use kcsm_core::exact::{
    build_generator, spectral_gap, variational_objective, GeneratorKind, Mode, TestFunction, DEFAULT_STATE_CAP,
};
use kcsm_core::lattice::{Boundary, Direction, Params, Site, SpinConfig};
use kcsm_core::rng::{stream_id, stream_rng};

#[test]
fn fa_tracer_sits_inside_the_easy_bounds() {
    let p = Params::new(0.5).unwrap();
    let m = ConstraintModel::fa1f();
    let trajs: Vec<_> = (0..24)
        .map(|i| {
            let c = SpinConfig::sample(&p, &[128], Boundary::Periodic, &mut stream_rng(77, i)).unwrap();
            let seed = Seed { root: 78, stream: stream_id(0, i as u32) };
            simulate_joint(m, p, c, 2000.0, 2.0, seed, |_| {}).unwrap().0
        })
        .collect();
    let d = estimate_d(&trajs, &Direction::unit(1, 0), &FitOptions::default()).unwrap();
    let g = build_generator(m, p, &[10], Boundary::Periodic, GeneratorKind::Environment, DEFAULT_STATE_CAP).unwrap();
    let s = sandwich_check(&d, &spectral_gap(&g).unwrap(), p, 1);
    assert!(s.passed(), "{s:?}");
    // q² at q = 0.5 is 0.25; the tracer is slower than a free walker.
    assert!(d.value > 0.02 && d.value < 0.25, "{d:?}");
}

#[test]
fn variational_value_bounds_the_simulated_coefficient() {
    // Each test function gives an upper bound on D; scan f = λ(η₁ − η₋₁).
    let p = Params::new(0.4).unwrap();
    let u = Direction::unit(1, 0);
    let g: Vec<f64> = (0..8u32).map(|b| ((b >> 2) & 1) as f64 - (b & 1) as f64).collect();
    let best = (-20..=20)
        .map(|k| {
            let values = g.iter().map(|v| 0.05 * k as f64 * v).collect();
            let f = TestFunction::table_1d(-1, 1, values).unwrap();
            variational_objective(&f, &u, ConstraintModel::fa1f(), p, Mode::Exact).unwrap().upper_bound()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 0.16 - 1e-3, "{best}");
    let trajs: Vec<_> = (0..24)
        .map(|i| {
            let c = SpinConfig::sample(&p, &[128], Boundary::Periodic, &mut stream_rng(80, i)).unwrap();
            let seed = Seed { root: 81, stream: stream_id(0, i as u32) };
            simulate_joint(ConstraintModel::fa1f(), p, c, 2000.0, 2.0, seed, |_| {}).unwrap().0
        })
        .collect();
    let d = estimate_d(&trajs, &u, &FitOptions::default()).unwrap();
    assert!(d.value <= best + 3.0 * d.stderr, "{d:?} vs {best}");
}

#[test]
fn distinguished_zero_stays_empty_along_simulated_runs() {
    let p = Params::new(0.3).unwrap();
    for run in 0..20u64 {
        let mut c = SpinConfig::sample(&p, &[64], Boundary::Periodic, &mut stream_rng(90, run)).unwrap();
        c.set(0, false);
        let mut events = Vec::new();
        simulate_env(ConstraintModel::East, p, c.clone(), 50.0, stream_rng(91, run), |e| events.push(*e)).unwrap();
        let track = track_distinguished_zero(&c, &events, &Site::d1(0)).unwrap();
        assert_eq!(track.violations, 0);
        assert!(track.events_checked > 0);
        assert!(track.positions.windows(2).all(|w| w[1] == w[0] + 1));
    }
}
