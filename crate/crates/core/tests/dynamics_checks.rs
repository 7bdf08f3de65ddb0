use std::sync::Arc;

use pimd_core::estimators::{autocorrelation, run_sampling};
use pimd_core::oracle::dense_moments;
use pimd_core::system::u_alpha;
use pimd_core::{
    ForceStrategy, Grid, Observable, PairPotential, RingOperator, RunningStats, SystemSpec, Trajectory, WeightMode,
    WeightSampler,
};

fn hamiltonian(ring: &RingOperator, spec: &SystemSpec, q: &Grid, v: &Grid) -> f64 {
    let lq = ring.apply(q).unwrap();
    let lv = ring.apply(v).unwrap();
    0.5 * q.dot(&lq) + 0.5 * v.dot(&lv) + u_alpha(&spec.potential, q).unwrap()
}

#[test]
fn energy_is_nearly_conserved_without_friction() {
    let mut spec = SystemSpec::new(8, 4, PairPotential::coulomb());
    spec.gamma = 0.0;
    spec.dt = 1.0 / 64.0;
    spec.seed = 3;
    let ring = Arc::new(spec.ring().unwrap());
    let mut t = Trajectory::new(spec, ring.clone(), ForceStrategy::Exact, 0).unwrap();
    let h0 = hamiltonian(&ring, &spec, &t.state().q, &t.state().v);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        t.step().unwrap();
        let h = hamiltonian(&ring, &spec, &t.state().q, &t.state().v);
        worst = worst.max((h - h0).abs());
    }
    assert!(worst < 1e-3 * h0.abs(), "drift {worst} of {h0}");
}

#[test]
fn energy_error_is_second_order() {
    let run = |dt: f64| {
        let mut spec = SystemSpec::new(4, 2, PairPotential::coulomb());
        spec.gamma = 0.0;
        spec.dt = dt;
        spec.seed = 8;
        let ring = Arc::new(spec.ring().unwrap());
        let mut t = Trajectory::new(spec, ring.clone(), ForceStrategy::Exact, 0).unwrap();
        let h0 = hamiltonian(&ring, &spec, &t.state().q, &t.state().v);
        let steps = (1.0 / dt) as usize;
        let mut worst: f64 = 0.0;
        for _ in 0..steps {
            t.step().unwrap();
            worst = worst.max((hamiltonian(&ring, &spec, &t.state().q, &t.state().v) - h0).abs());
        }
        worst
    };
    let ratio = run(1.0 / 32.0) / run(1.0 / 64.0);
    assert!(ratio > 3.0 && ratio < 5.5, "{ratio}");
}

#[test]
fn free_trapped_system_matches_gaussian_oracle() {
    let mut spec = SystemSpec::new(4, 2, PairPotential::Zero);
    spec.dt = 1.0 / 16.0;
    spec.seed = 17;
    let oracle = dense_moments(&spec).unwrap();
    let ring = Arc::new(spec.ring().unwrap());
    let mut t = Trajectory::new(spec, ring, ForceStrategy::Exact, 0).unwrap();
    let mut sampler = WeightSampler::new(Observable::Virial, WeightMode::Exact, spec.seed, 0);
    let burn = (10.0 / spec.dt) as usize;
    let steps = (1000.0 / spec.dt) as u64;
    let mut stats = RunningStats::new(burn, 1);
    run_sampling(&mut t, &mut sampler, &mut stats, steps, |_, _, _| {}).unwrap();
    let ac = autocorrelation(stats.series(), spec.dt, 5000).unwrap();
    let err = (ac.mean - oracle.virial).abs();
    assert!(err < 5.0 * ac.std_err, "virial {} vs {} (se {})", ac.mean, oracle.virial, ac.std_err);
}

#[test]
fn rbm_tracks_exact_with_shared_noise_for_small_steps() {
    let mut spec = SystemSpec::new(8, 4, PairPotential::coulomb());
    spec.seed = 1;
    spec.dt = 1.0 / 64.0;
    let small = pimd_core::coupled_run(&spec, 2, 32, 20).unwrap();
    spec.dt = 1.0 / 8.0;
    let large = pimd_core::coupled_run(&spec, 2, 4, 20).unwrap();
    // Same horizon t = 0.5; the pathwise gap grows with the step size.
    assert!(small.e[32] < large.e[4], "{} vs {}", small.e[32], large.e[4]);
}
