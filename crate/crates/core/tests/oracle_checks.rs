use pimd_core::estimators::weight_virial;
use pimd_core::oracle::{dense_mode_basis, dense_moments, enumerate_divisions, mul, naive_force, DenseRing};
use pimd_core::rbm::{batch_force, rbm_pairwise_observable, Division};
use pimd_core::system::interaction_force;
use pimd_core::{Grid, PairPotential, RingOperator, SystemSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_grid(rows: usize, cols: usize, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn spectrum_matches_dense_eigensolver() {
    for n in [4, 8, 16] {
        for alpha in [0.1, 1.0] {
            let ring = RingOperator::new(n, 1.0, 4.0, alpha).unwrap();
            let dense = DenseRing::new(n, 1.0, 4.0, alpha);
            let fast: Vec<f64> = ring.sorted_eigenvalues().iter().map(|l| l + alpha).collect();
            let top = dense.eigenvalues[n - 1];
            for (a, b) in fast.iter().zip(&dense.eigenvalues) {
                assert!((a - b).abs() <= 1e-10 * top, "N={n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn operations_match_dense_matrices() {
    for n in [4, 8, 16, 32] {
        let ring = RingOperator::new(n, 1.3, 2.5, 0.4).unwrap();
        let dense = DenseRing::new(n, 1.3, 2.5, 0.4);
        let x = random_grid(n, 7, n as u64);
        let scale = dense.eigenvalues[n - 1];
        assert!(ring.apply(&x).unwrap().max_abs_diff(&dense.apply(&x)) < 1e-10 * scale * x.max_abs());
        assert!(ring.apply_spectral(&x).unwrap().max_abs_diff(&dense.apply(&x)) < 1e-10 * scale * x.max_abs());
        let s = dense.solve(&x);
        assert!(ring.solve(&x).unwrap().max_abs_diff(&s) < 1e-10 * s.max_abs());
        assert!(ring.solve_tridiagonal(&x).unwrap().max_abs_diff(&s) < 1e-10 * s.max_abs());
        let r = dense.sqrt_inverse_apply(&x);
        assert!(ring.sqrt_inverse_apply(&x).unwrap().max_abs_diff(&r) < 1e-10 * r.max_abs());
    }
}

#[test]
fn mode_transform_matches_dense_basis() {
    for n in [4, 8, 16] {
        let ring = RingOperator::new(n, 1.0, 4.0, 0.5).unwrap();
        let d = dense_mode_basis(n);
        let x = random_grid(n, 3, 99);
        let expected = mul(&d.transpose(), &x);
        assert!(ring.to_modes(&x).unwrap().max_abs_diff(&expected) < 1e-12 * x.max_abs() * n as f64);
        let back = ring.from_modes(&expected).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12 * n as f64);
    }
}

#[test]
fn gaussian_samples_have_dense_covariance() {
    let n = 8;
    let ring = RingOperator::new(n, 1.0, 4.0, 0.3).unwrap();
    let cov = DenseRing::new(n, 1.0, 4.0, 0.3).inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 100_000;
    let g = ring.sample_gaussian(draws, &mut rng).unwrap();
    for a in 0..n {
        for b in a..n {
            let xs: Vec<f64> = (0..draws).map(|c| g.get(a, c) * g.get(b, c)).collect();
            let mean = xs.iter().sum::<f64>() / draws as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!((mean - cov[(a, b)]).abs() < 5.0 * se, "({a},{b}): {mean} vs {}", cov[(a, b)]);
        }
    }
}

#[test]
fn batch_force_is_unbiased_by_enumeration() {
    for (p, batch) in [(4usize, 2usize), (6, 2), (6, 3)] {
        let q = random_grid(4, 3 * p, p as u64 + 10);
        for pot in [PairPotential::coulomb(), PairPotential::mixed()] {
            let exact = naive_force(&pot, &q).unwrap();
            let divisions = enumerate_divisions(p, batch).unwrap();
            let mut mean = Grid::zeros(4, 3 * p);
            let mut f = Grid::zeros(4, 3 * p);
            for d in &divisions {
                batch_force(&pot, &q, &Division::from_batches(p, d.clone()).unwrap(), &mut f).unwrap();
                mean.axpy(1.0 / divisions.len() as f64, &f);
            }
            assert!(mean.max_abs_diff(&exact) <= 1e-12 * exact.max_abs(), "P={p} p={batch}");
        }
    }
}

#[test]
fn batch_observable_is_unbiased_over_subsets() {
    // Each sorted p-subset equally likely: average equals the exact weight.
    let p = 6;
    let q = random_grid(4, 3 * p, 5);
    let a = |d: [f64; 3]| (-0.1 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])).exp();
    let full: Vec<usize> = (0..p).collect();
    let exact = rbm_pairwise_observable(a, &q, &full);
    let subsets: Vec<Vec<usize>> = (0..p).flat_map(|i| (i + 1..p).map(move |j| vec![i, j])).collect();
    let mean = subsets.iter().map(|b| rbm_pairwise_observable(a, &q, b)).sum::<f64>() / subsets.len() as f64;
    assert!((mean - exact).abs() < 1e-12 * exact.abs());
}

#[test]
fn dense_moments_refuse_interaction() {
    assert!(dense_moments(&SystemSpec::new(4, 2, PairPotential::coulomb())).is_err());
}

proptest! {
    #[test]
    fn pair_forces_sum_to_zero(seed in 0u64..1000, p in 2usize..7) {
        let q = random_grid(4, 3 * p, seed);
        let f = interaction_force(&PairPotential::coulomb(), &q).unwrap();
        for k in 0..4 {
            for c in 0..3 {
                let s: f64 = (0..p).map(|i| f.get(k, 3 * i + c)).sum();
                prop_assert!(s.abs() < 1e-9 * f.max_abs().max(1.0));
            }
        }
        let naive = naive_force(&PairPotential::coulomb(), &q).unwrap();
        prop_assert!(f.max_abs_diff(&naive) < 1e-12 * naive.max_abs().max(1.0));
    }

    #[test]
    fn solve_inverts_apply(seed in 0u64..1000, half in 2usize..10, alpha in 0.01f64..5.0) {
        let n = 2 * half;
        let ring = RingOperator::new(n, 1.0, 4.0, alpha).unwrap();
        let x = random_grid(n, 3, seed);
        let back = ring.solve(&ring.apply(&x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-9 * x.max_abs());
    }

    #[test]
    fn virial_forms_agree(seed in 0u64..10_000, n in 2usize..9, p in 2usize..6) {
        let beta = 4.0;
        let alpha = (p as f64).powf(-2.0 / 3.0);
        let pot = PairPotential::coulomb();
        let q = random_grid(n, 3 * p, seed);
        // Direct form: full gradient α q + Σ_j ∇V(q^i − q^j) against the centroid.
        let grad = naive_force(&pot, &q).unwrap();
        let mut direct = 0.0;
        for i in 0..p {
            for c in 0..3 {
                let col = 3 * i + c;
                let centroid = (0..n).map(|k| q.get(k, col)).sum::<f64>() / n as f64;
                for k in 0..n {
                    direct += (q.get(k, col) - centroid) * (alpha * q.get(k, col) + grad.get(k, col));
                }
            }
        }
        let direct = 1.5 * p as f64 / beta + direct / (2 * n) as f64;
        let f = interaction_force(&pot, &q).unwrap();
        let rewritten = weight_virial(beta, alpha, &q, &f);
        prop_assert!((direct - rewritten).abs() < 1e-10 * direct.abs().max(1.0), "{direct} vs {rewritten}");
    }
}
