//! Random batch approximations of the interaction sums.
//!
//! Each timestep the `P` particles are shuffled (Fisher–Yates) and cut into
//! `P/p` consecutive batches of size `p`. Within a batch the pair gradient is
//! rescaled by `(P−1)/(p−1)`, which makes the batch force an unbiased
//! estimate of the full sum. Indices inside each batch are kept sorted so
//! that `p = P` reproduces the exact pair loop bit for bit.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::estimators::weight_virial;
use crate::grid::Grid;
use crate::potential::PairPotential;
use crate::system::{accumulate_pair, ForceError, ForceField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivisionError {
    #[error("batch size {batch} must be at least 2 and divide the particle count {particles}")]
    BadBatch { particles: usize, batch: usize },
}

/// A partition of `0..P` into equal batches.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Division {
    batches: Vec<Vec<usize>>,
}

impl Division {
    /// Builds a division from explicit batches, sorting each one. Checks the
    /// partition property.
    pub fn from_batches(n_particles: usize, mut batches: Vec<Vec<usize>>) -> Result<Self, DivisionError> {
        let size = batches.first().map_or(0, Vec::len);
        let bad = DivisionError::BadBatch {
            particles: n_particles,
            batch: size,
        };
        if size == 0 || batches.iter().any(|b| b.len() != size) || size * batches.len() != n_particles {
            return Err(bad);
        }
        let mut seen = vec![false; n_particles];
        for b in &mut batches {
            b.sort_unstable();
            for &i in b.iter() {
                if i >= n_particles || seen[i] {
                    return Err(bad);
                }
                seen[i] = true;
            }
        }
        Ok(Self { batches })
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn batch_size(&self) -> usize {
        self.batches[0].len()
    }

    pub fn n_particles(&self) -> usize {
        self.batches.len() * self.batch_size()
    }

    /// Disjoint, covering, equal-sized.
    pub fn is_partition(&self) -> bool {
        let p = self.n_particles();
        let mut seen = vec![false; p];
        for b in &self.batches {
            if b.len() != self.batch_size() {
                return false;
            }
            for &i in b {
                if i >= p || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn check_batch(n_particles: usize, batch: usize) -> Result<(), DivisionError> {
    if batch < 2 || batch > n_particles || !n_particles.is_multiple_of(batch) {
        return Err(DivisionError::BadBatch {
            particles: n_particles,
            batch,
        });
    }
    Ok(())
}

/// Uniform random permutation cut into consecutive blocks of size `batch`.
pub fn random_division<R: Rng + ?Sized>(
    n_particles: usize,
    batch: usize,
    rng: &mut R,
) -> Result<Division, DivisionError> {
    check_batch(n_particles, batch)?;
    let mut perm: Vec<usize> = (0..n_particles).collect();
    perm.shuffle(rng);
    let batches = perm
        .chunks_exact(batch)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect();
    Ok(Division { batches })
}

/// A single uniformly random `batch`-subset of `0..P`, sorted.
pub fn random_batch<R: Rng + ?Sized>(n_particles: usize, batch: usize, rng: &mut R) -> Result<Vec<usize>, DivisionError> {
    check_batch(n_particles, batch)?;
    let mut perm: Vec<usize> = (0..n_particles).collect();
    let (chosen, _) = perm.partial_shuffle(rng, batch);
    let mut b = chosen.to_vec();
    b.sort_unstable();
    Ok(b)
}

/// Batch-approximated interaction gradient. Overwrites `out`; returns the
/// number of pair evaluations, `N·P(p−1)/2`.
pub fn batch_force(
    potential: &PairPotential,
    q: &Grid,
    division: &Division,
    out: &mut ForceField,
) -> Result<u64, ForceError> {
    debug_assert!(out.same_shape(q));
    out.fill(0.0);
    let n_particles = q.cols() / 3;
    let p = division.batch_size();
    if !potential.is_interacting() {
        return Ok(0);
    }
    let scale = (n_particles - 1) as f64 / (p - 1) as f64;
    let mut pairs = 0u64;
    for k in 0..q.rows() {
        for batch in division.batches() {
            for (a, &i) in batch.iter().enumerate() {
                for &j in &batch[a + 1..] {
                    accumulate_pair(potential, q, out, k, i, j, scale)?;
                    pairs += 1;
                }
            }
        }
    }
    Ok(pairs)
}

/// Sum of `a(q_k^i − q_k^j)` over pairs `i < j` in `batch` and over beads,
/// normalized as `(P−1) / (N p (p−1))`. With `batch = 0..P` this equals the
/// exact bead-averaged `(1/P) Σ_{i<j} a`.
pub fn rbm_pairwise_observable(a: impl Fn([f64; 3]) -> f64, q: &Grid, batch: &[usize]) -> f64 {
    let n = q.rows();
    let n_particles = q.cols() / 3;
    let p = batch.len();
    let mut sum = 0.0;
    for k in 0..n {
        for (x, &i) in batch.iter().enumerate() {
            let qi = q.particle(k, i);
            for &j in &batch[x + 1..] {
                let qj = q.particle(k, j);
                sum += a([qi[0] - qj[0], qi[1] - qj[1], qi[2] - qj[2]]);
            }
        }
    }
    let norm = (n_particles - 1) as f64 / (n * p * (p - 1)) as f64;
    norm * sum
}

/// Virial kinetic-energy weight with the interaction gradient replaced by the
/// batch force of `division`.
pub fn rbm_virial_gradient(
    potential: &PairPotential,
    beta: f64,
    alpha: f64,
    q: &Grid,
    division: &Division,
) -> Result<f64, ForceError> {
    let mut f = Grid::zeros(q.rows(), q.cols());
    batch_force(potential, q, division, &mut f)?;
    Ok(weight_virial(beta, alpha, q, &f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::interaction_force;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::collections::HashMap;

    fn random_q(n: usize, p: usize, seed: u64) -> Grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(n, 3 * p, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn rejects_bad_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_division(6, 4, &mut rng).is_err());
        assert!(random_division(6, 1, &mut rng).is_err());
        assert!(random_division(4, 8, &mut rng).is_err());
        assert!(Division::from_batches(4, vec![vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn full_batch_is_single_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = random_division(5, 5, &mut rng).unwrap();
        assert_eq!(d.batches(), &[vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn divisions_are_partitions_and_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let d = random_division(12, 3, &mut a).unwrap();
            assert!(d.is_partition());
            assert_eq!(d, random_division(12, 3, &mut b).unwrap());
        }
    }

    #[test]
    fn pairing_frequencies_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut counts: HashMap<Vec<Vec<usize>>, usize> = HashMap::new();
        for _ in 0..draws {
            let d = random_division(4, 2, &mut rng).unwrap();
            let mut key = d.batches().to_vec();
            key.sort();
            *counts.entry(key).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        let p = 1.0 / 3.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for (k, &c) in &counts {
            assert!((c as f64 - draws as f64 * p).abs() < 5.0 * sd, "{k:?}: {c}");
        }
    }

    #[test]
    fn full_batch_force_is_bitwise_exact() {
        let q = random_q(4, 6, 1);
        let pot = PairPotential::coulomb();
        let exact = interaction_force(&pot, &q).unwrap();
        let d = Division::from_batches(6, vec![(0..6).collect()]).unwrap();
        let mut f = Grid::zeros(4, 18);
        batch_force(&pot, &q, &d, &mut f).unwrap();
        assert_eq!(f, exact);
    }

    #[test]
    fn pair_count_matches_formula() {
        let q = random_q(16, 16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_division(16, 2, &mut rng).unwrap();
        let mut f = Grid::zeros(16, 48);
        assert_eq!(batch_force(&PairPotential::coulomb(), &q, &d, &mut f).unwrap(), 128);
        assert_eq!(crate::system::full_interaction_force(&PairPotential::coulomb(), &q, &mut f).unwrap(), 1920);
    }

    #[test]
    fn batch_force_is_linear_in_potential() {
        let q = random_q(4, 6, 4);
        let d = random_division(6, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut f1 = Grid::zeros(4, 18);
        let mut f2 = Grid::zeros(4, 18);
        batch_force(&PairPotential::Coulomb { kappa: 1.0 }, &q, &d, &mut f1).unwrap();
        batch_force(&PairPotential::Coulomb { kappa: 2.0 }, &q, &d, &mut f2).unwrap();
        f1.scale(2.0);
        assert!(f1.max_abs_diff(&f2) < 1e-12 * f2.max_abs());
    }

    #[test]
    fn constant_pair_observable() {
        // a ≡ 1 over a batch of size p: (P−1)/(N p (p−1)) · N · p(p−1)/2 = (P−1)/2
        let q = random_q(3, 6, 5);
        for p in [2usize, 3, 6] {
            let batch: Vec<usize> = (0..p).collect();
            let v = rbm_pairwise_observable(|_| 1.0, &q, &batch);
            assert!((v - 2.5).abs() < 1e-12, "p = {p}: {v}");
        }
    }
}
