//! Dense, deliberately naive reference implementations. Everything here is
//! built from definitions with `O(N³)` linear algebra or exhaustive
//! enumeration, so it shares no code paths with the fast implementations it
//! checks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::grid::Grid;
use crate::potential::PairPotential;
use crate::system::SystemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the dense Gaussian oracle only covers non-interacting systems")]
    Interacting,
    #[error("enumeration limited to at most {max} particles, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("batch size {batch} must divide {particles}")]
    BadBatch { particles: usize, batch: usize },
    #[error("coincident particles")]
    Coincident,
}

/// `L + αI` as an explicit matrix together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct DenseRing {
    pub matrix: DMatrix<f64>,
    /// Ascending eigenvalues of `L + αI`.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl DenseRing {
    pub fn new(n_beads: usize, mass: f64, beta: f64, alpha: f64) -> Self {
        let beta_n = beta / n_beads as f64;
        let c = mass / (beta_n * beta_n);
        let mut m = DMatrix::zeros(n_beads, n_beads);
        for i in 0..n_beads {
            m[(i, i)] = 2.0 * c + alpha;
            m[(i, (i + 1) % n_beads)] -= c;
            m[(i, (i + n_beads - 1) % n_beads)] -= c;
        }
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n_beads).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n_beads, n_beads, |r, c| eig.eigenvectors[(r, order[c])]);
        Self {
            matrix: m,
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn for_spec(spec: &SystemSpec) -> Self {
        Self::new(spec.n_beads, spec.mass, spec.beta, spec.alpha)
    }

    fn spectral(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| f(l)),
        ));
        v * d * v.transpose()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.matrix.clone().try_inverse().expect("positive definite for alpha > 0")
    }

    /// `(L + αI)^{-1/2}` through the eigendecomposition.
    pub fn inverse_sqrt(&self) -> DMatrix<f64> {
        self.spectral(|l| 1.0 / l.sqrt())
    }

    pub fn apply(&self, x: &Grid) -> Grid {
        mul(&self.matrix, x)
    }

    pub fn solve(&self, b: &Grid) -> Grid {
        mul(&self.inverse(), b)
    }

    pub fn sqrt_inverse_apply(&self, x: &Grid) -> Grid {
        mul(&self.inverse_sqrt(), x)
    }
}

/// Matrix times every column of a grid.
pub fn mul(m: &DMatrix<f64>, x: &Grid) -> Grid {
    let xm = DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice());
    let y = m * xm;
    Grid::from_fn(y.nrows(), y.ncols(), |r, c| y[(r, c)])
}

/// The orthogonal eigenbasis written out entry by entry (bead index
/// `j = 1..N`): constant, `√(2/N) cos(2πkj/N)`, `√(2/N) sin(2πkj/N)`
/// for `k = 1..N/2−1`, then `(−1)^j / √N`.
pub fn dense_mode_basis(n_beads: usize) -> DMatrix<f64> {
    let n = n_beads as f64;
    DMatrix::from_fn(n_beads, n_beads, |row, col| {
        let j = (row + 1) as f64;
        if col == 0 {
            1.0 / n.sqrt()
        } else if col == n_beads - 1 {
            (if (row + 1) % 2 == 0 { 1.0 } else { -1.0 }) / n.sqrt()
        } else {
            let k = col.div_ceil(2) as f64;
            let phase = 2.0 * PI * k * j / n;
            (2.0 / n).sqrt() * if col % 2 == 1 { phase.cos() } else { phase.sin() }
        }
    })
}

/// Stationary moments of a non-interacting trapped system whose trap
/// strength equals `α`: every coordinate column is `N(0, (β_N (L + αI))⁻¹)`.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    /// Bead covariance of one coordinate column.
    pub covariance: DMatrix<f64>,
    /// `E[(q_k^i)_x²]`, the same for every bead.
    pub coordinate_variance: f64,
    /// Expected virial kinetic-energy weight.
    pub virial: f64,
    /// The same expectation evaluated in the eigenbasis.
    pub virial_spectral: f64,
}

pub fn dense_moments(spec: &SystemSpec) -> Result<GaussianMoments, OracleError> {
    if spec.potential.is_interacting() || spec.external.strength() != spec.alpha {
        return Err(OracleError::Interacting);
    }
    let n = spec.n_beads;
    let p = spec.n_particles as f64;
    let ring = DenseRing::for_spec(spec);
    let covariance = ring.inverse() / spec.beta_n();
    let centering = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let trace = (&centering * &covariance).trace();
    let base = 1.5 * p / spec.beta;
    let virial = base + 3.0 * p * spec.alpha * trace / (2.0 * n as f64);
    // The constant mode is the smallest eigenvalue, exactly α.
    let spectral_trace: f64 = ring.eigenvalues[1..].iter().map(|l| 1.0 / (spec.beta_n() * l)).sum();
    let virial_spectral = base + 3.0 * p * spec.alpha * spectral_trace / (2.0 * n as f64);
    Ok(GaussianMoments {
        coordinate_variance: covariance[(0, 0)],
        covariance,
        virial,
        virial_spectral,
    })
}

const MAX_ENUMERATION: usize = 8;

/// Every partition of `0..P` into blocks of size `p`, each block sorted and
/// blocks ordered by their smallest element.
pub fn enumerate_divisions(n_particles: usize, batch: usize) -> Result<Vec<Vec<Vec<usize>>>, OracleError> {
    if n_particles > MAX_ENUMERATION {
        return Err(OracleError::TooLarge {
            max: MAX_ENUMERATION,
            got: n_particles,
        });
    }
    if batch == 0 || !n_particles.is_multiple_of(batch) {
        return Err(OracleError::BadBatch {
            particles: n_particles,
            batch,
        });
    }
    fn rec(free: Vec<usize>, batch: usize, acc: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if free.is_empty() {
            out.push(acc.clone());
            return;
        }
        let first = free[0];
        let rest = &free[1..];
        for combo in combinations(rest, batch - 1) {
            let mut block = vec![first];
            block.extend(&combo);
            let remaining: Vec<usize> = rest.iter().copied().filter(|x| !combo.contains(x)).collect();
            acc.push(block);
            rec(remaining, batch, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec((0..n_particles).collect(), batch, &mut Vec::new(), &mut out);
    Ok(out)
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        for mut tail in combinations(&items[i + 1..], k - 1) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Interaction gradient by the double loop over `j ≠ i`.
pub fn naive_force(potential: &PairPotential, q: &Grid) -> Result<Grid, OracleError> {
    let p = q.cols() / 3;
    let mut out = Grid::zeros(q.rows(), q.cols());
    for k in 0..q.rows() {
        for i in 0..p {
            let qi = q.particle(k, i);
            for j in 0..p {
                if j == i {
                    continue;
                }
                let qj = q.particle(k, j);
                let g = potential
                    .gradient([qi[0] - qj[0], qi[1] - qj[1], qi[2] - qj[2]])
                    .map_err(|_| OracleError::Coincident)?;
                for c in 0..3 {
                    out.set(k, 3 * i + c, out.get(k, 3 * i + c) + g[c]);
                }
            }
        }
    }
    Ok(out)
}
