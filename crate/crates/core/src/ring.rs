//! The ring-polymer stiffness operator `L` and its regularization `L + αI`.
//!
//! `L = (m / β_N²) · (2I − S − Sᵀ)` with `S` the cyclic shift, so it is
//! circulant and diagonalized by the discrete Fourier transform. Every
//! operation on `L + αI` (apply, solve, inverse square root, Gaussian
//! sampling) is a diagonal filter in Fourier space and costs `O(N log N)`
//! per column. A cyclic tridiagonal direct solver is kept alongside the
//! spectral one so the two can be cross-checked.
//!
//! The orthogonal eigenbasis `D` (constant mode, paired cos/sin modes,
//! alternating mode) is exposed through [`RingOperator::to_modes`] and
//! [`RingOperator::from_modes`], computed with the same FFT.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("number of beads must be even and at least 4, got {0}")]
    BeadCount(usize),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("regularization alpha must be positive for {0}")]
    SingularOperator(&'static str),
    #[error("expected {expected} rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone)]
pub struct RingOperator {
    n_beads: usize,
    mass: f64,
    beta_n: f64,
    alpha: f64,
    /// Spectrum of `L` in eigenbasis order: constant mode, (cos, sin) pairs
    /// for k = 1..N/2-1, alternating mode.
    eigenvalues: Vec<f64>,
    /// Spectrum of `L` indexed by DFT frequency k = 0..N-1.
    fourier_eigenvalues: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RingOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingOperator")
            .field("n_beads", &self.n_beads)
            .field("mass", &self.mass)
            .field("beta_n", &self.beta_n)
            .field("alpha", &self.alpha)
            .finish()
    }
}

/// Which inverse filter to run in Fourier space.
#[derive(Clone, Copy)]
enum Filter {
    Apply,
    Solve,
    InvSqrt,
}

impl RingOperator {
    /// Builds the operator for `N` beads at inverse temperature `beta`
    /// (so `β_N = beta / N`). `alpha = 0` is accepted for spectral queries,
    /// but every inverse operation then fails.
    pub fn new(n_beads: usize, mass: f64, beta: f64, alpha: f64) -> Result<Self, RingError> {
        if n_beads < 4 || !n_beads.is_multiple_of(2) {
            return Err(RingError::BeadCount(n_beads));
        }
        for (name, value) in [("mass", mass), ("beta", beta)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(RingError::NonPositive { name, value });
            }
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(RingError::NonPositive {
                name: "alpha",
                value: alpha,
            });
        }
        let beta_n = beta / n_beads as f64;
        let scale = 4.0 * mass / (beta_n * beta_n);
        let nf = n_beads as f64;

        let fourier_eigenvalues: Vec<f64> = (0..n_beads)
            .map(|k| scale * (PI * k as f64 / nf).sin().powi(2))
            .collect();

        let mut eigenvalues = Vec::with_capacity(n_beads);
        eigenvalues.push(0.0);
        for k in 1..n_beads / 2 {
            let lam = scale * (PI * k as f64 / nf).sin().powi(2);
            eigenvalues.push(lam);
            eigenvalues.push(lam);
        }
        eigenvalues.push(scale);

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_beads);
        let inverse = planner.plan_fft_inverse(n_beads);

        Ok(Self {
            n_beads,
            mass,
            beta_n,
            alpha,
            eigenvalues,
            fourier_eigenvalues,
            forward,
            inverse,
        })
    }

    pub fn n_beads(&self) -> usize {
        self.n_beads
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn beta_n(&self) -> f64 {
        self.beta_n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Spring constant `m / β_N²` multiplying the difference stencil.
    pub fn spring(&self) -> f64 {
        self.mass / (self.beta_n * self.beta_n)
    }

    /// Eigenvalues of `L` (not `L + αI`) in eigenbasis order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalues of `L` in ascending order.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `λ_max / λ_min` over the nonzero spectrum of `L`, equal to
    /// `1 / sin²(π/N)`. The constant mode is excluded since `λ = 0` there.
    pub fn condition_number(&self) -> f64 {
        let s = (PI / self.n_beads as f64).sin();
        1.0 / (s * s)
    }

    /// Ratio of the highest to lowest nonzero mode frequency `√λ`,
    /// i.e. `1 / sin(π/N)`.
    pub fn frequency_ratio(&self) -> f64 {
        self.condition_number().sqrt()
    }

    fn check_rows(&self, x: &Grid) -> Result<(), RingError> {
        if x.rows() != self.n_beads {
            return Err(RingError::DimensionMismatch {
                expected: self.n_beads,
                got: x.rows(),
            });
        }
        Ok(())
    }

    fn require_alpha(&self, what: &'static str) -> Result<(), RingError> {
        if self.alpha > 0.0 {
            Ok(())
        } else {
            Err(RingError::SingularOperator(what))
        }
    }

    /// `(L + αI) x` by the three-point stencil.
    pub fn apply(&self, x: &Grid) -> Result<Grid, RingError> {
        self.check_rows(x)?;
        let n = self.n_beads;
        let c = self.spring();
        let diag = 2.0 * c + self.alpha;
        let mut out = Grid::zeros(n, x.cols());
        for k in 0..n {
            let prev = x.row((k + n - 1) % n);
            let next = x.row((k + 1) % n);
            let cur = x.row(k);
            let row = out.row_mut(k);
            for col in 0..row.len() {
                row[col] = diag * cur[col] - c * (prev[col] + next[col]);
            }
        }
        Ok(out)
    }

    /// `(L + αI) x` through the Fourier filter.
    pub fn apply_spectral(&self, x: &Grid) -> Result<Grid, RingError> {
        self.check_rows(x)?;
        let mut out = x.clone();
        self.filter_in_place(&mut out, Filter::Apply);
        Ok(out)
    }

    /// `(L + αI)⁻¹ b` via the spectral path.
    pub fn solve(&self, b: &Grid) -> Result<Grid, RingError> {
        let mut out = b.clone();
        self.solve_in_place(&mut out)?;
        Ok(out)
    }

    pub fn solve_in_place(&self, b: &mut Grid) -> Result<(), RingError> {
        self.check_rows(b)?;
        self.require_alpha("solve")?;
        self.filter_in_place(b, Filter::Solve);
        Ok(())
    }

    /// `(L + αI)⁻¹ b` by a cyclic tridiagonal (Sherman–Morrison + Thomas)
    /// elimination, `O(N)` per column.
    pub fn solve_tridiagonal(&self, b: &Grid) -> Result<Grid, RingError> {
        self.check_rows(b)?;
        self.require_alpha("solve")?;
        let n = self.n_beads;
        let off = -self.spring();
        let diag = 2.0 * self.spring() + self.alpha;

        // Sherman–Morrison: A = T + u vᵀ with u = (γ, 0, …, 0, off),
        // v = (1, 0, …, 0, off/γ); T is tridiagonal with modified corners.
        let gamma = -diag;
        let mut t_diag = vec![diag; n];
        t_diag[0] = diag - gamma;
        t_diag[n - 1] = diag - off * off / gamma;

        // Thomas factorization of T: shared by every right-hand side.
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = t_diag[0];
        c_prime[0] = off / denom[0];
        for i in 1..n {
            denom[i] = t_diag[i] - off * c_prime[i - 1];
            c_prime[i] = off / denom[i];
        }
        let thomas = |rhs: &mut [f64]| {
            rhs[0] /= denom[0];
            for i in 1..n {
                rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom[i];
            }
            for i in (0..n - 1).rev() {
                rhs[i] -= c_prime[i] * rhs[i + 1];
            }
        };

        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = off;
        thomas(&mut z);
        let v_last = off / gamma;
        let z_factor = 1.0 + z[0] + v_last * z[n - 1];

        let mut out = Grid::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for c in 0..b.cols() {
            for k in 0..n {
                col[k] = b.get(k, c);
            }
            thomas(&mut col);
            let f = (col[0] + v_last * col[n - 1]) / z_factor;
            for k in 0..n {
                out.set(k, c, col[k] - f * z[k]);
            }
        }
        Ok(out)
    }

    /// `(L + αI)^{-1/2} x` by spectral scaling.
    pub fn sqrt_inverse_apply(&self, x: &Grid) -> Result<Grid, RingError> {
        self.check_rows(x)?;
        self.require_alpha("inverse square root")?;
        let mut out = x.clone();
        self.filter_in_place(&mut out, Filter::InvSqrt);
        Ok(out)
    }

    /// Draws `d` independent columns from `N(0, (L + αI)⁻¹)`.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<Grid, RingError> {
        self.require_alpha("sampling")?;
        let mut g = Grid::zeros(self.n_beads, d);
        self.sample_gaussian_into(&mut g, rng)?;
        Ok(g)
    }

    /// In-place variant of [`Self::sample_gaussian`]; overwrites `out`.
    pub fn sample_gaussian_into<R: Rng + ?Sized>(
        &self,
        out: &mut Grid,
        rng: &mut R,
    ) -> Result<(), RingError> {
        self.check_rows(out)?;
        self.require_alpha("sampling")?;
        for x in out.as_mut_slice() {
            *x = rng.sample(StandardNormal);
        }
        self.filter_in_place(out, Filter::InvSqrt);
        Ok(())
    }

    fn filter_gain(&self, k: usize, filter: Filter) -> f64 {
        let mu = self.fourier_eigenvalues[k] + self.alpha;
        match filter {
            Filter::Apply => mu,
            Filter::Solve => 1.0 / mu,
            Filter::InvSqrt => 1.0 / mu.sqrt(),
        }
    }

    /// Applies a real even spectral filter to every column. Two real columns
    /// ride in one complex FFT (real and imaginary parts), which is exact
    /// because the filter maps real vectors to real vectors.
    fn filter_in_place(&self, x: &mut Grid, filter: Filter) {
        let n = self.n_beads;
        let cols = x.cols();
        if cols == 0 {
            return;
        }
        let pairs = cols.div_ceil(2);
        let mut buf = vec![Complex::new(0.0, 0.0); n * pairs];
        for p in 0..pairs {
            let c0 = 2 * p;
            let c1 = c0 + 1;
            for k in 0..n {
                let re = x.get(k, c0);
                let im = if c1 < cols { x.get(k, c1) } else { 0.0 };
                buf[p * n + k] = Complex::new(re, im);
            }
        }
        self.forward.process(&mut buf);
        let inv_n = 1.0 / n as f64;
        let gains: Vec<f64> = (0..n).map(|k| self.filter_gain(k, filter) * inv_n).collect();
        for chunk in buf.chunks_exact_mut(n) {
            for (z, g) in chunk.iter_mut().zip(&gains) {
                *z *= *g;
            }
        }
        self.inverse.process(&mut buf);
        for p in 0..pairs {
            let c0 = 2 * p;
            let c1 = c0 + 1;
            for k in 0..n {
                let z = buf[p * n + k];
                x.set(k, c0, z.re);
                if c1 < cols {
                    x.set(k, c1, z.im);
                }
            }
        }
    }

    /// Coordinates in the orthogonal eigenbasis: returns `Dᵀ x`, where the
    /// columns of `D` are (with bead index j = 1..N)
    /// `1/√N`, `√(2/N) cos(2πkj/N)`, `√(2/N) sin(2πkj/N)`, …, `(−1)^j/√N`.
    pub fn to_modes(&self, x: &Grid) -> Result<Grid, RingError> {
        self.check_rows(x)?;
        let n = self.n_beads;
        let half = n / 2;
        let inv_sqrt_n = 1.0 / (n as f64).sqrt();
        let sqrt_2n = (2.0 / n as f64).sqrt();
        let mut out = Grid::zeros(n, x.cols());
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for c in 0..x.cols() {
            for k in 0..n {
                buf[k] = Complex::new(x.get(k, c), 0.0);
            }
            self.forward.process(&mut buf);
            // Bead indices start at 1: shift each frequency by e^{-2πik/N}.
            let shifted = |k: usize| buf[k] * Complex::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
            out.set(0, c, shifted(0).re * inv_sqrt_n);
            for k in 1..half {
                let z = shifted(k);
                out.set(2 * k - 1, c, sqrt_2n * z.re);
                out.set(2 * k, c, -sqrt_2n * z.im);
            }
            out.set(n - 1, c, shifted(half).re * inv_sqrt_n);
        }
        Ok(out)
    }

    /// Inverse of [`Self::to_modes`]: returns `D y`.
    pub fn from_modes(&self, y: &Grid) -> Result<Grid, RingError> {
        self.check_rows(y)?;
        let n = self.n_beads;
        let half = n / 2;
        let inv_sqrt_n = 1.0 / (n as f64).sqrt();
        let sqrt_2n = (2.0 / n as f64).sqrt();
        let mut out = Grid::zeros(n, y.cols());
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for c in 0..y.cols() {
            buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            buf[0] = Complex::new(y.get(0, c) * inv_sqrt_n, 0.0);
            for k in 1..half {
                buf[k] = Complex::new(sqrt_2n * y.get(2 * k - 1, c), -sqrt_2n * y.get(2 * k, c));
            }
            buf[half] = Complex::new(y.get(n - 1, c) * inv_sqrt_n, 0.0);
            for (k, z) in buf.iter_mut().enumerate().take(half + 1) {
                *z *= Complex::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            }
            self.inverse.process(&mut buf);
            for k in 0..n {
                out.set(k, c, buf[k].re);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rows: usize, cols: usize, seed: u64) -> Grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn rejects_bad_bead_counts() {
        assert_eq!(RingOperator::new(5, 1.0, 1.0, 1.0).unwrap_err(), RingError::BeadCount(5));
        assert_eq!(RingOperator::new(2, 1.0, 1.0, 1.0).unwrap_err(), RingError::BeadCount(2));
        assert!(RingOperator::new(4, 0.0, 1.0, 1.0).is_err());
        assert!(RingOperator::new(4, 1.0, -1.0, 1.0).is_err());
        assert!(RingOperator::new(4, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn n4_spectrum() {
        // beta = 4, N = 4 gives beta_N = 1.
        let op = RingOperator::new(4, 1.0, 4.0, 0.0).unwrap();
        let ev = op.sorted_eigenvalues();
        for (a, b) in ev.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn first_column_of_l() {
        let op = RingOperator::new(4, 1.0, 4.0, 0.0).unwrap();
        let mut e1 = Grid::zeros(4, 1);
        e1.set(0, 0, 1.0);
        let col = op.apply(&e1).unwrap();
        assert_eq!(col.column(0), vec![2.0, -1.0, 0.0, -1.0]);
    }

    #[test]
    fn constants_are_annihilated() {
        let op = RingOperator::new(8, 1.3, 2.0, 0.5).unwrap();
        let x = Grid::from_fn(8, 3, |_, c| 1.0 + c as f64);
        let y = op.apply(&x).unwrap();
        for k in 0..8 {
            for c in 0..3 {
                assert!((y.get(k, c) - 0.5 * x.get(k, c)).abs() < 1e-12);
            }
        }
        let s = op.solve(&x).unwrap();
        for k in 0..8 {
            assert!((s.get(k, 1) - 2.0 / 0.5).abs() < 1e-10);
        }
        let r = op.sqrt_inverse_apply(&x).unwrap();
        assert!((r.get(3, 0) - 1.0 / 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_rejects_inverse_ops() {
        let op = RingOperator::new(4, 1.0, 4.0, 0.0).unwrap();
        let x = Grid::zeros(4, 1);
        assert!(matches!(op.solve(&x), Err(RingError::SingularOperator(_))));
        assert!(matches!(op.solve_tridiagonal(&x), Err(RingError::SingularOperator(_))));
        assert!(op.sqrt_inverse_apply(&x).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(op.sample_gaussian(1, &mut rng).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let op = RingOperator::new(4, 1.0, 4.0, 1.0).unwrap();
        let x = Grid::zeros(6, 1);
        assert_eq!(
            op.apply(&x).unwrap_err(),
            RingError::DimensionMismatch { expected: 4, got: 6 }
        );
    }

    #[test]
    fn apply_solve_roundtrip_and_paths_agree() {
        for &n in &[4usize, 8, 16, 32] {
            let op = RingOperator::new(n, 1.0, 4.0, 0.3).unwrap();
            for seed in 0..10 {
                let x = random_grid(n, 5, seed);
                let b = op.apply(&x).unwrap();
                let bs = op.apply_spectral(&x).unwrap();
                assert!(b.max_abs_diff(&bs) <= 1e-9 * b.max_abs());
                let x1 = op.solve(&b).unwrap();
                let x2 = op.solve_tridiagonal(&b).unwrap();
                assert!(x1.max_abs_diff(&x) <= 1e-10 * x.max_abs());
                assert!(x1.max_abs_diff(&x2) <= 1e-9 * x1.max_abs());
            }
        }
    }

    #[test]
    fn sqrt_inverse_twice_is_solve() {
        let op = RingOperator::new(16, 1.0, 4.0, 0.25).unwrap();
        let x = random_grid(16, 4, 3);
        let twice = op.sqrt_inverse_apply(&op.sqrt_inverse_apply(&x).unwrap()).unwrap();
        let s = op.solve(&x).unwrap();
        assert!(twice.max_abs_diff(&s) <= 1e-10 * s.max_abs());
    }

    #[test]
    fn modes_roundtrip() {
        let op = RingOperator::new(8, 1.0, 4.0, 0.25).unwrap();
        let x = random_grid(8, 3, 11);
        let back = op.from_modes(&op.to_modes(&x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let op = RingOperator::new(8, 1.0, 4.0, 0.25).unwrap();
        let a = op.sample_gaussian(6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = op.sample_gaussian(6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn condition_number_closed_form() {
        let op = RingOperator::new(32, 1.0, 4.0, 0.0).unwrap();
        let ev = op.sorted_eigenvalues();
        let ratio = ev[31] / ev[1];
        let expected = 1.0 / (PI / 32.0).sin().powi(2);
        assert!((ratio - expected).abs() < 1e-9 * expected);
        assert!((op.condition_number() - expected).abs() < 1e-9 * expected);
        assert!((op.frequency_ratio() - 1.0 / (PI / 32.0).sin()).abs() < 1e-9);
    }
}
