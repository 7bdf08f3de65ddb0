//! Observables, running averages and the statistics used to judge them:
//! integrated autocorrelation times, ensemble weak errors, histogram
//! relative entropy and the two-sample Kolmogorov–Smirnov test.

use std::sync::Arc;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{add_trap_mismatch, stream_rng, DynamicsError, ForceStrategy, Stream, Trajectory};
use crate::grid::Grid;
use crate::potential::PairObservable;
use crate::rbm::{batch_force, random_batch, random_division, rbm_pairwise_observable};
use crate::system::{full_interaction_force, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("series is constant; autocorrelation is undefined")]
    ConstantSeries,
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
}

/// Position weight, exact: `(1/N) Σ_k (1/P) Σ_{i<j} a(q_k^i − q_k^j)`.
pub fn weight_position(a: impl Fn([f64; 3]) -> f64, q: &Grid) -> f64 {
    let n = q.rows();
    let p = q.cols() / 3;
    let mut sum = 0.0;
    for k in 0..n {
        for i in 0..p {
            let qi = q.particle(k, i);
            for j in i + 1..p {
                let qj = q.particle(k, j);
                sum += a([qi[0] - qj[0], qi[1] - qj[1], qi[2] - qj[2]]);
            }
        }
    }
    sum / (n * p) as f64
}

/// Virial kinetic-energy weight
/// `3P/(2β) + (1/2N) Σ_k (q_k − q̄) · (α q_k + grad_k)`, where `grad` is the
/// interaction gradient (plus any trap beyond `α`) at `q`.
pub fn weight_virial(beta: f64, alpha: f64, q: &Grid, grad: &Grid) -> f64 {
    let n = q.rows();
    let cols = q.cols();
    let p = cols / 3;
    let mut centroid = vec![0.0; cols];
    for k in 0..n {
        for (c, x) in centroid.iter_mut().zip(q.row(k)) {
            *c += x;
        }
    }
    for c in &mut centroid {
        *c /= n as f64;
    }
    let mut sum = 0.0;
    for k in 0..n {
        for ((x, g), c) in q.row(k).iter().zip(grad.row(k)).zip(&centroid) {
            sum += (x - c) * (alpha * x + g);
        }
    }
    1.5 * p as f64 / beta + sum / (2 * n) as f64
}

/// Quantity averaged along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// Kinetic energy by the virial estimator.
    Virial,
    /// Bead-averaged pair sum of a two-body function.
    Pair { function: PairObservable },
}

/// Whether weights use the full pair sum or a random batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    Exact,
    Rbm(usize),
}

/// Evaluates observable weights on a trajectory's current positions, with its
/// own random stream for batch choices.
#[derive(Debug, Clone)]
pub struct WeightSampler {
    observable: Observable,
    mode: WeightMode,
    rng: ChaCha8Rng,
    buf: Grid,
}

impl WeightSampler {
    pub fn new(observable: Observable, mode: WeightMode, seed: u64, trajectory_id: u64) -> Self {
        Self {
            observable,
            mode,
            rng: stream_rng(seed, trajectory_id, Stream::Weight),
            buf: Grid::zeros(0, 0),
        }
    }

    pub fn observable(&self) -> Observable {
        self.observable
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    /// Weight at the trajectory's current positions and the pair
    /// evaluations it cost.
    pub fn weight(&mut self, traj: &Trajectory) -> Result<(f64, u64), DynamicsError> {
        let spec = traj.spec();
        let q = traj.positions();
        match self.observable {
            Observable::Pair { function } => {
                let a = |d: [f64; 3]| function.eval(d);
                match self.mode {
                    WeightMode::Exact => {
                        let p = spec.n_particles;
                        Ok((weight_position(a, q), (spec.n_beads * p * p.saturating_sub(1) / 2) as u64))
                    }
                    WeightMode::Rbm(b) => {
                        let batch = random_batch(spec.n_particles, b, &mut self.rng)?;
                        Ok((rbm_pairwise_observable(a, q, &batch), (spec.n_beads * b * (b - 1) / 2) as u64))
                    }
                }
            }
            Observable::Virial => {
                if let (WeightMode::Exact, Some(f)) = (self.mode, traj.cached_exact_force()) {
                    return Ok((weight_virial(spec.beta, spec.alpha, q, f), 0));
                }
                if !self.buf.same_shape(q) {
                    self.buf = Grid::zeros(q.rows(), q.cols());
                }
                let pairs = match self.mode {
                    WeightMode::Exact => full_interaction_force(&spec.potential, q, &mut self.buf)?,
                    WeightMode::Rbm(b) => {
                        let d = random_division(spec.n_particles, b, &mut self.rng)?;
                        batch_force(&spec.potential, q, &d, &mut self.buf)?
                    }
                };
                add_trap_mismatch(spec, q, &mut self.buf);
                Ok((weight_virial(spec.beta, spec.alpha, q, &self.buf), pairs))
            }
        }
    }
}

/// Streaming mean with a burn-in and an optional stored series.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunningStats {
    burn_in: usize,
    stride: usize,
    seen: usize,
    count: usize,
    sum: f64,
    series: Vec<f64>,
}

impl RunningStats {
    /// Skips the first `burn_in` pushes. With `stride > 0`, every
    /// `stride`-th retained value is stored.
    pub fn new(burn_in: usize, stride: usize) -> Self {
        Self {
            burn_in,
            stride,
            ..Self::default()
        }
    }

    pub fn push(&mut self, x: f64) {
        self.seen += 1;
        if self.seen <= self.burn_in {
            return;
        }
        if self.stride > 0 && self.count.is_multiple_of(self.stride) {
            self.series.push(x);
        }
        self.count += 1;
        self.sum += x;
    }

    pub fn extend(&mut self, xs: &[f64]) {
        for &x in xs {
            self.push(x);
        }
    }

    /// Pools retained samples of two runs.
    pub fn merge(&mut self, other: &RunningStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.series.extend_from_slice(&other.series);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }
}

/// Autocorrelation summary of a time series sampled every `dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Autocorrelation {
    /// Normalized autocorrelation `ρ_l` for `l = 0..=max_lag`.
    pub acf: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `Δt (1 + 2 Σ ρ_l)`, summed up to the first negative `ρ_l`.
    pub ac_time: f64,
    /// `variance · ac_time / T`, the variance of the time average.
    pub eff_variance: f64,
    pub std_err: f64,
}

/// FFT-based autocovariance with the integrated autocorrelation time
/// truncated at the first negative lag.
pub fn autocorrelation(series: &[f64], dt: f64, max_lag: usize) -> Result<Autocorrelation, EstimatorError> {
    let n = series.len();
    if n < 2 {
        return Err(EstimatorError::TooShort { needed: 2, got: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in &mut buf {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re / (len * n) as f64;
    if !(c0 > 1e-300 * mean.abs().max(1.0).powi(2)) {
        return Err(EstimatorError::ConstantSeries);
    }
    let lags = max_lag.min(n - 1);
    let acf: Vec<f64> = (0..=lags).map(|l| buf[l].re / (len * n) as f64 / c0).collect();
    let mut sum = 0.0;
    for &r in &acf[1..] {
        if r < 0.0 {
            break;
        }
        sum += r;
    }
    let ac_time = dt * (1.0 + 2.0 * sum);
    let variance = c0 * n as f64 / (n - 1) as f64;
    let eff_variance = variance * ac_time / (n as f64 * dt);
    Ok(Autocorrelation {
        acf,
        mean,
        variance,
        ac_time,
        eff_variance,
        std_err: eff_variance.sqrt(),
    })
}

/// Totals of a sampling run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mean: Option<f64>,
    pub samples: usize,
    pub steps: u64,
    pub pair_evals: u64,
    pub weight_pair_evals: u64,
    pub rejection_rate: Option<f64>,
    pub elapsed: Duration,
}

/// Advances `traj` by `steps` steps, evaluating the weight after every step
/// and feeding it to `stats` and `on_sample(step, time, weight)`.
pub fn run_sampling(
    traj: &mut Trajectory,
    sampler: &mut WeightSampler,
    stats: &mut RunningStats,
    steps: u64,
    mut on_sample: impl FnMut(u64, f64, f64),
) -> Result<RunSummary, DynamicsError> {
    let mut pair_evals = 0;
    let mut weight_pair_evals = 0;
    let mut elapsed = Duration::ZERO;
    for _ in 0..steps {
        let o = traj.step()?;
        pair_evals += o.pair_evals;
        elapsed += o.elapsed;
        let (w, cost) = sampler.weight(traj)?;
        weight_pair_evals += cost;
        stats.push(w);
        on_sample(traj.steps(), traj.time(), w);
    }
    Ok(RunSummary {
        mean: stats.mean(),
        samples: stats.count(),
        steps,
        pair_evals,
        weight_pair_evals,
        rejection_rate: traj.rejection_rate(),
        elapsed,
    })
}

/// One side of a paired ensemble comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMember {
    pub spec: SystemSpec,
    pub strategy: ForceStrategy,
    pub observable: Observable,
    pub weight: WeightMode,
}

/// Ensemble averages of instantaneous weights at a grid of times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakErrorSeries {
    pub t: Vec<f64>,
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    /// `mean_b − mean_a`
    pub diff: Vec<f64>,
    /// Standard error of `diff` from the paired per-trajectory differences.
    pub diff_se: Vec<f64>,
}

/// Runs `n_traj` trajectories of each member, pairing trajectory `r` of both
/// (same seed and id, hence same initial state and noise stream), and records
/// weights every `every` steps up to the members' total time.
pub fn weak_error_ensemble(
    a: &EnsembleMember,
    b: &EnsembleMember,
    n_traj: usize,
    every: usize,
) -> Result<WeakErrorSeries, DynamicsError> {
    if a.spec.dt != b.spec.dt || a.spec.n_steps() != b.spec.n_steps() {
        return Err(DynamicsError::Incompatible("paired members need the same time grid".into()));
    }
    let every = every.max(1);
    let steps = a.spec.n_steps();
    let ring_a = Arc::new(a.spec.ring()?);
    let ring_b = Arc::new(b.spec.ring()?);
    let record = |m: &EnsembleMember, ring: &Arc<crate::ring::RingOperator>, r: usize| -> Result<Vec<f64>, DynamicsError> {
        let mut traj = Trajectory::new(m.spec, ring.clone(), m.strategy, r as u64)?;
        let mut sampler = WeightSampler::new(m.observable, m.weight, m.spec.seed, r as u64);
        let mut out = vec![sampler.weight(&traj)?.0];
        for j in 1..=steps {
            traj.step()?;
            if j % every == 0 {
                out.push(sampler.weight(&traj)?.0);
            }
        }
        Ok(out)
    };
    let runs = crate::parallel::map_indexed(n_traj, |r| -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        Ok((record(a, &ring_a, r)?, record(b, &ring_b, r)?))
    });
    let len = steps / every + 1;
    let mut sa = vec![0.0; len];
    let mut sb = vec![0.0; len];
    let mut sd = vec![0.0; len];
    let mut sd2 = vec![0.0; len];
    for run in runs {
        let (wa, wb) = run?;
        for i in 0..len {
            let d = wb[i] - wa[i];
            sa[i] += wa[i];
            sb[i] += wb[i];
            sd[i] += d;
            sd2[i] += d * d;
        }
    }
    let m = n_traj.max(1) as f64;
    let diff: Vec<f64> = sd.iter().map(|s| s / m).collect();
    let diff_se = sd2
        .iter()
        .zip(&diff)
        .map(|(s2, d)| {
            if n_traj < 2 {
                f64::NAN
            } else {
                ((s2 / m - d * d).max(0.0) * m / (m - 1.0) / m).sqrt()
            }
        })
        .collect();
    Ok(WeakErrorSeries {
        t: (0..len).map(|i| (i * every) as f64 * a.spec.dt).collect(),
        mean_a: sa.into_iter().map(|s| s / m).collect(),
        mean_b: sb.into_iter().map(|s| s / m).collect(),
        diff,
        diff_se,
    })
}

/// `D(p̂ ‖ π̂) = Σ p̂ log(p̂ / π̂)` between histograms of `samples` and
/// `reference` on `bins` equal bins spanning the reference range.
///
/// Samples outside the range fall into the edge bins. Reference bins that are
/// empty where the sample histogram is not receive mass `1/(10 n_ref)` before
/// renormalization, so the divergence stays finite.
pub fn relative_entropy_1d(samples: &[f64], reference: &[f64], bins: usize) -> Result<f64, EstimatorError> {
    if samples.is_empty() || reference.len() < 2 || bins == 0 {
        return Err(EstimatorError::TooShort {
            needed: 2,
            got: samples.len().min(reference.len()),
        });
    }
    let lo = reference.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(EstimatorError::ConstantSeries);
    }
    let width = (hi - lo) / bins as f64;
    let index = |x: f64| (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
    let histogram = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in xs {
            h[index(x)] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    };
    let p = histogram(samples);
    let mut pi = histogram(reference);
    // Smoothing only where it is needed keeps D exactly zero on identical inputs.
    let eps = 1.0 / (10.0 * reference.len() as f64);
    let mut patched = false;
    for (pi, &p) in pi.iter_mut().zip(&p) {
        if p > 0.0 && *pi == 0.0 {
            *pi = eps;
            patched = true;
        }
    }
    if patched {
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
    }
    Ok(p.iter()
        .zip(&pi)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &pi)| p * (p / pi).ln())
        .sum::<f64>()
        .max(0.0))
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, EstimatorError> {
    if a.is_empty() || b.is_empty() {
        return Err(EstimatorError::TooShort {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Every `step`-th element.
pub fn thin(series: &[f64], step: usize) -> Vec<f64> {
    series.iter().step_by(step.max(1)).copied().collect()
}
