//! The experiments behind each subcommand. Every function is a pure function
//! of the configuration (wall times aside) and returns its rows so that tests
//! can inspect them without touching the filesystem.

use std::io::Write;
use std::sync::Arc;

use pimd_core::dynamics::{coupled_run, ForceStrategy, Method, Trajectory};
use pimd_core::estimators::{
    autocorrelation, relative_entropy_1d, weak_error_ensemble, EnsembleMember, RunningStats, WeakErrorSeries,
    WeightSampler,
};
use pimd_core::oracle::DenseRing;
use pimd_core::{Grid, RingOperator, SystemSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{median, versioned_writer, Summary, RUN_SCHEMA, SUMMARY_SCHEMA};
use crate::CliError;

/// Trajectory id of the long reference run used for relative entropies.
pub const REFERENCE_TRAJECTORY: u64 = 1 << 32;

/// One row of the `run` CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub step: u64,
    pub t: f64,
    /// Average of retained weights so far; empty during burn-in.
    pub running_average: Option<f64>,
    pub instantaneous_weight: f64,
    /// 1 accepted, 0 rejected, empty without a Metropolis test.
    pub acceptance_flag: Option<u8>,
    /// Force pair evaluations in this step.
    pub pair_evals: u64,
    /// Empty unless `run.timing` is set.
    pub wall_ms: Option<f64>,
}

/// Number of leading samples (taken after steps 1, 2, …) with `t < burn_in`.
pub fn burn_in_samples(burn_in: f64, dt: f64) -> usize {
    ((burn_in / dt).ceil() as usize).saturating_sub(1)
}

/// Result of a single time-average run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverage {
    pub summary: Summary,
    /// Retained weights, one per step.
    pub series: Vec<f64>,
}

/// Runs one trajectory (id 0) of `method` with the given step and length,
/// streaming every `run.stride`-th step to `rows` if given.
pub fn time_average<W: Write>(
    cfg: &ExperimentConfig,
    method: Method,
    dt: f64,
    total_time: f64,
    mut rows: Option<&mut csv::Writer<W>>,
) -> Result<TimeAverage, CliError> {
    let mut spec = cfg.spec();
    spec.dt = dt;
    spec.total_time = total_time;
    let ring = Arc::new(spec.ring()?);
    let strategy = cfg.strategy(method);
    let mut traj = Trajectory::new(spec, ring, strategy, 0)?;
    traj.set_division_refresh(cfg.experiment.division_refresh);
    let mut sampler = WeightSampler::new(cfg.observable(), cfg.weight_mode(method), spec.seed, 0);
    let mut stats = RunningStats::new(burn_in_samples(cfg.run.burn_in, dt), 1);
    let steps = spec.n_steps() as u64;
    let stride = cfg.run.stride.max(1) as u64;
    let mut pair_evals = 0u64;
    let mut wall = Vec::new();
    for _ in 0..steps {
        let o = traj.step()?;
        let (w, _) = sampler.weight(&traj)?;
        stats.push(w);
        pair_evals += o.pair_evals;
        let ms = o.elapsed.as_secs_f64() * 1e3;
        if cfg.run.timing {
            wall.push(ms);
        }
        if let Some(writer) = rows.as_deref_mut() {
            if traj.steps() % stride == 0 {
                writer.serialize(RunRow {
                    step: traj.steps(),
                    t: traj.time(),
                    running_average: stats.mean(),
                    instantaneous_weight: w,
                    acceptance_flag: o.accepted.map(u8::from),
                    pair_evals: o.pair_evals,
                    wall_ms: cfg.run.timing.then_some(ms),
                })?;
            }
        }
    }
    let ac = autocorrelation(stats.series(), dt, stats.count() / 2).ok();
    let summary = Summary {
        schema: SUMMARY_SCHEMA.to_string(),
        preset: cfg.name().to_string(),
        seed: spec.seed,
        method: method.name().to_string(),
        batch_size: strategy.batch_size(),
        dt,
        samples: stats.count(),
        mean: stats.mean(),
        std_err: ac.as_ref().map(|a| a.std_err),
        ac_time: ac.as_ref().map(|a| a.ac_time),
        eff_variance: ac.as_ref().map(|a| a.eff_variance),
        rejection_rate: traj.rejection_rate(),
        pair_evals_per_step: if steps > 0 { pair_evals as f64 / steps as f64 } else { 0.0 },
        wall_ms_per_step: median(&wall),
    };
    Ok(TimeAverage {
        summary,
        series: stats.series().to_vec(),
    })
}

/// The `run` subcommand: streams the CSV to `out` and returns the summary.
pub fn run_time_average<W: Write>(cfg: &ExperimentConfig, out: W) -> Result<Summary, CliError> {
    cfg.validate()?;
    let mut writer = versioned_writer(out, RUN_SCHEMA)?;
    let r = time_average(cfg, cfg.experiment.method, cfg.system.dt, cfg.system.total_time, Some(&mut writer))?;
    writer.flush()?;
    Ok(r.summary)
}

/// One row of the error table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub method: String,
    pub batch_size: Option<usize>,
    pub dt: f64,
    pub mean: f64,
    pub std_err: Option<f64>,
    pub reference: f64,
    /// `|mean − reference| / |reference|`
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    /// Rows where the larger batch did worse than the smaller one.
    pub warnings: Vec<String>,
}

/// Exact-force reference at `error_table.reference_dt`, then exact and
/// random-batch time averages for every timestep and batch size.
pub fn run_error_table(cfg: &ExperimentConfig) -> Result<ErrorTable, CliError> {
    cfg.validate()?;
    cfg.check_error_table_batches()?;
    let t = cfg.system.total_time;
    let reference = time_average::<Vec<u8>>(cfg, Method::PmmLang, cfg.error_table.reference_dt, t, None)?;
    let reference_mean = reference.summary.mean.ok_or(CliError::NoSamples)?;

    let mut jobs = Vec::new();
    for &dt in &cfg.error_table.dts {
        jobs.push((dt, None));
        for &p in &cfg.error_table.batch_sizes {
            jobs.push((dt, Some(p)));
        }
    }
    let rows: Vec<Result<ErrorRow, CliError>> = jobs
        .par_iter()
        .map(|&(dt, p)| {
            let mut c = cfg.clone();
            let method = match p {
                Some(p) => {
                    c.system.batch_size = p;
                    Method::PmmLangRbm
                }
                None => Method::PmmLang,
            };
            let r = time_average::<Vec<u8>>(&c, method, dt, t, None)?;
            let mean = r.summary.mean.ok_or(CliError::NoSamples)?;
            Ok(ErrorRow {
                method: method.name().to_string(),
                batch_size: p,
                dt,
                mean,
                std_err: r.summary.std_err,
                reference: reference_mean,
                rel_error: (mean - reference_mean).abs() / reference_mean.abs(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut warnings = Vec::new();
    for &dt in &cfg.error_table.dts {
        let mut by_p: Vec<(usize, f64)> = rows
            .iter()
            .filter(|r| r.dt == dt)
            .filter_map(|r| r.batch_size.map(|p| (p, r.rel_error)))
            .collect();
        by_p.sort_by_key(|x| x.0);
        for w in by_p.windows(2) {
            if w[1].1 > w[0].1 {
                warnings.push(format!(
                    "dt = {dt}: error with p = {} ({:.3e}) exceeds p = {} ({:.3e})",
                    w[1].0, w[1].1, w[0].0, w[0].1
                ));
            }
        }
    }
    Ok(ErrorTable { rows, warnings })
}

/// Weak error between `experiment.method` and `ensemble.method_b`.
pub fn run_weak_error(cfg: &ExperimentConfig) -> Result<WeakErrorSeries, CliError> {
    cfg.validate()?;
    cfg.check_method("ensemble.method_b", cfg.ensemble.method_b)?;
    let spec = cfg.spec();
    let member = |m: Method| EnsembleMember {
        spec,
        strategy: cfg.strategy(m),
        observable: cfg.observable(),
        weight: cfg.weight_mode(m),
    };
    Ok(weak_error_ensemble(
        &member(cfg.experiment.method),
        &member(cfg.ensemble.method_b),
        cfg.ensemble.n_trajectories,
        cfg.ensemble.sample_every,
    )?)
}

/// Flattened weak-error row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakRow {
    pub t: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub diff: f64,
    pub diff_se: f64,
}

pub fn weak_rows(s: &WeakErrorSeries) -> Vec<WeakRow> {
    (0..s.t.len())
        .map(|i| WeakRow {
            t: s.t[i],
            mean_a: s.mean_a[i],
            mean_b: s.mean_b[i],
            diff: s.diff[i],
            diff_se: s.diff_se[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub method: String,
    /// `position_x` (x-coordinate of particle 1 on bead 1) or
    /// `pair_distance` (distance of particles 1 and 2 on bead 1).
    pub observable: String,
    pub t: f64,
    pub relative_entropy: f64,
}

/// Marginal samples recorded after every step.
struct Marginals {
    position_x: Vec<f64>,
    pair_distance: Vec<f64>,
}

fn record_marginals(spec: SystemSpec, strategy: ForceStrategy, id: u64, skip: usize) -> Result<Marginals, CliError> {
    let ring = Arc::new(spec.ring()?);
    let mut traj = Trajectory::new(spec, ring, strategy, id)?;
    let steps = spec.n_steps();
    let mut m = Marginals {
        position_x: Vec::with_capacity(steps),
        pair_distance: Vec::with_capacity(steps),
    };
    for j in 0..steps {
        traj.step()?;
        if j < skip {
            continue;
        }
        let q: &Grid = traj.positions();
        let a = q.particle(0, 0);
        m.position_x.push(a[0]);
        if spec.n_particles > 1 {
            let b = q.particle(0, 1);
            m.pair_distance
                .push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt());
        }
    }
    Ok(m)
}

/// Relative entropy of each method's empirical marginals (from `t = 0`)
/// against an exact-force reference run with burn-in, at each checkpoint.
pub fn run_relative_entropy(cfg: &ExperimentConfig) -> Result<Vec<EntropyRow>, CliError> {
    cfg.validate()?;
    cfg.check_method("ensemble.method_b", cfg.ensemble.method_b)?;
    let e = &cfg.ensemble;
    let mut reference_spec = cfg.spec();
    reference_spec.total_time = e.reference_time;
    let reference = record_marginals(
        reference_spec,
        ForceStrategy::Exact,
        REFERENCE_TRAJECTORY,
        burn_in_samples(cfg.run.burn_in, reference_spec.dt),
    )?;
    let mut spec = cfg.spec();
    spec.total_time = e.entropy_time;
    let methods = [cfg.experiment.method, e.method_b];
    let runs: Vec<Result<Marginals, CliError>> = methods
        .par_iter()
        .map(|&m| record_marginals(spec, cfg.strategy(m), 0, 0))
        .collect();
    let mut rows = Vec::new();
    for (m, run) in methods.iter().zip(runs) {
        let run = run?;
        for (name, samples, refs) in [
            ("position_x", &run.position_x, &reference.position_x),
            ("pair_distance", &run.pair_distance, &reference.pair_distance),
        ] {
            if refs.is_empty() {
                continue;
            }
            for &t in &e.checkpoints {
                let n = ((t / spec.dt).round() as usize).min(samples.len());
                if n == 0 || t > e.entropy_time + 0.5 * spec.dt {
                    continue;
                }
                rows.push(EntropyRow {
                    method: m.name().to_string(),
                    observable: name.to_string(),
                    t,
                    relative_entropy: relative_entropy_1d(&samples[..n], refs, e.entropy_bins)?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongRow {
    pub dt: f64,
    pub t: f64,
    pub e: f64,
}

/// Strong error `e(t)` of random-batch against exact dynamics on
/// `[0, strong_error.horizon]` for each timestep.
pub fn run_strong_error(cfg: &ExperimentConfig) -> Result<Vec<StrongRow>, CliError> {
    cfg.validate()?;
    let s = &cfg.strong_error;
    let mut rows = Vec::new();
    for &dt in &s.dts {
        let mut spec = cfg.spec();
        spec.dt = dt;
        let steps = (s.horizon / dt).round() as usize;
        let series = coupled_run(&spec, cfg.system.batch_size, steps, s.replicas)?;
        rows.extend(series.t.iter().zip(&series.e).map(|(&t, &e)| StrongRow { dt, t, e }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub n_beads: usize,
    pub index: usize,
    /// Eigenvalue of `L + αI` from the closed form used by the FFT path.
    pub fft: f64,
    pub dense: f64,
    pub abs_diff: f64,
    /// `1e-10 · λ_max`
    pub tolerance: f64,
}

/// Sorted spectrum of `L + αI` against a dense symmetric eigensolver.
pub fn run_spectrum_check(cfg: &ExperimentConfig) -> Result<Vec<SpectrumRow>, CliError> {
    cfg.validate()?;
    let spec = cfg.spec();
    let mut rows = Vec::new();
    for &n in &cfg.spectrum.bead_counts {
        let ring = RingOperator::new(n, spec.mass, spec.beta, spec.alpha)?;
        let dense = DenseRing::new(n, spec.mass, spec.beta, spec.alpha);
        let tol = 1e-10 * dense.eigenvalues[n - 1];
        for (i, (l, d)) in ring.sorted_eigenvalues().iter().zip(&dense.eigenvalues).enumerate() {
            let fft = l + spec.alpha;
            rows.push(SpectrumRow {
                n_beads: n,
                index: i,
                fft,
                dense: *d,
                abs_diff: (fft - d).abs(),
                tolerance: tol,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub n_particles: usize,
    pub n_beads: usize,
    pub method: String,
    pub batch_size: Option<usize>,
    pub dt: f64,
    pub steps: usize,
    pub rejection_rate: f64,
}

/// Long-run Metropolis rejection rate for each particle count, method and
/// timestep (trajectory id 0 throughout).
pub fn run_rejection_table(cfg: &ExperimentConfig) -> Result<Vec<RejectionRow>, CliError> {
    cfg.validate()?;
    let r = &cfg.rejection_table;
    for &m in &r.methods {
        cfg.check_method("rejection_table.methods", m)?;
    }
    let mut jobs = Vec::new();
    for &p in &r.particle_counts {
        for &m in &r.methods {
            for &dt in &r.dts {
                jobs.push((p, m, dt));
            }
        }
    }
    let rows: Vec<Result<RejectionRow, CliError>> = jobs
        .par_iter()
        .map(|&(p, m, dt)| {
            let mut c = cfg.clone();
            c.system.n_particles = p;
            c.system.alpha = None;
            c.system.alpha0 = None;
            c.system.dt = dt;
            let spec = c.spec();
            let strategy = c.strategy(m);
            let ring = Arc::new(spec.ring()?);
            let mut traj = Trajectory::new(spec, ring, strategy, 0)?;
            let steps = spec.n_steps();
            for _ in 0..steps {
                traj.step()?;
            }
            Ok(RejectionRow {
                n_particles: p,
                n_beads: spec.n_beads,
                method: m.name().to_string(),
                batch_size: strategy.batch_size(),
                dt,
                steps,
                rejection_rate: traj.rejection_rate().unwrap_or(0.0),
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Median wall time per step (ms) and pair evaluations per step of `strategy`
/// after `warmup` untimed steps.
/// Median wall time per step and mean pair evaluations per step for each
/// strategy. Strategies advance in interleaved blocks of `block` steps so that
/// slow drifts in machine load hit all of them alike.
pub fn step_timing(
    spec: &SystemSpec,
    strategies: &[ForceStrategy],
    warmup: usize,
    rounds: usize,
    block: usize,
) -> Result<Vec<(f64, f64)>, CliError> {
    let ring = Arc::new(spec.ring()?);
    let mut trajs = strategies
        .iter()
        .map(|&s| Trajectory::new(*spec, ring.clone(), s, 0))
        .collect::<Result<Vec<_>, _>>()?;
    for traj in &mut trajs {
        for _ in 0..warmup {
            traj.step()?;
        }
    }
    let mut wall = vec![Vec::with_capacity(rounds * block); trajs.len()];
    let mut pairs = vec![0u64; trajs.len()];
    for _ in 0..rounds {
        for (i, traj) in trajs.iter_mut().enumerate() {
            for _ in 0..block {
                let o = traj.step()?;
                wall[i].push(o.elapsed.as_secs_f64() * 1e3);
                pairs[i] += o.pair_evals;
            }
        }
    }
    let steps = (rounds * block).max(1) as f64;
    Ok(wall
        .iter()
        .zip(&pairs)
        .map(|(w, &p)| (median(w).unwrap_or(0.0), p as f64 / steps))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burn_in_counts() {
        assert_eq!(burn_in_samples(0.0, 0.25), 0);
        assert_eq!(burn_in_samples(1.0, 0.25), 3);
        assert_eq!(burn_in_samples(1.1, 0.25), 4);
    }
}
