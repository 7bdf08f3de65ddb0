//! BAOAB integration of the preconditioned ring-polymer Langevin dynamics
//!
//! ```text
//! dq = v dt
//! dv = −q dt − (L + αI)⁻¹ ∇U(q) dt − γ v dt + √(2γ (L + αI)⁻¹ / β_N) dB
//! ```
//!
//! and its variants: random batch forces, and the splitting Monte Carlo
//! scheme that integrates only the smooth part of the interaction and
//! corrects for the singular part with a Metropolis test (flipping the
//! velocity on rejection).
//!
//! Each trajectory owns independent counter-based random streams derived
//! from `(seed, trajectory_id)`: one for its initial state, one for the
//! thermostat noise and Metropolis uniforms, one for batch divisions.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::potential::PairPotential;
use crate::rbm::{batch_force, random_division, Division, DivisionError};
use crate::ring::{RingError, RingOperator};
use crate::system::{
    full_interaction_force, init_state, u2_cutoff, ConfigError, ForceError, ForceField, PhaseState, SystemSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Force(#[from] ForceError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Division(#[from] DivisionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Incompatible(String),
}

/// Which interaction gradient drives the kicks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForceStrategy {
    /// Full pair sum of the whole interaction.
    Exact,
    /// Random batches of the given size, whole interaction.
    Rbm(usize),
    /// Full pair sum of the smooth part, plus Metropolis on the singular part.
    SmoothExact,
    /// Random batches of the smooth part, plus Metropolis on the singular part.
    SmoothRbm(usize),
}

impl ForceStrategy {
    pub fn uses_metropolis(&self) -> bool {
        matches!(self, ForceStrategy::SmoothExact | ForceStrategy::SmoothRbm(_))
    }

    pub fn batch_size(&self) -> Option<usize> {
        match *self {
            ForceStrategy::Rbm(p) | ForceStrategy::SmoothRbm(p) => Some(p),
            _ => None,
        }
    }
}

/// The four samplers, named as in the experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pmmLang")]
    PmmLang,
    #[serde(rename = "pmmLang+RBM")]
    PmmLangRbm,
    #[serde(rename = "pmmLang+split")]
    PmmLangSplit,
    #[serde(rename = "pmmLang+RBM+split")]
    PmmLangRbmSplit,
}

impl Method {
    pub fn strategy(&self, batch_size: usize) -> ForceStrategy {
        match self {
            Method::PmmLang => ForceStrategy::Exact,
            Method::PmmLangRbm => ForceStrategy::Rbm(batch_size),
            Method::PmmLangSplit => ForceStrategy::SmoothExact,
            Method::PmmLangRbmSplit => ForceStrategy::SmoothRbm(batch_size),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::PmmLang => "pmmLang",
            Method::PmmLangRbm => "pmmLang+RBM",
            Method::PmmLangSplit => "pmmLang+split",
            Method::PmmLangRbmSplit => "pmmLang+RBM+split",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Method::PmmLang, Method::PmmLangRbm, Method::PmmLangSplit, Method::PmmLangRbmSplit]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

/// Whether the trailing kick of a random-batch step reuses the step's
/// division or draws a fresh one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisionRefresh {
    #[default]
    PerStep,
    PerSubstep,
}

/// Bookkeeping for one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Present iff a Metropolis test ran.
    pub accepted: Option<bool>,
    pub u2_delta: Option<f64>,
    /// Pair-gradient evaluations spent on forces during the step.
    pub pair_evals: u64,
    pub elapsed: Duration,
}

/// Start of a step's wall-clock measurement. The browser target has no
/// monotonic clock in std, so steps there report zero elapsed time.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn clock() -> Option<Instant> {
    Some(Instant::now())
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn clock() -> Option<Instant> {
    None
}

/// Independent stream roles of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Noise = 1,
    Batch = 2,
    Weight = 3,
}

/// Counter-based stream for `(seed, trajectory_id, role)`.
pub fn stream_rng(seed: u64, trajectory_id: u64, role: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4 * trajectory_id + role as u64);
    rng
}

/// Ornstein–Uhlenbeck coefficients `(e^{−γΔt}, √((1 − e^{−2γΔt}) / β_N))`.
pub fn ou_coefficients(spec: &SystemSpec) -> (f64, f64) {
    let c1 = (-spec.gamma * spec.dt).exp();
    let c2 = ((1.0 - c1 * c1) / spec.beta_n()).sqrt();
    (c1, c2)
}

/// One BAOAB step with explicit noise `eta` (columns `~ N(0, (L + αI)⁻¹)`).
///
/// `drift` is `(L + αI)⁻¹ ∇U(q)` at the incoming positions; `force_at`
/// evaluates the interaction gradient at the new positions. Returns the new
/// drift, which the next step's leading kick can reuse when the force is
/// deterministic.
pub fn baoab_step<F>(
    spec: &SystemSpec,
    ring: &RingOperator,
    state: &mut PhaseState,
    drift: &Grid,
    eta: &Grid,
    mut force_at: F,
) -> Result<Grid, DynamicsError>
where
    F: FnMut(&Grid) -> Result<ForceField, DynamicsError>,
{
    let h = 0.5 * spec.dt;
    let (c1, c2) = ou_coefficients(spec);
    kick(&mut state.v, &state.q, drift, h);
    state.q.axpy(h, &state.v);
    {
        let v = state.v.as_mut_slice();
        for (v, e) in v.iter_mut().zip(eta.as_slice()) {
            *v = c1 * *v + c2 * e;
        }
    }
    state.q.axpy(h, &state.v);
    let mut new_drift = force_at(&state.q)?;
    ring.solve_in_place(&mut new_drift)?;
    kick(&mut state.v, &state.q, &new_drift, h);
    Ok(new_drift)
}

/// `v ← v − (q + drift) h`
#[inline]
fn kick(v: &mut Grid, q: &Grid, drift: &Grid, h: f64) {
    for ((v, q), d) in v.as_mut_slice().iter_mut().zip(q.as_slice()).zip(drift.as_slice()) {
        *v -= (q + d) * h;
    }
}

/// Forces at the current positions, kept between steps when they are
/// deterministic functions of `q`.
#[derive(Debug, Clone)]
struct Cached {
    force: ForceField,
    drift: Grid,
}

/// One sampling trajectory: state, strategy, random streams, and caches.
#[derive(Debug, Clone)]
pub struct Trajectory {
    spec: SystemSpec,
    ring: Arc<RingOperator>,
    strategy: ForceStrategy,
    refresh: DivisionRefresh,
    state: PhaseState,
    cached: Option<Cached>,
    /// Singular-part energy at the current positions (Metropolis variants).
    u2: f64,
    noise_rng: ChaCha8Rng,
    batch_rng: ChaCha8Rng,
    eta: Grid,
    steps: u64,
    accepted: u64,
    rejected: u64,
}

impl Trajectory {
    /// Validates the configuration and draws the initial state from the
    /// trajectory's init stream.
    pub fn new(
        spec: SystemSpec,
        ring: Arc<RingOperator>,
        strategy: ForceStrategy,
        trajectory_id: u64,
    ) -> Result<Self, DynamicsError> {
        check_compatible(&spec, &ring, strategy)?;
        let state = init_state(&spec, &ring, &mut stream_rng(spec.seed, trajectory_id, Stream::Init));
        Self::with_state(spec, ring, strategy, trajectory_id, state)
    }

    pub fn with_state(
        spec: SystemSpec,
        ring: Arc<RingOperator>,
        strategy: ForceStrategy,
        trajectory_id: u64,
        state: PhaseState,
    ) -> Result<Self, DynamicsError> {
        check_compatible(&spec, &ring, strategy)?;
        let (n, cols) = spec.dims();
        if state.q.rows() != n || state.q.cols() != cols {
            return Err(DynamicsError::Incompatible(format!(
                "state is {}x{}, spec expects {n}x{cols}",
                state.q.rows(),
                state.q.cols()
            )));
        }
        let u2 = match (strategy.uses_metropolis(), spec.potential.sigma()) {
            (true, Some(sigma)) => u2_cutoff(sigma, &state.q),
            _ => 0.0,
        };
        Ok(Self {
            spec,
            ring,
            strategy,
            refresh: DivisionRefresh::default(),
            state,
            cached: None,
            u2,
            noise_rng: stream_rng(spec.seed, trajectory_id, Stream::Noise),
            batch_rng: stream_rng(spec.seed, trajectory_id, Stream::Batch),
            eta: Grid::zeros(n, cols),
            steps: 0,
            accepted: 0,
            rejected: 0,
        })
    }

    pub fn set_division_refresh(&mut self, refresh: DivisionRefresh) {
        self.refresh = refresh;
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn ring(&self) -> &RingOperator {
        &self.ring
    }

    pub fn strategy(&self) -> ForceStrategy {
        self.strategy
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn positions(&self) -> &Grid {
        &self.state.q
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.spec.dt
    }

    /// Fraction of Metropolis proposals rejected so far.
    pub fn rejection_rate(&self) -> Option<f64> {
        let total = self.accepted + self.rejected;
        (self.strategy.uses_metropolis() && total > 0).then(|| self.rejected as f64 / total as f64)
    }

    /// Exact interaction gradient at the current positions, if the
    /// trajectory already holds it (exact-force strategy only).
    pub fn cached_exact_force(&self) -> Option<&ForceField> {
        match self.strategy {
            ForceStrategy::Exact => self.cached.as_ref().map(|c| &c.force),
            _ => None,
        }
    }

    /// Draws the thermostat noise for one step from the trajectory's stream.
    pub fn draw_noise(&mut self) -> Grid {
        let mut eta = Grid::zeros(self.eta.rows(), self.eta.cols());
        self.ring
            .sample_gaussian_into(&mut eta, &mut self.noise_rng)
            .expect("validated ring has alpha > 0");
        eta
    }

    fn dynamics_potential(&self) -> PairPotential {
        match self.strategy {
            ForceStrategy::Exact | ForceStrategy::Rbm(_) => self.spec.potential,
            ForceStrategy::SmoothExact | ForceStrategy::SmoothRbm(_) => self.spec.potential.smooth_part(),
        }
    }

    /// Advances one timestep with freshly drawn noise.
    pub fn step(&mut self) -> Result<StepOutcome, DynamicsError> {
        let start = clock();
        let mut eta = std::mem::replace(&mut self.eta, Grid::zeros(0, 0));
        self.ring.sample_gaussian_into(&mut eta, &mut self.noise_rng)?;
        let result = self.advance(&eta, start);
        self.eta = eta;
        result
    }

    /// Advances one timestep with caller-supplied noise. Used to drive two
    /// trajectories with the same Brownian increments.
    pub fn step_with_noise(&mut self, eta: &Grid) -> Result<StepOutcome, DynamicsError> {
        self.advance(eta, clock())
    }

    fn advance(&mut self, eta: &Grid, start: Option<Instant>) -> Result<StepOutcome, DynamicsError> {
        let potential = self.dynamics_potential();
        let mut pair_evals = 0u64;

        // Leading-kick force and the force closure for the trailing kick.
        let division: Option<Division> = match self.strategy.batch_size() {
            Some(p) => Some(random_division(self.spec.n_particles, p, &mut self.batch_rng)?),
            None => None,
        };
        let (n, cols) = self.spec.dims();
        let (force0, drift0) = match (&self.cached, &division) {
            (Some(c), None) => (c.force.clone(), c.drift.clone()),
            _ => {
                let mut f = Grid::zeros(n, cols);
                pair_evals += match &division {
                    Some(d) => batch_force(&potential, &self.state.q, d, &mut f)?,
                    None => full_interaction_force(&potential, &self.state.q, &mut f)?,
                };
                add_trap_mismatch(&self.spec, &self.state.q, &mut f);
                let mut d = f.clone();
                self.ring.solve_in_place(&mut d)?;
                (f, d)
            }
        };

        let metropolis = self.strategy.uses_metropolis();
        let backup = metropolis.then(|| self.state.clone());

        let mut trailing_force = Grid::zeros(n, cols);
        let refresh = self.refresh;
        let batch_rng = &mut self.batch_rng;
        let n_particles = self.spec.n_particles;
        let spec = self.spec;
        let new_drift = baoab_step(&self.spec, &self.ring, &mut self.state, &drift0, eta, |q| {
            let mut f = Grid::zeros(q.rows(), q.cols());
            pair_evals += match &division {
                Some(d) => match refresh {
                    DivisionRefresh::PerStep => batch_force(&potential, q, d, &mut f)?,
                    DivisionRefresh::PerSubstep => {
                        let fresh = random_division(n_particles, d.batch_size(), batch_rng)?;
                        batch_force(&potential, q, &fresh, &mut f)?
                    }
                },
                None => full_interaction_force(&potential, q, &mut f)?,
            };
            add_trap_mismatch(&spec, q, &mut f);
            trailing_force.clone_from(&f);
            Ok(f)
        })?;
        self.steps += 1;

        let new_cache = || Cached {
            force: trailing_force.clone(),
            drift: new_drift.clone(),
        };

        let (accepted, u2_delta) = if let Some(old) = backup {
            let sigma = self.spec.potential.sigma().expect("checked at construction");
            let u2_new = u2_cutoff(sigma, &self.state.q);
            let delta = u2_new - self.u2;
            let prob = if u2_new.is_finite() {
                (-self.spec.beta_n() * delta).exp().min(1.0)
            } else {
                0.0
            };
            let u: f64 = self.noise_rng.random();
            if u < prob {
                self.u2 = u2_new;
                self.accepted += 1;
                if division.is_none() {
                    self.cached = Some(new_cache());
                }
                (Some(true), Some(delta))
            } else {
                self.state = old;
                self.state.v.scale(-1.0);
                self.rejected += 1;
                if division.is_none() {
                    self.cached = Some(Cached {
                        force: force0,
                        drift: drift0,
                    });
                }
                (Some(false), Some(delta))
            }
        } else {
            if division.is_none() {
                self.cached = Some(new_cache());
            }
            (None, None)
        };

        Ok(StepOutcome {
            accepted,
            u2_delta,
            pair_evals,
            elapsed: start.map_or(Duration::ZERO, |s| s.elapsed()),
        })
    }
}

/// The dynamics carries a trap of strength `α` implicitly through the
/// preconditioner; a trap of different strength contributes the remainder.
pub(crate) fn add_trap_mismatch(spec: &SystemSpec, q: &Grid, f: &mut ForceField) {
    let extra = spec.external.strength() - spec.alpha;
    if extra != 0.0 {
        f.axpy(extra, q);
    }
}

fn check_compatible(spec: &SystemSpec, ring: &RingOperator, strategy: ForceStrategy) -> Result<(), DynamicsError> {
    spec.validate()?;
    if ring.n_beads() != spec.n_beads || ring.alpha() != spec.alpha || (ring.beta_n() - spec.beta_n()).abs() > 1e-15 * spec.beta_n() {
        return Err(DynamicsError::Incompatible("ring operator does not match the system spec".into()));
    }
    if strategy.uses_metropolis() && spec.potential.sigma().is_none() {
        return Err(DynamicsError::Incompatible(
            "splitting Monte Carlo requires a mixed Coulomb-Lennard-Jones potential".into(),
        ));
    }
    if let Some(p) = strategy.batch_size() {
        if p < 2 || !spec.n_particles.is_multiple_of(p) || p > spec.n_particles {
            return Err(DivisionError::BadBatch {
                particles: spec.n_particles,
                batch: p,
            }
            .into());
        }
    }
    Ok(())
}

/// Pathwise distance between an exact-force and a random-batch trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongErrorSeries {
    pub t: Vec<f64>,
    /// `sqrt(mean over replicas of |q̃(t) − q(t)|²)`
    pub e: Vec<f64>,
}

/// Runs `replicas` pairs of exact and random-batch trajectories (batch size
/// `batch`) from shared initial states, feeding both members of each pair
/// the same noise every step. Replica `r` uses trajectory id `r`.
pub fn coupled_run(
    spec: &SystemSpec,
    batch: usize,
    steps: usize,
    replicas: usize,
) -> Result<StrongErrorSeries, DynamicsError> {
    let ring = Arc::new(spec.ring()?);
    let per_replica = crate::parallel::map_indexed(replicas, |r| -> Result<Vec<f64>, DynamicsError> {
        let mut exact = Trajectory::new(*spec, ring.clone(), ForceStrategy::Exact, r as u64)?;
        let mut rbm = Trajectory::with_state(*spec, ring.clone(), ForceStrategy::Rbm(batch), r as u64, exact.state().clone())?;
        let mut sq = Vec::with_capacity(steps + 1);
        sq.push(0.0);
        for _ in 0..steps {
            let eta = exact.draw_noise();
            exact.step_with_noise(&eta)?;
            rbm.step_with_noise(&eta)?;
            let mut d = rbm.positions().clone();
            d.axpy(-1.0, exact.positions());
            sq.push(d.norm_sq());
        }
        Ok(sq)
    });
    let mut acc = vec![0.0; steps + 1];
    for r in per_replica {
        for (a, x) in acc.iter_mut().zip(r?) {
            *a += x;
        }
    }
    let m = replicas.max(1) as f64;
    Ok(StrongErrorSeries {
        t: (0..=steps).map(|j| j as f64 * spec.dt).collect(),
        e: acc.into_iter().map(|s| (s / m).sqrt()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coulomb_spec(n: usize, p: usize) -> SystemSpec {
        let mut s = SystemSpec::new(n, p, PairPotential::coulomb());
        s.seed = 11;
        s
    }

    #[test]
    fn rbm_with_full_batch_matches_exact_bitwise() {
        let spec = coulomb_spec(8, 4);
        let ring = Arc::new(spec.ring().unwrap());
        let mut a = Trajectory::new(spec, ring.clone(), ForceStrategy::Exact, 0).unwrap();
        let mut b = Trajectory::new(spec, ring, ForceStrategy::Rbm(4), 0).unwrap();
        for _ in 0..200 {
            a.step().unwrap();
            let o = b.step().unwrap();
            assert_eq!(o.pair_evals, 2 * 8 * 4 * 3 / 2);
        }
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn pair_evals_per_step() {
        let spec = coulomb_spec(16, 16);
        let ring = Arc::new(spec.ring().unwrap());
        let mut rbm = Trajectory::new(spec, ring.clone(), ForceStrategy::Rbm(2), 0).unwrap();
        assert_eq!(rbm.step().unwrap().pair_evals, 2 * 16 * 16 / 2);
        let mut exact = Trajectory::new(spec, ring, ForceStrategy::Exact, 0).unwrap();
        // first step evaluates the leading force too, later steps reuse it
        assert_eq!(exact.step().unwrap().pair_evals, 2 * 1920);
        assert_eq!(exact.step().unwrap().pair_evals, 1920);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let spec = coulomb_spec(8, 4);
        let ring = Arc::new(spec.ring().unwrap());
        let run = || {
            let mut t = Trajectory::new(spec, ring.clone(), ForceStrategy::Rbm(2), 3).unwrap();
            for _ in 0..100 {
                t.step().unwrap();
            }
            t.state().clone()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn split_requires_mixed_potential() {
        let spec = coulomb_spec(8, 4);
        let ring = Arc::new(spec.ring().unwrap());
        assert!(matches!(
            Trajectory::new(spec, ring, ForceStrategy::SmoothExact, 0),
            Err(DynamicsError::Incompatible(_))
        ));
    }

    #[test]
    fn split_with_full_batch_matches_split_exact() {
        let mut spec = SystemSpec::new(8, 4, PairPotential::mixed());
        spec.dt = 1.0 / 8.0;
        let ring = Arc::new(spec.ring().unwrap());
        let mut a = Trajectory::new(spec, ring.clone(), ForceStrategy::SmoothExact, 2).unwrap();
        let mut b = Trajectory::new(spec, ring, ForceStrategy::SmoothRbm(4), 2).unwrap();
        for _ in 0..300 {
            let oa = a.step().unwrap();
            let ob = b.step().unwrap();
            assert_eq!(oa.accepted, ob.accepted);
        }
        assert_eq!(a.state(), b.state());
        assert!(a.rejection_rate().is_some());
    }

    #[test]
    fn rejection_flips_velocity_and_keeps_positions() {
        // Two particles pushed deep inside σ: any proposal moving them apart
        // lowers U2, so instead start far apart and force a collision proposal
        // by checking the bookkeeping over many steps.
        let mut spec = SystemSpec::new(4, 2, PairPotential::mixed());
        spec.dt = 0.5;
        spec.seed = 5;
        let ring = Arc::new(spec.ring().unwrap());
        let mut t = Trajectory::new(spec, ring, ForceStrategy::SmoothExact, 0).unwrap();
        let mut saw_reject = false;
        for _ in 0..5000 {
            let before = t.state().clone();
            let o = t.step().unwrap();
            assert!(o.accepted.is_some() && o.u2_delta.is_some());
            if o.accepted == Some(false) {
                saw_reject = true;
                assert_eq!(t.state().q, before.q);
                let mut flipped = before.v.clone();
                flipped.scale(-1.0);
                assert_eq!(t.state().v, flipped);
            }
        }
        assert!(saw_reject);
    }

    #[test]
    fn coupled_run_with_full_batch_has_zero_error() {
        let spec = coulomb_spec(8, 4);
        let s = coupled_run(&spec, 4, 50, 3).unwrap();
        assert_eq!(s.e[0], 0.0);
        assert!(s.e.iter().all(|&e| e == 0.0));
        let s2 = coupled_run(&spec, 2, 50, 3).unwrap();
        assert_eq!(s2.e[0], 0.0);
        assert!(s2.e[50] > 0.0);
    }

    #[test]
    fn method_names_roundtrip() {
        for m in [Method::PmmLang, Method::PmmLangRbm, Method::PmmLangSplit, Method::PmmLangRbmSplit] {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
        assert_eq!(Method::parse("nope"), None);
    }
}
