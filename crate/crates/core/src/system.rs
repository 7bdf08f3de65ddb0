//! Phase state, run configuration, and the exact `O(N P²)` interaction sums.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::potential::{default_alpha, ExternalPotential, PairPotential, SINGULAR_RADIUS};
use crate::ring::{RingError, RingOperator};

/// Interaction-gradient field `Σ_{j≠i} ∇V(q_k^i − q_k^j)`, laid out like
/// positions (`N × 3P`). It enters the velocity update with a minus sign.
pub type ForceField = Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForceError {
    #[error("particles {i} and {j} coincide in bead {bead} (r = {r:e})")]
    Coincident { bead: usize, i: usize, j: usize, r: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Ring(#[from] RingError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Physical and numerical parameters of one sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub mass: f64,
    pub beta: f64,
    pub n_beads: usize,
    pub n_particles: usize,
    /// Preconditioner regularization; must equal the trap strength for the
    /// interaction-only form of the dynamics to be exact.
    pub alpha: f64,
    pub gamma: f64,
    pub dt: f64,
    pub batch_size: usize,
    pub potential: PairPotential,
    pub external: ExternalPotential,
    pub seed: u64,
    pub total_time: f64,
}

impl SystemSpec {
    /// Defaults used throughout the experiments: `m = 1`, `β = 4`, `γ = 2`,
    /// `α = P^(-2/3)` for both the trap and the preconditioner.
    pub fn new(n_beads: usize, n_particles: usize, potential: PairPotential) -> Self {
        let alpha = default_alpha(n_particles);
        Self {
            mass: 1.0,
            beta: 4.0,
            n_beads,
            n_particles,
            alpha,
            gamma: 2.0,
            dt: 1.0 / 16.0,
            batch_size: n_particles.min(2).max(1),
            potential,
            external: ExternalPotential::Harmonic { alpha0: alpha },
            seed: 0,
            total_time: 100.0,
        }
    }

    pub fn beta_n(&self) -> f64 {
        self.beta / self.n_beads as f64
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_beads, 3 * self.n_particles)
    }

    pub fn n_steps(&self) -> usize {
        (self.total_time / self.dt).round() as usize
    }

    pub fn ring(&self) -> Result<RingOperator, RingError> {
        RingOperator::new(self.n_beads, self.mass, self.beta, self.alpha)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        };
        if self.n_beads < 4 || !self.n_beads.is_multiple_of(2) {
            return Err(invalid("n_beads", format!("must be even and >= 4, got {}", self.n_beads)));
        }
        if self.n_particles == 0 {
            return Err(invalid("n_particles", "must be at least 1"));
        }
        positive("mass", self.mass)?;
        positive("beta", self.beta)?;
        positive("alpha", self.alpha)?;
        positive("dt", self.dt)?;
        positive("total_time", self.total_time)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        let p = self.batch_size;
        if p == 0 || p > self.n_particles || !self.n_particles.is_multiple_of(p) {
            return Err(invalid(
                "batch_size",
                format!("must divide n_particles = {}, got {p}", self.n_particles),
            ));
        }
        if self.n_particles >= 2 && p < 2 {
            return Err(invalid("batch_size", "must be at least 2"));
        }
        let ext = self.external.strength();
        positive("external.alpha0", ext)?;
        match self.potential {
            PairPotential::Coulomb { kappa } => positive("potential.kappa", kappa)?,
            PairPotential::MixedClj { sigma }
            | PairPotential::SmoothClj { sigma }
            | PairPotential::SingularClj { sigma } => positive("potential.sigma", sigma)?,
            PairPotential::Zero => {}
        }
        Ok(())
    }
}

/// Ring-polymer positions and velocities, both `N × 3P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Grid,
    pub v: Grid,
}

impl PhaseState {
    pub fn new(q: Grid, v: Grid) -> Self {
        assert!(q.same_shape(&v), "positions and velocities must share dimensions");
        Self { q, v }
    }

    pub fn n_beads(&self) -> usize {
        self.q.rows()
    }

    pub fn n_particles(&self) -> usize {
        self.q.cols() / 3
    }
}

#[inline]
fn diff(q: &Grid, k: usize, i: usize, j: usize) -> [f64; 3] {
    let a = q.particle(k, i);
    let b = q.particle(k, j);
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Accumulates `∇V(q_k^i − q_k^j)` into `out` for one pair with `scale`
/// applied (`scale = 1` for the exact sum). Returns an error on collision.
#[inline]
pub(crate) fn accumulate_pair(
    potential: &PairPotential,
    q: &Grid,
    out: &mut Grid,
    k: usize,
    i: usize,
    j: usize,
    scale: f64,
) -> Result<(), ForceError> {
    let d = diff(q, k, i, j);
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if r2 < SINGULAR_RADIUS * SINGULAR_RADIUS {
        return Err(ForceError::Coincident {
            bead: k,
            i,
            j,
            r: r2.sqrt(),
        });
    }
    let s = scale * potential.gradient_scale(r2);
    let row = out.row_mut(k);
    for c in 0..3 {
        let g = s * d[c];
        row[3 * i + c] += g;
        row[3 * j + c] -= g;
    }
    Ok(())
}

/// Exact interaction gradient for every bead and particle. Overwrites `out`
/// and returns the number of pair evaluations, `N·P(P−1)/2`.
pub fn full_interaction_force(
    potential: &PairPotential,
    q: &Grid,
    out: &mut ForceField,
) -> Result<u64, ForceError> {
    debug_assert!(out.same_shape(q));
    out.fill(0.0);
    let p = q.cols() / 3;
    if !potential.is_interacting() {
        return Ok(0);
    }
    for k in 0..q.rows() {
        for i in 0..p {
            for j in i + 1..p {
                accumulate_pair(potential, q, out, k, i, j, 1.0)?;
            }
        }
    }
    Ok((q.rows() * p * p.saturating_sub(1) / 2) as u64)
}

/// Convenience wrapper allocating the output field.
pub fn interaction_force(potential: &PairPotential, q: &Grid) -> Result<ForceField, ForceError> {
    let mut out = Grid::zeros(q.rows(), q.cols());
    full_interaction_force(potential, q, &mut out)?;
    Ok(out)
}

/// `U(q) = Σ_k Σ_{i<j} V(q_k^i − q_k^j)`.
pub fn u_alpha(potential: &PairPotential, q: &Grid) -> Result<f64, ForceError> {
    let p = q.cols() / 3;
    let mut total = 0.0;
    for k in 0..q.rows() {
        for i in 0..p {
            for j in i + 1..p {
                let d = diff(q, k, i, j);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r < SINGULAR_RADIUS {
                    return Err(ForceError::Coincident { bead: k, i, j, r });
                }
                total += potential.radial_value(r);
            }
        }
    }
    Ok(total)
}

/// Singular-part energy with a hard cutoff at `σ`: only pairs closer than
/// `σ` are summed. Returns `+∞` when a counted pair collides, which the
/// Metropolis test turns into a rejection.
pub fn u2_cutoff(sigma: f64, q: &Grid) -> f64 {
    let p = q.cols() / 3;
    let sigma2 = sigma * sigma;
    let s6 = sigma2 * sigma2 * sigma2;
    let mut total = 0.0;
    for k in 0..q.rows() {
        for i in 0..p {
            for j in i + 1..p {
                let d = diff(q, k, i, j);
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                if r2 >= sigma2 {
                    continue;
                }
                if r2 < SINGULAR_RADIUS * SINGULAR_RADIUS {
                    return f64::INFINITY;
                }
                let x = s6 / (r2 * r2 * r2);
                total += (x * x - x) / 6.0 + 1.0;
            }
        }
    }
    total
}

/// Smallest pair separation within any bead.
pub fn min_pair_distance(q: &Grid) -> f64 {
    let p = q.cols() / 3;
    let mut best = f64::INFINITY;
    for k in 0..q.rows() {
        for i in 0..p {
            for j in i + 1..p {
                let d = diff(q, k, i, j);
                best = best.min((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
            }
        }
    }
    best
}

/// Standard deviation of the per-bead jitter added to the replicated start.
const INIT_JITTER: f64 = 0.05;
const MIN_INIT_SEPARATION: f64 = 1e-6;

/// Random start: particle centers i.i.d. Gaussian with standard deviation
/// `P^(1/3)` per coordinate, copied to every bead with a small jitter;
/// velocities drawn from their stationary law `N(0, (β_N (L + αI))⁻¹)`.
/// Positions are redrawn until no pair is closer than `1e-6`.
pub fn init_state<R: Rng + ?Sized>(spec: &SystemSpec, ring: &RingOperator, rng: &mut R) -> PhaseState {
    let (n, cols) = spec.dims();
    let spread = (spec.n_particles as f64).cbrt();
    let q = loop {
        let centers: Vec<f64> = (0..cols).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let q = Grid::from_fn(n, cols, |_, c| centers[c] + INIT_JITTER * rng.sample::<f64, _>(StandardNormal));
        if spec.n_particles < 2 || min_pair_distance(&q) >= MIN_INIT_SEPARATION {
            break q;
        }
    };
    let mut v = ring
        .sample_gaussian(cols, rng)
        .expect("validated spec has alpha > 0");
    v.scale(1.0 / spec.beta_n().sqrt());
    PhaseState::new(q, v)
}

const SNAPSHOT_MAGIC: &str = "# pimd-snapshot v1";

/// Writes positions as CSV: a header line
/// `# pimd-snapshot v1 n_beads=N n_particles=P`, a column line
/// `bead,particle,x,y,z`, then one row per (bead, particle) in bead-major order.
pub fn write_snapshot<W: Write>(q: &Grid, mut w: W) -> io::Result<()> {
    let p = q.cols() / 3;
    writeln!(w, "{SNAPSHOT_MAGIC} n_beads={} n_particles={p}", q.rows())?;
    writeln!(w, "bead,particle,x,y,z")?;
    for k in 0..q.rows() {
        for i in 0..p {
            let x = q.particle(k, i);
            writeln!(w, "{k},{i},{:e},{:e},{:e}", x[0], x[1], x[2])?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> io::Result<Grid> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot".into()))??;
    let rest = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| bad(format!("not a snapshot header: {header}")))?;
    let mut n = None;
    let mut p = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n_beads=") {
            n = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("n_particles=") {
            p = v.parse::<usize>().ok();
        }
    }
    let (n, p) = n.zip(p).ok_or_else(|| bad("missing dimensions in header".into()))?;
    lines.next().ok_or_else(|| bad("missing column line".into()))??;
    let mut q = Grid::zeros(n, 3 * p);
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields: {line}")));
        }
        let parse_idx = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
        let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
        let (k, i) = (parse_idx(f[0])?, parse_idx(f[1])?);
        if k >= n || i >= p {
            return Err(bad(format!("index out of range: {line}")));
        }
        for c in 0..3 {
            q.set(k, 3 * i + c, parse_f(f[2 + c])?);
        }
        seen += 1;
    }
    if seen != n * p {
        return Err(bad(format!("expected {} rows, found {seen}", n * p)));
    }
    Ok(q)
}
