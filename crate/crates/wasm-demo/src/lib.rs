//! Browser bindings: ring spectrum, pair-potential curves and an interactive
//! sampler that can be stepped from JavaScript.

use std::sync::Arc;

use pimd_core::{
    ForceStrategy, Method, Observable, PairPotential, RingOperator, SystemSpec, Trajectory, WeightMode, WeightSampler,
};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Sorted eigenvalues of `L + αI` for a ring of `n_beads` with unit mass,
/// followed by the condition number of `L` over its nonzero modes.
#[wasm_bindgen]
pub fn ring_spectrum(n_beads: usize, beta: f64, alpha: f64) -> Result<Vec<f64>, JsError> {
    let ring = RingOperator::new(n_beads, 1.0, beta, alpha).map_err(js_err)?;
    let mut out: Vec<f64> = ring.sorted_eigenvalues().iter().map(|l| l + alpha).collect();
    out.push(ring.condition_number());
    Ok(out)
}

fn potential(kind: &str) -> Result<PairPotential, JsError> {
    match kind {
        "coulomb" => Ok(PairPotential::coulomb()),
        "mixed" => Ok(PairPotential::mixed()),
        "smooth" => Ok(PairPotential::mixed().smooth_part()),
        "zero" => Ok(PairPotential::Zero),
        other => Err(JsError::new(&format!("unknown potential `{other}`"))),
    }
}

/// `n` samples of the radial pair potential on `[r_min, r_max]`.
#[wasm_bindgen]
pub fn potential_curve(kind: &str, r_min: f64, r_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if !(r_min > 0.0 && r_max > r_min && n >= 2) {
        return Err(JsError::new("need 0 < r_min < r_max and n >= 2"));
    }
    let pot = potential(kind)?;
    let h = (r_max - r_min) / (n - 1) as f64;
    Ok((0..n).map(|i| pot.radial_value(r_min + h * i as f64)).collect())
}

/// One trajectory and a running virial kinetic-energy average.
#[wasm_bindgen]
pub struct Sampler {
    traj: Trajectory,
    weights: WeightSampler,
    sum: f64,
    count: u64,
    pair_evals: u64,
}

#[wasm_bindgen]
impl Sampler {
    /// `method` is one of `pmmLang`, `pmmLang+RBM`, `pmmLang+split`,
    /// `pmmLang+RBM+split`; split methods need `potential = "mixed"`.
    #[wasm_bindgen(constructor)]
    pub fn new(
        potential_kind: &str,
        method: &str,
        n_particles: usize,
        n_beads: usize,
        batch_size: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Sampler, JsError> {
        let method = Method::parse(method).ok_or_else(|| JsError::new(&format!("unknown method `{method}`")))?;
        let mut spec = SystemSpec::new(n_beads, n_particles, potential(potential_kind)?);
        spec.dt = dt;
        spec.batch_size = batch_size;
        spec.seed = seed;
        let ring = Arc::new(spec.ring().map_err(js_err)?);
        let strategy = method.strategy(batch_size);
        let traj = Trajectory::new(spec, ring, strategy, 0).map_err(js_err)?;
        let mode = match strategy {
            ForceStrategy::Rbm(p) | ForceStrategy::SmoothRbm(p) => WeightMode::Rbm(p),
            _ => WeightMode::Exact,
        };
        Ok(Sampler {
            traj,
            weights: WeightSampler::new(Observable::Virial, mode, seed, 0),
            sum: 0.0,
            count: 0,
            pair_evals: 0,
        })
    }

    /// Advances `steps` timesteps, sampling the weight after each.
    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        for _ in 0..steps {
            let o = self.traj.step().map_err(js_err)?;
            let (w, pairs) = self.weights.weight(&self.traj).map_err(js_err)?;
            self.sum += w;
            self.count += 1;
            self.pair_evals += o.pair_evals + pairs;
        }
        Ok(())
    }

    /// Running mean of the virial kinetic energy, NaN before the first step.
    pub fn kinetic_energy(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn time(&self) -> f64 {
        self.traj.time()
    }

    pub fn pair_evals_per_step(&self) -> f64 {
        self.pair_evals as f64 / self.count.max(1) as f64
    }

    /// NaN for methods without a Metropolis test.
    pub fn rejection_rate(&self) -> f64 {
        self.traj.rejection_rate().unwrap_or(f64::NAN)
    }

    /// Bead positions as `[x, y]` pairs, bead-major then particle:
    /// `(k, i) ↦ 2 (k P + i)`.
    pub fn positions_xy(&self) -> Vec<f64> {
        let q = self.traj.positions();
        let p = q.cols() / 3;
        let mut out = Vec::with_capacity(2 * q.rows() * p);
        for k in 0..q.rows() {
            for i in 0..p {
                out.push(q.get(k, 3 * i));
                out.push(q.get(k, 3 * i + 1));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_ends_with_condition_number() {
        let s = ring_spectrum(8, 4.0, 0.25).map_err(|_| ()).unwrap();
        assert_eq!(s.len(), 9);
        // Constant mode of L shifted by α; the top mode is 4m/β_N² + α.
        assert!((s[0] - 0.25).abs() < 1e-12);
        assert!((s[7] - 16.25).abs() < 1e-12);
        let expected = 1.0 / (std::f64::consts::PI / 8.0).sin().powi(2);
        assert!((s[8] - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn sampler_advances() {
        let mut s = Sampler::new("coulomb", "pmmLang+RBM", 4, 4, 2, 0.0625, 1).map_err(|_| ()).unwrap();
        s.advance(20).map_err(|_| ()).unwrap();
        assert!(s.kinetic_energy().is_finite());
        assert_eq!(s.positions_xy().len(), 2 * 4 * 4);
        assert!(s.rejection_rate().is_nan());
        assert_eq!(s.pair_evals_per_step(), ((2 * 4 * 4) / 2 + (4 * 4) / 2) as f64);
    }
}
