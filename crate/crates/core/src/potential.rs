//! Pair interactions `V(q)` between particles of the same bead, and the
//! harmonic external trap.
//!
//! The mixed Coulomb–Lennard-Jones interaction is defined as the sum of its
//! smooth part (`2 − r/σ` inside `σ`, `σ/r` outside) and its singular part
//! (`((σ/r)¹² − (σ/r)⁶)/6 + 1` inside `σ`, zero outside). The singular part
//! jumps by 1 at `r = σ`; this is kept as written. The splitting sampler only
//! ever evaluates the singular part's value, never its gradient.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distances below this are treated as a collision.
pub const SINGULAR_RADIUS: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PotentialError {
    #[error("pair potential evaluated at singular separation r = {0:e}")]
    Singular(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairPotential {
    /// No interaction; used by the non-interacting reference system.
    Zero,
    /// `κ / r`
    Coulomb { kappa: f64 },
    /// Smooth part plus singular part.
    MixedClj { sigma: f64 },
    SmoothClj { sigma: f64 },
    SingularClj { sigma: f64 },
}

#[inline]
fn norm_sq(q: [f64; 3]) -> f64 {
    q[0] * q[0] + q[1] * q[1] + q[2] * q[2]
}

#[inline]
fn smooth_value(sigma: f64, r: f64) -> f64 {
    if r < sigma {
        2.0 - r / sigma
    } else {
        sigma / r
    }
}

#[inline]
fn singular_value(sigma: f64, r: f64) -> f64 {
    if r < sigma {
        let s6 = (sigma / r).powi(6);
        (s6 * s6 - s6) / 6.0 + 1.0
    } else {
        0.0
    }
}

impl PairPotential {
    pub fn coulomb() -> Self {
        PairPotential::Coulomb { kappa: 1.0 }
    }

    pub fn mixed() -> Self {
        PairPotential::MixedClj { sigma: 0.3 }
    }

    pub fn is_interacting(&self) -> bool {
        !matches!(self, PairPotential::Zero)
    }

    /// True for the mixed family, which admits the smooth/singular split.
    pub fn is_mixed_family(&self) -> bool {
        matches!(
            self,
            PairPotential::MixedClj { .. } | PairPotential::SmoothClj { .. } | PairPotential::SingularClj { .. }
        )
    }

    /// Cutoff radius of the singular part, if this potential has one.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            PairPotential::MixedClj { sigma }
            | PairPotential::SmoothClj { sigma }
            | PairPotential::SingularClj { sigma } => Some(sigma),
            _ => None,
        }
    }

    /// The smooth part used to drive the proposal dynamics.
    pub fn smooth_part(&self) -> Self {
        match *self {
            PairPotential::MixedClj { sigma } => PairPotential::SmoothClj { sigma },
            other => other,
        }
    }

    pub fn singular_part(&self) -> Option<Self> {
        self.sigma().map(|sigma| PairPotential::SingularClj { sigma })
    }

    /// Value as a function of the distance `r > 0`.
    #[inline]
    pub fn radial_value(&self, r: f64) -> f64 {
        match *self {
            PairPotential::Zero => 0.0,
            PairPotential::Coulomb { kappa } => kappa / r,
            PairPotential::MixedClj { sigma } => smooth_value(sigma, r) + singular_value(sigma, r),
            PairPotential::SmoothClj { sigma } => smooth_value(sigma, r),
            PairPotential::SingularClj { sigma } => singular_value(sigma, r),
        }
    }

    /// `V'(r) / r` from the squared distance, so that `∇V(q) = scale · q`.
    #[inline]
    pub fn gradient_scale(&self, r2: f64) -> f64 {
        match *self {
            PairPotential::Zero => 0.0,
            PairPotential::Coulomb { kappa } => {
                let r = r2.sqrt();
                -kappa / (r2 * r)
            }
            PairPotential::SmoothClj { sigma } => smooth_scale(sigma, r2),
            PairPotential::SingularClj { sigma } => singular_scale(sigma, r2),
            PairPotential::MixedClj { sigma } => smooth_scale(sigma, r2) + singular_scale(sigma, r2),
        }
    }

    pub fn value(&self, q: [f64; 3]) -> Result<f64, PotentialError> {
        let r = norm_sq(q).sqrt();
        if r < SINGULAR_RADIUS {
            return Err(PotentialError::Singular(r));
        }
        Ok(self.radial_value(r))
    }

    pub fn gradient(&self, q: [f64; 3]) -> Result<[f64; 3], PotentialError> {
        let r2 = norm_sq(q);
        if r2.sqrt() < SINGULAR_RADIUS {
            return Err(PotentialError::Singular(r2.sqrt()));
        }
        let s = self.gradient_scale(r2);
        Ok([s * q[0], s * q[1], s * q[2]])
    }
}

#[inline]
fn smooth_scale(sigma: f64, r2: f64) -> f64 {
    let r = r2.sqrt();
    if r < sigma {
        -1.0 / (sigma * r)
    } else {
        -sigma / (r2 * r)
    }
}

#[inline]
fn singular_scale(sigma: f64, r2: f64) -> f64 {
    if r2 < sigma * sigma {
        let s2 = sigma * sigma / r2;
        let s6 = s2 * s2 * s2;
        // d/dr [(s¹² − s⁶)/6] / r = (−2 s¹² + s⁶) / r²
        (-2.0 * s6 * s6 + s6) / r2
    } else {
        0.0
    }
}

/// Harmonic trap `V(q) = (α₀/2)|q|²` acting on every particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExternalPotential {
    Harmonic { alpha0: f64 },
}

impl ExternalPotential {
    /// Trap strength that keeps `P` particles at unit mutual spacing.
    pub fn default_for(n_particles: usize) -> Self {
        ExternalPotential::Harmonic {
            alpha0: default_alpha(n_particles),
        }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            ExternalPotential::Harmonic { alpha0 } => alpha0,
        }
    }

    pub fn value(&self, q: [f64; 3]) -> f64 {
        0.5 * self.strength() * norm_sq(q)
    }

    pub fn gradient(&self, q: [f64; 3]) -> [f64; 3] {
        let a = self.strength();
        [a * q[0], a * q[1], a * q[2]]
    }
}

/// `P^(-2/3)`
pub fn default_alpha(n_particles: usize) -> f64 {
    (n_particles as f64).powf(-2.0 / 3.0)
}

/// Pairwise observables `a(q)` averaged over particle pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairObservable {
    /// `κ / |q|`, the mean interaction energy.
    Coulomb { kappa: f64 },
    /// `exp(−θ |q|²)`
    Gaussian { theta: f64 },
}

impl PairObservable {
    #[inline]
    pub fn eval(&self, q: [f64; 3]) -> f64 {
        match *self {
            PairObservable::Coulomb { kappa } => kappa / norm_sq(q).sqrt(),
            PairObservable::Gaussian { theta } => (-theta * norm_sq(q)).exp(),
        }
    }
}

/// One row of [`split_consistency_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRow {
    pub r: f64,
    /// The single-formula mixed potential: LJ/6 + 1 inside σ, σ/r outside.
    pub displayed: f64,
    /// Smooth part plus singular part.
    pub split_sum: f64,
    pub difference: f64,
}

/// Compares the closed single-formula mixed potential with the sum of its
/// smooth and singular parts on `radii`. They differ by `2 − r/σ` inside `σ`.
pub fn split_consistency_check(sigma: f64, radii: &[f64]) -> Vec<SplitRow> {
    radii
        .iter()
        .map(|&r| {
            let displayed = if r < sigma {
                singular_value(sigma, r)
            } else {
                sigma / r
            };
            let split_sum = smooth_value(sigma, r) + singular_value(sigma, r);
            SplitRow {
                r,
                displayed,
                split_sum,
                difference: split_sum - displayed,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn on_axis(r: f64) -> [f64; 3] {
        [r, 0.0, 0.0]
    }

    #[test]
    fn coulomb_values() {
        let v = PairPotential::coulomb();
        assert_eq!(v.value(on_axis(2.0)).unwrap(), 0.5);
        assert_eq!(v.gradient(on_axis(1.0)).unwrap(), [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn clj_branch_values() {
        let smooth = PairPotential::SmoothClj { sigma: 0.3 };
        let singular = PairPotential::SingularClj { sigma: 0.3 };
        assert!((smooth.value(on_axis(0.3)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(singular.value(on_axis(0.3)).unwrap(), 0.0);
        assert!((smooth.value(on_axis(0.6)).unwrap() - 0.5).abs() < 1e-15);
        assert!((singular.value(on_axis(0.15)).unwrap() - 673.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_inner_gradient_is_constant() {
        let smooth = PairPotential::SmoothClj { sigma: 0.3 };
        let g = smooth.gradient([0.1, 0.05, 0.0]).unwrap();
        let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((mag - 1.0 / 0.3).abs() < 1e-12);
        // points toward the origin
        assert!(g[0] < 0.0 && g[1] < 0.0);
    }

    #[test]
    fn singular_separation_is_an_error() {
        for v in [PairPotential::coulomb(), PairPotential::mixed()] {
            assert!(matches!(v.value([0.0; 3]), Err(PotentialError::Singular(_))));
            assert!(v.gradient([1e-13, 0.0, 0.0]).is_err());
        }
    }

    #[test]
    fn singular_part_has_compact_support() {
        let sigma = 0.3;
        let v = PairPotential::SingularClj { sigma };
        let r = sigma * (1.0 + 1e-12);
        assert_eq!(v.value(on_axis(r)).unwrap(), 0.0);
        assert_eq!(v.gradient(on_axis(r)).unwrap(), [0.0; 3]);
    }

    #[test]
    fn smooth_part_is_continuous_at_sigma() {
        let sigma = 0.3;
        let left = smooth_value(sigma, sigma * (1.0 - 1e-14));
        let right = smooth_value(sigma, sigma);
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn split_check_rows() {
        let rows = split_consistency_check(0.3, &[0.15, 0.3, 0.6, 0.3 * (1.0 - 1e-9)]);
        assert!((rows[0].difference - 1.5).abs() < 1e-12);
        assert_eq!(rows[1].difference, 0.0);
        assert_eq!(rows[2].difference, 0.0);
        assert!((rows[3].difference - 1.0).abs() < 1e-8);
    }

    #[test]
    fn harmonic_trap() {
        let ext = ExternalPotential::Harmonic { alpha0: 0.5 };
        assert_eq!(ext.value([1.0, 2.0, 0.0]), 1.25);
        assert_eq!(ext.gradient([1.0, 2.0, 0.0]), [0.5, 1.0, 0.0]);
        assert!((default_alpha(8) - 0.25).abs() < 1e-15);
    }

    fn central_difference(v: &PairPotential, q: [f64; 3]) -> [f64; 3] {
        let h = 1e-6;
        let mut g = [0.0; 3];
        for d in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[d] += h;
            qm[d] -= h;
            g[d] = (v.value(qp).unwrap() - v.value(qm).unwrap()) / (2.0 * h);
        }
        g
    }

    proptest! {
        #[test]
        fn gradients_match_finite_differences(
            r in 0.05f64..3.0,
            theta in 0.0f64..std::f64::consts::PI,
            phi in 0.0f64..(2.0 * std::f64::consts::PI),
            which in 0usize..4,
        ) {
            let sigma = 0.3;
            let v = [
                PairPotential::coulomb(),
                PairPotential::MixedClj { sigma },
                PairPotential::SmoothClj { sigma },
                PairPotential::SingularClj { sigma },
            ][which];
            // Stay off the kink and jump at r = σ where the difference quotient straddles branches.
            prop_assume!((r - sigma).abs() > 1e-4);
            let q = [r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()];
            let g = v.gradient(q).unwrap();
            let fd = central_difference(&v, q);
            let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-8);
            for d in 0..3 {
                prop_assert!((g[d] - fd[d]).abs() <= 1e-5 * scale, "{:?} vs {:?}", g, fd);
            }
        }

        #[test]
        fn coulomb_is_linear_in_kappa(r in 0.05f64..5.0, kappa in 0.1f64..10.0) {
            let one = PairPotential::Coulomb { kappa: 1.0 }.radial_value(r);
            let k = PairPotential::Coulomb { kappa }.radial_value(r);
            prop_assert!((k - kappa * one).abs() <= 1e-12 * k.abs());
        }

        #[test]
        fn clj_family_is_scale_free(r in 0.05f64..3.0, c in 0.2f64..5.0) {
            for v in [PairPotential::MixedClj { sigma: 0.3 }, PairPotential::SmoothClj { sigma: 0.3 }, PairPotential::SingularClj { sigma: 0.3 }] {
                let scaled = match v {
                    PairPotential::MixedClj { sigma } => PairPotential::MixedClj { sigma: c * sigma },
                    PairPotential::SmoothClj { sigma } => PairPotential::SmoothClj { sigma: c * sigma },
                    PairPotential::SingularClj { sigma } => PairPotential::SingularClj { sigma: c * sigma },
                    other => other,
                };
                let a = v.radial_value(r);
                let b = scaled.radial_value(c * r);
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
