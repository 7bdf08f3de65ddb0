//! Path-integral sampling of interacting quantum particles with a
//! preconditioned ring-polymer Langevin sampler.
//!
//! The building blocks are the spectral ring operator ([`ring`]), the pair
//! potentials ([`potential`]), exact and random batch forces ([`system`],
//! [`rbm`]), the BAOAB integrator with its splitting Monte Carlo variant
//! ([`dynamics`]) and the estimators used to read out and judge averages
//! ([`estimators`]). Dense reference implementations live in [`oracle`]
//! behind the default `oracle` feature.

pub mod dynamics;
pub mod estimators;
pub mod grid;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod parallel;
pub mod potential;
pub mod rbm;
pub mod ring;
pub mod system;

pub use dynamics::{coupled_run, DivisionRefresh, DynamicsError, ForceStrategy, Method, StepOutcome, Trajectory};
pub use estimators::{Observable, RunningStats, WeightMode, WeightSampler};
pub use grid::Grid;
pub use potential::{ExternalPotential, PairObservable, PairPotential};
pub use rbm::Division;
pub use ring::{RingError, RingOperator};
pub use system::{ConfigError, ForceError, ForceField, PhaseState, SystemSpec};
