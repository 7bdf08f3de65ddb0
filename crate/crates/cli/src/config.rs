//! Experiment configuration: TOML with flat dotted keys such as
//! `system.n_beads = 16`, plus the named presets shipped in `presets/`.

use std::path::Path;

use pimd_core::dynamics::{DivisionRefresh, ForceStrategy, Method};
use pimd_core::estimators::{Observable, WeightMode};
use pimd_core::potential::{default_alpha, ExternalPotential, PairObservable, PairPotential};
use pimd_core::system::{ConfigError, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Named presets, embedded at build time.
pub const PRESETS: &[(&str, &str)] = &[
    ("tiny", include_str!("../../../presets/tiny.toml")),
    ("harmonic-N4P2", include_str!("../../../presets/harmonic-N4P2.toml")),
    ("coulomb-kinetic-P8", include_str!("../../../presets/coulomb-kinetic-P8.toml")),
    ("coulomb-error-P8", include_str!("../../../presets/coulomb-error-P8.toml")),
    ("coulomb-error-P8-full", include_str!("../../../presets/coulomb-error-P8-full.toml")),
    ("coulomb-strong", include_str!("../../../presets/coulomb-strong.toml")),
    ("coulomb-strong-full", include_str!("../../../presets/coulomb-strong-full.toml")),
    ("coulomb-weak", include_str!("../../../presets/coulomb-weak.toml")),
    ("coulomb-entropy", include_str!("../../../presets/coulomb-entropy.toml")),
    ("mixed-rejection", include_str!("../../../presets/mixed-rejection.toml")),
    ("mixed-split-N4P2", include_str!("../../../presets/mixed-split-N4P2.toml")),
    ("spectrum", include_str!("../../../presets/spectrum.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    KineticVirial,
    CoulombPairAvg,
    GaussianPairAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Coulomb,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub method: Method,
    pub observable: ObservableKind,
    /// Width parameter of the Gaussian pair observable.
    pub theta: f64,
    /// Use random batches for the weights as well as the forces.
    pub rbm_weight: bool,
    pub division_refresh: DivisionRefresh,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            method: Method::PmmLang,
            observable: ObservableKind::KineticVirial,
            theta: 0.1,
            rbm_weight: false,
            division_refresh: DivisionRefresh::PerStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub mass: f64,
    pub beta: f64,
    pub n_beads: usize,
    pub n_particles: usize,
    /// Preconditioner shift; defaults to `P^(-2/3)`.
    pub alpha: Option<f64>,
    /// Trap strength; defaults to `alpha`.
    pub alpha0: Option<f64>,
    pub gamma: f64,
    pub dt: f64,
    pub total_time: f64,
    pub batch_size: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            mass: 1.0,
            beta: 4.0,
            n_beads: 16,
            n_particles: 8,
            alpha: None,
            alpha0: None,
            gamma: 2.0,
            dt: 1.0 / 16.0,
            total_time: 100.0,
            batch_size: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    pub kappa: f64,
    pub sigma: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            kind: PotentialKind::Coulomb,
            kappa: 1.0,
            sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Samples with `t` below this are discarded from averages.
    pub burn_in: f64,
    /// Emit one CSV row every `stride` steps.
    pub stride: usize,
    /// Record wall-clock time per step. Off by default so that output files
    /// are a pure function of the configuration.
    pub timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in: 50.0,
            stride: 1,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    /// Trajectories per method for the weak error; 0 skips it.
    pub n_trajectories: usize,
    /// Method compared against `experiment.method`.
    pub method_b: Method,
    /// Record ensemble means every this many steps.
    pub sample_every: usize,
    /// Length of the relative-entropy runs; 0 skips them.
    pub entropy_time: f64,
    /// Length of the exact-force reference run for the relative entropy.
    pub reference_time: f64,
    pub entropy_bins: usize,
    /// Times at which the relative entropy is evaluated.
    pub checkpoints: Vec<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_trajectories: 1000,
            method_b: Method::PmmLangRbm,
            sample_every: 1,
            entropy_time: 0.0,
            reference_time: 5.0e4,
            entropy_bins: 50,
            checkpoints: vec![1e2, 2e2, 5e2, 1e3, 2e3, 5e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorTableSection {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub batch_sizes: Vec<usize>,
}

impl Default for ErrorTableSection {
    fn default() -> Self {
        Self {
            dts: vec![0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625],
            reference_dt: 0.015625,
            batch_sizes: vec![2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongErrorSection {
    pub dts: Vec<f64>,
    pub replicas: usize,
    pub horizon: f64,
}

impl Default for StrongErrorSection {
    fn default() -> Self {
        Self {
            dts: vec![0.25, 0.125, 0.0625],
            replicas: 1000,
            horizon: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectionTableSection {
    pub particle_counts: Vec<usize>,
    pub dts: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for RejectionTableSection {
    fn default() -> Self {
        Self {
            particle_counts: vec![8, 16, 24, 32],
            dts: vec![0.125, 0.0625, 0.03125],
            methods: vec![Method::PmmLangSplit, Method::PmmLangRbmSplit],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub bead_counts: Vec<usize>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            bead_counts: vec![4, 8, 16, 32],
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub experiment: ExperimentSection,
    pub system: SystemSection,
    pub potential: PotentialSection,
    pub run: RunSection,
    pub ensemble: EnsembleSection,
    pub error_table: ErrorTableSection,
    pub strong_error: StrongErrorSection,
    pub rejection_table: RejectionTableSection,
    pub spectrum: SpectrumSection,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| CliError::UnknownPreset(name.to_string()))?;
        let mut cfg = Self::from_toml(text)?;
        cfg.preset.get_or_insert_with(|| name.to_string());
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        self.preset.as_deref().unwrap_or("custom")
    }

    pub fn pair_potential(&self) -> PairPotential {
        match self.potential.kind {
            PotentialKind::Zero => PairPotential::Zero,
            PotentialKind::Coulomb => PairPotential::Coulomb {
                kappa: self.potential.kappa,
            },
            PotentialKind::Mixed => PairPotential::MixedClj {
                sigma: self.potential.sigma,
            },
        }
    }

    /// The physical spec with `dt` and `total_time` taken from the system
    /// section.
    pub fn spec(&self) -> SystemSpec {
        let s = &self.system;
        let alpha = s.alpha.unwrap_or_else(|| default_alpha(s.n_particles));
        let mut spec = SystemSpec::new(s.n_beads, s.n_particles, self.pair_potential());
        spec.mass = s.mass;
        spec.beta = s.beta;
        spec.alpha = alpha;
        spec.external = ExternalPotential::Harmonic {
            alpha0: s.alpha0.unwrap_or(alpha),
        };
        spec.gamma = s.gamma;
        spec.dt = s.dt;
        spec.total_time = s.total_time;
        spec.batch_size = s.batch_size;
        spec.seed = self.run.seed;
        spec
    }

    pub fn strategy(&self, method: Method) -> ForceStrategy {
        method.strategy(self.system.batch_size)
    }

    pub fn observable(&self) -> Observable {
        match self.experiment.observable {
            ObservableKind::KineticVirial => Observable::Virial,
            ObservableKind::CoulombPairAvg => Observable::Pair {
                function: PairObservable::Coulomb {
                    kappa: self.potential.kappa,
                },
            },
            ObservableKind::GaussianPairAvg => Observable::Pair {
                function: PairObservable::Gaussian {
                    theta: self.experiment.theta,
                },
            },
        }
    }

    /// Random-batch weights only for batch methods with `rbm_weight` set.
    pub fn weight_mode(&self, method: Method) -> WeightMode {
        match self.strategy(method).batch_size() {
            Some(p) if self.experiment.rbm_weight => WeightMode::Rbm(p),
            _ => WeightMode::Exact,
        }
    }

    /// Splitting methods need the mixed potential.
    /// Batch sizes of the error table must divide the particle count. Checked
    /// only by the error-table run so other presets may leave the default.
    pub fn check_error_table_batches(&self) -> Result<(), CliError> {
        let p = self.system.n_particles;
        for &b in &self.error_table.batch_sizes {
            if b < 2 || !p.is_multiple_of(b) {
                return Err(invalid("error_table.batch_sizes", format!("{b} must be >= 2 and divide {p}")));
            }
        }
        Ok(())
    }

    pub fn check_method(&self, field: &str, m: Method) -> Result<(), CliError> {
        if self.strategy(m).uses_metropolis() && self.potential.kind != PotentialKind::Mixed {
            return Err(invalid(field, format!("{} requires potential.kind = \"mixed\"", m.name())));
        }
        Ok(())
    }

    /// Checks everything that can be checked before any compute. Field
    /// names in errors are the dotted config keys.
    pub fn validate(&self) -> Result<(), CliError> {
        self.spec().validate().map_err(|e| match e {
            ConfigError::Invalid { field, reason } => {
                let key = match field {
                    "external.alpha0" => "system.alpha0".to_string(),
                    f if f.starts_with("potential.") => f.to_string(),
                    f => format!("system.{f}"),
                };
                invalid(&key, reason)
            }
            other => invalid("system", other.to_string()),
        })?;
        self.check_method("experiment.method", self.experiment.method)?;
        if self.experiment.observable == ObservableKind::GaussianPairAvg && !(self.experiment.theta > 0.0) {
            return Err(invalid("experiment.theta", "must be positive"));
        }
        if !(self.run.burn_in >= 0.0) {
            return Err(invalid("run.burn_in", "must be non-negative"));
        }
        if self.run.stride == 0 {
            return Err(invalid("run.stride", "must be at least 1"));
        }
        let positive_list = |field: &str, xs: &[f64]| -> Result<(), CliError> {
            if xs.iter().all(|&x| x > 0.0 && x.is_finite()) {
                Ok(())
            } else {
                Err(invalid(field, "entries must be positive"))
            }
        };
        positive_list("error_table.dts", &self.error_table.dts)?;
        positive_list("strong_error.dts", &self.strong_error.dts)?;
        positive_list("rejection_table.dts", &self.rejection_table.dts)?;
        if !(self.error_table.reference_dt > 0.0) {
            return Err(invalid("error_table.reference_dt", "must be positive"));
        }
        for &n in &self.spectrum.bead_counts {
            if n < 4 || n % 2 != 0 {
                return Err(invalid("spectrum.bead_counts", format!("{n} must be even and >= 4")));
            }
        }
        for &n in &self.rejection_table.particle_counts {
            if n == 0 || n % self.system.batch_size != 0 {
                return Err(invalid(
                    "rejection_table.particle_counts",
                    format!("{n} must be a positive multiple of system.batch_size"),
                ));
            }
        }
        if self.ensemble.entropy_time > 0.0 && self.ensemble.entropy_bins == 0 {
            return Err(invalid("ensemble.entropy_bins", "must be at least 1"));
        }
        Ok(())
    }
}
