use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithm::{ProjectionOptions, StartPoint, StepSchedule};
use crate::analysis::{TripleBudget, DEFAULT_TRIPLE_BUDGET};
use crate::error::{Error, Result};
use crate::geometry::{DEFAULT_MAX_SWEEPS, DEFAULT_PROJECTION_TOL};
use crate::oracle::{DEFAULT_ORACLE_MAX_ITERS, DEFAULT_ORACLE_TOL};
use crate::problem::{FamilySpec, GeneratorSpec, Instance};

/// Step schedule as written in a config. Missing constants are taken from
/// the generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    SqrtDecay {
        #[serde(default)]
        diameter: Option<f64>,
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    /// Without `mu`, the smallest per-round curvature of the instance.
    StronglyConvex {
        #[serde(default)]
        mu: Option<f64>,
    },
    Constant {
        eta: f64,
    },
}

impl ScheduleConfig {
    pub fn resolve(&self, inst: &Instance) -> Result<StepSchedule> {
        let s = match self {
            ScheduleConfig::SqrtDecay {
                diameter,
                lipschitz,
            } => StepSchedule::SqrtDecay {
                diameter: diameter.unwrap_or(inst.diameter()),
                lipschitz: lipschitz.unwrap_or(inst.lipschitz()),
            },
            ScheduleConfig::StronglyConvex { mu: Some(mu) } => {
                StepSchedule::StronglyConvex { mu: *mu }
            }
            ScheduleConfig::StronglyConvex { mu: None } => {
                let mu = inst.curvatures().into_iter().fold(f64::INFINITY, f64::min);
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::Config(
                        "strongly-convex schedule needs mu: the losses are not strongly convex"
                            .into(),
                    ));
                }
                StepSchedule::StronglyConvex { mu }
            }
            ScheduleConfig::Constant { eta } => StepSchedule::Constant { eta: *eta },
        };
        s.validate()?;
        Ok(s)
    }
}

fn default_projection_tol() -> f64 {
    DEFAULT_PROJECTION_TOL
}
fn default_max_sweeps() -> usize {
    DEFAULT_MAX_SWEEPS
}
fn default_oracle_tol() -> f64 {
    DEFAULT_ORACLE_TOL
}
fn default_oracle_max_iters() -> usize {
    DEFAULT_ORACLE_MAX_ITERS
}
fn default_triple_budget() -> usize {
    DEFAULT_TRIPLE_BUDGET
}

/// A sweep over horizons and seeds. Read from a single JSON document;
/// unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub generator: FamilySpec,
    pub schedule: ScheduleConfig,
    /// Strictly increasing.
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub start: StartPoint,
    #[serde(default = "default_projection_tol")]
    pub projection_tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "default_oracle_max_iters")]
    pub oracle_max_iters: usize,
    /// Sampled triples for curves longer than the exhaustive limit.
    #[serde(default = "default_triple_budget")]
    pub triple_budget: usize,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Wall-clock timings make the CSV non-reproducible, so they are off
    /// unless asked for and written as 0.
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default)]
    pub csv_out: Option<PathBuf>,
    #[serde(default)]
    pub json_out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.horizons.is_empty() {
            return bad("horizons must not be empty".into());
        }
        if self.horizons[0] == 0 {
            return bad("horizons must be positive".into());
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!(
                "horizons must be strictly increasing: {:?}",
                self.horizons
            ));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        for (name, v) in [
            ("projection_tol", self.projection_tol),
            ("oracle_tol", self.oracle_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_sweeps == 0 || self.oracle_max_iters == 0 {
            return bad("max_sweeps and oracle_max_iters must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if let StartPoint::Point(p) = &self.start {
            if p.dim() != self.dimension {
                return bad(format!(
                    "start point has dimension {}, expected {}",
                    p.dim(),
                    self.dimension
                ));
            }
        }
        if let ScheduleConfig::Constant { eta } = self.schedule {
            if !(eta >= 0.0 && eta.is_finite()) {
                return bad(format!("constant step must be nonnegative, got {eta}"));
            }
        }
        Ok(())
    }

    pub fn projection_options(&self) -> ProjectionOptions {
        ProjectionOptions {
            tol: self.projection_tol,
            max_sweeps: self.max_sweeps,
        }
    }

    pub fn budget(&self) -> TripleBudget {
        TripleBudget::Sampled(self.triple_budget)
    }

    pub fn generator_spec(&self, horizon: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            dimension: self.dimension,
            horizon,
            seed,
            family: self.generator.clone(),
        }
    }
}

/// The splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator seed for the cell at horizon `horizon` and seed position
/// `index`: `seed ^ splitmix64(rotl(horizon, 32) ^ index)`.
pub fn cell_seed(seed: u64, horizon: usize, index: usize) -> u64 {
    seed ^ splitmix64((horizon as u64).rotate_left(32) ^ index as u64)
}
