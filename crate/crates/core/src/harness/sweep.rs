use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{cell_seed, ExperimentConfig, ScheduleConfig};
use super::fmt_num;
use crate::algorithm::{run, RunTrace};
use crate::analysis::{
    compute_metrics, scaling_fit, MetricsReport, Regime, ScalingFit, ScalingModel,
};
use crate::error::{Error, Result};
use crate::oracle::offline_optimum;
use crate::problem::gen_instance;

pub const SWEEP_CSV_HEADER: &str = "T,seed,regret,regret_bound_lemma,regret_bound_theorem,ccv,movement,sum_e_norm,movement_ratio,max_sc_violation,comparator_value,runtime_ms";

/// One `(T, seed)` cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub horizon: usize,
    /// The seed as listed in the config.
    pub seed: u64,
    /// The generator seed actually used.
    pub cell_seed: u64,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
    pub runtime_ms: f64,
}

/// A least-squares fit of one metric's per-horizon mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub metric: String,
    pub model: ScalingModel,
    /// Absent with fewer than three usable horizons.
    pub fit: Option<ScalingFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub regime: Option<Regime>,
    /// Sorted by `(T, seed)`.
    pub cells: Vec<Cell>,
    pub fits: Vec<FitRecord>,
    pub max_movement_ratio: f64,
    pub failed_cells: usize,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let m = c.metrics.as_ref();
            let f = |g: fn(&MetricsReport) -> f64| fmt_num(m.map_or(f64::NAN, g));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.horizon,
                c.seed,
                f(|m| m.regret),
                f(|m| m.regret_bound_lemma),
                f(|m| m.regret_bound_theorem),
                f(|m| m.ccv),
                f(|m| m.movement),
                f(|m| m.sum_e_norm),
                f(|m| m.movement_ratio),
                f(|m| m.max_selfcontraction_violation),
                f(|m| m.comparator_value),
                fmt_num(c.runtime_ms),
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn fit(&self, metric: &str, model: ScalingModel) -> Option<ScalingFit> {
        self.fits
            .iter()
            .find(|f| f.metric == metric && f.model == model)
            .and_then(|f| f.fit)
    }

    /// Per-horizon mean of a metric over the cells that succeeded.
    pub fn means(&self, metric: fn(&MetricsReport) -> f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &t in &self.config.horizons {
            let vals: Vec<f64> = self
                .cells
                .iter()
                .filter(|c| c.horizon == t)
                .filter_map(|c| c.metrics.as_ref().map(metric))
                .collect();
            if !vals.is_empty() {
                out.push((t as f64, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        out
    }

    pub fn write(&self, csv: Option<&Path>, json: Option<&Path>) -> Result<()> {
        if let Some(p) = csv {
            std::fs::write(p, self.to_csv())?;
        }
        if let Some(p) = json {
            std::fs::write(p, self.to_json()?)?;
        }
        Ok(())
    }
}

fn run_cell(cfg: &ExperimentConfig, horizon: usize, index: usize) -> Cell {
    let seed = cfg.seeds[index];
    let cs = cell_seed(seed, horizon, index);
    let clock = Instant::now();
    let metrics = (|| -> Result<MetricsReport> {
        let inst = gen_instance(&cfg.generator_spec(horizon, cs))?;
        let schedule = cfg.schedule.resolve(&inst)?;
        let trace: RunTrace = run(&inst, &schedule, &cfg.start, &cfg.projection_options())?;
        let oracle = offline_optimum(&inst, cfg.oracle_tol, cfg.oracle_max_iters)?;
        compute_metrics(&inst, &trace, &schedule, oracle.value, cfg.budget())
    })();
    let runtime_ms = if cfg.record_runtime {
        clock.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    match metrics {
        Ok(m) => Cell {
            horizon,
            seed,
            cell_seed: cs,
            metrics: Some(m),
            error: None,
            runtime_ms,
        },
        Err(e) => Cell {
            horizon,
            seed,
            cell_seed: cs,
            metrics: None,
            error: Some(e.to_string()),
            runtime_ms,
        },
    }
}

type Metric = fn(&MetricsReport) -> f64;

const FIT_METRICS: [(&str, Metric); 3] = [
    ("regret", |m| m.regret),
    ("ccv", |m| m.ccv),
    ("movement", |m| m.movement),
];

/// Runs every `(T, seed)` cell on a worker pool and fits the per-horizon
/// means. Cell failures are recorded, not propagated.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .horizons
        .iter()
        .flat_map(|&t| (0..cfg.seeds.len()).map(move |i| (t, i)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut cells: Vec<Cell> =
        pool.install(|| jobs.par_iter().map(|&(t, i)| run_cell(cfg, t, i)).collect());
    cells.sort_by_key(|c| (c.horizon, c.seed));

    let regime = match &cfg.schedule {
        ScheduleConfig::SqrtDecay { .. } => Some(Regime::Convex),
        ScheduleConfig::StronglyConvex { .. } => Some(Regime::StronglyConvex),
        ScheduleConfig::Constant { .. } => None,
    };
    let mut result = SweepResult {
        config: cfg.clone(),
        regime,
        failed_cells: cells.iter().filter(|c| c.metrics.is_none()).count(),
        max_movement_ratio: cells
            .iter()
            .filter_map(|c| c.metrics.as_ref().map(|m| m.movement_ratio))
            .fold(f64::NAN, f64::max),
        cells,
        fits: Vec::new(),
    };
    let mut models = vec![
        ScalingModel::SqrtT,
        ScalingModel::LogT,
        ScalingModel::PowerLaw,
    ];
    if let Some(r) = regime {
        // the model matching the regime goes first
        let first = match r {
            Regime::Convex => ScalingModel::SqrtT,
            Regime::StronglyConvex => ScalingModel::LogT,
        };
        models.retain(|m| *m != first);
        models.insert(0, first);
    }
    for (name, metric) in FIT_METRICS {
        let series = result.means(metric);
        for &model in &models {
            result.fits.push(FitRecord {
                metric: name.to_string(),
                model,
                fit: scaling_fit(&series, model).ok(),
            });
        }
    }
    Ok(result)
}
