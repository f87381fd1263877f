//! Experiment configuration, sweeps, the verification suite and the CSV/JSON
//! writers behind the command line tool.

mod config;
mod sweep;
pub mod verify;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use config::{cell_seed, splitmix64, ExperimentConfig, ScheduleConfig};
pub use sweep::{run_experiment, Cell, FitRecord, SweepResult, SWEEP_CSV_HEADER};
pub use verify::{verify_suite, verify_suite_with, CheckOutcome, Level, Primitives, VerifyReport};

use crate::algorithm::RunTrace;
use crate::error::Result;
use crate::geometry::{project_region_detailed, ConvexBody, FeasibleRegion, Point};

/// Scientific notation with 17 significant digits, enough to read back
/// the exact double.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per round: `t,loss,violation,eta,e_norm,move,proj_residual`,
/// then the coordinates of `x_t` and of `e_t`.
pub fn trace_csv(trace: &RunTrace) -> String {
    let d = trace.x_start.dim();
    let mut out = String::from("t,loss,violation,eta,e_norm,move,proj_residual");
    for k in 0..d {
        let _ = write!(out, ",x{k}");
    }
    for k in 0..d {
        let _ = write!(out, ",e{k}");
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_num(r.loss),
            fmt_num(r.violation),
            fmt_num(r.eta),
            fmt_num(r.e_norm),
            fmt_num(r.movement),
            fmt_num(r.proj_residual)
        );
        for v in r.x.coords().iter().chain(r.e.coords()) {
            let _ = write!(out, ",{}", fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

/// Input of the one-shot projection command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectRequest {
    pub point: Point,
    pub bodies: Vec<ConvexBody>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
}

fn default_tol() -> f64 {
    crate::geometry::DEFAULT_PROJECTION_TOL
}
fn default_sweeps() -> usize {
    crate::geometry::DEFAULT_MAX_SWEEPS
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectResponse {
    pub point: Point,
    pub residual: f64,
    pub sweeps: usize,
}

pub fn project_request(req: &ProjectRequest) -> Result<ProjectResponse> {
    let region = FeasibleRegion::try_from(req.bodies.clone())?;
    let p = project_region_detailed(&req.point, &region, req.tol, req.max_sweeps)?;
    Ok(ProjectResponse {
        point: p.point,
        residual: p.residual,
        sweeps: p.sweeps,
    })
}
