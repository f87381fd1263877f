//! Nested projected online gradient descent for constrained online convex
//! optimization.
//!
//! The learner keeps the running intersection `S_t` of every constraint
//! sublevel set revealed so far and projects each gradient step onto it.
//! Alongside the algorithm the crate provides the projection primitives,
//! instance generators, an offline comparator, run metrics with their
//! closed-form bounds, and an experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithm;
pub mod analysis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod problem;

pub use algorithm::{
    npogd_round, run, step_size, ProjectionOptions, RoundRecord, RunTrace, StartPoint, StepSchedule,
};
pub use analysis::{
    approx_contraction_residual, ccv, check_self_contracted, check_self_contracted_points,
    compute_metrics, lift, movement, movement_ratio, regret, regret_bound_lemma,
    regret_bound_theorem, scaling_fit, sum_e_norm, tail_perturbations, CurveNorm, MetricsReport,
    Regime, ScalingFit, ScalingModel, SelfContractionReport, TripleBudget,
};
pub use error::{Error, Result};
pub use geometry::{
    contains, oplus_norm, project_ball, project_box, project_halfspace, project_region,
    project_region_detailed, Ball, BoxSet, ConvexBody, FeasibleRegion, Halfspace, LiftedPoint,
    Point, Projection,
};
pub use harness::{run_experiment, ExperimentConfig, SweepResult};
pub use oracle::{grid_search_optimum, offline_optimum, OracleResult};
pub use problem::{
    eval_constraint, eval_loss, gen_instance, subgrad, sublevel_body, AffinePiece, BaseSet,
    ConstraintFamily, ConstraintFn, FamilySpec, GeneratorSpec, Instance, LossFamily, LossFn,
    RevealSchedule,
};
