//! The nested projected online gradient descent loop.
//!
//! Each round plays the current iterate, then reads the round's loss and
//! constraint, intersects the running feasible region with the constraint's
//! sublevel set, and projects a subgradient step onto that region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    project_region_detailed, FeasibleRegion, Point, DEFAULT_MAX_SWEEPS, DEFAULT_PROJECTION_TOL,
};
use crate::problem::{ConstraintFn, Instance, LossFn};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `eta_t = D / (G sqrt(t))`
    SqrtDecay {
        diameter: f64,
        lipschitz: f64,
    },
    /// `eta_t = 1 / (mu t)`
    StronglyConvex {
        mu: f64,
    },
    Constant {
        eta: f64,
    },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            StepSchedule::SqrtDecay {
                diameter,
                lipschitz,
            } => {
                *diameter > 0.0 && *lipschitz > 0.0 && diameter.is_finite() && lipschitz.is_finite()
            }
            StepSchedule::StronglyConvex { mu } => *mu > 0.0 && mu.is_finite(),
            StepSchedule::Constant { eta } => *eta >= 0.0 && eta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid step schedule {self:?}"
            )))
        }
    }

    pub fn step_size(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::InvalidArgument("rounds are numbered from 1".into()));
        }
        let t = t as f64;
        Ok(match self {
            StepSchedule::SqrtDecay {
                diameter,
                lipschitz,
            } => diameter / (lipschitz * t.sqrt()),
            StepSchedule::StronglyConvex { mu } => 1.0 / (mu * t),
            StepSchedule::Constant { eta } => *eta,
        })
    }
}

pub fn step_size(s: &StepSchedule, t: usize) -> Result<f64> {
    s.step_size(t)
}

/// Projection settings used inside the loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tol: DEFAULT_PROJECTION_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Everything observed in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// The action played, `x_t`.
    pub x: Point,
    pub loss: f64,
    /// `max(g_t(x_t), 0)`
    pub violation: f64,
    pub eta: f64,
    /// The perturbation `eta_t h_t`, before projection.
    pub e: Point,
    pub e_norm: f64,
    /// `||x_{t+1} - x_t||`
    #[serde(rename = "move")]
    pub movement: f64,
    pub proj_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub instance: String,
    pub seed: u64,
    pub x_start: Point,
    pub records: Vec<RoundRecord>,
    pub x_final: Point,
    pub final_region: FeasibleRegion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunTrace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    /// `x_1, ..., x_{T+1}`
    pub fn iterates(&self) -> Vec<Point> {
        let mut xs: Vec<Point> = self.records.iter().map(|r| r.x.clone()).collect();
        xs.push(self.x_final.clone());
        xs
    }

    pub fn e_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.e_norm).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// One round. `region` enters as `S_{t-1}` and leaves as `S_t`.
pub fn npogd_round(
    t: usize,
    x: &Point,
    region: &mut FeasibleRegion,
    loss: &LossFn,
    constraint: &ConstraintFn,
    eta: f64,
    opts: &ProjectionOptions,
) -> Result<(Point, RoundRecord)> {
    let wrap = |e: Error| Error::Round {
        round: t,
        source: Box::new(e),
    };
    // x_t is fixed before f_t and g_t are read
    let loss_value = loss.eval(x);
    let violation = constraint.eval(x).max(0.0);

    region
        .push(constraint.sublevel_body().map_err(wrap)?)
        .map_err(wrap)?;

    let h = loss.subgrad(x);
    let e = h.scale(eta);
    let target = x.sub(&e);
    let proj = project_region_detailed(&target, region, opts.tol, opts.max_sweeps).map_err(wrap)?;
    let next = proj.point;
    let record = RoundRecord {
        t,
        x: x.clone(),
        loss: loss_value,
        violation,
        eta,
        e_norm: e.norm(),
        e,
        movement: next.dist(x),
        proj_residual: proj.residual,
    };
    Ok((next, record))
}

/// How `x_1` is chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPoint {
    Anchor,
    /// The point of the base set farthest from the anchor.
    #[default]
    Corner,
    #[serde(untagged)]
    Point(Point),
}

impl StartPoint {
    pub fn resolve(&self, inst: &Instance) -> Result<Point> {
        let p = match self {
            StartPoint::Anchor => inst.anchor().clone(),
            StartPoint::Corner => inst.base().farthest_from(inst.anchor()),
            StartPoint::Point(p) => p.clone(),
        };
        if p.dim() != inst.dimension() {
            return Err(Error::DimensionMismatch {
                expected: inst.dimension(),
                got: p.dim(),
            });
        }
        if !inst.base().contains(&p, 1e-12) {
            return Err(Error::InvalidArgument(
                "start point lies outside the base set".into(),
            ));
        }
        Ok(p)
    }
}

/// Runs the full loop over the instance's horizon.
pub fn run(
    inst: &Instance,
    schedule: &StepSchedule,
    start: &StartPoint,
    opts: &ProjectionOptions,
) -> Result<RunTrace> {
    schedule.validate()?;
    let x1 = start.resolve(inst)?;
    let mut warnings = Vec::new();
    if let StepSchedule::SqrtDecay {
        diameter,
        lipschitz,
    } = schedule
    {
        let rel = |a: f64, b: f64| (a - b).abs() > 1e-12 * a.abs().max(b.abs());
        if rel(*diameter, inst.diameter()) || rel(*lipschitz, inst.lipschitz()) {
            warnings.push(format!(
                "schedule uses D = {diameter}, G = {lipschitz}; instance declares D = {}, G = {}",
                inst.diameter(),
                inst.lipschitz()
            ));
        }
    }

    let mut region = FeasibleRegion::new(inst.base().body());
    let mut x = x1.clone();
    let mut records = Vec::with_capacity(inst.horizon());
    for (i, (f, g)) in inst.losses().iter().zip(inst.constraints()).enumerate() {
        let t = i + 1;
        let eta = schedule.step_size(t)?;
        match npogd_round(t, &x, &mut region, f, g, eta, opts) {
            Ok((next, rec)) => {
                records.push(rec);
                x = next;
            }
            Err(e) => {
                let partial = RunTrace {
                    instance: inst.name().to_string(),
                    seed: inst.seed(),
                    x_start: x1,
                    records,
                    x_final: x,
                    final_region: region,
                    warnings,
                };
                return Err(Error::RunAborted {
                    round: t,
                    partial: Box::new(partial),
                    source: Box::new(e),
                });
            }
        }
    }
    Ok(RunTrace {
        instance: inst.name().to_string(),
        seed: inst.seed(),
        x_start: x1,
        records,
        x_final: x,
        final_region: region,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxSet;
    use crate::problem::BaseSet;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn step_sizes() {
        let s = StepSchedule::SqrtDecay {
            diameter: 2.0,
            lipschitz: 1.0,
        };
        assert_eq!(step_size(&s, 4).unwrap(), 1.0);
        let s = StepSchedule::StronglyConvex { mu: 0.5 };
        assert!((step_size(&s, 10).unwrap() - 0.2).abs() < 1e-15);
        let s = StepSchedule::SqrtDecay {
            diameter: 1.0,
            lipschitz: 1.0,
        };
        assert_eq!(step_size(&s, 1).unwrap(), 1.0);
        assert!(step_size(&s, 0).is_err());
    }

    fn unit_interval() -> FeasibleRegion {
        FeasibleRegion::new(BoxSet::new(pt(&[-1.0]), pt(&[1.0])).unwrap())
    }

    #[test]
    fn hand_step_large_eta() {
        let mut region = unit_interval();
        let f = LossFn::Linear { slope: pt(&[1.0]) };
        let g = ConstraintFn::Affine {
            normal: pt(&[1.0]),
            offset: 0.5,
        };
        let (next, rec) = npogd_round(
            1,
            &pt(&[1.0]),
            &mut region,
            &f,
            &g,
            1.0,
            &Default::default(),
        )
        .unwrap();
        assert!(next.coords()[0].abs() < 1e-12);
        assert_eq!(region.len(), 2);
        assert_eq!(rec.violation, 0.5);
        assert!((rec.movement - 1.0).abs() < 1e-12);
        assert_eq!(rec.e_norm, 1.0);
    }

    #[test]
    fn hand_step_active_projection() {
        let mut region = unit_interval();
        let f = LossFn::Linear { slope: pt(&[1.0]) };
        let g = ConstraintFn::Affine {
            normal: pt(&[1.0]),
            offset: 0.5,
        };
        let (next, rec) = npogd_round(
            1,
            &pt(&[1.0]),
            &mut region,
            &f,
            &g,
            0.1,
            &Default::default(),
        )
        .unwrap();
        assert!((next.coords()[0] - 0.5).abs() < 1e-10);
        assert_eq!(rec.violation, 0.5);
        assert!((rec.movement - 0.5).abs() < 1e-10);
    }

    #[test]
    fn interior_step_moves_by_e() {
        let mut region = FeasibleRegion::new(BoxSet::cube(2, 1.0).unwrap());
        let f = LossFn::Linear {
            slope: pt(&[0.3, -0.4]),
        };
        let g = ConstraintFn::Affine {
            normal: pt(&[1.0, 0.0]),
            offset: 0.9,
        };
        let (_, rec) = npogd_round(
            3,
            &pt(&[0.0, 0.0]),
            &mut region,
            &f,
            &g,
            0.01,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(rec.violation, 0.0);
        assert!((rec.movement - rec.e_norm).abs() < 1e-15);
    }

    #[test]
    fn empty_horizon_returns_start() {
        let base = BaseSet::Box(BoxSet::cube(2, 1.0).unwrap());
        let inst = Instance::new("empty", base, vec![], vec![], pt(&[0.0, 0.0]), 0).unwrap();
        let trace = run(
            &inst,
            &StepSchedule::Constant { eta: 0.1 },
            &StartPoint::Corner,
            &Default::default(),
        )
        .unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.x_final, trace.x_start);
        // equidistant vertices resolve to the lower corner
        assert_eq!(trace.x_start.coords(), &[-1.0, -1.0]);
    }

    #[test]
    fn mismatched_constants_warn() {
        let base = BaseSet::Box(BoxSet::cube(1, 1.0).unwrap());
        let inst = Instance::new(
            "w",
            base,
            vec![LossFn::Linear { slope: pt(&[1.0]) }],
            vec![ConstraintFn::Affine {
                normal: pt(&[1.0]),
                offset: 0.5,
            }],
            pt(&[0.0]),
            0,
        )
        .unwrap();
        let trace = run(
            &inst,
            &StepSchedule::SqrtDecay {
                diameter: 5.0,
                lipschitz: 1.0,
            },
            &StartPoint::Anchor,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(trace.warnings.len(), 1);
    }

    #[test]
    fn disjoint_constraint_reports_round() {
        let mut region = unit_interval();
        let f = LossFn::Linear { slope: pt(&[1.0]) };
        let opts = ProjectionOptions::default();
        let g1 = ConstraintFn::Affine {
            normal: pt(&[1.0]),
            offset: 0.0,
        };
        let (x2, _) = npogd_round(1, &pt(&[0.0]), &mut region, &f, &g1, 0.1, &opts).unwrap();
        // x >= 0.5 is disjoint from x <= 0
        let g2 = ConstraintFn::Affine {
            normal: pt(&[-1.0]),
            offset: -0.5,
        };
        let err = npogd_round(2, &x2, &mut region, &f, &g2, 0.1, &opts).unwrap_err();
        assert!(matches!(err, Error::Round { round: 2, .. }));
    }

    #[test]
    fn start_point_json() {
        let s: StartPoint = serde_json::from_str("\"corner\"").unwrap();
        assert_eq!(s, StartPoint::Corner);
        let s: StartPoint = serde_json::from_str("[0.5, 0.25]").unwrap();
        assert_eq!(s, StartPoint::Point(pt(&[0.5, 0.25])));
    }
}
