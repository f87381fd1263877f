//! The offline comparator `x* in argmin_{x in S_T} sum_t f_t(x)` and a brute
//! force grid scan used to cross-check it in low dimension.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_region, FeasibleRegion, Point};
use crate::problem::{Instance, LossFn};

pub const DEFAULT_ORACLE_TOL: f64 = 1e-8;
pub const DEFAULT_ORACLE_MAX_ITERS: usize = 1_000_000;
/// Feasible points drawn to probe the variational inequality at `x*`.
pub const VI_SAMPLES: usize = 1_000;
const VI_ATTEMPTS: usize = 1_000_000;
const VI_SEED: u64 = 0x0000_c1ea_110f_f1ce;
/// The linear case steps this many times further than the reference step.
const LINEAR_STEP_BOOST: f64 = 16.0;
const MAX_GRID_POINTS: u64 = 4_000_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub x_star: Point,
    /// `sum_t f_t(x_star)`
    pub value: f64,
    /// Length of the projected-gradient step at `x_star` (coordinate units).
    /// For non-smooth totals this is the largest sampled rate of descent
    /// along a feasible direction instead.
    pub stationarity_residual: f64,
    /// Largest `-F'(x_star; z - x_star)` over sampled feasible `z`, clamped at
    /// zero.
    pub vi_residual: f64,
    pub iterations: usize,
}

/// `sum_t f_t(x)` by direct summation.
pub fn total_loss(inst: &Instance, x: &Point) -> f64 {
    inst.losses().iter().map(|f| f.eval(x)).sum()
}

fn total_directional_derivative(inst: &Instance, x: &Point, u: &Point, active_tol: f64) -> f64 {
    inst.losses()
        .iter()
        .map(|f| f.directional_derivative(x, u, active_tol))
        .sum()
}

/// Smooth totals reduce to `F(x) = (m/2) ||x||^2 - w . x + const`.
struct SmoothTotal {
    m: f64,
    w: Point,
}

impl SmoothTotal {
    fn of(inst: &Instance) -> Option<SmoothTotal> {
        let d = inst.dimension();
        let mut m = 0.0;
        let mut w = vec![0.0; d];
        for f in inst.losses() {
            match f {
                LossFn::Linear { slope } => axpy_into(&mut w, -1.0, slope),
                LossFn::Quadratic { mu, center } => {
                    m += mu;
                    axpy_into(&mut w, *mu, center);
                }
                LossFn::MaxAffine { pieces } if pieces.len() == 1 => {
                    axpy_into(&mut w, -1.0, &pieces[0].slope)
                }
                LossFn::MaxAffine { .. } => return None,
            }
        }
        Some(SmoothTotal {
            m,
            w: Point::from_vec(w),
        })
    }

    fn grad(&self, x: &Point) -> Point {
        x.scale(self.m).sub(&self.w)
    }
}

fn axpy_into(acc: &mut [f64], s: f64, p: &Point) {
    for (a, v) in acc.iter_mut().zip(p.coords()) {
        *a += s * v;
    }
}

fn projection_tol(tol: f64) -> f64 {
    (tol * 1e-3).clamp(1e-13, 1e-10)
}

const PROJECTION_SWEEPS: usize = 100_000;

/// Minimizes `sum_t f_t` over the final feasible region, starting from the
/// anchor.
///
/// Smooth totals use projected gradient steps of length `1/m` (which lands
/// on the minimizer in one step when `m > 0`) or `16 D / ||c||` for a purely
/// linear total `c . x`. Non-smooth totals use projected subgradient steps
/// with iterate averaging and are certified through directional derivatives
/// toward sampled feasible points.
pub fn offline_optimum(inst: &Instance, tol: f64, max_iters: usize) -> Result<OracleResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "oracle tolerance must be positive, got {tol}"
        )));
    }
    let region = inst.final_region()?;
    let samples = feasible_samples(inst, &region);
    let (x_star, stationarity_residual, iterations) = match SmoothTotal::of(inst) {
        Some(total) => smooth_descent(inst, &region, &total, tol, max_iters)?,
        None => subgradient_descent(inst, &region, &samples, tol, max_iters)?,
    };
    let value = total_loss(inst, &x_star);
    let vi_residual = samples
        .iter()
        .map(|z| -total_directional_derivative(inst, &x_star, &z.sub(&x_star), 1e-12))
        .fold(0.0, f64::max);
    Ok(OracleResult {
        x_star,
        value,
        stationarity_residual,
        vi_residual,
        iterations,
    })
}

fn smooth_descent(
    inst: &Instance,
    region: &FeasibleRegion,
    total: &SmoothTotal,
    tol: f64,
    max_iters: usize,
) -> Result<(Point, f64, usize)> {
    let ptol = projection_tol(tol);
    let start = inst.anchor().clone();
    let step = if total.m > 0.0 {
        1.0 / total.m
    } else {
        let c = total.w.norm();
        if c == 0.0 {
            return Ok((start, 0.0, 0));
        }
        LINEAR_STEP_BOOST * inst.diameter() / c
    };
    let mut x = project_region(
        &start.axpy(-step, &total.grad(&start)),
        region,
        ptol,
        PROJECTION_SWEEPS,
    )?;
    let mut best = (x.clone(), f64::INFINITY);
    for k in 1..=max_iters {
        let next = project_region(
            &x.axpy(-step, &total.grad(&x)),
            region,
            ptol,
            PROJECTION_SWEEPS,
        )?;
        // the step at the reference length moves no further than this one
        let residual = next.dist(&x);
        if residual <= tol {
            return Ok((x, residual, k));
        }
        if residual < best.1 {
            best = (x.clone(), residual);
        }
        x = next;
    }
    Err(Error::OracleNonConvergence {
        value: total_loss(inst, &best.0),
        best: best.0,
        residual: best.1,
        iterations: max_iters,
    })
}

/// Largest rate of descent `-F'(x; u) / ||u||` toward the sampled points.
fn descent_rate(inst: &Instance, x: &Point, samples: &[Point], active_tol: f64) -> f64 {
    samples
        .iter()
        .filter_map(|z| {
            let u = z.sub(x);
            let n = u.norm();
            (n > 1e-12).then(|| -total_directional_derivative(inst, x, &u, active_tol) / n)
        })
        .fold(0.0, f64::max)
}

fn subgradient_descent(
    inst: &Instance,
    region: &FeasibleRegion,
    samples: &[Point],
    tol: f64,
    max_iters: usize,
) -> Result<(Point, f64, usize)> {
    let ptol = projection_tol(tol);
    let mu: f64 = inst.curvatures().iter().sum();
    let g_total: f64 = inst
        .losses()
        .iter()
        .map(|f| f.lipschitz_on(inst.base()))
        .sum();
    let d = inst.diameter();
    let mut x = inst.anchor().clone();
    let mut avg = x.clone();
    let mut weight = 0.0;
    let mut best = (x.clone(), f64::INFINITY);
    let mut next_check = 1;
    for k in 1..=max_iters {
        let g: Point = inst
            .losses()
            .iter()
            .fold(Point::zeros(inst.dimension()), |acc, f| {
                acc.add(&f.subgrad(&x))
            });
        let step = if mu > 0.0 {
            1.0 / (mu * k as f64)
        } else {
            d / (g_total.max(1e-300) * (k as f64).sqrt())
        };
        x = project_region(&x.axpy(-step, &g), region, ptol, PROJECTION_SWEEPS)?;
        let wk = if mu > 0.0 { k as f64 } else { 1.0 };
        weight += wk;
        avg = avg.axpy(wk / weight, &x.sub(&avg));

        if k == next_check || k == max_iters {
            next_check *= 2;
            for cand in [&x, &avg] {
                let r = descent_rate(inst, cand, samples, tol);
                if r <= tol {
                    return Ok((cand.clone(), r, k));
                }
                if r < best.1 {
                    best = (cand.clone(), r);
                }
            }
        }
    }
    Err(Error::OracleNonConvergence {
        value: total_loss(inst, &best.0),
        best: best.0,
        residual: best.1,
        iterations: max_iters,
    })
}

/// Up to [`VI_SAMPLES`] uniform points of the region by rejection from the
/// base set, plus the anchor.
fn feasible_samples(inst: &Instance, region: &FeasibleRegion) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(VI_SEED ^ inst.seed());
    let mut out = vec![inst.anchor().clone()];
    for _ in 0..VI_ATTEMPTS {
        if out.len() > VI_SAMPLES {
            break;
        }
        let z = inst.base().sample(&mut rng);
        if region.contains(&z, 0.0) {
            out.push(z);
        }
    }
    out
}

/// Scans the bounding box of the base set on a grid of spacing `resolution`,
/// keeping points inside the final feasible region, and returns the best
/// point with its total loss. Only for `d <= 2`.
pub fn grid_search_optimum(inst: &Instance, resolution: f64) -> Result<(Point, f64)> {
    let d = inst.dimension();
    if d > 2 {
        return Err(Error::InvalidArgument(format!(
            "grid search is limited to d <= 2, got d = {d}"
        )));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let region = inst.final_region()?;
    let (lo, hi) = inst.base().bounds();
    let counts: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| ((h - l) / resolution + 1e-9).floor() as usize + 1)
        .collect();
    let total = counts.iter().map(|&c| c as u64).product::<u64>();
    if total > MAX_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "grid of {total} points is too large; raise the resolution"
        )));
    }
    let coord = |axis: usize, i: usize| (lo[axis] + i as f64 * resolution).min(hi[axis]);
    let inner = if d == 2 { counts[1] } else { 1 };

    let best = (0..counts[0])
        .into_par_iter()
        .filter_map(|i| {
            let mut row_best: Option<(f64, usize, usize)> = None;
            let mut p = vec![coord(0, i); d];
            for j in 0..inner {
                if d == 2 {
                    p[1] = coord(1, j);
                }
                let x = Point::from_vec(p.clone());
                if !region.contains(&x, 1e-12) {
                    continue;
                }
                let v = total_loss(inst, &x);
                if row_best.is_none_or(|(bv, _, _)| v < bv) {
                    row_best = Some((v, i, j));
                }
            }
            row_best
        })
        .reduce_with(|a, b| {
            // ties resolved toward the lowest grid index so the result does
            // not depend on scheduling
            if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                b
            } else {
                a
            }
        });

    match best {
        Some((v, i, j)) => {
            let mut p = vec![coord(0, i)];
            if d == 2 {
                p.push(coord(1, j));
            }
            Ok((Point::from_vec(p), v))
        }
        None => Err(Error::NoFeasibleGridPoint(resolution)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxSet;
    use crate::problem::{AffinePiece, BaseSet, ConstraintFn};

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn inactive(d: usize) -> ConstraintFn {
        let mut n = vec![0.0; d];
        n[0] = 1.0;
        ConstraintFn::Affine {
            normal: pt(&n),
            offset: 10.0,
        }
    }

    fn unit_box_instance(losses: Vec<LossFn>) -> Instance {
        let base = BaseSet::Box(BoxSet::new(pt(&[0.0, 0.0]), pt(&[1.0, 1.0])).unwrap());
        let constraints = vec![inactive(2); losses.len()];
        Instance::new("test", base, losses, constraints, pt(&[0.5, 0.5]), 0).unwrap()
    }

    #[test]
    fn separable_quadratic_clamps_the_mean() {
        let centers = [[1.4, 0.2], [0.8, 0.5], [1.1, -0.4]];
        let losses = centers
            .iter()
            .map(|c| LossFn::Quadratic {
                mu: 1.0,
                center: pt(c),
            })
            .collect();
        let inst = unit_box_instance(losses);
        let r = offline_optimum(&inst, 1e-8, 1000).unwrap();
        // mean (1.1, 0.1) clamped to the unit box
        assert!(r.x_star.dist(&pt(&[1.0, 0.1])) < 1e-8, "{:?}", r.x_star);
        assert!(r.stationarity_residual <= 1e-8);
        assert!(r.vi_residual <= 1e-8);
    }

    #[test]
    fn single_linear_loss_hits_the_face() {
        let inst = unit_box_instance(vec![LossFn::Linear {
            slope: pt(&[1.0, 0.0]),
        }]);
        let r = offline_optimum(&inst, 1e-8, 1000).unwrap();
        assert!(r.x_star.coords()[0].abs() < 1e-8);
        assert!(r.value.abs() < 1e-8);
    }

    #[test]
    fn zero_total_stays_at_anchor() {
        let inst = unit_box_instance(vec![
            LossFn::Linear {
                slope: pt(&[1.0, 0.0]),
            },
            LossFn::Linear {
                slope: pt(&[-1.0, 0.0]),
            },
        ]);
        let r = offline_optimum(&inst, 1e-8, 10).unwrap();
        assert_eq!(r.x_star, pt(&[0.5, 0.5]));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn linear_over_disk_reaches_boundary() {
        let base = BaseSet::Box(BoxSet::cube(2, 2.0).unwrap());
        let g = ConstraintFn::BallDistance {
            center: pt(&[0.0, 0.0]),
            radius: 1.0,
        };
        let inst = Instance::new(
            "disk",
            base,
            vec![LossFn::Linear {
                slope: pt(&[3.0, 4.0]),
            }],
            vec![g],
            pt(&[0.0, 0.0]),
            0,
        )
        .unwrap();
        let r = offline_optimum(&inst, 1e-8, 10_000).unwrap();
        assert!(r.x_star.dist(&pt(&[-0.6, -0.8])) < 1e-7, "{:?}", r.x_star);
        assert!((r.value + 5.0).abs() < 1e-8);
    }

    #[test]
    fn max_affine_corner_is_certified() {
        let piece = |a: f64, b: f64| AffinePiece {
            slope: pt(&[a, b]),
            intercept: 0.0,
        };
        let inst = unit_box_instance(vec![LossFn::MaxAffine {
            pieces: vec![piece(1.0, 0.5), piece(0.5, 1.0)],
        }]);
        let r = offline_optimum(&inst, 1e-8, 100_000).unwrap();
        assert!(r.x_star.norm() < 1e-8, "{:?}", r.x_star);
        assert!(r.value.abs() < 1e-8);
    }

    #[test]
    fn max_affine_interior_kink_reports_nonconvergence() {
        let piece = |a: f64, b: f64| AffinePiece {
            slope: pt(&[a, 0.0]),
            intercept: b,
        };
        // |x_1 - 0.3| has its kink strictly inside the box
        let inst = unit_box_instance(vec![LossFn::MaxAffine {
            pieces: vec![piece(1.0, -0.3), piece(-1.0, 0.3)],
        }]);
        match offline_optimum(&inst, 1e-12, 200) {
            Err(Error::OracleNonConvergence { best, residual, .. }) => {
                assert!(residual > 1e-12);
                assert!((best.coords()[0] - 0.3).abs() < 0.1);
            }
            Ok(r) => assert!((r.x_star.coords()[0] - 0.3).abs() < 1e-9),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn grid_matches_closed_form_quadratic() {
        let inst = unit_box_instance(vec![LossFn::Quadratic {
            mu: 1.0,
            center: pt(&[0.3141, 0.2718]),
        }]);
        let res = 1e-3;
        let (_, v) = grid_search_optimum(&inst, res).unwrap();
        assert!(v >= 0.0 && v <= 1.0 * 2.0 * res * res, "{v}");
    }

    #[test]
    fn grid_rejects_high_dimension_and_bad_resolution() {
        let base = BaseSet::Box(BoxSet::cube(3, 1.0).unwrap());
        let inst = Instance::new(
            "3d",
            base,
            vec![LossFn::Linear {
                slope: pt(&[1.0, 0.0, 0.0]),
            }],
            vec![inactive(3)],
            pt(&[0.0, 0.0, 0.0]),
            0,
        )
        .unwrap();
        assert!(matches!(
            grid_search_optimum(&inst, 0.1),
            Err(Error::InvalidArgument(_))
        ));
        let inst2 = unit_box_instance(vec![LossFn::Linear {
            slope: pt(&[1.0, 0.0]),
        }]);
        assert!(grid_search_optimum(&inst2, 0.0).is_err());
    }

    #[test]
    fn grid_without_feasible_point_errors() {
        let base = BaseSet::Box(BoxSet::new(pt(&[0.0, 0.0]), pt(&[1.0, 1.0])).unwrap());
        let g = ConstraintFn::BallDistance {
            center: pt(&[0.55, 0.55]),
            radius: 0.01,
        };
        let inst = Instance::new(
            "tiny",
            base,
            vec![LossFn::Linear {
                slope: pt(&[1.0, 0.0]),
            }],
            vec![g],
            pt(&[0.55, 0.55]),
            0,
        )
        .unwrap();
        assert!(matches!(
            grid_search_optimum(&inst, 0.5),
            Err(Error::NoFeasibleGridPoint(_))
        ));
        assert!(grid_search_optimum(&inst, 0.01).is_ok());
    }

    #[test]
    fn one_dimensional_grid() {
        let base = BaseSet::Box(BoxSet::new(pt(&[-1.0]), pt(&[1.0])).unwrap());
        let inst = Instance::new(
            "line",
            base,
            vec![LossFn::Quadratic {
                mu: 2.0,
                center: pt(&[0.25]),
            }],
            vec![inactive(1)],
            pt(&[0.0]),
            0,
        )
        .unwrap();
        let (x, v) = grid_search_optimum(&inst, 0.05).unwrap();
        assert!((x.coords()[0] - 0.25).abs() < 1e-12);
        assert!(v < 1e-20);
    }
}
