//! Metrics over a run, the closed-form regret bounds, and the lifting that
//! turns the perturbed iterate sequence into an exactly self-contracted one.
//!
//! For iterates `x_t` and perturbation norms `eps_t = ||e_t||`, the tail sums
//! `R_t = eps_t + ... + eps_T` (with `R_{T+1} = 0`) give lifted points
//! `A_t = (x_t, R_t)`. Under `||(u, s)|| = ||u||_2 + |s|` the lifted curve
//! satisfies `||A_k - A_j|| <= ||A_k - A_i||` for all `i <= j <= k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithm::{RunTrace, StepSchedule};
use crate::error::{Error, Result};
use crate::geometry::{LiftedPoint, Point};
use crate::problem::Instance;

/// Curves with at most this many points are always checked exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 512;
/// Sampled triple count used for longer curves.
pub const DEFAULT_TRIPLE_BUDGET: usize = 1_000_000;
const TRIPLE_SAMPLER_SEED: u64 = 0x5eed_7c0d_e5a1_1ce5;

pub fn regret(trace: &RunTrace, comparator_value: f64) -> f64 {
    trace.records.iter().map(|r| r.loss).sum::<f64>() - comparator_value
}

pub fn ccv(trace: &RunTrace) -> f64 {
    trace.records.iter().map(|r| r.violation).sum()
}

pub fn movement(trace: &RunTrace) -> f64 {
    trace.records.iter().map(|r| r.movement).sum()
}

pub fn sum_e_norm(trace: &RunTrace) -> f64 {
    trace.records.iter().map(|r| r.e_norm).sum()
}

/// `(D^2 / 2) sum_t (1/eta_t - 1/eta_{t-1} - H_t)_+ + (G^2 / 2) sum_t eta_t`,
/// with `1/eta_0 = 0`. Rounds past the end of `curvatures` use `H_t = 0`.
pub fn regret_bound_lemma(
    schedule: &StepSchedule,
    diameter: f64,
    lipschitz: f64,
    curvatures: &[f64],
    horizon: usize,
) -> Result<f64> {
    if horizon == 0 {
        return Ok(0.0);
    }
    schedule.validate()?;
    let mut inv_prev = 0.0;
    let mut curvature_sum = 0.0;
    let mut step_sum = 0.0;
    for t in 1..=horizon {
        let eta = schedule.step_size(t)?;
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size at round {t} is not positive"
            )));
        }
        let inv = 1.0 / eta;
        let h = curvatures.get(t - 1).copied().unwrap_or(0.0);
        curvature_sum += (inv - inv_prev - h).max(0.0);
        step_sum += eta;
        inv_prev = inv;
    }
    Ok(0.5 * diameter * diameter * curvature_sum + 0.5 * lipschitz * lipschitz * step_sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Convex,
    StronglyConvex,
}

/// `(3/2) G D sqrt(T)` for convex losses, `G^2 / (2 mu) (1 + ln T)` for
/// `mu`-strongly convex ones.
pub fn regret_bound_theorem(
    regime: Regime,
    diameter: f64,
    lipschitz: f64,
    mu: f64,
    horizon: f64,
) -> Result<f64> {
    match regime {
        Regime::Convex => Ok(1.5 * lipschitz * diameter * horizon.sqrt()),
        Regime::StronglyConvex => {
            if !(mu > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "mu must be positive, got {mu}"
                )));
            }
            Ok(lipschitz * lipschitz / (2.0 * mu) * (1.0 + horizon.ln()))
        }
    }
}

/// Suffix sums `R_1, ..., R_{T+1}` of the perturbation norms.
pub fn tail_perturbations(e_norms: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; e_norms.len() + 1];
    for t in (0..e_norms.len()).rev() {
        out[t] = out[t + 1] + e_norms[t];
    }
    out
}

/// `A_t = (x_t, R_t)` for `t = 1..T+1`.
pub fn lift(trace: &RunTrace) -> Vec<LiftedPoint> {
    let tails = tail_perturbations(&trace.e_norms());
    trace
        .iterates()
        .into_iter()
        .zip(tails)
        .map(|(base, tail)| LiftedPoint { base, tail })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveNorm {
    Euclidean,
    Oplus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleBudget {
    Exhaustive,
    #[serde(untagged)]
    Sampled(usize),
}

impl Default for TripleBudget {
    fn default() -> Self {
        TripleBudget::Sampled(DEFAULT_TRIPLE_BUDGET)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfContractionReport {
    pub triples_checked: u64,
    /// Largest `||A_k - A_j|| - ||A_k - A_i||` over the checked triples.
    pub max_violation: f64,
    pub exhaustive: bool,
}

fn choose3(n: usize) -> u64 {
    let n = n as u64;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

fn sample_triple<R: Rng>(rng: &mut R, n: usize) -> (usize, usize, usize) {
    loop {
        let mut v = [
            rng.random_range(0..n),
            rng.random_range(0..n),
            rng.random_range(0..n),
        ];
        v.sort_unstable();
        if v[0] < v[1] && v[1] < v[2] {
            return (v[0], v[1], v[2]);
        }
    }
}

/// Max over triples `i < j < k` of `dist(j, k) - dist(i, k) - slack(i, j)`,
/// where `slack(i, j) = prefix[j] - prefix[i]` for a nondecreasing `prefix`.
///
/// The exhaustive path is exact but costs only `O(n^2)` distance
/// evaluations: for fixed `k, j` the worst `i` maximizes
/// `prefix[i] - dist(i, k)` over `i < j`, a running maximum.
fn max_triple_excess(
    n: usize,
    dist: &dyn Fn(usize, usize) -> f64,
    prefix: &[f64],
    budget: TripleBudget,
) -> (f64, u64, bool) {
    if n < 3 {
        return (0.0, 0, true);
    }
    let exhaustive = matches!(budget, TripleBudget::Exhaustive) || n <= EXHAUSTIVE_LIMIT;
    let mut worst = f64::NEG_INFINITY;
    if exhaustive {
        let mut row = vec![0.0; n];
        for k in 2..n {
            for (i, r) in row.iter_mut().enumerate().take(k) {
                *r = dist(i, k);
            }
            let mut best_i = prefix[0] - row[0];
            for j in 1..k {
                let v = row[j] - prefix[j] + best_i;
                if v > worst {
                    worst = v;
                }
                best_i = best_i.max(prefix[j] - row[j]);
            }
        }
        (worst, choose3(n), true)
    } else {
        let TripleBudget::Sampled(m) = budget else {
            unreachable!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(TRIPLE_SAMPLER_SEED);
        for _ in 0..m {
            let (i, j, k) = sample_triple(&mut rng, n);
            let v = dist(j, k) - dist(i, k) - (prefix[j] - prefix[i]);
            if v > worst {
                worst = v;
            }
        }
        (if m == 0 { 0.0 } else { worst }, m as u64, false)
    }
}

/// Checks `||A_k - A_j|| <= ||A_k - A_i||` for `i <= j <= k` on plain points.
pub fn check_self_contracted_points(
    points: &[Point],
    budget: TripleBudget,
) -> SelfContractionReport {
    let zeros = vec![0.0; points.len()];
    let dist = |a: usize, b: usize| points[a].dist(&points[b]);
    let (max_violation, triples_checked, exhaustive) =
        max_triple_excess(points.len(), &dist, &zeros, budget);
    SelfContractionReport {
        triples_checked,
        max_violation,
        exhaustive,
    }
}

/// Self-contraction check on lifted points under the chosen norm.
pub fn check_self_contracted(
    points: &[LiftedPoint],
    norm: CurveNorm,
    budget: TripleBudget,
) -> SelfContractionReport {
    let zeros = vec![0.0; points.len()];
    let (max_violation, triples_checked, exhaustive) = match norm {
        CurveNorm::Oplus => {
            let d = |a: usize, b: usize| points[a].oplus_dist(&points[b]);
            max_triple_excess(points.len(), &d, &zeros, budget)
        }
        CurveNorm::Euclidean => {
            let d = |a: usize, b: usize| points[a].euclidean_dist(&points[b]);
            max_triple_excess(points.len(), &d, &zeros, budget)
        }
    };
    SelfContractionReport {
        triples_checked,
        max_violation,
        exhaustive,
    }
}

/// Max over triples `i < j < k` of
/// `||x_j - x_k|| - ||x_i - x_k|| - sum_{r=i}^{j-1} ||e_r||`.
pub fn approx_contraction_residual(trace: &RunTrace, budget: TripleBudget) -> f64 {
    let xs = trace.iterates();
    let mut prefix = vec![0.0; xs.len()];
    for (t, r) in trace.records.iter().enumerate() {
        prefix[t + 1] = prefix[t] + r.e_norm;
    }
    let dist = |a: usize, b: usize| xs[a].dist(&xs[b]);
    max_triple_excess(xs.len(), &dist, &prefix, budget).0
}

/// `movement / (D + sum ||e_t||)`, an empirical lower estimate of the
/// dimension constant in the movement bound.
pub fn movement_ratio(trace: &RunTrace, diameter: f64) -> Result<f64> {
    if !(diameter > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diameter must be positive, got {diameter}"
        )));
    }
    Ok(movement(trace) / (diameter + sum_e_norm(trace)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    /// value ~ slope * sqrt(T) + intercept
    SqrtT,
    /// value ~ slope * (1 + ln T) + intercept
    LogT,
    /// ln(value) ~ slope * ln(T) + intercept
    PowerLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; NaN when the values have no spread.
    pub r2: f64,
}

/// Ordinary least squares of the transformed value on the transformed
/// horizon, with intercept.
pub fn scaling_fit(series: &[(f64, f64)], model: ScalingModel) -> Result<ScalingFit> {
    if series.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "scaling fit needs at least 3 points, got {}",
            series.len()
        )));
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidArgument(
            "horizons must be strictly increasing".into(),
        ));
    }
    let mut xs = Vec::with_capacity(series.len());
    let mut ys = Vec::with_capacity(series.len());
    for &(t, v) in series {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {t}"
            )));
        }
        let (x, y) = match model {
            ScalingModel::SqrtT => (t.sqrt(), v),
            ScalingModel::LogT => (1.0 + t.ln(), v),
            ScalingModel::PowerLaw => {
                if !(v > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "power-law fit needs positive values, got {v}"
                    )));
                }
                (t.ln(), v.ln())
            }
        };
        xs.push(x);
        ys.push(y);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else {
        f64::NAN
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r2,
    })
}

/// Per-run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon: usize,
    pub regret: f64,
    pub ccv: f64,
    pub movement: f64,
    pub sum_e_norm: f64,
    pub regret_bound_lemma: f64,
    /// NaN for schedules outside the two regimes.
    pub regret_bound_theorem: f64,
    /// `G * movement`
    pub ccv_bound_form: f64,
    pub movement_ratio: f64,
    pub max_selfcontraction_violation: f64,
    pub approx_contraction_residual: f64,
    pub comparator_value: f64,
}

/// The regime and modulus matching a schedule, if it is one of the two.
pub fn schedule_regime(schedule: &StepSchedule) -> Option<(Regime, f64)> {
    match schedule {
        StepSchedule::SqrtDecay { .. } => Some((Regime::Convex, 0.0)),
        StepSchedule::StronglyConvex { mu } => Some((Regime::StronglyConvex, *mu)),
        StepSchedule::Constant { .. } => None,
    }
}

pub fn compute_metrics(
    inst: &Instance,
    trace: &RunTrace,
    schedule: &StepSchedule,
    comparator_value: f64,
    budget: TripleBudget,
) -> Result<MetricsReport> {
    let horizon = trace.horizon();
    let d = inst.diameter();
    let g = inst.lipschitz();
    let movement = movement(trace);
    let lemma = match schedule {
        StepSchedule::Constant { eta } if *eta == 0.0 => f64::INFINITY,
        _ => regret_bound_lemma(schedule, d, g, &inst.curvatures(), horizon)?,
    };
    let theorem = match schedule_regime(schedule) {
        Some((regime, mu)) if horizon > 0 => {
            regret_bound_theorem(regime, d, g, mu, horizon as f64)?
        }
        _ => f64::NAN,
    };
    let sc = check_self_contracted(&lift(trace), CurveNorm::Oplus, budget);
    Ok(MetricsReport {
        horizon,
        regret: regret(trace, comparator_value),
        ccv: ccv(trace),
        movement,
        sum_e_norm: sum_e_norm(trace),
        regret_bound_lemma: lemma,
        regret_bound_theorem: theorem,
        ccv_bound_form: g * movement,
        movement_ratio: movement_ratio(trace, d)?,
        max_selfcontraction_violation: sc.max_violation,
        approx_contraction_residual: approx_contraction_residual(trace, budget),
        comparator_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::RoundRecord;
    use crate::geometry::{BoxSet, FeasibleRegion};

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn trace_1d(xs: &[f64], losses: &[f64], violations: &[f64], e_norms: &[f64]) -> RunTrace {
        let n = losses.len();
        let records = (0..n)
            .map(|t| RoundRecord {
                t: t + 1,
                x: pt(&[xs[t]]),
                loss: losses[t],
                violation: violations[t],
                eta: 1.0,
                e: pt(&[e_norms[t]]),
                e_norm: e_norms[t],
                movement: (xs[t + 1] - xs[t]).abs(),
                proj_residual: 0.0,
            })
            .collect();
        RunTrace {
            instance: "test".into(),
            seed: 0,
            x_start: pt(&[xs[0]]),
            records,
            x_final: pt(&[xs[n]]),
            final_region: FeasibleRegion::new(BoxSet::cube(1, 10.0).unwrap()),
            warnings: vec![],
        }
    }

    #[test]
    fn regret_examples() {
        let t = trace_1d(
            &[0.0, 0.0, 0.0, 0.0],
            &[1.0, 2.0, 3.0],
            &[0.0; 3],
            &[0.0; 3],
        );
        assert_eq!(regret(&t, 6.0), 0.0);
        assert_eq!(regret(&t, 4.0), 2.0);
        let empty = trace_1d(&[0.0], &[], &[], &[]);
        assert_eq!(regret(&empty, 0.0), 0.0);
    }

    #[test]
    fn ccv_and_movement_examples() {
        let t = trace_1d(
            &[0.0, 1.0, 2.0, 2.0],
            &[0.0; 3],
            &[0.5, 0.0, 0.2],
            &[0.0; 3],
        );
        assert!((ccv(&t) - 0.7).abs() < 1e-15);
        let t = trace_1d(&[0.0, 1.0, 0.0], &[0.0; 2], &[0.0; 2], &[0.0; 2]);
        assert_eq!(ccv(&t), 0.0);
        assert_eq!(movement(&t), 2.0);
    }

    #[test]
    fn lemma_bound_examples() {
        let sc = StepSchedule::StronglyConvex { mu: 1.0 };
        assert!((regret_bound_lemma(&sc, 3.0, 1.0, &[1.0, 1.0], 2).unwrap() - 0.75).abs() < 1e-15);
        let sq = StepSchedule::SqrtDecay {
            diameter: 1.0,
            lipschitz: 1.0,
        };
        assert!((regret_bound_lemma(&sq, 1.0, 1.0, &[0.0], 1).unwrap() - 1.0).abs() < 1e-15);
        // frozen from an independent summation: 0.5 * 2 + 0.5 * (1 + 1/sqrt2 + 1/sqrt3 + 1/2)
        let v = regret_bound_lemma(&sq, 1.0, 1.0, &[0.0; 4], 4).unwrap();
        assert!((v - 2.392_228_525_188_086_6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn theorem_bound_examples() {
        assert_eq!(
            regret_bound_theorem(Regime::Convex, 1.0, 1.0, 0.0, 4.0).unwrap(),
            3.0
        );
        assert_eq!(
            regret_bound_theorem(Regime::StronglyConvex, 1.0, 1.0, 1.0, 1.0).unwrap(),
            0.5
        );
        let v = regret_bound_theorem(Regime::StronglyConvex, 1.0, 2.0, 1.0, std::f64::consts::E)
            .unwrap();
        assert!((v - 4.0).abs() < 1e-15);
        assert!(regret_bound_theorem(Regime::StronglyConvex, 1.0, 1.0, 0.0, 4.0).is_err());
    }

    #[test]
    fn tails() {
        assert_eq!(
            tail_perturbations(&[1.0, 2.0, 3.0]),
            vec![6.0, 5.0, 3.0, 0.0]
        );
        assert_eq!(tail_perturbations(&[]), vec![0.0]);
        assert_eq!(tail_perturbations(&[0.0, 0.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn lift_pairs_iterates_with_tails() {
        let t = trace_1d(&[0.0, 0.7], &[0.0], &[0.0], &[0.3]);
        let a = lift(&t);
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].base.coords()[0], a[0].tail), (0.0, 0.3));
        assert_eq!((a[1].base.coords()[0], a[1].tail), (0.7, 0.0));
        let z = trace_1d(&[0.0, 0.5, 0.6], &[0.0; 2], &[0.0; 2], &[0.0; 2]);
        assert!(lift(&z).iter().all(|p| p.tail == 0.0));
    }

    fn lifted(xs: &[f64]) -> Vec<LiftedPoint> {
        xs.iter()
            .map(|&x| LiftedPoint {
                base: pt(&[x]),
                tail: 0.0,
            })
            .collect()
    }

    #[test]
    fn self_contraction_examples() {
        let r = check_self_contracted(
            &lifted(&[0.0, -1.0, 1.0]),
            CurveNorm::Euclidean,
            TripleBudget::Exhaustive,
        );
        assert_eq!(r.max_violation, 1.0);
        assert_eq!(r.triples_checked, 1);
        let r = check_self_contracted(
            &lifted(&[0.0, 1.0, 1.5]),
            CurveNorm::Oplus,
            TripleBudget::Exhaustive,
        );
        assert!(r.max_violation <= 0.0);
    }

    /// Direct O(n^3) reference for the prefix-maximum shortcut.
    fn brute_force(points: &[Point]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..points.len() {
            for j in 0..k {
                for i in 0..j {
                    worst = worst.max(points[k].dist(&points[j]) - points[k].dist(&points[i]));
                }
            }
        }
        worst
    }

    #[test]
    fn exhaustive_shortcut_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(3..40);
            let pts: Vec<Point> = (0..n)
                .map(|_| pt(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
                .collect();
            let fast = check_self_contracted_points(&pts, TripleBudget::Exhaustive);
            assert!((fast.max_violation - brute_force(&pts)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_check_is_seeded() {
        let pts: Vec<Point> = (0..600).map(|i| pt(&[(i as f64 * 0.37).sin()])).collect();
        let a = check_self_contracted_points(&pts, TripleBudget::Sampled(1000));
        let b = check_self_contracted_points(&pts, TripleBudget::Sampled(1000));
        assert!(!a.exhaustive);
        assert_eq!(a, b);
        assert_eq!(a.triples_checked, 1000);
    }

    #[test]
    fn approx_residual_examples() {
        let z = trace_1d(&[1.0, 0.5, 0.25, 0.0], &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        assert!(approx_contraction_residual(&z, TripleBudget::Exhaustive) <= 1e-10);
        let one = trace_1d(&[0.0, 1.0], &[0.0], &[0.0], &[1.0]);
        assert_eq!(
            approx_contraction_residual(&one, TripleBudget::Exhaustive),
            0.0
        );
        // x goes 0 -> 1 -> 0.5 with ||e_1|| = 0.1: |x_2 - x_3| - |x_1 - x_3| - 0.1 = 0.5 - 0.5 - 0.1
        let t = trace_1d(&[0.0, 1.0, 0.5], &[0.0; 2], &[0.0; 2], &[0.1, 0.0]);
        assert!((approx_contraction_residual(&t, TripleBudget::Exhaustive) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn movement_ratio_examples() {
        let t = trace_1d(
            &[0.0, 1.0, 2.0, 3.0],
            &[0.0; 3],
            &[0.0; 3],
            &[1.0, 1.0, 0.0],
        );
        assert_eq!(movement_ratio(&t, 1.0).unwrap(), 1.0);
        let single = trace_1d(&[0.0, 0.8], &[0.0], &[0.0], &[0.0]);
        assert!(movement_ratio(&single, 1.0).unwrap() <= 1.0);
        assert!(movement_ratio(&single, 0.0).is_err());
    }

    #[test]
    fn scaling_fit_examples() {
        let s: Vec<(f64, f64)> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&t: &f64| (t, 2.0 * t.sqrt()))
            .collect();
        let f = scaling_fit(&s, ScalingModel::SqrtT).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);

        let s: Vec<(f64, f64)> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&t: &f64| (t, 3.0 * (1.0 + t.ln())))
            .collect();
        let f = scaling_fit(&s, ScalingModel::LogT).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);

        let s = [(4.0, 5.0), (16.0, 5.0), (64.0, 5.0)];
        let f = scaling_fit(&s, ScalingModel::SqrtT).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(f.r2.is_nan());

        let s: Vec<(f64, f64)> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&t: &f64| (t, 0.3 * t.sqrt()))
            .collect();
        let f = scaling_fit(&s, ScalingModel::PowerLaw).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);

        assert!(scaling_fit(&[(4.0, 1.0), (4.0, 2.0), (4.0, 3.0)], ScalingModel::SqrtT).is_err());
        assert!(scaling_fit(&[(4.0, 1.0), (5.0, 2.0)], ScalingModel::SqrtT).is_err());
    }
}
