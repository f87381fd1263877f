//! Property suite over the projection primitives, the bounds and generated
//! runs. The primitives are passed in so deliberately broken versions can be
//! checked for detection.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algorithm::{run, ProjectionOptions, RunTrace, StartPoint, StepSchedule};
use crate::analysis::{
    check_self_contracted, check_self_contracted_points, compute_metrics, lift, regret_bound_lemma,
    regret_bound_theorem, CurveNorm, Regime, TripleBudget,
};
use crate::error::Result;
use crate::geometry::{
    project_ball, project_box, project_halfspace, project_region, Ball, BoxSet, ConvexBody,
    FeasibleRegion, Halfspace, LiftedPoint, Point,
};
use crate::oracle::{offline_optimum, total_loss, DEFAULT_ORACLE_TOL};
use crate::problem::{
    gen_instance, ConstraintFamily, ConstraintFn, FamilySpec, GeneratorSpec, Instance, LossFamily,
};

pub const PROJECTION_SLACK: f64 = 1e-9;
pub const DYKSTRA_BOX_SLACK: f64 = 1e-6;
const REGION_TOL: f64 = 1e-12;
const REGION_SWEEPS: usize = 100_000;
const SUITE_SEED: u64 = 0x0007_e575_u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Fast,
    Full,
}

impl Level {
    fn projection_trials(self) -> usize {
        match self {
            Level::Fast => 10_000,
            Level::Full => 100_000,
        }
    }

    fn bound_horizon(self) -> usize {
        match self {
            Level::Fast => 2_000,
            Level::Full => 10_000,
        }
    }

    fn run_horizon(self) -> usize {
        match self {
            Level::Fast => 128,
            Level::Full => 512,
        }
    }

    fn run_seeds(self) -> u64 {
        match self {
            Level::Fast => 2,
            Level::Full => 5,
        }
    }
}

/// The functions under test.
#[derive(Clone, Copy)]
pub struct Primitives {
    pub halfspace: fn(&Point, &Halfspace) -> Point,
    pub ball: fn(&Point, &Ball) -> Point,
    pub boxed: fn(&Point, &BoxSet) -> Point,
    pub region: fn(&Point, &FeasibleRegion, f64, usize) -> Result<Point>,
    pub lift: fn(&RunTrace) -> Vec<LiftedPoint>,
}

impl Default for Primitives {
    fn default() -> Self {
        Primitives {
            halfspace: project_halfspace,
            ball: project_ball,
            boxed: project_box,
            region: project_region,
            lift,
        }
    }
}

/// One invariant: passes when `witness <= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub witness: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(
        name: impl Into<String>,
        witness: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) -> Self {
        CheckOutcome {
            name: name.into(),
            // NaN witnesses fail
            passed: witness <= threshold,
            witness,
            threshold,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: witness {:.3e} (limit {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.witness,
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, " [{}]", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

pub fn verify_suite(level: Level) -> VerifyReport {
    verify_suite_with(level, &Primitives::default())
}

pub fn verify_suite_with(level: Level, prims: &Primitives) -> VerifyReport {
    let mut checks = projection_properties(level.projection_trials(), SUITE_SEED, prims);
    checks.extend(bound_dominance(level.bound_horizon()));
    checks.extend(contraction_examples());
    checks.extend(run_invariants(
        level.run_horizon(),
        level.run_seeds(),
        prims,
    ));
    VerifyReport { level, checks }
}

fn gauss<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Point {
    Point::from_vec(
        (0..d)
            .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect(),
    )
}

fn random_halfspace<R: Rng>(rng: &mut R, d: usize, through: Option<&Point>) -> Halfspace {
    loop {
        let a = gauss(rng, d, 1.0);
        if a.norm() < 0.1 {
            continue;
        }
        let b = match through {
            Some(c) => a.dot(c) + rng.random_range(0.0..1.0),
            None => rng.random_range(-1.0..1.0),
        };
        return Halfspace::new(a, b).expect("normal is nonzero");
    }
}

fn random_ball<R: Rng>(rng: &mut R, d: usize, through: Option<&Point>) -> Ball {
    match through {
        Some(c) => {
            let center = c.add(&gauss(rng, d, 1.0));
            let r = center.dist(c) + rng.random_range(0.1..1.0);
            Ball::new(center, r).expect("radius is positive")
        }
        None => {
            Ball::new(gauss(rng, d, 1.0), rng.random_range(0.1..2.0)).expect("radius is positive")
        }
    }
}

fn random_box<R: Rng>(rng: &mut R, d: usize, around: Option<&Point>) -> BoxSet {
    let c = around.cloned().unwrap_or_else(|| gauss(rng, d, 1.0));
    let lo: Vec<f64> = c
        .coords()
        .iter()
        .map(|v| v - rng.random_range(0.1..2.0))
        .collect();
    let hi: Vec<f64> = c
        .coords()
        .iter()
        .map(|v| v + rng.random_range(0.1..2.0))
        .collect();
    BoxSet::new(Point::from_vec(lo), Point::from_vec(hi)).expect("lo < hi")
}

/// Residual maxima of the three projection properties over random trials.
struct PropertyMax {
    vi: f64,
    pythagoras: f64,
    nonexpansive: f64,
    membership: f64,
    idempotence: f64,
}

impl PropertyMax {
    fn new() -> Self {
        PropertyMax {
            vi: f64::NEG_INFINITY,
            pythagoras: f64::NEG_INFINITY,
            nonexpansive: f64::NEG_INFINITY,
            membership: f64::NEG_INFINITY,
            idempotence: f64::NEG_INFINITY,
        }
    }

    /// `z` must lie in the set; `proj` is the map under test.
    fn record(
        &mut self,
        p: &Point,
        q: &Point,
        z: &Point,
        proj: &dyn Fn(&Point) -> Point,
        residual: &dyn Fn(&Point) -> f64,
    ) {
        let pp = proj(p);
        let pq = proj(q);
        let vi = p.sub(&pp).dot(&z.sub(&pp));
        let dz = z.dist(&pp);
        let dp = pp.dist(p);
        let dzp = z.dist(p);
        self.vi = self.vi.max(vi);
        self.pythagoras = self.pythagoras.max(dz * dz + dp * dp - dzp * dzp);
        self.nonexpansive = self.nonexpansive.max(pp.dist(&pq) - p.dist(q));
        self.membership = self.membership.max(residual(&pp));
        self.idempotence = self.idempotence.max(proj(&pp).dist(&pp));
    }

    fn outcomes(&self, label: &str, trials: usize) -> Vec<CheckOutcome> {
        let detail = format!("{trials} trials");
        vec![
            CheckOutcome::new(
                format!("{label}: variational inequality"),
                self.vi,
                PROJECTION_SLACK,
                detail.clone(),
            ),
            CheckOutcome::new(
                format!("{label}: pythagorean inequality"),
                self.pythagoras,
                PROJECTION_SLACK,
                detail.clone(),
            ),
            CheckOutcome::new(
                format!("{label}: non-expansiveness"),
                self.nonexpansive,
                PROJECTION_SLACK,
                detail.clone(),
            ),
            CheckOutcome::new(
                format!("{label}: membership"),
                self.membership,
                PROJECTION_SLACK,
                detail.clone(),
            ),
            CheckOutcome::new(
                format!("{label}: idempotence"),
                self.idempotence,
                PROJECTION_SLACK,
                detail,
            ),
        ]
    }
}

/// Variational inequality, Pythagorean inequality, non-expansiveness,
/// membership and idempotence of each projection, plus Dykstra on a box
/// written as slabs against the closed form.
pub fn projection_properties(trials: usize, seed: u64, prims: &Primitives) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hs = PropertyMax::new();
    let mut bl = PropertyMax::new();
    let mut bx = PropertyMax::new();
    let mut rg = PropertyMax::new();
    let mut dyk = 0.0f64;
    let mut region_errors = 0usize;

    for _ in 0..trials {
        let d = rng.random_range(1..=4);
        let p = gauss(&mut rng, d, 2.0);
        let q = gauss(&mut rng, d, 2.0);
        let w = gauss(&mut rng, d, 2.0);

        let h = random_halfspace(&mut rng, d, None);
        let body = ConvexBody::from(h.clone());
        let z = body.project(&w);
        hs.record(&p, &q, &z, &|x| (prims.halfspace)(x, &h), &|x| {
            body.residual(x)
        });

        let b = random_ball(&mut rng, d, None);
        let body = ConvexBody::from(b.clone());
        let z = body.project(&w);
        bl.record(&p, &q, &z, &|x| (prims.ball)(x, &b), &|x| body.residual(x));

        let bb = random_box(&mut rng, d, None);
        let body = ConvexBody::from(bb.clone());
        let z = body.project(&w);
        bx.record(&p, &q, &z, &|x| (prims.boxed)(x, &bb), &|x| {
            body.residual(x)
        });

        // a region with a known common point c
        let c = gauss(&mut rng, d, 0.5);
        let mut region = FeasibleRegion::new(random_box(&mut rng, d, Some(&c)));
        for _ in 0..rng.random_range(1..=3) {
            let extra: ConvexBody = if rng.random_bool(0.5) {
                random_halfspace(&mut rng, d, Some(&c)).into()
            } else {
                random_ball(&mut rng, d, Some(&c)).into()
            };
            region.push(extra).expect("same dimension");
        }
        let lam = rng.random_range(0.0..1.0);
        let z = match project_region(&w, &region, REGION_TOL, REGION_SWEEPS) {
            Ok(zw) => c.axpy(lam, &zw.sub(&c)),
            Err(_) => c.clone(),
        };
        let proj = |x: &Point| match (prims.region)(x, &region, REGION_TOL, REGION_SWEEPS) {
            Ok(y) => y,
            Err(_) => Point::from_vec(vec![f64::NAN; x.dim()]),
        };
        if !proj(&p).is_finite() {
            region_errors += 1;
        }
        rg.record(&p, &q, &z, &proj, &|x| region.residual(x));

        // the same box as an intersection of 2d halfspaces
        let mut slabs =
            FeasibleRegion::new(Halfspace::new(unit(d, 0, 1.0), bb.hi().coords()[0]).unwrap());
        for k in 0..d {
            slabs
                .push(Halfspace::new(unit(d, k, 1.0), bb.hi().coords()[k]).unwrap())
                .unwrap();
            slabs
                .push(Halfspace::new(unit(d, k, -1.0), -bb.lo().coords()[k]).unwrap())
                .unwrap();
        }
        match (prims.region)(&p, &slabs, REGION_TOL, REGION_SWEEPS) {
            Ok(y) => dyk = dyk.max(y.dist(&(prims.boxed)(&p, &bb))),
            Err(_) => dyk = f64::INFINITY,
        }
    }

    let mut out = hs.outcomes("halfspace projection", trials);
    out.extend(bl.outcomes("ball projection", trials));
    out.extend(bx.outcomes("box projection", trials));
    out.extend(rg.outcomes("region projection", trials));
    out.push(CheckOutcome::new(
        "region projection: convergence failures",
        region_errors as f64,
        0.0,
        format!("{trials} trials"),
    ));
    out.push(CheckOutcome::new(
        "dykstra on slabs vs closed-form box",
        dyk,
        DYKSTRA_BOX_SLACK,
        format!("{trials} trials"),
    ));
    out
}

fn unit(d: usize, k: usize, s: f64) -> Point {
    let mut v = vec![0.0; d];
    v[k] = s;
    Point::from_vec(v)
}

/// Largest `lemma(T) - theorem(T)` over `T = 1..=horizon` for the two
/// matching schedule and curvature pairs.
pub fn bound_dominance(horizon: usize) -> Vec<CheckOutcome> {
    let mut convex = f64::NEG_INFINITY;
    let mut strong = f64::NEG_INFINITY;
    for &(d, g, mu) in &[
        (1.0, 1.0, 1.0),
        (2.0 * 2f64.sqrt(), 3.0, 0.5),
        (0.3, 7.0, 4.0),
    ] {
        let sq = StepSchedule::SqrtDecay {
            diameter: d,
            lipschitz: g,
        };
        let sc = StepSchedule::StronglyConvex { mu };
        let curv = vec![mu; horizon];
        for t in 1..=horizon {
            let lc = regret_bound_lemma(&sq, d, g, &[], t).unwrap_or(f64::NAN);
            let tc = regret_bound_theorem(Regime::Convex, d, g, 0.0, t as f64).unwrap_or(f64::NAN);
            convex = convex.max(lc - tc);
            let ls = regret_bound_lemma(&sc, d, g, &curv, t).unwrap_or(f64::NAN);
            let ts = regret_bound_theorem(Regime::StronglyConvex, d, g, mu, t as f64)
                .unwrap_or(f64::NAN);
            strong = strong.max(ls - ts);
        }
    }
    let detail = format!("T = 1..={horizon}");
    vec![
        CheckOutcome::new(
            "lemma bound <= theorem bound (convex)",
            convex,
            1e-9,
            detail.clone(),
        ),
        CheckOutcome::new(
            "lemma bound <= theorem bound (strongly convex)",
            strong,
            1e-9,
            detail,
        ),
    ]
}

fn contraction_examples() -> Vec<CheckOutcome> {
    let pts = |v: &[f64]| {
        v.iter()
            .map(|&x| Point::from_vec(vec![x]))
            .collect::<Vec<_>>()
    };
    let bent = check_self_contracted_points(&pts(&[0.0, -1.0, 1.0]), TripleBudget::Exhaustive);
    let mono = check_self_contracted_points(&pts(&[0.0, 1.0, 1.5]), TripleBudget::Exhaustive);
    vec![
        CheckOutcome::new(
            "self-contraction detects a reversal",
            (bent.max_violation - 1.0).abs(),
            1e-12,
            "points 0, -1, 1",
        ),
        CheckOutcome::new(
            "monotone points are self-contracted",
            mono.max_violation,
            0.0,
            "points 0, 1, 1.5",
        ),
    ]
}

/// The four family combinations, each under its matching schedule.
pub fn suite_families() -> Vec<(FamilySpec, bool)> {
    let mut out = Vec::new();
    for strongly in [false, true] {
        for mixed in [false, true] {
            let losses = if strongly {
                LossFamily::DriftingQuadratic {
                    mu: 1.0,
                    drift: 0.05,
                }
            } else {
                LossFamily::RotatingLinear {
                    angle: 0.05,
                    exponent: 1.0,
                }
            };
            let constraints = if mixed {
                ConstraintFamily::MixedQuasiball {
                    pool: 16,
                    margin: 0.1,
                    reveal: Default::default(),
                    depth: Default::default(),
                }
            } else {
                ConstraintFamily::ShrinkingHalfspaces {
                    pool: 16,
                    margin: 0.1,
                    reveal: Default::default(),
                    depth: Default::default(),
                }
            };
            out.push((
                FamilySpec {
                    half_width: 1.0,
                    losses,
                    constraints,
                },
                strongly,
            ));
        }
    }
    out
}

pub fn matching_schedule(inst: &Instance, strongly: bool) -> StepSchedule {
    if strongly {
        StepSchedule::StronglyConvex {
            mu: inst.curvatures().into_iter().fold(f64::INFINITY, f64::min),
        }
    } else {
        StepSchedule::SqrtDecay {
            diameter: inst.diameter(),
            lipschitz: inst.lipschitz(),
        }
    }
}

/// Every constraint replaced by the ball-distance (or quasi-ball) function
/// with the same center and radius.
pub fn with_ball_kind(inst: &Instance, quasi: bool) -> Result<Instance> {
    let cons = inst
        .constraints()
        .iter()
        .map(|g| match g {
            ConstraintFn::BallDistance { center, radius }
            | ConstraintFn::QuasiBall { center, radius } => {
                if quasi {
                    ConstraintFn::QuasiBall {
                        center: center.clone(),
                        radius: *radius,
                    }
                } else {
                    ConstraintFn::BallDistance {
                        center: center.clone(),
                        radius: *radius,
                    }
                }
            }
            other => other.clone(),
        })
        .collect();
    inst.with_functions(inst.losses().to_vec(), cons)
}

/// Largest coordinate difference between the iterates of two traces;
/// infinite when the lengths differ.
pub fn max_iterate_gap(a: &RunTrace, b: &RunTrace) -> f64 {
    let (xa, xb) = (a.iterates(), b.iterates());
    if xa.len() != xb.len() {
        return f64::INFINITY;
    }
    xa.iter()
        .zip(&xb)
        .flat_map(|(p, q)| {
            p.coords()
                .iter()
                .zip(q.coords())
                .map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

struct RunMax {
    ccv_chain: f64,
    round_violation: f64,
    lemma: f64,
    theorem: f64,
    lift_sc: f64,
    approx: f64,
    tail: f64,
    lift_step: f64,
    lag: f64,
    oracle_feasible: f64,
    oracle_anchor: f64,
    oracle_samples: f64,
    oracle_stationarity: f64,
    quasi: f64,
    determinism: f64,
    errors: Vec<String>,
}

fn run_invariants(horizon: usize, seeds: u64, prims: &Primitives) -> Vec<CheckOutcome> {
    let neg = f64::NEG_INFINITY;
    let mut m = RunMax {
        ccv_chain: neg,
        round_violation: neg,
        lemma: neg,
        theorem: neg,
        lift_sc: neg,
        approx: neg,
        tail: neg,
        lift_step: neg,
        lag: neg,
        oracle_feasible: neg,
        oracle_anchor: neg,
        oracle_samples: neg,
        oracle_stationarity: neg,
        quasi: 0.0,
        determinism: 0.0,
        errors: Vec::new(),
    };
    let opts = ProjectionOptions::default();
    let mut runs = 0;
    for (family, strongly) in suite_families() {
        for d in [2, 3] {
            for seed in 0..seeds {
                let spec = GeneratorSpec {
                    dimension: d,
                    horizon,
                    seed: SUITE_SEED ^ (seed << 8) ^ d as u64,
                    family: family.clone(),
                };
                if let Err(e) = one_run(&spec, strongly, &opts, prims, &mut m) {
                    m.errors.push(format!("{}: {e}", spec.seed));
                }
                runs += 1;
            }
        }
    }
    let detail = format!("{runs} runs of T = {horizon}");
    let c = |name: &str, w: f64, t: f64| CheckOutcome::new(name, w, t, detail.clone());
    vec![
        CheckOutcome::new(
            "runs complete",
            m.errors.len() as f64,
            0.0,
            m.errors.join("; "),
        ),
        c("ccv <= G * movement", m.ccv_chain, 1e-6),
        c("round violation <= G * move", m.round_violation, 1e-8),
        c("regret <= lemma bound", m.lemma, 10.0 * DEFAULT_ORACLE_TOL),
        c(
            "regret <= theorem bound",
            m.theorem,
            10.0 * DEFAULT_ORACLE_TOL,
        ),
        c(
            "lifted curve self-contracted (relative to D)",
            m.lift_sc,
            1e-8,
        ),
        c(
            "approximate contraction residual (relative to D)",
            m.approx,
            1e-8,
        ),
        c("lift tail is the suffix sum of perturbations", m.tail, 1e-9),
        c("lifted step dominates base step", m.lift_step, 1e-12),
        c("iterate x_(t+1) lies in S_t", m.lag, 1e-9),
        c("oracle point feasible", m.oracle_feasible, 1e-8),
        c(
            "oracle value <= loss at anchor",
            m.oracle_anchor,
            DEFAULT_ORACLE_TOL,
        ),
        c(
            "oracle value <= loss at feasible samples",
            m.oracle_samples,
            DEFAULT_ORACLE_TOL,
        ),
        c(
            "oracle stationarity",
            m.oracle_stationarity,
            DEFAULT_ORACLE_TOL,
        ),
        c(
            "ball-distance and quasi-ball iterates agree",
            m.quasi,
            1e-12,
        ),
        c("repeated run is bitwise identical", m.determinism, 0.0),
    ]
}

fn one_run(
    spec: &GeneratorSpec,
    strongly: bool,
    opts: &ProjectionOptions,
    prims: &Primitives,
    m: &mut RunMax,
) -> Result<()> {
    let inst = gen_instance(spec)?;
    let schedule = matching_schedule(&inst, strongly);
    let trace = run(&inst, &schedule, &StartPoint::Corner, opts)?;
    let oracle = offline_optimum(&inst, DEFAULT_ORACLE_TOL, 100_000)?;
    let metrics = compute_metrics(
        &inst,
        &trace,
        &schedule,
        oracle.value,
        TripleBudget::Exhaustive,
    )?;
    let g = inst.lipschitz();
    let d = inst.diameter();

    m.ccv_chain = m.ccv_chain.max(metrics.ccv - metrics.ccv_bound_form);
    for r in &trace.records {
        m.round_violation = m.round_violation.max(r.violation - g * r.movement);
    }
    m.lemma = m.lemma.max(metrics.regret - metrics.regret_bound_lemma);
    m.theorem = m.theorem.max(metrics.regret - metrics.regret_bound_theorem);
    m.approx = m.approx.max(metrics.approx_contraction_residual / d);

    let lifted = (prims.lift)(&trace);
    let sc = check_self_contracted(&lifted, CurveNorm::Oplus, TripleBudget::Exhaustive);
    m.lift_sc = m.lift_sc.max(sc.max_violation / d);
    let total: f64 = trace.e_norms().iter().sum();
    let mut tail = if lifted.len() == trace.horizon() + 1 {
        0.0
    } else {
        f64::INFINITY
    };
    if let (Some(first), Some(last)) = (lifted.first(), lifted.last()) {
        tail = tail.max((first.tail - total).abs()).max(last.tail.abs());
    }
    for (w, r) in lifted.windows(2).zip(&trace.records) {
        // each step of the tail drops by exactly that round's perturbation
        tail = tail.max((w[0].tail - w[1].tail - r.e_norm).abs());
        m.lift_step = m
            .lift_step
            .max(w[1].base.dist(&w[0].base) - w[1].oplus_dist(&w[0]));
    }
    m.tail = m.tail.max(tail / (1.0 + total));

    let mut region = FeasibleRegion::new(inst.base().body());
    for (t, gt) in inst.constraints().iter().enumerate() {
        region.push(gt.sublevel_body()?)?;
        let next = trace.iterates()[t + 1].clone();
        m.lag = m.lag.max(region.residual(&next));
    }

    let fin = inst.final_region()?;
    m.oracle_feasible = m.oracle_feasible.max(fin.residual(&oracle.x_star));
    m.oracle_anchor = m
        .oracle_anchor
        .max(oracle.value - total_loss(&inst, inst.anchor()));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sampled = 0;
    for _ in 0..20_000 {
        if sampled == 200 {
            break;
        }
        let z = inst.base().sample(&mut rng);
        if fin.contains(&z, 0.0) {
            m.oracle_samples = m.oracle_samples.max(oracle.value - total_loss(&inst, &z));
            sampled += 1;
        }
    }
    m.oracle_stationarity = m.oracle_stationarity.max(oracle.stationarity_residual);

    if matches!(
        spec.family.constraints,
        ConstraintFamily::MixedQuasiball { .. }
    ) {
        let balls = run(
            &with_ball_kind(&inst, false)?,
            &schedule,
            &StartPoint::Corner,
            opts,
        )?;
        let quasi = run(
            &with_ball_kind(&inst, true)?,
            &schedule,
            &StartPoint::Corner,
            opts,
        )?;
        m.quasi = m.quasi.max(max_iterate_gap(&balls, &quasi));
    }
    let again = run(&inst, &schedule, &StartPoint::Corner, opts)?;
    if again != trace {
        m.determinism = 1.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_primitives_pass_small_property_run() {
        let out = projection_properties(300, 1, &Primitives::default());
        for c in &out {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn flipped_halfspace_projection_is_caught() {
        fn flipped(p: &Point, h: &Halfspace) -> Point {
            let a = h.normal();
            let v = (p.dot(a) - h.offset()).max(0.0) / a.dot(a);
            p.axpy(v, a)
        }
        let prims = Primitives {
            halfspace: flipped,
            ..Primitives::default()
        };
        let out = projection_properties(300, 2, &prims);
        let vi = out
            .iter()
            .find(|c| c.name == "halfspace projection: variational inequality")
            .unwrap();
        assert!(!vi.passed && vi.witness > 0.0, "{vi}");
    }

    #[test]
    fn bounds_dominate_on_short_range() {
        for c in bound_dominance(200) {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn display_marks_failures() {
        let c = CheckOutcome::new("x", 2.0, 1.0, "");
        assert!(c.to_string().starts_with("FAIL x"));
        let nan = CheckOutcome::new("y", f64::NAN, 1.0, "");
        assert!(!nan.passed);
    }
}
