use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use npogd::harness::{verify_suite, verify_suite_with, Level, Primitives};
use npogd::problem::{lipschitz_excess_constraint, lipschitz_excess_loss};
use npogd::{
    check_self_contracted_points, gen_instance, project_ball, project_box, project_halfspace,
    project_region, regret_bound_lemma, regret_bound_theorem, run, Ball, BoxSet, ConvexBody,
    FeasibleRegion, GeneratorSpec, Halfspace, Instance, LiftedPoint, Point, ProjectionOptions,
    Regime, RunTrace, StartPoint, StepSchedule, TripleBudget,
};

const TOL: f64 = 1e-9;

fn pt(v: Vec<f64>) -> Point {
    Point::new(v).unwrap()
}

fn coords(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

fn halfspace() -> impl Strategy<Value = Halfspace> {
    (coords(3), -1.0..1.0f64)
        .prop_filter("normal too short", |(n, _)| {
            n.iter().map(|v| v * v).sum::<f64>() > 1e-2
        })
        .prop_map(|(n, b)| Halfspace::new(pt(n), b).unwrap())
}

fn ball() -> impl Strategy<Value = Ball> {
    (coords(3), 0.1..2.0f64).prop_map(|(c, r)| Ball::new(pt(c), r).unwrap())
}

fn boxed() -> impl Strategy<Value = BoxSet> {
    (coords(3), prop::collection::vec(0.05..2.0f64, 3)).prop_map(|(lo, w)| {
        let hi: Vec<f64> = lo.iter().zip(&w).map(|(l, w)| l + w).collect();
        BoxSet::new(pt(lo), pt(hi)).unwrap()
    })
}

/// The three projection properties of one body at `p`, `q`, with `z` a
/// member of the body: variational inequality, Pythagorean inequality and
/// non-expansiveness. Returns the worst residual.
fn projection_residuals(proj: impl Fn(&Point) -> Point, p: &Point, q: &Point, z: &Point) -> f64 {
    let pp = proj(p);
    let pq = proj(q);
    let vi = p.sub(&pp).dot(&z.sub(&pp));
    let pyth = z.dist(&pp).powi(2) + pp.dist(p).powi(2) - z.dist(p).powi(2);
    let nonexp = pp.dist(&pq) - p.dist(q);
    vi.max(pyth).max(nonexp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn halfspace_projection_properties(h in halfspace(), p in coords(3), q in coords(3), w in coords(3)) {
        let (p, q) = (pt(p), pt(q));
        let z = project_halfspace(&pt(w), &h);
        let r = projection_residuals(|x| project_halfspace(x, &h), &p, &q, &z);
        prop_assert!(r <= TOL, "residual {r}");
        let body = ConvexBody::from(h.clone());
        let once = project_halfspace(&p, &h);
        prop_assert!(body.residual(&once) <= TOL);
        prop_assert!(project_halfspace(&once, &h).dist(&once) <= TOL);
    }

    #[test]
    fn ball_projection_properties(b in ball(), p in coords(3), q in coords(3), w in coords(3)) {
        let (p, q) = (pt(p), pt(q));
        let z = project_ball(&pt(w), &b);
        let r = projection_residuals(|x| project_ball(x, &b), &p, &q, &z);
        prop_assert!(r <= TOL, "residual {r}");
        let once = project_ball(&p, &b);
        prop_assert!(once.dist(b.center()) <= b.radius() + TOL);
        prop_assert!(project_ball(&once, &b).dist(&once) <= TOL);
    }

    #[test]
    fn box_projection_properties(b in boxed(), p in coords(3), q in coords(3), w in coords(3)) {
        let (p, q) = (pt(p), pt(q));
        let z = project_box(&pt(w), &b);
        let r = projection_residuals(|x| project_box(x, &b), &p, &q, &z);
        prop_assert!(r <= TOL, "residual {r}");
        let once = project_box(&p, &b);
        prop_assert_eq!(project_box(&once, &b), once);
    }

    #[test]
    fn region_projection_is_a_feasible_stationary_point(
        h in halfspace(),
        p in coords(3),
        w in coords(3),
    ) {
        // every body contains the origin, so the region is nonempty
        let mut region = FeasibleRegion::new(BoxSet::cube(3, 1.0).unwrap());
        region.push(Halfspace::new(h.normal().clone(), h.offset().abs()).unwrap()).unwrap();
        region.push(Ball::new(pt(vec![0.3, -0.2, 0.1]), 1.0).unwrap()).unwrap();
        let p = pt(p);
        let x = project_region(&p, &region, 1e-11, 100_000).unwrap();
        prop_assert!(region.residual(&x) <= 1e-9);
        // any member of the region is no closer to p
        let z = project_region(&pt(w), &region, 1e-11, 100_000).unwrap();
        prop_assert!(p.sub(&x).dot(&z.sub(&x)) <= 1e-7);
        let again = project_region(&x, &region, 1e-11, 100_000).unwrap();
        prop_assert!(again.dist(&x) <= 1e-9);
    }

    #[test]
    fn oplus_distance_is_a_metric(
        a in (coords(2), -2.0..2.0f64),
        b in (coords(2), -2.0..2.0f64),
        c in (coords(2), -2.0..2.0f64),
    ) {
        let lp = |(v, t): (Vec<f64>, f64)| LiftedPoint { base: pt(v), tail: t };
        let (a, b, c) = (lp(a), lp(b), lp(c));
        prop_assert_eq!(a.oplus_dist(&a), 0.0);
        prop_assert_eq!(a.oplus_dist(&b), b.oplus_dist(&a));
        prop_assert!(a.oplus_dist(&c) <= a.oplus_dist(&b) + b.oplus_dist(&c) + 1e-12);
        prop_assert!(a.oplus_dist(&b) >= a.euclidean_dist(&b) - 1e-12);
        if a.base != b.base || a.tail != b.tail {
            prop_assert!(a.oplus_dist(&b) > 0.0);
        }
    }

    #[test]
    fn step_bound_never_exceeds_closed_form(
        d in 0.1..10.0f64,
        g in 0.1..10.0f64,
        mu in 0.1..5.0f64,
        t in 1usize..3000,
    ) {
        let sqrt = StepSchedule::SqrtDecay { diameter: d, lipschitz: g };
        let lemma = regret_bound_lemma(&sqrt, d, g, &[], t).unwrap();
        let theorem = regret_bound_theorem(Regime::Convex, d, g, 0.0, t as f64).unwrap();
        prop_assert!(lemma <= theorem * (1.0 + 1e-12));

        let sc = StepSchedule::StronglyConvex { mu };
        let lemma = regret_bound_lemma(&sc, d, g, &vec![mu; t], t).unwrap();
        let theorem = regret_bound_theorem(Regime::StronglyConvex, d, g, mu, t as f64).unwrap();
        prop_assert!(lemma <= theorem * (1.0 + 1e-12));
    }
}

fn family() -> impl Strategy<Value = (&'static str, &'static str)> {
    (
        prop_oneof![
            Just(r#"{"kind": "rotating-linear"}"#),
            Just(r#"{"kind": "drifting-quadratic", "drift": 0.2}"#),
        ],
        prop_oneof![
            Just(r#"{"kind": "shrinking-halfspaces", "pool": 6}"#),
            Just(r#"{"kind": "mixed-quasiball", "pool": 6}"#),
            Just(
                r#"{"kind": "shrinking-halfspaces", "pool": 6,
                    "reveal": {"kind": "geometric", "ratio": 1.5},
                    "depth": {"kind": "relative", "step": 0.1}}"#
            ),
        ],
    )
}

fn instance(d: usize, t: usize, seed: u64, losses: &str, constraints: &str) -> Instance {
    let spec: GeneratorSpec = serde_json::from_str(&format!(
        r#"{{"dimension": {d}, "horizon": {t}, "seed": {seed},
            "losses": {losses}, "constraints": {constraints}}}"#
    ))
    .unwrap();
    gen_instance(&spec).unwrap()
}

fn sqrt_run(inst: &Instance) -> RunTrace {
    let s = StepSchedule::SqrtDecay {
        diameter: inst.diameter(),
        lipschitz: inst.lipschitz(),
    };
    run(inst, &s, &StartPoint::Corner, &ProjectionOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn declared_lipschitz_constant_holds(
        (losses, constraints) in family(),
        d in 1usize..4,
        seed in any::<u64>(),
    ) {
        let inst = instance(d, 24, seed, losses, constraints);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = inst.lipschitz();
        for f in inst.losses() {
            prop_assert!(lipschitz_excess_loss(f, inst.base(), 20, &mut rng) <= 1e-9);
            prop_assert!(f.lipschitz_on(inst.base()) <= g);
        }
        for c in inst.constraints() {
            prop_assert!(lipschitz_excess_constraint(c, inst.base(), 20, &mut rng) <= 1e-9);
            prop_assert!(c.lipschitz_on(inst.base()) <= g);
        }
    }

    #[test]
    fn runs_are_causal_and_lag_one_round(
        (losses, constraints) in family(),
        d in 1usize..4,
        cut in 1usize..40,
        seed in any::<u64>(),
    ) {
        let inst = instance(d, 40, seed, losses, constraints);
        let full = sqrt_run(&inst);
        let short = sqrt_run(&inst.truncated(cut).unwrap());
        // the first `cut` actions do not depend on later rounds
        for (a, b) in full.records.iter().zip(&short.records) {
            prop_assert_eq!(&a.x, &b.x);
        }
        let mut region = FeasibleRegion::new(inst.base().body());
        for (rec, g) in full.records.iter().zip(inst.constraints()) {
            // x_t was chosen inside S_{t-1}
            prop_assert!(region.residual(&rec.x) <= 1e-8);
            prop_assert_eq!(rec.violation, g.eval(&rec.x).max(0.0));
            region.push(g.sublevel_body().unwrap()).unwrap();
        }
        prop_assert!(region.residual(&full.x_final) <= 1e-8);
    }

    #[test]
    fn zero_steps_give_a_self_contracted_curve(
        (losses, constraints) in family(),
        d in 1usize..4,
        seed in any::<u64>(),
    ) {
        let inst = instance(d, 30, seed, losses, constraints);
        let s = StepSchedule::Constant { eta: 0.0 };
        let tr = run(&inst, &s, &StartPoint::Corner, &ProjectionOptions::default()).unwrap();
        prop_assert!(tr.e_norms().iter().all(|&e| e == 0.0));
        let rep = check_self_contracted_points(&tr.iterates(), TripleBudget::Exhaustive);
        prop_assert!(rep.max_violation <= 1e-9, "violation {}", rep.max_violation);
    }
}

fn prefix_lift(trace: &RunTrace) -> Vec<LiftedPoint> {
    let mut acc = 0.0;
    let mut out = vec![];
    for (x, e) in trace
        .iterates()
        .into_iter()
        .zip(std::iter::once(0.0).chain(trace.e_norms()))
    {
        acc += e;
        out.push(LiftedPoint { base: x, tail: acc });
    }
    out
}

#[test]
fn prefix_sum_lift_is_rejected() {
    let prims = Primitives {
        lift: prefix_lift,
        ..Primitives::default()
    };
    let report = verify_suite_with(Level::Fast, &prims);
    let check = report
        .find("lift tail is the suffix sum of perturbations")
        .unwrap();
    assert!(!check.passed, "{check}");
}

#[test]
fn sign_flipped_ball_projection_is_rejected() {
    fn flipped(p: &Point, b: &Ball) -> Point {
        let q = project_ball(p, b);
        b.center().scale(2.0).sub(&q)
    }
    let prims = Primitives {
        ball: flipped,
        ..Primitives::default()
    };
    let report = verify_suite_with(Level::Fast, &prims);
    assert!(!report.passed());
    assert!(report.failures().any(|c| c.name.contains("ball")));
}

#[test]
fn real_primitives_pass_the_fast_suite() {
    let report = verify_suite(Level::Fast);
    assert!(report.passed(), "{report}");
}
