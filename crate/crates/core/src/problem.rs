//! Loss and constraint families, instances, and the adversarial generators.
//!
//! Every generated instance carries an anchor point that satisfies all of
//! its constraints with a declared margin, so the final feasible region is
//! never empty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    dist, project_region, Ball, BoxSet, ConvexBody, FeasibleRegion, Halfspace, Point,
};

/// Lipschitz constants of the quasi-ball constraint are taken on the base set
/// with a ball of this radius around the center removed.
pub const QUASI_BALL_EXCLUSION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePiece {
    pub slope: Point,
    pub intercept: f64,
}

/// A convex per-round loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossFn {
    /// `f(x) = slope · x`
    Linear { slope: Point },
    /// `f(x) = (mu / 2) ||x - center||^2`
    Quadratic { mu: f64, center: Point },
    /// `f(x) = max_i (slope_i · x + intercept_i)`
    MaxAffine { pieces: Vec<AffinePiece> },
}

impl LossFn {
    pub fn dim(&self) -> usize {
        match self {
            LossFn::Linear { slope } => slope.dim(),
            LossFn::Quadratic { center, .. } => center.dim(),
            LossFn::MaxAffine { pieces } => pieces.first().map_or(0, |p| p.slope.dim()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LossFn::Quadratic { mu, .. } if !(*mu > 0.0 && mu.is_finite()) => Err(
                Error::InvalidInstance(format!("quadratic loss needs mu > 0, got {mu}")),
            ),
            LossFn::MaxAffine { pieces } if pieces.is_empty() => Err(Error::InvalidInstance(
                "max-affine loss needs at least one piece".into(),
            )),
            LossFn::MaxAffine { pieces } => {
                let d = pieces[0].slope.dim();
                if pieces
                    .iter()
                    .any(|p| p.slope.dim() != d || !p.intercept.is_finite())
                {
                    return Err(Error::InvalidInstance(
                        "max-affine pieces disagree in dimension or are not finite".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            LossFn::Linear { slope } => slope.dot(x),
            LossFn::Quadratic { mu, center } => {
                let sq: f64 = x
                    .coords()
                    .iter()
                    .zip(center.coords())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                0.5 * mu * sq
            }
            LossFn::MaxAffine { pieces } => pieces
                .iter()
                .map(|p| p.slope.dot(x) + p.intercept)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// A subgradient at `x`. Max-affine ties go to the lowest index.
    pub fn subgrad(&self, x: &Point) -> Point {
        match self {
            LossFn::Linear { slope } => slope.clone(),
            LossFn::Quadratic { mu, center } => x.sub(center).scale(*mu),
            LossFn::MaxAffine { pieces } => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (i, p) in pieces.iter().enumerate() {
                    let v = p.slope.dot(x) + p.intercept;
                    if v > best_val {
                        best = i;
                        best_val = v;
                    }
                }
                pieces[best].slope.clone()
            }
        }
    }

    /// One-sided directional derivative `f'(x; u)`. Pieces within
    /// `active_tol` of the max count as active.
    pub fn directional_derivative(&self, x: &Point, u: &Point, active_tol: f64) -> f64 {
        match self {
            LossFn::MaxAffine { pieces } => {
                let fx = self.eval(x);
                pieces
                    .iter()
                    .filter(|p| p.slope.dot(x) + p.intercept >= fx - active_tol)
                    .map(|p| p.slope.dot(u))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            _ => self.subgrad(x).dot(u),
        }
    }

    /// Strong-convexity modulus on the whole space.
    pub fn curvature(&self) -> f64 {
        match self {
            LossFn::Quadratic { mu, .. } => *mu,
            _ => 0.0,
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, LossFn::MaxAffine { pieces } if pieces.len() > 1)
    }

    /// A Lipschitz constant valid on `base`.
    pub fn lipschitz_on(&self, base: &BaseSet) -> f64 {
        match self {
            LossFn::Linear { slope } => slope.norm(),
            LossFn::Quadratic { mu, center } => mu * base.max_dist_from(center),
            LossFn::MaxAffine { pieces } => {
                pieces.iter().map(|p| p.slope.norm()).fold(0.0, f64::max)
            }
        }
    }
}

pub fn eval_loss(f: &LossFn, x: &Point) -> f64 {
    f.eval(x)
}

pub fn subgrad(f: &LossFn, x: &Point) -> Point {
    f.subgrad(x)
}

/// A quasiconvex per-round constraint `g(x) <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintFn {
    /// `g(x) = normal · x - offset`
    Affine { normal: Point, offset: f64 },
    /// `g(x) = ||x - center|| - radius`
    BallDistance { center: Point, radius: f64 },
    /// `g(x) = sqrt(||x - center||) - sqrt(radius)`; same zero-sublevel set as
    /// the ball distance but not convex.
    QuasiBall { center: Point, radius: f64 },
}

impl ConstraintFn {
    pub fn dim(&self) -> usize {
        match self {
            ConstraintFn::Affine { normal, .. } => normal.dim(),
            ConstraintFn::BallDistance { center, .. } | ConstraintFn::QuasiBall { center, .. } => {
                center.dim()
            }
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            ConstraintFn::Affine { normal, offset } => normal.dot(x) - offset,
            ConstraintFn::BallDistance { center, radius } => x.dist(center) - radius,
            ConstraintFn::QuasiBall { center, radius } => x.dist(center).sqrt() - radius.sqrt(),
        }
    }

    /// The body `{x : g(x) <= 0}`.
    pub fn sublevel_body(&self) -> Result<ConvexBody> {
        Ok(match self {
            ConstraintFn::Affine { normal, offset } => {
                Halfspace::new(normal.clone(), *offset)?.into()
            }
            ConstraintFn::BallDistance { center, radius }
            | ConstraintFn::QuasiBall { center, radius } => {
                Ball::new(center.clone(), *radius)?.into()
            }
        })
    }

    /// A Lipschitz constant valid on `base`. For the quasi-ball this excludes
    /// a tiny ball around the center, where the square root is not Lipschitz.
    pub fn lipschitz_on(&self, base: &BaseSet) -> f64 {
        match self {
            ConstraintFn::Affine { normal, .. } => normal.norm(),
            ConstraintFn::BallDistance { .. } => 1.0,
            ConstraintFn::QuasiBall { center, .. } => {
                let rho = base.dist_to(center).max(QUASI_BALL_EXCLUSION);
                0.5 / rho.sqrt()
            }
        }
    }
}

pub fn eval_constraint(g: &ConstraintFn, x: &Point) -> f64 {
    g.eval(x)
}

pub fn sublevel_body(g: &ConstraintFn) -> Result<ConvexBody> {
    g.sublevel_body()
}

/// The decision set `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSet {
    Box(BoxSet),
    Ball(Ball),
}

impl BaseSet {
    pub fn dim(&self) -> usize {
        match self {
            BaseSet::Box(b) => b.dim(),
            BaseSet::Ball(b) => b.dim(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            BaseSet::Box(b) => b.diameter(),
            BaseSet::Ball(b) => b.diameter(),
        }
    }

    pub fn body(&self) -> ConvexBody {
        match self {
            BaseSet::Box(b) => b.clone().into(),
            BaseSet::Ball(b) => b.clone().into(),
        }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.body().residual(p) <= tol
    }

    /// `max_{x in X} ||x - z||`
    pub fn max_dist_from(&self, z: &Point) -> f64 {
        match self {
            BaseSet::Box(b) => b.farthest_vertex(z).dist(z),
            BaseSet::Ball(b) => b.center().dist(z) + b.radius(),
        }
    }

    /// `min_{x in X} ||x - z||`
    pub fn dist_to(&self, z: &Point) -> f64 {
        self.body().project(z).dist(z)
    }

    /// The point of `X` farthest from `p`.
    pub fn farthest_from(&self, p: &Point) -> Point {
        match self {
            BaseSet::Box(b) => b.farthest_vertex(p),
            BaseSet::Ball(b) => {
                let dir = b.center().sub(p);
                let n = dir.norm();
                if n == 0.0 {
                    let mut e = vec![0.0; p.dim()];
                    e[0] = b.radius();
                    b.center().add(&Point::from_vec(e))
                } else {
                    b.center().axpy(b.radius() / n, &dir)
                }
            }
        }
    }

    /// Axis-aligned bounding box as `(lo, hi)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            BaseSet::Box(b) => (b.lo().coords().to_vec(), b.hi().coords().to_vec()),
            BaseSet::Ball(b) => (
                b.center().coords().iter().map(|c| c - b.radius()).collect(),
                b.center().coords().iter().map(|c| c + b.radius()).collect(),
            ),
        }
    }

    /// Uniform sample from `X` (rejection from the bounding box for balls).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounds();
        loop {
            let p = Point::from_vec(
                lo.iter()
                    .zip(&hi)
                    .map(|(l, h)| if h > l { rng.random_range(*l..=*h) } else { *l })
                    .collect(),
            );
            if self.contains(&p, 0.0) {
                return p;
            }
        }
    }
}

/// A full problem instance: base set, per-round losses and constraints, and
/// a certified common feasible point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr")]
pub struct Instance {
    name: String,
    dimension: usize,
    base: BaseSet,
    horizon: usize,
    losses: Vec<LossFn>,
    constraints: Vec<ConstraintFn>,
    anchor: Point,
    diameter: f64,
    lipschitz: f64,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    name: String,
    dimension: usize,
    base: BaseSet,
    horizon: usize,
    losses: Vec<LossFn>,
    constraints: Vec<ConstraintFn>,
    anchor: Point,
    diameter: f64,
    lipschitz: f64,
    seed: u64,
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        let inst = Instance {
            name: r.name,
            dimension: r.dimension,
            base: r.base,
            horizon: r.horizon,
            losses: r.losses,
            constraints: r.constraints,
            anchor: r.anchor,
            diameter: r.diameter,
            lipschitz: r.lipschitz,
            seed: r.seed,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl Instance {
    /// Builds an instance, computing `D` and `G` from the functions and
    /// checking the anchor against every constraint.
    pub fn new(
        name: impl Into<String>,
        base: BaseSet,
        losses: Vec<LossFn>,
        constraints: Vec<ConstraintFn>,
        anchor: Point,
        seed: u64,
    ) -> Result<Self> {
        let lipschitz = losses
            .iter()
            .map(|f| f.lipschitz_on(&base))
            .chain(constraints.iter().map(|g| g.lipschitz_on(&base)))
            .fold(0.0, f64::max);
        let inst = Instance {
            name: name.into(),
            dimension: base.dim(),
            diameter: base.diameter(),
            horizon: losses.len(),
            base,
            losses,
            constraints,
            anchor,
            lipschitz,
            seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        let d = self.dimension;
        if self.base.dim() != d || self.anchor.dim() != d {
            return bad(format!("base set or anchor is not {d}-dimensional"));
        }
        if self.losses.len() != self.horizon || self.constraints.len() != self.horizon {
            return bad(format!(
                "horizon {} but {} losses and {} constraints",
                self.horizon,
                self.losses.len(),
                self.constraints.len()
            ));
        }
        for (t, f) in self.losses.iter().enumerate() {
            f.validate()?;
            if f.dim() != d {
                return bad(format!("loss {} has dimension {}", t + 1, f.dim()));
            }
        }
        for (t, g) in self.constraints.iter().enumerate() {
            if g.dim() != d {
                return bad(format!("constraint {} has dimension {}", t + 1, g.dim()));
            }
            g.sublevel_body()?;
            let v = g.eval(&self.anchor);
            if !(v <= 0.0) {
                return bad(format!("anchor violates constraint {} (g = {v:e})", t + 1));
            }
        }
        if !self.base.contains(&self.anchor, 1e-12) {
            return bad("anchor lies outside the base set".into());
        }
        let diam = self.base.diameter();
        if (self.diameter - diam).abs() > 1e-12 * (1.0 + diam) {
            return bad(format!(
                "declared D = {} but base diameter is {diam}",
                self.diameter
            ));
        }
        let needed = self
            .losses
            .iter()
            .map(|f| f.lipschitz_on(&self.base))
            .chain(self.constraints.iter().map(|g| g.lipschitz_on(&self.base)))
            .fold(0.0, f64::max);
        if self.lipschitz < needed * (1.0 - 1e-12) {
            return bad(format!(
                "declared G = {} below per-round maximum {needed}",
                self.lipschitz
            ));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn base(&self) -> &BaseSet {
        &self.base
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn losses(&self) -> &[LossFn] {
        &self.losses
    }

    pub fn constraints(&self) -> &[ConstraintFn] {
        &self.constraints
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    /// `D`, the diameter of the base set.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// `G`, the largest per-round Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-round strong-convexity moduli `H_t`.
    pub fn curvatures(&self) -> Vec<f64> {
        self.losses.iter().map(LossFn::curvature).collect()
    }

    /// The intersection of the base set with every revealed sublevel set.
    pub fn final_region(&self) -> Result<FeasibleRegion> {
        let mut region = FeasibleRegion::new(self.base.body());
        for g in &self.constraints {
            region.push(g.sublevel_body()?)?;
        }
        Ok(region)
    }

    /// The same instance with the first `horizon` rounds only.
    pub fn truncated(&self, horizon: usize) -> Result<Instance> {
        let h = horizon.min(self.horizon);
        let mut inst = self.clone();
        inst.losses.truncate(h);
        inst.constraints.truncate(h);
        inst.horizon = h;
        inst.validate()?;
        Ok(inst)
    }

    /// Replaces the per-round functions, recomputing `G`.
    pub fn with_functions(
        &self,
        losses: Vec<LossFn>,
        constraints: Vec<ConstraintFn>,
    ) -> Result<Instance> {
        Instance::new(
            self.name.clone(),
            self.base.clone(),
            losses,
            constraints,
            self.anchor.clone(),
            self.seed,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Instance> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Loss sequence family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossFamily {
    /// Unit-norm linear losses in the plane of the first two coordinates
    /// whose direction at round `t` makes angle `theta0 + angle t^exponent`.
    /// With `exponent` 1/2 the turning slows at the pace of a sqrt-decay
    /// step, so a learner on the boundary keeps up without leaving it.
    RotatingLinear {
        #[serde(default = "default_angle")]
        angle: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
    /// `mu`-strongly convex quadratics whose centers follow a Gaussian random
    /// walk (step std `drift`) clamped to the base set.
    DriftingQuadratic {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_drift")]
        drift: f64,
    },
}

fn default_angle() -> f64 {
    0.05
}
fn default_exponent() -> f64 {
    1.0
}
fn default_mu() -> f64 {
    1.0
}
fn default_drift() -> f64 {
    0.05
}
fn default_pool() -> usize {
    32
}
fn default_margin() -> f64 {
    0.1
}
fn default_half_width() -> f64 {
    1.0
}

/// When each pool body is first sent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RevealSchedule {
    /// Body `j` first appears at round `1 + floor(j T / k)`.
    #[default]
    Uniform,
    /// Body `j` first appears at round `1 + floor(scale j^2)`, independent of
    /// the horizon.
    Quadratic { scale: f64 },
    /// Body `j` first appears at round `ceil(ratio^j)` (kept strictly
    /// increasing), independent of the horizon.
    Geometric { ratio: f64 },
}

impl RevealSchedule {
    /// First-appearance rounds (1-based) of the `pool` bodies.
    pub fn rounds(&self, pool: usize, horizon: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(pool);
        for j in 0..pool {
            let t = match self {
                RevealSchedule::Uniform => 1 + (j * horizon) / pool.max(1),
                RevealSchedule::Quadratic { scale } => {
                    if !(*scale > 0.0) {
                        return Err(Error::Generation(format!(
                            "quadratic reveal scale must be positive, got {scale}"
                        )));
                    }
                    1 + (scale * (j * j) as f64).floor() as usize
                }
                RevealSchedule::Geometric { ratio } => {
                    if !(*ratio > 1.0) {
                        return Err(Error::Generation(format!(
                            "geometric reveal ratio must exceed 1, got {ratio}"
                        )));
                    }
                    let t = ratio.powi(j as i32).ceil();
                    if t > usize::MAX as f64 / 2.0 {
                        usize::MAX / 2
                    } else {
                        t as usize
                    }
                }
            };
            let t = match out.last() {
                Some(&prev) if t <= prev => prev + 1,
                _ => t,
            };
            out.push(t.max(1));
        }
        Ok(out)
    }
}

/// How deep pool body `j` sits below the anchor along its normal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DepthProfile {
    /// Evenly spaced from `h/2` down to the margin.
    #[default]
    Linear,
    /// `step` below where the region cut so far ends along the body's normal,
    /// never shallower than the margin. The end is read off the projection
    /// of the point two diameters out from the anchor. Normals are snapped to the
    /// nearest direction of `{-1, 0, 1}^d`, so distinct faces never meet at
    /// a small angle.
    Relative { step: f64 },
}

/// Constraint sequence family. Both draw from a pool of `pool` bodies that
/// contain the anchor with residual at most `-margin` and tighten toward it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintFamily {
    /// Affine constraints with unit normals.
    ShrinkingHalfspaces {
        #[serde(default = "default_pool")]
        pool: usize,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        reveal: RevealSchedule,
        #[serde(default)]
        depth: DepthProfile,
    },
    /// Alternating ball-distance and quasi-ball constraints whose centers lie
    /// far outside the base set.
    MixedQuasiball {
        #[serde(default = "default_pool")]
        pool: usize,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        reveal: RevealSchedule,
        #[serde(default)]
        depth: DepthProfile,
    },
}

impl ConstraintFamily {
    fn parts(&self) -> (usize, f64, &RevealSchedule, &DepthProfile) {
        match self {
            ConstraintFamily::ShrinkingHalfspaces {
                pool,
                margin,
                reveal,
                depth,
            }
            | ConstraintFamily::MixedQuasiball {
                pool,
                margin,
                reveal,
                depth,
            } => (*pool, *margin, reveal, depth),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            ConstraintFamily::ShrinkingHalfspaces { .. } => "shrinking-halfspaces",
            ConstraintFamily::MixedQuasiball { .. } => "mixed-quasiball",
        }
    }
}

impl LossFamily {
    fn label(&self) -> &'static str {
        match self {
            LossFamily::RotatingLinear { .. } => "rotating-linear",
            LossFamily::DriftingQuadratic { .. } => "drifting-quadratic",
        }
    }
}

/// The families and their parameters, without dimension, horizon or seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// The base set is the cube `[-half_width, half_width]^d`.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    pub losses: LossFamily,
    pub constraints: ConstraintFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub dimension: usize,
    pub horizon: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub family: FamilySpec,
}

/// Generates an instance. Deterministic in `spec`.
///
/// The base set is a cube and the anchor is drawn from its central half.
/// Pool body `j` has a unit normal `n_j` and sits at a depth from the anchor
/// along `n_j` set by the [`DepthProfile`]. `n_j` points where the loss
/// sequence is pushing the learner at the body's reveal round: against the
/// current slope for rotating-linear losses, toward the running mean of
/// the centers for drifting quadratics, whose walk starts at the vertex
/// farthest from the anchor. Between reveals the most recent body is
/// re-sent.
pub fn gen_instance(spec: &GeneratorSpec) -> Result<Instance> {
    let d = spec.dimension;
    let h = spec.family.half_width;
    if d == 0 {
        return Err(Error::Generation("dimension must be at least 1".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Generation(format!(
            "half_width must be positive, got {h}"
        )));
    }
    let (pool, margin, reveal, profile) = spec.family.constraints.parts();
    if pool == 0 {
        return Err(Error::Generation("constraint pool must be nonempty".into()));
    }
    if !(margin > 0.0) {
        return Err(Error::Generation(format!(
            "margin must be positive, got {margin}"
        )));
    }
    // the anchor sits in [-h/2, h/2]^d, so depth h/2 stays inside X
    let r_max = 0.5 * h;
    if margin >= r_max {
        return Err(Error::Generation(format!(
            "no anchor can keep margin {margin} inside a cube of half-width {h}"
        )));
    }
    if let DepthProfile::Relative { step } = profile {
        if !(*step > 0.0 && step.is_finite()) {
            return Err(Error::Generation(format!(
                "depth step must be positive, got {step}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = BaseSet::Box(BoxSet::cube(d, h)?);
    let anchor = Point::from_vec(
        (0..d)
            .map(|_| rng.random_range(-0.5 * h..=0.5 * h))
            .collect(),
    );

    let reveal_rounds = reveal.rounds(pool, spec.horizon)?;
    // push directions are needed up to the last reveal that falls inside the horizon
    let needed = reveal_rounds
        .iter()
        .copied()
        .filter(|&t| t <= spec.horizon)
        .max()
        .unwrap_or(0);

    let (losses, push): (Vec<LossFn>, Vec<Point>) = match &spec.family.losses {
        LossFamily::RotatingLinear { angle, exponent } => {
            if !(*exponent > 0.0 && exponent.is_finite()) {
                return Err(Error::Generation(format!(
                    "rotation exponent must be positive, got {exponent}"
                )));
            }
            let theta0 = rng.random_range(0.0..std::f64::consts::TAU);
            let slope_at = |t: usize| -> Point {
                let th = theta0 + angle * (t as f64).powf(*exponent);
                let mut v = vec![0.0; d];
                if d == 1 {
                    v[0] = if th.cos() >= 0.0 { 1.0 } else { -1.0 };
                } else {
                    v[0] = th.cos();
                    v[1] = th.sin();
                }
                Point::from_vec(v)
            };
            let losses = (1..=spec.horizon)
                .map(|t| LossFn::Linear { slope: slope_at(t) })
                .collect();
            let push = (0..=needed.max(1))
                .map(|t| slope_at(t.saturating_sub(1).max(1)).scale(-1.0))
                .collect();
            (losses, push)
        }
        LossFamily::DriftingQuadratic { mu, drift } => {
            if !(*mu > 0.0) {
                return Err(Error::Generation(format!("mu must be positive, got {mu}")));
            }
            let steps = spec.horizon.max(needed);
            let mut z = base.farthest_from(&anchor);
            let mut centers = Vec::with_capacity(steps);
            for _ in 0..steps {
                centers.push(z.clone());
                let noise: Vec<f64> = (0..d)
                    .map(|_| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        drift * n
                    })
                    .collect();
                z = base.body().project(&z.add(&Point::from_vec(noise)));
            }
            let mut push = vec![Point::zeros(d)];
            let mut sum = vec![0.0; d];
            for (i, c) in centers.iter().enumerate() {
                for (s, v) in sum.iter_mut().zip(c.coords()) {
                    *s += v;
                }
                let mean = Point::from_vec(sum.iter().map(|s| s / (i + 1) as f64).collect());
                push.push(mean.sub(&anchor));
            }
            let losses = centers
                .into_iter()
                .take(spec.horizon)
                .map(|center| LossFn::Quadratic { mu: *mu, center })
                .collect();
            (losses, push)
        }
    };

    let mut bodies: Vec<ConstraintFn> = Vec::with_capacity(pool);
    let mut cut = FeasibleRegion::new(base.body());
    for (j, &t_j) in reveal_rounds.iter().enumerate() {
        let raw = push
            .get(t_j)
            .cloned()
            .unwrap_or_else(|| random_unit(&mut rng, d));
        let n = raw.norm();
        let mut normal = if n > 1e-9 {
            raw.scale(1.0 / n)
        } else {
            random_unit(&mut rng, d)
        };
        if matches!(profile, DepthProfile::Relative { .. }) {
            normal = lattice_direction(&normal);
        }
        let depth = match profile {
            _ if pool == 1 => margin,
            DepthProfile::Linear => r_max - (r_max - margin) * j as f64 / (pool - 1) as f64,
            DepthProfile::Relative { step } => {
                let far = anchor.axpy(2.0 * base.diameter(), &normal);
                let top = project_region(&far, &cut, 1e-11, 100_000)?;
                (normal.dot(&top.sub(&anchor)) - step).max(margin)
            }
        };
        let g = match &spec.family.constraints {
            ConstraintFamily::ShrinkingHalfspaces { .. } => ConstraintFn::Affine {
                offset: normal.dot(&anchor) + depth,
                normal,
            },
            ConstraintFamily::MixedQuasiball { .. } => {
                let far = 4.0 * h * (d as f64).sqrt();
                let center = anchor.axpy(-far, &normal);
                let radius = far + depth;
                if j % 2 == 0 {
                    ConstraintFn::BallDistance { center, radius }
                } else {
                    ConstraintFn::QuasiBall { center, radius }
                }
            }
        };
        if matches!(profile, DepthProfile::Relative { .. }) {
            cut.push(g.sublevel_body()?)?;
        }
        bodies.push(g);
    }

    let mut constraints = Vec::with_capacity(spec.horizon);
    let mut current = 0;
    for t in 1..=spec.horizon {
        while current + 1 < pool && reveal_rounds[current + 1] <= t {
            current += 1;
        }
        constraints.push(bodies[current].clone());
    }

    let name = format!(
        "{}/{}",
        spec.family.losses.label(),
        spec.family.constraints.label()
    );
    let inst = Instance::new(name, base, losses, constraints, anchor, spec.seed)?;
    for g in inst.constraints() {
        if g.sublevel_body()?.residual(inst.anchor()) > -margin + 1e-12 {
            return Err(Error::Generation("anchor margin not attained".into()));
        }
    }
    Ok(inst)
}

/// The unit vector along some `u` in `{-1, 0, 1}^d` closest in angle to `v`.
/// For a support of size `k` the best `u` takes the signs of the `k` largest
/// entries of `v`.
fn lattice_direction(v: &Point) -> Point {
    let c = v.coords();
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
    let (mut best_k, mut best, mut acc) = (1, f64::NEG_INFINITY, 0.0);
    for (k, &i) in order.iter().enumerate() {
        acc += c[i].abs();
        let score = acc / ((k + 1) as f64).sqrt();
        if score > best + 1e-12 {
            best = score;
            best_k = k + 1;
        }
    }
    let w = 1.0 / (best_k as f64).sqrt();
    let mut u = vec![0.0; c.len()];
    for &i in &order[..best_k] {
        u[i] = if c[i] < 0.0 { -w } else { w };
    }
    Point::from_vec(u)
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return Point::from_vec(v.into_iter().map(|x| x / n).collect());
        }
    }
}

/// Empirical check of a loss's declared Lipschitz constant: the largest
/// `||subgrad|| - L` over `samples` uniform points of the base set.
pub fn lipschitz_excess_loss<R: Rng + ?Sized>(
    f: &LossFn,
    base: &BaseSet,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let l = f.lipschitz_on(base);
    (0..samples)
        .map(|_| f.subgrad(&base.sample(rng)).norm() - l)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `|g(x) - g(y)| - L ||x - y||` over random pairs in the base set.
pub fn lipschitz_excess_constraint<R: Rng + ?Sized>(
    g: &ConstraintFn,
    base: &BaseSet,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let l = g.lipschitz_on(base);
    (0..samples)
        .map(|_| {
            let x = base.sample(rng);
            let y = base.sample(rng);
            (g.eval(&x) - g.eval(&y)).abs() - l * dist(x.coords(), y.coords())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
