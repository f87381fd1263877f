//! Primitive convex bodies, their exact Euclidean projections, and the
//! projection onto an intersection of bodies via Dykstra's scheme.
//!
//! Every primitive (halfspace, ball, box) has a closed-form projection. An
//! intersection has none, so [`project_region`] runs Dykstra's alternating
//! projections with correction vectors; plain cyclic projection would land
//! somewhere in the intersection but not at the nearest point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default stopping tolerance for [`project_region`].
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-10;
/// Default sweep cap for [`project_region`].
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// Halfspace normals shorter than this are rejected.
pub const MIN_NORMAL_NORM: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A finite point of `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("dimension must be at least 1".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    /// Skips the finiteness check. Callers own the invariant.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Point) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    fn same_bits(&self, other: &Point) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `{x : normal · x <= offset}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HalfspaceRepr")]
pub struct Halfspace {
    normal: Point,
    offset: f64,
    #[serde(skip)]
    normal_sq: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfspaceRepr {
    normal: Point,
    offset: f64,
}

impl TryFrom<HalfspaceRepr> for Halfspace {
    type Error = Error;

    fn try_from(r: HalfspaceRepr) -> Result<Self> {
        Halfspace::new(r.normal, r.offset)
    }
}

impl Halfspace {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n >= MIN_NORMAL_NORM) {
            return Err(Error::InvalidBody(format!(
                "halfspace normal has norm {n:.3e} < {MIN_NORMAL_NORM:e}"
            )));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidBody("halfspace offset is not finite".into()));
        }
        Ok(Halfspace {
            normal_sq: n * n,
            normal,
            offset,
        })
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    fn project_into(&self, z: &[f64], out: &mut [f64]) {
        let excess = dot(&self.normal.0, z) - self.offset;
        if excess <= 0.0 {
            out.copy_from_slice(z);
        } else {
            let step = excess / self.normal_sq;
            for ((o, zi), ai) in out.iter_mut().zip(z).zip(&self.normal.0) {
                *o = zi - step * ai;
            }
        }
    }

    fn residual(&self, p: &[f64]) -> f64 {
        dot(&self.normal.0, p) - self.offset
    }
}

/// `{x : ||x - center|| <= radius}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BallRepr")]
pub struct Ball {
    center: Point,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BallRepr {
    center: Point,
    radius: f64,
}

impl TryFrom<BallRepr> for Ball {
    type Error = Error;

    fn try_from(r: BallRepr) -> Result<Self> {
        Ball::new(r.center, r.radius)
    }
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidBody(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn project_into(&self, z: &[f64], out: &mut [f64]) {
        let d = dist(z, &self.center.0);
        if d <= self.radius {
            out.copy_from_slice(z);
        } else {
            let s = self.radius / d;
            for ((o, zi), ci) in out.iter_mut().zip(z).zip(&self.center.0) {
                *o = ci + s * (zi - ci);
            }
        }
    }

    fn residual(&self, p: &[f64]) -> f64 {
        dist(p, &self.center.0) - self.radius
    }
}

/// `{x : lo <= x <= hi}` componentwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr")]
pub struct BoxSet {
    lo: Point,
    hi: Point,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRepr {
    lo: Point,
    hi: Point,
}

impl TryFrom<BoxRepr> for BoxSet {
    type Error = Error;

    fn try_from(r: BoxRepr) -> Result<Self> {
        BoxSet::new(r.lo, r.hi)
    }
}

impl BoxSet {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        if let Some(i) = (0..lo.dim()).find(|&i| lo.0[i] > hi.0[i]) {
            return Err(Error::InvalidBody(format!(
                "box has lo[{i}] = {} > hi[{i}] = {}",
                lo.0[i], hi.0[i]
            )));
        }
        Ok(BoxSet { lo, hi })
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        BoxSet::new(
            Point::new(vec![-half_width; dim])?,
            Point::new(vec![half_width; dim])?,
        )
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.dist(&self.hi)
    }

    /// The vertex farthest from `p`; ties go to the lower bound.
    pub fn farthest_vertex(&self, p: &Point) -> Point {
        let v = (0..self.dim())
            .map(|i| {
                let (lo, hi) = (self.lo.0[i], self.hi.0[i]);
                if (p.0[i] - lo).abs() >= (hi - p.0[i]).abs() {
                    lo
                } else {
                    hi
                }
            })
            .collect();
        Point(v)
    }

    fn project_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = z[i].clamp(self.lo.0[i], self.hi.0[i]);
        }
    }

    fn residual(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(i, &x)| (self.lo.0[i] - x).max(x - self.hi.0[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A primitive closed convex set with an exact projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexBody {
    Halfspace(Halfspace),
    Ball(Ball),
    Box(BoxSet),
}

impl ConvexBody {
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Halfspace(h) => h.dim(),
            ConvexBody::Ball(b) => b.dim(),
            ConvexBody::Box(b) => b.dim(),
        }
    }

    pub fn project(&self, p: &Point) -> Point {
        let mut out = vec![0.0; p.dim()];
        self.project_into(&p.0, &mut out);
        Point(out)
    }

    pub(crate) fn project_into(&self, z: &[f64], out: &mut [f64]) {
        match self {
            ConvexBody::Halfspace(h) => h.project_into(z, out),
            ConvexBody::Ball(b) => b.project_into(z, out),
            ConvexBody::Box(b) => b.project_into(z, out),
        }
    }

    /// Signed membership surrogate; nonpositive exactly on the body.
    ///
    /// `a·p - b` for halfspaces, `||p - c|| - r` for balls, the largest
    /// componentwise excess for boxes.
    pub fn residual(&self, p: &Point) -> f64 {
        self.residual_slice(&p.0)
    }

    pub(crate) fn residual_slice(&self, p: &[f64]) -> f64 {
        match self {
            ConvexBody::Halfspace(h) => h.residual(p),
            ConvexBody::Ball(b) => b.residual(p),
            ConvexBody::Box(b) => b.residual(p),
        }
    }

    /// Exact structural equality, compared bit for bit.
    pub fn same_as(&self, other: &ConvexBody) -> bool {
        match (self, other) {
            (ConvexBody::Halfspace(a), ConvexBody::Halfspace(b)) => {
                a.offset.to_bits() == b.offset.to_bits() && a.normal.same_bits(&b.normal)
            }
            (ConvexBody::Ball(a), ConvexBody::Ball(b)) => {
                a.radius.to_bits() == b.radius.to_bits() && a.center.same_bits(&b.center)
            }
            (ConvexBody::Box(a), ConvexBody::Box(b)) => {
                a.lo.same_bits(&b.lo) && a.hi.same_bits(&b.hi)
            }
            _ => false,
        }
    }
}

impl From<Halfspace> for ConvexBody {
    fn from(h: Halfspace) -> Self {
        ConvexBody::Halfspace(h)
    }
}

impl From<Ball> for ConvexBody {
    fn from(b: Ball) -> Self {
        ConvexBody::Ball(b)
    }
}

impl From<BoxSet> for ConvexBody {
    fn from(b: BoxSet) -> Self {
        ConvexBody::Box(b)
    }
}

pub fn project_halfspace(p: &Point, h: &Halfspace) -> Point {
    let mut out = vec![0.0; p.dim()];
    h.project_into(&p.0, &mut out);
    Point(out)
}

pub fn project_ball(p: &Point, b: &Ball) -> Point {
    let mut out = vec![0.0; p.dim()];
    b.project_into(&p.0, &mut out);
    Point(out)
}

pub fn project_box(p: &Point, b: &BoxSet) -> Point {
    let mut out = vec![0.0; p.dim()];
    b.project_into(&p.0, &mut out);
    Point(out)
}

/// An intersection of convex bodies. The first body is the base set.
///
/// Appending only ever shrinks the point set; an exact duplicate of a body
/// already present is dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ConvexBody>", into = "Vec<ConvexBody>")]
pub struct FeasibleRegion {
    bodies: Vec<ConvexBody>,
}

impl TryFrom<Vec<ConvexBody>> for FeasibleRegion {
    type Error = Error;

    fn try_from(bodies: Vec<ConvexBody>) -> Result<Self> {
        let mut it = bodies.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::InvalidBody("a region needs at least one body".into()))?;
        let mut region = FeasibleRegion::new(first);
        for b in it {
            region.push(b)?;
        }
        Ok(region)
    }
}

impl From<FeasibleRegion> for Vec<ConvexBody> {
    fn from(r: FeasibleRegion) -> Self {
        r.bodies
    }
}

impl FeasibleRegion {
    pub fn new(base: impl Into<ConvexBody>) -> Self {
        FeasibleRegion {
            bodies: vec![base.into()],
        }
    }

    pub fn dim(&self) -> usize {
        self.bodies[0].dim()
    }

    pub fn bodies(&self) -> &[ConvexBody] {
        &self.bodies
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    /// Intersects the region with `body`. Returns whether the body was new.
    pub fn push(&mut self, body: impl Into<ConvexBody>) -> Result<bool> {
        let body = body.into();
        check_dim(self.dim(), body.dim())?;
        if self.bodies.iter().any(|b| b.same_as(&body)) {
            return Ok(false);
        }
        self.bodies.push(body);
        Ok(true)
    }

    /// Largest membership residual over all bodies.
    pub fn residual(&self, p: &Point) -> f64 {
        self.residual_slice(&p.0)
    }

    fn residual_slice(&self, p: &[f64]) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.residual_slice(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.bodies.iter().all(|b| b.residual_slice(&p.0) <= tol)
    }
}

pub fn contains(region: &FeasibleRegion, p: &Point, tol: f64) -> bool {
    region.contains(p, tol)
}

/// Result of projecting onto a region.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Point,
    /// Largest membership residual at `point`, clamped at zero.
    pub residual: f64,
    pub sweeps: usize,
}

/// Euclidean projection of `p` onto the intersection of the region's bodies.
pub fn project_region(
    p: &Point,
    region: &FeasibleRegion,
    tol: f64,
    max_sweeps: usize,
) -> Result<Point> {
    project_region_detailed(p, region, tol, max_sweeps).map(|r| r.point)
}

/// [`project_region`] that also reports the final residual and sweep count.
pub fn project_region_detailed(
    p: &Point,
    region: &FeasibleRegion,
    tol: f64,
    max_sweeps: usize,
) -> Result<Projection> {
    check_dim(region.dim(), p.dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "projection tolerance must be positive, got {tol}"
        )));
    }
    if region.len() == 1 {
        let point = region.bodies[0].project(p);
        let residual = region.bodies[0].residual(&point).max(0.0);
        return Ok(Projection {
            point,
            residual,
            sweeps: 0,
        });
    }
    if region.residual(p) <= 0.0 {
        return Ok(Projection {
            point: p.clone(),
            residual: 0.0,
            sweeps: 0,
        });
    }

    let d = p.dim();
    let m = region.len();
    let mut x = p.0.clone();
    let mut prev = vec![0.0; d];
    let mut z = vec![0.0; d];
    // one correction vector per body, stored contiguously
    let mut corr = vec![0.0; m * d];
    let mut corr_prev = vec![0.0; m * d];
    let mut residual = f64::INFINITY;

    for sweep in 1..=max_sweeps {
        prev.copy_from_slice(&x);
        corr_prev.copy_from_slice(&corr);
        for (i, body) in region.bodies.iter().enumerate() {
            let c = &mut corr[i * d..(i + 1) * d];
            for k in 0..d {
                z[k] = x[k] + c[k];
            }
            body.project_into(&z, &mut x);
            for k in 0..d {
                c[k] = z[k] - x[k];
            }
        }
        if dist(&x, &prev) >= tol {
            continue;
        }
        // The iterate can sit still for many sweeps while a correction
        // drains, so the corrections must have settled too.
        let corr_step = (0..m)
            .map(|i| dist(&corr[i * d..(i + 1) * d], &corr_prev[i * d..(i + 1) * d]))
            .fold(0.0, f64::max);
        residual = region.residual_slice(&x).max(0.0);
        if residual <= tol && (corr_step < tol || sweep == max_sweeps) {
            return Ok(Projection {
                point: Point(x),
                residual,
                sweeps: sweep,
            });
        }
    }
    if !residual.is_finite() {
        residual = region.residual_slice(&x).max(0.0);
    }
    Err(Error::Convergence {
        iterate: Point(x),
        residual,
        sweeps: max_sweeps,
    })
}

/// `||base||_2 + |tail|`, the norm used on lifted points.
pub fn oplus_norm(base: &Point, tail: f64) -> f64 {
    base.norm() + tail.abs()
}

/// An iterate paired with the perturbation budget still to come.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub base: Point,
    pub tail: f64,
}

impl LiftedPoint {
    /// `||self - other||` in the lifted norm.
    pub fn oplus_dist(&self, other: &LiftedPoint) -> f64 {
        self.base.dist(&other.base) + (self.tail - other.tail).abs()
    }

    /// Euclidean distance in `R^(d+1)`.
    pub fn euclidean_dist(&self, other: &LiftedPoint) -> f64 {
        let db = self.base.dist(&other.base);
        let dt = self.tail - other.tail;
        (db * db + dt * dt).sqrt()
    }
}
