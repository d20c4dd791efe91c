//! The semidirect product S(R^n) x| K(R^n).
//!
//! Elements are pairs `(f, phi)` with product
//! `(f1, phi1)(f2, phi2) = (f1 + f2 o phi1, phi1 phi2)`, where the diffeo
//! product runs `phi1`'s word first (see [`Diffeo::compose`]). Equality of
//! lazily composed scalars is undecidable, so elements are compared on a
//! deterministic sample of points.

use rand::Rng as _;

use crate::error::{check_dim, Result};
use crate::fields::{Ball, EvalScalar, Point, ScalarFn};
use crate::flows::{compose_scalar, Diffeo};
use crate::rng::{substream, Rng};

pub const SAMPLE_COUNT: usize = 200;

#[derive(Debug, Clone)]
pub struct GroupElement {
    scalar: ScalarFn,
    diffeo: Diffeo,
}

impl GroupElement {
    pub fn new(scalar: impl Into<ScalarFn>, diffeo: Diffeo) -> Result<Self> {
        let scalar = scalar.into();
        check_dim(diffeo.dim(), scalar.dim())?;
        Ok(Self { scalar, diffeo })
    }

    pub fn dim(&self) -> usize {
        self.diffeo.dim()
    }

    pub fn scalar(&self) -> &ScalarFn {
        &self.scalar
    }

    pub fn diffeo(&self) -> &Diffeo {
        &self.diffeo
    }

    fn support(&self) -> Vec<Ball> {
        let mut balls = self.scalar.support_hint();
        balls.extend(self.diffeo.support());
        balls
    }
}

pub fn se_identity(dim: usize) -> GroupElement {
    GroupElement { scalar: ScalarFn::zero(dim), diffeo: Diffeo::identity(dim) }
}

pub fn se_compose(e1: &GroupElement, e2: &GroupElement) -> Result<GroupElement> {
    check_dim(e1.dim(), e2.dim())?;
    let transported = compose_scalar(e2.scalar.clone(), &e1.diffeo)?;
    Ok(GroupElement { scalar: e1.scalar.add(&transported)?, diffeo: e1.diffeo.compose(&e2.diffeo)? })
}

/// `(f, phi)^-1 = (-f o phi^-1, phi^-1)`.
pub fn se_inverse(e: &GroupElement) -> GroupElement {
    let inv = e.diffeo.inverse();
    let scalar = compose_scalar(e.scalar.clone(), &inv).expect("dimensions agree").scale(-1.0);
    GroupElement { scalar, diffeo: inv }
}

/// Deterministic evaluation points for sampled equality.
#[derive(Debug, Clone)]
pub struct SampleSet {
    points: Vec<Point>,
}

impl SampleSet {
    pub fn from_points(points: Vec<Point>) -> Self {
        Self { points }
    }

    /// Three quarters of the points fall inside the union of the elements'
    /// supports, the rest uniformly in an enlarged bounding box.
    pub fn covering(elements: &[&GroupElement], seed: u64, count: usize) -> Self {
        let dim = elements.first().map_or(1, |e| e.dim());
        let balls: Vec<Ball> = elements.iter().flat_map(|e| e.support()).collect();
        let mut rng = substream(seed, &["group", "samples"]);
        let (lo, hi) = bounding_box(dim, &balls);
        let inside = if balls.is_empty() { 0 } else { count * 3 / 4 };
        let mut points = Vec::with_capacity(count);
        for _ in 0..inside {
            let ball = &balls[rng.random_range(0..balls.len())];
            points.push(point_in_ball(&mut rng, ball));
        }
        while points.len() < count {
            points.push(Point::from_fn(dim, |k, _| rng.random_range(lo[k]..hi[k])));
        }
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

fn bounding_box(dim: usize, balls: &[Ball]) -> (Vec<f64>, Vec<f64>) {
    if balls.is_empty() {
        return (vec![-1.0; dim], vec![1.0; dim]);
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for b in balls {
        for k in 0..dim {
            lo[k] = lo[k].min(b.center[k] - b.radius);
            hi[k] = hi[k].max(b.center[k] + b.radius);
        }
    }
    for k in 0..dim {
        let pad = 0.25 * (hi[k] - lo[k]);
        lo[k] -= pad;
        hi[k] += pad;
    }
    (lo, hi)
}

fn point_in_ball(rng: &mut Rng, ball: &Ball) -> Point {
    let n = ball.center.len();
    loop {
        let d = Point::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if d.norm_squared() < 1.0 {
            return &ball.center + d * ball.radius;
        }
    }
}

/// Largest deviation between the scalar values and endpoint maps of two
/// elements over the sample set.
pub fn se_distance(e1: &GroupElement, e2: &GroupElement, samples: &SampleSet) -> Result<f64> {
    check_dim(e1.dim(), e2.dim())?;
    let mut worst = 0.0f64;
    for x in samples.points() {
        let ds = (e1.scalar.value(x)? - e2.scalar.value(x)?).abs();
        let dp = (e1.diffeo.apply(x)? - e2.diffeo.apply(x)?).norm();
        worst = worst.max(ds).max(dp);
    }
    Ok(worst)
}

pub fn se_equal(e1: &GroupElement, e2: &GroupElement, samples: &SampleSet, tol: f64) -> Result<bool> {
    Ok(se_distance(e1, e2, samples)? <= tol)
}
