//! Diffeomorphisms of R^n realized as words of vector-field flows.
//!
//! A [`Diffeo`] is a list of [`FlowStep`]s `(g, r)`, each standing for the
//! time-`r` flow of `g`. Steps act on a point in word order, so the
//! product `compose(phi1, phi2)` is the word of `phi1` followed by the word
//! of `phi2`: it maps `x` to `phi2(phi1(x))`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KinematError, Result};
use crate::fields::{Ball, EvalScalar, Matrix, Point, ScalarFn, VectorField};
use crate::ode::{self, Settings};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Separation below which two flowed points count as collided.
pub const COLLISION_LIMIT: f64 = 1e-9;

/// Per-sample motion bound for recorded multi-point trajectories, as a
/// fraction of the current minimum pair separation.
pub const TRACE_DENSITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    /// Relative and absolute tolerance of the embedded error estimate.
    pub tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_step: f64::INFINITY }
    }
}

impl IntegratorSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn ode(&self) -> Settings {
        Settings { rtol: self.tol, atol: self.tol, max_step: self.max_step }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(KinematError::InvalidArgument(format!("integrator tolerance must be positive, got {tol}")))
    }
}

/// One flow `phi^g_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub field: VectorField,
    pub r: f64,
}

impl FlowStep {
    pub fn new(field: VectorField, r: f64) -> Self {
        Self { field, r }
    }
}

fn flow_with<O: FnMut(f64, &[f64])>(
    g: &VectorField,
    r: f64,
    x: &Point,
    settings: IntegratorSettings,
    on_step: O,
) -> Result<Point> {
    if r == 0.0 || !g.in_support(x) {
        return Ok(x.clone());
    }
    let y = ode::integrate(
        x.as_slice(),
        r,
        settings.ode(),
        |y, dy| g.value_into(y, dy),
        |_, _| true,
        on_step,
    )?;
    Ok(Point::from_vec(y))
}

/// Endpoint of the flow ODE `d/dr phi_r(x) = g(phi_r(x))`, `phi_0(x) = x`.
pub fn flow_point(g: &VectorField, r: f64, x: &Point, tol: f64) -> Result<Point> {
    check_dim(g.dim(), x.len())?;
    check_tol(tol)?;
    flow_with(g, r, x, IntegratorSettings::with_tol(tol), |_, _| {})
}

/// `(phi^g_r(x), D phi^g_r(x))` from the flow and its variational equation
/// `dJ/dr = Dg(phi_r(x)) J`, integrated jointly.
fn flow_with_jacobian(g: &VectorField, r: f64, x: &Point, settings: IntegratorSettings) -> Result<(Point, Matrix)> {
    let n = x.len();
    if r == 0.0 || !g.in_support(x) {
        return Ok((x.clone(), Matrix::identity(n, n)));
    }
    let mut y0 = x.as_slice().to_vec();
    for i in 0..n {
        for k in 0..n {
            y0.push(if i == k { 1.0 } else { 0.0 });
        }
    }
    let mut dg = vec![0.0; n * n];
    let y = ode::integrate(
        &y0,
        r,
        settings.ode(),
        |y, dy| {
            let (pos, jac) = y.split_at(n);
            let (dpos, djac) = dy.split_at_mut(n);
            g.value_into(pos, dpos);
            g.jacobian_into(pos, &mut dg);
            for i in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += dg[i * n + m] * jac[m * n + k];
                    }
                    djac[i * n + k] = acc;
                }
            }
        },
        |_, _| true,
        |_, _| {},
    )?;
    Ok((Point::from_row_slice(&y[..n]), Matrix::from_row_slice(n, n, &y[n..])))
}

/// A point of a recorded single-point trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub step: usize,
    pub s: f64,
    pub point: Point,
}

/// An element of K(R^n): a word of flow steps plus integrator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiffeoDoc", into = "DiffeoDoc")]
pub struct Diffeo {
    dim: usize,
    steps: Vec<FlowStep>,
    settings: IntegratorSettings,
}

impl Diffeo {
    pub fn new(dim: usize, steps: Vec<FlowStep>, settings: IntegratorSettings) -> Result<Self> {
        for s in &steps {
            check_dim(dim, s.field.dim())?;
            if !s.r.is_finite() {
                return Err(KinematError::InvalidArgument("non-finite flow parameter".into()));
            }
        }
        check_tol(settings.tol)?;
        if !(settings.max_step > 0.0) {
            return Err(KinematError::InvalidArgument("max_step must be positive".into()));
        }
        Ok(Self { dim, steps, settings })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, steps: Vec::new(), settings: IntegratorSettings::default() }
    }

    pub fn from_steps(dim: usize, steps: Vec<FlowStep>) -> Result<Self> {
        Self::new(dim, steps, IntegratorSettings::default())
    }

    pub fn single(field: VectorField, r: f64) -> Self {
        let dim = field.dim();
        Self { dim, steps: vec![FlowStep { field, r }], settings: IntegratorSettings::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[FlowStep] {
        &self.steps
    }

    pub fn settings(&self) -> IntegratorSettings {
        self.settings
    }

    pub fn with_settings(mut self, settings: IntegratorSettings) -> Result<Self> {
        check_tol(settings.tol)?;
        self.settings = settings;
        Ok(self)
    }

    pub fn is_identity_word(&self) -> bool {
        self.steps.iter().all(|s| s.r == 0.0 || s.field.terms().is_empty())
    }

    pub fn support(&self) -> Vec<Ball> {
        self.steps.iter().flat_map(|s| s.field.support()).collect()
    }

    /// True if some step's field is nonzero near `x`.
    pub fn in_support(&self, x: &Point) -> bool {
        self.steps.iter().any(|s| s.field.in_support(x))
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x.len())?;
        let mut y = x.clone();
        for step in &self.steps {
            y = flow_with(&step.field, step.r, &y, self.settings, |_, _| {})?;
        }
        Ok(y)
    }

    /// Reversed word with negated parameters.
    pub fn inverse(&self) -> Self {
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| FlowStep { field: s.field.clone(), r: -s.r })
            .collect();
        Self { dim: self.dim, steps, settings: self.settings }
    }

    /// The group product `self * then`: `self`'s word runs first.
    pub fn compose(&self, then: &Diffeo) -> Result<Self> {
        check_dim(self.dim, then.dim)?;
        if self.steps.is_empty() {
            return Ok(then.clone());
        }
        if then.steps.is_empty() {
            return Ok(self.clone());
        }
        let mut steps = self.steps.clone();
        steps.extend(then.steps.iter().cloned());
        let settings = IntegratorSettings {
            tol: self.settings.tol.min(then.settings.tol),
            max_step: self.settings.max_step.min(then.settings.max_step),
        };
        Ok(Self { dim: self.dim, steps, settings })
    }

    pub fn jacobian(&self, x: &Point) -> Result<Matrix> {
        Ok(self.apply_with_jacobian(x)?.1)
    }

    /// Endpoint and `D phi(x)`, the ordered product of step Jacobians along
    /// the trajectory (later steps multiply on the left).
    pub fn apply_with_jacobian(&self, x: &Point) -> Result<(Point, Matrix)> {
        check_dim(self.dim, x.len())?;
        let mut y = x.clone();
        let mut jac = Matrix::identity(self.dim, self.dim);
        for step in &self.steps {
            let (next, j) = flow_with_jacobian(&step.field, step.r, &y, self.settings)?;
            jac = j * jac;
            y = next;
        }
        Ok((y, jac))
    }

    /// Accepted integrator states of `x` along the whole word.
    pub fn trajectory(&self, x: &Point) -> Result<Vec<TrajectorySample>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![TrajectorySample { step: 0, s: 0.0, point: x.clone() }];
        let mut y = x.clone();
        for (i, step) in self.steps.iter().enumerate() {
            let mut recorded = Vec::new();
            y = flow_with(&step.field, step.r, &y, self.settings, |s, p| {
                if s != 0.0 {
                    recorded.push(TrajectorySample { step: i, s, point: Point::from_row_slice(p) });
                }
            })?;
            out.extend(recorded);
        }
        Ok(out)
    }

    /// Joint trajectory of several points. Consecutive samples move every
    /// point by less than [`TRACE_DENSITY`] times the minimum pair
    /// separation; separations below [`COLLISION_LIMIT`] abort.
    pub fn trace_points(&self, points: &[Point]) -> Result<Vec<Vec<Point>>> {
        for p in points {
            check_dim(self.dim, p.len())?;
        }
        let n = self.dim;
        let count = points.len();
        let first: Vec<Point> = points.to_vec();
        check_separation(&first)?;
        let mut samples = vec![first];
        for step in &self.steps {
            let current = samples.last().expect("non-empty").clone();
            if step.r == 0.0 || !current.iter().any(|p| step.field.in_support(p)) {
                continue;
            }
            let mut flat: Vec<f64> = Vec::with_capacity(n * count);
            for p in &current {
                flat.extend_from_slice(p.as_slice());
            }
            let mut recorded: Vec<Vec<Point>> = Vec::new();
            let mut collision: Option<f64> = None;
            ode::integrate(
                &flat,
                step.r,
                self.settings.ode(),
                |y, dy| {
                    for j in 0..count {
                        step.field.value_into(&y[j * n..(j + 1) * n], &mut dy[j * n..(j + 1) * n]);
                    }
                },
                |prev, next| {
                    let sep = min_separation_flat(prev, n, count);
                    (0..count).all(|j| {
                        let d: f64 = (0..n)
                            .map(|l| (next[j * n + l] - prev[j * n + l]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        d < TRACE_DENSITY * sep
                    })
                },
                |s, y| {
                    if s == 0.0 {
                        return;
                    }
                    let sep = min_separation_flat(y, n, count);
                    if sep < COLLISION_LIMIT && collision.is_none() {
                        collision = Some(sep);
                    }
                    recorded.push((0..count).map(|j| Point::from_row_slice(&y[j * n..(j + 1) * n])).collect());
                },
            )?;
            if let Some(separation) = collision {
                return Err(KinematError::NearCollision { separation, limit: COLLISION_LIMIT });
            }
            samples.extend(recorded);
        }
        Ok(samples)
    }
}

fn min_separation_flat(y: &[f64], n: usize, count: usize) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..count {
        for b in a + 1..count {
            let d: f64 = (0..n).map(|l| (y[a * n + l] - y[b * n + l]).powi(2)).sum::<f64>().sqrt();
            best = best.min(d);
        }
    }
    best
}

fn check_separation(points: &[Point]) -> Result<()> {
    let mut best = f64::INFINITY;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            best = best.min((&points[a] - &points[b]).norm());
        }
    }
    if best < COLLISION_LIMIT {
        return Err(KinematError::NearCollision { separation: best, limit: COLLISION_LIMIT });
    }
    Ok(())
}

/// `f o phi`, with gradient `D phi(x)^T grad f(phi(x))`.
#[derive(Debug)]
pub struct ComposedScalar {
    scalar: ScalarFn,
    diffeo: Diffeo,
}

impl EvalScalar for ComposedScalar {
    fn dim(&self) -> usize {
        self.diffeo.dim()
    }

    fn support_hint(&self) -> Vec<Ball> {
        let mut balls = self.scalar.support_hint();
        balls.extend(self.diffeo.support());
        balls
    }

    fn value(&self, x: &Point) -> Result<f64> {
        self.scalar.value(&self.diffeo.apply(x)?)
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        let (y, jac) = self.diffeo.apply_with_jacobian(x)?;
        Ok(jac.transpose() * self.scalar.gradient(&y)?)
    }
}

pub fn compose_scalar(f: impl Into<ScalarFn>, phi: &Diffeo) -> Result<ScalarFn> {
    let scalar = f.into();
    check_dim(phi.dim(), scalar.dim())?;
    if phi.steps().is_empty() {
        return Ok(scalar);
    }
    Ok(ScalarFn::new(ComposedScalar { scalar, diffeo: phi.clone() }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiffeoDoc {
    dim: usize,
    steps: Vec<FlowStep>,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_step: Option<f64>,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl TryFrom<DiffeoDoc> for Diffeo {
    type Error = KinematError;

    fn try_from(doc: DiffeoDoc) -> Result<Self> {
        let settings = IntegratorSettings { tol: doc.tol, max_step: doc.max_step.unwrap_or(f64::INFINITY) };
        Diffeo::new(doc.dim, doc.steps, settings)
    }
}

impl From<Diffeo> for DiffeoDoc {
    fn from(d: Diffeo) -> Self {
        let max_step = d.settings.max_step.is_finite().then_some(d.settings.max_step);
        DiffeoDoc { dim: d.dim, steps: d.steps, tol: d.settings.tol, max_step }
    }
}
