//! Compactly supported smooth test functions and vector fields on R^n.
//!
//! Every object here is a finite sum of bump primitives built on the profile
//! `beta(u) = exp(1 - 1/(1 - u))` for `0 <= u < 1` and `beta(u) = 0`
//! otherwise, evaluated at `u = |x - a|^2 / r^2`. The profile has closed-form
//! derivatives, so values, gradients and Jacobians of the primitives are
//! analytic. Objects that are not closed in the bump family (Lie brackets,
//! directional derivatives, compositions with diffeomorphisms) are exposed
//! through the [`EvalScalar`] / [`EvalVector`] evaluation contracts.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KinematError, Result};

pub type Point = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Base step for central finite differences; scaled by `max(1, |x|_inf)`.
pub const FD_STEP: f64 = 1e-5;

pub(crate) fn fd_step_at(x: &Point) -> f64 {
    FD_STEP * x.amax().max(1.0)
}

/// The fixed bump profile `beta`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BumpProfile;

impl BumpProfile {
    pub fn value(u: f64) -> f64 {
        if !(u < 1.0) {
            return 0.0;
        }
        let w = 1.0 - u;
        (1.0 - 1.0 / w).exp()
    }

    pub fn derivative(u: f64) -> f64 {
        let b = Self::value(u);
        if b == 0.0 {
            return 0.0;
        }
        let w = 1.0 - u;
        -b / (w * w)
    }

    pub fn second_derivative(u: f64) -> f64 {
        let b = Self::value(u);
        if b == 0.0 {
            return 0.0;
        }
        let w = 1.0 - u;
        let w3 = w * w * w;
        b * (1.0 / (w3 * w) - 2.0 / w3)
    }
}

/// Open ball `B(center, radius)`; the closure is the support of one primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, x: &Point) -> bool {
        (x - &self.center).norm_squared() < self.radius * self.radius
    }
}

fn validate_ball(dim: usize, center: &Point, radius: f64) -> Result<()> {
    check_dim(dim, center.len())?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(KinematError::InvalidField(format!("radius must be positive, got {radius}")));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(KinematError::InvalidField("non-finite center".into()));
    }
    Ok(())
}

/// One term `c * beta(|x - a|^2 / r^2)` of a [`ScalarField`].
#[derive(Debug, Clone, PartialEq)]
pub struct BumpTerm {
    pub center: Point,
    pub radius: f64,
    pub coeff: f64,
}

/// Finite sum of bump terms: a test function in D(R^n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldDoc", into = "FieldDoc")]
pub struct ScalarField {
    dim: usize,
    terms: Vec<BumpTerm>,
}

impl ScalarField {
    pub fn new(dim: usize, terms: Vec<BumpTerm>) -> Result<Self> {
        for t in &terms {
            validate_ball(dim, &t.center, t.radius)?;
            if !t.coeff.is_finite() {
                return Err(KinematError::InvalidField("non-finite coefficient".into()));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn bump(center: Point, radius: f64, coeff: f64) -> Result<Self> {
        let dim = center.len();
        Self::new(dim, vec![BumpTerm { center, radius, coeff }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[BumpTerm] {
        &self.terms
    }

    /// Same terms with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| BumpTerm { coeff: t.coeff * s, ..t.clone() })
            .collect();
        Self { dim: self.dim, terms }
    }

    pub fn support(&self) -> Vec<Ball> {
        self.terms
            .iter()
            .map(|t| Ball { center: t.center.clone(), radius: t.radius })
            .collect()
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self
            .terms
            .iter()
            .map(|t| {
                let u = (x - &t.center).norm_squared() / (t.radius * t.radius);
                t.coeff * BumpProfile::value(u)
            })
            .sum())
    }

    /// Analytic gradient `sum_k c_k beta'(u_k) (2 / r_k^2) (x - a_k)`.
    pub fn grad(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x.len())?;
        let mut g = Point::zeros(self.dim);
        for t in &self.terms {
            let d = x - &t.center;
            let r2 = t.radius * t.radius;
            let db = BumpProfile::derivative(d.norm_squared() / r2);
            if db != 0.0 {
                g.axpy(t.coeff * db * 2.0 / r2, &d, 1.0);
            }
        }
        Ok(g)
    }
}

/// One primitive of a [`VectorField`].
#[derive(Debug, Clone, PartialEq)]
pub enum VectorPrimitive {
    /// `beta(|x - a|^2 / r^2) * dir`.
    Translate { center: Point, radius: f64, dir: Point },
    /// Planar only: `beta(|x - a|^2 / r^2) * rate * (-(x-a)_2, (x-a)_1)`.
    Rotate { center: Point, radius: f64, rate: f64 },
}

impl VectorPrimitive {
    pub fn ball(&self) -> Ball {
        match self {
            Self::Translate { center, radius, .. } | Self::Rotate { center, radius, .. } => {
                Ball { center: center.clone(), radius: *radius }
            }
        }
    }

    fn center_radius(&self) -> (&Point, f64) {
        match self {
            Self::Translate { center, radius, .. } | Self::Rotate { center, radius, .. } => {
                (center, *radius)
            }
        }
    }

    /// Adds this primitive's value at `x` into `out`.
    fn add_value(&self, x: &[f64], out: &mut [f64]) {
        let (center, radius) = self.center_radius();
        let r2 = radius * radius;
        let u: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2;
        let b = BumpProfile::value(u);
        if b == 0.0 {
            return;
        }
        match self {
            Self::Translate { dir, .. } => {
                for (o, v) in out.iter_mut().zip(dir.iter()) {
                    *o += b * v;
                }
            }
            Self::Rotate { rate, .. } => {
                let d0 = x[0] - center[0];
                let d1 = x[1] - center[1];
                out[0] += b * rate * -d1;
                out[1] += b * rate * d0;
            }
        }
    }

    /// Adds this primitive's Jacobian (row-major, `out[i*n + k] = d g_i / d x_k`).
    fn add_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let (center, radius) = self.center_radius();
        let r2 = radius * radius;
        let d: Vec<f64> = x.iter().zip(center.iter()).map(|(a, b)| a - b).collect();
        let u: f64 = d.iter().map(|v| v * v).sum::<f64>() / r2;
        let b = BumpProfile::value(u);
        if b == 0.0 {
            return;
        }
        let db = BumpProfile::derivative(u) * 2.0 / r2;
        match self {
            Self::Translate { dir, .. } => {
                for i in 0..n {
                    for k in 0..n {
                        out[i * n + k] += dir[i] * db * d[k];
                    }
                }
            }
            Self::Rotate { rate, .. } => {
                let rd = [-d[1], d[0]];
                for i in 0..2 {
                    for k in 0..2 {
                        out[i * 2 + k] += rate * rd[i] * db * d[k];
                    }
                }
                out[1] -= rate * b;
                out[2] += rate * b;
            }
        }
    }
}

/// Finite sum of translate/rotate primitives: an element of vect^c(R^n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldDoc", into = "FieldDoc")]
pub struct VectorField {
    dim: usize,
    terms: Vec<VectorPrimitive>,
}

impl VectorField {
    pub fn new(dim: usize, terms: Vec<VectorPrimitive>) -> Result<Self> {
        for t in &terms {
            match t {
                VectorPrimitive::Translate { center, radius, dir } => {
                    validate_ball(dim, center, *radius)?;
                    check_dim(dim, dir.len())?;
                    if dir.iter().any(|v| !v.is_finite()) {
                        return Err(KinematError::InvalidField("non-finite direction".into()));
                    }
                }
                VectorPrimitive::Rotate { center, radius, rate } => {
                    if dim != 2 {
                        return Err(KinematError::InvalidField(format!(
                            "rotate primitives need dimension 2, field has {dim}"
                        )));
                    }
                    validate_ball(dim, center, *radius)?;
                    if !rate.is_finite() {
                        return Err(KinematError::InvalidField("non-finite rate".into()));
                    }
                }
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn translate(center: Point, radius: f64, dir: Point) -> Result<Self> {
        let dim = center.len();
        Self::new(dim, vec![VectorPrimitive::Translate { center, radius, dir }])
    }

    pub fn rotate(center: Point, radius: f64, rate: f64) -> Result<Self> {
        let dim = center.len();
        Self::new(dim, vec![VectorPrimitive::Rotate { center, radius, rate }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[VectorPrimitive] {
        &self.terms
    }

    pub fn support(&self) -> Vec<Ball> {
        self.terms.iter().map(VectorPrimitive::ball).collect()
    }

    /// True if `x` lies in the open union of primitive balls.
    pub fn in_support(&self, x: &Point) -> bool {
        self.terms.iter().any(|t| t.ball().contains(x))
    }

    pub(crate) fn value_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            t.add_value(x, out);
        }
    }

    pub(crate) fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            t.add_jacobian(x, out);
        }
    }

    pub fn eval(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x.len())?;
        let mut out = Point::zeros(self.dim);
        self.value_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub fn jacobian(&self, x: &Point) -> Result<Matrix> {
        check_dim(self.dim, x.len())?;
        let n = self.dim;
        let mut buf = vec![0.0; n * n];
        self.jacobian_into(x.as_slice(), &mut buf);
        Ok(Matrix::from_row_slice(n, n, &buf))
    }

    pub fn divergence(&self, x: &Point) -> Result<f64> {
        Ok(self.jacobian(x)?.trace())
    }
}

/// Evaluation contract for scalar functions on R^n.
pub trait EvalScalar: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> Result<f64>;

    /// Balls whose union contains the support, when known; empty otherwise.
    fn support_hint(&self) -> Vec<Ball> {
        Vec::new()
    }

    /// Gradient; central differences unless the implementor knows better.
    fn gradient(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        let h = fd_step_at(x);
        let mut g = Point::zeros(x.len());
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            g[k] = (self.value(&xp)? - self.value(&xm)?) / (2.0 * h);
        }
        Ok(g)
    }
}

/// Evaluation contract for vector fields on R^n.
pub trait EvalVector: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> Result<Point>;

    /// Jacobian `J[i][k] = d v_i / d x_k`; central differences by default.
    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        check_dim(self.dim(), x.len())?;
        let n = x.len();
        let h = fd_step_at(x);
        let mut jac = Matrix::zeros(n, n);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (self.value(&xp)? - self.value(&xm)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }

    fn divergence(&self, x: &Point) -> Result<f64> {
        Ok(self.jacobian(x)?.trace())
    }
}

impl EvalScalar for ScalarField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn support_hint(&self) -> Vec<Ball> {
        self.support()
    }
    fn value(&self, x: &Point) -> Result<f64> {
        self.eval(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point> {
        self.grad(x)
    }
}

impl EvalVector for VectorField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point) -> Result<Point> {
        self.eval(x)
    }
    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        VectorField::jacobian(self, x)
    }
    fn divergence(&self, x: &Point) -> Result<f64> {
        VectorField::divergence(self, x)
    }
}

/// Shared handle to any evaluable scalar.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn EvalScalar>);

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl ScalarFn {
    pub fn new<S: EvalScalar + 'static>(s: S) -> Self {
        Self(Arc::new(s))
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(ScalarField::zero(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.0.value(x)
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.0.gradient(x)
    }

    pub fn add(&self, other: &ScalarFn) -> Result<ScalarFn> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self::new(Combination { terms: vec![(1.0, self.clone()), (1.0, other.clone())] }))
    }

    pub fn scale(&self, s: f64) -> ScalarFn {
        Self::new(Combination { terms: vec![(s, self.clone())] })
    }
}

impl EvalScalar for ScalarFn {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn support_hint(&self) -> Vec<Ball> {
        self.0.support_hint()
    }
    fn value(&self, x: &Point) -> Result<f64> {
        self.0.value(x)
    }
    fn gradient(&self, x: &Point) -> Result<Point> {
        self.0.gradient(x)
    }
}

impl From<ScalarField> for ScalarFn {
    fn from(f: ScalarField) -> Self {
        Self::new(f)
    }
}

impl From<&ScalarField> for ScalarFn {
    fn from(f: &ScalarField) -> Self {
        Self::new(f.clone())
    }
}

/// Shared handle to any evaluable vector field.
#[derive(Clone)]
pub struct VectorFn(Arc<dyn EvalVector>);

impl fmt::Debug for VectorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl VectorFn {
    pub fn new<V: EvalVector + 'static>(v: V) -> Self {
        Self(Arc::new(v))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn value(&self, x: &Point) -> Result<Point> {
        self.0.value(x)
    }

    pub fn jacobian(&self, x: &Point) -> Result<Matrix> {
        self.0.jacobian(x)
    }

    pub fn divergence(&self, x: &Point) -> Result<f64> {
        self.0.divergence(x)
    }
}

impl EvalVector for VectorFn {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Point) -> Result<Point> {
        self.0.value(x)
    }
    fn jacobian(&self, x: &Point) -> Result<Matrix> {
        self.0.jacobian(x)
    }
    fn divergence(&self, x: &Point) -> Result<f64> {
        self.0.divergence(x)
    }
}

impl From<VectorField> for VectorFn {
    fn from(g: VectorField) -> Self {
        Self::new(g)
    }
}

impl From<&VectorField> for VectorFn {
    fn from(g: &VectorField) -> Self {
        Self::new(g.clone())
    }
}

/// Linear combination `sum c_k f_k` of evaluable scalars.
#[derive(Debug)]
struct Combination {
    terms: Vec<(f64, ScalarFn)>,
}

impl EvalScalar for Combination {
    fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, f)| f.dim())
    }

    fn support_hint(&self) -> Vec<Ball> {
        self.terms.iter().flat_map(|(_, f)| f.support_hint()).collect()
    }

    fn value(&self, x: &Point) -> Result<f64> {
        let mut acc = 0.0;
        for (c, f) in &self.terms {
            acc += c * f.value(x)?;
        }
        Ok(acc)
    }

    fn gradient(&self, x: &Point) -> Result<Point> {
        let mut acc = Point::zeros(x.len());
        for (c, f) in &self.terms {
            acc.axpy(*c, &f.gradient(x)?, 1.0);
        }
        Ok(acc)
    }
}

/// `[g1, g2] = g1 . grad g2 - g2 . grad g1`, evaluated from first
/// derivatives of the operands; its own Jacobian is by finite differences.
#[derive(Debug)]
pub struct LieBracket {
    left: VectorFn,
    right: VectorFn,
}

impl EvalVector for LieBracket {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn value(&self, x: &Point) -> Result<Point> {
        let a = self.left.value(x)?;
        let b = self.right.value(x)?;
        Ok(self.right.jacobian(x)? * a - self.left.jacobian(x)? * b)
    }
}

pub fn lie_bracket(g1: impl Into<VectorFn>, g2: impl Into<VectorFn>) -> Result<VectorFn> {
    let (left, right) = (g1.into(), g2.into());
    check_dim(left.dim(), right.dim())?;
    Ok(VectorFn::new(LieBracket { left, right }))
}

/// `x -> g(x) . grad f(x)`, the Lie derivative of `f` along `g`.
#[derive(Debug)]
pub struct DirectionalDerivative {
    field: VectorFn,
    scalar: ScalarFn,
}

impl EvalScalar for DirectionalDerivative {
    fn dim(&self) -> usize {
        self.scalar.dim()
    }

    fn value(&self, x: &Point) -> Result<f64> {
        Ok(self.field.value(x)?.dot(&self.scalar.gradient(x)?))
    }
}

pub fn directional_derivative(g: impl Into<VectorFn>, f: impl Into<ScalarFn>) -> Result<ScalarFn> {
    let (field, scalar) = (g.into(), f.into());
    check_dim(field.dim(), scalar.dim())?;
    Ok(ScalarFn::new(DirectionalDerivative { field, scalar }))
}

/// Wire format shared by scalar and vector fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldDoc {
    pub dim: usize,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TermDoc {
    Bump { center: Vec<f64>, radius: f64, coeff: f64 },
    Translate { center: Vec<f64>, radius: f64, dir: Vec<f64> },
    Rotate { center: Vec<f64>, radius: f64, rate: f64 },
}

impl TryFrom<FieldDoc> for ScalarField {
    type Error = KinematError;

    fn try_from(doc: FieldDoc) -> Result<Self> {
        let terms = doc
            .terms
            .into_iter()
            .map(|t| match t {
                TermDoc::Bump { center, radius, coeff } => {
                    Ok(BumpTerm { center: Point::from_vec(center), radius, coeff })
                }
                _ => Err(KinematError::InvalidField(
                    "scalar fields accept only \"bump\" terms".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.dim, terms)
    }
}

impl From<ScalarField> for FieldDoc {
    fn from(f: ScalarField) -> Self {
        let terms = f
            .terms
            .into_iter()
            .map(|t| TermDoc::Bump {
                center: t.center.as_slice().to_vec(),
                radius: t.radius,
                coeff: t.coeff,
            })
            .collect();
        FieldDoc { dim: f.dim, terms }
    }
}

impl TryFrom<FieldDoc> for VectorField {
    type Error = KinematError;

    fn try_from(doc: FieldDoc) -> Result<Self> {
        let terms = doc
            .terms
            .into_iter()
            .map(|t| match t {
                TermDoc::Translate { center, radius, dir } => Ok(VectorPrimitive::Translate {
                    center: Point::from_vec(center),
                    radius,
                    dir: Point::from_vec(dir),
                }),
                TermDoc::Rotate { center, radius, rate } => Ok(VectorPrimitive::Rotate {
                    center: Point::from_vec(center),
                    radius,
                    rate,
                }),
                TermDoc::Bump { .. } => Err(KinematError::InvalidField(
                    "vector fields accept only \"translate\" and \"rotate\" terms".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.dim, terms)
    }
}

impl From<VectorField> for FieldDoc {
    fn from(g: VectorField) -> Self {
        let terms = g
            .terms
            .into_iter()
            .map(|t| match t {
                VectorPrimitive::Translate { center, radius, dir } => TermDoc::Translate {
                    center: center.as_slice().to_vec(),
                    radius,
                    dir: dir.as_slice().to_vec(),
                },
                VectorPrimitive::Rotate { center, radius, rate } => TermDoc::Rotate {
                    center: center.as_slice().to_vec(),
                    radius,
                    rate,
                },
            })
            .collect();
        FieldDoc { dim: g.dim, terms }
    }
}
