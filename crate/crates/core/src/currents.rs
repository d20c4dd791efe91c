//! The N-particle representation of the local current algebra and of the
//! kinematical group on wavefunctions `Psi: configurations -> C^d`.
//!
//! Operators are applied lazily: every `*_apply` wraps its input, and
//! values are computed when the result is evaluated at a configuration.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::braid::{extract_braid, trace_path, BraidRep, CMatrix, CVector, C64};
use crate::config::{pair, Configuration};
use crate::error::{check_dim, KinematError, Result};
use crate::fields::{
    directional_derivative, lie_bracket, Ball, Point, ScalarFn, VectorFn, FD_STEP,
};
use crate::flows::{compose_scalar, Diffeo, COLLISION_LIMIT};
use crate::rng::{indexed, Rng};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(KinematError::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { hbar })
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0 }
    }
}

/// Evaluation contract of a wavefunction.
pub trait Wave: Send + Sync + fmt::Debug {
    /// Dimension `n` of the underlying space.
    fn dim(&self) -> usize;
    fn particles(&self) -> usize;
    /// Dimension `d` of the value space.
    fn value_dim(&self) -> usize;
    fn value(&self, gamma: &Configuration) -> Result<CVector>;

    /// `d x n` matrix of derivatives with respect to point `j`; central
    /// differences unless the implementor knows better.
    fn gradient(&self, j: usize, gamma: &Configuration) -> Result<CMatrix> {
        fd_gradient(self, j, gamma, FD_STEP)
    }

    /// Multiplication-operator factors stacked directly on a base, if any.
    fn multipliers(&self) -> Option<(&[ScalarFn], &Wavefunction)> {
        None
    }
}

/// Central-difference gradient with relative step `h`.
pub fn fd_gradient<W: Wave + ?Sized>(w: &W, j: usize, gamma: &Configuration, h: f64) -> Result<CMatrix> {
    check_shape(w, gamma)?;
    let x = &gamma.points()[j];
    let step = h * x.amax().max(1.0);
    let mut out = CMatrix::zeros(w.value_dim(), w.dim());
    for l in 0..w.dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[l] += step;
        xm[l] -= step;
        let d = (w.value(&gamma.with_point(j, xp))? - w.value(&gamma.with_point(j, xm))?) / C64::from(2.0 * step);
        out.set_column(l, &d);
    }
    Ok(out)
}

fn check_shape<W: Wave + ?Sized>(w: &W, gamma: &Configuration) -> Result<()> {
    check_dim(w.dim(), gamma.dim())?;
    if gamma.len() != w.particles() {
        return Err(KinematError::ParticleMismatch { expected: w.particles(), got: gamma.len() });
    }
    Ok(())
}

/// Shared handle to a wavefunction.
#[derive(Clone)]
pub struct Wavefunction(Arc<dyn Wave>);

impl fmt::Debug for Wavefunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Wavefunction {
    pub fn new<W: Wave + 'static>(w: W) -> Self {
        Self(Arc::new(w))
    }

    /// Same values, gradients by central differences with relative step `h`.
    pub fn finite_difference(&self, h: f64) -> Self {
        Self::new(FiniteDifference { inner: self.clone(), step: h })
    }
}

impl Wave for Wavefunction {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn particles(&self) -> usize {
        self.0.particles()
    }
    fn value_dim(&self) -> usize {
        self.0.value_dim()
    }
    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        self.0.value(gamma)
    }
    fn gradient(&self, j: usize, gamma: &Configuration) -> Result<CMatrix> {
        self.0.gradient(j, gamma)
    }
    fn multipliers(&self) -> Option<(&[ScalarFn], &Wavefunction)> {
        self.0.multipliers()
    }
}

#[derive(Debug)]
struct FiniteDifference {
    inner: Wavefunction,
    step: f64,
}

impl Wave for FiniteDifference {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn particles(&self) -> usize {
        self.inner.particles()
    }
    fn value_dim(&self) -> usize {
        self.inner.value_dim()
    }
    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        self.inner.value(gamma)
    }
    fn gradient(&self, j: usize, gamma: &Configuration) -> Result<CMatrix> {
        fd_gradient(self, j, gamma, self.step)
    }
}

/// `p(x) = constant + slope . (x - center)` multiplying one Gaussian factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub constant: C64,
    pub slope: Vec<C64>,
}

/// `coeff * prod_j p_j(x_j) exp(-|x_j - b_j|^2 / 2 s^2)` in one component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTerm {
    pub component: usize,
    pub coeff: C64,
    pub width: f64,
    pub centers: Vec<Point>,
    pub prefactors: Vec<Affine>,
}

/// Sums of products of Gaussians with affine prefactors, with analytic
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianWave {
    dim: usize,
    particles: usize,
    value_dim: usize,
    terms: Vec<GaussianTerm>,
}

impl GaussianWave {
    pub fn new(dim: usize, particles: usize, value_dim: usize, terms: Vec<GaussianTerm>) -> Result<Self> {
        if value_dim == 0 || particles == 0 {
            return Err(KinematError::InvalidArgument("empty wavefunction shape".into()));
        }
        for t in &terms {
            if t.component >= value_dim || !(t.width > 0.0) {
                return Err(KinematError::InvalidArgument("bad Gaussian term".into()));
            }
            if t.centers.len() != particles || t.prefactors.len() != particles {
                return Err(KinematError::ParticleMismatch { expected: particles, got: t.centers.len() });
            }
            for (b, p) in t.centers.iter().zip(&t.prefactors) {
                check_dim(dim, b.len())?;
                check_dim(dim, p.slope.len())?;
            }
        }
        Ok(Self { dim, particles, value_dim, terms })
    }

    /// Plain product of Gaussians in every component.
    pub fn isotropic(centers: Vec<Point>, width: f64, value_dim: usize) -> Result<Self> {
        let dim = centers.first().map_or(0, |c| c.len());
        let particles = centers.len();
        let terms = (0..value_dim)
            .map(|c| GaussianTerm {
                component: c,
                coeff: C64::new(1.0, 0.0),
                width,
                centers: centers.clone(),
                prefactors: vec![Affine { constant: C64::new(1.0, 0.0), slope: vec![C64::new(0.0, 0.0); dim] }; particles],
            })
            .collect();
        Self::new(dim, particles, value_dim, terms)
    }

    /// Random instance with centers in `[-spread, spread]^n`.
    pub fn random(rng: &mut Rng, dim: usize, particles: usize, value_dim: usize, spread: f64) -> Self {
        let cplx = |rng: &mut Rng, s: f64| C64::new(rng.random_range(-s..s), rng.random_range(-s..s));
        let mut terms = Vec::new();
        for component in 0..value_dim {
            for _ in 0..2 {
                let centers = (0..particles)
                    .map(|_| Point::from_fn(dim, |_, _| rng.random_range(-spread..spread)))
                    .collect();
                let prefactors = (0..particles)
                    .map(|_| Affine { constant: cplx(rng, 1.0), slope: (0..dim).map(|_| cplx(rng, 1.0)).collect() })
                    .collect();
                terms.push(GaussianTerm {
                    component,
                    coeff: cplx(rng, 1.0),
                    width: rng.random_range(0.5..1.0),
                    centers,
                    prefactors,
                });
            }
        }
        Self { dim, particles, value_dim, terms }
    }

    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    /// Per-particle factors `p_j(x_j) g_j(x_j)` and their gradients.
    fn factors(t: &GaussianTerm, gamma: &Configuration) -> (Vec<C64>, Vec<Vec<C64>>) {
        let inv = 1.0 / (t.width * t.width);
        let mut vals = Vec::with_capacity(t.centers.len());
        let mut grads = Vec::with_capacity(t.centers.len());
        for ((x, b), p) in gamma.points().iter().zip(&t.centers).zip(&t.prefactors) {
            let d = x - b;
            let g = (-0.5 * d.norm_squared() * inv).exp();
            let a = p.constant + p.slope.iter().zip(d.iter()).map(|(s, dl)| s * dl).sum::<C64>();
            vals.push(a * g);
            grads.push((0..d.len()).map(|l| (p.slope[l] - a * (d[l] * inv)) * g).collect());
        }
        (vals, grads)
    }
}

impl Wave for GaussianWave {
    fn dim(&self) -> usize {
        self.dim
    }
    fn particles(&self) -> usize {
        self.particles
    }
    fn value_dim(&self) -> usize {
        self.value_dim
    }

    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        check_shape(self, gamma)?;
        let mut out = CVector::zeros(self.value_dim);
        for t in &self.terms {
            let (vals, _) = Self::factors(t, gamma);
            out[t.component] += t.coeff * vals.iter().product::<C64>();
        }
        Ok(out)
    }

    fn gradient(&self, j: usize, gamma: &Configuration) -> Result<CMatrix> {
        check_shape(self, gamma)?;
        let mut out = CMatrix::zeros(self.value_dim, self.dim);
        for t in &self.terms {
            let (vals, grads) = Self::factors(t, gamma);
            let others: C64 = vals.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| v).product();
            for l in 0..self.dim {
                out[(t.component, l)] += t.coeff * others * grads[j][l];
            }
        }
        Ok(out)
    }
}

/// `rho(f1) ... rho(fk) Psi`. Multipliers are combined in sorted order so
/// that products of commuting multiplication operators agree bit for bit.
#[derive(Debug)]
struct Multiplied {
    factors: Vec<ScalarFn>,
    base: Wavefunction,
}

impl Multiplied {
    fn multiplier(&self, gamma: &Configuration) -> Result<f64> {
        let mut values = self.factors.iter().map(|f| pair(gamma, f)).collect::<Result<Vec<_>>>()?;
        values.sort_by(f64::total_cmp);
        Ok(values.iter().product())
    }
}

impl Wave for Multiplied {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn particles(&self) -> usize {
        self.base.particles()
    }
    fn value_dim(&self) -> usize {
        self.base.value_dim()
    }

    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        Ok(self.base.value(gamma)? * C64::from(self.multiplier(gamma)?))
    }

    fn gradient(&self, j: usize, gamma: &Configuration) -> Result<CMatrix> {
        let psi = self.base.value(gamma)?;
        let x = &gamma.points()[j];
        let m = gamma.masses()[j];
        let values = self.factors.iter().map(|f| pair(gamma, f)).collect::<Result<Vec<_>>>()?;
        // product rule over the factors
        let mut grad_m = Point::zeros(self.dim());
        for (k, f) in self.factors.iter().enumerate() {
            let rest: f64 = values.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).product();
            grad_m += f.gradient(x)? * (m * rest);
        }
        let outer = CMatrix::from_fn(self.value_dim(), self.dim(), |c, l| psi[c] * grad_m[l]);
        Ok(outer + self.base.gradient(j, gamma)? * C64::from(self.multiplier(gamma)?))
    }

    fn multipliers(&self) -> Option<(&[ScalarFn], &Wavefunction)> {
        Some((&self.factors, &self.base))
    }
}

/// `[rho(f) Psi](gamma) = <gamma, f> Psi(gamma)`.
pub fn rho_apply(f: impl Into<ScalarFn>, psi: &Wavefunction) -> Result<Wavefunction> {
    let f = f.into();
    check_dim(psi.dim(), f.dim())?;
    let (mut factors, base) = match psi.multipliers() {
        Some((fs, base)) => (fs.to_vec(), base.clone()),
        None => (Vec::new(), psi.clone()),
    };
    factors.push(f);
    Ok(Wavefunction::new(Multiplied { factors, base }))
}

#[derive(Debug)]
struct Current {
    field: VectorFn,
    base: Wavefunction,
    hbar: f64,
}

impl Wave for Current {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn particles(&self) -> usize {
        self.base.particles()
    }
    fn value_dim(&self) -> usize {
        self.base.value_dim()
    }

    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        let psi = self.base.value(gamma)?;
        let mut acc = CVector::zeros(self.value_dim());
        for (j, x) in gamma.points().iter().enumerate() {
            let g = self.field.value(x)?;
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let grad = self.base.gradient(j, gamma)?;
            let gc = CVector::from_iterator(g.len(), g.iter().map(|&v| C64::from(v)));
            acc += grad * gc + &psi * C64::from(0.5 * self.field.divergence(x)?);
        }
        Ok(acc * (-I * self.hbar))
    }
}

/// `[J(g) Psi](gamma) = (hbar / i) sum_j [g(x_j) . grad_j Psi + (div g)(x_j) Psi / 2]`.
pub fn j_apply(g: impl Into<VectorFn>, psi: &Wavefunction, c: PhysicalConstants) -> Result<Wavefunction> {
    let field = g.into();
    check_dim(psi.dim(), field.dim())?;
    Ok(Wavefunction::new(Current { field, base: psi.clone(), hbar: c.hbar }))
}

#[derive(Debug)]
struct Phase {
    f: ScalarFn,
    base: Wavefunction,
}

impl Wave for Phase {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn particles(&self) -> usize {
        self.base.particles()
    }
    fn value_dim(&self) -> usize {
        self.base.value_dim()
    }

    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        Ok(self.base.value(gamma)? * C64::from_polar(1.0, pair(gamma, &self.f)?))
    }

    fn gradient(&self, j: usize, gamma: &Configuration) -> Result<CMatrix> {
        let phase = C64::from_polar(1.0, pair(gamma, &self.f)?);
        let psi = self.base.value(gamma)?;
        let df = self.f.gradient(&gamma.points()[j])? * gamma.masses()[j];
        let outer = CMatrix::from_fn(self.value_dim(), self.dim(), |c, l| I * psi[c] * df[l]);
        Ok((outer + self.base.gradient(j, gamma)?) * phase)
    }
}

/// `[U(f) Psi](gamma) = e^{i <gamma, f>} Psi(gamma)`.
pub fn u_apply(f: impl Into<ScalarFn>, psi: &Wavefunction) -> Result<Wavefunction> {
    let f = f.into();
    check_dim(psi.dim(), f.dim())?;
    Ok(Wavefunction::new(Phase { f, base: psi.clone() }))
}

#[derive(Debug)]
struct Transported {
    phi: Diffeo,
    rep: Option<BraidRep>,
    base: Wavefunction,
}

impl Wave for Transported {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn particles(&self) -> usize {
        self.base.particles()
    }
    fn value_dim(&self) -> usize {
        self.base.value_dim()
    }

    fn value(&self, gamma: &Configuration) -> Result<CVector> {
        check_shape(self, gamma)?;
        let mut moved = Vec::with_capacity(gamma.len());
        let mut density = 1.0;
        for x in gamma.points() {
            let (y, jac) = self.phi.apply_with_jacobian(x)?;
            density *= jac.determinant().abs();
            moved.push(y);
        }
        let moved = gamma.with_points_unchecked(moved);
        let sep = moved.min_separation();
        if sep < COLLISION_LIMIT {
            return Err(KinematError::NearCollision { separation: sep, limit: COLLISION_LIMIT });
        }
        let w = self.base.value(&moved)? * C64::from(density.sqrt());
        match &self.rep {
            None => Ok(w),
            Some(rep) => Ok(braid_cocycle(&self.phi, gamma, rep)? * w),
        }
    }
}

/// `chi_phi(gamma)`: the representation matrix of the braid traced by
/// `gamma` under `phi`.
pub fn braid_cocycle(phi: &Diffeo, gamma: &Configuration, rep: &BraidRep) -> Result<CMatrix> {
    rep.eval(&extract_braid(&trace_path(phi, gamma)?)?)
}

/// `[V(phi) Psi](gamma) = chi_phi(gamma) Psi(phi gamma) sqrt(prod_j |det D phi(x_j)|)`,
/// with `chi = 1` when no representation is given.
pub fn v_apply(
    phi: &Diffeo,
    rep: Option<&BraidRep>,
    psi: &Wavefunction,
    _c: PhysicalConstants,
) -> Result<Wavefunction> {
    check_dim(psi.dim(), phi.dim())?;
    if let Some(r) = rep {
        if phi.dim() != 2 {
            return Err(KinematError::DimensionMismatch { expected: 2, got: phi.dim() });
        }
        if r.strands() != psi.particles() {
            return Err(KinematError::StrandMismatch { expected: psi.particles(), got: r.strands() });
        }
        if r.dim() != psi.value_dim() {
            return Err(KinematError::InvalidRepresentation(format!(
                "representation dimension {} does not match value dimension {}",
                r.dim(),
                psi.value_dim()
            )));
        }
    }
    Ok(Wavefunction::new(Transported { phi: phi.clone(), rep: rep.cloned(), base: psi.clone() }))
}

/// Maximum and mean of normalized residuals over sample configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
}

impl ResidualStats {
    pub fn passes(&self, tol: f64) -> bool {
        self.max <= tol
    }
}

fn residual_stats(
    samples: &[Configuration],
    mut residual: impl FnMut(&Configuration) -> Result<f64>,
) -> Result<ResidualStats> {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for gamma in samples {
        let r = residual(gamma)?;
        if r.is_nan() {
            return Err(KinematError::InvalidArgument("residual evaluated to NaN".into()));
        }
        max = max.max(r);
        sum += r;
    }
    Ok(ResidualStats { max, mean: if samples.is_empty() { 0.0 } else { sum / samples.len() as f64 }, samples: samples.len() })
}

fn normalized(diff: &CVector, psi: &CVector) -> f64 {
    diff.norm() / (1.0 + psi.norm())
}

/// `[rho(f), J(g)] Psi - i hbar rho(g . grad f) Psi`, normalized by `1 + |Psi|`.
pub fn commutator_residual_rho_j(
    f: impl Into<ScalarFn>,
    g: impl Into<VectorFn>,
    psi: &Wavefunction,
    samples: &[Configuration],
    c: PhysicalConstants,
) -> Result<ResidualStats> {
    let (f, g) = (f.into(), g.into());
    let rho_j = rho_apply(f.clone(), &j_apply(g.clone(), psi, c)?)?;
    let j_rho = j_apply(g.clone(), &rho_apply(f.clone(), psi)?, c)?;
    let rhs = rho_apply(directional_derivative(g, f)?, psi)?;
    residual_stats(samples, |gamma| {
        let lhs = rho_j.value(gamma)? - j_rho.value(gamma)?;
        let diff = lhs - rhs.value(gamma)? * (I * c.hbar);
        Ok(normalized(&diff, &psi.value(gamma)?))
    })
}

/// `[J(g1), J(g2)] Psi + i hbar J([g1, g2]) Psi`, normalized by `1 + |Psi|`.
pub fn commutator_residual_j_j(
    g1: impl Into<VectorFn>,
    g2: impl Into<VectorFn>,
    psi: &Wavefunction,
    samples: &[Configuration],
    c: PhysicalConstants,
) -> Result<ResidualStats> {
    let (g1, g2) = (g1.into(), g2.into());
    let a = j_apply(g1.clone(), &j_apply(g2.clone(), psi, c)?, c)?;
    let b = j_apply(g2.clone(), &j_apply(g1.clone(), psi, c)?, c)?;
    let rhs = j_apply(lie_bracket(g1, g2)?, psi, c)?;
    residual_stats(samples, |gamma| {
        let diff = a.value(gamma)? - b.value(gamma)? + rhs.value(gamma)? * (I * c.hbar);
        Ok(normalized(&diff, &psi.value(gamma)?))
    })
}

/// `[rho(f1), rho(f2)] Psi` without normalization; zero bit for bit.
pub fn commutator_residual_rho_rho(
    f1: impl Into<ScalarFn>,
    f2: impl Into<ScalarFn>,
    psi: &Wavefunction,
    samples: &[Configuration],
) -> Result<ResidualStats> {
    let (f1, f2) = (f1.into(), f2.into());
    let a = rho_apply(f1.clone(), &rho_apply(f2.clone(), psi)?)?;
    let b = rho_apply(f2, &rho_apply(f1, psi)?)?;
    residual_stats(samples, |gamma| Ok((a.value(gamma)? - b.value(gamma)?).norm()))
}

/// Coefficients of the current algebra: `[rho(f), J(g)] = rho_j rho(g . grad f)`
/// and `[J(g1), J(g2)] = j_j J([g1, g2])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstants {
    pub rho_j: C64,
    pub j_j: C64,
}

impl StructureConstants {
    pub fn canonical(c: PhysicalConstants) -> Self {
        Self { rho_j: I * c.hbar, j_j: -I * c.hbar }
    }
}

/// Cyclic sum `[rho(f), [J1, J2]] + [J1, [J2, rho(f)]] + [J2, [rho(f), J1]]`
/// applied to `Psi`, with the inner brackets replaced through the structure
/// constants and the outer ones computed as operator commutators.
pub fn jacobi_residual(
    f: impl Into<ScalarFn>,
    g1: impl Into<VectorFn>,
    g2: impl Into<VectorFn>,
    psi: &Wavefunction,
    samples: &[Configuration],
    c: PhysicalConstants,
    sc: StructureConstants,
) -> Result<ResidualStats> {
    let (f, g1, g2) = (f.into(), g1.into(), g2.into());
    let bracket = lie_bracket(g1.clone(), g2.clone())?;
    let k1 = directional_derivative(g1.clone(), f.clone())?;
    let k2 = directional_derivative(g2.clone(), f.clone())?;
    // [rho(f), J(h)]
    let t1a = rho_apply(f.clone(), &j_apply(bracket.clone(), psi, c)?)?;
    let t1b = j_apply(bracket, &rho_apply(f, psi)?, c)?;
    // [J1, rho(k2)]
    let t2a = j_apply(g1.clone(), &rho_apply(k2.clone(), psi)?, c)?;
    let t2b = rho_apply(k2, &j_apply(g1, psi, c)?)?;
    // [J2, rho(k1)]
    let t3a = j_apply(g2.clone(), &rho_apply(k1.clone(), psi)?, c)?;
    let t3b = rho_apply(k1, &j_apply(g2, psi, c)?)?;
    residual_stats(samples, |gamma| {
        let t1 = (t1a.value(gamma)? - t1b.value(gamma)?) * sc.j_j;
        let t2 = (t2a.value(gamma)? - t2b.value(gamma)?) * (-sc.rho_j);
        let t3 = (t3a.value(gamma)? - t3b.value(gamma)?) * sc.rho_j;
        Ok(normalized(&(t1 + t2 + t3), &psi.value(gamma)?))
    })
}

/// Steps of the difference quotient `(U(s f) - I) Psi / (i s)`.
pub const STONE_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Richardson-extrapolated limit of `(U(s f) - I) Psi(gamma) / (i s)` as
/// `s -> 0`.
pub fn stone_generator_estimate(f: impl Into<ScalarFn>, psi: &Wavefunction, gamma: &Configuration) -> Result<CVector> {
    let f = f.into();
    let psi0 = psi.value(gamma)?;
    let quotient = |s: f64| -> Result<CVector> {
        let shifted = u_apply(f.scale(s), psi)?.value(gamma)?;
        Ok((shifted - &psi0) * (-I / s))
    };
    let [s0, s1, s2] = STONE_STEPS;
    let (d0, d1, d2) = (quotient(s0)?, quotient(s1)?, quotient(s2)?);
    let r0 = &d1 * C64::from(2.0) - d0;
    let r1 = &d2 * C64::from(2.0) - d1;
    Ok((r1 * C64::from(4.0) - r0) / C64::from(3.0))
}

/// Deviation of the extrapolated Stone generator from `rho(f) Psi`.
pub fn stone_residual(f: impl Into<ScalarFn>, psi: &Wavefunction, samples: &[Configuration]) -> Result<ResidualStats> {
    let f = f.into();
    let rho = rho_apply(f.clone(), psi)?;
    residual_stats(samples, |gamma| {
        let diff = stone_generator_estimate(f.clone(), psi, gamma)? - rho.value(gamma)?;
        Ok(normalized(&diff, &psi.value(gamma)?))
    })
}

/// `V(phi) U(f) Psi - U(f o phi) V(phi) Psi`.
pub fn intertwining_residual(
    f: impl Into<ScalarFn>,
    phi: &Diffeo,
    rep: Option<&BraidRep>,
    psi: &Wavefunction,
    samples: &[Configuration],
    c: PhysicalConstants,
) -> Result<ResidualStats> {
    let f = f.into();
    let lhs = v_apply(phi, rep, &u_apply(f.clone(), psi)?, c)?;
    let rhs = u_apply(compose_scalar(f, phi)?, &v_apply(phi, rep, psi, c)?)?;
    residual_stats(samples, |gamma| Ok((lhs.value(gamma)? - rhs.value(gamma)?).norm()))
}

/// `V(phi1) V(phi2) Psi - V(phi1 phi2) Psi`.
pub fn v_compose_residual(
    phi1: &Diffeo,
    phi2: &Diffeo,
    rep: Option<&BraidRep>,
    psi: &Wavefunction,
    samples: &[Configuration],
    c: PhysicalConstants,
) -> Result<ResidualStats> {
    let lhs = v_apply(phi1, rep, &v_apply(phi2, rep, psi, c)?, c)?;
    let rhs = v_apply(&phi1.compose(phi2)?, rep, psi, c)?;
    residual_stats(samples, |gamma| Ok((lhs.value(gamma)? - rhs.value(gamma)?).norm()))
}

/// Frobenius norm of `chi_{phi1 phi2}(gamma) - chi_{phi1}(gamma) chi_{phi2}(phi1 gamma)`.
pub fn cocycle_residual(phi1: &Diffeo, phi2: &Diffeo, gamma: &Configuration, rep: &BraidRep) -> Result<f64> {
    let whole = braid_cocycle(&phi1.compose(phi2)?, gamma, rep)?;
    let first = braid_cocycle(phi1, gamma, rep)?;
    let moved = crate::config::act(phi1, gamma)?;
    let second = braid_cocycle(phi2, &moved, rep)?;
    Ok((whole - first * second).norm())
}

/// Independent uniform points in a box, configurations closer than
/// [`COLLISION_LIMIT`] to the diagonal rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSampler {
    lo: Vec<f64>,
    hi: Vec<f64>,
    masses: Vec<f64>,
}

impl BoxSampler {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) || masses.is_empty() {
            return Err(KinematError::InvalidArgument("degenerate sampling box".into()));
        }
        Ok(Self { lo, hi, masses })
    }

    /// Smallest axis-aligned box containing all balls, enlarged by `margin`.
    pub fn containing(balls: &[Ball], dim: usize, margin: f64, masses: Vec<f64>) -> Result<Self> {
        let mut lo = vec![-margin; dim];
        let mut hi = vec![margin; dim];
        if !balls.is_empty() {
            lo = vec![f64::INFINITY; dim];
            hi = vec![f64::NEG_INFINITY; dim];
            for b in balls {
                for k in 0..dim {
                    lo[k] = lo[k].min(b.center[k] - b.radius - margin);
                    hi[k] = hi[k].max(b.center[k] + b.radius + margin);
                }
            }
        }
        Self::new(lo, hi, masses)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    /// Volume of the sampled region of configuration space.
    pub fn volume(&self) -> f64 {
        let cell: f64 = self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product();
        cell.powi(self.masses.len() as i32)
    }

    pub fn sample(&self, rng: &mut Rng) -> Configuration {
        loop {
            let points: Vec<Point> = (0..self.masses.len())
                .map(|_| Point::from_fn(self.dim(), |k, _| rng.random_range(self.lo[k]..self.hi[k])))
                .collect();
            if let Ok(c) = Configuration::new(points, self.masses.clone()) {
                if c.min_separation() >= COLLISION_LIMIT {
                    return c;
                }
            }
        }
    }
}

/// Monte-Carlo estimate of an integral and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub re: f64,
    pub im: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    /// Whether `|estimate - expected| <= k` standard errors.
    pub fn within(&self, expected: C64, k: f64) -> bool {
        (self.value() - expected).norm() <= k * self.std_error
    }
}

/// Number of samples drawn from one random substream.
pub const MC_CHUNK: usize = 2048;

/// Estimates `int integrand` over the sampler's region. Samples are drawn in
/// fixed chunks, each from its own substream of `seed`, and chunk sums are
/// combined in chunk order, so the result does not depend on thread count.
pub fn mc_estimate<F>(sampler: &BoxSampler, count: usize, seed: u64, label: &str, integrand: F) -> Result<McEstimate>
where
    F: Fn(&Configuration) -> Result<C64> + Sync,
{
    if count < 2 {
        return Err(KinematError::InvalidArgument("need at least two Monte-Carlo samples".into()));
    }
    let chunks = count.div_ceil(MC_CHUNK);
    let partial: Vec<Result<(C64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = indexed(seed, &["mc", label], k);
            let size = MC_CHUNK.min(count - k * MC_CHUNK);
            let mut sum = C64::new(0.0, 0.0);
            let mut sum_sq = 0.0;
            for _ in 0..size {
                let v = integrand(&sampler.sample(&mut rng))?;
                sum += v;
                sum_sq += v.norm_sqr();
            }
            Ok((sum, sum_sq))
        })
        .collect();
    let mut sum = C64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    for p in partial {
        let (s, q) = p?;
        sum += s;
        sum_sq += q;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0);
    let vol = sampler.volume();
    let value = mean * vol;
    Ok(McEstimate { re: value.re, im: value.im, std_error: vol * (var / n).sqrt(), samples: count })
}

/// `(Psi1, Psi2) = int <Psi1(gamma), Psi2(gamma)> dgamma` over the box.
pub fn mc_inner_product(
    psi1: &Wavefunction,
    psi2: &Wavefunction,
    sampler: &BoxSampler,
    count: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_estimate(sampler, count, seed, "inner", |gamma| Ok(psi1.value(gamma)?.dotc(&psi2.value(gamma)?)))
}

/// Paired estimate of `(V Psi, V Psi) - (Psi, Psi)`: both norms are
/// integrated on the same samples so their common fluctuation cancels.
pub fn mc_norm_change(
    transformed: &Wavefunction,
    psi: &Wavefunction,
    sampler: &BoxSampler,
    count: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_estimate(sampler, count, seed, "norm-change", |gamma| {
        Ok(C64::from(transformed.value(gamma)?.norm_squared() - psi.value(gamma)?.norm_squared()))
    })
}
