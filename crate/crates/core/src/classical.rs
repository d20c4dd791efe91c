//! Classical phase space of N distinct particles, Poisson brackets, and the
//! classical density and current observables.

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{check_dim, KinematError, Result};
use crate::fields::{fd_step_at, lie_bracket, directional_derivative, Point, ScalarFn, VectorFn};
use crate::rng::Rng;

/// `(x_1, p_1; ...; x_N, p_N)` with pairwise distinct positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    positions: Vec<Point>,
    momenta: Vec<Point>,
}

impl PhasePoint {
    pub fn new(positions: Vec<Point>, momenta: Vec<Point>) -> Result<Self> {
        if positions.is_empty() {
            return Err(KinematError::InvalidArgument("a phase point needs at least one particle".into()));
        }
        if positions.len() != momenta.len() {
            return Err(KinematError::ParticleMismatch { expected: positions.len(), got: momenta.len() });
        }
        let dim = positions[0].len();
        for (x, p) in positions.iter().zip(&momenta) {
            check_dim(dim, x.len())?;
            check_dim(dim, p.len())?;
        }
        for a in 0..positions.len() {
            for b in a + 1..positions.len() {
                if positions[a] == positions[b] {
                    return Err(KinematError::InvalidConfiguration("positions must be pairwise distinct".into()));
                }
            }
        }
        Ok(Self { positions, momenta })
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn particles(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn momenta(&self) -> &[Point] {
        &self.momenta
    }

    /// The configuration carried by the positions.
    pub fn configuration(&self, masses: &[f64]) -> Result<Configuration> {
        Configuration::new(self.positions.clone(), masses.to_vec())
    }

    /// Positions uniform in `[-half_width, half_width]^n`, momenta in
    /// `[-p_max, p_max]^n`.
    pub fn random(rng: &mut Rng, dim: usize, particles: usize, half_width: f64, p_max: f64) -> Self {
        loop {
            let positions = (0..particles)
                .map(|_| Point::from_fn(dim, |_, _| rng.random_range(-half_width..half_width)))
                .collect();
            let momenta = (0..particles).map(|_| Point::from_fn(dim, |_, _| rng.random_range(-p_max..p_max))).collect();
            if let Ok(z) = Self::new(positions, momenta) {
                return z;
            }
        }
    }

    fn shifted(&self, momentum: bool, j: usize, l: usize, h: f64) -> Self {
        let mut z = self.clone();
        if momentum {
            z.momenta[j][l] += h;
        } else {
            z.positions[j][l] += h;
        }
        z
    }
}

/// A smooth function on phase space with partial derivatives.
pub trait Observable: Send + Sync + fmt::Debug {
    fn value(&self, z: &PhasePoint) -> Result<f64>;

    /// `d/dx_j`; central differences unless the implementor knows better.
    fn d_position(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        fd_partial(self, z, j, false)
    }

    /// `d/dp_j`; central differences unless the implementor knows better.
    fn d_momentum(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        fd_partial(self, z, j, true)
    }
}

fn fd_partial<O: Observable + ?Sized>(obs: &O, z: &PhasePoint, j: usize, momentum: bool) -> Result<Point> {
    let base = if momentum { &z.momenta[j] } else { &z.positions[j] };
    let h = fd_step_at(base);
    let mut out = Point::zeros(z.dim());
    for l in 0..z.dim() {
        out[l] = (obs.value(&z.shifted(momentum, j, l, h))? - obs.value(&z.shifted(momentum, j, l, -h))?) / (2.0 * h);
    }
    Ok(out)
}

/// Shared handle to an observable.
#[derive(Clone)]
pub struct ObservableFn(Arc<dyn Observable>);

impl fmt::Debug for ObservableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl ObservableFn {
    pub fn new<O: Observable + 'static>(o: O) -> Self {
        Self(Arc::new(o))
    }

    /// Same values with finite-difference partials.
    pub fn finite_difference(&self) -> Self {
        Self::new(FiniteDifference(self.clone()))
    }

    pub fn product(&self, other: &ObservableFn) -> Self {
        Self::new(Product(self.clone(), other.clone()))
    }
}

impl Observable for ObservableFn {
    fn value(&self, z: &PhasePoint) -> Result<f64> {
        self.0.value(z)
    }
    fn d_position(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        self.0.d_position(z, j)
    }
    fn d_momentum(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        self.0.d_momentum(z, j)
    }
}

#[derive(Debug)]
struct FiniteDifference(ObservableFn);

impl Observable for FiniteDifference {
    fn value(&self, z: &PhasePoint) -> Result<f64> {
        self.0.value(z)
    }
}

#[derive(Debug)]
struct Product(ObservableFn, ObservableFn);

impl Observable for Product {
    fn value(&self, z: &PhasePoint) -> Result<f64> {
        Ok(self.0.value(z)? * self.1.value(z)?)
    }
    fn d_position(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        Ok(self.0.d_position(z, j)? * self.1.value(z)? + self.1.d_position(z, j)? * self.0.value(z)?)
    }
    fn d_momentum(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        Ok(self.0.d_momentum(z, j)? * self.1.value(z)? + self.1.d_momentum(z, j)? * self.0.value(z)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateKind {
    Position,
    Momentum,
}

/// `x_j^l` or `p_j^l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coordinate {
    pub kind: CoordinateKind,
    pub particle: usize,
    pub component: usize,
}

impl Coordinate {
    fn unit(&self, z: &PhasePoint, j: usize, kind: CoordinateKind) -> Point {
        let mut e = Point::zeros(z.dim());
        if j == self.particle && kind == self.kind {
            e[self.component] = 1.0;
        }
        e
    }
}

impl Observable for Coordinate {
    fn value(&self, z: &PhasePoint) -> Result<f64> {
        let v = match self.kind {
            CoordinateKind::Position => z.positions.get(self.particle),
            CoordinateKind::Momentum => z.momenta.get(self.particle),
        };
        v.and_then(|p| p.get(self.component).copied())
            .ok_or_else(|| KinematError::InvalidArgument("coordinate index out of range".into()))
    }
    fn d_position(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        Ok(self.unit(z, j, CoordinateKind::Position))
    }
    fn d_momentum(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        Ok(self.unit(z, j, CoordinateKind::Momentum))
    }
}

pub fn position(particle: usize, component: usize) -> ObservableFn {
    ObservableFn::new(Coordinate { kind: CoordinateKind::Position, particle, component })
}

pub fn momentum(particle: usize, component: usize) -> ObservableFn {
    ObservableFn::new(Coordinate { kind: CoordinateKind::Momentum, particle, component })
}

/// `sum_j m_j f(x_j)`.
#[derive(Debug)]
struct Density {
    f: ScalarFn,
    masses: Vec<f64>,
}

impl Observable for Density {
    fn value(&self, z: &PhasePoint) -> Result<f64> {
        check_particles(&self.masses, z)?;
        let mut acc = 0.0;
        for (x, m) in z.positions.iter().zip(&self.masses) {
            acc += m * self.f.value(x)?;
        }
        Ok(acc)
    }
    fn d_position(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        Ok(self.f.gradient(&z.positions[j])? * self.masses[j])
    }
    fn d_momentum(&self, z: &PhasePoint, _j: usize) -> Result<Point> {
        Ok(Point::zeros(z.dim()))
    }
}

fn check_particles(masses: &[f64], z: &PhasePoint) -> Result<()> {
    if masses.len() != z.particles() {
        return Err(KinematError::ParticleMismatch { expected: masses.len(), got: z.particles() });
    }
    Ok(())
}

/// `sum_j g(x_j) . p_j`.
#[derive(Debug)]
struct CurrentDensity {
    g: VectorFn,
}

impl Observable for CurrentDensity {
    fn value(&self, z: &PhasePoint) -> Result<f64> {
        let mut acc = 0.0;
        for (x, p) in z.positions.iter().zip(&z.momenta) {
            acc += self.g.value(x)?.dot(p);
        }
        Ok(acc)
    }
    fn d_position(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        Ok(self.g.jacobian(&z.positions[j])?.transpose() * &z.momenta[j])
    }
    fn d_momentum(&self, z: &PhasePoint, j: usize) -> Result<Point> {
        self.g.value(&z.positions[j])
    }
}

pub fn make_rho_cl(f: impl Into<ScalarFn>, masses: &[f64]) -> ObservableFn {
    ObservableFn::new(Density { f: f.into(), masses: masses.to_vec() })
}

pub fn make_j_cl(g: impl Into<VectorFn>) -> ObservableFn {
    ObservableFn::new(CurrentDensity { g: g.into() })
}

/// `{F, G} = sum_j sum_l dF/dx_j^l dG/dp_j^l - dF/dp_j^l dG/dx_j^l`.
pub fn poisson(f: &(impl Observable + ?Sized), g: &(impl Observable + ?Sized), z: &PhasePoint) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..z.particles() {
        acc += f.d_position(z, j)?.dot(&g.d_momentum(z, j)?) - f.d_momentum(z, j)?.dot(&g.d_position(z, j)?);
    }
    Ok(acc)
}

/// Largest deviations of the classical current-algebra identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceResiduals {
    /// `{rho(f), rho(f')}`
    pub rho_rho: f64,
    /// `{rho(f), J(g)} - rho(g . grad f)`
    pub rho_j: f64,
    /// `{J(g), J(g')} + J([g, g'])`
    pub j_j: f64,
}

impl CorrespondenceResiduals {
    pub fn max(&self) -> f64 {
        self.rho_rho.max(self.rho_j).max(self.j_j)
    }
}

pub fn correspondence_residuals(
    f: impl Into<ScalarFn>,
    f2: impl Into<ScalarFn>,
    g: impl Into<VectorFn>,
    g2: impl Into<VectorFn>,
    masses: &[f64],
    samples: &[PhasePoint],
) -> Result<CorrespondenceResiduals> {
    let (f, f2, g, g2) = (f.into(), f2.into(), g.into(), g2.into());
    let rho_f = make_rho_cl(f.clone(), masses);
    let rho_f2 = make_rho_cl(f2, masses);
    let j_g = make_j_cl(g.clone());
    let j_g2 = make_j_cl(g2.clone());
    let rho_gf = make_rho_cl(directional_derivative(g.clone(), f)?, masses);
    let j_bracket = make_j_cl(lie_bracket(g, g2)?);
    let mut out = CorrespondenceResiduals { rho_rho: 0.0, rho_j: 0.0, j_j: 0.0 };
    for z in samples {
        out.rho_rho = out.rho_rho.max(poisson(&rho_f, &rho_f2, z)?.abs());
        out.rho_j = out.rho_j.max((poisson(&rho_f, &j_g, z)? - rho_gf.value(z)?).abs());
        out.j_j = out.j_j.max((poisson(&j_g, &j_g2, z)? + j_bracket.value(z)?).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::pair;
    use crate::fields::{BumpProfile, ScalarField, VectorField};
    use crate::rng::substream;
    use nalgebra::dvector;

    fn points(seed: u64, dim: usize, particles: usize, count: usize) -> Vec<PhasePoint> {
        let mut rng = substream(seed, &["phase"]);
        (0..count).map(|_| PhasePoint::random(&mut rng, dim, particles, 1.0, 2.0)).collect()
    }

    #[test]
    fn canonical_brackets() {
        for z in points(1, 3, 2, 5) {
            for (j, k) in [(0, 0), (0, 1), (1, 1)] {
                for l in 0..3 {
                    for m in 0..3 {
                        let expected = if j == k && l == m { 1.0 } else { 0.0 };
                        assert_eq!(poisson(&position(j, l), &momentum(k, m), &z).unwrap(), expected);
                        assert_eq!(poisson(&position(j, l), &position(k, m), &z).unwrap(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn observable_examples() {
        let beta = BumpProfile::value(0.09);
        let f = ScalarField::bump(dvector![0.0], 1.0, 0.5 / beta).unwrap();
        let z = PhasePoint::new(vec![dvector![0.3]], vec![dvector![1.0]]).unwrap();
        assert!((make_rho_cl(f.clone(), &[2.0]).value(&z).unwrap() - 1.0).abs() < 1e-15);
        let g = VectorField::translate(dvector![0.0, 0.0], 1.0, dvector![1.0, 0.0]).unwrap();
        let z = PhasePoint::new(vec![dvector![0.0, 0.0]], vec![dvector![3.0, 4.0]]).unwrap();
        assert_eq!(make_j_cl(g.clone()).value(&z).unwrap(), 3.0);
        let still = PhasePoint::new(vec![dvector![0.2, 0.1]], vec![dvector![0.0, 0.0]]).unwrap();
        assert_eq!(make_j_cl(g.clone()).value(&still).unwrap(), 0.0);
        let far = PhasePoint::new(vec![dvector![4.0, 0.0]], vec![dvector![3.0, 4.0]]).unwrap();
        assert_eq!(make_j_cl(g).value(&far).unwrap(), 0.0);
    }

    #[test]
    fn density_matches_pairing() {
        let f = ScalarField::bump(dvector![0.1, -0.2], 1.3, 0.7).unwrap();
        let masses = [1.5, 0.5, 2.0];
        let rho = make_rho_cl(f.clone(), &masses);
        for z in points(2, 2, 3, 10) {
            let gamma = z.configuration(&masses).unwrap();
            assert_eq!(rho.value(&z).unwrap(), pair(&gamma, &f).unwrap());
        }
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        let f = ScalarField::bump(dvector![0.1, -0.2, 0.0], 1.3, 0.7).unwrap();
        let g = VectorField::translate(dvector![0.0, 0.1, 0.2], 1.1, dvector![0.3, -0.5, 0.8]).unwrap();
        for obs in [make_rho_cl(f, &[1.0, 2.0]), make_j_cl(g)] {
            let fd = obs.finite_difference();
            for z in points(3, 3, 2, 5) {
                for j in 0..2 {
                    assert!((obs.d_position(&z, j).unwrap() - fd.d_position(&z, j).unwrap()).amax() <= 1e-6);
                    assert!((obs.d_momentum(&z, j).unwrap() - fd.d_momentum(&z, j).unwrap()).amax() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn antisymmetry_and_leibniz() {
        let f = make_rho_cl(ScalarField::bump(dvector![0.0, 0.0], 1.2, 1.0).unwrap(), &[1.0, 1.0]);
        let a = make_j_cl(VectorField::rotate(dvector![0.1, 0.0], 1.0, 0.6).unwrap());
        let b = make_j_cl(VectorField::translate(dvector![0.0, 0.2], 1.4, dvector![1.0, 1.0]).unwrap());
        for z in points(4, 2, 2, 10) {
            assert!((poisson(&a, &b, &z).unwrap() + poisson(&b, &a, &z).unwrap()).abs() <= 1e-12);
            assert_eq!(poisson(&a, &a, &z).unwrap(), 0.0);
            let lhs = poisson(&f, &a.product(&b), &z).unwrap();
            let rhs = poisson(&f, &a, &z).unwrap() * b.value(&z).unwrap() + a.value(&z).unwrap() * poisson(&f, &b, &z).unwrap();
            assert!((lhs - rhs).abs() <= 1e-7);
        }
    }

    /// Single particle, two translation bumps `g_i = beta_i v_i`, expanded by
    /// hand: `{J1, J2} = 2 beta1' beta2 (v1 . p) ((x - a) . v2) / r1^2
    ///                 - 2 beta1 beta2' (v2 . p) ((x - b) . v1) / r2^2`.
    #[test]
    fn current_bracket_sign_by_hand() {
        let (a, r1, v1) = (dvector![0.1, 0.0], 1.2, dvector![0.7, -0.2]);
        let (b, r2, v2) = (dvector![-0.2, 0.3], 1.0, dvector![0.1, 0.9]);
        let g1 = VectorField::translate(a.clone(), r1, v1.clone()).unwrap();
        let g2 = VectorField::translate(b.clone(), r2, v2.clone()).unwrap();
        let bracket = make_j_cl(lie_bracket(g1.clone(), g2.clone()).unwrap());
        for z in points(5, 2, 1, 10) {
            let (x, p) = (&z.positions()[0], &z.momenta()[0]);
            let (u1, u2) = ((x - &a).norm_squared() / (r1 * r1), (x - &b).norm_squared() / (r2 * r2));
            let hand = 2.0 * BumpProfile::derivative(u1) * BumpProfile::value(u2) * v1.dot(p) * (x - &a).dot(&v2) / (r1 * r1)
                - 2.0 * BumpProfile::value(u1) * BumpProfile::derivative(u2) * v2.dot(p) * (x - &b).dot(&v1) / (r2 * r2);
            let computed = poisson(&make_j_cl(g1.clone()), &make_j_cl(g2.clone()), &z).unwrap();
            assert!((computed - hand).abs() <= 1e-12);
            assert!((hand + bracket.value(&z).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn correspondence_and_mass_scaling() {
        let f = ScalarField::bump(dvector![0.0, 0.1], 1.1, 0.8).unwrap();
        let f2 = ScalarField::bump(dvector![0.3, -0.1], 0.9, -0.4).unwrap();
        let g = VectorField::rotate(dvector![-0.1, 0.0], 1.3, 0.9).unwrap();
        let g2 = VectorField::translate(dvector![0.2, 0.2], 1.2, dvector![0.5, -0.6]).unwrap();
        let samples = points(6, 2, 3, 20);
        let r = correspondence_residuals(f.clone(), f2.clone(), g.clone(), g2.clone(), &[1.0, 1.0, 1.0], &samples).unwrap();
        assert!(r.max() <= 1e-8, "{r:?}");
        let heavy = correspondence_residuals(f, f2, g, g2, &[2.0, 2.0, 2.0], &samples).unwrap();
        assert!(heavy.max() <= 2e-8);
        assert_eq!(heavy.j_j, r.j_j);
    }

    #[test]
    fn disjoint_supports_give_zero() {
        let f = ScalarField::bump(dvector![5.0, 5.0], 0.5, 1.0).unwrap();
        let g = VectorField::translate(dvector![0.0, 0.0], 1.0, dvector![1.0, 0.0]).unwrap();
        let g2 = VectorField::rotate(dvector![-5.0, 5.0], 0.5, 1.0).unwrap();
        let r = correspondence_residuals(f.clone(), f, g, g2, &[1.0, 1.0], &points(7, 2, 2, 10)).unwrap();
        assert_eq!(r.max(), 0.0);
    }
}
