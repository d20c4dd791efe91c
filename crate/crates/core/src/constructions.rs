//! Explicit diffeomorphisms that exchange points of a configuration, and
//! random stabilizer loops assembled from them.

use rand::Rng as _;

use crate::config::{Configuration, Permutation};
use crate::error::{KinematError, Result};
use crate::fields::{BumpProfile, Point, VectorField};
use crate::flows::Diffeo;
use crate::rng::Rng;

/// Support radius of a rotation exchange relative to half the pair distance.
pub const ROTATION_RADIUS: f64 = 1.6;
/// Other points must be at least this far (relative to half the pair
/// distance) from the pair midpoint.
pub const ROTATION_CLEARANCE: f64 = 1.25;
/// Support radius of a straight move relative to its length.
pub const MOVE_RADIUS: f64 = 0.625;
/// Lift height of a straight-leg exchange relative to the pair distance.
pub const LIFT_HEIGHT: f64 = 0.8;

const QUADRATURE_INTERVALS: usize = 4096;

/// Rotates points `p` and `q` of `gamma` half a turn about their midpoint,
/// counterclockwise if `ccw`. Only for `n = 2`.
pub fn rotation_exchange(gamma: &Configuration, p: usize, q: usize, ccw: bool) -> Result<Diffeo> {
    check_pair(gamma, p, q)?;
    if gamma.dim() != 2 {
        return Err(KinematError::DimensionMismatch { expected: 2, got: gamma.dim() });
    }
    let (a, b) = (&gamma.points()[p], &gamma.points()[q]);
    let center = (a + b) * 0.5;
    let rho = (a - b).norm() * 0.5;
    let clearance = others(gamma, &[p, q]).map(|x| (x - &center).norm()).fold(f64::INFINITY, f64::min);
    if clearance < ROTATION_CLEARANCE * rho {
        return Err(KinematError::InvalidArgument(format!(
            "another point lies within {clearance:.3e} of the exchange midpoint"
        )));
    }
    let radius = clearance.min(ROTATION_RADIUS * rho);
    let beta = BumpProfile::value(rho * rho / (radius * radius));
    let turn = if ccw { std::f64::consts::PI } else { -std::f64::consts::PI };
    Ok(Diffeo::single(VectorField::rotate(center, radius, 1.0)?, turn / beta))
}

/// `T = int ds / beta(s^2 / R^2)` over `[-L/2, L/2]`: the flow time that
/// carries a point across a bump of radius `R` centered on its path.
fn traversal_time(length: f64, radius: f64) -> f64 {
    let half = 0.5 * length;
    let h = length / QUADRATURE_INTERVALS as f64;
    let f = |s: f64| 1.0 / BumpProfile::value(s * s / (radius * radius));
    let mut acc = f(-half) + f(half);
    for k in 1..QUADRATURE_INTERVALS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(-half + k as f64 * h);
    }
    acc * h / 3.0
}

/// Translation flow carrying `from` exactly to `to` along the segment.
/// Its support is the ball of radius `MOVE_RADIUS * |to - from|` about the
/// midpoint.
pub fn straight_move(from: &Point, to: &Point) -> Result<Diffeo> {
    let delta = to - from;
    let length = delta.norm();
    if length == 0.0 || !length.is_finite() {
        return Err(KinematError::InvalidArgument("straight move needs distinct finite endpoints".into()));
    }
    let radius = MOVE_RADIUS * length;
    let field = VectorField::translate((from + to) * 0.5, radius, delta / length)?;
    Ok(Diffeo::single(field, traversal_time(length, radius)))
}

/// Unit vector orthogonal to `u` used as lift direction.
fn lift_direction(u: &Point, ccw: bool) -> Point {
    let sign = if ccw { 1.0 } else { -1.0 };
    if u.len() == 2 {
        // the right-hand normal makes the relative motion counterclockwise
        return Point::from_vec(vec![u[1], -u[0]]) * sign;
    }
    let axis = (0..u.len()).min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs())).expect("n >= 2");
    let mut e = Point::zeros(u.len());
    e[axis] = 1.0;
    let e = &e - u * u.dot(&e);
    e.normalize() * sign
}

/// Exchanges points `p` and `q` with four straight translation legs: lift
/// the first, move the second onto it, carry the first over, drop it. Works
/// for `n >= 2`; in the plane `ccw` picks the counterclockwise exchange.
pub fn straight_exchange(gamma: &Configuration, p: usize, q: usize, ccw: bool) -> Result<Diffeo> {
    check_pair(gamma, p, q)?;
    if gamma.dim() < 2 {
        return Err(KinematError::InvalidArgument("points on a line cannot be exchanged".into()));
    }
    let (a, b) = (gamma.points()[p].clone(), gamma.points()[q].clone());
    let length = (&b - &a).norm();
    let e = lift_direction(&((&b - &a) / length), ccw) * (LIFT_HEIGHT * length);
    let (a_up, b_up) = (&a + &e, &b + &e);
    let rest: Vec<Point> = others(gamma, &[p, q]).cloned().collect();
    let legs = [
        (a.clone(), a_up.clone(), b.clone()),
        (b.clone(), a.clone(), a_up.clone()),
        (a_up.clone(), b_up.clone(), a.clone()),
        (b_up.clone(), b.clone(), a.clone()),
    ];
    let mut phi = Diffeo::identity(gamma.dim());
    for (from, to, partner) in legs {
        let center = (&from + &to) * 0.5;
        let radius = MOVE_RADIUS * (&to - &from).norm();
        let blocked = rest.iter().chain(std::iter::once(&partner)).any(|x| (x - &center).norm() < radius);
        if blocked {
            return Err(KinematError::InvalidArgument("a straight leg would disturb another point".into()));
        }
        phi = phi.compose(&straight_move(&from, &to)?)?;
    }
    Ok(phi)
}

fn check_pair(gamma: &Configuration, p: usize, q: usize) -> Result<()> {
    if p == q || p >= gamma.len() || q >= gamma.len() {
        return Err(KinematError::InvalidArgument(format!("cannot exchange points {p} and {q}")));
    }
    Ok(())
}

fn others<'a>(gamma: &'a Configuration, skip: &'a [usize]) -> impl Iterator<Item = &'a Point> + 'a {
    gamma.points().iter().enumerate().filter(move |(k, _)| !skip.contains(k)).map(|(_, x)| x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeKind {
    Rotation,
    StraightLegs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exchange {
    pub p: usize,
    pub q: usize,
    pub ccw: bool,
    pub kind: ExchangeKind,
}

/// A diffeomorphism with `phi gamma = gamma` together with the permutation
/// it is built to induce (`phi(x_j) = x_{permutation(j)}`).
#[derive(Debug, Clone)]
pub struct StabilizerLoop {
    pub diffeo: Diffeo,
    pub permutation: Permutation,
    pub exchanges: Vec<Exchange>,
}

pub fn exchange_diffeo(gamma: &Configuration, ex: Exchange) -> Result<Diffeo> {
    match ex.kind {
        ExchangeKind::Rotation => rotation_exchange(gamma, ex.p, ex.q, ex.ccw),
        ExchangeKind::StraightLegs => straight_exchange(gamma, ex.p, ex.q, ex.ccw),
    }
}

/// Builds a loop from exchanges of point slots of `gamma`, applied in order.
pub fn stabilizer_loop(gamma: &Configuration, exchanges: &[Exchange]) -> Result<StabilizerLoop> {
    let mut phi = Diffeo::identity(gamma.dim());
    let mut slot: Vec<usize> = (0..gamma.len()).collect(); // slot[label]
    for &ex in exchanges {
        phi = phi.compose(&exchange_diffeo(gamma, ex)?)?;
        for s in slot.iter_mut() {
            if *s == ex.p {
                *s = ex.q;
            } else if *s == ex.q {
                *s = ex.p;
            }
        }
    }
    Ok(StabilizerLoop { diffeo: phi, permutation: Permutation::from_vec(slot)?, exchanges: exchanges.to_vec() })
}

/// Random loop of `count` feasible exchanges. Rotations are used only in
/// the plane.
pub fn random_stabilizer_loop(rng: &mut Rng, gamma: &Configuration, count: usize) -> Result<StabilizerLoop> {
    const ATTEMPTS: usize = 200;
    let n = gamma.len();
    if n < 2 {
        return stabilizer_loop(gamma, &[]);
    }
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..ATTEMPTS {
            let p = rng.random_range(0..n);
            let q = (p + rng.random_range(1..n)) % n;
            let kind = if gamma.dim() == 2 && rng.random_bool(0.5) {
                ExchangeKind::Rotation
            } else {
                ExchangeKind::StraightLegs
            };
            let ex = Exchange { p, q, ccw: rng.random_bool(0.5), kind };
            if exchange_diffeo(gamma, ex).is_ok() {
                found = Some(ex);
                break;
            }
        }
        chosen.push(found.ok_or_else(|| {
            KinematError::InvalidConfiguration("no feasible exchange for this configuration".into())
        })?);
    }
    stabilizer_loop(gamma, &chosen)
}

/// `count` points uniform in `[-half_width, half_width]^n`, pairwise at
/// least `min_separation` apart, unit masses, sorted lexicographically.
pub fn random_configuration(
    rng: &mut Rng,
    dim: usize,
    count: usize,
    half_width: f64,
    min_separation: f64,
) -> Result<Configuration> {
    const ATTEMPTS: usize = 10_000;
    let mut points: Vec<Point> = Vec::with_capacity(count);
    let mut tries = 0;
    while points.len() < count {
        tries += 1;
        if tries > ATTEMPTS {
            return Err(KinematError::InvalidArgument("cannot place points with the requested separation".into()));
        }
        let x = Point::from_fn(dim, |_, _| rng.random_range(-half_width..half_width));
        if points.iter().all(|y| (y - &x).norm() >= min_separation) {
            points.push(x);
        }
    }
    Ok(Configuration::unit_masses(points)?.sorted_lexicographic())
}
