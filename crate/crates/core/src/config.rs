//! Finite weighted point configurations `gamma = sum_j m_j delta_{x_j}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KinematError, Result};
use crate::fields::{EvalScalar, Point};
use crate::flows::{Diffeo, COLLISION_LIMIT};

/// Default matching tolerance for stabilizer detection.
pub const STABILIZER_TOL: f64 = 1e-6;

/// A permutation of `0..n`; `map[j] = k` sends label `j` to label `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &k in &map {
            if k >= map.len() || seen[k] {
                return Err(KinematError::InvalidArgument(format!("{map:?} is not a permutation")));
            }
            seen[k] = true;
        }
        Ok(Self(map))
    }

    /// Transposition of `a` and `b` on `n` labels.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Self(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, j: usize) -> usize {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(j, &k)| j == k)
    }

    /// `self` followed by `next`: `j -> next(self(j))`.
    pub fn then(&self, next: &Permutation) -> Permutation {
        Self(self.0.iter().map(|&k| next.0[k]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (j, &k) in self.0.iter().enumerate() {
            inv[k] = j;
        }
        Self(inv)
    }

    /// Disjoint cycles of length > 1, each starting at its smallest label.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.0.len()];
        let mut out = Vec::new();
        for start in 0..self.0.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut j = self.0[start];
            while j != start {
                seen[j] = true;
                cycle.push(j);
                j = self.0[j];
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            let labels: Vec<String> = c.iter().map(|j| (j + 1).to_string()).collect();
            write!(f, "({})", labels.join(" "))?;
        }
        Ok(())
    }
}

/// `N` distinct points in R^n with positive masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigDoc", into = "ConfigDoc")]
pub struct Configuration {
    dim: usize,
    points: Vec<Point>,
    masses: Vec<f64>,
}

impl Configuration {
    pub fn new(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or_else(|| {
            KinematError::InvalidConfiguration("a configuration needs at least one point".into())
        })?;
        if masses.len() != points.len() {
            return Err(KinematError::ParticleMismatch { expected: points.len(), got: masses.len() });
        }
        for p in &points {
            check_dim(dim, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(KinematError::InvalidConfiguration("non-finite coordinate".into()));
            }
        }
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(KinematError::InvalidConfiguration(format!("masses must be positive, got {m}")));
        }
        let c = Self { dim, points, masses };
        if c.min_separation() <= 0.0 {
            return Err(KinematError::InvalidConfiguration("points must be pairwise distinct".into()));
        }
        Ok(c)
    }

    /// Identical unit masses.
    pub fn unit_masses(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    /// Replaces point `j` without re-validating distinctness; used for
    /// finite-difference probes around a valid configuration.
    pub(crate) fn with_point(&self, j: usize, x: Point) -> Self {
        let mut c = self.clone();
        c.points[j] = x;
        c
    }

    pub(crate) fn with_points_unchecked(&self, points: Vec<Point>) -> Self {
        Self { dim: self.dim, points, masses: self.masses.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.points.len() {
            for b in a + 1..self.points.len() {
                best = best.min((&self.points[a] - &self.points[b]).norm());
            }
        }
        best
    }

    /// Same configuration with points reordered by first coordinate, ties
    /// broken by the following coordinates.
    pub fn sorted_lexicographic(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            let (pa, pb) = (&self.points[a], &self.points[b]);
            pa.iter()
                .zip(pb.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self {
            dim: self.dim,
            points: idx.iter().map(|&j| self.points[j].clone()).collect(),
            masses: idx.iter().map(|&j| self.masses[j]).collect(),
        }
    }

    pub fn identical_masses(&self) -> bool {
        self.masses.iter().all(|&m| m == self.masses[0])
    }
}

/// `<gamma, f> = sum_j m_j f(x_j)`.
pub fn pair(gamma: &Configuration, f: &(impl EvalScalar + ?Sized)) -> Result<f64> {
    check_dim(gamma.dim(), f.dim())?;
    let mut acc = 0.0;
    for (x, m) in gamma.points.iter().zip(&gamma.masses) {
        acc += m * f.value(x)?;
    }
    Ok(acc)
}

/// Dual action `phi gamma = sum_j m_j delta_{phi(x_j)}`.
pub fn act(phi: &Diffeo, gamma: &Configuration) -> Result<Configuration> {
    check_dim(gamma.dim(), phi.dim())?;
    let points = gamma.points.iter().map(|x| phi.apply(x)).collect::<Result<Vec<_>>>()?;
    let moved = gamma.with_points_unchecked(points);
    let sep = moved.min_separation();
    if sep < COLLISION_LIMIT {
        return Err(KinematError::NearCollision { separation: sep, limit: COLLISION_LIMIT });
    }
    Ok(moved)
}

/// Weighted point-set equality. Returns `sigma` with `x_j ~ y_{sigma(j)}`
/// and `m_j = m'_{sigma(j)}`, or `None` if the sets differ.
pub fn configurations_equal(a: &Configuration, b: &Configuration, tol: f64) -> Result<Option<Permutation>> {
    check_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Ok(None);
    }
    let mut map = Vec::with_capacity(a.len());
    let mut used = vec![false; b.len()];
    for (j, x) in a.points.iter().enumerate() {
        let candidates: Vec<usize> = b.points.iter().enumerate().filter(|(_, y)| (x - *y).norm() <= tol).map(|(k, _)| k).collect();
        match candidates.as_slice() {
            [] => return Ok(None),
            [k] => {
                let (ma, mb) = (a.masses[j], b.masses[*k]);
                if (ma - mb).abs() > 1e-12 * ma.abs().max(mb.abs()) || used[*k] {
                    return Ok(None);
                }
                used[*k] = true;
                map.push(*k);
            }
            many => return Err(KinematError::AmbiguousMatch { point: j, candidates: many.len() }),
        }
    }
    Ok(Some(Permutation(map)))
}

/// If `phi gamma = gamma` within `tol`, the induced permutation with
/// `phi(x_j) ~ x_{sigma(j)}`.
pub fn detect_stabilizer(phi: &Diffeo, gamma: &Configuration, tol: f64) -> Result<Option<Permutation>> {
    let moved = act(phi, gamma)?;
    configurations_equal(&moved, gamma, tol)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigDoc {
    dim: usize,
    points: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl TryFrom<ConfigDoc> for Configuration {
    type Error = KinematError;

    fn try_from(doc: ConfigDoc) -> Result<Self> {
        let points: Vec<Point> = doc.points.into_iter().map(Point::from_vec).collect();
        for p in &points {
            check_dim(doc.dim, p.len())?;
        }
        Configuration::new(points, doc.masses)
    }
}

impl From<Configuration> for ConfigDoc {
    fn from(c: Configuration) -> Self {
        ConfigDoc {
            dim: c.dim,
            points: c.points.iter().map(|p| p.as_slice().to_vec()).collect(),
            masses: c.masses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ScalarField, VectorField};
    use crate::flows::compose_scalar;
    use nalgebra::dvector;

    fn three() -> Configuration {
        Configuration::new(vec![dvector![0.0, 0.0], dvector![1.0, 0.5], dvector![-0.7, 0.2]], vec![1.0, 2.0, 0.5])
            .unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(Configuration::new(vec![dvector![0.0], dvector![0.0]], vec![1.0, 1.0]).is_err());
        assert!(Configuration::new(vec![dvector![0.0], dvector![1.0]], vec![1.0, 0.0]).is_err());
        assert!(Configuration::new(vec![dvector![0.0], dvector![1.0, 2.0]], vec![1.0, 1.0]).is_err());
        assert!(Configuration::new(vec![], vec![]).is_err());
        assert!(Configuration::new(vec![dvector![0.0]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn pairing() {
        let x0 = dvector![0.3, 0.1];
        let f = ScalarField::bump(x0.clone(), 1.0, 1.0).unwrap();
        let g = Configuration::new(vec![x0], vec![3.0]).unwrap();
        assert_eq!(pair(&g, &f).unwrap(), 3.0);
        let far = ScalarField::bump(dvector![9.0, 9.0], 1.0, 1.0).unwrap();
        assert_eq!(pair(&three(), &far).unwrap(), 0.0);
        let f = ScalarField::bump(dvector![0.2, 0.2], 1.5, -0.8).unwrap();
        let c = three();
        let direct: f64 = c.points().iter().zip(c.masses()).map(|(x, m)| m * f.eval(x).unwrap()).sum();
        assert_eq!(pair(&c, &f).unwrap(), direct);
    }

    #[test]
    fn act_and_duality() {
        let c = three();
        assert_eq!(act(&Diffeo::identity(2), &c).unwrap(), c);
        let g = VectorField::translate(dvector![0.1, 0.2], 1.4, dvector![0.5, -0.3]).unwrap();
        let phi = Diffeo::single(g, 0.9);
        let f = ScalarField::bump(dvector![0.3, -0.2], 1.2, 1.1).unwrap();
        let moved = act(&phi, &c).unwrap();
        assert_eq!(moved.masses(), c.masses());
        let lhs = pair(&moved, &f).unwrap();
        let rhs = pair(&c, &compose_scalar(&f, &phi).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn equality_and_relabeling() {
        let c = three();
        assert_eq!(configurations_equal(&c, &c, 1e-6).unwrap(), Some(Permutation::identity(3)));
        let relabeled = Configuration::new(
            vec![c.points()[2].clone(), c.points()[0].clone(), c.points()[1].clone()],
            vec![0.5, 1.0, 2.0],
        )
        .unwrap();
        let p = configurations_equal(&c, &relabeled, 1e-6).unwrap().unwrap();
        assert_eq!(p.as_slice(), &[1, 2, 0]);
        let tol = 1e-6;
        let mut pts = c.points().to_vec();
        pts[1][0] += 10.0 * tol;
        let moved = Configuration::new(pts, c.masses().to_vec()).unwrap();
        assert_eq!(configurations_equal(&c, &moved, tol).unwrap(), None);
        let dense = Configuration::unit_masses(vec![dvector![0.0, 0.0], dvector![0.0, 1e-7]]).unwrap();
        assert!(matches!(configurations_equal(&dense, &dense, 1e-6), Err(KinematError::AmbiguousMatch { .. })));
    }

    #[test]
    fn permutation_algebra() {
        let p = Permutation::from_vec(vec![1, 2, 0]).unwrap();
        assert_eq!(p.then(&p.inverse()), Permutation::identity(3));
        assert_eq!(p.to_string(), "(1 2 3)");
        assert_eq!(Permutation::transposition(3, 0, 1).to_string(), "(1 2)");
        assert_eq!(Permutation::identity(2).to_string(), "()");
        assert!(Permutation::from_vec(vec![0, 0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = three();
        let s = serde_json::to_string(&c).unwrap();
        let back: Configuration = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Configuration>(r#"{"dim":2,"points":[[0,0],[0,0]],"masses":[1,1]}"#).is_err());
    }
}
