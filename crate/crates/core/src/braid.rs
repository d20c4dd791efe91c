//! Braid words from planar configuration paths, and unitary braid-group
//! representations used as cocycles.
//!
//! Strands are ordered lexicographically (first coordinate, then second).
//! Each time two strands adjacent in that order swap, a letter
//! `sigma_i^{+-1}` is emitted, `i` being the 1-based position of the left
//! strand. The sign is `+1` when the exchange is counterclockwise, i.e. the
//! strand coming from the right passes above the one coming from the left.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, Permutation};
use crate::error::{check_dim, KinematError, Result};
use crate::fields::Point;
use crate::flows::Diffeo;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for the unitarity and braid-relation checks of [`BraidRep`].
pub const REP_TOL: f64 = 1e-10;

/// Angle increment, in radians, of the projection axis used to repair ties.
pub const AXIS_RETRY_ANGLE: f64 = 0.1;
pub const AXIS_RETRIES: usize = 8;

/// `sigma_index^sign`, with `1 <= index <= strands - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub index: usize,
    pub sign: i8,
}

impl Letter {
    pub fn inverse(self) -> Self {
        Self { index: self.index, sign: -self.sign }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "WordDoc", into = "WordDoc")]
pub struct BraidWord {
    strands: usize,
    letters: Vec<Letter>,
}

impl BraidWord {
    pub fn new(strands: usize, letters: Vec<Letter>) -> Result<Self> {
        if strands == 0 {
            return Err(KinematError::InvalidArgument("a braid needs at least one strand".into()));
        }
        for l in &letters {
            if l.index == 0 || l.index >= strands || (l.sign != 1 && l.sign != -1) {
                return Err(KinematError::InvalidArgument(format!(
                    "letter ({}, {}) invalid on {strands} strands",
                    l.index, l.sign
                )));
            }
        }
        Ok(Self { strands, letters })
    }

    pub fn empty(strands: usize) -> Self {
        Self { strands, letters: Vec::new() }
    }

    /// Convenience constructor from `(index, sign)` pairs.
    pub fn from_pairs(strands: usize, pairs: &[(usize, i8)]) -> Result<Self> {
        Self::new(strands, pairs.iter().map(|&(index, sign)| Letter { index, sign }).collect())
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Cancels adjacent `sigma_i sigma_i^-1` pairs until none remain.
    pub fn free_reduce(&self) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last().is_some_and(|&top| top == l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self { strands: self.strands, letters: out }
    }

    pub fn concat(&self, other: &BraidWord) -> Result<Self> {
        if self.strands != other.strands {
            return Err(KinematError::StrandMismatch { expected: self.strands, got: other.strands });
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(Self { strands: self.strands, letters })
    }

    pub fn inverse(&self) -> Self {
        Self { strands: self.strands, letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    /// Image in S_N: the strand starting at position `p` ends at `perm(p)`.
    pub fn permutation(&self) -> Permutation {
        let mut at: Vec<usize> = (0..self.strands).collect(); // at[position] = strand
        for l in &self.letters {
            at.swap(l.index - 1, l.index);
        }
        let mut dest = vec![0; self.strands];
        for (pos, &strand) in at.iter().enumerate() {
            dest[strand] = pos;
        }
        Permutation::from_vec(dest).expect("swaps preserve bijectivity")
    }

    /// Sum of letter signs; invariant under braid relations.
    pub fn exponent_sum(&self) -> i64 {
        self.letters.iter().map(|l| l.sign as i64).sum()
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| if l.sign > 0 { format!("s{}", l.index) } else { format!("s{}^-1", l.index) })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

pub fn free_reduce(w: &BraidWord) -> BraidWord {
    w.free_reduce()
}

pub fn concat(w1: &BraidWord, w2: &BraidWord) -> Result<BraidWord> {
    w1.concat(w2)
}

pub fn permutation_of(w: &BraidWord) -> Permutation {
    w.permutation()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WordDoc {
    n: usize,
    letters: Vec<(usize, i8)>,
}

impl TryFrom<WordDoc> for BraidWord {
    type Error = KinematError;
    fn try_from(doc: WordDoc) -> Result<Self> {
        BraidWord::from_pairs(doc.n, &doc.letters)
    }
}

impl From<BraidWord> for WordDoc {
    fn from(w: BraidWord) -> Self {
        WordDoc { n: w.strands, letters: w.letters.iter().map(|l| (l.index, l.sign)).collect() }
    }
}

/// A unitary representation of B_N, given by its generator images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RepDoc", into = "RepDoc")]
pub struct BraidRep {
    strands: usize,
    dim: usize,
    generators: Vec<CMatrix>,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

impl BraidRep {
    /// Validates unitarity and the braid relations within [`REP_TOL`].
    pub fn new(strands: usize, generators: Vec<CMatrix>) -> Result<Self> {
        if strands < 2 {
            return Err(KinematError::InvalidRepresentation("need at least two strands".into()));
        }
        if generators.len() != strands - 1 {
            return Err(KinematError::InvalidRepresentation(format!(
                "{} generators given for {strands} strands",
                generators.len()
            )));
        }
        let dim = generators[0].nrows();
        let id = CMatrix::identity(dim, dim);
        for (i, g) in generators.iter().enumerate() {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(KinematError::InvalidRepresentation(format!("generator {} is not {dim}x{dim}", i + 1)));
            }
            if max_abs(&(g * g.adjoint() - &id)) > REP_TOL {
                return Err(KinematError::InvalidRepresentation(format!("generator {} is not unitary", i + 1)));
            }
        }
        for i in 0..generators.len() {
            for j in i + 1..generators.len() {
                let (a, b) = (&generators[i], &generators[j]);
                let residual = if j == i + 1 { max_abs(&(a * b * a - b * a * b)) } else { max_abs(&(a * b - b * a)) };
                if residual > REP_TOL {
                    return Err(KinematError::InvalidRepresentation(format!(
                        "braid relation between generators {} and {} fails by {residual:e}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { strands, dim, generators })
    }

    /// One-dimensional representation: every generator maps to `e^{i theta}`.
    pub fn abelian(strands: usize, theta: f64) -> Result<Self> {
        let phase = CMatrix::from_element(1, 1, C64::from_polar(1.0, theta));
        Self::new(strands, vec![phase; strands.saturating_sub(1)])
    }

    /// `sigma_i` maps to the permutation matrix of the transposition `(i, i+1)`.
    pub fn permutation(strands: usize) -> Result<Self> {
        let gens = (0..strands.saturating_sub(1))
            .map(|i| {
                let mut m = CMatrix::identity(strands, strands);
                m.swap_rows(i, i + 1);
                m
            })
            .collect();
        Self::new(strands, gens)
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    /// Ordered product of generator images; inverse letters use adjoints.
    pub fn eval(&self, w: &BraidWord) -> Result<CMatrix> {
        if w.strands() != self.strands {
            return Err(KinematError::StrandMismatch { expected: self.strands, got: w.strands() });
        }
        let mut m = CMatrix::identity(self.dim, self.dim);
        for l in w.letters() {
            let g = &self.generators[l.index - 1];
            m = if l.sign > 0 { m * g } else { m * g.adjoint() };
        }
        Ok(m)
    }
}

pub fn rep_eval(rep: &BraidRep, w: &BraidWord) -> Result<CMatrix> {
    rep.eval(w)
}

/// The two built-in representations on `n` strands.
pub fn builtin_reps(n: usize, theta: f64) -> Result<(BraidRep, BraidRep)> {
    Ok((BraidRep::abelian(n, theta)?, BraidRep::permutation(n)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RepDoc {
    n: usize,
    d: usize,
    generators: Vec<Vec<Vec<[f64; 2]>>>,
}

impl TryFrom<RepDoc> for BraidRep {
    type Error = KinematError;
    fn try_from(doc: RepDoc) -> Result<Self> {
        let mut gens = Vec::with_capacity(doc.generators.len());
        for rows in doc.generators {
            if rows.len() != doc.d || rows.iter().any(|r| r.len() != doc.d) {
                return Err(KinematError::InvalidRepresentation(format!("generator is not {0}x{0}", doc.d)));
            }
            gens.push(CMatrix::from_fn(doc.d, doc.d, |i, k| C64::new(rows[i][k][0], rows[i][k][1])));
        }
        BraidRep::new(doc.n, gens)
    }
}

impl From<BraidRep> for RepDoc {
    fn from(r: BraidRep) -> Self {
        let generators = r
            .generators
            .iter()
            .map(|g| (0..r.dim).map(|i| (0..r.dim).map(|k| [g[(i, k)].re, g[(i, k)].im]).collect()).collect())
            .collect();
        RepDoc { n: r.strands, d: r.dim, generators }
    }
}

/// Sampled motion of a configuration under a diffeomorphism word.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPath {
    masses: Vec<f64>,
    samples: Vec<Vec<Point>>,
}

impl ConfigPath {
    pub fn new(masses: Vec<f64>, samples: Vec<Vec<Point>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(KinematError::InvalidArgument("a path needs at least one sample".into()));
        }
        let n = masses.len();
        let dim = samples[0].first().map_or(0, |p| p.len());
        for s in &samples {
            if s.len() != n {
                return Err(KinematError::ParticleMismatch { expected: n, got: s.len() });
            }
            for p in s {
                check_dim(dim, p.len())?;
            }
        }
        Ok(Self { masses, samples })
    }

    pub fn samples(&self) -> &[Vec<Point>] {
        &self.samples
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn strands(&self) -> usize {
        self.masses.len()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].first().map_or(0, |p| p.len())
    }

    pub fn start(&self) -> Configuration {
        Configuration::new(self.samples[0].clone(), self.masses.clone()).expect("path starts at a valid configuration")
    }

    pub fn end(&self) -> Configuration {
        let last = self.samples.last().expect("non-empty").clone();
        Configuration::new(last, self.masses.clone()).expect("traced paths avoid collisions")
    }

    /// The same samples in reverse order.
    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self { masses: self.masses.clone(), samples }
    }

    /// `self` followed by `next`; `next` must start where `self` ends.
    pub fn concat(&self, next: &ConfigPath) -> Result<Self> {
        if next.strands() != self.strands() {
            return Err(KinematError::ParticleMismatch { expected: self.strands(), got: next.strands() });
        }
        let end = self.samples.last().expect("non-empty");
        if end != &next.samples[0] {
            return Err(KinematError::InvalidArgument("paths do not join".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend(next.samples.iter().skip(1).cloned());
        Ok(Self { masses: self.masses.clone(), samples })
    }

    /// Inserts the linear midpoint between consecutive samples.
    pub fn refined(&self) -> Self {
        let mut samples = Vec::with_capacity(2 * self.samples.len());
        for w in self.samples.windows(2) {
            samples.push(w[0].clone());
            samples.push(w[0].iter().zip(&w[1]).map(|(a, b)| (a + b) * 0.5).collect());
        }
        samples.push(self.samples.last().expect("non-empty").clone());
        Self { masses: self.masses.clone(), samples }
    }
}

/// Dense sampled trajectory of every point of `gamma` under `phi`.
pub fn trace_path(phi: &Diffeo, gamma: &Configuration) -> Result<ConfigPath> {
    check_dim(gamma.dim(), phi.dim())?;
    let mut samples = phi.trace_points(gamma.points())?;
    if samples.len() == 1 {
        samples.push(samples[0].clone());
    }
    ConfigPath::new(gamma.masses().to_vec(), samples)
}

/// A braid word together with the strand order it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct BraidExtraction {
    pub word: BraidWord,
    /// Projection axis angle that was used (0 unless ties forced a retry).
    pub axis_angle: f64,
    /// `start_order[p]` is the label of the strand at position `p` initially.
    pub start_order: Vec<usize>,
}

impl BraidExtraction {
    /// The image in S_N expressed on configuration labels.
    pub fn label_permutation(&self) -> Permutation {
        let positional = self.word.permutation();
        let n = self.start_order.len();
        let mut map = vec![0; n];
        for p in 0..n {
            map[self.start_order[p]] = self.start_order[positional.apply(p)];
        }
        Permutation::from_vec(map).expect("relabeling preserves bijectivity")
    }
}

pub fn extract_braid(path: &ConfigPath) -> Result<BraidWord> {
    Ok(extract_braid_detailed(path)?.word)
}

pub fn extract_braid_detailed(path: &ConfigPath) -> Result<BraidExtraction> {
    if path.dim() != 2 {
        return Err(KinematError::DimensionMismatch { expected: 2, got: path.dim() });
    }
    for attempt in 0..=AXIS_RETRIES {
        let angle = AXIS_RETRY_ANGLE * attempt as f64;
        if let Some(found) = extract_along_axis(path, angle)? {
            return Ok(found);
        }
    }
    Err(KinematError::UnresolvedTie { attempts: AXIS_RETRIES })
}

/// `None` signals a tie that needs a different axis.
fn extract_along_axis(path: &ConfigPath, angle: f64) -> Result<Option<BraidExtraction>> {
    let n = path.strands();
    let (s, c) = angle.sin_cos();
    let project = |p: &Point| (c * p[0] + s * p[1], -s * p[0] + c * p[1]);
    let scale = path
        .samples
        .iter()
        .flat_map(|smp| smp.iter().map(|p| p.amax()))
        .fold(1.0f64, f64::max);
    let eps = 1e-12 * scale;

    let proj: Vec<Vec<(f64, f64)>> = path.samples.iter().map(|smp| smp.iter().map(project).collect()).collect();
    for smp in &proj {
        for a in 0..n {
            for b in a + 1..n {
                if (smp[a].0 - smp[b].0).abs() <= eps {
                    return Ok(None);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[0][a].0.total_cmp(&proj[0][b].0));
    let start_order = order.clone();
    let mut position = vec![0; n];
    for (p, &label) in order.iter().enumerate() {
        position[label] = p;
    }

    let mut letters = Vec::new();
    for k in 0..proj.len().saturating_sub(1) {
        let (p0, p1) = (&proj[k], &proj[k + 1]);
        let mut events: Vec<(f64, usize, usize)> = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let d0 = p0[a].0 - p0[b].0;
                let d1 = p1[a].0 - p1[b].0;
                if (d0 < 0.0) != (d1 < 0.0) {
                    events.push((d0 / (d0 - d1), a, b));
                }
            }
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in events.windows(2) {
            let shares = w[0].1 == w[1].1 || w[0].1 == w[1].2 || w[0].2 == w[1].1 || w[0].2 == w[1].2;
            if shares && (w[1].0 - w[0].0).abs() <= 1e-12 {
                return Ok(None);
            }
        }
        for (t, a, b) in events {
            let (pa, pb) = (position[a], position[b]);
            if pa.abs_diff(pb) != 1 {
                return Ok(None);
            }
            let (left, right, lpos) = if pa < pb { (a, b, pa) } else { (b, a, pb) };
            let v_left = p0[left].1 + t * (p1[left].1 - p0[left].1);
            let v_right = p0[right].1 + t * (p1[right].1 - p0[right].1);
            let dv = v_right - v_left;
            if dv.abs() <= eps {
                return Ok(None);
            }
            letters.push(Letter { index: lpos + 1, sign: if dv > 0.0 { 1 } else { -1 } });
            order.swap(lpos, lpos + 1);
            position[left] = lpos + 1;
            position[right] = lpos;
        }
    }
    let word = BraidWord::new(n.max(1), letters)?.free_reduce();
    Ok(Some(BraidExtraction { word, axis_angle: angle, start_order }))
}

/// Permutation `sigma` with `end_j ~ start_{sigma(j)}` within `tol`.
pub fn extract_permutation(path: &ConfigPath, tol: f64) -> Result<Permutation> {
    let start = &path.samples[0];
    let end = path.samples.last().expect("non-empty");
    let n = start.len();
    let mut map = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for (j, y) in end.iter().enumerate() {
        let hits: Vec<usize> = (0..n).filter(|&k| (y - &start[k]).norm() <= tol).collect();
        match hits.as_slice() {
            [] => return Err(KinematError::NotAPermutation),
            [k] => {
                if used[*k] {
                    return Err(KinematError::NotAPermutation);
                }
                used[*k] = true;
                map.push(*k);
            }
            many => return Err(KinematError::AmbiguousMatch { point: j, candidates: many.len() }),
        }
    }
    Permutation::from_vec(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpProfile, VectorField};
    use nalgebra::dvector;
    use std::f64::consts::PI;

    fn w(n: usize, pairs: &[(usize, i8)]) -> BraidWord {
        BraidWord::from_pairs(n, pairs).unwrap()
    }

    /// Rotation about the midpoint of two points at distance 2 rho, run for
    /// an angle `turn` (pi = one counterclockwise exchange).
    fn pair_rotation(a: &Point, b: &Point, turn: f64) -> Diffeo {
        let center = (a + b) * 0.5;
        let rho = (a - b).norm() * 0.5;
        let radius = 1.6 * rho;
        let beta = BumpProfile::value(rho * rho / (radius * radius));
        Diffeo::single(VectorField::rotate(center, radius, 1.0).unwrap(), turn / beta)
    }

    #[test]
    fn word_algebra() {
        assert!(w(3, &[(1, 1), (1, -1)]).free_reduce().is_empty());
        assert_eq!(w(3, &[(1, 1), (2, 1), (2, -1), (1, 1)]).free_reduce(), w(3, &[(1, 1), (1, 1)]));
        assert!(w(2, &[(1, 1), (1, 1)]).permutation().is_identity());
        let cyc = w(3, &[(1, 1), (2, 1)]).permutation();
        assert_eq!(cyc.as_slice(), &[2, 0, 1]);
        assert_eq!(cyc.cycles().len(), 1);
        assert!(BraidWord::from_pairs(3, &[(3, 1)]).is_err());
        assert!(BraidWord::from_pairs(3, &[(1, 2)]).is_err());
        assert!(w(3, &[]).concat(&w(4, &[])).is_err());
        let x = w(4, &[(1, 1), (3, -1), (2, 1)]);
        assert!(x.concat(&x.inverse()).unwrap().free_reduce().is_empty());
    }

    #[test]
    fn abelian_phases() {
        let fermi = BraidRep::abelian(2, PI).unwrap();
        assert!((fermi.eval(&w(2, &[(1, 1)])).unwrap()[(0, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-15);
        let bose = BraidRep::abelian(3, 0.0).unwrap();
        assert_eq!(bose.eval(&w(3, &[(1, 1), (2, -1), (1, 1)])).unwrap()[(0, 0)], C64::new(1.0, 0.0));
        let theta = 0.73;
        let any = BraidRep::abelian(2, theta).unwrap();
        let v = any.eval(&w(2, &[(1, 1), (1, 1)])).unwrap()[(0, 0)];
        assert!((v - C64::from_polar(1.0, 2.0 * theta)).norm() < 1e-15);
        let f3 = BraidRep::abelian(3, PI).unwrap();
        let v = f3.eval(&w(3, &[(1, 1), (2, 1), (1, 1)])).unwrap()[(0, 0)];
        assert!((v - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn permutation_rep_and_rejections() {
        let p = BraidRep::permutation(4).unwrap();
        let g = p.generators();
        assert_eq!(&g[0] * &g[1] * &g[0], &g[1] * &g[0] * &g[1]);
        assert_eq!(&g[0] * &g[2], &g[2] * &g[0]);
        let bad = CMatrix::from_element(1, 1, C64::new(1.1, 0.0));
        assert!(BraidRep::new(2, vec![bad]).is_err());
        let a = CMatrix::from_element(1, 1, C64::new(0.0, 1.0));
        let b = CMatrix::from_element(1, 1, C64::new(-1.0, 0.0));
        assert!(BraidRep::new(3, vec![a, b]).is_err());
        assert!(p.eval(&w(3, &[])).is_err());
    }

    #[test]
    fn exchange_gives_positive_generator() {
        let (a, b) = (dvector![-0.5, 0.0], dvector![0.5, 0.0]);
        let gamma = Configuration::unit_masses(vec![a.clone(), b.clone()]).unwrap();
        let path = trace_path(&pair_rotation(&a, &b, PI), &gamma).unwrap();
        let word = extract_braid(&path).unwrap();
        assert_eq!(word, w(2, &[(1, 1)]));
        assert_eq!(extract_permutation(&path, 1e-6).unwrap().as_slice(), &[1, 0]);
        let full = trace_path(&pair_rotation(&a, &b, 2.0 * PI), &gamma).unwrap();
        assert_eq!(extract_braid(&full).unwrap(), w(2, &[(1, 1), (1, 1)]));
        let cw = trace_path(&pair_rotation(&a, &b, -PI), &gamma).unwrap();
        assert_eq!(extract_braid(&cw).unwrap(), w(2, &[(1, -1)]));
    }

    #[test]
    fn trivial_paths() {
        let gamma = Configuration::unit_masses(vec![dvector![0.0, 0.0], dvector![1.0, 0.3]]).unwrap();
        let path = trace_path(&Diffeo::identity(2), &gamma).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path.samples()[0], path.samples()[1]);
        assert!(extract_braid(&path).unwrap().is_empty());
        assert!(extract_permutation(&path, 1e-6).unwrap().is_identity());
        let far = Diffeo::single(VectorField::rotate(dvector![5.0, 5.0], 1.0, 1.0).unwrap(), 3.0);
        let path = trace_path(&far, &gamma).unwrap();
        assert!(path.samples().iter().all(|s| s == &path.samples()[0]));
    }

    #[test]
    fn reversal_concat_and_refinement() {
        let pts = vec![dvector![-1.0, 0.1], dvector![0.0, -0.05], dvector![1.0, 0.0]];
        let gamma = Configuration::unit_masses(pts.clone()).unwrap();
        let phi1 = pair_rotation(&pts[0], &pts[1], PI);
        let p1 = trace_path(&phi1, &gamma).unwrap();
        let mid = p1.end();
        let phi2 = pair_rotation(&mid.points()[0], &mid.points()[2], -PI);
        let p2 = trace_path(&phi2, &mid).unwrap();
        let (w1, w2) = (extract_braid(&p1).unwrap(), extract_braid(&p2).unwrap());
        let joined = extract_braid(&p1.concat(&p2).unwrap()).unwrap();
        assert_eq!(joined, w1.concat(&w2).unwrap().free_reduce());
        assert_eq!(extract_braid(&p1.reversed()).unwrap(), w1.inverse().free_reduce());
        assert_eq!(extract_braid(&p1.refined()).unwrap(), w1);
    }

    #[test]
    fn ties_are_repaired() {
        // vertically stacked pair: equal first coordinates at the start
        let (a, b) = (dvector![0.0, -0.5], dvector![0.0, 0.5]);
        let gamma = Configuration::unit_masses(vec![a.clone(), b.clone()]).unwrap();
        let path = trace_path(&pair_rotation(&a, &b, PI), &gamma).unwrap();
        let ext = extract_braid_detailed(&path).unwrap();
        assert!(ext.axis_angle > 0.0);
        assert_eq!(ext.word, w(2, &[(1, 1)]));
    }

    #[test]
    fn label_permutation_matches_endpoint_matching() {
        let pts = vec![dvector![1.0, 0.0], dvector![-1.0, 0.2], dvector![0.0, 0.0]];
        let gamma = Configuration::unit_masses(pts.clone()).unwrap();
        let path = trace_path(&pair_rotation(&pts[1], &pts[2], PI), &gamma).unwrap();
        let ext = extract_braid_detailed(&path).unwrap();
        assert_eq!(ext.start_order, vec![1, 2, 0]);
        assert_eq!(ext.label_permutation(), extract_permutation(&path, 1e-6).unwrap());
    }

    #[test]
    fn json_formats() {
        let word = w(3, &[(1, 1), (2, -1)]);
        let s = serde_json::to_string(&word).unwrap();
        assert_eq!(s, r#"{"n":3,"letters":[[1,1],[2,-1]]}"#);
        assert_eq!(serde_json::from_str::<BraidWord>(&s).unwrap(), word);
        let rep = BraidRep::abelian(3, 0.5).unwrap();
        let back: BraidRep = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
        assert_eq!(back, rep);
        let bad = r#"{"n":2,"d":1,"generators":[[[[2.0,0.0]]]]}"#;
        assert!(serde_json::from_str::<BraidRep>(bad).is_err());
    }
}
