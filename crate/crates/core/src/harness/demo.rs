//! Exchange demo: trace a schedule of flows on a planar configuration and
//! report its braid, permutation and cocycle value.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::braid::{extract_braid_detailed, extract_permutation, trace_path, BraidRep, BraidWord, ConfigPath};
use crate::config::{act, Configuration, STABILIZER_TOL};
use crate::constructions::rotation_exchange;
use crate::error::{KinematError, Result};
use crate::fields::Point;
use crate::flows::{Diffeo, FlowStep};

/// A list of flow steps run in order, or a full diffeomorphism document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Steps(Vec<FlowStep>),
    Word(Diffeo),
}

impl Schedule {
    pub fn into_diffeo(self) -> Result<Diffeo> {
        match self {
            Schedule::Steps(steps) => Diffeo::from_steps(2, steps),
            Schedule::Word(d) => Ok(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemoRequest {
    /// Abelian exchange angle; ignored when `rep` is set. Defaults to pi.
    pub theta: Option<f64>,
    pub rep: Option<BraidRep>,
    /// Defaults to `exchanges` counterclockwise rotation exchanges of the
    /// first two points.
    pub schedule: Option<Schedule>,
    /// Defaults to `n_points` points at `(j - (N-1)/2, 0)`.
    pub points: Option<Vec<Point>>,
    pub n_points: Option<usize>,
    pub exchanges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub n_points: usize,
    pub points: Vec<Vec<f64>>,
    pub rep: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub braid: String,
    pub word: BraidWord,
    pub axis_angle: f64,
    /// `permutation[j]` is the start index of the point that ends at slot
    /// `j`; absent when the path is not a loop in configuration space.
    pub permutation: Option<Vec<usize>>,
    pub cocycle: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<[f64; 2]>,
    pub min_separation: f64,
    pub path_samples: usize,
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub report: DemoReport,
    pub path: ConfigPath,
}

impl DemoOutput {
    /// Strand trajectories with columns `step,strand,x,y`.
    pub fn csv(&self) -> String {
        let mut out = String::from("step,strand,x,y\n");
        for (step, sample) in self.path.samples().iter().enumerate() {
            for (strand, p) in sample.iter().enumerate() {
                let _ = writeln!(out, "{step},{strand},{},{}", p[0], p[1]);
            }
        }
        out
    }
}

fn default_points(count: usize) -> Vec<Point> {
    (0..count).map(|j| Point::from_vec(vec![j as f64 - 0.5 * (count as f64 - 1.0), 0.0])).collect()
}

fn exchange_schedule(gamma: &Configuration, count: usize) -> Result<Diffeo> {
    let mut phi = Diffeo::identity(2);
    let mut current = gamma.clone();
    for _ in 0..count {
        let step = rotation_exchange(&current, 0, 1, true)?;
        current = act(&step, &current)?;
        phi = phi.compose(&step)?;
    }
    Ok(phi)
}

pub fn demo_exchange(req: DemoRequest) -> Result<DemoOutput> {
    let points = match (req.points, req.n_points) {
        (Some(p), Some(n)) if p.len() != n => {
            return Err(KinematError::InvalidArgument(format!("{} points given but n_points = {n}", p.len())));
        }
        (Some(p), _) => p,
        (None, n) => default_points(n.unwrap_or(2)),
    };
    let gamma = Configuration::unit_masses(points)?;
    if gamma.dim() != 2 {
        return Err(KinematError::InvalidArgument("the exchange demo runs in the plane".into()));
    }
    let n = gamma.len();
    let phi = match req.schedule {
        Some(s) => s.into_diffeo()?,
        None => exchange_schedule(&gamma, req.exchanges.unwrap_or(1))?,
    };
    let (rep, label, theta) = match req.rep {
        Some(r) => (r, "file".to_string(), None),
        None => {
            let t = req.theta.unwrap_or(std::f64::consts::PI);
            (BraidRep::abelian(n, t)?, "abelian".to_string(), Some(t))
        }
    };
    if rep.strands() != n {
        return Err(KinematError::InvalidArgument(format!("representation has {} strands, configuration has {n}", rep.strands())));
    }
    let path = trace_path(&phi, &gamma)?;
    let extraction = extract_braid_detailed(&path)?;
    let chi = rep.eval(&extraction.word)?;
    let permutation = extract_permutation(&path, STABILIZER_TOL).ok().map(|p| p.as_slice().to_vec());
    let min_separation = path
        .samples()
        .iter()
        .map(|s| Configuration::unit_masses(s.clone()).map(|c| c.min_separation()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let cocycle = chi.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect();
    let report = DemoReport {
        n_points: n,
        points: gamma.points().iter().map(|p| p.as_slice().to_vec()).collect(),
        rep: label,
        theta,
        braid: extraction.word.to_string(),
        word: extraction.word,
        axis_angle: extraction.axis_angle,
        permutation,
        cocycle,
        phase: (rep.dim() == 1).then(|| [chi[(0, 0)].re, chi[(0, 0)].im]),
        min_separation,
        path_samples: path.len(),
    };
    Ok(DemoOutput { report, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::VectorField;
    use std::f64::consts::PI;

    #[test]
    fn quarter_turn_phase() {
        let out = demo_exchange(DemoRequest { theta: Some(PI / 2.0), ..Default::default() }).unwrap();
        assert_eq!(out.report.braid, "s1");
        assert_eq!(out.report.permutation, Some(vec![1, 0]));
        let [re, im] = out.report.phase.unwrap();
        assert!(re.abs() < 1e-12 && (im - 1.0).abs() < 1e-12);
        assert!(out.csv().starts_with("step,strand,x,y\n0,0,-0.5,0\n"));
    }

    #[test]
    fn double_exchange_and_far_schedule() {
        let out = demo_exchange(DemoRequest { theta: Some(0.3), exchanges: Some(2), ..Default::default() }).unwrap();
        assert_eq!(out.report.braid, "s1 s1");
        let [re, im] = out.report.phase.unwrap();
        assert!((re - 0.6f64.cos()).abs() < 1e-12 && (im - 0.6f64.sin()).abs() < 1e-12);

        let far = VectorField::rotate(Point::from_vec(vec![5.0, 5.0]), 1.0, 1.0).unwrap();
        let schedule = Schedule::Steps(vec![FlowStep::new(far, 3.0)]);
        let out = demo_exchange(DemoRequest { schedule: Some(schedule), ..Default::default() }).unwrap();
        assert_eq!(out.report.braid, "e");
        assert_eq!(out.report.phase, Some([1.0, 0.0]));
    }
}
