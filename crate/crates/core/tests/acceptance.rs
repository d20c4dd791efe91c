//! Acceptance criteria, one line per criterion. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::process::ExitCode;

use kinemat_core::braid::{CVector, C64};
use kinemat_core::config::{act, Configuration};
use kinemat_core::currents::{
    mc_norm_change, v_apply, BoxSampler, GaussianWave, PhysicalConstants, Wave, Wavefunction,
};
use kinemat_core::fields::{Point, VectorField};
use kinemat_core::flows::{Diffeo, FlowStep, IntegratorSettings};
use kinemat_core::harness::{run_suite, CheckRecord, Report, RunConfig, Suite};
use kinemat_core::rng::substream;
use kinemat_core::Result as KResult;

const SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

struct Reports(BTreeMap<Suite, Report>);

impl Reports {
    fn get(&self, suite: Suite) -> &Report {
        &self.0[&suite]
    }

    fn records(&self, suite: Suite, kind: &str) -> Vec<&CheckRecord> {
        let prefix = format!("{suite}/{kind}/");
        self.get(suite).checks.iter().filter(|c| c.name.starts_with(&prefix)).collect()
    }
}

/// All records of a kind pass at `tolerance` with `instances` instances
/// each, across `expected` sweep points.
fn kind_ok(reports: &Reports, suite: Suite, kind: &str, tolerance: f64, instances: usize, expected: usize) -> Outcome {
    let recs = reports.records(suite, kind);
    if recs.len() != expected {
        return Err(format!("{kind}: expected {expected} records, found {}", recs.len()));
    }
    let mut worst = 0.0f64;
    for r in &recs {
        if r.tolerance != tolerance {
            return Err(format!("{}: tolerance {} instead of {tolerance}", r.name, r.tolerance));
        }
        if r.instances != instances {
            return Err(format!("{}: {} instances instead of {instances}", r.name, r.instances));
        }
        if !r.passed {
            return Err(format!("{}: residual {:.3e} > {tolerance:.0e}", r.name, r.residual));
        }
        worst = worst.max(r.residual);
    }
    Ok(format!("{kind} max {worst:.2e} <= {tolerance:.0e}"))
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let mut ok = Vec::new();
    for p in parts {
        ok.push(p?);
    }
    Ok(ok.join("; "))
}

fn c1(r: &Reports) -> Outcome {
    kind_ok(r, Suite::FlowLaws, "one-parameter", 1e-8, 100, 3)
}

fn c2(r: &Reports) -> Outcome {
    let g = Suite::GroupAxioms;
    all(vec![
        kind_ok(r, g, "associativity", 1e-7, 25, 3),
        kind_ok(r, g, "identity", 1e-7, 25, 3),
        kind_ok(r, g, "inverse", 1e-7, 25, 3),
    ])
}

fn c3(r: &Reports) -> Outcome {
    let s = Suite::CurrentAlgebra;
    let exact = r.records(s, "rho-rho").iter().all(|c| c.residual == 0.0);
    if !exact {
        return Err("[rho, rho] is not exactly zero".into());
    }
    all(vec![kind_ok(r, s, "rho-rho", 0.0, 100, 9), kind_ok(r, s, "rho-j", 1e-6, 100, 9), kind_ok(r, s, "j-j", 1e-4, 100, 9)])
}

fn c4(r: &Reports) -> Outcome {
    kind_ok(r, Suite::StoneLimit, "stone", 1e-6, 50, 9)
}

fn c5(r: &Reports) -> Outcome {
    kind_ok(r, Suite::Intertwining, "intertwining", 1e-8, 50, 9)
}

fn c6(r: &Reports) -> Outcome {
    kind_ok(r, Suite::Cocycle, "cocycle", 1e-12, 50, 15)
}

fn c7(r: &Reports) -> Outcome {
    let s = Suite::BraidOracles;
    let fermion = r
        .get(s)
        .check("braid-oracles/exchange-phase/theta=3.141592653589793/n=2/N=2")
        .ok_or("missing theta = pi exchange phase")?;
    let phase = &fermion.observed.as_ref().ok_or("no observed phase")?["phase"];
    let re = phase[0].as_f64().ok_or("bad phase")?;
    if !fermion.passed || (re + 1.0).abs() > 1e-12 {
        return Err(format!("theta = pi exchange phase {phase} is not -1"));
    }
    all(vec![
        kind_ok(r, s, "exchange-word", 0.0, 50, 3),
        kind_ok(r, s, "anyon-phase", 1e-12, 5, 9),
        kind_ok(r, s, "double-exchange", 1e-12, 5, 3),
        Ok("theta = pi gives -1".into()),
    ])
}

fn c8(r: &Reports) -> Outcome {
    let s = Suite::BraidOracles;
    all(vec![kind_ok(r, s, "quotient", 0.0, 50, 3), kind_ok(r, s, "quotient-3d", 0.0, 50, 3)])
}

/// `V` with the density factor inverted; unitarity must visibly fail.
#[derive(Debug)]
struct WrongDensity {
    phi: Diffeo,
    base: Wavefunction,
}

impl Wave for WrongDensity {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn particles(&self) -> usize {
        self.base.particles()
    }
    fn value_dim(&self) -> usize {
        self.base.value_dim()
    }
    fn value(&self, gamma: &Configuration) -> KResult<CVector> {
        let mut density = 1.0;
        for x in gamma.points() {
            density *= self.phi.jacobian(x)?.determinant().abs();
        }
        Ok(self.base.value(&act(&self.phi, gamma)?)? * C64::from(1.0 / density.sqrt()))
    }
}

fn c9(r: &Reports) -> Outcome {
    let recs: Vec<_> = r.get(Suite::McUnitarity).checks.iter().collect();
    if recs.len() != 6 {
        return Err(format!("expected 3 instances for each of N = 1, 2, found {} records", recs.len()));
    }
    for rec in &recs {
        let obs = rec.observed.as_ref().ok_or("no observed estimate")?;
        if obs["samples"].as_u64() != Some(100_000) {
            return Err(format!("{}: sample count {}", rec.name, obs["samples"]));
        }
        if !rec.passed {
            return Err(format!("{}: |difference| {:.3e} > 3 SE = {:.3e}", rec.name, rec.residual, rec.tolerance));
        }
    }
    let worst = recs.iter().map(|c| c.residual / c.tolerance * 3.0).fold(0.0, f64::max);

    // negative control: the inverted density factor breaks unitarity
    let field = VectorField::translate(Point::from_vec(vec![0.0, 0.0]), 0.9, Point::from_vec(vec![1.0, 0.3])).unwrap();
    let phi = Diffeo::new(2, vec![FlowStep::new(field, 0.7)], IntegratorSettings::with_tol(1e-8)).unwrap();
    let psi = Wavefunction::new(GaussianWave::random(&mut substream(SEED, &["control"]), 2, 1, 1, 0.3));
    let sampler = BoxSampler::containing(&phi.support(), 2, 0.2, vec![1.0]).unwrap();
    let right = v_apply(&phi, None, &psi, PhysicalConstants::default()).unwrap();
    let wrong = Wavefunction::new(WrongDensity { phi: phi.clone(), base: psi.clone() });
    let good = mc_norm_change(&right, &psi, &sampler, 100_000, SEED).map_err(|e| e.to_string())?;
    let bad = mc_norm_change(&wrong, &psi, &sampler, 100_000, SEED).map_err(|e| e.to_string())?;
    let z_good = good.value().norm() / good.std_error;
    let z_bad = bad.value().norm() / bad.std_error;
    if z_good > 3.0 || z_bad <= 3.0 {
        return Err(format!("control: correct factor {z_good:.2} SE, inverted factor {z_bad:.2} SE"));
    }
    Ok(format!("worst {worst:.2} SE <= 3 SE; inverted density control at {z_bad:.1} SE"))
}

fn c10(r: &Reports) -> Outcome {
    let s = Suite::ClassicalCorrespondence;
    all(vec![
        kind_ok(r, s, "coordinate", 1e-10, 100, 9),
        kind_ok(r, s, "rho-j", 1e-8, 100, 9),
        kind_ok(r, s, "j-j", 1e-8, 100, 9),
    ])
}

fn c11(r: &Reports) -> Outcome {
    let good = kind_ok(r, Suite::CurrentAlgebra, "jacobi", 1e-4, 25, 9)?;
    let mut flipped = RunConfig::new(Suite::CurrentAlgebra, SEED);
    flipped.flip_jj_sign = true;
    let report = run_suite(&flipped).map_err(|e| e.to_string())?;
    let jacobi: Vec<_> = report.checks.iter().filter(|c| c.name.starts_with("current-algebra/jacobi/")).collect();
    if report.all_passed() || jacobi.iter().any(|c| c.passed) {
        return Err("flipping the [J, J] sign did not fail the Jacobi check".into());
    }
    let least = jacobi.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);
    Ok(format!("{good}; flipped sign fails with residual >= {least:.2e}"))
}

fn c12(r: &Reports) -> Outcome {
    for suite in Suite::ALL {
        let again = run_suite(&RunConfig::new(suite, SEED)).map_err(|e| e.to_string())?;
        let (a, b) = (r.get(suite).to_json().unwrap(), again.to_json().unwrap());
        if a != b {
            return Err(format!("{suite}: reports differ between runs"));
        }
    }
    Ok(format!("{} suites byte-identical on rerun", Suite::ALL.len()))
}

fn main() -> ExitCode {
    let mut reports = BTreeMap::new();
    for suite in Suite::ALL {
        match run_suite(&RunConfig::new(suite, SEED)) {
            Ok(r) => {
                reports.insert(suite, r);
            }
            Err(e) => {
                println!("FAIL  suite {suite} did not run: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    let reports = Reports(reports);
    let criteria: [(&str, fn(&Reports) -> Outcome); 12] = [
        ("flow one-parameter law", c1),
        ("group axioms", c2),
        ("current algebra", c3),
        ("Stone generator recovery", c4),
        ("intertwining", c5),
        ("cocycle equation", c6),
        ("anyon oracle", c7),
        ("S_N quotient", c8),
        ("Monte-Carlo unitarity", c9),
        ("classical correspondence", c10),
        ("Jacobi sign consistency", c11),
        ("determinism", c12),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check(&reports) {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
