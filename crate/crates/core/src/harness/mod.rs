//! Seeded verification suites and their JSON reports.
//!
//! A [`RunConfig`] names one suite; [`run_suite`] sweeps its checks over
//! dimensions and particle counts and returns a [`Report`] whose bytes depend
//! only on the configuration. Randomness descends from the config seed
//! through named substreams `suite -> check -> instance`.

mod demo;
pub mod gen;
mod report;
mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::KinematError;
use crate::rng::{indexed, Rng};

pub use demo::{demo_exchange, DemoOutput, DemoReport, DemoRequest, Schedule};
pub use report::{to_hex, CheckRecord, InputDigest, Report, Summary, Versions, REPORT_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    GroupAxioms,
    FlowLaws,
    CurrentAlgebra,
    Intertwining,
    Cocycle,
    BraidOracles,
    ClassicalCorrespondence,
    McUnitarity,
    StoneLimit,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::GroupAxioms,
        Suite::FlowLaws,
        Suite::CurrentAlgebra,
        Suite::Intertwining,
        Suite::Cocycle,
        Suite::BraidOracles,
        Suite::ClassicalCorrespondence,
        Suite::McUnitarity,
        Suite::StoneLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::GroupAxioms => "group-axioms",
            Suite::FlowLaws => "flow-laws",
            Suite::CurrentAlgebra => "current-algebra",
            Suite::Intertwining => "intertwining",
            Suite::Cocycle => "cocycle",
            Suite::BraidOracles => "braid-oracles",
            Suite::ClassicalCorrespondence => "classical-correspondence",
            Suite::McUnitarity => "mc-unitarity",
            Suite::StoneLimit => "stone-limit",
        }
    }

    /// Dimensions the suite accepts; all of them are swept by default.
    pub fn dims(self) -> &'static [usize] {
        match self {
            Suite::Cocycle | Suite::McUnitarity => &[2],
            Suite::BraidOracles => &[2, 3],
            _ => &[1, 2, 3],
        }
    }

    /// Particle counts swept when none is configured.
    pub fn default_particles(self) -> &'static [usize] {
        match self {
            Suite::GroupAxioms | Suite::FlowLaws => &[1],
            Suite::Cocycle | Suite::BraidOracles => &[2, 3, 4],
            Suite::McUnitarity => &[1, 2],
            _ => &[1, 2, 3],
        }
    }

    pub fn min_particles(self) -> usize {
        match self {
            Suite::Cocycle | Suite::BraidOracles => 2,
            _ => 1,
        }
    }

    pub fn default_instances(self) -> usize {
        match self {
            Suite::GroupAxioms => 25,
            Suite::FlowLaws | Suite::CurrentAlgebra | Suite::ClassicalCorrespondence => 100,
            Suite::McUnitarity => 3,
            _ => 50,
        }
    }

    /// Check kinds and their default tolerances.
    pub fn tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Suite::GroupAxioms => &[("associativity", 1e-7), ("identity", 1e-7), ("inverse", 1e-7)],
            Suite::FlowLaws => &[
                ("one-parameter", 1e-8),
                ("inverse", 1e-8),
                ("jacobian", 1e-6),
                ("liouville", 1e-7),
                ("bracket-flow", 1e-4),
                ("directional-derivative", 1e-6),
            ],
            Suite::CurrentAlgebra => &[("rho-rho", 0.0), ("rho-j", 1e-6), ("j-j", 1e-4), ("jacobi", 1e-4)],
            Suite::Intertwining => &[("intertwining", 1e-8)],
            Suite::Cocycle => &[
                ("cocycle", 1e-12),
                ("inverse-cancel", 1e-12),
                ("far-commutation", 1e-12),
                ("v-compose", 1e-7),
            ],
            Suite::BraidOracles => &[
                ("exchange-word", 0.0),
                ("exchange-phase", 1e-12),
                ("anyon-phase", 1e-12),
                ("double-exchange", 1e-12),
                ("quotient", 0.0),
                ("quotient-3d", 0.0),
                ("homotopy", 0.0),
                ("refinement", 0.0),
                ("reversal", 0.0),
                ("concatenation", 0.0),
            ],
            Suite::ClassicalCorrespondence => &[
                ("coordinate", 1e-10),
                ("rho-rho", 1e-10),
                ("rho-j", 1e-8),
                ("j-j", 1e-8),
                ("quantum-rho-j", 1e-6),
            ],
            Suite::McUnitarity => &[("unitarity-sigmas", 3.0)],
            Suite::StoneLimit => &[("stone", 1e-6)],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, RunError> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| RunError::Config(format!("unknown suite `{s}`")))
    }
}

fn default_hbar() -> f64 {
    1.0
}

fn default_steps() -> usize {
    3
}

/// Declarative description of one suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub suite: Suite,
    #[serde(default)]
    pub seed: u64,
    /// Restricts the sweep to one dimension.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Restricts the sweep to one particle count.
    #[serde(default)]
    pub n_points: Option<usize>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    /// Seeded instances per check; suite default when absent.
    #[serde(default)]
    pub instances: Option<usize>,
    /// Sample configurations per instance for operator identities.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Monte-Carlo samples per unitarity estimate.
    #[serde(default)]
    pub mc_samples: Option<usize>,
    /// Exchange angle for anyon checks.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Maximum number of flow steps in random diffeomorphism words.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Default output path of the JSON report.
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Adds wall-clock times to check records; reports are then no longer
    /// byte-stable.
    #[serde(default)]
    pub record_timings: bool,
    /// Negative control: runs the Jacobi check with the sign of the
    /// `[J, J]` structure constant flipped, which must fail.
    #[serde(default)]
    pub flip_jj_sign: bool,
    /// Per-kind tolerance overrides; the key `all` applies to every kind.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn new(suite: Suite, seed: u64) -> Self {
        Self {
            suite,
            seed,
            dim: None,
            n_points: None,
            hbar: default_hbar(),
            instances: None,
            samples: None,
            mc_samples: None,
            theta: None,
            steps: default_steps(),
            report: None,
            record_timings: false,
            flip_jj_sign: false,
            tolerances: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml_from_str(text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let suite = self.suite;
        if let Some(d) = self.dim {
            if !suite.dims().contains(&d) {
                return Err(RunError::Config(format!("suite {suite} does not support dimension {d} (allowed: {:?})", suite.dims())));
            }
        }
        if let Some(n) = self.n_points {
            if n < suite.min_particles() {
                return Err(RunError::Config(format!("suite {suite} needs at least {} points", suite.min_particles())));
            }
        }
        if suite == Suite::McUnitarity && self.n_points.is_some_and(|n| n > 2) {
            return Err(RunError::Config("mc-unitarity supports at most 2 points".into()));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(RunError::Config(format!("hbar must be positive, got {}", self.hbar)));
        }
        if self.instances == Some(0) || self.samples == Some(0) {
            return Err(RunError::Config("instances and samples must be positive".into()));
        }
        if self.mc_samples.is_some_and(|m| m < 2) {
            return Err(RunError::Config("mc_samples must be at least 2".into()));
        }
        if self.theta.is_some_and(|t| !t.is_finite()) {
            return Err(RunError::Config("theta must be finite".into()));
        }
        for (kind, &tol) in &self.tolerances {
            if kind != "all" && !suite.tolerances().iter().any(|(k, _)| k == kind) {
                return Err(RunError::Config(format!("suite {suite} has no check kind `{kind}`")));
            }
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(RunError::Config(format!("tolerance for `{kind}` must be positive")));
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, kind: &str) -> f64 {
        if let Some(&t) = self.tolerances.get(kind) {
            return t;
        }
        if let Some(&t) = self.tolerances.get("all") {
            return t;
        }
        self.suite
            .tolerances()
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, t)| *t)
            .unwrap_or_else(|| panic!("unknown check kind {kind}"))
    }

    pub fn dims(&self) -> Vec<usize> {
        self.dim.map_or_else(|| self.suite.dims().to_vec(), |d| vec![d])
    }

    pub fn particle_counts(&self) -> Vec<usize> {
        self.n_points.map_or_else(|| self.suite.default_particles().to_vec(), |n| vec![n])
    }

    pub fn instances(&self) -> usize {
        self.instances.unwrap_or_else(|| self.suite.default_instances())
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(8)
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples.unwrap_or(100_000)
    }

    /// Digest of everything that influences report content.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.report = None;
        let mut d = InputDigest::new();
        d.add(&canonical);
        d.hex()
    }
}

fn toml_from_str(text: &str) -> Result<RunConfig, RunError> {
    let value: toml::Value = text.parse().map_err(|e: toml::de::Error| RunError::Config(e.to_string()))?;
    value.try_into().map_err(|e: toml::de::Error| RunError::Config(e.to_string()))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure in {check}: {source}")]
    Numerical {
        check: String,
        #[source]
        source: KinematError,
    },
}

/// Runs the configured suite.
pub fn run_suite(config: &RunConfig) -> Result<Report, RunError> {
    config.validate()?;
    let ctx = Ctx { cfg: config };
    let checks = match config.suite {
        Suite::GroupAxioms => suites::group_axioms(&ctx),
        Suite::FlowLaws => suites::flow_laws(&ctx),
        Suite::CurrentAlgebra => suites::current_algebra(&ctx),
        Suite::Intertwining => suites::intertwining(&ctx),
        Suite::Cocycle => suites::cocycle(&ctx),
        Suite::BraidOracles => suites::braid_oracles(&ctx),
        Suite::ClassicalCorrespondence => suites::classical_correspondence(&ctx),
        Suite::McUnitarity => suites::mc_unitarity(&ctx),
        Suite::StoneLimit => suites::stone_limit(&ctx),
    }?;
    Ok(Report::new(config.suite.name(), config.seed, config.digest(), checks))
}

/// Shared state of one suite run.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
}

/// Result of one instance of a check.
pub(crate) struct Outcome {
    pub residual: f64,
    pub observed: Option<serde_json::Value>,
}

impl From<f64> for Outcome {
    fn from(residual: f64) -> Self {
        Self { residual, observed: None }
    }
}

impl Ctx<'_> {
    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    /// Runs `instances` seeded instances of a check in parallel and keeps the
    /// worst residual. `params` distinguishes sweeps of the same kind, e.g.
    /// `/n=2/N=3`.
    pub fn check<F>(&self, kind: &str, params: &str, instances: usize, f: F) -> Result<CheckRecord, RunError>
    where
        F: Fn(&mut Rng, &mut InputDigest) -> crate::Result<Outcome> + Sync,
    {
        let name = format!("{}/{kind}{params}", self.cfg.suite.name());
        let tolerance = self.cfg.tolerance(kind);
        let started = Instant::now();
        let path = [self.cfg.suite.name(), kind, params];
        let results: Vec<crate::Result<(Outcome, [u8; 32])>> = (0..instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = indexed(self.seed(), &path, i);
                let mut digest = InputDigest::new();
                let out = f(&mut rng, &mut digest)?;
                Ok((out, digest.finish()))
            })
            .collect();
        let mut digest = InputDigest::new();
        let mut residual = 0.0f64;
        let mut observed = None;
        for r in results {
            let (out, d) = r.map_err(|source| RunError::Numerical { check: name.clone(), source })?;
            if !out.residual.is_finite() {
                return Err(RunError::Numerical {
                    check: name.clone(),
                    source: KinematError::InvalidArgument(format!("non-finite residual {}", out.residual)),
                });
            }
            digest.add_bytes(&d);
            if out.residual >= residual {
                residual = out.residual;
            }
            if observed.is_none() {
                observed = out.observed;
            }
        }
        Ok(CheckRecord {
            name,
            inputs_digest: digest.hex(),
            instances,
            residual,
            tolerance,
            passed: residual <= tolerance,
            observed,
            wall_time_ms: self.cfg.record_timings.then(|| started.elapsed().as_secs_f64() * 1e3),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn toml_configs() {
        let cfg = RunConfig::from_toml(
            "suite = \"braid-oracles\"\nseed = 5\ndim = 2\nn_points = 2\ntheta = 3.14\n[tolerances]\nanyon-phase = 1e-10\n",
        )
        .unwrap();
        assert_eq!(cfg.suite, Suite::BraidOracles);
        assert_eq!(cfg.tolerance("anyon-phase"), 1e-10);
        assert_eq!(cfg.tolerance("reversal"), 0.0);
        cfg.validate().unwrap();
        assert!(RunConfig::from_toml("suite = \"cocycle\"\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("seed = 1\n").is_err());
        let mut bad = RunConfig::new(Suite::Cocycle, 0);
        bad.dim = Some(3);
        assert!(bad.validate().is_err());
        let mut bad = RunConfig::new(Suite::FlowLaws, 0);
        bad.tolerances.insert("one-parameter".into(), -1.0);
        assert!(bad.validate().is_err());
        let mut bad = RunConfig::new(Suite::FlowLaws, 0);
        bad.tolerances.insert("unheard-of".into(), 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn digest_ignores_output_path() {
        let a = RunConfig::new(Suite::StoneLimit, 1);
        let mut b = a.clone();
        b.report = Some("elsewhere.json".into());
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
    }
}
