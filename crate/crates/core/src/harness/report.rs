use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const REPORT_FORMAT: u32 = 1;

/// One named check: the worst residual over its instances compared with a
/// tolerance. `passed` is always `residual <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub inputs_digest: String,
    pub instances: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub kinemat: String,
    pub report_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self { kinemat: env!("CARGO_PKG_VERSION").to_string(), report_format: REPORT_FORMAT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub config_digest: String,
    pub versions: Versions,
    pub summary: Summary,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    /// Sorts checks by name and fills in the summary.
    pub fn new(suite: &str, seed: u64, config_digest: String, mut checks: Vec<CheckRecord>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let passed = checks.iter().filter(|c| c.passed).count();
        let summary = Summary { checks: checks.len(), passed, failed: checks.len() - passed, all_passed: passed == checks.len() };
        Self { suite: suite.to_string(), seed, config_digest, versions: Versions::default(), summary, checks }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.all_passed
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// SHA-256 over a sequence of serialized inputs, as lowercase hex.
#[derive(Debug, Clone, Default)]
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<T: Serialize + ?Sized>(&mut self, value: &T) {
        let bytes = serde_json::to_vec(value).expect("inputs serialize");
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(&bytes);
    }

    pub fn add_bytes(&mut self, bytes: &[u8]) {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }

    pub fn hex(self) -> String {
        to_hex(&self.finish())
    }
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(name: &str, residual: f64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            inputs_digest: String::new(),
            instances: 1,
            residual,
            tolerance: 1.0,
            passed: residual <= 1.0,
            observed: None,
            wall_time_ms: None,
        }
    }

    #[test]
    fn checks_are_sorted_and_summarized() {
        let r = Report::new("s", 1, "d".into(), vec![record("b", 0.5), record("a", 2.0)]);
        assert_eq!(r.checks[0].name, "a");
        assert_eq!(r.summary, Summary { checks: 2, passed: 1, failed: 1, all_passed: false });
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(!r.to_json().unwrap().contains("wall_time_ms"));
    }

    #[test]
    fn digests_depend_on_order() {
        let mut a = InputDigest::new();
        a.add(&1u32);
        a.add(&2u32);
        let mut b = InputDigest::new();
        b.add(&2u32);
        b.add(&1u32);
        assert_ne!(a.hex(), b.hex());
    }
}
