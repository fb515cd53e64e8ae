//! Flat machine-readable reports: named checks with status, residual, and
//! tolerance, serialized as a single flat JSON object with deterministic
//! key order.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not a failure: the measurement cannot distinguish signal from
    /// discretization error (reason recorded alongside).
    Inconclusive,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckStatus::Pass => write!(f, "pass"),
            CheckStatus::Fail => write!(f, "FAIL"),
            CheckStatus::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// One named check with its measured residual and the tolerance it was
/// held to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub residual: f64,
    pub tolerance: f64,
    /// Where the inputs came from (run id, grid, parameters).
    pub provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64, pass: bool) -> Self {
        Check {
            name: name.into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            residual,
            tolerance,
            provenance: String::new(),
            note: None,
        }
    }

    pub fn from_bound(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check::new(name, residual, tolerance, residual <= tolerance)
    }

    pub fn inconclusive(name: impl Into<String>, residual: f64, reason: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: CheckStatus::Inconclusive,
            residual,
            tolerance: f64::NAN,
            provenance: String::new(),
            note: Some(reason.into()),
        }
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }

    pub fn with_note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }
}

/// A collection of checks plus free-form scalar measurements.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, f64>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn record(&mut self, key: impl Into<String>, value: f64) {
        self.values.insert(key.into(), value);
    }

    pub fn merge(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.values.extend(other.values);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    /// Flatten to `name.field -> value` pairs with deterministic order.
    pub fn to_flat_json(&self) -> String {
        let mut map: BTreeMap<String, serde_json::Value> = BTreeMap::new();
        for c in &self.checks {
            let base = c.name.clone();
            map.insert(format!("{base}.status"), c.status_str().into());
            map.insert(format!("{base}.residual"), finite_json(c.residual));
            map.insert(format!("{base}.tolerance"), finite_json(c.tolerance));
            if !c.provenance.is_empty() {
                map.insert(format!("{base}.provenance"), c.provenance.clone().into());
            }
            if let Some(n) = &c.note {
                map.insert(format!("{base}.note"), n.clone().into());
            }
        }
        for (k, v) in &self.values {
            map.insert(k.clone(), finite_json(*v));
        }
        serde_json::to_string_pretty(&map).expect("flat map serializes")
    }
}

impl Check {
    fn status_str(&self) -> &'static str {
        match self.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Inconclusive => "inconclusive",
        }
    }
}

fn finite_json(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::Value::String(format!("{v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_json_is_deterministic_and_flat() {
        let mut r = Report::new();
        r.push(Check::from_bound("energy_law", 1e-9, 1e-6).with_provenance("run-1"));
        r.push(Check::inconclusive("sparse", 0.5, "too few snapshots"));
        r.record("umax", 3.25);
        let a = r.to_flat_json();
        let b = r.to_flat_json();
        assert_eq!(a, b);
        let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert!(parsed.is_object());
        assert_eq!(parsed["energy_law.status"], "pass");
        assert_eq!(parsed["sparse.status"], "inconclusive");
        assert!(parsed["umax"].as_f64().unwrap() == 3.25);
        assert!(r.all_passed());
    }

    #[test]
    fn failures_are_counted() {
        let mut r = Report::new();
        r.push(Check::from_bound("bad", 2.0, 1.0));
        assert!(!r.all_passed());
        assert_eq!(r.failures().count(), 1);
    }
}
