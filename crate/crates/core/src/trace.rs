//! The JSON envelope every simulator writes and every checker reads:
//! `{"construction", "params", "events", "final", "checks"}`.
//!
//! Payloads are stored as untyped JSON so that one file format serves all
//! constructions; each construction decodes its own event and state types.
//! `serde_json` keeps object keys sorted, so equal traces serialize to equal
//! bytes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trace field {field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub construction: String,
    pub params: Value,
    pub events: Vec<Value>,
    #[serde(rename = "final")]
    pub final_state: Value,
    pub checks: Vec<CheckResult>,
}

impl StageTrace {
    pub fn new<P, E, F>(construction: &str, params: &P, events: &[E], final_state: &F) -> Self
    where
        P: Serialize,
        E: Serialize,
        F: Serialize,
    {
        StageTrace {
            construction: construction.to_string(),
            params: serde_json::to_value(params).expect("params serialize"),
            events: events
                .iter()
                .map(|e| serde_json::to_value(e).expect("event serializes"))
                .collect(),
            final_state: serde_json::to_value(final_state).expect("state serializes"),
            checks: Vec::new(),
        }
    }

    pub fn params_as<T: DeserializeOwned>(&self) -> Result<T, TraceError> {
        decode("params", &self.params)
    }

    pub fn final_as<T: DeserializeOwned>(&self) -> Result<T, TraceError> {
        decode("final", &self.final_state)
    }

    pub fn events_as<T: DeserializeOwned>(&self) -> Result<Vec<T>, TraceError> {
        self.events
            .iter()
            .enumerate()
            .map(|(i, e)| decode(&format!("events[{i}]"), e))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn decode<T: DeserializeOwned>(field: &str, v: &Value) -> Result<T, TraceError> {
    T::deserialize(v).map_err(|e| TraceError::Field {
        field: field.to_string(),
        message: e.to_string(),
    })
}

/// Outcome of one named invariant or claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pass(&mut self, name: &str, detail: impl Into<String>) {
        self.results.push(CheckResult {
            name: name.to_string(),
            passed: true,
            stage: None,
            detail: detail.into(),
        });
    }

    pub fn fail(&mut self, name: &str, stage: Option<u64>, detail: impl Into<String>) {
        self.results.push(CheckResult {
            name: name.to_string(),
            passed: false,
            stage,
            detail: detail.into(),
        });
    }

    /// Record a pass for `name` unless a failure under that name was already
    /// pushed.
    pub fn pass_unless_failed(&mut self, name: &str, detail: impl Into<String>) {
        if !self.results.iter().any(|r| r.name == name && !r.passed) {
            self.pass(name, detail);
        }
    }

    pub fn ok(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn first_failure(&self, name: &str) -> Option<&CheckResult> {
        self.failures().find(|r| r.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Ev {
        stage: u64,
        what: String,
    }

    #[test]
    fn roundtrip_and_typed_access() {
        let events = vec![
            Ev {
                stage: 1,
                what: "a".into(),
            },
            Ev {
                stage: 4,
                what: "b".into(),
            },
        ];
        let t = StageTrace::new("demo", &serde_json::json!({"z": 1, "a": 2}), &events, &3u8);
        let text = t.to_json();
        // keys come out sorted regardless of insertion order
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
        let back = StageTrace::from_json(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.events_as::<Ev>().unwrap(), events);
        assert_eq!(back.final_as::<u8>().unwrap(), 3);
        assert!(back.final_as::<String>().is_err());
    }

    #[test]
    fn report_bookkeeping() {
        let mut r = CheckReport::new();
        r.pass("x", "");
        assert!(r.ok());
        r.fail("y", Some(7), "broken");
        r.pass_unless_failed("y", "");
        assert!(!r.ok());
        assert_eq!(r.results.len(), 2);
        assert_eq!(r.first_failure("y").unwrap().stage, Some(7));
    }
}
