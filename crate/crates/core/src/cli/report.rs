use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;

pub const WALL_CLOCK_KEY: &str = "wall_clock_seconds";

/// Machine-readable outcome of one command. Keys serialize sorted, so two runs
/// with the same config produce the same bytes apart from the wall-clock
/// field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub metrics: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub verdicts: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    pub version: String,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        s.push('\n');
        s
    }

    /// The serialized report without the wall-clock field.
    pub fn deterministic_json(&self) -> String {
        strip_wall_clock(&self.to_json())
    }
}

/// Drops the wall-clock field from a serialized report.
pub fn strip_wall_clock(json: &str) -> String {
    let mut v: Value = serde_json::from_str(json).expect("report JSON");
    if let Some(map) = v.as_object_mut() {
        map.remove(WALL_CLOCK_KEY);
    }
    serde_json::to_string_pretty(&v).expect("report serializes")
}

/// Metrics and verdicts collected by a command.
#[derive(Debug, Default)]
pub(crate) struct Findings {
    pub metrics: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, bool>,
}

impl Findings {
    pub fn metric(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.metrics.insert(key.into(), serde_json::to_value(value).expect("metric serializes"));
    }

    pub fn verdict(&mut self, key: impl Into<String>, pass: bool) {
        self.verdicts.insert(key.into(), pass);
    }
}
