use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Everything needed to re-run a command. Embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }
    }

    pub fn input(mut self, name: &str, path: &str) -> Self {
        self.inputs.insert(name.to_string(), path.to_string());
        self
    }

    pub fn param(mut self, name: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("parameters are plain data");
        self.parameters.insert(name.to_string(), v);
        self
    }
}
