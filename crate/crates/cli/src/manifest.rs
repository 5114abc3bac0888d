use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::Failure;

/// Record of one `match` run: inputs, resolved configuration, timings and
/// every file written.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub inputs: BTreeMap<&'static str, String>,
    pub config: serde_json::Value,
    pub result: serde_json::Value,
    pub timings_ms: BTreeMap<&'static str, f64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs: BTreeMap::new(),
            config: serde_json::Value::Null,
            result: serde_json::Value::Null,
            timings_ms: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings_ms.insert(stage, start.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn write(&mut self, path: &Path) -> Result<(), Failure> {
        self.outputs.push(path.display().to_string());
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(path, &text)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        stage: "write",
        error: pmf_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}
