//! JSON result records.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub command: String,
    /// SHA-256 over the command name, its resolved arguments and the bytes
    /// of every input file.
    pub input_digest: String,
    pub seed: Option<u64>,
    pub outputs: Value,
    /// Only present when timing was requested, so records stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl ResultRecord {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("records always serialize");
        s.push('\n');
        s
    }
}

/// Incremental input digest; each part is length-prefixed.
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn new(command: &str) -> Self {
        let mut d = Self(Sha256::new());
        d.add("command", command.as_bytes());
        d
    }

    pub fn add(&mut self, label: &str, bytes: &[u8]) {
        for part in [label.as_bytes(), bytes] {
            self.0.update((part.len() as u64).to_le_bytes());
            self.0.update(part);
        }
    }

    pub fn add_json(&mut self, label: &str, value: &impl Serialize) -> CliResult<()> {
        let v = serde_json::to_vec(value).map_err(|e| crate::error::CliError::Invalid(e.to_string()))?;
        self.add(label, &v);
        Ok(())
    }

    pub fn finish(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
