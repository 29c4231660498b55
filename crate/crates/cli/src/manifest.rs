//! Run manifests: everything needed to replay a run exactly.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub subcommand: String,
    /// Resolved subcommand options, minus file paths and worker count.
    pub config: Value,
    pub master_seed: Option<u64>,
    pub version: String,
    /// SHA-256 of the canonical model document.
    pub input_digest: String,
    /// Canonical model document, inlined so the manifest is self-contained.
    pub model: Value,
}

impl RunManifest {
    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
