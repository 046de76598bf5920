//! Provenance record for one constructed proxy.

use serde::{Deserialize, Serialize};
use tipa_core::{AdapterCheckpoint, DistanceKind, LanguageId, MergeMethod, PruningPolicy, SimilarityWeights};

use crate::container::{encode, manifest_bytes, sha256_hex, Written};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFiles {
    /// Path of the written container; absent when nothing was written.
    pub checkpoint: Option<String>,
    /// SHA-256 of the container bytes.
    pub checkpoint_sha256: String,
    pub manifest: Option<String>,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub target: LanguageId,
    pub method: MergeMethod,
    /// Absent for methods that ignore typology (`uniform`).
    pub distance_kind: Option<DistanceKind>,
    pub policy: PruningPolicy,
    /// Present iff `method` is `tipa`.
    pub weights: Option<SimilarityWeights>,
    pub pool: Vec<LanguageId>,
    /// Method-specific record copied from the output manifest.
    pub merge: serde_json::Value,
    pub output: OutputFiles,
    pub tool_version: String,
    /// UTC ISO-8601; omitted for reports that must be reproducible byte-for-byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl ProxyReport {
    pub fn new(
        method: MergeMethod,
        distance_kind: Option<DistanceKind>,
        policy: PruningPolicy,
        weights: Option<SimilarityWeights>,
        pool: Vec<LanguageId>,
        proxy: &AdapterCheckpoint,
        target: &LanguageId,
    ) -> Self {
        ProxyReport {
            target: target.clone(),
            method,
            distance_kind,
            policy,
            weights,
            pool,
            merge: proxy
                .manifest
                .provenance
                .get("merge")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
            output: OutputFiles {
                checkpoint: None,
                checkpoint_sha256: sha256_hex(&encode(proxy.tensors())),
                manifest: None,
                manifest_sha256: sha256_hex(&manifest_bytes(&proxy.manifest)),
            },
            tool_version: TOOL_VERSION.to_string(),
            timestamp: None,
        }
    }

    /// Record where the proxy was written. Digests come from the write itself.
    pub fn with_written(mut self, written: &Written) -> Self {
        self.output = OutputFiles {
            checkpoint: Some(written.checkpoint.display().to_string()),
            checkpoint_sha256: written.checkpoint_sha256.clone(),
            manifest: Some(written.manifest.display().to_string()),
            manifest_sha256: written.manifest_sha256.clone(),
        };
        self
    }

    pub fn with_timestamp(mut self, timestamp: String) -> Self {
        self.timestamp = Some(timestamp);
        self
    }
}

/// Current UTC time, or `SOURCE_DATE_EPOCH` when set.
pub fn utc_timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}
