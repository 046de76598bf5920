//! Training-free construction of proxy language adapters.
//!
//! Existing adapter checkpoints are merged parameter-by-parameter with
//! weights derived from typological similarity between the target language
//! and every source language in the pool. This crate holds the pure
//! numerical pipeline and is `no_std` (it needs `alloc`). File formats,
//! pool loading and the command line live in the `tipa` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aggregation;
pub mod error;
pub mod harness;
pub mod lang;
pub mod typology;
pub mod weighting;

pub use aggregation::{
    additive_combination, aggregate, closest_adapter, copy_adapter, schema_of, uniform_average,
    AdapterCheckpoint, CheckpointSchema, Contribution, Dtype, Manifest, MergeMethod, MergeOptions,
    NtbgMode, Tensor,
};
pub use error::{Error, Result};
pub use lang::LanguageId;
pub use typology::{
    distance, distance_vector, feature_subset, DistanceEntry, DistanceKind, DistanceMatrix,
    DistanceSource, DistanceVector, FeatureCategory, TypologyTable,
};
pub use weighting::{apply_pruning, proxy_weights, similarity_weights, PruningPolicy, SimilarityWeights};
