//! Layer-wise parameter aggregation of adapter checkpoints.
//!
//! Every merge accumulates in `f64` and rounds once to `f32`. Sources are
//! summed in lexicographic order of their language id, so the output bits
//! depend only on the inputs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::typology::DistanceVector;

/// Weights passed to [`aggregate`] must sum to 1 within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dtype {
    F32,
    F16,
    BF16,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F16 | Dtype::BF16 => 2,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "F32",
            Dtype::F16 => "F16",
            Dtype::BF16 => "BF16",
        })
    }
}

/// Dense row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidTensor(
                String::new(),
                alloc::format!("zero-sized dimension in {shape:?}"),
            ));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidTensor(
                String::new(),
                alloc::format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Sidecar metadata describing an adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub language: String,
    pub architecture: String,
    pub hidden_size: u64,
    pub reduction_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub provenance: Map<String, Value>,
}

impl Manifest {
    /// Placeholder used when a checkpoint ships without a manifest.
    pub fn synthesized(language: &str) -> Self {
        let mut provenance = Map::new();
        provenance.insert("synthesized".to_string(), Value::Bool(true));
        Manifest {
            language: language.to_string(),
            architecture: "unknown".to_string(),
            hidden_size: 0,
            reduction_factor: 0.0,
            layer_count: None,
            provenance,
        }
    }
}

/// Named tensors plus manifest. Tensor names iterate lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterCheckpoint {
    tensors: BTreeMap<String, Tensor>,
    pub manifest: Manifest,
}

impl AdapterCheckpoint {
    pub fn new(tensors: BTreeMap<String, Tensor>, manifest: Manifest) -> Self {
        AdapterCheckpoint { tensors, manifest }
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn into_parts(self) -> (BTreeMap<String, Tensor>, Manifest) {
        (self.tensors, self.manifest)
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .tensors
            .iter()
            .find(|(_, t)| t.data.iter().any(|v| !v.is_finite()))
        {
            Some((name, _)) => Err(Error::NonfiniteInput(name.clone())),
            None => Ok(()),
        }
    }
}

/// `(shape, dtype)` signature of every tensor. Equal schemas can be merged.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CheckpointSchema {
    pub entries: BTreeMap<String, (Vec<usize>, Dtype)>,
}

impl CheckpointSchema {
    /// First tensor at which `self` and `other` disagree, with a description.
    pub fn first_difference(&self, other: &CheckpointSchema) -> Option<(String, String)> {
        let names: BTreeSet<&String> = self.entries.keys().chain(other.entries.keys()).collect();
        names.into_iter().find_map(|name| {
            let detail = match (self.entries.get(name), other.entries.get(name)) {
                (Some(a), Some(b)) if a == b => return None,
                (Some((sa, da)), Some((sb, db))) => {
                    alloc::format!("{sa:?} {da} vs {sb:?} {db}")
                }
                (Some(_), None) => "missing from the second checkpoint".to_string(),
                (None, Some(_)) => "missing from the first checkpoint".to_string(),
                (None, None) => unreachable!(),
            };
            Some((name.clone(), detail))
        })
    }
}

pub fn schema_of(ckpt: &AdapterCheckpoint) -> CheckpointSchema {
    CheckpointSchema {
        entries: ckpt
            .tensors
            .iter()
            .map(|(name, t)| (name.clone(), (t.shape.clone(), Dtype::F32)))
            .collect(),
    }
}

/// One weighted source of a merge.
#[derive(Debug, Clone, Copy)]
pub struct Contribution<'a> {
    pub language: &'a LanguageId,
    pub checkpoint: &'a AdapterCheckpoint,
    pub weight: f64,
}

/// Knobs shared by every merge operator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeOptions {
    /// Tensors left out of the merge. They are copied verbatim from the
    /// base source: the highest-weighted one (ties to the lexicographically
    /// first), or the English adapter for additive combination.
    pub skip: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NtbgMode {
    /// `(1 - lambda) * english + lambda * closest`
    #[default]
    Convex,
    /// `english + lambda * closest`
    Sum,
}

impl fmt::Display for NtbgMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NtbgMode::Convex => "convex",
            NtbgMode::Sum => "sum",
        })
    }
}

/// Which construction produced a proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMethod {
    /// Typology-weighted aggregation.
    Tipa,
    Uniform,
    /// Copy of the typologically closest adapter.
    Closest,
    /// English adapter combined with the closest adapter.
    Ntbg,
}

impl MergeMethod {
    pub const ALL: [MergeMethod; 4] = [
        MergeMethod::Tipa,
        MergeMethod::Uniform,
        MergeMethod::Closest,
        MergeMethod::Ntbg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MergeMethod::Tipa => "tipa",
            MergeMethod::Uniform => "uniform",
            MergeMethod::Closest => "closest",
            MergeMethod::Ntbg => "ntbg",
        }
    }
}

impl fmt::Display for MergeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for MergeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MergeMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

fn validate_pool<'a>(pool: &[Contribution<'a>]) -> Result<Vec<Contribution<'a>>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut sorted = pool.to_vec();
    sorted.sort_by(|a, b| a.language.cmp(b.language));
    for pair in sorted.windows(2) {
        if pair[0].language == pair[1].language {
            return Err(Error::DuplicateLanguage(pair[0].language.clone()));
        }
    }
    let reference = schema_of(sorted[0].checkpoint);
    for c in &sorted {
        c.checkpoint
            .check_finite()
            .map_err(|e| e.for_source(c.language))?;
        if let Some((tensor, detail)) = reference.first_difference(&schema_of(c.checkpoint)) {
            return Err(Error::SchemaMismatch {
                tensor,
                detail: alloc::format!("`{}` vs `{}`: {detail}", sorted[0].language, c.language),
            });
        }
    }
    Ok(sorted)
}

fn check_skip(skip: &BTreeSet<String>, schema: &CheckpointSchema) -> Result<()> {
    match skip.iter().find(|name| !schema.entries.contains_key(*name)) {
        Some(name) => Err(Error::SchemaMismatch {
            tensor: name.clone(),
            detail: "skipped tensor not present in the pool".to_string(),
        }),
        None => Ok(()),
    }
}

/// `sum_s weight_s * checkpoint_s`, tensor by tensor.
///
/// Sources are summed in lexicographic language order with `f64`
/// accumulators. The manifest of the heaviest source supplies the
/// architecture fields; `language` is set to `target`.
pub fn aggregate(
    target: &LanguageId,
    pool: &[Contribution<'_>],
    options: &MergeOptions,
) -> Result<AdapterCheckpoint> {
    let sorted = validate_pool(pool)?;
    if let Some(c) = sorted.iter().find(|c| !(c.weight.is_finite() && c.weight > 0.0)) {
        return Err(Error::WeightSumInvalid(c.weight));
    }
    let total: f64 = sorted.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightSumInvalid(total));
    }
    let base = sorted
        .iter()
        .max_by(|a, b| a.weight.total_cmp(&b.weight).then_with(|| b.language.cmp(a.language)))
        .expect("pool is non-empty");
    check_skip(&options.skip, &schema_of(base.checkpoint))?;

    let mut tensors = BTreeMap::new();
    for (name, template) in base.checkpoint.tensors() {
        if options.skip.contains(name) {
            tensors.insert(name.clone(), template.clone());
            continue;
        }
        // -0.0 is the additive identity; starting from +0.0 would flip signed zeros.
        let mut acc = alloc::vec![-0.0f64; template.len()];
        for c in &sorted {
            let src = &c.checkpoint.tensors[name].data;
            for (a, &x) in acc.iter_mut().zip(src) {
                *a += c.weight * f64::from(x);
            }
        }
        tensors.insert(name.clone(), finish(name, template, &acc)?);
    }

    let sources: Map<String, Value> = sorted
        .iter()
        .map(|c| (c.language.to_string(), json!(c.weight)))
        .collect();
    let mut record = Map::new();
    record.insert("method".to_string(), json!("tipa"));
    record.insert("sources".to_string(), Value::Object(sources));
    let manifest = merged_manifest(&base.checkpoint.manifest, target, record, options, base.language);
    Ok(AdapterCheckpoint::new(tensors, manifest))
}

/// Equal-weight mean over the pool.
pub fn uniform_average(
    target: &LanguageId,
    pool: &[(&LanguageId, &AdapterCheckpoint)],
    options: &MergeOptions,
) -> Result<AdapterCheckpoint> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let weight = 1.0 / pool.len() as f64;
    let contributions: Vec<Contribution<'_>> = pool
        .iter()
        .map(|(language, checkpoint)| Contribution {
            language,
            checkpoint,
            weight,
        })
        .collect();
    let mut merged = aggregate(target, &contributions, options)?;
    if let Some(Value::Object(record)) = merged.manifest.provenance.get_mut("merge") {
        record.insert("method".to_string(), json!("uniform"));
    }
    Ok(merged)
}

/// Source with the smallest normalized distance, ties to the lexicographically first.
pub fn closest_adapter(dv: &DistanceVector) -> Result<LanguageId> {
    dv.entries()
        .iter()
        .fold(None::<(&LanguageId, f64)>, |best, (lang, e)| match best {
            Some((_, d)) if d <= e.normalized => best,
            _ => Some((lang, e.normalized)),
        })
        .map(|(lang, _)| lang.clone())
        .ok_or(Error::EmptyPool)
}

/// The adapter of `source`, relabelled as a proxy for `target`.
pub fn copy_adapter(
    target: &LanguageId,
    source: (&LanguageId, &AdapterCheckpoint),
) -> Result<AdapterCheckpoint> {
    let (lang, ckpt) = source;
    ckpt.check_finite().map_err(|e| e.for_source(lang))?;
    let mut record = Map::new();
    record.insert("method".to_string(), json!("closest"));
    record.insert("source".to_string(), json!(lang.as_str()));
    let manifest = merged_manifest(&ckpt.manifest, target, record, &MergeOptions::default(), lang);
    Ok(AdapterCheckpoint::new(ckpt.tensors.clone(), manifest))
}

/// Combine the English adapter with one other adapter.
///
/// `Convex` requires `lambda` in `[0, 1]`; `Sum` accepts any finite `lambda`.
pub fn additive_combination(
    target: &LanguageId,
    english: (&LanguageId, &AdapterCheckpoint),
    closest: (&LanguageId, &AdapterCheckpoint),
    lambda: f64,
    mode: NtbgMode,
    options: &MergeOptions,
) -> Result<AdapterCheckpoint> {
    if !lambda.is_finite() || (mode == NtbgMode::Convex && !(0.0..=1.0).contains(&lambda)) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    let (en_lang, en) = english;
    let (near_lang, near) = closest;
    en.check_finite().map_err(|e| e.for_source(en_lang))?;
    near.check_finite().map_err(|e| e.for_source(near_lang))?;
    let schema = schema_of(en);
    if let Some((tensor, detail)) = schema.first_difference(&schema_of(near)) {
        return Err(Error::SchemaMismatch {
            tensor,
            detail: alloc::format!("`{en_lang}` vs `{near_lang}`: {detail}"),
        });
    }
    check_skip(&options.skip, &schema)?;

    let (en_coef, near_coef) = match mode {
        NtbgMode::Convex => (1.0 - lambda, lambda),
        NtbgMode::Sum => (1.0, lambda),
    };
    let mut tensors = BTreeMap::new();
    for (name, a) in en.tensors() {
        if options.skip.contains(name) {
            tensors.insert(name.clone(), a.clone());
            continue;
        }
        let b = &near.tensors[name];
        let acc: Vec<f64> = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| en_coef * f64::from(x) + near_coef * f64::from(y))
            .collect();
        tensors.insert(name.clone(), finish(name, a, &acc)?);
    }

    let mut record = Map::new();
    record.insert("method".to_string(), json!("ntbg"));
    record.insert("mode".to_string(), json!(mode.to_string()));
    record.insert("lambda".to_string(), json!(lambda));
    record.insert("english".to_string(), json!(en_lang.as_str()));
    record.insert("closest".to_string(), json!(near_lang.as_str()));
    let manifest = merged_manifest(&en.manifest, target, record, options, en_lang);
    Ok(AdapterCheckpoint::new(tensors, manifest))
}

fn finish(name: &str, template: &Tensor, acc: &[f64]) -> Result<Tensor> {
    let data: Vec<f32> = acc.iter().map(|&v| v as f32).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonfiniteInput(alloc::format!("{name} (merged result)")));
    }
    Ok(Tensor {
        shape: template.shape.clone(),
        data,
    })
}

fn merged_manifest(
    base: &Manifest,
    target: &LanguageId,
    mut record: Map<String, Value>,
    options: &MergeOptions,
    base_language: &LanguageId,
) -> Manifest {
    if !options.skip.is_empty() {
        record.insert("skipped_tensors".to_string(), json!(options.skip));
        record.insert("skipped_from".to_string(), json!(base_language.as_str()));
    }
    let mut provenance = Map::new();
    provenance.insert("merge".to_string(), Value::Object(record));
    Manifest {
        language: target.to_string(),
        architecture: base.architecture.clone(),
        hidden_size: base.hidden_size,
        reduction_factor: base.reduction_factor,
        layer_count: base.layer_count,
        provenance,
    }
}
