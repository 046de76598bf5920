//! Typological feature tables and language-to-language distances.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::LanguageId;

/// Off-diagonal entries of a precomputed matrix may disagree by at most this much.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    /// Union of every other category.
    Featural,
    Morphological,
    Syntactic,
    Phonological,
    Inventory,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 5] = [
        FeatureCategory::Featural,
        FeatureCategory::Morphological,
        FeatureCategory::Syntactic,
        FeatureCategory::Phonological,
        FeatureCategory::Inventory,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureCategory::Featural => "featural",
            FeatureCategory::Morphological => "morphological",
            FeatureCategory::Syntactic => "syntactic",
            FeatureCategory::Phonological => "phonological",
            FeatureCategory::Inventory => "inventory",
        }
    }

    /// Whether a feature tagged `feature` belongs to this selection.
    pub fn selects(self, feature: FeatureCategory) -> bool {
        self == FeatureCategory::Featural || self == feature
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureCategory::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::InvalidTable(alloc::format!("unknown category tag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub category: FeatureCategory,
}

/// Per-language feature vectors aligned to a shared, category-tagged feature list.
///
/// Missing values are `None`. Present values lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypologyTable {
    features: Vec<Feature>,
    vectors: BTreeMap<LanguageId, Vec<Option<f64>>>,
}

impl TypologyTable {
    pub fn new(
        features: Vec<Feature>,
        vectors: BTreeMap<LanguageId, Vec<Option<f64>>>,
    ) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut names = BTreeSet::new();
        for feature in &features {
            if feature.category == FeatureCategory::Featural {
                return Err(Error::InvalidTable(alloc::format!(
                    "feature `{}` tagged featural; featural is the union, not a tag",
                    feature.name
                )));
            }
            if !names.insert(feature.name.as_str()) {
                return Err(Error::InvalidTable(alloc::format!(
                    "duplicate feature `{}`",
                    feature.name
                )));
            }
        }
        for (lang, vector) in &vectors {
            if vector.len() != features.len() {
                return Err(Error::InvalidTable(alloc::format!(
                    "`{lang}` has {} values for {} features",
                    vector.len(),
                    features.len()
                )));
            }
            if let Some(bad) = vector.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidTable(alloc::format!(
                    "`{lang}` has value {bad} outside [0, 1]"
                )));
            }
        }
        Ok(TypologyTable { features, vectors })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn vectors(&self) -> &BTreeMap<LanguageId, Vec<Option<f64>>> {
        &self.vectors
    }

    pub fn vector(&self, lang: &LanguageId) -> Option<&[Option<f64>]> {
        self.vectors.get(lang).map(Vec::as_slice)
    }

    pub fn contains(&self, lang: &LanguageId) -> bool {
        self.vectors.contains_key(lang)
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.vectors.keys()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Restrict `table` to the features of `category`.
///
/// Languages with no present value among the retained features are dropped.
pub fn feature_subset(table: &TypologyTable, category: FeatureCategory) -> Result<TypologyTable> {
    if category == FeatureCategory::Featural {
        return Ok(table.clone());
    }
    let keep: Vec<usize> = table
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| category.selects(f.category))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyCategory(category));
    }
    let features = keep.iter().map(|&i| table.features[i].clone()).collect();
    let vectors: BTreeMap<_, _> = table
        .vectors
        .iter()
        .filter_map(|(lang, v)| {
            let restricted: Vec<Option<f64>> = keep.iter().map(|&i| v[i]).collect();
            restricted
                .iter()
                .any(Option::is_some)
                .then(|| (lang.clone(), restricted))
        })
        .collect();
    if vectors.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(TypologyTable { features, vectors })
}

/// Cosine distance over jointly present features, requiring at least one shared feature.
pub fn distance(table: &TypologyTable, a: &LanguageId, b: &LanguageId) -> Result<f64> {
    distance_with_overlap(table, a, b, 1)
}

/// `1 - cos(a, b)` over the coordinates present in both vectors.
///
/// Exactly symmetric, exactly zero on identical shared sub-vectors and
/// clamped to `[0, 1]` (inputs are non-negative).
pub fn distance_with_overlap(
    table: &TypologyTable,
    a: &LanguageId,
    b: &LanguageId,
    min_shared: usize,
) -> Result<f64> {
    let va = table
        .vector(a)
        .ok_or_else(|| Error::UnknownLanguage(a.clone()))?;
    let vb = table
        .vector(b)
        .ok_or_else(|| Error::UnknownLanguage(b.clone()))?;

    let mut shared = 0usize;
    let mut identical = true;
    let (mut dot, mut norm_a, mut norm_b) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in va.iter().zip(vb) {
        if let (Some(x), Some(y)) = (x, y) {
            shared += 1;
            identical &= x == y;
            dot += x * y;
            norm_a += x * x;
            norm_b += y * y;
        }
    }
    let required = min_shared.max(1);
    if shared < required {
        return Err(Error::InsufficientOverlap {
            a: a.clone(),
            b: b.clone(),
            shared,
            required,
        });
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::ZeroVector {
            a: a.clone(),
            b: b.clone(),
        });
    }
    if identical {
        return Ok(0.0);
    }
    // product under one sqrt keeps the expression symmetric in (a, b)
    let cosine = dot / libm::sqrt(norm_a * norm_b);
    Ok((1.0 - cosine).clamp(0.0, 1.0))
}

/// Where distances come from: a dense precomputed matrix, or a feature table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    Category(FeatureCategory),
    Precomputed,
}

impl DistanceKind {
    pub fn tag(self) -> &'static str {
        match self {
            DistanceKind::Category(c) => c.tag(),
            DistanceKind::Precomputed => "precomputed",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "precomputed" {
            Ok(DistanceKind::Precomputed)
        } else {
            s.parse().map(DistanceKind::Category)
        }
    }
}

impl Serialize for DistanceKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for DistanceKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub raw: f64,
    pub normalized: f64,
}

impl DistanceEntry {
    /// `1 - normalized`, the score pruning thresholds compare against.
    pub fn similarity(&self) -> f64 {
        1.0 - self.normalized
    }
}

/// Distances from one target to every source in a pool, keyed lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceVector {
    pub target: LanguageId,
    pub kind: DistanceKind,
    entries: BTreeMap<LanguageId, DistanceEntry>,
}

impl DistanceVector {
    /// Build from raw distances, min-max rescaling them over the pool.
    ///
    /// When every raw value is equal all normalized values are 0.
    pub fn from_raw(
        target: LanguageId,
        kind: DistanceKind,
        raw: BTreeMap<LanguageId, f64>,
    ) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyPool);
        }
        if let Some((lang, d)) = raw.iter().find(|(_, d)| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidMatrix(alloc::format!(
                "distance to `{lang}` is {d}"
            )));
        }
        let min = raw.values().copied().fold(f64::INFINITY, f64::min);
        let max = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let entries = raw
            .into_iter()
            .map(|(lang, raw)| {
                let normalized = if span > 0.0 {
                    ((raw - min) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (lang, DistanceEntry { raw, normalized })
            })
            .collect();
        DistanceVector::from_entries(target, kind, entries)
    }

    /// Build from already-normalized entries (no rescaling).
    pub fn from_entries(
        target: LanguageId,
        kind: DistanceKind,
        entries: BTreeMap<LanguageId, DistanceEntry>,
    ) -> Result<Self> {
        if entries.contains_key(&target) {
            return Err(Error::InvalidMatrix(alloc::format!(
                "target `{target}` listed among its own sources"
            )));
        }
        if let Some((lang, _)) = entries
            .iter()
            .find(|(_, e)| !e.raw.is_finite() || !e.normalized.is_finite())
        {
            return Err(Error::InvalidMatrix(alloc::format!(
                "non-finite distance to `{lang}`"
            )));
        }
        Ok(DistanceVector {
            target,
            kind,
            entries,
        })
    }

    pub fn entries(&self) -> &BTreeMap<LanguageId, DistanceEntry> {
        &self.entries
    }

    pub fn get(&self, lang: &LanguageId) -> Option<&DistanceEntry> {
        self.entries.get(lang)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.entries.keys()
    }

    /// Keep only entries for which `keep` holds. Normalized values are left as they are.
    pub fn retain(&self, mut keep: impl FnMut(&LanguageId, &DistanceEntry) -> bool) -> Self {
        DistanceVector {
            target: self.target.clone(),
            kind: self.kind,
            entries: self
                .entries
                .iter()
                .filter(|(l, e)| keep(l, e))
                .map(|(l, e)| (l.clone(), *e))
                .collect(),
        }
    }
}

/// Symmetric language-by-language distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    index: BTreeMap<LanguageId, usize>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validate and store a square matrix given in `ids` order.
    ///
    /// Off-diagonal pairs within [`SYMMETRY_TOLERANCE`] are replaced by their mean.
    pub fn from_rows(ids: Vec<LanguageId>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("no languages".to_string()));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(alloc::format!(
                "expected a {n}x{n} matrix"
            )));
        }
        let mut index = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidMatrix(alloc::format!(
                    "language `{id}` listed twice"
                )));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidMatrix(alloc::format!(
                    "row `{}` has value {v} outside [0, 1]",
                    ids[i]
                )));
            }
            if row[i] != 0.0 {
                return Err(Error::NonzeroDiagonal(ids[i].clone(), row[i]));
            }
        }
        let mut values = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (ab, ba) = (rows[i][j], rows[j][i]);
                if (ab - ba).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::AsymmetryTooLarge {
                        a: ids[i].clone(),
                        b: ids[j].clone(),
                        ab,
                        ba,
                    });
                }
                let mean = if ab == ba { ab } else { (ab + ba) / 2.0 };
                values[i * n + j] = mean;
                values[j * n + i] = mean;
            }
        }
        Ok(DistanceMatrix { index, values })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, lang: &LanguageId) -> bool {
        self.index.contains_key(lang)
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.index.keys()
    }

    pub fn get(&self, a: &LanguageId, b: &LanguageId) -> Option<f64> {
        let i = *self.index.get(a)?;
        let j = *self.index.get(b)?;
        Some(self.values[i * self.len() + j])
    }
}

/// Distance data backing a merge.
#[derive(Debug, Clone, Copy)]
pub enum DistanceSource<'a> {
    Typology {
        table: &'a TypologyTable,
        min_shared: usize,
    },
    Matrix(&'a DistanceMatrix),
}

impl<'a> DistanceSource<'a> {
    pub fn typology(table: &'a TypologyTable) -> Self {
        DistanceSource::Typology {
            table,
            min_shared: 1,
        }
    }

    pub fn languages(&self) -> BTreeSet<LanguageId> {
        match self {
            DistanceSource::Typology { table, .. } => table.languages().cloned().collect(),
            DistanceSource::Matrix(m) => m.languages().cloned().collect(),
        }
    }

    /// Distances from `target` to each pool member (target itself excluded).
    ///
    /// `category` is ignored for precomputed matrices.
    pub fn distance_vector<'p>(
        &self,
        target: &LanguageId,
        pool: impl IntoIterator<Item = &'p LanguageId>,
        category: FeatureCategory,
    ) -> Result<DistanceVector> {
        let pool: BTreeSet<&LanguageId> = pool.into_iter().filter(|l| *l != target).collect();
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let mut raw = BTreeMap::new();
        let kind = match *self {
            DistanceSource::Typology { table, min_shared } => {
                let subset = feature_subset(table, category)?;
                if !subset.contains(target) {
                    return Err(Error::UnknownLanguage(target.clone()));
                }
                for src in pool {
                    let d = distance_with_overlap(&subset, target, src, min_shared)
                        .map_err(|e| e.for_source(src))?;
                    raw.insert(src.clone(), d);
                }
                DistanceKind::Category(category)
            }
            DistanceSource::Matrix(matrix) => {
                if !matrix.contains(target) {
                    return Err(Error::UnknownLanguage(target.clone()));
                }
                for src in pool {
                    let d = matrix
                        .get(target, src)
                        .ok_or_else(|| Error::UnknownLanguage(src.clone()).for_source(src))?;
                    raw.insert(src.clone(), d);
                }
                DistanceKind::Precomputed
            }
        };
        DistanceVector::from_raw(target.clone(), kind, raw)
    }
}

/// Distances from `target` to `pool` over the features of `category`.
pub fn distance_vector<'p>(
    table: &TypologyTable,
    target: &LanguageId,
    pool: impl IntoIterator<Item = &'p LanguageId>,
    category: FeatureCategory,
) -> Result<DistanceVector> {
    DistanceSource::typology(table).distance_vector(target, pool, category)
}
