//! Synthetic worlds where typology predicts adapter parameters by construction.
//!
//! Each language gets a latent point. Typological features are noisy logistic
//! projections of that point, and its oracle adapter is an affine image of
//! the same point plus Gaussian noise. Holding one language out and rebuilding
//! its adapter from the others measures how well each merge method recovers
//! parameters it never saw.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    additive_combination, aggregate, closest_adapter, copy_adapter, schema_of, uniform_average,
    AdapterCheckpoint, CheckpointSchema, Contribution, Dtype, Manifest, MergeMethod, MergeOptions,
    NtbgMode, Tensor,
};
use crate::error::{Error, Result};
use crate::lang::LanguageId;
use crate::typology::{
    distance, DistanceSource, Feature, FeatureCategory, TypologyTable,
};
use crate::weighting::{proxy_weights, PruningPolicy, SimilarityWeights};

/// Steepness of the logistic that turns latent projections into feature values.
const FEATURE_GAIN: f64 = 4.0;

const FEATURE_TAGS: [FeatureCategory; 4] = [
    FeatureCategory::Morphological,
    FeatureCategory::Syntactic,
    FeatureCategory::Phonological,
    FeatureCategory::Inventory,
];

/// Id of the English stand-in, always language 0 of a world.
pub const ENGLISH: &str = "en";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_languages: usize,
    pub latent_dim: usize,
    pub n_features: usize,
    pub tensor_schema: CheckpointSchema,
    pub feature_noise: f64,
    pub adapter_noise: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_languages: 16,
            latent_dim: 2,
            n_features: 32,
            tensor_schema: default_schema(),
            feature_noise: 0.05,
            adapter_noise: 0.5,
            seed: 0,
        }
    }
}

/// One bottleneck layer: two 8x8 projections with biases.
pub fn default_schema() -> CheckpointSchema {
    let mut entries = BTreeMap::new();
    for proj in ["down", "up"] {
        entries.insert(alloc::format!("layer0.{proj}.weight"), (alloc::vec![8, 8], Dtype::F32));
        entries.insert(alloc::format!("layer0.{proj}.bias"), (alloc::vec![8], Dtype::F32));
    }
    CheckpointSchema { entries }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_languages < 3 {
            return fail("n_languages must be >= 3");
        }
        if self.n_languages > 1000 {
            return fail("n_languages must be <= 1000");
        }
        if self.latent_dim < 1 {
            return fail("latent_dim must be >= 1");
        }
        if self.n_features < self.latent_dim {
            return fail("n_features must be >= latent_dim");
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return fail("feature_noise must be a finite value >= 0");
        }
        if !(self.adapter_noise >= 0.0 && self.adapter_noise.is_finite()) {
            return fail("adapter_noise must be a finite value >= 0");
        }
        if self.tensor_schema.entries.is_empty() {
            return fail("tensor_schema has no tensors");
        }
        if let Some((name, _)) = self
            .tensor_schema
            .entries
            .iter()
            .find(|(_, (shape, dtype))| *dtype != Dtype::F32 || shape.contains(&0))
        {
            return Err(Error::InvalidConfig(alloc::format!(
                "tensor `{name}` must be F32 with non-zero dimensions"
            )));
        }
        Ok(())
    }

    pub fn language_ids(&self) -> Vec<LanguageId> {
        (0..self.n_languages)
            .map(|i| {
                let code = if i == 0 { ENGLISH.to_string() } else { alloc::format!("l{i:02}") };
                LanguageId::new(&code).expect("generated ids are valid")
            })
            .collect()
    }
}

/// Parameters as a fixed affine function of the latent point.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineAdapterMap {
    schema: CheckpointSchema,
    /// `parameter_count x latent_dim`, row-major.
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    latent_dim: usize,
}

impl AffineAdapterMap {
    fn sample(schema: &CheckpointSchema, latent_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let n: usize = schema.entries.values().map(|(s, _)| s.iter().product::<usize>()).sum();
        let slopes = (0..n * latent_dim).map(|_| rng.sample(StandardNormal)).collect();
        let intercepts = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5).collect();
        AffineAdapterMap {
            schema: schema.clone(),
            slopes,
            intercepts,
            latent_dim,
        }
    }

    /// Noise-free parameters at `latent`.
    pub fn parameters(&self, latent: &[f64]) -> Vec<f64> {
        assert_eq!(latent.len(), self.latent_dim);
        self.intercepts
            .iter()
            .enumerate()
            .map(|(p, c)| {
                let row = &self.slopes[p * self.latent_dim..(p + 1) * self.latent_dim];
                c + row.iter().zip(latent).map(|(a, z)| a * z).sum::<f64>()
            })
            .collect()
    }

    /// Lay a flat parameter vector out as a checkpoint following the schema.
    pub fn checkpoint(&self, language: &LanguageId, params: &[f64]) -> AdapterCheckpoint {
        let mut offset = 0;
        let tensors = self
            .schema
            .entries
            .iter()
            .map(|(name, (shape, _))| {
                let n: usize = shape.iter().product();
                let data = params[offset..offset + n].iter().map(|&v| v as f32).collect();
                offset += n;
                let tensor = Tensor::new(shape.clone(), data).expect("schema-derived shape");
                (name.clone(), tensor)
            })
            .collect();
        let mut manifest = Manifest::synthesized(language.as_str());
        manifest.architecture = "synthetic-affine".to_string();
        manifest.provenance.clear();
        manifest.provenance.insert("synthetic".to_string(), serde_json::Value::Bool(true));
        AdapterCheckpoint::new(tensors, manifest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub latent: BTreeMap<LanguageId, Vec<f64>>,
    pub typology: TypologyTable,
    pub oracles: BTreeMap<LanguageId, AdapterCheckpoint>,
    pub adapter_map: AffineAdapterMap,
    /// Spearman correlation between latent and featural typological distances.
    pub spearman: f64,
}

impl SyntheticWorld {
    pub fn english(&self) -> LanguageId {
        LanguageId::new(ENGLISH).expect("valid id")
    }
}

/// Sample a world. Identical configs give bitwise-identical worlds.
pub fn generate_world(cfg: &WorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ids = cfg.language_ids();

    let latent: BTreeMap<LanguageId, Vec<f64>> = ids
        .iter()
        .map(|id| (id.clone(), (0..cfg.latent_dim).map(|_| rng.random::<f64>()).collect()))
        .collect();

    let directions: Vec<Vec<f64>> = (0..cfg.n_features)
        .map(|_| (0..cfg.latent_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let offsets: Vec<f64> = (0..cfg.n_features)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5)
        .collect();
    let features = (0..cfg.n_features)
        .map(|i| Feature {
            name: alloc::format!("f{i:03}"),
            category: FEATURE_TAGS[i % FEATURE_TAGS.len()],
        })
        .collect();
    let mut vectors = BTreeMap::new();
    for id in &ids {
        let z = &latent[id];
        let v = directions
            .iter()
            .zip(&offsets)
            .map(|(dir, b)| {
                let proj: f64 = dir.iter().zip(z).map(|(a, x)| a * (x - 0.5)).sum::<f64>() + b;
                let value = logistic(FEATURE_GAIN * proj)
                    + cfg.feature_noise * rng.sample::<f64, _>(StandardNormal);
                Some(value.clamp(0.0, 1.0))
            })
            .collect();
        vectors.insert(id.clone(), v);
    }
    let typology = TypologyTable::new(features, vectors)?;

    let adapter_map = AffineAdapterMap::sample(&cfg.tensor_schema, cfg.latent_dim, &mut rng);
    let oracles = ids
        .iter()
        .map(|id| {
            let mut params = adapter_map.parameters(&latent[id]);
            for p in &mut params {
                *p += cfg.adapter_noise * rng.sample::<f64, _>(StandardNormal);
            }
            (id.clone(), adapter_map.checkpoint(id, &params))
        })
        .collect();

    let mut latent_d = Vec::new();
    let mut typo_d = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            latent_d.push(euclidean(&latent[a], &latent[b]));
            typo_d.push(distance(&typology, a, b)?);
        }
    }
    let rho = spearman(&latent_d, &typo_d);
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "typology does not track latent geometry (spearman {rho}); lower feature_noise"
        )));
    }

    Ok(SyntheticWorld {
        config: cfg.clone(),
        latent,
        typology,
        oracles,
        adapter_map,
        spearman: rho,
    })
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Rank correlation with average ranks for ties. Zero when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / libm::sqrt(vx * vy)
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Gaussian probe inputs for every weight tensor, `probes` times over.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    inputs: Vec<BTreeMap<String, Vec<f64>>>,
}

/// How a checkpoint is read as a function of probe inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    /// `W x + b` for a tensor of rank >= 2, flattened to `[shape[0], rest]`,
    /// with the sibling `*.bias` of length `shape[0]` when present.
    Affine { weight: String, bias: Option<String>, rows: usize, cols: usize },
    /// A tensor not consumed by any affine block contributes its values as-is.
    Constant { name: String },
}

/// Split a schema into affine blocks and constant offsets, in name order.
pub fn blocks(schema: &CheckpointSchema) -> Vec<Block> {
    let mut used = BTreeSet::new();
    let mut out = Vec::new();
    for (name, (shape, _)) in &schema.entries {
        if shape.len() < 2 {
            continue;
        }
        let rows = shape[0];
        let cols = shape[1..].iter().product();
        let bias = name
            .strip_suffix(".weight")
            .map(|stem| alloc::format!("{stem}.bias"))
            .filter(|b| matches!(schema.entries.get(b), Some((s, _)) if *s == [rows]));
        used.insert(name.clone());
        if let Some(b) = &bias {
            used.insert(b.clone());
        }
        out.push(Block::Affine { weight: name.clone(), bias, rows, cols });
    }
    for name in schema.entries.keys() {
        if !used.contains(name) {
            out.push(Block::Constant { name: name.clone() });
        }
    }
    out
}

impl ProbeSet {
    pub fn generate(schema: &CheckpointSchema, probes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = blocks(schema);
        let inputs = (0..probes)
            .map(|_| {
                blocks
                    .iter()
                    .filter_map(|b| match b {
                        Block::Affine { weight, cols, .. } => Some((
                            weight.clone(),
                            (0..*cols).map(|_| rng.sample(StandardNormal)).collect(),
                        )),
                        Block::Constant { .. } => None,
                    })
                    .collect()
            })
            .collect();
        ProbeSet { inputs }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input vector fed to weight tensor `weight` on probe `probe`.
    pub fn input(&self, probe: usize, weight: &str) -> Option<&[f64]> {
        self.inputs.get(probe)?.get(weight).map(Vec::as_slice)
    }
}

/// Concatenated block outputs of `ckpt` on one probe.
pub fn apply_blocks(ckpt: &AdapterCheckpoint, blocks: &[Block], probes: &ProbeSet, probe: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for block in blocks {
        match block {
            Block::Affine { weight, bias, rows, cols } => {
                let w = ckpt.tensors()[weight].data();
                let x = probes.input(probe, weight).expect("probe generated for schema");
                for r in 0..*rows {
                    let mut y: f64 = w[r * cols..(r + 1) * cols]
                        .iter()
                        .zip(x)
                        .map(|(&a, b)| f64::from(a) * b)
                        .sum();
                    if let Some(b) = bias {
                        y += f64::from(ckpt.tensors()[b].data()[r]);
                    }
                    out.push(y);
                }
            }
            Block::Constant { name } => {
                out.extend(ckpt.tensors()[name].data().iter().map(|&v| f64::from(v)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyScore {
    /// Euclidean distance between flattened parameter vectors.
    pub param_l2: f64,
    /// Mean squared output difference over the probe inputs.
    pub functional_mse: f64,
}

/// Score `proxy` against `oracle` on `probes` seeded random inputs.
pub fn evaluate_proxy(
    proxy: &AdapterCheckpoint,
    oracle: &AdapterCheckpoint,
    probes: usize,
    seed: u64,
) -> Result<ProxyScore> {
    let schema = schema_of(oracle);
    if let Some((tensor, detail)) = schema_of(proxy).first_difference(&schema) {
        return Err(Error::SchemaMismatch { tensor, detail });
    }
    if probes == 0 {
        return Err(Error::InvalidConfig("probes must be >= 1".to_string()));
    }
    let param_l2 = param_l2(proxy, oracle);
    let probe_set = ProbeSet::generate(&schema, probes, seed);
    let blocks = blocks(&schema);
    let mut sq = 0.0;
    let mut count = 0usize;
    for p in 0..probe_set.len() {
        let a = apply_blocks(proxy, &blocks, &probe_set, p);
        let b = apply_blocks(oracle, &blocks, &probe_set, p);
        count += a.len();
        sq += a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    let functional_mse = if count == 0 { 0.0 } else { sq / count as f64 };
    Ok(ProxyScore { param_l2, functional_mse })
}

fn param_l2(a: &AdapterCheckpoint, b: &AdapterCheckpoint) -> f64 {
    let sq: f64 = a
        .tensors()
        .iter()
        .flat_map(|(name, t)| t.data().iter().zip(b.tensors()[name].data()))
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    libm::sqrt(sq)
}

fn flatten(ckpt: &AdapterCheckpoint) -> Vec<f64> {
    ckpt.tensors()
        .values()
        .flat_map(|t| t.data().iter().map(|&v| f64::from(v)))
        .collect()
}

/// Least-squares convex weights: the closest any simplex-weighted merge of
/// `sources` can get to `target` in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexFit {
    pub weights: BTreeMap<LanguageId, f64>,
    pub param_l2: f64,
}

/// Minimize `|| sum_s w_s theta_s - theta_target ||` over the probability simplex
/// by accelerated projected gradient on the Gram matrix. `warm_starts` are
/// feasible candidates; the returned fit is never worse than any of them.
pub fn best_convex_fit(
    target: &AdapterCheckpoint,
    sources: &[(&LanguageId, &AdapterCheckpoint)],
    warm_starts: &[&BTreeMap<LanguageId, f64>],
) -> Result<ConvexFit> {
    if sources.is_empty() {
        return Err(Error::EmptyPool);
    }
    let schema = schema_of(target);
    for (lang, c) in sources {
        if let Some((tensor, detail)) = schema.first_difference(&schema_of(c)) {
            return Err(Error::SchemaMismatch { tensor, detail: alloc::format!("`{lang}`: {detail}") });
        }
    }
    let t = flatten(target);
    let thetas: Vec<Vec<f64>> = sources.iter().map(|(_, c)| flatten(c)).collect();
    let n = thetas.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut gram = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(&thetas[i], &thetas[j]);
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let h: Vec<f64> = thetas.iter().map(|th| dot(th, &t)).collect();
    let objective = |w: &[f64]| {
        let combo: Vec<f64> = (0..t.len())
            .map(|k| (0..n).map(|s| w[s] * thetas[s][k]).sum::<f64>() - t[k])
            .collect();
        libm::sqrt(dot(&combo, &combo))
    };

    let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
    let step = if trace > 0.0 { 1.0 / (2.0 * trace) } else { 1.0 };
    let mut w = alloc::vec![1.0 / n as f64; n];
    let mut y = w.clone();
    let mut momentum = 1.0f64;
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| 2.0 * ((0..n).map(|j| gram[i * n + j] * y[j]).sum::<f64>() - h[i]))
            .collect();
        let next = project_simplex(&(0..n).map(|i| y[i] - step * grad[i]).collect::<Vec<_>>());
        let next_momentum = (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        y = (0..n).map(|i| next[i] + beta * (next[i] - w[i])).collect();
        w = next;
        momentum = next_momentum;
    }

    let mut best_w = w;
    let mut best = objective(&best_w);
    for start in warm_starts {
        let candidate: Vec<f64> = sources
            .iter()
            .map(|(lang, _)| start.get(*lang).copied().unwrap_or(0.0))
            .collect();
        let value = objective(&candidate);
        if value < best {
            best = value;
            best_w = candidate;
        }
    }
    Ok(ConvexFit {
        weights: sources.iter().map(|(l, _)| (*l).clone()).zip(best_w).collect(),
        param_l2: best,
    })
}

/// Euclidean projection onto `{w : w >= 0, sum w = 1}`.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Settings for building and scoring proxies in a world.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSettings {
    pub methods: BTreeSet<MergeMethod>,
    pub policy: PruningPolicy,
    pub category: FeatureCategory,
    pub lambda: f64,
    pub ntbg_mode: NtbgMode,
    pub probes: usize,
    pub probe_seed: u64,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        ComparisonSettings {
            methods: MergeMethod::ALL.into_iter().collect(),
            policy: PruningPolicy::None,
            category: FeatureCategory::Featural,
            lambda: 0.5,
            ntbg_mode: NtbgMode::Convex,
            probes: 32,
            probe_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: MergeMethod,
    pub proxy: AdapterCheckpoint,
    /// Present for `tipa` only.
    pub weights: Option<SimilarityWeights>,
    pub score: ProxyScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutcome {
    pub target: LanguageId,
    pub pool: Vec<LanguageId>,
    pub outcomes: Vec<MethodOutcome>,
    /// Diagnostic lower bound on any convex merge's parameter error.
    pub best_convex: ConvexFit,
}

/// Build every requested proxy for `target` from `pool` and score each
/// against the held-out oracle.
pub fn compare_methods(
    world: &SyntheticWorld,
    target: &LanguageId,
    pool: &[LanguageId],
    settings: &ComparisonSettings,
) -> Result<ComparisonOutcome> {
    let oracle = world
        .oracles
        .get(target)
        .ok_or_else(|| Error::UnknownLanguage(target.clone()))?;
    let pool: BTreeSet<&LanguageId> = pool.iter().collect();
    if pool.contains(target) {
        return Err(Error::InvalidConfig(alloc::format!(
            "target `{target}` must be held out of the pool"
        )));
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let members: Vec<(&LanguageId, &AdapterCheckpoint)> = pool
        .iter()
        .map(|l| {
            world
                .oracles
                .get(*l)
                .map(|c| (*l, c))
                .ok_or_else(|| Error::UnknownLanguage((*l).clone()))
        })
        .collect::<Result<_>>()?;
    let source = DistanceSource::typology(&world.typology);
    let options = MergeOptions::default();

    let mut outcomes = Vec::new();
    let mut tipa_weights = None;
    for &method in &settings.methods {
        let (proxy, weights) = match method {
            MergeMethod::Tipa => {
                let w = proxy_weights(target, pool.iter().copied(), &source, settings.category, settings.policy)?;
                let contributions: Vec<Contribution<'_>> = members
                    .iter()
                    .filter_map(|(l, c)| {
                        w.get(l).map(|weight| Contribution { language: l, checkpoint: c, weight })
                    })
                    .collect();
                (aggregate(target, &contributions, &options)?, Some(w))
            }
            MergeMethod::Uniform => (uniform_average(target, &members, &options)?, None),
            MergeMethod::Closest => {
                let dv = source.distance_vector(target, pool.iter().copied(), settings.category)?;
                let nearest = closest_adapter(&dv)?;
                (copy_adapter(target, (&nearest, &world.oracles[&nearest]))?, None)
            }
            MergeMethod::Ntbg => {
                let english = world.english();
                if !pool.contains(&english) {
                    return Err(Error::MethodUnavailable(
                        "ntbg",
                        alloc::format!("English adapter `{english}` not in pool"),
                    ));
                }
                let nearest = ntbg_partner(&source, target, &pool, &english, settings.category)?;
                let proxy = additive_combination(
                    target,
                    (&english, &world.oracles[&english]),
                    (&nearest, &world.oracles[&nearest]),
                    settings.lambda,
                    settings.ntbg_mode,
                    &options,
                )?;
                (proxy, None)
            }
        };
        let score = evaluate_proxy(&proxy, oracle, settings.probes, settings.probe_seed)?;
        if let Some(w) = &weights {
            tipa_weights = Some(w.weights.clone());
        }
        outcomes.push(MethodOutcome { method, proxy, weights, score });
    }

    let uniform: BTreeMap<LanguageId, f64> =
        pool.iter().map(|l| ((*l).clone(), 1.0 / pool.len() as f64)).collect();
    let mut starts = alloc::vec![&uniform];
    if let Some(w) = &tipa_weights {
        starts.push(w);
    }
    let best_convex = best_convex_fit(oracle, &members, &starts)?;
    Ok(ComparisonOutcome {
        target: target.clone(),
        pool: pool.into_iter().cloned().collect(),
        outcomes,
        best_convex,
    })
}

/// Closest non-English source; English itself only when it is the whole pool.
pub fn ntbg_partner(
    source: &DistanceSource<'_>,
    target: &LanguageId,
    pool: &BTreeSet<&LanguageId>,
    english: &LanguageId,
    category: FeatureCategory,
) -> Result<LanguageId> {
    let others: Vec<&LanguageId> = pool.iter().copied().filter(|l| *l != english).collect();
    if others.is_empty() {
        return Ok(english.clone());
    }
    closest_adapter(&source.distance_vector(target, others, category)?)
}
