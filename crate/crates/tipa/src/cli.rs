//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tipa_core::harness::{ComparisonSettings, WorldConfig};
use tipa_core::{
    DistanceMatrix, DistanceSource, FeatureCategory, LanguageId, MergeMethod, MergeOptions, NtbgMode,
    PruningPolicy, TypologyTable,
};

use crate::build::{build_proxy, resolve_skip, BuildRequest};
use crate::container::{write_checkpoint, ReadOptions};
use crate::error::{Error, Result};
use crate::harness::{dump_world, parse_seeds, run_comparison, to_csv, to_table};
use crate::pool::{load_pool, scan_pool};
use crate::report::utc_timestamp;
use crate::typology_io::{load_precomputed_distances, load_typology};
use crate::atomic_write;

#[derive(Debug, Parser)]
#[command(name = "tipa", version, about = "Build proxy language adapters from typologically weighted pools")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file with default flags per subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print distances and similarities from a target to a pool.
    Distances(DistancesArgs),
    /// Merge a pool of adapters into a proxy for an unseen target.
    BuildProxy(BuildArgs),
    /// Compare methods on synthetic worlds.
    Harness(HarnessArgs),
}

#[derive(Debug, Args)]
pub struct DistanceInput {
    /// Typology CSV.
    #[arg(long, value_name = "CSV", conflicts_with = "matrix")]
    pub typology: Option<PathBuf>,
    /// Precomputed symmetric distance matrix CSV.
    #[arg(long, value_name = "CSV")]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value = "featural")]
    pub category: FeatureCategory,
    /// Minimum number of jointly observed features per pair.
    #[arg(long, default_value_t = 1)]
    pub min_shared: usize,
}

enum Loaded {
    Typology(TypologyTable, usize),
    Matrix(DistanceMatrix),
}

impl Loaded {
    fn source(&self) -> DistanceSource<'_> {
        match self {
            Loaded::Typology(t, min_shared) => DistanceSource::Typology { table: t, min_shared: *min_shared },
            Loaded::Matrix(m) => DistanceSource::Matrix(m),
        }
    }
}

impl DistanceInput {
    fn load(&self) -> Result<Option<Loaded>> {
        if self.min_shared == 0 {
            return Err(Error::Usage("--min-shared must be >= 1".into()));
        }
        Ok(match (&self.typology, &self.matrix) {
            (Some(p), _) => Some(Loaded::Typology(load_typology(p)?, self.min_shared)),
            (None, Some(p)) => Some(Loaded::Matrix(load_precomputed_distances(p)?)),
            (None, None) => None,
        })
    }
}

#[derive(Debug, Args)]
pub struct Pruning {
    /// Keep the k closest sources.
    #[arg(long, value_name = "K", conflicts_with = "threshold")]
    pub top_k: Option<usize>,
    /// Keep sources with similarity strictly above TAU.
    #[arg(long, value_name = "TAU")]
    pub threshold: Option<f64>,
}

impl Pruning {
    fn policy(&self) -> Result<PruningPolicy> {
        Ok(match (self.top_k, self.threshold) {
            (Some(k), _) => PruningPolicy::top_k(k)?,
            (None, Some(t)) => PruningPolicy::threshold(t)?,
            (None, None) => PruningPolicy::None,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Convex,
    Sum,
}

impl From<Mode> for NtbgMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Convex => NtbgMode::Convex,
            Mode::Sum => NtbgMode::Sum,
        }
    }
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    #[command(flatten)]
    pub input: DistanceInput,
    #[arg(long)]
    pub target: LanguageId,
    /// Comma-separated source ids. Defaults to every other language.
    #[arg(long, value_delimiter = ',', conflicts_with = "pool_dir")]
    pub pool: Vec<LanguageId>,
    /// Take source ids from an adapter directory.
    #[arg(long, value_name = "DIR")]
    pub pool_dir: Option<PathBuf>,
    /// Emit the distance vector as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_name = "DIR")]
    pub pool_dir: PathBuf,
    #[arg(long)]
    pub target: LanguageId,
    #[command(flatten)]
    pub input: DistanceInput,
    #[command(flatten)]
    pub pruning: Pruning,
    #[arg(long, default_value = "tipa")]
    pub method: MergeMethod,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "convex")]
    pub ntbg_mode: Mode,
    #[arg(long, default_value = "en")]
    pub english: LanguageId,
    /// Glob over tensor names left out of the merge (repeatable).
    #[arg(long, value_name = "GLOB")]
    pub skip_tensors: Vec<String>,
    /// Accept f16/bf16 tensors by widening them to f32.
    #[arg(long)]
    pub cast_f32: bool,
    /// Load non-finite tensors instead of rejecting them at read time.
    #[arg(long)]
    pub allow_nonfinite: bool,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Also write the report JSON to this file.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

#[derive(Debug, Args)]
pub struct HarnessArgs {
    /// `N`, `A,B,C` or inclusive `A..B`.
    #[arg(long, default_value = "1..20")]
    pub seeds: String,
    #[arg(long, value_delimiter = ',', default_value = "tipa,uniform,closest,ntbg")]
    pub methods: Vec<MergeMethod>,
    #[arg(long, default_value = "l01")]
    pub target: LanguageId,
    #[arg(long, default_value_t = 16)]
    pub languages: usize,
    #[arg(long, default_value_t = 2)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub features: usize,
    #[arg(long, default_value_t = 0.05)]
    pub feature_noise: f64,
    #[arg(long, default_value_t = 0.5)]
    pub adapter_noise: f64,
    #[arg(long, default_value = "featural")]
    pub category: FeatureCategory,
    #[command(flatten)]
    pub pruning: Pruning,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "convex")]
    pub ntbg_mode: Mode,
    #[arg(long, default_value_t = 32)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub probe_seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write results here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write every generated world under DIR/seed-N.
    #[arg(long, value_name = "DIR")]
    pub dump_world: Option<PathBuf>,
    /// Write all proxy reports as a JSON array.
    #[arg(long, value_name = "FILE")]
    pub reports: Option<PathBuf>,
}

fn write_stdout(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Distances(a) => distances(a, out),
        Command::BuildProxy(a) => build(a, out),
        Command::Harness(a) => harness(a, out),
    }
}

fn distances(a: DistancesArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = a
        .input
        .load()?
        .ok_or_else(|| Error::Usage("one of --typology or --matrix is required".into()))?;
    let source = loaded.source();
    let pool: Vec<LanguageId> = if let Some(dir) = &a.pool_dir {
        scan_pool(dir)?.members.into_keys().collect()
    } else if !a.pool.is_empty() {
        a.pool
    } else {
        source.languages().into_iter().collect()
    };
    let dv = source.distance_vector(&a.target, &pool, a.input.category)?;
    if a.json {
        return write_stdout(out, &json(&dv));
    }
    let mut text = format!("{:<8}  {:>10}  {:>10}  {:>10}\n", "lang", "raw", "normalized", "similarity");
    for (lang, e) in dv.entries() {
        text += &format!("{lang:<8}  {:>10.6}  {:>10.6}  {:>10.6}\n", e.raw, e.normalized, e.similarity());
    }
    write_stdout(out, &text)
}

fn build(a: BuildArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = a.input.load()?;
    let policy = a.pruning.policy()?;
    let options = ReadOptions { cast_f32: a.cast_f32, allow_nonfinite: a.allow_nonfinite };
    let pool = load_pool(&a.pool_dir, options)?;
    let merge = MergeOptions { skip: resolve_skip(&a.skip_tensors, &pool.schema)? };
    let request = BuildRequest {
        target: &a.target,
        method: a.method,
        distances: loaded.as_ref().map(Loaded::source),
        category: a.input.category,
        policy,
        lambda: a.lambda,
        ntbg_mode: a.ntbg_mode.into(),
        english: &a.english,
    };
    let (proxy, report) = build_proxy(&pool, &request, &merge)?;
    let written = write_checkpoint(&proxy, &a.output)?;
    let report = report.with_written(&written).with_timestamp(utc_timestamp());
    let text = json(&report);
    if let Some(path) = &a.report {
        atomic_write(path, text.as_bytes())?;
    }
    write_stdout(out, &text)
}

fn harness(a: HarnessArgs, out: &mut dyn Write) -> Result<()> {
    let seeds = parse_seeds(&a.seeds)?;
    let base = WorldConfig {
        n_languages: a.languages,
        latent_dim: a.latent_dim,
        n_features: a.features,
        feature_noise: a.feature_noise,
        adapter_noise: a.adapter_noise,
        ..WorldConfig::default()
    };
    let settings = ComparisonSettings {
        methods: a.methods.iter().copied().collect(),
        policy: a.pruning.policy()?,
        category: a.category,
        lambda: a.lambda,
        ntbg_mode: a.ntbg_mode.into(),
        probes: a.probes,
        probe_seed: a.probe_seed,
    };
    let dump: Option<&Path> = a.dump_world.as_deref();
    let report = run_comparison(&base, &seeds, &a.target, &settings, |world| match dump {
        Some(dir) => dump_world(world, &a.target, dir),
        None => Ok(()),
    })?;
    if let Some(path) = &a.reports {
        atomic_write(path, json(&report.reports).as_bytes())?;
    }
    let text = match a.format {
        Format::Csv => to_csv(&report.rows)?,
        Format::Table => to_table(&report),
    };
    match &a.output {
        Some(path) => atomic_write(path, text.as_bytes()),
        None => write_stdout(out, &text),
    }
}
