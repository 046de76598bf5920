//! Multi-seed method comparison on synthetic worlds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tipa_core::harness::{compare_methods, generate_world, ComparisonSettings, SyntheticWorld, WorldConfig};
use tipa_core::{DistanceKind, LanguageId, MergeMethod, PruningPolicy};

use crate::container::write_checkpoint;
use crate::error::{Error, Result};
use crate::pool::CHECKPOINT_FILE;
use crate::report::ProxyReport;
use crate::typology_io::write_typology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub seed: u64,
    pub target: LanguageId,
    pub method: MergeMethod,
    pub param_l2: f64,
    pub functional_mse: f64,
    pub best_convex_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<Row>,
    /// One per row, same order. Timestamps are left out so reruns match byte for byte.
    pub reports: Vec<ProxyReport>,
}

impl ComparisonReport {
    /// Median `param_l2` per method across seeds.
    pub fn median_param_l2(&self) -> BTreeMap<MergeMethod, f64> {
        let mut by_method: BTreeMap<MergeMethod, Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            by_method.entry(r.method).or_default().push(r.param_l2);
        }
        by_method.into_iter().map(|(m, v)| (m, median(v))).collect()
    }

    /// Median of the best convex fit, one value per seed.
    pub fn median_best_convex(&self) -> f64 {
        let mut per_seed = BTreeMap::new();
        for r in &self.rows {
            per_seed.insert(r.seed, r.best_convex_l2);
        }
        median(per_seed.into_values().collect())
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Generate one world per seed, hold out `target`, and score every method.
///
/// `on_world` sees each world before scoring (used for dumping).
pub fn run_comparison(
    base: &WorldConfig,
    seeds: &[u64],
    target: &LanguageId,
    settings: &ComparisonSettings,
    mut on_world: impl FnMut(&SyntheticWorld) -> Result<()>,
) -> Result<ComparisonReport> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &seed in seeds {
        let cfg = WorldConfig { seed, ..base.clone() };
        let world = generate_world(&cfg)?;
        if !world.oracles.contains_key(target) {
            return Err(tipa_core::Error::UnknownLanguage(target.clone()).into());
        }
        on_world(&world)?;
        let pool: Vec<LanguageId> = world.oracles.keys().filter(|l| *l != target).cloned().collect();
        let outcome = compare_methods(&world, target, &pool, settings)?;
        for m in &outcome.outcomes {
            rows.push(Row {
                seed,
                target: target.clone(),
                method: m.method,
                param_l2: m.score.param_l2,
                functional_mse: m.score.functional_mse,
                best_convex_l2: outcome.best_convex.param_l2,
            });
            let (kind, policy) = match m.method {
                MergeMethod::Uniform => (None, PruningPolicy::None),
                MergeMethod::Tipa => (Some(DistanceKind::Category(settings.category)), settings.policy),
                _ => (Some(DistanceKind::Category(settings.category)), PruningPolicy::None),
            };
            reports.push(ProxyReport::new(
                m.method,
                kind,
                policy,
                m.weights.clone(),
                outcome.pool.clone(),
                &m.proxy,
                target,
            ));
        }
    }
    Ok(ComparisonReport { rows, reports })
}

pub fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Usage(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_table(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6}  {:<8}  {:<8}  {:>12}  {:>14}  {:>14}",
        "seed", "target", "method", "param_l2", "functional_mse", "best_convex_l2"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>6}  {:<8}  {:<8}  {:>12.6}  {:>14.6}  {:>14.6}",
            r.seed, r.target, r.method, r.param_l2, r.functional_mse, r.best_convex_l2
        );
    }
    let _ = writeln!(out, "\nmedian param_l2");
    for (m, v) in report.median_param_l2() {
        let _ = writeln!(out, "  {:<12}{v:.6}", m.name());
    }
    let _ = writeln!(out, "  {:<12}{:.6}", "best_convex", report.median_best_convex());
    out
}

/// Write `dir/seed-N/{typology.csv, pool/<lang>/adapter.bin, oracle/<target>/adapter.bin}`.
pub fn dump_world(world: &SyntheticWorld, target: &LanguageId, dir: &Path) -> Result<()> {
    let root = dir.join(format!("seed-{}", world.config.seed));
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(&root)?;
    write_typology(&world.typology, &root.join("typology.csv"))?;
    for (lang, ckpt) in &world.oracles {
        let sub = if lang == target { "oracle" } else { "pool" };
        let d = root.join(sub).join(lang.as_str());
        mkdir(&d)?;
        write_checkpoint(ckpt, &d.join(CHECKPOINT_FILE))?;
    }
    Ok(())
}

/// `"4"`, `"1,5,9"` or an inclusive range `"1..20"`.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let bad = || Error::Usage(format!("invalid seed list `{list}`"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    if let Some((a, b)) = list.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds = list.split(',').map(num).collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    if seeds.iter().any(|s| !seen.insert(*s)) {
        return Err(Error::Usage(format!("seed list `{list}` repeats a seed")));
    }
    Ok(seeds)
}
