//! Proxy construction over a loaded pool.

use std::collections::BTreeSet;

use tipa_core::harness::ntbg_partner;
use tipa_core::{
    additive_combination, aggregate, closest_adapter, copy_adapter, proxy_weights, uniform_average,
    AdapterCheckpoint, CheckpointSchema, Contribution, DistanceKind, DistanceSource, FeatureCategory,
    LanguageId, MergeMethod, MergeOptions, NtbgMode, PruningPolicy,
};

use crate::error::{Error, Result};
use crate::pool::Pool;
use crate::report::ProxyReport;

#[derive(Debug, Clone, Copy)]
pub struct BuildRequest<'a> {
    pub target: &'a LanguageId,
    pub method: MergeMethod,
    /// Required by every method except `uniform`.
    pub distances: Option<DistanceSource<'a>>,
    pub category: FeatureCategory,
    pub policy: PruningPolicy,
    pub lambda: f64,
    pub ntbg_mode: NtbgMode,
    pub english: &'a LanguageId,
}

/// Expand glob patterns against tensor names. A pattern matching nothing is an error.
pub fn resolve_skip(patterns: &[String], schema: &CheckpointSchema) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for raw in patterns {
        let pattern = glob::Pattern::new(raw)
            .map_err(|e| Error::Usage(format!("--skip-tensors `{raw}`: {e}")))?;
        let mut matched = false;
        for name in schema.entries.keys() {
            if pattern.matches(name) {
                matched = true;
                out.insert(name.clone());
            }
        }
        if !matched {
            return Err(tipa_core::Error::SchemaMismatch {
                tensor: raw.clone(),
                detail: "pattern matches no tensor in the pool".to_string(),
            }
            .into());
        }
    }
    Ok(out)
}

/// Build a proxy for `req.target` from every other pool member.
///
/// The target's own adapter, if present, never contributes.
pub fn build_proxy(
    pool: &Pool,
    req: &BuildRequest<'_>,
    options: &MergeOptions,
) -> Result<(AdapterCheckpoint, ProxyReport)> {
    let sources: Vec<(&LanguageId, &AdapterCheckpoint)> =
        pool.checkpoints.iter().filter(|(l, _)| *l != req.target).collect();
    if sources.is_empty() {
        return Err(tipa_core::Error::EmptyPool.into());
    }
    let ids: Vec<LanguageId> = sources.iter().map(|(l, _)| (*l).clone()).collect();
    let need_distances = || {
        req.distances.ok_or_else(|| {
            Error::Usage(format!("method `{}` needs --typology or --matrix", req.method))
        })
    };

    let mut kind = None;
    let mut weights = None;
    let mut policy = PruningPolicy::None;
    let proxy = match req.method {
        MergeMethod::Tipa => {
            let source = need_distances()?;
            let w = proxy_weights(req.target, &ids, &source, req.category, req.policy)?;
            let contributions: Vec<Contribution<'_>> = sources
                .iter()
                .filter_map(|(l, c)| w.get(l).map(|weight| Contribution { language: l, checkpoint: c, weight }))
                .collect();
            let proxy = aggregate(req.target, &contributions, options)?;
            kind = Some(w.kind);
            policy = req.policy;
            weights = Some(w);
            proxy
        }
        MergeMethod::Uniform => uniform_average(req.target, &sources, options)?,
        MergeMethod::Closest => {
            let source = need_distances()?;
            let dv = source.distance_vector(req.target, &ids, req.category)?;
            kind = Some(dv.kind);
            let nearest = closest_adapter(&dv)?;
            copy_adapter(req.target, (&nearest, &pool.checkpoints[&nearest]))?
        }
        MergeMethod::Ntbg => {
            let source = need_distances()?;
            let english = req.english;
            if english == req.target || !pool.contains(english) {
                return Err(tipa_core::Error::MethodUnavailable(
                    "ntbg",
                    format!("English adapter `{english}` not among the sources"),
                )
                .into());
            }
            let members: BTreeSet<&LanguageId> = ids.iter().collect();
            let nearest = ntbg_partner(&source, req.target, &members, english, req.category)?;
            kind = Some(distance_kind(&source, req.category));
            additive_combination(
                req.target,
                (english, &pool.checkpoints[english]),
                (&nearest, &pool.checkpoints[&nearest]),
                req.lambda,
                req.ntbg_mode,
                options,
            )?
        }
    };
    let report = ProxyReport::new(req.method, kind, policy, weights, ids, &proxy, req.target);
    Ok((proxy, report))
}

fn distance_kind(source: &DistanceSource<'_>, category: FeatureCategory) -> DistanceKind {
    match source {
        DistanceSource::Typology { .. } => DistanceKind::Category(category),
        DistanceSource::Matrix(_) => DistanceKind::Precomputed,
    }
}
