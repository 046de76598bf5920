//! Adapter pools laid out as `root/<lang>/adapter.bin` or `root/<lang>.bin`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use tipa_core::{schema_of, AdapterCheckpoint, CheckpointSchema, LanguageId};

use crate::container::{manifest_path, read_checkpoint, ReadOptions};
use crate::error::{Error, Result};

pub const CHECKPOINT_FILE: &str = "adapter.bin";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolMember {
    pub checkpoint: PathBuf,
    /// Sidecar manifest, when one exists on disk.
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolDescriptor {
    pub root: PathBuf,
    pub members: BTreeMap<LanguageId, PoolMember>,
}

/// A loaded, schema-consistent set of adapters.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub descriptor: PoolDescriptor,
    pub checkpoints: BTreeMap<LanguageId, AdapterCheckpoint>,
    pub schema: CheckpointSchema,
}

impl Pool {
    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.checkpoints.keys()
    }

    pub fn contains(&self, lang: &LanguageId) -> bool {
        self.checkpoints.contains_key(lang)
    }

    /// The English adapter id, if `english` is present in the pool.
    pub fn english<'a>(&self, english: &'a LanguageId) -> Option<&'a LanguageId> {
        self.contains(english).then_some(english)
    }
}

/// Find pool members under `root` without loading them.
pub fn scan_pool(root: &Path) -> Result<PoolDescriptor> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut members: BTreeMap<LanguageId, PoolMember> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        let (name, checkpoint) = if path.is_dir() {
            let ckpt = path.join(CHECKPOINT_FILE);
            if !ckpt.is_file() {
                continue;
            }
            (entry.file_name(), ckpt)
        } else if path.extension().is_some_and(|e| e == "bin") {
            let Some(stem) = path.file_stem() else { continue };
            (stem.to_os_string(), path.clone())
        } else {
            continue;
        };
        let name = name.to_string_lossy();
        let language = LanguageId::new(&name)
            .map_err(|e| Error::malformed(&checkpoint, format!("pool member name: {e}")))?;
        let sidecar = manifest_path(&checkpoint);
        let member = PoolMember {
            manifest: sidecar.is_file().then_some(sidecar),
            checkpoint,
        };
        if let Some(prev) = members.get(&language) {
            let (first, second) = if prev.checkpoint <= member.checkpoint {
                (prev.checkpoint.clone(), member.checkpoint)
            } else {
                (member.checkpoint, prev.checkpoint.clone())
            };
            return Err(Error::DuplicateLanguage { language, first, second });
        }
        members.insert(language, member);
    }
    if members.is_empty() {
        return Err(tipa_core::Error::EmptyPool.into());
    }
    Ok(PoolDescriptor {
        root: root.to_path_buf(),
        members,
    })
}

/// Load every member and check that all share one schema.
pub fn load_pool(root: &Path, options: ReadOptions) -> Result<Pool> {
    let descriptor = scan_pool(root)?;
    let mut checkpoints = BTreeMap::new();
    for (lang, member) in &descriptor.members {
        let mut ckpt = read_checkpoint(&member.checkpoint, options)?;
        match &member.manifest {
            None => ckpt.manifest.language = lang.to_string(),
            Some(path) if ckpt.manifest.language != lang.as_str() => {
                return Err(Error::malformed(
                    path,
                    format!("manifest language `{}` differs from pool id `{lang}`", ckpt.manifest.language),
                ));
            }
            Some(_) => {}
        }
        checkpoints.insert(lang.clone(), ckpt);
    }
    let (first_lang, first) = checkpoints.iter().next().expect("pool is non-empty");
    let schema = schema_of(first);
    for (lang, ckpt) in checkpoints.iter().skip(1) {
        if let Some((tensor, detail)) = schema.first_difference(&schema_of(ckpt)) {
            return Err(Error::PoolSchemaMismatch {
                first: first_lang.clone(),
                second: lang.clone(),
                tensor,
                detail,
            });
        }
    }
    Ok(Pool {
        descriptor,
        checkpoints,
        schema,
    })
}
