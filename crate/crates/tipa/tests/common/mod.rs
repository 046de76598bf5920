#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tipa::container::write_checkpoint;
use tipa::pool::CHECKPOINT_FILE;
use tipa_core::{AdapterCheckpoint, LanguageId, Manifest, Tensor};

pub const TYPOLOGY: &str = "\
lang,m1,m2,m3,s1,s2,s3
#category,morphological,morphological,morphological,syntactic,syntactic,syntactic
af,1,0,1,1,0,0.5
de,1,0,0.8,1,0,0.25
nl,1,0.25,1,1,0,0.5
en,0,0,1,1,0,1
fr,0,1,0,1,1,0
it,0,1,0.25,0,1,0
";

pub const SCHEMA: [(&str, &[usize]); 4] = [
    ("layer0.down.bias", &[2]),
    ("layer0.down.weight", &[2, 3]),
    ("layer0.up.bias", &[3]),
    ("layer0.up.weight", &[3, 2]),
];

pub fn id(s: &str) -> LanguageId {
    LanguageId::new(s).unwrap()
}

/// Deterministic adapter whose values depend on the language index.
pub fn adapter(lang: &str, k: usize) -> AdapterCheckpoint {
    let tensors = SCHEMA
        .iter()
        .enumerate()
        .map(|(t, (name, shape))| {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|i| ((k * 31 + t * 7 + i) as f32 * 0.37).sin()).collect();
            (name.to_string(), Tensor::new(shape.to_vec(), data).unwrap())
        })
        .collect();
    let mut manifest = Manifest::synthesized(lang);
    manifest.architecture = "fixture".into();
    manifest.hidden_size = 3;
    manifest.reduction_factor = 1.5;
    AdapterCheckpoint::new(tensors, manifest)
}

/// Write `root/<lang>/adapter.bin` for each language, in the given order.
pub fn write_pool(root: &Path, langs: &[&str]) {
    for lang in langs {
        let k = ["af", "de", "nl", "en", "fr", "it"].iter().position(|l| l == lang).unwrap_or(9);
        let dir = root.join(lang);
        std::fs::create_dir_all(&dir).unwrap();
        write_checkpoint(&adapter(lang, k), &dir.join(CHECKPOINT_FILE)).unwrap();
    }
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub pool: PathBuf,
    pub typology: PathBuf,
}

pub fn fixture(langs: &[&str]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool");
    write_pool(&pool, langs);
    let typology = dir.path().join("typology.csv");
    std::fs::write(&typology, TYPOLOGY).unwrap();
    Fixture { dir, pool, typology }
}

pub fn tipa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tipa"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn report(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", stderr(out));
    serde_json::from_slice(&out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn weights(report: &serde_json::Value) -> BTreeMap<String, f64> {
    report["weights"]["weights"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_f64().unwrap()))
        .collect()
}
