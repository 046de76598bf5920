//! CSV readers and writers for typology tables and distance matrices.
//!
//! Typology layout:
//!
//! ```text
//! lang,f_order,f_case,...
//! #category,syntactic,morphological,...
//! de,1,0.5,...
//! fr,1,,...          <- empty cell = missing
//! ```
//!
//! Distance layout: a header row of language ids (first cell ignored), then
//! one row per language starting with its id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use tipa_core::typology::Feature;
use tipa_core::{DistanceMatrix, FeatureCategory, LanguageId, TypologyTable};

use crate::atomic_write;
use crate::error::{Error, Result};

const CATEGORY_MARKER: &str = "#category";

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

fn records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    reader(path)?
        .records()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::malformed(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn parse_language(path: &Path, line: usize, raw: &str) -> Result<LanguageId> {
    LanguageId::new(raw.trim())
        .map_err(|e| Error::malformed(path, format!("line {line}: {e}")))
}

fn parse_unit(path: &Path, line: usize, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::malformed(path, format!("line {line}: `{raw}` is not a number")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::malformed(path, format!("line {line}: value {v} outside [0, 1]")));
    }
    Ok(v)
}

/// Read a typology table. Category tags must be one of
/// `morphological`, `syntactic`, `phonological`, `inventory`.
pub fn load_typology(path: &Path) -> Result<TypologyTable> {
    let rows = records(path)?;
    let (header, tags) = match rows.as_slice() {
        [h, t, ..] => (h, t),
        _ => return Err(Error::malformed(path, "expected a header row and a #category row")),
    };
    if header.get(0).map(str::trim) != Some("lang") {
        return Err(Error::malformed(path, "line 1: first cell must be `lang`"));
    }
    if tags.get(0).map(str::trim) != Some(CATEGORY_MARKER) {
        return Err(Error::malformed(path, "line 2: first cell must be `#category`"));
    }
    if tags.len() != header.len() {
        return Err(Error::malformed(path, "line 2: category row length differs from header"));
    }
    let mut features = Vec::with_capacity(header.len() - 1);
    for (name, tag) in header.iter().zip(tags.iter()).skip(1) {
        let category: FeatureCategory = tag
            .trim()
            .parse()
            .ok()
            .filter(|c| *c != FeatureCategory::Featural)
            .ok_or_else(|| Error::malformed(path, format!("line 2: unknown category tag `{tag}`")))?;
        features.push(Feature {
            name: name.trim().to_string(),
            category,
        });
    }

    let mut vectors = BTreeMap::new();
    for (i, row) in rows.iter().enumerate().skip(2) {
        let line = i + 1;
        if row.len() != header.len() {
            return Err(Error::malformed(
                path,
                format!("line {line}: {} cells, header has {}", row.len(), header.len()),
            ));
        }
        let lang = parse_language(path, line, &row[0])?;
        let values = row
            .iter()
            .skip(1)
            .map(|cell| {
                if cell.trim().is_empty() {
                    Ok(None)
                } else {
                    parse_unit(path, line, cell).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if vectors.insert(lang.clone(), values).is_some() {
            return Err(Error::malformed(path, format!("line {line}: `{lang}` listed twice")));
        }
    }
    TypologyTable::new(features, vectors).map_err(|e| match e {
        tipa_core::Error::EmptyTable => Error::Core(e),
        other => Error::malformed(path, other.to_string()),
    })
}

/// Write `table` in the layout [`load_typology`] reads.
pub fn write_typology(table: &TypologyTable, path: &Path) -> Result<()> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lang".to_string()];
    header.extend(table.features().iter().map(|f| f.name.clone()));
    let mut tags = vec![CATEGORY_MARKER.to_string()];
    tags.extend(table.features().iter().map(|f| f.category.tag().to_string()));
    let csv_err = |e: csv::Error| Error::malformed(path, e.to_string());
    out.write_record(&header).map_err(csv_err)?;
    out.write_record(&tags).map_err(csv_err)?;
    for (lang, values) in table.vectors() {
        let mut row = vec![lang.to_string()];
        row.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        out.write_record(&row).map_err(csv_err)?;
    }
    let bytes = out.into_inner().map_err(|e| Error::malformed(path, e.to_string()))?;
    atomic_write(path, &bytes)
}

/// Read a square distance matrix. Near-symmetric pairs are averaged.
pub fn load_precomputed_distances(path: &Path) -> Result<DistanceMatrix> {
    let rows = records(path)?;
    let Some((header, body)) = rows.split_first() else {
        return Err(Error::malformed(path, "empty file"));
    };
    let ids = header
        .iter()
        .skip(1)
        .map(|c| parse_language(path, 1, c))
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(Error::malformed(path, "header lists no languages"));
    }
    if body.len() != ids.len() {
        return Err(Error::malformed(
            path,
            format!("{} data rows for {} languages", body.len(), ids.len()),
        ));
    }
    let mut by_lang = BTreeMap::new();
    for (i, row) in body.iter().enumerate() {
        let line = i + 2;
        if row.len() != ids.len() + 1 {
            return Err(Error::malformed(path, format!("line {line}: expected {} cells", ids.len() + 1)));
        }
        let lang = parse_language(path, line, &row[0])?;
        let values = row
            .iter()
            .skip(1)
            .map(|c| parse_unit(path, line, c))
            .collect::<Result<Vec<_>>>()?;
        if by_lang.insert(lang.clone(), values).is_some() {
            return Err(Error::malformed(path, format!("line {line}: `{lang}` listed twice")));
        }
    }
    let matrix_rows = ids
        .iter()
        .map(|id| {
            by_lang
                .remove(id)
                .ok_or_else(|| Error::malformed(path, format!("no row for `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    DistanceMatrix::from_rows(ids, matrix_rows).map_err(|e| match e {
        tipa_core::Error::InvalidMatrix(reason) => Error::malformed(path, reason),
        other => Error::Core(other),
    })
}

/// Write a matrix with rows and columns in lexicographic id order.
pub fn write_distance_matrix(matrix: &DistanceMatrix, path: &Path) -> Result<()> {
    let ids: Vec<&LanguageId> = matrix.languages().collect();
    let mut buf = Vec::new();
    write!(buf, "lang").and_then(|_| {
        for id in &ids {
            write!(buf, ",{id}")?;
        }
        writeln!(buf)?;
        for a in &ids {
            write!(buf, "{a}")?;
            for b in &ids {
                write!(buf, ",{}", matrix.get(a, b).unwrap_or_default())?;
            }
            writeln!(buf)?;
        }
        Ok(())
    })
    .map_err(|e| Error::io(path, e))?;
    atomic_write(path, &buf)
}
