//! File formats, pool loading, reports and the command line for building
//! proxy language adapters with `tipa-core`.

use std::io::Write;
use std::path::Path;

pub mod build;
pub mod cli;
pub mod config;
pub mod container;
pub mod error;
pub mod harness;
pub mod pool;
pub mod report;
pub mod typology_io;

pub use error::{Error, Result};

/// Write `bytes` to a temp file next to `path`, then rename over it.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
