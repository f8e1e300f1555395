//! Output files: never overwrite, never leave partial files behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

const MAX_SUFFIX: usize = 10_000;

/// Writes `bytes` to `dir/name`, or to `dir/stem-1.ext`, `dir/stem-2.ext`, ...
/// when that name is taken. The data goes to a temporary file in `dir` first
/// and is moved into place without clobbering anything.
pub fn write_new(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let (stem, ext) = match name.rsplit_once('.') {
        Some((s, e)) if !s.is_empty() => (s, Some(e)),
        _ => (name, None),
    };
    for i in 0..MAX_SUFFIX {
        let candidate = match (i, ext) {
            (0, _) => name.to_string(),
            (_, Some(e)) => format!("{stem}-{i}.{e}"),
            (_, None) => format!("{stem}-{i}"),
        };
        let path = dir.join(candidate);
        if path.exists() {
            continue;
        }
        match tmp.persist_noclobber(&path) {
            Ok(_) => return Ok(path),
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => tmp = e.file,
            Err(e) => return Err(e.error),
        }
    }
    Err(std::io::Error::other(format!(
        "no free file name for {name} in {}",
        dir.display()
    )))
}

/// Full-precision rendering used in every CSV column.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
