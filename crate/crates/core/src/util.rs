use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Source index for each of `target` output slots when stretching or
/// shrinking a sequence of `len` items; order preserving.
pub fn nearest_index_resample(len: usize, target: usize) -> Vec<usize> {
    (0..target).map(|i| i * len / target).collect()
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so an
/// interrupted run never leaves a truncated output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
