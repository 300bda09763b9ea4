//! Atomic file output: content goes to `<name>.partial` and is renamed into place.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Runs `fill` against a buffered writer on the partial file, then renames it to `path`.
pub fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let tmp = partial_path(path);
    let file = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    let result = fill(&mut w).and_then(|()| {
        let file = w.into_inner().map_err(|e| CliError::io(&tmp, e.into_error()))?;
        file.sync_all().map_err(|e| CliError::io(&tmp, e))
    });
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::io(path, e.into()))?;
        writeln!(w).map_err(|e| CliError::io(path, e))
    })
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        for line in lines {
            writeln!(w, "{line}").map_err(|e| CliError::io(path, e))?;
        }
        Ok(())
    })
}
