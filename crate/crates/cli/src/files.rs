use crate::errors::{data, usage};
use anyhow::{Context, Result};
use cmgkit_core::schema::{read_jsonl_file, DatasetError, DatasetRecord};
use std::io::Write;
use std::path::Path;

pub fn require_input(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input not found: {}", path.display())))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    require_input(path)?;
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    require_input(path)?;
    read_jsonl_file(path).map_err(|e| match e {
        DatasetError::Io(io) => anyhow::Error::new(io).context(format!("reading {}", path.display())),
        other => data(format!("{}: {other}", path.display())),
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn records_jsonl(records: &[DatasetRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
