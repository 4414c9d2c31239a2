//! Hash-stamped CSV and JSON files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

const STAMP: &str = "# config_hash=";

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))
}

/// A CSV body preceded by a `# config_hash=` line.
pub struct StampedCsv {
    buf: Vec<u8>,
}

impl StampedCsv {
    pub fn new(hash: &str) -> Self {
        Self {
            buf: format!("{STAMP}{hash}\n").into_bytes(),
        }
    }

    pub fn writer(&mut self) -> csv::Writer<&mut Vec<u8>> {
        csv::Writer::from_writer(&mut self.buf)
    }

    pub fn buffer(&mut self) -> &mut Vec<u8> {
        &mut self.buf
    }

    pub fn save(self, path: &Path) -> CliResult<()> {
        write_bytes(path, &self.buf)
    }
}

/// Reads a stamped CSV, checks its hash and returns the records after the header.
pub fn read_stamped_csv(path: &Path, expected: &str) -> CliResult<Vec<csv::StringRecord>> {
    let text = read_text(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let found = first
        .strip_prefix(STAMP)
        .ok_or_else(|| CliError::Validation(format!("{} has no config hash line", path.display())))?;
    check_hash(path, expected, found.trim())?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    Ok(rdr.records().collect::<Result<_, _>>()?)
}

pub fn check_hash(path: &Path, expected: &str, found: &str) -> CliResult<()> {
    if expected != found {
        return Err(CliError::HashMismatch {
            file: path.display().to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Serializes `value` as pretty JSON with an added `config_hash` field.
pub fn write_json(path: &Path, hash: &str, value: &impl Serialize) -> CliResult<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("config_hash".into(), Value::String(hash.into()));
    match serde_json::to_value(value).map_err(nphmm::Error::from)? {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("value".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(nphmm::Error::from)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Reads a JSON object, checks its `config_hash` and returns it.
pub fn read_json(path: &Path, expected: &str) -> CliResult<Value> {
    let v: Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let found = v
        .get("config_hash")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Validation(format!("{} has no config_hash", path.display())))?;
    check_hash(path, expected, found)?;
    Ok(v)
}

pub fn trajectory_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("trajectory_seed{seed}.csv"))
}

pub fn estimate_path(out: &Path, tag: &str, seed: u64) -> PathBuf {
    out.join(format!("estimate_{tag}_seed{seed}.json"))
}

pub fn emission_path(out: &Path, tag: &str, seed: u64) -> PathBuf {
    out.join(format!("emission_{tag}_seed{seed}.csv"))
}

pub fn posterior_path(out: &Path, tag: &str, seed: u64) -> PathBuf {
    out.join(format!("posterior_{tag}_seed{seed}.csv"))
}

/// Flushes a CSV writer into its buffer.
pub fn finish<W: Write>(mut w: csv::Writer<W>) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io("CSV buffer", e))
}
