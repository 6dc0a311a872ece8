//! Table rendering and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use fxamm::table::{Cell, Table};
use serde::Serialize;
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn cell_json(cell: &Cell) -> Value {
    match cell {
        Cell::Num(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
        Cell::Int(v) => Value::Number((*v).into()),
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Empty => Value::Null,
    }
}

/// Rows as a JSON array of objects keyed by column name, column order kept.
pub fn table_json(table: &Table) -> Value {
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.to_string(), cell_json(v)))
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

pub fn render(table: &Table, format: Format) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => table.write_csv(&mut buf, b',')?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &table_json(table)).map_err(|e| CliError::Io(e.to_string()))?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

impl Fingerprint {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Fingerprint {
            file: file_name(path),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }
}

/// Everything needed to reproduce a run. Contains no timestamps or absolute
/// paths, so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub input: Option<Fingerprint>,
    pub outputs: Vec<Fingerprint>,
}

/// Collects rendered outputs and writes them once the run has succeeded.
pub struct Outputs {
    format: Format,
    primary: Option<PathBuf>,
    files: Vec<(PathBuf, Vec<u8>)>,
    stdout: Option<Vec<u8>>,
}

impl Outputs {
    pub fn new(format: Format, primary: Option<PathBuf>) -> Self {
        Outputs {
            format,
            primary,
            files: Vec::new(),
            stdout: None,
        }
    }

    /// The main table: to `--output`, or stdout without one.
    pub fn primary(&mut self, table: &Table) -> Result<(), CliError> {
        let bytes = render(table, self.format)?;
        match self.primary.clone() {
            Some(p) => self.files.push((p, bytes)),
            None => self.stdout = Some(bytes),
        }
        Ok(())
    }

    pub fn extra(&mut self, path: PathBuf, table: &Table) -> Result<(), CliError> {
        let bytes = render(table, self.format)?;
        self.files.push((path, bytes));
        Ok(())
    }

    pub fn raw(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    /// Writes every output; with a file `--output`, also writes
    /// `<output>.manifest.json` next to it.
    pub fn finish(
        self,
        command: &'static str,
        seed: Option<u64>,
        config: BTreeMap<String, String>,
        input: Option<Fingerprint>,
    ) -> Result<(), CliError> {
        for (path, bytes) in &self.files {
            std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        }
        if let Some(bytes) = &self.stdout {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
        if let Some(primary) = &self.primary {
            let manifest = RunManifest {
                tool: "fxamm",
                version: env!("CARGO_PKG_VERSION"),
                command,
                seed,
                config,
                input,
                outputs: self.files.iter().map(|(p, b)| Fingerprint::of(p, b)).collect(),
            };
            let mut path = primary.clone().into_os_string();
            path.push(".manifest.json");
            let path = PathBuf::from(path);
            let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
            text.push(b'\n');
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_rows_keep_types() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![1.5.into(), 2usize.into(), "x".into(), Cell::Empty]);
        t.push(vec![f64::NAN.into(), 0usize.into(), "".into(), 0.25.into()]);
        let v = table_json(&t);
        assert_eq!(v[0]["a"], 1.5);
        assert_eq!(v[0]["b"], 2);
        assert_eq!(v[0]["c"], "x");
        assert!(v[0]["d"].is_null());
        assert!(v[1]["a"].is_null());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
