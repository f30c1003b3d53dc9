//! CSV and JSON emission with provenance headers.

use crate::config::Format;
use crate::CliError;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::PathBuf;

/// SHA-256 of the canonical JSON of `v`; object keys are sorted.
pub fn config_hash(v: &Value) -> String {
    Sha256::digest(v.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => String::new(),
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => Value::from(*v),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Who produced an output: command, seed and the hash of the resolved config.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, resolved: &Value) -> Self {
        Provenance { command: command.to_string(), seed, config_sha256: config_hash(resolved) }
    }
}

pub fn table_csv(table: &Table, prov: &Provenance) -> Result<Vec<u8>, CliError> {
    let mut buf =
        format!("# condsub {} seed={} config_sha256={}\n", prov.command, prov.seed, prov.config_sha256).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.columns).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn table_json(table: &Table, prov: &Provenance) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            Value::Object(
                table.columns.iter().map(|c| c.to_string()).zip(r.iter().map(Cell::json)).collect::<Map<_, _>>(),
            )
        })
        .collect();
    json!({
        "command": prov.command,
        "seed": prov.seed,
        "config_sha256": prov.config_sha256,
        "columns": table.columns,
        "rows": rows,
    })
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Where outputs go: a file under `--out`, or stdout.
#[derive(Debug, Clone)]
pub struct Sink {
    pub out: Option<PathBuf>,
}

impl Sink {
    pub fn write(&self, stem: &str, format: Format, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let ext = match format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                };
                let path = dir.join(format!("{stem}.{ext}"));
                std::fs::write(&path, bytes)?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
        }
        Ok(())
    }

    pub fn table(&self, stem: &str, format: Format, table: &Table, prov: &Provenance) -> Result<(), CliError> {
        let bytes = match format {
            Format::Csv => table_csv(table, prov)?,
            Format::Json => json_bytes(&table_json(table, prov))?,
        };
        self.write(stem, format, &bytes)
    }
}

pub fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    bytes.push(b'\n');
    Ok(bytes)
}
