//! Relevance, group and value files.
//!
//! - Relevance: CSV with one row per consumer (an optional header row is
//!   skipped), or raw little-endian f32 row-major with a JSON header
//!   `{"m": .., "n": ..}` at `<path>.json`.
//! - Groups: CSV `consumer,group`.
//! - Values: CSV `producer,value`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so CSV
//! save/load is bit exact.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fairtopk_core::{Error as CoreError, GroupPartition, ProducerValues, RelevanceMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum MatrixFormat {
    #[default]
    Csv,
    Raw,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn is_raw(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("f32" | "bin" | "raw"))
}

pub fn read_relevance(path: &Path) -> CliResult<RelevanceMatrix> {
    if is_raw(path) {
        read_relevance_raw(path)
    } else {
        read_relevance_csv(path)
    }
}

fn input_error(path: &Path, line: Option<u64>, message: impl Into<String>) -> CliError {
    let at = match line {
        Some(l) => format!("{}:{l}", path.display()),
        None => path.display().to_string(),
    };
    CliError::Input { at, message: message.into() }
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file))
}

/// Records with their 1-based line numbers; a first row whose leading cell is
/// not numeric is taken as a header and dropped.
fn records(path: &Path) -> CliResult<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in csv_reader(path)?.records() {
        let rec = rec.map_err(|e| input_error(path, e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if out.is_empty() && rec.get(0).is_some_and(|c| c.parse::<f64>().is_err()) && line == 1 {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_cell<T: std::str::FromStr>(path: &Path, line: u64, col: usize, cell: &str) -> CliResult<T> {
    cell.parse().map_err(|_| input_error(path, Some(line), format!("column {}: `{cell}` is not a number", col + 1)))
}

fn read_relevance_csv(path: &Path) -> CliResult<RelevanceMatrix> {
    let recs = records(path)?;
    let n = recs.first().map_or(0, |(_, r)| r.len());
    let mut scores = Vec::with_capacity(recs.len() * n);
    for (line, rec) in &recs {
        if rec.len() != n {
            return Err(input_error(path, Some(*line), format!("{} columns, expected {n}", rec.len())));
        }
        for (col, cell) in rec.iter().enumerate() {
            scores.push(parse_cell(path, *line, col, cell)?);
        }
    }
    relevance_from(path, recs.len(), n, scores)
}

fn relevance_from(path: &Path, m: usize, n: usize, scores: Vec<f64>) -> CliResult<RelevanceMatrix> {
    RelevanceMatrix::new(m, n, scores).map_err(|e| match e {
        CoreError::OutOfRange { row, col, value } => {
            input_error(path, None, format!("entry {value} at ({row}, {col}) is outside [0, 1]"))
        }
        other => input_error(path, None, other.to_string()),
    })
}

fn read_relevance_raw(path: &Path) -> CliResult<RelevanceMatrix> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| CliError::io(&hp, e))?;
    let h: RawHeader = serde_json::from_str(&text).map_err(|e| input_error(&hp, None, e.to_string()))?;
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let expected = h.m.checked_mul(h.n).and_then(|c| c.checked_mul(4));
    if expected != Some(bytes.len()) {
        return Err(input_error(path, None, format!("{} bytes, header says {}x{} f32", bytes.len(), h.m, h.n)));
    }
    let scores = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    relevance_from(path, h.m, h.n, scores)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

pub fn write_relevance(path: &Path, rho: &RelevanceMatrix, format: MatrixFormat) -> CliResult<()> {
    let mut out = create(path)?;
    let io = |e| CliError::io(path, e);
    match format {
        MatrixFormat::Csv => {
            for row in rho.rows() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", cells.join(",")).map_err(io)?;
            }
        }
        MatrixFormat::Raw => {
            for &v in rho.as_slice() {
                out.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
            }
            let header = serde_json::to_string(&RawHeader { m: rho.m(), n: rho.n() }).expect("header serializes");
            write_file(&header_path(path), format!("{header}\n").as_bytes())?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_groups(path: &Path, m: usize) -> CliResult<GroupPartition> {
    let pairs = read_pairs::<usize>(path, "group")?;
    let mut labels = vec![None; m];
    for (line, consumer, group) in pairs {
        let slot = labels
            .get_mut(consumer)
            .ok_or_else(|| input_error(path, Some(line), format!("consumer {consumer} outside 0..{m}")))?;
        if slot.replace(group).is_some() {
            return Err(input_error(path, Some(line), format!("consumer {consumer} labelled twice")));
        }
    }
    let labels = labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| input_error(path, None, format!("consumer {i} has no group label"))))
        .collect::<CliResult<Vec<usize>>>()?;
    let count = labels.iter().max().map_or(0, |g| g + 1);
    GroupPartition::new(labels, count).map_err(|e| input_error(path, None, e.to_string()))
}

pub fn read_values(path: &Path, n: usize) -> CliResult<ProducerValues> {
    let pairs = read_pairs::<f64>(path, "value")?;
    let mut values = vec![None; n];
    for (line, producer, v) in pairs {
        let slot = values
            .get_mut(producer)
            .ok_or_else(|| input_error(path, Some(line), format!("producer {producer} outside 0..{n}")))?;
        if slot.replace(v).is_some() {
            return Err(input_error(path, Some(line), format!("producer {producer} valued twice")));
        }
    }
    let values = values
        .iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| input_error(path, None, format!("producer {j} has no value"))))
        .collect::<CliResult<Vec<f64>>>()?;
    ProducerValues::new(values).map_err(|e| input_error(path, None, e.to_string()))
}

fn read_pairs<T: std::str::FromStr>(path: &Path, what: &str) -> CliResult<Vec<(u64, usize, T)>> {
    let mut out = Vec::new();
    for (line, rec) in records(path)? {
        if rec.len() != 2 {
            return Err(input_error(path, Some(line), format!("expected `index,{what}`, got {} columns", rec.len())));
        }
        out.push((line, parse_cell(path, line, 0, &rec[0])?, parse_cell(path, line, 1, &rec[1])?));
    }
    Ok(out)
}

pub fn write_groups(path: &Path, groups: &GroupPartition) -> CliResult<()> {
    let mut s = String::from("consumer,group\n");
    for (i, g) in groups.labels().iter().enumerate() {
        s.push_str(&format!("{i},{g}\n"));
    }
    write_file(path, s.as_bytes())
}

pub fn write_values(path: &Path, values: &ProducerValues) -> CliResult<()> {
    let mut s = String::from("producer,value\n");
    for (j, v) in values.as_slice().iter().enumerate() {
        s.push_str(&format!("{j},{v}\n"));
    }
    write_file(path, s.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut out = create(path)?;
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Serializes rows with a header taken from the row type.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| input_error(path, None, e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
