//! File formats: FASTA, RFC-4180 CSVs and versioned JSON containers.
//!
//! All writers go through an in-memory buffer and an atomic
//! temp-file-plus-rename, so partial artifacts never appear and identical
//! inputs produce byte-identical files. Floats are written with Rust's
//! shortest round-trip formatting.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lbo::RunRecord;
use crate::oracle::{FeatureMatrix, OracleError};
use crate::peptides::{parse_sequence, DescriptorVector, PeptideError, Sequence};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: record '{id}': {source}")]
    Sequence { path: PathBuf, id: String, source: PeptideError },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(path))?;
        }
    }
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

// ── Versioned JSON container ────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct Container<T> {
    format: String,
    version: u32,
    payload: T,
}

const CONTAINER_VERSION: u32 = 1;

/// Save a payload in a versioned JSON container.
pub fn save_versioned<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<(), IoError> {
    let container =
        Container { format: format!("peplbo/{kind}"), version: CONTAINER_VERSION, payload };
    let mut bytes = serde_json::to_vec_pretty(&container)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Load a payload, checking the container kind and version.
pub fn load_versioned<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let container: Container<T> = serde_json::from_slice(&bytes)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    let expected = format!("peplbo/{kind}");
    if container.format != expected {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("expected format '{expected}', found '{}'", container.format),
        });
    }
    if container.version != CONTAINER_VERSION {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!(
                "unsupported version {} (supported: {CONTAINER_VERSION})",
                container.version
            ),
        });
    }
    Ok(container.payload)
}

// ── FASTA and sequence CSV ──────────────────────────────────────

/// Read a FASTA file; headers (after '>') are preserved as ids.
pub fn read_fasta(path: &Path) -> Result<Vec<(String, Sequence)>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    let mut id: Option<String> = None;
    let mut buf = String::new();
    let flush = |id: &Option<String>, buf: &str, records: &mut Vec<(String, Sequence)>| {
        if let Some(id) = id {
            let seq = parse_sequence(buf).map_err(|source| IoError::Sequence {
                path: path.to_path_buf(),
                id: id.clone(),
                source,
            })?;
            records.push((id.clone(), seq));
        }
        Ok::<(), IoError>(())
    };
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            flush(&id, &buf, &mut records)?;
            id = Some(header.trim().to_string());
            buf.clear();
        } else {
            if id.is_none() {
                return Err(IoError::Format {
                    path: path.to_path_buf(),
                    reason: "sequence data before any '>' header".into(),
                });
            }
            buf.push_str(line.trim());
        }
    }
    flush(&id, &buf, &mut records)?;
    Ok(records)
}

/// Read sequences from a CSV with a `sequence` column and an optional `id`
/// column (row number used as id otherwise).
pub fn read_sequences_csv(path: &Path) -> Result<Vec<(String, Sequence)>, IoError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let headers = reader
        .headers()
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let seq_col = headers.iter().position(|h| h == "sequence").ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        reason: "missing 'sequence' column".into(),
    })?;
    let id_col = headers.iter().position(|h| h == "id");
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        let id = id_col
            .and_then(|c| record.get(c))
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("row{row}"));
        let text = record.get(seq_col).unwrap_or("");
        let seq = parse_sequence(text).map_err(|source| IoError::Sequence {
            path: path.to_path_buf(),
            id: id.clone(),
            source,
        })?;
        out.push((id, seq));
    }
    Ok(out)
}

/// Read a pool from FASTA (.fasta/.fa/.fna) or CSV, by extension.
pub fn read_pool(path: &Path) -> Result<Vec<(String, Sequence)>, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_sequences_csv(path),
        Some("fasta") | Some("fa") | Some("fna") => read_fasta(path),
        _ => Err(IoError::Format {
            path: path.to_path_buf(),
            reason: "unknown pool format (expected .fasta/.fa/.fna or .csv)".into(),
        }),
    }
}

// ── CSV writers (RFC 4180: quoted where needed, CRLF terminators) ──

fn csv_buffer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new())
}

fn finish_csv(writer: csv::Writer<Vec<u8>>, path: &Path) -> Result<(), IoError> {
    let bytes = writer.into_inner().map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        reason: format!("flush failed: {e}"),
    })?;
    write_atomic(path, &bytes)
}

/// Write `id,feature...` with full float round-trip precision.
pub fn write_descriptor_csv(
    path: &Path,
    rows: &[(String, DescriptorVector)],
) -> Result<(), IoError> {
    let mut w = csv_buffer();
    let mut header = vec!["id".to_string()];
    if let Some((_, first)) = rows.first() {
        header.extend(first.names().iter().cloned());
    }
    w.write_record(&header)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    for (id, dv) in rows {
        let mut record = vec![id.clone()];
        record.extend(dv.values().iter().map(|v| v.to_string()));
        w.write_record(&record)
            .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    }
    finish_csv(w, path)
}

/// Read a numeric point cloud: any CSV whose columns are all numeric
/// (a leading `id` column is skipped).
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let headers = reader
        .headers()
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let skip = usize::from(headers.iter().next() == Some("id"));
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        let row: Result<Vec<f64>, _> = record.iter().skip(skip).map(|v| v.parse::<f64>()).collect();
        out.push(row.map_err(|e| IoError::Format {
            path: path.to_path_buf(),
            reason: format!("non-numeric value: {e}"),
        })?);
    }
    Ok(out)
}

/// Write a point cloud with `coord_0..coord_{k-1}` headers.
pub fn write_points_csv(path: &Path, points: &[Vec<f64>]) -> Result<(), IoError> {
    let mut w = csv_buffer();
    let k = points.first().map_or(0, |p| p.len());
    let header: Vec<String> = (0..k).map(|j| format!("coord_{j}")).collect();
    w.write_record(&header)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    for p in points {
        let record: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        w.write_record(&record)
            .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    }
    finish_csv(w, path)
}

/// Read a feature matrix CSV: one target column by name, every other
/// column (except `id`) a numeric feature.
pub fn read_feature_matrix_csv(path: &Path, target: &str) -> Result<FeatureMatrix, IoError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let headers = reader
        .headers()
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let target_col = headers.iter().position(|h| h == target).ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        reason: format!("missing target column '{target}'"),
    })?;
    let feature_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| *i != target_col && *h != "id")
        .map(|(i, _)| i)
        .collect();
    let names: Vec<String> = feature_cols.iter().map(|&i| headers[i].to_string()).collect();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        let parse = |i: usize| -> Result<f64, IoError> {
            record.get(i).unwrap_or("").parse::<f64>().map_err(|e| IoError::Format {
                path: path.to_path_buf(),
                reason: format!("column '{}': {e}", &headers[i]),
            })
        };
        rows.push(feature_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<f64>, _>>()?);
        targets.push(parse(target_col)?);
    }
    Ok(FeatureMatrix::new(names, rows, targets)?)
}

// ── Run logs ────────────────────────────────────────────────────

/// Write the run log: `iter,coord_0..coord_{k-1},sequence,M,M_best`.
pub fn write_run_csv(path: &Path, record: &RunRecord) -> Result<(), IoError> {
    let mut w = csv_buffer();
    let k = record.entries.first().map_or(0, |e| e.coords.len());
    let mut header = vec!["iter".to_string()];
    header.extend((0..k).map(|j| format!("coord_{j}")));
    header.extend(["sequence".to_string(), "M".to_string(), "M_best".to_string()]);
    w.write_record(&header)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    for e in &record.entries {
        let mut row = vec![e.index.to_string()];
        row.extend(e.coords.iter().map(|v| v.to_string()));
        row.push(e.sequence.to_string());
        row.push(e.score.to_string());
        row.push(e.best.to_string());
        w.write_record(&row)
            .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    }
    finish_csv(w, path)
}

/// A run log read back from CSV (the full latent points are not stored in
/// the log; PCA-space logs need the projection model to recover them).
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub coords: Vec<Vec<f64>>,
    pub sequences: Vec<String>,
    pub scores: Vec<f64>,
    pub bests: Vec<f64>,
}

pub fn read_run_csv(path: &Path) -> Result<RunLog, IoError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let headers = reader
        .headers()
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let k = headers.iter().filter(|h| h.starts_with("coord_")).count();
    let mut log = RunLog { coords: vec![], sequences: vec![], scores: vec![], bests: vec![] };
    for record in reader.records() {
        let record = record.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        let bad = |reason: String| IoError::Format { path: path.to_path_buf(), reason };
        let coords: Vec<f64> = (0..k)
            .map(|j| {
                record
                    .get(1 + j)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| bad(format!("coord_{j}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        log.coords.push(coords);
        log.sequences.push(record.get(1 + k).unwrap_or("").to_string());
        log.scores.push(
            record.get(2 + k).unwrap_or("").parse().map_err(|e| bad(format!("M: {e}")))?,
        );
        log.bests.push(
            record.get(3 + k).unwrap_or("").parse().map_err(|e| bad(format!("M_best: {e}")))?,
        );
    }
    Ok(log)
}
