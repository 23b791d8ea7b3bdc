//! Headerless numeric CSV matrices, study manifests and tabular reports.

use std::fs;
use std::path::{Path, PathBuf};

use ispls_core::{MultiStudyData, StudyData};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Decimal text that parses back to exactly `v`; negative zero is written as `0`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if v.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn read_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let shown = path.display();
    let text = fs::read(path).map_err(|e| CliError::io(&shown, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_slice());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(&shown, format!("row {}: {e}", i + 1)))?;
        let width = record.len();
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(CliError::data(&shown, format!("row {} has {width} fields, expected {c}", i + 1)));
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::data(&shown, format!("row {}, column {}: `{cell}` is not a number", i + 1, j + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::data(&shown, "no rows"))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| CliError::data(&shown, e.to_string()))
}

pub fn write_rows<I, R>(path: &Path, rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::data(path.display(), e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::data(path.display(), e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> CliResult<()> {
    write_rows(path, m.rows().into_iter().map(|r| r.iter().map(|v| format_f64(*v)).collect::<Vec<_>>()))
}

/// Rows of 0/1 flags.
pub fn write_flags(path: &Path, rows: &[Vec<bool>]) -> CliResult<()> {
    write_rows(path, rows.iter().map(|r| r.iter().map(|b| if *b { "1" } else { "0" }.to_string()).collect::<Vec<_>>()))
}

/// A table with a header row taken from the field names of `T`.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let err = |e: csv::Error| CliError::data(path.display(), e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(path.display(), e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e.to_string()))
}

/// One study of an input manifest; paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyEntry {
    pub id: String,
    pub x: PathBuf,
    pub y: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub studies: Vec<StudyEntry>,
}

pub fn read_studies(manifest_path: &Path) -> CliResult<MultiStudyData> {
    let manifest: Manifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let studies = manifest
        .studies
        .iter()
        .map(|s| {
            let x = read_matrix(&base.join(&s.x))?;
            let y = read_matrix(&base.join(&s.y))?;
            Ok(StudyData::new(s.id.clone(), x, y)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(MultiStudyData::new(studies)?)
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path.display(), e))
}
