//! CSV formats for datasets, features, pairs and inference results.
//!
//! Numbers are written in Rust's shortest round-trip form, so a value read
//! back is bit-identical to the one written.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::{BenchRow, InferenceReport};
use crate::operators::{LatentPoint, PointPair};

/// A numeric table read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses CSV text into a table of floats. `path` is only used in errors.
pub fn parse_table(text: &str, has_header: bool, path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = if has_header {
        let h = reader
            .headers()
            .map_err(|e| parse_error(path, 1, e.to_string()))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("not a number: {field:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path, has_header: bool) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, has_header, path)
}

fn column_index(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn as_index(v: f64, path: &Path, line: usize) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(parse_error(
            path,
            line,
            format!("expected a non-negative integer, got {v}"),
        ))
    }
}

/// Dataset CSV: header `x0,…,x{d−1}` and an optional trailing `label` column.
pub fn dataset_csv(points: &[LatentPoint]) -> String {
    let d = points.first().map_or(0, LatentPoint::dim);
    let labeled = points.iter().any(|p| p.label.is_some());
    let mut out = (0..d)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",");
    if labeled {
        out.push_str(",label");
    }
    out.push('\n');
    for p in points {
        push_row(&mut out, &p.z);
        if labeled {
            match p.label {
                Some(y) => write!(out, ",{y}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v:?}").unwrap();
    }
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<LatentPoint>> {
    // Labels may be blank for unlabeled points, so parse the label column
    // separately from the coordinates.
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_col = column_index(&header, "label");
    let d = header.len() - usize::from(label_col.is_some());
    for i in 0..d {
        if column_index(&header, &format!("x{i}")) != Some(i) {
            return Err(parse_error(
                path,
                1,
                format!("expected column x{i} at position {i}"),
            ));
        }
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let z = (0..d)
            .map(|i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("not a number: {:?}", &record[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = match label_col.map(|c| &record[c]) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|_| parse_error(path, line, format!("bad label {s:?}")))?,
            ),
        };
        points.push(LatentPoint { z, label });
    }
    Ok(points)
}

pub fn read_dataset(path: &Path) -> Result<Vec<LatentPoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

/// Feature file: no header, one row per point, consistent width.
pub fn read_feature_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = read_table(path, false)?.rows;
    if let Some(first) = rows.first() {
        if let Some((i, _)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != first.len())
        {
            return Err(parse_error(path, i + 1, "inconsistent feature width"));
        }
    }
    Ok(rows)
}

pub fn index_pairs_csv(pairs: &[(usize, usize)]) -> String {
    let mut out = String::from("anchor_index,neighbor_index\n");
    for (a, b) in pairs {
        writeln!(out, "{a},{b}").unwrap();
    }
    out
}

/// Reads `(anchor_index, neighbor_index)` rows, checking indices against `n`.
pub fn read_index_pairs(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let table = read_table(path, true)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if r.len() != 2 {
                return Err(parse_error(path, line, "expected two columns"));
            }
            let (a, b) = (as_index(r[0], path, line)?, as_index(r[1], path, line)?);
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, len: n });
                }
            }
            Ok((a, b))
        })
        .collect()
}

/// Explicit pair CSV: `z0_0,…,z0_{d−1},z1_0,…,z1_{d−1}`.
pub fn pairs_csv(pairs: &[PointPair]) -> String {
    let d = pairs.first().map_or(0, |p| p.z0.dim());
    let names: Vec<String> = (0..d)
        .map(|i| format!("z0_{i}"))
        .chain((0..d).map(|i| format!("z1_{i}")))
        .collect();
    let mut out = names.join(",");
    out.push('\n');
    for p in pairs {
        push_row(&mut out, &p.z0.z);
        out.push(',');
        push_row(&mut out, &p.z1.z);
        out.push('\n');
    }
    out
}

pub fn read_pairs(path: &Path) -> Result<Vec<PointPair>> {
    let table = read_table(path, true)?;
    let header = table.header.unwrap_or_default();
    if header.len() % 2 != 0 || header.is_empty() {
        return Err(parse_error(
            path,
            1,
            "pair files need z0_* and z1_* columns",
        ));
    }
    let d = header.len() / 2;
    if header[0] != "z0_0" || header[d] != "z1_0" {
        return Err(parse_error(
            path,
            1,
            "pair files need z0_* and z1_* columns",
        ));
    }
    Ok(table
        .rows
        .into_iter()
        .map(|r| PointPair::new(r[..d].to_vec(), r[d..].to_vec()))
        .collect())
}

/// Pairs from either an explicit pair file or an index file over `points`.
pub fn resolve_pairs(path: &Path, points: Option<&[LatentPoint]>) -> Result<Vec<PointPair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.starts_with("anchor_index") {
        let points = points.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{} holds point indices; a dataset is needed to resolve them",
                path.display()
            ))
        })?;
        Ok(read_index_pairs(path, points.len())?
            .into_iter()
            .map(|(a, b)| PointPair {
                z0: points[a].clone(),
                z1: points[b].clone(),
            })
            .collect())
    } else {
        read_pairs(path)
    }
}

/// One row per pair: coefficients, objective, reconstruction error, iterations
/// and a 0/1 convergence flag.
pub fn coefficients_csv(reports: &[InferenceReport]) -> String {
    let m = reports.first().map_or(0, |r| r.coefficients.len());
    let mut out = String::from("pair_index");
    for i in 0..m {
        write!(out, ",c{i}").unwrap();
    }
    out.push_str(",objective,recon_error,iterations,converged\n");
    for (i, r) in reports.iter().enumerate() {
        write!(out, "{i}").unwrap();
        for c in r.coefficients.values() {
            write!(out, ",{c:?}").unwrap();
        }
        writeln!(
            out,
            ",{:?},{:?},{},{}",
            r.objective,
            r.recon_error,
            r.iterations,
            u8::from(r.converged)
        )
        .unwrap();
    }
    out
}

/// Matrix of values with a leading row-label column.
pub fn labeled_matrix_csv(row_name: &str, col_prefix: &str, rows: &[(String, Vec<f64>)]) -> String {
    let width = rows.first().map_or(0, |r| r.1.len());
    let mut out = String::from(row_name);
    for i in 0..width {
        write!(out, ",{col_prefix}{i}").unwrap();
    }
    out.push('\n');
    for (label, values) in rows {
        out.push_str(label);
        out.push(',');
        push_row(&mut out, values);
        out.push('\n');
    }
    out
}

/// Benchmark rows; with `timing` off the wall-time column is written as 0 so
/// the file is reproducible.
pub fn bench_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut out =
        String::from("pair_index,method,iterations,final_objective,recon_error,wall_time_ns\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:?},{:?},{}",
            r.pair_index,
            r.method.name(),
            r.iterations,
            r.final_objective,
            r.recon_error,
            if timing { r.wall_time_ns } else { 0 }
        )
        .unwrap();
    }
    out
}
