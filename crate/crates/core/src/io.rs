//! CSV data ingestion and the line-delimited trace format.
//!
//! A trace file is UTF-8 text, one JSON object per line. Line 1 is the
//! header ([`TraceMeta`]); every further line is one sample:
//!
//! ```text
//! {"iteration":10009,"chain":0,"edges":[[1,0],[2,1]],"coefficients":[0.41,0.38],
//!  "gamma":0.31,"gamma1":0.72,"noise":[{"weights":[..],"means":[..],"variances":[..]},..]}
//! ```
//!
//! `edges` holds 0-indexed `[target, source]` pairs sorted ascending and
//! `coefficients[k]` is `B[target][source]` of `edges[k]`. Floats are written
//! in shortest round-trip form, so reading a file back reproduces every value
//! bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::likelihood::{DataMatrix, Standardization};
use crate::noise::{GaussianMixture, NoiseModel};
use crate::sampler::{Sample, Trace, TraceMeta, FORMAT_VERSION};

/// Result of [`read_data_csv`].
#[derive(Debug, Clone)]
pub struct LoadedData {
    /// Matrix handed to the samplers (standardized unless disabled).
    pub data: DataMatrix,
    pub raw: DataMatrix,
    pub standardization: Option<Standardization>,
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "n/a" | "null" | "none"
    )
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Read a rectangular numeric CSV.
///
/// A first row containing a non-numeric, non-missing cell is taken as the
/// header. Missing markers (`NA`, `NaN`, empty, ...) are errors, as are
/// ragged rows. Row numbers in errors are 1-based file lines.
pub fn read_data_csv(path: impl AsRef<Path>, standardize: bool) -> Result<LoadedData> {
    let text = fs::read_to_string(path)?;
    parse_data_csv(&text, standardize)
}

pub fn parse_data_csv(text: &str, standardize: bool) -> Result<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0
            && record
                .iter()
                .any(|c| !is_missing(c) && parse_cell(c).is_none())
        {
            names = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(Error::RaggedRows {
                    row: line,
                    expected: w,
                    found: record.len(),
                })
            }
            None => width = Some(record.len()),
            _ => {}
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                return Err(Error::MissingValue { row: line, col: c + 1 });
            }
            row.push(parse_cell(cell).ok_or_else(|| Error::NonNumericCell {
                row: line,
                col: c + 1,
                value: cell.to_string(),
            })?);
        }
        rows.push(row);
    }
    let p = width.unwrap_or(0);
    let n = rows.len();
    let matrix = DMatrix::from_fn(n, p, |q, i| rows[q][i]);
    let raw = match names {
        Some(names) => DataMatrix::with_names(matrix, names)?,
        None => DataMatrix::new(matrix)?,
    };
    let (data, standardization) = if standardize {
        let (d, t) = raw.standardize()?;
        (d, Some(t))
    } else {
        (raw.clone(), None)
    };
    Ok(LoadedData {
        data,
        raw,
        standardization,
    })
}

/// Write a data matrix as CSV with a header of column names.
pub fn write_data_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(data.names())?;
    for q in 0..data.n() {
        w.write_record(data.row(q).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MixtureRecord {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    iteration: usize,
    chain: usize,
    edges: Vec<[usize; 2]>,
    coefficients: Vec<f64>,
    gamma: f64,
    gamma1: f64,
    noise: Vec<MixtureRecord>,
}

impl SampleRecord {
    fn from_sample(s: &Sample) -> Self {
        let edges: Vec<[usize; 2]> = s.graph.edges().map(|(src, t)| [t, src]).collect();
        let coefficients = edges.iter().map(|&[t, src]| s.coefficients[(t, src)]).collect();
        SampleRecord {
            iteration: s.iteration,
            chain: s.chain,
            edges,
            coefficients,
            gamma: s.gamma,
            gamma1: s.gamma1,
            noise: s
                .noise
                .per_node
                .iter()
                .map(|m| MixtureRecord {
                    weights: m.weights().to_vec(),
                    means: m.means().to_vec(),
                    variances: m.variances().to_vec(),
                })
                .collect(),
        }
    }

    fn into_sample(self, p: usize, line: usize) -> Result<Sample> {
        let bad = |reason: String| Error::MalformedRecord { line, reason };
        if self.edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("edge list is not strictly sorted by (target, source)".into()));
        }
        if self.coefficients.len() != self.edges.len() {
            return Err(bad(format!(
                "{} coefficients for {} edges",
                self.coefficients.len(),
                self.edges.len()
            )));
        }
        if self.noise.len() != p {
            return Err(bad(format!("{} noise mixtures for p = {p}", self.noise.len())));
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|&[t, s]| (s, t)).collect();
        let graph = Graph::from_edges(p, &pairs).map_err(|e| bad(e.to_string()))?;
        let mut coefficients = DMatrix::zeros(p, p);
        for (&[t, s], &b) in self.edges.iter().zip(&self.coefficients) {
            coefficients[(t, s)] = b;
        }
        let noise = self
            .noise
            .into_iter()
            .map(|m| GaussianMixture::new(m.weights, m.means, m.variances))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| bad(e.to_string()))?;
        Ok(Sample {
            iteration: self.iteration,
            chain: self.chain,
            graph,
            coefficients,
            gamma: self.gamma,
            gamma1: self.gamma1,
            noise: NoiseModel::new(noise),
        })
    }
}

/// Serialize a trace to its text form.
pub fn trace_to_string(trace: &Trace) -> String {
    let mut out = serde_json::to_string(&trace.meta).expect("trace header serializes");
    out.push('\n');
    for s in &trace.samples {
        out.push_str(
            &serde_json::to_string(&SampleRecord::from_sample(s)).expect("sample serializes"),
        );
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(trace_to_string(trace).as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    trace_from_str(&fs::read_to_string(path)?)
}

pub fn trace_from_str(text: &str) -> Result<Trace> {
    let mut lines = text.split_inclusive('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(Error::TruncatedRecord {
        line: 1,
        reason: "missing header".into(),
    })?;
    let header_value: serde_json::Value =
        serde_json::from_str(header.trim_end()).map_err(|e| Error::TruncatedRecord {
            line: 1,
            reason: e.to_string(),
        })?;
    let version = header_value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::MalformedRecord {
            line: 1,
            reason: "header lacks format_version".into(),
        })?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version as u32,
        });
    }
    let meta: TraceMeta =
        serde_json::from_value(header_value).map_err(|e| Error::MalformedRecord {
            line: 1,
            reason: e.to_string(),
        })?;
    let mut samples = Vec::new();
    for (line, raw) in lines {
        if !raw.ends_with('\n') {
            return Err(Error::TruncatedRecord {
                line,
                reason: "record is not newline-terminated".into(),
            });
        }
        let body = raw.trim_end();
        if body.is_empty() {
            continue;
        }
        let record: SampleRecord =
            serde_json::from_str(body).map_err(|e| Error::TruncatedRecord {
                line,
                reason: e.to_string(),
            })?;
        samples.push(record.into_sample(meta.p, line)?);
    }
    Ok(Trace { meta, samples })
}
