//! File formats: parameter JSON, pair CSVs and run manifests.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mixture::LabeledPair;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.display().to_string(), source }
}

/// Parameters where every field may be missing; used to merge a JSON file
/// with command-line flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialParams {
    pub p: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub l1: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub b3: Option<f64>,
    pub l2: Option<f64>,
}

impl PartialParams {
    pub fn to_array(&self) -> [Option<f64>; 9] {
        [self.p, self.a1, self.a2, self.a3, self.l1, self.b1, self.b2, self.b3, self.l2]
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(&self, over: &PartialParams) -> PartialParams {
        let a = self.to_array();
        let b = over.to_array();
        let v: [Option<f64>; 9] = std::array::from_fn(|k| b[k].or(a[k]));
        let [p, a1, a2, a3, l1, b1, b2, b3, l2] = v;
        PartialParams { p, a1, a2, a3, l1, b1, b2, b3, l2 }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(file_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json { path: path.display().to_string(), message: e.to_string() })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path).map_err(file_err(path))?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| IoError::Json { path: path.display().to_string(), message: e.to_string() })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(file_err(path))
}

/// Read `(x1, x2)` pairs from CSV.
///
/// If the first record is not numeric it is a header and must name `x1` and
/// `x2` columns (other columns are ignored). Without a header the first two
/// fields are used.
pub fn read_pairs_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut cols = (0, 1);
    let mut out = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                let find = |name: &str| rec.iter().position(|f| f == name);
                cols = match (find("x1"), find("x2")) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(IoError::Parse { line, message: "header must contain x1 and x2 columns".into() }),
                };
                continue;
            }
        }
        let parse = |k: usize| rec.get(k).and_then(|f| f.parse::<f64>().ok());
        match (parse(cols.0), parse(cols.1)) {
            (Some(a), Some(b)) => out.push((a, b)),
            _ => return Err(IoError::Parse { line, message: "expected 2 numeric fields".into() }),
        }
    }
    Ok(out)
}

pub fn read_pairs_file(path: &Path) -> Result<Vec<(f64, f64)>, IoError> {
    read_pairs_csv(File::open(path).map_err(file_err(path))?)
}

/// Write CSV rows; every `f64` uses the shortest representation that
/// round-trips.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(file_err(path))?));
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(file_err(path))
}

pub fn write_sample_csv(path: &Path, draws: &[LabeledPair]) -> Result<(), IoError> {
    write_csv(
        path,
        &["x1", "x2", "region", "label"],
        draws.iter().map(|d| {
            vec![d.pair.x1.to_string(), d.pair.x2.to_string(), d.pair.region.as_str().to_string(), d.label.to_string()]
        }),
    )
}

/// Sidecar describing how an output was produced. `command` holds the fully
/// resolved invocation and is enough to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}
