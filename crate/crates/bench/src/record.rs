//! Run records and their CSV form.
//!
//! The file starts with a `# doma-bench runs v<N>` comment line followed by a
//! header row. Wall time is the last column so that every other byte of a
//! file is reproducible from the plan and seeds.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::plan::Mode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub plan: String,
    pub trial: usize,
    pub seed: u64,
    pub ues_per_ap: usize,
    pub total_ues: usize,
    pub capacity: usize,
    pub mode: Mode,
    pub omega: f64,
    pub status: String,
    pub se_bps_hz: f64,
    pub sr_bps: f64,
    pub sp_w: f64,
    pub cp_w: f64,
    pub ee_bit_per_j: f64,
    pub lambda: f64,
    /// Outer polyblock iterations over all stages.
    pub iterations: usize,
    pub work: u64,
    pub utopia_se: f64,
    pub utopia_sp: f64,
    pub utopia_se_method: String,
    pub utopia_sp_method: String,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn is_solved(&self) -> bool {
        self.status != "infeasible" && self.se_bps_hz.is_finite()
    }

    /// Sort key `(seed, sweep point, mode, omega)`.
    fn key(&self) -> (u64, usize, usize, f64) {
        let mode = Mode::ALL
            .iter()
            .position(|m| *m == self.mode)
            .unwrap_or(usize::MAX);
        (self.seed, self.ues_per_ap, mode, self.omega)
    }
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        let (ka, kb) = (a.key(), b.key());
        (ka.0, ka.1, ka.2)
            .cmp(&(kb.0, kb.1, kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
}

fn header_line() -> String {
    format!("# doma-bench runs v{SCHEMA_VERSION}")
}

pub fn to_csv_bytes(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "{}", header_line())?;
    let mut w = csv::Writer::from_writer(&mut out);
    if records.is_empty() {
        w.write_record(column_names())?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    Ok(out)
}

/// Writes `records` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&to_csv_bytes(records)?)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| BenchError::Io(e.error))?;
    Ok(())
}

pub fn column_names() -> Vec<&'static str> {
    vec![
        "plan",
        "trial",
        "seed",
        "ues_per_ap",
        "total_ues",
        "capacity",
        "mode",
        "omega",
        "status",
        "se_bps_hz",
        "sr_bps",
        "sp_w",
        "cp_w",
        "ee_bit_per_j",
        "lambda",
        "iterations",
        "work",
        "utopia_se",
        "utopia_sp",
        "utopia_se_method",
        "utopia_sp_method",
        "wall_time_s",
    ]
}

/// Reads the header comment and returns the schema version it declares.
fn schema_version(path: &Path) -> Result<u32> {
    let mut first = String::new();
    BufReader::new(std::fs::File::open(path)?).read_line(&mut first)?;
    first
        .trim()
        .strip_prefix("# doma-bench runs v")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| {
            BenchError::Schema(format!(
                "{} lacks the '# doma-bench runs v<N>' header",
                path.display()
            ))
        })
}

/// Reads a CSV written by [`write_csv`], reporting the first required
/// column that is missing.
pub fn read_csv(path: &Path, required: &[&str]) -> Result<Vec<RunRecord>> {
    let version = schema_version(path)?;
    if version != SCHEMA_VERSION {
        return Err(BenchError::Schema(format!(
            "unsupported schema version {version}"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(BenchError::MissingColumn(col.to_string()));
        }
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
