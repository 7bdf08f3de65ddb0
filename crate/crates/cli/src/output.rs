//! Versioned CSV output and the JSON run summary.
//!
//! Every CSV starts with a comment line `# <schema> v<version>` followed by a
//! header row. Readers should skip lines starting with `#` and refuse files
//! whose schema line they do not recognize.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const RUN_SCHEMA: &str = "pimd-run v1";
pub const ERROR_TABLE_SCHEMA: &str = "pimd-error-table v1";
pub const WEAK_ERROR_SCHEMA: &str = "pimd-weak-error v1";
pub const ENTROPY_SCHEMA: &str = "pimd-relative-entropy v1";
pub const STRONG_ERROR_SCHEMA: &str = "pimd-strong-error v1";
pub const SPECTRUM_SCHEMA: &str = "pimd-spectrum v1";
pub const REJECTION_SCHEMA: &str = "pimd-rejection-table v1";
pub const SUMMARY_SCHEMA: &str = "pimd-summary v1";

/// CSV writer whose first line is the schema comment.
pub fn versioned_writer<W: Write>(mut w: W, schema: &str) -> Result<csv::Writer<W>, CliError> {
    writeln!(w, "# {schema}")?;
    Ok(csv::Writer::from_writer(w))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `rows` with their serde field names as the header.
pub fn write_rows<W: Write, T: Serialize>(w: W, schema: &str, rows: &[T]) -> Result<(), CliError> {
    let mut csv = versioned_writer(w, schema)?;
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_rows_to(path: &Path, schema: &str, rows: &[impl Serialize]) -> Result<(), CliError> {
    write_rows(create(path)?, schema, rows)
}

/// JSON summary of one time-average run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub preset: String,
    pub seed: u64,
    pub method: String,
    pub batch_size: Option<usize>,
    pub dt: f64,
    pub samples: usize,
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
    pub ac_time: Option<f64>,
    pub eff_variance: Option<f64>,
    pub rejection_rate: Option<f64>,
    /// Force pair evaluations per step, averaged over the run.
    pub pair_evals_per_step: f64,
    /// Median wall time per step; present only with `run.timing = true`.
    pub wall_ms_per_step: Option<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
