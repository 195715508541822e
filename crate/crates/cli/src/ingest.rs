//! CSV ingestion with header detection, validation and optional min-max rescaling.

use std::io::Read;
use std::path::Path;

use disctree::SampleSet;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Per-column affine map applied by `--rescale`: `x' = (x - min) / (max - min)`.
/// Constant columns are mapped to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rescale {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug)]
pub struct Ingested {
    pub samples: SampleSet,
    pub header: Option<Vec<String>>,
    pub rescale: Option<Rescale>,
}

pub fn ingest_csv(path: &Path, rescale: bool) -> CliResult<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    ingest_reader(file, rescale).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn ingest_reader<R: Read>(reader: R, rescale: bool) -> CliResult<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("unreadable CSV: {e}")))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        if idx == 0 && header.is_none() && parsed.iter().any(Option::is_none) {
            header = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::input(format!(
                "row {line}: expected {expected} columns, found {}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(expected);
        for (col, (field, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::input(format!(
                        "row {line}, column {}: '{field}' is not a finite number",
                        col + 1
                    )))
                }
            }
        }
        if !rescale {
            if let Some(col) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(CliError::input(format!(
                    "row {line}, column {}: {} lies outside [0, 1] (pass --rescale to map columns onto [0, 1])",
                    col + 1,
                    row[col]
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input("no data rows"));
    }
    if rows[0].is_empty() {
        return Err(CliError::input("rows have no columns"));
    }

    let rescale = rescale.then(|| min_max(&mut rows));
    Ok(Ingested { samples: SampleSet::new(rows)?, header, rescale })
}

fn min_max(rows: &mut [Vec<f64>]) -> Rescale {
    let d = rows[0].len();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in rows.iter() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    for row in rows.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let span = max[j] - min[j];
            *v = if span > 0.0 { ((*v - min[j]) / span).clamp(0.0, 1.0) } else { 0.5 };
        }
    }
    Rescale { min, max }
}
