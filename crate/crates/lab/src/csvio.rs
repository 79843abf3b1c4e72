//! CSV ingestion and export of labeled spectra.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use qklab_core::dataio::SpectralDataset;

use crate::error::{LabError, LabResult};

/// Reads a headered CSV whose `label_column` holds non-negative integer
/// class ids and whose other columns are finite decimals.
pub fn load_csv(path: &Path, label_column: &str) -> LabResult<SpectralDataset> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |row: usize, column: &str, message: String| LabError::Csv {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let headers = reader.headers().map_err(|e| csv_err(1, "", e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| csv_err(1, label_column, "label column not found in header".into()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if names.is_empty() {
        return Err(csv_err(1, "", "no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // Header is line 1.
        let line = r + 2;
        let record = record.map_err(|e| csv_err(line, "", e.to_string()))?;
        if record.len() != headers.len() {
            return Err(csv_err(
                line,
                "",
                format!("ragged row: {} cells, header has {}", record.len(), headers.len()),
            ));
        }
        for (i, cell) in record.iter().enumerate() {
            let column = &headers[i];
            if i == label_idx {
                let label = cell
                    .parse::<u32>()
                    .map_err(|_| csv_err(line, column, format!("label `{cell}` is not a non-negative integer")))?;
                labels.push(label);
            } else {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_err(line, column, format!("`{cell}` is not a finite number")))?;
                values.push(v);
            }
        }
    }
    let provenance = format!("csv:{}", path.display());
    Ok(SpectralDataset::from_flat(
        values,
        names.len(),
        labels,
        Some(names),
        provenance,
    )?)
}

/// Writes `ds` with a trailing `label` column; floats use shortest round-trip form.
pub fn write_csv(path: &Path, ds: &SpectralDataset) -> LabResult<()> {
    let mut out = Vec::new();
    let names: Vec<String> = match ds.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..ds.n_features()).map(|i| format!("f{i}")).collect(),
    };
    writeln!(out, "{},label", names.join(",")).expect("write to vec");
    for (row, label) in ds.rows().zip(ds.labels()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{},{label}", cells.join(",")).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| LabError::io(path, e))
}
