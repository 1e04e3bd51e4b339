//! CSV ingestion and emission. Two numeric columns x,y; one optional header
//! row, detected by failing to parse; unsorted rows are fine because the
//! dataset constructor sorts.

use std::path::Path;

use crate::commands::Failure;

/// Raw bytes plus parsed columns. The bytes feed the input digest so the
/// report pins the exact file it was computed from.
pub struct LoadedCsv {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bytes: Vec<u8>,
}

pub fn read_xy(path: &Path) -> Result<LoadedCsv, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record =
            record.map_err(|e| Failure::Invalid(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(Failure::Invalid(format!(
                "{}: row {row}: expected 2 columns, found {}",
                path.display(),
                record.len()
            )));
        }
        let parsed = (
            record[0].parse::<f64>(),
            record[1].parse::<f64>(),
        );
        match parsed {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if row == 1 => continue, // header row
            _ => {
                return Err(Failure::Invalid(format!(
                    "{}: row {row}: non-numeric value in \"{},{}\"",
                    path.display(),
                    &record[0],
                    &record[1]
                )));
            }
        }
    }
    Ok(LoadedCsv { xs, ys, bytes })
}

pub fn write_xy(path: &Path, header: (&str, &str), xs: &[f64], ys: &[f64]) -> Result<(), Failure> {
    let mut out = String::with_capacity(16 * xs.len() + 8);
    out.push_str(header.0);
    out.push(',');
    out.push_str(header.1);
    out.push('\n');
    for (x, y) in xs.iter().zip(ys) {
        out.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}
