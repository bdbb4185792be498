use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use super::{Frequency, SeriesDataset, SplitRatio};
use crate::error::{Error, Result};

/// How to interpret a series CSV.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub name: String,
    pub frequency: Frequency,
    pub split_ratio: SplitRatio,
    /// Drop every variable that has at least one missing cell.
    pub drop_missing: bool,
}

const DATETIME_FORMATS: &[&str] = &["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S"];
const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d"];

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    DATETIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            DATE_FORMATS
                .iter()
                .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | "null" | "NULL")
}

/// Loads a series whose first column holds timestamps and every other
/// column one variable. Rows are numbered from 1 for the header, so the
/// first data row is row 2 in error messages; columns are 1-based.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SeriesDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.len() < 2 {
        return Err(Error::Load {
            path: path.to_path_buf(),
            row: 1,
            column: headers.len(),
            message: "need a timestamp column and at least one variable column".into(),
        });
    }
    let n = headers.len() - 1;

    let mut timestamps = Vec::new();
    let mut cells: Vec<Option<f32>> = Vec::new();
    let mut missing = vec![false; n];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let load_err = |column: usize, message: String| Error::Load {
            path: path.to_path_buf(),
            row,
            column,
            message,
        };
        if record.len() != headers.len() {
            return Err(load_err(
                record.len(),
                format!("expected {} fields", headers.len()),
            ));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| load_err(1, format!("unparseable timestamp '{}'", &record[0])))?;
        timestamps.push(ts);
        for (j, cell) in record.iter().skip(1).enumerate() {
            if is_missing(cell) {
                if !schema.drop_missing {
                    return Err(load_err(j + 2, "missing value".into()));
                }
                missing[j] = true;
                cells.push(None);
                continue;
            }
            let v: f32 = cell
                .trim()
                .parse()
                .map_err(|_| load_err(j + 2, format!("unparseable number '{cell}'")))?;
            if !v.is_finite() {
                return Err(load_err(j + 2, format!("non-finite number '{cell}'")));
            }
            cells.push(Some(v));
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&j| !missing[j]).collect();
    let columns = keep.iter().map(|&j| headers[j + 1].clone()).collect();
    let values = cells
        .chunks(n)
        .flat_map(|row| {
            keep.iter()
                .map(move |&j| row[j].expect("kept columns have no gaps"))
        })
        .collect();

    SeriesDataset::new(
        schema.name.clone(),
        columns,
        values,
        timestamps,
        schema.frequency,
        schema.split_ratio,
    )
}

/// Writes a dataset in the same layout `load_csv` reads (`date` first).
pub fn write_csv(ds: &SeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date".to_string()];
    header.extend(ds.columns.iter().cloned());
    w.write_record(&header)?;
    for (i, ts) in ds.timestamps.iter().enumerate() {
        let mut rec = vec![ts.format("%Y-%m-%d %H:%M:%S").to_string()];
        rec.extend(ds.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
