//! CSV plumbing shared by every reader and writer: header checks, numeric
//! parsing with row context, fixed-precision number formatting and
//! temp-then-rename writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: row {row}: {message}", path.display())]
    MalformedCsv { path: PathBuf, row: usize, message: String },
    #[error("{}: row {row}: sample interval {interval_s} s deviates from {expected_s} s", path.display())]
    NonuniformSampling {
        path: PathBuf,
        row: usize,
        interval_s: f64,
        expected_s: f64,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl IngestError {
    pub(crate) fn malformed(path: &Path, row: usize, message: impl Into<String>) -> Self {
        IngestError::MalformedCsv {
            path: path.to_path_buf(),
            row,
            message: message.into(),
        }
    }
}

/// Parsed CSV: header names plus data rows. Row numbers in errors are
/// 1-based file lines, so the first data row is row 2.
pub(crate) struct CsvTable {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, IngestError> {
        if !path.is_file() {
            return Err(IngestError::MissingFile(path.to_path_buf()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| IngestError::malformed(path, 1, e.to_string()))?;
        let header = reader
            .headers()
            .map_err(|e| IngestError::malformed(path, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| IngestError::malformed(path, i + 2, e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    /// Fails unless the header starts with `required`; returns the number of
    /// optional trailing columns from `optional` that are present.
    pub fn expect_header(&self, required: &[&str], optional: &[&str]) -> Result<usize, IngestError> {
        let have: Vec<&str> = self.header.iter().map(String::as_str).collect();
        let n_opt = have.len().saturating_sub(required.len());
        let ok = have.len() >= required.len()
            && have[..required.len()] == *required
            && n_opt <= optional.len()
            && have[required.len()..] == optional[..n_opt];
        if !ok {
            let mut want = required.to_vec();
            want.extend_from_slice(optional);
            return Err(IngestError::malformed(
                &self.path,
                1,
                format!("expected header `{}`, found `{}`", want.join(","), have.join(",")),
            ));
        }
        Ok(n_opt)
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64, IngestError> {
        let cell = self.cell(row, col)?;
        cell.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                IngestError::malformed(&self.path, row + 2, format!("column {}: `{cell}` is not a finite number", self.header[col]))
            })
    }

    /// Empty cells read as `None`.
    pub fn opt_f64_at(&self, row: usize, col: usize) -> Result<Option<f64>, IngestError> {
        if self.cell(row, col)?.is_empty() {
            Ok(None)
        } else {
            self.f64_at(row, col).map(Some)
        }
    }

    pub fn str_at(&self, row: usize, col: usize) -> Result<&str, IngestError> {
        self.cell(row, col)
    }

    pub fn cell(&self, row: usize, col: usize) -> Result<&str, IngestError> {
        self.rows[row]
            .get(col)
            .map(String::as_str)
            .ok_or_else(|| IngestError::malformed(&self.path, row + 2, format!("missing column {}", col + 1)))
    }
}

/// Decimal rendering with exactly nine significant digits, never in
/// exponent notation; `-0` prints as zero.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000000".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let body = if exp >= 8 {
        format!("{digits}{}", "0".repeat((exp - 8) as usize))
    } else if exp >= 0 {
        let split = (exp + 1) as usize;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{body}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Writes via a sibling temp file and a rename so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents.as_bytes()).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// Builds CSV text line by line; cells are written verbatim, so callers
/// only pass labels without separators.
#[derive(Debug, Default)]
pub struct CsvText(String);

impl CsvText {
    pub fn with_header(columns: &[&str]) -> Self {
        let mut t = CsvText(String::new());
        t.row(columns.iter().map(|c| c.to_string()));
        t
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let mut first = true;
        for c in cells {
            if !first {
                self.0.push(',');
            }
            first = false;
            self.0.push_str(&c);
        }
        self.0.push('\n');
    }

    pub fn into_string(self) -> String {
        self.0
    }
}
