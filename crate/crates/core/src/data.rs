//! Reading observations from text files.
//!
//! Accepted layouts: one number per line (a single-column CSV is the same
//! thing), or a two-column CSV for two-sample models. Blank lines and lines
//! starting with `#` are skipped; a non-numeric first row is taken as a
//! header.

use std::fmt;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::Data;

/// Where an observation came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub source: String,
    pub line: u64,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.line)
    }
}

/// Observations together with their origins, in the flattened order used
/// by [`Error::Support`] indices (first sample, then second).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: Data,
    pub origins: Vec<Origin>,
}

impl Dataset {
    pub fn origin(&self, index: usize) -> Option<&Origin> {
        self.origins.get(index)
    }

    /// Rewrites a support error so that it names the file and line.
    pub fn locate(&self, err: Error) -> Error {
        match err {
            Error::Support { index, value, reason } => match self.origin(index) {
                Some(o) => Error::InvalidArgument(format!("{o}: value {value} is outside the support: {reason}")),
                None => Error::Support { index, value, reason },
            },
            other => other,
        }
    }
}

type Column = Vec<(f64, Origin)>;

fn parse_columns(reader: impl Read, source: &str) -> Result<Vec<Column>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut cols: Vec<Column> = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{source}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<std::result::Result<f64, _>>> =
            rec.iter().map(|f| (!f.is_empty()).then(|| f.parse::<f64>())).collect();
        if first && parsed.iter().all(|p| matches!(p, Some(Err(_)) | None)) {
            first = false;
            continue;
        }
        first = false;
        if parsed.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "{source}:{line}: expected one or two columns, found {}",
                parsed.len()
            )));
        }
        if cols.len() < parsed.len() {
            cols.resize_with(parsed.len(), Vec::new);
        }
        for (c, p) in parsed.into_iter().enumerate() {
            match p {
                None => {}
                Some(Ok(v)) if v.is_finite() => cols[c].push((v, Origin { source: source.to_string(), line })),
                Some(_) => {
                    return Err(Error::InvalidArgument(format!(
                        "{source}:{line}: '{}' is not a finite number",
                        rec.get(c).unwrap_or_default()
                    )))
                }
            }
        }
    }
    Ok(cols)
}

fn dataset(cols: Vec<Column>) -> Result<Dataset> {
    let mut origins = Vec::new();
    let mut values = Vec::new();
    for col in cols {
        let (v, o): (Vec<f64>, Vec<Origin>) = col.into_iter().unzip();
        values.push(v);
        origins.extend(o);
    }
    let data = match values.len() {
        1 => Data::One(values.pop().unwrap()),
        2 => {
            let y = values.pop().unwrap();
            Data::Two(values.pop().unwrap(), y)
        }
        _ => return Err(Error::InvalidArgument("no observations found".into())),
    };
    if data.is_empty() {
        return Err(Error::InvalidArgument("no observations found".into()));
    }
    Ok(Dataset { data, origins })
}

/// Parses text already in memory; `source` labels error messages.
pub fn parse_str(text: &str, source: &str) -> Result<Dataset> {
    dataset(parse_columns(text.as_bytes(), source)?)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

/// One file: a single sample, or two samples side by side.
pub fn read_file(path: &Path) -> Result<Dataset> {
    dataset(parse_columns(open(path)?, &path.display().to_string())?)
}

/// Two files holding one sample each.
pub fn read_two_files(first: &Path, second: &Path) -> Result<Dataset> {
    let mut cols = Vec::new();
    for p in [first, second] {
        let mut c = parse_columns(open(p)?, &p.display().to_string())?;
        if c.len() != 1 {
            return Err(Error::InvalidArgument(format!("{} must hold a single column", p.display())));
        }
        cols.push(c.pop().unwrap());
    }
    dataset(cols)
}
