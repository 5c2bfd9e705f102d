use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};

/// Column selector: zero-based position or header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => write!(f, "'{n}'"),
        }
    }
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        })
    }
}

impl ColumnRef {
    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<usize> {
        let idx = match self {
            ColumnRef::Index(i) => Some(*i),
            ColumnRef::Name(n) => header.and_then(|h| h.iter().position(|c| c == n)),
        };
        match idx {
            Some(i) if i < width => Ok(i),
            _ => Err(DataError::UnknownColumn(self.to_string())),
        }
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-separated numeric table.
///
/// `inputs` empty selects every column except the target. Reported line
/// numbers are 1-based and count the header line.
pub fn load_csv(
    path: impl AsRef<Path>,
    inputs: &[ColumnRef],
    target: &ColumnRef,
    has_header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::MissingFile(display.clone()),
        _ => DataError::Io { path: display.clone(), source: e },
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Option<Vec<String>> = if has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut columns: Option<(Vec<usize>, usize)> = None;
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(DataError::Ragged { line, expected: w, found: record.len() });
        }
        let (input_idx, target_idx) = match &columns {
            Some(c) => c,
            None => {
                let t = target.resolve(header.as_deref(), w)?;
                let ins = if inputs.is_empty() {
                    (0..w).filter(|&i| i != t).collect()
                } else {
                    inputs
                        .iter()
                        .map(|c| c.resolve(header.as_deref(), w))
                        .collect::<Result<Vec<_>>>()?
                };
                columns.insert((ins, t))
            }
        };
        let t = parse_cell(&record[*target_idx])
            .ok_or_else(|| DataError::NonNumericTarget { line, value: record[*target_idx].to_string() })?;
        let row = input_idx
            .iter()
            .map(|&i| {
                parse_cell(&record[i]).ok_or_else(|| DataError::NonNumeric {
                    line,
                    column: i,
                    value: record[i].to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        targets.push(t);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let (input_idx, _) = columns.expect("at least one row was read");
    let names = match &header {
        Some(h) => input_idx.iter().map(|&i| h[i].clone()).collect(),
        None => input_idx.iter().map(|&i| format!("c{i}")).collect(),
    };
    Dataset::new(rows, targets, names)
}
