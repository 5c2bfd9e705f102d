//! Comma-delimited run outputs and their readers.
//!
//! Every file starts with a `# hfit config_hash=... seed=...` line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn line(&self) -> String {
        format!("# hfit config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

/// Writes a header row and records below the provenance line.
pub fn write_csv(path: &Path, stamp: &Stamp, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = stamp.line().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Header and records of a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

/// Shortest representation that parses back to the same value; empty for
/// missing or undefined values.
pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => String::new(),
    }
}

fn parse_num(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| CliError::Report(format!("'{s}' is not a number")))
}

/// One repetition of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRow {
    pub repetition: usize,
    pub train_rmse: f64,
    pub train_r: Option<f64>,
    pub test_rmse: Option<f64>,
    pub test_r: Option<f64>,
    pub parameter_count: usize,
    pub depth: usize,
    pub nodes: usize,
    /// One-based, space separated.
    pub features: String,
}

pub const REPORT_HEADER: [&str; 9] = ["repetition", "E_n", "r_n", "E_t", "r_t", "c_w", "depth", "nodes", "features"];
pub const SUMMARY_HEADER: [&str; 6] = ["statistic", "E_n", "r_n", "E_t", "r_t", "c_w"];

impl RepetitionRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.repetition.to_string(),
            num(Some(self.train_rmse)),
            num(self.train_r),
            num(self.test_rmse),
            num(self.test_r),
            self.parameter_count.to_string(),
            self.depth.to_string(),
            self.nodes.to_string(),
            self.features.clone(),
        ]
    }

    fn parse(rec: &[String]) -> Result<Self> {
        if rec.len() != REPORT_HEADER.len() {
            return Err(CliError::Report(format!("expected {} fields, found {}", REPORT_HEADER.len(), rec.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| CliError::Report(format!("'{s}' is not an integer")));
        Ok(Self {
            repetition: int(&rec[0])?,
            train_rmse: parse_num(&rec[1])?.ok_or_else(|| CliError::Report("missing E_n".into()))?,
            train_r: parse_num(&rec[2])?,
            test_rmse: parse_num(&rec[3])?,
            test_r: parse_num(&rec[4])?,
            parameter_count: int(&rec[5])?,
            depth: int(&rec[6])?,
            nodes: int(&rec[7])?,
            features: rec[8].clone(),
        })
    }
}

/// Best, mean and sample standard deviation of a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub best: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    /// `lower_is_better` picks min or max for `best`. Missing values are
    /// skipped; a column with none yields all `None`.
    pub fn of(values: impl IntoIterator<Item = Option<f64>>, lower_is_better: bool) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self { best: None, mean: None, std: None };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let best = if lower_is_better {
            v.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        Self { best: Some(best), mean: Some(mean), std: Some(std) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub train_rmse: Stat,
    pub train_r: Stat,
    pub test_rmse: Stat,
    pub test_r: Stat,
    pub parameter_count: Stat,
}

impl Summary {
    pub fn of(rows: &[RepetitionRow]) -> Self {
        Self {
            train_rmse: Stat::of(rows.iter().map(|r| Some(r.train_rmse)), true),
            train_r: Stat::of(rows.iter().map(|r| r.train_r), false),
            test_rmse: Stat::of(rows.iter().map(|r| r.test_rmse), true),
            test_r: Stat::of(rows.iter().map(|r| r.test_r), false),
            parameter_count: Stat::of(rows.iter().map(|r| Some(r.parameter_count as f64)), true),
        }
    }

    fn columns(&self) -> [Stat; 5] {
        [self.train_rmse, self.train_r, self.test_rmse, self.test_r, self.parameter_count]
    }

    fn records(&self) -> Vec<Vec<String>> {
        let cols = self.columns();
        let pick: [(&str, fn(&Stat) -> Option<f64>); 3] =
            [("Best", |s| s.best), ("Mean", |s| s.mean), ("STD", |s| s.std)];
        pick.iter()
            .map(|(name, f)| {
                let mut rec = vec![name.to_string()];
                rec.extend(cols.iter().map(|s| num(f(s))));
                rec
            })
            .collect()
    }

    fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let find = |name: &str| {
            rows.iter()
                .find(|r| r.first().map(String::as_str) == Some(name))
                .ok_or_else(|| CliError::Report(format!("summary has no {name} row")))
        };
        let (best, mean, std) = (find("Best")?, find("Mean")?, find("STD")?);
        let mut stats = Vec::new();
        for c in 1..SUMMARY_HEADER.len() {
            let get = |r: &Vec<String>| -> Result<Option<f64>> {
                parse_num(r.get(c).map(String::as_str).unwrap_or(""))
            };
            stats.push(Stat { best: get(best)?, mean: get(mean)?, std: get(std)? });
        }
        Ok(Self {
            train_rmse: stats[0],
            train_r: stats[1],
            test_rmse: stats[2],
            test_r: stats[3],
            parameter_count: stats[4],
        })
    }
}

pub fn write_report(path: &Path, stamp: &Stamp, rows: &[RepetitionRow]) -> Result<()> {
    let recs: Vec<Vec<String>> = rows.iter().map(RepetitionRow::record).collect();
    write_csv(path, stamp, &REPORT_HEADER, &recs)
}

pub fn read_report(path: &Path) -> Result<Vec<RepetitionRow>> {
    let (header, rows) = read_csv(path)?;
    if header != REPORT_HEADER {
        return Err(CliError::Report(format!("{}: unexpected header {header:?}", path.display())));
    }
    rows.iter().map(|r| RepetitionRow::parse(r)).collect()
}

pub fn write_summary(path: &Path, stamp: &Stamp, summary: &Summary) -> Result<()> {
    write_csv(path, stamp, &SUMMARY_HEADER, &summary.records())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let (header, rows) = read_csv(path)?;
    if header != SUMMARY_HEADER {
        return Err(CliError::Report(format!("{}: unexpected header {header:?}", path.display())));
    }
    Summary::parse(&rows)
}

/// Wall-clock seconds per repetition followed by Best/Mean/STD rows.
pub fn write_timing(path: &Path, stamp: &Stamp, seconds: &[f64]) -> Result<()> {
    let mut recs: Vec<Vec<String>> =
        seconds.iter().enumerate().map(|(i, s)| vec![i.to_string(), num(Some(*s))]).collect();
    let st = Stat::of(seconds.iter().map(|s| Some(*s)), true);
    recs.push(vec!["Best".into(), num(st.best)]);
    recs.push(vec!["Mean".into(), num(st.mean)]);
    recs.push(vec!["STD".into(), num(st.std)]);
    write_csv(path, stamp, &["repetition", "seconds"], &recs)
}

/// Table-style text: one block per metric with Best/Mean/STD lines.
pub fn render_summary(summary: &Summary, seconds: &[f64]) -> String {
    let time = Stat::of(seconds.iter().map(|s| Some(*s)), true);
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let mut out = String::new();
    for (name, s) in [
        ("E_n", summary.train_rmse),
        ("r_n", summary.train_r),
        ("E_t", summary.test_rmse),
        ("r_t", summary.test_r),
        ("c(w)", summary.parameter_count),
        ("time (s)", time),
    ] {
        out.push_str(&format!(
            "{name:<9} Best {:>10}  Mean {:>10}  STD {:>10}\n",
            fmt(s.best),
            fmt(s.mean),
            fmt(s.std)
        ));
    }
    out
}
