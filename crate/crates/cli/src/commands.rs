//! Post-training commands: scoring a saved model, exporting fronts and
//! describing trees.

use std::path::{Path, PathBuf};

use hfit::data::{load_csv, ColumnRef, Dataset, Metrics};
use hfit::mogp::ObjectiveMode;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::model::{self, Model};
use crate::report::{self, num, Stamp};
use crate::run::{repetition_dir, RunInfo, PARETO_HEADER};

/// Rows to score.
#[derive(Debug, Clone)]
pub enum EvalSource {
    /// The split a configuration produces for one repetition.
    Config { config: RunConfig, repetition: usize, part: Part },
    Csv { path: PathBuf, inputs: Vec<ColumnRef>, target: ColumnRef, header: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Test,
}

impl std::str::FromStr for Part {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Part::Train),
            "test" => Ok(Part::Test),
            _ => Err(format!("expected 'train' or 'test', got '{s}'")),
        }
    }
}

pub fn load_source(source: &EvalSource) -> Result<Dataset> {
    match source {
        EvalSource::Config { config, repetition, part } => {
            config.check()?;
            let mut rng = config.repetition_rng(*repetition);
            let split = config.load_split(*repetition, &mut rng)?;
            match part {
                Part::Train => Ok(split.train),
                Part::Test => split
                    .test
                    .ok_or_else(|| CliError::Report("this configuration has no test rows".into())),
            }
        }
        EvalSource::Csv { path, inputs, target, header } => Ok(load_csv(path, inputs, target, *header)?),
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
}

/// Scores `model` on `source`; with `out`, writes `index,target,prediction`
/// rows there.
pub fn evaluate(model_path: &Path, source: &EvalSource, out: Option<&Path>) -> Result<Evaluation> {
    let model = Model::load(model_path)?;
    let data = load_source(source)?;
    let (metrics, predictions) = model.evaluate(&data)?;
    if let Some(out) = out {
        let stamp = Stamp { config_hash: model.provenance.config_hash.clone(), seed: model.provenance.seed };
        let rows: Vec<Vec<String>> = data
            .targets()
            .iter()
            .zip(&predictions)
            .enumerate()
            .map(|(i, (t, p))| vec![i.to_string(), num(Some(*t)), num(Some(*p))])
            .collect();
        report::write_csv(out, &stamp, &["index", "target", "prediction"], &rows)?;
    }
    Ok(Evaluation { metrics, targets: data.targets().to_vec(), predictions })
}

/// One exported front member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontRow {
    pub rmse: f64,
    pub complexity: usize,
    pub rank: usize,
}

pub fn read_pareto(path: &Path) -> Result<Vec<FrontRow>> {
    let (header, rows) = report::read_csv(path)?;
    if header != PARETO_HEADER {
        return Err(CliError::Report(format!("{}: unexpected header {header:?}", path.display())));
    }
    rows.iter()
        .map(|r| {
            let bad = || CliError::Report(format!("{}: malformed row {r:?}", path.display()));
            if r.len() != 3 {
                return Err(bad());
            }
            let rmse = if r[0].is_empty() { f64::INFINITY } else { r[0].parse().map_err(|_| bad())? };
            Ok(FrontRow { rmse, complexity: r[1].parse().map_err(|_| bad())?, rank: r[2].parse().map_err(|_| bad())? })
        })
        .collect()
}

/// Final population of one repetition, ordered by rank then RMSE. Copies it
/// to `out` when given.
pub fn export_pareto(run: &Path, repetition: usize, out: Option<&Path>) -> Result<Vec<FrontRow>> {
    let info = RunInfo::load(run)?;
    if info.mode != ObjectiveMode::Multi {
        return Err(CliError::NoFront(format!(
            "{} is a single-objective run; it has no Pareto front",
            run.display()
        )));
    }
    if repetition >= info.repetitions {
        return Err(CliError::Report(format!(
            "repetition {repetition} out of range (run has {})",
            info.repetitions
        )));
    }
    let path = repetition_dir(run, repetition).join("pareto.csv");
    let rows = read_pareto(&path)?;
    if let Some(out) = out {
        let stamp = Stamp { config_hash: info.config_hash, seed: info.seed };
        let recs: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![num(Some(r.rmse)), r.complexity.to_string(), r.rank.to_string()])
            .collect();
        report::write_csv(out, &stamp, &PARETO_HEADER, &recs)?;
    }
    Ok(rows)
}

pub fn describe(model_path: &Path) -> Result<String> {
    Ok(model::describe(&Model::load(model_path)?))
}
