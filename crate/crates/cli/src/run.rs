//! Training runs: structure search, parameter tuning and the files they leave
//! behind.
//!
//! Layout of a run directory:
//!
//! ```text
//! run.json        configuration, hash, seed
//! report.csv      one row per repetition
//! summary.csv     Best / Mean / STD over repetitions
//! timing.csv      wall-clock seconds per repetition
//! rep-00/
//!   model.json
//!   gp_log.csv    per generation of every round
//!   de_log.csv    per iteration of every round
//!   pareto.csv    final population (multiobjective runs only)
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use hfit::data::normalize;
use hfit::de::{tune_tree, DeRecord};
use hfit::mogp::{evolve_structure_from, GenerationRecord, ObjectiveMode, ParetoArchive};
use hfit::FuzzyTree;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::model::{Model, Provenance};
use crate::report::{self, num, RepetitionRow, Stamp, Summary};

pub const PARETO_HEADER: [&str; 3] = ["rmse", "complexity", "rank"];

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_hash: String,
    pub seed: u64,
    pub mode: ObjectiveMode,
    pub repetitions: usize,
    /// With the output directory blanked so the file does not depend on it.
    pub config: RunConfig,
}

impl RunInfo {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("run.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))
    }
}

pub fn repetition_dir(run: &Path, rep: usize) -> PathBuf {
    run.join(format!("rep-{rep:02}"))
}

/// Everything produced by one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub row: RepetitionRow,
    pub model: Model,
    pub archive: ParetoArchive,
    pub gp_log: Vec<(usize, GenerationRecord)>,
    pub de_log: Vec<(usize, DeRecord)>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub repetitions: Vec<RepetitionResult>,
    pub summary: Summary,
}

impl RunOutcome {
    pub fn rows(&self) -> Vec<RepetitionRow> {
        self.repetitions.iter().map(|r| r.row.clone()).collect()
    }

    pub fn seconds(&self) -> Vec<f64> {
        self.repetitions.iter().map(|r| r.seconds).collect()
    }
}

/// Runs one repetition without touching the filesystem (file-based data
/// sources are read).
pub fn run_repetition(cfg: &RunConfig, rep: usize) -> Result<RepetitionResult> {
    Ok(run_repetition_with(cfg, rep, |_, _| true)?.expect("never abandoned"))
}

/// Like [`run_repetition`], but `proceed` sees each structure-phase result
/// and the tree picked from it before tuning; returning `false` abandons the
/// repetition and yields `None`.
pub fn run_repetition_with(
    cfg: &RunConfig,
    rep: usize,
    mut proceed: impl FnMut(&ParetoArchive, &FuzzyTree) -> bool,
) -> Result<Option<RepetitionResult>> {
    let start = Instant::now();
    let mut rng = cfg.repetition_rng(rep);
    let split = cfg.load_split(rep, &mut rng)?;
    let (train, scaler) = normalize(&split.train)?;
    let mogp = cfg.mogp_config(train.n_features());

    let mut seeds = Vec::new();
    let mut gp_log = Vec::new();
    let mut de_log = Vec::new();
    let mut last = None;
    for round in 0..cfg.rounds {
        let evo = evolve_structure_from(&train, &mogp, seeds, &mut rng)?;
        let best = evo.archive.pick_best()?.tree.clone();
        if !proceed(&evo.archive, &best) {
            return Ok(None);
        }
        let (tuned, outcome) = tune_tree(&best, &train, &cfg.de, &mut rng)?;
        gp_log.extend(evo.log.into_iter().map(|g| (round, g)));
        de_log.extend(outcome.history.into_iter().map(|d| (round, d)));
        seeds = vec![tuned.clone()];
        last = Some((tuned, evo.archive));
    }
    let (tree, archive) = last.expect("at least one round");

    let provenance = Provenance { config_hash: cfg.hash(), seed: cfg.seed, repetition: rep };
    let model = Model::new(tree, scaler, split.train.feature_names().to_vec(), provenance);
    let (train_m, _) = model.evaluate(&split.train)?;
    let test_m = match &split.test {
        Some(test) => Some(model.evaluate(test)?.0),
        None => None,
    };
    let features: Vec<String> = model.tree.selected_features().iter().map(|f| (f + 1).to_string()).collect();
    let finite = |v: f64| v.is_finite().then_some(v);
    let row = RepetitionRow {
        repetition: rep,
        train_rmse: train_m.rmse,
        train_r: finite(train_m.correlation),
        test_rmse: test_m.and_then(|m| finite(m.rmse)),
        test_r: test_m.and_then(|m| finite(m.correlation)),
        parameter_count: model.tree.parameter_count(),
        depth: model.tree.depth(),
        nodes: model.tree.node_count(),
        features: features.join(" "),
    };
    Ok(Some(RepetitionResult { row, model, archive, gp_log, de_log, seconds: start.elapsed().as_secs_f64() }))
}

fn write_repetition(dir: &Path, stamp: &Stamp, mode: ObjectiveMode, res: &RepetitionResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    res.model.save(&dir.join("model.json"))?;
    let gp: Vec<Vec<String>> = res
        .gp_log
        .iter()
        .map(|(round, g)| {
            vec![
                round.to_string(),
                g.generation.to_string(),
                num(Some(g.best_rmse)),
                g.best_complexity.to_string(),
                g.front_size.to_string(),
                num(Some(g.hypervolume)),
            ]
        })
        .collect();
    report::write_csv(
        &dir.join("gp_log.csv"),
        stamp,
        &["round", "generation", "best_rmse", "best_complexity", "front_size", "hypervolume"],
        &gp,
    )?;
    let de: Vec<Vec<String>> = res
        .de_log
        .iter()
        .map(|(round, d)| vec![round.to_string(), d.iteration.to_string(), num(Some(d.best_fitness)), d.stall.to_string()])
        .collect();
    report::write_csv(&dir.join("de_log.csv"), stamp, &["round", "iteration", "best_rmse", "stall"], &de)?;
    if mode == ObjectiveMode::Multi {
        write_pareto(&dir.join("pareto.csv"), stamp, &res.archive)?;
    }
    Ok(())
}

pub fn write_pareto(path: &Path, stamp: &Stamp, archive: &ParetoArchive) -> Result<()> {
    let rows: Vec<Vec<String>> = archive
        .export_rows()
        .into_iter()
        .map(|(e, c, r)| vec![num(Some(e)), c.to_string(), r.to_string()])
        .collect();
    report::write_csv(path, stamp, &PARETO_HEADER, &rows)
}

/// Trains every repetition, writes the run directory and returns the
/// results. `progress` receives one line per finished repetition.
pub fn train(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<RunOutcome> {
    cfg.check()?;
    let dir = cfg.output.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let stamp = Stamp { config_hash: cfg.hash(), seed: cfg.seed };
    let info = RunInfo {
        config_hash: stamp.config_hash.clone(),
        seed: cfg.seed,
        mode: cfg.mode,
        repetitions: cfg.repetitions,
        config: RunConfig { output: PathBuf::new(), ..cfg.clone() },
    };
    let info_path = dir.join("run.json");
    let mut text = serde_json::to_string_pretty(&info).expect("run info serializes");
    text.push('\n');
    std::fs::write(&info_path, text).map_err(|e| CliError::io(&info_path, e))?;

    let mut reps = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let mut res = run_repetition(cfg, rep)?;
        let start = Instant::now();
        write_repetition(&repetition_dir(&dir, rep), &stamp, cfg.mode, &res)?;
        res.seconds += start.elapsed().as_secs_f64();
        let r = &res.row;
        progress(&format!(
            "repetition {rep}: E_n {:.6}  E_t {}  c(w) {}  {:.1} s",
            r.train_rmse,
            r.test_rmse.map_or("-".into(), |v| format!("{v:.6}")),
            r.parameter_count,
            res.seconds
        ));
        reps.push(res);
    }
    let rows: Vec<RepetitionRow> = reps.iter().map(|r| r.row.clone()).collect();
    let summary = Summary::of(&rows);
    report::write_report(&dir.join("report.csv"), &stamp, &rows)?;
    report::write_summary(&dir.join("summary.csv"), &stamp, &summary)?;
    let seconds: Vec<f64> = reps.iter().map(|r| r.seconds).collect();
    report::write_timing(&dir.join("timing.csv"), &stamp, &seconds)?;
    Ok(RunOutcome { dir, repetitions: reps, summary })
}
