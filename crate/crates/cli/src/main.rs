use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hfit::data::{ColumnRef, SplitScheme};
use hfit::mogp::ObjectiveMode;
use hfit::FisKind;
use hfit_cli::commands::{self, EvalSource, Part};
use hfit_cli::config::{DataSpec, RunConfig};
use hfit_cli::report::render_summary;
use hfit_cli::{model, run, CliError};

#[derive(Parser)]
#[command(name = "hfit", version, about = "Hierarchical fuzzy inference trees: evolve, tune, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve and tune trees, writing models and reports to the output directory.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Print the final population of a multiobjective run.
    ExportPareto(ExportArgs),
    /// Print the structure of a saved model.
    Describe {
        model: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// TOML configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// type1 or type2
    #[arg(long)]
    fis_kind: Option<FisKind>,
    /// single or multi
    #[arg(long)]
    mode: Option<ObjectiveMode>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    gp_pop: Option<usize>,
    #[arg(long)]
    crossover_prob: Option<f64>,
    #[arg(long)]
    mutation_prob: Option<f64>,
    #[arg(long)]
    mating_pool: Option<usize>,
    #[arg(long)]
    tournament_size: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_inputs: Option<usize>,
    #[arg(long)]
    de_iters: Option<usize>,
    #[arg(long)]
    de_pop: Option<usize>,
    #[arg(long)]
    de_f: Option<f64>,
    #[arg(long)]
    de_cr: Option<f64>,
    #[arg(long)]
    stall_window: Option<usize>,
    /// Built-in data: plant or mackey-glass
    #[arg(long, conflicts_with_all = ["csv", "box_jenkins"])]
    dataset: Option<String>,
    /// Noise standard deviation for mackey-glass
    #[arg(long, requires = "dataset")]
    noise: Option<f64>,
    /// Gas furnace file with u and y columns
    #[arg(long, conflicts_with = "csv")]
    box_jenkins: Option<PathBuf>,
    #[arg(long, requires = "target")]
    csv: Option<PathBuf>,
    /// Input columns (names or zero-based indices), comma separated
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<ColumnRef>,
    #[arg(long)]
    target: Option<ColumnRef>,
    /// First line of the file holds column names
    #[arg(long)]
    header: bool,
    /// holdout:FRACTION, fixed:N, kfold:K or all
    #[arg(long, value_parser = parse_split)]
    split: Option<SplitScheme>,
}

#[derive(Args)]
struct EvaluateArgs {
    model: PathBuf,
    /// Rebuild the dataset from a run configuration
    #[arg(long, conflicts_with = "csv")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    repetition: usize,
    /// train or test
    #[arg(long, default_value = "test")]
    part: Part,
    #[arg(long, requires = "target")]
    csv: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<ColumnRef>,
    #[arg(long)]
    target: Option<ColumnRef>,
    #[arg(long)]
    header: bool,
    /// Write index,target,prediction rows here
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Run directory written by train
    run: PathBuf,
    #[arg(long, default_value_t = 0)]
    repetition: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<SplitScheme, String> {
    let (kind, value) = s.split_once(':').unwrap_or((s, ""));
    let bad = |_| format!("bad split value '{value}'");
    match kind {
        "all" if value.is_empty() => Ok(SplitScheme::All),
        "holdout" => value.parse().map(SplitScheme::Holdout).map_err(|e: std::num::ParseFloatError| bad(e.to_string())),
        "fixed" => value.parse().map(SplitScheme::Fixed).map_err(|e: std::num::ParseIntError| bad(e.to_string())),
        "kfold" => value.parse().map(SplitScheme::KFold).map_err(|e: std::num::ParseIntError| bad(e.to_string())),
        _ => Err(format!("unknown split '{s}' (holdout:F, fixed:N, kfold:K, all)")),
    }
}

fn build_config(a: TrainArgs) -> hfit_cli::Result<RunConfig> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag { c.$($field).+ = v; })*
        };
    }
    set!(
        out => output, seed => seed, repetitions => repetitions, rounds => rounds,
        fis_kind => fis_kind, mode => mode, generations => gp.generations, gp_pop => gp.pop_size,
        crossover_prob => gp.crossover_prob, mutation_prob => gp.mutation_prob,
        mating_pool => gp.mating_pool, tournament_size => gp.tournament_size,
        max_depth => gp.max_depth, max_inputs => gp.max_inputs, de_iters => de.max_iters,
        de_pop => de.pop_size, de_f => de.f, de_cr => de.cr, stall_window => de.stall_window,
    );
    if let Some(name) = &a.dataset {
        c.data = match name.as_str() {
            "plant" => DataSpec::Plant { n_train: 200, n_test: 200 },
            "mackey-glass" | "mackey_glass" => DataSpec::MackeyGlass {
                tau: 30.0,
                x0: 1.2,
                k_start: 124,
                k_end: 1123,
                n_train: 500,
                noise_std: a.noise.unwrap_or(0.0),
            },
            other => {
                return Err(CliError::Config(vec![hfit_cli::error::FieldError {
                    field: "data.source".into(),
                    message: format!("unknown dataset '{other}' (plant, mackey-glass)"),
                }]))
            }
        };
    }
    if let Some(path) = a.box_jenkins {
        c.data = DataSpec::BoxJenkins { path, u_column: ColumnRef::Index(0), y_column: ColumnRef::Index(1), header: a.header };
    }
    if let Some(path) = a.csv {
        c.data = DataSpec::Csv { path, inputs: a.inputs, target: a.target.expect("clap requires target"), header: a.header };
    }
    if a.split.is_some() {
        c.split = a.split;
    }
    Ok(c)
}

fn execute(cli: Cli) -> hfit_cli::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = build_config(args)?;
            let outcome = run::train(&cfg, |line| println!("{line}"))?;
            print!("{}", render_summary(&outcome.summary, &outcome.seconds()));
            for (rep, r) in outcome.repetitions.iter().enumerate() {
                println!("repetition {rep}: {}", model::summary_line(&r.model.tree));
            }
            println!("outputs in {}", outcome.dir.display());
        }
        Command::Evaluate(a) => {
            let source = match (a.config, a.csv) {
                (Some(p), _) => EvalSource::Config { config: RunConfig::load(&p)?, repetition: a.repetition, part: a.part },
                (None, Some(path)) => EvalSource::Csv {
                    path,
                    inputs: a.inputs,
                    target: a.target.expect("clap requires target"),
                    header: a.header,
                },
                (None, None) => {
                    return Err(CliError::Config(vec![hfit_cli::error::FieldError {
                        field: "data".into(),
                        message: "pass --config or --csv".into(),
                    }]))
                }
            };
            let ev = commands::evaluate(&a.model, &source, a.predictions.as_deref())?;
            println!("rows {}", ev.targets.len());
            println!("rmse {}", ev.metrics.rmse);
            if ev.metrics.correlation.is_finite() {
                println!("correlation {}", ev.metrics.correlation);
            } else {
                println!("correlation undefined (constant vector)");
            }
        }
        Command::ExportPareto(a) => {
            let rows = commands::export_pareto(&a.run, a.repetition, a.out.as_deref())?;
            if a.out.is_none() {
                println!("rmse,complexity,rank");
                for r in rows {
                    println!("{},{},{}", r.rmse, r.complexity, r.rank);
                }
            }
        }
        Command::Describe { model } => print!("{}", commands::describe(&model)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
