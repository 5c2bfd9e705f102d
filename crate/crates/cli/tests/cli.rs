use std::path::{Path, PathBuf};
use std::process::Command;

use hfit::data::{Dataset, Scaler, SplitScheme};
use hfit::de::DeConfig;
use hfit::mogp::{dominates, ObjectiveMode, Objectives};
use hfit::tree::Shape;
use hfit::{FisKind, FuzzyTree};
use hfit_cli::commands::{self, EvalSource, Part};
use hfit_cli::config::{DataSpec, GpSettings, RunConfig};
use hfit_cli::model::{summary_line, Provenance};
use hfit_cli::report::{read_report, read_summary, Summary};
use hfit_cli::run::{repetition_dir, run_repetition, train};
use hfit_cli::{CliError, Model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quick(out: &Path) -> RunConfig {
    RunConfig {
        output: out.to_path_buf(),
        repetitions: 2,
        gp: GpSettings { pop_size: 12, mating_pool: 6, generations: 4, max_depth: 3, max_inputs: 3, ..GpSettings::default() },
        de: DeConfig { pop_size: 8, max_iters: 15, ..DeConfig::default() },
        data: DataSpec::Plant { n_train: 60, n_test: 40 },
        ..RunConfig::default()
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hfit"))
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

#[test]
fn zero_iterations_keep_the_best_initial_individual() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(dir.path());
    cfg.gp.generations = 0;
    cfg.de = DeConfig { max_iters: 0, init_spread: 0.0, ..cfg.de };
    let res = run_repetition(&cfg, 0).unwrap();
    let best = res.archive.pick_best().unwrap();
    assert_eq!(res.model.tree, best.tree);
    assert!((res.row.train_rmse - best.objectives.rmse).abs() < 1e-12);
    assert_eq!(res.archive.len(), cfg.gp.pop_size);
    assert_eq!(res.gp_log.len(), 1);
}

#[test]
fn training_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(&dir.path().join("run"));
    let outcome = train(&cfg, |_| {}).unwrap();
    let run = outcome.dir.clone();

    for name in ["run.json", "report.csv", "summary.csv", "timing.csv"] {
        let text = std::fs::read_to_string(run.join(name)).unwrap();
        if name.ends_with(".csv") {
            assert!(text.starts_with(&format!("# hfit config_hash={} seed=1\n", cfg.hash())), "{name}");
        }
    }

    // aggregates recompute from the per-repetition rows
    let rows = read_report(&run.join("report.csv")).unwrap();
    assert_eq!(rows, outcome.rows());
    assert_eq!(read_summary(&run.join("summary.csv")).unwrap(), Summary::of(&rows));

    for rep in 0..cfg.repetitions {
        let rd = repetition_dir(&run, rep);
        let model = Model::load(&rd.join("model.json")).unwrap();
        assert_eq!(model.provenance, Provenance { config_hash: cfg.hash(), seed: 1, repetition: rep });
        assert_eq!(model.tree.parameter_count(), rows[rep].parameter_count);

        // scoring the training rows reproduces the reported error
        let source = EvalSource::Config { config: cfg.clone(), repetition: rep, part: Part::Train };
        let preds = dir.path().join(format!("pred-{rep}.csv"));
        let ev = commands::evaluate(&rd.join("model.json"), &source, Some(&preds)).unwrap();
        assert!((ev.metrics.rmse - rows[rep].train_rmse).abs() < 1e-12);
        let written = std::fs::read_to_string(&preds).unwrap();
        assert_eq!(written.lines().count(), 2 + 60);
        assert!(written.lines().nth(1).unwrap() == "index,target,prediction");

        let test = EvalSource::Config { config: cfg.clone(), repetition: rep, part: Part::Test };
        let ev = commands::evaluate(&rd.join("model.json"), &test, None).unwrap();
        assert_eq!(ev.targets.len(), 40);
        assert!((ev.metrics.rmse - rows[rep].test_rmse.unwrap()).abs() < 1e-12);

        let gp = std::fs::read_to_string(rd.join("gp_log.csv")).unwrap();
        assert_eq!(gp.lines().count(), 2 + cfg.gp.generations + 1);
        let hv: Vec<f64> = gp.lines().skip(2).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
        assert!(hv.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn runs_are_reproducible_across_output_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&quick(&a), |_| {}).unwrap();
    train(&quick(&b), |_| {}).unwrap();
    for f in ["run.json", "report.csv", "summary.csv", "rep-00/model.json", "rep-01/model.json", "rep-01/pareto.csv", "rep-00/gp_log.csv", "rep-00/de_log.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn pareto_export_is_ordered_and_rank_zero_is_nondominated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(&dir.path().join("run"));
    train(&cfg, |_| {}).unwrap();
    let out = dir.path().join("front.csv");
    let rows = commands::export_pareto(&cfg.output, 1, Some(&out)).unwrap();
    assert_eq!(rows.len(), cfg.gp.pop_size);
    for w in rows.windows(2) {
        assert!(w[0].rank < w[1].rank || (w[0].rank == w[1].rank && w[0].rmse <= w[1].rmse));
    }
    let front: Vec<Objectives> =
        rows.iter().filter(|r| r.rank == 0).map(|r| Objectives::new(r.rmse, r.complexity)).collect();
    assert!(!front.is_empty());
    for a in &front {
        assert!(front.iter().all(|b| !dominates(b, a)));
    }
    assert_eq!(commands::read_pareto(&out).unwrap(), rows);

    assert!(matches!(commands::export_pareto(&cfg.output, 5, None), Err(CliError::Report(_))));
}

#[test]
fn single_objective_runs_have_no_front() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(&dir.path().join("run"));
    cfg.mode = ObjectiveMode::Single;
    cfg.repetitions = 1;
    train(&cfg, |_| {}).unwrap();
    assert!(!repetition_dir(&cfg.output, 0).join("pareto.csv").exists());
    let err = commands::export_pareto(&cfg.output, 0, None).unwrap_err();
    assert!(matches!(err, CliError::NoFront(_)));
    let st = bin().arg("export-pareto").arg(&cfg.output).status().unwrap();
    assert_eq!(st.code(), Some(6));
}

fn fig3a_model() -> Model {
    let shape = Shape::Node(vec![
        Shape::Node(vec![Shape::Input(0), Shape::Input(1)]),
        Shape::Node(vec![Shape::Input(3), Shape::Input(4)]),
        Shape::Input(2),
    ]);
    let tree = FuzzyTree::from_shape(&shape, FisKind::Type1, &mut ChaCha8Rng::seed_from_u64(4));
    let scaler = Scaler { feature_min: vec![0.0; 5], feature_max: vec![1.0; 5], target_min: 0.0, target_max: 1.0 };
    let names = (1..=5).map(|i| format!("f{i}")).collect();
    Model::new(tree, scaler, names, Provenance { config_hash: "x".into(), seed: 0, repetition: 0 })
}

#[test]
fn describe_two_stage_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = fig3a_model();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    assert_eq!(Model::load(&path).unwrap(), model);
    assert_eq!(summary_line(&model.tree), "3 nodes, depth 2, 84 parameters, features {1..5}");
    let text = commands::describe(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].contains("84 parameters"));
    assert_eq!(lines[1], "N1: level 1, arity 3, 8 rules <- N2, N3, x3 (f3)");
    assert_eq!(lines[2], "  N2: level 2, arity 2, 4 rules <- x1 (f1), x2 (f2)");

    let out = bin().arg("describe").arg(&path).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
}

#[test]
fn corrupt_model_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let good = fig3a_model().to_json();
    let cut = good.find("\"tree\"").unwrap() + 12;
    let path = write(&dir.path().join("bad.json"), &good[..cut]);
    match Model::load(&path) {
        Err(CliError::ModelSyntax { offset, .. }) => assert!(offset <= cut && offset + 16 >= cut, "{offset} vs {cut}"),
        other => panic!("{other:?}"),
    }
    let garbage = write(&dir.path().join("garbage.json"), "{\n  \"format\": hfit\n}");
    match Model::load(&garbage) {
        Err(CliError::ModelSyntax { offset, .. }) => assert_eq!(offset, 14),
        other => panic!("{other:?}"),
    }
    let out = bin().arg("describe").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8(out.stderr).unwrap().contains("at byte"));
}

#[test]
fn perfect_predictions_score_zero_error_and_unit_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let model = fig3a_model();
    let mpath = dir.path().join("m.json");
    model.save(&mpath).unwrap();
    let rows: Vec<Vec<f64>> = (0..30).map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11) as f64 / 10.0).collect()).collect();
    let ds = Dataset::new(rows.clone(), vec![0.0; 30], vec![]).unwrap();
    let preds = model.predict(&ds).unwrap();
    let mut text = String::from("a,b,c,d,e,t\n");
    for (r, p) in rows.iter().zip(&preds) {
        let cells: Vec<String> = r.iter().chain(std::iter::once(p)).map(|v| format!("{v}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    let csv = write(&dir.path().join("toy.csv"), &text);
    let source = EvalSource::Csv { path: csv.clone(), inputs: vec![], target: "t".parse().unwrap(), header: true };
    let ev = commands::evaluate(&mpath, &source, None).unwrap();
    assert_eq!(ev.metrics.rmse, 0.0);
    assert!((ev.metrics.correlation - 1.0).abs() < 1e-12);

    let out = bin()
        .args(["evaluate", mpath.to_str().unwrap(), "--csv", csv.to_str().unwrap(), "--target", "t", "--header"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let line = stdout.lines().find(|l| l.starts_with(key)).unwrap();
        line[key.len()..].trim().parse().unwrap()
    };
    assert_eq!(value("rmse"), 0.0, "{stdout}");
    assert!((value("correlation") - 1.0).abs() < 1e-12, "{stdout}");
}

#[test]
fn feature_count_mismatch_names_the_expected_features() {
    let dir = tempfile::tempdir().unwrap();
    let mpath = dir.path().join("m.json");
    fig3a_model().save(&mpath).unwrap();
    let csv = write(&dir.path().join("narrow.csv"), "1,2,3\n4,5,6\n7,8,9\n");
    let source = EvalSource::Csv { path: csv.clone(), inputs: vec![], target: "2".parse().unwrap(), header: false };
    let err = commands::evaluate(&mpath, &source, None).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, CliError::FeatureCount { expected: 5, found: 2, .. }));
    assert!(msg.contains("f1, f2, f3, f4, f5"), "{msg}");
    let st = bin()
        .args(["evaluate", mpath.to_str().unwrap(), "--csv", csv.to_str().unwrap(), "--target", "2"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(4));
}

#[test]
fn gas_furnace_file_becomes_lagged_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("u,y\n");
    for k in 0..40 {
        text.push_str(&format!("{},{}\n", k as f64 * 0.1, 50.0 + k as f64));
    }
    let path = write(&dir.path().join("gas.csv"), &text);
    let cfg = RunConfig {
        data: DataSpec::BoxJenkins { path, u_column: "u".parse().unwrap(), y_column: "y".parse().unwrap(), header: true },
        ..RunConfig::default()
    };
    cfg.check().unwrap();
    let split = cfg.load_split(0, &mut cfg.repetition_rng(0)).unwrap();
    assert!(split.test.is_none());
    assert_eq!(split.train.len(), 36);
    assert_eq!(split.train.n_features(), 2);
    // first pattern is k = 4: inputs y(3), u(0); target y(4)
    assert_eq!(split.train.row(0), &[53.0, 0.0]);
    assert_eq!(split.train.targets()[0], 54.0);

    let held = RunConfig { split: Some(SplitScheme::Holdout(0.75)), ..cfg };
    let split = held.load_split(0, &mut held.repetition_rng(0)).unwrap();
    assert_eq!((split.train.len(), split.test.unwrap().len()), (27, 9));
}

#[test]
fn invalid_configuration_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "--gp-pop", "1", "--de-cr", "2", "--out"])
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("gp.pop_size") && err.contains("de.cr"), "{err}");

    let cfg = write(&dir.path().join("c.toml"), "[gp]\ngenerations = \"many\"\n");
    let st = bin().args(["train", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(3));
    let st = bin().args(["train", "--split", "halves"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("c.toml"),
        "repetitions = 1\n[gp]\npop_size = 10\nmating_pool = 5\ngenerations = 2\n[de]\npop_size = 6\nmax_iters = 5\n[data]\nsource = \"plant\"\nn_train = 30\nn_test = 10\n",
    );
    let out_dir = dir.path().join("run");
    let out = bin()
        .args(["train", "--seed", "7", "--fis-kind", "type2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = Model::load(&out_dir.join("rep-00/model.json")).unwrap();
    assert_eq!(model.provenance.seed, 7);
    assert_eq!(model.tree.kind, FisKind::Type2);
    let report = read_report(&out_dir.join("report.csv")).unwrap();
    assert_eq!(report.len(), 1);
}
