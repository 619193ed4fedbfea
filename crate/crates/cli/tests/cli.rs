use std::fs;
use std::path::Path;
use std::process::Command;

use approxnewton_cli::config::{ExperimentConfig, PointRun};
use approxnewton_cli::output::{emit_plot_data, SUMMARY_FILE};
use approxnewton_cli::runner::RunOutcome;
use approxnewton_cli::{run_experiment, CliError};

const SMALL: &str = r#"
experiment = "custom"
seeds = [0, 1, 2]

[problem]
objective = { kind = "least_squares" }

[problem.data]
source = "synthetic_spectrum"
n = 120
d = 6
decay = 1.3
seed = 4

[[grid.methods]]
method = "sketched"
kind = "sparse_embedding"
size = { per_dim = 8.0 }

[[grid.methods]]
method = "regularized"
size = { fixed = 40 }
alpha = 0.1

[[grid.baselines]]
kind = "full_newton"

[budget]
max_iters = 400
grad_tol = 1e-10
"#;

const SVM: &str = r#"
experiment = "lipschitz_free"
seeds = [0, 1]

[problem]
objective = { kind = "svm", c = 100.0 }

[problem.data]
source = "two_class"
n = 400
d = 10
separation = 1.0
seed = 1

[grid]
pool_fraction = 0.2

[budget]
max_iters = 200
grad_tol = 1e-10
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_approxnewton"))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|row| row.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_writes_one_summary_row_per_point_and_seed() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(summary.exit_code(), 0);
    let points = cfg.points().unwrap();
    assert_eq!(points.len(), 3);

    let (header, rows) = read_csv(&dir.path().join(SUMMARY_FILE));
    assert_eq!(header, ["tag", "seed", "status", "iters", "final_grad_mstar", "rate_class", "rho"]);
    assert_eq!(rows.len(), points.len() * cfg.seeds.len());
    for p in &points {
        for seed in &cfg.seeds {
            let path = dir.path().join(format!("trace_{}_seed{seed}.csv", p.tag));
            let (h, trace) = read_csv(&path);
            assert_eq!(h, ["t", "grad_norm", "grad_mstar_norm", "inner_residual", "wall_ms", "status"]);
            assert_eq!(trace.last().unwrap()[5], "converged", "{}", path.display());
            assert!(trace.iter().all(|r| r[4].is_empty()));
        }
    }
    let newton: Vec<_> = rows.iter().filter(|r| r[0] == "newton").collect();
    assert!(newton.iter().all(|r| r[3] == "1"));
    assert!(dir.path().join("plot_custom.svg").is_file());
    assert!(dir.path().join("plotdata_custom.csv").is_file());
    assert!(dir.path().join("metadata.toml").is_file());
}

#[test]
fn csv_outputs_are_byte_identical_across_reruns() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, &dir.path().join("a")).unwrap();
    run_experiment(&cfg, &dir.path().join("b")).unwrap();
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        let a = fs::read(dir.path().join("a").join(&n)).unwrap();
        let b = fs::read(dir.path().join("b").join(&n)).unwrap();
        assert_eq!(a, b, "{n:?}");
    }
}

#[test]
fn newton_series_lies_below_subsampled_on_the_svm() {
    let cfg = ExperimentConfig::from_toml(SVM).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    let series = |tag: &str, seed: u64| -> Vec<f64> {
        let (_, rows) = read_csv(&dir.path().join(format!("trace_{tag}_seed{seed}.csv")));
        rows.iter().map(|r| r[2].parse().unwrap()).collect()
    };
    for seed in &cfg.seeds {
        let newton = series("newton", *seed);
        let sub = series("subsampled_pf0.2", *seed);
        for t in 1..newton.len().min(sub.len()) {
            assert!(newton[t] <= sub[t], "seed {seed} t {t}: {} > {}", newton[t], sub[t]);
        }
    }
    let newton = summary.report.records.iter().find(|r| r.tag == "newton").unwrap();
    match &newton.outcome {
        RunOutcome::Solved { rate: Ok(r), .. } => assert!(r.classification.is_superlinear_or_better()),
        _ => panic!("newton run was not classified"),
    }
}

#[test]
fn embedding_runs_report_rates() {
    let text = r#"
        experiment = "embedding_check"
        seed_range = [0, 20]
        [problem]
        objective = { kind = "least_squares" }
        [problem.data]
        source = "synthetic_spectrum"
        n = 400
        d = 5
        decay = 1.2
        [grid]
        kinds = ["gaussian", "leverage_score"]
        sketch_sizes = ["calibrated", { rows = 5 }]
    "#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert!(cfg.points().unwrap().iter().all(|p| matches!(p.run, PointRun::Embedding { .. })));
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    let (header, rows) = read_csv(&dir.path().join("embedding_rates.csv"));
    assert_eq!(header, ["tag", "rows", "successes", "trials", "rate", "meets_target"]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[3], "20");
        let rate: f64 = r[4].parse().unwrap();
        let expect = r[2].parse::<f64>().unwrap() / 20.0;
        assert_eq!(rate, expect);
    }
    let tiny = rows.iter().find(|r| r[0] == "embed_gaussian_s5").unwrap();
    assert_eq!(tiny[5], "false");
    let (_, summary) = read_csv(&dir.path().join(SUMMARY_FILE));
    assert_eq!(summary.len(), 80);
    assert!(summary.iter().all(|r| r[2] == "embedded" || r[2] == "not_embedded"));
}

#[test]
fn plot_without_inputs_is_a_missing_inputs_error() {
    let dir = tempfile::tempdir().unwrap();
    match emit_plot_data(dir.path()) {
        Err(CliError::MissingInputs { expected, .. }) => assert!(expected.contains("summary.csv")),
        other => panic!("expected MissingInputs, got {other:?}"),
    }
}

#[test]
fn plot_rebuilds_from_traces() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    let data = dir.path().join("plotdata_custom.csv");
    let before = fs::read(&data).unwrap();
    fs::remove_file(&data).unwrap();
    fs::remove_file(dir.path().join("plot_custom.svg")).unwrap();
    let files = emit_plot_data(dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(fs::read(&data).unwrap(), before);

    fs::remove_file(dir.path().join("trace_newton_seed1.csv")).unwrap();
    match emit_plot_data(dir.path()) {
        Err(CliError::MissingInputs { expected, .. }) => assert!(expected.contains("trace_newton_seed1.csv")),
        other => panic!("expected MissingInputs, got {other:?}"),
    }
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run"]).arg(&good).arg("--out").arg(&out).args(["--seed", "7"]).output().unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("trace_newton_seed7.csv").is_file());
    assert!(!out.join("trace_newton_seed0.csv").exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, SMALL.replace("max_iters", "max_iterations")).unwrap();
    let status = bin().args(["run"]).arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).starts_with("error:"));

    let partial = dir.path().join("partial.toml");
    let failing = format!("{SMALL}\n[[grid.methods]]\nmethod = \"new_samp\"\nsize = {{ fixed = 40 }}\nrank = 6\n");
    fs::write(&partial, failing).unwrap();
    let status = bin().args(["run"]).arg(&partial).arg("--out").arg(dir.path().join("p")).output().unwrap();
    assert_eq!(status.status.code(), Some(2), "{}", String::from_utf8_lossy(&status.stdout));
    let meta = fs::read_to_string(dir.path().join("p/metadata.toml")).unwrap();
    assert!(meta.contains("[[failures]]"));

    let status = bin().args(["plot"]).arg(dir.path().join("nothing")).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn gen_synthetic_reports_kappa_and_writes_libsvm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.svm");
    let out = bin()
        .args(["gen-synthetic", "--n", "200", "--d", "8", "--decay", "1.5", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let kappa: f64 = text
        .lines()
        .find(|l| l.contains("measured"))
        .and_then(|l| l.rsplit('=').next())
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((kappa - 1.5f64.powi(7)).abs() < 1e-4 * kappa);
    let data = approxnewton::problems::load_libsvm_with(&path, approxnewton::problems::LabelPolicy::Raw, Some(8)).unwrap();
    assert_eq!((data.num_samples(), data.dim()), (200, 8));
}

#[test]
fn verify_embedding_prints_one_line_per_kind() {
    let out = bin()
        .args(["verify-embedding", "--n", "300", "--d", "4", "--seeds", "10", "--kind", "sparse", "--kind", "leverage"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("/10"));
}
