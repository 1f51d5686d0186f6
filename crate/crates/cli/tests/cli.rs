use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cyclecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclecast"))
        .args(args)
        .env_remove("CYCLECAST_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, case: &str, n: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    let res = cyclecast(&["gen", "--case", case, "--n", n, "--seed", seed, "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn gen_case1_stays_in_bounds() {
    let dir = TempDir::new().unwrap();
    let path = gen(dir.path(), "s.csv", "1", "120", "7");
    let rows = data_rows(&fs::read_to_string(&path).unwrap());
    assert_eq!(rows.len(), 120);
    for r in &rows {
        let cycle: u32 = r[1].parse().unwrap();
        assert!((28..=30).contains(&cycle));
        assert_eq!(r[2], "5");
    }
}

#[test]
fn gen_rejects_empty_series_without_writing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    let res = cyclecast(&["gen", "--case", "1", "--n", "0", "--seed", "7", "--out", path_str(&out)]);
    assert_eq!(code(&res), 1);
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = fs::read(gen(dir.path(), "a.csv", "3", "200", "11")).unwrap();
    let b = fs::read(gen(dir.path(), "b.csv", "3", "200", "11")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let flagged = gen(dir.path(), "flag.csv", "2", "50", "99");
    let env_out = dir.path().join("env.csv");
    let res = Command::new(env!("CARGO_BIN_EXE_cyclecast"))
        .args(["gen", "--case", "2", "--n", "50", "--out", path_str(&env_out)])
        .env("CYCLECAST_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read(flagged).unwrap(), fs::read(env_out).unwrap());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("s.csv");
    let res = cyclecast(&["gen", "--case", "1", "--n", "10", "--seed", "1", "--out", path_str(&out)]);
    assert_eq!(code(&res), 2);
    assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
}

#[test]
fn eval_all_models_emits_twelve_rows() {
    let dir = TempDir::new().unwrap();
    let series = gen(dir.path(), "s.csv", "1", "120", "7");
    let table = dir.path().join("t.csv");
    let res = cyclecast(&[
        "eval",
        "--input",
        path_str(&series),
        "--out",
        path_str(&table),
        "--models",
        "ols,huber,lasso,omp,arima,lstm",
        "--horizon",
        "14",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("model,channel,mae,mse,rmse,horizon,protocol\n"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let (mse, rmse): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!((rmse - mse.sqrt()).abs() <= 1e-9);
    }
    assert!(dir.path().join("t.meta.txt").exists());
    let predictions = fs::read_to_string(dir.path().join("t.predictions.csv")).unwrap();
    assert_eq!(data_rows(&predictions).len(), 6 * 14);
}

#[test]
fn eval_lstm_writes_loss_curve_per_epoch() {
    let dir = TempDir::new().unwrap();
    let series = gen(dir.path(), "s.csv", "1", "120", "7");
    let table = dir.path().join("t.csv");
    let res = cyclecast(&[
        "eval",
        "--input",
        path_str(&series),
        "--out",
        path_str(&table),
        "--models",
        "lstm",
        "--epochs",
        "100",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(data_rows(&fs::read_to_string(&table).unwrap()).len(), 2);
    let curve = fs::read_to_string(dir.path().join("t.lstm_loss.csv")).unwrap();
    assert!(curve.starts_with("epoch,loss\n"));
    assert_eq!(data_rows(&curve).len(), 100);

    let plots = dir.path().join("plots");
    let res = cyclecast(&["plotdata", "--eval", path_str(&table), "--out-dir", path_str(&plots)]);
    assert_eq!(code(&res), 0);
    assert_eq!(data_rows(&fs::read_to_string(plots.join("loss_curve.csv")).unwrap()).len(), 100);
    assert_eq!(data_rows(&fs::read_to_string(plots.join("actual_vs_predicted.csv")).unwrap()).len(), 14);
}

#[test]
fn eval_rejects_oversized_horizon() {
    let dir = TempDir::new().unwrap();
    let series = gen(dir.path(), "s.csv", "1", "120", "7");
    let table = dir.path().join("t.csv");
    let res = cyclecast(&["eval", "--input", path_str(&series), "--out", path_str(&table), "--horizon", "1000"]);
    assert_eq!(code(&res), 1);
    assert!(!table.exists());
}

#[test]
fn eval_names_the_malformed_row() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("bad.csv");
    fs::write(
        &series,
        "index,cycle_length,period_length,period_start_day\n0,29,5,1\n1,29,5,1\n2,twenty,5,1\n",
    )
    .unwrap();
    let table = dir.path().join("t.csv");
    let res = cyclecast(&["eval", "--input", path_str(&series), "--out", path_str(&table), "--models", "ols"]);
    assert_eq!(code(&res), 1);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line 4") && stderr.contains("cycle_length"), "{stderr}");
}

#[test]
fn eval_missing_input_is_a_user_error() {
    let dir = TempDir::new().unwrap();
    let res = cyclecast(&[
        "eval",
        "--input",
        path_str(&dir.path().join("nope.csv")),
        "--out",
        path_str(&dir.path().join("t.csv")),
    ]);
    assert_eq!(code(&res), 1);
}

fn eval_linear(dir: &Path, series: &Path, name: &str) -> PathBuf {
    let table = dir.join(name);
    let res = cyclecast(&[
        "eval",
        "--input",
        path_str(series),
        "--out",
        path_str(&table),
        "--models",
        "ols,huber,omp",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    table
}

#[test]
fn report_requires_inputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.md");
    assert_eq!(code(&cyclecast(&["report", "--out", path_str(&out)])), 1);
    let res = cyclecast(&["report", "--inputs", path_str(&dir.path().join("none.csv")), "--out", path_str(&out)]);
    assert_eq!(code(&res), 1);
    assert!(!out.exists());
}

#[test]
fn report_orders_cases_and_keeps_rows() {
    let dir = TempDir::new().unwrap();
    let mut tables = Vec::new();
    for case in ["3", "1", "2"] {
        let series = gen(dir.path(), &format!("s{case}.csv"), case, "80", "4");
        tables.push(eval_linear(dir.path(), &series, &format!("t{case}.csv")));
    }
    let out = dir.path().join("r.md");
    let mut args = vec!["report", "--out", path_str(&out), "--inputs"];
    args.extend(tables.iter().map(|t| path_str(t)));
    let res = cyclecast(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let doc = fs::read_to_string(&out).unwrap();

    let headings: Vec<&str> = doc.lines().filter(|l| l.starts_with("## ")).collect();
    assert_eq!(headings, ["## Case 1", "## Case 2", "## Case 3"]);
    let table_rows = doc
        .lines()
        .filter(|l| l.starts_with("| ") && !l.starts_with("| model") && !l.starts_with("| ---"))
        .count();
    assert_eq!(table_rows, 3 * 6);
    assert!(doc.contains("### Generator"));
    assert!(doc.contains("### Models"));
}

#[test]
fn plotdata_histogram_covers_case1_days() {
    let dir = TempDir::new().unwrap();
    let series = gen(dir.path(), "s.csv", "1", "120", "7");
    let plots = dir.path().join("plots");
    let res = cyclecast(&["plotdata", "--series", path_str(&series), "--out-dir", path_str(&plots)]);
    assert_eq!(code(&res), 0);
    let hist = fs::read_to_string(plots.join("hist_cycle.csv")).unwrap();
    assert!(hist.starts_with("bin_left,bin_right,count\n"));
    let mut total = 0;
    for r in data_rows(&hist) {
        let left: u32 = r[0].parse().unwrap();
        let count: usize = r[2].parse().unwrap();
        if count > 0 {
            assert!((28..=30).contains(&left));
        }
        total += count;
    }
    assert_eq!(total, 120);
}

#[test]
fn plotdata_constant_series_boxplot_collapses() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("c.csv");
    let mut text = String::from("index,cycle_length,period_length,period_start_day\n");
    for i in 0..40 {
        text.push_str(&format!("{i},29,5,1\n"));
    }
    fs::write(&series, &text).unwrap();
    let plots = dir.path().join("plots");
    let res = cyclecast(&["plotdata", "--series", path_str(&series), "--out-dir", path_str(&plots)]);
    assert_eq!(code(&res), 0);
    let boxplot = fs::read_to_string(plots.join("boxplot.csv")).unwrap();
    assert!(boxplot.starts_with("channel,min,q1,median,q3,max\n"));
    for r in data_rows(&boxplot) {
        assert!(r[1..].iter().all(|v| v == &r[1]), "{r:?}");
    }
    assert_eq!(fs::read_to_string(&series).unwrap(), text);
}

#[test]
fn plotdata_needs_an_input() {
    let dir = TempDir::new().unwrap();
    let plots = dir.path().join("plots");
    assert_eq!(code(&cyclecast(&["plotdata", "--out-dir", path_str(&plots)])), 1);
    let res = cyclecast(&[
        "plotdata",
        "--eval",
        path_str(&dir.path().join("t.csv")),
        "--out-dir",
        path_str(&plots),
    ]);
    assert_eq!(code(&res), 1);
}

fn pipeline(dir: &Path) -> Vec<Vec<u8>> {
    let series = gen(dir, "s.csv", "2", "60", "5");
    let table = dir.join("t.csv");
    let res = cyclecast(&[
        "eval",
        "--input",
        path_str(&series),
        "--out",
        path_str(&table),
        "--epochs",
        "20",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let report = dir.join("r.md");
    assert_eq!(code(&cyclecast(&["report", "--inputs", path_str(&table), "--out", path_str(&report)])), 0);
    let plots = dir.join("plots");
    let res = cyclecast(&[
        "plotdata",
        "--series",
        path_str(&series),
        "--eval",
        path_str(&table),
        "--out-dir",
        path_str(&plots),
    ]);
    assert_eq!(code(&res), 0);

    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .chain(fs::read_dir(&plots).unwrap())
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn full_pipeline_is_deterministic() {
    // Same working paths for both runs, since file names are echoed in the
    // metadata and report.
    let dir = TempDir::new().unwrap();
    let first = pipeline(dir.path());
    fs::remove_dir_all(dir.path().join("plots")).unwrap();
    for entry in fs::read_dir(dir.path()).unwrap() {
        fs::remove_file(entry.unwrap().path()).unwrap();
    }
    let second = pipeline(dir.path());
    assert_eq!(first.len(), 12);
    assert_eq!(first, second);
}
