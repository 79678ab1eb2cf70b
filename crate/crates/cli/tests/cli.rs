use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairgen::problem::problem_by_name;
use fairgen::{Dataset, Provenance, ShapeVector, Standardizer};

const TINY: &str = r#"
init_sampler = "lhs"
init_size = 60
iterations = 1
ensemble_size = 2

[mdn]
hidden_layers = 2
hidden_width = 8
components = 3
epochs = 30

[bo]
iterations = 3
random_walks = 2
init_batches = 3
candidates = 50
"#;

fn fairgen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairgen"))
        .args(args)
        .current_dir(dir)
        .env_remove("FAIRGEN_SEED")
        .output()
        .expect("binary runs")
}

fn fairgen_env(args: &[&str], dir: &Path, seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairgen"))
        .args(args)
        .current_dir(dir)
        .env("FAIRGEN_SEED", seed)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn assert_svg(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(&path, format!("{extra}\n{TINY}")).unwrap();
    path
}

fn state_seed(out_dir: &Path) -> u64 {
    let text = fs::read_to_string(out_dir.join("state.json")).unwrap();
    let state: serde_json::Value = serde_json::from_str(&text).unwrap();
    state["config"]["seed"].as_u64().unwrap()
}

#[test]
fn init_grid_rounds_to_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = fairgen(
        &[
            "init",
            "--problem",
            "synthetic",
            "--sampler",
            "grid",
            "--n",
            "1296",
            "--out",
            "d.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("n = 1296"));
    assert!(stdout(&o).contains("S_C = "));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), 1297);
    assert!(dir.path().join("d.json").exists());
    let o = fairgen(
        &["init", "--sampler", "grid", "--n", "1300", "--out", "e.csv"],
        dir.path(),
    );
    assert!(stdout(&o).contains("n = 1296"));
}

#[test]
fn init_lhs_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = fairgen(
            &["init", "--sampler", "lhs", "--n", "200", "--seed", "7", "--out", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 201);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fairgen(&["init", "--sampler", "grid", "--n", "10"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(
        code(&fairgen(
            &["init", "--n", "10", "--out", "x.csv", "--bogus"],
            dir.path()
        )),
        2
    );
    assert_eq!(code(&fairgen(&["frobnicate"], dir.path())), 2);
    assert_eq!(
        code(&fairgen(&["run", "--iters", "0", "--out-dir", "r"], dir.path())),
        2
    );
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&fairgen(&["run", "--config", "bad.toml"], dir.path())), 2);
    let o = fairgen_env(
        &["init", "--sampler", "lhs", "--n", "30", "--out", "x.csv"],
        dir.path(),
        "abc",
    );
    assert_eq!(code(&o), 2);
}

fn single_record(dir: &Path) -> PathBuf {
    let problem = problem_by_name("synthetic").unwrap();
    let shape = ShapeVector::new(vec![0.5, 0.5, 0.5, 0.5]);
    let raw = problem.evaluate(&shape).unwrap();
    let std = Standardizer::new(raw.to_vec(), vec![1.0, 1.0]).unwrap();
    let ds = Dataset::from_shapes_with(problem.as_ref(), vec![shape], Provenance::InitLhs, std, 0).unwrap();
    let path = dir.join("one.csv");
    ds.save(&path).unwrap();
    path
}

#[test]
fn coverage_reports_and_dispatches() {
    let dir = tempfile::tempdir().unwrap();
    single_record(dir.path());
    let o = fairgen(&["coverage", "--data", "one.csv", "--svg", "map.svg"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("S_C = 0.0201062"), "{}", stdout(&o));
    assert!(stdout(&o).contains("method = exact"));
    assert_svg(&dir.path().join("map.svg"));

    let o = fairgen(
        &["coverage", "--data", "one.csv", "--k", "2", "--svg", "raster.svg"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("method = raster"));
    assert!(stdout(&o).contains("S_C = 0.0000000"));
    assert_svg(&dir.path().join("raster.svg"));

    let o = fairgen(&["coverage", "--data", "one.csv", "--rho", "0.16"], dir.path());
    assert!(stdout(&o).contains("S_C = 0.0804248"), "{}", stdout(&o));

    fs::write(dir.path().join("cov.toml"), "[coverage]\nrho = 0.16\nk = 2\n").unwrap();
    let o = fairgen(
        &[
            "coverage", "--data", "one.csv", "--config", "cov.toml", "--rho", "0.08", "--k", "1",
        ],
        dir.path(),
    );
    assert!(stdout(&o).contains("S_C = 0.0201062"), "{}", stdout(&o));
    let o = fairgen(
        &["coverage", "--data", "one.csv", "--config", "cov.toml", "--k", "1"],
        dir.path(),
    );
    assert!(stdout(&o).contains("S_C = 0.0804248"), "{}", stdout(&o));
}

#[test]
fn malformed_csv_exits_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = single_record(dir.path());
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("1,2,not-a-number\n");
    fs::write(&path, text).unwrap();
    let o = fairgen(&["coverage", "--data", "one.csv"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(code(&fairgen(&["coverage", "--data", "missing.csv"], dir.path())), 1);
}

#[test]
fn run_writes_ledger_plots_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 3");
    let cfg = cfg.to_str().unwrap();
    let o = fairgen(&["run", "--config", cfg, "--iters", "2", "--out-dir", "a"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = dir.path().join("a");
    assert_eq!(fs::read_to_string(a.join("ledger.jsonl")).unwrap().lines().count(), 2);
    for i in 1..=2 {
        assert_svg(&a.join(format!("coverage_iter_{i:03}.svg")));
    }

    let o = fairgen(&["run", "--config", cfg, "--iters", "1", "--out-dir", "b"], dir.path());
    assert_eq!(code(&o), 0);
    let o = fairgen(&["run", "--config", cfg, "--iters", "2", "--out-dir", "b"], dir.path());
    assert!(stdout(&o).contains("resumed after iteration 1"));
    let b = dir.path().join("b");
    for file in ["dataset.csv", "ledger.jsonl"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }

    fairgen(
        &[
            "init",
            "--sampler",
            "lhs",
            "--n",
            "80",
            "--seed",
            "1",
            "--out",
            "init.csv",
        ],
        dir.path(),
    );
    let o = fairgen(
        &["run", "--data", "init.csv", "--config", cfg, "--out-dir", "c"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(dir.path().join("c/ledger.jsonl"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let with_seed = write_config(dir.path(), "seed = 5");
    let with_seed = with_seed.to_str().unwrap().to_string();
    let o = fairgen_env(
        &["run", "--config", &with_seed, "--seed", "9", "--out-dir", "flag"],
        dir.path(),
        "7",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(state_seed(&dir.path().join("flag")), 9);
    fairgen_env(&["run", "--config", &with_seed, "--out-dir", "file"], dir.path(), "7");
    assert_eq!(state_seed(&dir.path().join("file")), 5);

    let plain = dir.path().join("plain.toml");
    fs::write(&plain, TINY).unwrap();
    let plain = plain.to_str().unwrap();
    fairgen_env(&["run", "--config", plain, "--out-dir", "env"], dir.path(), "7");
    assert_eq!(state_seed(&dir.path().join("env")), 7);
    fairgen(&["run", "--config", plain, "--out-dir", "default"], dir.path());
    assert_eq!(state_seed(&dir.path().join("default")), 0);
}

#[test]
fn uncertainty_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    fairgen(
        &["init", "--sampler", "lhs", "--n", "80", "--seed", "2", "--out", "d.csv"],
        dir.path(),
    );
    let args = |csv: &'static str| {
        vec![
            "uncertainty",
            "--data",
            "d.csv",
            "--config",
            cfg,
            "--resolution",
            "12",
            "--csv",
            csv,
            "--svg",
            "u.svg",
        ]
    };
    let o = fairgen(&args("u1.csv"), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    fairgen(&args("u2.csv"), dir.path());
    let text = fs::read_to_string(dir.path().join("u1.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(dir.path().join("u2.csv")).unwrap());
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 144);
    assert!(rows
        .iter()
        .all(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap() >= 0.0));
    assert_svg(&dir.path().join("u.svg"));
    let o = fairgen(&["uncertainty", "--data", "d.csv", "--resolution", "1"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let o = fairgen(
        &["compare", "--budget", "1000", "--config", cfg, "--out-dir", "cmp"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curves = fs::read_to_string(dir.path().join("cmp/curves.csv")).unwrap();
    for label in [",fairgen,", ",grid,", ",lhs,"] {
        assert_eq!(curves.matches(label).count(), 2, "{label}");
    }
    assert_svg(&dir.path().join("cmp/curves.svg"));
    assert_eq!(
        code(&fairgen(&["compare", "--budget", "10", "--config", cfg], dir.path())),
        2
    );

    fairgen(
        &["init", "--sampler", "lhs", "--n", "60", "--seed", "1", "--out", "a.csv"],
        dir.path(),
    );
    fairgen(
        &["init", "--sampler", "grid", "--n", "81", "--out", "b.csv"],
        dir.path(),
    );
    let args = [
        "evaluate",
        "--data",
        "a.csv",
        "--data",
        "grid=b.csv",
        "--n-test",
        "5",
        "--shapes-per-test",
        "2",
        "--config",
        cfg,
        "--svg",
        "err.svg",
        "--csv",
        "mae.csv",
    ];
    let o = fairgen(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("mae.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("\na,") && table.contains("\ngrid,"));
    assert_svg(&dir.path().join("err.svg"));
    assert_eq!(stdout(&fairgen(&args, dir.path())), stdout(&o));
}
