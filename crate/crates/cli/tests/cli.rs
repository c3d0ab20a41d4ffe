use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use splitsde_cli::{execute, main_with_args, parse_config, Command, RunConfig, Settings, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME};

fn config(command: Command, text: &str, out: &Path) -> RunConfig {
    let mut settings = Settings::from_text(text).unwrap();
    settings.set_flag("out", out.display().to_string());
    parse_config(command, settings).unwrap()
}

fn run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    dirs
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn check_exits_zero() {
    let root = tempfile::tempdir().unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_splitsde")).args(["check", "--out"]).arg(root.path()).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let dir = &run_dirs(root.path())[0];
    let rows = csv_rows(&dir.join("checks.csv"));
    assert_eq!(rows.len(), 8);
}

#[test]
fn converge_default_cir_has_six_rows_per_scheme() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(Command::Converge, "", root.path());
    let outcome = execute(&cfg).unwrap();
    let rows = csv_rows(&outcome.dir.join("mse.csv"));
    assert_eq!(rows.len(), 6 * cfg.schemes.len());
    for scheme in &cfg.schemes {
        let mine: Vec<_> = rows.iter().filter(|r| r[3] == scheme.id()).collect();
        assert_eq!(mine.len(), 6);
        assert!(mine.iter().all(|r| r[4] == "cir" && r[2] == "500"));
    }
    let slopes = csv_rows(&outcome.dir.join("slopes.csv"));
    assert_eq!(slopes.len(), cfg.schemes.len());
    for row in slopes {
        let slope: f64 = row[2].parse().unwrap();
        assert!(slope > 0.5 && slope < 1.5, "{row:?}");
    }
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(Command::Simulate, "scheme=strang M=5 seed=11", root.path());
    let a = execute(&cfg).unwrap();
    let b = execute(&cfg).unwrap();
    assert_ne!(a.dir, b.dir);
    let bytes = fs::read(a.dir.join("paths.csv")).unwrap();
    assert_eq!(bytes, fs::read(b.dir.join("paths.csv")).unwrap());
    let rows = csv_rows(&a.dir.join("paths.csv"));
    assert_eq!(rows.len(), 5 * 101);
    assert_eq!(rows[0], vec!["0", "0.0000000000000000e0", "1.0000000000000000e0"]);

    let other = execute(&config(Command::Simulate, "scheme=strang M=5 seed=12", root.path())).unwrap();
    assert_ne!(bytes, fs::read(other.dir.join("paths.csv")).unwrap());
}

#[test]
fn manifest_reproduces_the_run() {
    let root = tempfile::tempdir().unwrap();
    let cases = [
        (Command::Simulate, "model=wright_fisher scheme=lt M=3", "paths.csv"),
        (Command::Converge, "M=40 h_obs=2^-3,2^-4,2^-5 h_fine=2^-8 scheme=lt,eum", "mse.csv"),
        (Command::Wasserstein, "M=2000", "wasserstein.csv"),
    ];
    for (command, text, file) in cases {
        let first = execute(&config(command, text, root.path())).unwrap();
        let manifest = fs::read_to_string(first.dir.join("manifest.txt")).unwrap();
        let again = parse_config(command, Settings::from_text(&manifest).unwrap()).unwrap();
        let second = execute(&again).unwrap();
        assert_eq!(fs::read(first.dir.join(file)).unwrap(), fs::read(second.dir.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn infer_writes_every_row() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(Command::Infer, "M=4 N=100,200 h_obs=0.1 estimators=lt,strang fix=theta init.mu=1 init.b=1", root.path());
    let outcome = execute(&cfg).unwrap();
    let rows = csv_rows(&outcome.dir.join("estimates.csv"));
    assert_eq!(rows.len(), 4 * 2 * 2 * 3);
    for row in rows.iter().filter(|r| r[4] == "theta") {
        assert_eq!(row[5], "2.0000000000000000e0");
    }
    assert!(rows.iter().all(|r| r.len() == 9));
    let summary = csv_rows(&outcome.dir.join("summary.csv"));
    assert_eq!(summary.len(), 2 * 2 * 2);
}

#[test]
fn flags_override_config_file() {
    let root = tempfile::tempdir().unwrap();
    let file = root.path().join("run.cfg");
    fs::write(&file, "model=cir theta=2 mu=6 b=0.2 seed=42\nM=2\n").unwrap();
    let out = root.path().join("runs");
    let code = main_with_args(["splitsde", "simulate", "--config", file.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let dir = &run_dirs(&out)[0];
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-seed7"));
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.lines().any(|l| l == "seed=7"));
    assert!(manifest.lines().any(|l| l == "M=2"));
}

#[test]
fn validation_errors_exit_one_and_write_nothing() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("runs");
    let out_s = out.to_str().unwrap();
    for args in [
        vec!["splitsde", "simulate", "--params", "gamma=1", "--out", out_s],
        vec!["splitsde", "converge", "--h-obs", "0.3,0.2,0.1", "--out", out_s],
        vec!["splitsde", "infer", "--model", "nope", "--out", out_s],
        vec!["splitsde", "simulate", "--unknown-flag"],
        vec!["splitsde", "simulate", "--config", "/nonexistent/file.cfg"],
    ] {
        assert_eq!(main_with_args(args.clone()), EXIT_INVALID, "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn runtime_failures_exit_two_without_partial_output() {
    let root = tempfile::tempdir().unwrap();
    let blocker = root.path().join("file");
    fs::write(&blocker, "").unwrap();
    let code = main_with_args(["splitsde", "simulate", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code, EXIT_RUNTIME);
    assert_eq!(run_dirs(root.path()), vec![blocker]);
}
