//! Executes a resolved configuration and writes its artifacts.

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use splitsde::analysis::check::run_invariant_suite;
use splitsde::analysis::convergence::{strong_error_study, ConvergenceSpec, Reference};
use splitsde::analysis::study::{inference_study, RowStatus, StudySpec};
use splitsde::analysis::wasserstein::one_step_wasserstein;
use splitsde::analysis::AnalysisError;
use splitsde::model::Model;
use splitsde::optimize::NmConfig;
use splitsde::rng::{make_noise_grid, StreamKey};
use splitsde::scheme::{simulate_path, SchemeKind, SimOptions, Trajectory};
use thiserror::Error;

use crate::config::{steps, Command, RunConfig};
use crate::output::{num, Csv, StagedRun};
use crate::svg::{log_log, Series};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Setup(String),
    #[error("{failed} of {total} invariant checks failed")]
    ChecksFailed { failed: usize, total: usize, dir: PathBuf },
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    /// One human-readable line per headline result.
    pub summary: Vec<String>,
}

/// Artifacts and bookkeeping collected before anything touches the disk.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    failures: BTreeMap<String, usize>,
    summary: Vec<String>,
}

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn fail(&mut self, cell: String, count: usize) {
        if count > 0 {
            *self.failures.entry(cell).or_default() += count;
        }
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn options(cfg: &RunConfig) -> SimOptions {
    SimOptions { adaptive: cfg.adaptive, truncate: false }
}

fn bind(cfg: &RunConfig) -> Result<Model, RunError> {
    cfg.model.bind(&cfg.params).map_err(|e| RunError::Setup(e.to_string()))
}

fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let model = bind(cfg)?;
    let scheme = cfg.schemes[0];
    let n = steps(cfg.t, cfg.h_fine).ok_or_else(|| RunError::Setup("T is not a multiple of h_fine".into()))?;
    let paths: Vec<Option<Trajectory>> = (0..cfg.m)
        .into_par_iter()
        .map(|i| {
            let grid = make_noise_grid(StreamKey::path_noise(cfg.seed, i as u64), cfg.h_fine, n).ok()?;
            simulate_path(scheme, &model, cfg.x0, &grid, options(cfg)).ok()
        })
        .collect();
    let mut csv = Csv::new(&["path_id", "t", "x"]);
    for (i, path) in paths.iter().enumerate() {
        let Some(path) = path else { continue };
        for (k, x) in path.values.iter().enumerate() {
            csv.row(&[i.to_string(), num(path.time(k)), num(*x)]);
        }
    }
    let aborted = paths.iter().filter(|p| p.is_none()).count();
    out.fail(format!("simulate.{scheme}.aborted_paths"), aborted);
    out.summary.push(format!("{} paths of {n} steps ({scheme}), {aborted} aborted", cfg.m));
    out.add("paths.csv", csv.into_bytes());
    Ok(())
}

fn converge(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let model = bind(cfg)?;
    let spec = ConvergenceSpec {
        x0: cfg.x0,
        t: cfg.t,
        h_list: cfg.h_obs.clone(),
        reference: Reference::FineGrid { scheme: SchemeKind::LieTrotter, h_fine: cfg.h_fine },
        m: cfg.m,
        seed: cfg.seed,
        options: options(cfg),
    };
    let reports = strong_error_study(&cfg.schemes, &model, &spec)?;
    let mut mse = Csv::new(&["h", "s_n", "m", "scheme", "model"]);
    let mut slopes = Csv::new(&["scheme", "model", "slope", "intercept", "r2", "coupling_deviation"]);
    let mut series = Vec::new();
    for report in &reports {
        for row in &report.rows {
            mse.row(&[num(row.h), num(row.s_n), row.paths.to_string(), report.scheme.to_string(), cfg.model.to_string()]);
            out.fail(format!("converge.{}.h={}.failed_paths", report.scheme, row.h), row.failed);
        }
        let (slope, intercept, r2) = report.fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.slope, f.intercept, f.r2));
        slopes.row(&[report.scheme.to_string(), cfg.model.to_string(), num(slope), num(intercept), num(r2), num(report.coupling_deviation)]);
        out.summary.push(format!("{:<13} slope {slope:.4}", report.scheme.id()));
        series.push(Series { label: report.scheme.to_string(), points: report.rows.iter().map(|r| (r.h, r.s_n)).collect() });
    }
    out.add("mse.csv", mse.into_bytes());
    out.add("slopes.csv", slopes.into_bytes());
    if cfg.svg {
        let title = format!("strong error, {}", cfg.model);
        out.add("mse.svg", log_log(&title, "h", "S_N", &series).into_bytes());
    }
    Ok(())
}

fn infer(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let spec = StudySpec {
        model: cfg.model,
        alpha0: cfg.params.clone(),
        x0: cfg.x0,
        estimators: cfg.estimators.clone(),
        h_fine: cfg.h_fine,
        h_obs: cfg.h_obs.clone(),
        n_obs: cfg.n.clone(),
        m: cfg.m,
        fixed_mask: cfg.fixed_mask(),
        init: cfg.init.clone(),
        seed: cfg.seed,
        nm: NmConfig::default(),
    };
    let table = inference_study(&spec)?;
    let names = cfg.model.param_names();
    let mut csv = Csv::new(&["replicate", "estimator", "h_obs", "n", "param", "value", "nll", "converged", "runtime_ms"]);
    for row in &table.rows {
        let status = match row.status {
            RowStatus::Converged => "true".to_string(),
            RowStatus::NotConverged => "false".to_string(),
            other => other.to_string(),
        };
        let flat = row.fit.as_ref().map(|f| f.params.to_flat());
        for (i, name) in names.iter().enumerate() {
            let (value, nll, runtime) = match (&row.fit, &flat) {
                (Some(f), Some(p)) => (num(p[i]), num(f.nll), num(f.runtime_ms)),
                _ => (String::new(), String::new(), String::new()),
            };
            csv.row(&[row.replicate.to_string(), row.estimator.to_string(), num(row.h_obs), row.n.to_string(), name.to_string(), value, nll, status.clone(), runtime]);
        }
    }
    let mut summary = Csv::new(&["estimator", "h_obs", "n", "param", "converged", "q25", "median", "q75"]);
    for &h in &cfg.h_obs {
        for &n in &cfg.n {
            for &e in &cfg.estimators {
                let mut by_status: BTreeMap<String, usize> = BTreeMap::new();
                for row in table.cell(e, h, n) {
                    if row.status != RowStatus::Converged {
                        *by_status.entry(row.status.to_string()).or_default() += 1;
                    }
                }
                for (status, count) in by_status {
                    out.fail(format!("infer.{e}.h_obs={h}.n={n}.{status}"), count);
                }
                for (i, name) in names.iter().enumerate() {
                    if cfg.fixed.iter().any(|f| f == name) {
                        continue;
                    }
                    let Some(s) = table.summary(e, h, n, i) else { continue };
                    let q = s.quartiles;
                    summary.row(&[e.to_string(), num(h), n.to_string(), name.to_string(), s.count.to_string(), num(q.q25), num(q.median), num(q.q75)]);
                    out.summary.push(format!("{:<8} h_obs={h:<5} N={n:<5} {name:<6} median {:.5}  IQR {:.5}", e.id(), q.median, q.iqr()));
                }
            }
        }
    }
    out.add("estimates.csv", csv.into_bytes());
    out.add("summary.csv", summary.into_bytes());
    Ok(())
}

fn wasserstein(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), RunError> {
    let model = bind(cfg)?;
    let mut csv = Csv::new(&["scheme", "h", "w1", "m"]);
    for &h in &cfg.h_obs {
        for &scheme in &cfg.schemes {
            let w1 = one_step_wasserstein(&model, scheme, h, cfg.x0, cfg.m, cfg.seed)?;
            csv.row(&[scheme.to_string(), num(h), num(w1), cfg.m.to_string()]);
            out.summary.push(format!("{:<13} h={h}  W1 {w1:.6}", scheme.id()));
        }
    }
    out.add("wasserstein.csv", csv.into_bytes());
    Ok(())
}

fn check(out: &mut Artifacts) -> usize {
    let mut csv = Csv::new(&["check", "passed", "detail"]);
    let mut failed = 0;
    for outcome in run_invariant_suite() {
        failed += usize::from(!outcome.passed);
        out.fail(format!("check.{}", outcome.name.replace(' ', "_")), usize::from(!outcome.passed));
        out.summary.push(format!("{} {}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.name, outcome.detail));
        csv.row(&[quote(outcome.name), outcome.passed.to_string(), quote(&outcome.detail)]);
    }
    out.add("checks.csv", csv.into_bytes());
    failed
}

fn manifest(cfg: &RunConfig, created: &str, runtime_ms: f64, out: &Artifacts) -> String {
    let mut text = format!("# {} {}\n# command={}\n# created={created}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"), cfg.command);
    text.push_str(&format!("# runtime_ms.compute={runtime_ms:.3}\n"));
    if out.failures.is_empty() {
        text.push_str("# failures=none\n");
    }
    for (cell, count) in &out.failures {
        text.push_str(&format!("# failures.{cell}={count}\n"));
    }
    text.push_str("# resolved configuration; pass this file to --config to rerun\n");
    text.push_str(&cfg.serialize());
    text
}

/// Runs the command, then moves the finished run directory into place.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let now = chrono::Utc::now();
    let created = now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let staged = StagedRun::create(&cfg.out, &now.format("%Y%m%dT%H%M%SZ").to_string(), cfg.seed)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(|e| RunError::Setup(e.to_string()))?;

    let start = Instant::now();
    let mut artifacts = Artifacts::default();
    let mut failed_checks = 0;
    pool.install(|| -> Result<(), RunError> {
        match cfg.command {
            Command::Simulate => simulate(cfg, &mut artifacts),
            Command::Converge => converge(cfg, &mut artifacts),
            Command::Infer => infer(cfg, &mut artifacts),
            Command::Wasserstein => wasserstein(cfg, &mut artifacts),
            Command::Check => {
                failed_checks = check(&mut artifacts);
                Ok(())
            }
        }
    })?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut files = Vec::new();
    for (name, bytes) in &artifacts.files {
        staged.write(name, bytes)?;
        files.push(name.clone());
    }
    staged.write("manifest.txt", manifest(cfg, &created, runtime_ms, &artifacts).as_bytes())?;
    files.push("manifest.txt".into());
    let dir = staged.commit()?;
    if failed_checks > 0 {
        return Err(RunError::ChecksFailed { failed: failed_checks, total: artifacts.summary.len(), dir });
    }
    Ok(RunOutcome { dir, files, summary: artifacts.summary })
}
