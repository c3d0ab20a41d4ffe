//! Self-checks of the structural identities every model and scheme must obey.

use super::density::total_mass;
use crate::likelihood::{model_nll, nll_constant, transition_log_density, EstimatorKind, ObservationSet};
use crate::model::{Model, ModelKind};
use crate::optimize::{fit, NmConfig};
use crate::rng::{coarsen, make_noise_grid, StreamKey};
use crate::scheme::{simulate_path, SchemeKind, SimOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn reference_model(kind: ModelKind) -> Model {
    kind.bind(&kind.reference_params()).expect("reference parameters are valid")
}

/// Interior probe points around the reference state.
fn probes(model: &Model) -> Vec<f64> {
    let x = model.kind().reference_state();
    let space = model.state_space();
    if space.upper.is_finite() {
        return (1..10).map(|k| space.lower + (space.upper - space.lower) * k as f64 / 10.0).collect();
    }
    [0.2, 0.5, 0.8, 1.0, 1.3, 2.0, 3.0].iter().map(|k| k * x).filter(|p| space.contains_interior(*p)).collect()
}

/// Runs `check` on every reference model and reports the first mismatch.
fn per_model(name: &'static str, check: impl Fn(&Model, f64) -> Option<String>) -> CheckOutcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for kind in ModelKind::ALL {
        let model = reference_model(kind);
        for x in probes(&model) {
            count += 1;
            if let Some(msg) = check(&model, x) {
                failures.push(format!("{kind} at {x}: {msg}"));
            }
        }
    }
    let passed = failures.is_empty();
    let detail = if passed { format!("{count} probes") } else { failures.join("; ") };
    CheckOutcome { name, passed, detail }
}

fn decomposition() -> CheckOutcome {
    per_model("decomposition identity", |m, x| {
        let (lhs, rhs) = (m.f1(x) + m.f2(x), m.f(x));
        (!close(lhs, rhs, 1e-12)).then(|| format!("f1 + f2 = {lhs}, f = {rhs}"))
    })
}

fn lamperti_pairs() -> CheckOutcome {
    per_model("lamperti pairs", |m, x| {
        let back = m.v(x).and_then(|y| m.v_inv(y));
        match back {
            Ok(b) if close(b, x, 1e-10) => None,
            other => Some(format!("v⁻¹(v(x)) = {other:?}")),
        }
    })
}

fn semigroup() -> CheckOutcome {
    per_model("ode flow semigroup", |m, x| {
        let (s, t) = (0.03, 0.07);
        let two = m.phi1(s, x).and_then(|y| m.phi1(t, y));
        let one = m.phi1(s + t, x);
        match (one, two) {
            (Ok(a), Ok(b)) if close(a, b, 1e-11) => None,
            other => Some(format!("{other:?}")),
        }
    })
}

fn inverse_flow() -> CheckOutcome {
    per_model("inverse flow pairs", |m, x| {
        let h = 0.05;
        let back = m.phi1(h, x).and_then(|y| m.phi1_inverse(h, y));
        match back {
            Ok((b, d)) if close(b, x, 1e-10) && d > 0.0 => None,
            other => Some(format!("{other:?}")),
        }
    })
}

fn coarsen_sum() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        let grid = make_noise_grid(StreamKey::path_noise(99, i), 2f64.powi(-10), 1024).expect("valid grid");
        for k in [2, 4, 16, 64, 1024] {
            let coarse = coarsen(&grid, k).expect("divisor");
            worst = worst.max((coarse.total() - grid.total()).abs());
        }
    }
    CheckOutcome { name: "coarsen sum", passed: worst <= 1e-12, detail: format!("max deviation {worst:e}") }
}

fn sample_data(kind: ModelKind, n: usize, h: f64) -> ObservationSet {
    let model = reference_model(kind);
    let scheme = if kind.has_exact_law() { SchemeKind::Exact } else { SchemeKind::Strang };
    let grid = make_noise_grid(StreamKey::path_noise(77, kind as u64), h, n).expect("valid grid");
    let path = simulate_path(scheme, &model, kind.reference_state(), &grid, SimOptions::default()).expect("reference path");
    ObservationSet::from_trajectory(&path, 1, n).expect("finite data")
}

fn nll_density_consistency() -> CheckOutcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for kind in ModelKind::ALL {
        let model = reference_model(kind);
        let obs = sample_data(kind, 40, 0.05);
        for est in EstimatorKind::ALL.into_iter().filter(|e| e.supports(kind)) {
            let Ok(value) = model_nll(est, &model, &obs) else { continue };
            count += 1;
            let summed: f64 = obs
                .values
                .windows(2)
                .map(|w| -transition_log_density(est, &model, obs.h, w[0], w[1]).unwrap_or(f64::NAN))
                .sum::<f64>()
                - obs.n() as f64 * nll_constant(obs.h);
            if !(value.value.is_finite() && close(value.value, summed, 1e-9)) {
                failures.push(format!("{kind}/{est}: {} vs {summed}", value.value));
            }
        }
    }
    let passed = failures.is_empty();
    CheckOutcome { name: "nll-density consistency", passed, detail: if passed { format!("{count} model/estimator pairs") } else { failures.join("; ") } }
}

fn normalization() -> CheckOutcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for kind in [ModelKind::Cir, ModelKind::Student, ModelKind::Igbm, ModelKind::FDiffusion, ModelKind::WrightFisher] {
        let model = reference_model(kind);
        for est in [EstimatorKind::LieTrotter, EstimatorKind::Strang] {
            for h in [0.01, 0.1] {
                count += 1;
                match total_mass(est, &model, h, kind.reference_state(), 1e-9) {
                    Ok(mass) if (mass - 1.0).abs() <= 1e-5 => {}
                    other => failures.push(format!("{kind}/{est}/h={h}: {other:?}")),
                }
            }
        }
    }
    let passed = failures.is_empty();
    CheckOutcome { name: "density normalization", passed, detail: if passed { format!("{count} densities") } else { failures.join("; ") } }
}

fn determinism() -> CheckOutcome {
    let model = reference_model(ModelKind::Cir);
    let grid = make_noise_grid(StreamKey::path_noise(5, 5), 0.01, 500).expect("valid grid");
    let run = || simulate_path(SchemeKind::Strang, &model, 1.0, &grid, SimOptions::default()).map(|p| p.values);
    let paths_equal = run() == run();
    let obs = sample_data(ModelKind::Cir, 300, 0.05).with_fixed(vec![Some(2.0), None, None]);
    let init = ModelKind::Cir.reference_params();
    let fit_once = || fit(EstimatorKind::LieTrotter, &obs, &init, &NmConfig::default()).map(|f| (f.params, f.nll, f.iterations));
    let fits_equal = fit_once() == fit_once();
    CheckOutcome { name: "determinism", passed: paths_equal && fits_equal, detail: format!("paths equal: {paths_equal}, fits equal: {fits_equal}") }
}

/// Every structural invariant, in a fixed order.
pub fn run_invariant_suite() -> Vec<CheckOutcome> {
    vec![
        decomposition(),
        lamperti_pairs(),
        semigroup(),
        inverse_flow(),
        coarsen_sum(),
        nll_density_consistency(),
        normalization(),
        determinism(),
    ]
}
