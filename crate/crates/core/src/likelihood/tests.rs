use super::*;
use crate::analysis::density::total_mass;
use crate::quad::integrate_with_breaks;
use crate::rng::{make_noise_grid, StreamKey};
use crate::scheme::{simulate_path, step, SchemeKind, SimOptions};

fn bind(kind: ModelKind, flat: &[f64]) -> Model {
    kind.bind(&ParamVector::from_flat(kind, flat).unwrap()).unwrap()
}

fn cir() -> Model {
    bind(ModelKind::Cir, &[2.0, 6.0, 0.2])
}

fn student() -> Model {
    bind(ModelKind::Student, &[2.0, 10.0, 5.0])
}

fn pair(kind: ModelKind, h: f64, x0: f64, x1: f64) -> ObservationSet {
    ObservationSet::new(kind, h, vec![x0, x1]).unwrap()
}

fn cir_path(seed: u64, n: usize, h: f64) -> ObservationSet {
    let m = cir();
    let grid = make_noise_grid(StreamKey::path_noise(seed, 0), h, n).unwrap();
    let path = simulate_path(SchemeKind::Exact, &m, 1.0, &grid, SimOptions::default()).unwrap();
    ObservationSet::from_trajectory(&path, 1, n).unwrap()
}

#[test]
fn ids_and_support() {
    for e in EstimatorKind::ALL {
        assert_eq!(e.id().parse::<EstimatorKind>().unwrap(), e);
    }
    assert!(!EstimatorKind::Hermite.supports(ModelKind::Cir));
    assert!(!EstimatorKind::TrueMle.supports(ModelKind::Student));
    let obs = pair(ModelKind::Cir, 0.1, 1.0, 1.1);
    let p = cir().params().clone();
    assert!(matches!(nll(EstimatorKind::Hermite, ModelKind::Cir, &p, &obs), Err(LikelihoodError::Unsupported { .. })));
}

#[test]
fn observation_set_validation() {
    assert!(ObservationSet::new(ModelKind::Cir, 0.0, vec![1.0, 2.0]).is_err());
    assert!(ObservationSet::new(ModelKind::Cir, 0.1, vec![1.0]).is_err());
    assert!(ObservationSet::new(ModelKind::Cir, 0.1, vec![1.0, f64::NAN]).is_err());
    let obs = ObservationSet::new(ModelKind::Cir, 0.1, vec![1.0, -2.0]).unwrap();
    assert!(obs.validate_against(&cir()).is_err());
}

#[test]
fn lt_zero_residual_leaves_log_diffusion() {
    let m = student();
    let (h, x0) = (0.1, 1.0);
    let x1 = m.phi1(h, x0).unwrap();
    let v = lt_nll(&m, &pair(ModelKind::Student, h, x0, x1));
    assert!((v.value - m.g(x1).ln()).abs() < 1e-12);
    assert_eq!(v.n_terms, 1);
}

#[test]
fn invalid_parameters_give_infinity() {
    let obs = pair(ModelKind::Student, 0.1, 1.0, 1.2);
    for e in [EstimatorKind::LieTrotter, EstimatorKind::Strang, EstimatorKind::Kessler, EstimatorKind::EulerMaruyama, EstimatorKind::LampertiEuler] {
        let v = nll(e, ModelKind::Student, &ParamVector::new(vec![2.0, 10.0], vec![-1.0]), &obs).unwrap();
        assert_eq!(v.value, f64::INFINITY);
        assert_eq!(v.invalid_reason, Some(InvalidReason::ParamsInvalid));
    }
}

#[test]
fn student_lt_nll_matches_density() {
    let m = student();
    let (h, x0, x1) = (0.1, 1.0, 3.0);
    let v = lt_nll(&m, &pair(ModelKind::Student, h, x0, x1)).value;
    let density = transition_density(EstimatorKind::LieTrotter, &m, h, x0, x1).unwrap();
    let from_nll = (-v - nll_constant(h)).exp();
    assert!((from_nll / density - 1.0).abs() < 1e-10);
    // Independent form: Gaussian in Lamperti coordinates divided by g.
    let s = 20f64.sqrt();
    let mean = m.phi1(h, x0).unwrap().asinh() / s;
    let direct = (-(x1.asinh() / s - mean).powi(2) / (2.0 * h)).exp() / (2.0 * std::f64::consts::PI * h).sqrt() / m.g(x1);
    assert!((density / direct - 1.0).abs() < 1e-12);
}

#[test]
fn strang_zero_residual() {
    let m = student();
    let (h, x0) = (0.1, 1.0);
    let x1 = m.phi1(h, x0).unwrap();
    let v = strang_nll(&m, &pair(ModelKind::Student, h, x0, x1)).value;
    let w = m.phi1(0.5 * h, x0).unwrap();
    let (_, dw) = m.phi1_inverse(0.5 * h, x1).unwrap();
    assert!((v - (m.g(w).ln() - dw.ln())).abs() < 1e-10);
}

#[test]
fn ou_strang_minimiser_is_the_regression_target() {
    let (theta, mu0) = (2.0, 1.0);
    let ou = bind(ModelKind::Ou, &[theta, mu0]);
    let grid = make_noise_grid(StreamKey::path_noise(4, 0), 0.05, 400).unwrap();
    let path = simulate_path(SchemeKind::Exact, &ou, 0.0, &grid, SimOptions::default()).unwrap();
    let obs = ObservationSet::from_trajectory(&path, 1, 400).unwrap();
    let h = obs.h;
    let at = |mu: f64| strang_nll(&bind(ModelKind::Ou, &[theta, mu]), &obs).value;
    // The objective is an exact quadratic in μ: three evaluations locate it.
    let (a, b, c) = (at(0.0), at(1.0), at(2.0));
    let vertex = 1.0 - 0.5 * (c - a) / (c - 2.0 * b + a);
    let decay = (-theta * h).exp();
    let target = obs.values.windows(2).map(|w| w[1] - decay * w[0]).sum::<f64>() / (obs.n() as f64 * (1.0 - decay));
    assert!((vertex - target).abs() < 1e-9, "{vertex} vs {target}");
}

#[test]
fn ahn_gao_strang_inverse_undefined() {
    let m = bind(ModelKind::AhnGao, &[0.2, 2.0, 0.5]);
    let h = 0.1;
    let (a, b) = (0.4f64, 0.2 + 0.75 * 0.25);
    let threshold = a * (a * h / 2.0).exp() / (b * (a * h / 2.0).exp_m1());
    let obs = ObservationSet::new(ModelKind::AhnGao, h, vec![2.0, 1.1 * threshold, 2.0]).unwrap();
    let v = strang_nll(&m, &obs);
    assert_eq!(v.value, f64::INFINITY);
    assert_eq!(v.invalid_reason, Some(InvalidReason::InverseUndefined));
    assert!(lt_branching_nll(&m, &obs).is_finite());
}

#[test]
fn densities_integrate_to_one() {
    let cases = [
        (cir(), 1.0),
        (bind(ModelKind::FDiffusion, &[2.0, 10.0, 2.0]), 1.0),
        (bind(ModelKind::WrightFisher, &[1.0, 0.5, -0.3]), 0.3),
        (student(), 1.0),
        (bind(ModelKind::Igbm, &[1.0, 1.0, 0.5]), 1.0),
    ];
    for (m, x0) in &cases {
        for h in [0.01, 0.1] {
            for e in [EstimatorKind::LieTrotter, EstimatorKind::Strang, EstimatorKind::LampertiEuler] {
                let mass = total_mass(e, m, h, *x0, 1e-9).unwrap();
                assert!((mass - 1.0).abs() < 1e-6, "{} {e} h={h}: {mass}", m.kind());
            }
        }
    }
    let mass = total_mass(EstimatorKind::TrueMle, &cir(), 0.1, 1.0, 1e-9).unwrap();
    assert!((mass - 1.0).abs() < 1e-6);
}

#[test]
fn cir_negative_branch_vanishes_for_small_steps() {
    let m = cir();
    let h = 0.001;
    for y in [0.9, 1.0, 1.1] {
        let obs = pair(ModelKind::Cir, h, 1.0, y);
        let both = lt_branching_nll(&m, &obs).value;
        let single = lt_nll(&m, &obs).value;
        assert!((both - single).abs() < 1e-12);
    }
    // Near zero with a large step the second branch matters.
    let obs = pair(ModelKind::Cir, 1.0, 0.01, 0.01);
    let m_low = bind(ModelKind::Cir, &[2.0, 0.2, 0.2]);
    assert!(lt_branching_nll(&m_low, &obs).value < lt_nll(&m_low, &obs).value - 1e-6);
}

#[test]
fn cir_branch_density_closed_form() {
    // [f_Y(√y) + f_Y(−√y)]/(2√y) written for the scaled square, Y ~ N(√φ, θbh/2).
    let m = cir();
    let (h, x0): (f64, f64) = (0.1, 1.0);
    let phi = m.phi1(h, x0).unwrap();
    let var = 2.0 * 0.2 * h / 2.0;
    for y in [0.5f64, 1.5, 2.5] {
        let fy = |z: f64| (-(z - phi.sqrt()).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let closed = (fy(y.sqrt()) + fy(-y.sqrt())) / (2.0 * y.sqrt());
        let ours = transition_density(EstimatorKind::LieTrotter, &m, h, x0, y).unwrap();
        assert!((ours / closed - 1.0).abs() < 1e-10, "{y}: {ours} vs {closed}");
    }
}

#[test]
fn f_diffusion_density_matches_histogram_at_mode() {
    let m = bind(ModelKind::FDiffusion, &[2.0, 10.0, 2.0]);
    let (h, x0) = (0.1, 1.0);
    // Interior mode; the density also has an integrable 1/√y spike at zero.
    let (mut mode, mut peak) = (0.0, 0.0);
    for i in 200..4000 {
        let y = i as f64 * 1e-3;
        let d = transition_density(EstimatorKind::LieTrotter, &m, h, x0, y).unwrap();
        if d > peak {
            peak = d;
            mode = y;
        }
    }
    let width = 0.02;
    let mut stream = StreamKey::path_noise(21, 0).normals();
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| {
            let y = step(SchemeKind::LieTrotter, &m, h, x0, h.sqrt() * stream.next_standard()).unwrap();
            (y - mode).abs() < 0.5 * width
        })
        .count();
    let kde = hits as f64 / (n as f64 * width);
    assert!((kde / peak - 1.0).abs() < 0.05, "{kde} vs {peak} at {mode}");
}

#[test]
fn strang_out_of_image_is_zero() {
    let m = cir();
    let h = 1.0;
    // φ⁻¹_{h/2}(y) < 0 for y below μ̃(1 − e^{−θh/2}).
    let y = 0.5 * 5.9 * (1.0 - (-1.0f64).exp());
    assert_eq!(transition_density(EstimatorKind::Strang, &m, h, 1.0, y).unwrap(), 0.0);
    let v = strang_branching_nll(&m, &pair(ModelKind::Cir, h, 1.0, y));
    assert_eq!(v.value, f64::INFINITY);
    assert_eq!(v.invalid_reason, Some(InvalidReason::InverseUndefined));
}

/// KS distance between one-step samples and the integrated density on a grid.
fn ks_on_grid(m: &Model, e: EstimatorKind, s: SchemeKind, h: f64, x0: f64, seed: u64) -> f64 {
    let mut stream = StreamKey::path_noise(seed, 0).normals();
    let n = 100_000;
    let mut draws: Vec<f64> = (0..n).map(|_| step(s, m, h, x0, h.sqrt() * stream.next_standard()).unwrap()).collect();
    draws.sort_by(f64::total_cmp);
    let lo = draws[0];
    let hi = draws[n - 1];
    let points = 300;
    let f = |y: f64| transition_density(e, m, h, x0, y).unwrap();
    let below = if m.state_space().lower.is_finite() {
        crate::quad::integrate(f, m.state_space().lower, lo, 1e-12)
    } else {
        crate::quad::integrate_lower_tail(f, lo, 1.0, 1e-12)
    };
    let mut cdf = below;
    let mut prev = lo;
    let mut worst: f64 = 0.0;
    for i in 1..=points {
        let y = lo + (hi - lo) * i as f64 / points as f64;
        cdf += integrate_with_breaks(f, prev, y, &[], 1e-12);
        prev = y;
        let emp = draws.partition_point(|d| *d <= y) as f64 / n as f64;
        worst = worst.max((emp - cdf).abs());
    }
    worst
}

#[test]
fn samples_match_densities() {
    let cases = [
        (cir(), 1.0, 0.1),
        (bind(ModelKind::WrightFisher, &[1.0, 0.5, -0.3]), 0.05, 0.1),
        (student(), 1.0, 0.1),
    ];
    for (i, (m, x0, h)) in cases.iter().enumerate() {
        for (e, s) in [(EstimatorKind::LieTrotter, SchemeKind::LieTrotter), (EstimatorKind::Strang, SchemeKind::Strang)] {
            let d = ks_on_grid(m, e, s, *h, *x0, 40 + i as u64);
            assert!(d < 0.01, "{} {e}: KS {d}", m.kind());
        }
    }
}

#[test]
fn wright_fisher_strang_total_variation() {
    let m = bind(ModelKind::WrightFisher, &[1.0, 0.5, -0.3]);
    let (h, x0) = (0.1, 0.05);
    let bins = 100;
    let mut counts = vec![0usize; bins];
    let mut stream = StreamKey::path_noise(31, 0).normals();
    let n = 1_000_000;
    for _ in 0..n {
        let y = step(SchemeKind::Strang, &m, h, x0, h.sqrt() * stream.next_standard()).unwrap();
        counts[((y * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let tv: f64 = (0..bins)
        .map(|b| {
            let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
            let p = crate::quad::integrate(|y| transition_density(EstimatorKind::Strang, &m, h, x0, y).unwrap(), lo, hi, 1e-12);
            (p - counts[b] as f64 / n as f64).abs()
        })
        .sum::<f64>()
        * 0.5;
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn kessler_examples() {
    let ou = bind(ModelKind::Ou, &[2.0, 1.0]);
    let obs = ObservationSet::new(ModelKind::Ou, 0.1, vec![0.0, 0.4, 0.9, 0.7]).unwrap();
    let k = kessler_nll(&ou, &obs).value;
    let t = true_nll(&ou, &obs).unwrap().value;
    assert!((k - t).abs() < 1e-12);

    let m = cir();
    let (mean, _) = kessler_moments(&m, 0.1, 1.0);
    assert!((mean - (1.0 * (-0.2f64).exp() + 6.0 * (1.0 - (-0.2f64).exp()))).abs() < 1e-12);

    // A large step makes the expanded variance negative.
    let verhulst = bind(ModelKind::Verhulst, &[1.0, 1.0, 0.1]);
    let (_, var) = kessler_moments(&verhulst, 2.0, 10.0);
    assert!(var <= 0.0);
    let v = kessler_nll(&verhulst, &pair(ModelKind::Verhulst, 2.0, 10.0, 1.0));
    assert_eq!(v.value, f64::INFINITY);
    assert_eq!(v.invalid_reason, Some(InvalidReason::ParamsInvalid));
}

#[test]
fn generator_expansion_is_third_order() {
    let m = cir();
    let x = 1.3;
    let err = |h: f64| {
        let (em, ev) = m.exact_moments(h, x).unwrap();
        let (gm, gv) = generator_moments(&m, h, x);
        ((gm - em).abs(), (gv - ev).abs())
    };
    let (m1, v1) = err(0.02);
    let (m2, v2) = err(0.01);
    assert!((m1 / m2 - 8.0).abs() < 0.5, "mean ratio {}", m1 / m2);
    assert!((v1 / v2 - 8.0).abs() < 0.5, "variance ratio {}", v1 / v2);
}

#[test]
fn euler_examples() {
    let ou = bind(ModelKind::Ou, &[2.0, 1.0]);
    let h = 0.1;
    let x0 = 0.3;
    let x1 = x0 + ou.f(x0) * h;
    let v = em_nll(&ou, &pair(ModelKind::Ou, h, x0, x1)).value;
    assert!((v - ou.g(x0).ln()).abs() < 1e-14);
    // Quadrupling `a` doubles g for IGBM (drift unchanged): +ln 2.
    let (lo, hi) = (bind(ModelKind::Igbm, &[1.0, 1.0, 0.5]), bind(ModelKind::Igbm, &[1.0, 1.0, 2.0]));
    let x1 = 1.2 + lo.f(1.2) * h;
    let obs = pair(ModelKind::Igbm, h, 1.2, x1);
    assert!((em_nll(&hi, &obs).value - em_nll(&lo, &obs).value - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn lamperti_euler_examples() {
    let ou = bind(ModelKind::Ou, &[2.0, 1.0]);
    let v = lamperti_em_nll(&ou, &pair(ModelKind::Ou, 0.1, 1.0, 1.0)).value;
    assert!((v - ou.g(1.0).ln()).abs() < 1e-14);
    let obs = ObservationSet::new(ModelKind::Ou, 0.1, vec![0.0, 0.4, 0.9, 0.7]).unwrap();
    assert!((lamperti_em_nll(&ou, &obs).value - em_nll(&ou, &obs).value).abs() < 1e-12);
    let data = cir_path(5, 200, 0.5);
    assert!(lamperti_em_nll(&cir(), &data).is_finite());
}

#[test]
fn nll_equals_summed_log_density() {
    let data = cir_path(6, 50, 0.1);
    let m = cir();
    for e in [EstimatorKind::LieTrotter, EstimatorKind::Strang, EstimatorKind::Kessler, EstimatorKind::EulerMaruyama, EstimatorKind::LampertiEuler, EstimatorKind::TrueMle] {
        let value = model_nll(e, &m, &data).unwrap().value;
        let summed: f64 = data.values.windows(2).map(|w| -transition_log_density(e, &m, data.h, w[0], w[1]).unwrap()).sum();
        let shifted = summed - data.n() as f64 * nll_constant(data.h);
        assert!((value - shifted).abs() < 1e-9 * (1.0 + value.abs()), "{e}: {value} vs {shifted}");
    }
}

#[test]
fn nll_is_deterministic() {
    let data = cir_path(7, 100, 0.1);
    let p = cir().params().clone();
    for e in [EstimatorKind::LieTrotter, EstimatorKind::Strang, EstimatorKind::Kessler] {
        assert_eq!(nll(e, ModelKind::Cir, &p, &data).unwrap(), nll(e, ModelKind::Cir, &p, &data).unwrap());
    }
}
