use mnar_core::links::LinkFunction;
use mnar_core::models::ResponseModel;
use mnar_core::simulate::{
    generate, run_monte_carlo, CovariateLaw, true_cc_bias, true_respondent_mean, true_response_rate, McConfig, McEstimator,
    ScenarioSpec,
};

fn presets() -> Vec<ScenarioSpec> {
    vec![
        ScenarioSpec::s1(1.0),
        ScenarioSpec::s2(0.5),
        ScenarioSpec::s3(),
        ScenarioSpec::s4(LinkFunction::Logistic),
        ScenarioSpec::s4(LinkFunction::Cauchy),
    ]
}

#[test]
fn response_rates_match_quadrature() {
    let n = 1_000_000;
    for (k, spec) in presets().iter().enumerate() {
        let data = generate(spec, n, 100 + k as u64).unwrap();
        let p = true_response_rate(spec).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let got = data.response_rate();
        assert!((got - p).abs() <= 4.0 * se, "{}: {got} vs {p}", spec.name);
    }
}

#[test]
fn s3_rate_at_fixed_covariates() {
    let mut spec = ScenarioSpec::s3();
    let (u, z) = (0.3, -0.8);
    spec.u_law = CovariateLaw::Fixed(u);
    spec.z_law = CovariateLaw::Fixed(z);

    // two-point enumeration
    let p1 = spec.outcome.mean(&[u], &[z]);
    let inv = |y: f64| 1.0 / spec.response.response_prob(&[u], y).unwrap();
    let p = 1.0 / ((1.0 - p1) * inv(0.0) + p1 * inv(1.0));
    assert!((spec.response_rate_at(&[u], &[z]).unwrap() - p).abs() < 1e-14);

    let n = 1_000_000;
    let data = generate(&spec, n, 5).unwrap();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((data.response_rate() - p).abs() <= 4.0 * se);
}

#[test]
fn s1_respondent_mean_matches_quadrature() {
    let spec = ScenarioSpec::s1(1.0);
    let data = generate(&spec, 1_000_000, 33).unwrap();
    let (_, _, y) = data.observed();
    let k = y.len() as f64;
    let m = y.iter().sum::<f64>() / k;
    let sd = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k - 1.0)).sqrt();
    let truth = true_respondent_mean(&spec).unwrap();
    assert!((m - truth).abs() <= 4.0 * sd / k.sqrt(), "{m} vs {truth}");
}

#[test]
fn y_free_mechanism_gives_half_response() {
    let mut spec = ScenarioSpec::s1(1.0);
    spec.response = ResponseModel::standard(LinkFunction::Logistic, vec![0.0, 0.0], 0.0).unwrap();
    let n = 200_000;
    let data = generate(&spec, n, 9).unwrap();
    let se = (0.25 / n as f64).sqrt();
    assert!((data.response_rate() - 0.5).abs() <= 4.0 * se);
    assert!((true_response_rate(&spec).unwrap() - 0.5).abs() < 1e-14);
    assert!(true_cc_bias(&spec).unwrap().abs() < 1e-12);
}

#[test]
fn published_cc_biases() {
    let cases = [
        (ScenarioSpec::s1(1.0), 0.053),
        (ScenarioSpec::s1(0.5), 0.039),
        (ScenarioSpec::s1(0.1), 0.034),
        (ScenarioSpec::s2(1.0), 0.146),
        (ScenarioSpec::s2(0.5), 0.130),
        (ScenarioSpec::s2(0.1), 0.127),
        (ScenarioSpec::s3(), 0.100),
        (ScenarioSpec::s4(LinkFunction::Logistic), 0.341),
        (ScenarioSpec::s4(LinkFunction::Cauchy), 0.296),
    ];
    for (spec, published) in cases {
        let b = true_cc_bias(&spec).unwrap();
        assert!((b - published).abs() <= 0.015, "{} {:?}: {b}", spec.name, spec.kappa2);
    }
}

#[test]
fn generation_is_reproducible() {
    let spec = ScenarioSpec::s2(1.0);
    assert_eq!(generate(&spec, 500, 4).unwrap(), generate(&spec, 500, 4).unwrap());
    assert_ne!(generate(&spec, 500, 4).unwrap(), generate(&spec, 500, 5).unwrap());
}

#[test]
fn oracle_bias_is_negligible() {
    let spec = ScenarioSpec::s3();
    let rep = run_monte_carlo(
        &spec,
        &McConfig {
            n: 2000,
            r: 300,
            seed: 2,
            estimator: McEstimator::OracleTruth,
        },
    )
    .unwrap();
    let row = rep.find("E[y]", "Oracle").unwrap();
    assert!(row.bias.abs() <= 3.0 * row.bias_mcse.unwrap());
    for r in &rep.rows {
        assert!(r.rmse * r.rmse >= r.bias * r.bias - 1e-12);
    }
}
