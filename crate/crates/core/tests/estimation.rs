use mnar_core::data::Dataset;
use mnar_core::estimate::{
    bootstrap, fit, fit_outcome_mle, fit_point, ipw_mean, reported_values, CiKind, FitConfig, OutcomeSpec,
    ScoreMethod,
};
use mnar_core::numerics::solver::SolverOptions;
use mnar_core::simulate::{
    generate, generate_stream, run_monte_carlo, true_mean, McConfig, McEstimator, ScenarioSpec,
};

fn config_for(spec: &ScenarioSpec, method: ScoreMethod) -> FitConfig {
    FitConfig {
        outcome: spec.estimation.clone(),
        response: spec.response.clone(),
        method,
        hajek: false,
        solver: SolverOptions::default(),
    }
}

fn quad() -> ScoreMethod {
    ScoreMethod::Quadrature { nodes: 40 }
}

#[test]
fn s1_outcome_mle_is_consistent() {
    let spec = ScenarioSpec::s1(1.0);
    // about 7e4 respondents per 1e5 rows
    let data = generate(&spec, 140_000, 11).unwrap();
    let fit = fit_outcome_mle(&data, &OutcomeSpec::NormalLinear).unwrap();
    let (u, z, y) = data.observed();
    let k = y.len() as f64;
    assert!(k > 95_000.0);
    let g = fit.model.gamma();
    let sigma2 = g[3];
    // coefficient SEs from the respondents' design: u and z are close to
    // independent, so se_j ≈ σ / (sd_j √k)
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / k;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / k).sqrt()
    };
    let se_u = (sigma2 / k).sqrt() / sd(&u);
    let se_z = (sigma2 / k).sqrt() / sd(&z);
    assert!((g[1] - 0.4).abs() < 3.0 * se_u, "u coef {}", g[1]);
    assert!((g[2] - 1.0).abs() < 3.0 * 2.0 * se_z, "z coef {}", g[2]);
    assert!((g[0] - 0.3).abs() < 3.0 * 3.0 * se_z, "intercept {}", g[0]);
    assert!((sigma2 - 0.5).abs() < 3.0 * 0.5 * (2.0 / k).sqrt());
}

fn phi_within_bootstrap_se(spec: &ScenarioSpec, seed: u64, b: usize) {
    let data = generate(spec, 100_000, seed).unwrap();
    let cfg = config_for(spec, ScoreMethod::Quadrature { nodes: 20 });
    let res = fit(&data, &cfg, b, seed, CiKind::Normal).unwrap();
    let truth = spec.response.params();
    for (j, t) in truth.iter().enumerate() {
        let se = res.parameters[j].se.unwrap();
        assert!(se > 0.0);
        assert!(
            (res.phi_hat[j] - t).abs() <= 3.0 * se,
            "{}: {} vs {t} (se {se})",
            spec.name,
            res.phi_hat[j]
        );
    }
}

#[test]
fn s1_mean_score_recovers_truth() {
    phi_within_bootstrap_se(&ScenarioSpec::s1(1.0), 5, 40);
}

#[test]
fn s3_mean_score_recovers_truth() {
    phi_within_bootstrap_se(&ScenarioSpec::s3(), 6, 40);
}

#[test]
fn residual_is_below_tolerance() {
    let spec = ScenarioSpec::s1(1.0);
    let data = generate(&spec, 2000, 3).unwrap();
    let res = fit(&data, &config_for(&spec, quad()), 0, 0, CiKind::Normal).unwrap();
    assert!(res.residual <= 1e-8);
}

#[test]
fn ipw_with_true_phi_matches_population_mean() {
    let spec = ScenarioSpec::s1(1.0);
    let n = 1_000_000;
    let data = generate(&spec, n, 21).unwrap();
    let est = ipw_mean(&data, &spec.response, false).unwrap();
    let mut sq = 0.0;
    for i in 0..n {
        let t = match data.y(i) {
            Some(y) => y / spec.response.response_prob(data.u(i), y).unwrap(),
            None => 0.0,
        };
        sq += (t - est.value).powi(2);
    }
    let sd = (sq / (n as f64 - 1.0)).sqrt();
    let truth = true_mean(&spec).unwrap();
    assert!((est.value - truth).abs() <= 4.0 * sd / (n as f64).sqrt());
}

#[test]
fn ipw_with_true_phi_is_unbiased_across_replicates() {
    let spec = ScenarioSpec::s1(1.0);
    let rep = run_monte_carlo(
        &spec,
        &McConfig {
            n: 2000,
            r: 500,
            seed: 8,
            estimator: McEstimator::OracleTruth,
        },
    )
    .unwrap();
    let row = rep.find("E[y]", "Oracle").unwrap();
    assert!(row.bias.abs() <= 3.0 * row.bias_mcse.unwrap());
    assert!(row.coverage.is_none());
}

#[test]
fn bootstrap_se_tracks_monte_carlo_sd() {
    let spec = ScenarioSpec::s1(1.0);
    let cfg = config_for(&spec, ScoreMethod::Quadrature { nodes: 20 });
    let n = 2000;
    let est: Vec<f64> = (0..300)
        .map(|i| {
            let d = generate_stream(&spec, n, 77, i).unwrap();
            fit(&d, &cfg, 0, 0, CiKind::Normal).unwrap().mean_estimate
        })
        .collect();
    let m = est.iter().sum::<f64>() / est.len() as f64;
    let mc_sd = (est.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (est.len() as f64 - 1.0)).sqrt();

    let d = generate_stream(&spec, n, 78, 0).unwrap();
    let res = fit(&d, &cfg, 200, 78, CiKind::Normal).unwrap();
    let se = res.parameters[res.phi_hat.len()].se.unwrap();
    assert!((se / mc_sd - 1.0).abs() <= 0.3, "bootstrap se {se}, mc sd {mc_sd}");
}

#[test]
fn standardized_fit_reproduces_raw_fit() {
    let spec = ScenarioSpec::s1(1.0);
    let raw = generate(&spec, 3000, 12).unwrap();
    let std = raw.standardize();
    let mut cfg = config_for(&spec, quad());
    cfg.solver.tol = 1e-13;
    for hajek in [false, true] {
        cfg.hajek = hajek;
        let a = fit_point(&raw, &cfg, None).unwrap();
        let b = fit_point(&std, &cfg, None).unwrap();
        let va = reported_values(&a, &cfg, None);
        let vb = reported_values(&b, &cfg, std.standardization.as_ref());
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() < 1e-10, "hajek={hajek}: {x} vs {y}");
        }
    }
}

#[test]
fn fractional_imputation_pipeline_is_deterministic() {
    let spec = ScenarioSpec::s1(1.0);
    let data = generate(&spec, 1500, 4).unwrap();
    let cfg = config_for(&spec, ScoreMethod::FractionalImputation { m: 200, seed: 9 });
    let a = fit(&data, &cfg, 20, 3, CiKind::Percentile).unwrap();
    let b = fit(&data, &cfg, 20, 3, CiKind::Percentile).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let q = fit(&data, &config_for(&spec, quad()), 0, 0, CiKind::Normal).unwrap();
    assert!((a.mean_estimate - q.mean_estimate).abs() < 0.05);
}

#[test]
fn bootstrap_is_reproducible() {
    let spec = ScenarioSpec::s3();
    let data: Dataset = generate(&spec, 800, 2).unwrap();
    let cfg = config_for(&spec, quad());
    let run = || {
        bootstrap(&data, 1000, 17, |d, _| {
            fit_point(d, &cfg, None).map(|p| reported_values(&p, &cfg, None))
        })
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.se, b.se);
    assert_eq!(a.percentile, b.percentile);
}
