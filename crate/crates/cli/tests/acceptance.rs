//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::time::{Duration, Instant};

use mnar_cli::{cmd_fit, cmd_simulate, FitFlags, SimulateArgs};
use mnar_core::estimate::{score_s0, score_s1, CiKind, S0Evaluation, ScoreMethod};
use mnar_core::identify::{
    check_categorical, check_completeness_counterexample, check_tail_condition, verify_equal_observed_likelihood,
    CategoricalRespondentTable, VerdictStatus, DEFAULT_S_GRID,
};
use mnar_core::models::{MeanBasis, OutcomeModel, ResponseModel};
use mnar_core::numerics::{integrate_over_y, rng_stream, QuadratureRule};
use mnar_core::simulate::{
    generate, run_monte_carlo, true_cc_bias, true_response_rate, McConfig, McEstimator, McReport, ScenarioSpec,
};
use mnar_core::LinkFunction;
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(id: usize, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let took = t.elapsed();
    let pass = o.pass && took <= limit;
    println!(
        "{} criterion {id}: {title} ({}; {:.2}s of {}s allowed)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn logistic_pair(alpha: [f64; 2], beta: f64) -> (ResponseModel, OutcomeModel) {
    (
        ResponseModel::standard(LinkFunction::Logistic, alpha.to_vec(), beta).unwrap(),
        OutcomeModel::normal(MeanBasis::linear(1, 0), vec![0.0, 1.0], 1.0).unwrap(),
    )
}

fn criterion1() -> Outcome {
    let xs: Vec<(Vec<f64>, Vec<f64>)> = (0..=60).map(|k| (vec![-3.0 + 0.1 * k as f64], vec![])).collect();
    let ys: Vec<f64> = (0..=120).map(|k| -6.0 + 0.1 * k as f64).collect();
    let rule = QuadratureRule::gauss_hermite(60);
    let a = logistic_pair([0.0, 1.0], 1.0);
    let b = logistic_pair([0.0, 3.0], -1.0);
    let c = logistic_pair([0.0, 1.0], 1.1);
    let ab = verify_equal_observed_likelihood((&a.0, &a.1), (&b.0, &b.1), &xs, &ys, &rule, 1e-8).unwrap();
    let ac = verify_equal_observed_likelihood((&a.0, &a.1), (&c.0, &c.1), &xs, &ys, &rule, 1e-8).unwrap();
    outcome(
        ab.equal && ac.distance > 1e-3,
        format!("sup|phi_A - phi_B| = {:.2e}, perturbed distance = {:.3e}", ab.distance, ac.distance),
    )
}

fn criterion2() -> Outcome {
    let r = check_completeness_counterexample(&[-2.0, 0.0, 2.5]);
    outcome(r <= 1e-8, format!("max |E[h]| = {r:.2e}"))
}

fn criterion3() -> Outcome {
    let table = CategoricalRespondentTable::from_columns(&[vec![0.4, 0.2, 0.4], vec![0.2, 0.4, 0.4]]).unwrap();
    let known = table
        .phi_distance(&[0.5, 0.5, 0.5], &[2.0 / 3.0, 2.0 / 3.0, 4.0 / 11.0])
        .unwrap();
    let v = check_categorical(&table);
    let witness = v
        .witness
        .as_ref()
        .map(|w| (table.phi_distance(&w.base, &w.alternative).unwrap(), w.alternative.clone()));
    let ok_witness = witness.as_ref().is_some_and(|(d, alt)| {
        *d <= 1e-12 && alt.iter().all(|p| (0.0..=1.0).contains(p)) && alt.iter().any(|p| (p - 0.5).abs() > 1e-3)
    });
    outcome(
        known <= 1e-12 && v.status == VerdictStatus::NotIdentifiable && ok_witness,
        format!(
            "known mechanisms distance {known:.1e}, verdict {}, witness distance {:.1e}",
            v.status,
            witness.map_or(f64::NAN, |w| w.0)
        ),
    )
}

fn criterion4() -> Outcome {
    let tables = support::random_tables(20240611, 20);
    let mut agree = 0;
    let mut alternatives = 0;
    for t in &tables {
        let claims = check_categorical(&t.table).status != VerdictStatus::Identifiable;
        let exists = support::grid_alternative_exists(&t.columns, &vec![0.5; t.table.m_y()]);
        agree += usize::from(claims == exists);
        alternatives += usize::from(exists);
    }
    outcome(
        agree == tables.len(),
        format!("{agree}/{} verdicts match the grid oracle ({alternatives} with alternatives)", tables.len()),
    )
}

fn criterion5() -> Outcome {
    let cases = [
        (LinkFunction::Logistic, true),
        (LinkFunction::Cauchy, true),
        (LinkFunction::StudentT { df: 4 }, true),
        (LinkFunction::Probit, false),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (link, expect) in cases {
        let t = check_tail_condition(link, &DEFAULT_S_GRID);
        ok &= t.holds == expect && t.probe_agrees;
        parts.push(format!("{link} {}", if t.holds { "holds" } else { "fails" }));
    }
    outcome(ok, parts.join(", "))
}

fn criterion6() -> Outcome {
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
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (spec, published) in cases {
        let b = true_cc_bias(&spec).unwrap();
        worst = worst.max((b - published).abs());
        parts.push(format!("{b:.3}"));
    }
    outcome(worst <= 0.015, format!("CC biases [{}], worst gap {worst:.4}", parts.join(", ")))
}

fn mc(spec: &ScenarioSpec, b: usize) -> McReport {
    run_monte_carlo(
        spec,
        &McConfig {
            n: 2000,
            r: 500,
            seed: 20240,
            estimator: McEstimator::Pipeline {
                method: ScoreMethod::Quadrature { nodes: 60 },
                b,
                hajek: false,
                ci: CiKind::Normal,
            },
        },
    )
    .unwrap()
}

fn criterion7() -> Outcome {
    let s1 = mc(&ScenarioSpec::s1(1.0), 200);
    let s3 = mc(&ScenarioSpec::s3(), 200);
    let weak = mc(&ScenarioSpec::s1(0.1), 0);
    let m1 = s1.find("E[y]", "Quadrature").unwrap();
    let m3 = s3.find("E[y]", "Quadrature").unwrap();
    let b1 = s1.find("beta", "Quadrature").unwrap();
    let bw = weak.find("beta", "Quadrature").unwrap();
    let cov = |c: Option<f64>| c.map_or(f64::NAN, |c| 100.0 * c);
    let c1 = cov(m1.coverage);
    let c3 = cov(m3.coverage);
    let pass = m1.bias.abs() <= 0.02
        && (92.0..=98.0).contains(&c1)
        && m3.bias.abs() <= 0.01
        && (92.0..=98.0).contains(&c3)
        && bw.rmse >= 3.0 * b1.rmse;
    outcome(
        pass,
        format!(
            "S1 bias {:.4} CR {c1:.1}%; S3 bias {:.4} CR {c3:.1}%; RMSE(beta) {:.3} at kappa2=0.1 vs {:.3} at 1.0; failures {}/{}/{}",
            m1.bias, m3.bias, bw.rmse, b1.rmse, m1.failures, m3.failures, bw.failures
        ),
    )
}

fn rel_close(fd: f64, an: f64, tol: f64) -> bool {
    (fd - an).abs() <= tol * an.abs().max(1e-2)
}

fn criterion8() -> Outcome {
    let mut rng = rng_stream(8, 0);
    let links = [
        LinkFunction::Logistic,
        LinkFunction::Probit,
        LinkFunction::Cauchy,
        LinkFunction::StudentT { df: 4 },
    ];
    let h = 1e-5;

    let mut s1_ok = 0;
    for i in 0..100 {
        let link = links[i % 4];
        let r = ResponseModel::standard(link, vec![rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5)], rng.random_range(-1.5..1.5))
            .unwrap();
        let (u, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let s = score_s1(&r, &[u], y);
        let good = (0..3).all(|k| {
            let at = |d: f64| {
                let mut p = r.params();
                p[k] += d;
                let m = r.with_params(&p);
                m.link.ln_cdf(m.predictor(&[u], y))
            };
            rel_close((at(h) - at(-h)) / (2.0 * h), s[k], 1e-6)
        });
        s1_ok += usize::from(good);
    }

    let mut os_ok = 0;
    for i in 0..100 {
        let kappa = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (m, y) = if i % 2 == 0 {
            (
                OutcomeModel::bernoulli(MeanBasis::linear(1, 1), kappa).unwrap(),
                f64::from(u8::from(rng.random::<bool>())),
            )
        } else {
            (
                OutcomeModel::normal(MeanBasis::linear(1, 1), kappa, rng.random_range(0.2..2.0)).unwrap(),
                rng.random_range(-2.0..2.0),
            )
        };
        let (u, z) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        let s = m.score(&[u], &[z], y).unwrap();
        let g = m.gamma();
        let good = (0..g.len()).all(|k| {
            let at = |d: f64| {
                let mut p = g.clone();
                p[k] += d;
                m.with_gamma(&p).unwrap().log_density(&[u], &[z], y).unwrap()
            };
            rel_close((at(h) - at(-h)) / (2.0 * h), s[k], 1e-6)
        });
        os_ok += usize::from(good);
    }

    let mut den_ok = 0;
    let gh60 = QuadratureRule::gauss_hermite(60);
    for _ in 0..100 {
        let (a0, b) = (rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5));
        let (mu, s2) = (rng.random_range(-2.0..2.0), rng.random_range(0.1..1.5));
        let r = ResponseModel::standard(LinkFunction::Logistic, vec![a0], b).unwrap();
        let o = OutcomeModel::normal(MeanBasis::linear(0, 1), vec![mu, 0.0], s2).unwrap();
        let q = integrate_over_y(|y| 1.0 / r.response_prob(&[], y).unwrap(), &o, &[], &[0.0], &gh60).unwrap();
        let exact = 1.0 + (-a0 - b * mu + 0.5 * b * b * s2).exp();
        den_ok += usize::from(((q - exact) / exact).abs() < 1e-6);
    }

    // FI vs quadrature, Bonferroni bound over 60 comparisons
    let mut rng = rng_stream(31, 0);
    let m = 100_000;
    let gh100 = QuadratureRule::gauss_hermite(100);
    let mut max_z: f64 = 0.0;
    for cfg in 0..20 {
        let link = links[cfg % 4];
        let r = ResponseModel::standard(
            link,
            vec![rng.random_range(-0.5..1.0), rng.random_range(-0.5..0.5)],
            rng.random_range(-0.5..0.5),
        )
        .unwrap();
        let kappa = vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.2..1.0)];
        let s2: f64 = rng.random_range(0.3..1.0);
        let o = OutcomeModel::normal(MeanBasis::linear(1, 1), kappa, s2).unwrap();
        let (u, z) = ([rng.random_range(-1.0..1.0)], [f64::from(u8::from(cfg % 2 == 1))]);
        let mean = o.mean(&u, &z);
        let draws: Vec<f64> = (0..m).map(|_| mean + s2.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        let quad = score_s0(&r, &o, &u, &z, S0Evaluation::Quadrature(&gh100)).unwrap();
        let fi = score_s0(&r, &o, &u, &z, S0Evaluation::Imputed(&draws)).unwrap();
        let odds: Vec<f64> = draws.iter().map(|&y| link.odds_against(r.predictor(&u, y))).collect();
        let c = odds.iter().sum::<f64>() / m as f64;
        for k in 0..3 {
            let infl: Vec<f64> = draws
                .iter()
                .zip(&odds)
                .map(|(&y, o)| (score_s1(&r, &u, y)[k] + fi[k] * o) / c)
                .collect();
            let mi = infl.iter().sum::<f64>() / m as f64;
            let sd = (infl.iter().map(|v| (v - mi).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
            max_z = max_z.max((fi[k] - quad[k]).abs() / (sd / (m as f64).sqrt()));
        }
    }

    let mut rate_worst: f64 = 0.0;
    for (k, spec) in [
        ScenarioSpec::s1(1.0),
        ScenarioSpec::s2(1.0),
        ScenarioSpec::s3(),
        ScenarioSpec::s4(LinkFunction::Logistic),
    ]
    .iter()
    .enumerate()
    {
        let n = 1_000_000;
        let data = generate(spec, n, 500 + k as u64).unwrap();
        let p = true_response_rate(spec).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        rate_worst = rate_worst.max((data.response_rate() - p).abs() / se);
    }

    outcome(
        s1_ok == 100 && os_ok == 100 && den_ok == 100 && max_z <= 3.34 && rate_worst <= 4.0,
        format!(
            "s1 FD {s1_ok}/100, outcome score FD {os_ok}/100, logistic denominator {den_ok}/100, FI max |z| {max_z:.2} (bound 3.34), response rate max |z| {rate_worst:.2}"
        ),
    )
}

fn criterion9() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let sim = |d: &str| {
        let mut args = SimulateArgs::new("S1", 1000, 20, 9);
        args.b = 20;
        args.emit_dataset = true;
        cmd_simulate(&args, &tmp.path().join(d)).unwrap();
    };
    sim("a");
    sim("b");
    let flags = FitFlags {
        bootstrap: Some(50),
        seed: Some(9),
        ..Default::default()
    };
    let fit = |d: &str| {
        cmd_fit(
            &tmp.path().join("a/dataset.csv"),
            &tmp.path().join("a/model.toml"),
            &flags,
            &tmp.path().join(d),
        )
        .unwrap();
    };
    fit("fa");
    fit("fb");
    let pairs = [
        ("a", "b", "mc_report.csv"),
        ("a", "b", "mc_report.md"),
        ("a", "b", "dataset.csv"),
        ("fa", "fb", "estimates.csv"),
        ("fa", "fb", "estimates.md"),
        ("fa", "fb", "residuals.csv"),
        ("fa", "fb", "verdict.txt"),
    ];
    let same = pairs
        .iter()
        .filter(|(x, y, f)| fs::read(tmp.path().join(x).join(f)).unwrap() == fs::read(tmp.path().join(y).join(f)).unwrap())
        .count();
    outcome(same == pairs.len(), format!("{same}/{} output files byte-identical", pairs.len()))
}

fn main() {
    let results = [
        run(1, "observational equivalence counterexample", secs(1), criterion1),
        run(2, "completeness counterexample", secs(1), criterion2),
        run(3, "categorical 3x2 example and witness", secs(1), criterion3),
        run(4, "rank test vs grid-search oracle", secs(120), criterion4),
        run(5, "tail condition classification", secs(1), criterion5),
        run(6, "population CC biases", secs(60), criterion6),
        run(7, "Monte Carlo pattern at n = 2000, R = 500", secs(1800), criterion7),
        run(8, "property suite", secs(300), criterion8),
        run(9, "determinism of simulate and fit", secs(600), criterion9),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
