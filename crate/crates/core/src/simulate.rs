//! Scenario presets, data generation, population truths by quadrature and a
//! Monte Carlo harness.
//!
//! Generation is δ-first: draw x, draw δ from `P(δ = 1 | x)`, then draw y
//! from the respondents' law only for δ = 1. This reproduces the joint law of
//! `(x, δ, δ y)` without ever sampling `p(y | x)` itself.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{fit, ipw_mean, CiKind, FitConfig, OutcomeSpec, ScoreMethod};
use crate::identify::phi_denominator;
use crate::links::LinkFunction;
use crate::models::{KnownMean, MeanBasis, OutcomeFamily, OutcomeModel, ResponseModel};
use crate::numerics::quadrature::{GaussHermite, GaussLegendre, QuadratureRule};
use crate::numerics::rng::{derive_seed, rng_stream, RngStream};
use crate::numerics::solver::SolverOptions;
use crate::numerics::spline::SplineFitOptions;

/// Law of a scalar covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateLaw {
    StdNormal,
    /// Uniform on (-1, 1).
    Uniform,
    Bernoulli(f64),
    /// Point mass.
    Fixed(f64),
}

impl CovariateLaw {
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            CovariateLaw::StdNormal => rng.sample(StandardNormal),
            CovariateLaw::Uniform => rng.random_range(-1.0..1.0),
            CovariateLaw::Bernoulli(p) => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            CovariateLaw::Fixed(v) => v,
        }
    }

    /// Nodes and probability weights for expectations over this law.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match *self {
            CovariateLaw::StdNormal => {
                let gh = GaussHermite::new(40);
                gh.nodes.into_iter().zip(gh.weights).collect()
            }
            CovariateLaw::Uniform => {
                let gl = GaussLegendre::new(80);
                gl.nodes.into_iter().zip(gl.weights.into_iter().map(|w| 0.5 * w)).collect()
            }
            CovariateLaw::Bernoulli(p) => vec![(0.0, 1.0 - p), (1.0, p)],
            CovariateLaw::Fixed(v) => vec![(v, 1.0)],
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, CovariateLaw::Bernoulli(_) | CovariateLaw::Fixed(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub u_law: CovariateLaw,
    pub z_law: CovariateLaw,
    /// True respondents' law.
    pub outcome: OutcomeModel,
    /// True response mechanism.
    pub response: ResponseModel,
    pub kappa2: Option<f64>,
    /// Respondents' model used when estimating.
    pub estimation: OutcomeSpec,
}

impl ScenarioSpec {
    pub fn s1(kappa2: f64) -> Self {
        ScenarioSpec {
            name: "S1".into(),
            u_law: CovariateLaw::StdNormal,
            z_law: CovariateLaw::Bernoulli(0.5),
            outcome: OutcomeModel::normal(MeanBasis::linear(1, 1), vec![0.3, 0.4, kappa2], 0.5)
                .expect("valid preset"),
            response: ResponseModel::standard(LinkFunction::Logistic, vec![0.7, -0.2], 0.29)
                .expect("valid preset"),
            kappa2: Some(kappa2),
            estimation: OutcomeSpec::NormalLinear,
        }
    }

    pub fn s2(kappa2: f64) -> Self {
        ScenarioSpec {
            name: "S2".into(),
            u_law: CovariateLaw::Uniform,
            z_law: CovariateLaw::Bernoulli(0.7),
            outcome: OutcomeModel::normal(MeanBasis::linear(1, 1), vec![-0.36, 0.59, kappa2], 0.5)
                .expect("valid preset"),
            response: ResponseModel::standard(LinkFunction::Cauchy, vec![0.24, -0.1], 0.42)
                .expect("valid preset"),
            kappa2: Some(kappa2),
            estimation: OutcomeSpec::NormalLinear,
        }
    }

    pub fn s3() -> Self {
        ScenarioSpec {
            name: "S3".into(),
            u_law: CovariateLaw::StdNormal,
            z_law: CovariateLaw::StdNormal,
            outcome: OutcomeModel::bernoulli(MeanBasis::linear(1, 1), vec![-0.21, 3.8, 1.0])
                .expect("valid preset"),
            response: ResponseModel::standard(LinkFunction::Probit, vec![0.4, 0.39], 0.3)
                .expect("valid preset"),
            kappa2: None,
            estimation: OutcomeSpec::BernoulliLinear,
        }
    }

    /// Nonlinear mean, estimated with a spline respondents' model.
    pub fn s4(link: LinkFunction) -> Self {
        ScenarioSpec {
            name: format!("S4-{link}"),
            u_law: CovariateLaw::Uniform,
            z_law: CovariateLaw::Bernoulli(0.5),
            outcome: OutcomeModel::normal(MeanBasis::Known(KnownMean::CosExp), vec![], 0.25)
                .expect("valid preset"),
            response: ResponseModel::standard(link, vec![0.1, -0.2], 0.3).expect("valid preset"),
            kappa2: None,
            estimation: OutcomeSpec::NormalSpline(SplineFitOptions::default()),
        }
    }

    /// `S1`..`S4` by name. κ2 defaults to 1.0 and the S4 link to logistic.
    pub fn preset(name: &str, kappa2: Option<f64>, link: Option<LinkFunction>) -> Result<Self> {
        let k = kappa2.unwrap_or(1.0);
        let spec = match name.to_ascii_uppercase().as_str() {
            "S1" => Self::s1(k),
            "S2" => Self::s2(k),
            "S3" => Self::s3(),
            "S4" => Self::s4(link.unwrap_or(LinkFunction::Logistic)),
            other => return Err(Error::Config(format!("unknown scenario preset {other:?}"))),
        };
        if kappa2.is_some() && spec.kappa2.is_none() {
            return Err(Error::Config(format!("{name} has no kappa2 knob")));
        }
        if link.is_some() && !spec.name.starts_with("S4") {
            return Err(Error::Config(format!("{name} has a fixed response link")));
        }
        Ok(spec)
    }

    /// Quadrature rule over y for the true respondents' law.
    fn y_rule(&self) -> QuadratureRule {
        QuadratureRule::default_for(&self.outcome)
    }

    /// P(δ = 1 | x).
    pub fn response_rate_at(&self, u: &[f64], z: &[f64]) -> Result<f64> {
        Ok(1.0 / phi_denominator(&self.response, &self.outcome, u, z, &self.y_rule())?)
    }

    /// E over x of `f(u, z)`.
    fn expect_x<F: FnMut(f64, f64) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut total = 0.0;
        for (u, wu) in self.u_law.nodes() {
            for (z, wz) in self.z_law.nodes() {
                total += wu * wz * f(u, z)?;
            }
        }
        Ok(total)
    }

    /// `(∫ p1/π, ∫ y p1/π)` at x.
    fn moments_at(&self, u: f64, z: f64) -> Result<(f64, f64)> {
        let rule = self.y_rule();
        let inv_pi = |y: f64| (-self.response.link.ln_cdf(self.response.predictor(&[u], y))).exp();
        let d = crate::numerics::quadrature::integrate_over_y(inv_pi, &self.outcome, &[u], &[z], &rule)?;
        let m = crate::numerics::quadrature::integrate_over_y(|y| y * inv_pi(y), &self.outcome, &[u], &[z], &rule)?;
        Ok((d, m))
    }
}

/// Draw a dataset of `n` rows from RNG stream `(seed, stream)`.
pub fn generate_stream(spec: &ScenarioSpec, n: usize, seed: u64, stream: u64) -> Result<Dataset> {
    let mut rng = rng_stream(seed, stream);
    let mut u = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let rule = spec.y_rule();
    for _ in 0..n {
        let ui = spec.u_law.sample(&mut rng);
        let zi = spec.z_law.sample(&mut rng);
        let p1 = 1.0 / phi_denominator(&spec.response, &spec.outcome, &[ui], &[zi], &rule)?;
        let respond = rng.random::<f64>() < p1;
        let yi = if respond {
            let mean = spec.outcome.mean(&[ui], &[zi]);
            Some(match spec.outcome.family {
                OutcomeFamily::Normal { sigma2 } => mean + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal),
                OutcomeFamily::Bernoulli => {
                    if rng.random::<f64>() < mean {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
        } else {
            None
        };
        u.push(ui);
        z.push(zi);
        y.push(yi);
    }
    Ok(Dataset::new(1, 1, u, z, y)?.with_categorical_z(spec.z_law.is_discrete()))
}

pub fn generate(spec: &ScenarioSpec, n: usize, seed: u64) -> Result<Dataset> {
    generate_stream(spec, n, seed, 0)
}

/// `E_x[P(δ = 1 | x)]`.
pub fn true_response_rate(spec: &ScenarioSpec) -> Result<f64> {
    spec.expect_x(|u, z| spec.moments_at(u, z).map(|(d, _)| 1.0 / d))
}

/// E[y] = E_x[∫ y p1/π / ∫ p1/π].
pub fn true_mean(spec: &ScenarioSpec) -> Result<f64> {
    spec.expect_x(|u, z| spec.moments_at(u, z).map(|(d, m)| m / d))
}

/// E[y | δ = 1].
pub fn true_respondent_mean(spec: &ScenarioSpec) -> Result<f64> {
    let num = spec.expect_x(|u, z| Ok(spec.outcome.mean(&[u], &[z]) / spec.moments_at(u, z)?.0))?;
    Ok(num / true_response_rate(spec)?)
}

/// E[y | δ = 1] − E[y], the bias of the complete-case mean.
pub fn true_cc_bias(spec: &ScenarioSpec) -> Result<f64> {
    Ok(true_respondent_mean(spec)? - true_mean(spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McEstimator {
    /// Full pipeline with bootstrap CIs; `b = 0` skips the bootstrap.
    Pipeline {
        method: ScoreMethod,
        b: usize,
        hajek: bool,
        ci: CiKind,
    },
    /// HT mean with φ fixed at the truth.
    OracleTruth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub estimator: McEstimator,
}

/// One replicate's estimates and intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: usize,
    pub cc: f64,
    pub cc_ci: (f64, f64),
    /// `None` when the pipeline failed.
    pub mean: Option<f64>,
    pub mean_ci: Option<(f64, f64)>,
    pub beta: Option<f64>,
    pub beta_ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub scenario: String,
    pub parameter: String,
    pub kappa2: Option<f64>,
    pub method: String,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: Option<f64>,
    pub bias_mcse: Option<f64>,
    pub rmse_mcse: Option<f64>,
    pub coverage_mcse: Option<f64>,
    pub failures: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub records: Vec<ReplicateRecord>,
    pub true_mean: f64,
    pub true_beta: f64,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    /// Pipeline failure rate exceeded 5%.
    pub high_failure_rate: bool,
}

/// Failure rates above this are flagged in the report.
pub const FAILURE_FLAG_RATE: f64 = 0.05;

fn replicate(spec: &ScenarioSpec, cfg: &McConfig, index: usize) -> Result<ReplicateRecord> {
    let data = generate_stream(spec, cfg.n, cfg.seed, index as u64)?;
    let (_, _, y) = data.observed();
    let k = y.len() as f64;
    let cc = y.iter().sum::<f64>() / k;
    let sd = if k > 1.0 {
        (y.iter().map(|v| (v - cc) * (v - cc)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / k.sqrt();
    let mut rec = ReplicateRecord {
        index,
        cc,
        cc_ci: (cc - half, cc + half),
        mean: None,
        mean_ci: None,
        beta: None,
        beta_ci: None,
    };
    match cfg.estimator {
        McEstimator::OracleTruth => {
            rec.mean = Some(ipw_mean(&data, &spec.response, false)?.value);
            rec.beta = Some(spec.response.beta[0]);
        }
        McEstimator::Pipeline { method, b, hajek, ci } => {
            let fc = FitConfig {
                outcome: spec.estimation.clone(),
                response: spec.response.clone(),
                method: method.reseeded(index as u64),
                hajek,
                solver: SolverOptions::default(),
            };
            let seed = derive_seed(cfg.seed, index as u64);
            if let Ok(res) = fit(&data, &fc, b, seed, ci) {
                let beta_at = spec.response.beta_index();
                let mean_at = res.phi_hat.len();
                rec.mean = Some(res.mean_estimate);
                rec.beta = Some(res.phi_hat[beta_at]);
                rec.mean_ci = res.parameters[mean_at].ci;
                rec.beta_ci = res.parameters[beta_at].ci;
            }
        }
    }
    Ok(rec)
}

fn aggregate(
    values: &[(f64, Option<(f64, f64)>)],
    truth: f64,
    total: usize,
    with_coverage: bool,
) -> (f64, f64, Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, None, None, None, None);
    }
    let errs: Vec<f64> = values.iter().map(|(v, _)| v - truth).collect();
    let bias = errs.iter().sum::<f64>() / k;
    let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
    let mse = sq.iter().sum::<f64>() / k;
    let rmse = mse.sqrt();
    let (bias_se, rmse_se) = if values.len() > 1 {
        let var_e = errs.iter().map(|e| (e - bias) * (e - bias)).sum::<f64>() / (k - 1.0);
        let var_sq = sq.iter().map(|s| (s - mse) * (s - mse)).sum::<f64>() / (k - 1.0);
        let rs = if rmse > 0.0 { (var_sq / k).sqrt() / (2.0 * rmse) } else { 0.0 };
        (Some((var_e / k).sqrt()), Some(rs))
    } else {
        (None, None)
    };
    let coverage = if with_coverage && total > 1 && values.iter().all(|(_, c)| c.is_some()) {
        let hit = values
            .iter()
            .filter(|(_, c)| {
                let (lo, hi) = c.unwrap();
                lo <= truth && truth <= hi
            })
            .count() as f64;
        Some(hit / k)
    } else {
        None
    };
    let cov_se = coverage.map(|c| (c * (1.0 - c) / k).sqrt());
    (bias, rmse, coverage, bias_se, rmse_se, cov_se)
}

/// `r` independent replicates of size `n`; replicate `i` draws from RNG
/// stream `(seed, i)`. Aggregation follows replicate order.
pub fn run_monte_carlo(spec: &ScenarioSpec, cfg: &McConfig) -> Result<McReport> {
    if cfg.r == 0 || cfg.n == 0 {
        return Err(Error::InvalidInput("Monte Carlo needs R >= 1 and n >= 1".into()));
    }
    let truth = true_mean(spec)?;
    let beta = spec.response.beta[0];
    let records: Vec<ReplicateRecord> = (0..cfg.r)
        .into_par_iter()
        .map(|i| replicate(spec, cfg, i))
        .collect::<Result<Vec<_>>>()?;

    let (method, with_ci) = match cfg.estimator {
        McEstimator::Pipeline { method, b, .. } => (method.tag(), b > 0),
        McEstimator::OracleTruth => ("Oracle".to_string(), false),
    };
    let failures = records.iter().filter(|r| r.mean.is_none()).count();
    let row = |parameter: &str, method: &str, vals: Vec<(f64, Option<(f64, f64)>)>, truth: f64, cov: bool| {
        let failures = cfg.r - vals.len();
        let (bias, rmse, coverage, bias_mcse, rmse_mcse, coverage_mcse) = aggregate(&vals, truth, cfg.r, cov);
        McRow {
            scenario: spec.name.clone(),
            parameter: parameter.into(),
            kappa2: spec.kappa2,
            method: method.into(),
            bias,
            rmse,
            coverage,
            bias_mcse,
            rmse_mcse,
            coverage_mcse,
            failures,
            replicates: cfg.r,
        }
    };
    let cc: Vec<_> = records.iter().map(|r| (r.cc, Some(r.cc_ci))).collect();
    let fm: Vec<_> = records.iter().filter_map(|r| r.mean.map(|m| (m, r.mean_ci))).collect();
    let fb: Vec<_> = records.iter().filter_map(|r| r.beta.map(|b| (b, r.beta_ci))).collect();
    let rows = vec![
        row("E[y]", "CC", cc, truth, true),
        row("E[y]", &method, fm, truth, with_ci),
        row("beta", &method, fb, beta, with_ci),
    ];
    Ok(McReport {
        rows,
        records,
        true_mean: truth,
        true_beta: beta,
        n: cfg.n,
        r: cfg.r,
        seed: cfg.seed,
        high_failure_rate: failures as f64 / cfg.r as f64 > FAILURE_FLAG_RATE,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl McReport {
    pub fn find(&self, parameter: &str, method: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.parameter == parameter && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,parameter,kappa2,method,bias,rmse,coverage,bias_mcse,rmse_mcse,coverage_mcse,failures,replicates\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario,
                r.parameter,
                fmt_opt(r.kappa2),
                r.method,
                r.bias,
                r.rmse,
                fmt_opt(r.coverage),
                fmt_opt(r.bias_mcse),
                fmt_opt(r.rmse_mcse),
                fmt_opt(r.coverage_mcse),
                r.failures,
                r.replicates
            ));
        }
        out
    }

    /// Markdown table with the Table-1 columns; coverage in percent.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Scenario | Parameter | κ2 | Method | Bias | RMSE | CR |\n|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let k = r.kappa2.map_or_else(|| "--".to_string(), |k| format!("{k}"));
            let cr = r.coverage.map_or_else(|| "NA".to_string(), |c| format!("{:.1}", 100.0 * c));
            out.push_str(&format!(
                "| {} | {} | {} | {} | {:.3} | {:.3} | {} |\n",
                r.scenario, r.parameter, k, r.method, r.bias, r.rmse, cr
            ));
        }
        out.push_str(&format!(
            "\nn = {}, R = {}, seed = {}. True E[y] = {:.6}, true beta = {}.\n",
            self.n, self.r, self.seed, self.true_mean, self.true_beta
        ));
        let failed: usize = self.rows.iter().map(|r| r.failures).max().unwrap_or(0);
        if failed > 0 {
            out.push_str(&format!("{failed} of {} replicates failed to fit.\n", self.r));
        }
        if self.high_failure_rate {
            out.push_str("Warning: replicate failure rate exceeds 5%.\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_parameters() {
        let s1 = ScenarioSpec::s1(0.5);
        assert_eq!(s1.outcome.kappa, vec![0.3, 0.4, 0.5]);
        assert_eq!(s1.outcome.sigma2(), Some(0.5));
        assert_eq!(s1.response.params(), vec![0.7, -0.2, 0.29]);
        let s2 = ScenarioSpec::s2(1.0);
        assert_eq!(s2.response.link, LinkFunction::Cauchy);
        assert_eq!(s2.response.params(), vec![0.24, -0.1, 0.42]);
        assert_eq!(s2.z_law, CovariateLaw::Bernoulli(0.7));
        let s3 = ScenarioSpec::s3();
        assert_eq!(s3.outcome.kappa, vec![-0.21, 3.8, 1.0]);
        assert_eq!(s3.response.params(), vec![0.4, 0.39, 0.3]);
        let s4 = ScenarioSpec::s4(LinkFunction::Cauchy);
        assert_eq!(s4.outcome.sigma2(), Some(0.25));
        assert_eq!(s4.response.params(), vec![0.1, -0.2, 0.3]);
        assert!(ScenarioSpec::preset("S3", Some(0.5), None).is_err());
        assert!(ScenarioSpec::preset("S9", None, None).is_err());
    }

    #[test]
    fn covariate_nodes_are_probabilities() {
        for law in [CovariateLaw::StdNormal, CovariateLaw::Uniform, CovariateLaw::Bernoulli(0.3)] {
            let nodes = law.nodes();
            let total: f64 = nodes.iter().map(|n| n.1).sum();
            assert!((total - 1.0).abs() < 1e-13);
            let mean: f64 = nodes.iter().map(|n| n.0 * n.1).sum();
            let expected = if let CovariateLaw::Bernoulli(p) = law { p } else { 0.0 };
            assert!((mean - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn y_free_response_has_no_cc_bias() {
        let mut spec = ScenarioSpec::s1(1.0);
        spec.response = ResponseModel::standard(LinkFunction::Logistic, vec![0.0, 0.0], 0.0).unwrap();
        assert!(true_cc_bias(&spec).unwrap().abs() < 1e-13);
        assert!((true_response_rate(&spec).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = ScenarioSpec::s3();
        let a = generate(&spec, 300, 11).unwrap();
        let b = generate(&spec, 300, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&spec, 300, 12).unwrap());
        assert!(a.z_categorical == false && generate(&ScenarioSpec::s1(1.0), 5, 1).unwrap().z_categorical);
    }

    #[test]
    fn s3_rate_at_point_is_two_term_sum() {
        let spec = ScenarioSpec::s3();
        let (u, z) = (0.3, -0.4);
        let p = LinkFunction::Logistic.cdf(-0.21 + 3.8 * u + 1.0 * z);
        let pi = |y: f64| LinkFunction::Probit.cdf(0.4 + 0.39 * u + 0.3 * y);
        let exact = 1.0 / (p / pi(1.0) + (1.0 - p) / pi(0.0));
        assert!((spec.response_rate_at(&[u], &[z]).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn report_aggregates_satisfy_rmse_identity() {
        let spec = ScenarioSpec::s1(1.0);
        let cfg = McConfig {
            n: 200,
            r: 6,
            seed: 3,
            estimator: McEstimator::OracleTruth,
        };
        let rep = run_monte_carlo(&spec, &cfg).unwrap();
        let row = rep.find("E[y]", "Oracle").unwrap();
        let vals: Vec<f64> = rep.records.iter().map(|r| r.mean.unwrap()).collect();
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
        assert!((row.rmse.powi(2) - (row.bias.powi(2) + var)).abs() < 1e-10);
        assert!(row.coverage.is_none());
        let cc = rep.find("E[y]", "CC").unwrap();
        assert!(cc.coverage.unwrap() >= 0.0 && cc.coverage.unwrap() <= 1.0);
        assert_eq!(rep.to_csv().lines().count(), 4);
    }
}
