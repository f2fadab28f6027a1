//! Two-stage estimation: respondents'-model MLE, then the mean-score
//! equations for φ with the nonrespondent term evaluated by quadrature or
//! fractional imputation, then an inverse-probability-weighted mean.
//! Bootstrap standard errors wrap the whole pipeline.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::links::LinkFunction;
use crate::models::{MeanBasis, OutcomeFamily, OutcomeModel, ResponseModel};
use crate::numerics::quadrature::{outcome_nodes, QuadratureRule};
use crate::numerics::rng::{derive_seed, rng_stream, RngStream};
use crate::numerics::solver::{solve_nonlinear_system, Solution, SolverMethod, SolverOptions};
use crate::numerics::spline::{fit_spline_mean, Rows, SplineFitOptions};

/// Shape of the respondents' outcome model to be fitted.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeSpec {
    NormalLinear,
    BernoulliLinear,
    NormalSpline(SplineFitOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeFit {
    pub model: OutcomeModel,
    /// Normal family only.
    pub r_squared: Option<f64>,
    pub n_obs: usize,
}

fn design(basis: &MeanBasis, u: Rows<'_>, z: Rows<'_>, n: usize) -> DMatrix<f64> {
    let p = basis.len();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for (j, v) in basis.features(u.row(i), z.row(i)).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    x
}

fn least_squares(x: &DMatrix<f64>, y: &[f64], what: &str) -> Result<Vec<f64>> {
    let p = x.ncols();
    if x.nrows() < p + 1 {
        return Err(Error::InvalidInput(format!(
            "{what}: {} complete cases for {p} coefficients",
            x.nrows()
        )));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    if rank < p {
        return Err(Error::RankDeficient {
            what: what.into(),
            rank,
            cols: p,
        });
    }
    let beta = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

/// Maximum likelihood fit of `p(y | x, δ = 1; γ)` on complete cases.
pub fn fit_outcome_mle(data: &Dataset, spec: &OutcomeSpec) -> Result<OutcomeFit> {
    let (u, z, y) = data.observed();
    let n = y.len();
    let (du, dz) = (data.du(), data.dz());
    let urows = Rows::new(&u, du);
    let zrows = Rows::new(&z, dz);
    let tss = {
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
    };

    match spec {
        OutcomeSpec::NormalLinear => {
            let basis = MeanBasis::linear(du, dz);
            let x = design(&basis, urows, zrows, n);
            let kappa = least_squares(&x, &y, "respondents' mean design")?;
            let fitted = &x * DVector::from_column_slice(&kappa);
            let rss: f64 = fitted.iter().zip(&y).map(|(f, v)| (v - f) * (v - f)).sum();
            let sigma2 = rss / n as f64;
            if tss == 0.0 || sigma2 <= 1e-20 * (tss / n as f64) {
                return Err(Error::DegenerateVariance { coefficients: kappa });
            }
            Ok(OutcomeFit {
                model: OutcomeModel::normal(basis, kappa, sigma2)?,
                r_squared: Some(1.0 - rss / tss),
                n_obs: n,
            })
        }
        OutcomeSpec::NormalSpline(opts) => {
            let fit = fit_spline_mean(urows, zrows, &y, opts)?;
            let sigma2 = fit.rss / n as f64;
            if tss == 0.0 || sigma2 <= 1e-20 * (tss / n as f64) {
                return Err(Error::DegenerateVariance { coefficients: fit.coef });
            }
            Ok(OutcomeFit {
                model: OutcomeModel::normal(MeanBasis::Spline(fit.basis), fit.coef, sigma2)?,
                r_squared: Some(fit.r_squared),
                n_obs: n,
            })
        }
        OutcomeSpec::BernoulliLinear => {
            if let Some(bad) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::domain(format!("Bernoulli outcome must be 0 or 1, got {}", y[bad])));
            }
            let ones = y.iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == n {
                return Err(Error::Separation(format!("all {n} observed outcomes equal {}", y[0])));
            }
            let basis = MeanBasis::linear(du, dz);
            let x = design(&basis, urows, zrows, n);
            let kappa = logistic_regression(&x, &y)?;
            Ok(OutcomeFit {
                model: OutcomeModel::bernoulli(basis, kappa)?,
                r_squared: None,
                n_obs: n,
            })
        }
    }
}

/// Newton iterations on the logistic log-likelihood.
fn logistic_regression(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if n < p + 1 {
        return Err(Error::InvalidInput(format!("{n} complete cases for {p} coefficients")));
    }
    let logistic = LinkFunction::Logistic;
    let mut b = DVector::zeros(p);
    for iter in 0..100 {
        let eta = x * &b;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let pr = logistic.cdf(eta[i]);
            let w = pr * (1.0 - pr);
            let xi = x.row(i);
            grad += xi.transpose() * (y[i] - pr);
            info += xi.transpose() * xi * w;
        }
        let Some(step) = info.clone().cholesky().map(|c| c.solve(&grad)) else {
            return Err(Error::Separation(format!("information matrix singular at iteration {iter}")));
        };
        b += &step;
        if b.amax() > 30.0 {
            return Err(Error::Separation("coefficients diverge".into()));
        }
        if step.amax() < 1e-12 * (1.0 + b.amax()) {
            return Ok(b.iter().copied().collect());
        }
    }
    Err(Error::NonConvergence {
        residual: f64::NAN,
        iterations: 100,
    })
}

/// `(row, fitted mean, residual)` for each respondent.
pub fn respondent_residuals(data: &Dataset, outcome: &OutcomeModel) -> Vec<(usize, f64, f64)> {
    (0..data.n())
        .filter_map(|i| {
            data.y(i).map(|y| {
                let m = outcome.mean(data.u(i), data.z(i));
                (i, m, y - m)
            })
        })
        .collect()
}

/// s1 = ∂ log π(u, y; φ) / ∂φ.
pub fn score_s1(response: &ResponseModel, u: &[f64], y: f64) -> Vec<f64> {
    response.score(u, y)
}

/// How the nonrespondent expectation in s0 is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum S0Evaluation<'a> {
    Quadrature(&'a QuadratureRule),
    /// Equally weighted draws from the respondents' law.
    Imputed(&'a [f64]),
}

/// Denominators below this make s0 undefined.
pub const S0_DENOMINATOR_FLOOR: f64 = 1e-12;

/// `s0(x; φ) = -E1[s1] / E1[1/π - 1]` for one nonrespondent.
pub fn score_s0(
    response: &ResponseModel,
    outcome: &OutcomeModel,
    u: &[f64],
    z: &[f64],
    eval: S0Evaluation<'_>,
) -> Result<Vec<f64>> {
    let nodes: Vec<(f64, f64)> = match eval {
        S0Evaluation::Quadrature(rule) => outcome_nodes(outcome, u, z, rule)?,
        S0Evaluation::Imputed(ys) => {
            if ys.is_empty() {
                return Err(Error::InvalidInput("empty imputation set".into()));
            }
            let w = 1.0 / ys.len() as f64;
            ys.iter().map(|&y| (y, w)).collect()
        }
    };
    let mut num = vec![0.0; response.n_params()];
    let mut den = 0.0;
    for (y, w) in nodes {
        for (a, s) in num.iter_mut().zip(response.score(u, y)) {
            *a += w * s;
        }
        den += w * response.link.odds_against(response.predictor(u, y));
    }
    if !(den >= S0_DENOMINATOR_FLOOR) {
        return Err(Error::DegenerateMissingness(format!(
            "E1[1/pi - 1] = {den:e} at u = {u:?}"
        )));
    }
    Ok(num.into_iter().map(|v| -v / den).collect())
}

/// Evaluation of the nonrespondent term in the mean-score system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreMethod {
    /// Gauss–Hermite with the given node count; exact sums for Bernoulli.
    Quadrature { nodes: usize },
    FractionalImputation { m: usize, seed: u64 },
}

impl Default for ScoreMethod {
    fn default() -> Self {
        ScoreMethod::Quadrature { nodes: 60 }
    }
}

impl ScoreMethod {
    pub fn tag(&self) -> String {
        match self {
            ScoreMethod::Quadrature { .. } => "Quadrature".into(),
            ScoreMethod::FractionalImputation { m, .. } => format!("FI({m})"),
        }
    }

    /// Same method with a seed tied to `stream` (FI only).
    pub fn reseeded(&self, stream: u64) -> Self {
        match *self {
            ScoreMethod::FractionalImputation { m, seed } => ScoreMethod::FractionalImputation {
                m,
                seed: derive_seed(seed, stream),
            },
            q => q,
        }
    }
}

/// M draws from `p(y | x_i, δ = 1; γ̂)` for each nonrespondent i.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationSet {
    pub rows: Vec<usize>,
    pub m: usize,
    values: Vec<f64>,
}

impl ImputationSet {
    pub fn draw(data: &Dataset, outcome: &OutcomeModel, m: usize, rng: &mut RngStream) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("imputation size M must be at least 1".into()));
        }
        let rows: Vec<usize> = (0..data.n()).filter(|&i| !data.delta(i)).collect();
        let mut values = Vec::with_capacity(rows.len() * m);
        for &i in &rows {
            let mean = outcome.mean(data.u(i), data.z(i));
            match outcome.family {
                OutcomeFamily::Normal { sigma2 } => {
                    let sd = sigma2.sqrt();
                    for _ in 0..m {
                        let e: f64 = rng.sample(StandardNormal);
                        values.push(mean + sd * e);
                    }
                }
                OutcomeFamily::Bernoulli => {
                    for _ in 0..m {
                        values.push(if rng.random::<f64>() < mean { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        Ok(ImputationSet { rows, m, values })
    }

    /// Draws for the k-th nonrespondent.
    pub fn imputed(&self, k: usize) -> &[f64] {
        &self.values[k * self.m..(k + 1) * self.m]
    }

    pub fn response_probs(&self, data: &Dataset, response: &ResponseModel, k: usize) -> Result<Vec<f64>> {
        let u = data.u(self.rows[k]);
        self.imputed(k).iter().map(|&y| response.response_prob(u, y)).collect()
    }
}

/// The averaged mean-score system `(1/n) Σ {δ s1 + (1 - δ) s0}` with
/// per-row features cached.
struct MeanScoreSystem {
    link: LinkFunction,
    n: usize,
    nh: usize,
    ng: usize,
    /// Respondents: features and m(y).
    obs_h: Vec<f64>,
    obs_g: Vec<f64>,
    obs_my: Vec<f64>,
    /// Nonrespondents: features and `stride` weighted nodes each.
    mis_h: Vec<f64>,
    mis_g: Vec<f64>,
    stride: usize,
    node_my: Vec<f64>,
    node_w: Vec<f64>,
}

impl MeanScoreSystem {
    fn build(
        data: &Dataset,
        outcome: &OutcomeModel,
        skeleton: &ResponseModel,
        method: &ScoreMethod,
    ) -> Result<Self> {
        let mut sys = MeanScoreSystem {
            link: skeleton.link,
            n: data.n(),
            nh: skeleton.h.len(),
            ng: skeleton.g.len(),
            obs_h: vec![],
            obs_g: vec![],
            obs_my: vec![],
            mis_h: vec![],
            mis_g: vec![],
            stride: 0,
            node_my: vec![],
            node_w: vec![],
        };
        for i in 0..data.n() {
            let u = data.u(i);
            if let Some(y) = data.y(i) {
                sys.obs_h.extend(skeleton.h.features(u));
                sys.obs_g.extend(skeleton.g.features(u));
                sys.obs_my.push(skeleton.m.apply(y));
            } else {
                sys.mis_h.extend(skeleton.h.features(u));
                sys.mis_g.extend(skeleton.g.features(u));
            }
        }
        match *method {
            ScoreMethod::Quadrature { nodes } => {
                let rule = match outcome.family {
                    OutcomeFamily::Normal { .. } => QuadratureRule::gauss_hermite(nodes),
                    OutcomeFamily::Bernoulli => QuadratureRule::default_for(outcome),
                };
                for i in (0..data.n()).filter(|&i| !data.delta(i)) {
                    let nodes = outcome_nodes(outcome, data.u(i), data.z(i), &rule)?;
                    sys.stride = nodes.len();
                    for (y, w) in nodes {
                        sys.node_my.push(skeleton.m.apply(y));
                        sys.node_w.push(w);
                    }
                }
            }
            ScoreMethod::FractionalImputation { m, seed } => {
                let mut rng = rng_stream(seed, 0);
                let imp = ImputationSet::draw(data, outcome, m, &mut rng)?;
                sys.stride = m;
                let w = 1.0 / m as f64;
                for k in 0..imp.rows.len() {
                    for &y in imp.imputed(k) {
                        sys.node_my.push(skeleton.m.apply(y));
                        sys.node_w.push(w);
                    }
                }
            }
        }
        Ok(sys)
    }

    fn dim(&self) -> usize {
        self.nh + self.ng
    }

    /// Averaged score and, on request, its Jacobian. Infeasible points
    /// (degenerate s0 denominators) return NaN.
    fn eval(&self, phi: &[f64], jac: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let (nh, ng, p) = (self.nh, self.ng, self.dim());
        let (alpha, beta) = phi.split_at(nh);
        let dot = |c: &[f64], f: &[f64]| c.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        let mut f = vec![0.0; p];
        let mut j = if jac { Some(DMatrix::zeros(p, p)) } else { None };
        let link = self.link;

        // rank-one update c·(a ⊗ b) over the (h, g) block structure
        let outer = |j: &mut DMatrix<f64>, hf: &[f64], gf: &[f64], chh: f64, chg: f64, cgh: f64, cgg: f64| {
            for (a, &x) in hf.iter().enumerate() {
                for (b, &y) in hf.iter().enumerate() {
                    j[(a, b)] += chh * x * y;
                }
                for (b, &y) in gf.iter().enumerate() {
                    j[(a, nh + b)] += chg * x * y;
                }
            }
            for (a, &x) in gf.iter().enumerate() {
                for (b, &y) in hf.iter().enumerate() {
                    j[(nh + a, b)] += cgh * x * y;
                }
                for (b, &y) in gf.iter().enumerate() {
                    j[(nh + a, nh + b)] += cgg * x * y;
                }
            }
        };

        for (k, &my) in self.obs_my.iter().enumerate() {
            let hf = &self.obs_h[k * nh..(k + 1) * nh];
            let gf = &self.obs_g[k * ng..(k + 1) * ng];
            let t = dot(alpha, hf) + dot(beta, gf) * my;
            let r = link.dlog_cdf(t);
            for (a, &x) in hf.iter().enumerate() {
                f[a] += r * x;
            }
            for (a, &x) in gf.iter().enumerate() {
                f[nh + a] += r * my * x;
            }
            if let Some(j) = j.as_mut() {
                let d = link.dlog_cdf_slope(t);
                outer(j, hf, gf, d, d * my, d * my, d * my * my);
            }
        }

        for k in 0..self.mis_h.len() / nh.max(1) {
            let hf = &self.mis_h[k * nh..(k + 1) * nh];
            let gf = &self.mis_g[k * ng..(k + 1) * ng];
            let a0 = dot(alpha, hf);
            let b0 = dot(beta, gf);
            let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
            let (mut p0, mut p1, mut p2, mut q0, mut q1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let nodes = k * self.stride..(k + 1) * self.stride;
            for (&my, &w) in self.node_my[nodes.clone()].iter().zip(&self.node_w[nodes]) {
                let t = a0 + b0 * my;
                let (r, odds) = link.ratio_and_odds(t);
                sa += w * r;
                sb += w * r * my;
                sc += w * odds;
                if jac {
                    let d = w * link.dlog_cdf_slope(t);
                    p0 += d;
                    p1 += d * my;
                    p2 += d * my * my;
                    let e = -w * r * (1.0 + odds);
                    q0 += e;
                    q1 += e * my;
                }
            }
            if !(sc >= S0_DENOMINATOR_FLOOR) || !sc.is_finite() {
                return (vec![f64::NAN; p], None);
            }
            for (a, &x) in hf.iter().enumerate() {
                f[a] -= sa / sc * x;
            }
            for (a, &x) in gf.iter().enumerate() {
                f[nh + a] -= sb / sc * x;
            }
            if let Some(j) = j.as_mut() {
                // d(-N/C) = -N'/C + N C'ᵀ / C²
                let c2 = sc * sc;
                outer(
                    j,
                    hf,
                    gf,
                    -p0 / sc + sa * q0 / c2,
                    -p1 / sc + sa * q1 / c2,
                    -p1 / sc + sb * q0 / c2,
                    -p2 / sc + sb * q1 / c2,
                );
            }
        }

        let n = self.n as f64;
        f.iter_mut().for_each(|v| *v /= n);
        if let Some(j) = j.as_mut() {
            *j /= n;
        }
        (f, j)
    }
}

/// Binary regression of δ on the h features with the response link and β = 0.
pub fn complete_case_start(data: &Dataset, skeleton: &ResponseModel) -> Result<Vec<f64>> {
    let link = skeleton.link;
    let nh = skeleton.h.len();
    let feats: Vec<Vec<f64>> = (0..data.n()).map(|i| skeleton.h.features(data.u(i))).collect();
    let n = data.n() as f64;
    let f = |a: &[f64]| {
        let mut s = vec![0.0; nh];
        for (i, x) in feats.iter().enumerate() {
            let t: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
            // d/dt log Ψ(t) and d/dt log{1 - Ψ(t)} = -ψ(-t)/Ψ(-t)
            let r = if data.delta(i) { link.dlog_cdf(t) } else { -link.dlog_cdf(-t) };
            for (acc, v) in s.iter_mut().zip(x) {
                *acc += r * v;
            }
        }
        s.into_iter().map(|v| v / n).collect::<Vec<f64>>()
    };
    let sol = solve_nonlinear_system(f, None, &vec![0.0; nh], SolverOptions::default())?;
    let mut phi = sol.x;
    phi.extend(std::iter::repeat(0.0).take(skeleton.g.len()));
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanScoreFit {
    pub response: ResponseModel,
    pub solution: Solution,
    /// Number of jittered restarts used (0 when the first start converged).
    pub restarts: usize,
}

const JITTER_SEED: u64 = 0x5EED_1E77;
const JITTER_ATTEMPTS: u64 = 5;

/// Root of the averaged mean-score equations for φ.
pub fn solve_mean_score(
    data: &Dataset,
    outcome: &OutcomeModel,
    skeleton: &ResponseModel,
    method: &ScoreMethod,
    start: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<MeanScoreFit> {
    if data.n_observed() == data.n() {
        return Err(Error::DegenerateMissingness(
            "every outcome is observed; beta is not identified from the response pattern".into(),
        ));
    }
    let sys = MeanScoreSystem::build(data, outcome, skeleton, method)?;
    let x0 = match start {
        Some(s) => {
            if s.len() != sys.dim() {
                return Err(Error::InvalidInput(format!(
                    "start has {} values, phi has {}",
                    s.len(),
                    sys.dim()
                )));
            }
            s.to_vec()
        }
        None => complete_case_start(data, skeleton)?,
    };
    let jac = |phi: &[f64]| {
        sys.eval(phi, true)
            .1
            .unwrap_or_else(|| DMatrix::from_element(phi.len(), phi.len(), f64::NAN))
    };
    let attempt = |x: &[f64]| solve_nonlinear_system(|phi| sys.eval(phi, false).0, Some(&jac), x, opts);

    let mut last = match attempt(&x0) {
        Ok(solution) => {
            return Ok(MeanScoreFit {
                response: skeleton.with_params(&solution.x),
                solution,
                restarts: 0,
            })
        }
        Err(e) => e,
    };
    for k in 0..JITTER_ATTEMPTS {
        let mut rng = rng_stream(JITTER_SEED, k);
        let x: Vec<f64> = x0
            .iter()
            .map(|v| v + 0.5 * (1.0 + v.abs()) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        match attempt(&x) {
            Ok(solution) => {
                return Ok(MeanScoreFit {
                    response: skeleton.with_params(&solution.x),
                    solution,
                    restarts: k as usize + 1,
                })
            }
            Err(e) => last = e,
        }
    }
    if matches!(last, Error::InvalidInput(_)) {
        // every start was infeasible
        last = Error::NonConvergence {
            residual: f64::NAN,
            iterations: 0,
        };
    }
    Err(last)
}

/// Response probabilities below this produce a warning.
pub const EXTREME_PI: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IpwEstimate {
    pub value: f64,
    /// `(1/n) Σ δ/π`.
    pub weight_total: f64,
    pub warnings: Vec<String>,
}

/// Horvitz–Thompson `(1/n) Σ δ y / π`, or the Hájek ratio when `hajek`.
pub fn ipw_mean(data: &Dataset, response: &ResponseModel, hajek: bool) -> Result<IpwEstimate> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut warnings = Vec::new();
    for i in 0..data.n() {
        if let Some(y) = data.y(i) {
            let pi = response.response_prob(data.u(i), y).map_err(|e| e.at_row(i))?;
            if pi < EXTREME_PI {
                warnings.push(format!("row {i}: response probability {pi:e} gives an extreme weight"));
            }
            num += y / pi;
            den += 1.0 / pi;
        }
    }
    let n = data.n() as f64;
    let value = if hajek { num / den } else { num / n };
    Ok(IpwEstimate {
        value,
        weight_total: den / n,
        warnings,
    })
}

/// φ on the raw scale when the response index is `α0 + Σ α_j u_j + β y`
/// fitted to standardized data. `None` for other index forms.
pub fn back_transform_phi(skeleton: &ResponseModel, phi: &[f64], s: &Standardization) -> Option<Vec<f64>> {
    if !skeleton.h.intercept || !skeleton.g.is_constant() || !skeleton.g.intercept {
        return None;
    }
    let nh = skeleton.h.len();
    let beta = phi[nh];
    let mut out = phi.to_vec();
    let mut a0 = phi[0] - beta * s.y.center / s.y.scale;
    for (k, &col) in skeleton.h.columns.iter().enumerate() {
        let t = &s.u[col];
        a0 -= phi[1 + k] * t.center / t.scale;
        out[1 + k] = phi[1 + k] / t.scale;
    }
    out[0] = a0;
    out[nh] = beta / s.y.scale;
    Some(out)
}

/// Everything needed to run the estimation pipeline on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub outcome: OutcomeSpec,
    /// Link and index forms; its parameter values are ignored.
    pub response: ResponseModel,
    pub method: ScoreMethod,
    pub hajek: bool,
    pub solver: SolverOptions,
}

/// Single pass of γ̂ → φ̂ → Ê[y] on the scale of `data`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    pub outcome: OutcomeFit,
    pub score: MeanScoreFit,
    pub ipw: IpwEstimate,
    pub cc_mean: f64,
}

pub fn fit_point(data: &Dataset, config: &FitConfig, start: Option<&[f64]>) -> Result<PointFit> {
    let outcome = fit_outcome_mle(data, &config.outcome)?;
    let score = solve_mean_score(data, &outcome.model, &config.response, &config.method, start, config.solver)?;
    let ipw = ipw_mean(data, &score.response, config.hajek)?;
    let (_, _, y) = data.observed();
    let cc_mean = y.iter().sum::<f64>() / y.len() as f64;
    Ok(PointFit {
        outcome,
        score,
        ipw,
        cc_mean,
    })
}

/// Reported quantities `(φ..., Ê[y], CC mean)` on the raw scale.
pub fn reported_values(fit: &PointFit, config: &FitConfig, s: Option<&Standardization>) -> Vec<f64> {
    let phi = fit.score.solution.x.clone();
    match s {
        None => {
            let mut v = phi;
            v.push(fit.ipw.value);
            v.push(fit.cc_mean);
            v
        }
        Some(s) => {
            let mut v = back_transform_phi(&config.response, &phi, s).unwrap_or(phi);
            let w = if config.hajek { 1.0 } else { fit.ipw.weight_total };
            v.push(s.y.center * w + s.y.scale * fit.ipw.value);
            v.push(s.y.inverse(fit.cc_mean));
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub b: usize,
    pub failures: usize,
    /// Successful replicate estimates, in replicate order.
    pub replicates: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub percentile: Vec<(f64, f64)>,
    pub unstable: bool,
}

impl BootstrapResult {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.b as f64
    }
}

/// Replicate failure rates above this mark the bootstrap as unstable.
pub const UNSTABLE_FAILURE_RATE: f64 = 0.2;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Nonparametric row bootstrap of `pipeline`. Replicate `b` resamples with
/// the RNG stream `(seed, b)` and receives `b` for seeding its own draws.
pub fn bootstrap<F>(data: &Dataset, b: usize, seed: u64, pipeline: F) -> Result<BootstrapResult>
where
    F: Fn(&Dataset, u64) -> Result<Vec<f64>> + Sync,
{
    if b < 2 {
        return Err(Error::InvalidInput(format!("bootstrap needs B >= 2, got {b}")));
    }
    let n = data.n();
    let results: Vec<Option<Vec<f64>>> = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_stream(seed, rep);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            data.resample(&rows)
                .and_then(|d| pipeline(&d, rep))
                .ok()
                .filter(|v| v.iter().all(|x| x.is_finite()))
        })
        .collect();
    let replicates: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let failures = b - replicates.len();
    if replicates.len() < 2 {
        return Err(Error::NonConvergence {
            residual: f64::NAN,
            iterations: b,
        });
    }
    let dim = replicates[0].len();
    let k = replicates.len() as f64;
    let mut se = Vec::with_capacity(dim);
    let mut percentile = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / k;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        se.push(var.sqrt());
        col.sort_by(f64::total_cmp);
        percentile.push((quantile(&col, 0.025), quantile(&col, 0.975)));
    }
    Ok(BootstrapResult {
        b,
        failures,
        unstable: failures as f64 / b as f64 > UNSTABLE_FAILURE_RATE,
        replicates,
        se,
        percentile,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEstimate {
    pub name: String,
    pub method: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub gamma_hat: Vec<f64>,
    /// Raw scale when the fit was run on standardized data and the index
    /// form allows it.
    pub phi_hat: Vec<f64>,
    pub mean_estimate: f64,
    pub cc_mean: f64,
    pub outcome: OutcomeModel,
    pub response: ResponseModel,
    pub r_squared: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub solver_method: SolverMethod,
    pub method_tag: String,
    pub parameters: Vec<ParameterEstimate>,
    pub bootstrap: Option<BootstrapResult>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiKind {
    Normal,
    Percentile,
}

/// Point fit plus optional bootstrap (`b = 0` skips it).
pub fn fit(data: &Dataset, config: &FitConfig, b: usize, seed: u64, ci: CiKind) -> Result<FitResult> {
    let point = fit_point(data, config, None)?;
    let s = data.standardization.as_ref();
    let values = reported_values(&point, config, s);
    let start = point.score.solution.x.clone();

    let boot = if b > 0 {
        Some(bootstrap(data, b, seed, |d, rep| {
            let cfg = FitConfig {
                method: config.method.reseeded(rep + 1),
                ..config.clone()
            };
            fit_point(d, &cfg, Some(&start)).map(|p| reported_values(&p, &cfg, s))
        })?)
    } else {
        None
    };

    let mut warnings = point.ipw.warnings.clone();
    if let Some(bs) = &boot {
        if bs.unstable {
            warnings.push(format!(
                "unstable bootstrap: {} of {} replicates failed",
                bs.failures, bs.b
            ));
        }
    }
    let phi_on_raw = s.is_none() || back_transform_phi(&config.response, &start, s.unwrap()).is_some();
    if !phi_on_raw {
        warnings.push("response parameters are reported on the standardized scale".into());
    }

    let method = format!("{} ({})", config.method.tag(), config.response.link);
    let nphi = start.len();
    let mut names = Vec::with_capacity(nphi + 2);
    for k in 0..config.response.h.len() {
        names.push(format!("alpha{k}"));
    }
    if config.response.g.len() == 1 {
        names.push("beta".to_string());
    } else {
        names.extend((0..config.response.g.len()).map(|k| format!("beta{k}")));
    }
    names.push("E[y]".into());
    names.push("E[y]".into());

    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let (se, ci) = match &boot {
                Some(bs) => {
                    let se = bs.se[j];
                    let ci = match ci {
                        CiKind::Normal => (values[j] - 1.96 * se, values[j] + 1.96 * se),
                        CiKind::Percentile => bs.percentile[j],
                    };
                    (Some(se), Some(ci))
                }
                None => (None, None),
            };
            ParameterEstimate {
                name,
                method: if j == nphi + 1 { "CC".into() } else { method.clone() },
                estimate: values[j],
                se,
                ci,
            }
        })
        .collect();

    let response = if phi_on_raw {
        config.response.with_params(&values[..nphi])
    } else {
        point.score.response.clone()
    };
    Ok(FitResult {
        gamma_hat: point.outcome.model.gamma(),
        phi_hat: values[..nphi].to_vec(),
        mean_estimate: values[nphi],
        cc_mean: values[nphi + 1],
        outcome: point.outcome.model,
        response,
        r_squared: point.outcome.r_squared,
        residual: point.score.solution.residual,
        iterations: point.score.solution.iterations,
        solver_method: point.score.solution.method,
        method_tag: config.method.tag(),
        parameters,
        bootstrap: boot,
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl FitResult {
    /// `parameter,method,estimate,se,ci_lower,ci_upper`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,method,estimate,se,ci_lower,ci_upper\n");
        for p in &self.parameters {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.name,
                p.method,
                p.estimate,
                opt(p.se),
                opt(p.ci.map(|c| c.0)),
                opt(p.ci.map(|c| c.1))
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Parameter | Method | Estimate | Standard error |\n|---|---|---|---|\n");
        for p in &self.parameters {
            let se = p.se.map_or_else(|| "NA".to_string(), |s| format!("{s:.3}"));
            out.push_str(&format!("| {} | {} | {:.3} | {} |\n", p.name, p.method, p.estimate, se));
        }
        out.push('\n');
        out.push_str(&format!(
            "Solver: {:?}, {} iterations, residual {:.3e}.\n",
            self.solver_method, self.iterations, self.residual
        ));
        if let Some(r2) = self.r_squared {
            out.push_str(&format!("Respondents' model R^2 = {r2:.3}.\n"));
        }
        if let Some(bs) = &self.bootstrap {
            out.push_str(&format!(
                "Bootstrap: B = {}, {} failed replicates.\n",
                bs.b, bs.failures
            ));
        }
        for w in &self.warnings {
            out.push_str(&format!("\nWarning: {w}\n"));
        }
        out
    }
}
