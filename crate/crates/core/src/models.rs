//! Response-mechanism and respondents'-outcome model families.
//!
//! The response mechanism is `π(u, y) = Ψ{h(u; α) + g(u; β) m(y)}` where `h`
//! and `g` are linear forms over declared features of `u` only. The
//! instrument `z` never enters π. The outcome model is the law of `y` among
//! respondents, `p1(y | u, z)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::links::LinkFunction;
use crate::numerics::spline::SplineBasis;

/// Known strictly monotone transform m(y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    Identity,
}

impl Transform {
    #[inline]
    pub fn apply(&self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
        }
    }
}

/// Linear form over an optional intercept plus selected coordinates of `u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpec {
    pub intercept: bool,
    pub columns: Vec<usize>,
}

impl IndexSpec {
    pub fn intercept_only() -> Self {
        IndexSpec {
            intercept: true,
            columns: vec![],
        }
    }

    /// Intercept plus every one of the `du` covariates.
    pub fn linear(du: usize) -> Self {
        IndexSpec {
            intercept: true,
            columns: (0..du).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.intercept as usize + self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_constant(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn features(&self, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        if self.intercept {
            out.push(1.0);
        }
        out.extend(self.columns.iter().map(|&c| u[c]));
        out
    }

    #[inline]
    pub fn eval(&self, coef: &[f64], u: &[f64]) -> f64 {
        let (mut acc, rest) = if self.intercept {
            (coef[0], &coef[1..])
        } else {
            (0.0, coef)
        };
        for (c, &col) in rest.iter().zip(&self.columns) {
            acc += c * u[col];
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseModel {
    pub link: LinkFunction,
    pub h: IndexSpec,
    pub g: IndexSpec,
    pub m: Transform,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ResponseModel {
    pub fn new(
        link: LinkFunction,
        h: IndexSpec,
        g: IndexSpec,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        if alpha.len() != h.len() || beta.len() != g.len() {
            return Err(Error::InvalidInput(format!(
                "response parameters have lengths ({}, {}) but the index forms need ({}, {})",
                alpha.len(),
                beta.len(),
                h.len(),
                g.len()
            )));
        }
        if g.is_empty() {
            return Err(Error::InvalidInput("g(u; beta) needs at least one term".into()));
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("response parameters must be finite".into()));
        }
        Ok(ResponseModel {
            link,
            h,
            g,
            m: Transform::Identity,
            alpha,
            beta,
        })
    }

    /// `Ψ(α0 + α·u + β y)`: intercept plus all `u` columns in h, scalar β.
    pub fn standard(link: LinkFunction, alpha: Vec<f64>, beta: f64) -> Result<Self> {
        let du = alpha.len().saturating_sub(1);
        Self::new(
            link,
            IndexSpec::linear(du),
            IndexSpec::intercept_only(),
            alpha,
            vec![beta],
        )
    }

    pub fn n_params(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }

    /// φ = (α, β).
    pub fn params(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }

    pub fn with_params(&self, phi: &[f64]) -> Self {
        let na = self.alpha.len();
        ResponseModel {
            alpha: phi[..na].to_vec(),
            beta: phi[na..].to_vec(),
            ..self.clone()
        }
    }

    /// Index of the scalar β in φ when g is the default constant.
    pub fn beta_index(&self) -> usize {
        self.alpha.len()
    }

    #[inline]
    pub fn predictor(&self, u: &[f64], y: f64) -> f64 {
        self.h.eval(&self.alpha, u) + self.g.eval(&self.beta, u) * self.m.apply(y)
    }

    /// π(u, y) = Ψ(h(u; α) + g(u; β) m(y)).
    pub fn response_prob(&self, u: &[f64], y: f64) -> Result<f64> {
        let t = self.predictor(u, y);
        if !t.is_finite() {
            return Err(Error::domain(format!("non-finite linear predictor {t}")));
        }
        Ok(self.link.cdf(t))
    }

    /// s1 = ∂ log π / ∂φ.
    pub fn score(&self, u: &[f64], y: f64) -> Vec<f64> {
        let t = self.predictor(u, y);
        let r = self.link.dlog_cdf(t);
        let my = self.m.apply(y);
        let mut s = self.h.features(u);
        s.extend(self.g.features(u).into_iter().map(|v| v * my));
        s.iter_mut().for_each(|v| *v *= r);
        s
    }
}

/// Fixed nonlinear mean functions used by simulation presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownMean {
    /// μ(u, z) = z + cos(2πu) + exp(z + u).
    CosExp,
}

impl KnownMean {
    pub fn eval(&self, u: &[f64], z: &[f64]) -> f64 {
        match self {
            KnownMean::CosExp => z[0] + (2.0 * PI * u[0]).cos() + (z[0] + u[0]).exp(),
        }
    }
}

/// Mean structure of the respondents' model, a linear form in basis terms.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanBasis {
    /// Intercept, every `u` coordinate, every `z` coordinate.
    Linear { du: usize, dz: usize },
    Spline(SplineBasis),
    /// Parameter-free mean, only used for data generation.
    Known(KnownMean),
}

impl MeanBasis {
    pub fn linear(du: usize, dz: usize) -> Self {
        MeanBasis::Linear { du, dz }
    }

    pub fn len(&self) -> usize {
        match self {
            MeanBasis::Linear { du, dz } => 1 + du + dz,
            MeanBasis::Spline(s) => s.len(),
            MeanBasis::Known(_) => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self, u: &[f64], z: &[f64]) -> Vec<f64> {
        match self {
            MeanBasis::Linear { .. } => {
                let mut out = Vec::with_capacity(1 + u.len() + z.len());
                out.push(1.0);
                out.extend_from_slice(u);
                out.extend_from_slice(z);
                out
            }
            MeanBasis::Spline(s) => s.features(u, z),
            MeanBasis::Known(_) => vec![],
        }
    }

    pub fn eval(&self, coef: &[f64], u: &[f64], z: &[f64]) -> f64 {
        match self {
            MeanBasis::Linear { .. } => {
                let mut acc = coef[0];
                for (c, v) in coef[1..].iter().zip(u.iter().chain(z)) {
                    acc += c * v;
                }
                acc
            }
            MeanBasis::Spline(s) => s.features(u, z).iter().zip(coef).map(|(a, b)| a * b).sum(),
            MeanBasis::Known(k) => k.eval(u, z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeFamily {
    Normal { sigma2: f64 },
    /// Logit-linear success probability.
    Bernoulli,
}

/// Respondents' outcome law p(y | x, δ = 1; γ), γ = (κ, σ²) or κ.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub family: OutcomeFamily,
    pub basis: MeanBasis,
    pub kappa: Vec<f64>,
}

impl OutcomeModel {
    pub fn normal(basis: MeanBasis, kappa: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
        }
        Self::checked(OutcomeFamily::Normal { sigma2 }, basis, kappa)
    }

    pub fn bernoulli(basis: MeanBasis, kappa: Vec<f64>) -> Result<Self> {
        Self::checked(OutcomeFamily::Bernoulli, basis, kappa)
    }

    fn checked(family: OutcomeFamily, basis: MeanBasis, kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "mean basis has {} terms but {} coefficients were given",
                basis.len(),
                kappa.len()
            )));
        }
        if kappa.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mean coefficients must be finite".into()));
        }
        Ok(OutcomeModel {
            family,
            basis,
            kappa,
        })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.family, OutcomeFamily::Bernoulli)
    }

    pub fn sigma2(&self) -> Option<f64> {
        match self.family {
            OutcomeFamily::Normal { sigma2 } => Some(sigma2),
            OutcomeFamily::Bernoulli => None,
        }
    }

    /// Linear predictor η(x) = Σ κ_l η_l(x); this is also the natural parameter θ.
    pub fn linear_predictor(&self, u: &[f64], z: &[f64]) -> f64 {
        self.basis.eval(&self.kappa, u, z)
    }

    /// E[y | x, δ = 1].
    pub fn mean(&self, u: &[f64], z: &[f64]) -> f64 {
        let eta = self.linear_predictor(u, z);
        match self.family {
            OutcomeFamily::Normal { .. } => eta,
            OutcomeFamily::Bernoulli => LinkFunction::Logistic.cdf(eta),
        }
    }

    pub fn density(&self, u: &[f64], z: &[f64], y: f64) -> Result<f64> {
        self.log_density(u, z, y).map(f64::exp)
    }

    pub fn log_density(&self, u: &[f64], z: &[f64], y: f64) -> Result<f64> {
        let eta = self.linear_predictor(u, z);
        match self.family {
            OutcomeFamily::Normal { sigma2 } => {
                if !y.is_finite() {
                    return Err(Error::domain(format!("outcome {y} outside the real line")));
                }
                let r = y - eta;
                Ok(-0.5 * r * r / sigma2 - 0.5 * (2.0 * PI * sigma2).ln())
            }
            OutcomeFamily::Bernoulli => {
                let link = LinkFunction::Logistic;
                if y == 1.0 {
                    Ok(link.ln_cdf(eta))
                } else if y == 0.0 {
                    Ok(link.ln_cdf(-eta))
                } else {
                    Err(Error::domain(format!("Bernoulli outcome must be 0 or 1, got {y}")))
                }
            }
        }
    }

    /// γ: mean coefficients followed by σ² for the normal family.
    pub fn gamma(&self) -> Vec<f64> {
        let mut g = self.kappa.clone();
        if let Some(s2) = self.sigma2() {
            g.push(s2);
        }
        g
    }

    pub fn with_gamma(&self, gamma: &[f64]) -> Result<Self> {
        let k = self.kappa.len();
        match self.family {
            OutcomeFamily::Normal { .. } => {
                Self::normal(self.basis.clone(), gamma[..k].to_vec(), gamma[k])
            }
            OutcomeFamily::Bernoulli => Self::bernoulli(self.basis.clone(), gamma[..k].to_vec()),
        }
    }

    /// ∂ log p1 / ∂γ.
    pub fn score(&self, u: &[f64], z: &[f64], y: f64) -> Result<Vec<f64>> {
        // validates support
        self.log_density(u, z, y)?;
        let feats = self.basis.features(u, z);
        let eta = self.linear_predictor(u, z);
        match self.family {
            OutcomeFamily::Normal { sigma2 } => {
                let r = y - eta;
                let mut s: Vec<f64> = feats.iter().map(|b| r / sigma2 * b).collect();
                s.push(-0.5 / sigma2 + 0.5 * r * r / (sigma2 * sigma2));
                Ok(s)
            }
            OutcomeFamily::Bernoulli => {
                let p = LinkFunction::Logistic.cdf(eta);
                Ok(feats.iter().map(|b| (y - p) * b).collect())
            }
        }
    }
}
