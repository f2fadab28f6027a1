//! Declarative TOML configuration for models, data roles, estimation
//! settings, scenarios and categorical tables.
//!
//! ```toml
//! [data]
//! outcome = "y"
//! covariates = ["x1", "x2"]
//! instruments = ["z"]
//! response_indicator = "delta"
//!
//! [outcome]
//! family = "normal"        # or "bernoulli"
//! mean = "linear"          # or "spline"
//!
//! [response]
//! link = "logistic"        # probit, cauchy, student_t (with df)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{CiKind, FitConfig, OutcomeSpec, ScoreMethod};
use crate::links::LinkFunction;
use crate::models::{IndexSpec, MeanBasis, OutcomeModel, ResponseModel};
use crate::numerics::solver::SolverOptions;
use crate::numerics::spline::{KnotCriterion, SplineFitOptions};
use crate::simulate::{CovariateLaw, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical: Option<CategoricalSection>,
}

/// Column roles in an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    pub instruments: Vec<String>,
    pub response_indicator: String,
    #[serde(default)]
    pub categorical_instrument: bool,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSection {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSection {
    pub link: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<u32>,
    /// Covariates entering h; all covariates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<String>>,
    /// Covariates entering g besides its intercept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hajek: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `normal`, `uniform` or `bernoulli(p)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_law: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_law: Option<String>,
}

/// `p1[j]` lists `p1(y | z = j)` over the outcome levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalSection {
    pub p1: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn parse_link(name: &str, df: Option<u32>) -> Result<LinkFunction> {
    match name.to_ascii_lowercase().as_str() {
        "logistic" | "logit" => Ok(LinkFunction::Logistic),
        "probit" | "normal" => Ok(LinkFunction::Probit),
        "cauchy" => Ok(LinkFunction::Cauchy),
        "student_t" | "robit" | "t" => {
            let df = df.ok_or_else(|| cfg_err("student_t link needs df"))?;
            LinkFunction::student_t(df).ok_or_else(|| cfg_err("df must be positive"))
        }
        other => Err(cfg_err(format!("unknown link {other:?}"))),
    }
}

pub fn parse_law(s: &str) -> Result<CovariateLaw> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "normal" | "std_normal" => return Ok(CovariateLaw::StdNormal),
        "uniform" => return Ok(CovariateLaw::Uniform),
        _ => {}
    }
    if let Some(p) = t.strip_prefix("bernoulli(").and_then(|r| r.strip_suffix(')')) {
        let p: f64 = p.trim().parse().map_err(|_| cfg_err(format!("bad probability in {s:?}")))?;
        if (0.0..=1.0).contains(&p) {
            return Ok(CovariateLaw::Bernoulli(p));
        }
    }
    if let Some(v) = t.strip_prefix("fixed(").and_then(|r| r.strip_suffix(')')) {
        if let Ok(v) = v.trim().parse::<f64>() {
            if v.is_finite() {
                return Ok(CovariateLaw::Fixed(v));
            }
        }
    }
    Err(cfg_err(format!("unknown covariate law {s:?}")))
}

fn law_name(law: CovariateLaw) -> String {
    match law {
        CovariateLaw::StdNormal => "normal".into(),
        CovariateLaw::Uniform => "uniform".into(),
        CovariateLaw::Bernoulli(p) => format!("bernoulli({p})"),
        CovariateLaw::Fixed(v) => format!("fixed({v})"),
    }
}

fn column_indices(names: &[String], wanted: &[String], what: &str) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            names
                .iter()
                .position(|n| n == w)
                .ok_or_else(|| cfg_err(format!("{what} refers to {w:?}, which is not a covariate")))
        })
        .collect()
}

impl ModelConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    /// Response model over the named covariates. Parameters default to zero.
    pub fn response_model(&self, covariates: &[String]) -> Result<ResponseModel> {
        let r = self.response.as_ref().ok_or_else(|| cfg_err("missing [response] section"))?;
        let link = parse_link(&r.link, r.df)?;
        let h_cols = match &r.h {
            Some(h) => column_indices(covariates, h, "response.h")?,
            None => (0..covariates.len()).collect(),
        };
        let g_cols = match &r.g {
            Some(g) => column_indices(covariates, g, "response.g")?,
            None => vec![],
        };
        let h = IndexSpec {
            intercept: true,
            columns: h_cols,
        };
        let g = IndexSpec {
            intercept: true,
            columns: g_cols,
        };
        let alpha = r.alpha.clone().unwrap_or_else(|| vec![0.0; h.len()]);
        let beta = r.beta.clone().unwrap_or_else(|| vec![0.0; g.len()]);
        ResponseModel::new(link, h, g, alpha, beta).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn outcome_spec(&self) -> Result<OutcomeSpec> {
        let o = self.outcome.as_ref().ok_or_else(|| cfg_err("missing [outcome] section"))?;
        let mean = o.mean.as_deref().unwrap_or("linear").to_ascii_lowercase();
        match (o.family.to_ascii_lowercase().as_str(), mean.as_str()) {
            ("normal", "linear") => Ok(OutcomeSpec::NormalLinear),
            ("bernoulli", "linear") => Ok(OutcomeSpec::BernoulliLinear),
            ("normal", "spline") => {
                let mut opts = SplineFitOptions::default();
                if let Some(d) = o.spline_degree {
                    opts.degree = d;
                }
                if let Some(k) = &o.knots {
                    if k.is_empty() {
                        return Err(cfg_err("outcome.knots must not be empty"));
                    }
                    opts.knot_grid = k.clone();
                }
                if let Some(c) = &o.criterion {
                    opts.criterion = match c.to_ascii_lowercase().as_str() {
                        "aic" => KnotCriterion::Aic,
                        "gcv" => KnotCriterion::Gcv,
                        other => return Err(cfg_err(format!("unknown knot criterion {other:?}"))),
                    };
                }
                if let Some(d) = &self.data {
                    opts.categorical_z = d.categorical_instrument;
                }
                Ok(OutcomeSpec::NormalSpline(opts))
            }
            (f, m) => Err(cfg_err(format!("unsupported outcome family/mean {f:?}/{m:?}"))),
        }
    }

    /// Respondents' model with explicit parameter values over linear `(u, z)`.
    pub fn outcome_model(&self, du: usize, dz: usize) -> Result<OutcomeModel> {
        let o = self.outcome.as_ref().ok_or_else(|| cfg_err("missing [outcome] section"))?;
        let kappa = o.kappa.clone().ok_or_else(|| cfg_err("outcome.kappa is required here"))?;
        let basis = MeanBasis::linear(du, dz);
        let m = match o.family.to_ascii_lowercase().as_str() {
            "normal" => OutcomeModel::normal(basis, kappa, o.sigma2.ok_or_else(|| cfg_err("outcome.sigma2 is required"))?),
            "bernoulli" => OutcomeModel::bernoulli(basis, kappa),
            other => return Err(cfg_err(format!("unknown outcome family {other:?}"))),
        };
        m.map_err(|e| cfg_err(e.to_string()))
    }

    pub fn score_method(&self) -> Result<ScoreMethod> {
        let e = self.estimation.clone().unwrap_or_default();
        match e.method.as_deref().unwrap_or("quadrature").to_ascii_lowercase().as_str() {
            "quadrature" => Ok(ScoreMethod::Quadrature {
                nodes: e.nodes.unwrap_or(60),
            }),
            "fi" => Ok(ScoreMethod::FractionalImputation {
                m: e.m.unwrap_or(1000),
                seed: e.seed.unwrap_or(0),
            }),
            other => Err(cfg_err(format!("unknown estimation method {other:?}"))),
        }
    }

    pub fn ci_kind(&self) -> Result<CiKind> {
        match self.estimation.as_ref().and_then(|e| e.ci.as_deref()).unwrap_or("normal") {
            "normal" => Ok(CiKind::Normal),
            "percentile" => Ok(CiKind::Percentile),
            other => Err(cfg_err(format!("unknown CI kind {other:?}"))),
        }
    }

    pub fn fit_config(&self, covariates: &[String]) -> Result<FitConfig> {
        Ok(FitConfig {
            outcome: self.outcome_spec()?,
            response: self.response_model(covariates)?,
            method: self.score_method()?,
            hajek: self.estimation.as_ref().and_then(|e| e.hajek).unwrap_or(false),
            solver: SolverOptions::default(),
        })
    }

    /// Scenario from a preset (optionally with response overrides) or a
    /// fully specified custom design with one `u` and one `z`.
    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let s = self.scenario.clone().unwrap_or_default();
        let u_names = vec!["u".to_string()];
        if let Some(p) = &s.preset {
            let mut spec = ScenarioSpec::preset(p, s.kappa2, None)?;
            if let Some(r) = &self.response {
                let over = self.response_model(&u_names)?;
                spec.response = ResponseModel {
                    alpha: if r.alpha.is_some() { over.alpha } else { spec.response.alpha },
                    beta: if r.beta.is_some() { over.beta } else { spec.response.beta },
                    link: over.link,
                    ..spec.response
                };
                if p.eq_ignore_ascii_case("S4") {
                    spec.name = format!("S4-{}", spec.response.link);
                }
            }
            if let Some(n) = s.name {
                spec.name = n;
            }
            return Ok(spec);
        }
        let u_law = parse_law(s.u_law.as_deref().ok_or_else(|| cfg_err("scenario.u_law is required"))?)?;
        let z_law = parse_law(s.z_law.as_deref().ok_or_else(|| cfg_err("scenario.z_law is required"))?)?;
        let outcome = self.outcome_model(1, 1)?;
        let response = self.response_model(&u_names)?;
        if self.response.as_ref().is_some_and(|r| r.alpha.is_none() || r.beta.is_none()) {
            return Err(cfg_err("custom scenarios need response.alpha and response.beta"));
        }
        let estimation = self.outcome_spec()?;
        Ok(ScenarioSpec {
            name: s.name.unwrap_or_else(|| "custom".into()),
            u_law,
            z_law,
            kappa2: outcome.kappa.get(2).copied(),
            outcome,
            response,
            estimation,
        })
    }

    /// Custom-scenario config equivalent to `spec`; presets keep their name.
    pub fn from_scenario(spec: &ScenarioSpec) -> ModelConfig {
        let response = ResponseSection {
            link: match spec.response.link {
                LinkFunction::StudentT { .. } => "student_t".into(),
                l => l.name(),
            },
            df: match spec.response.link {
                LinkFunction::StudentT { df } => Some(df),
                _ => None,
            },
            h: None,
            g: None,
            alpha: Some(spec.response.alpha.clone()),
            beta: Some(spec.response.beta.clone()),
        };
        let family = if spec.outcome.is_discrete() { "bernoulli" } else { "normal" };
        let known = matches!(spec.outcome.basis, MeanBasis::Known(_));
        let outcome = OutcomeSection {
            family: family.into(),
            mean: Some(if known { "spline" } else { "linear" }.into()),
            kappa: (!known).then(|| spec.outcome.kappa.clone()),
            sigma2: spec.outcome.sigma2(),
            spline_degree: None,
            knots: None,
            criterion: None,
        };
        let scenario = if known || spec.name.starts_with('S') {
            ScenarioSection {
                preset: Some(spec.name.split('-').next().unwrap_or("S4").to_string()),
                kappa2: spec.kappa2,
                ..Default::default()
            }
        } else {
            ScenarioSection {
                name: Some(spec.name.clone()),
                u_law: Some(law_name(spec.u_law)),
                z_law: Some(law_name(spec.z_law)),
                ..Default::default()
            }
        };
        ModelConfig {
            outcome: Some(outcome),
            response: Some(response),
            scenario: Some(scenario),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIT: &str = r#"
[data]
outcome = "y"
covariates = ["x1", "x2"]
instruments = ["z"]
response_indicator = "delta"
categorical_instrument = true

[outcome]
family = "normal"
mean = "spline"
knots = [0, 1, 2]

[response]
link = "cauchy"

[estimation]
method = "fi"
m = 50
bootstrap = 10
seed = 4
"#;

    #[test]
    fn parses_fit_config() {
        let c = ModelConfig::from_toml_str(FIT).unwrap();
        let names = vec!["x1".to_string(), "x2".to_string()];
        let fc = c.fit_config(&names).unwrap();
        assert_eq!(fc.response.link, LinkFunction::Cauchy);
        assert_eq!(fc.response.h.columns, vec![0, 1]);
        assert_eq!(fc.method, ScoreMethod::FractionalImputation { m: 50, seed: 4 });
        match fc.outcome {
            OutcomeSpec::NormalSpline(o) => {
                assert_eq!(o.knot_grid, vec![0, 1, 2]);
                assert!(o.categorical_z);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_links() {
        assert!(ModelConfig::from_toml_str("[response]\nlink = \"logistic\"\nfoo = 1\n").is_err());
        let c = ModelConfig::from_toml_str("[response]\nlink = \"weibull\"\n").unwrap();
        assert!(c.response_model(&[]).is_err());
        let c = ModelConfig::from_toml_str("[response]\nlink = \"logistic\"\nh = [\"q\"]\n").unwrap();
        assert!(c.response_model(&["x".into()]).is_err());
    }

    #[test]
    fn preset_with_link_override() {
        let c = ModelConfig::from_toml_str("[scenario]\npreset = \"S1\"\n[response]\nlink = \"probit\"\n").unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s.response.link, LinkFunction::Probit);
        assert_eq!(s.response.params(), vec![0.7, -0.2, 0.29]);
    }

    #[test]
    fn custom_scenario_round_trips() {
        let mut spec = ScenarioSpec::s1(0.7);
        spec.name = "mine".into();
        spec.u_law = CovariateLaw::Uniform;
        let text = ModelConfig::from_scenario(&spec).to_toml_string().unwrap();
        let back = ModelConfig::from_toml_str(&text).unwrap().scenario().unwrap();
        assert_eq!(back, spec);
        let s4 = ScenarioSpec::s4(LinkFunction::Cauchy);
        let text = ModelConfig::from_scenario(&s4).to_toml_string().unwrap();
        assert_eq!(ModelConfig::from_toml_str(&text).unwrap().scenario().unwrap(), s4);
    }

    #[test]
    fn laws_parse() {
        assert_eq!(parse_law("bernoulli(0.7)").unwrap(), CovariateLaw::Bernoulli(0.7));
        assert!(parse_law("bernoulli(1.7)").is_err());
        assert_eq!(parse_law("Uniform").unwrap(), CovariateLaw::Uniform);
    }
}
