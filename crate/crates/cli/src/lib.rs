//! Batch commands behind the `mnar` binary. Each command reads its inputs,
//! writes its outputs into a directory and returns the written paths.

use std::fs;
use std::path::{Path, PathBuf};

use mnar_core::config::ModelConfig;
use mnar_core::data::{ColumnNames, ColumnTransform, Dataset, Standardization};
use mnar_core::estimate::{fit, fit_outcome_mle, respondent_residuals, CiKind, FitResult, OutcomeSpec, ScoreMethod};
use mnar_core::identify::{
    check_categorical, check_categorical_with_base, checklist_on_support, checklist_theorem2,
    CategoricalRespondentTable, CovariateSupport, IdentifiabilityVerdict, VerdictStatus,
};
use mnar_core::simulate::{generate_stream, run_monte_carlo, McConfig, McEstimator, McReport, ScenarioSpec};
use mnar_core::LinkFunction;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) | CliError::Refused(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<mnar_core::Error> for CliError {
    fn from(e: mnar_core::Error) -> Self {
        match e {
            mnar_core::Error::DegenerateMissingness(_) => CliError::Refused(e.to_string()),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::User(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::User(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn load_config(path: &Path) -> CliResult<ModelConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    ModelConfig::from_toml_str(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn schema(row: Option<usize>, msg: impl Into<String>) -> CliError {
    mnar_core::Error::Schema { row, msg: msg.into() }.into()
}

/// Read a CSV with a header row into a dataset using the column roles of
/// `[data]`. Missing outcomes are empty fields and must coincide with
/// `delta = 0`. Rows are numbered from 1, excluding the header.
pub fn read_dataset(path: &Path, config: &ModelConfig) -> CliResult<Dataset> {
    let roles = config
        .data
        .as_ref()
        .ok_or_else(|| CliError::User("config has no [data] section".into()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema(None, format!("column {name:?} not found in header")))
    };
    let y_col = col(&roles.outcome)?;
    let d_col = col(&roles.response_indicator)?;
    let u_cols = roles.covariates.iter().map(|c| col(c)).collect::<CliResult<Vec<_>>>()?;
    let z_cols = roles.instruments.iter().map(|c| col(c)).collect::<CliResult<Vec<_>>>()?;
    if z_cols.is_empty() {
        return Err(CliError::User("data.instruments must name at least one column".into()));
    }

    let (mut u, mut z, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| schema(Some(row), e.to_string()))?;
        let num = |c: usize, what: &str| -> CliResult<f64> {
            let s = rec.get(c).unwrap_or("");
            if s.is_empty() {
                return Err(schema(Some(row), format!("{what} {:?} is empty", &header[c])));
            }
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(Some(row), format!("{what} {:?} has non-numeric value {s:?}", &header[c])))
        };
        for &c in &u_cols {
            u.push(num(c, "covariate")?);
        }
        for &c in &z_cols {
            z.push(num(c, "instrument")?);
        }
        let delta = match rec.get(d_col).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => {
                return Err(schema(
                    Some(row),
                    format!("response indicator must be 0 or 1, found {other:?}"),
                ))
            }
        };
        let ys = rec.get(y_col).unwrap_or("");
        match (delta, ys.is_empty()) {
            (true, true) => return Err(schema(Some(row), "outcome is missing but the response indicator is 1")),
            (false, false) => {
                return Err(schema(
                    Some(row),
                    format!("outcome value {ys:?} is present but the response indicator is 0"),
                ))
            }
            (true, false) => y.push(Some(num(y_col, "outcome")?)),
            (false, true) => y.push(None),
        }
    }
    let names = ColumnNames {
        u: roles.covariates.clone(),
        z: roles.instruments.clone(),
        y: roles.outcome.clone(),
    };
    Ok(Dataset::new(u_cols.len(), z_cols.len(), u, z, y)?
        .with_names(names)
        .with_categorical_z(roles.categorical_instrument))
}

/// Standardize as configured. A binary outcome keeps its 0/1 coding.
fn prepare(data: &Dataset, config: &ModelConfig) -> Dataset {
    let standardize = config.data.as_ref().is_none_or(|d| d.standardize);
    if !standardize {
        return data.clone();
    }
    let mut s: Standardization = data.standardize().standardization.expect("standardize records transforms");
    let binary = config
        .outcome
        .as_ref()
        .is_some_and(|o| o.family.eq_ignore_ascii_case("bernoulli"));
    if binary {
        s.y = ColumnTransform::identity(&s.y.name);
    }
    data.apply_standardization(s)
}

/// Command-line overrides of the `[estimation]` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitFlags {
    pub method: Option<String>,
    pub nodes: Option<usize>,
    pub m: Option<usize>,
    pub bootstrap: Option<usize>,
    pub seed: Option<u64>,
    pub hajek: bool,
    pub percentile: bool,
    pub override_identifiability: bool,
}

fn apply_flags(config: &mut ModelConfig, flags: &FitFlags) {
    let e = config.estimation.get_or_insert_with(Default::default);
    if flags.method.is_some() {
        e.method = flags.method.clone();
    }
    if flags.nodes.is_some() {
        e.nodes = flags.nodes;
    }
    if flags.m.is_some() {
        e.m = flags.m;
    }
    if flags.bootstrap.is_some() {
        e.bootstrap = flags.bootstrap;
    }
    if flags.seed.is_some() {
        e.seed = flags.seed;
    }
    if flags.hajek {
        e.hajek = Some(true);
    }
    if flags.percentile {
        e.ci = Some("percentile".into());
    }
}

fn refuses(v: &IdentifiabilityVerdict) -> bool {
    matches!(v.status, VerdictStatus::NotIdentifiable | VerdictStatus::ConditionFailed(_))
}

#[derive(Debug)]
pub struct FitOutput {
    pub result: FitResult,
    pub verdict: IdentifiabilityVerdict,
    pub files: Vec<PathBuf>,
}

/// Diagnose, fit and write `verdict.txt`, `estimates.csv`, `estimates.md`
/// and `residuals.csv` into `out`.
pub fn cmd_fit(csv_path: &Path, config_path: &Path, flags: &FitFlags, out: &Path) -> CliResult<FitOutput> {
    let mut config = load_config(config_path)?;
    apply_flags(&mut config, flags);
    let raw = read_dataset(csv_path, &config)?;
    let data = prepare(&raw, &config);
    let fc = config.fit_config(&data.names.u)?;
    let est = config.estimation.clone().unwrap_or_default();
    let b = est.bootstrap.unwrap_or(0);
    if b > 0 && est.seed.is_none() {
        return Err(CliError::User("a seed is required when bootstrapping".into()));
    }
    let seed = est.seed.unwrap_or(0);

    prepare_dir(out)?;
    let mut files = Vec::new();
    let outcome = fit_outcome_mle(&data, &fc.outcome)?;
    let verdict = checklist_theorem2(&fc.response, &outcome.model, &data);
    files.push(write_file(out, "verdict.txt", &verdict.to_report())?);
    if refuses(&verdict) && !flags.override_identifiability {
        return Err(CliError::Refused(format!(
            "identifiability check returned {}; rerun with --override-identifiability to fit anyway",
            verdict.status
        )));
    }

    let mut result = fit(&data, &fc, b, seed, config.ci_kind()?)?;
    if refuses(&verdict) {
        result
            .warnings
            .push(format!("fitted despite identifiability verdict {}", verdict.status));
    } else if verdict.status == VerdictStatus::Inconclusive {
        result.warnings.push("identifiability check was inconclusive".into());
    }
    files.push(write_file(out, "estimates.csv", &result.to_csv())?);
    files.push(write_file(out, "estimates.md", &result.to_markdown())?);

    let ys = data.standardization.as_ref().map(|s| s.y.clone());
    let mut res = String::from("row,fitted,residual\n");
    for (i, fitted, r) in respondent_residuals(&data, &result.outcome) {
        let (f, r) = match &ys {
            Some(t) => (t.inverse(fitted), r * t.scale),
            None => (fitted, r),
        };
        res.push_str(&format!("{},{},{}\n", i + 1, f, r));
    }
    files.push(write_file(out, "residuals.csv", &res)?);
    Ok(FitOutput { result, verdict, files })
}

/// Evaluation points for a scenario: the nodes of its covariate laws.
fn scenario_support(spec: &ScenarioSpec) -> CovariateSupport {
    CovariateSupport {
        u: spec.u_law.nodes().into_iter().map(|(u, _)| vec![u]).collect(),
        z_levels: spec.z_law.nodes().into_iter().map(|(z, _)| vec![z]).collect(),
    }
}

/// Identifiability report for a categorical table, a CSV dataset or a
/// scenario, written to `verdict.txt` (and `witness.csv` when a witness
/// exists).
pub fn cmd_diagnose(config_path: &Path, csv_path: Option<&Path>, out: &Path) -> CliResult<(IdentifiabilityVerdict, Vec<PathBuf>)> {
    let config = load_config(config_path)?;
    let verdict = if let Some(cat) = &config.categorical {
        let table = CategoricalRespondentTable::from_columns(&cat.p1)?;
        match &cat.base {
            Some(base) => check_categorical_with_base(&table, base)?,
            None => check_categorical(&table),
        }
    } else if let Some(csv) = csv_path {
        let raw = read_dataset(csv, &config)?;
        let data = prepare(&raw, &config);
        let response = config.response_model(&data.names.u)?;
        let outcome = fit_outcome_mle(&data, &config.outcome_spec()?)?;
        checklist_theorem2(&response, &outcome.model, &data)
    } else {
        let spec = config.scenario()?;
        checklist_on_support(&spec.response, &spec.outcome, &scenario_support(&spec))
    };
    prepare_dir(out)?;
    let mut files = vec![write_file(out, "verdict.txt", &verdict.to_report())?];
    if let Some(w) = verdict.witness_csv() {
        files.push(write_file(out, "witness.csv", &w)?);
    }
    Ok((verdict, files))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    /// Preset name; ignored when `config` is given.
    pub scenario: Option<String>,
    pub config: Option<PathBuf>,
    pub kappa2: Option<f64>,
    pub link: Option<String>,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub method: String,
    pub nodes: usize,
    pub m: usize,
    pub b: usize,
    pub hajek: bool,
    pub percentile: bool,
    pub oracle: bool,
    pub emit_dataset: bool,
}

impl SimulateArgs {
    pub fn new(scenario: &str, n: usize, r: usize, seed: u64) -> Self {
        SimulateArgs {
            scenario: Some(scenario.into()),
            config: None,
            kappa2: None,
            link: None,
            n,
            r,
            seed,
            method: "quadrature".into(),
            nodes: 60,
            m: 1000,
            b: 200,
            hajek: false,
            percentile: false,
            oracle: false,
            emit_dataset: false,
        }
    }

    pub fn spec(&self) -> CliResult<ScenarioSpec> {
        let link: Option<LinkFunction> = match &self.link {
            Some(l) => Some(mnar_core::config::parse_link(l, None)?),
            None => None,
        };
        match (&self.config, &self.scenario) {
            (Some(path), _) => Ok(load_config(path)?.scenario()?),
            (None, Some(name)) => Ok(ScenarioSpec::preset(name, self.kappa2, link)?),
            (None, None) => Err(CliError::User("give a scenario preset or --config".into())),
        }
    }

    fn estimator(&self) -> CliResult<McEstimator> {
        if self.oracle {
            return Ok(McEstimator::OracleTruth);
        }
        let method = match self.method.to_ascii_lowercase().as_str() {
            "quadrature" => ScoreMethod::Quadrature { nodes: self.nodes },
            "fi" => ScoreMethod::FractionalImputation {
                m: self.m,
                seed: self.seed,
            },
            other => return Err(CliError::User(format!("unknown method {other:?}"))),
        };
        Ok(McEstimator::Pipeline {
            method,
            b: self.b,
            hajek: self.hajek,
            ci: if self.percentile { CiKind::Percentile } else { CiKind::Normal },
        })
    }
}

fn dataset_csv(data: &Dataset) -> String {
    let mut out = String::from("u,z,y,delta\n");
    for i in 0..data.n() {
        let y = data.y(i).map_or_else(String::new, |v| v.to_string());
        out.push_str(&format!("{},{},{},{}\n", data.u(i)[0], data.z(i)[0], y, u8::from(data.delta(i))));
    }
    out
}

/// Monte Carlo study written to `mc_report.csv` and `mc_report.md`; with
/// `emit_dataset` the first replicate's data goes to `dataset.csv` and a
/// matching fit config to `model.toml`.
pub fn cmd_simulate(args: &SimulateArgs, out: &Path) -> CliResult<(McReport, Vec<PathBuf>)> {
    let spec = args.spec()?;
    let cfg = McConfig {
        n: args.n,
        r: args.r,
        seed: args.seed,
        estimator: args.estimator()?,
    };
    let report = run_monte_carlo(&spec, &cfg)?;
    prepare_dir(out)?;
    let mut files = vec![
        write_file(out, "mc_report.csv", &report.to_csv())?,
        write_file(out, "mc_report.md", &report.to_markdown())?,
    ];
    if args.emit_dataset {
        let data = generate_stream(&spec, args.n, args.seed, 0)?;
        files.push(write_file(out, "dataset.csv", &dataset_csv(&data))?);
        files.push(write_file(out, "model.toml", &fit_config_for(&spec)?)?);
    }
    Ok((report, files))
}

/// Fit config for a CSV written by `dataset_csv`.
pub fn fit_config_for(spec: &ScenarioSpec) -> CliResult<String> {
    let mut cfg = ModelConfig::from_scenario(spec);
    cfg.scenario = None;
    if let Some(o) = cfg.outcome.as_mut() {
        o.kappa = None;
        o.sigma2 = None;
        if let OutcomeSpec::NormalSpline(_) = spec.estimation {
            o.mean = Some("spline".into());
        }
    }
    if let Some(r) = cfg.response.as_mut() {
        r.alpha = None;
        r.beta = None;
    }
    cfg.data = Some(mnar_core::config::DataSection {
        outcome: "y".into(),
        covariates: vec!["u".into()],
        instruments: vec!["z".into()],
        response_indicator: "delta".into(),
        categorical_instrument: spec.z_law.is_discrete(),
        standardize: true,
    });
    Ok(cfg.to_toml_string()?)
}

/// Gather the Markdown and text outputs found in `dir` into `report.md`.
pub fn cmd_report(dir: &Path) -> CliResult<PathBuf> {
    let sections = [
        ("verdict.txt", "Identifiability"),
        ("estimates.md", "Estimates"),
        ("mc_report.md", "Monte Carlo"),
    ];
    let mut out = String::from("# Report\n");
    let mut found = 0;
    for (file, title) in sections {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let body = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        found += 1;
        out.push_str(&format!("\n## {title}\n\n"));
        if file.ends_with(".txt") {
            out.push_str("```\n");
            out.push_str(&body);
            out.push_str("```\n");
        } else {
            out.push_str(&body);
        }
    }
    if found == 0 {
        return Err(CliError::User(format!("no command outputs found in {}", dir.display())));
    }
    write_file(dir, "report.md", &out)
}
