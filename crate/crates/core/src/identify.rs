//! Identifiability diagnostics.
//!
//! Two parameterizations of (response, respondents' outcome) are
//! observationally equivalent iff the functional
//! `φ(y, x) = p1(y | x) / ∫ p1(y | x) / π(x, y) dy` coincides. This module
//! evaluates that functional, compares models through it, and runs the
//! structural checks that certify uniqueness: a rank test for categorical
//! `(y, z)`, and a checklist (instrument exclusion, index form, outcome
//! family, monotone likelihood ratio, tail integrability) otherwise.

use std::fmt;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::links::LinkFunction;
use crate::models::{MeanBasis, OutcomeFamily, OutcomeModel, ResponseModel, Transform};
use crate::numerics::quadrature::{integrate_over_y, GaussHermite, QuadratureRule};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Witness mechanisms are kept inside `[WITNESS_MIN, WITNESS_MAX]`.
pub const WITNESS_MIN: f64 = 0.05;
pub const WITNESS_MAX: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    C1,
    C4,
    C5,
    C6,
    C7,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::C1 => "C1",
            Condition::C4 => "C4",
            Condition::C5 => "C5",
            Condition::C6 => "C6",
            Condition::C7 => "C7",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerdictStatus {
    Identifiable,
    NotIdentifiable,
    ConditionFailed(Condition),
    Inconclusive,
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictStatus::Identifiable => f.write_str("Identifiable"),
            VerdictStatus::NotIdentifiable => f.write_str("NotIdentifiable"),
            VerdictStatus::ConditionFailed(c) => write!(f, "ConditionFailed({c})"),
            VerdictStatus::Inconclusive => f.write_str("Inconclusive"),
        }
    }
}

/// Two response mechanisms over the levels of a categorical outcome that
/// give the same observed likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalWitness {
    pub base: Vec<f64>,
    pub alternative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityVerdict {
    pub status: VerdictStatus,
    pub witness: Option<CategoricalWitness>,
    /// Every condition that failed, in condition order.
    pub failed: Vec<Condition>,
    pub notes: Vec<String>,
}

impl IdentifiabilityVerdict {
    fn new(status: VerdictStatus) -> Self {
        IdentifiabilityVerdict {
            status,
            witness: None,
            failed: vec![],
            notes: vec![],
        }
    }

    /// `key = value` report, one entry per line.
    pub fn to_report(&self) -> String {
        let mut out = format!("status = {}\n", self.status);
        let failed: Vec<String> = self.failed.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("failed = [{}]\n", failed.join(", ")));
        out.push_str(&format!("witness = {}\n", self.witness.is_some()));
        for (i, note) in self.notes.iter().enumerate() {
            out.push_str(&format!("note.{} = {}\n", i + 1, note));
        }
        out
    }

    /// Witness table: one row per outcome level.
    pub fn witness_csv(&self) -> Option<String> {
        let w = self.witness.as_ref()?;
        let mut out = String::from("y_level,pi_base,pi_alternative\n");
        for (i, (a, b)) in w.base.iter().zip(&w.alternative).enumerate() {
            out.push_str(&format!("{},{:.17},{:.17}\n", i + 1, a, b));
        }
        Some(out)
    }
}

/// `φ(y, x)` for a parametric (response, outcome) pair.
pub fn phi_functional(
    response: &ResponseModel,
    outcome: &OutcomeModel,
    u: &[f64],
    z: &[f64],
    y: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let denom = phi_denominator(response, outcome, u, z, rule)?;
    Ok(outcome.density(u, z, y)? / denom)
}

/// `∫ p1(y | x) / π(x, y) dy`, the reciprocal of `P(δ = 1 | x)`.
pub fn phi_denominator(
    response: &ResponseModel,
    outcome: &OutcomeModel,
    u: &[f64],
    z: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    let denom = integrate_over_y(
        |y| (-response.link.ln_cdf(response.predictor(u, y))).exp(),
        outcome,
        u,
        z,
        rule,
    )?;
    if !denom.is_finite() {
        return Err(Error::Integration {
            location: f64::NAN,
            msg: "divergent denominator".into(),
        });
    }
    Ok(denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub equal: bool,
    /// `sup |φ_A - φ_B|` over the grids.
    pub distance: f64,
}

/// Compare two parameterizations through `φ` on an `x` grid (pairs of
/// `(u, z)`) and a `y` grid.
pub fn verify_equal_observed_likelihood(
    model_a: (&ResponseModel, &OutcomeModel),
    model_b: (&ResponseModel, &OutcomeModel),
    x_grid: &[(Vec<f64>, Vec<f64>)],
    y_grid: &[f64],
    rule: &QuadratureRule,
    tol: f64,
) -> Result<Equivalence> {
    let mut distance: f64 = 0.0;
    for (u, z) in x_grid {
        let da = phi_denominator(model_a.0, model_a.1, u, z, rule)?;
        let db = phi_denominator(model_b.0, model_b.1, u, z, rule)?;
        for &y in y_grid {
            let pa = model_a.1.density(u, z, y)? / da;
            let pb = model_b.1.density(u, z, y)? / db;
            distance = distance.max((pa - pb).abs());
        }
    }
    Ok(Equivalence {
        equal: distance <= tol,
        distance,
    })
}

/// Respondents' outcome distribution for categorical `y` and `z`: column
/// `j` holds `p1(y | z = j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalRespondentTable {
    p1: DMatrix<f64>,
}

impl CategoricalRespondentTable {
    /// `columns[j][y]` is `p1(y | z = j)`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let m_z = columns.len();
        let m_y = columns.first().map_or(0, Vec::len);
        if m_z == 0 || m_y == 0 {
            return Err(Error::InvalidInput("empty categorical table".into()));
        }
        if columns.iter().any(|c| c.len() != m_y) {
            return Err(Error::InvalidInput("ragged categorical table".into()));
        }
        let mut p1 = DMatrix::zeros(m_y, m_z);
        for (j, col) in columns.iter().enumerate() {
            for (y, &v) in col.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "p1({} | z={}) = {v} is not a probability",
                        y + 1,
                        j + 1
                    )));
                }
                p1[(y, j)] = v;
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "column z={} sums to {s}, not 1",
                    j + 1
                )));
            }
        }
        Ok(CategoricalRespondentTable { p1 })
    }

    pub fn m_y(&self) -> usize {
        self.p1.nrows()
    }

    pub fn m_z(&self) -> usize {
        self.p1.ncols()
    }

    pub fn p1(&self, y: usize, z: usize) -> f64 {
        self.p1[(y, z)]
    }

    pub fn rank(&self) -> usize {
        let sv = self.p1.clone().svd(false, false).singular_values;
        let smax = sv.max();
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }

    fn check_mechanism(&self, pi: &[f64]) -> Result<()> {
        if pi.len() != self.m_y() {
            return Err(Error::InvalidInput(format!(
                "mechanism has {} levels, table has {}",
                pi.len(),
                self.m_y()
            )));
        }
        if pi.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidInput("mechanism entries must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// `Σ_y p1(y | z) / π(y)` for each level of z.
    pub fn denominators(&self, pi: &[f64]) -> Result<Vec<f64>> {
        self.check_mechanism(pi)?;
        Ok((0..self.m_z())
            .map(|j| (0..self.m_y()).map(|y| self.p1[(y, j)] / pi[y]).sum())
            .collect())
    }

    /// `φ(y, z)` as an `m_y × m_z` matrix.
    pub fn phi(&self, pi: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.denominators(pi)?;
        Ok(DMatrix::from_fn(self.m_y(), self.m_z(), |y, j| self.p1[(y, j)] / d[j]))
    }

    /// `sup |φ_A - φ_B|` over all cells.
    pub fn phi_distance(&self, pi_a: &[f64], pi_b: &[f64]) -> Result<f64> {
        let a = self.phi(pi_a)?;
        let b = self.phi(pi_b)?;
        Ok((a - b).abs().max())
    }
}

/// Rank test for categorical `y` and `z` against the base mechanism π ≡ 0.5.
pub fn check_categorical(table: &CategoricalRespondentTable) -> IdentifiabilityVerdict {
    check_categorical_with_base(table, &vec![0.5; table.m_y()])
        .expect("constant 0.5 mechanism is always valid")
}

/// Rank test; a witness is an alternative mechanism `π'` with
/// `1/π' - 1/π` orthogonal to every column of the table.
pub fn check_categorical_with_base(
    table: &CategoricalRespondentTable,
    base: &[f64],
) -> Result<IdentifiabilityVerdict> {
    table.check_mechanism(base)?;
    let (m_y, m_z) = (table.m_y(), table.m_z());
    let rank = table.rank();

    if m_y <= m_z && rank == m_y {
        let mut v = IdentifiabilityVerdict::new(VerdictStatus::Identifiable);
        v.notes.push(format!("m_y = {m_y} <= m_z = {m_z} and p1 has full rank {rank}"));
        v.notes.push(C3_NOTE.into());
        return Ok(v);
    }

    let witness = build_witness(table, base, rank)?;
    let mut v = if m_y > m_z {
        let mut v = IdentifiabilityVerdict::new(VerdictStatus::NotIdentifiable);
        v.notes.push(format!("m_y = {m_y} > m_z = {m_z}"));
        v
    } else {
        let mut v = IdentifiabilityVerdict::new(VerdictStatus::Inconclusive);
        v.notes.push(format!(
            "m_y = {m_y} <= m_z = {m_z} but p1 has rank {rank} < {m_y}; instrument relevance is degenerate"
        ));
        v
    };
    v.witness = Some(witness);
    v.notes.push(C3_NOTE.into());
    Ok(v)
}

const C3_NOTE: &str = "C3 (identifiability of p(z|delta=0,u)/p(z|delta=1,u)) is assumed, not checked";

fn build_witness(
    table: &CategoricalRespondentTable,
    base: &[f64],
    rank: usize,
) -> Result<CategoricalWitness> {
    // Left null vector of p1: eigenvector of p1 p1ᵀ for its smallest eigenvalue.
    let gram = &table.p1 * table.p1.transpose();
    let eig = gram.symmetric_eigen();
    let (mut idx, mut smallest) = (0, f64::INFINITY);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < smallest {
            smallest = ev;
            idx = i;
        }
    }
    debug_assert!(rank < table.m_y());
    let dir: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();

    // 1/π' = 1/π + t·dir, with π' kept inside [WITNESS_MIN, WITNESS_MAX].
    let lo = (1.0 / WITNESS_MAX).min(base.iter().map(|p| 1.0 / p).fold(f64::INFINITY, f64::min));
    let hi = (1.0 / WITNESS_MIN).max(base.iter().map(|p| 1.0 / p).fold(0.0, f64::max));
    let mut t_max = f64::INFINITY;
    for (a, &p) in dir.iter().zip(base) {
        let c = 1.0 / p;
        if *a > 0.0 {
            t_max = t_max.min((hi - c) / a);
        } else if *a < 0.0 {
            t_max = t_max.min((c - lo) / -a);
        }
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidInput(
            "base mechanism leaves no room for a witness inside [0.05, 0.95]".into(),
        ));
    }
    let t = 0.5 * t_max;
    let alternative = dir
        .iter()
        .zip(base)
        .map(|(a, &p)| 1.0 / (1.0 / p + t * a))
        .collect();
    Ok(CategoricalWitness {
        base: base.to_vec(),
        alternative,
    })
}

/// Default exponents for the tail probe.
pub const DEFAULT_S_GRID: [f64; 7] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75];

#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    /// Analytic classification: `∃ s ∈ (0, 2)` with `liminf Ψ(z) e^{|z|^s} > 0`.
    pub holds: bool,
    pub witness_s: Option<f64>,
    /// Numeric probe on `z ∈ [-40, -5]` over the supplied exponents.
    pub probe_holds: bool,
    pub probe_agrees: bool,
}

/// `ln Ψ(z) + |z|^s` does not trend down over `[-40, -20]`.
fn probe_exponent(link: LinkFunction, s: f64) -> bool {
    let g = |z: f64| link.ln_cdf(z) + z.abs().powf(s);
    let values: Vec<f64> = (0..=70).map(|k| -5.0 - 0.5 * k as f64).map(g).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let at_40 = values[70];
    let at_20 = values[30];
    at_40 >= at_20 - 1e-9
}

/// Tail condition on Ψ guaranteeing integrability of `p1/π` for normal
/// respondents' outcomes.
pub fn check_tail_condition(link: LinkFunction, s_grid: &[f64]) -> TailCheck {
    let valid: Vec<f64> = s_grid.iter().copied().filter(|s| *s > 0.0 && *s < 2.0).collect();
    let (holds, analytic_min) = match link {
        LinkFunction::Logistic => (true, 1.0),
        LinkFunction::Cauchy | LinkFunction::StudentT { .. } => (true, 0.0),
        LinkFunction::Probit => (false, f64::INFINITY),
    };
    let probe: Vec<f64> = valid.iter().copied().filter(|&s| probe_exponent(link, s)).collect();
    let probe_holds = !probe.is_empty();
    let witness_s = if holds {
        probe
            .iter()
            .copied()
            .find(|&s| s >= analytic_min)
            .or(Some(analytic_min.max(1.0)))
    } else {
        None
    };
    TailCheck {
        holds,
        witness_s,
        probe_holds,
        probe_agrees: probe_holds == holds,
    }
}

/// Whether `p1(· | u, z1) / p1(· | u, z2)` is a non-constant monotone
/// function of y. Supported families are canonical exponential families, so
/// the ratio is `∝ exp{(θ1 - θ2) y / τ}` and only the difference of natural
/// parameters matters.
pub fn check_mlr(outcome: &OutcomeModel, u: &[f64], z1: &[f64], z2: &[f64]) -> bool {
    let t1 = outcome.linear_predictor(u, z1);
    let t2 = outcome.linear_predictor(u, z2);
    (t1 - t2).abs() > 1e-12 * (1.0 + t1.abs() + t2.abs())
}

/// `E[1 + y - u - q (y - u)²]` for `y ~ N(u + z, 1)`; zero for z ∈ {0, 1}
/// when `q = 1`.
pub fn completeness_residual(u: f64, z: f64, quadratic_coef: f64) -> f64 {
    let gh = GaussHermite::new(20);
    gh.expect(u + z, 1.0, |y| 1.0 + y - u - quadratic_coef * (y - u) * (y - u))
}

/// Largest `|E[h(u, y) | δ = 1, u, z]|` over the grid and z ∈ {0, 1} for the
/// completeness-violating `h(u, y) = 1 + y - u - (y - u)²`.
pub fn check_completeness_counterexample(u_grid: &[f64]) -> f64 {
    u_grid
        .iter()
        .flat_map(|&u| [0.0, 1.0].map(|z| completeness_residual(u, z, 1.0).abs()))
        .fold(0.0, f64::max)
}

/// Covariate points at which the checklist is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSupport {
    pub u: Vec<Vec<f64>>,
    pub z_levels: Vec<Vec<f64>>,
}

impl CovariateSupport {
    /// Up to `max_u` evenly spaced rows of `u`, and up to 20 distinct `z`.
    pub fn from_dataset(data: &Dataset, max_u: usize) -> Self {
        let n = data.n();
        let step = (n / max_u.max(1)).max(1);
        let u = (0..n).step_by(step).map(|i| data.u(i).to_vec()).collect();
        let mut z_levels = data.z_levels();
        if z_levels.len() > 20 {
            z_levels.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let k = z_levels.len();
            z_levels = (0..20).map(|i| z_levels[i * (k - 1) / 19].clone()).collect();
        }
        CovariateSupport { u, z_levels }
    }
}

fn full_column_rank(rows: &[Vec<f64>], cols: usize) -> bool {
    if cols == 0 {
        return true;
    }
    if rows.len() < cols {
        return false;
    }
    let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let sv = m.svd(false, false).singular_values;
    let smax = sv.max();
    smax > 0.0 && sv.iter().filter(|&&s| s > RANK_TOL * smax).count() == cols
}

/// Checklist evaluated on covariate points taken from `data`.
pub fn checklist_theorem2(
    response: &ResponseModel,
    outcome: &OutcomeModel,
    data: &Dataset,
) -> IdentifiabilityVerdict {
    checklist_on_support(response, outcome, &CovariateSupport::from_dataset(data, 200))
}

/// Sufficient conditions for identifiability of (φ, γ) with a
/// non-categorical outcome. Every check is evaluated; the status names the
/// first failing condition in condition order.
pub fn checklist_on_support(
    response: &ResponseModel,
    outcome: &OutcomeModel,
    support: &CovariateSupport,
) -> IdentifiabilityVerdict {
    let mut failed = Vec::new();
    let mut notes = Vec::new();

    // C1: instrument exclusion is structural (π takes u only); relevance is
    // the non-constant-ratio half of C6 and is reported there.
    if support.z_levels.is_empty() {
        failed.push(Condition::C1);
        notes.push("C1: no instrument values available".into());
    } else {
        notes.push("C1: z excluded from the response index by construction".into());
    }

    // C4: Ψ{h(u; α) + g(u; β) m(y)} with injective linear forms.
    let h_rows: Vec<Vec<f64>> = support.u.iter().map(|u| response.h.features(u)).collect();
    let g_rows: Vec<Vec<f64>> = support.u.iter().map(|u| response.g.features(u)).collect();
    let h_ok = full_column_rank(&h_rows, response.h.len());
    let g_ok = full_column_rank(&g_rows, response.g.len());
    if h_ok && g_ok {
        notes.push("C4: index forms have full column rank on the covariate sample".into());
    } else {
        failed.push(Condition::C4);
        notes.push(format!("C4: rank-deficient index design (h ok: {h_ok}, g ok: {g_ok})"));
    }

    // C5: family membership with an injective mean design.
    let c5 = match outcome.basis {
        MeanBasis::Known(_) => true,
        _ => {
            let rows: Vec<Vec<f64>> = support
                .u
                .iter()
                .flat_map(|u| support.z_levels.iter().map(move |z| outcome.basis.features(u, z)))
                .collect();
            full_column_rank(&rows, outcome.basis.len())
        }
    };
    if c5 {
        notes.push("C5: normal/Bernoulli family with support free of x and full-rank mean design".into());
    } else {
        failed.push(Condition::C5);
        notes.push("C5: mean design is rank-deficient on the covariate sample".into());
    }

    // C6: some pair of instrument values separates the outcome law at every u.
    let separated = |u: &Vec<f64>| {
        support.z_levels.iter().enumerate().any(|(i, z1)| {
            support.z_levels[i + 1..]
                .iter()
                .any(|z2| check_mlr(outcome, u, z1, z2))
        })
    };
    let unseparated = support.u.iter().filter(|u| !separated(u)).count();
    if !support.u.is_empty() && unseparated == 0 || support.u.is_empty() && separated(&vec![]) {
        notes.push("C6: density ratio across instrument values is monotone and non-constant".into());
    } else {
        failed.push(Condition::C6);
        notes.push(format!(
            "C6: instrument leaves p1 unchanged at {unseparated} of {} covariate points",
            support.u.len().max(1)
        ));
    }

    // C7: automatic for finite support; tail condition on Ψ for normal outcomes.
    match outcome.family {
        OutcomeFamily::Bernoulli => notes.push("C7: finite outcome support".into()),
        OutcomeFamily::Normal { .. } => {
            let tail = check_tail_condition(response.link, &DEFAULT_S_GRID);
            let identity_m = response.m == Transform::Identity;
            if tail.holds && identity_m {
                notes.push(format!(
                    "C7: {} satisfies the tail condition with s = {}",
                    response.link,
                    tail.witness_s.unwrap_or(f64::NAN)
                ));
            } else {
                failed.push(Condition::C7);
                notes.push(format!(
                    "C7: {} fails the tail condition; the integral of p1/pi need not exist",
                    response.link
                ));
            }
        }
    }
    notes.push(C3_NOTE.into());

    let status = match failed.first() {
        None => VerdictStatus::Identifiable,
        Some(&c) => VerdictStatus::ConditionFailed(c),
    };
    IdentifiabilityVerdict {
        status,
        witness: None,
        failed,
        notes,
    }
}
