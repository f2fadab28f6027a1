//! Regression B-splines over continuous covariates, optionally interacted
//! with the levels of a categorical instrument, and a least-squares fitter
//! with information-criterion knot selection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// How one covariate enters the spline design.
#[derive(Debug, Clone, PartialEq)]
pub enum SplineTerm {
    /// Clamped B-spline on `[lo, hi]` with the given interior knots.
    BSpline {
        column: usize,
        lo: f64,
        hi: f64,
        interior: Vec<f64>,
    },
    /// Too few distinct values for a spline; enters as a single slope.
    Linear { column: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstrumentTerm {
    /// z enters additively and linearly.
    Linear { dz: usize },
    /// Separate curve for each observed level of z.
    Levels(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    pub degree: usize,
    pub terms: Vec<SplineTerm>,
    pub instrument: InstrumentTerm,
}

impl SplineBasis {
    fn term_len(&self, term: &SplineTerm) -> usize {
        match term {
            SplineTerm::BSpline { interior, .. } => interior.len() + self.degree + 1,
            SplineTerm::Linear { .. } => 1,
        }
    }

    /// Columns of one per-level block: intercept plus each term with its
    /// first B-spline dropped (the full set sums to one).
    fn block_len(&self) -> usize {
        1 + self
            .terms
            .iter()
            .map(|t| match t {
                SplineTerm::BSpline { .. } => self.term_len(t) - 1,
                SplineTerm::Linear { .. } => 1,
            })
            .sum::<usize>()
    }

    pub fn len(&self) -> usize {
        match &self.instrument {
            InstrumentTerm::Linear { dz } => self.block_len() + dz,
            InstrumentTerm::Levels(levels) => levels.len() * self.block_len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_interior_knots(&self) -> usize {
        self.terms
            .iter()
            .map(|t| match t {
                SplineTerm::BSpline { interior, .. } => interior.len(),
                SplineTerm::Linear { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Full B-spline basis of the `term_index`-th term at `x` (clamped to the
    /// boundary knots).
    pub fn bspline_values(&self, term_index: usize, x: f64) -> Vec<f64> {
        match &self.terms[term_index] {
            SplineTerm::BSpline {
                lo, hi, interior, ..
            } => bspline_basis(self.degree, *lo, *hi, interior, x),
            SplineTerm::Linear { .. } => vec![x],
        }
    }

    fn block(&self, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.block_len());
        out.push(1.0);
        for (i, term) in self.terms.iter().enumerate() {
            match term {
                SplineTerm::BSpline { column, .. } => {
                    out.extend_from_slice(&self.bspline_values(i, u[*column])[1..])
                }
                SplineTerm::Linear { column } => out.push(u[*column]),
            }
        }
        out
    }

    /// Index of the level matching `z`; unseen values map to the nearest level.
    fn level_of(levels: &[Vec<f64>], z: &[f64]) -> usize {
        let dist = |l: &Vec<f64>| -> f64 { l.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum() };
        levels
            .iter()
            .enumerate()
            .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn features(&self, u: &[f64], z: &[f64]) -> Vec<f64> {
        let block = self.block(u);
        match &self.instrument {
            InstrumentTerm::Linear { .. } => {
                let mut out = block;
                out.extend_from_slice(z);
                out
            }
            InstrumentTerm::Levels(levels) => {
                let mut out = vec![0.0; self.len()];
                let k = Self::level_of(levels, z);
                let bl = block.len();
                out[k * bl..(k + 1) * bl].copy_from_slice(&block);
                out
            }
        }
    }
}

fn bspline_basis(degree: usize, lo: f64, hi: f64, interior: &[f64], x: f64) -> Vec<f64> {
    let p = degree;
    let mut knots = vec![lo; p + 1];
    knots.extend_from_slice(interior);
    knots.extend(std::iter::repeat_n(hi, p + 1));
    let n_basis = interior.len() + p + 1;
    let x = x.clamp(lo, hi);

    let span = if x >= hi {
        n_basis - 1
    } else {
        // last i in [p, n_basis - 1] with knots[i] <= x
        let mut s = p;
        while s < n_basis - 1 && knots[s + 1] <= x {
            s += 1;
        }
        s
    };

    let mut nvals = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    nvals[0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = nvals[r] / (right[r + 1] + left[j - r]);
            nvals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        nvals[j] = saved;
    }
    let mut out = vec![0.0; n_basis];
    for (j, v) in nvals.into_iter().enumerate() {
        out[span - p + j] = v;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnotCriterion {
    #[default]
    Aic,
    Gcv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFitOptions {
    pub degree: usize,
    pub knot_grid: Vec<usize>,
    pub criterion: KnotCriterion,
    /// Interact the spline with the levels of z instead of adding z linearly.
    pub categorical_z: bool,
}

impl Default for SplineFitOptions {
    fn default() -> Self {
        SplineFitOptions {
            degree: 3,
            knot_grid: vec![0, 1, 2, 3, 4],
            criterion: KnotCriterion::Aic,
            categorical_z: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub basis: SplineBasis,
    pub coef: Vec<f64>,
    pub fitted: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub criterion_value: f64,
}

/// Column-major-free view of a covariate matrix stored row by row.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Rows<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        Rows { data, dim }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn distinct_levels(z: Rows<'_>, n: usize) -> Vec<Vec<f64>> {
    let mut levels: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let row = z.row(i);
        if !levels.iter().any(|l| l.as_slice() == row) {
            levels.push(row.to_vec());
        }
    }
    levels.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    levels
}

/// Build a basis with `k` interior knots at quantiles of each continuous column.
pub fn build_basis(u: Rows<'_>, z: Rows<'_>, n: usize, k: usize, opts: &SplineFitOptions) -> SplineBasis {
    let mut terms = Vec::with_capacity(u.dim);
    for c in 0..u.dim {
        let mut col: Vec<f64> = (0..n).map(|i| u.row(i)[c]).collect();
        col.sort_by(f64::total_cmp);
        let mut distinct = col.clone();
        distinct.dedup();
        if distinct.len() < 2 * (opts.degree + 1) {
            terms.push(SplineTerm::Linear { column: c });
            continue;
        }
        let (lo, hi) = (col[0], col[n - 1]);
        let mut interior: Vec<f64> = (1..=k)
            .map(|j| quantile(&col, j as f64 / (k + 1) as f64))
            .filter(|&q| q > lo && q < hi)
            .collect();
        interior.dedup();
        terms.push(SplineTerm::BSpline {
            column: c,
            lo,
            hi,
            interior,
        });
    }
    let instrument = if opts.categorical_z && z.dim > 0 {
        InstrumentTerm::Levels(distinct_levels(z, n))
    } else {
        InstrumentTerm::Linear { dz: z.dim }
    };
    SplineBasis {
        degree: opts.degree,
        terms,
        instrument,
    }
}

struct LsFit {
    coef: Vec<f64>,
    fitted: Vec<f64>,
    rss: f64,
}

fn least_squares(basis: &SplineBasis, u: Rows<'_>, z: Rows<'_>, y: &[f64]) -> Result<LsFit> {
    let n = y.len();
    let p = basis.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for (j, v) in basis.features(u.row(i), z.row(i)).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax)
        .count();
    if rank < p {
        return Err(Error::RankDeficient {
            what: "spline design".into(),
            rank,
            cols: p,
        });
    }
    let coef = svd
        .solve(&DVector::from_column_slice(y), RANK_TOL * smax)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let fitted = &x * &coef;
    let rss = fitted.iter().zip(y).map(|(f, y)| (y - f) * (y - f)).sum();
    Ok(LsFit {
        coef: coef.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        rss,
    })
}

/// Least-squares spline mean with knot count chosen by AIC or GCV.
pub fn fit_spline_mean(u: Rows<'_>, z: Rows<'_>, y: &[f64], opts: &SplineFitOptions) -> Result<SplineFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("no observations for spline fit".into()));
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    // RSS below this is exact-fit roundoff and must not drive the criterion.
    let floor = (1e-20 * tss / n as f64).max(1e-300);

    let mut best: Option<SplineFit> = None;
    let mut last_err = None;
    for &k in &opts.knot_grid {
        let basis = build_basis(u, z, n, k, opts);
        let p = basis.len();
        if p > n {
            last_err = Some(Error::InvalidInput(format!(
                "{n} observations cannot determine {p} spline coefficients"
            )));
            continue;
        }
        let fit = match least_squares(&basis, u, z, y) {
            Ok(f) => f,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let mse = (fit.rss / n as f64).max(floor);
        let nf = n as f64;
        let value = match opts.criterion {
            KnotCriterion::Aic => nf * mse.ln() + 2.0 * p as f64,
            KnotCriterion::Gcv => {
                let d = 1.0 - p as f64 / nf;
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    mse / (d * d)
                }
            }
        };
        let better = best.as_ref().is_none_or(|b| value < b.criterion_value);
        if better {
            let r_squared = if tss > 0.0 { 1.0 - fit.rss / tss } else { 0.0 };
            best = Some(SplineFit {
                basis,
                coef: fit.coef,
                fitted: fit.fitted,
                rss: fit.rss,
                r_squared,
                criterion_value: value,
            });
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::InvalidInput("empty knot grid".into()))
    })
}
