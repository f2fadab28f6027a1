//! Samples of `(u, z, y-or-missing)`; the response indicator is `δ = 1` iff
//! `y` is present.

use crate::error::{Error, Result};
use crate::numerics::spline::Rows;

/// Affine map applied to one column: `standardized = (raw - center) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTransform {
    pub name: String,
    pub center: f64,
    pub scale: f64,
}

impl ColumnTransform {
    pub fn identity(name: impl Into<String>) -> Self {
        ColumnTransform {
            name: name.into(),
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn forward(&self, raw: f64) -> f64 {
        (raw - self.center) / self.scale
    }

    pub fn inverse(&self, standardized: f64) -> f64 {
        self.center + self.scale * standardized
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub u: Vec<ColumnTransform>,
    pub z: Vec<ColumnTransform>,
    pub y: ColumnTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnNames {
    pub u: Vec<String>,
    pub z: Vec<String>,
    pub y: String,
}

impl ColumnNames {
    pub fn generic(du: usize, dz: usize) -> Self {
        ColumnNames {
            u: (1..=du).map(|i| format!("u{i}")).collect(),
            z: (1..=dz).map(|i| format!("z{i}")).collect(),
            y: "y".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    du: usize,
    dz: usize,
    u: Vec<f64>,
    z: Vec<f64>,
    y: Vec<Option<f64>>,
    pub names: ColumnNames,
    /// Instrument columns hold category codes rather than measurements.
    pub z_categorical: bool,
    pub standardization: Option<Standardization>,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

impl Dataset {
    /// `u` and `z` are row-major with `du` and `dz` columns.
    pub fn new(du: usize, dz: usize, u: Vec<f64>, z: Vec<f64>, y: Vec<Option<f64>>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if dz == 0 {
            return Err(Error::InvalidInput("at least one instrument column is required".into()));
        }
        if u.len() != n * du || z.len() != n * dz {
            return Err(Error::InvalidInput(format!(
                "covariate storage does not match {n} rows of ({du}, {dz}) columns"
            )));
        }
        for i in 0..n {
            let bad = u[i * du..(i + 1) * du]
                .iter()
                .chain(&z[i * dz..(i + 1) * dz])
                .chain(y[i].iter())
                .any(|v| !v.is_finite());
            if bad {
                return Err(Error::Schema {
                    row: Some(i),
                    msg: "non-finite value".into(),
                });
            }
        }
        if y.iter().all(Option::is_none) {
            return Err(Error::InvalidInput("no observed outcomes".into()));
        }
        Ok(Dataset {
            du,
            dz,
            u,
            z,
            y,
            names: ColumnNames::generic(du, dz),
            z_categorical: false,
            standardization: None,
        })
    }

    pub fn with_names(mut self, names: ColumnNames) -> Self {
        self.names = names;
        self
    }

    pub fn with_categorical_z(mut self, categorical: bool) -> Self {
        self.z_categorical = categorical;
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn du(&self) -> usize {
        self.du
    }

    pub fn dz(&self) -> usize {
        self.dz
    }

    #[inline]
    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i * self.du..(i + 1) * self.du]
    }

    #[inline]
    pub fn z(&self, i: usize) -> &[f64] {
        &self.z[i * self.dz..(i + 1) * self.dz]
    }

    #[inline]
    pub fn y(&self, i: usize) -> Option<f64> {
        self.y[i]
    }

    #[inline]
    pub fn delta(&self, i: usize) -> bool {
        self.y[i].is_some()
    }

    pub fn n_observed(&self) -> usize {
        self.y.iter().filter(|v| v.is_some()).count()
    }

    pub fn response_rate(&self) -> f64 {
        self.n_observed() as f64 / self.n() as f64
    }

    pub fn u_rows(&self) -> Rows<'_> {
        Rows::new(&self.u, self.du)
    }

    pub fn z_rows(&self) -> Rows<'_> {
        Rows::new(&self.z, self.dz)
    }

    /// Respondents only: `(u, z, y)` with row-major covariates.
    pub fn observed(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut u = Vec::new();
        let mut z = Vec::new();
        let mut y = Vec::new();
        for i in 0..self.n() {
            if let Some(v) = self.y[i] {
                u.extend_from_slice(self.u(i));
                z.extend_from_slice(self.z(i));
                y.push(v);
            }
        }
        (u, z, y)
    }

    /// Distinct instrument values, in first-seen order.
    pub fn z_levels(&self) -> Vec<Vec<f64>> {
        let mut levels: Vec<Vec<f64>> = Vec::new();
        for i in 0..self.n() {
            if !levels.iter().any(|l| l.as_slice() == self.z(i)) {
                levels.push(self.z(i).to_vec());
            }
        }
        levels
    }

    /// Rows in the order given; may repeat.
    pub fn resample(&self, rows: &[usize]) -> Result<Dataset> {
        let mut u = Vec::with_capacity(rows.len() * self.du);
        let mut z = Vec::with_capacity(rows.len() * self.dz);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            u.extend_from_slice(self.u(i));
            z.extend_from_slice(self.z(i));
            y.push(self.y[i]);
        }
        let mut out = Dataset::new(self.du, self.dz, u, z, y)?;
        out.names = self.names.clone();
        out.z_categorical = self.z_categorical;
        out.standardization = self.standardization.clone();
        Ok(out)
    }

    /// Center and scale `u`, continuous `z`, and observed `y` by their sample
    /// moments. The transforms are recorded on the returned dataset.
    pub fn standardize(&self) -> Dataset {
        let n = self.n();
        let col = |data: &[f64], d: usize, c: usize, name: &str| {
            let (m, s) = mean_sd((0..n).map(move |i| data[i * d + c]));
            ColumnTransform {
                name: name.to_string(),
                center: m,
                scale: s,
            }
        };
        let ut: Vec<ColumnTransform> = (0..self.du)
            .map(|c| col(&self.u, self.du, c, &self.names.u[c]))
            .collect();
        let zt: Vec<ColumnTransform> = (0..self.dz)
            .map(|c| {
                if self.z_categorical {
                    ColumnTransform::identity(&self.names.z[c])
                } else {
                    col(&self.z, self.dz, c, &self.names.z[c])
                }
            })
            .collect();
        let (ym, ys) = mean_sd(self.y.iter().flatten().copied());
        let yt = ColumnTransform {
            name: self.names.y.clone(),
            center: ym,
            scale: ys,
        };
        self.apply_standardization(Standardization { u: ut, z: zt, y: yt })
    }

    pub fn apply_standardization(&self, s: Standardization) -> Dataset {
        let mut out = self.clone();
        for i in 0..self.n() {
            for c in 0..self.du {
                out.u[i * self.du + c] = s.u[c].forward(self.u[i * self.du + c]);
            }
            for c in 0..self.dz {
                out.z[i * self.dz + c] = s.z[c].forward(self.z[i * self.dz + c]);
            }
            out.y[i] = self.y[i].map(|v| s.y.forward(v));
        }
        out.standardization = Some(s);
        out
    }
}
