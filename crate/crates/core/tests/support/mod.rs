//! Brute-force oracle for the categorical rank test, shared with the
//! acceptance suite.
#![allow(dead_code)]

use mnar_core::identify::CategoricalRespondentTable;
use mnar_core::numerics::rng_stream;
use nalgebra::DMatrix;
use rand::Rng;

/// Residual threshold for "reproduces the observed likelihood" on the grid.
pub const TAU: f64 = 5e-3;
/// Alternatives must move some entry of π by at least this much.
pub const MIN_SHIFT: f64 = 0.05;
pub const GRID_STEP: f64 = 1e-3;

pub struct RandomTable {
    pub columns: Vec<Vec<f64>>,
    pub table: CategoricalRespondentTable,
}

fn condition_ratio(columns: &[Vec<f64>]) -> f64 {
    let m_y = columns[0].len();
    let m = DMatrix::from_fn(m_y, columns.len(), |y, j| columns[j][y]);
    let sv = m.svd(false, false).singular_values;
    let k = m_y.min(columns.len());
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[k - 1] / s[0]
}

/// Seeded suite of column-stochastic tables with `m_y, m_z ≤ 3`. Tables
/// with `m_y ≤ m_z` are redrawn until `σ_min/σ_max ≥ 0.2`.
pub fn random_tables(seed: u64, count: usize) -> Vec<RandomTable> {
    let mut rng = rng_stream(seed, 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let m_y = rng.random_range(1..=3usize);
        let m_z = rng.random_range(1..=3usize);
        let columns: Vec<Vec<f64>> = (0..m_z)
            .map(|_| {
                let raw: Vec<f64> = (0..m_y).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = raw.iter().sum();
                let mut col: Vec<f64> = raw.iter().map(|v| v / s).collect();
                // exact column sums
                let head: f64 = col[..m_y - 1].iter().sum();
                col[m_y - 1] = 1.0 - head;
                col
            })
            .collect();
        if m_y > 1 && m_y <= m_z && condition_ratio(&columns) < 0.2 {
            continue;
        }
        let table = CategoricalRespondentTable::from_columns(&columns).expect("valid random table");
        out.push(RandomTable { columns, table });
    }
    out
}

/// Whether some `π'` on the grid, at least `MIN_SHIFT` away from `base`,
/// reproduces every denominator `Σ_y p1(y|z)/π(y)` within `TAU`. The
/// last coordinate is solved from the first instrument level.
pub fn grid_alternative_exists(columns: &[Vec<f64>], base: &[f64]) -> bool {
    let m_y = base.len();
    let m_z = columns.len();
    let target: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().zip(base).map(|(p, b)| p / b).sum())
        .collect();
    let steps = (1.0 / GRID_STEP).round() as usize;
    let free = m_y - 1;
    let total = (steps - 1).pow(free as u32);
    let last = m_y - 1;
    let mut pi = vec![0.0; m_y];
    for idx in 0..total {
        let mut k = idx;
        for c in 0..free {
            pi[c] = ((k % (steps - 1)) + 1) as f64 * GRID_STEP;
            k /= steps - 1;
        }
        let p_last = columns[0][last];
        if p_last <= 0.0 {
            continue;
        }
        let rest: f64 = (0..free).map(|y| columns[0][y] / pi[y]).sum();
        let inv = (target[0] - rest) / p_last;
        if !(inv > 1.0) {
            continue;
        }
        pi[last] = 1.0 / inv;
        let shift = pi.iter().zip(base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if shift < MIN_SHIFT {
            continue;
        }
        let resid = (1..m_z)
            .map(|j| {
                let d: f64 = (0..m_y).map(|y| columns[j][y] / pi[y]).sum();
                (d - target[j]).abs()
            })
            .fold(0.0, f64::max);
        if resid <= TAU {
            return true;
        }
    }
    false
}
