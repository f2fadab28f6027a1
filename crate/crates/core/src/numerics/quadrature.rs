//! Quadrature over the outcome support.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::{OutcomeFamily, OutcomeModel};

/// Gauss–Hermite rule normalized to the standard normal weight:
/// `∫ f(x) φ(x) dx ≈ Σ w_i f(x_i)` with `Σ w_i = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite needs at least one node");
        const PIM4: f64 = 0.751_125_544_464_942_5;
        let nf = n as f64;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[m - 1] = 0.0;
        }
        // Physicists' rule -> standard normal weight.
        let sqrt_pi = PI.sqrt();
        let nodes = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().rev().map(|v| v / sqrt_pi).collect();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E f(X)` for `X ~ N(mean, sd²)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mean: f64, sd: f64, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mean + sd * x))
            .sum()
    }
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let nf = n as f64;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 1..=m {
            let mut z = (PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            x[i - 1] = -z;
            x[n - i] = z;
            w[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - i] = w[i - 1];
        }
        GaussLegendre {
            nodes: x,
            weights: w,
        }
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and absolute error estimate of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Integral> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let eval = |f: &mut F, x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Integration {
                location: x,
                msg: format!("non-finite integrand value {v}"),
            })
        }
    };
    let fc = eval(f, mid)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = eval(f, mid - dx)? + eval(f, mid + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok(Integral {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Adaptive Gauss–Kronrod (7/15) on a finite interval.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    let mut stack = vec![(a, b, gk15(&mut f, a, b)?)];
    let mut done = Integral {
        value: 0.0,
        error: 0.0,
    };
    let mut evaluations = 0usize;
    let width = b - a;
    while let Some((lo, hi, est)) = stack.pop() {
        let local_tol = tol * (hi - lo) / width;
        if est.error <= local_tol.max(1e-15 * est.value.abs()) || evaluations > 2000 {
            done.value += est.value;
            done.error += est.error;
            continue;
        }
        evaluations += 1;
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, gk15(&mut f, lo, mid)?));
        stack.push((mid, hi, gk15(&mut f, mid, hi)?));
    }
    Ok(done)
}

/// How an expectation over the respondents' outcome law is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadratureRule {
    GaussHermite(GaussHermite),
    /// Adaptive Gauss–Kronrod on `[mean + lo·sd, mean + hi·sd]` for
    /// integrands whose growth is not polynomial.
    AdaptiveTruncated { lo: f64, hi: f64, tol: f64 },
    /// Exact sum over a finite support.
    ExactDiscrete(Vec<f64>),
}

impl QuadratureRule {
    pub fn gauss_hermite(n: usize) -> Self {
        QuadratureRule::GaussHermite(GaussHermite::new(n))
    }

    pub fn truncated() -> Self {
        QuadratureRule::AdaptiveTruncated {
            lo: -12.0,
            hi: 12.0,
            tol: 1e-11,
        }
    }

    /// Default rule for an outcome family: GH(60) or the exact support sum.
    pub fn default_for(outcome: &OutcomeModel) -> Self {
        match outcome.family {
            OutcomeFamily::Normal { .. } => Self::gauss_hermite(60),
            OutcomeFamily::Bernoulli => QuadratureRule::ExactDiscrete(vec![0.0, 1.0]),
        }
    }
}

/// Weighted evaluation points `(y, weight)` of the respondents' law at x.
/// Fixed rules only; adaptive integration has no fixed node set.
pub fn outcome_nodes(
    outcome: &OutcomeModel,
    u: &[f64],
    z: &[f64],
    rule: &QuadratureRule,
) -> Result<Vec<(f64, f64)>> {
    match (&outcome.family, rule) {
        (OutcomeFamily::Normal { sigma2 }, QuadratureRule::GaussHermite(gh)) => {
            let mean = outcome.mean(u, z);
            let sd = sigma2.sqrt();
            Ok(gh
                .nodes
                .iter()
                .zip(&gh.weights)
                .map(|(&x, &w)| (mean + sd * x, w))
                .collect())
        }
        (OutcomeFamily::Bernoulli, QuadratureRule::ExactDiscrete(support)) => support
            .iter()
            .map(|&y| Ok((y, outcome.density(u, z, y)?)))
            .collect(),
        (family, rule) => Err(Error::InvalidInput(format!(
            "quadrature rule {rule:?} does not provide fixed nodes for {family:?}"
        ))),
    }
}

/// `∫ f(y) p1(y | x) dy` (a sum for discrete outcomes).
pub fn integrate_over_y<F: FnMut(f64) -> f64>(
    mut f: F,
    outcome: &OutcomeModel,
    u: &[f64],
    z: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    match rule {
        QuadratureRule::AdaptiveTruncated { lo, hi, tol } => {
            let OutcomeFamily::Normal { sigma2 } = outcome.family else {
                return Err(Error::InvalidInput(
                    "truncated quadrature needs a continuous outcome".into(),
                ));
            };
            let mean = outcome.mean(u, z);
            let sd = sigma2.sqrt();
            let density = |y: f64| {
                let r = (y - mean) / sd;
                (-0.5 * r * r).exp() / (sd * (2.0 * PI).sqrt())
            };
            let (a, b) = (mean + lo * sd, mean + hi * sd);
            let body = adaptive_gk(|y| f(y) * density(y), a, b, *tol)?;
            Ok(body.value)
        }
        QuadratureRule::ExactDiscrete(_) | QuadratureRule::GaussHermite(_) => {
            let mut total = 0.0;
            for (y, w) in outcome_nodes(outcome, u, z, rule)? {
                let v = f(y);
                if !v.is_finite() {
                    return Err(Error::Integration {
                        location: y,
                        msg: format!("non-finite integrand value {v}"),
                    });
                }
                total += w * v;
            }
            Ok(total)
        }
    }
}
