//! Response-mechanism link functions Ψ.
//!
//! Every supported link is the cdf of a distribution symmetric about zero,
//! so `1 - Ψ(t) = Ψ(-t)`; the tail-stable helpers below rely on that.

use std::f64::consts::{FRAC_1_PI, PI};
use std::fmt;

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkFunction {
    Logistic,
    Probit,
    /// Student-t cdf with one degree of freedom, kept as its own name.
    Cauchy,
    /// Robit link.
    StudentT { df: u32 },
}

impl LinkFunction {
    pub fn student_t(df: u32) -> Option<Self> {
        (df > 0).then_some(LinkFunction::StudentT { df })
    }

    pub fn name(&self) -> String {
        match self {
            LinkFunction::Logistic => "logistic".into(),
            LinkFunction::Probit => "probit".into(),
            LinkFunction::Cauchy => "cauchy".into(),
            LinkFunction::StudentT { df } => format!("student_t({df})"),
        }
    }

    /// Ψ(t).
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            LinkFunction::Logistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            LinkFunction::Probit => 0.5 * erfc(-t / std::f64::consts::SQRT_2),
            LinkFunction::Cauchy => {
                if t < 0.0 {
                    (-1.0 / t).atan() * FRAC_1_PI
                } else {
                    0.5 + t.atan() * FRAC_1_PI
                }
            }
            LinkFunction::StudentT { df } => {
                let tail = student_tail(df as f64, t);
                if t < 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
        }
    }

    /// ln Ψ(t), finite far into the lower tail where Ψ itself underflows.
    pub fn ln_cdf(&self, t: f64) -> f64 {
        match *self {
            LinkFunction::Logistic => {
                if t > -30.0 {
                    -(-t).exp().ln_1p()
                } else {
                    t - t.exp().ln_1p()
                }
            }
            LinkFunction::Probit => {
                if t > -30.0 {
                    self.cdf(t).ln()
                } else {
                    // Asymptotic expansion of the Mills ratio.
                    let t2 = t * t;
                    let s = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2)
                        + 105.0 / (t2 * t2 * t2 * t2);
                    -0.5 * t2 - LN_SQRT_2PI - (-t).ln() + s.ln()
                }
            }
            LinkFunction::Cauchy | LinkFunction::StudentT { .. } => self.cdf(t).ln(),
        }
    }

    /// ψ(t) = Ψ'(t).
    pub fn pdf(&self, t: f64) -> f64 {
        match *self {
            LinkFunction::Logistic => {
                let e = (-t.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            LinkFunction::Probit => (-0.5 * t * t - LN_SQRT_2PI).exp(),
            LinkFunction::Cauchy => FRAC_1_PI / (1.0 + t * t),
            LinkFunction::StudentT { df } => {
                let nu = df as f64;
                (student_ln_norm(nu) - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()).exp()
            }
        }
    }

    /// ψ(t)/Ψ(t), the derivative of ln Ψ.
    pub fn dlog_cdf(&self, t: f64) -> f64 {
        match *self {
            LinkFunction::Logistic => self.cdf(-t),
            LinkFunction::Probit if t < -30.0 => {
                (-0.5 * t * t - LN_SQRT_2PI - self.ln_cdf(t)).exp()
            }
            _ => self.pdf(t) / self.cdf(t),
        }
    }

    /// d/dt of ψ(t)/Ψ(t).
    pub fn dlog_cdf_slope(&self, t: f64) -> f64 {
        let r = self.dlog_cdf(t);
        // ψ'/ψ for each density
        let l = match *self {
            LinkFunction::Logistic => return -self.cdf(t) * self.cdf(-t),
            LinkFunction::Probit => -t,
            LinkFunction::Cauchy => -2.0 * t / (1.0 + t * t),
            LinkFunction::StudentT { df } => {
                let nu = df as f64;
                -(nu + 1.0) * t / (nu + t * t)
            }
        };
        r * (l - r)
    }

    /// `(ψ/Ψ, (1 - Ψ)/Ψ)` at t, sharing work where the link allows.
    #[inline]
    pub fn ratio_and_odds(&self, t: f64) -> (f64, f64) {
        match *self {
            LinkFunction::Logistic => {
                if t >= 0.0 {
                    let e = (-t).exp();
                    (e / (1.0 + e), e)
                } else {
                    let e = t.exp();
                    (1.0 / (1.0 + e), 1.0 / e)
                }
            }
            _ => (self.dlog_cdf(t), self.odds_against(t)),
        }
    }

    /// (1 - Ψ(t)) / Ψ(t), i.e. 1/Ψ - 1 without cancellation near Ψ = 1.
    pub fn odds_against(&self, t: f64) -> f64 {
        match *self {
            LinkFunction::Logistic => (-t).exp(),
            _ => self.cdf(-t) / self.cdf(t),
        }
    }

    /// True when the cdf has polynomially decaying lower tail.
    pub fn heavy_tailed(&self) -> bool {
        matches!(self, LinkFunction::Cauchy | LinkFunction::StudentT { .. })
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn student_ln_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

/// P(T <= -|t|) for T ~ t_nu.
fn student_tail(nu: f64, t: f64) -> f64 {
    let x = nu / (nu + t * t);
    0.5 * beta_reg(0.5 * nu, 0.5, x)
}
