//! Nonlinear system solver: damped Newton with a finite-difference Jacobian,
//! switching to a dogleg trust region on `½‖F‖²` when Newton stagnates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Converged when `‖F(x)‖∞ <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative forward-difference step.
    pub fd_step: f64,
    /// Iterates with `‖x‖∞` above this are treated as divergence.
    pub max_norm: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 100,
            fd_step: 1e-7,
            max_norm: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Newton,
    TrustRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Method in use when convergence was reached.
    pub method: SolverMethod,
}

pub type Jacobian<'a> = &'a dyn Fn(&[f64]) -> DMatrix<f64>;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct Problem<'a, F> {
    f: F,
    jac: Option<Jacobian<'a>>,
    opts: SolverOptions,
}

impl<F: FnMut(&[f64]) -> Vec<f64>> Problem<'_, F> {
    fn jacobian(&mut self, x: &[f64], fx: &[f64]) -> Option<DMatrix<f64>> {
        if let Some(j) = self.jac {
            return Some(j(x));
        }
        let n = x.len();
        let m = fx.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let h = self.opts.fd_step * x[j].abs().max(1.0);
            let mut ok = false;
            for sign in [1.0, -1.0] {
                xp[j] = x[j] + sign * h;
                let fp = (self.f)(&xp);
                if finite(&fp) {
                    for i in 0..m {
                        jac[(i, j)] = (fp[i] - fx[i]) / (sign * h);
                    }
                    ok = true;
                    break;
                }
            }
            xp[j] = x[j];
            if !ok {
                return None;
            }
        }
        Some(jac)
    }
}

/// Find `x` with `‖F(x)‖∞ <= tol`. Non-finite components of `F` mark a point
/// as infeasible; the line search and trust region back away from it.
pub fn solve_nonlinear_system<F>(
    f: F,
    jacobian: Option<Jacobian<'_>>,
    x0: &[f64],
    opts: SolverOptions,
) -> Result<Solution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut p = Problem {
        f,
        jac: jacobian,
        opts,
    };
    let mut x = x0.to_vec();
    let mut fx = (p.f)(&x);
    if !finite(&fx) {
        return Err(Error::InvalidInput(
            "system is not finite at the starting point".into(),
        ));
    }
    let mut iterations = 0;

    // Damped Newton.
    let mut stagnated = false;
    while inf_norm(&fx) > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let Some(jac) = p.jacobian(&x, &fx) else {
            stagnated = true;
            break;
        };
        let rhs = -DVector::from_column_slice(&fx);
        let Some(step) = jac.lu().solve(&rhs) else {
            stagnated = true;
            break;
        };
        if !finite(step.as_slice()) {
            stagnated = true;
            break;
        }
        let f0 = l2(&fx);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            let fxn = (p.f)(&xn);
            if finite(&fxn) && l2(&fxn) <= (1.0 - 1e-4 * lambda) * f0 {
                accepted = Some((xn, fxn));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xn, fxn)) => {
                x = xn;
                fx = fxn;
            }
            None => {
                stagnated = true;
                break;
            }
        }
        if inf_norm(&x) > opts.max_norm {
            return Err(Error::NonConvergence {
                residual: inf_norm(&fx),
                iterations,
            });
        }
    }
    if inf_norm(&fx) <= opts.tol {
        return Ok(Solution {
            residual: inf_norm(&fx),
            x,
            iterations,
            method: SolverMethod::Newton,
        });
    }
    if !stagnated {
        return Err(Error::NonConvergence {
            residual: inf_norm(&fx),
            iterations,
        });
    }
    trust_region(&mut p, x, fx, iterations)
}

/// Dogleg trust region on `½‖F‖²` without a Newton phase.
pub fn solve_trust_region<F>(
    f: F,
    jacobian: Option<Jacobian<'_>>,
    x0: &[f64],
    opts: SolverOptions,
) -> Result<Solution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut p = Problem {
        f,
        jac: jacobian,
        opts,
    };
    let fx = (p.f)(x0);
    if !finite(&fx) {
        return Err(Error::InvalidInput(
            "system is not finite at the starting point".into(),
        ));
    }
    trust_region(&mut p, x0.to_vec(), fx, 0)
}

fn trust_region<F: FnMut(&[f64]) -> Vec<f64>>(
    p: &mut Problem<'_, F>,
    mut x: Vec<f64>,
    mut fx: Vec<f64>,
    mut iterations: usize,
) -> Result<Solution> {
    let opts = p.opts;
    let mut radius = l2(&x).max(1.0);
    while inf_norm(&fx) > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let Some(jac) = p.jacobian(&x, &fx) else {
            break;
        };
        let fv = DVector::from_column_slice(&fx);
        let grad = jac.transpose() * &fv;
        let jg = &jac * &grad;
        let gg = grad.norm_squared();
        if gg == 0.0 {
            break;
        }
        let cauchy = -(gg / jg.norm_squared().max(f64::MIN_POSITIVE)) * &grad;
        let gn = jac
            .clone()
            .svd(true, true)
            .solve(&(-&fv), 1e-12)
            .ok()
            .filter(|s| finite(s.as_slice()));

        let mut inner = 0;
        loop {
            inner += 1;
            let step = match &gn {
                Some(g) if g.norm() <= radius => g.clone(),
                _ if cauchy.norm() >= radius => cauchy.scale(radius / cauchy.norm()),
                Some(g) => {
                    // boundary point on the segment cauchy -> gn
                    let d = g - &cauchy;
                    let a = d.norm_squared();
                    let b = 2.0 * cauchy.dot(&d);
                    let c = cauchy.norm_squared() - radius * radius;
                    let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
                    &cauchy + d.scale(tau)
                }
                None => cauchy.clone(),
            };
            let predicted = 0.5 * fv.norm_squared() - 0.5 * (&fv + &jac * &step).norm_squared();
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            let fxn = (p.f)(&xn);
            let actual = if finite(&fxn) {
                0.5 * fv.norm_squared() - 0.5 * l2(&fxn).powi(2)
            } else {
                f64::NEG_INFINITY
            };
            let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
            if rho < 0.25 {
                radius *= 0.25;
            } else if rho > 0.75 && (step.norm() - radius).abs() < 1e-12 * radius.max(1.0) {
                radius *= 2.0;
            }
            if rho > 1e-4 {
                x = xn;
                fx = fxn;
                break;
            }
            if radius < 1e-14 * (1.0 + l2(&x)) || inner > 60 {
                return Err(Error::NonConvergence {
                    residual: inf_norm(&fx),
                    iterations,
                });
            }
        }
        if inf_norm(&x) > opts.max_norm {
            break;
        }
    }
    if inf_norm(&fx) <= opts.tol {
        Ok(Solution {
            residual: inf_norm(&fx),
            x,
            iterations,
            method: SolverMethod::TrustRegion,
        })
    } else {
        Err(Error::NonConvergence {
            residual: inf_norm(&fx),
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_identity_in_one_step() {
        let c = [1.5, -2.0, 0.25];
        let sol = solve_nonlinear_system(
            |x| x.iter().zip(&c).map(|(a, b)| a - b).collect(),
            None,
            &[0.0; 3],
            SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.iterations, 1);
        for (a, b) in sol.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn analytic_jacobian_is_used() {
        let jac = |x: &[f64]| DMatrix::from_row_slice(1, 1, &[2.0 * x[0]]);
        let sol = solve_nonlinear_system(
            |x| vec![x[0] * x[0] - 2.0],
            Some(&jac),
            &[1.0],
            SolverOptions {
                tol: 1e-14,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((sol.x[0] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trust_region_solves_rosenbrock_system() {
        let f = |x: &[f64]| vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]];
        let sol = solve_trust_region(f, None, &[-1.2, 1.0], SolverOptions::default()).unwrap();
        assert_eq!(sol.method, SolverMethod::TrustRegion);
        assert!((sol.x[0] - 1.0).abs() < 1e-8 && (sol.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nearly_singular_start_converges() {
        // det J = 2 x0 + 1 vanishes at the start
        let f = |x: &[f64]| vec![x[0] * x[0] + x[1] - 1.0, x[1] - x[0]];
        let sol = solve_nonlinear_system(f, None, &[-0.5, 0.0], SolverOptions::default()).unwrap();
        let r = f(&sol.x);
        assert!(r.iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn no_root_reports_nonconvergence() {
        let err = solve_nonlinear_system(|x| vec![x[0] * x[0] + 1.0], None, &[0.3], SolverOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| vec![x[0].exp() - 3.0 + x[1], x[0] - x[1] * x[1]];
        let a = solve_nonlinear_system(f, None, &[0.2, 0.1], SolverOptions::default()).unwrap();
        let b = solve_nonlinear_system(f, None, &[0.2, 0.1], SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
