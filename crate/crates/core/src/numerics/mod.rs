//! Shared numerical kernels.

pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod spline;

pub use quadrature::{integrate_over_y, GaussHermite, GaussLegendre, QuadratureRule};
pub use rng::{derive_seed, rng_stream, RngStream};
pub use solver::{solve_nonlinear_system, Solution, SolverMethod, SolverOptions};
pub use spline::{fit_spline_mean, KnotCriterion, SplineBasis, SplineFit, SplineFitOptions};
