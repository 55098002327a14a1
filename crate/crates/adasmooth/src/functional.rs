//! Additive path functionals `h_n(x_{0:n}) = h₀(x₀) + Σ_m h̃_m(x_m, x_{m+1})`.
//!
//! Functionals may be vector-valued so that several statistics share one
//! particle system. Increment evaluators write into a caller-provided slice
//! to stay allocation-free inside the smoother loop.

use crate::error::{Error, Result};

/// An additive functional given by an initial term and per-step increments.
pub trait AdditiveFunctional {
    /// Number of simultaneously tracked components.
    fn dim(&self) -> usize;

    /// Evaluate h₀(x₀) into `out` (length `dim`).
    fn initial_term(&self, x0: f64, out: &mut [f64]);

    /// Evaluate the increment h̃_n(x_n, x_{n+1}) into `out` (length `dim`).
    fn increment(&self, n: usize, x: f64, x_next: f64, out: &mut [f64]);
}

/// The state sum `h_n(x_{0:n}) = Σ_m x_m`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StateSumFunctional;

impl AdditiveFunctional for StateSumFunctional {
    fn dim(&self) -> usize {
        1
    }

    fn initial_term(&self, x0: f64, out: &mut [f64]) {
        out[0] = x0;
    }

    fn increment(&self, _n: usize, _x: f64, x_next: f64, out: &mut [f64]) {
        out[0] = x_next;
    }
}

/// The three volatility statistics tracked jointly: increments
/// `(x_{n+1}, x_{n+1}², x_n·x_{n+1})` with initial term `(x₀, x₀², 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SvTripleFunctional;

impl AdditiveFunctional for SvTripleFunctional {
    fn dim(&self) -> usize {
        3
    }

    fn initial_term(&self, x0: f64, out: &mut [f64]) {
        out[0] = x0;
        out[1] = x0 * x0;
        out[2] = 0.0;
    }

    fn increment(&self, _n: usize, x: f64, x_next: f64, out: &mut [f64]) {
        out[0] = x_next;
        out[1] = x_next * x_next;
        out[2] = x * x_next;
    }
}

/// Evaluate a functional on a full path by unrolling the recursion.
///
/// Used as the brute-force oracle for the online statistic updates.
pub fn evaluate_path<F: AdditiveFunctional + ?Sized>(f: &F, path: &[f64]) -> Result<Vec<f64>> {
    let first = *path.first().ok_or(Error::EmptyPath)?;
    let dim = f.dim();
    let mut acc = vec![0.0; dim];
    f.initial_term(first, &mut acc);
    let mut inc = vec![0.0; dim];
    for (n, w) in path.windows(2).enumerate() {
        f.increment(n, w[0], w[1], &mut inc);
        for (a, b) in acc.iter_mut().zip(&inc) {
            *a += b;
        }
    }
    Ok(acc)
}
