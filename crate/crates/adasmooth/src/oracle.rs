//! Exact smoothing ground truth for the linear Gaussian model.
//!
//! A scalar Kalman filter plus Rauch–Tung–Striebel backward pass yields the
//! smoothed state means whose sum is the exact expectation of the state-sum
//! functional. A dense joint-Gaussian solver provides an independent
//! brute-force cross-check for short records: it assembles the posterior
//! precision of `x_{0:n} | y_{0:n}` directly from the prior, transition, and
//! observation quadratic forms and solves for the mean.

use crate::error::{Error, Result};
use crate::model::{log_normal_pdf, LinearGaussianHmm};

/// Filtering pass output: predicted and filtered moments per time step plus
/// the data log-likelihood.
#[derive(Debug, Clone)]
pub struct KalmanState {
    pub filtered_mean: Vec<f64>,
    pub filtered_var: Vec<f64>,
    pub predicted_mean: Vec<f64>,
    pub predicted_var: Vec<f64>,
    pub loglik: f64,
}

/// Marginal smoothing pass output.
#[derive(Debug, Clone)]
pub struct SmoothedMarginals {
    pub smoothed_mean: Vec<f64>,
    pub smoothed_var: Vec<f64>,
}

/// Scalar Kalman filter with stationary prior N(0, σ_U²/(1−a²)).
pub fn kalman_filter(model: &LinearGaussianHmm) -> Result<KalmanState> {
    let n = model.observations.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "kalman filter needs at least one observation".into(),
        ));
    }
    let (a, b) = (model.a, model.b);
    let q = model.sigma_u * model.sigma_u;
    let r = model.sigma_v * model.sigma_v;
    let mut state = KalmanState {
        filtered_mean: Vec::with_capacity(n),
        filtered_var: Vec::with_capacity(n),
        predicted_mean: Vec::with_capacity(n),
        predicted_var: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let mut pred_mean = 0.0;
    let mut pred_var = model.stationary_variance();
    for (t, &y) in model.observations.iter().enumerate() {
        if t > 0 {
            pred_mean = a * state.filtered_mean[t - 1];
            pred_var = a * a * state.filtered_var[t - 1] + q;
        }
        state.predicted_mean.push(pred_mean);
        state.predicted_var.push(pred_var);
        let innovation_var = b * b * pred_var + r;
        state.loglik += log_normal_pdf(y, b * pred_mean, innovation_var);
        let gain = pred_var * b / innovation_var;
        state.filtered_mean.push(pred_mean + gain * (y - b * pred_mean));
        state.filtered_var.push((1.0 - gain * b) * pred_var);
    }
    Ok(state)
}

/// Rauch–Tung–Striebel backward pass over a completed filter.
pub fn rts_smoother(model: &LinearGaussianHmm, filter: &KalmanState) -> SmoothedMarginals {
    let n = filter.filtered_mean.len();
    let a = model.a;
    let mut mean = vec![0.0; n];
    let mut var = vec![0.0; n];
    mean[n - 1] = filter.filtered_mean[n - 1];
    var[n - 1] = filter.filtered_var[n - 1];
    for t in (0..n - 1).rev() {
        let gain = filter.filtered_var[t] * a / filter.predicted_var[t + 1];
        mean[t] = filter.filtered_mean[t] + gain * (mean[t + 1] - filter.predicted_mean[t + 1]);
        var[t] = filter.filtered_var[t] + gain * gain * (var[t + 1] - filter.predicted_var[t + 1]);
    }
    SmoothedMarginals {
        smoothed_mean: mean,
        smoothed_var: var,
    }
}

/// Exact expectation of the state sum `Σ_m x_m` under the joint-smoothing
/// distribution: the sum of the RTS smoothed means. For this functional the
/// result coincides with the disturbance-smoother value.
pub fn smoothed_state_sum_expectation(model: &LinearGaussianHmm) -> Result<f64> {
    let filter = kalman_filter(model)?;
    let smoothed = rts_smoother(model, &filter);
    Ok(smoothed.smoothed_mean.iter().sum())
}

/// Brute-force smoothed means for `x_{0:n_max} | y_{0:n_max}` obtained by
/// assembling the joint posterior precision and solving it densely.
///
/// Intended for short records only; the solve is O(n³).
pub fn dense_joint_smoothed_means(model: &LinearGaussianHmm, n_max: usize) -> Result<Vec<f64>> {
    let len = n_max + 1;
    if model.observations.len() < len {
        return Err(Error::InvalidParameter(format!(
            "dense oracle needs {len} observations, record holds {}",
            model.observations.len()
        )));
    }
    if len > 64 {
        return Err(Error::InvalidParameter(
            "dense oracle is restricted to short records (n_max < 64)".into(),
        ));
    }
    let (a, b) = (model.a, model.b);
    let q = model.sigma_u * model.sigma_u;
    let r = model.sigma_v * model.sigma_v;
    let mut precision = vec![vec![0.0f64; len]; len];
    let mut shift = vec![0.0f64; len];
    // Prior on x_0.
    precision[0][0] += 1.0 / model.stationary_variance();
    // Transitions x_{m+1} | x_m ~ N(a x_m, q).
    for m in 0..len - 1 {
        precision[m][m] += a * a / q;
        precision[m + 1][m + 1] += 1.0 / q;
        precision[m][m + 1] -= a / q;
        precision[m + 1][m] -= a / q;
    }
    // Observations y_m | x_m ~ N(b x_m, r).
    for m in 0..len {
        precision[m][m] += b * b / r;
        shift[m] += b * model.observations[m] / r;
    }
    Ok(solve_dense(precision, shift))
}

/// Solve a small dense linear system by Gaussian elimination with partial
/// pivoting. Consumes its inputs.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag != 0.0, "singular system");
        for row in col + 1..n {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}
