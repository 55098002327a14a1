//! Weight bookkeeping, effective sample size, categorical sampling, and the
//! two backward-index samplers (exact and rejection-based).
//!
//! Weights live in log-domain throughout; normalization uses the max-shift
//! trick so that a single finite entry is enough to stay well defined.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::PathModel;

/// Log-domain particle weights.
///
/// Entries may be `-inf` (dead particles); operations fail with
/// [`Error::AllWeightsZero`] when no finite entry remains.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights {
    pub values: Vec<f64>,
}

impl LogWeights {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Normalize log-weights into probabilities and return the log of the total
/// weight, `log Σ exp(w_i)`.
pub fn log_normalize(w: &LogWeights) -> Result<(Vec<f64>, f64)> {
    let max = w
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let mut probs: Vec<f64> = w.values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok((probs, max + total.ln()))
}

/// Effective sample size `1 / Σ (w_i / Ω)²`, between 1 and N.
pub fn ess(w: &LogWeights) -> Result<f64> {
    let (probs, _) = log_normalize(w)?;
    Ok(1.0 / probs.iter().map(|p| p * p).sum::<f64>())
}

/// Deterministic RNG stream derived from a base seed and a stream id.
///
/// Distinct stream ids yield statistically independent sequences from the
/// same seed, which is how the smoother keeps its filter randomness separate
/// from the backward-sampling randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draw one index from a categorical distribution given by probabilities.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(probs)
        .expect("categorical probabilities must be non-negative with positive sum")
        .sample(rng)
}

/// Draw `count` i.i.d. indices from a categorical distribution.
pub fn multinomial_indices<R: Rng + ?Sized>(probs: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let dist = WeightedIndex::new(probs)
        .expect("categorical probabilities must be non-negative with positive sum");
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Backward probabilities `Λ(i, j) ∝ w_j · ld_n(ξ_j, x_next)` for a fixed
/// offspring value `x_next`, normalized over the previous generation.
pub fn backward_probabilities<M: PathModel + ?Sized>(
    model: &M,
    n: usize,
    prev_particles: &[f64],
    prev_logweights: &LogWeights,
    x_next: f64,
) -> Result<Vec<f64>> {
    let joint: Vec<f64> = prev_particles
        .iter()
        .zip(&prev_logweights.values)
        .map(|(&x, &lw)| lw + model.transition_logdensity(n, x, x_next))
        .collect();
    let (probs, _) = log_normalize(&LogWeights::new(joint))?;
    Ok(probs)
}

/// Outcome of one backward-index draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardDraw {
    pub index: usize,
    /// Candidate draws consumed, counting the accepted one. Zero when the
    /// sampler went straight to the exact fallback (`cap == 0`).
    pub trials: u32,
    /// True when the trial cap was exhausted and the exact categorical
    /// fallback produced the index.
    pub fell_back: bool,
}

/// Rejection sampler for backward indices, reusable across the offspring of
/// one time step.
///
/// Candidates are drawn from the weight categorical and accepted with
/// probability `ld_n(ξ_J, x_next) / c_n(x_next)`; the accepted index is
/// distributed exactly according to [`backward_probabilities`]. After `cap`
/// rejected candidates the draw falls back to exact categorical sampling,
/// which preserves the distribution while bounding worst-case latency.
pub struct RejectionBackwardSampler<'a, M: PathModel + ?Sized> {
    model: &'a M,
    n: usize,
    particles: &'a [f64],
    logweights: &'a LogWeights,
    candidate: WeightedIndex<f64>,
    cap: u32,
}

impl<'a, M: PathModel + ?Sized> RejectionBackwardSampler<'a, M> {
    pub fn new(
        model: &'a M,
        n: usize,
        particles: &'a [f64],
        logweights: &'a LogWeights,
        cap: u32,
    ) -> Result<Self> {
        let (probs, _) = log_normalize(logweights)?;
        let candidate = WeightedIndex::new(&probs)
            .expect("normalized probabilities must form a valid categorical");
        Ok(Self {
            model,
            n,
            particles,
            logweights,
            candidate,
            cap,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, x_next: f64, rng: &mut R) -> Result<BackwardDraw> {
        let log_bound = self.model.transition_log_bound(self.n, x_next);
        for trial in 1..=self.cap {
            let j = self.candidate.sample(rng);
            let log_ratio =
                self.model.transition_logdensity(self.n, self.particles[j], x_next) - log_bound;
            if rng.random::<f64>() < log_ratio.exp() {
                return Ok(BackwardDraw {
                    index: j,
                    trials: trial,
                    fell_back: false,
                });
            }
        }
        let probs =
            backward_probabilities(self.model, self.n, self.particles, self.logweights, x_next)?;
        Ok(BackwardDraw {
            index: sample_categorical(&probs, rng),
            trials: self.cap,
            fell_back: true,
        })
    }
}

/// One-shot rejection backward draw; see [`RejectionBackwardSampler`].
pub fn backward_sample_rejection<M: PathModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    n: usize,
    prev_particles: &[f64],
    prev_logweights: &LogWeights,
    x_next: f64,
    rng: &mut R,
    cap: u32,
) -> Result<BackwardDraw> {
    RejectionBackwardSampler::new(model, n, prev_particles, prev_logweights, cap)?
        .sample(x_next, rng)
}
