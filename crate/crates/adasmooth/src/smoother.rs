//! Online additive smoothers built on one adaptive auxiliary particle
//! filter core.
//!
//! Four statistic-update rules share the forward recursion: naive genealogy
//! tracing (the poor man's smoother), the exact O(N²) Rao-Blackwellized
//! update (forward-only FFBSm), its Monte Carlo version with K backward
//! draws per particle (PaRIS), and the hybrid update that averages the
//! forward term with backward draws only on triggered steps. Resampling is
//! governed by an ESS threshold with an optional forced-resampling gap;
//! backward sampling by the Enoch-index criterion, by every resampling, or
//! periodically in selection counts.
//!
//! Filter randomness (selection, mutation) and backward-sampling randomness
//! are drawn from separate streams of the same seed, so enabling or
//! disabling backward sampling never perturbs the particle trajectories.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functional::AdditiveFunctional;
use crate::model::PathModel;
use crate::sampling::{
    self, log_normalize, multinomial_indices, LogWeights, RejectionBackwardSampler, RngStream,
};

/// Which statistic-update rule a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherVariant {
    /// Genealogy-tracing update; fast but eventually path-degenerate.
    PoorMan,
    /// Exact backward-kernel average; O(N²) per step.
    FfbsmForward,
    /// K conditionally independent backward draws per particle.
    Paris,
    /// Poor-man update with backward-sampling superposition on triggered steps.
    AdaSmooth,
}

/// When the backward-sampling superposition of [`SmootherVariant::AdaSmooth`]
/// fires. Backward steps are always a subset of resampling steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardSchedule {
    /// Trigger when the fraction of distinct Enoch indices drops below β.
    Adaptive,
    /// Trigger at every resampling step.
    EveryResampling,
    /// Trigger at every Δ-th resampling step.
    Periodic(usize),
}

/// Algorithm parameters for one smoothing run.
#[derive(Debug, Clone)]
pub struct SmootherConfig {
    pub variant: SmootherVariant,
    /// ESS resampling threshold fraction; resample iff ESS < α·N.
    pub alpha: f64,
    /// Enoch distinct-fraction threshold in (0, 1); adaptive schedule only.
    pub beta: f64,
    /// Backward draws per particle in the PaRIS update (K ≥ 1).
    pub precision_draws: usize,
    /// Backward draws per particle on triggered AdaSmooth steps (M ≥ 1);
    /// M = 1 is the plain superposition update.
    pub backward_draws: usize,
    /// Force resampling whenever the step would be the `d`-th consecutive
    /// one without selection; `None` leaves the gap unbounded.
    pub max_gap: Option<usize>,
    pub backward_schedule: BackwardSchedule,
    /// Candidate trials per rejection backward draw before the exact
    /// fallback; `None` uses the particle count.
    pub rejection_cap: Option<u32>,
    pub seed: u64,
}

impl SmootherConfig {
    /// Defaults matching the benchmark sweet spot: α = 0.6, β = 0.5, K = 2,
    /// M = 1, unbounded gap, adaptive backward schedule.
    pub fn new(variant: SmootherVariant) -> Self {
        Self {
            variant,
            alpha: 0.6,
            beta: 0.5,
            precision_draws: 2,
            backward_draws: 1,
            max_gap: None,
            backward_schedule: BackwardSchedule::Adaptive,
            rejection_cap: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.precision_draws == 0 {
            return Err(Error::InvalidParameter("precision_draws must be >= 1".into()));
        }
        if self.backward_draws == 0 {
            return Err(Error::InvalidParameter("backward_draws must be >= 1".into()));
        }
        if let Some(d) = self.max_gap {
            if d == 0 {
                return Err(Error::InvalidParameter("max_gap must be >= 1".into()));
            }
        }
        if let BackwardSchedule::Periodic(delta) = self.backward_schedule {
            if delta == 0 {
                return Err(Error::InvalidParameter("periodic schedule needs Δ >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Row-major N × dim matrix of smoothing statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMatrix {
    data: Vec<f64>,
    dim: usize,
}

impl StatMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            data: vec![0.0; rows * dim],
            dim,
        }
    }

    pub fn from_vec(data: Vec<f64>, dim: usize) -> Self {
        assert!(dim >= 1 && data.len() % dim == 0);
        Self { data, dim }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// The full particle system at one time step.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub particles: Vec<f64>,
    pub logweights: LogWeights,
    /// Smoothing statistics, one row per particle.
    pub stats: StatMatrix,
    /// Ancestor index at the most recent backward-sampling reset.
    pub enoch: Vec<usize>,
    pub time: usize,
    /// Consecutive steps (up to and including `time`) without resampling.
    pub gap: usize,
}

impl ParticleCloud {
    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }
}

/// Per-step record: the estimate after the transition plus everything the
/// adaptation logic looked at.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    /// Time index after the transition.
    pub time: usize,
    pub estimate: Vec<f64>,
    pub log_total_weight: f64,
    /// ESS of the incoming weights, the value compared against α·N.
    pub ess: f64,
    pub resampled: bool,
    pub backward_triggered: bool,
    /// Distinct Enoch indices after the ancestor gather, before any reset.
    pub distinct_enoch: usize,
    /// Total rejection-sampling candidate draws spent this step.
    pub backward_trials: u64,
    pub elapsed: Duration,
}

/// Diagnostics of a completed run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub initial_estimate: Vec<f64>,
    pub steps: Vec<StepDiagnostics>,
}

impl RunRecord {
    pub fn final_estimate(&self) -> &[f64] {
        self.steps
            .last()
            .map(|s| s.estimate.as_slice())
            .unwrap_or(&self.initial_estimate)
    }

    /// Estimate recorded at a given time index (0 = initialization).
    pub fn estimate_at(&self, time: usize) -> Option<&[f64]> {
        if time == 0 {
            Some(&self.initial_estimate)
        } else {
            self.steps.get(time - 1).map(|s| s.estimate.as_slice())
        }
    }

    pub fn resampling_trace(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.resampled).collect()
    }

    pub fn backward_trace(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.backward_triggered).collect()
    }

    pub fn total_elapsed(&self) -> Duration {
        self.steps.iter().map(|s| s.elapsed).sum()
    }
}

/// Initialize a particle cloud by importance sampling from the time-0
/// proposal: statistics start at h₀ and Enoch indices at the identity.
pub fn init_cloud<M, F, R>(
    model: &M,
    functional: &F,
    n_particles: usize,
    rng: &mut R,
) -> Result<ParticleCloud>
where
    M: PathModel + ?Sized,
    F: AdditiveFunctional + ?Sized,
    R: Rng,
{
    if n_particles < 2 {
        return Err(Error::InvalidParameter(
            "particle count must be at least 2".into(),
        ));
    }
    if model.num_observations() == 0 {
        return Err(Error::InvalidParameter("observation record is empty".into()));
    }
    let dim = functional.dim();
    let mut particles = Vec::with_capacity(n_particles);
    let mut logweights = Vec::with_capacity(n_particles);
    let mut stats = StatMatrix::zeros(n_particles, dim);
    for i in 0..n_particles {
        let x = model.initial_proposal_sample(&mut *rng);
        particles.push(x);
        logweights.push(model.initial_log_weight(x));
        functional.initial_term(x, stats.row_mut(i));
    }
    if !logweights.iter().any(|w| w.is_finite()) {
        return Err(Error::DegenerateAt { time: 0 });
    }
    Ok(ParticleCloud {
        particles,
        logweights: LogWeights::new(logweights),
        stats,
        enoch: (0..n_particles).collect(),
        time: 0,
        gap: 0,
    })
}

/// Resampling indicator: true iff the ESS drops below α·N or the forced
/// resampling gap would be reached.
pub fn resampling_indicator(cloud: &ParticleCloud, config: &SmootherConfig) -> Result<bool> {
    let ess = sampling::ess(&cloud.logweights)?;
    Ok(indicator_from_ess(ess, cloud, config))
}

fn indicator_from_ess(ess: f64, cloud: &ParticleCloud, config: &SmootherConfig) -> bool {
    let relaxed = ess >= config.alpha * cloud.n_particles() as f64
        && config.max_gap.is_none_or(|d| cloud.gap + 1 < d);
    !relaxed
}

/// Output of one auxiliary-particle-filter transition.
#[derive(Debug, Clone)]
pub struct ApfStep {
    pub particles: Vec<f64>,
    pub forward: Vec<usize>,
    pub logweights: LogWeights,
}

/// One APF transition: multinomial selection through the adjustment-weighted
/// categorical when `resample` is set (identity ancestry otherwise),
/// proposal mutation, and the importance-weight update.
pub fn apf_step<M, R>(
    cloud: &ParticleCloud,
    model: &M,
    resample: bool,
    rng: &mut R,
) -> Result<ApfStep>
where
    M: PathModel + ?Sized,
    R: Rng,
{
    apf_step_inner(cloud, model, resample, None, rng)
}

// `weight_probs`, when given, holds the normalized probabilities of the
// cloud's log-weights so the selection step can skip renormalizing.
fn apf_step_inner<M, R>(
    cloud: &ParticleCloud,
    model: &M,
    resample: bool,
    weight_probs: Option<&[f64]>,
    rng: &mut R,
) -> Result<ApfStep>
where
    M: PathModel + ?Sized,
    R: Rng,
{
    let n = cloud.time;
    let count = cloud.n_particles();
    let forward = if resample {
        let probs: Vec<f64> = match weight_probs {
            Some(cached) => cloud
                .particles
                .iter()
                .zip(cached)
                .map(|(&x, &p)| {
                    let adjustment = model.adjustment_log(n, x);
                    if adjustment == 0.0 {
                        p
                    } else {
                        p * adjustment.exp()
                    }
                })
                .collect(),
            None => {
                let selection = LogWeights::new(
                    cloud
                        .particles
                        .iter()
                        .zip(&cloud.logweights.values)
                        .map(|(&x, &lw)| lw + model.adjustment_log(n, x))
                        .collect(),
                );
                let (probs, _) =
                    log_normalize(&selection).map_err(|_| Error::DegenerateAt { time: n })?;
                probs
            }
        };
        multinomial_indices(&probs, count, &mut *rng)
    } else {
        (0..count).collect()
    };
    let particles: Vec<f64> = forward
        .iter()
        .map(|&j| model.proposal_sample(n, cloud.particles[j], &mut *rng))
        .collect();
    let mut logweights = Vec::with_capacity(count);
    for i in 0..count {
        let parent = cloud.particles[forward[i]];
        let x_next = particles[i];
        let mut lw = model.transition_logdensity(n, parent, x_next)
            - model.proposal_logdensity(n, parent, x_next);
        if resample {
            lw -= model.adjustment_log(n, parent);
        } else {
            lw += cloud.logweights.values[i];
        }
        logweights.push(lw);
    }
    if !logweights.iter().any(|w| w.is_finite()) {
        return Err(Error::DegenerateAt { time: n + 1 });
    }
    Ok(ApfStep {
        particles,
        forward,
        logweights: LogWeights::new(logweights),
    })
}

/// Genealogy-tracing statistic update: gather through the forward indices
/// and add the increments.
pub fn update_stats_poor(
    old_stats: &StatMatrix,
    forward: &[usize],
    increments: &StatMatrix,
) -> StatMatrix {
    let dim = old_stats.dim();
    assert_eq!(increments.dim(), dim);
    assert_eq!(increments.rows(), forward.len());
    let mut new_stats = StatMatrix::zeros(forward.len(), dim);
    for (i, &j) in forward.iter().enumerate() {
        let old = old_stats.row(j);
        let inc = increments.row(i);
        let row = new_stats.row_mut(i);
        for d in 0..dim {
            row[d] = old[d] + inc[d];
        }
    }
    new_stats
}

/// Increments `h̃_n(ξ_{I^i}, ξ'_i)` for a completed transition.
pub fn compute_increments<F: AdditiveFunctional + ?Sized>(
    functional: &F,
    n: usize,
    old_particles: &[f64],
    forward: &[usize],
    new_particles: &[f64],
) -> StatMatrix {
    let dim = functional.dim();
    let mut increments = StatMatrix::zeros(new_particles.len(), dim);
    for i in 0..new_particles.len() {
        functional.increment(n, old_particles[forward[i]], new_particles[i], increments.row_mut(i));
    }
    increments
}

/// Exact Rao-Blackwellized update: for every offspring, average the shifted
/// statistics of the whole previous generation under the backward
/// probabilities. O(N²) transition-density evaluations.
pub fn update_stats_ffbsm<M, F>(
    model: &M,
    functional: &F,
    n: usize,
    prev_particles: &[f64],
    prev_logweights: &LogWeights,
    prev_stats: &StatMatrix,
    new_particles: &[f64],
) -> Result<StatMatrix>
where
    M: PathModel + ?Sized,
    F: AdditiveFunctional + ?Sized,
{
    let count = prev_particles.len();
    let dim = prev_stats.dim();
    let mut new_stats = StatMatrix::zeros(new_particles.len(), dim);
    let mut joint = vec![0.0f64; count];
    let mut inc = vec![0.0f64; dim];
    let mut acc = vec![0.0f64; dim];
    for (i, &x_next) in new_particles.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for j in 0..count {
            joint[j] =
                prev_logweights.values[j] + model.transition_logdensity(n, prev_particles[j], x_next);
            max = max.max(joint[j]);
        }
        if !max.is_finite() {
            return Err(Error::AllWeightsZero);
        }
        acc.fill(0.0);
        let mut total = 0.0;
        for j in 0..count {
            let w = (joint[j] - max).exp();
            if w == 0.0 {
                continue;
            }
            total += w;
            functional.increment(n, prev_particles[j], x_next, &mut inc);
            let old = prev_stats.row(j);
            for d in 0..dim {
                acc[d] += w * (old[d] + inc[d]);
            }
        }
        let row = new_stats.row_mut(i);
        for d in 0..dim {
            row[d] = acc[d] / total;
        }
    }
    Ok(new_stats)
}

/// PaRIS update: replace the exact backward average by the mean of K
/// rejection-sampled backward draws per offspring. Returns the updated
/// statistics plus the total candidate trials and fallback count.
#[allow(clippy::too_many_arguments)]
pub fn update_stats_paris<M, F, R>(
    model: &M,
    functional: &F,
    n: usize,
    prev_particles: &[f64],
    prev_logweights: &LogWeights,
    prev_stats: &StatMatrix,
    new_particles: &[f64],
    precision_draws: usize,
    rejection_cap: u32,
    rng: &mut R,
) -> Result<(StatMatrix, u64, u64)>
where
    M: PathModel + ?Sized,
    F: AdditiveFunctional + ?Sized,
    R: Rng,
{
    let dim = prev_stats.dim();
    let sampler =
        RejectionBackwardSampler::new(model, n, prev_particles, prev_logweights, rejection_cap)?;
    let mut new_stats = StatMatrix::zeros(new_particles.len(), dim);
    let mut inc = vec![0.0f64; dim];
    let mut trials = 0u64;
    let mut fallbacks = 0u64;
    for (i, &x_next) in new_particles.iter().enumerate() {
        let row = new_stats.row_mut(i);
        for _ in 0..precision_draws {
            let draw = sampler.sample(x_next, &mut *rng)?;
            trials += u64::from(draw.trials);
            fallbacks += u64::from(draw.fell_back);
            functional.increment(n, prev_particles[draw.index], x_next, &mut inc);
            let old = prev_stats.row(draw.index);
            for d in 0..dim {
                row[d] += old[d] + inc[d];
            }
        }
        for v in row {
            *v /= precision_draws as f64;
        }
    }
    Ok((new_stats, trials, fallbacks))
}

/// Hybrid update. Without a trigger this is exactly the poor-man update;
/// on triggered steps the forward term is averaged with `backward_draws`
/// backward terms, every term carrying weight 1/(1 + M).
#[allow(clippy::too_many_arguments)]
pub fn update_stats_adasmooth<M, F, R>(
    model: &M,
    functional: &F,
    n: usize,
    prev_particles: &[f64],
    prev_logweights: &LogWeights,
    prev_stats: &StatMatrix,
    new_particles: &[f64],
    forward: &[usize],
    triggered: bool,
    backward_draws: usize,
    rejection_cap: u32,
    rng: &mut R,
) -> Result<(StatMatrix, u64, u64)>
where
    M: PathModel + ?Sized,
    F: AdditiveFunctional + ?Sized,
    R: Rng,
{
    let increments = compute_increments(functional, n, prev_particles, forward, new_particles);
    if !triggered {
        return Ok((update_stats_poor(prev_stats, forward, &increments), 0, 0));
    }
    let dim = prev_stats.dim();
    let sampler =
        RejectionBackwardSampler::new(model, n, prev_particles, prev_logweights, rejection_cap)?;
    let mut new_stats = StatMatrix::zeros(new_particles.len(), dim);
    let mut inc = vec![0.0f64; dim];
    let mut trials = 0u64;
    let mut fallbacks = 0u64;
    let weight = 1.0 / (1.0 + backward_draws as f64);
    for (i, &x_next) in new_particles.iter().enumerate() {
        let row = new_stats.row_mut(i);
        let old = prev_stats.row(forward[i]);
        let inc_fwd = increments.row(i);
        for d in 0..dim {
            row[d] = old[d] + inc_fwd[d];
        }
        for _ in 0..backward_draws {
            let draw = sampler.sample(x_next, &mut *rng)?;
            trials += u64::from(draw.trials);
            fallbacks += u64::from(draw.fell_back);
            functional.increment(n, prev_particles[draw.index], x_next, &mut inc);
            let old = prev_stats.row(draw.index);
            for d in 0..dim {
                row[d] += old[d] + inc[d];
            }
        }
        for v in row {
            *v *= weight;
        }
    }
    Ok((new_stats, trials, fallbacks))
}

fn gather_enoch(enoch: &[usize], forward: &[usize]) -> Vec<usize> {
    forward.iter().map(|&j| enoch[j]).collect()
}

/// Count distinct entries by sort-and-scan.
pub fn distinct_count(indices: &[usize]) -> usize {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

fn adaptive_trigger(distinct: usize, resampled: bool, beta: f64, n_particles: usize) -> bool {
    resampled && (distinct as f64) < beta * n_particles as f64
}

/// Enoch-index bookkeeping for the adaptive backward schedule: gather the
/// indices through the forward ancestry, then trigger (and reset the
/// genealogy to the identity) when the step resampled and the distinct
/// count fell below β·N.
pub fn backward_trigger(
    enoch: &[usize],
    forward: &[usize],
    resampled: bool,
    beta: f64,
    n_particles: usize,
) -> (Vec<usize>, bool) {
    let gathered = gather_enoch(enoch, forward);
    let distinct = distinct_count(&gathered);
    if adaptive_trigger(distinct, resampled, beta, n_particles) {
        ((0..n_particles).collect(), true)
    } else {
        (gathered, false)
    }
}

fn weighted_average(probs: &[f64], stats: &StatMatrix) -> Vec<f64> {
    let dim = stats.dim();
    let mut out = vec![0.0; dim];
    for (i, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let row = stats.row(i);
        for d in 0..dim {
            out[d] += p * row[d];
        }
    }
    out
}

/// Self-normalized estimate `Ω⁻¹ Σ_i ω_i τ_i`, one value per component.
pub fn estimate(cloud: &ParticleCloud) -> Result<Vec<f64>> {
    let (probs, _) = log_normalize(&cloud.logweights)?;
    Ok(weighted_average(&probs, &cloud.stats))
}

/// Driver owning the particle cloud, the RNG streams, and the schedule
/// state for one smoothing run.
pub struct Smoother<'a, M: PathModel + ?Sized, F: AdditiveFunctional + ?Sized> {
    model: &'a M,
    functional: &'a F,
    config: SmootherConfig,
    cloud: ParticleCloud,
    rng_filter: ChaCha8Rng,
    rng_backward: ChaCha8Rng,
    selections_since_backward: usize,
    last_forward: Vec<usize>,
    // Normalized weights of the current cloud, kept alongside it so each
    // step normalizes exactly once.
    weight_probs: Vec<f64>,
    log_total_weight: f64,
    ess_value: f64,
}

impl<'a, M: PathModel + ?Sized, F: AdditiveFunctional + ?Sized> Smoother<'a, M, F> {
    pub fn new(
        model: &'a M,
        functional: &'a F,
        n_particles: usize,
        config: SmootherConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng_filter = RngStream::new(config.seed, 0).rng();
        let rng_backward = RngStream::new(config.seed, 1).rng();
        let cloud = init_cloud(model, functional, n_particles, &mut rng_filter)?;
        let mut smoother = Self {
            model,
            functional,
            config,
            cloud,
            rng_filter,
            rng_backward,
            selections_since_backward: 0,
            last_forward: Vec::new(),
            weight_probs: Vec::new(),
            log_total_weight: 0.0,
            ess_value: 0.0,
        };
        smoother.refresh_weight_cache()?;
        Ok(smoother)
    }

    fn refresh_weight_cache(&mut self) -> Result<()> {
        let (probs, log_total) = log_normalize(&self.cloud.logweights)
            .map_err(|_| Error::DegenerateAt {
                time: self.cloud.time,
            })?;
        self.ess_value = 1.0 / probs.iter().map(|p| p * p).sum::<f64>();
        self.weight_probs = probs;
        self.log_total_weight = log_total;
        Ok(())
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    /// Forward ancestor indices of the most recent step; empty before the
    /// first step. Exposed for genealogy tracing in diagnostics and tests.
    pub fn last_forward_indices(&self) -> &[usize] {
        &self.last_forward
    }

    pub fn estimate(&self) -> Result<Vec<f64>> {
        Ok(weighted_average(&self.weight_probs, &self.cloud.stats))
    }

    /// Advance the system one transition and return the step diagnostics.
    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let start = Instant::now();
        let n = self.cloud.time;
        if n + 1 >= self.model.num_observations() {
            return Err(Error::ObservationsExhausted {
                requested: n + 1,
                available: self.model.num_observations(),
            });
        }
        let ess_in = self.ess_value;
        let resampled = match self.config.variant {
            // The backward-sampling baselines run with systematic selection.
            SmootherVariant::FfbsmForward | SmootherVariant::Paris => true,
            SmootherVariant::PoorMan | SmootherVariant::AdaSmooth => {
                indicator_from_ess(ess_in, &self.cloud, &self.config)
            }
        };
        let apf = apf_step_inner(
            &self.cloud,
            self.model,
            resampled,
            Some(&self.weight_probs),
            &mut self.rng_filter,
        )?;

        let n_particles = self.cloud.n_particles();
        let gathered = gather_enoch(&self.cloud.enoch, &apf.forward);
        let distinct = distinct_count(&gathered);
        let triggered = match self.config.variant {
            SmootherVariant::PoorMan => false,
            SmootherVariant::FfbsmForward | SmootherVariant::Paris => true,
            SmootherVariant::AdaSmooth => match self.config.backward_schedule {
                BackwardSchedule::Adaptive => {
                    adaptive_trigger(distinct, resampled, self.config.beta, n_particles)
                }
                BackwardSchedule::EveryResampling => resampled,
                BackwardSchedule::Periodic(delta) => {
                    if resampled {
                        self.selections_since_backward += 1;
                        if self.selections_since_backward >= delta {
                            self.selections_since_backward = 0;
                            true
                        } else {
                            false
                        }
                    } else {
                        false
                    }
                }
            },
        };
        let enoch = if triggered {
            (0..n_particles).collect()
        } else {
            gathered
        };

        let cap = self.config.rejection_cap.unwrap_or(n_particles as u32);
        let mut backward_trials = 0u64;
        let new_stats = match self.config.variant {
            SmootherVariant::PoorMan => {
                let increments = compute_increments(
                    self.functional,
                    n,
                    &self.cloud.particles,
                    &apf.forward,
                    &apf.particles,
                );
                update_stats_poor(&self.cloud.stats, &apf.forward, &increments)
            }
            SmootherVariant::FfbsmForward => update_stats_ffbsm(
                self.model,
                self.functional,
                n,
                &self.cloud.particles,
                &self.cloud.logweights,
                &self.cloud.stats,
                &apf.particles,
            )
            .map_err(|e| match e {
                Error::AllWeightsZero => Error::DegenerateAt { time: n },
                other => other,
            })?,
            SmootherVariant::Paris => {
                let (stats, trials, _) = update_stats_paris(
                    self.model,
                    self.functional,
                    n,
                    &self.cloud.particles,
                    &self.cloud.logweights,
                    &self.cloud.stats,
                    &apf.particles,
                    self.config.precision_draws,
                    cap,
                    &mut self.rng_backward,
                )
                .map_err(|e| match e {
                    Error::AllWeightsZero => Error::DegenerateAt { time: n },
                    other => other,
                })?;
                backward_trials = trials;
                stats
            }
            SmootherVariant::AdaSmooth => {
                let (stats, trials, _) = update_stats_adasmooth(
                    self.model,
                    self.functional,
                    n,
                    &self.cloud.particles,
                    &self.cloud.logweights,
                    &self.cloud.stats,
                    &apf.particles,
                    &apf.forward,
                    triggered,
                    self.config.backward_draws,
                    cap,
                    &mut self.rng_backward,
                )
                .map_err(|e| match e {
                    Error::AllWeightsZero => Error::DegenerateAt { time: n },
                    other => other,
                })?;
                backward_trials = trials;
                stats
            }
        };

        let gap = if resampled { 0 } else { self.cloud.gap + 1 };
        self.cloud = ParticleCloud {
            particles: apf.particles,
            logweights: apf.logweights,
            stats: new_stats,
            enoch,
            time: n + 1,
            gap,
        };
        self.last_forward = apf.forward;

        self.refresh_weight_cache()?;
        let estimate = weighted_average(&self.weight_probs, &self.cloud.stats);
        Ok(StepDiagnostics {
            time: n + 1,
            estimate,
            log_total_weight: self.log_total_weight,
            ess: ess_in,
            resampled,
            backward_triggered: triggered,
            distinct_enoch: distinct,
            backward_trials,
            elapsed: start.elapsed(),
        })
    }

    /// Run through the whole observation record.
    pub fn run(&mut self) -> Result<RunRecord> {
        let initial_estimate = self.estimate()?;
        let remaining = self.model.num_observations() - 1 - self.cloud.time;
        let mut steps = Vec::with_capacity(remaining);
        while self.cloud.time + 1 < self.model.num_observations() {
            steps.push(self.step()?);
        }
        Ok(RunRecord {
            initial_estimate,
            steps,
        })
    }
}
