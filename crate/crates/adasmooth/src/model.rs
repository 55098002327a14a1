//! Path-space model interface and the two scalar benchmark models.
//!
//! A path-space model is specified by an unnormalized initial density, a
//! sequence of unnormalized transition densities `ld_n(x, x')`, a proposal
//! family used to mutate particles, and optional adjustment multipliers for
//! the selection step. Everything is kept in log-domain. The two concrete
//! models are a linear Gaussian state-space model, for which exact smoothing
//! is available as an oracle, and a stochastic volatility model with
//! correlated noise, whose transition density does not factorize into a
//! Markov kernel times a potential in the latent variable alone.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// ln(2π), used by every Gaussian log-density in the crate.
pub const LN_2PI: f64 = 1.8378770664093453;

/// Log-density of a scalar Gaussian with mean `mean` and variance `var`.
#[inline]
pub fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var)
}

#[inline]
fn sample_normal(rng: &mut dyn RngCore, mean: f64, std_dev: f64) -> f64 {
    let z: f64 = StandardNormal.sample(&mut *rng);
    mean + std_dev * z
}

/// Scalar path-space model: unnormalized target plus proposal machinery.
///
/// All densities are log-domain. Samplers take an explicit RNG handle and
/// evaluations are pure functions of their arguments, so implementations are
/// safe for concurrent use.
pub trait PathModel {
    /// Length of the observation record backing the transition densities.
    fn num_observations(&self) -> usize;

    /// Log of the (possibly unnormalized) initial target density χ(x₀).
    fn initial_target_logdensity(&self, x0: f64) -> f64;

    /// Log-density of the time-0 proposal ν.
    fn initial_proposal_logdensity(&self, x0: f64) -> f64;

    /// Draw from the time-0 proposal ν.
    fn initial_proposal_sample(&self, rng: &mut dyn RngCore) -> f64;

    /// Initial importance weight log χ(x₀) − log ν(x₀).
    ///
    /// Implementations may override this with an analytically cancelled
    /// form; the default takes the literal difference.
    fn initial_log_weight(&self, x0: f64) -> f64 {
        self.initial_target_logdensity(x0) - self.initial_proposal_logdensity(x0)
    }

    /// Log of the unnormalized transition density ld_n(x, x').
    ///
    /// Panics if `n + 1` is not covered by the observation record.
    fn transition_logdensity(&self, n: usize, x: f64, x_next: f64) -> f64;

    /// Log of a bound c_n(x') with ld_n(x, x') ≤ c_n(x') for all x.
    fn transition_log_bound(&self, n: usize, x_next: f64) -> f64;

    /// Log-density of the mutation proposal hd_n(x, x').
    fn proposal_logdensity(&self, n: usize, x: f64, x_next: f64) -> f64;

    /// Draw from the mutation proposal hd_n(x, ·).
    fn proposal_sample(&self, n: usize, x: f64, rng: &mut dyn RngCore) -> f64;

    /// Log of the adjustment multiplier ϑ_n(x) used by the selection step.
    ///
    /// Defaults to zero (no adjustment), matching the bootstrap setups of
    /// both benchmark models.
    fn adjustment_log(&self, _n: usize, _x: f64) -> f64 {
        0.0
    }

    /// Dimension of the state space. Only scalar models are supported.
    fn state_dim(&self) -> usize {
        1
    }
}

/// Linear Gaussian state-space model
/// `X_{n+1} = a X_n + σ_U U_{n+1}`, `Y_n = b X_n + σ_V V_n`,
/// initialized from its stationary law N(0, σ_U²/(1−a²)).
///
/// The transition density factorizes as
/// `ld_n(x, x') = N(x'; a·x, σ_U²) · N(y_{n+1}; b·x', σ_V²)`; the time-0
/// observation enters through the initial weight only. Particles are mutated
/// with the state dynamics (bootstrap proposal).
#[derive(Debug, Clone)]
pub struct LinearGaussianHmm {
    pub a: f64,
    pub b: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub observations: Vec<f64>,
}

impl LinearGaussianHmm {
    /// Validates `|a| < 1`, `σ_U > 0`, `σ_V > 0`; starts with an empty
    /// observation record.
    pub fn new(a: f64, b: f64, sigma_u: f64, sigma_v: f64) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lgssm requires |a| < 1 for a stationary initialization, got a = {a}"
            )));
        }
        if !(sigma_u > 0.0) || !(sigma_v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lgssm noise levels must be positive, got sigma_u = {sigma_u}, sigma_v = {sigma_v}"
            )));
        }
        Ok(Self {
            a,
            b,
            sigma_u,
            sigma_v,
            observations: Vec::new(),
        })
    }

    pub fn with_observations(mut self, observations: Vec<f64>) -> Self {
        self.observations = observations;
        self
    }

    /// Stationary variance σ_U²/(1−a²) of the state process.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma_u * self.sigma_u / (1.0 - self.a * self.a)
    }

    /// Simulate `n_steps` time points of states and observations,
    /// deterministically from `seed`.
    pub fn simulate(&self, n_steps: usize, seed: u64) -> Result<SimulatedTrajectory> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter(
                "simulation needs at least one time step".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::with_capacity(n_steps);
        let mut observations = Vec::with_capacity(n_steps);
        let mut x = sample_normal(&mut rng, 0.0, self.stationary_variance().sqrt());
        states.push(x);
        observations.push(sample_normal(&mut rng, self.b * x, self.sigma_v));
        for _ in 1..n_steps {
            x = sample_normal(&mut rng, self.a * x, self.sigma_u);
            states.push(x);
            observations.push(sample_normal(&mut rng, self.b * x, self.sigma_v));
        }
        Ok(SimulatedTrajectory {
            states,
            observations,
            seed,
        })
    }
}

impl PathModel for LinearGaussianHmm {
    fn num_observations(&self) -> usize {
        self.observations.len()
    }

    fn initial_target_logdensity(&self, x0: f64) -> f64 {
        log_normal_pdf(x0, 0.0, self.stationary_variance())
            + log_normal_pdf(self.observations[0], self.b * x0, self.sigma_v * self.sigma_v)
    }

    fn initial_proposal_logdensity(&self, x0: f64) -> f64 {
        log_normal_pdf(x0, 0.0, self.stationary_variance())
    }

    fn initial_proposal_sample(&self, rng: &mut dyn RngCore) -> f64 {
        sample_normal(rng, 0.0, self.stationary_variance().sqrt())
    }

    // The stationary factor cancels between χ and ν.
    fn initial_log_weight(&self, x0: f64) -> f64 {
        log_normal_pdf(self.observations[0], self.b * x0, self.sigma_v * self.sigma_v)
    }

    fn transition_logdensity(&self, n: usize, x: f64, x_next: f64) -> f64 {
        log_normal_pdf(x_next, self.a * x, self.sigma_u * self.sigma_u)
            + log_normal_pdf(
                self.observations[n + 1],
                self.b * x_next,
                self.sigma_v * self.sigma_v,
            )
    }

    fn transition_log_bound(&self, n: usize, x_next: f64) -> f64 {
        -0.5 * (LN_2PI + (self.sigma_u * self.sigma_u).ln())
            + log_normal_pdf(
                self.observations[n + 1],
                self.b * x_next,
                self.sigma_v * self.sigma_v,
            )
    }

    fn proposal_logdensity(&self, _n: usize, x: f64, x_next: f64) -> f64 {
        log_normal_pdf(x_next, self.a * x, self.sigma_u * self.sigma_u)
    }

    fn proposal_sample(&self, _n: usize, x: f64, rng: &mut dyn RngCore) -> f64 {
        sample_normal(rng, self.a * x, self.sigma_u)
    }
}

/// Stochastic volatility model with correlated state and observation noise:
/// `X_{n+1} = a X_n + σ U_{n+1}`, `Y_n = b exp(X_n/2) V_n`, where
/// `corr(U_n, V_n) = ρ` for n ≥ 1 and V₀ is independent of X₀.
///
/// Writing `V_{n+1} = ρ U_{n+1} + sqrt(1−ρ²) W_{n+1}` gives the conditional
/// observation law
/// `Y_{n+1} | (X_n, X_{n+1}) ~ N(b e^{x'/2} ρ (x' − a x)/σ, b² e^{x'} (1−ρ²))`,
/// so the transition density depends on both endpoints and the model is
/// handled through the generic path-space interface.
#[derive(Debug, Clone)]
pub struct StochasticVolatilityModel {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub rho: f64,
    pub observations: Vec<f64>,
}

impl StochasticVolatilityModel {
    /// Validates `|a| < 1`, `b > 0`, `σ > 0`, `|ρ| < 1`.
    pub fn new(a: f64, b: f64, sigma: f64, rho: f64) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sv model requires |a| < 1, got a = {a}"
            )));
        }
        if !(b > 0.0) || !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sv model requires b > 0 and sigma > 0, got b = {b}, sigma = {sigma}"
            )));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sv noise correlation must lie in (-1, 1), got rho = {rho}"
            )));
        }
        Ok(Self {
            a,
            b,
            sigma,
            rho,
            observations: Vec::new(),
        })
    }

    pub fn with_observations(mut self, observations: Vec<f64>) -> Self {
        self.observations = observations;
        self
    }

    /// Stationary variance σ²/(1−a²) of the log-volatility.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.a * self.a)
    }

    // Observation factor log N(y; b e^{x'/2} ρ (x'−a x)/σ, b² e^{x'} (1−ρ²))
    // in an expanded form that never materializes e^{x'}, so the value stays
    // finite far beyond where the variance itself would overflow.
    #[inline]
    fn observation_logdensity(&self, x: f64, x_next: f64, y: f64) -> f64 {
        let one_minus_rho2 = 1.0 - self.rho * self.rho;
        let residual =
            y * (-0.5 * x_next).exp() / self.b - self.rho * (x_next - self.a * x) / self.sigma;
        -0.5 * (LN_2PI + (self.b * self.b * one_minus_rho2).ln() + x_next)
            - residual * residual / (2.0 * one_minus_rho2)
    }

    /// Simulate `n_steps` time points, deterministic in `seed`.
    pub fn simulate(&self, n_steps: usize, seed: u64) -> Result<SimulatedTrajectory> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter(
                "simulation needs at least one time step".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::with_capacity(n_steps);
        let mut observations = Vec::with_capacity(n_steps);
        let mut x = sample_normal(&mut rng, 0.0, self.stationary_variance().sqrt());
        states.push(x);
        let v0: f64 = StandardNormal.sample(&mut rng);
        observations.push(self.b * (0.5 * x).exp() * v0);
        let noise_mix = (1.0 - self.rho * self.rho).sqrt();
        for _ in 1..n_steps {
            let u: f64 = StandardNormal.sample(&mut rng);
            let w: f64 = StandardNormal.sample(&mut rng);
            x = self.a * x + self.sigma * u;
            states.push(x);
            let v = self.rho * u + noise_mix * w;
            observations.push(self.b * (0.5 * x).exp() * v);
        }
        Ok(SimulatedTrajectory {
            states,
            observations,
            seed,
        })
    }
}

impl PathModel for StochasticVolatilityModel {
    fn num_observations(&self) -> usize {
        self.observations.len()
    }

    fn initial_target_logdensity(&self, x0: f64) -> f64 {
        log_normal_pdf(x0, 0.0, self.stationary_variance()) + self.initial_log_weight(x0)
    }

    fn initial_proposal_logdensity(&self, x0: f64) -> f64 {
        log_normal_pdf(x0, 0.0, self.stationary_variance())
    }

    fn initial_proposal_sample(&self, rng: &mut dyn RngCore) -> f64 {
        sample_normal(rng, 0.0, self.stationary_variance().sqrt())
    }

    // V₀ is independent of X₀, so y₀ | x₀ ~ N(0, b² e^{x₀}).
    fn initial_log_weight(&self, x0: f64) -> f64 {
        let scaled = self.observations[0] * (-0.5 * x0).exp() / self.b;
        -0.5 * (LN_2PI + (self.b * self.b).ln() + x0) - 0.5 * scaled * scaled
    }

    fn transition_logdensity(&self, n: usize, x: f64, x_next: f64) -> f64 {
        log_normal_pdf(x_next, self.a * x, self.sigma * self.sigma)
            + self.observation_logdensity(x, x_next, self.observations[n + 1])
    }

    // Each Gaussian factor is bounded by its mode height; the mode of the
    // observation factor does not depend on x.
    fn transition_log_bound(&self, _n: usize, x_next: f64) -> f64 {
        let qmax = -0.5 * (LN_2PI + (self.sigma * self.sigma).ln());
        let gmax =
            -0.5 * (LN_2PI + (self.b * self.b * (1.0 - self.rho * self.rho)).ln() + x_next);
        qmax + gmax
    }

    fn proposal_logdensity(&self, _n: usize, x: f64, x_next: f64) -> f64 {
        log_normal_pdf(x_next, self.a * x, self.sigma * self.sigma)
    }

    fn proposal_sample(&self, _n: usize, x: f64, rng: &mut dyn RngCore) -> f64 {
        sample_normal(rng, self.a * x, self.sigma)
    }
}

/// A simulated state/observation record together with the seed it was
/// generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrajectory {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
    pub seed: u64,
}

impl SimulatedTrajectory {
    /// Write as two-column CSV (`x,y`) preceded by a `# seed=<u64>` line.
    ///
    /// Values use the shortest round-tripping decimal form, so reading the
    /// file back reproduces the trajectory bit for bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "x,y")?;
        for (x, y) in self.states.iter().zip(&self.observations) {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    }
}

/// Read an observation record from CSV.
///
/// Accepts the single-column format (header `y`) and the two-column
/// trajectory format (header `x,y`, observations taken from the second
/// column). Lines starting with `#` are ignored.
pub fn read_observations_csv<P: AsRef<Path>>(path: P) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    read_observations(BufReader::new(file))
}

pub fn read_observations<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut observations = Vec::new();
    let mut header: Option<usize> = None; // column index holding y
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match header {
            None => {
                header = match line {
                    "y" => Some(0),
                    "x,y" => Some(1),
                    other => {
                        return Err(Error::Csv {
                            line: line_no,
                            message: format!("expected header `y` or `x,y`, got `{other}`"),
                        })
                    }
                };
            }
            Some(col) => {
                let field = line.split(',').nth(col).ok_or_else(|| Error::Csv {
                    line: line_no,
                    message: format!("missing column {col}"),
                })?;
                let value: f64 = field.trim().parse().map_err(|e| Error::Csv {
                    line: line_no,
                    message: format!("bad float `{field}`: {e}"),
                })?;
                observations.push(value);
            }
        }
    }
    if observations.is_empty() {
        return Err(Error::Csv {
            line: 0,
            message: "no observation rows found".into(),
        });
    }
    Ok(observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lgssm_benchmark() -> LinearGaussianHmm {
        LinearGaussianHmm::new(0.7, 1.0, 0.2, 1.0).unwrap()
    }

    fn sv_benchmark() -> StochasticVolatilityModel {
        StochasticVolatilityModel::new(0.975, 0.641, 0.165, -0.1).unwrap()
    }

    #[test]
    fn lgssm_transition_logdensity_hand_value() {
        let model = lgssm_benchmark().with_observations(vec![0.0, 0.0]);
        // log N(0; 0, 0.04) + log N(0; 0, 1)
        let got = model.transition_logdensity(0, 0.0, 0.0);
        assert_relative_eq!(got, -0.22843915397524506, epsilon = 1e-12);
    }

    #[test]
    fn lgssm_transition_logdensity_zero_residual_maximum() {
        let model = lgssm_benchmark().with_observations(vec![0.0, 0.35]);
        // x' = a x and y = b x' leaves only the two normalizing constants.
        let x = 0.5;
        let x_next = 0.7 * x;
        let model = LinearGaussianHmm {
            observations: vec![0.0, x_next],
            ..model
        };
        let expected = -0.5 * (LN_2PI + 0.04f64.ln()) - 0.5 * (LN_2PI + 1.0f64.ln());
        assert_relative_eq!(model.transition_logdensity(0, x, x_next), expected, epsilon = 1e-12);
        // Any other x is strictly smaller.
        assert!(model.transition_logdensity(0, x + 0.3, x_next) < expected);
    }

    #[test]
    fn lgssm_transition_sign_symmetry() {
        let model = lgssm_benchmark().with_observations(vec![0.0, 0.8]);
        let flipped = lgssm_benchmark().with_observations(vec![0.0, -0.8]);
        let v1 = model.transition_logdensity(0, 0.3, -0.1);
        let v2 = flipped.transition_logdensity(0, -0.3, 0.1);
        assert_relative_eq!(v1, v2, epsilon = 1e-12);
    }

    #[test]
    fn sv_transition_logdensity_hand_value() {
        let model = sv_benchmark().with_observations(vec![0.0, 0.0]);
        // Independent straight-line transcription of the two Gaussian
        // factors at x = x' = y = 0.
        assert_relative_eq!(
            model.transition_logdensity(0, 0.0, 0.0),
            0.41368372866042863,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sv_transition_rho_zero_collapses_conditional_mean() {
        let model = StochasticVolatilityModel::new(0.975, 0.641, 0.165, 0.0)
            .unwrap()
            .with_observations(vec![0.0, 0.4]);
        let (x, x_next) = (0.2, -0.3);
        let expected = log_normal_pdf(x_next, 0.975 * x, 0.165 * 0.165)
            + log_normal_pdf(0.4, 0.0, 0.641 * 0.641 * x_next.exp());
        assert_relative_eq!(model.transition_logdensity(0, x, x_next), expected, epsilon = 1e-12);
    }

    #[test]
    fn sv_transition_finite_for_finite_inputs() {
        let model = sv_benchmark().with_observations(vec![0.0, 3.5]);
        for &(x, x_next) in &[(0.0, 0.0), (-8.0, 9.0), (15.0, -20.0), (300.0, 600.0), (50.0, -600.0)] {
            let value = model.transition_logdensity(0, x, x_next);
            assert!(value.is_finite(), "non-finite at ({x}, {x_next}): {value}");
        }
    }

    #[test]
    fn lgssm_bound_tight_at_proposal_mode() {
        let model = lgssm_benchmark().with_observations(vec![0.0, 1.3]);
        let x_next = 0.42;
        let x = x_next / 0.7; // puts the state factor at its mode
        let density = model.transition_logdensity(0, x, x_next);
        let bound = model.transition_log_bound(0, x_next);
        assert_relative_eq!(density, bound, epsilon = 1e-14);
    }

    #[test]
    fn sv_bound_with_rho_zero_is_mode_product() {
        let model = StochasticVolatilityModel::new(0.975, 0.641, 0.165, 0.0)
            .unwrap()
            .with_observations(vec![0.0, 0.0]);
        let x_next = 0.6f64;
        let expected = -0.5 * (LN_2PI + (0.165f64 * 0.165).ln())
            - 0.5 * (LN_2PI + (0.641f64 * 0.641 * x_next.exp()).ln());
        assert_relative_eq!(model.transition_log_bound(0, x_next), expected, epsilon = 1e-12);
    }

    #[test]
    fn dominance_randomized_grid() {
        // exp(logdensity - logbound) <= 1 + 1e-12 over random pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let lgssm = lgssm_benchmark().with_observations(vec![0.1, -0.4]);
        let sv = sv_benchmark().with_observations(vec![0.1, -0.4]);
        for _ in 0..10_000 {
            let x = sample_normal(&mut rng, 0.0, 2.0);
            let x_next = sample_normal(&mut rng, 0.0, 2.0);
            let d1 = lgssm.transition_logdensity(0, x, x_next) - lgssm.transition_log_bound(0, x_next);
            let d2 = sv.transition_logdensity(0, x, x_next) - sv.transition_log_bound(0, x_next);
            assert!(d1.exp() <= 1.0 + 1e-12, "lgssm bound violated: {d1}");
            assert!(d2.exp() <= 1.0 + 1e-12, "sv bound violated: {d2}");
        }
    }

    #[test]
    fn proposal_moments_match_dynamics() {
        // 1e5 bootstrap proposal draws match N(a·x, σ²) within 4 standard errors.
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (a, sigma, x) in [(0.7f64, 0.2f64, 0.9f64), (0.975, 0.165, -1.2)] {
            let model = LinearGaussianHmm::new(a, 1.0, sigma, 1.0)
                .unwrap()
                .with_observations(vec![0.0, 0.0]);
            let draws: Vec<f64> = (0..n).map(|_| model.proposal_sample(0, x, &mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
            let se_mean = sigma / (n as f64).sqrt();
            let se_var = sigma * sigma * (2.0 / n as f64).sqrt();
            assert!((mean - a * x).abs() < 4.0 * se_mean);
            assert!((var - sigma * sigma).abs() < 4.0 * se_var);
        }
    }

    #[test]
    fn lgssm_stationary_variance_value() {
        assert_relative_eq!(lgssm_benchmark().stationary_variance(), 0.0784313725490196, epsilon = 1e-15);
    }

    #[test]
    fn sv_stationary_variance_value() {
        assert_relative_eq!(sv_benchmark().stationary_variance(), 0.5513924050632906, epsilon = 1e-15);
    }

    #[test]
    fn simulate_is_deterministic_bitwise() {
        let lgssm = lgssm_benchmark();
        let t1 = lgssm.simulate(257, 12345).unwrap();
        let t2 = lgssm.simulate(257, 12345).unwrap();
        assert_eq!(t1, t2);
        let sv = sv_benchmark();
        let s1 = sv.simulate(257, 12345).unwrap();
        let s2 = sv.simulate(257, 12345).unwrap();
        assert_eq!(s1, s2);
        assert_ne!(t1.states, sv.simulate(257, 999).unwrap().states);
    }

    #[test]
    fn simulate_sample_variance_near_stationary() {
        let model = lgssm_benchmark();
        let traj = model.simulate(40_000, 3).unwrap();
        let mean = traj.states.iter().sum::<f64>() / traj.states.len() as f64;
        let var = traj.states.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / traj.states.len() as f64;
        // Autocorrelated series, so allow a generous band around 0.0784.
        assert!((var - model.stationary_variance()).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn initial_log_weight_values() {
        let lgssm = lgssm_benchmark().with_observations(vec![0.0]);
        assert_relative_eq!(lgssm.initial_log_weight(0.0), -0.9189385332046727, epsilon = 1e-12);
        let sv = sv_benchmark().with_observations(vec![0.0]);
        let expected = -0.5 * (LN_2PI + (0.641f64 * 0.641).ln());
        assert_relative_eq!(sv.initial_log_weight(0.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn initial_log_weight_matches_default_ratio() {
        let lgssm = lgssm_benchmark().with_observations(vec![0.7]);
        let sv = sv_benchmark().with_observations(vec![0.7]);
        for x0 in [-1.5, -0.2, 0.0, 0.4, 2.0] {
            let literal =
                lgssm.initial_target_logdensity(x0) - lgssm.initial_proposal_logdensity(x0);
            assert_relative_eq!(lgssm.initial_log_weight(x0), literal, epsilon = 1e-12);
            let literal = sv.initial_target_logdensity(x0) - sv.initial_proposal_logdensity(x0);
            assert_relative_eq!(sv.initial_log_weight(x0), literal, epsilon = 1e-12);
        }
    }

    #[test]
    fn lgssm_initial_weight_bounded_above() {
        let model = lgssm_benchmark().with_observations(vec![0.3]);
        let cap = -0.5 * (LN_2PI + 1.0f64.ln());
        for x0 in [-50.0, -1.0, 0.0, 0.3, 7.0, 100.0] {
            assert!(model.initial_log_weight(x0) <= cap + 1e-15);
        }
    }

    #[test]
    fn parameter_validation_rejects_bad_models() {
        assert!(LinearGaussianHmm::new(1.0, 1.0, 0.2, 1.0).is_err());
        assert!(LinearGaussianHmm::new(0.7, 1.0, 0.0, 1.0).is_err());
        assert!(LinearGaussianHmm::new(0.7, 1.0, 0.2, -1.0).is_err());
        assert!(StochasticVolatilityModel::new(1.2, 0.6, 0.1, 0.0).is_err());
        assert!(StochasticVolatilityModel::new(0.9, -0.6, 0.1, 0.0).is_err());
        assert!(StochasticVolatilityModel::new(0.9, 0.6, 0.1, 1.0).is_err());
    }

    #[test]
    fn trajectory_csv_round_trip_is_exact() {
        let traj = lgssm_benchmark().simulate(37, 11).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let obs = read_observations(&buf[..]).unwrap();
        assert_eq!(obs, traj.observations);
    }

    #[test]
    fn observation_csv_single_column() {
        let data = b"# comment\ny\n1.5\n-2.25\n";
        assert_eq!(read_observations(&data[..]).unwrap(), vec![1.5, -2.25]);
    }

    #[test]
    fn observation_csv_rejects_garbage() {
        assert!(matches!(
            read_observations(&b"z\n1.0\n"[..]),
            Err(Error::Csv { .. })
        ));
        assert!(matches!(
            read_observations(&b"y\nnot_a_number\n"[..]),
            Err(Error::Csv { line: 2, .. })
        ));
        assert!(matches!(read_observations(&b"y\n"[..]), Err(Error::Csv { .. })));
    }
}
