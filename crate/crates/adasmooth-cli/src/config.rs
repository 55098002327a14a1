//! Flat key-value run configuration (`section.key = value` lines).
//!
//! The format is deliberately minimal: one assignment per line, full-line
//! `#` comments, list values comma-separated. Every key is validated against
//! the model and smoother invariants at load time, and unknown or duplicate
//! keys are rejected so that typos surface as named errors instead of
//! silently falling back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use adasmooth::functional::{AdditiveFunctional, StateSumFunctional, SvTripleFunctional};
use adasmooth::model::{
    LinearGaussianHmm, PathModel, SimulatedTrajectory, StochasticVolatilityModel,
};
use adasmooth::smoother::{BackwardSchedule, SmootherConfig, SmootherVariant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },
    #[error("unknown config key `{key}`")]
    Unknown { key: String },
    #[error("missing required config key `{key}`")]
    Missing { key: String },
    #[error("config key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("config keys `{a}` and `{b}` are mutually exclusive")]
    Conflict { a: String, b: String },
    #[error("config key `{key}`: path `{path}` does not exist")]
    MissingPath { key: String, path: PathBuf },
    #[error("no configuration file given; pass --config <path>")]
    NoConfig,
}

#[derive(Debug, Clone)]
pub enum ModelParams {
    Lgssm {
        a: f64,
        b: f64,
        sigma_u: f64,
        sigma_v: f64,
    },
    Sv {
        a: f64,
        b: f64,
        sigma: f64,
        rho: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateBlock {
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ModelSection {
    pub params: ModelParams,
    pub observations_path: Option<PathBuf>,
    pub simulate: Option<SimulateBlock>,
}

/// A parameterized model with its observation record attached.
pub enum ModelInstance {
    Lgssm(LinearGaussianHmm),
    Sv(StochasticVolatilityModel),
}

impl ModelInstance {
    pub fn as_path_model(&self) -> &(dyn PathModel + Sync) {
        match self {
            ModelInstance::Lgssm(m) => m,
            ModelInstance::Sv(m) => m,
        }
    }

    pub fn simulate(&self, n_steps: usize, seed: u64) -> adasmooth::Result<SimulatedTrajectory> {
        match self {
            ModelInstance::Lgssm(m) => m.simulate(n_steps, seed),
            ModelInstance::Sv(m) => m.simulate(n_steps, seed),
        }
    }

    pub fn with_observations(self, observations: Vec<f64>) -> Self {
        match self {
            ModelInstance::Lgssm(m) => ModelInstance::Lgssm(m.with_observations(observations)),
            ModelInstance::Sv(m) => ModelInstance::Sv(m.with_observations(observations)),
        }
    }

    pub fn num_observations(&self) -> usize {
        self.as_path_model().num_observations()
    }
}

impl ModelSection {
    /// Instantiate the model without observations; validates parameters.
    pub fn build_params(&self) -> Result<ModelInstance, ConfigError> {
        let to_value = |e: adasmooth::Error| ConfigError::Value {
            key: "model".into(),
            message: e.to_string(),
        };
        match self.params {
            ModelParams::Lgssm {
                a,
                b,
                sigma_u,
                sigma_v,
            } => Ok(ModelInstance::Lgssm(
                LinearGaussianHmm::new(a, b, sigma_u, sigma_v).map_err(to_value)?,
            )),
            ModelParams::Sv { a, b, sigma, rho } => Ok(ModelInstance::Sv(
                StochasticVolatilityModel::new(a, b, sigma, rho).map_err(to_value)?,
            )),
        }
    }

    /// Instantiate with the observation record loaded from disk or simulated.
    pub fn build(&self) -> anyhow::Result<ModelInstance> {
        let model = self.build_params()?;
        if let Some(path) = &self.observations_path {
            let observations = adasmooth::model::read_observations_csv(path)?;
            Ok(model.with_observations(observations))
        } else if let Some(block) = self.simulate {
            let trajectory = model.simulate(block.n_steps, block.seed)?;
            Ok(model.with_observations(trajectory.observations))
        } else {
            Err(ConfigError::Missing {
                key: "model.observations (or model.simulate.n_steps)".into(),
            }
            .into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    StateSum,
    SvTriple,
}

impl FunctionalKind {
    pub fn instance(self) -> Box<dyn AdditiveFunctional + Send + Sync> {
        match self {
            FunctionalKind::StateSum => Box::new(StateSumFunctional),
            FunctionalKind::SvTriple => Box::new(SvTripleFunctional),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmootherSection {
    pub variant: SmootherVariant,
    pub particles: usize,
    pub alpha: f64,
    pub beta: f64,
    pub precision_draws: usize,
    pub backward_draws: usize,
    pub max_gap: Option<usize>,
    pub schedule: BackwardSchedule,
    pub rejection_cap: Option<u32>,
}

impl SmootherSection {
    pub fn to_config(&self, seed: u64) -> SmootherConfig {
        SmootherConfig {
            variant: self.variant,
            alpha: self.alpha,
            beta: self.beta,
            precision_draws: self.precision_draws,
            backward_draws: self.backward_draws,
            max_gap: self.max_gap,
            backward_schedule: self.schedule,
            rejection_cap: self.rejection_cap,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSection {
    pub replicates: usize,
    pub checkpoints: Vec<usize>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub particle_counts: Vec<usize>,
    pub variants: Vec<SmootherVariant>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSection,
    pub functional: FunctionalKind,
    pub smoother: SmootherSection,
    pub bench: BenchSection,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_str(&text)?;
        // Relative observation paths resolve against the config location.
        if let Some(obs) = &config.model.observations_path {
            if obs.is_relative() {
                if let Some(dir) = path.parent() {
                    config.model.observations_path = Some(dir.join(obs));
                }
            }
        }
        if let Some(obs) = &config.model.observations_path {
            if !obs.exists() {
                return Err(ConfigError::MissingPath {
                    key: "model.observations".into(),
                    path: obs.clone(),
                });
            }
        }
        Ok(config)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut pending: BTreeMap<String, String> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if pending.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate { key, line });
            }
        }
        Self::from_map(pending)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut take = |key: &str| map.remove(key);

        let kind = take("model.kind").ok_or(ConfigError::Missing {
            key: "model.kind".into(),
        })?;
        let params = match kind.as_str() {
            "lgssm" => ModelParams::Lgssm {
                a: require_parsed(&mut take, "model.a")?,
                b: require_parsed(&mut take, "model.b")?,
                sigma_u: require_parsed(&mut take, "model.sigma_u")?,
                sigma_v: require_parsed(&mut take, "model.sigma_v")?,
            },
            "sv" => ModelParams::Sv {
                a: require_parsed(&mut take, "model.a")?,
                b: require_parsed(&mut take, "model.b")?,
                sigma: require_parsed(&mut take, "model.sigma")?,
                rho: require_parsed(&mut take, "model.rho")?,
            },
            other => {
                return Err(ConfigError::Value {
                    key: "model.kind".into(),
                    message: format!("expected `lgssm` or `sv`, got `{other}`"),
                })
            }
        };
        let observations_path = take("model.observations").map(PathBuf::from);
        let simulate = match (take("model.simulate.n_steps"), take("model.simulate.seed")) {
            (None, None) => None,
            (n_steps, seed) => {
                let n_steps = parse_value("model.simulate.n_steps", n_steps.ok_or(
                    ConfigError::Missing {
                        key: "model.simulate.n_steps".into(),
                    },
                )?)?;
                let seed = parse_value("model.simulate.seed", seed.ok_or(ConfigError::Missing {
                    key: "model.simulate.seed".into(),
                })?)?;
                Some(SimulateBlock { n_steps, seed })
            }
        };
        if observations_path.is_some() && simulate.is_some() {
            return Err(ConfigError::Conflict {
                a: "model.observations".into(),
                b: "model.simulate.n_steps".into(),
            });
        }
        let model = ModelSection {
            params,
            observations_path,
            simulate,
        };
        // Validate the parameter invariants eagerly.
        model.build_params()?;

        let functional = match take("functional.kind").as_deref() {
            None | Some("state_sum") => FunctionalKind::StateSum,
            Some("sv_triple") => FunctionalKind::SvTriple,
            Some(other) => {
                return Err(ConfigError::Value {
                    key: "functional.kind".into(),
                    message: format!("expected `state_sum` or `sv_triple`, got `{other}`"),
                })
            }
        };

        let variant = match take("smoother.variant").as_deref() {
            None | Some("adasmooth") => SmootherVariant::AdaSmooth,
            Some("poor_man") => SmootherVariant::PoorMan,
            Some("ffbsm") => SmootherVariant::FfbsmForward,
            Some("paris") => SmootherVariant::Paris,
            Some(other) => {
                return Err(ConfigError::Value {
                    key: "smoother.variant".into(),
                    message: format!(
                        "expected one of poor_man, ffbsm, paris, adasmooth; got `{other}`"
                    ),
                })
            }
        };
        let defaults = SmootherConfig::new(variant);
        let smoother = SmootherSection {
            variant,
            particles: optional_parsed(&mut take, "smoother.particles")?.unwrap_or(500),
            alpha: optional_parsed(&mut take, "smoother.alpha")?.unwrap_or(defaults.alpha),
            beta: optional_parsed(&mut take, "smoother.beta")?.unwrap_or(defaults.beta),
            precision_draws: optional_parsed(&mut take, "smoother.k")?
                .unwrap_or(defaults.precision_draws),
            backward_draws: optional_parsed(&mut take, "smoother.m")?
                .unwrap_or(defaults.backward_draws),
            max_gap: match take("smoother.max_gap") {
                None => None,
                Some(v) if v == "unbounded" => None,
                Some(v) => Some(parse_value("smoother.max_gap", v)?),
            },
            schedule: match take("smoother.schedule") {
                None => BackwardSchedule::Adaptive,
                Some(v) => match v.as_str() {
                    "adaptive" => BackwardSchedule::Adaptive,
                    "every_resampling" => BackwardSchedule::EveryResampling,
                    other => match other.strip_prefix("periodic:") {
                        Some(delta) => BackwardSchedule::Periodic(parse_value(
                            "smoother.schedule",
                            delta.to_string(),
                        )?),
                        None => {
                            return Err(ConfigError::Value {
                                key: "smoother.schedule".into(),
                                message: format!(
                                    "expected adaptive, every_resampling, or periodic:<k>; got `{other}`"
                                ),
                            })
                        }
                    },
                },
            },
            rejection_cap: match take("smoother.rejection_cap") {
                None => None,
                Some(v) if v == "auto" => None,
                Some(v) => Some(parse_value("smoother.rejection_cap", v)?),
            },
        };
        if smoother.particles < 2 {
            return Err(ConfigError::Value {
                key: "smoother.particles".into(),
                message: "need at least 2 particles".into(),
            });
        }

        let seed = optional_parsed(&mut take, "seed")?.unwrap_or(0);
        // Validate the smoother invariants eagerly.
        smoother.to_config(seed).validate().map_err(|e| ConfigError::Value {
            key: "smoother".into(),
            message: e.to_string(),
        })?;

        let bench = BenchSection {
            replicates: optional_parsed(&mut take, "bench.replicates")?.unwrap_or(100),
            checkpoints: optional_list(&mut take, "bench.checkpoints")?.unwrap_or_default(),
            alphas: optional_list(&mut take, "bench.alphas")?
                .unwrap_or_else(|| vec![smoother.alpha]),
            betas: optional_list(&mut take, "bench.betas")?.unwrap_or_else(|| vec![smoother.beta]),
            particle_counts: optional_list(&mut take, "bench.particle_counts")?
                .unwrap_or_else(|| vec![smoother.particles]),
            variants: match take("bench.variants") {
                None => vec![variant],
                Some(v) => v
                    .split(',')
                    .map(|item| match item.trim() {
                        "poor_man" => Ok(SmootherVariant::PoorMan),
                        "ffbsm" => Ok(SmootherVariant::FfbsmForward),
                        "paris" => Ok(SmootherVariant::Paris),
                        "adasmooth" => Ok(SmootherVariant::AdaSmooth),
                        other => Err(ConfigError::Value {
                            key: "bench.variants".into(),
                            message: format!("unknown variant `{other}`"),
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            },
        };
        if bench.replicates == 0 {
            return Err(ConfigError::Value {
                key: "bench.replicates".into(),
                message: "need at least one replicate".into(),
            });
        }

        let output_dir = PathBuf::from(take("output.dir").unwrap_or_else(|| "out".into()));

        if let Some(key) = map.keys().next() {
            return Err(ConfigError::Unknown { key: key.clone() });
        }
        Ok(Self {
            model,
            functional,
            smoother,
            bench,
            seed,
            output_dir,
        })
    }

    /// Display name used in CSV output.
    pub fn variant_name(variant: SmootherVariant) -> &'static str {
        match variant {
            SmootherVariant::PoorMan => "poor_man",
            SmootherVariant::FfbsmForward => "ffbsm",
            SmootherVariant::Paris => "paris",
            SmootherVariant::AdaSmooth => "adasmooth",
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: String) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError::Value {
        key: key.into(),
        message: format!("cannot parse `{value}`: {e}"),
    })
}

fn require_parsed<T: std::str::FromStr>(
    take: &mut impl FnMut(&str) -> Option<String>,
    key: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let value = take(key).ok_or(ConfigError::Missing { key: key.into() })?;
    parse_value(key, value)
}

fn optional_parsed<T: std::str::FromStr>(
    take: &mut impl FnMut(&str) -> Option<String>,
    key: &str,
) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    take(key).map(|v| parse_value(key, v)).transpose()
}

fn optional_list<T: std::str::FromStr>(
    take: &mut impl FnMut(&str) -> Option<String>,
    key: &str,
) -> Result<Option<Vec<T>>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match take(key) {
        None => Ok(None),
        Some(v) => v
            .split(',')
            .map(|item| parse_value(key, item.trim().to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
    }
}
