//! Benchmark CLI for online additive particle smoothing.
//!
//! Subcommands: `simulate` writes a synthetic trajectory, `run` performs a
//! single smoothing pass with per-step diagnostics, `bench-grid` sweeps
//! (α, β, N) combinations and reports efficiencies and schedule statistics,
//! `variance-curve` compares variance growth across smoother variants,
//! `oracle` evaluates the exact linear Gaussian ground truth, and
//! `schedule-limit` evaluates the periodic variance-schedule factor.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! weight degeneracy, 1 otherwise.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use adasmooth::bench::{self, ScheduleStatsRow, VarianceCurveRow};
use adasmooth::oracle;
use adasmooth::schedule;
use adasmooth::smoother::{RunRecord, Smoother};

use config::{ConfigError, ModelInstance, RunConfig};

#[derive(Parser)]
#[command(name = "adasmooth", version, about = "Online additive particle smoothing benchmarks")]
struct Cli {
    /// Run configuration file (flat `key = value` format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replicated runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory from the configured model and write it as CSV.
    Simulate,
    /// One smoothing run with per-step diagnostics.
    Run,
    /// Replicated efficiency grid over (alpha, beta, N) combinations.
    BenchGrid,
    /// Time-normalized variance curves for the configured variants.
    VarianceCurve,
    /// Exact smoothed state-sum expectations (linear Gaussian model only).
    Oracle,
    /// Evaluate the periodic variance-schedule factor, which tends to
    /// (3Δ−1)/2 for backward sampling at every Δ-th selection.
    ScheduleLimit {
        /// Selection operations between backward-sampling steps.
        delta: usize,
        /// Number of selection operations to evaluate over.
        #[arg(default_value_t = 100_000)]
        r: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure worker thread pool")?;
    }
    if let Command::ScheduleLimit { delta, r } = cli.command {
        let factor = schedule::periodic_limit(delta, r)?;
        println!("{factor:.6}");
        return Ok(());
    }
    let config_path = cli.config.as_deref().ok_or(ConfigError::NoConfig)?;
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli.out.unwrap_or_else(|| config.output_dir.clone());
    if !out_dir.is_dir() {
        return Err(ConfigError::MissingPath {
            key: "output.dir".into(),
            path: out_dir,
        }
        .into());
    }
    match cli.command {
        Command::Simulate => cmd_simulate(&config, &out_dir),
        Command::Run => cmd_run(&config, &out_dir),
        Command::BenchGrid => cmd_bench_grid(&config, &out_dir),
        Command::VarianceCurve => cmd_variance_curve(&config, &out_dir),
        Command::Oracle => cmd_oracle(&config, &out_dir),
        Command::ScheduleLimit { .. } => unreachable!("handled above"),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    fn degenerate(e: &adasmooth::Error) -> bool {
        match e {
            adasmooth::Error::AllWeightsZero | adasmooth::Error::DegenerateAt { .. } => true,
            adasmooth::Error::ReplicateFailed { source, .. } => degenerate(source),
            _ => false,
        }
    }
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(lib) = cause.downcast_ref::<adasmooth::Error>() {
            if degenerate(lib) {
                return 3;
            }
            if matches!(lib, adasmooth::Error::InvalidParameter(_)) {
                return 2;
            }
        }
    }
    1
}

fn create_output(out_dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = out_dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let block = config.model.simulate.ok_or(ConfigError::Missing {
        key: "model.simulate.n_steps".into(),
    })?;
    let model = config.model.build_params()?;
    let trajectory = model.simulate(block.n_steps, block.seed)?;
    let path = out_dir.join("trajectory.csv");
    trajectory.write_csv_path(&path)?;
    println!(
        "wrote {} time points (seed {}) to {}",
        trajectory.states.len(),
        trajectory.seed,
        path.display()
    );
    Ok(())
}

fn write_run_outputs(out_dir: &Path, record: &RunRecord) -> anyhow::Result<()> {
    let mut diag = create_output(out_dir, "run_diagnostics.csv")?;
    writeln!(
        diag,
        "time,ess,log_total_weight,resampled,backward_triggered,distinct_enoch,backward_trials,elapsed_s"
    )?;
    for step in &record.steps {
        writeln!(
            diag,
            "{},{},{},{},{},{},{},{}",
            step.time,
            step.ess,
            step.log_total_weight,
            step.resampled as u8,
            step.backward_triggered as u8,
            step.distinct_enoch,
            step.backward_trials,
            step.elapsed.as_secs_f64()
        )?;
    }
    let mut est = create_output(out_dir, "run_estimates.csv")?;
    writeln!(est, "time,component,estimate")?;
    for (component, value) in record.initial_estimate.iter().enumerate() {
        writeln!(est, "0,{component},{value}")?;
    }
    for step in &record.steps {
        for (component, value) in step.estimate.iter().enumerate() {
            writeln!(est, "{},{component},{value}", step.time)?;
        }
    }
    Ok(())
}

fn cmd_run(config: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let model = config.model.build()?;
    let functional = config.functional.instance();
    let smoother_config = config.smoother.to_config(config.seed);
    let mut smoother = Smoother::new(
        model.as_path_model(),
        functional.as_ref(),
        config.smoother.particles,
        smoother_config,
    )?;
    let record = smoother.run()?;
    write_run_outputs(out_dir, &record)?;
    let resamplings = record.steps.iter().filter(|s| s.resampled).count();
    let backward = record.steps.iter().filter(|s| s.backward_triggered).count();
    println!(
        "{} steps, {} resamplings, {} backward-sampling steps, final estimate {:?}",
        record.steps.len(),
        resamplings,
        backward,
        record.final_estimate()
    );
    Ok(())
}

fn resolved_checkpoints(config: &RunConfig, model: &ModelInstance) -> Vec<usize> {
    if config.bench.checkpoints.is_empty() {
        vec![model.num_observations().saturating_sub(1)]
    } else {
        config.bench.checkpoints.clone()
    }
}

fn cmd_bench_grid(config: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let model = config.model.build()?;
    let functional = config.functional.instance();
    let checkpoints = resolved_checkpoints(config, &model);
    let mut cells = Vec::new();
    let mut schedule_rows = Vec::new();
    let mut cell_index = 0u64;
    for &n_particles in &config.bench.particle_counts {
        for &alpha in &config.bench.alphas {
            for &beta in &config.bench.betas {
                let mut smoother_config = config.smoother.to_config(config.seed);
                smoother_config.alpha = alpha;
                smoother_config.beta = beta;
                // Disjoint seed blocks per grid cell.
                let base_seed = config.seed.wrapping_add(cell_index.wrapping_mul(1_000_000));
                cell_index += 1;
                let result = bench::run_replicates(
                    model.as_path_model(),
                    functional.as_ref(),
                    &smoother_config,
                    n_particles,
                    config.bench.replicates,
                    &checkpoints,
                    base_seed,
                )?;
                cells.extend(bench::efficiency(&result, alpha, beta, n_particles)?);
                match bench::schedule_stats(&result) {
                    Ok(stats) => schedule_rows.push(ScheduleStatsRow {
                        alpha,
                        beta,
                        n_particles,
                        stats,
                    }),
                    Err(adasmooth::Error::NoResamplingEvents) => {
                        eprintln!(
                            "note: no resampling events for alpha={alpha}, beta={beta}, N={n_particles}"
                        );
                    }
                    Err(e) => return Err(e.into()),
                }
                println!(
                    "bench alpha={alpha} beta={beta} N={n_particles}: replicates done"
                );
            }
        }
    }
    bench::write_efficiency_csv(create_output(out_dir, "efficiency.csv")?, &cells)?;
    bench::write_schedule_stats_csv(create_output(out_dir, "schedule_stats.csv")?, &schedule_rows)?;
    println!(
        "wrote {} efficiency cells to {}",
        cells.len(),
        out_dir.join("efficiency.csv").display()
    );
    Ok(())
}

fn cmd_variance_curve(config: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let model = config.model.build()?;
    let functional = config.functional.instance();
    let checkpoints = resolved_checkpoints(config, &model);
    let mut rows = Vec::new();
    for (index, &variant) in config.bench.variants.iter().enumerate() {
        let mut smoother_config = config.smoother.to_config(config.seed);
        smoother_config.variant = variant;
        let base_seed = config
            .seed
            .wrapping_add((index as u64).wrapping_mul(1_000_000));
        let result = bench::run_replicates(
            model.as_path_model(),
            functional.as_ref(),
            &smoother_config,
            config.smoother.particles,
            config.bench.replicates,
            &checkpoints,
            base_seed,
        )?;
        let name = RunConfig::variant_name(variant);
        for (checkpoint, var_over_n) in bench::variance_growth(&result)? {
            rows.push(VarianceCurveRow {
                variant: name.to_string(),
                checkpoint,
                var_over_n,
            });
        }
        if index == 0 {
            // Raw replicate estimates for the first configured variant.
            bench::write_estimates_csv(create_output(out_dir, "estimates.csv")?, &result)?;
        }
        println!("variance curve for {name}: replicates done");
    }
    bench::write_variance_curve_csv(create_output(out_dir, "variance_curve.csv")?, &rows)?;
    println!("wrote {}", out_dir.join("variance_curve.csv").display());
    Ok(())
}

fn cmd_oracle(config: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    let model = config.model.build()?;
    let lgssm = match &model {
        ModelInstance::Lgssm(m) => m,
        ModelInstance::Sv(_) => {
            return Err(ConfigError::Value {
                key: "model.kind".into(),
                message: "exact smoothing oracle exists only for the lgssm model".into(),
            }
            .into())
        }
    };
    let horizon = lgssm.observations.len() - 1;
    let mut checkpoints = resolved_checkpoints(config, &model);
    if !checkpoints.contains(&horizon) {
        checkpoints.push(horizon);
    }
    let mut oracle_csv = create_output(out_dir, "oracle.csv")?;
    writeln!(oracle_csv, "n,expected_state_sum")?;
    let mut last = 0.0;
    for &checkpoint in &checkpoints {
        let truncated = LinearGaussianTruncation::truncate(lgssm, checkpoint)?;
        let value = oracle::smoothed_state_sum_expectation(&truncated)?;
        writeln!(oracle_csv, "{checkpoint},{value}")?;
        last = value;
    }
    let filter = oracle::kalman_filter(lgssm)?;
    let smoothed = oracle::rts_smoother(lgssm, &filter);
    let mut marginals = create_output(out_dir, "smoothed_marginals.csv")?;
    writeln!(marginals, "time,smoothed_mean,smoothed_var")?;
    for t in 0..=horizon {
        writeln!(
            marginals,
            "{t},{},{}",
            smoothed.smoothed_mean[t], smoothed.smoothed_var[t]
        )?;
    }
    println!("exact smoothed state sum at n={horizon}: {last}");
    Ok(())
}

struct LinearGaussianTruncation;

impl LinearGaussianTruncation {
    fn truncate(
        model: &adasmooth::model::LinearGaussianHmm,
        checkpoint: usize,
    ) -> anyhow::Result<adasmooth::model::LinearGaussianHmm> {
        if checkpoint >= model.observations.len() {
            return Err(ConfigError::Value {
                key: "bench.checkpoints".into(),
                message: format!(
                    "checkpoint {checkpoint} exceeds the final time {}",
                    model.observations.len() - 1
                ),
            }
            .into());
        }
        Ok(model
            .clone()
            .with_observations(model.observations[..=checkpoint].to_vec()))
    }
}
