//! Replicated-run harness: efficiency grids, variance-growth curves, and
//! schedule statistics over independent smoothing runs.
//!
//! Replicates share one observation record and differ only in the seed
//! (`base_seed + replicate`). They run concurrently; aggregation is a
//! deterministic reduction over the replicate index, so results do not
//! depend on scheduling. Wall time covers the smoothing loop only.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::AdditiveFunctional;
use crate::model::PathModel;
use crate::smoother::{Smoother, SmootherConfig};

/// Per-replicate resampling and backward-sampling indicator sequences.
#[derive(Debug, Clone)]
pub struct ScheduleTrace {
    pub resampled: Vec<bool>,
    pub backward: Vec<bool>,
}

/// Raw harness output: estimates indexed by replicate × checkpoint ×
/// component, plus wall times and schedule traces per replicate.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub checkpoints: Vec<usize>,
    pub estimates: Vec<Vec<Vec<f64>>>,
    pub wall_times: Vec<Duration>,
    pub traces: Vec<ScheduleTrace>,
}

impl BenchResult {
    pub fn replicates(&self) -> usize {
        self.estimates.len()
    }
}

/// One cell of the efficiency grid:
/// `efficiency = 1 / (√N · sample variance · mean wall time)`.
#[derive(Debug, Clone)]
pub struct EfficiencyCell {
    pub alpha: f64,
    pub beta: f64,
    pub n_particles: usize,
    pub checkpoint: usize,
    pub variance: f64,
    pub mean_time: Duration,
    pub efficiency: f64,
}

/// Aggregated schedule behaviour: the mean time-step gap between
/// consecutive resampling operations, and the mean number of selection
/// operations per backward-sampling interval (1.0 when every resampling
/// triggers backward sampling; `None` without two backward events).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStats {
    pub mean_resample_gap: f64,
    pub mean_selections_per_backward: Option<f64>,
}

/// Run `replicates` independent smoothing passes over the model's
/// observation record, recording the estimate at every checkpoint time.
pub fn run_replicates<M, F>(
    model: &M,
    functional: &F,
    config: &SmootherConfig,
    n_particles: usize,
    replicates: usize,
    checkpoints: &[usize],
    base_seed: u64,
) -> Result<BenchResult>
where
    M: PathModel + Sync + ?Sized,
    F: AdditiveFunctional + Sync + ?Sized,
{
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let horizon = model.num_observations().saturating_sub(1);
    for &c in checkpoints {
        if c > horizon {
            return Err(Error::InvalidParameter(format!(
                "checkpoint {c} exceeds the final time {horizon}"
            )));
        }
    }
    let outcomes: Vec<Result<(Vec<Vec<f64>>, Duration, ScheduleTrace)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let cfg = SmootherConfig {
                seed: base_seed.wrapping_add(r as u64),
                ..config.clone()
            };
            let started = Instant::now();
            let mut smoother = Smoother::new(model, functional, n_particles, cfg)?;
            let record = smoother.run()?;
            let elapsed = started.elapsed();
            let estimates = checkpoints
                .iter()
                .map(|&c| record.estimate_at(c).expect("checkpoint validated").to_vec())
                .collect();
            let trace = ScheduleTrace {
                resampled: record.resampling_trace(),
                backward: record.backward_trace(),
            };
            Ok((estimates, elapsed, trace))
        })
        .collect();

    let mut result = BenchResult {
        checkpoints: checkpoints.to_vec(),
        estimates: Vec::with_capacity(replicates),
        wall_times: Vec::with_capacity(replicates),
        traces: Vec::with_capacity(replicates),
    };
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let (estimates, elapsed, trace) = outcome.map_err(|e| Error::ReplicateFailed {
            index,
            source: Box::new(e),
        })?;
        result.estimates.push(estimates);
        result.wall_times.push(elapsed);
        result.traces.push(trace);
    }
    Ok(result)
}

fn unbiased_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Efficiency per checkpoint, computed on the first functional component.
pub fn efficiency(
    result: &BenchResult,
    alpha: f64,
    beta: f64,
    n_particles: usize,
) -> Result<Vec<EfficiencyCell>> {
    if result.replicates() < 2 {
        return Err(Error::NotEnoughReplicates {
            got: result.replicates(),
        });
    }
    let mean_time = result
        .wall_times
        .iter()
        .sum::<Duration>()
        .div_f64(result.replicates() as f64);
    let secs = mean_time.as_secs_f64();
    let cells = result
        .checkpoints
        .iter()
        .enumerate()
        .map(|(ci, &checkpoint)| {
            let values: Vec<f64> = result.estimates.iter().map(|rep| rep[ci][0]).collect();
            let variance = unbiased_variance(&values);
            let efficiency = if variance == 0.0 {
                f64::INFINITY
            } else {
                1.0 / ((n_particles as f64).sqrt() * variance * secs)
            };
            EfficiencyCell {
                alpha,
                beta,
                n_particles,
                checkpoint,
                variance,
                mean_time,
                efficiency,
            }
        })
        .collect();
    Ok(cells)
}

/// Time-normalized variance `var(checkpoint) / checkpoint` per checkpoint,
/// on the first functional component.
pub fn variance_growth(result: &BenchResult) -> Result<Vec<(usize, f64)>> {
    if result.replicates() < 2 {
        return Err(Error::NotEnoughReplicates {
            got: result.replicates(),
        });
    }
    result
        .checkpoints
        .iter()
        .enumerate()
        .map(|(ci, &checkpoint)| {
            if checkpoint == 0 {
                return Err(Error::InvalidParameter(
                    "variance growth is undefined at checkpoint 0".into(),
                ));
            }
            let values: Vec<f64> = result.estimates.iter().map(|rep| rep[ci][0]).collect();
            Ok((checkpoint, unbiased_variance(&values) / checkpoint as f64))
        })
        .collect()
}

/// Pool schedule statistics over every replicate trace.
pub fn schedule_stats(result: &BenchResult) -> Result<ScheduleStats> {
    let mut gaps = Vec::new();
    let mut selections = Vec::new();
    for trace in &result.traces {
        let resample_times: Vec<usize> = trace
            .resampled
            .iter()
            .enumerate()
            .filter_map(|(t, &r)| r.then_some(t))
            .collect();
        for w in resample_times.windows(2) {
            gaps.push((w[1] - w[0]) as f64);
        }
        let backward_times: Vec<usize> = trace
            .backward
            .iter()
            .enumerate()
            .filter_map(|(t, &e)| e.then_some(t))
            .collect();
        for w in backward_times.windows(2) {
            let between = trace.resampled[w[0] + 1..w[1]]
                .iter()
                .filter(|&&r| r)
                .count();
            selections.push(between as f64 + 1.0);
        }
    }
    if gaps.is_empty() {
        return Err(Error::NoResamplingEvents);
    }
    let mean_resample_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let mean_selections_per_backward = if selections.is_empty() {
        None
    } else {
        Some(selections.iter().sum::<f64>() / selections.len() as f64)
    };
    Ok(ScheduleStats {
        mean_resample_gap,
        mean_selections_per_backward,
    })
}

/// Row of `variance_curve.csv`.
#[derive(Debug, Clone)]
pub struct VarianceCurveRow {
    pub variant: String,
    pub checkpoint: usize,
    pub var_over_n: f64,
}

/// Row of `schedule_stats.csv`.
#[derive(Debug, Clone)]
pub struct ScheduleStatsRow {
    pub alpha: f64,
    pub beta: f64,
    pub n_particles: usize,
    pub stats: ScheduleStats,
}

pub fn write_efficiency_csv<W: Write>(mut w: W, cells: &[EfficiencyCell]) -> std::io::Result<()> {
    writeln!(w, "alpha,beta,N,checkpoint,variance,mean_time_s,efficiency")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            c.alpha,
            c.beta,
            c.n_particles,
            c.checkpoint,
            c.variance,
            c.mean_time.as_secs_f64(),
            c.efficiency
        )?;
    }
    Ok(())
}

pub fn write_variance_curve_csv<W: Write>(
    mut w: W,
    rows: &[VarianceCurveRow],
) -> std::io::Result<()> {
    writeln!(w, "variant,n,var_over_n")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.variant, r.checkpoint, r.var_over_n)?;
    }
    Ok(())
}

pub fn write_schedule_stats_csv<W: Write>(
    mut w: W,
    rows: &[ScheduleStatsRow],
) -> std::io::Result<()> {
    writeln!(w, "alpha,beta,N,mean_resample_gap,mean_selections_per_backward")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.alpha,
            r.beta,
            r.n_particles,
            r.stats.mean_resample_gap,
            r.stats
                .mean_selections_per_backward
                .map_or_else(|| "nan".to_string(), |v| v.to_string())
        )?;
    }
    Ok(())
}

/// Long-format estimates, one row per (replicate, checkpoint, component),
/// with the √n-normalized value alongside the raw one.
pub fn write_estimates_csv<W: Write>(mut w: W, result: &BenchResult) -> std::io::Result<()> {
    writeln!(w, "replicate,checkpoint,component,estimate,estimate_over_sqrt_n")?;
    for (r, rep) in result.estimates.iter().enumerate() {
        for (ci, values) in rep.iter().enumerate() {
            let checkpoint = result.checkpoints[ci];
            let scale = if checkpoint == 0 {
                1.0
            } else {
                (checkpoint as f64).sqrt()
            };
            for (component, &value) in values.iter().enumerate() {
                writeln!(w, "{r},{checkpoint},{component},{value},{}", value / scale)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::StateSumFunctional;
    use crate::model::LinearGaussianHmm;
    use crate::smoother::SmootherVariant;
    use approx::assert_relative_eq;

    fn synthetic_result(checkpoints: Vec<usize>, estimates: Vec<Vec<f64>>, secs: f64) -> BenchResult {
        // estimates: replicate × checkpoint, single component
        let reps = estimates.len();
        BenchResult {
            checkpoints,
            estimates: estimates
                .into_iter()
                .map(|row| row.into_iter().map(|v| vec![v]).collect())
                .collect(),
            wall_times: vec![Duration::from_secs_f64(secs); reps],
            traces: vec![
                ScheduleTrace {
                    resampled: vec![true],
                    backward: vec![false],
                };
                reps
            ],
        }
    }

    #[test]
    fn efficiency_definition() {
        // variance 0.5, mean time 2 s, N = 100 → 1/(10·0.5·2) = 0.1
        let result = synthetic_result(vec![500], vec![vec![1.0], vec![2.0]], 2.0);
        let cells = efficiency(&result, 0.6, 0.5, 100).unwrap();
        assert_relative_eq!(cells[0].variance, 0.5, epsilon = 1e-12);
        assert_relative_eq!(cells[0].efficiency, 0.1, epsilon = 1e-12);

        let slower = synthetic_result(vec![500], vec![vec![1.0], vec![2.0]], 4.0);
        let halved = efficiency(&slower, 0.6, 0.5, 100).unwrap();
        assert_relative_eq!(halved[0].efficiency, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn efficiency_requires_two_replicates() {
        let result = synthetic_result(vec![10], vec![vec![1.0]], 1.0);
        assert!(matches!(
            efficiency(&result, 0.6, 0.5, 100),
            Err(Error::NotEnoughReplicates { got: 1 })
        ));
    }

    #[test]
    fn zero_variance_flags_infinite_efficiency() {
        let result = synthetic_result(vec![10], vec![vec![1.5], vec![1.5]], 1.0);
        let cells = efficiency(&result, 0.6, 0.5, 100).unwrap();
        assert!(cells[0].efficiency.is_infinite());
    }

    #[test]
    fn variance_growth_shapes() {
        // Constant estimates → zero curve.
        let flat = synthetic_result(vec![10, 40], vec![vec![3.0, 3.0], vec![3.0, 3.0]], 1.0);
        for (_, v) in variance_growth(&flat).unwrap() {
            assert_eq!(v, 0.0);
        }
        // var(n) = c·n → flat curve at c.
        let c = 0.3;
        let linear = synthetic_result(
            vec![10, 40],
            vec![
                vec![(c * 10.0f64 / 2.0).sqrt(), (c * 40.0f64 / 2.0).sqrt()],
                vec![-(c * 10.0f64 / 2.0).sqrt(), -(c * 40.0f64 / 2.0).sqrt()],
            ],
            1.0,
        );
        for (_, v) in variance_growth(&linear).unwrap() {
            assert_relative_eq!(v, c, epsilon = 1e-12);
        }
        // var(n) = c·n² → linearly growing curve.
        let quad = synthetic_result(
            vec![10, 40],
            vec![
                vec![(c / 2.0f64).sqrt() * 10.0, (c / 2.0f64).sqrt() * 40.0],
                vec![-(c / 2.0f64).sqrt() * 10.0, -(c / 2.0f64).sqrt() * 40.0],
            ],
            1.0,
        );
        let rows = variance_growth(&quad).unwrap();
        assert_relative_eq!(rows[0].1, c * 10.0, epsilon = 1e-12);
        assert_relative_eq!(rows[1].1, c * 40.0, epsilon = 1e-12);
    }

    #[test]
    fn schedule_stats_of_constructed_traces() {
        let mut result = synthetic_result(vec![1], vec![vec![0.0], vec![0.0]], 1.0);
        // Every step resamples and triggers.
        result.traces = vec![ScheduleTrace {
            resampled: vec![true; 6],
            backward: vec![true; 6],
        }];
        let stats = schedule_stats(&result).unwrap();
        assert_eq!(stats.mean_resample_gap, 1.0);
        assert_eq!(stats.mean_selections_per_backward, Some(1.0));

        // Pattern (1,0,0,1,0,0,…) → mean gap 3.
        result.traces = vec![ScheduleTrace {
            resampled: (0..12).map(|t| t % 3 == 0).collect(),
            backward: vec![false; 12],
        }];
        let stats = schedule_stats(&result).unwrap();
        assert_eq!(stats.mean_resample_gap, 3.0);
        assert_eq!(stats.mean_selections_per_backward, None);

        // Backward every second resampling → 2 selections per interval.
        result.traces = vec![ScheduleTrace {
            resampled: (0..12).map(|t| t % 2 == 0).collect(),
            backward: (0..12).map(|t| t % 4 == 0).collect(),
        }];
        let stats = schedule_stats(&result).unwrap();
        assert_eq!(stats.mean_selections_per_backward, Some(2.0));

        result.traces = vec![ScheduleTrace {
            resampled: vec![false; 5],
            backward: vec![false; 5],
        }];
        assert!(matches!(schedule_stats(&result), Err(Error::NoResamplingEvents)));
    }

    fn small_model() -> LinearGaussianHmm {
        let base = LinearGaussianHmm::new(0.7, 1.0, 0.2, 1.0).unwrap();
        let traj = base.simulate(41, 1234).unwrap();
        base.with_observations(traj.observations)
    }

    #[test]
    fn replicates_are_seed_isolated_and_order_independent() {
        let model = small_model();
        let config = SmootherConfig::new(SmootherVariant::AdaSmooth);
        let result = run_replicates(&model, &StateSumFunctional, &config, 30, 4, &[20, 40], 700)
            .unwrap();
        // Rerunning the same grid reproduces the estimates bit for bit.
        let again = run_replicates(&model, &StateSumFunctional, &config, 30, 4, &[20, 40], 700)
            .unwrap();
        assert_eq!(result.estimates, again.estimates);
        // Running the seeds one by one, in reverse order, gives the same content.
        for r in (0..4usize).rev() {
            let cfg = SmootherConfig {
                seed: 700 + r as u64,
                ..config.clone()
            };
            let mut smoother = Smoother::new(&model, &StateSumFunctional, 30, cfg).unwrap();
            let record = smoother.run().unwrap();
            assert_eq!(result.estimates[r][0], record.estimate_at(20).unwrap().to_vec());
            assert_eq!(result.estimates[r][1], record.estimate_at(40).unwrap().to_vec());
        }
    }

    #[test]
    fn systematic_selection_with_rare_backward_sampling() {
        // alpha = 1 resamples every step; beta = 0.1 lets the genealogy thin
        // out for many selections before a backward step fires.
        use crate::model::StochasticVolatilityModel;
        let base = StochasticVolatilityModel::new(0.975, 0.641, 0.165, -0.1).unwrap();
        let traj = base.simulate(2001, 99).unwrap();
        let model = base.with_observations(traj.observations);
        let mut config = SmootherConfig::new(SmootherVariant::AdaSmooth);
        config.alpha = 1.0;
        config.beta = 0.1;
        let result =
            run_replicates(&model, &StateSumFunctional, &config, 100, 1, &[2000], 5).unwrap();
        let stats = schedule_stats(&result).unwrap();
        assert_eq!(stats.mean_resample_gap, 1.0);
        let selections = stats.mean_selections_per_backward.unwrap();
        assert!(
            (5.0..40.0).contains(&selections),
            "selections per backward = {selections}"
        );
    }

    #[test]
    fn checkpoints_are_validated() {
        let model = small_model();
        let config = SmootherConfig::new(SmootherVariant::PoorMan);
        assert!(run_replicates(&model, &StateSumFunctional, &config, 10, 2, &[100], 1).is_err());
    }

    #[test]
    fn csv_writers_produce_expected_headers() {
        let result = synthetic_result(vec![10], vec![vec![1.0], vec![2.0]], 2.0);
        let cells = efficiency(&result, 0.6, 0.5, 100).unwrap();
        let mut buf = Vec::new();
        write_efficiency_csv(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha,beta,N,checkpoint,variance,mean_time_s,efficiency\n"));
        assert!(text.contains("0.6,0.5,100,10,"));

        let mut buf = Vec::new();
        write_estimates_csv(&mut buf, &result).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,10,0,1,"));
    }
}
