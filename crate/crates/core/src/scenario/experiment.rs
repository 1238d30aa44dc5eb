//! Paired strategy comparisons and one-parameter sweeps over seeded runs.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::resources::{detect_bottleneck, UtilizationRecord};
use crate::time::SimDuration;

use super::config::{ArrivalProcess, ConfigError, ScenarioConfig, Strategy};
use super::metrics::{durations_of, fmt_f64, summarize, DelayKind, DelayStats, RunReport};
use super::sim::{run_scenario, RunOutcome, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown sweep parameter {0:?}")]
    UnknownParameter(String),
    #[error("at least one run is required")]
    NoRuns,
}

pub fn simulate_strategy(
    config: &ScenarioConfig,
    strategy: Strategy,
) -> Result<RunOutcome, SimError> {
    let mut config = config.clone();
    config.strategy = strategy;
    run_scenario(&config)
}

fn seeded(config: &ScenarioConfig, run: usize) -> ScenarioConfig {
    let mut c = config.clone();
    c.seed = config.seed.wrapping_add(run as u64);
    c
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation; needs two values.
fn std_dev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub kind: DelayKind,
    /// Pooled over all runs.
    pub vcs: DelayStats,
    pub baseline: DelayStats,
    /// Baseline mean minus VCS mean.
    pub difference: Option<f64>,
    /// Baseline mean over VCS mean.
    pub ratio: Option<f64>,
    /// Spread of per-run means; present with two or more runs.
    pub vcs_mean_sd: Option<f64>,
    pub baseline_mean_sd: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PairedRun {
    pub seed: u64,
    pub vcs: RunReport,
    pub baseline: RunReport,
}

#[derive(Debug, Clone)]
pub struct StrategyComparison {
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<PairedRun>,
}

impl StrategyComparison {
    pub fn row(&self, kind: DelayKind) -> &ComparisonRow {
        self.rows
            .iter()
            .find(|r| r.kind == kind)
            .expect("every kind has a row")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let with_sd = self.runs.len() > 1;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "kind",
            "vcs_mean_s",
            "vcs_p95_s",
            "baseline_mean_s",
            "baseline_p95_s",
            "difference_s",
            "ratio",
        ];
        if with_sd {
            header.extend(["vcs_mean_sd_s", "baseline_mean_sd_s"]);
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut cells = vec![
                r.vcs.mean,
                r.vcs.p95,
                r.baseline.mean,
                r.baseline.p95,
                r.difference,
                r.ratio,
            ];
            if with_sd {
                cells.extend([r.vcs_mean_sd, r.baseline_mean_sd]);
            }
            let mut record = vec![r.kind.to_string()];
            record.extend(cells.into_iter().map(cell));
            w.write_record(&record)?;
        }
        w.flush()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Runs both strategies on seeds `seed, seed+1, …` and pools their samples.
pub fn compare_strategies(
    config: &ScenarioConfig,
    n_runs: usize,
) -> Result<StrategyComparison, ExperimentError> {
    if n_runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    config.validate()?;
    let outcomes: Vec<(RunOutcome, RunOutcome)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let c = seeded(config, i);
            Ok((
                simulate_strategy(&c, Strategy::VcsModel)?,
                simulate_strategy(&c, Strategy::Baseline)?,
            ))
        })
        .collect::<Result<_, SimError>>()?;

    let rows = DelayKind::ALL
        .into_iter()
        .map(|kind| {
            let pooled = |pick: fn(&(RunOutcome, RunOutcome)) -> &RunOutcome| {
                let per_run: Vec<Vec<f64>> = outcomes
                    .iter()
                    .map(|o| durations_of(&pick(o).samples, kind))
                    .collect();
                let run_means: Vec<f64> = per_run.iter().filter_map(|v| mean(v)).collect();
                (summarize(&per_run.concat()), std_dev(&run_means))
            };
            let (vcs, vcs_sd) = pooled(|o| &o.0);
            let (baseline, baseline_sd) = pooled(|o| &o.1);
            let (difference, ratio) = match (vcs.mean, baseline.mean) {
                (Some(v), Some(b)) => (Some(b - v), (v != 0.0).then(|| b / v)),
                _ => (None, None),
            };
            ComparisonRow {
                kind,
                vcs,
                baseline,
                difference,
                ratio,
                vcs_mean_sd: if n_runs > 1 { vcs_sd } else { None },
                baseline_mean_sd: if n_runs > 1 { baseline_sd } else { None },
            }
        })
        .collect();
    let runs = outcomes
        .into_iter()
        .enumerate()
        .map(|(i, (v, b))| PairedRun {
            seed: config.seed.wrapping_add(i as u64),
            vcs: v.report,
            baseline: b.report,
        })
        .collect();
    Ok(StrategyComparison { rows, runs })
}

/// A configuration value a sweep can vary. Values are given in canonical
/// units: cases per day for arrival rates, seconds for latencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepParameter {
    ArrivalRate,
    Capacity(String),
    FeedbackLatency,
    ValidationLatency,
    PFlag,
}

impl FromStr for SweepParameter {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "arrival_rate" => SweepParameter::ArrivalRate,
            "feedback_latency" => SweepParameter::FeedbackLatency,
            "validation_latency" => SweepParameter::ValidationLatency,
            "p_flag" => SweepParameter::PFlag,
            _ => match s
                .strip_prefix("capacity:")
                .or_else(|| s.strip_prefix("capacity."))
            {
                Some(name) if !name.is_empty() => SweepParameter::Capacity(name.to_owned()),
                _ => return Err(ExperimentError::UnknownParameter(s.to_owned())),
            },
        })
    }
}

impl SweepParameter {
    pub fn name(&self) -> String {
        match self {
            SweepParameter::ArrivalRate => "arrival_rate".into(),
            SweepParameter::Capacity(r) => format!("capacity:{r}"),
            SweepParameter::FeedbackLatency => "feedback_latency".into(),
            SweepParameter::ValidationLatency => "validation_latency".into(),
            SweepParameter::PFlag => "p_flag".into(),
        }
    }

    /// Copy of `config` with this parameter set to `value`.
    pub fn apply(
        &self,
        config: &ScenarioConfig,
        value: f64,
    ) -> Result<ScenarioConfig, ExperimentError> {
        let mut c = config.clone();
        let invalid = |key: &str, reason: &str| ConfigError::Validation {
            key: key.to_owned(),
            reason: format!("{value}: {reason}"),
        };
        let seconds = |key: &str| {
            SimDuration::from_secs_f64(value)
                .map_err(|_| invalid(key, "not a non-negative duration"))
        };
        match self {
            SweepParameter::ArrivalRate => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(invalid("arrival.rate", "not a non-negative rate").into());
                }
                if !matches!(c.arrival, ArrivalProcess::Poisson { .. }) {
                    return Err(invalid("arrival.rate", "arrivals are an explicit list").into());
                }
                c.arrival = ArrivalProcess::Poisson {
                    rate: value / 86_400.0,
                };
            }
            SweepParameter::Capacity(name) => {
                let key = format!("resources.{name}.capacity");
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(invalid(&key, "not a positive integer").into());
                }
                let spec = c
                    .resources
                    .iter_mut()
                    .find(|r| &r.name == name)
                    .ok_or_else(|| ExperimentError::UnknownParameter(self.name()))?;
                spec.capacity = value as u32;
            }
            SweepParameter::FeedbackLatency => c.latencies.feedback = seconds("feedback_latency")?,
            SweepParameter::ValidationLatency => {
                c.latencies.validation = seconds("validation_latency")?
            }
            SweepParameter::PFlag => c.p_flag = value,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Pooled mean per delay kind, `None` without samples.
    pub delay_means: BTreeMap<DelayKind, Option<f64>>,
    /// Per resource, pooled across runs: utilization is the run average and
    /// mean wait is over all queued requests.
    pub resources: Vec<UtilizationRecord>,
    pub bottlenecks: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let names: Vec<String> = self
            .rows
            .first()
            .map(|r| r.resources.iter().map(|u| u.resource_id.clone()).collect())
            .unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.parameter.name()];
        header.extend(DelayKind::ALL.iter().map(|k| format!("{k}_mean_s")));
        for n in &names {
            header.push(format!("{n}_utilization"));
            header.push(format!("{n}_mean_wait_s"));
        }
        header.push("bottlenecks".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![fmt_f64(row.value)];
            record.extend(
                DelayKind::ALL
                    .iter()
                    .map(|k| cell(row.delay_means.get(k).copied().flatten())),
            );
            for u in &row.resources {
                record.push(fmt_f64(u.utilization));
                record.push(fmt_f64(u.mean_wait));
            }
            record.push(row.bottlenecks.join(";"));
            w.write_record(&record)?;
        }
        w.flush()
    }
}

fn pool_utilization(per_run: &[&[UtilizationRecord]]) -> Vec<UtilizationRecord> {
    let Some(first) = per_run.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|i| {
            let recs: Vec<&UtilizationRecord> = per_run.iter().map(|r| &r[i]).collect();
            let n = recs.len() as f64;
            let queued: usize = recs.iter().map(|r| r.queued_requests).sum();
            let wait_sum: f64 = recs
                .iter()
                .map(|r| r.mean_wait * r.queued_requests as f64)
                .sum();
            UtilizationRecord {
                resource_id: recs[0].resource_id.clone(),
                busy_time: recs.iter().map(|r| r.busy_time).sum::<f64>() / n,
                horizon: recs.iter().map(|r| r.horizon).sum::<f64>() / n,
                utilization: recs.iter().map(|r| r.utilization).sum::<f64>() / n,
                max_queue_len: recs.iter().map(|r| r.max_queue_len).max().unwrap_or(0),
                mean_wait: if queued > 0 {
                    wait_sum / queued as f64
                } else {
                    0.0
                },
                queued_requests: queued,
                grants: recs.iter().map(|r| r.grants).sum(),
            }
        })
        .collect()
}

/// Runs `n_runs` seeds per value, sharing seeds across values so every
/// setting sees the same random draws.
pub fn sensitivity_sweep(
    config: &ScenarioConfig,
    parameter: &SweepParameter,
    values: &[f64],
    n_runs: usize,
) -> Result<Sweep, ExperimentError> {
    if n_runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    let configs = values
        .iter()
        .map(|&v| parameter.apply(config, v))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|v| (0..n_runs).map(move |r| (v, r)))
        .collect();
    let reports: Vec<(RunReport, Vec<super::metrics::DelaySample>)> = jobs
        .into_par_iter()
        .map(|(v, r)| run_scenario(&seeded(&configs[v], r)).map(|o| (o.report, o.samples)))
        .collect::<Result<_, SimError>>()?;

    let rows = values
        .iter()
        .enumerate()
        .map(|(v, &value)| {
            let runs = &reports[v * n_runs..(v + 1) * n_runs];
            let delay_means = DelayKind::ALL
                .into_iter()
                .map(|k| {
                    let all: Vec<f64> = runs.iter().flat_map(|(_, s)| durations_of(s, k)).collect();
                    (k, mean(&all))
                })
                .collect();
            let per_run: Vec<&[UtilizationRecord]> =
                runs.iter().map(|(r, _)| r.utilization.as_slice()).collect();
            let resources = pool_utilization(&per_run);
            let c = &configs[v];
            let bottlenecks = detect_bottleneck(
                &resources,
                c.bottleneck_threshold,
                c.wait_ceiling.as_secs_f64(),
            );
            SweepRow {
                value,
                delay_means,
                resources,
                bottlenecks,
            }
        })
        .collect();
    Ok(Sweep {
        parameter: parameter.clone(),
        rows,
    })
}
