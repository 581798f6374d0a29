use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Outcome, TwinTrace};
use super::metrics::{action_delay, first_action_after, ActionDelay, Delay};
use crate::bridge::{BridgeAction, BridgeConfig, Mode};
use crate::error::{Error, Result};

/// Delay bound used for the within-bound fraction of MA events.
pub const DELAY_BOUND: usize = 5;
/// Step after which the first MA is reported.
pub const LATE_MA_AFTER: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    pub re_count: usize,
    pub ro_count: usize,
    pub ma_steps: Vec<usize>,
    pub first_ma_after_40: Option<usize>,
    pub mean_delta_g: f64,
    pub delays: Vec<ActionDelay>,
}

impl EpisodeSummary {
    pub fn from_trace(trace: &TwinTrace) -> Self {
        let n = trace.len().max(1) as f64;
        Self {
            seed: trace.config.seed,
            outcome: trace.outcome,
            steps: trace.len(),
            re_count: trace.count(BridgeAction::RE),
            ro_count: trace.count(BridgeAction::RO),
            ma_steps: trace.steps_with(BridgeAction::MA),
            first_ma_after_40: first_action_after(trace, BridgeAction::MA, LATE_MA_AFTER),
            mean_delta_g: trace.steps.iter().map(|s| s.delta_g).sum::<f64>() / n,
            delays: action_delay(trace),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_steps: usize,
    pub seconds: f64,
    pub ms_per_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub mode: Mode,
    pub seed_base: u64,
    pub n_episodes: usize,
    pub failures: usize,
    pub failure_steps: Vec<usize>,
    pub re_total: usize,
    pub ma_events: usize,
    pub ma_events_within_bound: usize,
    pub ma_within_bound_fraction: Option<f64>,
    pub mean_ma_delay: Option<f64>,
    pub max_ma_delay: Option<usize>,
    pub mean_ro_delay: Option<f64>,
    pub max_ro_delay: Option<usize>,
    pub mean_delta_g: f64,
    pub episodes: Vec<EpisodeSummary>,
    /// Wall-clock figures; the only part of a report that varies between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

fn delay_stats(delays: &[&ActionDelay]) -> (Option<f64>, Option<usize>) {
    let steps: Vec<usize> = delays
        .iter()
        .filter_map(|d| match d.delay {
            Delay::Steps { steps } => Some(steps),
            _ => None,
        })
        .collect();
    if steps.is_empty() {
        return (None, None);
    }
    let mean = steps.iter().sum::<usize>() as f64 / steps.len() as f64;
    (Some(mean), steps.iter().max().copied())
}

impl ClusterReport {
    pub fn from_traces(
        cfg: &BridgeConfig,
        seed_base: u64,
        traces: &[TwinTrace],
        elapsed: Option<Duration>,
    ) -> Self {
        let episodes: Vec<EpisodeSummary> = traces.iter().map(EpisodeSummary::from_trace).collect();
        let failure_steps: Vec<usize> = episodes
            .iter()
            .filter_map(|e| match e.outcome {
                Outcome::Failed { at_step } => Some(at_step),
                Outcome::Completed => None,
            })
            .collect();
        let all: Vec<&ActionDelay> = episodes.iter().flat_map(|e| &e.delays).collect();
        let ma: Vec<&ActionDelay> = all
            .iter()
            .copied()
            .filter(|d| d.action == BridgeAction::MA)
            .collect();
        let ro: Vec<&ActionDelay> = all
            .iter()
            .copied()
            .filter(|d| d.action == BridgeAction::RO)
            .collect();
        let judged: Vec<bool> = ma.iter().filter_map(|d| d.within(DELAY_BOUND)).collect();
        let within = judged.iter().filter(|&&w| w).count();
        let (mean_ma_delay, max_ma_delay) = delay_stats(&ma);
        let (mean_ro_delay, max_ro_delay) = delay_stats(&ro);
        let total_steps: usize = episodes.iter().map(|e| e.steps).sum();
        let sum_dg: f64 = traces
            .iter()
            .flat_map(|t| &t.steps)
            .map(|s| s.delta_g)
            .sum();
        Self {
            mode: cfg.mode,
            seed_base,
            n_episodes: traces.len(),
            failures: failure_steps.len(),
            failure_steps,
            re_total: episodes.iter().map(|e| e.re_count).sum(),
            ma_events: judged.len(),
            ma_events_within_bound: within,
            ma_within_bound_fraction: (!judged.is_empty())
                .then(|| within as f64 / judged.len() as f64),
            mean_ma_delay,
            max_ma_delay,
            mean_ro_delay,
            max_ro_delay,
            mean_delta_g: if total_steps == 0 {
                0.0
            } else {
                sum_dg / total_steps as f64
            },
            episodes,
            timing: elapsed.map(|e| Timing {
                total_steps,
                seconds: e.as_secs_f64(),
                ms_per_step: if total_steps == 0 {
                    0.0
                } else {
                    e.as_secs_f64() * 1e3 / total_steps as f64
                },
            }),
        }
    }

    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }
}

/// Runs `n` episodes with seeds `seed_base + i`, in parallel, aggregated in seed order.
pub fn run_cluster_with_traces(
    cfg: &BridgeConfig,
    n: usize,
    seed_base: u64,
) -> Result<(ClusterReport, Vec<TwinTrace>)> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "cluster needs at least one episode".into(),
        ));
    }
    cfg.validate()?;
    let start = Instant::now();
    let traces = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            run_episode(&BridgeConfig {
                seed: seed_base + i,
                ..cfg.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ClusterReport::from_traces(cfg, seed_base, &traces, Some(start.elapsed()));
    Ok((report, traces))
}

pub fn run_cluster(cfg: &BridgeConfig, n: usize, seed_base: u64) -> Result<ClusterReport> {
    Ok(run_cluster_with_traces(cfg, n, seed_base)?.0)
}
