use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{evaluate, EvalResult};
use super::train::observation_mode;
use super::worker::Worker;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::pb2::{Member, ScheduleSet};
use crate::rng;

/// Hyperparameters applied at a step during replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Switch {
    pub step: u64,
    pub hyperparams: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    /// Interval score ending at `step`.
    pub score: f64,
}

/// One seed's replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub switches: Vec<Switch>,
    pub eval: EvalResult,
}

/// Results of replaying one member's schedule on fresh seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schedule_id: String,
    pub member: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    /// Mean over seeds of each seed's mean evaluation return.
    pub mean: Option<f64>,
    /// Standard error of `mean` across seeds.
    pub stderr: Option<f64>,
    /// Normal-approximation 95% interval.
    pub ci95: Option<[f64; 2]>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Mean and standard error; the error is zero for a single value.
pub fn mean_and_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Trains a fresh agent per seed, switching hyperparameters exactly where
/// the member's schedule does, then evaluates it greedily for one episode
/// on each training context.
pub fn replay_schedule(
    set: &ScheduleSet,
    member: usize,
    cfg: &RunConfig,
    seeds: &[u64],
) -> Result<EvalReport> {
    set.validate()?;
    if set.algorithm != cfg.algorithm {
        return Err(Error::invalid(format!(
            "schedule was found for {} but the run uses {}",
            set.algorithm, cfg.algorithm
        )));
    }
    if !set.space.names().eq(cfg.space()?.names()) {
        return Err(Error::invalid(
            "schedule hyperparameters do not match the run's space",
        ));
    }
    if seeds.contains(&cfg.seed) {
        return Err(Error::invalid(format!(
            "replay seeds must differ from the training seed {}",
            cfg.seed
        )));
    }
    let schedule = set.get(member)?;
    let total = if schedule.truncated {
        schedule.steps_done
    } else {
        set.total_steps
    };
    let interval = set.interval.max(1);
    let mut bounds: Vec<u64> = (1..=total.div_ceil(interval))
        .map(|k| (k * interval).min(total))
        .collect();
    bounds.extend(
        schedule
            .entries
            .iter()
            .map(|e| e.step)
            .filter(|&s| s > 0 && s < total),
    );
    bounds.sort_unstable();
    bounds.dedup();

    let instances = Arc::new(cfg.instance_set()?);
    let mode = observation_mode(cfg);
    let run_seed = |seed: u64| -> Result<SeedResult> {
        let initial = schedule.hyperparams_at(0, &set.space)?;
        let mut worker = Worker::new(
            cfg.env,
            mode,
            Arc::clone(&instances),
            cfg.hidden_width,
            &initial,
            rng::derive_seed(seed, "replay", 0),
        )?;
        let mut switches = vec![Switch {
            step: 0,
            hyperparams: initial,
        }];
        let mut curve = Vec::new();
        let mut at = 0;
        for &b in &bounds {
            let hp = schedule.hyperparams_at(at, &set.space)?;
            if hp != worker.hyperparams() {
                worker.set_hyperparams(&hp)?;
                switches.push(Switch {
                    step: at,
                    hyperparams: hp,
                });
            }
            let score = worker.train(b - at)?;
            curve.push(CurvePoint { step: b, score });
            at = b;
        }
        let eval = evaluate(
            worker.learner(),
            cfg.env,
            mode,
            &instances,
            1,
            rng::derive_seed(seed, "final-eval", 0),
            Execution::Sequential,
        )?;
        Ok(SeedResult {
            seed,
            curve,
            switches,
            eval,
        })
    };
    let per_seed = cfg
        .execution
        .map(seeds, |_, &s| run_seed(s))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = per_seed.iter().map(|r| r.eval.mean).collect();
    let agg = mean_and_stderr(&means);
    Ok(EvalReport {
        schedule_id: format!("{}-seed{}-member{}", set.algorithm, set.seed, member),
        member,
        seeds: seeds.to_vec(),
        per_seed,
        mean: agg.map(|a| a.0),
        stderr: agg.map(|a| a.1),
        ci95: agg.map(|(m, se)| [m - 1.96 * se, m + 1.96 * se]),
    })
}
