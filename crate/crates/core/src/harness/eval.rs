use serde::{Deserialize, Serialize};

use super::worker::ObservationMode;
use crate::agents::Learner;
use crate::context::{Context, InstanceSet};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::rng;

/// Returns of a frozen agent on every context of an instance set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    /// Mean return per context, in instance-set order.
    pub per_instance: Vec<f64>,
    pub episodes_per_instance: usize,
}

/// Undiscounted return of one greedy episode.
pub fn run_episode(
    learner: &dyn Learner,
    kind: EnvKind,
    mode: ObservationMode,
    ctx: &Context,
    seed: u64,
) -> Result<f64> {
    let mut env = kind.make();
    let mut obs = mode.augment(kind, &env.reset(ctx, seed)?, ctx);
    let mut total = 0.0;
    loop {
        let action = learner.act_greedy(&obs)?;
        let r = env.step(&action)?;
        total += r.reward;
        if !total.is_finite() {
            return Err(Error::numeric("evaluation return is not finite"));
        }
        if r.done() {
            return Ok(total);
        }
        obs = mode.augment(kind, &r.obs, ctx);
    }
}

/// Evaluates `learner` without exploration on every context of
/// `instances`, `episodes` times each. Episode `j` on context `i` uses the
/// reset seed derived from `(seed, i * episodes + j)`.
pub fn evaluate(
    learner: &dyn Learner,
    kind: EnvKind,
    mode: ObservationMode,
    instances: &InstanceSet,
    episodes: usize,
    seed: u64,
    execution: Execution,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::invalid(
            "evaluation needs at least one episode per context",
        ));
    }
    let per_instance = execution
        .map(instances.contexts(), |i, ctx| -> Result<f64> {
            let mut sum = 0.0;
            for j in 0..episodes {
                let s = rng::derive_seed(seed, "eval", (i * episodes + j) as u64);
                sum += run_episode(learner, kind, mode, ctx, s)?;
            }
            Ok(sum / episodes as f64)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_instance.iter().sum::<f64>() / per_instance.len() as f64;
    Ok(EvalResult {
        mean,
        per_instance,
        episodes_per_instance: episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::make_learner;
    use crate::context::sample_instance_set;
    use crate::pb2::HyperparamSpace;

    #[test]
    fn frozen_agent_is_repeatable() {
        let kind = EnvKind::Acrobot;
        let (f, mu, sigma) = kind.varied_feature();
        let set = sample_instance_set(&f, mu, sigma, 3, 0).unwrap();
        let l = make_learner(
            crate::agents::Algorithm::default_for(kind),
            &kind.spec(),
            6,
            8,
            HyperparamSpace::ppo().initial(),
            1,
        )
        .unwrap();
        let a = evaluate(
            l.as_ref(),
            kind,
            ObservationMode::hidden(),
            &set,
            2,
            9,
            Execution::Sequential,
        )
        .unwrap();
        let b = evaluate(
            l.as_ref(),
            kind,
            ObservationMode::hidden(),
            &set,
            2,
            9,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(a, b);
        let mean = a.per_instance.iter().sum::<f64>() / 3.0;
        assert!((a.mean - mean).abs() < 1e-12);
        assert!(a.per_instance.iter().all(|&r| (-500.0..=0.0).contains(&r)));
    }
}
