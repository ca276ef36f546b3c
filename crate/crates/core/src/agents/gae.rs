use crate::error::{Error, Result};

/// Generalized advantage estimation over one rollout segment.
///
/// `dones[t]` marks that transition `t` ended its episode, so neither the
/// TD target nor the advantage recursion bootstraps across it.
/// `last_value` is the value of the observation following the segment.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::invalid(format!(
            "GAE inputs differ in length: {} rewards, {} values, {} dones",
            n,
            values.len(),
            dones.len()
        )));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid("gamma and lambda must lie in [0, 1]"));
    }
    let mut advantages = vec![0.0; n];
    let mut next_advantage = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_advantage = delta + gamma * lambda * live * next_advantage;
        advantages[t] = next_advantage;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
