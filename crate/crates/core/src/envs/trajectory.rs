//! CSV trajectory dumps for offline replay.
//!
//! Columns: `step`, one column per state component (the post-step state),
//! `action`, `reward`, `terminated`, `truncated`.

use std::io::Write;

use super::{Action, Environment, StepResult};
use crate::context::Context;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

pub struct TrajectoryRecorder<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> TrajectoryRecorder<W> {
    pub fn new(out: W, state_labels: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["step"];
        header.extend_from_slice(state_labels);
        header.extend_from_slice(&["action", "reward", "terminated", "truncated"]);
        writer.write_record(&header)?;
        Ok(Self { writer })
    }

    pub fn record(&mut self, row: &TrajectoryRow) -> Result<()> {
        let mut fields = vec![row.step.to_string()];
        fields.extend(row.state.iter().map(|v| format!("{v:?}")));
        fields.push(match &row.action {
            Action::Discrete(a) => a.to_string(),
            Action::Continuous(v) => v
                .iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(";"),
        });
        fields.push(format!("{:?}", row.reward));
        fields.push(u8::from(row.terminated).to_string());
        fields.push(u8::from(row.truncated).to_string());
        self.writer.write_record(&fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        self.writer
            .into_inner()
            .map_err(|e| crate::Error::Io(e.into_error()))
    }
}

/// Runs `actions` from a reset and returns every transition. Stops early
/// when the episode ends.
pub fn rollout(
    env: &mut dyn Environment,
    ctx: &Context,
    seed: u64,
    actions: &[Action],
) -> Result<Vec<TrajectoryRow>> {
    env.reset(ctx, seed)?;
    let mut rows = Vec::with_capacity(actions.len());
    for (i, action) in actions.iter().enumerate() {
        let StepResult {
            reward,
            terminated,
            truncated,
            ..
        } = env.step(action)?;
        rows.push(TrajectoryRow {
            step: i as u64 + 1,
            state: env.state_vector(),
            action: action.clone(),
            reward,
            terminated,
            truncated,
        });
        if terminated || truncated {
            break;
        }
    }
    Ok(rows)
}
