use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HyperparamSpace;
use crate::agents::Algorithm;
use crate::error::{Error, Result};

/// One scheduler decision for one member slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Environment steps the member had taken when these hyperparameters
    /// became active.
    pub step: u64,
    pub member: usize,
    pub hyperparams: BTreeMap<String, f64>,
    /// Donor whose weights were copied in, if this entry is an exploit.
    pub parent: Option<usize>,
    /// Score of the interval that ended at `step`; absent for the initial
    /// entry.
    pub score: Option<f64>,
}

/// Ordered entries of one member slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSchedule {
    pub member: usize,
    pub entries: Vec<ScheduleEntry>,
    pub steps_done: u64,
    /// Score of the last completed interval.
    pub final_score: Option<f64>,
    /// The member stopped before the step budget was used up.
    pub truncated: bool,
}

impl MemberSchedule {
    pub fn new(member: usize, initial: BTreeMap<String, f64>) -> Self {
        Self {
            member,
            entries: vec![ScheduleEntry {
                step: 0,
                member,
                hyperparams: initial,
                parent: None,
                score: None,
            }],
            steps_done: 0,
            final_score: None,
            truncated: false,
        }
    }

    /// Hyperparameters of the last entry with `step <= s`.
    pub fn hyperparams_at(&self, s: u64, space: &HyperparamSpace) -> Result<Vec<f64>> {
        let entry = self
            .entries
            .iter()
            .take_while(|e| e.step <= s)
            .last()
            .ok_or_else(|| Error::invalid("schedule has no entry at step 0"))?;
        space.from_map(&entry.hyperparams)
    }

    /// Steps at which the hyperparameter vector changes, starting with
    /// step 0.
    pub fn switch_points(&self, space: &HyperparamSpace) -> Result<Vec<(u64, Vec<f64>)>> {
        let mut out: Vec<(u64, Vec<f64>)> = Vec::new();
        for e in &self.entries {
            let hp = space.from_map(&e.hyperparams)?;
            if out.last().is_none_or(|(_, prev)| *prev != hp) {
                out.push((e.step, hp));
            }
        }
        Ok(out)
    }

    /// Checks ordering, the initial entry and that every point is in the box.
    pub fn validate(&self, space: &HyperparamSpace) -> Result<()> {
        let first = self.entries.first().ok_or_else(|| {
            Error::invalid(format!("member {} has an empty schedule", self.member))
        })?;
        if first.step != 0 || first.parent.is_some() {
            return Err(Error::invalid(
                "schedule must start with an initial entry at step 0",
            ));
        }
        for pair in self.entries.windows(2) {
            if pair[1].step <= pair[0].step {
                return Err(Error::invalid(format!(
                    "schedule steps not increasing: {} then {}",
                    pair[0].step, pair[1].step
                )));
            }
        }
        for e in &self.entries {
            if e.member != self.member {
                return Err(Error::invalid("entry member id differs from its schedule"));
            }
            space.from_map(&e.hyperparams)?;
        }
        Ok(())
    }
}

/// Every member's schedule from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub algorithm: Algorithm,
    pub space: HyperparamSpace,
    pub interval: u64,
    pub total_steps: u64,
    pub seed: u64,
    pub schedules: Vec<MemberSchedule>,
}

impl ScheduleSet {
    pub fn validate(&self) -> Result<()> {
        if HyperparamSpace::for_algorithm(self.algorithm)
            .names()
            .ne(self.space.names())
        {
            return Err(Error::invalid(format!(
                "hyperparameters {:?} do not belong to {}",
                self.space.names().collect::<Vec<_>>(),
                self.algorithm
            )));
        }
        for (i, s) in self.schedules.iter().enumerate() {
            if s.member != i {
                return Err(Error::invalid("schedules must be ordered by member id"));
            }
            s.validate(&self.space)?;
            for e in &s.entries {
                if let Some(p) = e.parent {
                    if p >= self.schedules.len() {
                        return Err(Error::invalid(format!("parent {p} is not a member")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, member: usize) -> Result<&MemberSchedule> {
        self.schedules
            .get(member)
            .ok_or_else(|| Error::invalid(format!("no schedule for member {member}")))
    }

    /// Member with the highest final score, skipping truncated lineages
    /// unless `include_truncated`.
    pub fn best_member(&self, include_truncated: bool) -> Option<usize> {
        self.schedules
            .iter()
            .filter(|s| include_truncated || !s.truncated)
            .filter_map(|s| s.final_score.map(|f| (s.member, f)))
            .fold(None, |best: Option<(usize, f64)>, (m, f)| match best {
                Some((_, bf)) if bf >= f => best,
                _ => Some((m, f)),
            })
            .map(|(m, _)| m)
    }

    /// Ancestral lineage of `member`: the slot's own entries, preceded by
    /// the donor's history up to each exploit step.
    pub fn lineage(&self, member: usize) -> Result<Vec<ScheduleEntry>> {
        let mut out = Vec::new();
        let mut current = member;
        let mut until = u64::MAX;
        loop {
            let s = self.get(current)?;
            let mut part: Vec<ScheduleEntry> = s
                .entries
                .iter()
                .filter(|e| e.step < until)
                .cloned()
                .collect();
            let cut = part.iter().rposition(|e| e.parent.is_some());
            match cut {
                Some(idx) => {
                    let parent = part[idx].parent.expect("checked");
                    until = part[idx].step;
                    out.extend(part.drain(idx..).rev());
                    current = parent;
                }
                None => {
                    out.extend(part.into_iter().rev());
                    break;
                }
            }
        }
        out.reverse();
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(s)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
