//! Population-based training with a bandit-driven explore step.
//!
//! Members train in lock-step generations of a fixed number of environment
//! steps. After each generation the bottom quantile copies weights and
//! optimizer state from a top-quantile donor and receives hyperparameters
//! suggested by the time-varying GP bandit, which is fed every member's
//! (interval, normalized hyperparameters, score change) history.

mod schedule;
mod scheduler;
mod space;

pub use schedule::{MemberSchedule, ScheduleEntry, ScheduleSet};
pub use scheduler::{
    bandit_reward, exploit_plan, rank, replacement_count, run, BanditDiagnostics, GenerationRecord,
    Member, Pb2Config, Pb2Run, Replacement,
};
pub use space::{HyperDim, HyperparamSpace};
