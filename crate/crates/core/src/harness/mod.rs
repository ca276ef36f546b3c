//! End-to-end runs: PB2 training, schedule replay on fresh seeds, greedy
//! evaluation and learning-curve plots, plus everything they write to disk.

mod config;
mod eval;
mod metrics;
mod plot;
mod replay;
mod train;
mod worker;

pub use config::{RunConfig, DEFAULT_INSTANCES};
pub use eval::{evaluate, run_episode, EvalResult};
pub use metrics::{read_metrics, Metrics, MetricsRow, MetricsWriter};
pub use plot::{mean_band, plot_metrics, plot_report, render_svg, Series};
pub use replay::{mean_and_stderr, replay_schedule, CurvePoint, EvalReport, SeedResult, Switch};
pub use train::{
    checkpoint_path, load_config, observation_mode, run_training, RunMeta, TrainOutcome,
    BANDIT_FILE, CHECKPOINT_DIR, CONFIG_FILE, INSTANCES_FILE, META_FILE, METRICS_FILE,
    SCHEDULES_FILE,
};
pub use worker::{EpisodeRecord, ObservationMode, Worker};
