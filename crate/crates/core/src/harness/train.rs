use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{MetricsRow, MetricsWriter};
use super::worker::{ObservationMode, Worker};
use crate::error::Result;
use crate::pb2::{self, GenerationRecord, Pb2Run};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SCHEDULES_FILE: &str = "schedules.json";
pub const BANDIT_FILE: &str = "bandit.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const INSTANCES_FILE: &str = "instances.json";
pub const META_FILE: &str = "run_meta.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Facts about a finished run that are not part of its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub env: String,
    pub algorithm: String,
    pub visibility: String,
    pub base_obs_dim: usize,
    pub obs_dim: usize,
    pub generations: usize,
    pub final_scores: Vec<Option<f64>>,
    pub truncated_members: Vec<usize>,
}

pub struct TrainOutcome {
    pub outdir: PathBuf,
    pub run: Pb2Run,
    pub meta: RunMeta,
    pub workers: Vec<Worker>,
}

pub fn checkpoint_path(outdir: &Path, member: usize) -> PathBuf {
    outdir
        .join(CHECKPOINT_DIR)
        .join(format!("member_{member}.ckpt"))
}

pub fn observation_mode(cfg: &RunConfig) -> ObservationMode {
    ObservationMode {
        visibility: cfg.visibility,
        normalize_context: cfg.normalize_context,
    }
}

/// Trains a population under the PB2 scheduler and writes the run
/// directory: configuration, instance set, per-interval metrics, bandit
/// diagnostics, schedules, final checkpoints and run metadata.
pub fn run_training(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let space = cfg.space()?;
    let instances = Arc::new(cfg.instance_set()?);
    let outdir = cfg.outdir.clone();
    fs::create_dir_all(outdir.join(CHECKPOINT_DIR))?;
    fs::write(outdir.join(CONFIG_FILE), serde_json::to_string_pretty(cfg)?)?;
    fs::write(outdir.join(INSTANCES_FILE), instances.to_json()?)?;

    let mode = observation_mode(cfg);
    let mut workers = (0..cfg.population)
        .map(|i| {
            Worker::new(
                cfg.env,
                mode,
                Arc::clone(&instances),
                cfg.hidden_width,
                space.initial(),
                cfg.member_seed(i),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let names: Vec<&str> = space.names().collect();
    let mut metrics = MetricsWriter::new(
        BufWriter::new(File::create(outdir.join(METRICS_FILE))?),
        &names,
    )?;
    let mut bandit = BufWriter::new(File::create(outdir.join(BANDIT_FILE))?);
    writeln!(
        bandit,
        "generation,observations,log_marginal_likelihood,lengthscales,epsilon,noise,signal_var,jitter,degenerate"
    )?;
    let started = Instant::now();
    let record_wallclock = cfg.record_wallclock;

    let observe = |rec: &GenerationRecord, _: &[Worker]| -> Result<()> {
        let wallclock_s = if record_wallclock {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        for (member, score) in rec.scores.iter().enumerate() {
            let Some(score) = score else { continue };
            let hp = if rec.hyperparams.len() == rec.scores.len() {
                &rec.hyperparams[member]
            } else {
                &rec.hyperparams[0]
            };
            metrics.write(&MetricsRow {
                step: rec.step,
                member,
                interval_return: *score,
                hyperparams: hp.clone(),
                wallclock_s,
            })?;
        }
        metrics.flush()?;
        if let Some(d) = &rec.bandit {
            let ls: Vec<String> = d.lengthscales.iter().map(|l| format!("{l:?}")).collect();
            writeln!(
                bandit,
                "{},{},{:?},{},{:?},{:?},{:?},{:?},{}",
                rec.generation,
                d.observations,
                d.log_marginal_likelihood,
                ls.join(";"),
                d.epsilon,
                d.noise,
                d.signal_var,
                d.jitter,
                d.degenerate
            )?;
        }
        Ok(())
    };
    let run = pb2::run(&cfg.pb2(), cfg.algorithm, &space, &mut workers, observe)?;
    metrics.finish()?.flush()?;
    bandit.flush()?;
    drop(bandit);

    run.schedules.save(&outdir.join(SCHEDULES_FILE))?;
    for (i, w) in workers.iter().enumerate() {
        w.learner()
            .checkpoint()
            .save(&checkpoint_path(&outdir, i))?;
    }
    let meta = RunMeta {
        env: cfg.env.to_string(),
        algorithm: cfg.algorithm.to_string(),
        visibility: cfg.visibility.to_string(),
        base_obs_dim: cfg.env.spec().base_obs_dim,
        obs_dim: workers.first().map_or(cfg.obs_dim(), |w| w.obs_dim()),
        generations: run.generations.len(),
        final_scores: run
            .schedules
            .schedules
            .iter()
            .map(|s| s.final_score)
            .collect(),
        truncated_members: run
            .schedules
            .schedules
            .iter()
            .filter(|s| s.truncated)
            .map(|s| s.member)
            .collect(),
    };
    fs::write(outdir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(TrainOutcome {
        outdir,
        run,
        meta,
        workers,
    })
}

/// Reads a run's configuration back.
pub fn load_config(outdir: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(&fs::read_to_string(outdir.join(CONFIG_FILE))?)?;
    cfg.validate()?;
    Ok(cfg)
}
