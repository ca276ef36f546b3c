use std::sync::{Arc, Mutex};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::schedule::{MemberSchedule, ScheduleEntry, ScheduleSet};
use super::HyperparamSpace;
use crate::agents::{Algorithm, Checkpoint};
use crate::bandit::{suggest, AcquisitionConfig, GpModel, Observation};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::rng::{self, Rng};

/// Something the scheduler can train for a while, score, copy and retune.
pub trait Member: Send {
    /// Trains for `steps` environment steps and returns the interval score.
    fn train(&mut self, steps: u64) -> Result<f64>;

    fn hyperparams(&self) -> Vec<f64>;

    fn set_hyperparams(&mut self, hp: &[f64]) -> Result<()>;

    fn checkpoint(&self) -> Checkpoint;

    fn load_state(&mut self, ckpt: &Checkpoint) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pb2Config {
    pub population: usize,
    /// Environment steps per member between perturbation events.
    pub interval: u64,
    /// Fraction of the population replaced at each event.
    pub quantile: f64,
    /// Step budget per member.
    pub total_steps: u64,
    pub seed: u64,
    pub acquisition: AcquisitionConfig,
    pub execution: Execution,
    /// Let members hit their events independently instead of waiting for
    /// the whole population. Not reproducible.
    pub asynchronous: bool,
}

impl Default for Pb2Config {
    fn default() -> Self {
        Self {
            population: 8,
            interval: 4096,
            quantile: 0.25,
            total_steps: 4096 * 10,
            seed: 0,
            acquisition: AcquisitionConfig::default(),
            execution: Execution::default(),
            asynchronous: false,
        }
    }
}

impl Pb2Config {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::config("population needs at least 2 members"));
        }
        if !(self.quantile > 0.0 && self.quantile <= 0.5) {
            return Err(Error::config(format!(
                "quantile {} outside (0, 0.5]",
                self.quantile
            )));
        }
        if self.interval == 0 {
            return Err(Error::config(
                "perturbation interval must be at least 1 step",
            ));
        }
        Ok(())
    }

    /// Number of intervals each member trains for; the last may be short.
    pub fn generations(&self) -> u64 {
        self.total_steps.div_ceil(self.interval)
    }
}

/// Members replaced at one event: `min(ceil(q N), floor(N / 2))`.
pub fn replacement_count(n: usize, quantile: f64) -> usize {
    ((quantile * n as f64 - 1e-12).ceil().max(0.0) as usize).min(n / 2)
}

/// Member ids ordered from best to worst score; ties go to the lower id and
/// non-finite scores rank last.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b)));
    order
}

/// Pairs each bottom-quantile member with a donor drawn uniformly from the
/// top quantile, in ascending order of the replaced member's id.
pub fn exploit_plan(scores: &[f64], quantile: f64, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    if scores.len() < 2 {
        return Err(Error::config("perturbation needs at least 2 members"));
    }
    let k = replacement_count(scores.len(), quantile);
    let order = rank(scores);
    let top = &order[..k];
    let mut bottom: Vec<usize> = order[order.len() - k..].to_vec();
    bottom.sort_unstable();
    Ok(bottom
        .into_iter()
        .map(|m| (m, top[rng.random_range(0..k)]))
        .collect())
}

/// Reward the bandit sees for one interval: the change in score.
pub fn bandit_reward(score: f64, previous: Option<f64>) -> f64 {
    score - previous.unwrap_or(0.0)
}

/// Kernel fit of one explore step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditDiagnostics {
    pub observations: usize,
    pub log_marginal_likelihood: f64,
    pub lengthscales: Vec<f64>,
    pub epsilon: f64,
    pub noise: f64,
    pub signal_var: f64,
    pub jitter: f64,
    pub degenerate: bool,
}

impl BanditDiagnostics {
    fn of(model: &GpModel) -> Self {
        let p = model.params();
        Self {
            observations: model.len(),
            log_marginal_likelihood: model.log_marginal_likelihood(),
            lengthscales: p.lengthscales.clone(),
            epsilon: p.epsilon,
            noise: p.noise,
            signal_var: p.signal_var,
            jitter: model.jitter(),
            degenerate: model.is_degenerate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub member: usize,
    pub donor: usize,
    pub hyperparams: Vec<f64>,
}

/// What happened in one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Steps per member at the end of the generation.
    pub step: u64,
    /// Interval score per member; `None` for members that have stopped.
    pub scores: Vec<Option<f64>>,
    /// Hyperparameters each member trained with during the interval.
    pub hyperparams: Vec<Vec<f64>>,
    pub replacements: Vec<Replacement>,
    pub bandit: Option<BanditDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pb2Run {
    pub schedules: ScheduleSet,
    pub generations: Vec<GenerationRecord>,
}

/// Population state owned by the scheduler.
struct State {
    space: HyperparamSpace,
    quantile: f64,
    acquisition: AcquisitionConfig,
    rng: Rng,
    observations: Vec<Observation>,
    /// Score of the previous interval along each member's current lineage.
    previous: Vec<Option<f64>>,
    latest: Vec<Option<f64>>,
    active: Vec<bool>,
    schedules: Vec<MemberSchedule>,
}

impl State {
    fn new(cfg: &Pb2Config, space: &HyperparamSpace) -> Self {
        let n = cfg.population;
        Self {
            space: space.clone(),
            quantile: cfg.quantile,
            acquisition: cfg.acquisition.clone(),
            rng: rng::stream(cfg.seed, "pb2", 0),
            observations: Vec::new(),
            previous: vec![None; n],
            latest: vec![None; n],
            active: vec![true; n],
            schedules: (0..n)
                .map(|i| MemberSchedule::new(i, space.to_map(space.initial())))
                .collect(),
        }
    }

    /// Records one finished interval of `member`.
    fn record(
        &mut self,
        member: usize,
        t: u64,
        steps_done: u64,
        hp: &[f64],
        score: f64,
    ) -> Result<()> {
        let x = self.space.normalize(hp)?;
        self.observations.push(Observation {
            t: t as f64,
            x,
            y: bandit_reward(score, self.previous[member]),
        });
        self.previous[member] = Some(score);
        self.latest[member] = Some(score);
        let s = &mut self.schedules[member];
        s.steps_done = steps_done;
        s.final_score = Some(score);
        Ok(())
    }

    fn fit(&self) -> Result<GpModel> {
        GpModel::fit(&self.observations, self.space.len())
    }

    /// Suggests hyperparameters for interval `t`, treating `pending` unit
    /// points as already chosen.
    fn explore(
        &mut self,
        model: &GpModel,
        t: u64,
        pending: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let unit = suggest(model, t as f64, pending, &self.acquisition, &mut self.rng)?;
        Ok((self.space.denormalize(&unit)?, unit))
    }

    fn push_entry(&mut self, member: usize, step: u64, hp: &[f64], parent: Option<usize>) {
        let score = self.latest[member];
        self.schedules[member].entries.push(ScheduleEntry {
            step,
            member,
            hyperparams: self.space.to_map(hp),
            parent,
            score,
        });
    }
}

/// Runs population-based training over `members`.
///
/// `observe` is called once per generation, after the perturbation event,
/// with the generation record and the population; it is the place to write
/// metrics. In asynchronous mode it is called once per member interval with
/// a single-member record and an empty population slice.
pub fn run<M, F>(
    cfg: &Pb2Config,
    algorithm: Algorithm,
    space: &HyperparamSpace,
    members: &mut [M],
    mut observe: F,
) -> Result<Pb2Run>
where
    M: Member,
    F: FnMut(&GenerationRecord, &[M]) -> Result<()> + Send,
{
    cfg.validate()?;
    if members.len() != cfg.population {
        return Err(Error::config(format!(
            "population is {} but {} members were given",
            cfg.population,
            members.len()
        )));
    }
    if HyperparamSpace::for_algorithm(algorithm)
        .names()
        .ne(space.names())
    {
        return Err(Error::config(format!(
            "hyperparameter space does not match {algorithm}"
        )));
    }
    for m in members.iter_mut() {
        m.set_hyperparams(space.initial())?;
    }
    let (state, generations) = if cfg.asynchronous {
        run_async(cfg, space, members, observe)?
    } else {
        let mut state = State::new(cfg, space);
        let mut generations = Vec::new();
        for g in 0..cfg.generations() {
            let record = generation(cfg, &mut state, members, g)?;
            observe(&record, members)?;
            generations.push(record);
        }
        (state, generations)
    };
    let mut schedules = state.schedules;
    for s in &mut schedules {
        s.truncated = s.steps_done < cfg.total_steps;
    }
    Ok(Pb2Run {
        schedules: ScheduleSet {
            algorithm,
            space: space.clone(),
            interval: cfg.interval,
            total_steps: cfg.total_steps,
            seed: cfg.seed,
            schedules,
        },
        generations,
    })
}

fn generation<M: Member>(
    cfg: &Pb2Config,
    state: &mut State,
    members: &mut [M],
    g: u64,
) -> Result<GenerationRecord> {
    let start = g * cfg.interval;
    let steps = cfg.interval.min(cfg.total_steps - start);
    let end = start + steps;
    let hyperparams: Vec<Vec<f64>> = members.iter().map(|m| m.hyperparams()).collect();
    let active = state.active.clone();
    let outcomes = cfg.execution.map_mut(members, |i, m| {
        if active[i] {
            Some(m.train(steps))
        } else {
            None
        }
    });

    let mut scores = vec![None; members.len()];
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            None => {}
            Some(Ok(score)) => {
                state.record(i, g, end, &hyperparams[i], score)?;
                scores[i] = Some(score);
            }
            // a diverged member stops; the rest of the population carries on
            Some(Err(Error::Numeric(_))) => {
                state.active[i] = false;
                state.latest[i] = None;
            }
            Some(Err(e)) => return Err(e),
        }
    }

    let mut record = GenerationRecord {
        generation: g,
        step: end,
        scores,
        hyperparams,
        replacements: Vec::new(),
        bandit: None,
    };
    let live: Vec<usize> = (0..members.len()).filter(|&i| state.active[i]).collect();
    if end >= cfg.total_steps || live.len() < 2 {
        return Ok(record);
    }

    let live_scores: Vec<f64> = live
        .iter()
        .map(|&i| state.latest[i].expect("active members scored"))
        .collect();
    let plan: Vec<(usize, usize)> = exploit_plan(&live_scores, state.quantile, &mut state.rng)?
        .into_iter()
        .map(|(m, d)| (live[m], live[d]))
        .collect();

    // exploit: donors are never replaced in the same event, so their
    // current state is the pre-event snapshot
    let snapshots: Vec<Checkpoint> = plan.iter().map(|&(_, d)| members[d].checkpoint()).collect();
    for (&(m, d), ckpt) in plan.iter().zip(&snapshots) {
        members[m].load_state(ckpt)?;
        state.previous[m] = state.latest[d];
    }

    // explore
    let model = state.fit()?;
    record.bandit = Some(BanditDiagnostics::of(&model));
    let mut pending = Vec::new();
    let replaced: Vec<usize> = plan.iter().map(|p| p.0).collect();
    for &(m, d) in &plan {
        let (hp, unit) = state.explore(&model, g + 1, &pending)?;
        pending.push(unit);
        members[m].set_hyperparams(&hp)?;
        state.push_entry(m, end, &hp, Some(d));
        record.replacements.push(Replacement {
            member: m,
            donor: d,
            hyperparams: hp,
        });
    }
    for &i in &live {
        if !replaced.contains(&i) {
            let hp = members[i].hyperparams();
            state.push_entry(i, end, &hp, None);
        }
    }
    Ok(record)
}

type AsyncOutput = (State, Vec<GenerationRecord>);

/// Each member runs on its own thread and performs its own perturbation
/// event against the latest scores and snapshots of the others.
fn run_async<M, F>(
    cfg: &Pb2Config,
    space: &HyperparamSpace,
    members: &mut [M],
    observe: F,
) -> Result<AsyncOutput>
where
    M: Member,
    F: FnMut(&GenerationRecord, &[M]) -> Result<()> + Send,
{
    struct Shared<F> {
        state: State,
        snapshots: Vec<Option<Arc<Checkpoint>>>,
        records: Vec<GenerationRecord>,
        observe: F,
    }
    let shared = Mutex::new(Shared {
        state: State::new(cfg, space),
        snapshots: vec![None; members.len()],
        records: Vec::new(),
        observe,
    });
    let n = members.len();
    let k = replacement_count(n, cfg.quantile);

    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = members
            .iter_mut()
            .enumerate()
            .map(|(i, member)| {
                let shared = &shared;
                scope.spawn(move || -> Result<()> {
                    for g in 0..cfg.generations() {
                        let start = g * cfg.interval;
                        let end = (start + cfg.interval).min(cfg.total_steps);
                        let hp = member.hyperparams();
                        let score = member.train(end - start)?;
                        let snapshot = Arc::new(member.checkpoint());
                        let mut guard = shared
                            .lock()
                            .map_err(|_| Error::numeric("scheduler lock poisoned"))?;
                        let sh = &mut *guard;
                        sh.state.record(i, g, end, &hp, score)?;
                        sh.snapshots[i] = Some(snapshot);
                        let mut record = GenerationRecord {
                            generation: g,
                            step: end,
                            scores: (0..n)
                                .map(|j| if j == i { Some(score) } else { None })
                                .collect(),
                            hyperparams: vec![hp],
                            replacements: Vec::new(),
                            bandit: None,
                        };
                        let known: Vec<usize> =
                            (0..n).filter(|&j| sh.state.latest[j].is_some()).collect();
                        if end < cfg.total_steps && known.len() >= 2 {
                            let scores: Vec<f64> = known
                                .iter()
                                .map(|&j| sh.state.latest[j].unwrap_or(f64::NEG_INFINITY))
                                .collect();
                            let order: Vec<usize> =
                                rank(&scores).into_iter().map(|r| known[r]).collect();
                            let kk = k.min(known.len() / 2);
                            if kk > 0 && order[order.len() - kk..].contains(&i) {
                                let d = order[sh.state.rng.random_range(0..kk)];
                                let ckpt = sh.snapshots[d]
                                    .clone()
                                    .expect("scored members have snapshots");
                                member.load_state(&ckpt)?;
                                sh.state.previous[i] = sh.state.latest[d];
                                let model = sh.state.fit()?;
                                record.bandit = Some(BanditDiagnostics::of(&model));
                                let (new_hp, _) = sh.state.explore(&model, g + 1, &[])?;
                                member.set_hyperparams(&new_hp)?;
                                sh.state.push_entry(i, end, &new_hp, Some(d));
                                record.replacements.push(Replacement {
                                    member: i,
                                    donor: d,
                                    hyperparams: new_hp,
                                });
                            } else {
                                let hp_now = member.hyperparams();
                                sh.state.push_entry(i, end, &hp_now, None);
                            }
                        }
                        (sh.observe)(&record, &[])?;
                        sh.records.push(record);
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::numeric("member thread panicked")))
            })
            .collect()
    });
    let shared = shared
        .into_inner()
        .map_err(|_| Error::numeric("scheduler lock poisoned"))?;
    let mut state = shared.state;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(()) => {}
            Err(Error::Numeric(_)) => state.active[i] = false,
            Err(e) => return Err(e),
        }
    }
    Ok((state, shared.records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replacement_counts() {
        assert_eq!(replacement_count(8, 0.25), 2);
        assert_eq!(replacement_count(4, 0.25), 1);
        assert_eq!(replacement_count(2, 0.5), 1);
        assert_eq!(replacement_count(5, 0.5), 2);
        assert_eq!(replacement_count(3, 0.1), 1);
    }

    #[test]
    fn ranking_breaks_ties_by_id() {
        assert_eq!(rank(&[1.0, 3.0, 3.0, f64::NAN, -2.0]), vec![1, 2, 0, 4, 3]);
    }

    #[test]
    fn plan_pairs_bottom_with_top() {
        let scores = [5.0, -1.0, 7.0, 0.0, 9.0, 2.0, -3.0, 1.0];
        let plan = exploit_plan(&scores, 0.25, &mut rng::seeded(0)).unwrap();
        assert_eq!(plan.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 6]);
        assert!(plan.iter().all(|p| p.1 == 4 || p.1 == 2));
        assert!(exploit_plan(&[1.0], 0.25, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn rewards_are_differences() {
        assert_eq!(bandit_reward(-400.0, Some(-500.0)), 100.0);
        assert_eq!(bandit_reward(-400.0, Some(-400.0)), 0.0);
        assert_eq!(bandit_reward(-400.0, None), -400.0);
    }

    #[test]
    fn config_checks() {
        let mut c = Pb2Config::default();
        assert_eq!(c.generations(), 10);
        c.total_steps = 10_000;
        assert_eq!(c.generations(), 3);
        c.quantile = 0.6;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.quantile = 0.25;
        c.population = 1;
        assert!(c.validate().is_err());
    }
}
