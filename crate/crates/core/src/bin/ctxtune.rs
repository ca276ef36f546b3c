use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ctxtune::agents::make_learner;
use ctxtune::context::Visibility;
use ctxtune::envs::EnvKind;
use ctxtune::harness::{
    self, checkpoint_path, evaluate, load_config, plot_metrics, plot_report, read_metrics,
    replay_schedule, run_training, EvalReport, RunConfig,
};
use ctxtune::parallel::Execution;
use ctxtune::pb2::ScheduleSet;
use ctxtune::{agents::Checkpoint, Error, Result};

#[derive(Parser)]
#[command(
    name = "ctxtune",
    version,
    about = "Contextual RL with population-based bandit hyperparameter tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a population under the PB2 scheduler.
    Train(TrainArgs),
    /// Retrain from scratch following found hyperparameter schedules.
    Replay(ReplayArgs),
    /// Greedy evaluation of a run's final checkpoints.
    Eval(EvalArgs),
    /// Render learning curves to SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    visibility: Option<Visibility>,
    /// Population size.
    #[arg(long)]
    workers: Option<usize>,
    /// Environment steps between perturbation events.
    #[arg(long)]
    interval: Option<u64>,
    /// Environment steps per member.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden_width: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long, default_value = "runs/latest")]
    outdir: PathBuf,
    /// Fraction of the population replaced at each event.
    #[arg(long)]
    quantile: Option<f64>,
    /// Contexts in the instance set.
    #[arg(long)]
    instances: Option<usize>,
    /// Divide appended context values by their default magnitude.
    #[arg(long)]
    normalize_context: bool,
    /// Train members one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Asynchronous perturbation events (not reproducible).
    #[arg(long = "async")]
    asynchronous: bool,
    /// Record elapsed seconds in metrics.csv.
    #[arg(long)]
    wallclock: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Schedule file; its run directory supplies the base configuration.
    #[arg(long)]
    schedules: PathBuf,
    #[arg(long, default_value = "runs/replay")]
    outdir: PathBuf,
    /// Comma-separated seeds; defaults to fresh seeds derived from the
    /// training seed.
    #[arg(long, value_delimiter = ',')]
    eval_seeds: Vec<u64>,
    /// Number of default seeds when --eval-seeds is not given.
    #[arg(long, default_value_t = 5)]
    num_seeds: usize,
    /// Replay only this member (default: the best non-truncated member;
    /// `--all-members` replays every member).
    #[arg(long)]
    member: Option<usize>,
    #[arg(long)]
    all_members: bool,
    /// Also consider members that stopped early.
    #[arg(long)]
    include_truncated: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    eval_seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    num_seeds: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// metrics.csv or a replay report (.json). Without it, every metrics and
    /// report file in --outdir is plotted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "runs/latest")]
    outdir: PathBuf,
}

fn apply(flags: &RunFlags, cfg: &mut RunConfig) {
    if let Some(env) = flags.env {
        if env != cfg.env {
            cfg.algorithm = ctxtune::agents::Algorithm::default_for(env);
        }
        cfg.env = env;
    }
    if let Some(v) = flags.visibility {
        cfg.visibility = v;
    }
    if let Some(w) = flags.workers {
        cfg.population = w;
    }
    if let Some(i) = flags.interval {
        cfg.interval = i;
    }
    if let Some(s) = flags.steps {
        cfg.total_steps = s;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(h) = flags.hidden_width {
        cfg.hidden_width = h;
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::new(args.run.env.unwrap_or(EnvKind::Pendulum));
    apply(&args.run, &mut cfg);
    cfg.outdir = args.outdir;
    if let Some(q) = args.quantile {
        cfg.quantile = q;
    }
    if let Some(n) = args.instances {
        cfg.instances = n;
    }
    cfg.normalize_context = args.normalize_context;
    cfg.asynchronous = args.asynchronous;
    cfg.record_wallclock = args.wallclock;
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    let out = run_training(&cfg)?;
    println!(
        "trained {} members of {} on {} ({} context, obs dim {}) for {} steps each",
        cfg.population, cfg.algorithm, cfg.env, cfg.visibility, out.meta.obs_dim, cfg.total_steps
    );
    for s in &out.run.schedules.schedules {
        println!(
            "  member {}: final score {}, {} schedule entries{}",
            s.member,
            s.final_score.map_or("n/a".into(), |f| format!("{f:.1}")),
            s.entries.len(),
            if s.truncated { " (truncated)" } else { "" }
        );
    }
    println!("outputs in {}", out.outdir.display());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let set = ScheduleSet::load(&args.schedules)?;
    let run_dir = args.schedules.parent().unwrap_or(Path::new("."));
    let mut cfg = match load_config(run_dir) {
        Ok(c) => c,
        Err(Error::Io(_)) => {
            let env = args.run.env.ok_or_else(|| {
                Error::InvalidConfig("no config.json next to the schedules; pass --env".into())
            })?;
            let mut c = RunConfig::new(env);
            c.seed = set.seed;
            c
        }
        Err(e) => return Err(e),
    };
    apply(&args.run, &mut cfg);
    let seeds = if args.eval_seeds.is_empty() {
        cfg.default_eval_seeds(args.num_seeds)
    } else {
        args.eval_seeds.clone()
    };
    let members: Vec<usize> = if args.all_members {
        (0..set.schedules.len()).collect()
    } else if let Some(m) = args.member {
        vec![m]
    } else {
        vec![set
            .best_member(args.include_truncated)
            .ok_or_else(|| Error::InvalidArgument("no member qualifies for replay".into()))?]
    };
    std::fs::create_dir_all(&args.outdir)?;
    for m in members {
        let report = replay_schedule(&set, m, &cfg, &seeds)?;
        let path = args.outdir.join(format!("replay_member{m}.json"));
        std::fs::write(&path, report.to_json()?)?;
        println!(
            "member {m}: mean {} ± {} over seeds {:?} -> {}",
            report.mean.map_or("n/a".into(), |v| format!("{v:.1}")),
            report.stderr.map_or("n/a".into(), |v| format!("{v:.1}")),
            report.seeds,
            path.display()
        );
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(&args.outdir)?;
    let instances = cfg.instance_set()?;
    let seeds = if args.eval_seeds.is_empty() {
        cfg.default_eval_seeds(args.num_seeds)
    } else {
        args.eval_seeds.clone()
    };
    if seeds.contains(&cfg.seed) {
        return Err(Error::InvalidArgument(
            "evaluation seeds must differ from the training seed".into(),
        ));
    }
    let space = cfg.space()?;
    let mode = harness::observation_mode(&cfg);
    let mut results = serde_json::Map::new();
    for m in 0..cfg.population {
        let ckpt = Checkpoint::load(&checkpoint_path(&args.outdir, m))?;
        let hp = space.from_map(&ckpt.hyperparams)?;
        let mut learner = make_learner(
            cfg.algorithm,
            &cfg.env.spec(),
            cfg.obs_dim(),
            cfg.hidden_width,
            &hp,
            0,
        )?;
        learner.load_state(&ckpt)?;
        let mut per_seed = Vec::new();
        for &s in &seeds {
            per_seed.push(evaluate(
                learner.as_ref(),
                cfg.env,
                mode,
                &instances,
                1,
                s,
                cfg.execution,
            )?);
        }
        let means: Vec<f64> = per_seed.iter().map(|r| r.mean).collect();
        let agg = harness::mean_and_stderr(&means);
        println!(
            "member {m}: mean {} ± {}",
            agg.map_or("n/a".into(), |a| format!("{:.1}", a.0)),
            agg.map_or("n/a".into(), |a| format!("{:.1}", a.1))
        );
        results.insert(
            format!("member_{m}"),
            serde_json::json!({ "seeds": seeds, "per_seed": per_seed, "mean": agg.map(|a| a.0), "stderr": agg.map(|a| a.1) }),
        );
    }
    let path = args.outdir.join("eval.json");
    std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn plot_file(input: &Path, output: &Path) -> Result<()> {
    let svg = if input.extension().is_some_and(|e| e == "json") {
        plot_report(&EvalReport::from_json(&std::fs::read_to_string(input)?)?)
    } else {
        let title = input
            .parent()
            .and_then(|p| p.file_name())
            .map_or("training".to_string(), |n| n.to_string_lossy().into_owned());
        plot_metrics(&read_metrics(std::fs::File::open(input)?)?, &title)
    };
    std::fs::write(output, svg)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    if let Some(input) = &args.input {
        let output = args
            .output
            .clone()
            .unwrap_or_else(|| input.with_extension("svg"));
        return plot_file(input, &output);
    }
    let mut inputs = Vec::new();
    let metrics = args.outdir.join(harness::METRICS_FILE);
    if metrics.exists() {
        inputs.push(metrics);
    }
    let mut reports: Vec<PathBuf> = std::fs::read_dir(&args.outdir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("replay_") && n.ends_with(".json"))
        })
        .collect();
    reports.sort();
    inputs.extend(reports);
    if inputs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "nothing to plot in {}",
            args.outdir.display()
        )));
    }
    for input in inputs {
        plot_file(&input, &input.with_extension("svg"))?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Replay(a) => replay(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
