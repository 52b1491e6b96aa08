//! Command-line entry point: training, evaluation, head-to-head racing,
//! win-rate matrices, track tooling, and plot-data export.
//!
//! Exit codes are a stable contract for scripting:
//! 0 success, 2 configuration error, 3 numeric fault, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slipstream::checkpoint::{Checkpoint, OptState};
use slipstream::config::RunConfig;
use slipstream::env::{RewardMode, AGENT_COUNT, EGO};
use slipstream::ippo::{TrainRecord, Trainer};
use slipstream::logs::{read_jsonl, JsonlWriter, TrajectoryRecord};
use slipstream::race::{
    run_matrix, run_race, run_single_eval, EvalOptions, PolicyPilot, RacerFactory, WinMatrix,
};
use slipstream::scripted::Pilot;
use slipstream::track::{builtin_track, BuiltinTrack, Track};
use slipstream::Error;

#[derive(Parser)]
#[command(name = "slipstream", about = "Two-drone racing simulator and self-play RL trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration (TOML). Relative paths also resolve against
    /// $SLIPSTREAM_CONFIG_DIR.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Track override: built-in name ("lemniscate", "complex", "mini",
    /// with optional "+obstacles") or a track file path.
    #[arg(long)]
    track: Option<String>,
    /// Reward mode override: sparse-competitive | sparse-single |
    /// dense-single | dense-multi.
    #[arg(long)]
    reward_mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train policies with IPPO (or single-agent PPO for single modes).
    Train(TrainArgs),
    /// Evaluate one frozen policy: success rate, lap time, speed, collisions.
    Eval(EvalArgs),
    /// One head-to-head race between two frozen policies.
    Race(RaceArgs),
    /// Win-rate matrix over a set of frozen policies.
    Matrix(MatrixArgs),
    /// Validate and canonically re-save a track file, or export a built-in.
    Track(TrackArgs),
    /// Convert training/trajectory/matrix logs into plot-ready TSV tables.
    PlotData(PlotDataArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Frozen policy checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Laps per run.
    #[arg(long)]
    laps: Option<usize>,
}

#[derive(Args)]
struct RaceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Exactly two checkpoints: ego,adversary.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<PathBuf>,
    #[arg(long)]
    laps: Option<usize>,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Two or more checkpoints to race pairwise.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<PathBuf>,
    /// Races per unordered pair.
    #[arg(long)]
    races: Option<usize>,
    #[arg(long)]
    laps: Option<usize>,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Where to write the canonical track file.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Args)]
struct PlotDataArgs {
    /// Training log (JSONL of per-iteration records).
    #[arg(long)]
    train_log: Option<PathBuf>,
    /// Trajectory log (JSONL of per-step records).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Win matrix (JSON).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Output directory for the TSV tables.
    #[arg(long, default_value = "plot-data")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Race(args) => cmd_race(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Track(args) => cmd_track(args),
        Command::PlotData(args) => cmd_plot_data(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 config, 3 numeric, 4 I/O.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) => 3,
        Error::Io(_) | Error::Checkpoint(_) => 4,
        _ => 2,
    }
}

/// Load the config and apply command-line overrides.
fn effective_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::template(),
    };
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(mode) = &common.reward_mode {
        RewardMode::parse(mode)?;
        cfg.reward_mode_name = mode.clone();
    }
    if let Some(track) = &common.track {
        if Path::new(track).exists() || track.ends_with(".toml") {
            cfg.track.path = Some(PathBuf::from(track));
        } else {
            let (name, obstacles) = match track.strip_suffix("+obstacles") {
                Some(base) => (base.to_string(), true),
                None => (track.clone(), false),
            };
            BuiltinTrack::parse(&name)?;
            cfg.track.builtin = name;
            cfg.track.with_obstacles = obstacles;
            cfg.track.path = None;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(cfg: &RunConfig) -> Result<PathBuf, Error> {
    let dir = cfg.out_dir.join(&cfg.run_name);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = effective_config(&args.common)?;
    let track = cfg.resolve_track()?;
    let dir = run_dir(&cfg)?;
    // Provenance: the effective config, exactly as used.
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;

    let mut trainer = Trainer::new(track.clone(), cfg.env_config()?, cfg.train.clone())?;
    let mut log = JsonlWriter::<TrainRecord>::create(&dir.join("train_log.jsonl"))?;
    let iterations = cfg.train.iterations();
    let multi = cfg.reward_mode()?.is_multi_agent();

    for i in 0..iterations {
        let record = trainer.iterate()?;
        log.append(&record)?;
        if i % 10 == 0 || i + 1 == iterations {
            let eval = record
                .eval_gate_passes
                .map(|g| format!(" eval_gates=[{:.2}, {:.2}]", g[0], g[1]))
                .unwrap_or_default();
            println!(
                "iter {i}/{iterations} reward=[{:.2}, {:.2}] episodes={}{}",
                record.mean_reward[0], record.mean_reward[1], record.episodes_finished, eval
            );
        }
        let cadence = cfg.train.checkpoint_every;
        if cadence > 0 && (i + 1) % cadence == 0 {
            write_checkpoints(&dir, &trainer, &cfg, &track, i as u64 + 1)?;
        }
    }
    write_checkpoints(&dir, &trainer, &cfg, &track, iterations as u64)?;

    // Export the actor with the greater trailing mean reward for evaluation.
    let best = trainer.best_actor();
    std::fs::copy(dir.join(format!("agent{best}.ckpt")), dir.join("best.ckpt"))?;
    println!(
        "trained {} iterations on {}; best actor: agent{best}{}",
        iterations,
        track.name,
        if multi { "" } else { " (single-agent run)" }
    );
    Ok(())
}

fn write_checkpoints(
    dir: &Path,
    trainer: &Trainer,
    cfg: &RunConfig,
    track: &Track,
    iteration: u64,
) -> Result<(), Error> {
    for agent in 0..AGENT_COUNT {
        if agent != EGO && !cfg.reward_mode()?.is_multi_agent() {
            continue;
        }
        let ck = Checkpoint {
            reward_mode: cfg.reward_mode_name.clone(),
            track_name: track.name.clone(),
            obs_dim: trainer.actors[agent].policy.mlp.spec.input_dim,
            train_iteration: iteration,
            actor: trainer.actors[agent].policy.clone(),
            critic: trainer.critics[agent].net.clone(),
            actor_opt: OptState::of(&trainer.actors[agent].opt),
            critic_opt: OptState::of(&trainer.critics[agent].opt),
        };
        ck.save(&dir.join(format!("agent{agent}.ckpt")))?;
    }
    Ok(())
}

fn load_pilot(path: &Path) -> Result<(String, PolicyPilot), Error> {
    let ck = Checkpoint::load(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| ck.reward_mode.clone());
    let label = format!("{name}[{}]", ck.reward_mode);
    Ok((label.clone(), PolicyPilot::new(ck.actor, label)))
}

fn eval_options(cfg: &RunConfig) -> Result<EvalOptions, Error> {
    Ok(EvalOptions {
        horizon: cfg.eval.horizon,
        spawn_entry: 0,
        spawn_jitter: cfg.eval.spawn_jitter,
        randomize_params: cfg.eval.randomize_params,
        record_trajectories: false,
        nominal_params: cfg.quad.to_params()?,
    })
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let cfg = effective_config(&args.common)?;
    let track = cfg.resolve_track()?;
    let dir = run_dir(&cfg)?;
    let (label, pilot) = load_pilot(&args.checkpoint)?;
    let policy = pilot.policy;
    let runs = args.runs.unwrap_or(cfg.eval.runs);
    let laps = args.laps.unwrap_or(cfg.eval.laps);
    let opts = eval_options(&cfg)?;
    let name = label.clone();
    let metrics = run_single_eval(
        &move || Box::new(PolicyPilot::new(policy.clone(), name.clone())) as Box<dyn Pilot>,
        track.clone(),
        runs,
        laps,
        cfg.train.seed,
        &opts,
    )?;
    let summary = serde_json::to_string_pretty(&metrics)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join("eval_metrics.json"), &summary)?;
    println!("policy {label} on {} ({runs} runs x {laps} laps):", track.name);
    println!(
        "  success {:.1}%  ttc {}  speed {}  collisions {}",
        metrics.success_rate * 100.0,
        metrics.avg_ttc.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "--".into()),
        metrics.avg_speed.map(|v| format!("{v:.2} m/s")).unwrap_or_else(|| "--".into()),
        metrics.collisions
    );
    Ok(())
}

fn cmd_race(args: RaceArgs) -> Result<(), Error> {
    if args.checkpoints.len() != 2 {
        return Err(Error::Config(format!(
            "race needs exactly two checkpoints, got {}",
            args.checkpoints.len()
        )));
    }
    let cfg = effective_config(&args.common)?;
    let track = cfg.resolve_track()?;
    let dir = run_dir(&cfg)?;
    let (label_e, mut ego) = load_pilot(&args.checkpoints[0])?;
    let (label_a, mut adv) = load_pilot(&args.checkpoints[1])?;
    let laps = args.laps.unwrap_or(cfg.eval.laps);
    let mut opts = eval_options(&cfg)?;
    opts.record_trajectories = true;
    let result = run_race(&mut ego, &mut adv, track.clone(), laps, cfg.train.seed, 1.0, &opts)?;

    let mut log = JsonlWriter::<TrajectoryRecord>::create(&dir.join("race_trajectory.jsonl"))?;
    for rec in &result.trajectory {
        log.append(rec)?;
    }
    let summary =
        serde_json::to_string_pretty(&result).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join("race_result.json"), &summary)?;
    println!(
        "{label_e} vs {label_a} on {} ({laps} laps): {:?} in {} steps",
        track.name, result.winner, result.steps
    );
    Ok(())
}

fn cmd_matrix(args: MatrixArgs) -> Result<(), Error> {
    if args.checkpoints.len() < 2 {
        return Err(Error::Config("matrix needs at least two checkpoints".into()));
    }
    let cfg = effective_config(&args.common)?;
    let track = cfg.resolve_track()?;
    let dir = run_dir(&cfg)?;
    let races = args.races.unwrap_or(cfg.eval.races);
    let laps = args.laps.unwrap_or(cfg.eval.laps);
    let opts = eval_options(&cfg)?;

    let mut policies: Vec<(String, RacerFactory)> = Vec::new();
    for path in &args.checkpoints {
        let (label, pilot) = load_pilot(path)?;
        let policy = pilot.policy;
        let name = label.clone();
        policies.push((
            label,
            Box::new(move || {
                Box::new(PolicyPilot::new(policy.clone(), name.clone())) as Box<dyn Pilot>
            }),
        ));
    }
    let matrix = run_matrix(&policies, track.clone(), races, laps, cfg.train.seed, &opts)?;
    let json =
        serde_json::to_string_pretty(&matrix).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join("win_matrix.json"), &json)?;
    std::fs::write(dir.join("win_matrix.tsv"), matrix_tsv(&matrix))?;
    print!("{}", matrix_display(&matrix));
    Ok(())
}

fn matrix_display(m: &WinMatrix) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "win rates over {} races per pair (rows vs columns, %):\n",
        m.races_per_pair
    ));
    for (i, label) in m.labels.iter().enumerate() {
        out.push_str(&format!("  {label:>28}:"));
        for j in 0..m.labels.len() {
            match m.wins[i][j] {
                Some(w) => out.push_str(&format!(" {w:5.1}")),
                None => out.push_str("    --"),
            }
        }
        out.push_str(&format!("   row avg {:5.1}\n", m.row_average(i)));
    }
    out
}

fn matrix_tsv(m: &WinMatrix) -> String {
    let mut out = String::from("policy");
    for label in &m.labels {
        out.push_str(&format!("\t{label}"));
    }
    out.push_str("\trow_average\n");
    for i in 0..m.labels.len() {
        out.push_str(&m.labels[i]);
        for j in 0..m.labels.len() {
            match (m.wins[i][j], m.draws[i][j]) {
                (Some(w), Some(d)) => out.push_str(&format!("\t{w}/{d}")),
                _ => out.push_str("\t-"),
            }
        }
        out.push_str(&format!("\t{}\n", m.row_average(i)));
    }
    out
}

fn cmd_track(args: TrackArgs) -> Result<(), Error> {
    let track: Track = if let Some(spec) = &args.common.track {
        if Path::new(spec).exists() {
            let text = std::fs::read_to_string(spec)?;
            Track::load(&text, 0.08)?
        } else {
            let (name, obstacles) = match spec.strip_suffix("+obstacles") {
                Some(base) => (base.to_string(), true),
                None => (spec.clone(), false),
            };
            builtin_track(BuiltinTrack::parse(&name)?, obstacles)
        }
    } else {
        return Err(Error::Config("track: pass --track <file|builtin[+obstacles]>".into()));
    };
    track.validate(0.08)?;
    let text = track.save()?;
    // Round-trip check: the canonical form must load back identically.
    let back = Track::load(&text, 0.08)?;
    if back != track {
        return Err(Error::InvalidTrack("round-trip changed the track".into()));
    }
    if let Some(path) = &args.save {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &text)?;
        println!("wrote {}", path.display());
    }
    println!(
        "track '{}': {} gates, sequence length {}, {} obstacles, {} spawns; valid",
        track.name,
        track.gates.len(),
        track.sequence.len(),
        track.obstacles.len(),
        track.spawns.len()
    );
    Ok(())
}

fn cmd_plot_data(args: PlotDataArgs) -> Result<(), Error> {
    let mut wrote_any = false;
    std::fs::create_dir_all(&args.out)?;
    if let Some(path) = &args.train_log {
        let records: Vec<TrainRecord> = read_jsonl(path)?;
        let mut out = String::from(
            "iteration\tenv_steps\treward_ego\treward_adv\tgates_ego\tgates_adv\tlaps_ego\tlaps_adv\tentropy_ego\tentropy_adv\teval_gates_ego\teval_gates_adv\n",
        );
        for r in &records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.iteration,
                r.env_steps,
                r.mean_reward[0],
                r.mean_reward[1],
                r.mean_gate_passes[0],
                r.mean_gate_passes[1],
                r.mean_lap_count[0],
                r.mean_lap_count[1],
                r.entropy[0],
                r.entropy[1],
                r.eval_gate_passes.map(|g| g[0].to_string()).unwrap_or_else(|| "-".into()),
                r.eval_gate_passes.map(|g| g[1].to_string()).unwrap_or_else(|| "-".into()),
            ));
        }
        std::fs::write(args.out.join("reward_curves.tsv"), out)?;
        wrote_any = true;
    }
    if let Some(path) = &args.trajectory {
        let records: Vec<TrajectoryRecord> = read_jsonl(path)?;
        let mut out = String::from("agent\tstep\ttime_s\tx\ty\tz\tspeed\tlaps_done\n");
        for r in &records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.agent,
                r.step,
                r.time_s,
                r.position[0],
                r.position[1],
                r.position[2],
                r.speed(),
                r.laps_done
            ));
        }
        std::fs::write(args.out.join("trajectory.tsv"), out)?;
        wrote_any = true;
    }
    if let Some(path) = &args.matrix {
        let text = std::fs::read_to_string(path)?;
        let matrix: WinMatrix =
            serde_json::from_str(&text).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(args.out.join("win_matrix.tsv"), matrix_tsv(&matrix))?;
        wrote_any = true;
    }
    if !wrote_any {
        return Err(Error::Config(
            "plot-data: pass at least one of --train-log, --trajectory, --matrix".into(),
        ));
    }
    println!("wrote plot tables to {}", args.out.display());
    Ok(())
}
