//! Evaluation harness: single-agent track metrics and head-to-head win-rate
//! matrices over frozen racers.
//!
//! Races are independent and parallelized with deterministic per-race seeds;
//! results are aggregated in fixed order, so a matrix is reproducible from
//! (policies, track, seed) alone.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::Action;
use crate::env::{
    EnvConfig, RaceEvent, RacingEnv, RandomizationRanges, RewardMode, ADVERSARY, AGENT_COUNT, EGO,
};
use crate::logs::TrajectoryRecord;
use crate::net::Policy;
use crate::scripted::{AgentView, Pilot};
use crate::track::Track;
use crate::{Error, Result};

/// A frozen policy evaluated with its deterministic (mean) action.
pub struct PolicyPilot {
    pub policy: Policy,
    pub name: String,
}

impl PolicyPilot {
    pub fn new(policy: Policy, name: impl Into<String>) -> Self {
        Self { policy, name: name.into() }
    }
}

impl Pilot for PolicyPilot {
    fn act(&mut self, view: &AgentView) -> Action {
        self.policy.act_mean(&DVector::from_column_slice(view.obs.as_slice()))
    }

    fn label(&self) -> String {
        self.name.clone()
    }

    fn observation_dim(&self) -> Option<usize> {
        Some(self.policy.mlp.spec.input_dim)
    }
}

/// Factory producing a fresh racer per race.
pub type RacerFactory = Box<dyn Fn() -> Box<dyn Pilot> + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    Ego,
    Adversary,
    Draw,
}

/// Outcome of one head-to-head race.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaceResult {
    pub winner: Winner,
    /// Completed lap times per agent [s].
    pub lap_times: [Vec<f64>; AGENT_COUNT],
    /// Contact events per agent.
    pub collisions: [usize; AGENT_COUNT],
    pub terminal_crash: [bool; AGENT_COUNT],
    pub steps: usize,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryRecord>,
}

/// Table-style single-agent metrics. Time-to-complete and speed are averaged
/// over completed laps only and absent when no lap completed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingleAgentMetrics {
    pub avg_ttc: Option<f64>,
    pub avg_speed: Option<f64>,
    pub collisions: usize,
    pub success_rate: f64,
    pub runs: usize,
    pub laps_completed: usize,
}

/// Win percentages of every ordered pair; `wins[i][j]` is how often policy i
/// beat policy j over their shared set of races, `draws[i][j]` the shared
/// draw percentage. Diagonal entries are absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinMatrix {
    pub labels: Vec<String>,
    pub wins: Vec<Vec<Option<f64>>>,
    pub draws: Vec<Vec<Option<f64>>>,
    pub races_per_pair: usize,
}

impl WinMatrix {
    /// Mean win rate of a policy against all others.
    pub fn row_average(&self, i: usize) -> f64 {
        let vals: Vec<f64> = self.wins[i].iter().flatten().cloned().collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }
}

/// Evaluation knobs shared by the race and eval entry points.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Cap on env steps per run; truncation with no finisher is a draw.
    pub horizon: usize,
    /// Spawn entry used for every run.
    pub spawn_entry: usize,
    /// Spawn-position jitter [m] between runs ("different initial positions").
    pub spawn_jitter: f64,
    /// Whether drone params are randomized per run (off: nominal).
    pub randomize_params: bool,
    /// Record full trajectories (races only; eval always tracks speed).
    pub record_trajectories: bool,
    /// Quad constants; must match what the policies were trained with.
    pub nominal_params: crate::physics::QuadParams,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            horizon: 3000,
            spawn_entry: 0,
            spawn_jitter: 0.15,
            randomize_params: false,
            record_trajectories: false,
            nominal_params: crate::physics::QuadParams::default(),
        }
    }
}

fn eval_env_config(mode: RewardMode, laps: usize, opts: &EvalOptions, slot_sign: f64) -> EnvConfig {
    let mut cfg = EnvConfig::new(mode);
    let mut ranges = RandomizationRanges::none();
    if opts.randomize_params {
        ranges = RandomizationRanges::default();
    }
    ranges.spawn_pos = opts.spawn_jitter;
    ranges.spawn_yaw = 0.2_f64.min(opts.spawn_jitter * 2.0);
    cfg.randomization = ranges;
    cfg.nominal_params = opts.nominal_params.clone();
    cfg.episode_horizon = opts.horizon;
    cfg.spawn_entry = Some(opts.spawn_entry);
    cfg.laps_override = Some(laps);
    cfg.spawn_slot_sign = slot_sign;
    cfg
}

fn check_obs_dim(env: &RacingEnv, pilot: &dyn Pilot) -> Result<()> {
    if let Some(dim) = pilot_obs_dim(pilot) {
        if dim != env.obs_dim() {
            return Err(Error::DimensionMismatch(format!(
                "policy expects {dim}-dim observations but the track provides {}",
                env.obs_dim()
            )));
        }
    }
    Ok(())
}

fn pilot_obs_dim(pilot: &dyn Pilot) -> Option<usize> {
    pilot.observation_dim()
}

/// Fifty 3-lap runs (by default) from varied initial positions; aggregates
/// success rate, per-lap time, per-lap speed, and collision count.
pub fn run_single_eval(
    make_pilot: &dyn Fn() -> Box<dyn Pilot>,
    track: Arc<Track>,
    n_runs: usize,
    n_laps: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<SingleAgentMetrics> {
    let mut successes = 0usize;
    let mut collisions = 0usize;
    let mut lap_times = Vec::new();
    let mut lap_speeds = Vec::new();

    for run in 0..n_runs {
        let cfg = eval_env_config(RewardMode::SparseSingle, n_laps, opts, 1.0);
        let mut env = RacingEnv::new(track.clone(), cfg)?;
        let mut pilot = make_pilot();
        check_obs_dim(&env, pilot.as_ref())?;
        let mut obs = env.reset(crate::ippo::derive_seed(seed, run as u64, 0))?;
        let dt = env.step_dt();

        let mut lap_start_step = 0usize;
        let mut lap_path_len = 0.0;
        let mut prev_pos = env.state(EGO).position;
        while !env.episode_over() {
            let action = {
                let view = AgentView {
                    obs: &obs[EGO],
                    state: env.state(EGO),
                    status: env.status(EGO),
                    params: env.params(EGO),
                    track: &track,
                    target_gate: env.target_gate(EGO),
                };
                pilot.act(&view)
            };
            let step = env.step(&action, &Action::zero())?;
            obs = step.observations;
            lap_path_len += (env.state(EGO).position - prev_pos).norm();
            prev_pos = env.state(EGO).position;
            for event in &step.info.events {
                match event {
                    RaceEvent::Contact { agent } if *agent == EGO => collisions += 1,
                    RaceEvent::LapCompleted { agent, .. } if *agent == EGO => {
                        let steps = env.elapsed_steps() - lap_start_step;
                        let t = steps as f64 * dt;
                        lap_times.push(t);
                        lap_speeds.push(lap_path_len / t);
                        lap_start_step = env.elapsed_steps();
                        lap_path_len = 0.0;
                    }
                    _ => {}
                }
            }
        }
        if env.status(EGO).finished {
            successes += 1;
        }
    }

    let laps_completed = lap_times.len();
    let (avg_ttc, avg_speed) = if laps_completed > 0 {
        (
            Some(lap_times.iter().sum::<f64>() / laps_completed as f64),
            Some(lap_speeds.iter().sum::<f64>() / laps_completed as f64),
        )
    } else {
        (None, None)
    };
    Ok(SingleAgentMetrics {
        avg_ttc,
        avg_speed,
        collisions,
        success_rate: successes as f64 / n_runs.max(1) as f64,
        runs: n_runs,
        laps_completed,
    })
}

/// One head-to-head race; first to finish `n_laps` wins, a double terminal
/// crash or truncation with no finisher is a draw. `slot_sign` alternates the
/// lateral spawn slots between races for fairness.
pub fn run_race(
    pilot_ego: &mut dyn Pilot,
    pilot_adv: &mut dyn Pilot,
    track: Arc<Track>,
    n_laps: usize,
    seed: u64,
    slot_sign: f64,
    opts: &EvalOptions,
) -> Result<RaceResult> {
    let cfg = eval_env_config(RewardMode::SparseCompetitive, n_laps, opts, slot_sign);
    let mut env = RacingEnv::new(track.clone(), cfg)?;
    check_obs_dim(&env, pilot_ego)?;
    check_obs_dim(&env, pilot_adv)?;
    let mut obs = env.reset(seed)?;
    let dt = env.step_dt();

    let mut lap_times: [Vec<f64>; AGENT_COUNT] = [Vec::new(), Vec::new()];
    let mut lap_starts = [0usize; AGENT_COUNT];
    let mut collisions = [0usize; AGENT_COUNT];
    let mut trajectory = Vec::new();
    let mut winner = None;

    while !env.episode_over() && winner.is_none() {
        let mut actions = [Action::zero(); AGENT_COUNT];
        for agent in 0..AGENT_COUNT {
            let view = AgentView {
                obs: &obs[agent],
                state: env.state(agent),
                status: env.status(agent),
                params: env.params(agent),
                track: &track,
                target_gate: env.target_gate(agent),
            };
            actions[agent] =
                if agent == EGO { pilot_ego.act(&view) } else { pilot_adv.act(&view) };
        }
        let step = env.step(&actions[EGO], &actions[ADVERSARY])?;
        obs = step.observations;
        for event in &step.info.events {
            match event {
                RaceEvent::Contact { agent } => collisions[*agent] += 1,
                RaceEvent::LapCompleted { agent, .. } => {
                    let steps = env.elapsed_steps() - lap_starts[*agent];
                    lap_times[*agent].push(steps as f64 * dt);
                    lap_starts[*agent] = env.elapsed_steps();
                }
                RaceEvent::Finished { agent } => {
                    if winner.is_none() {
                        winner = Some(if *agent == EGO { Winner::Ego } else { Winner::Adversary });
                    }
                }
                _ => {}
            }
        }
        if opts.record_trajectories {
            for agent in 0..AGENT_COUNT {
                trajectory.push(TrajectoryRecord::from_state(
                    env.elapsed_steps() - 1,
                    (env.elapsed_steps() - 1) as f64 * dt,
                    agent,
                    env.state(agent),
                    [
                        actions[agent].0[0],
                        actions[agent].0[1],
                        actions[agent].0[2],
                        actions[agent].0[3],
                    ],
                    step.rewards[agent],
                    env.status(agent),
                ));
            }
        }
    }

    // Simultaneous finishes land here with both flags set and no winner
    // recorded first; that tie is a draw, like a double crash.
    let winner = winner.unwrap_or(Winner::Draw);
    Ok(RaceResult {
        winner,
        lap_times,
        collisions,
        terminal_crash: [env.status(EGO).crashed, env.status(ADVERSARY).crashed],
        steps: env.elapsed_steps(),
        trajectory,
    })
}

/// Race every unordered pair of policies `n_races` times with per-race seeds
/// and alternating spawn slots; cells hold win percentages, the residual per
/// pair is the draw percentage.
pub fn run_matrix(
    policies: &[(String, RacerFactory)],
    track: Arc<Track>,
    n_races: usize,
    n_laps: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<WinMatrix> {
    if policies.len() < 2 {
        return Err(Error::Config("a win matrix needs at least two policies".into()));
    }
    let n = policies.len();
    let mut wins = vec![vec![None; n]; n];
    let mut draws = vec![vec![None; n]; n];

    for i in 0..n {
        for j in (i + 1)..n {
            let outcomes: Result<Vec<Winner>> = (0..n_races)
                .into_par_iter()
                .map(|race| {
                    let mut ego = policies[i].1();
                    let mut adv = policies[j].1();
                    let slot_sign = if race % 2 == 0 { 1.0 } else { -1.0 };
                    let race_seed = crate::ippo::derive_seed(seed, (i * n + j) as u64, race as u64);
                    run_race(ego.as_mut(), adv.as_mut(), track.clone(), n_laps, race_seed, slot_sign, opts)
                        .map(|r| r.winner)
                })
                .collect();
            let outcomes = outcomes?;
            let w_i = outcomes.iter().filter(|w| **w == Winner::Ego).count();
            let w_j = outcomes.iter().filter(|w| **w == Winner::Adversary).count();
            let d = n_races - w_i - w_j;
            wins[i][j] = Some(100.0 * w_i as f64 / n_races as f64);
            wins[j][i] = Some(100.0 * w_j as f64 / n_races as f64);
            draws[i][j] = Some(100.0 * d as f64 / n_races as f64);
            draws[j][i] = Some(100.0 * d as f64 / n_races as f64);
        }
    }

    Ok(WinMatrix {
        labels: policies.iter().map(|(name, _)| name.clone()).collect(),
        wins,
        draws,
        races_per_pair: n_races,
    })
}
