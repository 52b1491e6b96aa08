//! Two-agent decentralized racing environment.
//!
//! One env step is one 50 Hz control tick: both drones get a command from
//! their action, then run ten 500 Hz substeps of PID + allocation + motor lag
//! + rigid-body integration, with gate-pass and collision checks at every
//! substep (max displacement per substep is centimeters, so passes cannot
//! tunnel). Rewards, observations, and race bookkeeping happen at the tick.
//!
//! Each env owns its rng and is exclusively owned by one worker; a batch of
//! envs shares only the immutable [`Track`].

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    allocate_with, allocation_inverse, map_action, rate_pid, Action, PidState,
};
use crate::physics::{
    drag_force, integrate, motor_step, wrench_from_motors, Mat3, Mat4, QuadParams, QuadState,
    Vec3, Wrench,
};
use crate::track::{classify_surface, frame_bar_distance, gate_pass_check, Collision, GateFrame, Track};
use crate::{Error, Result};

pub const AGENT_COUNT: usize = 2;
pub const EGO: usize = 0;
pub const ADVERSARY: usize = 1;

/// Which reward formulation trains the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Sparse pass/lap race rewards with a live opponent (ours).
    SparseCompetitive,
    /// Same sparse rewards, no opponent (SS baseline).
    SparseSingle,
    /// Sparse rewards plus gate-progress shaping, no opponent (DS baseline).
    DenseSingle,
    /// Progress plus overtaking shaping with a live opponent (DM baseline).
    DenseMulti,
}

impl RewardMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sparse-competitive" | "ours" => Ok(Self::SparseCompetitive),
            "sparse-single" | "ss" => Ok(Self::SparseSingle),
            "dense-single" | "ds" => Ok(Self::DenseSingle),
            "dense-multi" | "dm" => Ok(Self::DenseMulti),
            other => Err(Error::Config(format!("unknown reward mode: {other}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::SparseCompetitive => "sparse-competitive",
            Self::SparseSingle => "sparse-single",
            Self::DenseSingle => "dense-single",
            Self::DenseMulti => "dense-multi",
        }
    }

    pub fn is_multi_agent(&self) -> bool {
        matches!(self, Self::SparseCompetitive | Self::DenseMulti)
    }

    pub fn has_progress(&self) -> bool {
        matches!(self, Self::DenseSingle | Self::DenseMulti)
    }

    pub fn has_overtake(&self) -> bool {
        matches!(self, Self::DenseMulti)
    }
}

/// Reward constants; defaults are the published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConstants {
    pub pass_leading: f64,
    pub pass_trailing: f64,
    pub lap_leading: f64,
    pub crash_terminal: f64,
    pub crash_contact: f64,
    /// Magnitude of the roll/pitch command penalty (applied subtractively).
    pub cmd_rollpitch: f64,
    /// Magnitude of the yaw command penalty.
    pub cmd_yaw: f64,
    /// Overtake indicator window on the ego-minus-opponent progress gap [m].
    pub overtake_min: f64,
    pub overtake_max: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            pass_leading: 10.0,
            pass_trailing: 5.0,
            lap_leading: 50.0,
            crash_terminal: 2.0,
            crash_contact: 0.1,
            cmd_rollpitch: 0.15,
            cmd_yaw: 0.05,
            overtake_min: -5.0,
            overtake_max: 10.0,
        }
    }
}

/// Fixed observation scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsScales {
    pub velocity: f64,
    pub position: f64,
}

impl Default for ObsScales {
    fn default() -> Self {
        Self { velocity: 10.0, position: 10.0 }
    }
}

/// Multiplicative/additive domain-randomization ranges. Multiplicative fields
/// are (lo, hi) factors that must bracket 1; additive fields are half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationRanges {
    pub mass: (f64, f64),
    pub inertia: (f64, f64),
    pub thrust_coeff: (f64, f64),
    pub motor_tau: (f64, f64),
    pub drag: (f64, f64),
    pub pid_gains: (f64, f64),
    /// Spawn position jitter [m], per horizontal axis.
    pub spawn_pos: f64,
    /// Spawn yaw jitter [rad].
    pub spawn_yaw: f64,
    /// Initial velocity jitter [m/s], per axis.
    pub initial_vel: f64,
    /// Std of additive Gaussian observation noise (post scaling).
    pub obs_noise_std: f64,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        Self {
            mass: (0.92, 1.08),
            inertia: (0.9, 1.1),
            thrust_coeff: (0.92, 1.08),
            motor_tau: (0.85, 1.15),
            drag: (0.7, 1.3),
            pid_gains: (0.9, 1.1),
            spawn_pos: 0.15,
            spawn_yaw: 0.3,
            initial_vel: 0.1,
            obs_noise_std: 0.0,
        }
    }
}

impl RandomizationRanges {
    /// Zero-width ranges: nominal params, exact spawn slots.
    pub fn none() -> Self {
        Self {
            mass: (1.0, 1.0),
            inertia: (1.0, 1.0),
            thrust_coeff: (1.0, 1.0),
            motor_tau: (1.0, 1.0),
            drag: (1.0, 1.0),
            pid_gains: (1.0, 1.0),
            spawn_pos: 0.0,
            spawn_yaw: 0.0,
            initial_vel: 0.0,
            obs_noise_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("thrust_coeff", self.thrust_coeff),
            ("motor_tau", self.motor_tau),
            ("drag", self.drag),
            ("pid_gains", self.pid_gains),
        ] {
            if !(lo <= 1.0 && 1.0 <= hi && lo > 0.0) {
                return Err(Error::Config(format!(
                    "multiplicative range {name} = ({lo}, {hi}) must bracket 1.0"
                )));
            }
        }
        if self.spawn_pos < 0.0 || self.spawn_yaw < 0.0 || self.initial_vel < 0.0 || self.obs_noise_std < 0.0
        {
            return Err(Error::Config("additive ranges must be non-negative".into()));
        }
        Ok(())
    }
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn jitter<R: Rng>(rng: &mut R, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..half_width)
    }
}

/// Draw per-episode params around the nominal set. Invalid draws are
/// resampled up to ten times.
pub fn randomize_params<R: Rng>(
    nominal: &QuadParams,
    ranges: &RandomizationRanges,
    rng: &mut R,
) -> Result<QuadParams> {
    for _ in 0..10 {
        let mut p = nominal.clone();
        p.mass *= uniform_in(rng, ranges.mass);
        p.inertia_diag *= uniform_in(rng, ranges.inertia);
        p.thrust_coeff *= uniform_in(rng, ranges.thrust_coeff);
        p.motor_tau *= uniform_in(rng, ranges.motor_tau);
        p.drag_diag *= uniform_in(rng, ranges.drag);
        let g = uniform_in(rng, ranges.pid_gains);
        p.pid.kp *= g;
        p.pid.kd *= g;
        p.pid.ki *= g;
        if p.validate().is_ok() {
            return Ok(p);
        }
    }
    Err(Error::InvalidParams("randomization produced invalid params 10 times".into()))
}

/// Per-agent gate/lap progress and crash bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceStatus {
    /// Index into the episode's (rotated) sequence of the gate to pass next.
    pub next_seq_index: usize,
    pub gates_passed_total: usize,
    pub laps_done: usize,
    pub crashed: bool,
    pub finished: bool,
}

impl RaceStatus {
    fn new() -> Self {
        Self { next_seq_index: 0, gates_passed_total: 0, laps_done: 0, crashed: false, finished: false }
    }

    pub fn done(&self) -> bool {
        self.crashed || self.finished
    }
}

/// Per-step reward terms; `total = pass + lap - cmd - crash + progress + overtake`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub pass: f64,
    pub lap: f64,
    pub cmd: f64,
    pub crash: f64,
    pub progress: f64,
    pub overtake: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn finalize(mut self) -> Self {
        self.total = self.pass + self.lap - self.cmd - self.crash + self.progress + self.overtake;
        self
    }
}

/// Scaled observation vector; 42 entries, or 45 on obstacle tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// What happened during one env step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RaceEvent {
    GatePassed { agent: usize, seq_entry: usize, gate: usize, leading: bool },
    LapCompleted { agent: usize, laps_done: usize, leading: bool },
    Contact { agent: usize },
    TerminalCrash { agent: usize },
    Finished { agent: usize },
}

#[derive(Debug, Clone, Default)]
pub struct StepInfo {
    pub events: Vec<RaceEvent>,
    /// True where an agent hit the episode horizon while still racing.
    pub truncated: [bool; AGENT_COUNT],
}

pub struct StepResult {
    pub observations: [Observation; AGENT_COUNT],
    pub rewards: [RewardBreakdown; AGENT_COUNT],
    pub done: [bool; AGENT_COUNT],
    pub info: StepInfo,
}

/// Environment configuration (everything except the track itself).
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub reward_mode: RewardMode,
    pub constants: RewardConstants,
    pub scales: ObsScales,
    pub nominal_params: QuadParams,
    pub randomization: RandomizationRanges,
    /// Drone bounding-sphere radius [m].
    pub drone_radius: f64,
    /// Episode length in env steps; hitting it truncates (not terminal).
    pub episode_horizon: usize,
    /// Fix the spawn to one sequence entry; `None` samples per episode.
    pub spawn_entry: Option<usize>,
    /// Override the track's laps_per_race.
    pub laps_override: Option<usize>,
    /// +1: ego takes the + lateral slot; -1: sides swapped.
    pub spawn_slot_sign: f64,
}

impl EnvConfig {
    pub fn new(reward_mode: RewardMode) -> Self {
        Self {
            reward_mode,
            constants: RewardConstants::default(),
            scales: ObsScales::default(),
            nominal_params: QuadParams::default(),
            randomization: RandomizationRanges::default(),
            drone_radius: 0.08,
            episode_horizon: 1200,
            spawn_entry: None,
            laps_override: None,
            spawn_slot_sign: 1.0,
        }
    }
}

struct AgentSlot {
    state: QuadState,
    params: QuadParams,
    alloc_inv: Mat4,
    pid: PidState,
    status: RaceStatus,
    /// Distance to the current target gate at the start of the step.
    gate_dist_prev: f64,
    /// Race-line arc position at the previous step [m].
    arc_prev: f64,
    active: bool,
}

/// The two-agent racing MDP.
pub struct RacingEnv {
    pub cfg: EnvConfig,
    track: Arc<Track>,
    gate_frames: Vec<GateFrame>,
    /// Gate ids in pass order for this episode (track sequence rotated so the
    /// spawn target is entry 0, which keeps the status invariant exact).
    seq: Vec<usize>,
    /// Cumulative polyline arc length up to each sequence entry.
    seq_arc: Vec<f64>,
    lap_len: f64,
    laps_per_race: usize,
    agents: Vec<AgentSlot>,
    rng: ChaCha8Rng,
    elapsed_steps: usize,
    spawn_entry: usize,
    was_reset: bool,
}

impl RacingEnv {
    pub fn new(track: Arc<Track>, cfg: EnvConfig) -> Result<Self> {
        track.validate(cfg.drone_radius)?;
        cfg.randomization.validate()?;
        cfg.nominal_params.validate()?;
        if let Some(entry) = cfg.spawn_entry {
            if entry >= track.sequence.len() {
                return Err(Error::Config(format!(
                    "spawn entry {entry} out of range for sequence of {}",
                    track.sequence.len()
                )));
            }
        }
        let gate_frames = track.gates.iter().map(|g| g.frame()).collect();
        Ok(Self {
            cfg,
            track,
            gate_frames,
            seq: Vec::new(),
            seq_arc: Vec::new(),
            lap_len: 0.0,
            laps_per_race: 0,
            agents: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(0),
            elapsed_steps: 0,
            spawn_entry: 0,
            was_reset: false,
        })
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    /// Observation length for this track: 42, or 45 with obstacles.
    pub fn obs_dim(&self) -> usize {
        if self.track.obstacles.is_empty() {
            42
        } else {
            45
        }
    }

    pub fn is_multi_agent(&self) -> bool {
        self.cfg.reward_mode.is_multi_agent()
    }

    pub fn status(&self, agent: usize) -> &RaceStatus {
        &self.agents[agent].status
    }

    pub fn state(&self, agent: usize) -> &QuadState {
        &self.agents[agent].state
    }

    pub fn params(&self, agent: usize) -> &QuadParams {
        &self.agents[agent].params
    }

    pub fn elapsed_steps(&self) -> usize {
        self.elapsed_steps
    }

    pub fn laps_per_race(&self) -> usize {
        self.laps_per_race
    }

    /// Seconds simulated per env step.
    pub fn step_dt(&self) -> f64 {
        self.cfg.nominal_params.slow_dt
    }

    /// Gate id of the agent's current target in the episode's pass order.
    pub fn target_gate(&self, agent: usize) -> usize {
        self.seq[self.agents[agent].status.next_seq_index]
    }

    /// Agent leading by gate count, if any.
    pub fn leader(&self) -> Option<usize> {
        let (e, a) = (self.agents[EGO].status.gates_passed_total, self.agents[ADVERSARY].status.gates_passed_total);
        match e.cmp(&a) {
            std::cmp::Ordering::Greater => Some(EGO),
            std::cmp::Ordering::Less => Some(ADVERSARY),
            std::cmp::Ordering::Equal => None,
        }
    }

    /// True when no agent can act any more (both done or horizon reached).
    pub fn episode_over(&self) -> bool {
        let racing = self.agents.iter().filter(|a| a.active && !a.status.done()).count();
        racing == 0 || self.elapsed_steps >= self.cfg.episode_horizon
    }

    /// Spawn both drones, draw per-agent params, zero all bookkeeping.
    pub fn reset(&mut self, seed: u64) -> Result<[Observation; AGENT_COUNT]> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.elapsed_steps = 0;
        self.was_reset = true;

        let seq_len = self.track.sequence.len();
        self.spawn_entry = match self.cfg.spawn_entry {
            Some(e) => e,
            None => {
                let pick = self.rng.random_range(0..self.track.spawns.len());
                self.track.spawns[pick].seq_index
            }
        };
        // Rotate the sequence so the spawn target is entry 0.
        self.seq = (0..seq_len)
            .map(|i| self.track.sequence[(i + self.spawn_entry) % seq_len])
            .collect();
        self.seq_arc = cumulative_arcs(&self.seq, &self.track);
        self.lap_len = lap_length(&self.seq, &self.track);
        self.laps_per_race = self.cfg.laps_override.unwrap_or(self.track.laps_per_race);

        let spawn = self
            .track
            .spawns
            .iter()
            .find(|s| s.seq_index == self.spawn_entry)
            .cloned()
            .unwrap_or_else(|| self.track.spawns[0].clone());

        let gate = self.track.gates[self.seq[0]].clone();
        let frame = gate.frame();
        let yaw_face = frame.normal.y.atan2(frame.normal.x);

        self.agents.clear();
        for agent in 0..AGENT_COUNT {
            let active = agent == EGO || self.is_multi_agent();
            let params = randomize_params(&self.cfg.nominal_params, &self.cfg.randomization, &mut self.rng)?;
            let slot = if agent == EGO { self.cfg.spawn_slot_sign } else { -self.cfg.spawn_slot_sign };

            let mut position = Vec3::zeros();
            let mut found = false;
            for _ in 0..100 {
                let base = frame.center - frame.normal * spawn.back + frame.side * (slot * spawn.side);
                let candidate = base
                    + Vec3::new(
                        jitter(&mut self.rng, self.cfg.randomization.spawn_pos),
                        jitter(&mut self.rng, self.cfg.randomization.spawn_pos),
                        jitter(&mut self.rng, self.cfg.randomization.spawn_pos * 0.5),
                    );
                let clear_of_track = self.collision(&candidate) == Collision::Free;
                let clear_of_other = self
                    .agents
                    .first()
                    .map(|other| (other.state.position - candidate).norm() > 4.0 * self.cfg.drone_radius)
                    .unwrap_or(true);
                if clear_of_track && clear_of_other {
                    position = candidate;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::Config(format!(
                    "no collision-free spawn found in 100 draws (entry {})",
                    self.spawn_entry
                )));
            }

            let yaw = yaw_face + jitter(&mut self.rng, self.cfg.randomization.spawn_yaw);
            let mut state = QuadState::at_rest(position);
            state.rotation = yaw_rotation(yaw);
            // Flying start along the spawn heading, plus jitter.
            let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
            state.lin_vel = heading * spawn.speed
                + Vec3::new(
                    jitter(&mut self.rng, self.cfg.randomization.initial_vel),
                    jitter(&mut self.rng, self.cfg.randomization.initial_vel),
                    jitter(&mut self.rng, self.cfg.randomization.initial_vel),
                );

            let gate_dist_prev = (state.position - frame.center).norm();
            let arc_prev = self.arc_position(&state.position, &RaceStatus::new());
            let alloc_inv = allocation_inverse(&params);
            self.agents.push(AgentSlot {
                state,
                params,
                alloc_inv,
                pid: PidState::new(),
                status: RaceStatus::new(),
                gate_dist_prev,
                arc_prev,
                active,
            });
        }

        Ok([self.observe_noisy(EGO), self.observe_noisy(ADVERSARY)])
    }

    /// Advance one control tick. Erroring conditions: stepping a finished
    /// episode, or non-finite actions.
    pub fn step(&mut self, action_ego: &Action, action_adv: &Action) -> Result<StepResult> {
        if !self.was_reset {
            return Err(Error::Config("step before reset".into()));
        }
        if self.episode_over() {
            return Err(Error::Config("step on a finished episode".into()));
        }
        if !action_ego.is_finite() || !action_adv.is_finite() {
            return Err(Error::Numeric("non-finite action".into()));
        }

        let actions = [action_ego.clamped(), action_adv.clamped()];
        let mut rewards = [RewardBreakdown::default(), RewardBreakdown::default()];
        let mut info = StepInfo::default();
        let consts = self.cfg.constants.clone();

        // Command penalty and per-agent control commands.
        let mut commands = Vec::with_capacity(AGENT_COUNT);
        for agent in 0..AGENT_COUNT {
            let slot = &self.agents[agent];
            if slot.active && !slot.status.done() {
                let cmd = map_action(&actions[agent], &slot.params);
                let w = cmd.omega_des;
                rewards[agent].cmd = consts.cmd_rollpitch * (w.x * w.x + w.y * w.y) + consts.cmd_yaw * w.z * w.z;
                commands.push(Some(cmd));
            } else {
                commands.push(None);
            }
        }

        // Progress baseline: distance to the gate that is current *now*.
        let progress_start: Vec<(usize, f64)> = (0..AGENT_COUNT)
            .map(|a| {
                let slot = &self.agents[a];
                (slot.status.next_seq_index, slot.gate_dist_prev)
            })
            .collect();

        let substeps = self.cfg.nominal_params.substeps();
        let fast_dt = self.cfg.nominal_params.fast_dt;
        let mut contact = [false; AGENT_COUNT];

        for _ in 0..substeps {
            // Advance both drones from their pre-substep states.
            let mut moved: [Option<QuadState>; AGENT_COUNT] = [None, None];
            for agent in 0..AGENT_COUNT {
                let slot = &mut self.agents[agent];
                let Some(cmd) = &commands[agent] else { continue };
                if slot.status.done() {
                    continue;
                }
                let (torque, pid) = rate_pid(cmd, &slot.state.ang_vel, &slot.pid, &slot.params, fast_dt);
                slot.pid = pid;
                let wrench_des = Wrench { f_z: cmd.thrust_newtons(&slot.params), torque };
                let desired = allocate_with(&slot.alloc_inv, &wrench_des, &slot.params);
                let stepped = motor_step(&slot.state, &desired, &slot.params, fast_dt);
                let applied = wrench_from_motors(&stepped.motor_speeds, &slot.params);
                let drag = drag_force(&stepped, &slot.params);
                moved[agent] = Some(integrate(&stepped, &applied, &drag, &slot.params, fast_dt));
            }

            // Gate passes, resolved simultaneously so ties are symmetric.
            let mut passed = [false; AGENT_COUNT];
            for agent in 0..AGENT_COUNT {
                if let Some(next) = &moved[agent] {
                    let slot = &self.agents[agent];
                    let gate_id = self.seq[slot.status.next_seq_index];
                    let frame = &self.gate_frames[gate_id];
                    passed[agent] = gate_pass_check(&slot.state.position, &next.position, frame);
                }
            }
            let totals_after: Vec<usize> = (0..AGENT_COUNT)
                .map(|a| self.agents[a].status.gates_passed_total + passed[a] as usize)
                .collect();

            for agent in 0..AGENT_COUNT {
                let Some(next_state) = moved[agent].take() else { continue };
                self.agents[agent].state = next_state;
                if !passed[agent] {
                    continue;
                }
                let opponent = 1 - agent;
                let leading = !self.agents[opponent].active
                    || self.agents[opponent].status.crashed
                    || totals_after[agent] > totals_after[opponent];
                let seq_len = self.seq.len();
                let slot = &mut self.agents[agent];
                let entry = slot.status.next_seq_index;
                slot.status.gates_passed_total += 1;
                slot.status.next_seq_index = (entry + 1) % seq_len;
                rewards[agent].pass +=
                    if leading { consts.pass_leading } else { consts.pass_trailing };
                info.events.push(RaceEvent::GatePassed {
                    agent,
                    seq_entry: entry,
                    gate: self.seq[entry],
                    leading,
                });
                if slot.status.next_seq_index == 0 {
                    slot.status.laps_done += 1;
                    if leading {
                        rewards[agent].lap += consts.lap_leading;
                    }
                    info.events.push(RaceEvent::LapCompleted {
                        agent,
                        laps_done: slot.status.laps_done,
                        leading,
                    });
                    if slot.status.laps_done >= self.laps_per_race {
                        slot.status.finished = true;
                        info.events.push(RaceEvent::Finished { agent });
                    }
                }
            }

            // Collisions after both agents moved.
            let positions: Vec<Vec3> = self.agents.iter().map(|a| a.state.position).collect();
            for agent in 0..AGENT_COUNT {
                let slot = &self.agents[agent];
                if !slot.active || slot.status.done() {
                    continue;
                }
                let mut terminal = false;
                match self.collision(&positions[agent]) {
                    Collision::Terminal => terminal = true,
                    Collision::Contact => contact[agent] = true,
                    Collision::Free => {}
                }
                // Drone-vs-drone: contact on sphere overlap, terminal past
                // half a radius of interpenetration.
                let opponent = 1 - agent;
                if self.agents[opponent].active {
                    let dist = (positions[agent] - positions[opponent]).norm();
                    let r = self.cfg.drone_radius;
                    if dist < 1.5 * r {
                        terminal = true;
                    } else if dist < 2.0 * r {
                        contact[agent] = true;
                    }
                }
                if terminal {
                    let slot = &mut self.agents[agent];
                    slot.status.crashed = true;
                    rewards[agent].crash = consts.crash_terminal;
                    info.events.push(RaceEvent::TerminalCrash { agent });
                }
            }
        }

        // Contact penalty applies once per tick, unless the tick ended terminal.
        for agent in 0..AGENT_COUNT {
            if contact[agent] && rewards[agent].crash == 0.0 {
                rewards[agent].crash = consts.crash_contact;
                info.events.push(RaceEvent::Contact { agent });
            }
        }

        // Dense shaping terms.
        if self.cfg.reward_mode.has_progress() {
            for agent in 0..AGENT_COUNT {
                let slot = &self.agents[agent];
                if !slot.active || commands[agent].is_none() {
                    continue;
                }
                let (entry, d_before) = progress_start[agent];
                let gate_id = self.seq[entry];
                let d_after = (slot.state.position - self.gate_frames[gate_id].center).norm();
                rewards[agent].progress = d_before - d_after;
            }
        }
        if self.cfg.reward_mode.has_overtake() {
            let arcs: Vec<f64> = (0..AGENT_COUNT)
                .map(|a| self.arc_position(&self.agents[a].state.position, &self.agents[a].status))
                .collect();
            for agent in 0..AGENT_COUNT {
                let slot = &self.agents[agent];
                if !slot.active || commands[agent].is_none() {
                    continue;
                }
                let opponent = 1 - agent;
                let gap_now = arcs[agent] - arcs[opponent];
                let gap_prev = self.agents[agent].arc_prev - self.agents[opponent].arc_prev;
                if gap_now > consts.overtake_min && gap_now < consts.overtake_max {
                    rewards[agent].overtake = gap_now - gap_prev;
                }
            }
            for (agent, arc) in arcs.into_iter().enumerate() {
                self.agents[agent].arc_prev = arc;
            }
        }

        // Refresh the per-step progress baseline for the (possibly new) target.
        for agent in 0..AGENT_COUNT {
            let slot = &mut self.agents[agent];
            let gate_id = self.seq[slot.status.next_seq_index];
            slot.gate_dist_prev = (slot.state.position - self.gate_frames[gate_id].center).norm();
        }

        self.elapsed_steps += 1;
        let horizon_hit = self.elapsed_steps >= self.cfg.episode_horizon;
        let mut done = [false; AGENT_COUNT];
        for agent in 0..AGENT_COUNT {
            let slot = &self.agents[agent];
            let racing = slot.active && !slot.status.done();
            info.truncated[agent] = racing && horizon_hit;
            done[agent] = !slot.active || slot.status.done() || horizon_hit;
        }

        for agent in 0..AGENT_COUNT {
            rewards[agent] = rewards[agent].finalize();
        }
        Ok(StepResult {
            observations: [self.observe_noisy(EGO), self.observe_noisy(ADVERSARY)],
            rewards,
            done,
            info,
        })
    }

    /// Assemble one agent's scaled observation.
    pub fn observe(&self, agent: usize) -> Observation {
        let slot = &self.agents[agent];
        let opponent = &self.agents[1 - agent];
        let mut out = Vec::with_capacity(self.obs_dim());
        let rot_t = slot.state.rotation.transpose();
        let scales = self.cfg.scales;

        let v_body = rot_t * slot.state.lin_vel / scales.velocity;
        out.extend(v_body.iter());
        // Row-major rotation matrix.
        for r in 0..3 {
            for c in 0..3 {
                out.push(slot.state.rotation[(r, c)]);
            }
        }
        let current = self.seq[slot.status.next_seq_index];
        let next = self.seq[(slot.status.next_seq_index + 1) % self.seq.len()];
        for gate_id in [current, next] {
            for corner in self.gate_frames[gate_id].corners() {
                let rel = rot_t * (corner - slot.state.position) / scales.position;
                out.extend(rel.iter());
            }
        }
        if opponent.active {
            let p_opp = rot_t * (opponent.state.position - slot.state.position) / scales.position;
            let v_opp = rot_t * opponent.state.lin_vel / scales.velocity;
            out.extend(p_opp.iter());
            out.extend(v_opp.iter());
        } else {
            // Single-agent mode: fixed sentinel opponent fields.
            out.extend([0.0; 6]);
        }
        if !self.track.obstacles.is_empty() {
            let p = slot.state.position / scales.position;
            out.extend(p.iter());
        }
        debug_assert_eq!(out.len(), self.obs_dim());
        Observation(out)
    }

    /// Apply per-entry observation noise (training only; uses the env rng).
    pub fn observe_noisy(&mut self, agent: usize) -> Observation {
        let mut obs = self.observe(agent);
        let std = self.cfg.randomization.obs_noise_std;
        if std > 0.0 {
            for v in &mut obs.0 {
                let eps: f64 = self.rng.sample(rand_distr::StandardNormal);
                *v += std * eps;
            }
        }
        obs
    }

    /// Same classification as [`Track::collision_check`], using the cached
    /// gate frames.
    fn collision(&self, pos: &Vec3) -> Collision {
        let radius = self.cfg.drone_radius;
        if pos.z < radius || !self.track.bounds.contains(pos) {
            return Collision::Terminal;
        }
        let mut contact = false;
        for frame in &self.gate_frames {
            match classify_surface(frame_bar_distance(frame, pos), radius) {
                Collision::Terminal => return Collision::Terminal,
                Collision::Contact => contact = true,
                Collision::Free => {}
            }
        }
        for ob in &self.track.obstacles {
            match classify_surface(ob.distance(pos), radius) {
                Collision::Terminal => return Collision::Terminal,
                Collision::Contact => contact = true,
                Collision::Free => {}
            }
        }
        if contact {
            Collision::Contact
        } else {
            Collision::Free
        }
    }

    /// Race-line arc position: laps plus cumulative polyline length, with the
    /// drone projected onto its current segment (previous gate -> target).
    fn arc_position(&self, pos: &Vec3, status: &RaceStatus) -> f64 {
        let k = status.next_seq_index;
        let target = self.track.gates[self.seq[k]].center;
        let prev_entry = (k + self.seq.len() - 1) % self.seq.len();
        let prev = self.track.gates[self.seq[prev_entry]].center;
        let seg = target - prev;
        let seg_len = seg.norm();
        let t = if seg_len > 1e-9 {
            ((pos - prev).dot(&seg) / (seg_len * seg_len)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let arc_at_target = status.laps_done as f64 * self.lap_len + self.seq_arc[k];
        arc_at_target - seg_len * (1.0 - t)
    }
}

fn yaw_rotation(yaw: f64) -> Mat3 {
    let (s, c) = yaw.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Cumulative arc length from entry 0 to each entry along the gate-center
/// polyline; entry 0 is 0.
fn cumulative_arcs(seq: &[usize], track: &Track) -> Vec<f64> {
    let mut arcs = Vec::with_capacity(seq.len());
    let mut acc = 0.0;
    for (i, &gate) in seq.iter().enumerate() {
        if i > 0 {
            acc += (track.gates[gate].center - track.gates[seq[i - 1]].center).norm();
        }
        arcs.push(acc);
    }
    arcs
}

/// Closed-loop lap length of the polyline.
fn lap_length(seq: &[usize], track: &Track) -> f64 {
    let mut acc = 0.0;
    for i in 0..seq.len() {
        let a = track.gates[seq[i]].center;
        let b = track.gates[seq[(i + 1) % seq.len()]].center;
        acc += (b - a).norm();
    }
    acc
}
