//! Independent-PPO training: parallel rollout collection from both agents,
//! GAE, a clipped surrogate averaged over the agents, separate privileged
//! critics, and per-iteration training logs.
//!
//! Rollouts step all envs in parallel with read-only network parameters and
//! gather results in fixed env order, so training is seed-deterministic
//! regardless of worker scheduling. The update phase is single-threaded.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::Action;
use crate::env::{EnvConfig, Observation, RacingEnv, AGENT_COUNT, EGO};
use crate::net::{Mlp, MlpGrads, NetSpec, Policy};
use crate::physics::Vec4;
use crate::track::Track;
use crate::{Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub rollout_horizon: usize,
    pub num_envs: usize,
    pub epochs_per_update: usize,
    pub minibatch_count: usize,
    pub total_env_steps: u64,
    pub seed: u64,
    /// Run a deterministic eval pass every this many iterations (0 = never);
    /// iteration 0 and the final iteration are always evaluated.
    pub eval_cadence: usize,
    pub eval_episodes: usize,
    /// Write a checkpoint every this many iterations (0 = only at the end).
    pub checkpoint_every: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Initial policy std per action channel (thrust, roll, pitch, yaw); a
    /// single entry applies to all four. Exploration noise on thrust is what
    /// kills fresh drones, so it defaults lower than the rate channels.
    pub initial_std: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            entropy_coef: 0.003,
            value_coef: 0.5,
            max_grad_norm: 1.0,
            rollout_horizon: 64,
            num_envs: 256,
            epochs_per_update: 4,
            minibatch_count: 8,
            total_env_steps: 2_000_000,
            seed: 1,
            eval_cadence: 25,
            eval_episodes: 8,
            checkpoint_every: 0,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![128, 128],
            initial_std: vec![0.15, 0.2, 0.2, 0.2],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.clip_epsilon <= 0.0 {
            return Err(Error::Config("clip_epsilon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gae_lambda must be in [0, 1]".into()));
        }
        if self.rollout_horizon == 0 || self.num_envs == 0 {
            return Err(Error::Config("rollout_horizon and num_envs must be positive".into()));
        }
        let batch = self.rollout_horizon * self.num_envs;
        if self.minibatch_count == 0 || batch % self.minibatch_count != 0 {
            return Err(Error::Config(format!(
                "minibatch_count {} must divide horizon*num_envs = {batch}",
                self.minibatch_count
            )));
        }
        if !(self.initial_std.len() == 1 || self.initial_std.len() == 4)
            || self.initial_std.iter().any(|s| *s <= 0.0)
        {
            return Err(Error::Config(format!(
                "initial_std needs 1 or 4 positive entries, got {:?}",
                self.initial_std
            )));
        }
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        let per_iter = (self.rollout_horizon * self.num_envs) as u64;
        self.total_env_steps.div_ceil(per_iter) as usize
    }
}

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t;
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}; returns = A + V.
///
/// `values` has one entry per step; `bootstrap` is V(s_T) after the last step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(
        rewards.len() == values.len() && rewards.len() == dones.len(),
        "length mismatch: {} rewards, {} values, {} dones",
        rewards.len(),
        values.len(),
        dones.len()
    );
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut returns = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 == n { bootstrap } else { values[t + 1] };
        let non_terminal = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * non_terminal - values[t];
        carry = delta + gamma * lambda * non_terminal * carry;
        advantages[t] = carry;
        returns[t] = carry + values[t];
    }
    (advantages, returns)
}

/// One agent's flattened rollout storage; column index is `t * num_envs + env`.
pub struct AgentRollout {
    pub obs: DMatrix<f64>,
    /// Privileged critic input: own obs concatenated with the opponent's.
    pub critic_obs: DMatrix<f64>,
    pub actions: Vec<Vec4>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// False where the agent was already done when the step was taken; those
    /// columns carry no learning signal.
    pub valid: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl AgentRollout {
    fn new(obs_dim: usize, len: usize) -> Self {
        Self {
            obs: DMatrix::zeros(obs_dim, len),
            critic_obs: DMatrix::zeros(2 * obs_dim, len),
            actions: vec![Vec4::zeros(); len],
            log_probs: vec![0.0; len],
            values: vec![0.0; len],
            rewards: vec![0.0; len],
            dones: vec![false; len],
            valid: vec![false; len],
            advantages: vec![0.0; len],
            returns: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Deterministic per-episode seed derivation (splitmix64 over a mixed key).
pub fn derive_seed(master: u64, env_index: u64, episode: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(env_index.wrapping_add(1)))
        .wrapping_add(0x94d0_49bb_1331_11eb_u64.wrapping_mul(episode.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fixed-order batch of persistent environments with per-env rng streams.
pub struct VecEnvs {
    envs: Vec<RacingEnv>,
    action_rngs: Vec<ChaCha8Rng>,
    episode_counters: Vec<u64>,
    last_obs: Vec<[Observation; AGENT_COUNT]>,
    master_seed: u64,
    /// Per-env, per-agent accumulators for episode statistics.
    ep_reward: Vec<[f64; AGENT_COUNT]>,
    /// Completed-episode stats gathered since the last drain.
    finished_episodes: Vec<EpisodeStats>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub reward: [f64; AGENT_COUNT],
    pub gates: [usize; AGENT_COUNT],
    pub laps: [usize; AGENT_COUNT],
}

impl VecEnvs {
    pub fn new(track: Arc<Track>, env_cfg: &EnvConfig, num_envs: usize, master_seed: u64) -> Result<Self> {
        let mut envs = Vec::with_capacity(num_envs);
        let mut action_rngs = Vec::with_capacity(num_envs);
        let mut last_obs = Vec::with_capacity(num_envs);
        for i in 0..num_envs {
            let mut env = RacingEnv::new(track.clone(), env_cfg.clone())?;
            let obs = env.reset(derive_seed(master_seed, i as u64, 0))?;
            last_obs.push(obs);
            envs.push(env);
            action_rngs.push(ChaCha8Rng::seed_from_u64(derive_seed(
                master_seed ^ 0xa5a5_a5a5_a5a5_a5a5,
                i as u64,
                0,
            )));
        }
        Ok(Self {
            envs,
            action_rngs,
            episode_counters: vec![0; num_envs],
            last_obs,
            master_seed,
            ep_reward: vec![[0.0; AGENT_COUNT]; num_envs],
            finished_episodes: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.envs[0].obs_dim()
    }

    pub fn drain_finished(&mut self) -> Vec<EpisodeStats> {
        std::mem::take(&mut self.finished_episodes)
    }
}

/// Actor or critic network plus its Adam state, updated over flat parameters.
pub struct FlatAdam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlatAdam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn restore(&mut self, m: Vec<f64>, v: Vec<f64>, t: u64) {
        assert_eq!(m.len(), self.m.len());
        assert_eq!(v.len(), self.v.len());
        self.m = m;
        self.v = v;
        self.t = t;
    }

    /// One Adam step; `grad` is the flat gradient of the loss.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scale the gradient down to `max_norm` when it exceeds it.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Per-iteration record of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub env_steps: u64,
    /// Mean total episode reward per agent over episodes finished this
    /// iteration (carried forward when none finished).
    pub mean_reward: [f64; AGENT_COUNT],
    pub episodes_finished: usize,
    pub mean_gate_passes: [f64; AGENT_COUNT],
    pub mean_lap_count: [f64; AGENT_COUNT],
    pub surrogate_loss: [f64; AGENT_COUNT],
    pub value_loss: [f64; AGENT_COUNT],
    pub entropy: [f64; AGENT_COUNT],
    pub clip_fraction: [f64; AGENT_COUNT],
    /// Deterministic-policy eval: mean gate passes per episode, when run.
    pub eval_gate_passes: Option<[f64; AGENT_COUNT]>,
    pub wall_clock_s: f64,
}

/// Loss statistics of one update.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub surrogate_loss: [f64; AGENT_COUNT],
    pub value_loss: [f64; AGENT_COUNT],
    pub entropy: [f64; AGENT_COUNT],
    pub clip_fraction: [f64; AGENT_COUNT],
}

/// Actor surrogate loss and analytic gradients on a fixture of transitions.
///
/// Returns (mean clipped-surrogate loss including the entropy term, network
/// gradients, log-std gradient, clip fraction). The loss is
/// `-mean(min(r A, clip(r) A)) - entropy_coef * H`.
pub fn actor_loss_and_grads(
    policy: &Policy,
    obs: &DMatrix<f64>,
    actions: &[Vec4],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_epsilon: f64,
    entropy_coef: f64,
) -> (f64, MlpGrads, DVector<f64>, f64) {
    let batch = actions.len();
    assert!(batch > 0, "empty actor batch");
    assert_eq!(obs.ncols(), batch);
    let dim = policy.action_dim();

    let cache = policy.mlp.forward_batch(obs);
    let raw = &cache.output;
    let mut output_grad = DMatrix::zeros(dim, batch);
    let mut log_std_grad = DVector::zeros(dim);
    let mut loss = 0.0;
    let mut clipped_count = 0usize;
    let scale = 1.0 / batch as f64;

    for b in 0..batch {
        // Squashed mean and Gaussian log-prob of the stored raw sample.
        let mut lp_new = 0.0;
        let mut dlp_dmean = [0.0; 4];
        let mut dlp_dlogstd = [0.0; 4];
        for i in 0..dim {
            let mean = raw[(i, b)].tanh();
            let sigma = policy.log_std[i].exp();
            let z = (actions[b][i] - mean) / sigma;
            lp_new += -0.5 * z * z - policy.log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
            dlp_dmean[i] = z / sigma;
            dlp_dlogstd[i] = z * z - 1.0;
        }
        let ratio = (lp_new - old_log_probs[b]).exp();
        let adv = advantages[b];
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv;
        loss += -unclipped.min(clipped) * scale;
        if (ratio - 1.0).abs() > clip_epsilon {
            clipped_count += 1;
        }
        // Gradient flows through the unclipped branch when it attains the min.
        let dlogpi = if unclipped <= clipped { -adv * ratio * scale } else { 0.0 };
        if dlogpi != 0.0 {
            for i in 0..dim {
                let mean = raw[(i, b)].tanh();
                let dmean_draw = 1.0 - mean * mean;
                output_grad[(i, b)] = dlogpi * dlp_dmean[i] * dmean_draw;
                log_std_grad[i] += dlogpi * dlp_dlogstd[i];
            }
        }
    }

    // Entropy bonus: d(-c H)/d log_std_i = -c (state independent).
    loss -= entropy_coef * policy.entropy();
    for i in 0..dim {
        log_std_grad[i] -= entropy_coef;
    }

    let (grads, _) = policy.mlp.backward_batch(&cache, &output_grad);
    let clip_fraction = clipped_count as f64 / batch as f64;
    (loss, grads, log_std_grad, clip_fraction)
}

/// Critic squared-error loss `value_coef * mean((V - R)^2)` and its gradients.
pub fn critic_loss_and_grads(
    critic: &Mlp,
    input: &DMatrix<f64>,
    returns: &[f64],
    value_coef: f64,
) -> (f64, MlpGrads) {
    let batch = returns.len();
    assert!(batch > 0, "empty critic batch");
    assert_eq!(input.ncols(), batch);
    let cache = critic.forward_batch(input);
    let mut output_grad = DMatrix::zeros(1, batch);
    let mut loss = 0.0;
    let scale = 1.0 / batch as f64;
    for b in 0..batch {
        let err = cache.output[(0, b)] - returns[b];
        loss += value_coef * err * err * scale;
        output_grad[(0, b)] = 2.0 * value_coef * err * scale;
    }
    let (grads, _) = critic.backward_batch(&cache, &output_grad);
    (loss, grads)
}

/// Normalize advantages in place to zero mean / unit std over the valid
/// entries (skipped when the std underflows).
pub fn normalize_advantages(adv: &mut [f64], valid: &[bool]) {
    let n = valid.iter().filter(|v| **v).count();
    if n == 0 {
        return;
    }
    let mean = adv
        .iter()
        .zip(valid)
        .filter(|(_, v)| **v)
        .map(|(a, _)| a)
        .sum::<f64>()
        / n as f64;
    let var = adv
        .iter()
        .zip(valid)
        .filter(|(_, v)| **v)
        .map(|(a, _)| (a - mean) * (a - mean))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    if std < 1e-8 {
        return;
    }
    for (a, v) in adv.iter_mut().zip(valid) {
        if *v {
            *a = (*a - mean) / std;
        }
    }
}

/// One learner: policy (or critic) parameters plus optimizer state.
pub struct ActorLearner {
    pub policy: Policy,
    pub opt: FlatAdam,
}

impl ActorLearner {
    pub fn new(policy: Policy, lr: f64) -> Self {
        let n = policy.mlp.spec.param_count() + policy.action_dim();
        Self { policy, opt: FlatAdam::new(n, lr) }
    }

    /// Apply one clipped Adam step from network + log-std gradients.
    pub fn step(&mut self, grads: &MlpGrads, log_std_grad: &DVector<f64>, max_norm: f64) {
        let mut flat = Mlp { spec: self.policy.mlp.spec.clone(), layers: grads.layers.clone() }
            .flat_params();
        flat.extend(log_std_grad.iter());
        clip_grad_norm(&mut flat, max_norm);
        let mut params = self.policy.mlp.flat_params();
        params.extend(self.policy.log_std.iter());
        self.opt.step(&mut params, &flat);
        let dim = self.policy.action_dim();
        let (net_part, std_part) = params.split_at(params.len() - dim);
        self.policy.mlp = Mlp::from_flat(self.policy.mlp.spec.clone(), net_part)
            .expect("flat params round-trip");
        self.policy.log_std = DVector::from_column_slice(std_part);
    }
}

pub struct CriticLearner {
    pub net: Mlp,
    pub opt: FlatAdam,
}

impl CriticLearner {
    pub fn new(net: Mlp, lr: f64) -> Self {
        let n = net.spec.param_count();
        Self { net, opt: FlatAdam::new(n, lr) }
    }

    pub fn step(&mut self, grads: &MlpGrads, max_norm: f64) {
        let mut flat =
            Mlp { spec: self.net.spec.clone(), layers: grads.layers.clone() }.flat_params();
        clip_grad_norm(&mut flat, max_norm);
        let mut params = self.net.flat_params();
        self.opt.step(&mut params, &flat);
        self.net = Mlp::from_flat(self.net.spec.clone(), &params).expect("flat params round-trip");
    }
}

/// The IPPO trainer: owns both agents' learners and a batch of envs.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub env_cfg: EnvConfig,
    pub track: Arc<Track>,
    pub actors: Vec<ActorLearner>,
    pub critics: Vec<CriticLearner>,
    pub envs: VecEnvs,
    rng: ChaCha8Rng,
    pub iteration: usize,
    pub env_steps: u64,
    last_episode_stats: [EpisodeStats; 1],
    start: Instant,
    /// Trailing per-iteration mean rewards, for best-actor selection.
    pub reward_history: Vec<[f64; AGENT_COUNT]>,
}

impl Trainer {
    pub fn new(track: Arc<Track>, env_cfg: EnvConfig, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let envs = VecEnvs::new(track.clone(), &env_cfg, cfg.num_envs, cfg.seed)?;
        let obs_dim = envs.obs_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_ac_e5);
        let mut actors = Vec::new();
        let mut critics = Vec::new();
        // Bias the thrust channel so the initial mean action hovers instead
        // of climbing at half a g; exploration starts from stable flight.
        let hover_raw = (2.0 / env_cfg.nominal_params.thrust_to_weight - 1.0).atanh();
        for _ in 0..AGENT_COUNT {
            let actor_spec = NetSpec::new(obs_dim, &cfg.actor_hidden, 4);
            let critic_spec = NetSpec::new(2 * obs_dim, &cfg.critic_hidden, 1);
            let mut policy = Policy::init_with_gain(actor_spec, 1e-4, &mut rng)?;
            policy.mlp.layers.last_mut().expect("nonempty").bias[0] = hover_raw;
            for i in 0..4 {
                let std = if cfg.initial_std.len() == 1 {
                    cfg.initial_std[0]
                } else {
                    cfg.initial_std[i]
                };
                policy.log_std[i] = std.ln();
            }
            actors.push(ActorLearner::new(policy, cfg.learning_rate));
            critics.push(CriticLearner::new(
                Mlp::init(critic_spec, 1.0, &mut rng)?,
                cfg.learning_rate,
            ));
        }
        Ok(Self {
            cfg,
            env_cfg,
            track,
            actors,
            critics,
            envs,
            rng,
            iteration: 0,
            env_steps: 0,
            last_episode_stats: [EpisodeStats {
                reward: [0.0; AGENT_COUNT],
                gates: [0; AGENT_COUNT],
                laps: [0; AGENT_COUNT],
            }],
            start: Instant::now(),
            reward_history: Vec::new(),
        })
    }

    fn agent_indices(&self) -> Vec<usize> {
        if self.env_cfg.reward_mode.is_multi_agent() {
            (0..AGENT_COUNT).collect()
        } else {
            vec![EGO]
        }
    }

    /// Collect one rollout from every env for both agents.
    pub fn collect_rollouts(&mut self) -> Result<Vec<AgentRollout>> {
        let horizon = self.cfg.rollout_horizon;
        let n = self.envs.len();
        let obs_dim = self.envs.obs_dim();
        let mut rollouts: Vec<AgentRollout> =
            (0..AGENT_COUNT).map(|_| AgentRollout::new(obs_dim, horizon * n)).collect();
        let multi = self.env_cfg.reward_mode.is_multi_agent();

        for t in 0..horizon {
            // Batched policy means and privileged values from the current obs.
            let mut obs_mats = Vec::with_capacity(AGENT_COUNT);
            let mut critic_mats = Vec::with_capacity(AGENT_COUNT);
            for agent in 0..AGENT_COUNT {
                let own = DMatrix::from_fn(obs_dim, n, |r, c| self.envs.last_obs[c][agent].0[r]);
                let opp = DMatrix::from_fn(obs_dim, n, |r, c| self.envs.last_obs[c][1 - agent].0[r]);
                let mut joint = DMatrix::zeros(2 * obs_dim, n);
                joint.rows_mut(0, obs_dim).copy_from(&own);
                joint.rows_mut(obs_dim, obs_dim).copy_from(&opp);
                obs_mats.push(own);
                critic_mats.push(joint);
            }
            let means: Vec<DMatrix<f64>> = (0..AGENT_COUNT)
                .map(|a| self.actors[a].policy.mean_batch(&obs_mats[a]))
                .collect();
            let values: Vec<DMatrix<f64>> = (0..AGENT_COUNT)
                .map(|a| self.critics[a].net.forward_batch(&critic_mats[a]).output)
                .collect();

            // Sample per-env actions from per-env rng streams.
            let mut actions: Vec<[Action; AGENT_COUNT]> = Vec::with_capacity(n);
            let mut samples: Vec<[(Vec4, f64); AGENT_COUNT]> = Vec::with_capacity(n);
            for e in 0..n {
                let mut row_actions = [Action::zero(); AGENT_COUNT];
                let mut row_samples = [(Vec4::zeros(), 0.0); AGENT_COUNT];
                for agent in 0..AGENT_COUNT {
                    if agent != EGO && !multi {
                        continue;
                    }
                    let mean = DVector::from_fn(4, |i, _| means[agent][(i, e)]);
                    let s = self.actors[agent]
                        .policy
                        .sample_from_mean(&mean, &mut self.envs.action_rngs[e]);
                    row_actions[agent] = s.action;
                    row_samples[agent] = (s.raw_sample, s.log_prob);
                }
                actions.push(row_actions);
                samples.push(row_samples);
            }

            // Racing state before stepping, to mark valid transitions.
            let racing_before: Vec<[bool; AGENT_COUNT]> = (0..n)
                .map(|e| {
                    let env = &self.envs.envs[e];
                    [
                        !env.status(0).done(),
                        multi && !env.status(1).done(),
                    ]
                })
                .collect();

            // Step all envs in parallel; results gathered in env order.
            let results: Vec<_> = self
                .envs
                .envs
                .par_iter_mut()
                .zip(actions.par_iter())
                .map(|(env, acts)| env.step(&acts[0], &acts[1]))
                .collect();

            let mut pending_bootstrap: Vec<(usize, usize)> = Vec::new();
            for (e, result) in results.into_iter().enumerate() {
                let step = result?;
                let col = t * n + e;
                for agent in 0..AGENT_COUNT {
                    let roll = &mut rollouts[agent];
                    roll.obs.set_column(col, &obs_mats[agent].column(e));
                    roll.critic_obs.set_column(col, &critic_mats[agent].column(e));
                    let (raw, lp) = samples[e][agent];
                    roll.actions[col] = raw;
                    roll.log_probs[col] = lp;
                    roll.values[col] = values[agent][(0, e)];
                    roll.rewards[col] = step.rewards[agent].total;
                    roll.valid[col] = racing_before[e][agent];
                    roll.dones[col] = step.done[agent];
                    if step.info.truncated[agent] {
                        pending_bootstrap.push((e, agent));
                    }
                    if racing_before[e][agent] {
                        self.envs.ep_reward[e][agent] += step.rewards[agent].total;
                    }
                }
                self.envs.last_obs[e] = step.observations;
            }
            self.env_steps += n as u64;

            // Time-limit bootstrapping: inject gamma * V(s_T) at truncations.
            if !pending_bootstrap.is_empty() {
                for agent in 0..AGENT_COUNT {
                    let cols: Vec<usize> = pending_bootstrap
                        .iter()
                        .filter(|(_, a)| *a == agent)
                        .map(|(e, _)| *e)
                        .collect();
                    if cols.is_empty() {
                        continue;
                    }
                    let mut joint = DMatrix::zeros(2 * obs_dim, cols.len());
                    for (k, &e) in cols.iter().enumerate() {
                        for r in 0..obs_dim {
                            joint[(r, k)] = self.envs.last_obs[e][agent].0[r];
                            joint[(obs_dim + r, k)] = self.envs.last_obs[e][1 - agent].0[r];
                        }
                    }
                    let v = self.critics[agent].net.forward_batch(&joint).output;
                    for (k, &e) in cols.iter().enumerate() {
                        rollouts[agent].rewards[t * n + e] += self.cfg.gamma * v[(0, k)];
                    }
                }
            }

            // Reset finished episodes (fresh seed per episode).
            for e in 0..n {
                if self.envs.envs[e].episode_over() {
                    let env = &self.envs.envs[e];
                    self.envs.finished_episodes.push(EpisodeStats {
                        reward: self.envs.ep_reward[e],
                        gates: [
                            env.status(0).gates_passed_total,
                            env.status(1).gates_passed_total,
                        ],
                        laps: [env.status(0).laps_done, env.status(1).laps_done],
                    });
                    self.envs.ep_reward[e] = [0.0; AGENT_COUNT];
                    self.envs.episode_counters[e] += 1;
                    let seed =
                        derive_seed(self.envs.master_seed, e as u64, self.envs.episode_counters[e]);
                    self.envs.last_obs[e] = self.envs.envs[e].reset(seed)?;
                }
            }
        }

        // GAE per env stream, bootstrapped with the value of the current obs.
        for agent in self.agent_indices() {
            let mut joint = DMatrix::zeros(2 * obs_dim, n);
            for e in 0..n {
                for r in 0..obs_dim {
                    joint[(r, e)] = self.envs.last_obs[e][agent].0[r];
                    joint[(obs_dim + r, e)] = self.envs.last_obs[e][1 - agent].0[r];
                }
            }
            let tail_values = self.critics[agent].net.forward_batch(&joint).output;
            let roll = &mut rollouts[agent];
            for e in 0..n {
                let mut rewards = Vec::with_capacity(horizon);
                let mut values = Vec::with_capacity(horizon);
                let mut dones = Vec::with_capacity(horizon);
                for t in 0..horizon {
                    let col = t * n + e;
                    rewards.push(roll.rewards[col]);
                    values.push(roll.values[col]);
                    // Invalid (frozen) steps break the chain like terminals.
                    dones.push(roll.dones[col] || !roll.valid[col]);
                }
                let (adv, ret) = compute_gae(
                    &rewards,
                    &values,
                    tail_values[(0, e)],
                    &dones,
                    self.cfg.gamma,
                    self.cfg.gae_lambda,
                );
                for t in 0..horizon {
                    let col = t * n + e;
                    roll.advantages[col] = adv[t];
                    roll.returns[col] = ret[t];
                }
            }
        }
        Ok(rollouts)
    }

    /// Clipped-surrogate update over minibatches; both agents' actor losses
    /// are averaged, critics train on their own returns.
    pub fn update(&mut self, rollouts: &mut [AgentRollout]) -> Result<UpdateStats> {
        let agents = self.agent_indices();
        let agent_scale = 1.0 / agents.len() as f64;
        for &agent in &agents {
            let (adv, valid) = {
                let r = &mut rollouts[agent];
                (&mut r.advantages, &r.valid)
            };
            normalize_advantages(adv, valid);
        }

        let total = rollouts[EGO].len();
        let mb_size = total / self.cfg.minibatch_count;
        let mut stats = UpdateStats::default();
        let mut stat_batches = 0usize;

        for _epoch in 0..self.cfg.epochs_per_update {
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(&mut self.rng);
            for mb in 0..self.cfg.minibatch_count {
                let idx = &order[mb * mb_size..(mb + 1) * mb_size];
                for &agent in &agents {
                    let roll = &rollouts[agent];
                    let cols: Vec<usize> = idx.iter().copied().filter(|&c| roll.valid[c]).collect();
                    if cols.is_empty() {
                        continue;
                    }
                    let obs = roll.obs.select_columns(&cols);
                    let actions: Vec<Vec4> = cols.iter().map(|&c| roll.actions[c]).collect();
                    let old_lp: Vec<f64> = cols.iter().map(|&c| roll.log_probs[c]).collect();
                    let adv: Vec<f64> = cols.iter().map(|&c| roll.advantages[c]).collect();
                    let (loss, mut grads, mut lsg, clip_frac) = actor_loss_and_grads(
                        &self.actors[agent].policy,
                        &obs,
                        &actions,
                        &old_lp,
                        &adv,
                        self.cfg.clip_epsilon,
                        self.cfg.entropy_coef,
                    );
                    if !loss.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite actor loss for agent {agent} at iteration {}",
                            self.iteration
                        )));
                    }
                    // The IPPO objective averages the agents' surrogates.
                    grads.scale(agent_scale);
                    lsg *= agent_scale;
                    self.actors[agent].step(&grads, &lsg, self.cfg.max_grad_norm);

                    let critic_in = roll.critic_obs.select_columns(&cols);
                    let rets: Vec<f64> = cols.iter().map(|&c| roll.returns[c]).collect();
                    let (vloss, vgrads) = critic_loss_and_grads(
                        &self.critics[agent].net,
                        &critic_in,
                        &rets,
                        self.cfg.value_coef,
                    );
                    if !vloss.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite critic loss for agent {agent} at iteration {}",
                            self.iteration
                        )));
                    }
                    self.critics[agent].step(&vgrads, self.cfg.max_grad_norm);

                    stats.surrogate_loss[agent] += loss;
                    stats.value_loss[agent] += vloss;
                    stats.entropy[agent] += self.actors[agent].policy.entropy();
                    stats.clip_fraction[agent] += clip_frac;
                }
                stat_batches += 1;
            }
        }
        if stat_batches > 0 {
            for agent in 0..AGENT_COUNT {
                stats.surrogate_loss[agent] /= stat_batches as f64;
                stats.value_loss[agent] /= stat_batches as f64;
                stats.entropy[agent] /= stat_batches as f64;
                stats.clip_fraction[agent] /= stat_batches as f64;
            }
        }
        Ok(stats)
    }

    /// Deterministic eval: mean-action episodes on nominal params with spawn
    /// jitter only. Returns mean gate passes per episode per agent.
    pub fn evaluate(&self) -> Result<[f64; AGENT_COUNT]> {
        let mut cfg = self.env_cfg.clone();
        cfg.randomization = crate::env::RandomizationRanges::none();
        cfg.randomization.spawn_pos = 0.1;
        cfg.randomization.spawn_yaw = 0.1;
        cfg.spawn_entry = Some(0);
        let mut env = RacingEnv::new(self.track.clone(), cfg)?;
        let multi = self.env_cfg.reward_mode.is_multi_agent();
        let mut totals = [0.0; AGENT_COUNT];
        for ep in 0..self.cfg.eval_episodes.max(1) {
            let mut obs = env.reset(derive_seed(self.cfg.seed ^ 0xeba1, ep as u64, 0))?;
            while !env.episode_over() {
                let a0 = self.actors[0]
                    .policy
                    .act_mean(&DVector::from_column_slice(obs[0].as_slice()));
                let a1 = if multi {
                    self.actors[1]
                        .policy
                        .act_mean(&DVector::from_column_slice(obs[1].as_slice()))
                } else {
                    Action::zero()
                };
                let step = env.step(&a0, &a1)?;
                obs = step.observations;
            }
            for agent in 0..AGENT_COUNT {
                totals[agent] += env.status(agent).gates_passed_total as f64;
            }
        }
        let n = self.cfg.eval_episodes.max(1) as f64;
        Ok([totals[0] / n, totals[1] / n])
    }

    /// One full iteration: collect, update, log.
    pub fn iterate(&mut self) -> Result<TrainRecord> {
        let eval_now = self.should_eval();
        let eval_gate_passes = if eval_now { Some(self.evaluate()?) } else { None };

        let mut rollouts = self.collect_rollouts()?;
        let stats = self.update(&mut rollouts)?;

        let finished = self.envs.drain_finished();
        let episodes_finished = finished.len();
        let mut mean_reward = self.last_episode_stats[0].reward;
        let mut mean_gates = [
            self.last_episode_stats[0].gates[0] as f64,
            self.last_episode_stats[0].gates[1] as f64,
        ];
        let mut mean_laps = [
            self.last_episode_stats[0].laps[0] as f64,
            self.last_episode_stats[0].laps[1] as f64,
        ];
        if episodes_finished > 0 {
            let n = episodes_finished as f64;
            for agent in 0..AGENT_COUNT {
                mean_reward[agent] = finished.iter().map(|s| s.reward[agent]).sum::<f64>() / n;
                mean_gates[agent] = finished.iter().map(|s| s.gates[agent] as f64).sum::<f64>() / n;
                mean_laps[agent] = finished.iter().map(|s| s.laps[agent] as f64).sum::<f64>() / n;
            }
            self.last_episode_stats[0] = EpisodeStats {
                reward: mean_reward,
                gates: [mean_gates[0] as usize, mean_gates[1] as usize],
                laps: [mean_laps[0] as usize, mean_laps[1] as usize],
            };
        }
        self.reward_history.push(mean_reward);

        let record = TrainRecord {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_reward,
            episodes_finished,
            mean_gate_passes: mean_gates,
            mean_lap_count: mean_laps,
            surrogate_loss: stats.surrogate_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            eval_gate_passes,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
        };
        self.iteration += 1;
        Ok(record)
    }

    fn should_eval(&self) -> bool {
        let last = self.iteration + 1 == self.cfg.iterations();
        self.iteration == 0
            || last
            || (self.cfg.eval_cadence > 0 && self.iteration % self.cfg.eval_cadence == 0)
    }

    /// Actor with the greater trailing-100-iteration mean reward.
    pub fn best_actor(&self) -> usize {
        if !self.env_cfg.reward_mode.is_multi_agent() {
            return EGO;
        }
        let window = self.reward_history.len().min(100);
        if window == 0 {
            return EGO;
        }
        let tail = &self.reward_history[self.reward_history.len() - window..];
        let mean = |agent: usize| tail.iter().map(|r| r[agent]).sum::<f64>() / window as f64;
        if mean(1) > mean(0) {
            1
        } else {
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RewardMode;
    use rand::Rng;
    use crate::track::{builtin_track, BuiltinTrack};

    #[test]
    fn gae_single_terminal_step() {
        let (adv, ret) = compute_gae(&[1.0], &[0.0], 9.9, &[true], 0.99, 0.95);
        assert_eq!(adv, vec![1.0]);
        assert_eq!(ret, vec![1.0]);
    }

    #[test]
    fn gae_lambda_zero_is_td_residual() {
        let rewards = [0.5, -0.2, 1.0];
        let values = [0.3, 0.1, 0.4];
        let dones = [false, false, false];
        let (adv, _) = compute_gae(&rewards, &values, 0.7, &dones, 0.9, 0.0);
        for t in 0..3 {
            let next = if t == 2 { 0.7 } else { values[t + 1] };
            let delta = rewards[t] + 0.9 * next - values[t];
            assert!((adv[t] - delta).abs() < 1e-15);
        }
    }

    /// Five-step fixture against the recursion unrolled by hand (values
    /// frozen from the manual computation).
    #[test]
    fn gae_hand_unrolled_fixture() {
        let rewards = [1.0, 0.0, 0.0, 1.0, 0.0];
        let values = [0.5, 0.4, 0.3, 0.2, 0.1];
        let dones = [false, false, false, true, false];
        let gamma = 0.99;
        let lambda = 0.95;
        let bootstrap = 0.25;

        // Hand recursion, written out step by step:
        // t=4: delta = 0 + 0.99*0.25 - 0.1 = 0.1475; A4 = 0.1475.
        // t=3 (done): delta = 1 - 0.2 = 0.8; A3 = 0.8.
        // t=2: delta = 0 + 0.99*0.2 - 0.3 = -0.102; A2 = -0.102 + 0.9405*0.8 = 0.6504.
        // t=1: delta = 0 + 0.99*0.3 - 0.4 = -0.103; A1 = -0.103 + 0.9405*0.6504.
        // t=0: delta = 1 + 0.99*0.4 - 0.5 = 0.896; A0 = 0.896 + 0.9405*A1.
        let a4 = 0.1475;
        let a3 = 0.8;
        let a2 = -0.102 + 0.9405 * a3;
        let a1 = -0.103 + 0.9405 * a2;
        let a0 = 0.896 + 0.9405 * a1;
        let expected = [a0, a1, a2, a3, a4];

        let (adv, ret) = compute_gae(&rewards, &values, bootstrap, &dones, gamma, lambda);
        for t in 0..5 {
            assert!(
                (adv[t] - expected[t]).abs() < 1e-12,
                "t={t}: {} vs hand {}",
                adv[t],
                expected[t]
            );
            assert!((ret[t] - (expected[t] + values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn advantage_normalization_is_standard() {
        let mut adv = vec![1.0, 2.0, 3.0, 4.0, -1.0];
        let valid = vec![true; 5];
        normalize_advantages(&mut adv, &valid);
        let mean: f64 = adv.iter().sum::<f64>() / 5.0;
        let std = (adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 5.0).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_skips_degenerate_batches() {
        let mut adv = vec![2.0, 2.0, 2.0];
        let valid = vec![true; 3];
        normalize_advantages(&mut adv, &valid);
        assert_eq!(adv, vec![2.0, 2.0, 2.0], "zero-std batch must be left alone");
    }

    fn tiny_trainer(mode: RewardMode) -> Trainer {
        let track = Arc::new(builtin_track(BuiltinTrack::Mini, false));
        let mut env_cfg = EnvConfig::new(mode);
        env_cfg.episode_horizon = 16;
        let cfg = TrainConfig {
            rollout_horizon: 8,
            num_envs: 4,
            minibatch_count: 2,
            total_env_steps: 64,
            eval_cadence: 0,
            eval_episodes: 1,
            actor_hidden: vec![16, 16],
            critic_hidden: vec![16, 16],
            seed: 3,
            ..TrainConfig::default()
        };
        Trainer::new(track, env_cfg, cfg).unwrap()
    }

    #[test]
    fn rollout_shapes_and_validity() {
        let mut t = tiny_trainer(RewardMode::SparseCompetitive);
        let rollouts = t.collect_rollouts().unwrap();
        assert_eq!(rollouts.len(), 2);
        assert_eq!(rollouts[0].len(), 8 * 4);
        assert!(rollouts[0].valid_count() > 0);
        assert!(rollouts[1].valid_count() > 0);
    }

    #[test]
    fn single_agent_rollout_has_inactive_adversary() {
        let mut t = tiny_trainer(RewardMode::DenseSingle);
        let rollouts = t.collect_rollouts().unwrap();
        assert!(rollouts[0].valid_count() > 0);
        assert_eq!(rollouts[1].valid_count(), 0);
    }

    #[test]
    fn rollouts_are_seed_deterministic() {
        let mut a = tiny_trainer(RewardMode::SparseCompetitive);
        let mut b = tiny_trainer(RewardMode::SparseCompetitive);
        let ra = a.collect_rollouts().unwrap();
        let rb = b.collect_rollouts().unwrap();
        assert_eq!(ra[0].rewards, rb[0].rewards);
        assert_eq!(ra[0].log_probs, rb[0].log_probs);
        assert_eq!(ra[0].obs, rb[0].obs);
        assert_eq!(ra[1].actions, rb[1].actions);
    }

    #[test]
    fn ratio_one_makes_surrogate_mean_advantage() {
        // With old log-probs equal to fresh ones, ratio = 1 and the clipped
        // surrogate is exactly -mean(advantage).
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let policy = Policy::init(NetSpec::new(6, &[8], 4), &mut rng).unwrap();
        let batch = 16;
        let obs = DMatrix::from_fn(6, batch, |_, _| rng.random_range(-1.0..1.0));
        let means = policy.mean_batch(&obs);
        let mut actions = Vec::new();
        let mut old_lp = Vec::new();
        for b in 0..batch {
            let mean = DVector::from_fn(4, |i, _| means[(i, b)]);
            let s = policy.sample_from_mean(&mean, &mut rng);
            actions.push(s.raw_sample);
            old_lp.push(s.log_prob);
        }
        let adv: Vec<f64> = (0..batch).map(|i| (i as f64) - 7.5).collect();
        let (loss, _, _, clip_frac) =
            actor_loss_and_grads(&policy, &obs, &actions, &old_lp, &adv, 0.2, 0.0);
        let mean_adv: f64 = adv.iter().sum::<f64>() / batch as f64;
        assert!((loss - (-mean_adv)).abs() < 1e-9, "loss {loss} vs {}", -mean_adv);
        assert_eq!(clip_frac, 0.0);
    }

    #[test]
    fn zero_advantages_leave_only_entropy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let policy = Policy::init(NetSpec::new(6, &[8], 4), &mut rng).unwrap();
        let batch = 8;
        let obs = DMatrix::from_fn(6, batch, |_, _| rng.random_range(-1.0..1.0));
        let means = policy.mean_batch(&obs);
        let mut actions = Vec::new();
        let mut old_lp = Vec::new();
        for b in 0..batch {
            let mean = DVector::from_fn(4, |i, _| means[(i, b)]);
            let s = policy.sample_from_mean(&mean, &mut rng);
            actions.push(s.raw_sample);
            old_lp.push(s.log_prob);
        }
        let adv = vec![0.0; batch];
        let (_, grads, lsg, _) =
            actor_loss_and_grads(&policy, &obs, &actions, &old_lp, &adv, 0.2, 0.01);
        assert!(grads.squared_norm() < 1e-20, "network gradient should vanish");
        for i in 0..4 {
            assert!((lsg[i] + 0.01).abs() < 1e-12, "entropy gradient only");
        }
    }

    /// Doubling one agent's advantages doubles its surrogate; the averaged
    /// total shifts by half the difference. Checked on a 4-transition fixture
    /// against an independently computed loss.
    #[test]
    fn advantage_scaling_shifts_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let policy = Policy::init(NetSpec::new(4, &[6], 4), &mut rng).unwrap();
        let batch = 4;
        let obs = DMatrix::from_fn(4, batch, |_, _| rng.random_range(-1.0..1.0));
        let means = policy.mean_batch(&obs);
        let mut actions = Vec::new();
        let mut old_lp = Vec::new();
        for b in 0..batch {
            let mean = DVector::from_fn(4, |i, _| means[(i, b)]);
            let s = policy.sample_from_mean(&mean, &mut rng);
            actions.push(s.raw_sample);
            old_lp.push(s.log_prob);
        }
        let adv: Vec<f64> = vec![0.5, -0.25, 1.0, 0.125];
        let (l1, _, _, _) = actor_loss_and_grads(&policy, &obs, &actions, &old_lp, &adv, 0.2, 0.0);
        let doubled: Vec<f64> = adv.iter().map(|a| 2.0 * a).collect();
        let (l2, _, _, _) =
            actor_loss_and_grads(&policy, &obs, &actions, &old_lp, &doubled, 0.2, 0.0);
        // ratio = 1 exactly, so the loss is -mean(adv) and doubles linearly.
        let independent: f64 = -adv.iter().sum::<f64>() / batch as f64;
        assert!((l1 - independent).abs() < 1e-9);
        assert!((l2 - 2.0 * independent).abs() < 1e-9);
        let avg_before = (l1 + l1) / 2.0;
        let avg_after = (l2 + l1) / 2.0;
        assert!((avg_after - avg_before - (l2 - l1) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn update_runs_and_reports_stats() {
        let mut t = tiny_trainer(RewardMode::SparseCompetitive);
        let record = t.iterate().unwrap();
        assert_eq!(record.iteration, 0);
        assert!(record.clip_fraction[0] >= 0.0 && record.clip_fraction[0] <= 1.0);
        assert!(record.entropy[0].is_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut t = tiny_trainer(RewardMode::SparseCompetitive);
            let mut rewards = Vec::new();
            for _ in 0..3 {
                let r = t.iterate().unwrap();
                rewards.push((r.mean_reward, r.surrogate_loss, r.value_loss));
            }
            (rewards, t.actors[0].policy.mlp.flat_params())
        };
        let (ra, pa) = run();
        let (rb, pb) = run();
        for ((ma, sa, va), (mb, sb, vb)) in ra.iter().zip(&rb) {
            assert_eq!(ma, mb);
            assert_eq!(sa, sb);
            assert_eq!(va, vb);
        }
        assert_eq!(pa, pb, "parameters must be bitwise identical");
    }

    #[test]
    fn adam_moves_toward_minimum() {
        let mut opt = FlatAdam::new(2, 0.1);
        let mut params = vec![5.0, -3.0];
        for _ in 0..500 {
            let grad: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
            opt.step(&mut params, &grad);
        }
        assert!(params[0].abs() < 0.05 && params[1].abs() < 0.05, "{params:?}");
    }

    #[test]
    fn grad_clip_rescales_to_max_norm() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_grad_norm(&mut g, 1.0);
        assert!((norm - 5.0).abs() < 1e-12);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_bad_minibatch_split() {
        let cfg = TrainConfig {
            rollout_horizon: 7,
            num_envs: 3,
            minibatch_count: 5,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
