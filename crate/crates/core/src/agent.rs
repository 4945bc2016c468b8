//! Off-policy maximum-entropy actor-critic with a replay buffer.
//!
//! The actor is a tanh-squashed Gaussian over actions normalized to
//! `[-1, 1]` per axis, scaled by the environment's step limit on the way out.
//! Two critics over `(state, normalized action)` are regressed toward
//! `r(s') + gamma * (1 - done) * (min target Q(s', a') - temperature * log pi(a'|s'))`,
//! where the reward comes from a [`RewardSource`] evaluated at sampling time.
//! The buffer never stores rewards, so a reward model that keeps changing
//! during training always labels fresh batches with its current values.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::checkpoint::MlpCheckpoint;
use crate::numkit::loss::softplus;
use crate::numkit::{AdamState, ForwardCache, Matrix, Mlp, MlpGrads, MlpParams};

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Labels next-states with rewards.
pub trait RewardSource {
    fn rewards(&self, next_states: &Matrix) -> Result<Vec<f64>>;
}

impl<F> RewardSource for F
where
    F: Fn(&Matrix) -> Result<Vec<f64>>,
{
    fn rewards(&self, next_states: &Matrix) -> Result<Vec<f64>> {
        self(next_states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Normalized action in `[-1, 1]` per axis.
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO ring of transitions, stored as flat arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    cursor: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBatch {
    pub states: Matrix,
    pub actions: Matrix,
    pub next_states: Matrix,
    pub dones: Vec<f64>,
    pub indices: Vec<usize>,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.dones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dones.is_empty()
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::argument("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            cursor: 0,
            len: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim || t.action.len() != self.action_dim {
            return Err(Error::shape(format!(
                "transition dims ({}, {}, {}) do not match buffer ({}, {})",
                t.state.len(),
                t.action.len(),
                t.next_state.len(),
                self.state_dim,
                self.action_dim
            )));
        }
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let (s, a) = (self.state_dim, self.action_dim);
            let i = self.cursor;
            self.states[i * s..(i + 1) * s].copy_from_slice(&t.state);
            self.actions[i * a..(i + 1) * a].copy_from_slice(&t.action);
            self.next_states[i * s..(i + 1) * s].copy_from_slice(&t.next_state);
            self.dones[i] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Transitions in insertion order, oldest first.
    pub fn get(&self, age: usize) -> Option<Transition> {
        if age >= self.len {
            return None;
        }
        let start = if self.len < self.capacity { 0 } else { self.cursor };
        let i = (start + age) % self.capacity;
        let (s, a) = (self.state_dim, self.action_dim);
        Some(Transition {
            state: self.states[i * s..(i + 1) * s].to_vec(),
            action: self.actions[i * a..(i + 1) * a].to_vec(),
            next_state: self.next_states[i * s..(i + 1) * s].to_vec(),
            done: self.dones[i],
        })
    }

    /// Uniform sample with replacement. A buffer smaller than the batch
    /// returns [`Error::NotReady`].
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<TransitionBatch> {
        if batch_size == 0 {
            return Err(Error::argument("batch size must be positive"));
        }
        if self.len < batch_size {
            return Err(Error::NotReady(format!(
                "replay holds {} transitions, batch needs {batch_size}",
                self.len
            )));
        }
        let (s, a) = (self.state_dim, self.action_dim);
        let mut states = Vec::with_capacity(batch_size * s);
        let mut actions = Vec::with_capacity(batch_size * a);
        let mut next = Vec::with_capacity(batch_size * s);
        let mut dones = Vec::with_capacity(batch_size);
        let mut indices = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let i = rng.random_range(0..self.len);
            states.extend_from_slice(&self.states[i * s..(i + 1) * s]);
            actions.extend_from_slice(&self.actions[i * a..(i + 1) * a]);
            next.extend_from_slice(&self.next_states[i * s..(i + 1) * s]);
            dones.push(if self.dones[i] { 1.0 } else { 0.0 });
            indices.push(i);
        }
        Ok(TransitionBatch {
            states: Matrix::from_vec(batch_size, s, states)?,
            actions: Matrix::from_vec(batch_size, a, actions)?,
            next_states: Matrix::from_vec(batch_size, s, next)?,
            dones,
            indices,
        })
    }

    /// Uniformly sampled visited states (the next-state of each transition).
    pub fn sample_states<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix> {
        if self.is_empty() {
            return Err(Error::NotReady("replay buffer is empty".into()));
        }
        let s = self.state_dim;
        let mut out = Vec::with_capacity(n * s);
        for _ in 0..n {
            let i = rng.random_range(0..self.len);
            out.extend_from_slice(&self.next_states[i * s..(i + 1) * s]);
        }
        Matrix::from_vec(n, s, out)
    }

    pub fn next_state(&self, slot: usize) -> &[f64] {
        &self.next_states[slot * self.state_dim..(slot + 1) * self.state_dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub n_critics: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub temperature_lr: f64,
    pub utd_ratio: usize,
    pub batch_size: usize,
    pub explore_steps: usize,
    pub hidden: Vec<usize>,
    pub init_temperature: f64,
    pub learn_temperature: bool,
    /// Defaults to `-action_dim` when absent.
    pub target_entropy: Option<f64>,
    pub buffer_capacity: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            n_critics: 2,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            temperature_lr: 3e-4,
            utd_ratio: 20,
            batch_size: 256,
            explore_steps: 1440,
            hidden: vec![64, 64],
            init_temperature: 0.1,
            learn_temperature: true,
            target_entropy: None,
            buffer_capacity: 1_000_000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) && self.gamma != 0.0 {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        if self.n_critics == 0 {
            return bad("n_critics", "need at least one critic");
        }
        if self.utd_ratio == 0 {
            return bad("utd_ratio", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity", "must hold at least one batch");
        }
        if !(self.init_temperature > 0.0 && self.init_temperature.is_finite()) {
            return bad("init_temperature", "must be positive");
        }
        for (k, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("temperature_lr", self.temperature_lr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(k, "learning rate must be positive");
            }
        }
        Ok(())
    }
}

/// Reparameterized draw from the squashed Gaussian.
#[derive(Debug, Clone)]
pub struct PolicySample {
    /// `tanh(mean + std * noise)`, normalized.
    pub actions: Matrix,
    pub log_probs: Vec<f64>,
    pre_tanh: Matrix,
    log_stds: Matrix,
    clamped: Vec<bool>,
    noise: Matrix,
    cache: ForwardCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticMetrics {
    pub losses: Vec<f64>,
    pub mean_reward: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorMetrics {
    pub actor_loss: f64,
    pub temperature: f64,
    pub temperature_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentMetrics {
    pub critic_losses: Vec<f64>,
    pub actor_loss: f64,
    pub temperature: f64,
    pub entropy: f64,
    pub mean_batch_reward: f64,
    pub critic_batches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub config: SacConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Environment units per normalized action unit.
    pub action_scale: f64,
    pub actor: Mlp,
    pub critics: Vec<Mlp>,
    pub target_critics: Vec<MlpParams>,
    pub log_temperature: f64,
    pub actor_adam: AdamState,
    pub critic_adams: Vec<AdamState>,
    pub temperature_adam: AdamState,
}

fn log_one_minus_tanh_sq(z: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z))
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        action_scale: f64,
        config: SacConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if !(action_scale > 0.0 && action_scale.is_finite()) {
            return Err(Error::argument("action scale must be positive"));
        }
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend_from_slice(&config.hidden);
            s.push(output);
            s
        };
        let actor_sizes = sizes(state_dim, 2 * action_dim);
        let critic_sizes = sizes(state_dim + action_dim, 1);
        let no_sn = |s: &[usize]| vec![false; s.len() - 1];
        let actor = Mlp::new(&actor_sizes, no_sn(&actor_sizes), rng)?;
        let mut critics = Vec::with_capacity(config.n_critics);
        for _ in 0..config.n_critics {
            critics.push(Mlp::new(&critic_sizes, no_sn(&critic_sizes), rng)?);
        }
        let target_critics = critics.iter().map(|c| c.params.clone()).collect();
        let actor_adam = AdamState::for_mlp(&actor.params, config.actor_lr);
        let critic_adams = critics
            .iter()
            .map(|c| AdamState::for_mlp(&c.params, config.critic_lr))
            .collect();
        let temperature_adam = AdamState::new(1, config.temperature_lr);
        Ok(Self {
            log_temperature: config.init_temperature.ln(),
            config,
            state_dim,
            action_dim,
            action_scale,
            actor,
            critics,
            target_critics,
            actor_adam,
            critic_adams,
            temperature_adam,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn target_entropy(&self) -> f64 {
        self.config.target_entropy.unwrap_or(-(self.action_dim as f64))
    }

    fn check_states(&self, states: &Matrix) -> Result<()> {
        if states.cols() != self.state_dim {
            return Err(Error::shape(format!(
                "state has {} columns, agent expects {}",
                states.cols(),
                self.state_dim
            )));
        }
        Ok(())
    }

    /// Standard normal noise shaped for a policy sample over `rows` states.
    pub fn draw_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Matrix {
        let data = (0..rows * self.action_dim).map(|_| StandardNormal.sample(rng)).collect();
        Matrix::from_vec(rows, self.action_dim, data).expect("noise is finite")
    }

    /// Squashed-Gaussian actions for `states` under the given noise.
    pub fn policy_sample(&self, states: &Matrix, noise: &Matrix) -> Result<PolicySample> {
        self.check_states(states)?;
        let (n, d) = (states.rows(), self.action_dim);
        if noise.shape() != (n, d) {
            return Err(Error::shape("noise shape does not match states"));
        }
        let (out, cache) = self.actor.forward(states)?;
        let mut actions = Matrix::zeros(n, d);
        let mut pre = Matrix::zeros(n, d);
        let mut log_stds = Matrix::zeros(n, d);
        let mut clamped = vec![false; n * d];
        let mut log_probs = vec![0.0; n];
        for i in 0..n {
            let mut lp = 0.0;
            for j in 0..d {
                let mean = out[(i, j)];
                let raw = out[(i, d + j)];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                clamped[i * d + j] = ls != raw;
                let eps = noise[(i, j)];
                let z = mean + ls.exp() * eps;
                pre.row_mut(i)[j] = z;
                log_stds.row_mut(i)[j] = ls;
                actions.row_mut(i)[j] = z.tanh();
                lp += -0.5 * eps * eps - ls - HALF_LN_2PI - log_one_minus_tanh_sq(z);
            }
            if !lp.is_finite() {
                return Err(Error::numeric(format!("non-finite log-probability in row {i}")));
            }
            log_probs[i] = lp;
        }
        Ok(PolicySample {
            actions,
            log_probs,
            pre_tanh: pre,
            log_stds,
            clamped,
            noise: noise.clone(),
            cache,
        })
    }

    /// Action in environment units for a single observation.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], deterministic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let s = Matrix::from_vec(1, state.len(), state.to_vec())?;
        self.check_states(&s)?;
        let normalized = if deterministic {
            let out = self.actor.predict(&s)?;
            (0..self.action_dim).map(|j| out[(0, j)].tanh()).collect::<Vec<_>>()
        } else {
            let noise = self.draw_noise(1, rng);
            self.policy_sample(&s, &noise)?.actions.into_vec()
        };
        Ok(normalized.iter().map(|a| a * self.action_scale).collect())
    }

    /// Uniform exploration action in environment units.
    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.action_dim)
            .map(|_| rng.random_range(-1.0..=1.0) * self.action_scale)
            .collect()
    }

    pub fn normalize_action(&self, action: &[f64]) -> Vec<f64> {
        action.iter().map(|a| (a / self.action_scale).clamp(-1.0, 1.0)).collect()
    }

    fn q_values(params: &MlpParams, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>> {
        let input = states.hcat(actions)?;
        let mut x = input;
        for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
            let mut y = x.matmul_transposed(w)?;
            let last = l + 1 == params.weights.len();
            for row in y.data_mut().chunks_mut(b.len()) {
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                    if !last && *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            x = y;
        }
        Ok(x.into_vec())
    }

    /// Bootstrapped regression targets for a batch with given rewards and
    /// next-action noise.
    pub fn critic_targets(&self, batch: &TransitionBatch, rewards: &[f64], next_noise: &Matrix) -> Result<Vec<f64>> {
        let n = batch.len();
        if rewards.len() != n {
            return Err(Error::shape("reward count does not match batch"));
        }
        let gamma = self.config.gamma;
        let mut targets = rewards.to_vec();
        if gamma == 0.0 {
            return Ok(targets);
        }
        let next = self.policy_sample(&batch.next_states, next_noise)?;
        let mut min_q = vec![f64::INFINITY; n];
        for t in &self.target_critics {
            for (m, q) in min_q.iter_mut().zip(Self::q_values(t, &batch.next_states, &next.actions)?) {
                *m = m.min(q);
            }
        }
        let temp = self.temperature();
        for i in 0..n {
            targets[i] += gamma * (1.0 - batch.dones[i]) * (min_q[i] - temp * next.log_probs[i]);
            if !targets[i].is_finite() {
                return Err(Error::numeric(format!("non-finite critic target in row {i}")));
            }
        }
        Ok(targets)
    }

    /// Mean squared error of critic `k` against fixed targets, with its
    /// parameter gradient.
    pub fn critic_loss(&self, k: usize, batch: &TransitionBatch, targets: &[f64]) -> Result<(f64, MlpGrads)> {
        let critic = self
            .critics
            .get(k)
            .ok_or_else(|| Error::argument(format!("no critic {k}")))?;
        let n = batch.len();
        let input = batch.states.hcat(&batch.actions)?;
        let (q, cache) = critic.forward(&input)?;
        let mut loss = 0.0;
        let mut g = Matrix::zeros(n, 1);
        for i in 0..n {
            let e = q[(i, 0)] - targets[i];
            loss += e * e / n as f64;
            g[(i, 0)] = 2.0 * e / n as f64;
        }
        let (grads, _) = critic.backward(&cache, &g)?;
        Ok((loss, grads))
    }

    pub fn update_targets(&mut self) {
        let tau = self.config.tau;
        for (t, c) in self.target_critics.iter_mut().zip(&self.critics) {
            t.polyak_update(&c.params, tau);
        }
    }

    /// One regression step for every critic followed by a target update.
    pub fn critic_update<R: Rng + ?Sized, S: RewardSource + ?Sized>(
        &mut self,
        batch: &TransitionBatch,
        reward: &S,
        rng: &mut R,
    ) -> Result<CriticMetrics> {
        let rewards = reward.rewards(&batch.next_states)?;
        if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::numeric(format!("reward model produced {bad}")));
        }
        let noise = self.draw_noise(batch.len(), rng);
        let targets = self.critic_targets(batch, &rewards, &noise)?;
        let mut losses = Vec::with_capacity(self.critics.len());
        for k in 0..self.critics.len() {
            let (loss, grads) = self.critic_loss(k, batch, &targets)?;
            self.critic_adams[k].step_mlp(&mut self.critics[k].params, &grads)?;
            losses.push(loss);
        }
        self.update_targets();
        let n = batch.len() as f64;
        Ok(CriticMetrics {
            losses,
            mean_reward: rewards.iter().sum::<f64>() / n,
            mean_target: targets.iter().sum::<f64>() / n,
        })
    }

    /// Actor objective `mean(temperature * log pi - min_k Q_k(s, a))` under
    /// fixed noise, its gradient, and the mean log-probability.
    pub fn actor_loss(&self, states: &Matrix, noise: &Matrix) -> Result<(f64, MlpGrads, f64)> {
        let n = states.rows();
        let d = self.action_dim;
        let sample = self.policy_sample(states, noise)?;
        let input = states.hcat(&sample.actions)?;
        let mut qs = Vec::with_capacity(self.critics.len());
        for c in &self.critics {
            qs.push(c.forward(&input)?);
        }
        let mut best = vec![0usize; n];
        for (i, b) in best.iter_mut().enumerate() {
            for k in 1..qs.len() {
                if qs[k].0[(i, 0)] < qs[*b].0[(i, 0)] {
                    *b = k;
                }
            }
        }
        let temp = self.temperature();
        let mut loss = 0.0;
        for i in 0..n {
            loss += (temp * sample.log_probs[i] - qs[best[i]].0[(i, 0)]) / n as f64;
        }
        // d loss / d action, through the selected critic
        let mut da = Matrix::zeros(n, d);
        for (k, (critic, (_, cache))) in self.critics.iter().zip(&qs).enumerate() {
            let mut g = Matrix::zeros(n, 1);
            let mut any = false;
            for i in 0..n {
                if best[i] == k {
                    g[(i, 0)] = -1.0 / n as f64;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let (_, dx) = critic.backward(cache, &g)?;
            for i in 0..n {
                for j in 0..d {
                    da.row_mut(i)[j] += dx[(i, self.state_dim + j)];
                }
            }
        }
        let mut grad_out = Matrix::zeros(n, 2 * d);
        let w = temp / n as f64;
        for i in 0..n {
            for j in 0..d {
                let z = sample.pre_tanh[(i, j)];
                let t = z.tanh();
                let dsq = 1.0 - t * t;
                let std_eps = sample.log_stds[(i, j)].exp() * sample.noise[(i, j)];
                grad_out.row_mut(i)[j] = w * 2.0 * t + da[(i, j)] * dsq;
                if !sample.clamped[i * d + j] {
                    grad_out.row_mut(i)[d + j] = w * (-1.0 + 2.0 * t * std_eps) + da[(i, j)] * dsq * std_eps;
                }
            }
        }
        let (grads, _) = self.actor.backward(&sample.cache, &grad_out)?;
        let mean_log_prob = sample.log_probs.iter().sum::<f64>() / n as f64;
        Ok((loss, grads, mean_log_prob))
    }

    /// Actor step, then a temperature step toward the target entropy.
    pub fn actor_and_temperature_update<R: Rng + ?Sized>(&mut self, states: &Matrix, rng: &mut R) -> Result<ActorMetrics> {
        let noise = self.draw_noise(states.rows(), rng);
        let (loss, grads, mean_log_prob) = self.actor_loss(states, &noise)?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!("actor loss is {loss}")));
        }
        self.actor_adam.step_mlp(&mut self.actor.params, &grads)?;
        let entropy = -mean_log_prob;
        let target = self.target_entropy();
        let temperature = self.temperature();
        let grad = temperature_gradient(temperature, entropy, target);
        if self.config.learn_temperature {
            let mut lt = [self.log_temperature];
            self.temperature_adam.step(&mut lt, &[grad])?;
            self.log_temperature = lt[0];
        }
        Ok(ActorMetrics {
            actor_loss: loss,
            temperature: self.temperature(),
            temperature_loss: temperature * (entropy - target),
            entropy,
        })
    }
}

/// Gradient of `temperature * (entropy - target)` with respect to the log
/// temperature.
pub fn temperature_gradient(temperature: f64, entropy: f64, target_entropy: f64) -> f64 {
    temperature * (entropy - target_entropy)
}

/// `utd_ratio` critic updates on fresh batches, then one actor and
/// temperature update.
pub fn agent_step<R: Rng + ?Sized, S: RewardSource + ?Sized>(
    agent: &mut Agent,
    buffer: &ReplayBuffer,
    reward: &S,
    rng: &mut R,
) -> Result<AgentMetrics> {
    let utd = agent.config.utd_ratio;
    let bs = agent.config.batch_size;
    let mut critic_losses = vec![0.0; agent.critics.len()];
    let mut mean_reward = 0.0;
    let mut last_states = None;
    for _ in 0..utd {
        let batch = buffer.sample(bs, rng)?;
        let m = agent.critic_update(&batch, reward, rng)?;
        for (acc, l) in critic_losses.iter_mut().zip(&m.losses) {
            *acc += l / utd as f64;
        }
        mean_reward += m.mean_reward / utd as f64;
        last_states = Some(batch.states);
    }
    let states = last_states.expect("utd_ratio is at least one");
    let a = agent.actor_and_temperature_update(&states, rng)?;
    Ok(AgentMetrics {
        critic_losses,
        actor_loss: a.actor_loss,
        temperature: a.temperature,
        entropy: a.entropy,
        mean_batch_reward: mean_reward,
        critic_batches: utd,
    })
}

pub const AGENT_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub config: SacConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_scale: f64,
    pub actor: MlpCheckpoint,
    pub critics: Vec<MlpCheckpoint>,
    pub target_critics: Vec<MlpCheckpoint>,
    pub log_temperature: f64,
    pub temperature_adam: AdamState,
}

impl AgentCheckpoint {
    pub fn from_agent(agent: &Agent) -> Result<Self> {
        Ok(Self {
            version: AGENT_CHECKPOINT_VERSION,
            config: agent.config.clone(),
            state_dim: agent.state_dim,
            action_dim: agent.action_dim,
            action_scale: agent.action_scale,
            actor: MlpCheckpoint::from_mlp(&agent.actor, Some(&agent.actor_adam)),
            critics: agent
                .critics
                .iter()
                .zip(&agent.critic_adams)
                .map(|(c, a)| MlpCheckpoint::from_mlp(c, Some(a)))
                .collect(),
            target_critics: agent
                .target_critics
                .iter()
                .map(MlpCheckpoint::from_params)
                .collect::<Result<_>>()?,
            log_temperature: agent.log_temperature,
            temperature_adam: agent.temperature_adam.clone(),
        })
    }

    pub fn into_agent(self) -> Result<Agent> {
        if self.version != AGENT_CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported agent checkpoint version {}", self.version)));
        }
        self.config.validate()?;
        let (actor, actor_adam) = self.actor.into_mlp()?;
        let mut critics = Vec::new();
        let mut critic_adams = Vec::new();
        for c in self.critics {
            let (net, adam) = c.into_mlp()?;
            critic_adams.push(adam.ok_or_else(|| Error::Format("critic record lacks optimizer state".into()))?);
            critics.push(net);
        }
        let mut target_critics = Vec::new();
        for t in self.target_critics {
            target_critics.push(t.into_mlp()?.0.params);
        }
        if critics.len() != self.config.n_critics || target_critics.len() != critics.len() {
            return Err(Error::Format("critic count does not match config".into()));
        }
        if actor.input_dim() != self.state_dim || actor.output_dim() != 2 * self.action_dim {
            return Err(Error::Format("actor shape does not match recorded dimensions".into()));
        }
        Ok(Agent {
            config: self.config,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            action_scale: self.action_scale,
            actor,
            critics,
            target_critics,
            log_temperature: self.log_temperature,
            actor_adam: actor_adam.ok_or_else(|| Error::Format("actor record lacks optimizer state".into()))?,
            critic_adams,
            temperature_adam: self.temperature_adam,
        })
    }
}
