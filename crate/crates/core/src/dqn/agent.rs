use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Adam, QNetwork};
use super::replay::ReplayBuffer;
use crate::env_model::derive_seed;
use crate::error::{Error, Result};
use crate::mdp::{RewardParams, StateLayout, Transition};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    /// environment steps between target syncs
    pub sync_interval: u64,
    /// environment steps per e-fold of the exploration rate
    pub epsilon_decay: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// global gradient-norm ceiling per update
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
    pub rng_seed: u64,
    pub layout: StateLayout,
    pub reward_params: RewardParams,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return fail(format!("discount must be in (0, 1], got {}", self.discount));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return fail(format!("need 0 < batch {} <= buffer {}", self.batch_size, self.buffer_capacity));
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return fail(format!("bad epsilon range {} -> {}", self.epsilon_start, self.epsilon_end));
        }
        if !(self.epsilon_decay > 0.0) || self.sync_interval == 0 {
            return fail("epsilon decay and sync interval must be positive".into());
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return fail("gradient clip must be positive".into());
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden layers must be nonempty".into());
        }
        self.reward_params.validate(self.layout.num_infras)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layout.width()];
        sizes.extend(&self.hidden_layers);
        sizes.push(self.layout.num_infras);
        sizes
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("agent config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AgentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the TOML form.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }
}

pub fn epsilon_at(step: u64, config: &AgentConfig) -> f64 {
    config.epsilon_end + (config.epsilon_start - config.epsilon_end) * (-(step as f64) / config.epsilon_decay).exp()
}

/// Anything that maps a state to one value per action.
pub trait QValues {
    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>>;
}

impl QValues for QNetwork {
    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.forward(state)
    }
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn act_epsilon_greedy<Q: QValues + ?Sized, R: Rng + ?Sized>(net: &Q, state: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let q = net.q_values(state)?;
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..q.len()));
    }
    Ok(argmax(&q))
}

/// Double-Q target: the online network picks the next action, the target
/// network values it.
pub fn compute_target<Q: QValues + ?Sized>(online: &Q, target: &Q, t: &Transition, gamma: f64) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let a_star = argmax(&online.q_values(&t.next_state)?);
    Ok(t.reward + gamma * target.q_values(&t.next_state)?[a_star])
}

fn rows(batch: &[&Transition], next: bool) -> Array2<f64> {
    let width = batch[0].state.len();
    Array2::from_shape_fn((batch.len(), width), |(i, j)| if next { batch[i].next_state[j] } else { batch[i].state[j] })
}

/// Batched `compute_target`.
pub fn compute_targets(online: &QNetwork, target: &QNetwork, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    if batch.iter().all(|t| t.done) {
        return Ok(batch.iter().map(|t| t.reward).collect());
    }
    let next = rows(batch, true);
    let q_online = online.forward_batch(next.view())?;
    let q_target = target.forward_batch(next.view())?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.done {
                t.reward
            } else {
                let row = q_online.row(i);
                let a_star = argmax(row.as_slice().unwrap());
                t.reward + gamma * q_target[[i, a_star]]
            }
        })
        .collect())
}

fn update(
    online: &mut QNetwork,
    target: &QNetwork,
    adam: Option<&mut Adam>,
    batch: &[&Transition],
    config: &AgentConfig,
) -> Result<f64> {
    let y = compute_targets(online, target, batch, config.discount)?;
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (loss, mut grads) = online.loss_and_gradients(rows(batch, false).view(), &actions, &y)?;
    if let Some(c) = config.grad_clip {
        grads.clip_norm(c);
    }
    match adam {
        Some(adam) => adam.step(online, &grads, config.learning_rate),
        None => online.apply_sgd(&grads, config.learning_rate),
    }
    Ok(loss)
}

pub const DIVERGENCE_LOSS: f64 = 1e6;
pub const DIVERGENCE_STEPS: usize = 100;

pub struct DqnAgent {
    config: AgentConfig,
    online: QNetwork,
    target: QNetwork,
    replay: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    adam: Option<Adam>,
    steps: u64,
    syncs: u64,
    high_loss_run: usize,
}

impl DqnAgent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, 1));
        let online = QNetwork::new(&config.layer_sizes(), &mut init_rng)?;
        Ok(Self::with_network(config, online))
    }

    fn with_network(config: AgentConfig, online: QNetwork) -> Self {
        let adam = (config.optimizer == OptimizerKind::Adam).then(|| Adam::new(&online));
        DqnAgent {
            target: online.clone(),
            online,
            replay: ReplayBuffer::new(config.buffer_capacity),
            explore_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, 2)),
            sample_rng: ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, 3)),
            adam,
            steps: 0,
            syncs: 0,
            high_loss_run: 0,
            config,
        }
    }

    /// Wraps trained weights, e.g. from a checkpoint.
    pub fn from_network(config: AgentConfig, online: QNetwork) -> Result<Self> {
        config.validate()?;
        if online.layer_sizes() != config.layer_sizes() {
            return Err(Error::Config(format!(
                "network sizes {:?} do not match config {:?}",
                online.layer_sizes(),
                config.layer_sizes()
            )));
        }
        Ok(Self::with_network(config, online))
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.steps, &self.config)
    }

    /// Exploring action at the current step's epsilon.
    pub fn act(&mut self, state: &[f64]) -> Result<usize> {
        let eps = self.epsilon();
        act_epsilon_greedy(&self.online, state, eps, &mut self.explore_rng)
    }

    pub fn greedy(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.online.forward(state)?))
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
        self.syncs += 1;
    }

    /// One gradient step on `batch`; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        update(&mut self.online, &self.target, self.adam.as_mut(), batch, &self.config)
    }

    /// Records one environment step: stores the transition, trains once the
    /// buffer holds a batch, and syncs the target every `sync_interval`
    /// steps. Returns the training loss when a step was taken.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        self.replay.push(t);
        self.steps += 1;
        let mut loss = None;
        if self.replay.len() >= self.config.batch_size {
            let batch = self.replay.sample(self.config.batch_size, &mut self.sample_rng);
            let l = update(&mut self.online, &self.target, self.adam.as_mut(), &batch, &self.config)?;
            if l.is_finite() && l <= DIVERGENCE_LOSS {
                self.high_loss_run = 0;
            } else {
                self.high_loss_run += 1;
                if self.high_loss_run >= DIVERGENCE_STEPS {
                    return Err(Error::Diverged(format!(
                        "loss above {DIVERGENCE_LOSS:e} for {DIVERGENCE_STEPS} consecutive steps (last {l:e}) at step {}",
                        self.steps
                    )));
                }
            }
            loss = Some(l);
        }
        if self.steps % self.config.sync_interval == 0 {
            self.sync_target();
        }
        Ok(loss)
    }
}
