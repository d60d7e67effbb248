//! Dueling deep Q-learning over the cell-placement environment.

mod adam;
mod checkpoint;
mod network;
mod replay;

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamParams};
pub use network::{argmax, Activations, Architecture, Network};
pub use replay::{ReplayBuffer, Transition};

use crate::cells::ACTION_COUNT;
use crate::env::{encode_prefix, Env};
use crate::mechanisms::Evaluation;
use crate::Error;

fn d_episodes() -> usize {
    2000
}
fn d_gamma() -> f64 {
    0.99
}
fn d_lr() -> f64 {
    1e-3
}
fn d_batch() -> usize {
    64
}
fn d_capacity() -> usize {
    10_000
}
fn d_eps_start() -> f64 {
    1.0
}
fn d_eps_end() -> f64 {
    0.05
}
fn d_eps_decay() -> f64 {
    0.995
}
fn d_sync() -> u64 {
    100
}
fn d_trunk() -> Vec<usize> {
    Architecture::TRUNK.to_vec()
}
fn d_head() -> usize {
    Architecture::HEAD_HIDDEN
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_adam_eps() -> f64 {
    1e-8
}
fn d_window() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_episodes")]
    pub episodes: usize,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_capacity")]
    pub buffer_capacity: usize,
    /// Transitions collected before the first update (at least one batch).
    #[serde(default)]
    pub warmup: usize,
    #[serde(default = "d_eps_start")]
    pub epsilon_start: f64,
    #[serde(default = "d_eps_end")]
    pub epsilon_end: f64,
    /// Per-episode multiplicative decay.
    #[serde(default = "d_eps_decay")]
    pub epsilon_decay: f64,
    /// Optimizer steps between hard target-network copies.
    #[serde(default = "d_sync")]
    pub target_sync: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub double_dqn: bool,
    /// Take a uniformly random first action in every episode.
    #[serde(default)]
    pub forced_random_first: bool,
    #[serde(default = "d_trunk")]
    pub trunk: Vec<usize>,
    #[serde(default = "d_head")]
    pub head_hidden: usize,
    #[serde(default = "d_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "d_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "d_adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "d_window")]
    pub moving_average_window: usize,
    /// Episodes between checkpoints; 0 writes only the final one.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity must hold at least one batch");
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end), ("epsilon_decay", self.epsilon_decay)] {
            if !(0.0..=1.0).contains(&e) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.target_sync == 0 {
            return bad("target_sync must be at least 1");
        }
        if self.moving_average_window == 0 {
            return bad("moving_average_window must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam parameters out of range");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams { learning_rate: self.learning_rate, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }

    pub fn architecture(&self, input: usize) -> Architecture {
        Architecture { input, trunk: self.trunk.clone(), head_hidden: self.head_hidden, actions: ACTION_COUNT }
    }
}

/// ε-greedy choice; greedy ties go to the lowest index.
pub fn select_action<R: Rng>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

fn encode_batch(prefixes: &[Vec<u8>], horizon: usize) -> Vec<f64> {
    let width = horizon * crate::env::CHANNELS;
    let mut x = vec![0.0; prefixes.len() * width];
    for (p, chunk) in prefixes.iter().zip(x.chunks_mut(width)) {
        encode_prefix(p, horizon, chunk);
    }
    x
}

/// `r` for terminal samples, otherwise `r + γ·max_a′ Q_target(s′, a′)`. With
/// `online` given, `a′` is chosen by the online network instead.
pub fn td_targets(
    batch: &[&Transition],
    gamma: f64,
    target: &Network,
    online: Option<&Network>,
    horizon: usize,
) -> Result<Vec<f64>, Error> {
    let open: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].terminal).collect();
    let mut y: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    if open.is_empty() {
        return Ok(y);
    }
    let next: Vec<Vec<u8>> = open.iter().map(|&i| batch[i].next_prefix()).collect();
    let x = encode_batch(&next, horizon);
    let qt = target.forward(&x, open.len())?.q;
    let qo = match online {
        Some(net) => Some(net.forward(&x, open.len())?.q),
        None => None,
    };
    let n = ACTION_COUNT;
    for (row, &i) in open.iter().enumerate() {
        let t_row = &qt[row * n..(row + 1) * n];
        let bootstrap = match &qo {
            Some(q) => t_row[argmax(&q[row * n..(row + 1) * n])],
            None => t_row[argmax(t_row)],
        };
        y[i] += gamma * bootstrap;
    }
    Ok(y)
}

/// One Adam step on the mean squared TD error of `batch`; returns the loss.
pub fn optimize_step(
    online: &mut Network,
    target: &Network,
    adam: &mut Adam,
    batch: &[&Transition],
    gamma: f64,
    double_dqn: bool,
    horizon: usize,
) -> Result<f64, Error> {
    if batch.is_empty() {
        return Err(Error::IllegalStep("empty batch".into()));
    }
    let y = td_targets(batch, gamma, target, double_dqn.then_some(&*online), horizon)?;
    let prefixes: Vec<Vec<u8>> = batch.iter().map(|t| t.prefix.clone()).collect();
    let x = encode_batch(&prefixes, horizon);
    let acts = online.forward(&x, batch.len())?;
    let n = ACTION_COUNT;
    let scale = 1.0 / batch.len() as f64;
    let mut dq = vec![0.0; batch.len() * n];
    let mut loss = 0.0;
    for (b, t) in batch.iter().enumerate() {
        let diff = acts.q[b * n + t.action as usize] - y[b];
        loss += diff * diff * scale;
        dq[b * n + t.action as usize] = 2.0 * diff * scale;
    }
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("non-finite loss after {} updates", adam.t)));
    }
    let mut grad = vec![0.0; online.params.len()];
    online.backward(&x, &acts, &dq, &mut grad);
    adam.step(&mut online.params, &grad);
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub reward: f64,
    pub moving_avg: f64,
    pub epsilon: f64,
    pub disconnections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestDesign {
    pub episode: usize,
    /// Actions in design-slot (row-major) order.
    pub slot_actions: Vec<u8>,
    pub evaluation: Evaluation,
}

pub const CURVE_HEADER: &str = "episode,reward,moving_avg,epsilon,disconnections";

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER.split(','))?;
    for p in curve {
        w.write_record([
            p.episode.to_string(),
            p.reward.to_string(),
            p.moving_avg.to_string(),
            p.epsilon.to_string(),
            p.disconnections.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Complete training state; checkpoints store all of it.
pub struct Trainer {
    pub config: TrainConfig,
    env: Env,
    pub online: Network,
    pub target: Network,
    pub adam: Adam,
    pub buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    pub episode: usize,
    pub epsilon: f64,
    pub optimize_steps: u64,
    pub curve: Vec<CurvePoint>,
    pub best: Option<BestDesign>,
    pub last_loss: Option<f64>,
}

impl Trainer {
    pub fn new(env: Env, config: TrainConfig) -> Result<Self, Error> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let online = Network::new(config.architecture(env.state_len()), &mut rng)?;
        let target = online.clone();
        let adam = Adam::new(config.adam(), online.params.len());
        let buffer = ReplayBuffer::new(config.buffer_capacity);
        let epsilon = config.epsilon_start;
        Ok(Self {
            config,
            env,
            online,
            target,
            adam,
            buffer,
            rng,
            episode: 0,
            epsilon,
            optimize_steps: 0,
            curve: Vec::new(),
            best: None,
            last_loss: None,
        })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.config.episodes
    }

    fn warmup(&self) -> usize {
        self.config.warmup.max(self.config.batch_size)
    }

    /// Plays one ε-greedy episode, learning after every step once the buffer
    /// is warm.
    pub fn run_episode(&mut self) -> Result<CurvePoint, Error> {
        let horizon = self.env.horizon();
        let mut state = self.env.reset();
        let mut terminal: Option<Evaluation> = None;
        let mut x = vec![0.0; self.env.state_len()];
        for t in 0..horizon {
            let prefix = state.prefix();
            let action = if t == 0 && self.config.forced_random_first {
                self.rng.random_range(0..ACTION_COUNT)
            } else {
                encode_prefix(&prefix, horizon, &mut x);
                let q = self.online.q_values(&x)?;
                select_action(&q, self.epsilon, &mut self.rng)
            };
            let mut next = state.clone();
            next.placements[t] = Some(action as u8);
            next.t += 1;
            let done = next.is_terminal();
            let reward = if done {
                let e = self.env.evaluate_terminal(&next)?;
                terminal = Some(e);
                e.reward
            } else {
                0.0
            };
            self.buffer.push(Transition { prefix, action: action as u8, reward, terminal: done });
            if self.buffer.len() >= self.warmup() {
                let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
                let loss = optimize_step(
                    &mut self.online,
                    &self.target,
                    &mut self.adam,
                    &batch,
                    self.config.gamma,
                    self.config.double_dqn,
                    horizon,
                )?;
                self.last_loss = Some(loss);
                self.optimize_steps += 1;
                if self.optimize_steps.is_multiple_of(self.config.target_sync) {
                    self.target.params.copy_from_slice(&self.online.params);
                }
            }
            state = next;
        }
        let eval = terminal.expect("episode reached its horizon");
        let episode = self.episode;
        if self.best.as_ref().is_none_or(|b| eval.reward > b.evaluation.reward) {
            self.best = Some(BestDesign { episode, slot_actions: self.env.slot_actions(&state)?, evaluation: eval });
        }
        let window = self.config.moving_average_window;
        let start = self.curve.len().saturating_sub(window - 1);
        let recent = &self.curve[start..];
        let moving_avg = (recent.iter().map(|p| p.reward).sum::<f64>() + eval.reward) / (recent.len() + 1) as f64;
        let point = CurvePoint { episode, reward: eval.reward, moving_avg, epsilon: self.epsilon, disconnections: eval.disconnections };
        self.curve.push(point);
        self.episode += 1;
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_end);
        Ok(point)
    }

    /// Runs the remaining episodes. With a checkpoint path, state is saved
    /// every `checkpoint_every` episodes and at the end.
    pub fn run(&mut self, checkpoint: Option<&Path>) -> Result<(), Error> {
        while !self.is_finished() {
            self.run_episode()?;
            if let Some(path) = checkpoint {
                let every = self.config.checkpoint_every;
                if every > 0 && self.episode.is_multiple_of(every) && !self.is_finished() {
                    self.save_checkpoint(path)?;
                }
            }
        }
        if let Some(path) = checkpoint {
            self.save_checkpoint(path)?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), Error> {
        checkpoint::save(self, path)
    }

    /// Restores a trainer; `env` must describe the same scenario and tiling.
    pub fn resume(env: Env, path: &Path) -> Result<Self, Error> {
        checkpoint::load(env, path)
    }
}

pub struct TrainOutcome {
    pub curve: Vec<CurvePoint>,
    pub best: Option<BestDesign>,
}

pub fn train(env: Env, config: TrainConfig) -> Result<TrainOutcome, Error> {
    let mut trainer = Trainer::new(env, config)?;
    trainer.run(None)?;
    Ok(TrainOutcome { curve: trainer.curve, best: trainer.best })
}
