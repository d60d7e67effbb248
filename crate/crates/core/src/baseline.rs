//! Reference policies for comparison with the learned agent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::{CellKind, ACTION_COUNT};
use crate::env::Env;
use crate::mechanisms::Evaluation;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Uniform actions at every step.
    Random,
    /// At each step, the action whose design completed with rigid cells
    /// scores best (ties to the lowest index).
    Greedy,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "random" => Ok(Policy::Random),
            "greedy" => Ok(Policy::Greedy),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    /// Actions in design-slot order.
    pub slot_actions: Vec<u8>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub policy: Policy,
    pub rollouts: Vec<Rollout>,
    pub mean: f64,
    pub max: f64,
    /// Index of the first rollout reaching `max`.
    pub best: usize,
}

fn rollout<R: Rng>(env: &Env, policy: Policy, rng: &mut R) -> Result<Rollout, Error> {
    let mut state = env.reset();
    let mut last = None;
    while !state.is_terminal() {
        let action = match policy {
            Policy::Random => rng.random_range(0..ACTION_COUNT),
            Policy::Greedy => {
                let mut best = (0, f64::NEG_INFINITY);
                let mut prefix = state.prefix();
                for a in 0..ACTION_COUNT {
                    prefix.push(a as u8);
                    let grid = env.completed_design(&prefix, CellKind::Rigid)?;
                    let r = env.scenario().evaluate(&grid)?.reward;
                    if r > best.1 {
                        best = (a, r);
                    }
                    prefix.pop();
                }
                best.0
            }
        };
        let (next, _, done) = env.step(&state, action)?;
        if done {
            last = Some(env.evaluate_terminal(&next)?);
        }
        state = next;
    }
    Ok(Rollout { slot_actions: env.slot_actions(&state)?, evaluation: last.expect("terminal evaluation") })
}

/// `n` rollouts of `policy` from a seeded generator.
pub fn run_baseline(env: &Env, policy: Policy, n: usize, seed: u64) -> Result<BaselineReport, Error> {
    if n == 0 {
        return Err(Error::Config("baseline needs at least one rollout".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rollouts = (0..n).map(|_| rollout(env, policy, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    let rewards: Vec<f64> = rollouts.iter().map(|r| r.evaluation.reward).collect();
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let mut best = 0;
    for (i, r) in rewards.iter().enumerate() {
        if *r > rewards[best] {
            best = i;
        }
    }
    Ok(BaselineReport { policy, max: rewards[best], mean, best, rollouts })
}
