//! UCB over presentation strategies.
//!
//! The score is `rewards / (counts + 1e-5) + c sqrt(ln(t + 1) / (counts + 1))`.
//! The mean term and the bonus use different smoothing constants.

use serde::{Deserialize, Serialize};

use super::PolicyError;

const MEAN_SMOOTHING: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    pub counts: Vec<u64>,
    pub rewards: Vec<f64>,
    pub t: u64,
    pub c: f64,
}

impl BanditState {
    pub fn new(arms: usize, c: f64) -> Result<Self, PolicyError> {
        if arms == 0 {
            return Err(PolicyError::Invalid("bandit needs at least one arm".into()));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(PolicyError::Invalid(format!("exploration constant {c} must be >= 0")));
        }
        Ok(Self { counts: vec![0; arms], rewards: vec![0.0; arms], t: 0, c })
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }
}

pub fn ucb_score(state: &BanditState, arm: usize) -> f64 {
    let n = state.counts[arm] as f64;
    state.rewards[arm] / (n + MEAN_SMOOTHING) + state.c * (((state.t + 1) as f64).ln() / (n + 1.0)).sqrt()
}

/// Highest score, lowest index on ties.
pub fn ucb_select(state: &BanditState) -> usize {
    let mut best = 0;
    let mut best_score = ucb_score(state, 0);
    for arm in 1..state.arms() {
        let s = ucb_score(state, arm);
        if s > best_score {
            best = arm;
            best_score = s;
        }
    }
    best
}

pub fn ucb_update(state: &BanditState, arm: usize, reward: f64) -> Result<BanditState, PolicyError> {
    if arm >= state.arms() {
        return Err(PolicyError::IndexOutOfRange { index: arm, len: state.arms() });
    }
    if !reward.is_finite() {
        return Err(PolicyError::NonFiniteReward(reward));
    }
    let mut next = state.clone();
    next.counts[arm] += 1;
    next.rewards[arm] += reward;
    next.t += 1;
    Ok(next)
}
