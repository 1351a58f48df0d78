//! Tabular epsilon-greedy Q-learning over discretized learner states and a
//! grid of media mixes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MediaMix, PolicyError};

/// Low / mid / high at -0.5 and +0.5.
pub const THETA_BINS: usize = 3;
pub const ENGAGEMENT_BINS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub values: Vec<Vec<f64>>,
    pub alpha_lr: f64,
    pub gamma_discount: f64,
    pub epsilon_explore: f64,
}

impl QTable {
    pub fn new(
        states: usize,
        actions: usize,
        alpha_lr: f64,
        gamma_discount: f64,
        epsilon_explore: f64,
    ) -> Result<Self, PolicyError> {
        if states == 0 || actions == 0 {
            return Err(PolicyError::Invalid("Q table needs states and actions".into()));
        }
        let q = Self { values: vec![vec![0.0; actions]; states], alpha_lr, gamma_discount, epsilon_explore };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.alpha_lr > 0.0 && self.alpha_lr <= 1.0) {
            return Err(PolicyError::Invalid(format!("alpha {} not in (0, 1]", self.alpha_lr)));
        }
        if !(0.0..1.0).contains(&self.gamma_discount) {
            return Err(PolicyError::Invalid(format!("gamma {} not in [0, 1)", self.gamma_discount)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return Err(PolicyError::Invalid(format!("epsilon {} not in [0, 1]", self.epsilon_explore)));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PolicyError::Invalid("non-finite Q value".into()));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn actions(&self) -> usize {
        self.values[0].len()
    }

    fn check_state(&self, s: usize) -> Result<(), PolicyError> {
        if s < self.states() {
            Ok(())
        } else {
            Err(PolicyError::IndexOutOfRange { index: s, len: self.states() })
        }
    }

    /// Argmax of the row, lowest index on ties.
    pub fn greedy(&self, s: usize) -> Result<usize, PolicyError> {
        self.check_state(s)?;
        let row = &self.values[s];
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        Ok(best)
    }

    pub fn max_value(&self, s: usize) -> Result<f64, PolicyError> {
        Ok(self.values[s][self.greedy(s)?])
    }

    /// In-place one-step update. `s_next = None` marks a terminal transition.
    pub fn update(&mut self, s: usize, a: usize, r: f64, s_next: Option<usize>) -> Result<(), PolicyError> {
        self.check_state(s)?;
        if a >= self.actions() {
            return Err(PolicyError::IndexOutOfRange { index: a, len: self.actions() });
        }
        if !r.is_finite() {
            return Err(PolicyError::NonFiniteReward(r));
        }
        let bootstrap = match s_next {
            Some(n) => self.max_value(n)?,
            None => 0.0,
        };
        let q = self.values[s][a];
        self.values[s][a] = q + self.alpha_lr * (r + self.gamma_discount * bootstrap - q);
        Ok(())
    }
}

/// Uniform random action with probability epsilon, greedy otherwise.
pub fn q_select<R: Rng + ?Sized>(q: &QTable, state: usize, rng: &mut R) -> Result<usize, PolicyError> {
    let greedy = q.greedy(state)?;
    if rng.random::<f64>() < q.epsilon_explore {
        Ok(rng.random_range(0..q.actions()))
    } else {
        Ok(greedy)
    }
}

pub fn q_update(q: &QTable, s: usize, a: usize, r: f64, s_next: Option<usize>) -> Result<QTable, PolicyError> {
    let mut next = q.clone();
    next.update(s, a, r, s_next)?;
    Ok(next)
}

fn theta_bin(theta: f64) -> usize {
    if theta < -0.5 {
        0
    } else if theta <= 0.5 {
        1
    } else {
        2
    }
}

/// State index from the two mapped abilities and an engagement bit.
pub fn discretize_state(theta_vwm: f64, theta_rc: f64, engaged: bool) -> usize {
    (theta_bin(theta_vwm) * THETA_BINS + theta_bin(theta_rc)) * ENGAGEMENT_BINS + usize::from(engaged)
}

/// All mixes whose shares are multiples of `1 / divisions`, ordered by
/// image share then sound share.
pub fn media_action_grid(divisions: u32) -> Vec<MediaMix> {
    let n = divisions.max(1);
    let d = f64::from(n);
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n - i {
            let k = n - i - j;
            out.push(MediaMix { image: f64::from(i) / d, sound: f64::from(j) / d, text: f64::from(k) / d });
        }
    }
    out
}
