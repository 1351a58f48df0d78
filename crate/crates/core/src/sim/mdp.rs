//! Deterministic toy MDPs and a Q-learning training run checked against
//! value iteration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{student_rng, ExperimentReport, SimError, Summary};
use crate::policy::{q_select, QTable};

/// `next[s][a]` is the successor state, `None` for a terminal transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicMdp {
    pub next: Vec<Vec<Option<usize>>>,
    pub reward: Vec<Vec<f64>>,
    pub gamma: f64,
}

/// Cost of a non-stay move in [`DeterministicMdp::chain`].
pub const MOVE_COST: f64 = 0.2;

impl DeterministicMdp {
    /// Four states in a row with actions left, stay and right (moves clamp
    /// at the ends). Arriving in state 3 pays 1 and every move costs
    /// [`MOVE_COST`]. The optimal policy heads right and stays at the goal.
    pub fn chain(gamma: f64) -> Self {
        let n = 4usize;
        let mut next = Vec::new();
        let mut reward = Vec::new();
        for s in 0..n {
            let targets = [s.saturating_sub(1), s, (s + 1).min(n - 1)];
            next.push(targets.iter().map(|&t| Some(t)).collect());
            reward.push(
                targets
                    .iter()
                    .enumerate()
                    .map(|(a, &t)| f64::from(u8::from(t == n - 1)) - if a == 1 { 0.0 } else { MOVE_COST })
                    .collect(),
            );
        }
        Self { next, reward, gamma }
    }

    pub fn states(&self) -> usize {
        self.next.len()
    }

    pub fn actions(&self) -> usize {
        self.next.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let (s, a) = (self.states(), self.actions());
        if s == 0 || a == 0 {
            return Err(SimError::Invalid("MDP needs states and actions".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(SimError::Invalid(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if self.reward.len() != s || self.next.iter().any(|row| row.len() != a) {
            return Err(SimError::Invalid("ragged MDP tables".into()));
        }
        for (row_n, row_r) in self.next.iter().zip(&self.reward) {
            if row_r.len() != a || row_r.iter().any(|r| !r.is_finite()) {
                return Err(SimError::Invalid("rewards must be finite".into()));
            }
            if row_n.iter().flatten().any(|&t| t >= s) {
                return Err(SimError::Invalid("successor out of range".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    /// Greedy action per state; ties within 1e-9 go to the lowest index.
    pub policy: Vec<usize>,
    pub sweeps: usize,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..row.len() {
        if row[a] > row[best] + 1e-9 {
            best = a;
        }
    }
    best
}

/// Bellman optimality sweeps until the largest change is below `tol`.
pub fn value_iteration(mdp: &DeterministicMdp, tol: f64) -> Result<ValueSolution, SimError> {
    mdp.validate()?;
    let (ns, na) = (mdp.states(), mdp.actions());
    let mut v = vec![0.0; ns];
    let mut q = vec![vec![0.0; na]; ns];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                q[s][a] = mdp.reward[s][a] + mdp.next[s][a].map_or(0.0, |t| mdp.gamma * v[t]);
            }
            let best = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < tol || sweeps >= 100_000 {
            break;
        }
    }
    let policy = q.iter().map(|row| argmax(row)).collect();
    Ok(ValueSolution { values: v, q, policy, sweeps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QExperimentConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of episodes over which epsilon falls linearly to its end value.
    pub anneal_fraction: f64,
    pub max_steps: usize,
    /// Per-step chance that an episode is cut off. The cut still bootstraps.
    pub stop_probability: f64,
}

impl Default for QExperimentConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            alpha: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            anneal_fraction: 0.8,
            max_steps: 100,
            stop_probability: 0.1,
        }
    }
}

impl QExperimentConfig {
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let span = (self.anneal_fraction * self.episodes as f64).max(1.0);
        let f = (episode as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QOutcome {
    pub report: ExperimentReport,
    pub q: QTable,
    pub oracle: ValueSolution,
    pub greedy: Vec<usize>,
}

/// Epsilon-greedy Q-learning from uniformly random start states. Series
/// `return` is the undiscounted return per episode; summary
/// `policy_agreement` is the fraction of states whose greedy action matches
/// value iteration.
pub fn run_q_experiment(mdp: &DeterministicMdp, cfg: &QExperimentConfig, seed: u64) -> Result<QOutcome, SimError> {
    mdp.validate()?;
    let oracle = value_iteration(mdp, 1e-12)?;
    let mut rng = student_rng(seed, 0);
    let mut q = QTable::new(mdp.states(), mdp.actions(), cfg.alpha, mdp.gamma, cfg.epsilon_start)?;
    let mut returns = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        q.epsilon_explore = cfg.epsilon_at(ep).clamp(0.0, 1.0);
        let mut s = rng.random_range(0..mdp.states());
        let mut total = 0.0;
        for _ in 0..cfg.max_steps {
            let a = q_select(&q, s, &mut rng)?;
            let r = mdp.reward[s][a];
            let next = mdp.next[s][a];
            q.update(s, a, r, next)?;
            total += r;
            match next {
                None => break,
                Some(t) => s = t,
            }
            if rng.random::<f64>() < cfg.stop_probability {
                break;
            }
        }
        returns.push(total);
    }
    let greedy = (0..mdp.states()).map(|s| q.greedy(s)).collect::<Result<Vec<_>, _>>()?;
    let agree: Vec<f64> = greedy.iter().zip(&oracle.policy).map(|(g, o)| f64::from(u8::from(g == o))).collect();
    let mut report = ExperimentReport::new("q", "episode");
    report.push_series("return", returns);
    report.push_summary(Summary::of("policy_agreement", &agree));
    Ok(QOutcome { report, q, oracle, greedy })
}
