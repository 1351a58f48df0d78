//! Per-construct mastery tracing with two-state hidden Markov chains.
//!
//! Each construct runs an independent mastered / not-mastered chain with
//! learn and forget transitions and guess and slip emissions.

mod em;
mod sentiment;

pub use em::{em_fit, sequence_log_likelihood, EmFit, EmOptions};
pub use sentiment::{score_sentiment, Lexicon, SentimentScore, CONFUSION_THRESHOLD};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TracingError {
    #[error("invalid BKT parameters: {0}")]
    InvalidParams(String),
    #[error("unknown construct {0}")]
    UnknownConstruct(String),
    #[error("{0}")]
    Domain(String),
    #[error("lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BktParams {
    pub p_init: f64,
    pub p_learn: f64,
    pub p_forget: f64,
    pub p_guess: f64,
    pub p_slip: f64,
}

impl Default for BktParams {
    fn default() -> Self {
        Self { p_init: 0.3, p_learn: 0.15, p_forget: 0.0, p_guess: 0.2, p_slip: 0.1 }
    }
}

impl BktParams {
    pub fn new(
        p_init: f64,
        p_learn: f64,
        p_forget: f64,
        p_guess: f64,
        p_slip: f64,
    ) -> Result<Self, TracingError> {
        let p = Self { p_init, p_learn, p_forget, p_guess, p_slip };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TracingError> {
        let fields = [
            ("p_init", self.p_init),
            ("p_learn", self.p_learn),
            ("p_forget", self.p_forget),
            ("p_guess", self.p_guess),
            ("p_slip", self.p_slip),
        ];
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(TracingError::InvalidParams(format!("{name} = {v} not in [0, 1]")));
            }
        }
        if !(self.p_guess < 1.0 - self.p_slip) {
            return Err(TracingError::InvalidParams(format!(
                "p_guess {} must be below 1 - p_slip {}",
                self.p_guess,
                1.0 - self.p_slip
            )));
        }
        Ok(())
    }

    /// Probability of a correct response given mastery probability `p`.
    pub fn p_correct(&self, p: f64) -> f64 {
        p * (1.0 - self.p_slip) + (1.0 - p) * self.p_guess
    }

    /// Learn/forget transition applied to a mastery probability.
    pub fn transition(&self, p: f64) -> f64 {
        p * (1.0 - self.p_forget) + (1.0 - p) * self.p_learn
    }

    /// Bayes posterior on one observation, before the transition.
    pub fn evidence(&self, p: f64, correct: bool) -> f64 {
        let (mastered, unmastered) = if correct {
            (p * (1.0 - self.p_slip), (1.0 - p) * self.p_guess)
        } else {
            (p * self.p_slip, (1.0 - p) * (1.0 - self.p_guess))
        };
        let denom = mastered + unmastered;
        if denom > 0.0 {
            mastered / denom
        } else {
            p
        }
    }
}

/// One BKT step: condition on the observation, then apply the transition.
/// A zero-probability observation skips the conditioning.
pub fn bkt_update(mastery: f64, correct: bool, params: &BktParams) -> f64 {
    params.transition(params.evidence(mastery, correct)).clamp(0.0, 1.0)
}

/// Predictive mastery after each observation: element `t` is
/// `P(mastered at t + 1 | obs[..=t])`, i.e. `bkt_update` folded over the prefix.
pub fn hmm_forward(observations: &[bool], params: &BktParams) -> Vec<f64> {
    observations
        .iter()
        .scan(params.p_init, |p, &obs| {
            *p = bkt_update(*p, obs, params);
            Some(*p)
        })
        .collect()
}

/// Filtered mastery: element `t` is `P(mastered at t | obs[..=t])`.
pub fn hmm_filter(observations: &[bool], params: &BktParams) -> Vec<f64> {
    let mut prior = params.p_init;
    observations
        .iter()
        .map(|&obs| {
            let post = params.evidence(prior, obs);
            prior = params.transition(post);
            post
        })
        .collect()
}

/// An observed interaction. `latency_ms` is recorded but does not enter the
/// emission model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub construct: String,
    pub correct: bool,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

/// Mastery probability per construct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasteryState {
    pub mastery: BTreeMap<String, f64>,
    pub step_count: u64,
}

impl MasteryState {
    pub fn new<'a>(constructs: impl IntoIterator<Item = &'a str>, p_init: f64) -> Self {
        Self {
            mastery: constructs.into_iter().map(|c| (c.to_string(), p_init)).collect(),
            step_count: 0,
        }
    }

    pub fn get(&self, construct: &str) -> Option<f64> {
        self.mastery.get(construct).copied()
    }

    /// Returns the state after one scored observation on `construct`.
    pub fn observe(
        &self,
        construct: &str,
        correct: bool,
        params: &BktParams,
    ) -> Result<Self, TracingError> {
        let p = self
            .get(construct)
            .ok_or_else(|| TracingError::UnknownConstruct(construct.to_string()))?;
        let mut next = self.clone();
        next.mastery.insert(construct.to_string(), bkt_update(p, correct, params));
        next.step_count += 1;
        Ok(next)
    }
}

/// Soft incorrect-evidence update from confusion-signaling text.
///
/// With `w = |compound|` and compound below [`CONFUSION_THRESHOLD`], mastery
/// becomes `(1 - w) p + w bkt_update(p, incorrect)`, capped at `p`: the learn
/// transition inside `bkt_update` can otherwise lift very low mastery values.
pub fn apply_feedback(
    state: &MasteryState,
    construct: &str,
    sentiment: &SentimentScore,
    params: &BktParams,
) -> Result<MasteryState, TracingError> {
    let p = state
        .get(construct)
        .ok_or_else(|| TracingError::UnknownConstruct(construct.to_string()))?;
    if sentiment.compound >= CONFUSION_THRESHOLD {
        return Ok(state.clone());
    }
    let w = sentiment.compound.abs().min(1.0);
    let blended = (1.0 - w) * p + w * bkt_update(p, false, params);
    let mut next = state.clone();
    next.mastery.insert(construct.to_string(), blended.min(p));
    Ok(next)
}
