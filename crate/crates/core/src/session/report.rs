//! Learner report: a pure function of session state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Phase, PresentationRecord, SessionError, SessionEvent, SessionState};
use crate::irt::EstimationMethod;
use crate::profile::DifficultyFlag;

/// Abilities at or above this read as strengths, at or below its negative as
/// areas for support.
const BAND: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructReport {
    pub construct: String,
    pub theta: f64,
    pub theta_sd: f64,
    pub method: EstimationMethod,
    pub mastery: f64,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub name: String,
    pub pulls: u64,
    pub mean_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub phase: Phase,
    pub responses: usize,
    pub elapsed_ms: u64,
    pub constructs: Vec<ConstructReport>,
    pub non_cognitive: BTreeMap<String, f64>,
    pub flags: BTreeSet<DifficultyFlag>,
    pub strategies: Vec<StrategyReport>,
    pub mean_reward: Option<f64>,
    pub presentation_history: Vec<PresentationRecord>,
    pub narrative: Vec<String>,
}

fn label(construct: &str) -> String {
    construct.replace('_', " ")
}

pub fn session_report(state: &SessionState) -> SessionReport {
    let cfg = &state.config;
    let constructs: Vec<ConstructReport> = cfg
        .constructs
        .iter()
        .map(|c| {
            let ability = state.ability[c];
            ConstructReport {
                construct: c.clone(),
                theta: state.profile.theta_of(c).unwrap_or(ability.theta_mean),
                theta_sd: ability.theta_sd,
                method: ability.method,
                mastery: state.mastery.get(c).unwrap_or(cfg.bkt.p_init),
                items: state.history.get(c).map_or(0, Vec::len),
            }
        })
        .collect();
    let strategies = cfg
        .strategies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pulls = state.bandit.counts[i];
            StrategyReport {
                name: s.name.clone(),
                pulls,
                mean_reward: (pulls > 0).then(|| state.bandit.rewards[i] / pulls as f64),
            }
        })
        .collect::<Vec<_>>();
    let mean_reward =
        (!state.rewards.is_empty()).then(|| state.rewards.iter().sum::<f64>() / state.rewards.len() as f64);

    let mut narrative = Vec::new();
    if state.responses == 0 {
        narrative.push("No responses yet; all estimates are the starting priors.".to_string());
    } else {
        narrative.push(format!(
            "{} responses over {:.1} minutes.",
            state.responses,
            state.clock_ms as f64 / 60_000.0
        ));
        let mut strong = Vec::new();
        let mut support = Vec::new();
        for c in &constructs {
            if c.items == 0 {
                continue;
            }
            narrative.push(format!(
                "{}: ability {:.2} (sd {:.2}), mastery {:.2} after {} items.",
                label(&c.construct),
                c.theta,
                c.theta_sd,
                c.mastery,
                c.items
            ));
            if c.theta >= BAND {
                strong.push(label(&c.construct));
            } else if c.theta <= -BAND {
                support.push(label(&c.construct));
            }
        }
        if !strong.is_empty() {
            narrative.push(format!("Strengths: {}.", strong.join(", ")));
        }
        if !support.is_empty() {
            narrative.push(format!("Areas for support: {}.", support.join(", ")));
        }
        for (scale, v) in &state.profile.non_cognitive {
            narrative.push(format!("{} rating {:.2} of 5.", label(scale), v));
        }
        if !state.profile.difficulty_flags.is_empty() {
            let names: Vec<String> = state
                .profile
                .difficulty_flags
                .iter()
                .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default())
                .collect();
            narrative.push(format!("Presentation adjusted for: {}.", names.join(", ")));
        }
        if let Some(best) = strategies.iter().filter(|s| s.pulls > 0).max_by(|a, b| a.pulls.cmp(&b.pulls)) {
            narrative.push(format!("Most used strategy: {} ({} items).", best.name, best.pulls));
        }
    }

    SessionReport {
        session_id: state.id.clone(),
        phase: state.phase,
        responses: state.responses,
        elapsed_ms: state.clock_ms,
        constructs,
        non_cognitive: state.profile.non_cognitive.clone(),
        flags: state.profile.difficulty_flags.clone(),
        strategies,
        mean_reward,
        presentation_history: state.presentation_history.clone(),
        narrative,
    }
}

pub fn report_from_events(events: &[SessionEvent]) -> Result<SessionReport, SessionError> {
    Ok(session_report(&SessionState::replay(events)?))
}
