//! Session events and the reducer that folds them into state.
//!
//! Events carry the results of every decision and update, so the reducer
//! only assigns values. Replaying a log therefore needs neither the bank nor
//! a random generator, and reproduces the live state bit for bit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::bank::RenderedContent;
use crate::config::EngineConfig;
use crate::irt::{AbilityEstimate, QuadratureGrid, Response};
use crate::knowledge::{MasteryState, SentimentScore};
use crate::policy::{media_action_grid, BanditState, Outcome, PresentationParams, QTable, ENGAGEMENT_BINS, THETA_BINS};
use crate::profile::StudentProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Assessment,
    Tutoring,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionReason {
    /// Most informative item for the least certain construct.
    MaxInfo,
    /// Smallest expected posterior variance for the least certain construct.
    Bayes,
    /// Practice on the construct with the lowest mastery.
    LowestMastery,
    Questionnaire,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileReason {
    Assessment,
    Questionnaire,
    Refresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasteryChange {
    pub before: f64,
    /// After the correctness evidence and transition.
    pub traced: f64,
    /// After sentiment feedback.
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertValue {
    pub scale: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventBody {
    Created {
        session_id: String,
        seed: u64,
        config: Box<EngineConfig>,
    },
    ItemSelected {
        item_id: String,
        construct: String,
        phase: Phase,
        reason: SelectionReason,
        strategy: Option<usize>,
        q_state: Option<usize>,
        action: Option<usize>,
        params: PresentationParams,
    },
    ContentRendered {
        content: RenderedContent,
    },
    Response {
        item_id: String,
        answer: String,
        latency_ms: u64,
        free_text: Option<String>,
        correct: Option<bool>,
        likert: Option<LikertValue>,
        irt: Option<Response>,
        ability: Option<AbilityEstimate>,
        mastery: Option<MasteryChange>,
        sentiment: Option<SentimentScore>,
    },
    PolicyUpdated {
        outcome: Outcome,
        reward: f64,
        strategy: usize,
        bandit_count: u64,
        bandit_reward: f64,
        bandit_t: u64,
        q_state: usize,
        action: usize,
        next_state: usize,
        q_value: f64,
        engaged: bool,
    },
    ProfileUpdated {
        reason: ProfileReason,
        profile: StudentProfile,
    },
    PhaseChanged {
        from: Phase,
        to: Phase,
        reason: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Created { .. } => "CREATED",
            EventBody::ItemSelected { .. } => "ITEM_SELECTED",
            EventBody::ContentRendered { .. } => "CONTENT_RENDERED",
            EventBody::Response { .. } => "RESPONSE",
            EventBody::PolicyUpdated { .. } => "POLICY_UPDATED",
            EventBody::ProfileUpdated { .. } => "PROFILE_UPDATED",
            EventBody::PhaseChanged { .. } => "PHASE_CHANGED",
        }
    }
}

/// One log entry. `timestamp_ms` is the logical session clock: the sum of
/// response latencies so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

/// The item awaiting a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub item_id: String,
    pub construct: String,
    pub phase: Phase,
    pub strategy: Option<usize>,
    pub q_state: Option<usize>,
    pub action: Option<usize>,
    pub params: PresentationParams,
    pub content: Option<RenderedContent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationRecord {
    pub seq: u64,
    pub item_id: String,
    pub phase: Phase,
    pub strategy: Option<usize>,
    pub params: PresentationParams,
}

/// Everything a session knows. Built only by [`SessionState::apply`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub seed: u64,
    pub config: EngineConfig,
    pub phase: Phase,
    pub profile: StudentProfile,
    pub mastery: MasteryState,
    pub ability: BTreeMap<String, AbilityEstimate>,
    /// Scored responses per construct, both phases.
    pub history: BTreeMap<String, Vec<Response>>,
    pub likert: BTreeMap<String, Vec<f64>>,
    pub bandit: BanditState,
    pub qtable: QTable,
    pub administered: BTreeSet<String>,
    pub pending: Option<Pending>,
    pub engaged: bool,
    pub clock_ms: u64,
    pub assessment_items: usize,
    pub tutoring_items: usize,
    pub tutoring_responses: usize,
    pub responses: usize,
    /// Constructs practised since the last profile refresh.
    pub since_refresh: BTreeSet<String>,
    pub rewards: Vec<f64>,
    pub presentation_history: Vec<PresentationRecord>,
    pub next_seq: u64,
}

fn corrupt(msg: impl Into<String>) -> SessionError {
    SessionError::Corruption(msg.into())
}

impl SessionState {
    /// State right after CREATED.
    pub fn initial(id: &str, seed: u64, config: &EngineConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let grid: QuadratureGrid = config.grid()?;
        let prior = AbilityEstimate::prior(&grid);
        let actions = media_action_grid(config.q.divisions).len();
        Ok(Self {
            id: id.to_string(),
            seed,
            config: config.clone(),
            phase: Phase::Assessment,
            profile: StudentProfile::new(&config.constructs, config.assessment.prior_mean),
            mastery: MasteryState::new(config.constructs.iter().map(String::as_str), config.bkt.p_init),
            ability: config.constructs.iter().map(|c| (c.clone(), prior)).collect(),
            history: BTreeMap::new(),
            likert: BTreeMap::new(),
            bandit: BanditState::new(config.strategies.len(), config.ucb.c)?,
            qtable: QTable::new(
                THETA_BINS * THETA_BINS * ENGAGEMENT_BINS,
                actions,
                config.q.alpha,
                config.q.gamma,
                config.q.epsilon,
            )?,
            administered: BTreeSet::new(),
            pending: None,
            engaged: true,
            clock_ms: 0,
            assessment_items: 0,
            tutoring_items: 0,
            tutoring_responses: 0,
            responses: 0,
            since_refresh: BTreeSet::new(),
            rewards: Vec::new(),
            presentation_history: Vec::new(),
            next_seq: 1,
        })
    }

    /// Fold a whole log. The first event must be CREATED with sequence 0.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, SessionError> {
        let first = events.first().ok_or_else(|| corrupt("empty event log"))?;
        let mut state = match &first.body {
            EventBody::Created { session_id, seed, config } if first.seq == 0 => {
                Self::initial(session_id, *seed, config)?
            }
            _ => return Err(corrupt("log must start with CREATED at sequence 0")),
        };
        for e in &events[1..] {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        if event.seq != self.next_seq {
            return Err(corrupt(format!("expected sequence {}, found {}", self.next_seq, event.seq)));
        }
        if event.timestamp_ms < self.clock_ms {
            return Err(corrupt(format!("timestamp went back at sequence {}", event.seq)));
        }
        match &event.body {
            EventBody::Created { .. } => return Err(corrupt(format!("second CREATED at {}", event.seq))),
            EventBody::ItemSelected { item_id, construct, phase, strategy, q_state, action, params, .. } => {
                if *phase != self.phase || self.phase == Phase::Done {
                    return Err(corrupt(format!("selection in wrong phase at {}", event.seq)));
                }
                if !self.administered.insert(item_id.clone()) {
                    return Err(corrupt(format!("item {item_id} selected twice")));
                }
                match phase {
                    Phase::Assessment => self.assessment_items += 1,
                    _ => self.tutoring_items += 1,
                }
                self.presentation_history.push(PresentationRecord {
                    seq: event.seq,
                    item_id: item_id.clone(),
                    phase: *phase,
                    strategy: *strategy,
                    params: params.clone(),
                });
                self.pending = Some(Pending {
                    item_id: item_id.clone(),
                    construct: construct.clone(),
                    phase: *phase,
                    strategy: *strategy,
                    q_state: *q_state,
                    action: *action,
                    params: params.clone(),
                    content: None,
                });
            }
            EventBody::ContentRendered { content } => match &mut self.pending {
                Some(p) if p.item_id == content.item_id => p.content = Some(content.clone()),
                _ => return Err(corrupt(format!("content for an item not pending at {}", event.seq))),
            },
            EventBody::Response { item_id, latency_ms, irt, ability, mastery, likert, .. } => {
                let pending = self.pending.take().ok_or_else(|| corrupt("response without pending item"))?;
                if &pending.item_id != item_id {
                    return Err(corrupt(format!("response to {item_id}, pending {}", pending.item_id)));
                }
                self.clock_ms += latency_ms;
                self.responses += 1;
                let c = pending.construct;
                if let Some(r) = irt {
                    self.history.entry(c.clone()).or_default().push(*r);
                    if pending.phase == Phase::Tutoring {
                        self.tutoring_responses += 1;
                        self.since_refresh.insert(c.clone());
                    }
                }
                if let Some(a) = ability {
                    self.ability.insert(c.clone(), *a);
                }
                if let Some(m) = mastery {
                    self.mastery.mastery.insert(c.clone(), m.after);
                    self.mastery.step_count += 1;
                }
                if let Some(l) = likert {
                    self.likert.entry(l.scale.clone()).or_default().push(l.value);
                }
            }
            EventBody::PolicyUpdated {
                reward,
                strategy,
                bandit_count,
                bandit_reward,
                bandit_t,
                q_state,
                action,
                q_value,
                engaged,
                ..
            } => {
                let arms = self.bandit.arms();
                if *strategy >= arms || *q_state >= self.qtable.states() || *action >= self.qtable.actions() {
                    return Err(corrupt(format!("policy index out of range at {}", event.seq)));
                }
                self.bandit.counts[*strategy] = *bandit_count;
                self.bandit.rewards[*strategy] = *bandit_reward;
                self.bandit.t = *bandit_t;
                self.qtable.values[*q_state][*action] = *q_value;
                self.engaged = *engaged;
                self.rewards.push(*reward);
            }
            EventBody::ProfileUpdated { reason, profile } => {
                if profile.constructs != self.profile.constructs {
                    return Err(corrupt("profile constructs changed"));
                }
                self.profile = profile.clone();
                if *reason == ProfileReason::Refresh {
                    self.since_refresh.clear();
                }
            }
            EventBody::PhaseChanged { from, to, .. } => {
                if *from != self.phase || *to <= *from {
                    return Err(corrupt(format!("illegal phase change {from:?} -> {to:?}")));
                }
                self.phase = *to;
                if *to == Phase::Done {
                    self.pending = None;
                }
            }
        }
        self.clock_ms = self.clock_ms.max(event.timestamp_ms);
        self.next_seq += 1;
        Ok(())
    }
}
