//! Live tutoring sessions: an assessment phase of adaptive testing followed
//! by a tutoring phase driven by the presentation policies.
//!
//! All state changes go through events (see [`events`]). A command computes
//! its decisions from the current state, emits events carrying the results,
//! and the reducer folds them in. Randomness comes from a generator keyed by
//! the session seed and the sequence number of the event being produced.
//!
//! Within [`Session::submit_response`] updates run in a fixed order:
//! ability, mastery, sentiment, reward, bandit, Q table, profile.

pub mod events;
mod log;
mod report;
mod script;

pub use events::{
    EventBody, LikertValue, MasteryChange, Pending, Phase, PresentationRecord, ProfileReason, SelectionReason,
    SessionEvent, SessionState,
};
pub use log::{log_path, parse_log, read_log, to_jsonl, JsonlLog, DATA_DIR_ENV};
pub use script::{run_script, scripted_student, FREE_TEXT_EVERY, SCRIPT_FREE_TEXT};
pub use report::{report_from_events, session_report, ConstructReport, SessionReport, StrategyReport};

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{render_item, BankError, ContentProvider, Item, ItemBank, ItemKind, RenderedContent, TemplateProvider};
use crate::config::{ConfigError, EngineConfig, SelectionRule};
use crate::irt::{
    estimate_theta_eap, posterior_over_grid, select_item_bayes, select_item_max_info, IrtError, QuadratureGrid,
    Response,
};
use crate::knowledge::{apply_feedback, bkt_update, score_sentiment, Lexicon, SentimentScore, TracingError};
use crate::policy::{
    apply_difficulty_rules, compute_reward, discretize_state, map_presentation, media_action_grid, q_select,
    q_update, ucb_select, ucb_update, MediaMix, Outcome, PolicyError, PresentationParams,
};
use crate::profile::{derive_flags, update_profile, Gaussian, HierarchicalSpec, ProfileError};
use crate::sim::{retention, student_rng};

/// Constructs feeding the presentation mapping.
pub const VWM: &str = "verbal_working_memory";
pub const RC: &str = "reading";

/// Weight of the sentiment compound score in engagement.
const SENTIMENT_ENGAGEMENT_WEIGHT: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Irt(#[from] IrtError),
    #[error(transparent)]
    Tracing(#[from] TracingError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("no item is awaiting a response")]
    NoPendingItem,
    #[error("response is for item {got}, pending item is {expected}")]
    ItemMismatch { expected: String, got: String },
    #[error("response construct {got} does not match pending construct {expected}")]
    ConstructMismatch { expected: String, got: String },
    #[error("invalid answer: {0}")]
    InvalidAnswer(String),
    #[error("session is finished")]
    Finished,
    #[error("corrupt event log: {0}")]
    Corruption(String),
    #[error("event log line {line}: {message}")]
    LogParse { line: usize, message: String },
    #[error("event log io: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable context shared by sessions created from one configuration.
pub struct Engine {
    pub config: EngineConfig,
    pub bank: ItemBank,
    pub grid: QuadratureGrid,
    pub lexicon: Lexicon,
    pub actions: Vec<MediaMix>,
    by_construct: BTreeMap<String, Vec<Item>>,
    provider: Arc<dyn ContentProvider>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).field("items", &self.bank.len()).finish()
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let bank = config.load_bank()?;
        Self::with_bank(config, bank)
    }

    pub fn with_bank(config: EngineConfig, bank: ItemBank) -> Result<Self, SessionError> {
        config.validate()?;
        bank.require_constructs(&config.all_constructs())?;
        let mut by_construct: BTreeMap<String, Vec<Item>> = BTreeMap::new();
        for item in bank.items().iter().filter(|i| i.is_adaptive()) {
            by_construct.entry(item.construct.clone()).or_default().push(item.clone());
        }
        Ok(Self {
            grid: config.grid()?,
            actions: media_action_grid(config.q.divisions),
            config,
            bank,
            lexicon: Lexicon::bundled(),
            by_construct,
            provider: Arc::new(TemplateProvider),
        })
    }

    pub fn with_provider(mut self, provider: Arc<dyn ContentProvider>) -> Self {
        self.provider = provider;
        self
    }

    fn items_of(&self, construct: &str) -> &[Item] {
        self.by_construct.get(construct).map_or(&[], Vec::as_slice)
    }
}

/// What the learner answers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<String>,
    pub answer: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

impl ResponseInput {
    pub fn new(answer: &str, latency_ms: u64) -> Self {
        Self { answer: answer.into(), latency_ms, ..Self::default() }
    }

    pub fn with_free_text(mut self, text: &str) -> Self {
        self.free_text = Some(text.into());
        self
    }
}

/// An item as shown to the learner: no answer key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub id: String,
    pub construct: String,
    pub kind: ItemKind,
    pub options: Vec<String>,
}

impl From<&Item> for ItemView {
    fn from(item: &Item) -> Self {
        Self { id: item.id.clone(), construct: item.construct.clone(), kind: item.kind, options: item.options.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub phase: Phase,
    pub item: ItemView,
    pub content: RenderedContent,
    pub params: PresentationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSummary {
    pub item_id: String,
    pub construct: String,
    pub correct: Option<bool>,
    pub likert: Option<LikertValue>,
    pub ability: Option<crate::irt::AbilityEstimate>,
    pub mastery: Option<MasteryChange>,
    pub sentiment: Option<SentimentScore>,
    pub reward: Option<f64>,
    pub strategy: Option<String>,
    pub profile_updated: Option<ProfileReason>,
    pub theta: BTreeMap<String, f64>,
    pub phase: Phase,
    /// Sequence numbers of the events this response produced.
    pub events: Vec<u64>,
}

/// Engagement in [0, 1] from response latency and, when present, the
/// sentiment of free text: `L0 / (L0 + latency) + 0.25 compound`, clamped.
pub fn engagement_signal(latency_ms: u64, half_latency_ms: u64, compound: Option<f64>) -> f64 {
    let l0 = half_latency_ms.max(1) as f64;
    let base = l0 / (l0 + latency_ms as f64);
    (base + SENTIMENT_ENGAGEMENT_WEIGHT * compound.unwrap_or(0.0)).clamp(0.0, 1.0)
}

pub struct Session {
    engine: Arc<Engine>,
    state: SessionState,
    events: Vec<SessionEvent>,
    log: Option<JsonlLog>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("id", &self.state.id).field("phase", &self.state.phase).finish()
    }
}

impl Session {
    pub fn create(engine: Arc<Engine>, id: &str, seed: u64) -> Result<Self, SessionError> {
        let state = SessionState::initial(id, seed, &engine.config)?;
        let created = SessionEvent {
            seq: 0,
            timestamp_ms: 0,
            body: EventBody::Created { session_id: id.to_string(), seed, config: Box::new(engine.config.clone()) },
        };
        Ok(Self { engine, state, events: vec![created], log: None })
    }

    /// Rebuild a session from its log and continue it on `engine`, whose
    /// configuration must be the one recorded at creation.
    pub fn resume(engine: Arc<Engine>, events: Vec<SessionEvent>) -> Result<Self, SessionError> {
        let state = SessionState::replay(&events)?;
        if state.config != engine.config {
            return Err(SessionError::Corruption("engine configuration differs from the log".into()));
        }
        Ok(Self { engine, state, events, log: None })
    }

    /// Rebuild a session from its log alone, loading the recorded bank.
    pub fn replay(events: Vec<SessionEvent>) -> Result<Self, SessionError> {
        let state = SessionState::replay(&events)?;
        let engine = Arc::new(Engine::new(state.config.clone())?);
        Ok(Self { engine, state, events, log: None })
    }

    /// Persist to `log`, writing any events not yet in it.
    pub fn with_log(mut self, mut log: JsonlLog) -> Result<Self, SessionError> {
        for e in &self.events[log.written()..] {
            log.append(e)?;
        }
        self.log = Some(log);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.state.id
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn events_from(&self, from: u64) -> &[SessionEvent] {
        let start = usize::try_from(from).unwrap_or(usize::MAX).min(self.events.len());
        &self.events[start..]
    }

    pub fn report(&self) -> SessionReport {
        session_report(&self.state)
    }

    fn emit(&mut self, timestamp_ms: u64, body: EventBody) -> Result<u64, SessionError> {
        let event = SessionEvent { seq: self.state.next_seq, timestamp_ms, body };
        self.state.apply(&event)?;
        if let Some(log) = &mut self.log {
            log.append(&event)?;
        }
        let seq = event.seq;
        self.events.push(event);
        Ok(seq)
    }

    fn change_phase(&mut self, to: Phase, reason: &str) -> Result<u64, SessionError> {
        let from = self.state.phase;
        self.emit(self.state.clock_ms, EventBody::PhaseChanged { from, to, reason: reason.into() })
    }

    fn open_items<'a>(&self, items: &'a [Item]) -> impl Iterator<Item = &'a Item> + use<'a, '_> {
        items.iter().filter(|i| !self.state.administered.contains(&i.id))
    }

    fn theta(&self, construct: &str) -> f64 {
        self.state.profile.theta_of(construct).unwrap_or(self.state.config.assessment.prior_mean)
    }

    /// Serve the pending item, or select and render the next one.
    pub fn next_step(&mut self) -> Result<StepOutput, SessionError> {
        loop {
            if self.state.phase == Phase::Done {
                return Err(SessionError::Finished);
            }
            if let Some(p) = self.state.pending.clone() {
                return self.present(p);
            }
            match self.state.phase {
                Phase::Assessment => {
                    let a = &self.state.config.assessment;
                    if self.state.assessment_items >= a.budget {
                        self.change_phase(Phase::Tutoring, "budget")?;
                    } else if self.state.clock_ms >= a.time_limit_ms {
                        self.change_phase(Phase::Tutoring, "time_limit")?;
                    } else if !self.select_assessment_item()? {
                        self.change_phase(Phase::Tutoring, "bank_exhausted")?;
                    }
                }
                Phase::Tutoring => {
                    if self.state.tutoring_items >= self.state.config.tutoring.max_steps {
                        self.change_phase(Phase::Done, "max_steps")?;
                    } else if !self.select_tutoring_item()? {
                        self.change_phase(Phase::Done, "bank_exhausted")?;
                    }
                }
                Phase::Done => {}
            }
        }
    }

    fn present(&mut self, p: Pending) -> Result<StepOutput, SessionError> {
        let item = self
            .engine
            .bank
            .get(&p.item_id)
            .ok_or_else(|| SessionError::Corruption(format!("pending item {} not in bank", p.item_id)))?
            .clone();
        let content = match p.content {
            Some(c) => c,
            None => {
                let c = render_item(&item, &p.params, self.engine.provider.as_ref())?;
                self.emit(self.state.clock_ms, EventBody::ContentRendered { content: c.clone() })?;
                c
            }
        };
        Ok(StepOutput { phase: p.phase, item: ItemView::from(&item), content, params: p.params })
    }

    /// Least certain construct first (config order on ties), then the best
    /// item for it under the configured rule.
    fn select_assessment_item(&mut self) -> Result<bool, SessionError> {
        let engine = Arc::clone(&self.engine);
        let mut order: Vec<(usize, &String)> = self.state.config.constructs.iter().enumerate().collect();
        let sd = |c: &String| self.state.ability.get(c).map_or(0.0, |a| a.theta_sd);
        order.sort_by(|(i, a), (j, b)| sd(b).total_cmp(&sd(a)).then(i.cmp(j)));
        for (_, construct) in order {
            let items = engine.items_of(construct);
            if self.open_items(items).next().is_none() {
                continue;
            }
            let admin = &self.state.administered;
            let (item, reason) = match self.state.config.assessment.selection {
                SelectionRule::MaxInfo => {
                    let theta = self.state.ability[construct].theta_mean;
                    (select_item_max_info(items, theta, admin)?, SelectionReason::MaxInfo)
                }
                SelectionRule::Bayes => {
                    let hist = self.state.history.get(construct).map_or(&[][..], Vec::as_slice);
                    let post = posterior_over_grid(hist, &engine.grid)?;
                    (select_item_bayes(items, &post, admin)?, SelectionReason::Bayes)
                }
            };
            let body = EventBody::ItemSelected {
                item_id: item.id.clone(),
                construct: item.construct.clone(),
                phase: Phase::Assessment,
                reason,
                strategy: None,
                q_state: None,
                action: None,
                params: PresentationParams::default(),
            };
            self.emit(self.state.clock_ms, body)?;
            return Ok(true);
        }
        Ok(false)
    }

    fn select_tutoring_item(&mut self) -> Result<bool, SessionError> {
        let engine = Arc::clone(&self.engine);
        let cfg = &engine.config;
        let step = self.state.tutoring_items + 1;
        let questionnaire = || {
            engine
                .bank
                .items()
                .iter()
                .find(|i| i.kind == ItemKind::Likert && !self.state.administered.contains(&i.id))
        };
        let likert_turn = cfg.tutoring.likert_every > 0 && step.is_multiple_of(cfg.tutoring.likert_every);
        let mut order: Vec<(usize, &String)> = cfg.constructs.iter().enumerate().collect();
        let mastery = |c: &String| self.state.mastery.get(c).unwrap_or(0.0);
        order.sort_by(|(i, a), (j, b)| mastery(a).total_cmp(&mastery(b)).then(i.cmp(j)));
        let practice = order.iter().find_map(|(_, c)| {
            let items = engine.items_of(c);
            self.open_items(items).next().map(|_| (c.as_str(), items))
        });

        let survey = if likert_turn || practice.is_none() { questionnaire() } else { None };
        let body = if let Some(item) = survey {
            let params =
                apply_difficulty_rules(&self.state.profile.difficulty_flags, &PresentationParams::default(), &cfg.rules);
            EventBody::ItemSelected {
                item_id: item.id.clone(),
                construct: item.construct.clone(),
                phase: Phase::Tutoring,
                reason: SelectionReason::Questionnaire,
                strategy: None,
                q_state: None,
                action: None,
                params,
            }
        } else if let Some((construct, items)) = practice {
            let item = select_item_max_info(items, self.theta(construct), &self.state.administered)?;
            let (vwm, rc) = (self.theta(VWM), self.theta(RC));
            let (text_complexity, chunk_size) = map_presentation(vwm, rc, &cfg.mapping);
            let base = PresentationParams { text_complexity, chunk_size, ..PresentationParams::default() };
            let arm = ucb_select(&self.state.bandit);
            let mut params = cfg.strategies[arm].apply(&base);
            let s = discretize_state(vwm, rc, self.state.engaged);
            let mut rng = student_rng(self.state.seed, self.state.next_seq);
            let a = q_select(&self.state.qtable, s, &mut rng)?;
            params.media_mix = engine.actions[a];
            let params = apply_difficulty_rules(&self.state.profile.difficulty_flags, &params, &cfg.rules);
            EventBody::ItemSelected {
                item_id: item.id.clone(),
                construct: item.construct.clone(),
                phase: Phase::Tutoring,
                reason: SelectionReason::LowestMastery,
                strategy: Some(arm),
                q_state: Some(s),
                action: Some(a),
                params,
            }
        } else {
            return Ok(false);
        };
        self.emit(self.state.clock_ms, body)?;
        Ok(true)
    }

    pub fn submit_response(&mut self, input: &ResponseInput) -> Result<UpdateSummary, SessionError> {
        if self.state.phase == Phase::Done {
            return Err(SessionError::Finished);
        }
        let pending = self.state.pending.clone().ok_or(SessionError::NoPendingItem)?;
        if let Some(id) = &input.item_id {
            if *id != pending.item_id {
                return Err(SessionError::ItemMismatch { expected: pending.item_id, got: id.clone() });
            }
        }
        if let Some(c) = &input.construct {
            if *c != pending.construct {
                return Err(SessionError::ConstructMismatch { expected: pending.construct, got: c.clone() });
            }
        }
        let engine = Arc::clone(&self.engine);
        let cfg = &engine.config;
        let item = engine
            .bank
            .get(&pending.item_id)
            .ok_or_else(|| SessionError::Corruption(format!("pending item {} not in bank", pending.item_id)))?;
        let construct = pending.construct.clone();
        let timestamp = self.state.clock_ms + input.latency_ms;
        let sentiment = input.free_text.as_deref().map(|t| score_sentiment(t, &engine.lexicon));
        let mut summary = UpdateSummary {
            item_id: item.id.clone(),
            construct: construct.clone(),
            correct: None,
            likert: None,
            ability: None,
            mastery: None,
            sentiment,
            reward: None,
            strategy: None,
            profile_updated: None,
            theta: BTreeMap::new(),
            phase: self.state.phase,
            events: Vec::new(),
        };

        if item.kind == ItemKind::Likert {
            let (scale, value) = item
                .likert_value(&input.answer)
                .ok_or_else(|| SessionError::InvalidAnswer(format!("{:?} is not a rating from 1 to 5", input.answer)))?;
            let likert = LikertValue { scale: scale.clone(), value };
            summary.likert = Some(likert.clone());
            summary.events.push(self.emit(
                timestamp,
                EventBody::Response {
                    item_id: item.id.clone(),
                    answer: input.answer.clone(),
                    latency_ms: input.latency_ms,
                    free_text: input.free_text.clone(),
                    correct: None,
                    likert: Some(likert),
                    irt: None,
                    ability: None,
                    mastery: None,
                    sentiment,
                },
            )?);
            let values = &self.state.likert[&scale];
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let mut profile = self.state.profile.clone();
            profile.set_non_cognitive(&scale, mean)?;
            profile.difficulty_flags = derive_flags(&profile, &cfg.flag_rules);
            summary.events.push(self.emit(
                timestamp,
                EventBody::ProfileUpdated { reason: ProfileReason::Questionnaire, profile },
            )?);
            summary.profile_updated = Some(ProfileReason::Questionnaire);
        } else {
            let correct = item.is_correct(&input.answer).unwrap_or(false);
            summary.correct = Some(correct);
            let irt = Response::new(item.params, correct);

            // ability
            let ability = if pending.phase == Phase::Assessment {
                let mut hist = self.state.history.get(&construct).cloned().unwrap_or_default();
                hist.push(irt);
                Some(estimate_theta_eap(&hist, &engine.grid)?)
            } else {
                None
            };
            summary.ability = ability;

            // mastery, then sentiment feedback
            let mastery = match self.state.mastery.get(&construct) {
                Some(before) => {
                    let traced = bkt_update(before, correct, &cfg.bkt);
                    let mut tmp = self.state.mastery.clone();
                    tmp.mastery.insert(construct.clone(), traced);
                    let after = match &sentiment {
                        Some(s) => apply_feedback(&tmp, &construct, s, &cfg.bkt)?.mastery[&construct],
                        None => traced,
                    };
                    Some(MasteryChange { before, traced, after })
                }
                None => None,
            };
            summary.mastery = mastery;
            summary.events.push(self.emit(
                timestamp,
                EventBody::Response {
                    item_id: item.id.clone(),
                    answer: input.answer.clone(),
                    latency_ms: input.latency_ms,
                    free_text: input.free_text.clone(),
                    correct: Some(correct),
                    likert: None,
                    irt: Some(irt),
                    ability,
                    mastery,
                    sentiment,
                },
            )?);

            // reward, bandit, Q
            if let (Some(arm), Some(s), Some(a)) = (pending.strategy, pending.q_state, pending.action) {
                let gain = mastery.map_or(0.0, |m| m.after - m.before);
                let engagement = engagement_signal(
                    input.latency_ms,
                    cfg.tutoring.engagement_latency_ms,
                    sentiment.map(|s| s.compound),
                );
                let outcome = Outcome { mastery_gain: gain, engagement, retention: retention(gain) };
                let reward = compute_reward(&outcome, &cfg.reward.weights());
                let bandit = ucb_update(&self.state.bandit, arm, reward)?;
                let engaged = engagement >= 0.5;
                let next_state = discretize_state(self.theta(VWM), self.theta(RC), engaged);
                let q = q_update(&self.state.qtable, s, a, reward, Some(next_state))?;
                summary.reward = Some(reward);
                summary.strategy = Some(cfg.strategies[arm].name.clone());
                summary.events.push(self.emit(
                    timestamp,
                    EventBody::PolicyUpdated {
                        outcome,
                        reward,
                        strategy: arm,
                        bandit_count: bandit.counts[arm],
                        bandit_reward: bandit.rewards[arm],
                        bandit_t: bandit.t,
                        q_state: s,
                        action: a,
                        next_state,
                        q_value: q.values[s][a],
                        engaged,
                    },
                )?);
            }

            // profile
            if let Some(est) = ability {
                let mut profile = self.state.profile.clone();
                profile.set_theta(&construct, est.theta_mean)?;
                profile.difficulty_flags = derive_flags(&profile, &cfg.flag_rules);
                summary.events.push(self.emit(
                    timestamp,
                    EventBody::ProfileUpdated { reason: ProfileReason::Assessment, profile },
                )?);
                summary.profile_updated = Some(ProfileReason::Assessment);
            } else if pending.phase == Phase::Tutoring {
                let every = cfg.tutoring.profile_refresh_every;
                if every > 0 && self.state.tutoring_responses.is_multiple_of(every) && !self.state.since_refresh.is_empty() {
                    let profile = self.refreshed_profile()?;
                    summary.events.push(
                        self.emit(timestamp, EventBody::ProfileUpdated { reason: ProfileReason::Refresh, profile })?,
                    );
                    summary.profile_updated = Some(ProfileReason::Refresh);
                }
            }
        }

        // phase rules
        match self.state.phase {
            Phase::Assessment => {
                let a = &cfg.assessment;
                if self.state.assessment_items >= a.budget {
                    summary.events.push(self.change_phase(Phase::Tutoring, "budget")?);
                } else if self.state.clock_ms >= a.time_limit_ms {
                    summary.events.push(self.change_phase(Phase::Tutoring, "time_limit")?);
                }
            }
            Phase::Tutoring => {
                if self.state.tutoring_items >= cfg.tutoring.max_steps {
                    summary.events.push(self.change_phase(Phase::Done, "max_steps")?);
                }
            }
            Phase::Done => {}
        }
        summary.phase = self.state.phase;
        summary.theta = self
            .state
            .profile
            .constructs
            .iter()
            .cloned()
            .zip(self.state.profile.theta.iter().copied())
            .collect();
        Ok(summary)
    }

    /// Metropolis-Hastings refresh of every construct practised since the
    /// last refresh. The likelihood summarizes the recent response window by
    /// its posterior under a wide prior; the prior is the current ability.
    fn refreshed_profile(&self) -> Result<crate::profile::StudentProfile, SessionError> {
        let cfg = &self.engine.config;
        let pr = &cfg.tutoring.profile;
        let a = &cfg.assessment;
        let half = 5.0 * a.prior_sd;
        let wide = QuadratureGrid::normal(a.prior_mean, pr.evidence_prior_sd, a.grid_points, a.prior_mean - half, a.prior_mean + half)?;
        let mut rng = student_rng(self.state.seed, self.state.next_seq);
        let mut profile = self.state.profile.clone();
        for construct in &self.state.since_refresh {
            let hist = &self.state.history[construct];
            let window = &hist[hist.len().saturating_sub(pr.window)..];
            let evidence = estimate_theta_eap(window, &wide)?;
            let spec = HierarchicalSpec::new(
                Gaussian::new(evidence.theta_mean, evidence.theta_sd.max(1e-3)),
                Gaussian::new(0.0, pr.prior_scale),
                pr.proposal_sd,
                pr.n_samples,
                rng.random(),
            )
            .with_burn_in(pr.burn_in);
            profile = update_profile(&profile, construct, &spec)?;
        }
        profile.difficulty_flags = derive_flags(&profile, &cfg.flag_rules);
        Ok(profile)
    }
}
