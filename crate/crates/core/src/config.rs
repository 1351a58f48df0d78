//! Engine configuration, loaded from TOML.
//!
//! Every key is optional and falls back to the defaults below:
//!
//! ```toml
//! bank_path = "bank.json"          # bundled sample bank when absent
//! constructs = ["reading", "mathematics"]
//!
//! [assessment]
//! budget = 20                      # item cap
//! time_limit_ms = 1200000          # logical-time cap
//! selection = "max_info"           # or "bayes"
//!
//! [tutoring]
//! max_steps = 40
//! likert_every = 4
//! profile_refresh_every = 5
//!
//! [ucb]
//! c = 2.0
//!
//! [q]
//! alpha = 0.1
//! gamma = 0.9
//! epsilon = 0.1
//!
//! [reward]
//! weights = [0.6, 0.3, 0.1]        # mastery gain, engagement, retention
//!
//! [rules]
//! memory_chunk_factor = 0.6
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{load_bank, sample_bank, BankError, ItemBank};
use crate::irt::QuadratureGrid;
use crate::knowledge::BktParams;
use crate::policy::{MappingWeights, PresentationStrategy, RewardWeights, RuleTable};
use crate::profile::{default_flag_rules, FlagRule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bank file {0} does not exist")]
    MissingBank(String),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    MaxInfo,
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssessmentConfig {
    pub budget: usize,
    pub time_limit_ms: u64,
    pub selection: SelectionRule,
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub grid_points: usize,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        Self {
            budget: 20,
            time_limit_ms: 20 * 60 * 1000,
            selection: SelectionRule::MaxInfo,
            prior_mean: 0.0,
            prior_sd: 1.0,
            grid_points: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileRefreshConfig {
    /// Recent responses per construct feeding the likelihood.
    pub window: usize,
    pub evidence_prior_sd: f64,
    pub prior_scale: f64,
    pub proposal_sd: f64,
    pub n_samples: usize,
    pub burn_in: usize,
}

impl Default for ProfileRefreshConfig {
    fn default() -> Self {
        Self {
            window: 10,
            evidence_prior_sd: 3.0,
            prior_scale: 0.5,
            proposal_sd: 0.3,
            n_samples: 2000,
            burn_in: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TutoringConfig {
    pub max_steps: usize,
    /// Serve a questionnaire item every this many tutoring steps; 0 disables.
    pub likert_every: usize,
    pub profile_refresh_every: usize,
    /// Latency at which engagement reaches one half.
    pub engagement_latency_ms: u64,
    pub profile: ProfileRefreshConfig,
}

impl Default for TutoringConfig {
    fn default() -> Self {
        Self {
            max_steps: 40,
            likert_every: 4,
            profile_refresh_every: 5,
            engagement_latency_ms: 30_000,
            profile: ProfileRefreshConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcbConfig {
    pub c: f64,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self { c: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Media-mix grid resolution: shares are multiples of `1 / divisions`.
    pub divisions: u32,
}

impl Default for QConfig {
    fn default() -> Self {
        Self { alpha: 0.1, gamma: 0.9, epsilon: 0.1, divisions: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: [f64; 3],
}

impl Default for RewardConfig {
    fn default() -> Self {
        let w = RewardWeights::default();
        Self { weights: [w.mastery_gain, w.engagement, w.retention] }
    }
}

impl RewardConfig {
    pub fn weights(&self) -> RewardWeights {
        RewardWeights { mastery_gain: self.weights[0], engagement: self.weights[1], retention: self.weights[2] }
    }
}

pub fn default_constructs() -> Vec<String> {
    [
        "verbal_working_memory",
        "visuospatial_working_memory",
        "processing_speed",
        "attention",
        "reading",
        "mathematics",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub bank_path: Option<PathBuf>,
    /// Ability constructs, in profile order.
    pub constructs: Vec<String>,
    /// Constructs measured only by Likert items.
    pub questionnaire_constructs: Vec<String>,
    pub assessment: AssessmentConfig,
    pub tutoring: TutoringConfig,
    pub bkt: BktParams,
    pub ucb: UcbConfig,
    pub q: QConfig,
    pub reward: RewardConfig,
    pub mapping: MappingWeights,
    pub rules: RuleTable,
    pub flag_rules: Vec<FlagRule>,
    pub strategies: Vec<PresentationStrategy>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            bank_path: None,
            constructs: default_constructs(),
            questionnaire_constructs: ["self_efficacy", "learning_motivation", "test_anxiety"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            assessment: AssessmentConfig::default(),
            tutoring: TutoringConfig::default(),
            bkt: BktParams::default(),
            ucb: UcbConfig::default(),
            q: QConfig::default(),
            reward: RewardConfig::default(),
            mapping: MappingWeights::default(),
            rules: RuleTable::default(),
            flag_rules: default_flag_rules(),
            strategies: PresentationStrategy::defaults(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative bank paths are relative to the config file
        if let (Some(bank), Some(dir)) = (&cfg.bank_path, path.parent()) {
            if bank.is_relative() {
                cfg.bank_path = Some(dir.join(bank));
            }
        }
        Ok(cfg)
    }

    /// Deep-merge a JSON object of overrides into this config.
    pub fn with_overrides(&self, overrides: &serde_json::Value) -> Result<Self, ConfigError> {
        fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) {
            match (base, patch) {
                (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
                    for (k, v) in p {
                        merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
                    }
                }
                (b, p) => *b = p.clone(),
            }
        }
        let mut value = serde_json::to_value(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut value, overrides);
        let cfg: Self = serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.constructs.is_empty() {
            return Err(invalid("constructs must not be empty"));
        }
        let a = &self.assessment;
        if !(a.prior_sd > 0.0) || a.grid_points < 2 {
            return Err(invalid("assessment prior_sd must be positive and grid_points >= 2"));
        }
        let t = &self.tutoring;
        if t.profile_refresh_every == 0 {
            return Err(invalid("tutoring.profile_refresh_every must be positive"));
        }
        if t.engagement_latency_ms == 0 {
            return Err(invalid("tutoring.engagement_latency_ms must be positive"));
        }
        let p = &t.profile;
        if p.window == 0 || !(p.evidence_prior_sd > 0.0) || !(p.prior_scale > 0.0) || !(p.proposal_sd > 0.0) {
            return Err(invalid("tutoring.profile scales and window must be positive"));
        }
        if p.burn_in >= p.n_samples {
            return Err(invalid("tutoring.profile.burn_in must be below n_samples"));
        }
        self.bkt.validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.ucb.c >= 0.0 && self.ucb.c.is_finite()) {
            return Err(invalid("ucb.c must be a nonnegative number"));
        }
        crate::policy::QTable::new(1, 1, self.q.alpha, self.q.gamma, self.q.epsilon)
            .map_err(|e| invalid(format!("q: {e}")))?;
        if self.q.divisions == 0 {
            return Err(invalid("q.divisions must be positive"));
        }
        if self.reward.weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("reward.weights must be finite"));
        }
        self.mapping.validate().map_err(|e| invalid(e.to_string()))?;
        self.rules.validate().map_err(|e| invalid(e.to_string()))?;
        if self.strategies.is_empty() {
            return Err(invalid("at least one presentation strategy is required"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<QuadratureGrid, ConfigError> {
        let a = &self.assessment;
        let half = 5.0 * a.prior_sd;
        QuadratureGrid::normal(a.prior_mean, a.prior_sd, a.grid_points, a.prior_mean - half, a.prior_mean + half)
            .map_err(|e| invalid(e.to_string()))
    }

    /// Load the configured bank, or the bundled sample bank when no path is set.
    pub fn load_bank(&self) -> Result<ItemBank, ConfigError> {
        let bank = match &self.bank_path {
            None => sample_bank(),
            Some(path) if !path.exists() => {
                return Err(ConfigError::MissingBank(path.display().to_string()));
            }
            Some(path) => load_bank(path)?,
        };
        bank.require_constructs(&self.all_constructs())?;
        Ok(bank)
    }

    pub fn all_constructs(&self) -> Vec<String> {
        self.constructs.iter().chain(&self.questionnaire_constructs).cloned().collect()
    }
}
