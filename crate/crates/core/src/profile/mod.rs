//! Student profile: indicator scoring, standardized abilities, difficulty
//! flags, dimensionality reduction and Metropolis-Hastings refinement.

mod indicators;
mod mcmc;
mod pca;

pub use indicators::{
    indicators_to_theta, score_indicators, IndicatorDef, IndicatorKind, IndicatorScore,
    IndicatorScores, Norm, Norms, SpanTrial, TaskResult,
};
pub use mcmc::{mh_update, update_profile, Gaussian, HierarchicalSpec, MhResult};
pub use pca::{pca_fit, pca_project, PcaModel};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("unknown construct {0}")]
    UnknownConstruct(String),
    #[error("unknown indicator {0}")]
    UnknownIndicator(String),
    #[error("no norm for indicator {0}")]
    MissingNorm(String),
    #[error("indicator {indicator}: {reason}")]
    OutOfRange { indicator: String, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("norms file: {0}")]
    NormsFile(String),
}

/// Adaptation hints derived from the profile. Not diagnoses.
///
/// Declaration order is the order in which presentation rules are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DifficultyFlag {
    Dyscalculia,
    Dyslexia,
    VisualProcessing,
    AuditoryProcessing,
    Memory,
    Adhd,
    Affective,
}

impl DifficultyFlag {
    pub const ALL: [DifficultyFlag; 7] = [
        DifficultyFlag::Dyscalculia,
        DifficultyFlag::Dyslexia,
        DifficultyFlag::VisualProcessing,
        DifficultyFlag::AuditoryProcessing,
        DifficultyFlag::Memory,
        DifficultyFlag::Adhd,
        DifficultyFlag::Affective,
    ];
}

/// Non-cognitive scale names, each a Likert average in [1, 5].
pub const NON_COGNITIVE_SCALES: [&str; 4] =
    ["self_efficacy", "intrinsic_motivation", "extrinsic_motivation", "test_anxiety"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub constructs: Vec<String>,
    pub theta: Vec<f64>,
    pub non_cognitive: BTreeMap<String, f64>,
    pub difficulty_flags: BTreeSet<DifficultyFlag>,
}

impl StudentProfile {
    /// All abilities at `prior_mean`; no non-cognitive data or flags.
    pub fn new(constructs: &[String], prior_mean: f64) -> Self {
        Self {
            constructs: constructs.to_vec(),
            theta: vec![prior_mean; constructs.len()],
            non_cognitive: BTreeMap::new(),
            difficulty_flags: BTreeSet::new(),
        }
    }

    pub fn index_of(&self, construct: &str) -> Result<usize, ProfileError> {
        self.constructs
            .iter()
            .position(|c| c == construct)
            .ok_or_else(|| ProfileError::UnknownConstruct(construct.to_string()))
    }

    pub fn theta_of(&self, construct: &str) -> Result<f64, ProfileError> {
        Ok(self.theta[self.index_of(construct)?])
    }

    pub fn set_theta(&mut self, construct: &str, value: f64) -> Result<(), ProfileError> {
        let i = self.index_of(construct)?;
        self.theta[i] = value;
        Ok(())
    }

    /// Record a non-cognitive Likert average.
    pub fn set_non_cognitive(&mut self, scale: &str, value: f64) -> Result<(), ProfileError> {
        if !(1.0..=5.0).contains(&value) {
            return Err(ProfileError::OutOfRange {
                indicator: scale.to_string(),
                reason: format!("{value} outside [1, 5]"),
            });
        }
        self.non_cognitive.insert(scale.to_string(), value);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagSource {
    /// A construct's standardized ability.
    Ability(String),
    /// A non-cognitive Likert average.
    Scale(String),
}

/// Sets `flag` when the source value crosses `threshold` in `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRule {
    pub flag: DifficultyFlag,
    pub source: FlagSource,
    pub threshold: f64,
    pub direction: Direction,
}

impl FlagRule {
    fn fires(&self, value: f64) -> bool {
        match self.direction {
            Direction::Below => value < self.threshold,
            Direction::Above => value > self.threshold,
        }
    }
}

pub fn default_flag_rules() -> Vec<FlagRule> {
    let below = |flag, source: &str| FlagRule {
        flag,
        source: FlagSource::Ability(source.to_string()),
        threshold: -1.5,
        direction: Direction::Below,
    };
    vec![
        below(DifficultyFlag::Dyscalculia, "mathematics"),
        below(DifficultyFlag::Dyslexia, "reading"),
        below(DifficultyFlag::VisualProcessing, "visuospatial_working_memory"),
        below(DifficultyFlag::AuditoryProcessing, "processing_speed"),
        below(DifficultyFlag::Memory, "verbal_working_memory"),
        below(DifficultyFlag::Adhd, "attention"),
        FlagRule {
            flag: DifficultyFlag::Affective,
            source: FlagSource::Scale("test_anxiety".into()),
            threshold: 4.0,
            direction: Direction::Above,
        },
    ]
}

/// Recompute flags from scratch. Sources absent from the profile are skipped.
pub fn derive_flags(profile: &StudentProfile, rules: &[FlagRule]) -> BTreeSet<DifficultyFlag> {
    rules
        .iter()
        .filter(|rule| {
            let value = match &rule.source {
                FlagSource::Ability(c) => profile.theta_of(c).ok(),
                FlagSource::Scale(s) => profile.non_cognitive.get(s).copied(),
            };
            value.is_some_and(|v| rule.fires(v))
        })
        .map(|rule| rule.flag)
        .collect()
}
