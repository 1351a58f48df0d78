//! Presentation policy: the linear profile-to-presentation mapping and its
//! least-squares fit, UCB strategy selection, tabular Q-learning over media
//! mixes, reward composition and difficulty-specific rule adjustments.

mod bandit;
mod qlearn;
mod rules;

pub use bandit::{ucb_score, ucb_select, ucb_update, BanditState};
pub use qlearn::{
    discretize_state, media_action_grid, q_select, q_update, QTable, ENGAGEMENT_BINS, THETA_BINS,
};
pub use rules::{apply_difficulty_rules, RuleTable};

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::DifficultyFlag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("media mix ({0}, {1}, {2}) is not on the simplex")]
    InvalidMix(f64, f64, f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("index {index} out of range for {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("reward must be finite, got {0}")]
    NonFiniteReward(f64),
}

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Shares of image, sound and text content.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediaMix {
    pub image: f64,
    pub sound: f64,
    pub text: f64,
}

impl Default for MediaMix {
    fn default() -> Self {
        Self { image: 0.25, sound: 0.25, text: 0.5 }
    }
}

impl MediaMix {
    /// Requires nonnegative shares summing to 1 within 1e-9.
    pub fn new(image: f64, sound: f64, text: f64) -> Result<Self, PolicyError> {
        let mix = Self { image, sound, text };
        mix.validate()?;
        Ok(mix)
    }

    /// Scale nonnegative weights onto the simplex.
    pub fn normalized(image: f64, sound: f64, text: f64) -> Result<Self, PolicyError> {
        let sum = image + sound + text;
        if !(sum > 0.0 && sum.is_finite()) || image < 0.0 || sound < 0.0 || text < 0.0 {
            return Err(PolicyError::InvalidMix(image, sound, text));
        }
        Ok(Self { image: image / sum, sound: sound / sum, text: text / sum })
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let parts = self.as_array();
        let on_simplex = parts.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (parts.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE;
        if on_simplex {
            Ok(())
        } else {
            Err(PolicyError::InvalidMix(self.image, self.sound, self.text))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.image, self.sound, self.text]
    }

    pub fn from_array(parts: [f64; 3]) -> Self {
        Self { image: parts[0], sound: parts[1], text: parts[2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationParams {
    /// Negative values select simplified wording where a template has it.
    pub text_complexity: f64,
    pub chunk_size: u32,
    pub media_mix: MediaMix,
    #[serde(default)]
    pub reward_feedback: bool,
    #[serde(default)]
    pub supportive_tone: bool,
    /// Factor rules already applied, so a second application is a no-op.
    #[serde(default)]
    pub applied_rules: BTreeSet<DifficultyFlag>,
}

impl Default for PresentationParams {
    fn default() -> Self {
        Self {
            text_complexity: 0.0,
            chunk_size: 3,
            media_mix: MediaMix::default(),
            reward_feedback: false,
            supportive_tone: false,
            applied_rules: BTreeSet::new(),
        }
    }
}

impl PresentationParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.chunk_size < 1 {
            return Err(PolicyError::Invalid("chunk_size must be at least 1".into()));
        }
        if !self.text_complexity.is_finite() {
            return Err(PolicyError::Invalid("text_complexity must be finite".into()));
        }
        self.media_mix.validate()
    }
}

/// Coefficients of the two linear presentation equations:
/// `complexity = alpha vwm + beta rc + gamma_intercept` and
/// `chunk = delta vwm + epsilon_intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_intercept: f64,
    pub delta: f64,
    pub epsilon_intercept: f64,
}

impl Default for MappingWeights {
    fn default() -> Self {
        Self { alpha: -0.8, beta: 0.6, gamma_intercept: 0.4, delta: 0.7, epsilon_intercept: 3.0 }
    }
}

impl MappingWeights {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let all = [self.alpha, self.beta, self.gamma_intercept, self.delta, self.epsilon_intercept];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(PolicyError::Invalid("mapping weights must be finite".into()))
        }
    }

    /// The unrounded chunk size.
    pub fn raw_chunk(&self, theta_vwm: f64) -> f64 {
        self.delta * theta_vwm + self.epsilon_intercept
    }
}

/// Round half up, then clamp to at least 1.
pub fn round_chunk(raw: f64) -> u32 {
    let rounded = (raw + 0.5).floor();
    if rounded < 1.0 || rounded.is_nan() {
        1
    } else if rounded > u32::MAX as f64 {
        u32::MAX
    } else {
        rounded as u32
    }
}

/// Returns `(text_complexity, chunk_size)`.
pub fn map_presentation(theta_vwm: f64, theta_rc: f64, w: &MappingWeights) -> (f64, u32) {
    let complexity = w.alpha * theta_vwm + w.beta * theta_rc + w.gamma_intercept;
    (complexity, round_chunk(w.raw_chunk(theta_vwm)))
}

/// One training row for [`fit_mapping`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingRow {
    pub theta_vwm: f64,
    pub theta_rc: f64,
    pub complexity: f64,
    pub chunk: f64,
}

fn least_squares(x: DMatrix<f64>, y: DVector<f64>) -> Result<DVector<f64>, PolicyError> {
    let svd = x.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(max > 0.0) || min <= max * 1e-10 {
        return Err(PolicyError::RankDeficient);
    }
    svd.solve(&y, 0.0).map_err(|e| PolicyError::Invalid(e.to_string()))
}

/// Two independent ordinary least-squares regressions.
pub fn fit_mapping(rows: &[MappingRow]) -> Result<MappingWeights, PolicyError> {
    if rows.len() < 3 {
        return Err(PolicyError::Invalid(format!("need at least 3 rows, got {}", rows.len())));
    }
    let n = rows.len();
    let x3 = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => rows[i].theta_vwm,
        1 => rows[i].theta_rc,
        _ => 1.0,
    });
    let y3 = DVector::from_fn(n, |i, _| rows[i].complexity);
    let c = least_squares(x3, y3)?;
    let x2 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { rows[i].theta_vwm } else { 1.0 });
    let y2 = DVector::from_fn(n, |i, _| rows[i].chunk);
    let k = least_squares(x2, y2)?;
    let w = MappingWeights {
        alpha: c[0],
        beta: c[1],
        gamma_intercept: c[2],
        delta: k[0],
        epsilon_intercept: k[1],
    };
    w.validate()?;
    Ok(w)
}

/// A discrete presentation configuration chosen by the bandit. Offsets are
/// applied on top of the mapped parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationStrategy {
    pub name: String,
    pub complexity_shift: f64,
    pub chunk_shift: i32,
}

impl PresentationStrategy {
    pub fn defaults() -> Vec<PresentationStrategy> {
        let s = |name: &str, complexity_shift, chunk_shift| PresentationStrategy {
            name: name.into(),
            complexity_shift,
            chunk_shift,
        };
        vec![s("standard", 0.0, 0), s("simplified", -0.5, -1), s("stretch", 0.5, 1)]
    }

    pub fn apply(&self, params: &PresentationParams) -> PresentationParams {
        let chunk = (i64::from(params.chunk_size) + i64::from(self.chunk_shift)).max(1);
        PresentationParams {
            text_complexity: params.text_complexity + self.complexity_shift,
            chunk_size: u32::try_from(chunk).unwrap_or(u32::MAX),
            ..params.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub mastery_gain: f64,
    pub engagement: f64,
    pub retention: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { mastery_gain: 0.6, engagement: 0.3, retention: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Outcome {
    pub mastery_gain: f64,
    pub engagement: f64,
    pub retention: f64,
}

pub fn compute_reward(outcome: &Outcome, w: &RewardWeights) -> f64 {
    outcome.mastery_gain * w.mastery_gain
        + outcome.engagement * w.engagement
        + outcome.retention * w.retention
}
