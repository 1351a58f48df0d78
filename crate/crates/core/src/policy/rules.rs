//! Difficulty-specific presentation adjustments.
//!
//! Rules run in [`DifficultyFlag`] declaration order, so a later rule wins
//! where two touch the same share. Media rules move one share to a floor or
//! cap and rescale the other two proportionally, which keeps the mix on the
//! simplex and makes each rule idempotent. Chunk factors are recorded in
//! `applied_rules` and skipped on a second pass.
//!
//! | flag | effect |
//! |---|---|
//! | DYSCALCULIA | image share at least `dyscalculia_image_min` |
//! | DYSLEXIA | sound share at least `dyslexia_sound_min`; complexity at most `dyslexia_complexity_max` |
//! | VISUAL_PROCESSING | image share at most `visual_image_max`; sound at least `visual_sound_min` |
//! | AUDITORY_PROCESSING | sound share at most `auditory_sound_max` |
//! | MEMORY | chunk size times `memory_chunk_factor` |
//! | ADHD | chunk size times `adhd_chunk_factor`; reward feedback on |
//! | AFFECTIVE | supportive tone on |

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{round_chunk, MediaMix, PresentationParams};
use crate::profile::DifficultyFlag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleTable {
    pub dyscalculia_image_min: f64,
    pub dyslexia_sound_min: f64,
    pub dyslexia_complexity_max: f64,
    pub visual_image_max: f64,
    pub visual_sound_min: f64,
    pub auditory_sound_max: f64,
    pub memory_chunk_factor: f64,
    pub adhd_chunk_factor: f64,
}

impl Default for RuleTable {
    fn default() -> Self {
        Self {
            dyscalculia_image_min: 0.4,
            dyslexia_sound_min: 0.4,
            dyslexia_complexity_max: -0.5,
            visual_image_max: 0.2,
            visual_sound_min: 0.3,
            auditory_sound_max: 0.1,
            memory_chunk_factor: 0.6,
            adhd_chunk_factor: 0.5,
        }
    }
}

impl RuleTable {
    pub fn validate(&self) -> Result<(), super::PolicyError> {
        let shares = [
            self.dyscalculia_image_min,
            self.dyslexia_sound_min,
            self.visual_image_max,
            self.visual_sound_min,
            self.auditory_sound_max,
        ];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(super::PolicyError::Invalid("rule media shares must be in [0, 1]".into()));
        }
        for f in [self.memory_chunk_factor, self.adhd_chunk_factor] {
            if !(f > 0.0 && f.is_finite()) {
                return Err(super::PolicyError::Invalid(format!("chunk factor {f} must be positive")));
            }
        }
        if !self.dyslexia_complexity_max.is_finite() {
            return Err(super::PolicyError::Invalid("complexity cap must be finite".into()));
        }
        Ok(())
    }
}

const IMAGE: usize = 0;
const SOUND: usize = 1;

/// Set share `i` to `target` and rescale the rest to keep the sum at one.
fn set_share(mix: MediaMix, i: usize, target: f64) -> MediaMix {
    let mut p = mix.as_array();
    let rest: f64 = (0..3).filter(|&j| j != i).map(|j| p[j]).sum();
    let remaining = 1.0 - target;
    for j in (0..3).filter(|&j| j != i) {
        p[j] = if rest > 0.0 { p[j] * remaining / rest } else { remaining / 2.0 };
    }
    p[i] = target;
    MediaMix::from_array(p)
}

fn at_least(mix: MediaMix, i: usize, floor: f64) -> MediaMix {
    if mix.as_array()[i] < floor {
        set_share(mix, i, floor)
    } else {
        mix
    }
}

fn at_most(mix: MediaMix, i: usize, cap: f64) -> MediaMix {
    if mix.as_array()[i] > cap {
        set_share(mix, i, cap)
    } else {
        mix
    }
}

fn scale_chunk(p: &mut PresentationParams, flag: DifficultyFlag, factor: f64) {
    if p.applied_rules.insert(flag) {
        p.chunk_size = round_chunk(f64::from(p.chunk_size) * factor);
    }
}

pub fn apply_difficulty_rules(
    flags: &BTreeSet<DifficultyFlag>,
    params: &PresentationParams,
    table: &RuleTable,
) -> PresentationParams {
    let mut p = params.clone();
    for flag in flags {
        match flag {
            DifficultyFlag::Dyscalculia => {
                p.media_mix = at_least(p.media_mix, IMAGE, table.dyscalculia_image_min);
            }
            DifficultyFlag::Dyslexia => {
                p.media_mix = at_least(p.media_mix, SOUND, table.dyslexia_sound_min);
                p.text_complexity = p.text_complexity.min(table.dyslexia_complexity_max);
            }
            DifficultyFlag::VisualProcessing => {
                p.media_mix = at_most(p.media_mix, IMAGE, table.visual_image_max);
                p.media_mix = at_least(p.media_mix, SOUND, table.visual_sound_min);
            }
            DifficultyFlag::AuditoryProcessing => {
                p.media_mix = at_most(p.media_mix, SOUND, table.auditory_sound_max);
            }
            DifficultyFlag::Memory => scale_chunk(&mut p, *flag, table.memory_chunk_factor),
            DifficultyFlag::Adhd => {
                scale_chunk(&mut p, *flag, table.adhd_chunk_factor);
                p.reward_feedback = true;
            }
            DifficultyFlag::Affective => p.supportive_tone = true,
        }
    }
    p
}
