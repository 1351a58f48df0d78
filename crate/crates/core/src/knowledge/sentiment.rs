//! Lexicon sentiment scoring for free-text feedback.
//!
//! Tokens are lowercased words with surrounding punctuation stripped. A
//! lexicon token within three tokens after a negator has its polarity
//! flipped. With `S` the sum of (possibly flipped) polarities, the compound
//! score is `S / sqrt(S^2 + 15/16)`; the component shares split the positive
//! mass, negative mass and count of unscored tokens.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TracingError;

/// Compound scores below this signal confusion.
pub const CONFUSION_THRESHOLD: f64 = -0.05;

const NEGATION_WINDOW: usize = 3;
const COMPOUND_ALPHA: f64 = 15.0 / 16.0;

const NEGATORS: &[&str] = &[
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "cannot", "without",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub negative: f64,
    pub neutral: f64,
    pub positive: f64,
    pub compound: f64,
}

impl SentimentScore {
    pub fn neutral() -> Self {
        Self { negative: 0.0, neutral: 1.0, positive: 0.0, compound: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    polarity: HashMap<String, f64>,
}

impl Lexicon {
    /// Parse `token<TAB>polarity` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TracingError> {
        let mut polarity = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| TracingError::Lexicon { line: n + 1, reason: reason.into() };
            let (token, value) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
            let value: f64 = value.trim().parse().map_err(|_| err("polarity is not a number"))?;
            if !(-1.0..=1.0).contains(&value) {
                return Err(err("polarity outside [-1, 1]"));
            }
            polarity.insert(token.trim().to_lowercase(), value);
        }
        Ok(Self { polarity })
    }

    /// The lexicon bundled with the crate.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../../data/sentiment_lexicon.tsv")).expect("bundled lexicon parses")
    }

    pub fn polarity(&self, token: &str) -> Option<f64> {
        self.polarity.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.polarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarity.is_empty()
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .trim_matches('\'')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn is_negator(token: &str) -> bool {
    NEGATORS.contains(&token) || token.ends_with("n't")
}

pub fn score_sentiment(text: &str, lexicon: &Lexicon) -> SentimentScore {
    let toks = tokens(text);
    if toks.is_empty() {
        return SentimentScore::neutral();
    }
    let (mut pos, mut neg, mut neu, mut sum) = (0.0, 0.0, 0.0, 0.0);
    for (i, tok) in toks.iter().enumerate() {
        match lexicon.polarity(tok) {
            Some(mut v) if v != 0.0 => {
                let start = i.saturating_sub(NEGATION_WINDOW);
                if toks[start..i].iter().any(|t| is_negator(t)) {
                    v = -v;
                }
                sum += v;
                if v > 0.0 {
                    pos += v;
                } else {
                    neg -= v;
                }
            }
            _ => neu += 1.0,
        }
    }
    let total = pos + neg + neu;
    SentimentScore {
        negative: neg / total,
        neutral: neu / total,
        positive: pos / total,
        compound: sum / (sum * sum + COMPOUND_ALPHA).sqrt(),
    }
}
