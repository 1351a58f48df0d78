//! Indicator scoring and standardization against norm tables.
//!
//! Norms file: CSV with header `indicator_id,mean,sd`, one row per indicator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ProfileError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    /// Nonnegative count, e.g. the longest recalled digit sequence.
    Count,
    /// Share correct, in [0, 100].
    Percentage,
    /// Mean of Likert responses, in [1, 5].
    LikertAverage,
}

impl IndicatorKind {
    fn check(self, indicator: &str, value: f64) -> Result<(), ProfileError> {
        let ok = value.is_finite()
            && match self {
                IndicatorKind::Count => value >= 0.0,
                IndicatorKind::Percentage => (0.0..=100.0).contains(&value),
                IndicatorKind::LikertAverage => (1.0..=5.0).contains(&value),
            };
        if ok {
            Ok(())
        } else {
            Err(ProfileError::OutOfRange {
                indicator: indicator.to_string(),
                reason: format!("{value} out of range for {self:?}"),
            })
        }
    }
}

/// Which construct an indicator measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorDef {
    pub id: String,
    pub construct: String,
    pub kind: IndicatorKind,
}

impl IndicatorDef {
    pub fn new(id: &str, construct: &str, kind: IndicatorKind) -> Self {
        Self { id: id.into(), construct: construct.into(), kind }
    }

    /// The default indicator catalog, matching the bundled norms.
    pub fn catalog() -> Vec<IndicatorDef> {
        use IndicatorKind::*;
        vec![
            Self::new("digit_span_forward", "verbal_working_memory", Count),
            Self::new("digit_span_backward", "verbal_working_memory", Count),
            Self::new("spatial_span", "visuospatial_working_memory", Count),
            Self::new("pattern_recognition", "visuospatial_working_memory", Percentage),
            Self::new("symbol_matches_per_minute", "processing_speed", Count),
            Self::new("sustained_attention", "attention", Percentage),
            Self::new("reading_comprehension", "reading", Percentage),
            Self::new("math_problem_solving", "mathematics", Percentage),
            Self::new("self_efficacy_scale", "self_efficacy", LikertAverage),
            Self::new("intrinsic_motivation_scale", "intrinsic_motivation", LikertAverage),
            Self::new("extrinsic_motivation_scale", "extrinsic_motivation", LikertAverage),
            Self::new("test_anxiety_scale", "test_anxiety", LikertAverage),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanTrial {
    pub length: u32,
    pub recalled: bool,
}

/// A raw task outcome tagged with the indicator it scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskResult {
    /// Span task: the score is the longest recalled length.
    Span { indicator: String, trials: Vec<SpanTrial> },
    /// Accuracy task scored as a percentage.
    Accuracy { indicator: String, correct: u32, attempted: u32 },
    /// A directly observed count.
    Count { indicator: String, value: f64 },
    /// Likert responses in 1..=5, averaged.
    Likert { indicator: String, responses: Vec<u8> },
}

impl TaskResult {
    pub fn indicator(&self) -> &str {
        match self {
            TaskResult::Span { indicator, .. }
            | TaskResult::Accuracy { indicator, .. }
            | TaskResult::Count { indicator, .. }
            | TaskResult::Likert { indicator, .. } => indicator,
        }
    }

    pub fn kind(&self) -> IndicatorKind {
        match self {
            TaskResult::Span { .. } | TaskResult::Count { .. } => IndicatorKind::Count,
            TaskResult::Accuracy { .. } => IndicatorKind::Percentage,
            TaskResult::Likert { .. } => IndicatorKind::LikertAverage,
        }
    }
}

/// `value` is `None` when the task produced no usable data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorScore {
    pub kind: IndicatorKind,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorScores {
    pub scores: BTreeMap<String, IndicatorScore>,
}

impl IndicatorScores {
    pub fn get(&self, indicator: &str) -> Option<f64> {
        self.scores.get(indicator).and_then(|s| s.value)
    }

    /// Insert an already computed score after range checking it.
    pub fn insert(
        &mut self,
        indicator: &str,
        kind: IndicatorKind,
        value: Option<f64>,
    ) -> Result<(), ProfileError> {
        if let Some(v) = value {
            kind.check(indicator, v)?;
        }
        self.scores.insert(indicator.to_string(), IndicatorScore { kind, value });
        Ok(())
    }
}

fn score_one(result: &TaskResult) -> Result<Option<f64>, ProfileError> {
    let name = result.indicator();
    let invalid = |reason: String| ProfileError::OutOfRange { indicator: name.into(), reason };
    Ok(match result {
        TaskResult::Span { trials, .. } => {
            trials.iter().filter(|t| t.recalled).map(|t| t.length).max().map(f64::from).or(
                // attempted but never recalled scores zero; no trials is no data
                if trials.is_empty() { None } else { Some(0.0) },
            )
        }
        TaskResult::Accuracy { correct, attempted, .. } => {
            if correct > attempted {
                return Err(invalid(format!("{correct} correct of {attempted} attempted")));
            }
            if *attempted == 0 {
                None
            } else {
                Some(100.0 * f64::from(*correct) / f64::from(*attempted))
            }
        }
        TaskResult::Count { value, .. } => Some(*value),
        TaskResult::Likert { responses, .. } => {
            if let Some(r) = responses.iter().find(|r| !(1..=5).contains(*r)) {
                return Err(invalid(format!("Likert response {r} outside 1..=5")));
            }
            if responses.is_empty() {
                None
            } else {
                Some(responses.iter().map(|&r| f64::from(r)).sum::<f64>() / responses.len() as f64)
            }
        }
    })
}

pub fn score_indicators(results: &[TaskResult]) -> Result<IndicatorScores, ProfileError> {
    let mut out = IndicatorScores::default();
    for result in results {
        let name = result.indicator();
        if out.scores.contains_key(name) {
            return Err(ProfileError::Invalid(format!("indicator {name} scored twice")));
        }
        out.insert(name, result.kind(), score_one(result)?)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub norms: BTreeMap<String, Norm>,
}

#[derive(Deserialize)]
struct NormRow {
    indicator_id: String,
    mean: f64,
    sd: f64,
}

impl Norms {
    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut norms = BTreeMap::new();
        for (n, row) in reader.deserialize::<NormRow>().enumerate() {
            let line = n + 2;
            let row = row.map_err(|e| ProfileError::NormsFile(format!("line {line}: {e}")))?;
            if !(row.sd > 0.0 && row.sd.is_finite() && row.mean.is_finite()) {
                return Err(ProfileError::NormsFile(format!(
                    "line {line}: {} needs finite mean and positive sd",
                    row.indicator_id
                )));
            }
            if norms.insert(row.indicator_id.clone(), Norm { mean: row.mean, sd: row.sd }).is_some() {
                return Err(ProfileError::NormsFile(format!(
                    "line {line}: duplicate indicator {}",
                    row.indicator_id
                )));
            }
        }
        Ok(Self { norms })
    }

    /// Synthetic defaults shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../../data/norms.csv")).expect("bundled norms parse")
    }

    pub fn get(&self, indicator: &str) -> Option<Norm> {
        self.norms.get(indicator).copied()
    }
}

/// z-score each indicator against its norm and average within construct.
/// Element `i` is `None` when no indicator of `constructs[i]` has data.
pub fn indicators_to_theta(
    scores: &IndicatorScores,
    norms: &Norms,
    catalog: &[IndicatorDef],
    constructs: &[String],
) -> Result<Vec<Option<f64>>, ProfileError> {
    let mut sums = vec![(0.0, 0usize); constructs.len()];
    for (id, score) in &scores.scores {
        let Some(value) = score.value else { continue };
        let def = catalog
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| ProfileError::UnknownIndicator(id.clone()))?;
        let Some(slot) = constructs.iter().position(|c| *c == def.construct) else { continue };
        let norm = norms.get(id).ok_or_else(|| ProfileError::MissingNorm(id.clone()))?;
        sums[slot].0 += (value - norm.mean) / norm.sd;
        sums[slot].1 += 1;
    }
    Ok(sums.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial(length: u32, recalled: bool) -> SpanTrial {
        SpanTrial { length, recalled }
    }

    #[test]
    fn table_examples() {
        let scores = score_indicators(&[
            TaskResult::Span {
                indicator: "digit_span_forward".into(),
                trials: vec![trial(3, true), trial(4, true), trial(5, true), trial(6, false)],
            },
            TaskResult::Accuracy { indicator: "pattern_recognition".into(), correct: 8, attempted: 10 },
            TaskResult::Likert { indicator: "self_efficacy_scale".into(), responses: vec![3, 4, 5] },
        ])
        .unwrap();
        assert_eq!(scores.get("digit_span_forward"), Some(5.0));
        assert_eq!(scores.get("pattern_recognition"), Some(80.0));
        assert_eq!(scores.get("self_efficacy_scale"), Some(4.0));
    }

    #[test]
    fn no_data_is_not_zero() {
        let scores = score_indicators(&[TaskResult::Accuracy {
            indicator: "reading_comprehension".into(),
            correct: 0,
            attempted: 0,
        }])
        .unwrap();
        assert_eq!(scores.scores["reading_comprehension"].value, None);
        let theta = indicators_to_theta(
            &scores,
            &Norms::bundled(),
            &IndicatorDef::catalog(),
            &["reading".to_string()],
        )
        .unwrap();
        assert_eq!(theta, vec![None]);
    }

    #[test]
    fn range_errors() {
        assert!(score_indicators(&[TaskResult::Likert { indicator: "x".into(), responses: vec![6] }])
            .is_err());
        assert!(score_indicators(&[TaskResult::Accuracy {
            indicator: "x".into(),
            correct: 3,
            attempted: 2
        }])
        .is_err());
        assert!(score_indicators(&[TaskResult::Count { indicator: "x".into(), value: -1.0 }]).is_err());
    }

    fn one_construct() -> (Norms, Vec<IndicatorDef>, Vec<String>) {
        let norms = Norms::parse("indicator_id,mean,sd\na,10,2\nb,50,10\n").unwrap();
        let catalog = vec![
            IndicatorDef::new("a", "c", IndicatorKind::Count),
            IndicatorDef::new("b", "c", IndicatorKind::Percentage),
        ];
        (norms, catalog, vec!["c".to_string()])
    }

    #[test]
    fn standardization_examples() {
        let (norms, catalog, constructs) = one_construct();
        let mut s = IndicatorScores::default();
        s.insert("a", IndicatorKind::Count, Some(10.0)).unwrap();
        assert_eq!(indicators_to_theta(&s, &norms, &catalog, &constructs).unwrap(), vec![Some(0.0)]);
        s.insert("a", IndicatorKind::Count, Some(12.0)).unwrap();
        assert_eq!(indicators_to_theta(&s, &norms, &catalog, &constructs).unwrap(), vec![Some(1.0)]);
        s.insert("b", IndicatorKind::Percentage, Some(40.0)).unwrap();
        assert_eq!(indicators_to_theta(&s, &norms, &catalog, &constructs).unwrap(), vec![Some(0.0)]);
    }

    #[test]
    fn missing_norm_and_unknown_indicator() {
        let (_, catalog, constructs) = one_construct();
        let norms = Norms::parse("indicator_id,mean,sd\na,10,2\n").unwrap();
        let mut s = IndicatorScores::default();
        s.insert("b", IndicatorKind::Percentage, Some(40.0)).unwrap();
        assert!(matches!(
            indicators_to_theta(&s, &norms, &catalog, &constructs),
            Err(ProfileError::MissingNorm(_))
        ));
        let mut s = IndicatorScores::default();
        s.insert("zz", IndicatorKind::Count, Some(1.0)).unwrap();
        assert!(matches!(
            indicators_to_theta(&s, &norms, &catalog, &constructs),
            Err(ProfileError::UnknownIndicator(_))
        ));
    }

    #[test]
    fn norms_file_errors() {
        assert!(Norms::parse("indicator_id,mean,sd\na,1,0\n").is_err());
        assert!(Norms::parse("indicator_id,mean,sd\na,1,1\na,2,1\n").is_err());
        let bundled = Norms::bundled();
        for def in IndicatorDef::catalog() {
            assert!(bundled.get(&def.id).is_some(), "{}", def.id);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn theta_is_affine_in_each_score(x in 0.0f64..100.0, y in 0.0f64..100.0, t in 0.0f64..1.0, other in 0.0f64..100.0) {
            let (norms, catalog, constructs) = one_construct();
            let at = |v: f64| {
                let mut s = IndicatorScores::default();
                s.insert("a", IndicatorKind::Count, Some(v)).unwrap();
                s.insert("b", IndicatorKind::Percentage, Some(other)).unwrap();
                indicators_to_theta(&s, &norms, &catalog, &constructs).unwrap()[0].unwrap()
            };
            let mid = at(t * x + (1.0 - t) * y);
            prop_assert!((mid - (t * at(x) + (1.0 - t) * at(y))).abs() < 1e-9);
        }
    }
}
