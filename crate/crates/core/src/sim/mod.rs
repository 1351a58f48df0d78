//! Simulated students with known ground truth, and the experiment harness
//! that checks estimators and policies against it.
//!
//! Every experiment takes one root seed. Student `i` draws from the ChaCha8
//! stream `i` of that seed, so results do not depend on evaluation order.

mod experiments;
mod mdp;

pub use experiments::{
    run_bandit_experiment, run_cat_experiment, run_tracing_experiment, synthetic_bank, BanditConfig,
    CatConfig, SelectionPolicy, TracingConfig,
};
pub use mdp::{run_q_experiment, value_iteration, DeterministicMdp, QExperimentConfig, QOutcome, ValueSolution};

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{AnswerKey, Item, ItemKind};
use crate::irt::IrtError;
use crate::knowledge::{BktParams, Observation, TracingError};
use crate::policy::PolicyError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("student has no ability for construct {0}")]
    UnknownConstruct(String),
    #[error("invalid experiment setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Irt(#[from] IrtError),
    #[error(transparent)]
    Tracing(#[from] TracingError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("experiment config: {0}")]
    Config(String),
}

/// Generator for student `index` under `root_seed`.
pub fn student_rng(root_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(index);
    rng
}

/// Noise on simulated engagement draws.
pub const ENGAGEMENT_NOISE_SD: f64 = 0.05;
/// Slope of the logistic retention curve in mastery gain.
pub const RETENTION_SLOPE: f64 = 5.0;

/// Retention in (0, 1), one half at zero gain.
pub fn retention(mastery_gain: f64) -> f64 {
    1.0 / (1.0 + (-RETENTION_SLOPE * mastery_gain).exp())
}

/// A learner with known abilities and mastery dynamics.
#[derive(Debug, Clone)]
pub struct SimStudent {
    pub true_theta: BTreeMap<String, f64>,
    pub true_bkt: BTreeMap<String, BktParams>,
    /// Mean engagement per policy action.
    pub engagement_model: Vec<f64>,
    pub seed: u64,
    /// Latent mastery per construct for the BKT dynamics.
    pub mastered: BTreeMap<String, bool>,
    rng: ChaCha8Rng,
}

impl SimStudent {
    pub fn new(true_theta: BTreeMap<String, f64>, seed: u64) -> Self {
        Self::with_rng(true_theta, seed, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(true_theta: BTreeMap<String, f64>, seed: u64, rng: ChaCha8Rng) -> Self {
        Self {
            true_theta,
            true_bkt: BTreeMap::new(),
            engagement_model: Vec::new(),
            seed,
            mastered: BTreeMap::new(),
            rng,
        }
    }

    pub fn with_bkt(mut self, construct: &str, params: BktParams) -> Self {
        let m = self.rng.random::<f64>() < params.p_init;
        self.mastered.insert(construct.to_string(), m);
        self.true_bkt.insert(construct.to_string(), params);
        self
    }

    pub fn with_engagement(mut self, means: Vec<f64>) -> Self {
        self.engagement_model = means;
        self
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn theta(&self, construct: &str) -> Result<f64, SimError> {
        self.true_theta
            .get(construct)
            .copied()
            .ok_or_else(|| SimError::UnknownConstruct(construct.to_string()))
    }

    /// Bernoulli draw from the 2PL probability at the true ability, followed
    /// by a latency draw.
    pub fn simulate_response(&mut self, item: &Item) -> Result<Observation, SimError> {
        let p = item.params.prob_correct(self.theta(&item.construct)?)?;
        let correct = self.rng.random::<f64>() < p;
        let latency_ms = self.rng.random_range(2_000..20_000);
        Ok(Observation { construct: item.construct.clone(), correct, latency_ms, free_text: None })
    }

    /// A raw answer string for `item`: the keyed answer when `correct`, some
    /// other answer otherwise. Likert items get a uniform 1..=5 rating.
    pub fn answer_text(&mut self, item: &Item, correct: bool) -> String {
        match (&item.answer_key, item.kind) {
            (AnswerKey::Scale { .. }, _) | (_, ItemKind::Likert) => self.rng.random_range(1..=5u8).to_string(),
            (AnswerKey::Choice(k), _) => {
                if correct {
                    item.options[*k].clone()
                } else {
                    let wrong: Vec<usize> = (0..item.options.len()).filter(|i| i != k).collect();
                    item.options[wrong[self.rng.random_range(0..wrong.len())]].clone()
                }
            }
            (AnswerKey::Exact(s), _) => {
                if correct {
                    s.clone()
                } else {
                    format!("{s}0")
                }
            }
        }
    }

    /// One step of the latent mastery chain for `construct`: emit a response
    /// from the current state, then apply learn or forget.
    pub fn bkt_step(&mut self, construct: &str) -> Result<(bool, bool), SimError> {
        let params = *self
            .true_bkt
            .get(construct)
            .ok_or_else(|| SimError::UnknownConstruct(construct.to_string()))?;
        let state = self.mastered[construct];
        let p_correct = if state { 1.0 - params.p_slip } else { params.p_guess };
        let correct = self.rng.random::<f64>() < p_correct;
        let flip = if state { params.p_forget } else { params.p_learn };
        let next = if self.rng.random::<f64>() < flip { !state } else { state };
        self.mastered.insert(construct.to_string(), next);
        Ok((state, correct))
    }

    /// Engagement for `action`: table mean plus Gaussian noise, clamped to [0, 1].
    pub fn engagement(&mut self, action: usize) -> Result<f64, SimError> {
        let mean = *self.engagement_model.get(action).ok_or_else(|| {
            SimError::Invalid(format!("no engagement mean for action {action}"))
        })?;
        let noise: f64 = self.rng.sample(StandardNormal);
        Ok((mean + ENGAGEMENT_NOISE_SD * noise).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; zero for fewer than two values.
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(metric: &str, values: &[f64]) -> Self {
        let n = values.len();
        let mean = if n == 0 { 0.0 } else { values.iter().sum::<f64>() / n as f64 };
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { metric: metric.to_string(), mean, sd, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Name of the index column: `items`, `step` or `episode`.
    pub index: String,
    pub series: Vec<Series>,
    pub summaries: Vec<Summary>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, index: &str) -> Self {
        Self { experiment: experiment.into(), index: index.into(), series: Vec::new(), summaries: Vec::new() }
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn summary(&self, metric: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.metric == metric)
    }

    pub fn push_series(&mut self, name: &str, values: Vec<f64>) {
        self.series.push(Series { name: name.into(), values });
    }

    pub fn push_summary(&mut self, summary: Summary) {
        self.summaries.push(summary);
    }

    /// Append another report's series and summaries.
    pub fn extend(&mut self, other: ExperimentReport) {
        self.series.extend(other.series);
        self.summaries.extend(other.summaries);
    }

    /// Header `index,<series...>` then one row per step. Shorter series
    /// leave trailing cells empty.
    pub fn to_csv(&self) -> Result<String, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.index.clone()];
        header.extend(self.series.iter().map(|s| s.name.clone()));
        w.write_record(&header)?;
        let rows = self.series.iter().map(|s| s.values.len()).max().unwrap_or(0);
        for i in 0..rows {
            let mut row = vec![i.to_string()];
            row.extend(self.series.iter().map(|s| s.values.get(i).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| SimError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Summaries as CSV: `metric,mean,sd,n`.
    pub fn summaries_csv(&self) -> Result<String, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "mean", "sd", "n"])?;
        for s in &self.summaries {
            w.write_record([s.metric.clone(), s.mean.to_string(), s.sd.to_string(), s.n.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| SimError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Experiment settings file. Every section is optional.
///
/// ```toml
/// seed = 7
/// [cat]
/// students = 500
/// items_per_student = 30
/// bank_items = 200
/// [bandit]
/// arm_means = [0.5, 0.4, 0.3]
/// horizon = 10000
/// c = 0.5
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub cat: CatConfig,
    pub tracing: TracingConfig,
    pub bandit: BanditConfig,
    pub q: QExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Discount of the chain task used by the `q` experiment.
pub const Q_CHAIN_GAMMA: f64 = 0.9;
/// Construct of the synthetic bank used by the `cat` experiment.
pub const CAT_CONSTRUCT: &str = "reading";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Cat,
    Tracing,
    Bandit,
    Q,
}

impl std::str::FromStr for ExperimentKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "cat" => Ok(Self::Cat),
            "tracing" => Ok(Self::Tracing),
            "bandit" => Ok(Self::Bandit),
            "q" => Ok(Self::Q),
            other => Err(SimError::Invalid(format!("unknown experiment {other:?}; expected cat, tracing, bandit or q"))),
        }
    }
}

/// Runs one experiment under `seed`. `cat` compares max-information and
/// random selection on a synthetic bank drawn from the same seed; `q` trains
/// on the chain task.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport, SimError> {
    match kind {
        ExperimentKind::Cat => {
            let c = &cfg.cat;
            let bank = synthetic_bank(c.bank_items, CAT_CONSTRUCT, c.a_range, c.b_range, seed)?;
            let mut report = run_cat_experiment(c, &bank, SelectionPolicy::MaxInfo, seed)?;
            report.extend(run_cat_experiment(c, &bank, SelectionPolicy::Random, seed)?);
            Ok(report)
        }
        ExperimentKind::Tracing => run_tracing_experiment(&cfg.tracing, seed),
        ExperimentKind::Bandit => run_bandit_experiment(&cfg.bandit, seed),
        ExperimentKind::Q => Ok(run_q_experiment(&DeterministicMdp::chain(Q_CHAIN_GAMMA), &cfg.q, seed)?.report),
    }
}
