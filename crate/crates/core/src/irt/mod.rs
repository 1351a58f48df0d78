//! Two-parameter logistic item response model.
//!
//! The Rasch model is the `a = 1` restriction of [`ItemParams`]; there is no
//! separate code path for it.

mod calibration;
mod estimation;
mod selection;

pub use calibration::{calibrate_2pl, marginal_log_likelihood, Calibration, CalibrationOptions};
pub use estimation::{
    estimate_theta_eap, estimate_theta_mle, posterior_over_grid, AbilityEstimate, EstimationMethod,
    GridPosterior, Response,
};
pub use selection::{select_item_bayes, select_item_max_info};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrtError {
    #[error("theta must be finite, got {0}")]
    NonFiniteTheta(f64),
    #[error("invalid item parameters: a = {a}, b = {b} (need a > 0 and finite b)")]
    InvalidParams { a: f64, b: f64 },
    #[error("invalid quadrature grid: {0}")]
    InvalidGrid(String),
    #[error("posterior mass underflowed to zero")]
    PosteriorUnderflow,
    #[error("MLE unbounded: responses are all correct or all incorrect")]
    MleUnbounded,
    #[error("item bank exhausted")]
    BankExhausted,
    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),
    #[error("calibration failed for item {item}: {reason}")]
    Calibration { item: String, reason: String },
    #[error("response matrix is empty")]
    EmptyMatrix,
}

/// Calibrated 2PL parameters for one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    /// Discrimination (logit slope).
    pub a: f64,
    /// Difficulty (logit location).
    pub b: f64,
}

impl ItemParams {
    pub fn new(a: f64, b: f64) -> Result<Self, IrtError> {
        let params = Self { a, b };
        params.validate()?;
        Ok(params)
    }

    pub fn rasch(b: f64) -> Result<Self, IrtError> {
        Self::new(1.0, b)
    }

    pub fn validate(&self) -> Result<(), IrtError> {
        if self.a > 0.0 && self.a.is_finite() && self.b.is_finite() {
            Ok(())
        } else {
            Err(IrtError::InvalidParams { a: self.a, b: self.b })
        }
    }

    /// Probability of a correct response, `1 / (1 + exp(-a (theta - b)))`.
    pub fn prob_correct(&self, theta: f64) -> Result<f64, IrtError> {
        check_theta(theta)?;
        Ok(logistic(self.a * (theta - self.b)))
    }

    /// Fisher information `a^2 P (1 - P)`; peaks at `theta = b` with value `a^2 / 4`.
    pub fn fisher_information(&self, theta: f64) -> Result<f64, IrtError> {
        check_theta(theta)?;
        let x = self.a * (theta - self.b);
        Ok(self.a * self.a * logistic(x) * logistic(-x))
    }

    /// `ln P(correct)` and `ln P(incorrect)` without cancellation.
    pub(crate) fn log_probs(&self, theta: f64) -> (f64, f64) {
        let x = self.a * (theta - self.b);
        (-softplus(-x), -softplus(x))
    }
}

/// Free-function form of [`ItemParams::prob_correct`].
pub fn prob_correct(item: &ItemParams, theta: f64) -> Result<f64, IrtError> {
    item.prob_correct(theta)
}

/// Free-function form of [`ItemParams::fisher_information`].
pub fn fisher_information(item: &ItemParams, theta: f64) -> Result<f64, IrtError> {
    item.fisher_information(theta)
}

fn check_theta(theta: f64) -> Result<(), IrtError> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(IrtError::NonFiniteTheta(theta))
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Fixed quadrature grid carrying a discretized normal prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    prior_mean: f64,
    prior_sd: f64,
}

impl QuadratureGrid {
    pub const DEFAULT_POINTS: usize = 61;
    pub const DEFAULT_BOUND: f64 = 5.0;

    /// `n` equally spaced points on `[lower, upper]` weighted by the
    /// `N(prior_mean, prior_sd^2)` density, normalized to sum to one.
    pub fn normal(
        prior_mean: f64,
        prior_sd: f64,
        n: usize,
        lower: f64,
        upper: f64,
    ) -> Result<Self, IrtError> {
        if n < 2 {
            return Err(IrtError::InvalidGrid("need at least two points".into()));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(IrtError::InvalidGrid(format!("bad range [{lower}, {upper}]")));
        }
        if !(prior_sd > 0.0) || !prior_mean.is_finite() || !prior_sd.is_finite() {
            return Err(IrtError::InvalidGrid(format!(
                "bad prior N({prior_mean}, {prior_sd}^2)"
            )));
        }
        let step = (upper - lower) / (n - 1) as f64;
        let points: Vec<f64> = (0..n).map(|i| lower + step * i as f64).collect();
        let raw: Vec<f64> = points
            .iter()
            .map(|&p| {
                let z = (p - prior_mean) / prior_sd;
                -0.5 * z * z
            })
            .collect();
        let norm = log_sum_exp(&raw);
        let weights = raw.iter().map(|r| (r - norm).exp()).collect();
        Ok(Self { points, weights, prior_mean, prior_sd })
    }

    /// Standard normal prior on 61 points over `[-5, 5]`.
    pub fn standard() -> Self {
        Self::normal(
            0.0,
            1.0,
            Self::DEFAULT_POINTS,
            -Self::DEFAULT_BOUND,
            Self::DEFAULT_BOUND,
        )
        .expect("default grid is valid")
    }

    /// Grid with arbitrary points and prior weights; weights are renormalized.
    pub fn from_parts(
        points: Vec<f64>,
        weights: Vec<f64>,
        prior_mean: f64,
        prior_sd: f64,
    ) -> Result<Self, IrtError> {
        if points.len() != weights.len() || points.len() < 2 {
            return Err(IrtError::InvalidGrid("points/weights length mismatch".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(IrtError::InvalidGrid("points must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(IrtError::InvalidGrid("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(IrtError::InvalidGrid("weights sum to zero".into()));
        }
        if !(prior_sd > 0.0) {
            return Err(IrtError::InvalidGrid("prior sd must be positive".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights, prior_mean, prior_sd })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn prior_sd(&self) -> f64 {
        self.prior_sd
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn log_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.ln()).collect()
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self::standard()
    }
}
