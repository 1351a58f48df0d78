use serde::{Deserialize, Serialize};

use super::{log_sum_exp, IrtError, ItemParams, QuadratureGrid};

/// One scored response to a calibrated item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub params: ItemParams,
    pub correct: bool,
}

impl Response {
    pub fn new(params: ItemParams, correct: bool) -> Self {
        Self { params, correct }
    }

    fn log_likelihood(&self, theta: f64) -> f64 {
        let (lp, lq) = self.params.log_probs(theta);
        if self.correct {
            lp
        } else {
            lq
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimationMethod {
    Eap,
    Mle,
    PriorOnly,
}

/// Latent ability on the standardized scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityEstimate {
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub method: EstimationMethod,
}

impl AbilityEstimate {
    pub fn prior(grid: &QuadratureGrid) -> Self {
        Self {
            theta_mean: grid.prior_mean(),
            theta_sd: grid.prior_sd(),
            method: EstimationMethod::PriorOnly,
        }
    }
}

/// Discrete posterior over quadrature points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    points: Vec<f64>,
    probs: Vec<f64>,
}

impl GridPosterior {
    /// Validates nonnegativity and unit mass within 1e-9.
    pub fn new(points: Vec<f64>, probs: Vec<f64>) -> Result<Self, IrtError> {
        if points.len() != probs.len() || points.is_empty() {
            return Err(IrtError::InvalidPosterior("length mismatch".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(IrtError::InvalidPosterior("negative or non-finite mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(IrtError::InvalidPosterior(format!("mass sums to {total}")));
        }
        Ok(Self { points, probs })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.points
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| p * (x - mean) * (x - mean))
            .sum::<f64>()
            .max(0.0)
    }
}

/// Normalized posterior over the grid, accumulated in log space.
pub fn posterior_over_grid(
    responses: &[Response],
    grid: &QuadratureGrid,
) -> Result<GridPosterior, IrtError> {
    let log_post: Vec<f64> = grid
        .points()
        .iter()
        .zip(grid.log_weights())
        .map(|(&theta, lw)| lw + responses.iter().map(|r| r.log_likelihood(theta)).sum::<f64>())
        .collect();
    let norm = log_sum_exp(&log_post);
    if !norm.is_finite() {
        return Err(IrtError::PosteriorUnderflow);
    }
    let probs = log_post.iter().map(|l| (l - norm).exp()).collect();
    Ok(GridPosterior { points: grid.points().to_vec(), probs })
}

/// Expected a posteriori ability. Zero responses return the prior exactly.
pub fn estimate_theta_eap(
    responses: &[Response],
    grid: &QuadratureGrid,
) -> Result<AbilityEstimate, IrtError> {
    if responses.is_empty() {
        return Ok(AbilityEstimate::prior(grid));
    }
    let post = posterior_over_grid(responses, grid)?;
    Ok(AbilityEstimate {
        theta_mean: post.mean(),
        theta_sd: post.variance().sqrt(),
        method: EstimationMethod::Eap,
    })
}

fn score(responses: &[Response], theta: f64) -> f64 {
    responses
        .iter()
        .map(|r| {
            let p = super::logistic(r.params.a * (theta - r.params.b));
            r.params.a * (f64::from(u8::from(r.correct)) - p)
        })
        .sum()
}

fn test_information(responses: &[Response], theta: f64) -> f64 {
    responses
        .iter()
        .map(|r| r.params.fisher_information(theta).unwrap_or(0.0))
        .sum()
}

/// Maximum-likelihood ability. The log-likelihood is strictly concave, so the
/// root of the score function is bracketed and bisected.
pub fn estimate_theta_mle(responses: &[Response]) -> Result<AbilityEstimate, IrtError> {
    let any_correct = responses.iter().any(|r| r.correct);
    let any_incorrect = responses.iter().any(|r| !r.correct);
    if !(any_correct && any_incorrect) {
        return Err(IrtError::MleUnbounded);
    }

    let mut lo = -8.0;
    let mut hi = 8.0;
    while score(responses, lo) < 0.0 {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(IrtError::MleUnbounded);
        }
    }
    while score(responses, hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(IrtError::MleUnbounded);
        }
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if score(responses, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    // Newton polish: bisection alone stalls on float resolution of the score.
    for _ in 0..3 {
        let info = test_information(responses, theta);
        if info <= 0.0 {
            break;
        }
        let next = theta + score(responses, theta) / info;
        if (lo..=hi).contains(&next) {
            theta = next;
        }
    }

    let info = test_information(responses, theta);
    Ok(AbilityEstimate {
        theta_mean: theta,
        theta_sd: if info > 0.0 { 1.0 / info.sqrt() } else { f64::INFINITY },
        method: EstimationMethod::Mle,
    })
}
