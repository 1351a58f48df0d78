//! Random-walk Metropolis-Hastings for a scalar ability under a Gaussian
//! likelihood and a Gaussian hierarchical prior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ProfileError, StudentProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub center: f64,
    pub scale: f64,
}

impl Gaussian {
    pub fn new(center: f64, scale: f64) -> Self {
        Self { center, scale }
    }

    /// Log density without the normalizing constant.
    pub fn log_kernel(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.scale;
        -0.5 * z * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalSpec {
    pub likelihood: Gaussian,
    pub prior: Gaussian,
    pub proposal_sd: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl HierarchicalSpec {
    /// Burn-in defaults to a tenth of the chain.
    pub fn new(likelihood: Gaussian, prior: Gaussian, proposal_sd: f64, n_samples: usize, seed: u64) -> Self {
        Self { likelihood, prior, proposal_sd, n_samples, burn_in: n_samples / 10, seed }
    }

    pub fn with_burn_in(self, burn_in: usize) -> Self {
        Self { burn_in, ..self }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let fields = [
            ("likelihood.scale", self.likelihood.scale),
            ("prior.scale", self.prior.scale),
            ("proposal_sd", self.proposal_sd),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProfileError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.likelihood.center.is_finite() && self.prior.center.is_finite()) {
            return Err(ProfileError::Invalid("centers must be finite".into()));
        }
        if self.n_samples == 0 || self.burn_in >= self.n_samples {
            return Err(ProfileError::Invalid(format!(
                "need burn_in < n_samples, got {} and {}",
                self.burn_in, self.n_samples
            )));
        }
        Ok(())
    }

    pub fn log_target(&self, x: f64) -> f64 {
        self.likelihood.log_kernel(x) + self.prior.log_kernel(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhResult {
    /// The full chain, burn-in included.
    pub samples: Vec<f64>,
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    pub acceptance_rate: f64,
}

/// The chain starts at the prior center. Each step records the current
/// state after the accept/reject decision.
pub fn mh_update(spec: &HierarchicalSpec) -> Result<MhResult, ProfileError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = spec.prior.center;
    let mut log_x = spec.log_target(x);
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let step: f64 = rng.sample(StandardNormal);
        let proposal = x + spec.proposal_sd * step;
        let log_p = spec.log_target(proposal);
        let u: f64 = rng.random();
        if log_p >= log_x || u.ln() < log_p - log_x {
            x = proposal;
            log_x = log_p;
            accepted += 1;
        }
        samples.push(x);
    }
    let kept = &samples[spec.burn_in..];
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = if kept.len() > 1 {
        kept.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(MhResult {
        samples,
        posterior_mean: mean,
        posterior_sd: var.sqrt(),
        acceptance_rate: accepted as f64 / spec.n_samples as f64,
    })
}

/// Replace one construct's ability with the MH posterior mean. The prior is
/// re-centered at the current ability; its scale comes from `evidence`.
pub fn update_profile(
    profile: &StudentProfile,
    construct: &str,
    evidence: &HierarchicalSpec,
) -> Result<StudentProfile, ProfileError> {
    let current = profile.theta_of(construct)?;
    let spec = HierarchicalSpec { prior: Gaussian { center: current, ..evidence.prior }, ..*evidence };
    let result = mh_update(&spec)?;
    let mut next = profile.clone();
    next.set_theta(construct, result.posterior_mean)?;
    Ok(next)
}
