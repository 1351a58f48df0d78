//! Baum-Welch for the two-state mastery chain.

use serde::{Deserialize, Serialize};

use super::{BktParams, TracingError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub params: BktParams,
    /// Total log-likelihood at the start and after each iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

// State 0 = not mastered, 1 = mastered.
fn emission(p: &BktParams, state: usize, correct: bool) -> f64 {
    match (state, correct) {
        (1, true) => 1.0 - p.p_slip,
        (1, false) => p.p_slip,
        (_, true) => p.p_guess,
        (_, false) => 1.0 - p.p_guess,
    }
}

fn transition(p: &BktParams, from: usize, to: usize) -> f64 {
    match (from, to) {
        (0, 1) => p.p_learn,
        (0, _) => 1.0 - p.p_learn,
        (_, 0) => p.p_forget,
        _ => 1.0 - p.p_forget,
    }
}

/// Sufficient statistics accumulated over a corpus by one E-step.
#[derive(Default)]
struct Stats {
    init_mastered: f64,
    sequences: f64,
    // expected transitions out of each state and how many changed state
    from_unmastered: f64,
    learned: f64,
    from_mastered: f64,
    forgot: f64,
    // expected occupancy and emission counts
    unmastered: f64,
    guesses: f64,
    mastered: f64,
    slips: f64,
    log_likelihood: f64,
}

/// Scaled forward-backward on one sequence.
fn accumulate(seq: &[bool], p: &BktParams, stats: &mut Stats) {
    let n = seq.len();
    let mut alpha = vec![[0.0f64; 2]; n];
    let mut scale = vec![0.0f64; n];
    for t in 0..n {
        for s in 0..2 {
            let prior = if t == 0 {
                if s == 1 { p.p_init } else { 1.0 - p.p_init }
            } else {
                (0..2).map(|r| alpha[t - 1][r] * transition(p, r, s)).sum()
            };
            alpha[t][s] = prior * emission(p, s, seq[t]);
        }
        let c = alpha[t][0] + alpha[t][1];
        scale[t] = c;
        if c > 0.0 {
            alpha[t][0] /= c;
            alpha[t][1] /= c;
        }
    }
    let mut beta = vec![[1.0f64; 2]; n];
    for t in (0..n.saturating_sub(1)).rev() {
        for s in 0..2 {
            beta[t][s] = (0..2)
                .map(|r| transition(p, s, r) * emission(p, r, seq[t + 1]) * beta[t + 1][r])
                .sum::<f64>()
                / scale[t + 1].max(f64::MIN_POSITIVE);
        }
    }

    stats.log_likelihood += scale.iter().map(|c| c.max(f64::MIN_POSITIVE).ln()).sum::<f64>();
    stats.sequences += 1.0;
    for t in 0..n {
        let g1 = alpha[t][1] * beta[t][1];
        let g0 = alpha[t][0] * beta[t][0];
        let norm = g0 + g1;
        let (g0, g1) = if norm > 0.0 { (g0 / norm, g1 / norm) } else { (0.5, 0.5) };
        if t == 0 {
            stats.init_mastered += g1;
        }
        stats.unmastered += g0;
        stats.mastered += g1;
        if seq[t] {
            stats.guesses += g0;
        } else {
            stats.slips += g1;
        }
        if t + 1 < n {
            let denom = scale[t + 1].max(f64::MIN_POSITIVE);
            let mut xi = [[0.0f64; 2]; 2];
            for (s, row) in xi.iter_mut().enumerate() {
                for (r, cell) in row.iter_mut().enumerate() {
                    *cell = alpha[t][s] * transition(p, s, r) * emission(p, r, seq[t + 1])
                        * beta[t + 1][r]
                        / denom;
                }
            }
            let total: f64 = xi.iter().flatten().sum();
            if total > 0.0 {
                for cell in xi.iter_mut().flatten() {
                    *cell /= total;
                }
            }
            stats.from_unmastered += xi[0][0] + xi[0][1];
            stats.learned += xi[0][1];
            stats.from_mastered += xi[1][0] + xi[1][1];
            stats.forgot += xi[1][0];
        }
    }
}

fn ratio(num: f64, den: f64, fallback: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        fallback
    }
}

/// Total log-likelihood of a corpus under `params`.
pub fn sequence_log_likelihood(sequences: &[Vec<bool>], params: &BktParams) -> f64 {
    let mut stats = Stats::default();
    for seq in sequences {
        accumulate(seq, params, &mut stats);
    }
    stats.log_likelihood
}

/// Fit BKT parameters by EM. A zero `p_forget` in `init` stays zero (classic
/// BKT); a positive one is re-estimated. If the fit lands on the
/// non-identifiable side (`p_guess >= 1 - p_slip`) the state labels are swapped.
pub fn em_fit(
    sequences: &[Vec<bool>],
    init: &BktParams,
    opts: &EmOptions,
) -> Result<EmFit, TracingError> {
    if sequences.is_empty() {
        return Err(TracingError::Domain("em_fit needs at least one sequence".into()));
    }
    if let Some(short) = sequences.iter().find(|s| s.len() < 2) {
        return Err(TracingError::Domain(format!(
            "sequences need length >= 2, got {}",
            short.len()
        )));
    }
    let mut params = *init;
    let mut stats = Stats::default();
    sequences.iter().for_each(|s| accumulate(s, &params, &mut stats));
    let mut history = vec![stats.log_likelihood];
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        params = BktParams {
            p_init: ratio(stats.init_mastered, stats.sequences, params.p_init),
            p_learn: ratio(stats.learned, stats.from_unmastered, params.p_learn),
            p_forget: if init.p_forget == 0.0 {
                0.0
            } else {
                ratio(stats.forgot, stats.from_mastered, params.p_forget)
            },
            p_guess: ratio(stats.guesses, stats.unmastered, params.p_guess),
            p_slip: ratio(stats.slips, stats.mastered, params.p_slip),
        };
        let prev = stats.log_likelihood;
        stats = Stats::default();
        sequences.iter().for_each(|s| accumulate(s, &params, &mut stats));
        history.push(stats.log_likelihood);
        if stats.log_likelihood - prev < opts.tolerance {
            break;
        }
    }
    if params.p_guess >= 1.0 - params.p_slip {
        params = BktParams {
            p_init: 1.0 - params.p_init,
            p_learn: params.p_forget,
            p_forget: params.p_learn,
            p_guess: 1.0 - params.p_slip,
            p_slip: 1.0 - params.p_guess,
        };
    }
    if params.p_guess >= 1.0 - params.p_slip {
        // Both states emit alike, so the chain carries no information. Keep
        // the likelihood and express it as a single absorbing state.
        let q = params.p_guess;
        params = if q > 0.0 {
            BktParams { p_init: 1.0, p_forget: 0.0, p_slip: 1.0 - q, p_guess: init.p_guess.min(q / 2.0), ..params }
        } else {
            BktParams { p_init: 0.0, p_learn: 0.0, p_guess: 0.0, p_slip: init.p_slip, ..params }
        };
    }
    Ok(EmFit { params, log_likelihood: history, iterations })
}
