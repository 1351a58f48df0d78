use std::collections::BTreeSet;

use super::{GridPosterior, IrtError};
use crate::bank::Item;

/// Ordering key for selection: higher score wins, then the lexicographically
/// lowest id.
fn better(score: f64, id: &str, best: Option<(f64, &str)>) -> bool {
    match best {
        None => true,
        Some((s, bid)) => score > s || (score == s && id < bid),
    }
}

/// Adaptive items not yet administered.
pub(crate) fn candidates<'a, 'b>(
    bank: &'a [Item],
    administered: &'b BTreeSet<String>,
) -> impl Iterator<Item = &'a Item> + use<'a, 'b> {
    bank.iter()
        .filter(move |item| item.is_adaptive() && !administered.contains(&item.id))
}

/// Maximum-information item, where each candidate is scored at the ability
/// returned by `theta_of` (e.g. the estimate for the item's own construct).
pub(crate) fn select_max_info_by<'a>(
    items: impl Iterator<Item = &'a Item>,
    theta_of: impl Fn(&Item) -> f64,
) -> Result<&'a Item, IrtError> {
    let mut best: Option<(f64, &Item)> = None;
    for item in items {
        let info = item.params.fisher_information(theta_of(item))?;
        if better(info, &item.id, best.map(|(s, i)| (s, i.id.as_str()))) {
            best = Some((info, item));
        }
    }
    best.map(|(_, item)| item).ok_or(IrtError::BankExhausted)
}

/// Unadministered item with the largest Fisher information at `theta`.
/// Likert items never take part in adaptive selection.
pub fn select_item_max_info<'a>(
    bank: &'a [Item],
    theta: f64,
    administered: &BTreeSet<String>,
) -> Result<&'a Item, IrtError> {
    select_max_info_by(candidates(bank, administered), |_| theta)
}

/// Expected posterior variance after observing one response to an item with
/// response probabilities `probs` on the posterior's grid.
pub(crate) fn expected_posterior_variance(posterior: &GridPosterior, probs: &[f64]) -> f64 {
    let points = posterior.points();
    let prior = posterior.probs();
    let outcome = |correct: bool| -> (f64, f64) {
        let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for ((x, w), p) in points.iter().zip(prior).zip(probs) {
            let lik = if correct { *p } else { 1.0 - p };
            let v = w * lik;
            mass += v;
            m1 += v * x;
            m2 += v * x * x;
        }
        if mass <= 0.0 {
            return (0.0, 0.0);
        }
        let mean = m1 / mass;
        (mass, (m2 / mass - mean * mean).max(0.0))
    };
    let (p1, v1) = outcome(true);
    let (p0, v0) = outcome(false);
    p1 * v1 + p0 * v0
}

/// Bayesian sequential selection: the item minimizing expected posterior
/// variance, the expectation taken over the predictive response distribution.
pub fn select_item_bayes<'a>(
    bank: &'a [Item],
    posterior: &GridPosterior,
    administered: &BTreeSet<String>,
) -> Result<&'a Item, IrtError> {
    let mut best: Option<(f64, &Item)> = None;
    for item in candidates(bank, administered) {
        let probs = posterior
            .points()
            .iter()
            .map(|&t| item.params.prob_correct(t))
            .collect::<Result<Vec<_>, _>>()?;
        // negate so that `better` still maximizes
        let score = -expected_posterior_variance(posterior, &probs);
        if better(score, &item.id, best.map(|(s, i)| (s, i.id.as_str()))) {
            best = Some((score, item));
        }
    }
    best.map(|(_, item)| item).ok_or(IrtError::BankExhausted)
}
