//! Property suites, 1000 cases each.

mod common;

#[test]
fn two_pl_symmetry() {
    common::two_pl_symmetry(1000).unwrap();
}

#[test]
fn prob_monotone() {
    common::prob_monotone(1000).unwrap();
}

#[test]
fn fisher_bound() {
    common::fisher_bound(1000).unwrap();
}

#[test]
fn eap_empty_is_prior() {
    common::eap_empty_is_prior(1000).unwrap();
}

#[test]
fn max_info_matches_oracle() {
    common::max_info_matches_oracle(1000, 300).unwrap();
}

#[test]
fn calibration_likelihood_monotone() {
    common::calibration_likelihood_monotone(1000).unwrap();
}

#[test]
fn forward_matches_brute_force() {
    common::forward_matches_brute_force(1000).unwrap();
}

#[test]
fn em_likelihood_monotone() {
    common::em_likelihood_monotone(1000).unwrap();
}

#[test]
fn bkt_evidence_monotone() {
    common::bkt_evidence_monotone(1000).unwrap();
}

#[test]
fn sentiment_scramble_invariant() {
    common::sentiment_scramble_invariant(1000).unwrap();
}

#[test]
fn mh_reproducible() {
    common::mh_reproducible(1000).unwrap();
}

#[test]
fn mh_accepts_uphill() {
    common::mh_accepts_uphill(1000).unwrap();
}

#[test]
fn pca_orthonormal_and_exact() {
    common::pca_orthonormal_and_exact(1000).unwrap();
}

#[test]
fn pca_error_nonincreasing() {
    common::pca_error_nonincreasing(1000).unwrap();
}

#[test]
fn mapping_affine() {
    common::mapping_affine(1000).unwrap();
}

#[test]
fn ucb_matches_oracle() {
    common::ucb_matches_oracle(1000).unwrap();
}

#[test]
fn rules_preserve_simplex() {
    common::rules_preserve_simplex(1000).unwrap();
}

#[test]
fn rules_idempotent_per_flag() {
    common::rules_idempotent_per_flag(1000).unwrap();
}

#[test]
fn reward_linear() {
    common::reward_linear(1000).unwrap();
}

#[test]
fn bank_round_trip() {
    common::bank_round_trip(1000).unwrap();
}

#[test]
fn render_pure() {
    common::render_pure(1000).unwrap();
}

#[test]
fn experiments_reproducible() {
    common::experiments_reproducible(1000).unwrap();
}

#[test]
fn session_determinism() {
    common::session_determinism(1000).unwrap();
}

#[test]
fn max_info_on_ten_thousand_items() {
    common::max_info_matches_oracle(3, 10_000).unwrap();
}
