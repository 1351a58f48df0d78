use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{student_rng, ExperimentReport, SimError, SimStudent, Summary};
use crate::bank::Item;
use crate::irt::{estimate_theta_eap, select_item_max_info, AbilityEstimate, ItemParams, QuadratureGrid, Response};
use crate::knowledge::{hmm_filter, BktParams};
use crate::policy::{ucb_select, ucb_update, BanditState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    MaxInfo,
    Random,
}

impl SelectionPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SelectionPolicy::MaxInfo => "max_info",
            SelectionPolicy::Random => "random",
        }
    }
}

/// `n` items on one construct with `a` and `b` uniform on the given ranges.
/// Ids are zero-padded so that id order is index order.
pub fn synthetic_bank(
    n: usize,
    construct: &str,
    a_range: (f64, f64),
    b_range: (f64, f64),
    seed: u64,
) -> Result<Vec<Item>, SimError> {
    let mut rng = student_rng(seed, u64::MAX);
    (0..n)
        .map(|i| {
            let a = a_range.0 + (a_range.1 - a_range.0) * rng.random::<f64>();
            let b = b_range.0 + (b_range.1 - b_range.0) * rng.random::<f64>();
            Ok(Item::multiple_choice(&format!("item-{i:05}"), construct, ItemParams::new(a, b)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatConfig {
    pub students: usize,
    pub items_per_student: usize,
    /// Size of the synthetic bank used when no bank is supplied.
    pub bank_items: usize,
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub grid_points: usize,
}

impl Default for CatConfig {
    fn default() -> Self {
        Self {
            students: 500,
            items_per_student: 30,
            bank_items: 200,
            a_range: (0.8, 2.0),
            b_range: (-3.0, 3.0),
            prior_mean: 0.0,
            prior_sd: 1.0,
            grid_points: 61,
        }
    }
}

impl CatConfig {
    pub fn grid(&self) -> Result<QuadratureGrid, SimError> {
        let half = 5.0 * self.prior_sd;
        Ok(QuadratureGrid::normal(
            self.prior_mean,
            self.prior_sd,
            self.grid_points,
            self.prior_mean - half,
            self.prior_mean + half,
        )?)
    }
}

/// Adaptive test simulation. True abilities are drawn from the prior before
/// any item is chosen, so two policies run with the same seed see the same
/// students. Each construct in the bank is tested separately with
/// `items_per_student` items.
///
/// Series `rmse_<policy>` and `posterior_sd_<policy>` have one entry per item
/// count from 0 to k. A construct whose items run out keeps its last
/// estimate for the remaining counts; `truncated_<policy>` counts those.
pub fn run_cat_experiment(
    cfg: &CatConfig,
    bank: &[Item],
    policy: SelectionPolicy,
    seed: u64,
) -> Result<ExperimentReport, SimError> {
    let grid = cfg.grid()?;
    let mut by_construct: BTreeMap<String, Vec<Item>> = BTreeMap::new();
    for item in bank.iter().filter(|i| i.is_adaptive()) {
        by_construct.entry(item.construct.clone()).or_default().push(item.clone());
    }
    if by_construct.is_empty() {
        return Err(SimError::Invalid("bank has no adaptive items".into()));
    }
    let k = cfg.items_per_student;
    let mut sq_err = vec![0.0; k + 1];
    let mut sd_sum = vec![0.0; k + 1];
    let mut final_abs = Vec::new();
    let mut truncated = Vec::new();

    for i in 0..cfg.students {
        let mut rng = student_rng(seed, i as u64);
        let truth: BTreeMap<String, f64> = by_construct
            .keys()
            .map(|c| {
                let z: f64 = rng.sample(StandardNormal);
                (c.clone(), cfg.prior_mean + cfg.prior_sd * z)
            })
            .collect();
        let mut student = SimStudent::with_rng(truth.clone(), seed, rng);
        for (construct, items) in &by_construct {
            let target = truth[construct];
            let mut responses = Vec::with_capacity(k);
            let mut administered = BTreeSet::new();
            let mut est = AbilityEstimate::prior(&grid);
            let mut cut = false;
            for j in 0..=k {
                if j > 0 && !cut {
                    if administered.len() == items.len() {
                        cut = true;
                    } else {
                        let item = match policy {
                            SelectionPolicy::MaxInfo => select_item_max_info(items, est.theta_mean, &administered)?,
                            SelectionPolicy::Random => {
                                let open: Vec<&Item> =
                                    items.iter().filter(|it| !administered.contains(&it.id)).collect();
                                open[student.rng().random_range(0..open.len())]
                            }
                        };
                        let obs = student.simulate_response(item)?;
                        administered.insert(item.id.clone());
                        responses.push(Response::new(item.params, obs.correct));
                        est = estimate_theta_eap(&responses, &grid)?;
                    }
                }
                sq_err[j] += (est.theta_mean - target).powi(2);
                sd_sum[j] += est.theta_sd;
            }
            final_abs.push((est.theta_mean - target).abs());
            truncated.push(f64::from(u8::from(cut)));
        }
    }

    let cells = (cfg.students * by_construct.len()).max(1) as f64;
    let name = policy.name();
    let mut report = ExperimentReport::new("cat", "items");
    report.push_series(&format!("rmse_{name}"), sq_err.iter().map(|s| (s / cells).sqrt()).collect());
    report.push_series(&format!("posterior_sd_{name}"), sd_sum.iter().map(|s| s / cells).collect());
    report.push_summary(Summary::of(&format!("abs_error_{name}"), &final_abs));
    report.push_summary(Summary::of(&format!("truncated_{name}"), &truncated));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracingConfig {
    pub sequences: usize,
    pub length: usize,
    pub params: BktParams,
}

impl Default for TracingConfig {
    fn default() -> Self {
        Self { sequences: 1000, length: 50, params: BktParams::default() }
    }
}

/// Filtered mastery against the simulated latent state, next to a baseline
/// that always predicts `p_init`. Series `filter_rmse` and `baseline_rmse`
/// are per step; summaries hold the per-sequence RMSE of each.
pub fn run_tracing_experiment(cfg: &TracingConfig, seed: u64) -> Result<ExperimentReport, SimError> {
    cfg.params.validate()?;
    if cfg.length == 0 {
        return Err(SimError::Invalid("sequence length must be positive".into()));
    }
    let n = cfg.length;
    let baseline = cfg.params.p_init;
    let mut filter_sq = vec![0.0; n];
    let mut base_sq = vec![0.0; n];
    let mut per_seq_filter = Vec::with_capacity(cfg.sequences);
    let mut per_seq_base = Vec::with_capacity(cfg.sequences);
    for i in 0..cfg.sequences {
        let mut student =
            SimStudent::with_rng(BTreeMap::new(), seed, student_rng(seed, i as u64)).with_bkt("c", cfg.params);
        let mut states = Vec::with_capacity(n);
        let mut obs = Vec::with_capacity(n);
        for _ in 0..n {
            let (state, correct) = student.bkt_step("c")?;
            states.push(f64::from(u8::from(state)));
            obs.push(correct);
        }
        let filtered = hmm_filter(&obs, &cfg.params);
        let (mut fs, mut bs) = (0.0, 0.0);
        for t in 0..n {
            let f = (filtered[t] - states[t]).powi(2);
            let b = (baseline - states[t]).powi(2);
            filter_sq[t] += f;
            base_sq[t] += b;
            fs += f;
            bs += b;
        }
        per_seq_filter.push((fs / n as f64).sqrt());
        per_seq_base.push((bs / n as f64).sqrt());
    }
    let m = cfg.sequences.max(1) as f64;
    let mut report = ExperimentReport::new("tracing", "step");
    report.push_series("filter_rmse", filter_sq.iter().map(|s| (s / m).sqrt()).collect());
    report.push_series("baseline_rmse", base_sq.iter().map(|s| (s / m).sqrt()).collect());
    report.push_summary(Summary::of("filter_rmse", &per_seq_filter));
    report.push_summary(Summary::of("baseline_rmse", &per_seq_base));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    pub arm_means: Vec<f64>,
    pub horizon: usize,
    pub c: f64,
    pub seeds: usize,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self { arm_means: vec![0.5, 0.4, 0.3], horizon: 10_000, c: 0.5, seeds: 50 }
    }
}

/// UCB on Bernoulli arms. Series `regret` is cumulative pseudo-regret
/// (best mean minus pulled mean) averaged over seeds; summaries give the
/// best-arm pull fraction and final regret across seeds.
pub fn run_bandit_experiment(cfg: &BanditConfig, seed: u64) -> Result<ExperimentReport, SimError> {
    let arms = cfg.arm_means.len();
    if arms == 0 || cfg.arm_means.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(SimError::Invalid("arm means must be in [0, 1]".into()));
    }
    if cfg.horizon < arms {
        return Err(SimError::Invalid(format!("horizon {} shorter than {arms} arms", cfg.horizon)));
    }
    if cfg.seeds == 0 {
        return Err(SimError::Invalid("need at least one seed".into()));
    }
    let best_mean = cfg.arm_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let is_best = |a: usize| cfg.arm_means[a] == best_mean;
    let mut regret = vec![0.0; cfg.horizon];
    let mut best_fraction = Vec::with_capacity(cfg.seeds);
    let mut final_regret = Vec::with_capacity(cfg.seeds);
    for s in 0..cfg.seeds {
        let mut rng = student_rng(seed, s as u64);
        let mut state = BanditState::new(arms, cfg.c)?;
        let mut total = 0.0;
        let mut best_pulls = 0usize;
        for slot in regret.iter_mut() {
            let arm = ucb_select(&state);
            let reward = if rng.random::<f64>() < cfg.arm_means[arm] { 1.0 } else { 0.0 };
            state = ucb_update(&state, arm, reward)?;
            total += best_mean - cfg.arm_means[arm];
            best_pulls += usize::from(is_best(arm));
            *slot += total;
        }
        best_fraction.push(best_pulls as f64 / cfg.horizon as f64);
        final_regret.push(total);
    }
    let mut report = ExperimentReport::new("bandit", "step");
    report.push_series("regret", regret.iter().map(|r| r / cfg.seeds as f64).collect());
    report.push_summary(Summary::of("best_arm_fraction", &best_fraction));
    report.push_summary(Summary::of("final_regret", &final_regret));
    Ok(report)
}
