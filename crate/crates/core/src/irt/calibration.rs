//! Marginal maximum likelihood item calibration by EM over a quadrature grid
//! (Bock-Aitkin). The ability distribution is fixed to the grid's prior,
//! which identifies the latent scale.

use serde::{Deserialize, Serialize};

use super::{log_sum_exp, IrtError, ItemParams, QuadratureGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub max_iterations: usize,
    /// Stop once the per-iteration likelihood gain drops below this.
    pub tolerance: f64,
    pub a_bounds: (f64, f64),
    pub b_bounds: (f64, f64),
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            a_bounds: (0.05, 5.0),
            b_bounds: (-6.0, 6.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub items: Vec<ItemParams>,
    /// Marginal log-likelihood at the starting values and after each M-step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-item expected counts from the E-step: `n[k]` expected examinees at
/// node k who saw the item, `r[k]` of whom answered correctly.
struct ExpectedCounts {
    n: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

fn log_tables(items: &[ItemParams], grid: &QuadratureGrid) -> Vec<Vec<(f64, f64)>> {
    items
        .iter()
        .map(|p| grid.points().iter().map(|&t| p.log_probs(t)).collect())
        .collect()
}

/// Marginal log-likelihood of a students x items matrix (`None` = missing).
pub fn marginal_log_likelihood(
    matrix: &[Vec<Option<bool>>],
    items: &[ItemParams],
    grid: &QuadratureGrid,
) -> f64 {
    e_step(matrix, items, grid).0
}

fn e_step(
    matrix: &[Vec<Option<bool>>],
    items: &[ItemParams],
    grid: &QuadratureGrid,
) -> (f64, ExpectedCounts) {
    let nodes = grid.len();
    let tables = log_tables(items, grid);
    let log_w = grid.log_weights();
    let mut counts = ExpectedCounts {
        n: vec![vec![0.0; nodes]; items.len()],
        r: vec![vec![0.0; nodes]; items.len()],
    };
    let mut total = 0.0;
    let mut log_post = vec![0.0; nodes];
    for row in matrix {
        log_post.copy_from_slice(&log_w);
        for (j, cell) in row.iter().enumerate() {
            if let Some(correct) = cell {
                for (lp, &(l1, l0)) in log_post.iter_mut().zip(&tables[j]) {
                    *lp += if *correct { l1 } else { l0 };
                }
            }
        }
        let norm = log_sum_exp(&log_post);
        total += norm;
        for lp in log_post.iter_mut() {
            *lp = (*lp - norm).exp();
        }
        for (j, cell) in row.iter().enumerate() {
            if let Some(correct) = cell {
                for k in 0..nodes {
                    counts.n[j][k] += log_post[k];
                    if *correct {
                        counts.r[j][k] += log_post[k];
                    }
                }
            }
        }
    }
    (total, counts)
}

/// Expected complete-data log-likelihood of one item at slope/intercept form
/// `logit = a theta + c`.
fn item_objective(points: &[f64], n: &[f64], r: &[f64], a: f64, c: f64) -> f64 {
    points
        .iter()
        .zip(n.iter().zip(r))
        .map(|(&t, (&nk, &rk))| {
            let x = a * t + c;
            let (l1, l0) = (-super::softplus(-x), -super::softplus(x));
            rk * l1 + (nk - rk) * l0
        })
        .sum()
}

/// Newton-Raphson with backtracking on the concave item objective, then clamp.
/// The clamped result is kept only if it does not lower the objective, which
/// keeps EM monotone.
fn m_step_item(
    points: &[f64],
    n: &[f64],
    r: &[f64],
    current: ItemParams,
    opts: &CalibrationOptions,
) -> ItemParams {
    let mut a = current.a;
    let mut c = -current.a * current.b;
    let start_obj = item_objective(points, n, r, a, c);
    let mut obj = start_obj;
    for _ in 0..50 {
        let (mut ga, mut gc, mut haa, mut hac, mut hcc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, (&nk, &rk)) in points.iter().zip(n.iter().zip(r)) {
            let p = super::logistic(a * t + c);
            let resid = rk - nk * p;
            let w = nk * p * (1.0 - p);
            ga += resid * t;
            gc += resid;
            haa += w * t * t;
            hac += w * t;
            hcc += w;
        }
        let det = haa * hcc - hac * hac;
        if !(det > 1e-300) {
            break;
        }
        // Newton direction: H^{-1} g with H the (positive) information matrix
        let da = (hcc * ga - hac * gc) / det;
        let dc = (haa * gc - hac * ga) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-8 {
            let na = a + step * da;
            let nc = c + step * dc;
            if na > 0.0 {
                let nobj = item_objective(points, n, r, na, nc);
                if nobj >= obj {
                    a = na;
                    c = nc;
                    improved = nobj - obj > 1e-12;
                    obj = nobj;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved || (ga.abs() + gc.abs()) < 1e-10 {
            break;
        }
    }
    let a_new = a.clamp(opts.a_bounds.0, opts.a_bounds.1);
    let b_new = (-c / a).clamp(opts.b_bounds.0, opts.b_bounds.1);
    if item_objective(points, n, r, a_new, -a_new * b_new) >= start_obj {
        ItemParams { a: a_new, b: b_new }
    } else {
        current
    }
}

fn starting_values(
    matrix: &[Vec<Option<bool>>],
    n_items: usize,
    opts: &CalibrationOptions,
) -> Vec<ItemParams> {
    (0..n_items)
        .map(|j| {
            let (mut right, mut seen) = (0.0f64, 0.0f64);
            for row in matrix {
                if let Some(c) = row[j] {
                    seen += 1.0;
                    if c {
                        right += 1.0;
                    }
                }
            }
            let p: f64 = (right / seen).clamp(0.01, 0.99);
            // logit of the p-value, inflated for the N(0,1) ability spread
            let b = (-(p / (1.0 - p)).ln() * 1.7).clamp(opts.b_bounds.0, opts.b_bounds.1);
            ItemParams { a: 1.0, b }
        })
        .collect()
}

/// Calibrate 2PL parameters from a students x items matrix, `None` marking a
/// missing response. Every item needs at least one correct and one incorrect
/// observation; `item_ids` names offenders in errors.
pub fn calibrate_2pl(
    matrix: &[Vec<Option<bool>>],
    item_ids: &[String],
    grid: &QuadratureGrid,
    opts: &CalibrationOptions,
) -> Result<Calibration, IrtError> {
    if matrix.is_empty() || item_ids.is_empty() {
        return Err(IrtError::EmptyMatrix);
    }
    let n_items = item_ids.len();
    if let Some(row) = matrix.iter().find(|r| r.len() != n_items) {
        return Err(IrtError::Calibration {
            item: "*".into(),
            reason: format!("row has {} cells, expected {n_items}", row.len()),
        });
    }
    for (j, id) in item_ids.iter().enumerate() {
        let right = matrix.iter().filter(|r| r[j] == Some(true)).count();
        let wrong = matrix.iter().filter(|r| r[j] == Some(false)).count();
        if right == 0 || wrong == 0 {
            return Err(IrtError::Calibration {
                item: id.clone(),
                reason: format!("degenerate responses ({right} correct, {wrong} incorrect)"),
            });
        }
    }

    let mut items = starting_values(matrix, n_items, opts);
    let (mut ll, mut counts) = e_step(matrix, &items, grid);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        for (j, item) in items.iter_mut().enumerate() {
            *item = m_step_item(grid.points(), &counts.n[j], &counts.r[j], *item, opts);
        }
        let (next_ll, next_counts) = e_step(matrix, &items, grid);
        let tol = 1e-9 * ll.abs().max(1.0);
        assert!(
            next_ll >= ll - tol,
            "EM decreased marginal likelihood: {ll} -> {next_ll}"
        );
        history.push(next_ll);
        let gain = next_ll - ll;
        ll = next_ll;
        counts = next_counts;
        if gain < opts.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Calibration { items, log_likelihood: history, iterations, converged })
}
