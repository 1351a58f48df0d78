//! Principal component analysis of profile vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ProfileError;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` rows of length `n`, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalue of each component.
    pub variances: Vec<f64>,
    /// Share of total variance per component, nonincreasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) * components^T`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, ProfileError> {
        if x.len() != self.dim() {
            return Err(ProfileError::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(self
            .components
            .iter()
            .map(|row| row.iter().zip(x.iter().zip(&self.mean)).map(|(c, (v, m))| c * (v - m)).sum())
            .collect())
    }

    /// `mean + z * components`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>, ProfileError> {
        if z.len() != self.components.len() {
            return Err(ProfileError::Dimension { expected: self.components.len(), got: z.len() });
        }
        let mut out = self.mean.clone();
        for (w, row) in z.iter().zip(&self.components) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += w * c;
            }
        }
        Ok(out)
    }
}

pub fn pca_project(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>, ProfileError> {
    model.project(x)
}

/// Top-`k` eigenvectors of the sample covariance. Components past the data
/// rank carry zero variance. Each component's largest-magnitude entry is
/// made positive so the output is unique.
pub fn pca_fit(rows: &[Vec<f64>], k: usize) -> Result<PcaModel, ProfileError> {
    if rows.len() < 2 {
        return Err(ProfileError::Invalid(format!("pca needs at least 2 rows, got {}", rows.len())));
    }
    let n = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(ProfileError::Dimension { expected: n, got: bad.len() });
    }
    if k == 0 || k > n {
        return Err(ProfileError::Invalid(format!("k must be in 1..={n}, got {k}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ProfileError::Invalid("non-finite value in data".into()));
    }
    let m = rows.len() as f64;
    let mean: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m).collect();
    let centered = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (m - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let largest = eig.eigenvalues[order[0]].max(0.0);
    let clean = |v: f64| if v <= largest * RANK_TOLERANCE { 0.0 } else { v };
    let total: f64 = order.iter().map(|&i| clean(eig.eigenvalues[i])).sum();

    let mut components = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        variances.push(clean(eig.eigenvalues[i]));
    }
    let explained_variance =
        variances.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect();
    Ok(PcaModel { mean, components, variances, explained_variance })
}
