use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSelection {
    /// Selected rank, `1 ≤ k ≤ n`.
    pub k: usize,
    /// Cumulative explained variance `Σ_{i≤j} σᵢ² / Σ σᵢ²` for `j = 1..n`.
    pub cum_ratios: Vec<f64>,
}

/// Smallest number of leading singular values whose cumulative explained
/// variance reaches `t_mu`, clamped to `[1, n]`. An all-zero spectrum gets `k = 1`.
pub fn select_rank(sigma: &[f64], t_mu: f64) -> Result<RankSelection> {
    if sigma.is_empty() {
        return Err(Error::InvalidInput("empty singular value list".into()));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidInput("singular values must be finite and non-negative".into()));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("singular values must be non-increasing".into()));
    }
    if !(0.0..=1.0).contains(&t_mu) {
        return Err(Error::InvalidInput(format!("threshold {t_mu} outside [0, 1]")));
    }

    let mut partial = Vec::with_capacity(sigma.len());
    let mut acc = 0.0;
    for s in sigma {
        acc += s * s;
        partial.push(acc);
    }
    let total = acc;
    if total == 0.0 {
        return Ok(RankSelection { k: 1, cum_ratios: vec![0.0; sigma.len()] });
    }
    let cum_ratios: Vec<f64> = partial.iter().map(|p| p / total).collect();
    let k = cum_ratios.iter().position(|&r| r >= t_mu).map_or(sigma.len(), |j| j + 1);
    Ok(RankSelection { k: k.clamp(1, sigma.len()), cum_ratios })
}
