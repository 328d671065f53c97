//! Overlap measures between planted and inferred structure.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::model::GroupPrior;

/// Overlap scores for one run, plus the weak-structure baselines.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct OverlapReport {
    /// Fraction of nodes whose argmax marginal equals the planted label.
    pub q_argmax: f64,
    /// Mean posterior mass on the planted label.
    pub q_marginal: f64,
    /// Argmax overlap maximized over group permutations.
    pub q_perm: f64,
    /// Weak-structure limit of the argmax overlap (all nodes in the largest
    /// group).
    pub baseline_q: f64,
    /// Weak-structure limit of the marginal overlap (gamma_bar).
    pub baseline_qmu: f64,
}

#[inline]
fn argmax_lowest_tie(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Fraction of nodes assigned to their planted group by the argmax rule.
/// Ties break toward the lowest group index.
pub fn overlap(marginals: &[f64], planted: &[u32]) -> f64 {
    let n = planted.len();
    let q = marginals.len() / n;
    let mut hits = 0usize;
    for (i, &s) in planted.iter().enumerate() {
        if argmax_lowest_tie(&marginals[i * q..(i + 1) * q]) == s as usize {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

/// Mean posterior mass placed on the planted label.
pub fn marginal_overlap(marginals: &[f64], planted: &[u32]) -> f64 {
    let n = planted.len();
    let q = marginals.len() / n;
    planted
        .iter()
        .enumerate()
        .map(|(i, &s)| marginals[i * q + s as usize])
        .sum::<f64>()
        / n as f64
}

/// Argmax overlap maximized over all `q!` group permutations (exhaustive;
/// limited to q <= 8). Reports the quality of a fixed point up to
/// relabeling of the groups.
pub fn permutation_max_overlap(marginals: &[f64], planted: &[u32], q: usize) -> Result<f64> {
    if q > 8 {
        return Err(Error::invalid(format!(
            "exhaustive permutation search limited to q <= 8, got {q}"
        )));
    }
    let n = planted.len();
    // confusion counts: assigned group x planted group
    let mut counts = vec![0u64; q * q];
    for (i, &s) in planted.iter().enumerate() {
        let a = argmax_lowest_tie(&marginals[i * q..(i + 1) * q]);
        counts[a * q + s as usize] += 1;
    }
    let best = (0..q)
        .permutations(q)
        .map(|perm| {
            // perm[s] = relabeled planted group s
            (0..q).map(|s| counts[perm[s] * q + s]).sum::<u64>()
        })
        .max()
        .unwrap_or(0);
    Ok(best as f64 / n as f64)
}

/// Weak-structure (epsilon -> 0) baselines for the two overlaps.
///
/// For the equally spaced size scheme these have closed forms
/// `Q = (1/q)(1 + (q-1) delta / 2)` and
/// `Q_mu = (1/q)(1 + (q^2-1) delta^2 / 12)`; for any other prior the exact
/// values `max_a gamma_a` and `gamma_bar` are returned.
pub fn weak_limits(q: usize, delta: f64, prior: &GroupPrior) -> (f64, f64) {
    let canonical = crate::model::group_sizes(q, delta, &crate::model::equally_spaced_offsets(q));
    let is_equally_spaced = match canonical {
        Ok(p) => p
            .gamma()
            .iter()
            .zip(prior.gamma())
            .all(|(a, b)| (a - b).abs() <= 1e-12),
        Err(_) => false,
    };
    if is_equally_spaced {
        let qf = q as f64;
        (
            (1.0 + 0.5 * (qf - 1.0) * delta) / qf,
            (1.0 + (qf * qf - 1.0) * delta * delta / 12.0) / qf,
        )
    } else {
        (prior.max_gamma(), prior.gamma_bar())
    }
}

/// Bundles all overlap measures for one marginal set.
pub fn overlap_report(
    marginals: &[f64],
    planted: &[u32],
    delta: f64,
    prior: &GroupPrior,
) -> Result<OverlapReport> {
    let q = prior.q();
    let (baseline_q, baseline_qmu) = weak_limits(q, delta, prior);
    Ok(OverlapReport {
        q_argmax: overlap(marginals, planted),
        q_marginal: marginal_overlap(marginals, planted),
        q_perm: permutation_max_overlap(marginals, planted, q)?,
        baseline_q,
        baseline_qmu,
    })
}
