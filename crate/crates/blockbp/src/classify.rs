//! Closed-form Bayes-optimal local classifiers.
//!
//! On a sparse block-model network the degree of a group-`a` node is Poisson
//! with mean `c_a`, and a neighbor's excess degree is Poisson with mean
//! `c_b` given its group `b`. Conditioning on data within radius 1 or 2 of a
//! node therefore has a closed form:
//!
//! * radius 1: `mu_a^i ~ gamma_a e^{-c_a} c_a^{d_i}` — the posterior given
//!   the node's own degree;
//! * radius 2: `mu_a^i ~ gamma_a e^{-c_a} prod_{k in N(i)} sum_b gamma_b
//!   c_ab e^{-c_b} c_b^{d_k - 1}` — the posterior given the node's degree
//!   and its neighbors' degrees.
//!
//! These coincide with one and two synchronous message-passing rounds from
//! prior-initialized messages (`bp::run_finite`). Factorials cancel under
//! normalization and are omitted; everything is computed in the log domain.

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::model::GroupPrior;

/// Per-node posterior over groups from a bounded-radius neighborhood.
#[derive(Debug, Clone)]
pub struct LocalPosterior {
    pub radius: u8,
    q: usize,
    rows: Vec<f64>,
}

impl LocalPosterior {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.q..(i + 1) * self.q]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }
}

/// `log(base^exp)` with the convention `0^0 = 1` (zero affinities with
/// degree zero carry no evidence).
#[inline]
fn pow_log(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        0.0
    } else if base == 0.0 {
        f64::NEG_INFINITY
    } else {
        exp as f64 * base.ln()
    }
}

fn normalize_log_row(node: usize, log_u: &[f64], out: &mut [f64]) -> Result<()> {
    let mx = log_u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return Err(Error::DegenerateMarginal { node });
    }
    let mut z = 0.0;
    for (o, &l) in out.iter_mut().zip(log_u) {
        *o = (l - mx).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    Ok(())
}

/// Bayes-optimal classification from node degrees alone:
/// `Pr[s_i = a | d_i] ~ gamma_a e^{-c_a} c_a^{d_i}`.
pub fn degree_classifier(
    net: &Network,
    prior: &GroupPrior,
    group_degrees: &[f64],
) -> Result<LocalPosterior> {
    let q = prior.q();
    let log_gamma: Vec<f64> = prior.gamma().iter().map(|g| g.ln()).collect();
    let mut rows = vec![0.0; net.n() * q];
    let mut log_u = vec![0.0; q];
    for i in 0..net.n() {
        let d = net.degree(i);
        for a in 0..q {
            log_u[a] = log_gamma[a] - group_degrees[a] + pow_log(group_degrees[a], d);
        }
        normalize_log_row(i, &log_u, &mut rows[i * q..(i + 1) * q])?;
    }
    Ok(LocalPosterior { radius: 1, q, rows })
}

/// First-order cavity messages: one vector per node, identical toward every
/// neighbor, `mu_a^{i->.} ~ gamma_a e^{-c_a} c_a^{d_i - 1}` (exponent 0 for
/// degree-0 and degree-1 nodes).
pub fn first_order_messages(
    net: &Network,
    prior: &GroupPrior,
    group_degrees: &[f64],
) -> Result<Vec<f64>> {
    let q = prior.q();
    let log_gamma: Vec<f64> = prior.gamma().iter().map(|g| g.ln()).collect();
    let mut rows = vec![0.0; net.n() * q];
    let mut log_u = vec![0.0; q];
    for i in 0..net.n() {
        let d = net.degree(i).saturating_sub(1);
        for a in 0..q {
            log_u[a] = log_gamma[a] - group_degrees[a] + pow_log(group_degrees[a], d);
        }
        normalize_log_row(i, &log_u, &mut rows[i * q..(i + 1) * q])?;
    }
    Ok(rows)
}

/// Bayes-optimal classification from a node's degree and its neighbors'
/// degrees (radius-2 neighborhood).
pub fn radius2_classifier(
    net: &Network,
    prior: &GroupPrior,
    affinity: &crate::model::AffinityMatrix,
    group_degrees: &[f64],
) -> Result<LocalPosterior> {
    let q = prior.q();
    let gamma = prior.gamma();
    let log_gamma: Vec<f64> = gamma.iter().map(|g| g.ln()).collect();

    // neighbor contribution g_a(d) = sum_b gamma_b c_ab e^{-c_b} c_b^{d-1},
    // memoized over the distinct degrees present
    let max_deg = (0..net.n()).map(|i| net.degree(i)).max().unwrap_or(0);
    let mut table = vec![f64::NAN; (max_deg + 1) * q];
    let g_log = |d: usize, table: &mut Vec<f64>| {
        if table[d * q].is_nan() {
            for a in 0..q {
                let mut acc = 0.0;
                for b in 0..q {
                    let w = pow_log(group_degrees[b], d.saturating_sub(1));
                    if w == f64::NEG_INFINITY {
                        continue;
                    }
                    acc += gamma[b] * affinity.get(a, b) * (-group_degrees[b]).exp() * w.exp();
                }
                table[d * q + a] = if acc > 0.0 {
                    acc.ln()
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
    };

    let mut rows = vec![0.0; net.n() * q];
    let mut log_u = vec![0.0; q];
    for i in 0..net.n() {
        for a in 0..q {
            log_u[a] = log_gamma[a] - group_degrees[a];
        }
        for &k in net.neighbors(i) {
            let dk = net.degree(k as usize);
            g_log(dk, &mut table);
            for a in 0..q {
                log_u[a] += table[dk * q + a];
            }
        }
        normalize_log_row(i, &log_u, &mut rows[i * q..(i + 1) * q])?;
    }
    Ok(LocalPosterior { radius: 2, q, rows })
}
