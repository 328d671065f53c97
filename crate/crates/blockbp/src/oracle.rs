//! Brute-force exact posterior on small instances, the ground truth for
//! message-passing and free-energy tests.
//!
//! Assignments are enumerated in mixed-radix order with incremental weight
//! updates per changed digit; weights are tracked in the log domain with an
//! explicit zero-factor count so hard constraints (zero affinities) stay
//! exact. Two passes: the first finds the maximum log-weight for a safe
//! exponential shift, the second accumulates the evidence and marginals.

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::model::BlockModelSpec;

const ENUM_CAP: f64 = 1e7;

/// Joint weight assigned to a group configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightModel {
    /// `prod_i gamma_{s_i} * prod_{(ij) in E} c_{s_i s_j}`. Matches the
    /// message-passing weight model with the non-edge field disabled; exact
    /// comparisons on trees use this.
    TreeOnly,
    /// TreeOnly times `prod_{i<j} exp(-c_{s_i s_j}/n)` over all pairs, the
    /// mean-field non-edge treatment.
    Poissonized,
    /// The generative model itself:
    /// `prod_i gamma_{s_i} * prod_{(ij) in E} (c/n) * prod_{(ij) not in E} (1 - c/n)`.
    Bernoulli,
}

struct Enumerator<'a> {
    net: &'a Network,
    spec: &'a BlockModelSpec,
    model: WeightModel,
    labels: Vec<usize>,
    /// Sum of all finite log factors for the current assignment.
    logw: f64,
    /// Number of exactly-zero factors; the weight is positive iff 0.
    zero_factors: u32,
    log_gamma: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    fn new(net: &'a Network, spec: &'a BlockModelSpec, model: WeightModel) -> Self {
        let log_gamma = spec.prior.gamma().iter().map(|g| g.ln()).collect();
        let mut e = Enumerator {
            net,
            spec,
            model,
            labels: vec![0; net.n()],
            logw: 0.0,
            zero_factors: 0,
            log_gamma,
        };
        e.recompute();
        e
    }

    fn edge_factor(&self, a: usize, b: usize) -> f64 {
        let c = self.spec.affinity.get(a, b);
        match self.model {
            WeightModel::TreeOnly | WeightModel::Poissonized => c,
            WeightModel::Bernoulli => c / self.spec.n as f64,
        }
    }

    fn add_factor(&mut self, v: f64, sign: f64) {
        if v == 0.0 {
            if sign > 0.0 {
                self.zero_factors += 1;
            } else {
                self.zero_factors -= 1;
            }
        } else {
            self.logw += sign * v.ln();
        }
    }

    /// Full recomputation of the weight for the current labels.
    fn recompute(&mut self) {
        self.logw = 0.0;
        self.zero_factors = 0;
        let n = self.net.n();
        for i in 0..n {
            self.logw += self.log_gamma[self.labels[i]];
        }
        for &(i, j) in self.net.edges() {
            let f = self.edge_factor(self.labels[i as usize], self.labels[j as usize]);
            self.add_factor(f, 1.0);
        }
        match self.model {
            WeightModel::TreeOnly => {}
            WeightModel::Poissonized => {
                let inv_n = 1.0 / self.spec.n as f64;
                for i in 0..n {
                    for j in (i + 1)..n {
                        self.logw -=
                            self.spec.affinity.get(self.labels[i], self.labels[j]) * inv_n;
                    }
                }
            }
            WeightModel::Bernoulli => {
                let inv_n = 1.0 / self.spec.n as f64;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if !self.net.has_edge(i, j) {
                            let f =
                                1.0 - self.spec.affinity.get(self.labels[i], self.labels[j]) * inv_n;
                            self.add_factor(f, 1.0);
                        }
                    }
                }
            }
        }
    }

    /// Incremental update: change digit `i` to `new`.
    fn set_digit(&mut self, i: usize, new: usize) {
        let old = self.labels[i];
        if old == new {
            return;
        }
        self.logw += self.log_gamma[new] - self.log_gamma[old];
        for &j in self.net.neighbors(i) {
            let sj = self.labels[j as usize];
            self.add_factor(self.edge_factor(old, sj), -1.0);
            self.add_factor(self.edge_factor(new, sj), 1.0);
        }
        match self.model {
            WeightModel::TreeOnly => {}
            WeightModel::Poissonized => {
                let inv_n = 1.0 / self.spec.n as f64;
                for j in 0..self.net.n() {
                    if j == i {
                        continue;
                    }
                    let sj = self.labels[j];
                    self.logw -= (self.spec.affinity.get(new, sj)
                        - self.spec.affinity.get(old, sj))
                        * inv_n;
                }
            }
            WeightModel::Bernoulli => {
                let inv_n = 1.0 / self.spec.n as f64;
                let mut nbrs = self.net.neighbors(i).iter().peekable();
                for j in 0..self.net.n() {
                    if j == i {
                        continue;
                    }
                    if let Some(&&k) = nbrs.peek() {
                        if k as usize == j {
                            nbrs.next();
                            continue; // edge pair already handled
                        }
                    }
                    let sj = self.labels[j];
                    self.add_factor(1.0 - self.spec.affinity.get(old, sj) * inv_n, -1.0);
                    self.add_factor(1.0 - self.spec.affinity.get(new, sj) * inv_n, 1.0);
                }
            }
        }
        self.labels[i] = new;
    }

    /// Advances to the next assignment (little-endian mixed radix).
    /// Returns false after the last one.
    fn advance(&mut self) -> bool {
        let q = self.spec.q();
        for i in 0..self.net.n() {
            let cur = self.labels[i];
            if cur + 1 < q {
                self.set_digit(i, cur + 1);
                return true;
            }
            self.set_digit(i, 0);
        }
        false
    }

    fn positive(&self) -> bool {
        self.zero_factors == 0
    }
}

fn check_cap(net: &Network, spec: &BlockModelSpec, model: WeightModel) -> Result<()> {
    let states = (net.q() as f64).powi(net.n() as i32);
    if states > ENUM_CAP {
        return Err(Error::InstanceTooLarge {
            states,
            cap: ENUM_CAP,
        });
    }
    if model == WeightModel::Bernoulli && spec.affinity.max_entry() > spec.n as f64 {
        return Err(Error::invalid(format!(
            "Bernoulli weights need c_ab <= n, got {} at n = {}",
            spec.affinity.max_entry(),
            spec.n
        )));
    }
    Ok(())
}

/// Exact posterior marginals and log evidence under the given weight model.
/// Enforces `q^n <= 1e7`.
pub fn exact_posterior(
    net: &Network,
    spec: &BlockModelSpec,
    model: WeightModel,
) -> Result<(Vec<f64>, f64)> {
    check_cap(net, spec, model)?;
    let n = net.n();
    let q = net.q();

    // pass 1: maximum log-weight over positive assignments
    let mut e = Enumerator::new(net, spec, model);
    let mut max_logw = f64::NEG_INFINITY;
    loop {
        if e.positive() && e.logw > max_logw {
            max_logw = e.logw;
        }
        if !e.advance() {
            break;
        }
    }
    if max_logw == f64::NEG_INFINITY {
        return Err(Error::ZeroEvidence);
    }

    // pass 2: shifted accumulation of evidence and marginals
    let mut e = Enumerator::new(net, spec, model);
    let mut total = 0.0;
    let mut acc = vec![0.0; n * q];
    loop {
        if e.positive() {
            let w = (e.logw - max_logw).exp();
            total += w;
            for (i, &s) in e.labels.iter().enumerate() {
                acc[i * q + s] += w;
            }
        }
        if !e.advance() {
            break;
        }
    }
    for v in acc.iter_mut() {
        *v /= total;
    }
    Ok((acc, max_logw + total.ln()))
}

/// Exact per-node posterior marginals.
pub fn exact_marginals(
    net: &Network,
    spec: &BlockModelSpec,
    model: WeightModel,
) -> Result<Vec<f64>> {
    exact_posterior(net, spec, model).map(|(m, _)| m)
}

/// Log of the total weight over all assignments.
pub fn exact_log_evidence(net: &Network, spec: &BlockModelSpec, model: WeightModel) -> Result<f64> {
    exact_posterior(net, spec, model).map(|(_, z)| z)
}
