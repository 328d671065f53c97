//! Block-model parametrization: group priors, affinity matrices, and the
//! two-parameter family of unequal-group models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Prior probabilities of group membership, `gamma[a] = Pr[s_i = a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrior {
    gamma: Vec<f64>,
}

impl GroupPrior {
    /// Validates and wraps a prior. Entries must lie strictly in (0, 1) and
    /// sum to 1 within 1e-12; at least two groups.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() < 2 {
            return Err(Error::invalid(format!(
                "group prior needs q >= 2 groups, got {}",
                gamma.len()
            )));
        }
        for (a, &g) in gamma.iter().enumerate() {
            if !(g > 0.0 && g < 1.0) || !g.is_finite() {
                return Err(Error::invalid(format!(
                    "group prior entry {} for group {} is not in (0, 1)",
                    g,
                    a + 1
                )));
            }
        }
        let sum: f64 = gamma.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!(
                "group prior sums to {sum}, expected 1 within {SUM_TOL:e}"
            )));
        }
        Ok(GroupPrior { gamma })
    }

    pub fn q(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Expected size of the community containing a randomly chosen node,
    /// `sum_a gamma_a^2`. This is the chance level of the marginal overlap.
    pub fn gamma_bar(&self) -> f64 {
        self.gamma.iter().map(|g| g * g).sum()
    }

    /// Largest group fraction, `max_a gamma_a`; the chance level of the
    /// argmax overlap for structureless marginals.
    pub fn max_gamma(&self) -> f64 {
        self.gamma.iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// The equally spaced offset scheme `zeta_a = a - (q+1)/2`, centered by
/// construction.
pub fn equally_spaced_offsets(q: usize) -> Vec<f64> {
    (1..=q).map(|a| a as f64 - 0.5 * (q as f64 + 1.0)).collect()
}

/// Group fractions `gamma_a = (1 + delta * zeta_a) / q` for a centered offset
/// vector `zeta`. `delta` controls how far the sizes are from equal.
pub fn group_sizes(q: usize, delta: f64, zeta: &[f64]) -> Result<GroupPrior> {
    if zeta.len() != q {
        return Err(Error::invalid(format!(
            "offset vector has length {}, expected q = {q}",
            zeta.len()
        )));
    }
    let zsum: f64 = zeta.iter().sum();
    if zsum.abs() > SUM_TOL {
        return Err(Error::invalid(format!(
            "offsets must sum to zero, got {zsum}"
        )));
    }
    let mut gamma = Vec::with_capacity(q);
    for (a, &z) in zeta.iter().enumerate() {
        let g = (1.0 + delta * z) / q as f64;
        if g <= 0.0 {
            return Err(Error::invalid(format!(
                "group {} has nonpositive size {g} (delta = {delta}, zeta = {z})",
                a + 1
            )));
        }
        gamma.push(g);
    }
    GroupPrior::new(gamma)
}

/// Scaled edge intensities `c_ab`; the edge probability at size `n` is
/// `p_ab = c_ab / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    q: usize,
    c: Vec<f64>, // row-major q x q
}

impl AffinityMatrix {
    /// Validates a symmetric nonnegative matrix given in row-major order.
    pub fn new(q: usize, c: Vec<f64>) -> Result<Self> {
        if q == 0 || c.len() != q * q {
            return Err(Error::invalid(format!(
                "affinity matrix needs {q}x{q} = {} entries, got {}",
                q * q,
                c.len()
            )));
        }
        for (idx, &v) in c.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "affinity entry ({}, {}) = {v} must be finite and >= 0",
                    idx / q + 1,
                    idx % q + 1
                )));
            }
        }
        for a in 0..q {
            for b in (a + 1)..q {
                if c[a * q + b] != c[b * q + a] {
                    return Err(Error::invalid(format!(
                        "affinity matrix is not symmetric at ({}, {})",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        Ok(AffinityMatrix { q, c })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.c[a * self.q + b]
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.c[a * self.q..(a + 1) * self.q]
    }

    pub fn entries(&self) -> &[f64] {
        &self.c
    }

    pub fn max_entry(&self) -> f64 {
        self.c.iter().cloned().fold(0.0, f64::max)
    }

    /// Per-group expected degrees `c_a = sum_b c_ab gamma_b`.
    pub fn group_degrees(&self, prior: &GroupPrior) -> Vec<f64> {
        let gamma = prior.gamma();
        (0..self.q)
            .map(|a| self.row(a).iter().zip(gamma).map(|(c, g)| c * g).sum())
            .collect()
    }
}

/// Affinity with `c_in` on the diagonal and `c_out` off it, fixed by the mean
/// degree `c` and the structure strength `epsilon = c_in - c_out`:
/// `c_in = c + (1 - gamma_bar) epsilon`, `c_out = c - gamma_bar * epsilon`.
pub fn affinity_from_strength(c: f64, epsilon: f64, prior: &GroupPrior) -> Result<AffinityMatrix> {
    let gb = prior.gamma_bar();
    let c_in = c + (1.0 - gb) * epsilon;
    let c_out = c - gb * epsilon;
    if c_out < 0.0 {
        return Err(Error::invalid(format!(
            "implied c_out = {c_out} < 0 (c = {c}, epsilon = {epsilon})"
        )));
    }
    if c_in < 0.0 {
        return Err(Error::invalid(format!(
            "implied c_in = {c_in} < 0 (c = {c}, epsilon = {epsilon})"
        )));
    }
    let q = prior.q();
    let mut m = vec![c_out; q * q];
    for a in 0..q {
        m[a * q + a] = c_in;
    }
    AffinityMatrix::new(q, m)
}

/// Fully disassortative affinity: zero diagonal, off-diagonal
/// `c_out = c / (1 - gamma_bar)` so that the mean degree is `c`.
pub fn disassortative_affinity(c: f64, prior: &GroupPrior) -> Result<AffinityMatrix> {
    let gb = prior.gamma_bar();
    if gb >= 1.0 {
        return Err(Error::invalid(
            "disassortative affinity requires gamma_bar < 1 (degenerate single group)",
        ));
    }
    let c_out = c / (1.0 - gb);
    let q = prior.q();
    let mut m = vec![c_out; q * q];
    for a in 0..q {
        m[a * q + a] = 0.0;
    }
    AffinityMatrix::new(q, m)
}

/// Full generative parameter set for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub n: usize,
    pub prior: GroupPrior,
    pub affinity: AffinityMatrix,
}

impl BlockModelSpec {
    pub fn new(n: usize, prior: GroupPrior, affinity: AffinityMatrix) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("network size n must be >= 1"));
        }
        if prior.q() != affinity.q() {
            return Err(Error::invalid(format!(
                "prior has q = {} but affinity has q = {}",
                prior.q(),
                affinity.q()
            )));
        }
        // c_ab <= n (p_ab <= 1) is enforced where c/n is read as a
        // probability: sampling and the Bernoulli oracle
        Ok(BlockModelSpec { n, prior, affinity })
    }

    pub fn q(&self) -> usize {
        self.prior.q()
    }
}

/// Per-group expected degrees and the overall mean degree,
/// `c_a = sum_b c_ab gamma_b` and `c = sum_a gamma_a c_a`.
pub fn degree_profile(spec: &BlockModelSpec) -> (Vec<f64>, f64) {
    let ca = spec.affinity.group_degrees(&spec.prior);
    let c = ca
        .iter()
        .zip(spec.prior.gamma())
        .map(|(ca, g)| ca * g)
        .sum();
    (ca, c)
}

/// Two-parameter family of unequal-group models: mean degree `c`, structure
/// strength `epsilon = c_in - c_out`, asymmetry `delta` acting through
/// centered offsets `zeta` (equally spaced when `zeta` is `None`).
///
/// With `disassortative` set, the diagonal is pinned to zero and `epsilon`
/// is implied by `c` (`epsilon = -c / (1 - gamma_bar)`); the `epsilon`
/// field is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricFamily {
    pub q: usize,
    pub c: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
    #[serde(default)]
    pub disassortative: bool,
}

impl SymmetricFamily {
    pub fn prior(&self) -> Result<GroupPrior> {
        match &self.zeta {
            Some(z) => group_sizes(self.q, self.delta, z),
            None => group_sizes(self.q, self.delta, &equally_spaced_offsets(self.q)),
        }
    }

    /// Effective structure strength; for the disassortative case this is
    /// `-c_out` since `c_in = 0`.
    pub fn effective_epsilon(&self) -> Result<f64> {
        if self.disassortative {
            let gb = self.prior()?.gamma_bar();
            Ok(-self.c / (1.0 - gb))
        } else {
            Ok(self.epsilon)
        }
    }

    pub fn resolve(&self) -> Result<(GroupPrior, AffinityMatrix)> {
        let prior = self.prior()?;
        let affinity = if self.disassortative {
            disassortative_affinity(self.c, &prior)?
        } else {
            affinity_from_strength(self.c, self.epsilon, &prior)?
        };
        Ok((prior, affinity))
    }

    pub fn spec_for(&self, n: usize) -> Result<BlockModelSpec> {
        let (prior, affinity) = self.resolve()?;
        BlockModelSpec::new(n, prior, affinity)
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }
}
