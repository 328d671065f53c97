//! Belief-propagation (cavity) inference on block-model networks.
//!
//! Messages live on directed edges; each message is a length-q distribution
//! over the sender's group. The update for the message from `i` to `j` is
//!
//! ```text
//! mu_a^{i->j} ~ gamma_a * exp(-h_a) * prod_{k in N(i)\j} sum_b c_ab mu_b^{k->i}
//! ```
//!
//! where `h_a = (1/n) sum_k sum_b c_ab mu_b^k` is a mean-field term carrying
//! the constraint from all non-edges. Node marginals use the same product
//! over the full neighborhood.
//!
//! Two schedules are provided. `run_to_convergence` sweeps asynchronously in
//! a seeded random node order, maintaining the field incrementally (fully
//! recomputed at the start of every sweep to cap drift). `run_finite`
//! performs exactly `t` synchronous rounds with the field frozen at its
//! initialization value, so that the step-`t` output of a node is a pure
//! function of its radius-`t` neighborhood; this is the mode whose step-1
//! and step-2 marginals coincide with the closed-form local classifiers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::model::AffinityMatrix;
use crate::seed::derive_seed;

/// Initial condition for the message iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every entry i.i.d. uniform on (0,1), then normalized per message.
    Random(u64),
    /// Every message equal to the group prior.
    Prior,
    /// Messages concentrated on the planted labels, `mu_a = [a == s_i]`.
    Planted,
}

/// Options for convergence runs.
#[derive(Debug, Clone, Copy)]
pub struct BpOptions {
    /// Convergence criterion: mean absolute per-entry message change per sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Multiply messages by `exp(-h_a)` (mean-field treatment of non-edges).
    /// Disabling selects the pure-tree weight model used for exactness tests.
    pub nonedge_field: bool,
    /// Optional damping factor in [0,1): new = (1-d)*fresh + d*old.
    /// Diagnostics only; off by default since it distorts convergence times.
    pub damping: Option<f64>,
    /// Seed for the per-sweep node visit permutations.
    pub order_seed: u64,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            tol: 1e-6,
            max_sweeps: 2000,
            nonedge_field: true,
            damping: None,
            order_seed: 0,
        }
    }
}

/// Messages, marginals, and the external field for one inference run.
#[derive(Debug, Clone)]
pub struct MessageSet {
    q: usize,
    /// Directed messages, slot-major: entry `s*q + a`.
    msgs: Vec<f64>,
    /// Node marginals, node-major: entry `i*q + a`.
    marginals: Vec<f64>,
    /// Mean marginal per group, `(1/n) sum_i mu_a^i`.
    mbar: Vec<f64>,
    /// External field `h_a = sum_b c_ab mbar_b`.
    field: Vec<f64>,
    nonedge_field: bool,
}

impl MessageSet {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn message(&self, slot: usize) -> &[f64] {
        &self.msgs[slot * self.q..(slot + 1) * self.q]
    }

    pub fn marginal(&self, node: usize) -> &[f64] {
        &self.marginals[node * self.q..(node + 1) * self.q]
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn nonedge_field(&self) -> bool {
        self.nonedge_field
    }

    /// Replaces messages and marginals wholesale; used when carrying a state
    /// onto an edited network. Lengths must match the new layout.
    pub(crate) fn set_messages_and_marginals(&mut self, msgs: Vec<f64>, marginals: Vec<f64>) {
        assert_eq!(msgs.len() % self.q, 0);
        assert_eq!(marginals.len(), self.marginals.len());
        self.msgs = msgs;
        self.marginals = marginals;
    }

    /// Recomputes `mbar` and the field from the current marginals.
    pub fn refresh_field(&mut self, net: &Network) {
        let q = self.q;
        let n = net.n();
        for b in 0..q {
            self.mbar[b] = 0.0;
        }
        for i in 0..n {
            for b in 0..q {
                self.mbar[b] += self.marginals[i * q + b];
            }
        }
        for b in 0..q {
            self.mbar[b] /= n as f64;
        }
        let aff = &net.spec().affinity;
        for a in 0..q {
            self.field[a] = aff.row(a).iter().zip(&self.mbar).map(|(c, m)| c * m).sum();
        }
    }
}

/// External field `h_a = sum_b c_ab m_b` with `m_b` the average of the given
/// node marginals (node-major, length n*q).
pub fn compute_field(marginals: &[f64], affinity: &AffinityMatrix, n: usize) -> Vec<f64> {
    let q = affinity.q();
    let mut mbar = vec![0.0; q];
    for chunk in marginals.chunks_exact(q) {
        for (m, &v) in mbar.iter_mut().zip(chunk) {
            *m += v;
        }
    }
    for m in mbar.iter_mut() {
        *m /= n as f64;
    }
    (0..q)
        .map(|a| affinity.row(a).iter().zip(&mbar).map(|(c, m)| c * m).sum())
        .collect()
}

/// Initializes messages, marginals, and field for the given mode.
pub fn init_messages(net: &Network, mode: InitMode) -> MessageSet {
    init_messages_with(net, mode, true)
}

pub fn init_messages_with(net: &Network, mode: InitMode, nonedge_field: bool) -> MessageSet {
    let q = net.q();
    let n = net.n();
    let nd = net.num_directed();
    let mut msgs = vec![0.0; nd * q];
    let mut marginals = vec![0.0; n * q];

    match mode {
        InitMode::Prior => {
            let gamma = net.spec().prior.gamma();
            for chunk in msgs.chunks_exact_mut(q) {
                chunk.copy_from_slice(gamma);
            }
            for chunk in marginals.chunks_exact_mut(q) {
                chunk.copy_from_slice(gamma);
            }
        }
        InitMode::Planted => {
            for i in 0..n {
                let s = net.planted()[i] as usize;
                marginals[i * q + s] = 1.0;
                for slot in net.slots(i) {
                    msgs[slot * q + s] = 1.0;
                }
            }
        }
        InitMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut fill = |chunk: &mut [f64]| {
                let mut sum = 0.0;
                for v in chunk.iter_mut() {
                    *v = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    sum += *v;
                }
                for v in chunk.iter_mut() {
                    *v /= sum;
                }
            };
            for chunk in msgs.chunks_exact_mut(q) {
                fill(chunk);
            }
            for chunk in marginals.chunks_exact_mut(q) {
                fill(chunk);
            }
        }
    }

    let mut state = MessageSet {
        q,
        msgs,
        marginals,
        mbar: vec![0.0; q],
        field: vec![0.0; q],
        nonedge_field,
    };
    state.refresh_field(net);
    state
}

// Scratch buffers reused across node updates within a sweep.
struct Scratch {
    /// Per-neighbor factor rows `f_a^{k->i} = sum_b c_ab mu_b^{k->i}`.
    factors: Vec<f64>,
    /// Product of nonzero factors per group.
    prod: Vec<f64>,
    /// Count of exactly-zero factors per group.
    zeros: Vec<u32>,
    /// `gamma_a * exp(-h_a)` prefactor.
    pref: Vec<f64>,
    out: Vec<f64>,
}

impl Scratch {
    fn new(q: usize) -> Self {
        Scratch {
            factors: Vec::new(),
            prod: vec![1.0; q],
            zeros: vec![0; q],
            pref: vec![0.0; q],
            out: vec![0.0; q],
        }
    }
}

const RESCALE_HI: f64 = 1e150;
const RESCALE_LO: f64 = 1e-150;

/// Computed message and marginal entries are floored here after
/// normalization. Hard constraints (zero affinities) drive forbidden-color
/// entries to zero super-geometrically, and exact zeros reached during a
/// transient would freeze into globally inconsistent indicator messages and
/// collapse later normalizers. The floor keeps the transient alive without
/// masking structural degeneracy: a normalizer that is exactly zero (as with
/// indicator initializations on an uncolorable instance) still errors before
/// any flooring applies.
const ENTRY_FLOOR: f64 = 1e-100;

/// Computes the incoming factor rows for node `i` and their zero-aware
/// product. Only ratios across groups matter downstream, so the product is
/// rescaled by a common factor whenever it drifts out of range.
fn gather_factors(
    net: &Network,
    msgs: &[f64],
    aff: &AffinityMatrix,
    i: usize,
    sc: &mut Scratch,
) {
    let q = aff.q();
    let slots = net.slots(i);
    let deg = slots.len();
    sc.factors.resize(deg * q, 0.0);
    sc.prod.fill(1.0);
    sc.zeros.fill(0);
    for (local, s) in slots.enumerate() {
        let rev = net.reverse(s);
        let incoming = &msgs[rev * q..rev * q + q];
        let row = &mut sc.factors[local * q..local * q + q];
        for a in 0..q {
            let mut f = 0.0;
            let crow = aff.row(a);
            for b in 0..q {
                f += crow[b] * incoming[b];
            }
            row[a] = f;
            if f == 0.0 {
                sc.zeros[a] += 1;
            } else {
                sc.prod[a] *= f;
            }
        }
        if local % 32 == 31 {
            rescale(&mut sc.prod);
        }
    }
    rescale(&mut sc.prod);
}

fn rescale(prod: &mut [f64]) {
    let m = prod.iter().cloned().fold(0.0, f64::max);
    if m > RESCALE_HI {
        for p in prod.iter_mut() {
            *p *= RESCALE_LO;
        }
    } else if m > 0.0 && m < RESCALE_LO {
        for p in prod.iter_mut() {
            *p *= RESCALE_HI;
        }
    }
}

/// One asynchronous sweep: nodes visited in a seeded random permutation; for
/// each node, the marginal is refreshed, the field adjusted incrementally,
/// and all outgoing messages recomputed from the current incoming ones.
/// Returns the mean absolute change over all message entries.
pub fn bp_sweep(state: &mut MessageSet, net: &Network, order_seed: u64) -> Result<f64> {
    let n = net.n();
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(order_seed);
    order.shuffle(&mut rng);
    sweep_in_order(state, net, &order, None)
}

fn sweep_in_order(
    state: &mut MessageSet,
    net: &Network,
    order: &[u32],
    damping: Option<f64>,
) -> Result<f64> {
    let q = state.q;
    let aff = &net.spec().affinity;
    let gamma = net.spec().prior.gamma();
    let n = net.n() as f64;
    let mut sc = Scratch::new(q);
    let mut total_change = 0.0;

    for &iu in order {
        let i = iu as usize;
        gather_factors(net, &state.msgs, aff, i, &mut sc);

        for a in 0..q {
            let eh = if state.nonedge_field {
                (-state.field[a]).exp()
            } else {
                1.0
            };
            sc.pref[a] = gamma[a] * eh;
        }

        // marginal from the full product
        let mut z = 0.0;
        for a in 0..q {
            let u = if sc.zeros[a] == 0 {
                sc.pref[a] * sc.prod[a]
            } else {
                0.0
            };
            sc.out[a] = u;
            z += u;
        }
        if z == 0.0 {
            return Err(Error::DegenerateMarginal { node: i });
        }
        // update marginal, mbar, and field incrementally
        {
            let marg = &mut state.marginals[i * q..i * q + q];
            for a in 0..q {
                let new = (sc.out[a] / z).max(ENTRY_FLOOR);
                state.mbar[a] += (new - marg[a]) / n;
                marg[a] = new;
            }
        }
        for a in 0..q {
            let mut h = 0.0;
            let crow = aff.row(a);
            for b in 0..q {
                h += crow[b] * state.mbar[b];
            }
            state.field[a] = h;
            if state.nonedge_field {
                sc.pref[a] = gamma[a] * (-h).exp();
            }
        }

        // outgoing messages: divide the excluded neighbor's factor back out
        for (local, s) in net.slots(i).enumerate() {
            let mut z = 0.0;
            for a in 0..q {
                let f = sc.factors[local * q + a];
                let cavity = if f == 0.0 {
                    if sc.zeros[a] == 1 {
                        sc.prod[a]
                    } else {
                        0.0
                    }
                } else if sc.zeros[a] == 0 {
                    sc.prod[a] / f
                } else {
                    0.0
                };
                let u = sc.pref[a] * cavity;
                sc.out[a] = u;
                z += u;
            }
            if z == 0.0 {
                return Err(Error::DegenerateMessage {
                    src: i,
                    dst: net.slot_target(s),
                });
            }
            let msg = &mut state.msgs[s * q..s * q + q];
            match damping {
                None => {
                    for a in 0..q {
                        let new = (sc.out[a] / z).max(ENTRY_FLOOR);
                        total_change += (new - msg[a]).abs();
                        msg[a] = new;
                    }
                }
                Some(d) => {
                    for a in 0..q {
                        let new = ((1.0 - d) * (sc.out[a] / z) + d * msg[a]).max(ENTRY_FLOOR);
                        total_change += (new - msg[a]).abs();
                        msg[a] = new;
                    }
                }
            }
        }
    }

    let entries = (net.num_directed() * q) as f64;
    Ok(if entries > 0.0 {
        total_change / entries
    } else {
        0.0
    })
}

/// Convergence statistics for one run. `sweeps` is the convergence time.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConvergenceReport {
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
    pub log_likelihood: f64,
}

/// Iterates asynchronous sweeps until the residual drops to `tol` or
/// `max_sweeps` is reached.
pub fn run_to_convergence(
    net: &Network,
    mode: InitMode,
    opts: &BpOptions,
) -> Result<(MessageSet, ConvergenceReport)> {
    let state = init_messages_with(net, mode, opts.nonedge_field);
    run_from_state(net, state, opts)
}

/// Same as [`run_to_convergence`] but warm-starting from an existing state
/// (used by the adiabatic experiments).
pub fn run_from_state(
    net: &Network,
    mut state: MessageSet,
    opts: &BpOptions,
) -> Result<(MessageSet, ConvergenceReport)> {
    assert!(opts.tol > 0.0, "tolerance must be positive");
    let mut order: Vec<u32> = (0..net.n() as u32).collect();
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    let mut converged = false;
    for s in 0..opts.max_sweeps {
        state.refresh_field(net);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.order_seed, &[s as u64]));
        order.shuffle(&mut rng);
        residual = sweep_in_order(&mut state, net, &order, opts.damping)?;
        sweeps = s + 1;
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }
    let log_likelihood = log_likelihood(&state, net)?;
    Ok((
        state,
        ConvergenceReport {
            sweeps,
            residual,
            converged,
            log_likelihood,
        },
    ))
}

/// Performs exactly `t` synchronous rounds from the given initialization.
///
/// All round-`s` messages are computed from the round-`(s-1)` generation and
/// the field stays frozen at its initialization value, so the output at a
/// node depends only on its radius-`t` neighborhood. The marginals returned
/// are the round-`t` marginals, i.e. computed from the round-`(t-1)`
/// messages, matching the message/marginal pairing of a single update.
pub fn run_finite(net: &Network, mode: InitMode, t: usize) -> Result<MessageSet> {
    run_finite_with(net, mode, t, true)
}

pub fn run_finite_with(
    net: &Network,
    mode: InitMode,
    t: usize,
    nonedge_field: bool,
) -> Result<MessageSet> {
    let mut state = init_messages_with(net, mode, nonedge_field);
    let q = state.q;
    let aff = &net.spec().affinity;
    let gamma = net.spec().prior.gamma();
    let pref: Vec<f64> = (0..q)
        .map(|a| {
            let eh = if nonedge_field {
                (-state.field[a]).exp()
            } else {
                1.0
            };
            gamma[a] * eh
        })
        .collect();

    let mut next_msgs = state.msgs.clone();
    let mut sc = Scratch::new(q);
    for _ in 0..t {
        for i in 0..net.n() {
            gather_factors(net, &state.msgs, aff, i, &mut sc);

            let mut z = 0.0;
            for a in 0..q {
                let u = if sc.zeros[a] == 0 {
                    pref[a] * sc.prod[a]
                } else {
                    0.0
                };
                sc.out[a] = u;
                z += u;
            }
            if z == 0.0 {
                return Err(Error::DegenerateMarginal { node: i });
            }
            for a in 0..q {
                state.marginals[i * q + a] = (sc.out[a] / z).max(ENTRY_FLOOR);
            }

            for (local, s) in net.slots(i).enumerate() {
                let mut z = 0.0;
                for a in 0..q {
                    let f = sc.factors[local * q + a];
                    let cavity = if f == 0.0 {
                        if sc.zeros[a] == 1 {
                            sc.prod[a]
                        } else {
                            0.0
                        }
                    } else if sc.zeros[a] == 0 {
                        sc.prod[a] / f
                    } else {
                        0.0
                    };
                    let u = pref[a] * cavity;
                    sc.out[a] = u;
                    z += u;
                }
                if z == 0.0 {
                    return Err(Error::DegenerateMessage {
                        src: i,
                        dst: net.slot_target(s),
                    });
                }
                for a in 0..q {
                    next_msgs[s * q + a] = (sc.out[a] / z).max(ENTRY_FLOOR);
                }
            }
        }
        std::mem::swap(&mut state.msgs, &mut next_msgs);
    }
    Ok(state)
}

/// Joint group distribution of an adjacent pair,
/// `mu_ab = c_ab mu_a^{i->j} mu_b^{j->i} / Z_ij`, row-major.
pub fn edge_marginal(state: &MessageSet, net: &Network, i: usize, j: usize) -> Result<Vec<f64>> {
    let q = state.q;
    let s = net
        .slot_of(i, j)
        .ok_or_else(|| Error::invalid(format!("({i}, {j}) is not an edge")))?;
    let r = net.reverse(s);
    let mi = state.message(s);
    let mj = state.message(r);
    let aff = &net.spec().affinity;
    let mut out = vec![0.0; q * q];
    let mut z = 0.0;
    for a in 0..q {
        for b in 0..q {
            let v = aff.get(a, b) * mi[a] * mj[b];
            out[a * q + b] = v;
            z += v;
        }
    }
    if z == 0.0 {
        return Err(Error::DegenerateMessage { src: i, dst: j });
    }
    for v in out.iter_mut() {
        *v /= z;
    }
    Ok(out)
}

/// Converged log-likelihood (the negative Bethe free energy):
///
/// ```text
/// L = sum_i log Z_i - sum_{(ij) in E} log Z_ij + (1/n) sum_ab c_ab (sum_i mu_a^i)(sum_j mu_b^j)
/// ```
///
/// with `Z_i` the marginal normalizer and `Z_ij = sum_ab c_ab mu_a^{i->j}
/// mu_b^{j->i}`. The last term and the field factor inside `Z_i` are omitted
/// when the state was built with the non-edge field disabled; in that mode,
/// on a tree, `L` equals the exact log evidence of the edge-weight model.
/// Normalizers are accumulated in the log domain.
pub fn log_likelihood(state: &MessageSet, net: &Network) -> Result<f64> {
    let q = state.q;
    let aff = &net.spec().affinity;
    let gamma = net.spec().prior.gamma();
    let n = net.n();

    let field = if state.nonedge_field {
        compute_field(&state.marginals, aff, n)
    } else {
        vec![0.0; q]
    };

    let mut total = 0.0;
    let mut sc = Scratch::new(q);
    let mut log_terms = vec![0.0; q];
    for i in 0..n {
        gather_factors(net, &state.msgs, aff, i, &mut sc);
        // log Z_i = LSE_a [ log gamma_a - h_a + sum_k log f_a^k ]
        let mut any = false;
        for a in 0..q {
            if sc.zeros[a] > 0 {
                log_terms[a] = f64::NEG_INFINITY;
                continue;
            }
            // the running product is rescaled by common factors, so recover
            // the exact log by re-accumulating per-group factor logs
            let mut lf = 0.0;
            for local in 0..net.degree(i) {
                lf += sc.factors[local * q + a].ln();
            }
            log_terms[a] = gamma[a].ln() - field[a] + lf;
            any = true;
        }
        if !any {
            return Err(Error::DegenerateMarginal { node: i });
        }
        let mx = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = log_terms.iter().map(|&l| (l - mx).exp()).sum();
        total += mx + sum.ln();
    }

    // edge normalizers, each undirected edge once
    for i in 0..n {
        for s in net.slots(i) {
            let j = net.slot_target(s);
            if j <= i {
                continue;
            }
            let r = net.reverse(s);
            let mi = state.message(s);
            let mj = state.message(r);
            let mut z = 0.0;
            for a in 0..q {
                let crow = aff.row(a);
                let mut acc = 0.0;
                for b in 0..q {
                    acc += crow[b] * mj[b];
                }
                z += mi[a] * acc;
            }
            if z <= 0.0 {
                return Err(Error::DegenerateMessage { src: i, dst: j });
            }
            total -= z.ln();
        }
    }

    if state.nonedge_field {
        let mut mbar = vec![0.0; q];
        for chunk in state.marginals.chunks_exact(q) {
            for (m, &v) in mbar.iter_mut().zip(chunk) {
                *m += v;
            }
        }
        for m in mbar.iter_mut() {
            *m /= n as f64;
        }
        let mut quad = 0.0;
        for a in 0..q {
            for b in 0..q {
                quad += aff.get(a, b) * mbar[a] * mbar[b];
            }
        }
        total += n as f64 * quad;
    }

    Ok(total)
}
