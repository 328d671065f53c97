//! Adiabatic (warm-started) parameter trajectories.
//!
//! The network is edited minimally at each parameter step — per group pair,
//! the change in expected edge count is rounded stochastically and that many
//! edges are added at uniformly random absent pairs or deleted at uniformly
//! random present pairs, with labels held fixed — and the messages are
//! re-converged starting from the previous fixed point. Sweeping a parameter
//! down and then back up traces a hysteresis loop when two locally stable
//! fixed points coexist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::time::Instant;

use crate::bp::{init_messages_with, run_from_state, BpOptions, InitMode, MessageSet};
use crate::error::Result;
use crate::graph::Network;
use crate::metrics::overlap_report;
use crate::model::{BlockModelSpec, SymmetricFamily};
use crate::seed::derive_seed;
use crate::sweep::{AxisParam, InitKind, RunMode, RunRecord};

/// Expected edge count per unordered group pair (a <= b) for the given spec
/// and fixed label counts.
fn expected_counts(spec: &BlockModelSpec, group_count: &[u64]) -> Vec<Vec<f64>> {
    let q = spec.q();
    let n = spec.n as f64;
    let mut out = vec![vec![0.0; q]; q];
    for a in 0..q {
        for b in a..q {
            let pairs = if a == b {
                group_count[a] as f64 * (group_count[a] as f64 - 1.0) / 2.0
            } else {
                group_count[a] as f64 * group_count[b] as f64
            };
            out[a][b] = pairs * spec.affinity.get(a, b) / n;
        }
    }
    out
}

/// Minimally edits `net` so its edge counts track the expected counts of
/// `new_spec`. Returns the edited network and the number of edits applied.
pub fn edit_network_to(net: &Network, new_spec: &BlockModelSpec, seed: u64) -> Result<(Network, usize)> {
    let q = net.q();
    let labels = net.planted().to_vec();
    let mut group_count = vec![0u64; q];
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); q];
    for (i, &s) in labels.iter().enumerate() {
        group_count[s as usize] += 1;
        members[s as usize].push(i as u32);
    }
    let e_old = expected_counts(net.spec(), &group_count);
    let e_new = expected_counts(new_spec, &group_count);

    let mut edge_set: HashSet<(u32, u32)> = net.edges().iter().cloned().collect();
    let mut by_type: Vec<Vec<(u32, u32)>> = vec![Vec::new(); q * q];
    for &(i, j) in net.edges() {
        let (a, b) = (labels[i as usize] as usize, labels[j as usize] as usize);
        let key = a.min(b) * q + a.max(b);
        by_type[key].push((i, j));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edits = 0usize;
    for a in 0..q {
        for b in a..q {
            let delta = e_new[a][b] - e_old[a][b];
            let frac = delta.abs().fract();
            let mut k = delta.abs().floor() as usize;
            if rng.gen::<f64>() < frac {
                k += 1;
            }
            if k == 0 {
                continue;
            }
            let key = a * q + b;
            if delta > 0.0 {
                let mut added = 0;
                while added < k {
                    let u = members[a][rng.gen_range(0..members[a].len())];
                    let v = members[b][rng.gen_range(0..members[b].len())];
                    if u == v {
                        continue;
                    }
                    let e = (u.min(v), u.max(v));
                    if edge_set.insert(e) {
                        by_type[key].push(e);
                        added += 1;
                        edits += 1;
                    }
                }
            } else {
                let k = k.min(by_type[key].len());
                for _ in 0..k {
                    let idx = rng.gen_range(0..by_type[key].len());
                    let e = by_type[key].swap_remove(idx);
                    edge_set.remove(&e);
                    edits += 1;
                }
            }
        }
    }

    let edges: Vec<(u32, u32)> = edge_set.into_iter().collect();
    let new_net = Network::from_parts(net.n(), labels, edges, new_spec.clone())?;
    Ok((new_net, edits))
}

/// Transfers a message state onto an edited network: surviving directed
/// edges keep their messages, new edges start from the sender's marginal.
fn remap_state(state: &MessageSet, old: &Network, new: &Network) -> MessageSet {
    let q = state.q();
    let mut fresh = init_messages_with(new, InitMode::Prior, state.nonedge_field());
    let mut msgs = vec![0.0; new.num_directed() * q];
    for i in 0..new.n() {
        for s in new.slots(i) {
            let j = new.slot_target(s);
            let src: &[f64] = match old.slot_of(i, j) {
                Some(os) => state.message(os),
                None => state.marginal(i),
            };
            msgs[s * q..(s + 1) * q].copy_from_slice(src);
        }
    }
    fresh.set_messages_and_marginals(msgs, state.marginals().to_vec());
    fresh.refresh_field(new);
    fresh
}

/// Runs a warm-started trajectory along `values` of `axis`. The first point
/// is converged from `start_init`; every subsequent point edits the network
/// minimally and re-converges from the previous fixed point. Non-convergence
/// at a step is recorded and the trajectory continues from the last
/// messages. Records carry the step index in `trial` and the edit count in
/// `note`.
pub fn adiabatic_sweep(
    family: &SymmetricFamily,
    axis: AxisParam,
    values: &[f64],
    n: usize,
    start_init: InitKind,
    master_seed: u64,
    opts: &BpOptions,
) -> Result<Vec<RunRecord>> {
    assert!(!values.is_empty(), "trajectory needs at least one point");
    let fam0 = axis.apply(family, values[0]);
    let spec0 = fam0.spec_for(n)?;
    let mut net = crate::graph::sample_network(&spec0, derive_seed(master_seed, &[0]))?;

    let init = match start_init {
        InitKind::Random => InitMode::Random(derive_seed(master_seed, &[1])),
        InitKind::Prior => InitMode::Prior,
        InitKind::Planted => InitMode::Planted,
    };
    let run_opts = |step: usize| BpOptions {
        order_seed: derive_seed(master_seed, &[2, step as u64]),
        ..*opts
    };

    let mut records = Vec::with_capacity(values.len());
    let start = Instant::now();
    let (mut state, report) = run_from_state(
        &net,
        init_messages_with(&net, init, opts.nonedge_field),
        &run_opts(0),
    )?;
    records.push(make_record(
        &fam0, &net, &state, &report, 0, values[0], start_init, 0,
        start.elapsed().as_secs_f64() * 1e3, master_seed,
    ));

    for (step, &v) in values.iter().enumerate().skip(1) {
        let start = Instant::now();
        let fam = axis.apply(family, v);
        let spec = fam.spec_for(n)?;
        let (new_net, edits) = edit_network_to(&net, &spec, derive_seed(master_seed, &[3, step as u64]))?;
        let warm = remap_state(&state, &net, &new_net);
        net = new_net;
        let (next_state, report) = run_from_state(&net, warm, &run_opts(step))?;
        state = next_state;
        records.push(make_record(
            &fam, &net, &state, &report, step, v, start_init, edits,
            start.elapsed().as_secs_f64() * 1e3, master_seed,
        ));
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    fam: &SymmetricFamily,
    net: &Network,
    state: &MessageSet,
    report: &crate::bp::ConvergenceReport,
    step: usize,
    value: f64,
    init: InitKind,
    edits: usize,
    wall_ms: f64,
    master_seed: u64,
) -> RunRecord {
    let (_, c_eff) = crate::model::degree_profile(net.spec());
    let overlaps = overlap_report(state.marginals(), net.planted(), fam.delta, &net.spec().prior)
        .expect("q within permutation bound");
    RunRecord {
        cell: step,
        axis1: value,
        axis2: None,
        q: fam.q,
        n: net.n(),
        c: c_eff,
        epsilon: fam.effective_epsilon().unwrap_or(f64::NAN),
        delta: fam.delta,
        trial: step,
        net_seed: master_seed,
        init,
        mode: RunMode::Converged,
        ok: true,
        converged: report.converged,
        sweeps: report.sweeps,
        residual: report.residual,
        log_likelihood: report.log_likelihood,
        overlaps,
        wall_ms,
        note: format!("edits={edits}"),
    }
}
