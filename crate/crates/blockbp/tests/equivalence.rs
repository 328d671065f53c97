//! Cross-module equivalences: the closed-form local classifiers against
//! finite-step message passing, and message passing against the exact
//! oracle on trees.

use blockbp::bp::{run_finite, run_to_convergence, BpOptions, InitMode};
use blockbp::graph::{sample_labeled_tree, sample_network};
use blockbp::model::{
    affinity_from_strength, degree_profile, disassortative_affinity, equally_spaced_offsets,
    group_sizes, BlockModelSpec, SymmetricFamily,
};
use blockbp::oracle::{exact_log_evidence, exact_marginals, WeightModel};
use blockbp::seed::derive_seed;
use blockbp::{degree_classifier, first_order_messages, log_likelihood, radius2_classifier};

fn family(q: usize, c: f64, eps: f64, delta: f64) -> SymmetricFamily {
    SymmetricFamily {
        q,
        c,
        epsilon: eps,
        delta,
        zeta: None,
        disassortative: false,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn one_step_marginals_equal_degree_posterior() {
    for (seed, fam) in [
        (1, family(2, 3.0, 2.0, 0.4)),
        (2, family(5, 8.0, 4.0, 0.1)),
        (3, family(3, 5.0, -1.5, 0.2)),
    ] {
        let spec = fam.spec_for(3000).unwrap();
        let net = sample_network(&spec, seed).unwrap();
        let (ca, _) = degree_profile(&spec);
        let state = run_finite(&net, InitMode::Prior, 1).unwrap();
        let post = degree_classifier(&net, &spec.prior, &ca).unwrap();
        let d = max_abs_diff(state.marginals(), post.rows());
        assert!(d <= 1e-12, "seed {seed}: max diff {d}");
    }
}

#[test]
fn one_step_messages_equal_first_order_messages() {
    let fam = family(3, 4.0, 2.0, 0.3);
    let spec = fam.spec_for(2000).unwrap();
    let net = sample_network(&spec, 7).unwrap();
    let (ca, _) = degree_profile(&spec);
    let state = run_finite(&net, InitMode::Prior, 1).unwrap();
    let msgs = first_order_messages(&net, &spec.prior, &ca).unwrap();
    let q = net.q();
    let mut worst = 0.0f64;
    for i in 0..net.n() {
        for s in net.slots(i) {
            let d = max_abs_diff(state.message(s), &msgs[i * q..(i + 1) * q]);
            worst = worst.max(d);
        }
    }
    assert!(worst <= 1e-12, "max message diff {worst}");
}

#[test]
fn two_step_marginals_equal_radius2_posterior() {
    for (seed, fam) in [
        (4, family(2, 3.0, 2.0, 0.4)),
        (5, family(5, 8.0, 4.0, 0.1)),
    ] {
        let spec = fam.spec_for(3000).unwrap();
        let net = sample_network(&spec, seed).unwrap();
        let (ca, _) = degree_profile(&spec);
        let state = run_finite(&net, InitMode::Prior, 2).unwrap();
        let post = radius2_classifier(&net, &spec.prior, &spec.affinity, &ca).unwrap();
        let d = max_abs_diff(state.marginals(), post.rows());
        assert!(d <= 1e-12, "seed {seed}: max diff {d}");
    }
}

#[test]
fn two_step_equivalence_holds_for_planted_coloring() {
    let fam = SymmetricFamily {
        q: 5,
        c: 12.0,
        epsilon: 0.0,
        delta: 0.05,
        zeta: None,
        disassortative: true,
    };
    let spec = fam.spec_for(3000).unwrap();
    let net = sample_network(&spec, 11).unwrap();
    let (ca, _) = degree_profile(&spec);
    let state = run_finite(&net, InitMode::Prior, 2).unwrap();
    let post = radius2_classifier(&net, &spec.prior, &spec.affinity, &ca).unwrap();
    let d = max_abs_diff(state.marginals(), post.rows());
    assert!(d <= 1e-12, "max diff {d}");
}

#[test]
fn tree_messages_with_field_off_match_exact_oracle() {
    let mut worst_marg = 0.0f64;
    let mut worst_ll = 0.0f64;
    for trial in 0..12u64 {
        let q = [2, 3, 5][(trial % 3) as usize];
        let n = 4 + (trial as usize % 7);
        let delta = 0.1 + 0.05 * (trial % 4) as f64;
        let prior = group_sizes(q, delta, &equally_spaced_offsets(q)).unwrap();
        let aff = if trial % 4 == 0 {
            disassortative_affinity(3.0, &prior).unwrap()
        } else {
            affinity_from_strength(4.0, 1.5, &prior).unwrap()
        };
        let spec = BlockModelSpec::new(n, prior, aff).unwrap();
        let net = sample_labeled_tree(&spec, derive_seed(99, &[trial])).unwrap();

        let opts = BpOptions {
            tol: 1e-12,
            max_sweeps: 500,
            nonedge_field: false,
            ..BpOptions::default()
        };
        let (state, report) = run_to_convergence(&net, InitMode::Prior, &opts).unwrap();
        assert!(report.converged, "trial {trial} did not converge");

        let exact = exact_marginals(&net, &spec, WeightModel::TreeOnly).unwrap();
        worst_marg = worst_marg.max(max_abs_diff(state.marginals(), &exact));

        let lz = exact_log_evidence(&net, &spec, WeightModel::TreeOnly).unwrap();
        let l = log_likelihood(&state, &net).unwrap();
        worst_ll = worst_ll.max((l - lz).abs());
    }
    assert!(worst_marg <= 1e-8, "marginal mismatch {worst_marg}");
    assert!(worst_ll <= 1e-8, "log evidence mismatch {worst_ll}");
}

#[test]
fn finite_step_state_is_usable_for_overlap_curves() {
    // marginal overlap grows with information radius on an easy instance
    let fam = family(2, 8.0, 7.0, 0.6);
    let spec = fam.spec_for(20_000).unwrap();
    let net = sample_network(&spec, 21).unwrap();
    let q0 = blockbp::marginal_overlap(
        run_finite(&net, InitMode::Prior, 0).unwrap().marginals(),
        net.planted(),
    );
    let q2 = blockbp::marginal_overlap(
        run_finite(&net, InitMode::Prior, 2).unwrap().marginals(),
        net.planted(),
    );
    let (state, _) = run_to_convergence(&net, InitMode::Prior, &BpOptions::default()).unwrap();
    let qc = blockbp::marginal_overlap(state.marginals(), net.planted());
    assert!(q2 > q0 + 0.01, "t=2 marginal overlap {q2} vs t=0 {q0}");
    assert!(qc > q2 - 0.01, "converged {qc} below t=2 {q2}");
}
