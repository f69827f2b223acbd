use approx::assert_abs_diff_eq;
use freqstab::harness::{gen_dn, rm_graph, rm_sigma_y, InstanceBundle};
use freqstab::mdp::{Labeling, Mdp, MemoryAllocation, VertexKind};
use freqstab::objective::{Norm, Objective};
use freqstab::stationary::invariant_distribution;
use freqstab::strategy::{build_augmented_space, induced_chain, InducedChain};
use freqstab::synth::{
    comb, init_parameters, multi_restart, optimize, penalties, renewal_statistics, CombWeights, SynthesisConfig,
    SynthesisProblem,
};
use freqstab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(b: &InstanceBundle) -> SynthesisProblem {
    let obj = Objective::distance(b.target.clone(), Norm::L2).unwrap();
    SynthesisProblem::new(&b.mdp, &b.alloc, &b.labeling, &obj).unwrap()
}

/// Stochastic vertex `s` splitting to `a` and `b`, with memory on `a`.
fn stochastic_bundle() -> InstanceBundle {
    let mut mb = Mdp::builder();
    let s = mb.add_vertex("s", VertexKind::Stochastic);
    let a = mb.add_vertex("a", VertexKind::Nondeterministic);
    let b = mb.add_vertex("b", VertexKind::Nondeterministic);
    mb.add_edge(s, a).add_edge(s, b).add_edge(a, a).add_edge(a, s).add_edge(b, s).add_edge(b, b);
    mb.set_prob(s, vec![(a, 0.3), (b, 0.7)]);
    let mdp = mb.build().unwrap();
    let labeling = Labeling::from_names(&["x", "y", "x"]);
    InstanceBundle {
        id: "stoch".into(),
        alloc: MemoryAllocation::new(vec![1, 2, 1]).unwrap(),
        mdp,
        labeling,
        target: vec![0.4, 0.6],
        d: 5,
    }
}

/// Central differences of comb against the analytic gradient.
fn fd_mismatch(p: &SynthesisProblem, theta: &[f64], w: &CombWeights) -> Option<String> {
    let h = 1e-5;
    let (_, grad) = p.evaluate(theta, w, true).unwrap();
    let grad = grad.unwrap();
    let mut t = theta.to_vec();
    for i in 0..theta.len() {
        t[i] = theta[i] + h;
        let up = p.evaluate(&t, w, false).unwrap().0.comb;
        t[i] = theta[i] - h;
        let down = p.evaluate(&t, w, false).unwrap().0.comb;
        t[i] = theta[i];
        let fd = (up - down) / (2.0 * h);
        if (grad[i] - fd).abs() > 1e-7 + 1e-4 * fd.abs() {
            return Some(format!("component {i}: analytic {} vs fd {fd}", grad[i]));
        }
    }
    None
}

#[test]
fn gradient_matches_finite_differences() {
    let bundles = vec![
        gen_dn(2).unwrap(),
        gen_dn(3).unwrap(),
        gen_dn(4).unwrap(),
        rm_graph(1, false).unwrap(),
        rm_graph(3, false).unwrap(),
        stochastic_bundle(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for b in &bundles {
        let p = problem(b);
        for _ in 0..4 {
            let theta: Vec<f64> = (0..p.num_params()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let beta = rng.gen_range(0.0..0.5);
            let gamma = rng.gen_range(0.0..0.45);
            let w = CombWeights::new(beta, gamma).unwrap();
            if let Some(msg) = fd_mismatch(&p, &theta, &w) {
                panic!("{} (beta {beta}, gamma {gamma}): {msg}", b.id);
            }
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

#[test]
fn gradient_under_l1_and_frozen_normalizers() {
    let b = gen_dn(3).unwrap();
    let obj = Objective::distance(b.target.clone(), Norm::L1).unwrap();
    let p = SynthesisProblem::new(&b.mdp, &b.alloc, &b.labeling, &obj).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let theta: Vec<f64> = (0..p.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = CombWeights::new(0.3, 0.2).unwrap();
    assert_eq!(fd_mismatch(&p, &theta, &w), None);

    // with both weights zero the normalizers drop out
    let free = CombWeights::new(0.0, 0.0).unwrap();
    let frozen = CombWeights { freeze_normalizers: true, ..free };
    let g1 = p.evaluate(&theta, &free, true).unwrap().1.unwrap();
    let g2 = p.evaluate(&theta, &frozen, true).unwrap().1.unwrap();
    for (a, b) in g1.iter().zip(&g2) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
    let g3 = p.evaluate(&theta, &CombWeights { freeze_normalizers: true, ..w }, true).unwrap().1.unwrap();
    assert!(g3.iter().zip(&p.evaluate(&theta, &w, true).unwrap().1.unwrap()).any(|(a, b)| (a - b).abs() > 1e-9));
}

#[test]
fn single_successor_groups_have_zero_gradient() {
    let b = stochastic_bundle();
    let p = problem(&b);
    let theta = init_parameters(&p.space, &p.mdp, 3, (1e-2, 1.0)).unwrap().theta;
    let (_, g) = p.evaluate(&theta, &CombWeights::new(0.2, 0.3).unwrap(), true).unwrap();
    let g = g.unwrap();
    for group in p.layout.groups() {
        if group.targets.len() == 1 {
            assert_eq!(g[group.start], 0.0);
        }
    }
    assert!(p.layout.groups().iter().any(|g| g.targets.len() == 1));
}

#[test]
fn gradient_vanishes_at_hand_built_optimum() {
    // v1 splits evenly, v2 self-loops with 3/4: invariant (1/3, 2/3) = target
    let b = gen_dn(2).unwrap();
    let p = problem(&b);
    let theta = vec![0.5f64.ln(), 0.5f64.ln(), 0.25f64.ln(), 0.75f64.ln()];
    let w = CombWeights::new(0.0, 0.0).unwrap();
    let (bd, g) = p.evaluate(&theta, &w, true).unwrap();
    assert!(bd.comb < 1e-12, "{}", bd.comb);
    let g = g.unwrap();
    let h = 1e-6;
    for group in p.layout.groups() {
        for k in group.range() {
            // tangent direction: raise one entry of the group, lower the mean
            let mut dir = vec![0.0; theta.len()];
            for j in group.range() {
                dir[j] = if j == k { 1.0 } else { 0.0 } - 1.0 / group.targets.len() as f64;
            }
            let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!(slope.abs() <= 1e-6, "{slope}");
            let moved: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + h * d).collect();
            let ahead = p.evaluate(&moved, &w, false).unwrap().0.comb;
            assert!(ahead >= bd.comb - 1e-12);
        }
    }
}

#[test]
fn alternation_comb_value() {
    let chain = InducedChain::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]], vec![0, 1], 2).unwrap();
    let obj = Objective::distance(vec![0.8, 0.2], Norm::L2).unwrap();
    let bd = comb(&chain, &obj, &CombWeights::new(0.5, 0.0).unwrap()).unwrap();
    assert_abs_diff_eq!(bd.best().obj_value, 0.18f64.sqrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(bd.comb, 0.5 * 0.18f64.sqrt(), epsilon = 1e-6);
    assert_abs_diff_eq!(bd.comb, 0.21213, epsilon = 1e-5);

    let zero = comb(&chain, &obj, &CombWeights::new(0.0, 0.0).unwrap()).unwrap();
    assert_eq!(zero.comb, zero.best().obj_value);
}

#[test]
fn breakdown_invariants_and_bscc_minimum() {
    // two absorbing cycles with different frequencies
    let rows = vec![
        vec![(0, 0.5), (1, 0.25), (3, 0.25)],
        vec![(2, 1.0)],
        vec![(1, 0.6), (2, 0.4)],
        vec![(4, 1.0)],
        vec![(3, 0.3), (4, 0.7)],
    ];
    let chain = InducedChain::from_rows(rows, vec![0, 0, 1, 0, 1], 2).unwrap();
    let obj = Objective::distance(vec![0.5, 0.5], Norm::L2).unwrap();
    let bd = comb(&chain, &obj, &CombWeights::new(0.3, 0.4).unwrap()).unwrap();
    assert_eq!(bd.per_bscc.len(), 2);
    for c in &bd.per_bscc {
        assert_abs_diff_eq!(c.c1, (c.obj_value + 1.0) / (c.penalty1 + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(c.c2, (c.obj_value + 1.0) / (c.penalty2 + 1.0), epsilon = 1e-15);
        let expect = 0.3 * c.obj_value + 0.3 * c.c1 * c.penalty1 + 0.4 * c.c2 * c.penalty2;
        assert_abs_diff_eq!(c.comb, expect, epsilon = 1e-14);
        assert!(c.comb >= 0.0);
    }
    let min = bd.per_bscc.iter().map(|c| c.comb).fold(f64::INFINITY, f64::min);
    assert_eq!(bd.comb, min);
    assert_eq!(bd.best().comb, min);
}

#[test]
fn weights_are_validated() {
    assert!(CombWeights::new(0.5, 0.5).is_err());
    assert!(CombWeights::new(-0.1, 0.0).is_err());
    assert!(CombWeights::new(0.6, 0.3).is_ok());
    let cfg = SynthesisConfig { steps: 0, ..Default::default() };
    assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    let cfg = SynthesisConfig { init_range: (1.0, 0.1), ..Default::default() };
    assert!(cfg.validate().is_err());
}

/// Sample standard deviation band check of renewal times by simulation.
fn simulate_renewal(chain: &InducedChain, start: usize, samples: usize, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut v = start;
        let mut t = 0u64;
        loop {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let row = chain.row(v);
            let mut next = row[row.len() - 1].0;
            for &(w, p) in row {
                acc += p;
                if u < acc {
                    next = w;
                    break;
                }
            }
            v = next;
            t += 1;
            if chain.label(v) == chain.label(start) {
                break;
            }
        }
        draws.push(t as f64);
        s1 += t as f64;
    }
    let mean = s1 / samples as f64;
    for x in &draws {
        let c = x - mean;
        s2 += c * c;
        s4 += c * c * c * c;
    }
    let var = s2 / (samples as f64 - 1.0);
    let m4 = s4 / samples as f64;
    let se_var = ((m4 - var * var) / samples as f64).sqrt();
    (mean, var, se_var)
}

#[test]
fn penalties_match_simulation() {
    let rm = rm_graph(1, false).unwrap();
    let base = rm_sigma_y(0.0).unwrap();
    let space = build_augmented_space(&rm.mdp, &base.alloc).unwrap();
    let chain = induced_chain(&space, &base.strategy, &rm.labeling);
    let z = invariant_distribution(&chain, &[0, 1]).unwrap();
    let stats = renewal_statistics(&chain, &[0, 1], &z).unwrap();
    let (_, p2) = penalties(&stats, &z, 0.0);
    assert_abs_diff_eq!(stats.sd[0], 8f64.sqrt() / 9.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p2, 0.9 * 8f64.sqrt() / 9.0 + 0.1 * 72f64.sqrt(), epsilon = 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for v in 0..2 {
        let (mean, var, se) = simulate_renewal(&chain, v, 1_000_000, &mut rng);
        assert!((var - stats.variance[v]).abs() <= 3.0 * se, "state {v}: var {var} vs {} (se {se})", stats.variance[v]);
        assert!((mean - stats.mean[v]).abs() <= 3.0 * (var / 1e6).sqrt());
    }
}

#[test]
fn optimization_descends_and_records_best() {
    let b = gen_dn(2).unwrap();
    let obj = Objective::distance(b.target.clone(), Norm::L2).unwrap();
    let cfg = SynthesisConfig { beta: 0.2, gamma: 0.0, restarts: 1, seed: 9, ..Default::default() };
    let run = optimize(&b.mdp, &b.alloc, &b.labeling, &obj, &cfg).unwrap();
    assert_eq!(run.trace.len(), 800);
    assert_eq!(run.step_secs.len(), 800);
    let min = run.trace.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(run.best.comb, min);
    assert_eq!(run.trace[run.best_step], min);
    assert!(run.best.comb <= run.trace[0]);

    let (again, summary) = multi_restart(&b.mdp, &b.alloc, &b.labeling, &obj, &cfg).unwrap();
    assert_eq!(again.theta, run.theta);
    assert_eq!(again.trace, run.trace);
    assert_eq!(summary.len(), 1);
}

#[test]
fn restarts_are_deterministic() {
    let b = gen_dn(3).unwrap();
    let obj = Objective::distance(b.target.clone(), Norm::L2).unwrap();
    let cfg = SynthesisConfig { beta: 0.1, gamma: 0.1, restarts: 4, steps: 60, seed: 100, ..Default::default() };
    let (a, sa) = multi_restart(&b.mdp, &b.alloc, &b.labeling, &obj, &cfg).unwrap();
    let (c, sc) = multi_restart(&b.mdp, &b.alloc, &b.labeling, &obj, &cfg).unwrap();
    assert_eq!(a.theta, c.theta);
    assert_eq!(a.strategy, c.strategy);
    assert_eq!(sa, sc);
    assert_eq!(sa.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![100, 101, 102, 103]);
    let best = sa.iter().filter_map(|s| s.best_comb).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best.comb, best);
}

#[test]
fn satisfy_objectives_are_rejected() {
    let b = gen_dn(2).unwrap();
    let obj = Objective::satisfy(vec![(0.3, 0.4), (0.6, 0.7)]).unwrap();
    let err = optimize(&b.mdp, &b.alloc, &b.labeling, &obj, &SynthesisConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NotDifferentiable));
    assert!(err.to_string().contains("Distance surrogate"));
}

fn random_chain(n: usize, labels: usize, seed: u64) -> InducedChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter().enumerate().map(|(j, x)| (j, x / total)).collect()
        })
        .collect();
    let mut lab: Vec<usize> = (0..n).map(|_| rng.gen_range(0..labels)).collect();
    lab[0] = 0;
    InducedChain::from_rows(rows, lab, labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renewal_reward_identity(n in 2usize..12, labels in 1usize..5, seed in any::<u64>()) {
        let chain = random_chain(n, labels, seed);
        let members: Vec<usize> = (0..n).collect();
        let z = invariant_distribution(&chain, &members).unwrap();
        let stats = renewal_statistics(&chain, &members, &z).unwrap();
        for l in 0..labels {
            if stats.label_mass[l] > 0.0 {
                prop_assert!((stats.label_mean[l] * stats.label_mass[l] - 1.0).abs() < 1e-6);
            } else {
                prop_assert_eq!(stats.label_mean[l], 0.0);
            }
        }
        for v in 0..n {
            prop_assert!(stats.second_moment[v] >= stats.mean[v] * stats.mean[v] - 1e-9);
            prop_assert!(stats.variance[v] >= -1e-9);
        }
        for row in stats.hitting.iter().chain(&stats.hitting_sq) {
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn dirac_cycles_have_no_vertex_penalty(n in 1usize..15, labels in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n).map(|i| vec![((i + 1) % n, 1.0)]).collect();
        let lab: Vec<usize> = (0..n).map(|_| rng.gen_range(0..labels)).collect();
        let chain = InducedChain::from_rows(rows, lab, labels).unwrap();
        let members: Vec<usize> = (0..n).collect();
        let z = invariant_distribution(&chain, &members).unwrap();
        let stats = renewal_statistics(&chain, &members, &z).unwrap();
        let eps = 1e-12;
        let (_, p2) = penalties(&stats, &z, eps);
        prop_assert!(p2 <= eps.sqrt() * (1.0 + 1e-6) + 1e-9, "{}", p2);
    }
}
