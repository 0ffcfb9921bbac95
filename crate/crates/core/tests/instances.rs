mod common;

use approx::assert_relative_eq;
use ildm::demos::collect_demos;
use ildm::instances::*;
use ildm::mdp::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

fn cliff(s: usize, a: usize, h: usize, n: usize) -> (LayeredMdp, TabularPolicy) {
    reset_cliff(&ResetCliffSpec { S: s, A: a, H: h, N: n }).unwrap()
}

/// Relabels the states of layer `h` by `perm` (old index -> new index).
fn permute_layer(mdp: &LayeredMdp, expert: &TabularPolicy, h: usize, perm: &[usize]) -> (LayeredMdp, TabularPolicy) {
    let mut m = mdp.clone();
    let mut e = expert.clone();
    for (old, &new) in perm.iter().enumerate() {
        m.reward[h][new] = mdp.reward[h][old].clone();
        e.probs[h][new] = expert.probs[h][old].clone();
        if h == 0 {
            m.initial[new] = mdp.initial[old];
        }
        if h + 1 < mdp.horizon {
            m.transitions[h][new] = mdp.transitions[h][old].clone();
        }
    }
    if h > 0 {
        for (s, row) in mdp.transitions[h - 1].iter().enumerate() {
            for (a, p) in row.iter().enumerate() {
                for (old, &new) in perm.iter().enumerate() {
                    m.transitions[h - 1][s][a][new] = p[old];
                }
            }
        }
    }
    (m, e)
}

#[test]
fn reset_cliff_expert_collects_full_return() {
    for h in [1, 5, 20] {
        let (mdp, expert) = cliff(4, 5, h, 2);
        assert_relative_eq!(policy_return(&mdp, &expert), h as f64, epsilon = 1e-12);
    }
}

#[test]
fn reset_cliff_deviation_at_first_step_earns_nothing() {
    let (mdp, _) = cliff(4, 3, 6, 2);
    let mut acts = vec![vec![0; 4]; 6];
    acts[0] = vec![1; 4];
    let pi = TabularPolicy::deterministic(&mdp, &acts);
    assert_eq!(policy_return(&mdp, &pi), 0.0);
}

#[test]
fn reset_cliff_initial_distribution() {
    let spec = ResetCliffSpec { S: 5, A: 2, H: 3, N: 2 };
    let rho = spec.initial();
    assert_eq!(rho, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
    let spec = ResetCliffSpec { S: 4, A: 2, H: 3, N: 2 };
    let rho = spec.initial();
    assert_relative_eq!(rho.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    assert_eq!(*rho.last().unwrap(), 0.0);
    assert_relative_eq!(rho[2], 1.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn reset_cliff_expert_states_are_iid_from_rho() {
    let spec = ResetCliffSpec { S: 5, A: 3, H: 7, N: 3 };
    let (mdp, expert) = reset_cliff(&spec).unwrap();
    for layer in state_occupancy(&mdp, &expert) {
        for (x, p) in layer.iter().zip(spec.initial()) {
            assert_relative_eq!(*x, p, epsilon = 1e-14);
        }
    }
}

#[test]
fn reset_cliff_rejects_bad_specs() {
    assert!(reset_cliff(&ResetCliffSpec { S: 2, A: 2, H: 3, N: 2 }).is_err());
    assert!(reset_cliff(&ResetCliffSpec { S: 4, A: 1, H: 3, N: 2 }).is_err());
    assert!(reset_cliff(&ResetCliffSpec { S: 4, A: 2, H: 0, N: 2 }).is_err());
    // S - 2 = 4 > N + 1 = 3.
    assert!(reset_cliff(&ResetCliffSpec { S: 6, A: 2, H: 3, N: 2 }).is_err());
}

#[test]
fn epsilon_matches_enumeration_and_lower_bound() {
    for n in 1..12 {
        for s in 3..=(n + 3) {
            let spec = ResetCliffSpec { S: s, A: 2, H: 1, N: n };
            let rho = spec.initial();
            // Probability that a fresh draw from rho misses every one of N draws.
            let direct: f64 = (0..s).map(|i| rho[i] * (1.0 - rho[i]).powi(n as i32)).sum();
            assert_relative_eq!(spec.epsilon(), direct, epsilon = 1e-15);
            let bound = (s - 2) as f64 / (std::f64::consts::E * (n + 1) as f64);
            assert!(spec.epsilon() >= bound, "S={s} N={n}: {} < {bound}", spec.epsilon());
        }
    }
}

#[test]
fn epsilon_agrees_with_simulation() {
    let spec = ResetCliffSpec { S: 4, A: 2, H: 1, N: 2 };
    let rho = spec.initial();
    let mut r = rng(4);
    let trials = 200_000;
    let mut misses = 0;
    for _ in 0..trials {
        let demo: Vec<usize> = (0..spec.N).map(|_| sample_index(&rho, &mut r)).collect();
        if !demo.contains(&sample_index(&rho, &mut r)) {
            misses += 1;
        }
    }
    let p = misses as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((p - spec.epsilon()).abs() < 3.0 * se, "{p} vs {}", spec.epsilon());
}

#[test]
fn example_d5_structure() {
    let (mdp, expert, demo) = example_d5();
    assert!(is_td_mdp(&mdp, &expert).unwrap().is_td);
    assert_eq!(demo.len(), 1);
    assert_eq!(demo.trajectories[0].len(), 2);
    assert!(demo.visited(0, 0).unwrap());
    assert!(!demo.visited(0, 1).unwrap());
    assert_eq!(mdp.initial, vec![0.5, 0.5]);
}

#[test]
fn random_layered_mdp_is_valid_and_seeded() {
    for seed in 0..20 {
        let sizes = [3, 1, 4, 2];
        let (mdp, expert) = random_layered_mdp(&sizes, 3, &mut rng(seed), ExpertKind::Random).unwrap();
        mdp.validate().unwrap();
        for h in 0..mdp.horizon {
            for s in 0..mdp.layer_sizes[h] {
                assert!(expert.deterministic_action(h, s).is_some());
            }
        }
        let again = random_layered_mdp(&sizes, 3, &mut rng(seed), ExpertKind::Random).unwrap();
        assert_eq!(again.0, mdp);
        assert_eq!(again.1, expert);
    }
}

#[test]
fn td_property_one_counterexample() {
    // The non-expert action reaches expert state 0 more often than the expert action.
    let mdp = LayeredMdp {
        horizon: 2,
        layer_sizes: vec![1, 2],
        num_actions: 2,
        initial: vec![1.0],
        transitions: vec![vec![vec![vec![0.6, 0.4], vec![0.7, 0.3]]]],
        reward: vec![vec![vec![1.0, 0.0]; 1], vec![vec![1.0, 0.0]; 2]],
    };
    let expert = TabularPolicy::deterministic(&mdp, &[vec![0], vec![0, 0]]);
    let rep = is_td_mdp(&mdp, &expert).unwrap();
    assert!(!rep.is_td);
    let v = rep.first_violation.unwrap();
    assert_eq!((v.property, v.h, v.state, v.other, v.next_state), (1, 0, 0, 1, 0));
}

#[test]
fn td_property_two_counterexample() {
    // State 1 is never visited by the expert, yet its action 1 reaches the
    // expert state while the expert state's action 1 does not.
    let mdp = LayeredMdp {
        horizon: 2,
        layer_sizes: vec![2, 3],
        num_actions: 2,
        initial: vec![1.0, 0.0],
        transitions: vec![vec![
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0.5, 0.0, 0.5], vec![0.2, 0.8, 0.0]],
        ]],
        reward: vec![vec![vec![1.0, 0.0]; 2], vec![vec![1.0, 0.0]; 3]],
    };
    let expert = TabularPolicy::deterministic(&mdp, &[vec![0, 0], vec![0, 0, 0]]);
    let v = is_td_mdp(&mdp, &expert).unwrap().first_violation.unwrap();
    assert_eq!((v.property, v.h, v.state, v.other, v.next_state, v.action), (2, 0, 0, 1, 0, 1));
}

#[test]
fn uniform_transitions_break_strictness() {
    let (mut mdp, expert, _) = example_d5();
    mdp.transitions[0] = vec![vec![vec![0.5, 0.5]; 2]; 2];
    assert!(!is_td_mdp(&mdp, &expert).unwrap().is_td);
}

#[test]
fn td_check_needs_deterministic_expert() {
    let (mdp, _, _) = example_d5();
    let err = is_td_mdp(&mdp, &TabularPolicy::uniform(&mdp)).unwrap_err();
    assert!(matches!(err, ildm::Error::NonDeterministicExpert { h: 0, s: 0 }));
}

#[test]
fn rejection_sampler_returns_td_instances() {
    for seed in 0..5 {
        let (mdp, expert) = random_td_mdp(&[3, 3, 2], 3, &mut rng(seed), 10_000).unwrap();
        mdp.validate().unwrap();
        assert!(is_td_mdp(&mdp, &expert).unwrap().is_td);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn td_verdict_survives_relabeling(seed in seeds(), td in any::<bool>()) {
        let mut r = rng(seed);
        let sizes: Vec<usize> = (0..r.random_range(2..=4)).map(|i| if i == 0 { r.random_range(1..=3) } else { r.random_range(2..=4) }).collect();
        let a = r.random_range(2..=3);
        let (mdp, expert) = if td {
            random_td_mdp(&sizes, a, &mut r, 10_000).unwrap()
        } else {
            random_layered_mdp(&sizes, a, &mut r, ExpertKind::Random).unwrap()
        };
        let verdict = is_td_mdp(&mdp, &expert).unwrap().is_td;
        let h = r.random_range(0..sizes.len());
        let mut perm: Vec<usize> = (0..sizes[h]).collect();
        perm.shuffle(&mut r);
        let (m2, e2) = permute_layer(&mdp, &expert, h, &perm);
        m2.validate().unwrap();
        prop_assert_eq!(is_td_mdp(&m2, &e2).unwrap().is_td, verdict);
        prop_assert!((policy_return(&m2, &e2) - policy_return(&mdp, &expert)).abs() < 1e-12);
    }

    #[test]
    fn demos_avoid_the_bad_state(seed in seeds()) {
        let spec = ResetCliffSpec { S: 4, A: 3, H: 8, N: 3 };
        let (mdp, expert) = reset_cliff(&spec).unwrap();
        let demo = collect_demos(&mdp, &expert, spec.N, seed).unwrap();
        for t in &demo.trajectories {
            prop_assert!(t.iter().all(|&(s, a)| s != spec.bad_state() && a == EXPERT_ACTION));
        }
    }
}
