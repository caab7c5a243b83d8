mod common;

use std::collections::BTreeMap;

use num_integer::Integer;
use proptest::prelude::*;

use mbd2sdf::interpreter::{compare_traces, run_mil};
use mbd2sdf::normalizer::{normalize, Depth};
use mbd2sdf::sdf::{build_schedule, check_consistency, repetition_vector, Consistency, SdfError, Sdfg};

use common::graphs;

/// Tokens left on each channel after replaying `firings`, or the first
/// firing that would read an empty queue.
fn replay(g: &Sdfg, firings: &[String]) -> Result<Vec<u64>, String> {
    let mut tokens: Vec<u64> = g.channels.iter().map(|c| c.delay).collect();
    for a in firings {
        for (k, c) in g.channels.iter().enumerate() {
            if &c.dst.actor == a {
                if tokens[k] < c.rate_dst {
                    return Err(format!("{a} underflows {}", c.id));
                }
                tokens[k] -= c.rate_dst;
            }
        }
        for (k, c) in g.channels.iter().enumerate() {
            if &c.src.actor == a {
                tokens[k] += c.rate_src;
            }
        }
    }
    Ok(tokens)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn balance_equations_hold(seed in any::<u64>()) {
        let p = graphs::consistent(seed, 8);
        let q = repetition_vector(&p.graph).unwrap();
        for c in &p.graph.channels {
            prop_assert_eq!(q[&c.src.actor] * c.rate_src, q[&c.dst.actor] * c.rate_dst);
        }
        // The planted vector, reduced, is the unique minimal solution.
        let gcd = p.planted.iter().fold(0u64, |a, &b| a.gcd(&b));
        for (i, t) in p.planted.iter().enumerate() {
            prop_assert_eq!(q[&format!("a{i}")], t / gcd);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn mismatched_parallel_rates_are_inconsistent(seed in any::<u64>()) {
        let g = graphs::with_mismatched_parallel(seed, 6);
        prop_assert!(matches!(repetition_vector(&g), Err(SdfError::Inconsistent(_))));
        let inconsistent = matches!(check_consistency(&g), Consistency::Inconsistent { .. });
        prop_assert!(inconsistent);
    }

    #[test]
    fn cycles_without_delay_deadlock(seed in any::<u64>()) {
        let g = graphs::with_empty_cycle(seed, 6);
        let q = repetition_vector(&g).unwrap();
        prop_assert!(matches!(build_schedule(&g, &q), Err(SdfError::Deadlock(_))));
    }

    #[test]
    fn schedule_replay_is_safe_and_periodic(seed in any::<u64>()) {
        let p = graphs::consistent(seed, 8);
        let q = repetition_vector(&p.graph).unwrap();
        let s = build_schedule(&p.graph, &q).unwrap();
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for a in &s.firings {
            *counts.entry(a.as_str()).or_default() += 1;
        }
        for (a, n) in &q {
            prop_assert_eq!(counts.get(a.as_str()).copied().unwrap_or(0), *n);
        }
        let after = replay(&p.graph, &s.firings).map_err(TestCaseError::fail)?;
        let delays: Vec<u64> = p.graph.channels.iter().map(|c| c.delay).collect();
        prop_assert_eq!(&after, &delays);
        // A second iteration from the returned state behaves identically.
        let twice: Vec<String> = s.firings.iter().chain(&s.firings).cloned().collect();
        prop_assert_eq!(replay(&p.graph, &twice).map_err(TestCaseError::fail)?, delays);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn normalization_preserves_block_semantics(seed in any::<u64>()) {
        let m = common::random::random_model(seed, 3);
        let n = normalize(&m, Depth::Full).unwrap();
        let before = run_mil(&m, 64).unwrap();
        let after = run_mil(&n.model, 64).unwrap();
        let r = compare_traces(&before, &after, 0.0).unwrap();
        prop_assert!(r.pass, "seed {}: {:?}", seed, r.first_divergence);
        prop_assert!(r.samples > 0);
    }

    #[test]
    fn partial_flattening_preserves_block_semantics(seed in any::<u64>(), depth in 0usize..3) {
        let m = common::random::random_model(seed, 3);
        let n = normalize(&m, Depth::Level(depth)).unwrap();
        let before = run_mil(&m, 48).unwrap();
        let after = run_mil(&n.model, 48).unwrap();
        let r = compare_traces(&before, &after, 0.0).unwrap();
        prop_assert!(r.pass, "seed {} depth {}: {:?}", seed, depth, r.first_divergence);
    }

    #[test]
    fn random_models_agree_across_simulators(seed in any::<u64>()) {
        let m = common::random::random_model(seed, 3);
        let v = mbd2sdf::pipeline::verify(&m, Depth::Full, 64, 0.0).unwrap();
        prop_assert!(v.report.pass, "seed {}: {:?}", seed, v.report.first_divergence);
    }
}
