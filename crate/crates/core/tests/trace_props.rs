use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use racelab::trace::{generate_trace, parse_trace, sample_decision, serialize_trace, GenConfig, SamplingPolicy};
use racelab::Op;

fn config(rng: &mut ChaCha8Rng) -> GenConfig {
    GenConfig {
        threads: rng.gen_range(1..=8),
        locks: rng.gen_range(1..=8),
        vars: rng.gen_range(1..=8),
        events: rng.gen_range(1..=300),
        p_sync: rng.gen_range(0.0..=1.0),
        contention: rng.gen_range(0.0..=1.0),
        accesses_per_cs: rng.gen_range(0.0..6.0),
    }
}

#[test]
fn generated_traces_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..1000 {
        let cfg = config(&mut rng);
        let tr = generate_trace(&cfg, seed).unwrap();
        assert_eq!(tr.len(), cfg.events, "{cfg:?}");
        // Re-validating through the parser catches any discipline slip.
        let back = parse_trace(&serialize_trace(&tr)).unwrap_or_else(|e| panic!("{cfg:?} seed {seed}: {e}"));
        assert_eq!(back, tr);
        if cfg.events >= 2 * cfg.locks {
            assert_eq!(tr.num_locks(), cfg.locks, "{cfg:?} seed {seed}");
        }
        let mut open = 0i64;
        for ev in tr.events() {
            match ev.op {
                Op::Acquire(_) => open += 1,
                Op::Release(_) => open -= 1,
                _ => {}
            }
        }
        assert_eq!(open, 0);
    }
}

#[test]
fn round_trip_with_marks_over_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..100 {
        let cfg = config(&mut rng);
        let tr = SamplingPolicy::bernoulli(0.3, seed).apply(&generate_trace(&cfg, seed).unwrap());
        assert_eq!(parse_trace(&serialize_trace(&tr)).unwrap(), tr);
    }
}

#[test]
fn sampled_sets_are_nested_in_rate() {
    let tr = generate_trace(
        &GenConfig {
            events: 2000,
            ..GenConfig::default()
        },
        3,
    )
    .unwrap();
    let mut prev = SamplingPolicy::bernoulli(0.0, 9).apply(&tr);
    for rate in [0.003, 0.03, 0.1, 0.5, 1.0] {
        let cur = SamplingPolicy::bernoulli(rate, 9).apply(&tr);
        for (a, b) in prev.events().iter().zip(cur.events()) {
            assert!(!a.marked || b.marked);
        }
        prev = cur;
    }
}

proptest! {
    #[test]
    fn decision_depends_only_on_seed_and_index(seed in any::<u64>(), index in 1usize..1_000_000, rate in 0.0f64..=1.0) {
        prop_assert_eq!(sample_decision(seed, index, rate), sample_decision(seed, index, rate));
        prop_assert!(sample_decision(seed, index, 1.0));
        prop_assert!(!sample_decision(seed, index, 0.0));
    }

    #[test]
    fn marks_ignore_event_content(seed in any::<u64>(), ops in prop::collection::vec(any::<bool>(), 1..60)) {
        // Two traces with the same length but different operations get the
        // same marks at each index.
        let a: String = ops.iter().map(|&w| if w { "T1|w(x)\n" } else { "T1|r(x)\n" }).collect();
        let b: String = ops.iter().enumerate().map(|(i, _)| format!("T{}|w(y{})\n", i % 3, i)).collect();
        let pa = SamplingPolicy::bernoulli(0.5, seed).apply(&parse_trace(&a).unwrap());
        let pb = SamplingPolicy::bernoulli(0.5, seed).apply(&parse_trace(&b).unwrap());
        let ma: Vec<bool> = pa.events().iter().map(|e| e.marked).collect();
        let mb: Vec<bool> = pb.events().iter().map(|e| e.marked).collect();
        prop_assert_eq!(ma, mb);
    }
}
