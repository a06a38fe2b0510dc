use adhist::pattern::{compute_binning_pattern, ideal_floors, validate_pattern, BinningPattern};
use adhist::{Histogram256, BINS};
use proptest::prelude::*;

fn prior_strategy() -> impl Strategy<Value = Histogram256> {
    prop_oneof![
        proptest::collection::vec(0u64..1_000, BINS),
        proptest::collection::vec(prop_oneof![Just(0u64), 0u64..u64::MAX / 512], BINS),
        (any::<u8>(), 1u64..1_000_000).prop_map(|(v, n)| {
            let mut c = vec![0u64; BINS];
            c[v as usize] = n;
            c
        }),
    ]
    .prop_map(|v| Histogram256::from_counts(v.try_into().unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn invariants_hold(prior in prior_strategy(), slots in 256usize..=2048, cap in 1usize..=16) {
        prop_assume!(slots <= cap * BINS);
        let p = compute_binning_pattern(&prior, slots, cap).unwrap();
        validate_pattern(&p).unwrap();
        prop_assert_eq!(p.counts().iter().map(|&c| c as usize).sum::<usize>(), slots);
        prop_assert!(p.counts().iter().all(|&c| c >= 1 && c as usize <= cap));
        let mut next = 0;
        for b in 0..BINS {
            prop_assert_eq!(p.offset(b), next);
            next += p.count(b);
        }
        // Same input, same pattern; and the dump round-trips.
        let again = compute_binning_pattern(&prior, slots, cap).unwrap();
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(BinningPattern::parse_dump(&p.dump(), cap).unwrap(), p.clone());

        let floors = ideal_floors(&prior, slots);
        for a in 0..BINS {
            // Every bin gets at least its capped ideal floor.
            prop_assert!(p.count(a) as u64 >= (1 + floors[a]).min(cap as u64));
            for b in 0..BINS {
                if prior.counts()[a] >= prior.counts()[b] {
                    prop_assert!(floors[a] >= floors[b]);
                }
                // Equal priors may differ by the index tie-break.
                if prior.counts()[a] > prior.counts()[b] {
                    prop_assert!(p.count(a) >= p.count(b) || p.count(a) == cap,
                        "bin {} (prior {}) got {} < bin {} (prior {}) got {}",
                        a, prior.counts()[a], p.count(a), b, prior.counts()[b], p.count(b));
                }
            }
        }
    }
}

#[test]
fn out_of_range_slot_totals_are_rejected() {
    let h = Histogram256::zero();
    assert!(compute_binning_pattern(&h, 255, 8).is_err());
    assert!(compute_binning_pattern(&h, 2049, 8).is_err());
    assert!(compute_binning_pattern(&h, 2048, 8).is_ok());
}
