use adhist::datagen::{generate, SourceKind, SourceSpec};
use adhist::kernels::{
    adaptive_histogram, adaptive_histogram_traced, batch_histograms, naive_histogram,
    reference_histogram, KernelKind, WorkerGroupConfig,
};
use adhist::pattern::{compute_binning_pattern, uniform_pattern};
use adhist::{Error, Histogram256, PackedChunk};
use proptest::prelude::*;

fn chunk_strategy() -> impl Strategy<Value = PackedChunk> {
    prop_oneof![
        proptest::collection::vec(any::<u32>(), 1..2048).prop_map(PackedChunk::from_words),
        (any::<u8>(), 1usize..2048).prop_map(|(v, n)| PackedChunk::pack(&vec![v; n * 4]).unwrap()),
        (any::<u64>(), 0.0f64..=1.0, any::<u8>(), 1usize..2048).prop_map(|(seed, p, v, n)| {
            generate(&SourceSpec::new(
                SourceKind::Mixture {
                    degeneracy: p,
                    value: v,
                },
                seed,
                n * 4,
            ))
            .unwrap()
        }),
    ]
}

fn config_strategy() -> impl Strategy<Value = WorkerGroupConfig> {
    (1usize..65, 1usize..9, any::<bool>(), any::<bool>()).prop_map(|(gs, gc, par, narrow)| {
        let mut cfg = WorkerGroupConfig::new(gs, gc);
        cfg.parallel = par;
        if narrow {
            cfg = cfg.narrow();
        }
        cfg
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernels_match_reference(
        chunk in chunk_strategy(),
        prior in proptest::collection::vec(0u64..10_000, 256),
        slots in 256usize..=2048,
        cfg in config_strategy(),
    ) {
        let prior = Histogram256::from_counts(prior.try_into().unwrap());
        let pattern = compute_binning_pattern(&prior, slots, 8).unwrap();
        let expected = reference_histogram(&chunk);
        prop_assert_eq!(naive_histogram(&chunk, &cfg).unwrap(), expected.clone());
        prop_assert_eq!(adaptive_histogram(&chunk, &pattern, &cfg).unwrap(), expected.clone());
        let batch = batch_histograms(&[chunk.clone(), chunk.clone()], KernelKind::Adaptive, &pattern, &cfg).unwrap();
        prop_assert_eq!(&batch[0], &expected);
        prop_assert_eq!(&batch[1], &expected);
    }

    #[test]
    fn lanes_stay_on_their_cyclic_slot(
        chunk in chunk_strategy(),
        prior in proptest::collection::vec(0u64..100, 256),
        gs in 1usize..40,
    ) {
        let prior = Histogram256::from_counts(prior.try_into().unwrap());
        let pattern = compute_binning_pattern(&prior, 960, 8).unwrap();
        let cfg = WorkerGroupConfig::new(gs, 2);
        let (h, trace) = adaptive_histogram_traced(&chunk, &pattern, &cfg).unwrap();
        prop_assert_eq!(h, reference_histogram(&chunk));
        for g in 0..2 {
            for lane in 0..gs {
                for b in 0..256 {
                    let own = pattern.slot_for(b, lane);
                    for s in pattern.offset(b)..pattern.offset(b) + pattern.count(b) {
                        if s != own {
                            prop_assert_eq!(trace.hits(g, lane, s), 0);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn sequential_and_parallel_agree_on_large_chunk() {
    let chunk = generate(&SourceSpec::new(SourceKind::UniformRandom, 3, 1 << 20)).unwrap();
    let p = uniform_pattern(960, 8).unwrap();
    let par = WorkerGroupConfig::default();
    let seq = par.sequential();
    let expected = reference_histogram(&chunk);
    assert_eq!(naive_histogram(&chunk, &par).unwrap(), expected);
    assert_eq!(naive_histogram(&chunk, &seq).unwrap(), expected);
    assert_eq!(adaptive_histogram(&chunk, &p, &par).unwrap(), expected);
    assert_eq!(adaptive_histogram(&chunk, &p, &seq).unwrap(), expected);
}

#[test]
fn narrow_counters_report_overflow() {
    // One group, one bin, one slot: 70,000 increments wrap a 16-bit counter.
    let chunk = PackedChunk::pack(&vec![9u8; 70_000]).unwrap();
    let cfg = WorkerGroupConfig::new(1, 1).narrow();
    assert_eq!(
        naive_histogram(&chunk, &cfg),
        Err(Error::SubCounterOverflow)
    );
    let wide = WorkerGroupConfig::new(1, 1);
    assert_eq!(naive_histogram(&chunk, &wide).unwrap().get(9), 70_000);
}

#[test]
fn timing_only_variants_are_rejected_by_batch() {
    let p = uniform_pattern(960, 8).unwrap();
    let chunk = PackedChunk::from_words(vec![0; 4]);
    let err = batch_histograms(
        &[chunk],
        KernelKind::CopyOnly,
        &p,
        &WorkerGroupConfig::default(),
    );
    assert!(matches!(err, Err(Error::NotAHistogramKernel(_))));
}
