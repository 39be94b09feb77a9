use fairdiv_core::allocators::{
    balanced_ef_subroutine, balanced_value_floor, round_robin, simulate_rr_generative, Algorithm,
};
use fairdiv_core::model::{fairness_report, sample_instance};
use fairdiv_core::stats::ks_two_sample;
use fairdiv_core::{DistributionSpec, RngStream};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_allocator_returns_a_partition(seed in any::<u64>(), n in 1usize..9, m in 0usize..30) {
        let mut rng = RngStream::from_seed(seed);
        let inst = sample_instance(n, m, &DistributionSpec::uniform(), &mut rng).unwrap();
        for algo in Algorithm::ALL {
            let Ok(res) = algo.run(&inst, 1.0) else { continue };
            prop_assert!(!matches!(res.algorithm, Algorithm::EfxAuto));
            let Some(alloc) = res.allocation else { continue };
            prop_assert!(alloc.validate(&inst).is_ok());
            let complete = matches!(
                res.algorithm,
                Algorithm::RoundRobin | Algorithm::RoundRobinReversedLast | Algorithm::EfxViaEf | Algorithm::MaximumAssignment
            );
            prop_assert!(!complete || alloc.is_complete(), "{} left items out", res.algorithm);
        }
    }

    #[test]
    fn first_picker_envies_nobody(seed in any::<u64>(), n in 1usize..9, m in 1usize..40) {
        let inst = sample_instance(n, m, &DistributionSpec::uniform(), &mut RngStream::from_seed(seed)).unwrap();
        let alloc = round_robin(&inst).0.allocation.unwrap();
        let own: f64 = alloc.bundle(0).iter().map(|&j| inst.utility(0, j)).sum();
        for k in 1..n {
            let other: f64 = alloc.bundle(k).iter().map(|&j| inst.utility(0, j)).sum();
            prop_assert!(own >= other);
        }
    }

    #[test]
    fn balanced_subroutine_successes_are_certified(seed in any::<u64>(), n in 2usize..7, r in 1usize..4) {
        let m = r * n + 1;
        let inst = sample_instance(n, m, &DistributionSpec::uniform(), &mut RngStream::from_seed(seed)).unwrap();
        let items: Vec<usize> = (0..r * n).collect();
        let floor = balanced_value_floor(n, m, 1.0);
        if let Some(alloc) = balanced_ef_subroutine(&inst, &items, r, floor).unwrap() {
            prop_assert!(alloc.bundles().iter().all(|b| b.len() == r));
            prop_assert!(fairness_report(&inst, &alloc).flags.envy_free);
            for i in 0..n {
                prop_assert!(alloc.bundle(i).iter().all(|&j| inst.utility(i, j) >= floor));
            }
        }
    }
}

/// Cross-agent and later-round entries of the value tensor follow the same
/// law whether produced by round-robin or by the sequential sampler.
#[test]
fn sampler_matches_round_robin_beyond_first_picks() {
    const N: usize = 20_000;
    let (n, m) = (4, 11);
    let entries = [
        (0, 0, 2),
        (1, 0, 1),
        (0, 1, 1),
        (3, 2, 2),
        (2, 3, 2),
        (0, 2, 3),
    ];
    for (ix, spec) in [
        DistributionSpec::uniform(),
        DistributionSpec::truncated_normal(0.3, 0.2).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = RngStream::derive(91, &[ix as u64]);
        let mut real = vec![Vec::with_capacity(N); entries.len()];
        let mut sampled = vec![Vec::with_capacity(N); entries.len()];
        for _ in 0..N {
            let inst = sample_instance(n, m, &spec, &mut rng).unwrap();
            let x = round_robin(&inst).1.value_tensor(&inst);
            let y = simulate_rr_generative(n, m, &spec, &mut rng).unwrap();
            for (k, &(viewer, receiver, t)) in entries.iter().enumerate() {
                real[k].push(x.get(viewer, receiver, t).unwrap());
                sampled[k].push(y.get(viewer, receiver, t).unwrap());
            }
        }
        for (k, entry) in entries.iter().enumerate() {
            let ks = ks_two_sample(&real[k], &sampled[k]);
            assert!(ks <= 0.02, "{spec} entry {entry:?}: KS {ks}");
        }
    }
}
