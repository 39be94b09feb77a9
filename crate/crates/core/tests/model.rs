use fairdiv_core::model::{fairness_report, sample_instance, FairnessFlags};
use fairdiv_core::{Allocation, DistributionSpec, Instance, RngStream};
use proptest::prelude::*;

fn random_allocation(n: usize, m: usize, rng: &mut RngStream, complete: bool) -> Allocation {
    let mut bundles = vec![Vec::new(); n];
    for j in 0..m {
        if complete || rng.uniform() < 0.8 {
            bundles[rng.below(n)].push(j);
        }
    }
    Allocation::from_bundles(m, bundles).unwrap()
}

fn sum_over(inst: &Instance, i: usize, bundle: &[usize], skip: Option<usize>) -> f64 {
    bundle
        .iter()
        .filter(|&&j| Some(j) != skip)
        .map(|&j| inst.utility(i, j))
        .sum()
}

/// Straight transcription of the four definitions.
fn brute_flags(inst: &Instance, alloc: &Allocation) -> FairnessFlags {
    let n = inst.n();
    let b = alloc.bundles();
    let mut flags = FairnessFlags {
        envy_free: true,
        ef1: true,
        efx: true,
        proportional: true,
    };
    for i in 0..n {
        let own = sum_over(inst, i, &b[i], None);
        let all: f64 = (0..inst.m()).map(|j| inst.utility(i, j)).sum();
        if own < all / n as f64 {
            flags.proportional = false;
        }
        for (k, other_bundle) in b.iter().enumerate() {
            if k == i {
                continue;
            }
            let other = sum_over(inst, i, other_bundle, None);
            if own < other {
                flags.envy_free = false;
                if !other_bundle
                    .iter()
                    .any(|&g| own >= sum_over(inst, i, other_bundle, Some(g)))
                {
                    flags.ef1 = false;
                }
                if !other_bundle
                    .iter()
                    .all(|&g| own >= sum_over(inst, i, other_bundle, Some(g)))
                {
                    flags.efx = false;
                }
            }
        }
    }
    flags
}

#[test]
fn report_matches_definitions_on_small_instances() {
    let spec = DistributionSpec::uniform();
    let mut rng = RngStream::from_seed(71);
    for _ in 0..1000 {
        let (n, m) = (1 + rng.below(4), rng.below(7));
        let inst = sample_instance(n, m, &spec, &mut rng).unwrap();
        let complete = rng.uniform() < 0.5;
        let alloc = random_allocation(n, m, &mut rng, complete);
        assert_eq!(
            fairness_report(&inst, &alloc).flags,
            brute_flags(&inst, &alloc)
        );
    }
}

#[test]
fn implication_chain_on_complete_allocations() {
    let spec = DistributionSpec::truncated_normal(0.6, 0.25).unwrap();
    let mut rng = RngStream::from_seed(72);
    let mut ef_seen = 0;
    for _ in 0..10_000 {
        let (n, m) = (1 + rng.below(5), 1 + rng.below(8));
        let inst = sample_instance(n, m, &spec, &mut rng).unwrap();
        let f = fairness_report(&inst, &random_allocation(n, m, &mut rng, true)).flags;
        assert!(!f.envy_free || f.efx);
        assert!(!f.efx || f.ef1);
        ef_seen += usize::from(f.envy_free);
    }
    assert!(ef_seen > 100);
}

proptest! {
    #[test]
    fn witness_present_iff_a_flag_fails(seed in any::<u64>(), n in 1usize..5, m in 0usize..8) {
        let mut rng = RngStream::from_seed(seed);
        let inst = sample_instance(n, m, &DistributionSpec::uniform(), &mut rng).unwrap();
        let report = fairness_report(&inst, &random_allocation(n, m, &mut rng, false));
        let all_ok = report.flags.envy_free && report.flags.proportional;
        prop_assert_eq!(report.witness.is_none(), all_ok);
    }

    #[test]
    fn instance_json_roundtrip(seed in any::<u64>(), n in 1usize..4, m in 0usize..5) {
        let inst = sample_instance(n, m, &DistributionSpec::uniform(), &mut RngStream::from_seed(seed)).unwrap();
        let text = serde_json::to_string(&inst).unwrap();
        prop_assert_eq!(serde_json::from_str::<Instance>(&text).unwrap(), inst);
    }
}
