use fairdiv_core::assignment_dynamics::{
    greedy_assignment, greedy_uniform_random, simulate_markov, trajectory_deviation,
};
use fairdiv_core::model::{is_ef_assignment, rankings_from_instance, sample_instance};
use fairdiv_core::oracle::exists_ef_assignment_bruteforce;
use fairdiv_core::{DistributionSpec, RankingProfile, RngStream};
use proptest::prelude::*;

fn z_score(a: usize, b: usize, trials: usize) -> f64 {
    let (pa, pb) = (a as f64 / trials as f64, b as f64 / trials as f64);
    let pooled = (pa + pb) / 2.0;
    let se = (2.0 * pooled * (1.0 - pooled) / trials as f64)
        .sqrt()
        .max(1e-9);
    (pa - pb).abs() / se
}

/// Lazily revealed rankings, full uniform profiles and rankings induced by a
/// non-uniform utility distribution all give the same success law.
#[test]
fn lazy_rankings_match_full_profiles() {
    const TRIALS: usize = 3000;
    let (n, m) = (40, 105);
    let spec =
        DistributionSpec::piecewise_linear(vec![(0.0, 0.4), (0.5, 1.2), (1.0, 1.2)]).unwrap();
    let mut rng = RngStream::from_seed(121);
    let (mut lazy, mut full, mut induced) = (0, 0, 0);
    for _ in 0..TRIALS {
        lazy += usize::from(greedy_uniform_random(n, m, &mut rng).0.is_some());
        full += usize::from(
            greedy_assignment(&RankingProfile::uniform_random(n, m, &mut rng))
                .0
                .is_some(),
        );
        let inst = sample_instance(n, m, &spec, &mut rng).unwrap();
        induced += usize::from(
            greedy_assignment(&rankings_from_instance(&inst))
                .0
                .is_some(),
        );
    }
    assert!(
        lazy > TRIALS / 10 && lazy < TRIALS * 9 / 10,
        "cell too far from the transition: {lazy}"
    );
    assert!(
        z_score(lazy, full, TRIALS) < 4.0,
        "lazy {lazy} vs full {full}"
    );
    assert!(
        z_score(lazy, induced, TRIALS) < 4.0,
        "lazy {lazy} vs induced {induced}"
    );
}

#[test]
fn greedy_success_agrees_with_exhaustive_search() {
    let mut rng = RngStream::from_seed(122);
    for _ in 0..10_000 {
        let profile = RankingProfile::uniform_random(1 + rng.below(4), 1 + rng.below(7), &mut rng);
        let (found, _) = greedy_assignment(&profile);
        assert_eq!(
            found.is_some(),
            exists_ef_assignment_bruteforce(&profile).unwrap().is_some()
        );
        if let Some(a) = found {
            assert!(is_ef_assignment(&profile, &a).unwrap().envy_free);
        }
    }
}

#[test]
fn markov_deviation_shrinks_with_m() {
    let mean_dev = |m: usize| {
        (0..20u64)
            .map(|k| {
                trajectory_deviation(
                    &simulate_markov(m, &mut RngStream::derive(123, &[m as u64, k])).unwrap(),
                )
                .unwrap()
            })
            .sum::<f64>()
            / 20.0
    };
    let (small, large) = (mean_dev(1_000), mean_dev(50_000));
    assert!(large < small / 2.0, "{small} -> {large}");
}

proptest! {
    #[test]
    fn greedy_trajectory_shape(seed in any::<u64>(), n in 1usize..10, m in 1usize..25) {
        let mut rng = RngStream::from_seed(seed);
        let (res, tr) = greedy_uniform_random(n, m, &mut rng);
        prop_assert!(tr.satisfies_identity());
        prop_assert_eq!(res.is_some(), tr.max_y() >= n);
        prop_assert!(tr.x.windows(2).all(|w| w[1] <= w[0]));
        for (dx, dy) in tr.x.windows(2).zip(tr.y.windows(2)) {
            let step = (dx[1] as i64 - dx[0] as i64, dy[1] as i64 - dy[0] as i64);
            prop_assert!(step == (-1, 1) || step == (0, -1));
        }
        if res.is_none() {
            prop_assert_eq!((*tr.x.last().unwrap(), *tr.y.last().unwrap()), (0, 0));
        }
    }

    #[test]
    fn markov_trajectory_shape(seed in any::<u64>(), m in 1usize..400) {
        let tr = simulate_markov(m, &mut RngStream::from_seed(seed)).unwrap();
        prop_assert!(tr.is_complete() && tr.satisfies_identity());
        prop_assert!(tr.x.windows(2).all(|w| w[1] <= w[0] && w[0] - w[1] <= 1));
        prop_assert!(trajectory_deviation(&tr).unwrap() >= 0.0);
    }
}
