use idstat::balance::{
    ladder_channels, log_slope, max_residual, packet_entropy_stirling, perturb, relax, stationary_population,
    total_quanta, uniform_bins, CondensatePopulation, Kind, RelaxOptions,
};
use idstat::distributions::Statistics;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(stat: Statistics, b: f64, c1: f64, c2: f64) -> (CondensatePopulation, CondensatePopulation) {
    let bins = uniform_bins(1.0, 0.25, 6, 8.0);
    let s_max = 48;
    (
        stationary_population(Kind::One, stat, bins.clone(), b, c1, s_max).unwrap(),
        stationary_population(Kind::Two, stat, bins, b, c2, s_max).unwrap(),
    )
}

fn energy(pop: &CondensatePopulation) -> f64 {
    total_quanta(pop).per_bin.iter().zip(pop.bins()).map(|(q, b)| q * b.energy).sum()
}

fn statistics() -> impl Strategy<Value = Statistics> {
    prop_oneof![Just(Statistics::Bose), Just(Statistics::Fermi)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stationary_populations_satisfy_every_channel(b in 1.0..3.0f64, c1 in -0.5..0.5f64, c2 in -0.5..0.5f64, stat in statistics()) {
        let (one, two) = pair(stat, b, c1, c2);
        let channels = ladder_channels(&one, &two);
        prop_assert!(max_residual(&one, &two, &channels).unwrap() <= 1e-12);
        for bin in 0..one.bins().len() {
            let slope = log_slope(&one, bin).unwrap();
            prop_assert!((slope + b * one.bins()[bin].energy - c1).abs() <= 1e-9);
        }
    }

    #[test]
    fn perturbation_conserves_invariants(seed in 0u64..1000, strength in 0.05..0.9f64, stat in statistics()) {
        let (mut one, mut two) = pair(stat, 1.5, 0.0, -0.3);
        let channels = ladder_channels(&one, &two);
        let before = (one.packets_per_bin(), two.packets_per_bin(), total_quanta(&one).total, total_quanta(&two).total, energy(&one) + energy(&two));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perturb(&mut one, &mut two, &channels, 500, strength, 4, &mut rng).unwrap();
        for (a, b) in one.packets_per_bin().iter().chain(&two.packets_per_bin()).zip(before.0.iter().chain(&before.1)) {
            prop_assert!((a - b).abs() <= 1e-9 * b);
        }
        prop_assert!((total_quanta(&one).total - before.2).abs() <= 1e-9 * before.2.max(1.0));
        prop_assert!((total_quanta(&two).total - before.3).abs() <= 1e-9 * before.3.max(1.0));
        prop_assert!((energy(&one) + energy(&two) - before.4).abs() <= 1e-9 * before.4.max(1.0));
        prop_assert!((0..one.bins().len()).all(|i| one.row(i).iter().all(|p| *p >= 0.0)));
    }
}

#[test]
fn relaxation_conserves_and_raises_entropy() {
    for (seed, stat) in [(1u64, Statistics::Bose), (2, Statistics::Fermi)] {
        let (mut one, mut two) = pair(stat, 1.5, 0.0, -0.3);
        let channels = ladder_channels(&one, &two);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perturb(&mut one, &mut two, &channels, 2000, 0.5, 4, &mut rng).unwrap();
        let start = packet_entropy_stirling(&one, 1.0).unwrap() + packet_entropy_stirling(&two, 1.0).unwrap();
        let options = RelaxOptions { seed, ..RelaxOptions::default() };
        let out = relax(&one, &two, &channels, options).unwrap();
        let mut last = f64::NEG_INFINITY;
        for rec in &out.history {
            assert!(rec.entropy >= last - 1e-9 * last.abs().max(1.0));
            last = rec.entropy;
        }
        assert!(last >= start);
        assert!((total_quanta(&out.first).total - total_quanta(&one).total).abs() < 1e-8);
        assert!((total_quanta(&out.second).total - total_quanta(&two).total).abs() < 1e-8);
        assert!(max_residual(&out.first, &out.second, &channels).unwrap() <= options.tol);
    }
}
