use pals_core::analysis::{bin_mass, li_ma_significance};
use pals_core::detection::{DetectorSpec, SourceSpec};
use pals_core::io::{parse_spectrum_csv, spectrum_csv};
use pals_core::montecarlo::{
    simulate_spectrum, AnnihilationModel, SimulationSettings, TimeEnergyHistogram, UniformAxis,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bin_mass_is_additive_and_bounded(
        rate in 1e-3f64..10.0,
        sigma in 1e-3f64..2.0,
        t0 in -3.0f64..3.0,
        lo in -50.0f64..500.0,
        w1 in 1e-3f64..100.0,
        w2 in 1e-3f64..100.0,
    ) {
        let a = bin_mass(rate, sigma, t0, lo, lo + w1);
        let b = bin_mass(rate, sigma, t0, lo + w1, lo + w1 + w2);
        let whole = bin_mass(rate, sigma, t0, lo, lo + w1 + w2);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        prop_assert!((a + b - whole).abs() <= 1e-12 + 1e-9 * whole);
    }

    #[test]
    fn simulated_counts_are_conserved(events in 1u64..5_000, seed in any::<u64>(), ortho in 0.0f64..1.0) {
        let model = AnnihilationModel {
            intensity_para: 0.0,
            intensity_ortho: ortho,
            intensity_free: 1.0 - ortho,
            ..AnnihilationModel::default()
        };
        let sim = SimulationSettings { events, seed, chunk_size: 512, ..SimulationSettings::default() };
        let h = simulate_spectrum(&model, &DetectorSpec::default(), &SourceSpec::default(), &sim).unwrap();
        prop_assert_eq!(h.total_counts(), h.metadata.n_true + h.metadata.n_random);
        prop_assert_eq!(h.metadata.n_true, events);
    }

    #[test]
    fn li_ma_sign_follows_the_excess(on in 0u32..2_000, off in 0u32..2_000, alpha in 0.05f64..5.0) {
        let s = li_ma_significance(on as f64, off as f64, alpha);
        prop_assert!(s.is_finite());
        let excess = on as f64 - alpha * off as f64;
        if excess.abs() > 1e-9 && on + off > 0 {
            prop_assert_eq!(s > 0.0, excess > 0.0);
        }
        // more on-counts never lower the significance
        prop_assert!(li_ma_significance(on as f64 + 1.0, off as f64, alpha) >= s - 1e-12);
    }

    #[test]
    fn spectrum_csv_round_trips(counts in prop::collection::vec(0u64..1_000_000, 2..300), min in -50.0f64..0.0, width in 0.01f64..5.0) {
        let axis = UniformAxis::new(min, min + width * counts.len() as f64, counts.len()).unwrap();
        let h = TimeEnergyHistogram::from_time_counts(axis, counts).unwrap();
        let back = parse_spectrum_csv(&spectrum_csv(&h, &[])).unwrap();
        prop_assert_eq!(back.hist.time_counts, h.time_counts);
        prop_assert_eq!(back.hist.time_axis, h.time_axis);
    }
}
