//! End-to-end closure of simulator and fitter against independent oracles.

use pals_core::analysis::{fit_lifetime, FitModelSpec, LineWindow, VarianceModel};
use pals_core::detection::{DetectorSpec, SourceSpec};
use pals_core::montecarlo::{
    shoulder_rate, simulate_spectrum, AnnihilationModel, Component, EventSampler, ResponseOptions,
    Shoulder, SimulationSettings, TimeEnergyHistogram, UniformAxis,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bare() -> ResponseOptions {
    ResponseOptions {
        timing: false,
        energy: false,
        ..ResponseOptions::default()
    }
}

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).max((i + 1) as f64 / n - c)
        })
        .fold(0.0, f64::max)
}

#[test]
fn shoulder_delays_follow_their_survival_function() {
    let model = AnnihilationModel {
        intensity_para: 0.0,
        intensity_ortho: 0.0,
        intensity_free: 1.0,
        shoulder: Shoulder {
            enabled: true,
            rise_time_ns: 10.0,
        },
        ..AnnihilationModel::default()
    };
    let sampler = EventSampler::new(
        &model,
        &DetectorSpec::default(),
        &SourceSpec::default(),
        bare(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 50_000;
    let xs: Vec<f64> = (0..n)
        .map(|_| sampler.sample(&mut rng).true_time_ns)
        .collect();
    // S(t) = exp(-∫ rate), integrated by hand: λ (t - r (1 - e^{-t/r}))
    let (lambda, r) = (model.rate_free_per_ns, 10.0);
    let d = ks(xs, |t| {
        1.0 - (-lambda * (t - r * (1.0 - (-t / r).exp()))).exp()
    });
    assert!(d < 1.6276 / (n as f64).sqrt(), "KS D = {d}");
    // and the rate helper agrees with the same hazard
    assert!((shoulder_rate(10.0, &model) - lambda * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
}

#[test]
fn anomaly_branching_is_the_single_quantum_share() {
    let model = AnnihilationModel::ortho_only(0.05);
    let sampler = EventSampler::new(
        &model,
        &DetectorSpec::default(),
        &SourceSpec::default(),
        bare(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 200_000;
    let single = (0..n)
        .filter(|_| sampler.sample(&mut rng).component == Component::Ortho1g)
        .count() as f64;
    let sd = (n as f64 * 0.05 * 0.95).sqrt();
    assert!((single - 0.05 * n as f64).abs() < 4.0 * sd, "{single}");
}

fn two_component_spectrum(events: u64, seed: u64) -> TimeEnergyHistogram {
    let model = AnnihilationModel {
        intensity_para: 0.25,
        intensity_ortho: 0.75,
        intensity_free: 0.0,
        rate_para_per_ns: 1.0 / 0.125,
        rate_ortho_3gamma_per_us: 1e3 / 142.0,
        anomaly_branching: 0.0,
        shoulder: Shoulder {
            enabled: false,
            rise_time_ns: 0.0,
        },
        ..AnnihilationModel::default()
    };
    let sim = SimulationSettings {
        events,
        seed,
        bins: 10_200,
        ..SimulationSettings::default()
    };
    simulate_spectrum(
        &model,
        &DetectorSpec::default(),
        &SourceSpec::default(),
        &sim,
    )
    .unwrap()
}

#[test]
fn two_component_spectrum_closes() {
    let hist = two_component_spectrum(2_000_000, 21);
    let spec = FitModelSpec {
        n_components: 2,
        time_zero_free: true,
        response_fwhm_ns: Some(DetectorSpec::default().timing_fwhm_ns),
        fit_window_ns: [-3.0, 1000.0],
        ..FitModelSpec::default()
    };
    let fit = fit_lifetime(&hist, &spec).unwrap();
    assert!(fit.converged, "{:?}", fit.diagnostics);
    let truth = [(142.0, 0.75), (0.125, 0.25)];
    for (c, (tau, intensity)) in fit.components.iter().zip(truth) {
        let t = c.lifetime_ns;
        let s = t.sigma.unwrap();
        assert!(
            (t.value - tau).abs() < 4.0 * s + 0.01 * tau,
            "lifetime {} ± {s} vs {tau}",
            t.value
        );
        let i = c.intensity;
        assert!(
            (i.value - intensity).abs() < 4.0 * i.sigma.unwrap() + 2e-3,
            "intensity {} vs {intensity}",
            i.value
        );
    }
}

fn ortho_sigma(events: u64, seed: u64) -> f64 {
    let sim = SimulationSettings {
        events,
        seed,
        ..SimulationSettings::default()
    };
    let hist = simulate_spectrum(
        &AnnihilationModel::ortho_only(1.85e-3),
        &DetectorSpec::default(),
        &SourceSpec::default(),
        &sim,
    )
    .unwrap();
    let fit = fit_lifetime(&hist, &FitModelSpec::single([5.0, 1000.0])).unwrap();
    fit.components[0].rate_per_ns.sigma.unwrap()
}

#[test]
fn rate_uncertainty_scales_as_inverse_root_n() {
    let small = ortho_sigma(100_000, 31);
    let large = ortho_sigma(1_000_000, 32);
    let ratio = small / large;
    let expected = 10f64.sqrt();
    assert!((ratio / expected - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn gaussian_approx_argmin_is_invariant_under_count_scaling() {
    let axis = UniformAxis::new(0.0, 600.0, 300).unwrap();
    let hist = simulate_spectrum(
        &AnnihilationModel::ortho_only(0.0),
        &DetectorSpec::default(),
        &SourceSpec {
            activity_per_s: 2e6,
            ..SourceSpec::default()
        },
        &SimulationSettings {
            events: 500_000,
            seed: 4,
            t_min_ns: axis.min,
            t_max_ns: axis.max,
            bins: axis.bins,
            ..SimulationSettings::default()
        },
    )
    .unwrap();
    assert!(
        hist.time_counts.iter().all(|&n| n >= 1),
        "every bin must be populated"
    );
    let spec = FitModelSpec {
        variance_model: VarianceModel::GaussianApprox,
        ..FitModelSpec::single([5.0, 600.0])
    };
    let base = fit_lifetime(&hist, &spec).unwrap();
    let k = 7;
    let scaled = TimeEnergyHistogram::from_time_counts(
        axis,
        hist.time_counts.iter().map(|n| n * k).collect(),
    )
    .unwrap();
    let fit = fit_lifetime(&scaled, &spec).unwrap();
    assert!(base.converged && fit.converged);
    let (r0, r1) = (
        base.components[0].rate_per_ns.value,
        fit.components[0].rate_per_ns.value,
    );
    assert!((r1 / r0 - 1.0).abs() < 1e-6, "{r0} vs {r1}");
    let (a0, a1) = (
        base.components[0].amplitude.value,
        fit.components[0].amplitude.value,
    );
    assert!((a1 / (k as f64 * a0) - 1.0).abs() < 1e-6, "{a0} vs {a1}");
    // uncertainties shrink by √k
    let s0 = base.components[0].rate_per_ns.sigma.unwrap();
    let s1 = fit.components[0].rate_per_ns.sigma.unwrap();
    assert!((s0 / s1 / (k as f64).sqrt() - 1.0).abs() < 1e-4);
}

#[test]
fn line_window_covers_smeared_line_events() {
    let det = DetectorSpec::default();
    let line = LineWindow::single_quantum(&det);
    let sampler = EventSampler::new(
        &AnnihilationModel::ortho_only(1.0),
        &det,
        &SourceSpec::default(),
        ResponseOptions {
            timing: false,
            energy: true,
            ..ResponseOptions::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 100_000;
    let inside = (0..n)
        .map(|_| sampler.sample(&mut rng))
        .filter(|e| (e.deposited_energy_kev - line.line_kev).abs() <= line.half_width_kev)
        .count();
    let coverage = inside as f64 / n as f64;
    assert!(coverage >= 0.95, "coverage {coverage}");
}
