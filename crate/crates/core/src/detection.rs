//! Delayed γn–γa coincidence measurement: source, stop detector, and the
//! random-to-true coincidence relation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{require_in_half_open, require_positive, Error, Result};

/// Full width at half maximum over standard deviation for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Reference energy of the resolution figure, keV.
pub const RESOLUTION_ANCHOR_KEV: f64 = 511.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSpec {
    pub label: String,
    /// Positron source power Q, s⁻¹.
    pub activity_per_s: f64,
    pub nuclear_gamma_energy_mev: f64,
    /// τ* of the start level, ps.
    pub nuclear_lifetime_ps: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            label: "Na-22".to_string(),
            activity_per_s: 1.0e6,
            nuclear_gamma_energy_mev: 1.27,
            nuclear_lifetime_ps: 5.24,
        }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.activity_per_s.is_finite() && self.activity_per_s >= 0.0) {
            return Err(Error::validation(
                "source.activity_per_s",
                format!("activity must be >= 0, got {}", self.activity_per_s),
            ));
        }
        require_positive(
            "source.nuclear_gamma_energy_mev",
            "nuclear gamma energy",
            self.nuclear_gamma_energy_mev,
        )?;
        require_positive(
            "source.nuclear_lifetime_ps",
            "nuclear lifetime",
            self.nuclear_lifetime_ps,
        )
    }

    pub fn nuclear_gamma_energy_kev(&self) -> f64 {
        self.nuclear_gamma_energy_mev * 1.0e3
    }
}

/// Half-open deposited-energy interval `[lo, hi)` in keV.
pub type KevWindow = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyWindows {
    pub annihilation_low_kev: KevWindow,
    pub full_energy_kev: KevWindow,
    pub nuclear_kev: KevWindow,
}

impl Default for EnergyWindows {
    fn default() -> Self {
        Self {
            annihilation_low_kev: [400.0, 600.0],
            full_energy_kev: [900.0, 1150.0],
            nuclear_kev: [1150.0, 1400.0],
        }
    }
}

impl EnergyWindows {
    fn labelled(&self) -> [(EnergyLabel, KevWindow); 3] {
        [
            (EnergyLabel::AnnihilationLow, self.annihilation_low_kev),
            (EnergyLabel::FullEnergy, self.full_energy_kev),
            (EnergyLabel::Nuclear, self.nuclear_kev),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let windows = self.labelled();
        for (label, [lo, hi]) in windows {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                return Err(Error::validation(
                    format!("detector.windows.{label}"),
                    format!("window must satisfy 0 <= lo < hi, got [{lo}, {hi})"),
                ));
            }
        }
        for (i, (la, a)) in windows.iter().enumerate() {
            for (lb, b) in &windows[i + 1..] {
                if a[0] < b[1] && b[0] < a[1] {
                    return Err(Error::validation(
                        "detector.windows",
                        format!("windows {la} and {lb} overlap"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyLabel {
    AnnihilationLow,
    FullEnergy,
    Nuclear,
    Other,
}

impl fmt::Display for EnergyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyLabel::AnnihilationLow => "annihilation_low",
            EnergyLabel::FullEnergy => "full_energy",
            EnergyLabel::Nuclear => "nuclear",
            EnergyLabel::Other => "other",
        })
    }
}

/// Stop detector. Efficiencies and solid angles are scalar fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    /// ε for annihilation quanta (≤ 0.5 MeV).
    pub eff_low: f64,
    /// ε for the 1.27 MeV nuclear quantum.
    pub eff_high: f64,
    /// Ω₂(1.27) as a fraction of 4π.
    pub solid_angle_high: f64,
    /// Mean Ω̄₂(≤ 0.5) in bad geometry, fraction of 4π.
    pub solid_angle_low_mean: f64,
    /// Full coincidence window Δτ, ns.
    pub resolving_time_ns: f64,
    /// Gaussian timing response FWHM, ns.
    pub timing_fwhm_ns: f64,
    /// Relative energy FWHM at 511 keV.
    pub energy_fwhm_511: f64,
    pub windows: EnergyWindows,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            eff_low: 0.4,
            eff_high: 0.2,
            solid_angle_high: 0.1,
            solid_angle_low_mean: 0.1,
            resolving_time_ns: 1.0,
            timing_fwhm_ns: 0.3,
            energy_fwhm_511: 0.10,
            windows: EnergyWindows::default(),
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        require_in_half_open("detector.eff_low", "efficiency", self.eff_low, 0.0, 1.0)?;
        require_in_half_open("detector.eff_high", "efficiency", self.eff_high, 0.0, 1.0)?;
        require_in_half_open(
            "detector.solid_angle_high",
            "solid angle fraction",
            self.solid_angle_high,
            0.0,
            1.0,
        )?;
        require_in_half_open(
            "detector.solid_angle_low_mean",
            "solid angle fraction",
            self.solid_angle_low_mean,
            0.0,
            1.0,
        )?;
        require_positive(
            "detector.resolving_time_ns",
            "resolving time",
            self.resolving_time_ns,
        )?;
        require_positive(
            "detector.timing_fwhm_ns",
            "timing FWHM",
            self.timing_fwhm_ns,
        )?;
        require_positive(
            "detector.energy_fwhm_511",
            "energy FWHM",
            self.energy_fwhm_511,
        )?;
        self.windows.validate()
    }

    pub fn timing_sigma_ns(&self) -> f64 {
        self.timing_fwhm_ns / FWHM_PER_SIGMA
    }

    /// σ_E at `energy_kev`, scaling as √E from the 511 keV anchor.
    pub fn energy_sigma_kev(&self, energy_kev: f64) -> f64 {
        let sigma_anchor = self.energy_fwhm_511 * RESOLUTION_ANCHOR_KEV / FWHM_PER_SIGMA;
        sigma_anchor * (energy_kev.max(0.0) / RESOLUTION_ANCHOR_KEV).sqrt()
    }

    /// ε_1.27·Ω₂(1.27) / (ε_0.5·Ω̄₂(≤0.5)).
    pub fn nuclear_to_annihilation_ratio(&self) -> f64 {
        (self.eff_high * self.solid_angle_high) / (self.eff_low * self.solid_angle_low_mean)
    }

    /// Share of random stops caused by the nuclear quantum.
    pub fn nuclear_random_fraction(&self) -> f64 {
        let r = self.nuclear_to_annihilation_ratio();
        r / (2.0 + r)
    }
}

/// R/C = Q·Δτ·[2 + ε_1.27·Ω₂(1.27) / (ε_0.5·Ω̄₂(≤0.5))].
///
/// Δτ is taken as the full coincidence window.
pub fn random_to_true_ratio(source: &SourceSpec, det: &DetectorSpec) -> f64 {
    let resolving_time_s = det.resolving_time_ns * 1.0e-9;
    source.activity_per_s * resolving_time_s * (2.0 + det.nuclear_to_annihilation_ratio())
}

/// Flat random-coincidence level in counts per ns of delay axis for a run
/// with `true_coincidences` recorded trues spread over a `window_ns` axis.
pub fn random_rate_density(
    source: &SourceSpec,
    det: &DetectorSpec,
    true_coincidences: f64,
    window_ns: f64,
) -> f64 {
    random_to_true_ratio(source, det) * true_coincidences / window_ns
}

/// Assigns a deposited energy to its window; anything outside is `Other`.
pub fn classify_energy(deposited_kev: f64, det: &DetectorSpec) -> EnergyLabel {
    det.windows
        .labelled()
        .into_iter()
        .find(|(_, [lo, hi])| deposited_kev >= *lo && deposited_kev < *hi)
        .map_or(EnergyLabel::Other, |(label, _)| label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn detector_with_ratio_half() -> DetectorSpec {
        DetectorSpec::default()
    }

    #[test]
    fn default_detector_is_valid_and_has_ratio_half() {
        let d = detector_with_ratio_half();
        d.validate().unwrap();
        assert!((d.nuclear_to_annihilation_ratio() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratio_example() {
        let s = SourceSpec {
            activity_per_s: 1e6,
            ..SourceSpec::default()
        };
        let rc = random_to_true_ratio(&s, &detector_with_ratio_half());
        assert!((rc - 2.5e-3).abs() < 1e-15);
    }

    #[test]
    fn no_source_no_randoms() {
        let s = SourceSpec {
            activity_per_s: 0.0,
            ..SourceSpec::default()
        };
        assert_eq!(random_to_true_ratio(&s, &DetectorSpec::default()), 0.0);
        assert_eq!(
            random_rate_density(&s, &DetectorSpec::default(), 1e6, 1000.0),
            0.0
        );
    }

    #[test]
    fn background_density_example() {
        let s = SourceSpec::default();
        let d = detector_with_ratio_half();
        let b = random_rate_density(&s, &d, 1e6, 1000.0);
        assert!((b - 2.5).abs() < 1e-12);
        let b_half = random_rate_density(&s, &d, 1e6, 500.0);
        assert!((b_half - 2.0 * b).abs() < 1e-12);
    }

    #[test]
    fn energy_labels() {
        let d = DetectorSpec::default();
        assert_eq!(classify_energy(511.0, &d), EnergyLabel::AnnihilationLow);
        assert_eq!(classify_energy(1022.0, &d), EnergyLabel::FullEnergy);
        assert_eq!(classify_energy(1270.0, &d), EnergyLabel::Nuclear);
        assert_eq!(classify_energy(100.0, &d), EnergyLabel::Other);
        assert_eq!(classify_energy(1150.0, &d), EnergyLabel::Nuclear);
        assert_eq!(classify_energy(5000.0, &d), EnergyLabel::Other);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let mut d = DetectorSpec::default();
        d.windows.full_energy_kev = [900.0, 1200.0];
        assert!(d.validate().is_err());
        d.windows.full_energy_kev = [1000.0, 900.0];
        assert!(d.validate().is_err());
    }

    #[test]
    fn invalid_efficiency_rejected() {
        let d = DetectorSpec {
            eff_low: 0.0,
            ..DetectorSpec::default()
        };
        let err = d.validate().unwrap_err();
        assert!(err.to_string().contains("detector.eff_low"));
    }

    #[test]
    fn energy_resolution_scaling() {
        let d = DetectorSpec::default();
        let s511 = d.energy_sigma_kev(511.0);
        assert!((s511 * FWHM_PER_SIGMA - 51.1).abs() < 1e-12);
        assert!((d.energy_sigma_kev(2044.0) - 2.0 * s511).abs() < 1e-12);
    }

    fn arb_detector() -> impl Strategy<Value = DetectorSpec> {
        (
            1e-3f64..=1.0,
            1e-3f64..=1.0,
            1e-3f64..=1.0,
            1e-3f64..=1.0,
            1e-2f64..10.0,
        )
            .prop_map(|(el, eh, oh, ol, dt)| DetectorSpec {
                eff_low: el,
                eff_high: eh,
                solid_angle_high: oh,
                solid_angle_low_mean: ol,
                resolving_time_ns: dt,
                ..DetectorSpec::default()
            })
    }

    proptest! {
        #[test]
        fn ratio_linear_in_activity_and_window(det in arb_detector(), q in 0.0f64..1e8) {
            let s1 = SourceSpec { activity_per_s: q, ..SourceSpec::default() };
            let s2 = SourceSpec { activity_per_s: 2.0 * q, ..SourceSpec::default() };
            let r1 = random_to_true_ratio(&s1, &det);
            prop_assert_eq!(random_to_true_ratio(&s2, &det), 2.0 * r1);
            let det2 = DetectorSpec { resolving_time_ns: 2.0 * det.resolving_time_ns, ..det.clone() };
            let r2 = random_to_true_ratio(&s1, &det2);
            prop_assert!((r2 - 2.0 * r1).abs() <= 1e-15 * r2.abs());
            prop_assert!(r1 >= 2.0 * q * det.resolving_time_ns * 1e-9 * (1.0 - 1e-15));
        }

        #[test]
        fn classification_is_total(e in 0.0f64..1e5) {
            let d = DetectorSpec::default();
            let label = classify_energy(e, &d);
            let hits = d.windows.labelled().iter().filter(|(_, [lo, hi])| e >= *lo && e < *hi).count();
            prop_assert!(hits <= 1);
            prop_assert_eq!(hits == 0, label == EnergyLabel::Other);
        }
    }
}
