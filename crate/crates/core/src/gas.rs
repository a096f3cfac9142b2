//! Gas filling of the measuring chamber.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{require_positive, Error, Result};

/// Sums within this distance of 1 are renormalized on load; anything further is rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1.0e-3;

/// Number fractions by isotope label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IsotopeMix {
    fractions: BTreeMap<String, f64>,
}

impl IsotopeMix {
    /// Validates the fractions; a sum within [`RENORMALIZE_TOLERANCE`] of 1 is rescaled to 1.
    pub fn new(fractions: BTreeMap<String, f64>) -> Result<Self> {
        if fractions.is_empty() {
            return Err(Error::validation(
                "gas.fractions",
                "at least one isotope is required",
            ));
        }
        for (label, &f) in &fractions {
            if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
                return Err(Error::validation(
                    format!("gas.fractions.{label}"),
                    format!("fraction must be in [0, 1], got {f}"),
                ));
            }
        }
        let sum: f64 = fractions.values().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::validation(
                "gas.fractions",
                format!("fractions must sum to 1, got {sum}"),
            ));
        }
        let fractions = if (sum - 1.0).abs() > 1.0e-12 {
            fractions.into_iter().map(|(k, v)| (k, v / sum)).collect()
        } else {
            fractions
        };
        Ok(Self { fractions })
    }

    pub fn natural_neon() -> Self {
        let fractions = [("Ne-20", 0.907), ("Ne-21", 0.003), ("Ne-22", 0.090)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self { fractions }
    }

    pub fn fraction(&self, label: &str) -> Option<f64> {
        self.fractions.get(label).copied()
    }

    pub fn fractions(&self) -> &BTreeMap<String, f64> {
        &self.fractions
    }

    /// Re-runs the constructor checks; used after deserialization.
    pub fn validate(&self) -> Result<Self> {
        Self::new(self.fractions.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasState {
    pub pressure_atm: f64,
    pub chamber_radius_cm: f64,
    /// Label of the resonant isotope whose share enters the collective estimates.
    pub resonant_isotope: String,
    pub fractions: IsotopeMix,
}

impl Default for GasState {
    fn default() -> Self {
        Self {
            pressure_atm: 50.0,
            chamber_radius_cm: 2.0,
            resonant_isotope: "Ne-22".to_string(),
            fractions: IsotopeMix::natural_neon(),
        }
    }
}

impl GasState {
    /// Checks invariants and returns the state with renormalized fractions.
    pub fn validated(mut self) -> Result<Self> {
        require_positive("gas.pressure_atm", "pressure", self.pressure_atm)?;
        require_positive(
            "gas.chamber_radius_cm",
            "chamber radius",
            self.chamber_radius_cm,
        )?;
        self.fractions = self.fractions.validate()?;
        if self.fractions.fraction(&self.resonant_isotope).is_none() {
            return Err(Error::validation(
                "gas.resonant_isotope",
                format!("{:?} is not listed in gas.fractions", self.resonant_isotope),
            ));
        }
        Ok(self)
    }

    /// Share η of the resonant isotope.
    pub fn resonant_fraction(&self) -> f64 {
        self.fractions
            .fraction(&self.resonant_isotope)
            .unwrap_or(0.0)
    }
}

/// Total atom density ν = n_L·p, cm⁻³.
pub fn number_density(state: &GasState, constants: &PhysicalConstants) -> f64 {
    constants.loschmidt_density * state.pressure_atm
}

/// Density of one isotope, cm⁻³; zero for unlisted labels.
pub fn isotope_density(state: &GasState, constants: &PhysicalConstants, label: &str) -> f64 {
    number_density(state, constants) * state.fractions.fraction(label).unwrap_or(0.0)
}

/// V_g = (4/3)π·R_g³, cm³.
pub fn gas_volume(state: &GasState) -> f64 {
    sphere_volume(state.chamber_radius_cm)
}

pub(crate) fn sphere_volume(radius: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(p: f64, r: f64) -> GasState {
        GasState {
            pressure_atm: p,
            chamber_radius_cm: r,
            ..GasState::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn density_at_fifty_atm() {
        let c = PhysicalConstants::paper();
        let s = state(50.0, 2.0);
        assert!(rel(number_density(&s, &c), 1.35e21) < 1e-12);
        assert!(rel(isotope_density(&s, &c, "Ne-22"), 1.215e20) < 1e-12);
    }

    #[test]
    fn density_at_unit_and_high_pressure() {
        let c = PhysicalConstants::paper();
        assert!(rel(number_density(&state(1.0, 2.0), &c), 2.7e19) < 1e-12);
        assert!(rel(number_density(&state(75.0, 2.0), &c), 2.025e21) < 1e-12);
    }

    #[test]
    fn chamber_volumes() {
        assert!((gas_volume(&state(1.0, 2.0)) - 33.510_321_638).abs() < 1e-8);
        assert!((gas_volume(&state(1.0, 1.0)) - 4.188_790_205).abs() < 1e-8);
        assert!(rel(gas_volume(&state(1.0, 0.6204)), 1.0) < 1e-3);
    }

    #[test]
    fn negative_pressure_is_rejected() {
        let err = state(-1.0, 2.0).validated().unwrap_err();
        assert!(err.to_string().contains("pressure must be > 0"), "{err}");
    }

    #[test]
    fn fractions_are_renormalized_within_tolerance() {
        let raw: BTreeMap<String, f64> = [("a", 0.5), ("b", 0.5004)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let mix = IsotopeMix::new(raw).unwrap();
        let sum: f64 = mix.fractions().values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fractions_far_from_unity_are_rejected() {
        let raw: BTreeMap<String, f64> = [("a", 0.5), ("b", 0.4)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert!(IsotopeMix::new(raw).is_err());
        let raw: BTreeMap<String, f64> = [("a", 1.2), ("b", -0.2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert!(IsotopeMix::new(raw).is_err());
    }

    #[test]
    fn unknown_resonant_isotope_is_rejected() {
        let s = GasState {
            resonant_isotope: "Ar-40".into(),
            ..GasState::default()
        };
        assert!(s.validated().is_err());
    }

    proptest! {
        #[test]
        fn density_is_linear_in_pressure(p in 1e-3f64..1e3) {
            let c = PhysicalConstants::codata();
            let one = number_density(&state(p, 1.0), &c);
            let two = number_density(&state(2.0 * p, 1.0), &c);
            prop_assert_eq!(two, 2.0 * one);
        }

        #[test]
        fn volume_scales_cubically(r in 1e-3f64..1e2) {
            let v1 = gas_volume(&state(1.0, r));
            let v2 = gas_volume(&state(1.0, 2.0 * r));
            prop_assert!(((v2 - 8.0 * v1) / v2).abs() < 4.0 * f64::EPSILON);
        }
    }
}
