//! Physical constants and the two numeric profiles used throughout the crate.
//!
//! The `Paper` profile carries the rounded values printed alongside the
//! original neon estimates, so regression against those numbers reproduces
//! their rounding. `Codata` carries full-precision values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1 cm in fm.
pub const FM_PER_CM: f64 = 1.0e13;
pub const KEV_PER_MEV: f64 = 1.0e3;
pub const NS_PER_US: f64 = 1.0e3;
pub const PS_PER_NS: f64 = 1.0e3;

/// Branching of o-Ps → γ + U for a massless boson.
pub const SINGLE_GAMMA_BRANCHING_SCALE: f64 = 3.5e-8;

/// Prior experimental upper limit on single-photon o-Ps decay (≤ 4·10⁻⁴ %).
pub const SINGLE_PHOTON_PRIOR_LIMIT: f64 = 4.0e-6;

/// Dense-packing parameter compared against the ²²Ne share.
pub const PACKING_PARAMETER: f64 = 1.0 / 12.0;

/// Planck constant in eV·s, used to convert the hyperfine frequency.
const PLANCK_EV_S: f64 = 4.135_667_696e-15;

/// Measured o-Ps/p-Ps hyperfine interval, GHz.
const HYPERFINE_GHZ: f64 = 203.391_69;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Paper,
    Codata,
}

impl Profile {
    pub fn constants(self) -> PhysicalConstants {
        match self {
            Profile::Paper => PhysicalConstants::paper(),
            Profile::Codata => PhysicalConstants::codata(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Codata => "codata",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "codata" => Ok(Profile::Codata),
            other => Err(Error::validation(
                "profile",
                format!("unknown constant profile {other:?} (expected paper or codata)"),
            )),
        }
    }
}

/// Numeric anchors shared by every formula. Units are in the field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub profile: Profile,
    /// Fine-structure constant.
    pub alpha: f64,
    pub hbar_c_mev_fm: f64,
    /// mₑc².
    pub electron_mass_energy_mev: f64,
    pub hbar_ev_s: f64,
    /// Number density of an ideal gas per atmosphere, cm⁻³·atm⁻¹.
    pub loschmidt_density: f64,
    /// QED o-Ps decay rate, μs⁻¹.
    pub lambda_t_theor_per_us: f64,
    /// Quoted uncertainty of `lambda_t_theor_per_us`.
    pub lambda_t_theor_sigma_per_us: f64,
    pub tau_t_ns: f64,
    pub tau_s_ps: f64,
    /// Lifetime of the ²²Ne*(2⁺) start level.
    pub tau_star_ps: f64,
    /// 3/7 of the o-Ps/p-Ps hyperfine splitting, eV.
    pub hyperfine_energy_3_7_ev: f64,
}

impl PhysicalConstants {
    pub fn paper() -> Self {
        Self {
            profile: Profile::Paper,
            alpha: 1.0 / 137.036,
            hbar_c_mev_fm: 197.327,
            electron_mass_energy_mev: 0.511,
            hbar_ev_s: 6.582e-16,
            loschmidt_density: 2.7e19,
            lambda_t_theor_per_us: 7.038_30,
            lambda_t_theor_sigma_per_us: 0.000_05,
            tau_t_ns: 140.0,
            tau_s_ps: 125.0,
            tau_star_ps: 5.24,
            hyperfine_energy_3_7_ev: 3.6e-4,
        }
    }

    pub fn codata() -> Self {
        let lambda_t = 7.038_30;
        // p-Ps QED rate 7989.6 μs⁻¹
        let lambda_s_per_us = 7_989.6;
        Self {
            profile: Profile::Codata,
            alpha: 7.297_352_564_3e-3,
            hbar_c_mev_fm: 197.326_980_4,
            electron_mass_energy_mev: 0.510_998_950_69,
            hbar_ev_s: 6.582_119_569e-16,
            loschmidt_density: 2.686_780_111e19,
            lambda_t_theor_per_us: lambda_t,
            lambda_t_theor_sigma_per_us: 0.000_05,
            tau_t_ns: NS_PER_US / lambda_t,
            tau_s_ps: PS_PER_NS * NS_PER_US / lambda_s_per_us,
            tau_star_ps: 5.24,
            hyperfine_energy_3_7_ev: 3.0 / 7.0 * HYPERFINE_GHZ * 1.0e9 * PLANCK_EV_S,
        }
    }

    /// o-Ps QED rate in ns⁻¹.
    pub fn lambda_t_theor_per_ns(&self) -> f64 {
        self.lambda_t_theor_per_us / NS_PER_US
    }

    pub fn electron_mass_energy_kev(&self) -> f64 {
        self.electron_mass_energy_mev * KEV_PER_MEV
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("hbar_c_mev_fm", self.hbar_c_mev_fm),
            ("electron_mass_energy_mev", self.electron_mass_energy_mev),
            ("hbar_ev_s", self.hbar_ev_s),
            ("loschmidt_density", self.loschmidt_density),
            ("lambda_t_theor_per_us", self.lambda_t_theor_per_us),
            (
                "lambda_t_theor_sigma_per_us",
                self.lambda_t_theor_sigma_per_us,
            ),
            ("tau_t_ns", self.tau_t_ns),
            ("tau_s_ps", self.tau_s_ps),
            ("tau_star_ps", self.tau_star_ps),
            ("hyperfine_energy_3_7_ev", self.hyperfine_energy_3_7_ev),
        ];
        for (name, value) in fields {
            crate::error::require_positive(&format!("constants.{name}"), name, value)?;
        }
        let product = self.lambda_t_theor_per_ns() * self.tau_t_ns;
        if (product - 1.0).abs() > 0.02 {
            return Err(Error::validation(
                "constants.tau_t_ns",
                format!("lambda_T * tau_T must be 1 within 2%, got {product}"),
            ));
        }
        Ok(())
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::paper()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_profiles_validate() {
        PhysicalConstants::paper().validate().unwrap();
        PhysicalConstants::codata().validate().unwrap();
    }

    #[test]
    fn quoted_values_survive_in_paper_profile() {
        let c = PhysicalConstants::paper();
        assert_eq!(c.lambda_t_theor_per_us, 7.038_30);
        assert_eq!(c.tau_t_ns, 140.0);
        assert_eq!(c.tau_s_ps, 125.0);
        assert_eq!(c.tau_star_ps, 5.24);
        assert_eq!(c.hyperfine_energy_3_7_ev, 3.6e-4);
        assert_eq!(c.loschmidt_density, 2.7e19);
        assert!((1.0 / c.alpha - 137.036).abs() < 1e-9);
    }

    #[test]
    fn codata_hyperfine_is_close_to_quoted() {
        let c = PhysicalConstants::codata();
        assert!((c.hyperfine_energy_3_7_ev / 3.6e-4 - 1.0).abs() < 0.01);
        assert!((c.tau_t_ns - 142.08).abs() < 0.01);
    }

    #[test]
    fn rate_lifetime_inconsistency_is_rejected() {
        let mut c = PhysicalConstants::paper();
        c.tau_t_ns = 120.0;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("tau_t_ns"));
    }

    #[test]
    fn profile_parses() {
        assert_eq!("Paper".parse::<Profile>().unwrap(), Profile::Paper);
        assert_eq!("codata".parse::<Profile>().unwrap(), Profile::Codata);
        assert!("si".parse::<Profile>().is_err());
    }
}
