//! Closed-form estimates for the macroscopic collective nuclear (resonance)
//! state formed in neon after ²²Na β⁺ decay.
//!
//! Every function here is pure. [`full_report`] strings them together for a
//! gas configuration and is what `pals estimate` prints.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{
    PhysicalConstants, FM_PER_CM, PACKING_PARAMETER, SINGLE_GAMMA_BRANCHING_SCALE,
    SINGLE_PHOTON_PRIOR_LIMIT,
};
use crate::error::{Error, Result};
use crate::gas::{self, GasState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveState {
    /// Total number of collective units n̄.
    pub n_bar: f64,
    /// Share η of the resonant isotope.
    pub eta: f64,
    /// Resonant nuclei n = n̄·η.
    pub n: f64,
}

impl CollectiveState {
    pub fn new(n_bar: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::domain(
                "collective_state",
                format!("eta must be in (0, 1), got {eta}"),
            ));
        }
        Ok(Self {
            n_bar,
            eta,
            n: collective_size(n_bar, eta)?,
        })
    }
}

/// n = n̄·η.
pub fn collective_size(n_bar: f64, eta: f64) -> Result<f64> {
    if !(n_bar.is_finite() && n_bar > 0.0) {
        return Err(Error::domain(
            "collective_size",
            format!("n_bar must be > 0, got {n_bar}"),
        ));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(
            "collective_size",
            format!("eta must be in (0, 1], got {eta}"),
        ));
    }
    Ok(n_bar * eta)
}

/// Experimental lattice constant Δ_exp = (V_g/n̄)^(1/3), cm.
pub fn lattice_constant_exp(volume_cm3: f64, n_bar: f64) -> Result<f64> {
    if !(volume_cm3 > 0.0 && n_bar > 0.0) {
        return Err(Error::domain(
            "lattice_constant_exp",
            format!("volume and n_bar must be > 0, got {volume_cm3} and {n_bar}"),
        ));
    }
    Ok((volume_cm3 / n_bar).cbrt())
}

/// The virtual fundamental length evaluated through both of its algebraic forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConstantTheory {
    /// ħc/(3/7·ΔW), cm.
    pub exchange_form_cm: f64,
    /// (4/α⁴)·ħ/(mₑc), cm. This is the primary value.
    pub closed_form_cm: f64,
    /// |exchange − closed| / closed.
    pub relative_difference: f64,
}

pub fn lattice_constant_theory(constants: &PhysicalConstants) -> LatticeConstantTheory {
    let hbar_c_ev_cm = constants.hbar_c_mev_fm * 1.0e6 / FM_PER_CM;
    let exchange = hbar_c_ev_cm / constants.hyperfine_energy_3_7_ev;
    let compton_cm = constants.hbar_c_mev_fm / constants.electron_mass_energy_mev / FM_PER_CM;
    let closed = 4.0 / constants.alpha.powi(4) * compton_cm;
    LatticeConstantTheory {
        exchange_form_cm: exchange,
        closed_form_cm: closed,
        relative_difference: ((exchange - closed) / closed).abs(),
    }
}

/// Lifetime of the intermediate virtual photon, ħ/(3/7·ΔW), in ps.
pub fn virtual_photon_time(constants: &PhysicalConstants) -> f64 {
    constants.hbar_ev_s / constants.hyperfine_energy_3_7_ev * 1.0e12
}

/// Radius r_c from (4/3)π·r_c³ = n̄·Δ³, cm.
pub fn mcns_radius(n_bar: f64, delta_cm: f64) -> Result<f64> {
    if !(n_bar > 0.0 && delta_cm > 0.0) {
        return Err(Error::domain(
            "mcns_radius",
            format!("n_bar and delta must be > 0, got {n_bar} and {delta_cm}"),
        ));
    }
    Ok((3.0 * n_bar / (4.0 * PI)).cbrt() * delta_cm)
}

/// λ = 2πħc/E, cm.
pub fn gamma_wavelength(energy_mev: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(energy_mev.is_finite() && energy_mev > 0.0) {
        return Err(Error::domain(
            "gamma_wavelength",
            format!("energy must be > 0, got {energy_mev}"),
        ));
    }
    Ok(2.0 * PI * constants.hbar_c_mev_fm / energy_mev / FM_PER_CM)
}

/// Recoil-free fraction f_M = exp(−4π²·⟨x²⟩/λ²).
pub fn mossbauer_factor(mean_square_displacement_cm2: f64, wavelength_cm: f64) -> Result<f64> {
    if !(mean_square_displacement_cm2 >= 0.0) {
        return Err(Error::domain(
            "mossbauer_factor",
            format!("mean-square displacement must be >= 0, got {mean_square_displacement_cm2}"),
        ));
    }
    if !(wavelength_cm > 0.0) {
        return Err(Error::domain(
            "mossbauer_factor",
            format!("wavelength must be > 0, got {wavelength_cm}"),
        ));
    }
    Ok((-4.0 * PI * PI * mean_square_displacement_cm2 / (wavelength_cm * wavelength_cm)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceParameters {
    pub gamma_energy_mev: f64,
    pub wavelength_cm: f64,
    pub spin_ground: f64,
    pub spin_excited: f64,
    pub mean_square_displacement_cm2: f64,
    pub mossbauer_factor: f64,
}

impl ResonanceParameters {
    pub fn new(
        gamma_energy_mev: f64,
        spin_ground: f64,
        spin_excited: f64,
        mean_square_displacement_cm2: f64,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        if !(spin_ground >= 0.0 && spin_excited >= 0.0) {
            return Err(Error::domain("resonance_parameters", "spins must be >= 0"));
        }
        let wavelength_cm = gamma_wavelength(gamma_energy_mev, constants)?;
        let f_m = mossbauer_factor(mean_square_displacement_cm2, wavelength_cm)?;
        if f_m <= 0.0 {
            return Err(Error::domain(
                "resonance_parameters",
                "Mössbauer factor underflowed to zero",
            ));
        }
        Ok(Self {
            gamma_energy_mev,
            wavelength_cm,
            spin_ground,
            spin_excited,
            mean_square_displacement_cm2,
            mossbauer_factor: f_m,
        })
    }
}

/// σ_r = f_M·λ²·(2I₁+1) / (2π·(2I₀+1)), cm².
pub fn resonant_cross_section(params: &ResonanceParameters) -> f64 {
    let spin_factor = (2.0 * params.spin_excited + 1.0) / (2.0 * params.spin_ground + 1.0);
    params.mossbauer_factor * params.wavelength_cm.powi(2) * spin_factor / (2.0 * PI)
}

/// Resonant run length l = 1/(η·ν·σ_r), cm.
pub fn resonant_mean_free_path(eta: f64, nu_per_cm3: f64, sigma_r_cm2: f64) -> Result<f64> {
    if !(eta > 0.0 && nu_per_cm3 > 0.0 && sigma_r_cm2 > 0.0) {
        return Err(Error::domain(
            "resonant_mean_free_path",
            format!("eta, density and cross section must be > 0, got {eta}, {nu_per_cm3}, {sigma_r_cm2}"),
        ));
    }
    Ok(1.0 / (eta * nu_per_cm3 * sigma_r_cm2))
}

/// Σ_r = n·σ_r, cm².
pub fn macroscopic_cross_section(n: f64, sigma_r_cm2: f64) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::domain(
            "macroscopic_cross_section",
            format!("n must be > 0, got {n}"),
        ));
    }
    Ok(n * sigma_r_cm2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingComparison {
    /// Dense-packing parameter, 1/12.
    pub packing: f64,
    /// Share of the resonant isotope it is compared with.
    pub eta: f64,
    /// Spacing of resonant nuclei along the γ path, 2Δ, cm.
    pub two_delta: f64,
    /// l_γn / (2Δ).
    pub ratio: f64,
}

pub fn packing_comparison(
    eta: f64,
    delta_cm: f64,
    mean_free_path_cm: f64,
) -> Result<PackingComparison> {
    if !(eta > 0.0 && delta_cm > 0.0 && mean_free_path_cm > 0.0) {
        return Err(Error::domain(
            "packing_comparison",
            "eta, delta and path length must be > 0",
        ));
    }
    let two_delta = 2.0 * delta_cm;
    Ok(PackingComparison {
        packing: PACKING_PARAMETER,
        eta,
        two_delta,
        ratio: mean_free_path_cm / two_delta,
    })
}

/// B(o-Ps → γU) = 3.5·10⁻⁸·(1 − x⁴) with x = m_U/mₑ.
pub fn branching_single_gamma(mass_ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mass_ratio) {
        return Err(Error::domain(
            "branching_single_gamma",
            format!("mass ratio must be in [0, 1], got {mass_ratio}"),
        ));
    }
    Ok(SINGLE_GAMMA_BRANCHING_SCALE * (1.0 - mass_ratio.powi(4)))
}

/// Incoherent sum of the single-unit branching over `units` collective units.
pub fn amplified_branching(b_unit: f64, units: f64) -> Result<f64> {
    if !(b_unit > 0.0 && units > 0.0) {
        return Err(Error::domain(
            "amplified_branching",
            format!("branching and unit count must be > 0, got {b_unit} and {units}"),
        ));
    }
    let b = b_unit * units;
    if b > 1.0 {
        return Err(Error::domain(
            "amplified_branching",
            format!("amplified branching {b} exceeds probability 1"),
        ));
    }
    Ok(b)
}

/// Which count the single-unit branching is summed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplifyOver {
    /// All n̄ collective units.
    #[default]
    NBar,
    /// Only the n resonant nuclei.
    N,
}

/// Inputs to the collective-state estimates that are not gas properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McnrsInputs {
    pub n_bar: f64,
    /// Root-mean-square nuclear displacement along the γ direction, cm.
    pub rms_displacement_cm: f64,
    pub spin_ground: f64,
    pub spin_excited: f64,
    /// m_U / mₑ for the single-γ branching.
    pub boson_mass_ratio: f64,
    pub amplify_over: AmplifyOver,
}

impl Default for McnrsInputs {
    fn default() -> Self {
        Self {
            n_bar: 5.2780e4,
            rms_displacement_cm: 2.5e-13,
            spin_ground: 0.0,
            spin_excited: 2.0,
            boson_mass_ratio: 0.0,
            amplify_over: AmplifyOver::NBar,
        }
    }
}

impl McnrsInputs {
    pub fn validate(&self) -> Result<()> {
        crate::error::require_positive("mcnrs.n_bar", "n_bar", self.n_bar)?;
        if !(self.rms_displacement_cm >= 0.0 && self.rms_displacement_cm.is_finite()) {
            return Err(Error::validation(
                "mcnrs.rms_displacement_cm",
                format!(
                    "rms displacement must be >= 0, got {}",
                    self.rms_displacement_cm
                ),
            ));
        }
        crate::error::require_in_closed("mcnrs.spin_ground", "spin", self.spin_ground, 0.0, 20.0)?;
        crate::error::require_in_closed(
            "mcnrs.spin_excited",
            "spin",
            self.spin_excited,
            0.0,
            20.0,
        )?;
        crate::error::require_in_closed(
            "mcnrs.boson_mass_ratio",
            "mass ratio",
            self.boson_mass_ratio,
            0.0,
            1.0,
        )?;
        Ok(())
    }
}

/// Headline estimates. Field names are part of the JSON interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McnrsReport {
    pub n: f64,
    pub delta_exp: f64,
    pub delta_theory: f64,
    pub r_c: f64,
    pub sigma_r: f64,
    pub sigma_macroscopic: f64,
    pub mean_free_path: f64,
    pub branching_unit: f64,
    pub branching_amplified: f64,
    pub packing_parameter: f64,
    pub two_delta: f64,
    pub virtual_photon_time: f64,
    pub details: McnrsDetails,
}

/// Intermediate values and cross-checks behind the headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McnrsDetails {
    pub profile: String,
    pub n_bar: f64,
    pub eta: f64,
    pub gas_volume: f64,
    pub number_density: f64,
    pub resonant_density: f64,
    pub wavelength: f64,
    pub mossbauer_factor: f64,
    pub delta_exchange_form: f64,
    pub delta_relative_difference: f64,
    pub path_to_spacing_ratio: f64,
    pub branching_amplified_over_n_bar: f64,
    /// n·B, reported alongside the default n̄·B.
    pub branching_amplified_over_n: Option<f64>,
    pub amplify_over: AmplifyOver,
    pub prior_single_photon_limit: f64,
    pub ratio_to_prior_limit: f64,
    pub exceeds_prior_limit: bool,
}

impl McnrsReport {
    /// Units for every headline field.
    pub fn units() -> BTreeMap<&'static str, &'static str> {
        [
            ("n", "count"),
            ("delta_exp", "cm"),
            ("delta_theory", "cm"),
            ("r_c", "cm"),
            ("sigma_r", "cm^2"),
            ("sigma_macroscopic", "cm^2"),
            ("mean_free_path", "cm"),
            ("branching_unit", "dimensionless"),
            ("branching_amplified", "dimensionless"),
            ("packing_parameter", "dimensionless"),
            ("two_delta", "cm"),
            ("virtual_photon_time", "ps"),
        ]
        .into_iter()
        .collect()
    }

    /// Formula each headline field is computed from.
    pub fn provenance() -> BTreeMap<&'static str, &'static str> {
        [
            ("n", "collective size n = n_bar * eta"),
            ("delta_exp", "lattice constant (V_g / n_bar)^(1/3)"),
            (
                "delta_theory",
                "fundamental length (4/alpha^4) hbar/(m_e c)",
            ),
            ("r_c", "collective radius, (4/3) pi r_c^3 = n_bar Delta^3"),
            (
                "sigma_r",
                "resonant cross section f_M lambda^2 (2I1+1)/(2 pi (2I0+1))",
            ),
            ("sigma_macroscopic", "macroscopic cross section n sigma_r"),
            ("mean_free_path", "resonant run 1/(eta nu sigma_r)"),
            ("branching_unit", "o-Ps -> gamma U, 3.5e-8 (1 - x^4)"),
            (
                "branching_amplified",
                "incoherent sum over collective units",
            ),
            ("packing_parameter", "dense packing 1/12"),
            ("two_delta", "resonant-nucleus spacing 2 Delta"),
            ("virtual_photon_time", "hbar / (3/7 dW)"),
        ]
        .into_iter()
        .collect()
    }

    /// Headline fields in display order as (name, value).
    pub fn headline(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n", self.n),
            ("delta_exp", self.delta_exp),
            ("delta_theory", self.delta_theory),
            ("r_c", self.r_c),
            ("sigma_r", self.sigma_r),
            ("sigma_macroscopic", self.sigma_macroscopic),
            ("mean_free_path", self.mean_free_path),
            ("branching_unit", self.branching_unit),
            ("branching_amplified", self.branching_amplified),
            ("packing_parameter", self.packing_parameter),
            ("two_delta", self.two_delta),
            ("virtual_photon_time", self.virtual_photon_time),
        ]
    }
}

/// Runs every estimate for one gas configuration.
pub fn full_report(
    state: &GasState,
    constants: &PhysicalConstants,
    inputs: &McnrsInputs,
    gamma_energy_mev: f64,
) -> Result<McnrsReport> {
    inputs.validate()?;
    let eta = state.resonant_fraction();
    let n = collective_size(inputs.n_bar, eta)?;
    let volume = gas::gas_volume(state);
    let delta_exp = lattice_constant_exp(volume, inputs.n_bar)?;
    let theory = lattice_constant_theory(constants);
    let delta = theory.closed_form_cm;
    let r_c = mcns_radius(inputs.n_bar, delta)?;
    let resonance = ResonanceParameters::new(
        gamma_energy_mev,
        inputs.spin_ground,
        inputs.spin_excited,
        inputs.rms_displacement_cm.powi(2),
        constants,
    )?;
    let sigma_r = resonant_cross_section(&resonance);
    let sigma_macroscopic = macroscopic_cross_section(n, sigma_r)?;
    let nu = gas::number_density(state, constants);
    let mean_free_path = resonant_mean_free_path(eta, nu, sigma_r)?;
    let packing = packing_comparison(eta, delta, mean_free_path)?;
    let branching_unit = branching_single_gamma(inputs.boson_mass_ratio)?;
    let over_n_bar = if branching_unit > 0.0 {
        amplified_branching(branching_unit, inputs.n_bar)?
    } else {
        0.0
    };
    let over_n = if branching_unit > 0.0 {
        amplified_branching(branching_unit, n).ok()
    } else {
        Some(0.0)
    };
    let branching_amplified = match inputs.amplify_over {
        AmplifyOver::NBar => over_n_bar,
        AmplifyOver::N => over_n.ok_or_else(|| {
            Error::domain(
                "amplified_branching",
                "amplified branching over n exceeds probability 1",
            )
        })?,
    };
    let ratio_to_prior = branching_amplified / SINGLE_PHOTON_PRIOR_LIMIT;

    Ok(McnrsReport {
        n,
        delta_exp,
        delta_theory: delta,
        r_c,
        sigma_r,
        sigma_macroscopic,
        mean_free_path,
        branching_unit,
        branching_amplified,
        packing_parameter: packing.packing,
        two_delta: packing.two_delta,
        virtual_photon_time: virtual_photon_time(constants),
        details: McnrsDetails {
            profile: constants.profile.to_string(),
            n_bar: inputs.n_bar,
            eta,
            gas_volume: volume,
            number_density: nu,
            resonant_density: nu * eta,
            wavelength: resonance.wavelength_cm,
            mossbauer_factor: resonance.mossbauer_factor,
            delta_exchange_form: theory.exchange_form_cm,
            delta_relative_difference: theory.relative_difference,
            path_to_spacing_ratio: packing.ratio,
            branching_amplified_over_n_bar: over_n_bar,
            branching_amplified_over_n: over_n,
            amplify_over: inputs.amplify_over,
            prior_single_photon_limit: SINGLE_PHOTON_PRIOR_LIMIT,
            ratio_to_prior_limit: ratio_to_prior,
            exceeds_prior_limit: ratio_to_prior > 1.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    const N_BAR: f64 = 5.2780e4;

    #[test]
    fn collective_size_examples() {
        let n = collective_size(N_BAR, 0.09).unwrap();
        assert!(rel(n, 4750.2) < 1e-12);
        assert!(rel(n, 0.5e4) < 0.05);
        assert_eq!(collective_size(N_BAR, 1.0).unwrap(), N_BAR);
        assert!(rel(collective_size(N_BAR, 0.092).unwrap(), 4855.76) < 1e-12);
        assert!(collective_size(N_BAR, 0.0).is_err());
        assert!(collective_size(N_BAR, 1.5).is_err());
        assert!(CollectiveState::new(N_BAR, 1.0).is_err());
        assert_eq!(CollectiveState::new(N_BAR, 0.09).unwrap().n, N_BAR * 0.09);
    }

    #[test]
    fn lattice_constant_exp_examples() {
        let v = 4.0 / 3.0 * PI * 8.0;
        let d = lattice_constant_exp(v, N_BAR).unwrap();
        assert!((d - 8.596e-2).abs() < 1e-4, "{d}");
        assert_eq!(lattice_constant_exp(1.0, 1.0).unwrap(), 1.0);
        assert!(rel(lattice_constant_exp(8.0 * v, N_BAR).unwrap(), 2.0 * d) < 1e-14);
        assert!(lattice_constant_exp(0.0, N_BAR).is_err());
        assert!(lattice_constant_exp(v, -1.0).is_err());
    }

    #[test]
    fn theory_lattice_constant_both_forms() {
        let codata = lattice_constant_theory(&PhysicalConstants::codata());
        assert!(rel(codata.closed_form_cm, 5.45e-2) < 0.002, "{codata:?}");
        assert!(codata.relative_difference < 0.01);

        // 197.327 MeV·fm / 3.6e-4 eV
        let paper = lattice_constant_theory(&PhysicalConstants::paper());
        assert!(rel(paper.exchange_form_cm, 5.4813e-2) < 1e-4, "{paper:?}");
        assert!(paper.relative_difference < 0.01);
    }

    #[test]
    fn virtual_photon_time_examples() {
        let c = PhysicalConstants::paper();
        let t = virtual_photon_time(&c);
        assert!(rel(t, 1.8283) < 1e-3, "{t}");
        let mut doubled = c;
        doubled.hyperfine_energy_3_7_ev *= 2.0;
        assert!(rel(virtual_photon_time(&doubled), t / 2.0) < 1e-15);
        assert!(rel(t * 1e-12 * c.hyperfine_energy_3_7_ev / c.hbar_ev_s, 1.0) < 1e-15);
    }

    #[test]
    fn mcns_radius_examples() {
        assert!(rel(mcns_radius(N_BAR, 5.5e-2).unwrap(), 1.28) < 1e-3);
        let single = mcns_radius(1.0, 1.0).unwrap();
        assert!((single - 0.620_350_5).abs() < 1e-6);
        assert!(mcns_radius(0.0, 1.0).is_err());
    }

    #[test]
    fn wavelength_examples() {
        let c = PhysicalConstants::paper();
        let l = gamma_wavelength(1.27, &c).unwrap();
        assert!(rel(l, 9.7626e-11) < 1e-4, "{l}");
        assert!(rel(gamma_wavelength(2.54, &c).unwrap(), l / 2.0) < 1e-15);
        let compton = gamma_wavelength(0.511, &c).unwrap();
        assert!(rel(compton, 2.4263e-10) < 1e-3, "{compton}");
        assert!(gamma_wavelength(0.0, &c).is_err());
    }

    #[test]
    fn mossbauer_examples() {
        let f = mossbauer_factor(2.5e-13f64.powi(2), 9.77e-11).unwrap();
        assert!((f - 0.99974).abs() < 5e-5, "{f}");
        assert_eq!(mossbauer_factor(0.0, 9.77e-11).unwrap(), 1.0);
        let lam = 3.0e-10;
        let f = mossbauer_factor(lam * lam / (4.0 * PI * PI), lam).unwrap();
        assert!((f - (-1.0f64).exp()).abs() < 1e-15);
        assert!(mossbauer_factor(-1e-30, lam).is_err());
    }

    #[test]
    fn cross_section_examples() {
        let c = PhysicalConstants::paper();
        let p = ResonanceParameters::new(1.27, 0.0, 2.0, 0.0, &c).unwrap();
        let sigma = resonant_cross_section(&p);
        assert!(rel(sigma, 7.5e-21) < 0.02, "{sigma}");
        assert!(rel(sigma, 7.584e-21) < 1e-3, "{sigma}");

        let half = ResonanceParameters {
            mossbauer_factor: 0.5,
            ..p
        };
        assert!(rel(resonant_cross_section(&half), sigma / 2.0) < 1e-15);

        let scalar = ResonanceParameters::new(1.27, 0.0, 0.0, 0.0, &c).unwrap();
        let expect = scalar.wavelength_cm.powi(2) / (2.0 * PI);
        assert!(rel(resonant_cross_section(&scalar), expect) < 1e-15);
    }

    #[test]
    fn mean_free_path_examples() {
        let l = resonant_mean_free_path(0.09, 50.0 * 2.7e19, 7.5e-21).unwrap();
        assert!(rel(l, 1.1) < 0.01, "{l}");
        let l2 = resonant_mean_free_path(0.09, 50.0 * 2.7e19, 15e-21).unwrap();
        assert!(rel(l2, l / 2.0) < 1e-15);
        assert!(resonant_mean_free_path(0.09, 0.0, 1e-21).is_err());
    }

    #[test]
    fn macroscopic_cross_section_examples() {
        let s = macroscopic_cross_section(0.475e4, 7.5e-21).unwrap();
        assert!(rel(s, 3.5625e-17) < 1e-12);
        assert_eq!(macroscopic_cross_section(1.0, 7.5e-21).unwrap(), 7.5e-21);
        assert!(macroscopic_cross_section(0.0, 7.5e-21).is_err());
    }

    #[test]
    fn packing_examples() {
        let p = packing_comparison(0.09, 5.5e-2, 1.1).unwrap();
        assert!(rel(p.two_delta, 0.11) < 1e-12);
        assert!(rel(p.ratio, 10.0) < 1e-12);
        assert!((p.packing - 0.0833).abs() < 1e-4);
    }

    #[test]
    fn branching_examples() {
        assert_eq!(branching_single_gamma(0.0).unwrap(), 3.5e-8);
        assert_eq!(branching_single_gamma(1.0).unwrap(), 0.0);
        assert!(rel(branching_single_gamma(0.5).unwrap(), 3.28125e-8) < 1e-12);
        assert!(branching_single_gamma(1.1).is_err());
        assert!(branching_single_gamma(-0.1).is_err());

        let amp = amplified_branching(3.5e-8, N_BAR).unwrap();
        assert!(rel(amp, 1.8473e-3) < 1e-12);
        assert_eq!(amplified_branching(3.5e-8, 1.0).unwrap(), 3.5e-8);
        assert!(rel(amp / SINGLE_PHOTON_PRIOR_LIMIT, 461.825) < 1e-5);
        assert!(amplified_branching(1e-3, 2e3).is_err());
    }

    #[test]
    fn report_composes_individual_operations() {
        let c = PhysicalConstants::paper();
        let state = GasState::default();
        let r = full_report(&state, &c, &McnrsInputs::default(), 1.27).unwrap();
        assert_eq!(r.n, collective_size(N_BAR, 0.09).unwrap());
        assert_eq!(r.delta_theory, lattice_constant_theory(&c).closed_form_cm);
        assert_eq!(r.r_c, mcns_radius(N_BAR, r.delta_theory).unwrap());
        assert_eq!(r.two_delta, 2.0 * r.delta_theory);
        assert!(r.details.exceeds_prior_limit);
        assert!(r.details.branching_amplified_over_n.unwrap() < r.branching_amplified);

        let json = serde_json::to_string(&r).unwrap();
        let back: McnrsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn pure_isotope_gives_n_equal_n_bar() {
        let mut fractions = BTreeMap::new();
        fractions.insert("Ne-22".to_string(), 1.0);
        let state = GasState {
            fractions: crate::gas::IsotopeMix::new(fractions).unwrap(),
            ..GasState::default()
        };
        let r = full_report(
            &state,
            &PhysicalConstants::paper(),
            &McnrsInputs::default(),
            1.27,
        )
        .unwrap();
        assert_eq!(r.n, N_BAR);
    }

    proptest! {
        #[test]
        fn radius_round_trip(n_bar in 1.0f64..1e8, delta in 1e-4f64..10.0) {
            let r = mcns_radius(n_bar, delta).unwrap();
            let lhs = 4.0 / 3.0 * PI * r.powi(3);
            let rhs = n_bar * delta.powi(3);
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }

        #[test]
        fn mean_free_path_inverse(eta in 1e-3f64..1.0, nu in 1e15f64..1e23, sigma in 1e-25f64..1e-18) {
            let l = resonant_mean_free_path(eta, nu, sigma).unwrap();
            prop_assert!((l * (eta * nu * sigma) - 1.0).abs() < 4.0 * f64::EPSILON);
        }

        #[test]
        fn branching_decreases(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(branching_single_gamma(lo).unwrap() >= branching_single_gamma(hi).unwrap());
        }

        #[test]
        fn lattice_constant_scales(v in 1e-3f64..1e4, n_bar in 1.0f64..1e6, k in 0.1f64..10.0) {
            let a = lattice_constant_exp(k.powi(3) * v, n_bar).unwrap();
            let b = k * lattice_constant_exp(v, n_bar).unwrap();
            prop_assert!(((a - b) / b).abs() < 1e-13);
        }

        #[test]
        fn cross_section_monotone(msd1 in 0.0f64..1e-21, msd2 in 0.0f64..1e-21, e1 in 0.1f64..5.0, e2 in 0.1f64..5.0) {
            let c = PhysicalConstants::codata();
            // larger f_M (smaller displacement) at fixed λ
            let (small, large) = if msd1 < msd2 { (msd1, msd2) } else { (msd2, msd1) };
            let p_small = ResonanceParameters::new(1.27, 0.0, 2.0, small, &c).unwrap();
            let p_large = ResonanceParameters::new(1.27, 0.0, 2.0, large, &c).unwrap();
            prop_assert!(p_small.mossbauer_factor <= 1.0 && p_large.mossbauer_factor > 0.0);
            prop_assert!(resonant_cross_section(&p_small) >= resonant_cross_section(&p_large));
            // longer λ (lower energy) at f_M = 1
            let (lo_e, hi_e) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let long = ResonanceParameters::new(lo_e, 0.0, 2.0, 0.0, &c).unwrap();
            let short = ResonanceParameters::new(hi_e, 0.0, 2.0, 0.0, &c).unwrap();
            prop_assert!(resonant_cross_section(&long) >= resonant_cross_section(&short));
        }
    }
}
