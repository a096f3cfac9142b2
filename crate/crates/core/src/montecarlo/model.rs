use serde::{Deserialize, Serialize};

use crate::constants::{NS_PER_US, SINGLE_GAMMA_BRANCHING_SCALE};
use crate::error::{require_positive, Error, Result};

/// Photon-energy shape for the stop quantum of a 3γ decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThreeGammaShape {
    /// Flat on (0, mₑc²).
    #[default]
    Uniform,
    /// Ore–Powell single-photon spectrum.
    OrePowell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Shoulder {
    pub enabled: bool,
    /// Time constant of the free-annihilation rise, ns. Zero means no rise.
    pub rise_time_ns: f64,
}

impl Default for Shoulder {
    fn default() -> Self {
        Self {
            enabled: true,
            rise_time_ns: 10.0,
        }
    }
}

/// Component intensities and rates of the lifetime spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnihilationModel {
    pub intensity_para: f64,
    pub intensity_ortho: f64,
    pub intensity_free: f64,
    pub rate_para_per_ns: f64,
    /// λ_T of the 3γ self-annihilation, μs⁻¹.
    pub rate_ortho_3gamma_per_us: f64,
    /// f_1γ: fraction of o-Ps decays through the single-quantum mode.
    pub anomaly_branching: f64,
    pub rate_free_per_ns: f64,
    pub three_gamma_shape: ThreeGammaShape,
    pub shoulder: Shoulder,
}

impl Default for AnnihilationModel {
    fn default() -> Self {
        Self {
            intensity_para: 0.1,
            intensity_ortho: 0.3,
            intensity_free: 0.6,
            rate_para_per_ns: 8.0,
            rate_ortho_3gamma_per_us: 7.038_30,
            anomaly_branching: SINGLE_GAMMA_BRANCHING_SCALE * 5.2780e4,
            rate_free_per_ns: 0.06,
            three_gamma_shape: ThreeGammaShape::Uniform,
            shoulder: Shoulder::default(),
        }
    }
}

impl AnnihilationModel {
    /// Pure o-Ps model with the given anomaly branching and no shoulder.
    pub fn ortho_only(anomaly_branching: f64) -> Self {
        Self {
            intensity_para: 0.0,
            intensity_ortho: 1.0,
            intensity_free: 0.0,
            anomaly_branching,
            shoulder: Shoulder {
                enabled: false,
                rise_time_ns: 0.0,
            },
            ..Self::default()
        }
    }

    /// Checks invariants, renormalizing intensities whose sum is within 10⁻³ of 1.
    pub fn validated(mut self) -> Result<Self> {
        let intensities = [
            ("model.intensity_para", self.intensity_para),
            ("model.intensity_ortho", self.intensity_ortho),
            ("model.intensity_free", self.intensity_free),
        ];
        for (field, v) in intensities {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    field,
                    format!("intensity must be >= 0, got {v}"),
                ));
            }
        }
        let sum = self.intensity_para + self.intensity_ortho + self.intensity_free;
        if (sum - 1.0).abs() > crate::gas::RENORMALIZE_TOLERANCE {
            return Err(Error::validation(
                "model.intensity_*",
                format!("intensities must sum to 1, got {sum}"),
            ));
        }
        if (sum - 1.0).abs() > 1.0e-12 {
            self.intensity_para /= sum;
            self.intensity_ortho /= sum;
            self.intensity_free /= sum;
        }
        require_positive("model.rate_para_per_ns", "rate", self.rate_para_per_ns)?;
        require_positive(
            "model.rate_ortho_3gamma_per_us",
            "rate",
            self.rate_ortho_3gamma_per_us,
        )?;
        require_positive("model.rate_free_per_ns", "rate", self.rate_free_per_ns)?;
        crate::error::require_in_closed(
            "model.anomaly_branching",
            "anomaly branching",
            self.anomaly_branching,
            0.0,
            1.0,
        )?;
        if !(self.shoulder.rise_time_ns.is_finite() && self.shoulder.rise_time_ns >= 0.0) {
            return Err(Error::validation(
                "model.shoulder.rise_time_ns",
                format!("rise time must be >= 0, got {}", self.shoulder.rise_time_ns),
            ));
        }
        Ok(self)
    }

    pub fn rate_ortho_3gamma_per_ns(&self) -> f64 {
        self.rate_ortho_3gamma_per_us / NS_PER_US
    }

    /// Total o-Ps decay rate λ_obs = λ_T/(1 − f_1γ), ns⁻¹. Infinite for f_1γ = 1.
    pub fn rate_ortho_observed_per_ns(&self) -> f64 {
        self.rate_ortho_3gamma_per_ns() / (1.0 - self.anomaly_branching)
    }
}

/// Instantaneous free-positron annihilation rate at delay `t_ns`, ns⁻¹.
pub fn shoulder_rate(t_ns: f64, model: &AnnihilationModel) -> f64 {
    let shoulder = model.shoulder;
    if !shoulder.enabled || shoulder.rise_time_ns <= 0.0 {
        return model.rate_free_per_ns;
    }
    if t_ns <= 0.0 {
        return 0.0;
    }
    model.rate_free_per_ns * (1.0 - (-t_ns / shoulder.rise_time_ns).exp())
}

/// Unnormalized Ore–Powell spectrum of one photon from o-Ps → 3γ, x = E/(mₑc²) in (0, 1).
pub fn ore_powell_density(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 2.0;
    }
    let y = 1.0 - x;
    let ln_y = y.ln();
    let two_minus_x = 2.0 - x;
    2.0 * (x * y / two_minus_x.powi(2) - 2.0 * y * y / two_minus_x.powi(3) * ln_y
        + two_minus_x / x
        + 2.0 * y / (x * x) * ln_y)
}
