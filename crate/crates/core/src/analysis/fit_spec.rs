use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::montecarlo::UniformAxis;

/// Per-bin variance assumed by the fit objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    /// Poisson deviance 2Σ[μ − n + n·ln(n/μ)].
    #[default]
    Poisson,
    /// Σ(n − μ)²/max(n, 1).
    GaussianApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    #[default]
    Free,
    Fixed,
}

/// Optional constraints on one exponential component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ComponentSpec {
    /// Holds the rate at this value, ns⁻¹.
    pub fixed_rate_per_ns: Option<f64>,
    /// Starting rate, ns⁻¹; auto-initialized when absent.
    pub initial_rate_per_ns: Option<f64>,
}

/// Lifetime-spectrum model: n exponentials ⊗ Gaussian response + flat background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitModelSpec {
    pub n_components: usize,
    /// Constraints by component; missing entries are free with auto start values.
    pub components: Vec<ComponentSpec>,
    pub background: BackgroundMode,
    /// Fixed level, or starting level when free, counts/bin.
    pub background_per_bin: Option<f64>,
    /// Timing response FWHM, ns. Defaults to the detector's value.
    pub response_fwhm_ns: Option<f64>,
    pub response_free: bool,
    pub time_zero_ns: f64,
    pub time_zero_free: bool,
    /// Bins whose centers fall in `[start, end)` enter the objective.
    pub fit_window_ns: [f64; 2],
    pub variance_model: VarianceModel,
    pub max_iterations: usize,
}

impl Default for FitModelSpec {
    fn default() -> Self {
        Self {
            n_components: 2,
            components: Vec::new(),
            background: BackgroundMode::Free,
            background_per_bin: None,
            response_fwhm_ns: None,
            response_free: false,
            time_zero_ns: 0.0,
            time_zero_free: false,
            // late enough that the free-positron rise has settled
            fit_window_ns: [50.0, 1000.0],
            variance_model: VarianceModel::Poisson,
            max_iterations: 200,
        }
    }
}

/// Response FWHM used when neither the fit nor the detector section sets one, ns.
pub const DEFAULT_RESPONSE_FWHM_NS: f64 = 0.3;

impl FitModelSpec {
    /// Single free component with free background over `window`.
    pub fn single(window: [f64; 2]) -> Self {
        Self {
            n_components: 1,
            fit_window_ns: window,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::validation(
                "fit.n_components",
                "need at least one component",
            ));
        }
        if self.components.len() > self.n_components {
            return Err(Error::validation(
                "fit.components",
                format!(
                    "{} component entries for n_components = {}",
                    self.components.len(),
                    self.n_components
                ),
            ));
        }
        for (j, c) in self.components.iter().enumerate() {
            if let Some(r) = c.fixed_rate_per_ns {
                require_positive(&format!("fit.components[{j}].fixed_rate_per_ns"), "rate", r)?;
            }
            if let Some(r) = c.initial_rate_per_ns {
                require_positive(
                    &format!("fit.components[{j}].initial_rate_per_ns"),
                    "rate",
                    r,
                )?;
            }
        }
        match (self.background, self.background_per_bin) {
            (BackgroundMode::Fixed, None) => {
                return Err(Error::validation(
                    "fit.background_per_bin",
                    "a fixed background needs background_per_bin",
                ))
            }
            (_, Some(b)) if !(b.is_finite() && b >= 0.0) => {
                return Err(Error::validation(
                    "fit.background_per_bin",
                    format!("background must be >= 0, got {b}"),
                ))
            }
            _ => {}
        }
        if let Some(w) = self.response_fwhm_ns {
            require_positive("fit.response_fwhm_ns", "response FWHM", w)?;
        }
        let [a, b] = self.fit_window_ns;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::validation(
                "fit.fit_window_ns",
                format!("fit window must be a nonempty interval, got [{a}, {b})"),
            ));
        }
        if !self.time_zero_ns.is_finite() {
            return Err(Error::validation(
                "fit.time_zero_ns",
                "time zero must be finite",
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation(
                "fit.max_iterations",
                "need at least one iteration",
            ));
        }
        Ok(())
    }

    /// Checks that the fit window lies inside `axis` and returns the bins it selects.
    pub fn window_bins(&self, axis: &UniformAxis) -> Result<std::ops::Range<usize>> {
        let [a, b] = self.fit_window_ns;
        let tol = 1e-9 * axis.span();
        if a < axis.min - tol || b > axis.max + tol {
            return Err(Error::validation(
                "fit.fit_window_ns",
                format!(
                    "fit window [{a}, {b}) is outside the histogram range [{}, {})",
                    axis.min, axis.max
                ),
            ));
        }
        let first = (0..axis.bins)
            .find(|&i| axis.center(i) >= a)
            .unwrap_or(axis.bins);
        let end = (0..axis.bins)
            .rev()
            .find(|&i| axis.center(i) < b)
            .map_or(0, |i| i + 1);
        if first >= end {
            return Err(Error::validation(
                "fit.fit_window_ns",
                "fit window holds no bin centers",
            ));
        }
        Ok(first..end)
    }

    pub fn component(&self, j: usize) -> ComponentSpec {
        self.components.get(j).copied().unwrap_or_default()
    }

    pub fn response_fwhm(&self) -> f64 {
        self.response_fwhm_ns.unwrap_or(DEFAULT_RESPONSE_FWHM_NS)
    }
}
