use serde::{Deserialize, Serialize};

use super::fit::FitResult;
use crate::constants::{PhysicalConstants, NS_PER_US};
use crate::error::{Error, Result};

/// Lifetimes accepted as the o-Ps component, ns.
pub const ORTHO_LIFETIME_RANGE_NS: (f64, f64) = (50.0, 500.0);

/// Published relative excess of the o-Ps rate over theory: two measurements
/// bracketing the anomaly, with their quoted errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBand {
    pub low: f64,
    pub low_sigma: f64,
    pub high: f64,
    pub high_sigma: f64,
}

impl Default for ReferenceBand {
    fn default() -> Self {
        Self {
            low: 0.0014,
            low_sigma: 0.00023,
            high: 0.0019,
            high_sigma: 0.0002,
        }
    }
}

impl ReferenceBand {
    pub fn labels(&self) -> [String; 2] {
        [
            format!("{} ± {}", self.high, self.high_sigma),
            format!("{} ± {}", self.low, self.low_sigma),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEstimate {
    /// Index of the o-Ps component in `FitResult::components`.
    pub component: usize,
    pub lambda_obs_per_us: f64,
    pub lambda_obs_sigma_per_us: f64,
    pub lambda_theor_per_us: f64,
    pub lambda_theor_sigma_per_us: f64,
    /// (λ_obs − λ_theor)/λ_theor
    pub fraction: f64,
    pub sigma: f64,
    pub reference_band: ReferenceBand,
    /// Band widened by the combined uncertainties at each end.
    pub compatible_interval: [f64; 2],
    pub compatible: bool,
}

/// Relative o-Ps rate excess over the theoretical 3γ rate.
///
/// The o-Ps component is the longest-lived one with lifetime inside
/// [`ORTHO_LIFETIME_RANGE_NS`].
pub fn extract_anomaly(fit: &FitResult, constants: &PhysicalConstants) -> Result<AnomalyEstimate> {
    if !fit.converged {
        return Err(Error::Analysis("fit did not converge".into()));
    }
    let (lo, hi) = ORTHO_LIFETIME_RANGE_NS;
    let (index, comp) = fit
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| (lo..=hi).contains(&c.lifetime_ns.value))
        .max_by(|a, b| a.1.lifetime_ns.value.total_cmp(&b.1.lifetime_ns.value))
        .ok_or_else(|| {
            Error::Analysis(format!(
                "no fitted component with lifetime in [{lo}, {hi}] ns; fitted lifetimes {:?}",
                fit.components
                    .iter()
                    .map(|c| c.lifetime_ns.value)
                    .collect::<Vec<_>>()
            ))
        })?;
    if !comp.identifiable {
        return Err(Error::Analysis(format!(
            "o-Ps component {index} is not identifiable"
        )));
    }
    let rate_sigma = comp.rate_per_ns.sigma.ok_or_else(|| {
        Error::Analysis(format!("o-Ps component {index} has no rate uncertainty"))
    })?;
    let rate = comp.rate_per_ns.value;
    let theor = constants.lambda_t_theor_per_ns();
    let theor_sigma = constants.lambda_t_theor_sigma_per_us / NS_PER_US;
    let fraction = (rate - theor) / theor;
    let sigma =
        ((rate_sigma / theor).powi(2) + (rate * theor_sigma / (theor * theor)).powi(2)).sqrt();
    let band = ReferenceBand::default();
    let interval = [
        band.low - (sigma * sigma + band.low_sigma * band.low_sigma).sqrt(),
        band.high + (sigma * sigma + band.high_sigma * band.high_sigma).sqrt(),
    ];
    Ok(AnomalyEstimate {
        component: index,
        lambda_obs_per_us: rate * NS_PER_US,
        lambda_obs_sigma_per_us: rate_sigma * NS_PER_US,
        lambda_theor_per_us: constants.lambda_t_theor_per_us,
        lambda_theor_sigma_per_us: constants.lambda_t_theor_sigma_per_us,
        fraction,
        sigma,
        reference_band: band,
        compatible_interval: interval,
        compatible: fraction >= interval[0] && fraction <= interval[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fit::{Estimate, FittedComponent};
    use crate::analysis::fit_spec::VarianceModel;

    fn fit_with_rate(rate_per_ns: f64, sigma: f64) -> FitResult {
        let comp = |rate: f64| FittedComponent {
            rate_per_ns: Estimate {
                value: rate,
                sigma: Some(sigma),
            },
            lifetime_ns: Estimate::exact(1.0 / rate),
            intensity: Estimate::exact(0.5),
            amplitude: Estimate::exact(1e6),
            rate_fixed: false,
            identifiable: true,
        };
        FitResult {
            components: vec![comp(rate_per_ns), comp(0.06)],
            background_per_bin: Estimate::exact(1.0),
            time_zero_ns: Estimate::exact(0.0),
            response_fwhm_ns: Estimate::exact(0.3),
            chi2: 1.0,
            pearson_chi2: 1.0,
            dof: 1,
            variance_model: VarianceModel::Poisson,
            converged: true,
            iterations: 1,
            gradient_decrement: 0.0,
            last_step: 0.0,
            fit_window_ns: [0.0, 1.0],
            bins_used: 3,
            parameter_names: vec![],
            covariance: None,
            identifiable: true,
            diagnostics: vec![],
        }
    }

    #[test]
    fn theory_rate_gives_zero() {
        let c = PhysicalConstants::paper();
        let a = extract_anomaly(&fit_with_rate(c.lambda_t_theor_per_ns(), 1e-6), &c).unwrap();
        assert_eq!(a.fraction, 0.0);
        assert!(a.sigma > 0.0);
        assert!(!a.compatible);
    }

    #[test]
    fn injected_anomaly_lands_in_band() {
        let c = PhysicalConstants::paper();
        let a = extract_anomaly(&fit_with_rate(7.05132e-3, 1e-7), &c).unwrap();
        assert!((a.fraction - 1.85e-3).abs() < 1e-5, "{}", a.fraction);
        assert!(a.compatible);
        // theory uncertainty alone: 0.00005/7.0383
        assert!(
            (a.sigma - (1e-4f64.powi(2) / 7.0383f64.powi(2) + (5e-5 / 7.0383f64).powi(2)).sqrt())
                .abs()
                < 1e-7
        );
    }

    #[test]
    fn band_labels() {
        assert_eq!(
            ReferenceBand::default().labels(),
            [
                "0.0019 ± 0.0002".to_string(),
                "0.0014 ± 0.00023".to_string()
            ]
        );
    }

    #[test]
    fn refuses_without_ortho_component() {
        let c = PhysicalConstants::paper();
        assert!(extract_anomaly(&fit_with_rate(0.5, 1e-6), &c).is_err());
        let mut f = fit_with_rate(0.007, 1e-6);
        f.converged = false;
        assert!(extract_anomaly(&f, &c).is_err());
    }
}
