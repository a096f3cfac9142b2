//! Lifetime-spectrum fitting, anomaly extraction and the energy-line search.
//!
//! The model is Σ_j A_j·λ_j·exp(−λ_j(t − t₀)) convolved with a Gaussian timing
//! response and integrated over each bin, plus a flat background per bin.

pub mod anomaly;
mod emg;
pub mod fit;
pub mod fit_spec;
pub mod grid;
pub mod line;
mod optimizer;
pub mod problem;

pub use anomaly::{extract_anomaly, AnomalyEstimate, ReferenceBand, ORTHO_LIFETIME_RANGE_NS};
pub use emg::{bin_integral, bin_mass, BinIntegral};
pub use fit::{fit_lifetime, fit_problem_with_start, Estimate, FitResult, FittedComponent};
pub use fit_spec::{
    BackgroundMode, ComponentSpec, FitModelSpec, VarianceModel, DEFAULT_RESPONSE_FWHM_NS,
};
pub use grid::{grid_oracle_fit, GridOracleResult, GridOrder, GridRanges, GRID_POINTS};
pub use line::{energy_line_search, li_ma_significance, LineSearchResult, LineWindow};
pub use optimizer::{GRADIENT_TOLERANCE, STEP_TOLERANCE};
pub use problem::{FitProblem, ModelPoint};
