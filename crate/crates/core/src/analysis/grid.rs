//! Exhaustive two-pass grid minimization over (rate, amplitude).
//!
//! Evaluates the very objective the optimizer uses but shares none of its
//! search logic, so the two can check each other.

use serde::{Deserialize, Serialize};

use super::fit::{Estimate, FitResult, FittedComponent};
use super::fit_spec::{BackgroundMode, FitModelSpec};
use super::problem::{FitProblem, ModelPoint};
use crate::detection::FWHM_PER_SIGMA;
use crate::error::{Error, Result};
use crate::montecarlo::TimeEnergyHistogram;

pub const GRID_POINTS: usize = 41;

/// Which axis varies fastest while scanning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridOrder {
    #[default]
    RateMajor,
    AmplitudeMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRanges {
    pub rate_per_ns: (f64, f64),
    pub amplitude: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracleResult {
    pub fit: FitResult,
    /// Refined-pass spacing.
    pub rate_cell_per_ns: f64,
    pub amplitude_cell: f64,
}

fn linspace(lo: f64, hi: f64, i: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64
}

struct Scan {
    best: (f64, usize, usize),
}

impl Scan {
    fn offer(&mut self, value: f64, i: usize, j: usize) {
        // lexicographic tie-break keeps the result independent of scan order
        let cand = (value, i, j);
        let better = match cand.0.total_cmp(&self.best.0) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => (i, j) < (self.best.1, self.best.2),
            std::cmp::Ordering::Greater => false,
        };
        if better {
            self.best = cand;
        }
    }
}

fn scan(
    problem: &FitProblem,
    base: &ModelPoint,
    rates: (f64, f64),
    amps: (f64, f64),
    order: GridOrder,
) -> (f64, f64, f64) {
    let mut s = Scan {
        best: (f64::INFINITY, usize::MAX, usize::MAX),
    };
    let mut eval = |i: usize, j: usize| {
        let mut p = base.clone();
        p.rates = vec![linspace(rates.0, rates.1, i)];
        p.amplitudes = vec![linspace(amps.0, amps.1, j)];
        let theta = problem.encode(&p);
        s.offer(problem.value(&theta), i, j);
    };
    for outer in 0..GRID_POINTS {
        for inner in 0..GRID_POINTS {
            match order {
                GridOrder::RateMajor => eval(outer, inner),
                GridOrder::AmplitudeMajor => eval(inner, outer),
            }
        }
    }
    let (v, i, j) = s.best;
    (
        v,
        linspace(rates.0, rates.1, i),
        linspace(amps.0, amps.1, j),
    )
}

/// Minimizes the one-component objective with fixed background over a coarse
/// grid on `ranges`, then over a grid spanning one coarse cell on each side
/// of the coarse minimum.
pub fn grid_oracle_fit(
    hist: &TimeEnergyHistogram,
    spec: &FitModelSpec,
    ranges: GridRanges,
    order: GridOrder,
) -> Result<GridOracleResult> {
    if spec.n_components != 1
        || spec.background != BackgroundMode::Fixed
        || spec.time_zero_free
        || spec.response_free
    {
        return Err(Error::validation(
            "fit",
            "grid oracle needs one component with fixed background, time zero and response",
        ));
    }
    let (r0, r1) = ranges.rate_per_ns;
    let (a0, a1) = ranges.amplitude;
    if !(0.0 < r0 && r0 < r1 && 0.0 < a0 && a0 < a1) {
        return Err(Error::validation(
            "grid ranges",
            "need 0 < lo < hi for rate and amplitude",
        ));
    }
    let problem = FitProblem::new(hist, spec)?;
    let base = ModelPoint {
        amplitudes: vec![1.0],
        intensities: vec![1.0],
        rates: vec![1.0],
        background: spec.background_per_bin.unwrap_or(0.0),
        time_zero_ns: spec.time_zero_ns,
        sigma_ns: spec.response_fwhm() / FWHM_PER_SIGMA,
    };
    let cells = (GRID_POINTS - 1) as f64;
    let (dr, da) = ((r1 - r0) / cells, (a1 - a0) / cells);
    let (_, rc, ac) = scan(&problem, &base, (r0, r1), (a0, a1), order);
    let fine_r = ((rc - dr).max(r0 * 0.5), rc + dr);
    let fine_a = ((ac - da).max(a0 * 0.5), ac + da);
    let (value, rate, amplitude) = scan(&problem, &base, fine_r, fine_a, order);

    let mut p = base;
    p.rates = vec![rate];
    p.amplitudes = vec![amplitude];
    let theta = problem.encode(&p);
    let fit = FitResult {
        components: vec![FittedComponent {
            rate_per_ns: Estimate::exact(rate),
            lifetime_ns: Estimate::exact(1.0 / rate),
            intensity: Estimate::exact(1.0),
            amplitude: Estimate::exact(amplitude),
            rate_fixed: false,
            identifiable: true,
        }],
        background_per_bin: Estimate::exact(p.background),
        time_zero_ns: Estimate::exact(p.time_zero_ns),
        response_fwhm_ns: Estimate::exact(p.sigma_ns * FWHM_PER_SIGMA),
        chi2: value,
        pearson_chi2: problem.pearson_chi2(&theta),
        dof: problem.n_bins().saturating_sub(2),
        variance_model: problem.variance_model(),
        converged: true,
        iterations: 2 * GRID_POINTS * GRID_POINTS,
        gradient_decrement: 0.0,
        last_step: 0.0,
        fit_window_ns: spec.fit_window_ns,
        bins_used: problem.n_bins(),
        parameter_names: vec!["amplitude[0]".into(), "rate_per_ns[0]".into()],
        covariance: None,
        identifiable: true,
        diagnostics: vec!["grid search; no covariance".into()],
    };
    Ok(GridOracleResult {
        fit,
        rate_cell_per_ns: (fine_r.1 - fine_r.0) / cells,
        amplitude_cell: (fine_a.1 - fine_a.0) / cells,
    })
}
