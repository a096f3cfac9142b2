use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::emg::bin_mass;
use super::fit_spec::{BackgroundMode, FitModelSpec, VarianceModel};
use super::optimizer::{minimize, Outcome};
use super::problem::{FitProblem, ModelPoint};
use crate::detection::FWHM_PER_SIGMA;
use crate::error::{Error, Result};
use crate::montecarlo::{TimeEnergyHistogram, UniformAxis};

/// Smallest eigenvalue ratio of the correlation-scaled Hessian still treated as invertible.
const SINGULAR_RCOND: f64 = 1e-13;

/// Value with optional 1σ uncertainty (absent for held or unidentified parameters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, sigma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedComponent {
    pub rate_per_ns: Estimate,
    pub lifetime_ns: Estimate,
    pub intensity: Estimate,
    /// Total decays attributed to the component, counts.
    pub amplitude: Estimate,
    pub rate_fixed: bool,
    pub identifiable: bool,
}

/// Fitted lifetime spectrum; components ordered by descending lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub components: Vec<FittedComponent>,
    pub background_per_bin: Estimate,
    pub time_zero_ns: Estimate,
    pub response_fwhm_ns: Estimate,
    /// Objective at the minimum (deviance or weighted χ², per `variance_model`).
    pub chi2: f64,
    pub pearson_chi2: f64,
    pub dof: usize,
    pub variance_model: VarianceModel,
    pub converged: bool,
    pub iterations: usize,
    /// Newton decrement gᵀH⁻¹g at the last iterate.
    pub gradient_decrement: f64,
    pub last_step: f64,
    pub fit_window_ns: [f64; 2],
    pub bins_used: usize,
    /// Natural parameters indexing `covariance`.
    pub parameter_names: Vec<String>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub identifiable: bool,
    pub diagnostics: Vec<String>,
}

impl FitResult {
    pub fn rates(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.rate_per_ns.value)
            .collect()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.intensity.value).collect()
    }

    pub fn point(&self) -> ModelPoint {
        ModelPoint {
            amplitudes: self.components.iter().map(|c| c.amplitude.value).collect(),
            intensities: self.intensities(),
            rates: self.rates(),
            background: self.background_per_bin.value,
            time_zero_ns: self.time_zero_ns.value,
            sigma_ns: self.response_fwhm_ns.value / FWHM_PER_SIGMA,
        }
    }

    /// Model expectation for every bin of `axis`.
    pub fn expected_counts(&self, axis: &UniformAxis) -> Vec<f64> {
        let p = self.point();
        (0..axis.bins)
            .map(|i| p.signal(axis.lower_edge(i), axis.upper_edge(i)) + p.background)
            .collect()
    }
}

fn weighted_log_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    // weighted LS of ln y on t with weights y (Poisson variance of ln y ≈ 1/y)
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        let w = y;
        let l = y.ln();
        sw += w;
        st += w * t;
        sy += w * l;
        stt += w * t * t;
        sty += w * t * l;
    }
    let det = sw * stt - st * st;
    if points.len() < 3 || det <= 0.0 {
        return None;
    }
    let slope = (sw * sty - st * sy) / det;
    let intercept = (sy - slope * st) / sw;
    Some((slope, intercept))
}

fn initial_background(
    hist: &TimeEnergyHistogram,
    spec: &FitModelSpec,
    problem_counts: &[f64],
) -> f64 {
    if let Some(b) = spec.background_per_bin {
        return b;
    }
    let axis = hist.time_axis;
    let sigma = spec.response_fwhm() / FWHM_PER_SIGMA;
    let cut = spec.time_zero_ns - 5.0 * sigma;
    let pre: Vec<f64> = (0..axis.bins)
        .filter(|&i| axis.upper_edge(i) <= cut)
        .map(|i| hist.time_counts[i] as f64)
        .collect();
    if !pre.is_empty() {
        return pre.iter().sum::<f64>() / pre.len() as f64;
    }
    let k = (problem_counts.len() / 20).max(1);
    let tail = &problem_counts[problem_counts.len() - k..];
    0.5 * tail.iter().sum::<f64>() / k as f64
}

/// Rates for components without a fixed or supplied rate, by tail peeling.
fn peel_rates(
    problem: &FitProblem,
    background: f64,
    t0: f64,
    sigma: f64,
    count: usize,
) -> Vec<f64> {
    let data: Vec<(f64, f64, f64)> = problem
        .bin_edges()
        .zip(problem.counts())
        .filter(|((lo, _), _)| *lo >= t0 + 3.0 * sigma)
        .map(|((lo, hi), &n)| (0.5 * (lo + hi), hi - lo, n))
        .collect();
    if data.is_empty() {
        return (0..count).map(|k| 0.01 * 10f64.powi(k as i32)).collect();
    }
    let t_a = data[0].0;
    let t_b = data[data.len() - 1].0;
    let span = (t_b - t_a).max(1e-9);
    let mut residual: Vec<f64> = data.iter().map(|&(_, _, n)| n - background).collect();
    let mut rates = Vec::with_capacity(count);
    for k in 0..count {
        let start = if k + 1 == count {
            0.0
        } else {
            0.3f64.powi(k as i32 + 1)
        };
        let end = if k == 0 { 1.0 } else { 0.3f64.powi(k as i32) };
        let (s_lo, s_hi) = (t_a + start * span, t_a + end * span);
        let seg: Vec<(f64, f64)> = data
            .iter()
            .zip(&residual)
            .filter(|((t, _, n), r)| *t >= s_lo && *t <= s_hi && **r > 3.0f64.max(2.0 * n.sqrt()))
            .map(|((t, _, _), r)| (*t, *r))
            .collect();
        let fallback = 1.0 / (0.3 * (s_hi - s_lo).max(1e-3));
        match weighted_log_slope(&seg) {
            Some((slope, intercept)) if slope < 0.0 => {
                let rate = (-slope).clamp(1e-5, 1e2);
                rates.push(rate);
                for ((t, _, _), r) in data.iter().zip(residual.iter_mut()) {
                    *r -= (intercept + slope * t).exp();
                }
            }
            _ => rates.push(fallback),
        }
    }
    rates
}

/// Weighted linear least squares for amplitudes (and background when free).
fn linear_amplitudes(
    problem: &FitProblem,
    rates: &[f64],
    t0: f64,
    sigma: f64,
    with_background: bool,
) -> Option<(Vec<f64>, f64)> {
    let n = rates.len();
    let cols = n + usize::from(with_background);
    let mut ata = DMatrix::<f64>::zeros(cols, cols);
    let mut atb = DVector::<f64>::zeros(cols);
    let mut row = vec![0.0; cols];
    for ((lo, hi), &c) in problem.bin_edges().zip(problem.counts()) {
        for (j, &r) in rates.iter().enumerate() {
            row[j] = bin_mass(r, sigma, t0, lo, hi);
        }
        if with_background {
            row[n] = 1.0;
        }
        let w = 1.0 / c.max(1.0);
        for a in 0..cols {
            atb[a] += w * row[a] * c;
            for b in 0..cols {
                ata[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let scale = (0..cols).map(|i| ata[(i, i)]).fold(0.0, f64::max);
    for i in 0..cols {
        ata[(i, i)] += 1e-12 * scale;
    }
    let x = ata.cholesky()?.solve(&atb);
    let amps = x.iter().take(n).copied().collect();
    let b = if with_background { x[n] } else { 0.0 };
    Some((amps, b))
}

struct Start {
    fixed: Vec<Option<f64>>,
    point: ModelPoint,
}

fn starting_point(hist: &TimeEnergyHistogram, spec: &FitModelSpec) -> Result<Start> {
    let n = spec.n_components;
    // a provisional layout only to reuse the window selection and counts
    let probe = FitProblem::with_layout(hist, spec, &vec![Some(1.0); n], Some(0.0))?;
    let total: f64 = probe.counts().iter().sum();
    let sigma = spec.response_fwhm() / FWHM_PER_SIGMA;
    let t0 = spec.time_zero_ns;
    let background = initial_background(hist, spec, probe.counts()).max(0.0);

    let auto = (0..n)
        .filter(|&j| {
            let c = spec.component(j);
            c.fixed_rate_per_ns.is_none() && c.initial_rate_per_ns.is_none()
        })
        .count();
    let mut peeled = peel_rates(&probe, background, t0, sigma, auto).into_iter();
    let mut comps: Vec<(f64, bool)> = (0..n)
        .map(|j| {
            let c = spec.component(j);
            match (c.fixed_rate_per_ns, c.initial_rate_per_ns) {
                (Some(r), _) => (r, true),
                (None, Some(r)) => (r, false),
                (None, None) => (peeled.next().unwrap_or(1.0), false),
            }
        })
        .collect();
    // descending lifetime; stable so ties keep configuration order
    comps.sort_by(|a, b| a.0.total_cmp(&b.0));
    for k in 1..n {
        if !comps[k].1 && comps[k].0 < 1.5 * comps[k - 1].0 {
            comps[k].0 = 3.0 * comps[k - 1].0;
        }
    }
    let rates: Vec<f64> = comps.iter().map(|c| c.0).collect();
    let fixed: Vec<Option<f64>> = comps.iter().map(|&(r, f)| f.then_some(r)).collect();

    let background_free = spec.background == BackgroundMode::Free;
    let (mut amps, mut b) = linear_amplitudes(
        &probe,
        &rates,
        t0,
        sigma,
        background_free && spec.background_per_bin.is_none(),
    )
    .unwrap_or_else(|| (vec![total / n as f64; n], background));
    if !(background_free && spec.background_per_bin.is_none()) {
        b = background;
    }
    let floor = 1.0f64.max(1e-6 * total);
    for a in &mut amps {
        if !(a.is_finite() && *a > floor) {
            *a = floor;
        }
    }
    if !(b.is_finite() && b > 0.0) {
        b = background.max(1e-6);
    }
    let sum: f64 = amps.iter().sum();
    Ok(Start {
        fixed,
        point: ModelPoint {
            intensities: amps.iter().map(|a| a / sum).collect(),
            amplitudes: amps,
            rates,
            background: b,
            time_zero_ns: t0,
            sigma_ns: sigma,
        },
    })
}

/// Covariance of θ over the non-active parameters, or `None` when singular.
fn theta_covariance(out: &Outcome) -> Option<DMatrix<f64>> {
    let dim = out.theta.len();
    let free: Vec<usize> = (0..dim).filter(|&i| !out.active[i]).collect();
    let mut cov = DMatrix::zeros(dim, dim);
    if free.is_empty() {
        return Some(cov);
    }
    let h = DMatrix::from_fn(free.len(), free.len(), |a, b| {
        out.lin.hessian[(free[a], free[b])]
    });
    let d: Vec<f64> = (0..free.len()).map(|i| h[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return None;
    }
    let scaled = DMatrix::from_fn(free.len(), free.len(), |a, b| {
        h[(a, b)] / (d[a] * d[b]).sqrt()
    });
    let eig = SymmetricEigen::new(scaled.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > SINGULAR_RCOND * max) {
        return None;
    }
    let inv = scaled.cholesky()?.inverse();
    for a in 0..free.len() {
        for b in 0..free.len() {
            // deviance-type objectives: cov = 2·H⁻¹
            cov[(free[a], free[b])] = 2.0 * inv[(a, b)] / (d[a] * d[b]).sqrt();
        }
    }
    Some(cov)
}

fn finish(problem: &FitProblem, spec: &FitModelSpec, out: Outcome) -> FitResult {
    let n = problem.n_components();
    let p = problem.decode(&out.theta);
    let dim = problem.dim();
    let mut diagnostics = out.notes.clone();
    let cov = theta_covariance(&out);
    if cov.is_none() {
        diagnostics.push("covariance is singular; uncertainties omitted".into());
    }

    // sort by descending lifetime
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.rates[a].total_cmp(&p.rates[b]));

    // Jacobians of natural parameters with respect to θ
    let amp_grad = |j: usize| {
        let mut g = vec![0.0; dim];
        g[0] = p.amplitudes[j];
        for m in 1..n {
            g[m] = p.amplitudes[j] * (f64::from(u8::from(j == m)) - p.intensities[m]);
        }
        g
    };
    let int_grad = |j: usize| {
        let mut g = vec![0.0; dim];
        for m in 1..n {
            g[m] = p.intensities[j] * (f64::from(u8::from(j == m)) - p.intensities[m]);
        }
        g
    };
    let single = |i: usize, scale: f64| {
        let mut g = vec![0.0; dim];
        g[i] = scale;
        g
    };
    let mut names = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        names.push(format!("amplitude[{k}]"));
        rows.push(amp_grad(j));
        if let Some(i) = problem.free_rate_index(j) {
            names.push(format!("rate_per_ns[{k}]"));
            rows.push(single(i, p.rates[j]));
        }
    }
    if let Some(i) = problem.background_index() {
        names.push("background_per_bin".into());
        rows.push(single(i, p.background));
    }
    if let Some(i) = problem.time_zero_index() {
        names.push("time_zero_ns".into());
        rows.push(single(i, 1.0));
    }
    if let Some(i) = problem.log_sigma_index() {
        names.push("response_fwhm_ns".into());
        rows.push(single(i, p.sigma_ns * FWHM_PER_SIGMA));
    }
    let variance = |g: &[f64]| -> Option<f64> {
        let c = cov.as_ref()?;
        let v = DVector::from_column_slice(g);
        let var = v.dot(&(c * &v));
        (var > 0.0 && var.is_finite()).then(|| var.sqrt())
    };
    let covariance = cov.as_ref().map(|c| {
        rows.iter()
            .map(|a| {
                let va = DVector::from_column_slice(a);
                rows.iter()
                    .map(|b| DVector::from_column_slice(b).dot(&(c * &va)))
                    .collect()
            })
            .collect()
    });

    let amplitude_at_floor = out.active[0] && out.theta[0] <= problem.bounds().0[0] + 1e-6;
    let mut identifiable = cov.is_some() && !amplitude_at_floor;
    if amplitude_at_floor {
        diagnostics
            .push("total amplitude pinned at its lower bound: no decay signal identified".into());
    }
    let components: Vec<FittedComponent> = order
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let rate = p.rates[j];
            let rate_sigma = problem
                .free_rate_index(j)
                .and_then(|i| variance(&single(i, rate)));
            let amplitude = Estimate {
                value: p.amplitudes[j],
                sigma: variance(&amp_grad(j)),
            };
            let logit_pinned = j >= 1 && out.active[j];
            let weak = amplitude.sigma.is_some_and(|s| s >= amplitude.value);
            let ok = cov.is_some() && !amplitude_at_floor && !logit_pinned && !weak;
            if !ok && cov.is_some() {
                diagnostics.push(format!(
                    "component {k} is not identifiable (amplitude consistent with zero)"
                ));
            }
            identifiable &= ok;
            FittedComponent {
                rate_per_ns: Estimate {
                    value: rate,
                    sigma: rate_sigma,
                },
                lifetime_ns: Estimate {
                    value: 1.0 / rate,
                    sigma: rate_sigma.map(|s| s / (rate * rate)),
                },
                intensity: Estimate {
                    value: p.intensities[j],
                    sigma: if n == 1 { None } else { variance(&int_grad(j)) },
                },
                amplitude,
                rate_fixed: problem.free_rate_index(j).is_none(),
                identifiable: ok,
            }
        })
        .collect();

    let estimate = |idx: Option<usize>, value: f64, scale: f64| Estimate {
        value,
        sigma: idx.and_then(|i| variance(&single(i, scale))),
    };
    FitResult {
        components,
        background_per_bin: estimate(problem.background_index(), p.background, p.background),
        time_zero_ns: estimate(problem.time_zero_index(), p.time_zero_ns, 1.0),
        response_fwhm_ns: estimate(
            problem.log_sigma_index(),
            p.sigma_ns * FWHM_PER_SIGMA,
            p.sigma_ns * FWHM_PER_SIGMA,
        ),
        chi2: out.lin.value,
        pearson_chi2: problem.pearson_chi2(&out.theta),
        dof: problem.n_bins().saturating_sub(dim),
        variance_model: problem.variance_model(),
        converged: out.converged,
        iterations: out.iterations,
        gradient_decrement: out.decrement,
        last_step: out.last_step,
        fit_window_ns: spec.fit_window_ns,
        bins_used: problem.n_bins(),
        parameter_names: names,
        covariance,
        identifiable,
        diagnostics,
    }
}

/// Fits the lifetime model of `spec` to the delay spectrum of `hist`.
///
/// Non-convergence is not an error: the result carries `converged = false`
/// and diagnostics.
pub fn fit_lifetime(hist: &TimeEnergyHistogram, spec: &FitModelSpec) -> Result<FitResult> {
    spec.validate()?;
    if hist.total_counts() == 0 {
        return Err(Error::Fit("histogram is empty".into()));
    }
    let start = starting_point(hist, spec)?;
    let background_fixed =
        (spec.background == BackgroundMode::Fixed).then(|| spec.background_per_bin.unwrap_or(0.0));
    let problem = FitProblem::with_layout(hist, spec, &start.fixed, background_fixed)?;
    let theta0 = problem.encode(&start.point);
    let out = minimize(&problem, theta0, spec.max_iterations);
    Ok(finish(&problem, spec, out))
}

/// Fit problem in the same parameter layout `fit_lifetime` would use, with its start point.
pub fn fit_problem_with_start(
    hist: &TimeEnergyHistogram,
    spec: &FitModelSpec,
) -> Result<(FitProblem, Vec<f64>)> {
    spec.validate()?;
    let start = starting_point(hist, spec)?;
    let background_fixed =
        (spec.background == BackgroundMode::Fixed).then(|| spec.background_per_bin.unwrap_or(0.0));
    let problem = FitProblem::with_layout(hist, spec, &start.fixed, background_fixed)?;
    let theta0 = problem.encode(&start.point);
    Ok((problem, theta0))
}
