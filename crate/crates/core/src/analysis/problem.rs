//! Objective, gradient and Fisher matrix of the binned lifetime model.
//!
//! Internal parameters θ:
//! `[ln A, z₁ … z_{n−1}, ln λ_j (free rates), ln b?, t₀?, ln σ?]`
//! with intensities I = softmax(0, z₁, …) and component amplitudes A·I_j.

use nalgebra::{DMatrix, DVector};

use super::emg::bin_integral;
use super::fit_spec::{BackgroundMode, FitModelSpec, VarianceModel};
use crate::detection::FWHM_PER_SIGMA;
use crate::error::{Error, Result};
use crate::montecarlo::TimeEnergyHistogram;

const MIN_MEAN: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Slot {
    Free(usize),
    Fixed(f64),
}

impl Slot {
    fn index(self) -> Option<usize> {
        match self {
            Slot::Free(i) => Some(i),
            Slot::Fixed(_) => None,
        }
    }
}

/// Decoded model parameters in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    /// Total decays A·I_j per component.
    pub amplitudes: Vec<f64>,
    pub intensities: Vec<f64>,
    /// ns⁻¹
    pub rates: Vec<f64>,
    /// counts/bin
    pub background: f64,
    pub time_zero_ns: f64,
    /// Gaussian response σ, ns.
    pub sigma_ns: f64,
}

impl ModelPoint {
    /// Expected counts in `[lo, hi)`, ignoring the background.
    pub fn signal(&self, lo: f64, hi: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.rates)
            .map(|(&a, &r)| a * bin_integral(r, self.sigma_ns, self.time_zero_ns, lo, hi).mass)
            .sum()
    }
}

/// Objective value plus its local quadratic model.
#[derive(Debug, Clone)]
pub(crate) struct Linearization {
    pub value: f64,
    pub gradient: DVector<f64>,
    /// Expected-information (Gauss–Newton) Hessian of the objective.
    pub hessian: DMatrix<f64>,
}

/// Binned fit problem for one histogram and model spec.
#[derive(Debug, Clone)]
pub struct FitProblem {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<f64>,
    variance: VarianceModel,
    n: usize,
    pub(crate) rates: Vec<Slot>,
    pub(crate) background: Slot,
    pub(crate) time_zero: Slot,
    pub(crate) log_sigma: Slot,
    dim: usize,
    names: Vec<String>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
}

impl FitProblem {
    /// Builds the problem with parameter layout in the component order given
    /// by `fixed_rates` (entry j is `Some` when component j's rate is held).
    pub(crate) fn with_layout(
        hist: &TimeEnergyHistogram,
        spec: &FitModelSpec,
        fixed_rates: &[Option<f64>],
        background_fixed: Option<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        let axis = hist.time_axis;
        let bins = spec.window_bins(&axis)?;
        let lo: Vec<f64> = bins.clone().map(|i| axis.lower_edge(i)).collect();
        let hi: Vec<f64> = bins.clone().map(|i| axis.upper_edge(i)).collect();
        let counts: Vec<f64> = hist.time_counts[bins.clone()]
            .iter()
            .map(|&c| c as f64)
            .collect();
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::Fit(format!(
                "no counts in fit window [{}, {})",
                spec.fit_window_ns[0], spec.fit_window_ns[1]
            )));
        }
        let n = fixed_rates.len();
        let mut names = vec!["ln_amplitude".to_string()];
        let mut lower = vec![(1e-3f64).ln()];
        let mut upper = vec![(1e6 * (total + 1.0)).ln()];
        for j in 1..n {
            names.push(format!("logit_intensity[{j}]"));
            lower.push(-40.0);
            upper.push(40.0);
        }
        let mut rates = Vec::with_capacity(n);
        for (j, fixed) in fixed_rates.iter().enumerate() {
            match fixed {
                Some(r) => rates.push(Slot::Fixed(*r)),
                None => {
                    rates.push(Slot::Free(names.len()));
                    names.push(format!("ln_rate[{j}]"));
                    lower.push((1e-6f64).ln());
                    upper.push((1e3f64).ln());
                }
            }
        }
        let max_count = counts.iter().cloned().fold(0.0, f64::max);
        let background = match (spec.background, background_fixed) {
            (BackgroundMode::Fixed, _) => Slot::Fixed(spec.background_per_bin.unwrap_or(0.0)),
            (BackgroundMode::Free, Some(b)) => Slot::Fixed(b),
            (BackgroundMode::Free, None) => {
                names.push("ln_background".into());
                lower.push((1e-9f64).ln());
                upper.push((10.0 * max_count + 10.0).ln());
                Slot::Free(names.len() - 1)
            }
        };
        let time_zero = if spec.time_zero_free {
            names.push("time_zero".into());
            lower.push(spec.time_zero_ns - 5.0);
            upper.push(spec.time_zero_ns + 5.0);
            Slot::Free(names.len() - 1)
        } else {
            Slot::Fixed(spec.time_zero_ns)
        };
        let sigma0 = spec.response_fwhm() / FWHM_PER_SIGMA;
        let log_sigma = if spec.response_free {
            names.push("ln_sigma".into());
            lower.push((1e-3f64).ln());
            upper.push((10.0f64).ln());
            Slot::Free(names.len() - 1)
        } else {
            Slot::Fixed(sigma0.ln())
        };
        Ok(Self {
            lo,
            hi,
            counts,
            variance: spec.variance_model,
            n,
            rates,
            background,
            time_zero,
            log_sigma,
            dim: names.len(),
            names,
            lower,
            upper,
        })
    }

    /// Problem with every rate free and the background as configured.
    pub fn new(hist: &TimeEnergyHistogram, spec: &FitModelSpec) -> Result<Self> {
        let fixed: Vec<Option<f64>> = (0..spec.n_components)
            .map(|j| spec.component(j).fixed_rate_per_ns)
            .collect();
        Self::with_layout(hist, spec, &fixed, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.n
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn bin_edges(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lo.iter().copied().zip(self.hi.iter().copied())
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn variance_model(&self) -> VarianceModel {
        self.variance
    }

    pub fn decode(&self, theta: &[f64]) -> ModelPoint {
        let total = theta[0].exp();
        let mut logits = vec![0.0; self.n];
        logits[1..].copy_from_slice(&theta[1..self.n]);
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = w.iter().sum();
        let intensities: Vec<f64> = w.iter().map(|x| x / s).collect();
        let value = |slot: Slot| match slot {
            Slot::Free(i) => theta[i],
            Slot::Fixed(v) => v,
        };
        ModelPoint {
            amplitudes: intensities.iter().map(|i| total * i).collect(),
            rates: self
                .rates
                .iter()
                .map(|&slot| match slot {
                    Slot::Free(i) => theta[i].exp(),
                    Slot::Fixed(r) => r,
                })
                .collect(),
            intensities,
            background: match self.background {
                Slot::Free(i) => theta[i].exp(),
                Slot::Fixed(b) => b,
            },
            time_zero_ns: value(self.time_zero),
            sigma_ns: value(self.log_sigma).exp(),
        }
    }

    /// Inverse of [`decode`](Self::decode) for points inside the bounds.
    pub fn encode(&self, point: &ModelPoint) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim];
        let total: f64 = point.amplitudes.iter().sum();
        theta[0] = total.max(1e-300).ln();
        let ref_amp = point.amplitudes[0].max(1e-300 * total.max(1.0));
        for j in 1..self.n {
            theta[j] = (point.amplitudes[j].max(1e-300) / ref_amp).ln();
        }
        for (j, slot) in self.rates.iter().enumerate() {
            if let Slot::Free(i) = slot {
                theta[*i] = point.rates[j].ln();
            }
        }
        if let Slot::Free(i) = self.background {
            theta[i] = point.background.max(1e-300).ln();
        }
        if let Slot::Free(i) = self.time_zero {
            theta[i] = point.time_zero_ns;
        }
        if let Slot::Free(i) = self.log_sigma {
            theta[i] = point.sigma_ns.ln();
        }
        self.clamp(&mut theta);
        theta
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for ((t, lo), hi) in theta.iter_mut().zip(&self.lower).zip(&self.upper) {
            *t = t.clamp(*lo, *hi);
        }
    }

    /// Expected counts per window bin.
    pub fn expected(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.decode(theta);
        self.bin_edges()
            .map(|(lo, hi)| p.signal(lo, hi) + p.background)
            .collect()
    }

    fn term(&self, n: f64, mu: f64) -> (f64, f64, f64) {
        // (objective term, d term/dμ, Fisher weight)
        match self.variance {
            VarianceModel::Poisson => {
                let log_part = if n > 0.0 { n * (n / mu).ln() } else { 0.0 };
                (2.0 * (mu - n + log_part), 2.0 * (1.0 - n / mu), 2.0 / mu)
            }
            VarianceModel::GaussianApprox => {
                let v = n.max(1.0);
                ((n - mu).powi(2) / v, -2.0 * (n - mu) / v, 2.0 / v)
            }
        }
    }

    /// Objective value only.
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.expected(theta)
            .iter()
            .zip(&self.counts)
            .map(|(&mu, &n)| self.term(n, mu.max(MIN_MEAN)).0)
            .sum()
    }

    /// Pearson χ² Σ(n − μ)²/μ at `theta`.
    pub fn pearson_chi2(&self, theta: &[f64]) -> f64 {
        self.expected(theta)
            .iter()
            .zip(&self.counts)
            .map(|(&mu, &n)| (n - mu).powi(2) / mu.max(MIN_MEAN))
            .sum()
    }

    /// Jacobian row ∂μ/∂θ for one bin, together with μ.
    fn mean_and_jacobian(&self, p: &ModelPoint, lo: f64, hi: f64, row: &mut [f64]) -> f64 {
        row.iter_mut().for_each(|x| *x = 0.0);
        let total: f64 = p.amplitudes.iter().sum();
        let mut masses = vec![0.0; self.n];
        let mut signal = 0.0;
        for j in 0..self.n {
            let b = bin_integral(p.rates[j], p.sigma_ns, p.time_zero_ns, lo, hi);
            masses[j] = b.mass;
            let a = p.amplitudes[j];
            signal += a * b.mass;
            if let Slot::Free(i) = self.rates[j] {
                row[i] = a * p.rates[j] * b.d_rate;
            }
            if let Slot::Free(i) = self.time_zero {
                row[i] += a * b.d_time_zero;
            }
            if let Slot::Free(i) = self.log_sigma {
                row[i] += a * p.sigma_ns * b.d_sigma;
            }
        }
        row[0] = signal;
        let mean_mass: f64 = p.intensities.iter().zip(&masses).map(|(i, m)| i * m).sum();
        for m in 1..self.n {
            row[m] = total * p.intensities[m] * (masses[m] - mean_mass);
        }
        if let Slot::Free(i) = self.background {
            row[i] = p.background;
        }
        signal + p.background
    }

    pub(crate) fn linearize(&self, theta: &[f64]) -> Linearization {
        let p = self.decode(theta);
        let mut gradient = DVector::zeros(self.dim);
        let mut hessian = DMatrix::zeros(self.dim, self.dim);
        let mut row = vec![0.0; self.dim];
        let mut value = 0.0;
        for ((lo, hi), &n) in self.bin_edges().zip(&self.counts) {
            let mu = self.mean_and_jacobian(&p, lo, hi, &mut row).max(MIN_MEAN);
            let (t, d, w) = self.term(n, mu);
            value += t;
            for a in 0..self.dim {
                if row[a] == 0.0 {
                    continue;
                }
                gradient[a] += d * row[a];
                for b in 0..=a {
                    hessian[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..self.dim {
            for b in 0..a {
                hessian[(b, a)] = hessian[(a, b)];
            }
        }
        Linearization {
            value,
            gradient,
            hessian,
        }
    }

    /// Analytic gradient of the objective.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.linearize(theta).gradient.iter().copied().collect()
    }

    pub(crate) fn free_rate_index(&self, j: usize) -> Option<usize> {
        self.rates[j].index()
    }

    pub(crate) fn background_index(&self) -> Option<usize> {
        self.background.index()
    }

    pub(crate) fn time_zero_index(&self) -> Option<usize> {
        self.time_zero.index()
    }

    pub(crate) fn log_sigma_index(&self) -> Option<usize> {
        self.log_sigma.index()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::UniformAxis;

    fn synthetic(spec: &FitModelSpec) -> (FitProblem, ModelPoint) {
        let axis = UniformAxis::new(-20.0, 1000.0, 600).unwrap();
        let truth = ModelPoint {
            amplitudes: vec![3.0e5, 1.0e5],
            intensities: vec![0.75, 0.25],
            rates: vec![0.007, 0.06],
            background: 4.0,
            time_zero_ns: 0.0,
            sigma_ns: 0.3 / FWHM_PER_SIGMA,
        };
        let counts = (0..axis.bins)
            .map(|i| {
                (truth.signal(axis.lower_edge(i), axis.upper_edge(i)) + truth.background).round()
                    as u64
            })
            .collect();
        let hist = TimeEnergyHistogram::from_time_counts(axis, counts).unwrap();
        (FitProblem::new(&hist, spec).unwrap(), truth)
    }

    #[test]
    fn encode_decode_round_trip() {
        let spec = FitModelSpec {
            time_zero_free: true,
            response_free: true,
            fit_window_ns: [-10.0, 1000.0],
            ..FitModelSpec::default()
        };
        let (p, truth) = synthetic(&spec);
        let back = p.decode(&p.encode(&truth));
        for (a, b) in back.amplitudes.iter().zip(&truth.amplitudes) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert!((back.sigma_ns / truth.sigma_ns - 1.0).abs() < 1e-12);
        assert_eq!(p.dim(), 7);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for variance in [VarianceModel::Poisson, VarianceModel::GaussianApprox] {
            let spec = FitModelSpec {
                time_zero_free: true,
                response_free: true,
                fit_window_ns: [-10.0, 1000.0],
                variance_model: variance,
                ..FitModelSpec::default()
            };
            let (p, truth) = synthetic(&spec);
            let mut theta = p.encode(&truth);
            // move away from the minimum so the gradient is not ~0
            theta[0] += 0.01;
            theta[2] -= 0.02;
            let g = p.gradient(&theta);
            for i in 0..p.dim() {
                let h = 1e-6 * (1.0 + theta[i].abs());
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (p.value(&up) - p.value(&dn)) / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                    "{variance:?} {}: {} vs {}",
                    p.parameter_names()[i],
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn empty_window_is_an_error() {
        let axis = UniformAxis::new(0.0, 10.0, 10).unwrap();
        let hist = TimeEnergyHistogram::from_time_counts(axis, vec![0; 10]).unwrap();
        let err = FitProblem::new(&hist, &FitModelSpec::single([0.0, 10.0])).unwrap_err();
        assert!(matches!(err, Error::Fit(_)));
    }
}
