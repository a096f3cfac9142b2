//! Box-constrained Levenberg–Marquardt on a [`FitProblem`].

use nalgebra::{DMatrix, DVector};

use super::problem::{FitProblem, Linearization};

/// Newton decrement gᵀH⁻¹g below which the gradient counts as converged.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Relative parameter step below which iteration stops.
pub const STEP_TOLERANCE: f64 = 1e-10;

const MAX_STEP: f64 = 2.0;
const MAX_DAMPING: f64 = 1e20;

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub theta: Vec<f64>,
    pub lin: Linearization,
    pub converged: bool,
    pub iterations: usize,
    pub decrement: f64,
    pub last_step: f64,
    /// Parameters held on a bound at the solution.
    pub active: Vec<bool>,
    pub notes: Vec<String>,
}

fn active_set(p: &FitProblem, theta: &[f64], g: &DVector<f64>) -> Vec<bool> {
    let (lo, hi) = p.bounds();
    (0..theta.len())
        .map(|i| {
            let eps = 1e-9 * (1.0 + theta[i].abs());
            (theta[i] <= lo[i] + eps && g[i] >= 0.0) || (theta[i] >= hi[i] - eps && g[i] <= 0.0)
        })
        .collect()
}

fn submatrix(h: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])])
}

/// Solves (H + ridge·diag H) x = rhs by Cholesky, adding a tiny ridge if needed.
fn solve_damped(h: &DMatrix<f64>, rhs: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
    for extra in [0.0, 1e-12, 1e-9, 1e-6] {
        let mut m = h.clone();
        for i in 0..n {
            let d = h[(i, i)].max(1e-12 * scale);
            m[(i, i)] += damping * d + extra * scale;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(rhs));
        }
    }
    None
}

pub(crate) fn minimize(p: &FitProblem, theta0: Vec<f64>, max_iterations: usize) -> Outcome {
    let mut theta = theta0;
    p.clamp(&mut theta);
    let mut lin = p.linearize(&theta);
    let mut damping = 1e-3;
    let mut nu = 2.0;
    let mut decrement = f64::INFINITY;
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    let mut notes = Vec::new();
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let active = active_set(p, &theta, &lin.gradient);
        let free: Vec<usize> = (0..theta.len()).filter(|&i| !active[i]).collect();
        if free.is_empty() {
            decrement = 0.0;
            converged = true;
            break;
        }
        let h = submatrix(&lin.hessian, &free);
        let g = DVector::from_iterator(free.len(), free.iter().map(|&i| lin.gradient[i]));
        decrement = solve_damped(&h, &g, 0.0).map_or(f64::INFINITY, |x| g.dot(&x).abs());
        let gradient_ok = decrement < GRADIENT_TOLERANCE;
        if gradient_ok && last_step < STEP_TOLERANCE {
            converged = true;
            break;
        }
        if gradient_ok && decrement < 1e-24 {
            converged = true;
            break;
        }

        let Some(mut delta) = solve_damped(&h, &(-&g), damping) else {
            notes.push("damped system could not be factorized".into());
            break;
        };
        let biggest = delta.amax();
        if biggest > MAX_STEP {
            delta *= MAX_STEP / biggest;
        }
        let mut trial = theta.clone();
        for (k, &i) in free.iter().enumerate() {
            trial[i] += delta[k];
        }
        p.clamp(&mut trial);
        let step: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let step_norm = step
            .iter()
            .zip(&theta)
            .map(|(s, t)| s.abs() / (1.0 + t.abs()))
            .fold(0.0, f64::max);
        let trial_value = p.value(&trial);

        if trial_value.is_finite() && trial_value <= lin.value && step_norm > 0.0 {
            let s = DVector::from_vec(step);
            let predicted = -(lin.gradient.dot(&s) + 0.5 * s.dot(&(&lin.hessian * &s)));
            let rho = if predicted > 0.0 {
                (lin.value - trial_value) / predicted
            } else {
                0.0
            };
            damping *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            damping = damping.max(1e-15);
            nu = 2.0;
            theta = trial;
            lin = p.linearize(&theta);
            last_step = step_norm;
            if gradient_ok && step_norm < STEP_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            if gradient_ok {
                // objective no longer decreases: at the floating-point floor
                converged = true;
                last_step = 0.0;
                break;
            }
            damping *= nu;
            nu *= 2.0;
            if damping > MAX_DAMPING {
                notes.push("no downhill step found; stopped with damping at its limit".into());
                break;
            }
        }
    }
    if !converged && iterations >= max_iterations {
        notes.push(format!("reached max_iterations = {max_iterations}"));
    }
    let active = active_set(p, &theta, &lin.gradient);
    Outcome {
        theta,
        lin,
        converged,
        iterations,
        decrement,
        last_step,
        active,
        notes,
    }
}
