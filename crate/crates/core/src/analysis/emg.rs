//! Bin integrals of an exponential decay convolved with a Gaussian response.
//!
//! For a unit-area decay λ·exp(−λu), u ≥ 0, smeared by N(0, σ²), the CDF is
//!
//! F(u) = Φ(u/σ) − E(u),  E(u) = exp(−λu + λ²σ²/2)·Φ(u/σ − λσ)
//!
//! and every parameter derivative reduces to E and the Gaussian density:
//!
//! ∂F/∂λ = (u − λσ²)·E + σ·φ(u/σ)
//! ∂F/∂σ = λ·φ(u/σ) − λ²σ·E
//! ∂F/∂u = λ·E

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use statrs::function::erf::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Scaled complementary error function exp(z²)·erfc(z) for z ≥ 0.
pub(crate) fn erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 25.0 {
        erfc(z) * (z * z).exp()
    } else {
        // asymptotic series, relative error below 1e-11 here
        let z2 = z * z;
        let inv = 1.0 / (2.0 * z2);
        (1.0 - inv + 3.0 * inv * inv - 15.0 * inv.powi(3) + 105.0 * inv.powi(4)) / (z * PI.sqrt())
    }
}

fn gauss_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// ½·erfc(x/√2) = 1 − Φ(x).
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Φ(b) − Φ(a) for a ≤ b without cancellation in either tail.
fn gauss_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else {
        upper_tail(-b) - upper_tail(-a)
    }
}

/// Values at one edge u = t − t₀.
#[derive(Debug, Clone, Copy)]
struct Edge {
    e: f64,
    pdf: f64,
    x: f64,
}

fn edge(rate: f64, sigma: f64, u: f64) -> Edge {
    let x = u / sigma;
    let z = (rate * sigma - x) / SQRT_2;
    let e = if z > 0.0 {
        0.5 * erfcx(z) * (-0.5 * x * x).exp()
    } else {
        (-rate * u + 0.5 * rate * rate * sigma * sigma).exp() * 0.5 * erfc(z)
    };
    Edge {
        e,
        pdf: gauss_pdf(x),
        x,
    }
}

/// Probability mass and its derivatives for one bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinIntegral {
    pub mass: f64,
    pub d_rate: f64,
    pub d_time_zero: f64,
    pub d_sigma: f64,
}

/// Mass of `[lo, hi)` for decay rate `rate` (ns⁻¹), response σ and time zero `t0`.
pub fn bin_integral(rate: f64, sigma: f64, t0: f64, lo: f64, hi: f64) -> BinIntegral {
    let (ul, uh) = (lo - t0, hi - t0);
    let a = edge(rate, sigma, ul);
    let b = edge(rate, sigma, uh);
    let mass = gauss_mass(a.x, b.x) - (b.e - a.e);
    let g = |u: f64, ed: Edge| (u - rate * sigma * sigma) * ed.e + sigma * ed.pdf;
    let h = |ed: Edge| rate * ed.pdf - rate * rate * sigma * ed.e;
    BinIntegral {
        mass: mass.max(0.0),
        d_rate: g(uh, b) - g(ul, a),
        d_time_zero: -rate * (b.e - a.e),
        d_sigma: h(b) - h(a),
    }
}

/// Mass of `[lo, hi)` only.
pub fn bin_mass(rate: f64, sigma: f64, t0: f64, lo: f64, hi: f64) -> f64 {
    bin_integral(rate, sigma, t0, lo, hi).mass
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct quadrature of the convolution; shares no code with `bin_integral`.
    fn quadrature_mass(rate: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
        let density = |u: f64| {
            // ∫₀^∞ λe^{−λs} φ((u−s)/σ)/σ ds by Simpson on a truncated range
            let s_max = (u + 12.0 * sigma).max(0.0).min(60.0 / rate);
            if s_max <= 0.0 {
                return 0.0;
            }
            let n = 2000;
            let h = s_max / n as f64;
            let f = |s: f64| {
                rate * (-rate * s).exp() * (-0.5 * ((u - s) / sigma).powi(2)).exp()
                    / (sigma * (2.0 * PI).sqrt())
            };
            let mut acc = f(0.0) + f(s_max);
            for i in 1..n {
                acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let n = 400;
        let h = (hi - lo) / n as f64;
        let mut acc = density(lo) + density(hi);
        for i in 1..n {
            acc += density(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn matches_quadrature() {
        for &(rate, sigma, lo, hi) in &[
            (0.5, 0.2, -0.5, 0.3),
            (0.5, 0.2, 0.3, 1.1),
            (8.0, 0.127, -0.45, 0.40),
            (8.0, 0.127, 0.40, 1.25),
            (0.007, 0.127, 10.0, 10.85),
            (2.0, 0.5, -3.0, -2.0),
        ] {
            let exact = bin_mass(rate, sigma, 0.0, lo, hi);
            let quad = quadrature_mass(rate, sigma, lo, hi);
            assert!(
                (exact - quad).abs() < 1e-8 + 1e-6 * quad,
                "rate {rate} sigma {sigma} [{lo}, {hi}): {exact} vs {quad}"
            );
        }
    }

    #[test]
    fn narrow_response_recovers_exponential() {
        let (rate, lo, hi): (f64, f64, f64) = (0.007, 100.0, 100.85);
        let exact = (-rate * lo).exp() - (-rate * hi).exp();
        let got = bin_mass(rate, 1e-4, 0.0, lo, hi);
        assert!(((got - exact) / exact).abs() < 1e-10, "{got} {exact}");
    }

    #[test]
    fn total_mass_is_one() {
        let total: f64 = (0..4000)
            .map(|i| {
                let lo = -10.0 + i as f64 * 0.5;
                bin_mass(0.05, 0.3, 0.2, lo, lo + 0.5)
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn far_tails_are_finite() {
        for &(rate, sigma, lo, hi) in &[
            (1e3, 1e-4, 50.0, 51.0),
            (1e-6, 10.0, -500.0, -499.0),
            (8.0, 0.127, -20.0, -19.0),
        ] {
            let b = bin_integral(rate, sigma, 0.0, lo, hi);
            assert!(
                b.mass.is_finite()
                    && b.d_rate.is_finite()
                    && b.d_sigma.is_finite()
                    && b.d_time_zero.is_finite()
            );
            assert!(b.mass >= 0.0);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let cases = [
            (0.5, 0.2, 0.1, -0.5, 0.3),
            (8.0, 0.127, 0.02, 0.40, 1.25),
            (3.0, 0.3, -0.1, -0.45, 0.40),
        ];
        for &(rate, sigma, t0, lo, hi) in &cases {
            let b = bin_integral(rate, sigma, t0, lo, hi);
            let fd = |f: &dyn Fn(f64) -> f64, x: f64| {
                let h = 1e-4 * x.abs().max(1e-2);
                (f(x + h) - f(x - h)) / (2.0 * h)
            };
            let d_rate = fd(&|r| bin_mass(r, sigma, t0, lo, hi), rate);
            let d_sigma = fd(&|s| bin_mass(rate, s, t0, lo, hi), sigma);
            let d_t0 = fd(&|t| bin_mass(rate, sigma, t, lo, hi), t0);
            for (name, a, n) in [
                ("rate", b.d_rate, d_rate),
                ("sigma", b.d_sigma, d_sigma),
                ("t0", b.d_time_zero, d_t0),
            ] {
                assert!(
                    (a - n).abs() <= 1e-5 * n.abs() + 1e-13,
                    "{name} at {:?}: analytic {a} numeric {n}",
                    (rate, sigma, t0, lo, hi)
                );
            }
        }
    }

    #[test]
    fn far_from_peak_derivatives_are_closed_form() {
        // many σ past t₀ the mass is (e^{−λlo} − e^{−λhi})·e^{λ²σ²/2}
        let (rate, sigma, lo, hi): (f64, f64, f64, f64) = (0.007, 0.127, 10.0, 10.85);
        let m =
            ((-rate * lo).exp() - (-rate * hi).exp()) * (0.5 * rate * rate * sigma * sigma).exp();
        let b = bin_integral(rate, sigma, 0.0, lo, hi);
        assert!((b.mass / m - 1.0).abs() < 1e-13);
        assert!((b.d_sigma / (m * rate * rate * sigma) - 1.0).abs() < 1e-10);
        let d_rate = (-lo * (-rate * lo).exp() + hi * (-rate * hi).exp())
            * (0.5 * rate * rate * sigma * sigma).exp()
            + m * rate * sigma * sigma;
        assert!((b.d_rate / d_rate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn erfcx_branches_agree() {
        let z: f64 = 25.0;
        let series = {
            let inv = 1.0 / (2.0 * z * z);
            (1.0 - inv + 3.0 * inv * inv - 15.0 * inv.powi(3) + 105.0 * inv.powi(4))
                / (z * PI.sqrt())
        };
        let direct = erfc(z) * (z * z).exp();
        assert!(
            ((series - direct) / direct).abs() < 1e-9,
            "{series} {direct}"
        );
    }
}
