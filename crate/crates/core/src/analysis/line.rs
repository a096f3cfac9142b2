//! Counting search for a mono-energetic line over a smooth continuum.

use serde::{Deserialize, Serialize};

use crate::detection::DetectorSpec;
use crate::error::{Error, Result};
use crate::montecarlo::{TimeEnergyHistogram, UniformAxis, SINGLE_QUANTUM_LINE_KEV};

/// Line window: ±`half_width_sigmas` energy σ around `line_kev`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineWindow {
    pub line_kev: f64,
    pub half_width_kev: f64,
}

impl LineWindow {
    pub fn for_detector(line_kev: f64, det: &DetectorSpec) -> Self {
        Self {
            line_kev,
            half_width_kev: 2.0 * det.energy_sigma_kev(line_kev),
        }
    }

    /// The 1022 keV single-quantum line at ±2σ of the detector resolution.
    pub fn single_quantum(det: &DetectorSpec) -> Self {
        Self::for_detector(SINGLE_QUANTUM_LINE_KEV, det)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSearchResult {
    pub on_window_kev: [f64; 2],
    pub sidebands_kev: [[f64; 2]; 2],
    pub on_counts: u64,
    pub off_counts: u64,
    /// On-window width over total sideband width.
    pub alpha: f64,
    pub excess_counts: f64,
    pub excess_sigma: f64,
    /// Signed likelihood-ratio significance of the excess.
    pub significance: f64,
}

fn edge_at_or_below(axis: &UniformAxis, x: f64) -> usize {
    (((x - axis.min) / axis.width()).floor().max(0.0) as usize).min(axis.bins)
}

fn edge_at_or_above(axis: &UniformAxis, x: f64) -> usize {
    (((x - axis.min) / axis.width()).ceil().max(0.0) as usize).min(axis.bins)
}

/// Li–Ma significance for `on` counts against `off` counts scaled by `alpha`.
pub fn li_ma_significance(on: f64, off: f64, alpha: f64) -> f64 {
    if on + off <= 0.0 {
        return 0.0;
    }
    let total = on + off;
    let t_on = if on > 0.0 {
        on * ((1.0 + alpha) / alpha * on / total).ln()
    } else {
        0.0
    };
    let t_off = if off > 0.0 {
        off * ((1.0 + alpha) * off / total).ln()
    } else {
        0.0
    };
    let s = (2.0 * (t_on + t_off)).max(0.0).sqrt();
    if on >= alpha * off {
        s
    } else {
        -s
    }
}

/// Counts the excess at `line` in the energy spectrum recorded for the delay
/// window `[t_min, t_max)`, with the continuum taken from the two adjacent
/// half-width sidebands (exact for a linear continuum).
pub fn energy_line_search(
    hist: &TimeEnergyHistogram,
    window_ns: (f64, f64),
    line: LineWindow,
) -> Result<LineSearchResult> {
    let spectrum = hist
        .energy_window(window_ns.0, window_ns.1)
        .ok_or_else(|| {
            Error::Analysis(format!(
                "no energy spectrum stored for delay window [{}, {}) ns",
                window_ns.0, window_ns.1
            ))
        })?;
    let total: u64 = spectrum.counts.iter().sum::<u64>() + spectrum.overflow;
    if total == 0 {
        return Err(Error::Analysis(format!(
            "delay window [{}, {}) ns holds no events",
            window_ns.0, window_ns.1
        )));
    }
    let axis = hist.energy_axis;
    let on_lo = edge_at_or_below(&axis, line.line_kev - line.half_width_kev);
    let on_hi = edge_at_or_above(&axis, line.line_kev + line.half_width_kev);
    let side = ((on_hi - on_lo) as f64 / 2.0).ceil() as usize;
    if on_hi <= on_lo || on_lo < side || on_hi + side > axis.bins {
        return Err(Error::Analysis(format!(
            "line window around {} keV and its sidebands do not fit the energy axis [{}, {})",
            line.line_kev, axis.min, axis.max
        )));
    }
    let sum = |a: usize, b: usize| spectrum.counts[a..b].iter().sum::<u64>();
    let on = sum(on_lo, on_hi);
    let off = sum(on_lo - side, on_lo) + sum(on_hi, on_hi + side);
    let alpha = (on_hi - on_lo) as f64 / (2 * side) as f64;
    let excess = on as f64 - alpha * off as f64;
    Ok(LineSearchResult {
        on_window_kev: [axis.lower_edge(on_lo), axis.lower_edge(on_hi)],
        sidebands_kev: [
            [axis.lower_edge(on_lo - side), axis.lower_edge(on_lo)],
            [axis.lower_edge(on_hi), axis.lower_edge(on_hi + side)],
        ],
        on_counts: on,
        off_counts: off,
        alpha,
        excess_counts: excess,
        excess_sigma: (on as f64 + alpha * alpha * off as f64).sqrt(),
        significance: li_ma_significance(on as f64, off as f64, alpha),
    })
}
