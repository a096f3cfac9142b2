use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform binning of `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformAxis {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl UniformAxis {
    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) || bins == 0 {
            return Err(Error::validation(
                "axis",
                format!("need min < max and bins > 0, got [{min}, {max}) with {bins} bins"),
            ));
        }
        Ok(Self { min, max, bins })
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn lower_edge(&self, i: usize) -> f64 {
        self.min + (self.max - self.min) * i as f64 / self.bins as f64
    }

    pub fn upper_edge(&self, i: usize) -> f64 {
        self.lower_edge(i + 1)
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.lower_edge(i) + self.upper_edge(i))
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins).map(|i| self.center(i))
    }

    /// Bin holding `x`, or `None` outside `[min, max)`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.min && x < self.max) {
            return None;
        }
        let i = ((x - self.min) / self.width()) as usize;
        // guard the rounding at the upper edge
        Some(i.min(self.bins - 1))
    }
}

/// Named delay interval `[t_min, t_max)` for energy spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayWindow {
    pub name: String,
    pub t_min_ns: f64,
    pub t_max_ns: f64,
}

impl DelayWindow {
    pub fn new(name: impl Into<String>, t_min_ns: f64, t_max_ns: f64) -> Self {
        Self {
            name: name.into(),
            t_min_ns,
            t_max_ns,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min_ns && t < self.t_max_ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub window: DelayWindow,
    pub counts: Vec<u64>,
    /// Deposits at or above the energy axis maximum.
    pub overflow: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HistogramMetadata {
    pub seed: u64,
    pub n_true: u64,
    pub n_random: u64,
    /// True events drawn outside the delay axis and not recorded.
    pub n_discarded: u64,
    pub random_to_true: f64,
    pub rng: String,
    pub chunk_size: u64,
    pub component_counts: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
    pub config_hash: Option<String>,
    pub config_echo: Option<String>,
}

/// Binned delay spectrum plus per-window deposited-energy spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeEnergyHistogram {
    pub time_axis: UniformAxis,
    pub time_counts: Vec<u64>,
    pub energy_axis: UniformAxis,
    pub energy_by_window: Vec<EnergySpectrum>,
    pub metadata: HistogramMetadata,
}

impl TimeEnergyHistogram {
    /// Empty histogram over the given axes.
    pub fn empty(
        time_axis: UniformAxis,
        energy_axis: UniformAxis,
        windows: &[DelayWindow],
    ) -> Self {
        Self {
            time_axis,
            time_counts: vec![0; time_axis.bins],
            energy_axis,
            energy_by_window: windows
                .iter()
                .map(|w| EnergySpectrum {
                    window: w.clone(),
                    counts: vec![0; energy_axis.bins],
                    overflow: 0,
                })
                .collect(),
            metadata: HistogramMetadata::default(),
        }
    }

    /// Time-only histogram, e.g. read back from CSV.
    pub fn from_time_counts(time_axis: UniformAxis, time_counts: Vec<u64>) -> Result<Self> {
        if time_counts.len() != time_axis.bins {
            return Err(Error::Format {
                what: "histogram",
                message: format!("{} counts for {} bins", time_counts.len(), time_axis.bins),
            });
        }
        let total = time_counts.iter().sum();
        Ok(Self {
            time_axis,
            time_counts,
            energy_axis: UniformAxis {
                min: 0.0,
                max: 1.0,
                bins: 1,
            },
            energy_by_window: Vec::new(),
            metadata: HistogramMetadata {
                n_true: total,
                ..HistogramMetadata::default()
            },
        })
    }

    pub fn total_counts(&self) -> u64 {
        self.time_counts.iter().sum()
    }

    /// Records one event.
    pub fn fill(&mut self, observed_time_ns: f64, energy_kev: f64) -> bool {
        let Some(i) = self.time_axis.index_of(observed_time_ns) else {
            return false;
        };
        self.time_counts[i] += 1;
        let energy_bin = self
            .energy_axis
            .index_of(energy_kev.max(self.energy_axis.min));
        for spectrum in &mut self.energy_by_window {
            if spectrum.window.contains(observed_time_ns) {
                match energy_bin {
                    Some(j) => spectrum.counts[j] += 1,
                    None => spectrum.overflow += 1,
                }
            }
        }
        true
    }

    /// Adds the counts of `other`, which must share the binning.
    pub fn merge(&mut self, other: &TimeEnergyHistogram) {
        debug_assert_eq!(self.time_axis, other.time_axis);
        for (a, b) in self.time_counts.iter_mut().zip(&other.time_counts) {
            *a += b;
        }
        for (a, b) in self
            .energy_by_window
            .iter_mut()
            .zip(&other.energy_by_window)
        {
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += y;
            }
            a.overflow += b.overflow;
        }
    }

    pub fn energy_window(&self, t_min_ns: f64, t_max_ns: f64) -> Option<&EnergySpectrum> {
        self.energy_by_window
            .iter()
            .find(|s| s.window.t_min_ns == t_min_ns && s.window.t_max_ns == t_max_ns)
    }

    pub fn energy_window_named(&self, name: &str) -> Option<&EnergySpectrum> {
        self.energy_by_window.iter().find(|s| s.window.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_indexing() {
        let a = UniformAxis::new(-20.0, 1000.0, 1200).unwrap();
        assert!((a.width() - 0.85).abs() < 1e-12);
        assert_eq!(a.index_of(-20.0), Some(0));
        assert_eq!(a.index_of(999.999_999), Some(1199));
        assert_eq!(a.index_of(1000.0), None);
        assert_eq!(a.index_of(-20.1), None);
        assert_eq!(a.index_of(f64::NAN), None);
        assert!((a.center(0) - -19.575).abs() < 1e-12);
        assert!(UniformAxis::new(1.0, 1.0, 3).is_err());
        assert!(UniformAxis::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn fill_updates_windows() {
        let t = UniformAxis::new(0.0, 10.0, 10).unwrap();
        let e = UniformAxis::new(0.0, 100.0, 10).unwrap();
        let mut h = TimeEnergyHistogram::empty(t, e, &[DelayWindow::new("late", 5.0, 10.0)]);
        assert!(h.fill(6.0, 55.0));
        assert!(h.fill(1.0, 55.0));
        assert!(h.fill(7.0, 500.0));
        assert!(!h.fill(11.0, 55.0));
        assert_eq!(h.total_counts(), 3);
        let late = h.energy_window_named("late").unwrap();
        assert_eq!(late.counts[5], 1);
        assert_eq!(late.overflow, 1);
        assert!(h.energy_window(5.0, 10.0).is_some());
    }
}
