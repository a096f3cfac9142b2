use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::event::{Component, EventSampler, ResponseOptions};
use super::histogram::{DelayWindow, TimeEnergyHistogram, UniformAxis};
use super::model::AnnihilationModel;
use crate::constants::PS_PER_NS;
use crate::detection::{random_to_true_ratio, DetectorSpec, SourceSpec};
use crate::error::{Error, Result};

/// Stream offset separating random-coincidence chunks from true-event chunks.
const RANDOM_STREAM_BASE: u64 = 1 << 32;

/// Draws outside the delay axis allowed per recorded event before giving up.
const MAX_DISCARD_RATIO: u64 = 1000;

pub const RNG_DESCRIPTION: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), one stream per chunk; randoms use stream 2^32 + chunk";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    /// Recorded true coincidences N_true.
    pub events: u64,
    pub seed: u64,
    pub t_min_ns: f64,
    pub t_max_ns: f64,
    pub bins: usize,
    pub timing_response: bool,
    pub energy_response: bool,
    pub energy_max_kev: f64,
    pub energy_bins: usize,
    pub chunk_size: u64,
    pub delay_windows: Vec<DelayWindow>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            events: 1_000_000,
            seed: 1,
            t_min_ns: -20.0,
            t_max_ns: 1000.0,
            bins: 1200,
            timing_response: true,
            energy_response: true,
            energy_max_kev: 2000.0,
            energy_bins: 1000,
            chunk_size: 1 << 16,
            delay_windows: vec![
                DelayWindow::new("prompt", -20.0, 10.0),
                DelayWindow::new("late", 50.0, 1000.0),
            ],
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.events == 0 {
            return Err(Error::validation("simulation.events", "events must be > 0"));
        }
        if !(self.t_min_ns < self.t_max_ns
            && self.t_max_ns > 0.0
            && self.t_min_ns.is_finite()
            && self.t_max_ns.is_finite())
        {
            return Err(Error::validation(
                "simulation.t_max_ns",
                format!(
                    "need t_min < t_max and t_max > 0, got [{}, {})",
                    self.t_min_ns, self.t_max_ns
                ),
            ));
        }
        if self.bins == 0 {
            return Err(Error::validation("simulation.bins", "bins must be > 0"));
        }
        crate::error::require_positive(
            "simulation.energy_max_kev",
            "energy axis maximum",
            self.energy_max_kev,
        )?;
        if self.energy_bins == 0 {
            return Err(Error::validation(
                "simulation.energy_bins",
                "energy bins must be > 0",
            ));
        }
        if self.chunk_size == 0 {
            return Err(Error::validation(
                "simulation.chunk_size",
                "chunk size must be > 0",
            ));
        }
        for w in &self.delay_windows {
            if !(w.t_min_ns < w.t_max_ns) {
                return Err(Error::validation(
                    format!("simulation.delay_windows.{}", w.name),
                    format!("need t_min < t_max, got [{}, {})", w.t_min_ns, w.t_max_ns),
                ));
            }
        }
        Ok(())
    }

    pub fn time_axis(&self) -> Result<UniformAxis> {
        UniformAxis::new(self.t_min_ns, self.t_max_ns, self.bins)
    }

    pub fn energy_axis(&self) -> Result<UniformAxis> {
        UniformAxis::new(0.0, self.energy_max_kev, self.energy_bins)
    }

    pub fn window_ns(&self) -> f64 {
        self.t_max_ns - self.t_min_ns
    }

    /// Event quota of each chunk, in chunk order.
    pub fn chunk_plan(&self, total: u64) -> Vec<u64> {
        let full = total / self.chunk_size;
        let rest = total % self.chunk_size;
        let mut plan = vec![self.chunk_size; full as usize];
        if rest > 0 {
            plan.push(rest);
        }
        plan
    }
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Partial {
    hist: TimeEnergyHistogram,
    components: [u64; 5],
    discarded: u64,
}

/// Generates the synthetic lifetime spectrum on the current rayon pool.
pub fn simulate_spectrum(
    model: &AnnihilationModel,
    det: &DetectorSpec,
    source: &SourceSpec,
    sim: &SimulationSettings,
) -> Result<TimeEnergyHistogram> {
    sim.validate()?;
    let time_axis = sim.time_axis()?;
    let energy_axis = sim.energy_axis()?;
    let responses = ResponseOptions {
        timing: sim.timing_response,
        energy: sim.energy_response,
        start_lifetime_ns: source.nuclear_lifetime_ps / PS_PER_NS,
    };
    let sampler = EventSampler::new(model, det, source, responses);
    let empty = || TimeEnergyHistogram::empty(time_axis, energy_axis, &sim.delay_windows);

    let rc = random_to_true_ratio(source, det);
    let n_random = (rc * sim.events as f64).round() as u64;

    let true_chunks: Vec<(u64, u64)> = sim
        .chunk_plan(sim.events)
        .into_iter()
        .enumerate()
        .map(|(i, q)| (i as u64, q))
        .collect();
    let random_chunks: Vec<(u64, u64)> = sim
        .chunk_plan(n_random)
        .into_iter()
        .enumerate()
        .map(|(i, q)| (RANDOM_STREAM_BASE + i as u64, q))
        .collect();

    let run_true = |&(stream, quota): &(u64, u64)| -> Result<Partial> {
        let mut rng = chunk_rng(sim.seed, stream);
        let mut part = Partial {
            hist: empty(),
            components: [0; 5],
            discarded: 0,
        };
        let mut accepted = 0;
        while accepted < quota {
            let ev = sampler.sample(&mut rng);
            if part.hist.fill(ev.observed_time_ns, ev.deposited_energy_kev) {
                accepted += 1;
                part.components[ev.component.index()] += 1;
            } else {
                part.discarded += 1;
                if part.discarded > MAX_DISCARD_RATIO * quota + 1_000_000 {
                    return Err(Error::validation(
                        "simulation.t_max_ns",
                        "delay axis excludes almost every event",
                    ));
                }
            }
        }
        Ok(part)
    };
    let run_random = |&(stream, quota): &(u64, u64)| -> Result<Partial> {
        let mut rng = chunk_rng(sim.seed, stream);
        let mut part = Partial {
            hist: empty(),
            components: [0; 5],
            discarded: 0,
        };
        for _ in 0..quota {
            let ev = sampler.sample_random(sim.t_min_ns, sim.t_max_ns, &mut rng);
            if part.hist.fill(ev.observed_time_ns, ev.deposited_energy_kev) {
                part.components[Component::Random.index()] += 1;
            } else {
                // rounding can land exactly on t_max
                part.hist.fill(sim.t_min_ns, ev.deposited_energy_kev);
                part.components[Component::Random.index()] += 1;
            }
        }
        Ok(part)
    };

    let merge = |mut a: Partial, b: Partial| {
        a.hist.merge(&b.hist);
        for (x, y) in a.components.iter_mut().zip(b.components) {
            *x += y;
        }
        a.discarded += b.discarded;
        a
    };
    let identity = || Partial {
        hist: empty(),
        components: [0; 5],
        discarded: 0,
    };

    let trues = true_chunks
        .par_iter()
        .map(run_true)
        .try_reduce(identity, |a, b| Ok(merge(a, b)))?;
    let randoms = random_chunks
        .par_iter()
        .map(run_random)
        .try_reduce(identity, |a, b| Ok(merge(a, b)))?;
    let total = merge(trues, randoms);

    let mut hist = total.hist;
    let meta = &mut hist.metadata;
    meta.seed = sim.seed;
    meta.n_true = sim.events;
    meta.n_random = n_random;
    meta.n_discarded = total.discarded;
    meta.random_to_true = rc;
    meta.rng = RNG_DESCRIPTION.to_string();
    meta.chunk_size = sim.chunk_size;
    meta.component_counts = Component::ALL
        .iter()
        .map(|c| (c.name().to_string(), total.components[c.index()]))
        .collect();
    if model.intensity_para > 0.0 && sim.t_max_ns < 5.0 / model.rate_para_per_ns {
        meta.warnings.push(format!(
            "delay axis ends at {} ns, shorter than 5 para-positronium lifetimes ({} ns)",
            sim.t_max_ns,
            5.0 / model.rate_para_per_ns
        ));
    }
    Ok(hist)
}

/// Same as [`simulate_spectrum`] on a dedicated pool of `workers` threads.
pub fn simulate_spectrum_with_workers(
    model: &AnnihilationModel,
    det: &DetectorSpec,
    source: &SourceSpec,
    sim: &SimulationSettings,
    workers: usize,
) -> Result<TimeEnergyHistogram> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Analysis(format!("cannot build worker pool: {e}")))?;
    pool.install(|| simulate_spectrum(model, det, source, sim))
}
