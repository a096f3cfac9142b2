//! Synthetic delayed-coincidence lifetime spectra.
//!
//! Events are generated in fixed-size chunks, each on its own ChaCha8 stream
//! derived from the run seed, so the merged histogram depends only on the
//! seed and the chunk plan, never on the number of worker threads.

mod event;
mod histogram;
mod model;
mod simulate;

pub use event::{
    sample_event, AnnihilationEvent, Component, EventSampler, ResponseOptions,
    ANNIHILATION_LINE_KEV, SINGLE_QUANTUM_LINE_KEV,
};
pub use histogram::{
    DelayWindow, EnergySpectrum, HistogramMetadata, TimeEnergyHistogram, UniformAxis,
};
pub use model::{ore_powell_density, shoulder_rate, AnnihilationModel, Shoulder, ThreeGammaShape};
pub use simulate::{
    simulate_spectrum, simulate_spectrum_with_workers, SimulationSettings, RNG_DESCRIPTION,
};
