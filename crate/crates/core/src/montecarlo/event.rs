use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{ore_powell_density, AnnihilationModel, ThreeGammaShape};
use crate::constants::PS_PER_NS;
use crate::detection::{DetectorSpec, SourceSpec};

/// Stop-quantum energy of 2γ annihilation, keV.
pub const ANNIHILATION_LINE_KEV: f64 = 511.0;
/// Single observable quantum of the anomalous mode, 2mₑc² in keV.
pub const SINGLE_QUANTUM_LINE_KEV: f64 = 1022.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Para,
    #[serde(rename = "ortho_3g")]
    Ortho3g,
    #[serde(rename = "ortho_1g")]
    Ortho1g,
    Free,
    Random,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Para,
        Component::Ortho3g,
        Component::Ortho1g,
        Component::Free,
        Component::Random,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Para => "para",
            Component::Ortho3g => "ortho_3g",
            Component::Ortho1g => "ortho_1g",
            Component::Free => "free",
            Component::Random => "random",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnihilationEvent {
    /// Decay delay after positron birth, ns.
    pub true_time_ns: f64,
    /// Measured start–stop delay after the timing response, ns.
    pub observed_time_ns: f64,
    pub component: Component,
    /// Stop-detector deposit after the energy response, keV.
    pub deposited_energy_kev: f64,
}

/// Which detector responses are applied to sampled events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseOptions {
    pub timing: bool,
    pub energy: bool,
    /// τ* of the start level, ns.
    pub start_lifetime_ns: f64,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        Self {
            timing: true,
            energy: true,
            start_lifetime_ns: 5.24 / PS_PER_NS,
        }
    }
}

enum DelayLaw {
    Exponential(Exp<f64>),
    Immediate,
}

impl DelayLaw {
    fn new(rate: f64) -> Self {
        if rate.is_finite() {
            DelayLaw::Exponential(Exp::new(rate).expect("rate validated positive"))
        } else {
            DelayLaw::Immediate
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DelayLaw::Exponential(d) => d.sample(rng),
            DelayLaw::Immediate => 0.0,
        }
    }
}

/// Precomputed per-model sampling state. Cheap to share across threads.
pub struct EventSampler {
    cum_para: f64,
    cum_ortho: f64,
    para: DelayLaw,
    ortho: DelayLaw,
    free: DelayLaw,
    anomaly_branching: f64,
    shoulder_rise_ns: Option<f64>,
    three_gamma: ThreeGammaShape,
    start_delay: Exp<f64>,
    timing_sigma_ns: f64,
    energy_sigma_anchor: f64,
    responses: ResponseOptions,
    nuclear_line_kev: f64,
    nuclear_random_fraction: f64,
}

impl EventSampler {
    pub fn new(
        model: &AnnihilationModel,
        det: &DetectorSpec,
        source: &SourceSpec,
        responses: ResponseOptions,
    ) -> Self {
        let shoulder_rise_ns = (model.shoulder.enabled && model.shoulder.rise_time_ns > 0.0)
            .then_some(model.shoulder.rise_time_ns);
        Self {
            cum_para: model.intensity_para,
            cum_ortho: model.intensity_para + model.intensity_ortho,
            para: DelayLaw::new(model.rate_para_per_ns),
            ortho: DelayLaw::new(model.rate_ortho_observed_per_ns()),
            free: DelayLaw::new(model.rate_free_per_ns),
            anomaly_branching: model.anomaly_branching,
            shoulder_rise_ns,
            three_gamma: model.three_gamma_shape,
            start_delay: Exp::new(1.0 / responses.start_lifetime_ns)
                .expect("positive start lifetime"),
            timing_sigma_ns: det.timing_sigma_ns(),
            energy_sigma_anchor: det.energy_sigma_kev(crate::detection::RESOLUTION_ANCHOR_KEV),
            responses,
            nuclear_line_kev: source.nuclear_gamma_energy_kev(),
            nuclear_random_fraction: det.nuclear_random_fraction(),
        }
    }

    /// Draws one true coincidence.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AnnihilationEvent {
        let u: f64 = rng.random();
        let (component, true_time) = if u < self.cum_para {
            (Component::Para, self.para.sample(rng))
        } else if u < self.cum_ortho {
            let t = self.ortho.sample(rng);
            let single =
                self.anomaly_branching > 0.0 && rng.random::<f64>() < self.anomaly_branching;
            (
                if single {
                    Component::Ortho1g
                } else {
                    Component::Ortho3g
                },
                t,
            )
        } else {
            (Component::Free, self.sample_free(rng))
        };

        let start_delay = self.start_delay.sample(rng);
        let mut observed = true_time - start_delay;
        if self.responses.timing {
            let z: f64 = rng.sample(StandardNormal);
            observed += self.timing_sigma_ns * z;
        }

        let line = match component {
            Component::Para | Component::Free => ANNIHILATION_LINE_KEV,
            Component::Ortho1g => SINGLE_QUANTUM_LINE_KEV,
            Component::Ortho3g => self.sample_three_gamma(rng),
            Component::Random => unreachable!("true events only"),
        };
        AnnihilationEvent {
            true_time_ns: true_time,
            observed_time_ns: observed,
            component,
            deposited_energy_kev: self.smear_energy(line, rng),
        }
    }

    /// Draws one random coincidence, uniform on `[t_min, t_max)`.
    pub fn sample_random<R: Rng + ?Sized>(
        &self,
        t_min: f64,
        t_max: f64,
        rng: &mut R,
    ) -> AnnihilationEvent {
        let t = t_min + (t_max - t_min) * rng.random::<f64>();
        let nuclear = rng.random::<f64>() < self.nuclear_random_fraction;
        let line = if nuclear {
            self.nuclear_line_kev
        } else {
            ANNIHILATION_LINE_KEV
        };
        AnnihilationEvent {
            true_time_ns: t,
            observed_time_ns: t,
            component: Component::Random,
            deposited_energy_kev: self.smear_energy(line, rng),
        }
    }

    /// First arrival of the free-annihilation process; thinning against the
    /// asymptotic rate when the shoulder is on.
    fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Some(rise) = self.shoulder_rise_ns else {
            return self.free.sample(rng);
        };
        let mut t = 0.0;
        loop {
            t += self.free.sample(rng);
            let accept = 1.0 - (-t / rise).exp();
            if rng.random::<f64>() < accept {
                return t;
            }
        }
    }

    fn sample_three_gamma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.three_gamma {
            ThreeGammaShape::Uniform => ANNIHILATION_LINE_KEV * rng.random::<f64>(),
            ThreeGammaShape::OrePowell => loop {
                let x: f64 = rng.random();
                if 2.0 * rng.random::<f64>() < ore_powell_density(x) {
                    return ANNIHILATION_LINE_KEV * x;
                }
            },
        }
    }

    fn smear_energy<R: Rng + ?Sized>(&self, line_kev: f64, rng: &mut R) -> f64 {
        if !self.responses.energy {
            return line_kev;
        }
        let sigma =
            self.energy_sigma_anchor * (line_kev / crate::detection::RESOLUTION_ANCHOR_KEV).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        (line_kev + sigma * z).max(0.0)
    }
}

/// Draws a single event with default responses and source.
pub fn sample_event<R: Rng + ?Sized>(
    model: &AnnihilationModel,
    det: &DetectorSpec,
    rng: &mut R,
) -> AnnihilationEvent {
    EventSampler::new(
        model,
        det,
        &SourceSpec::default(),
        ResponseOptions::default(),
    )
    .sample(rng)
}
