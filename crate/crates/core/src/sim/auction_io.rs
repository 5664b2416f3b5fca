use serde::{Deserialize, Serialize};

use crate::auction::{AuctionRound, ValuationBounds, ValuationFamily, ValuationModel};
use crate::dynamics::{GaussianSampler, TargetState};
use crate::error::{Error, Result};
use crate::filter::ParticleCloud;
use crate::fisher::ExactKappa;
use crate::payment::{find_thresholds, settle, Threshold};
use crate::sensing::{QuantizerBank, Roi, SensorNode, SignalModel, ThresholdStrategy};

use nalgebra::Matrix4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidderSpec {
    pub x: f64,
    pub y: f64,
    pub report: f64,
    #[serde(default = "default_bounds")]
    pub bounds: ValuationBounds,
    /// Joules; defaults to `initial_energy`.
    #[serde(default)]
    pub residual_energy: Option<f64>,
    #[serde(default = "default_energy")]
    pub initial_energy: f64,
}

fn default_bounds() -> ValuationBounds {
    ValuationBounds { lo: 0.1, hi: 1.0 }
}

fn default_energy() -> f64 {
    1.0
}

/// The fusion center's belief about the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetBelief {
    /// Gaussian, represented by `particles` draws from `seed`.
    Prior {
        mean: [f64; 4],
        variance: [f64; 4],
        #[serde(default = "default_particles")]
        particles: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Explicit weighted particles; uniform weights when omitted.
    Particles {
        states: Vec<[f64; 4]>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

fn default_particles() -> usize {
    1000
}

/// A single auction round, read by the `auction` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionScenario {
    #[serde(default = "default_p0")]
    pub signal_power: f64,
    #[serde(default = "default_sigma")]
    pub noise_std: f64,
    #[serde(default = "default_fc")]
    pub fc_position: [f64; 2],
    #[serde(default = "default_roi")]
    pub roi_size: f64,
    #[serde(default)]
    pub quantizer: ThresholdStrategy,
    pub bandwidth: u32,
    #[serde(default = "default_fc_value")]
    pub fc_value: f64,
    #[serde(default)]
    pub energy_exponent: f64,
    #[serde(default)]
    pub valuation_family: ValuationFamily,
    pub sensors: Vec<BidderSpec>,
    pub target: TargetBelief,
}

fn default_p0() -> f64 {
    1000.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_fc() -> [f64; 2] {
    [-22.0, 20.0]
}
fn default_roi() -> f64 {
    50.0
}
fn default_fc_value() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub allocation: Vec<u32>,
    pub payments: Vec<f64>,
    pub objective: f64,
    /// Per sensor, the reports at which its allocation drops.
    pub thresholds: Vec<Vec<Threshold>>,
    /// Per sensor, the expected FIM trace for each affordable bit count.
    pub fim_traces: Vec<Vec<f64>>,
}

impl AuctionScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn sensors(&self) -> Result<Vec<SensorNode>> {
        let [fx, fy] = self.fc_position;
        self.sensors
            .iter()
            .enumerate()
            .map(|(id, b)| {
                let bounds = ValuationBounds::new(b.bounds.lo, b.bounds.hi)?;
                bounds.check(b.report)?;
                let residual = b.residual_energy.unwrap_or(b.initial_energy);
                if !(b.initial_energy > 0.0 && residual >= 0.0) {
                    return Err(Error::Config(format!("sensor {id}: invalid energy")));
                }
                Ok(SensorNode {
                    id,
                    x: b.x,
                    y: b.y,
                    fc_distance: (b.x - fx).hypot(b.y - fy),
                    residual_energy: residual,
                    initial_energy: b.initial_energy,
                    valuation: b.report,
                    bounds,
                })
            })
            .collect()
    }

    fn cloud(&self) -> Result<ParticleCloud> {
        match &self.target {
            TargetBelief::Prior {
                mean,
                variance,
                particles,
                seed,
            } => {
                let sampler =
                    GaussianSampler::new(TargetState::from(*mean), &Matrix4::from_diagonal(&(*variance).into()))?;
                ParticleCloud::from_prior(&sampler, *particles, &mut ChaCha8Rng::seed_from_u64(*seed))
            }
            TargetBelief::Particles { states, weights } => {
                let particles = states.iter().map(|s| TargetState::from(*s)).collect();
                match weights {
                    Some(w) => ParticleCloud::new(particles, w.clone()),
                    None => ParticleCloud::uniform(particles),
                }
            }
        }
    }

    /// Allocate, price and report thresholds.
    pub fn run(&self) -> Result<AuctionOutcome> {
        if self.bandwidth > u32::from(u8::MAX) {
            return Err(Error::Config(format!("bandwidth {} exceeds 255 bits", self.bandwidth)));
        }
        let sm = SignalModel::new(self.signal_power, self.noise_std)?;
        let vm = ValuationModel::new(self.valuation_family, self.fc_value, self.energy_exponent)?;
        let sensors = self.sensors()?;
        let cloud = self.cloud()?;
        let bank = QuantizerBank::build(
            self.bandwidth as u8,
            &sm,
            self.quantizer,
            &sensors,
            &Roi { size: self.roi_size },
        )?;
        let kappa = ExactKappa {
            bank: &bank,
            signal: &sm,
        };
        let round = AuctionRound::prepare(&cloud, &sensors, &vm, self.bandwidth, &kappa, &sm)?;
        let reports: Vec<f64> = self.sensors.iter().map(|b| b.report).collect();
        let s = settle(&round, &reports)?;
        let thresholds = (0..sensors.len())
            .map(|i| find_thresholds(&round, &reports, i))
            .collect::<Result<_>>()?;
        Ok(AuctionOutcome {
            allocation: s.allocation.0,
            payments: s.payments,
            objective: s.objective,
            thresholds,
            fim_traces: round.bidders().iter().map(|b| b.traces.clone()).collect(),
        })
    }
}
