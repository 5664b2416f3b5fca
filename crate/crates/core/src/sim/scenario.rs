use std::path::Path;

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{transmit_energy, ValuationBounds, ValuationFamily, ValuationModel};
use crate::dynamics::{MotionModel, TargetState};
use crate::error::{Error, Result};
use crate::sensing::{Roi, SignalModel, ThresholdStrategy};

/// Sensor placement inside the ROI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    /// First `count` cell centres of a `⌈√count⌉ × ⌈√count⌉` lattice, row-major.
    Grid {
        count: usize,
    },
    /// `count` positions uniform over the ROI, drawn once from the master seed.
    Random {
        count: usize,
    },
    Explicit {
        positions: Vec<[f64; 2]>,
    },
}

/// Initial battery of every sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialEnergy {
    /// Enough for this many full-bandwidth transmissions at the sensor's own distance.
    Transmissions(f64),
    /// The same absolute amount (J) for every sensor.
    Joules(f64),
}

/// How the fusion center allocates bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Optimal auction with threshold payments.
    #[default]
    Auction,
    /// Maximize total FIM trace; winners are reimbursed their true energy cost.
    Fim,
}

/// Full description of a Monte Carlo experiment. Every field has a default,
/// so a config file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Side of the square ROI (m), centred on the origin.
    pub roi_size: f64,
    pub fc_position: [f64; 2],
    pub layout: Layout,
    pub signal_power: f64,
    pub noise_std: f64,
    pub quantizer: ThresholdStrategy,
    pub sampling_interval: f64,
    pub noise_intensity: f64,
    /// Negate the target velocity every this many steps (truth and filter).
    pub reverse_every: Option<usize>,
    pub prior_mean: [f64; 4],
    /// Diagonal of the prior covariance.
    pub prior_variance: [f64; 4],
    /// Bits per step (M).
    pub bandwidth: u32,
    pub steps: usize,
    pub trials: usize,
    pub particles: usize,
    /// Particles used for expected-FIM traces; all when absent.
    pub fim_particles: Option<usize>,
    pub valuation_bounds: ValuationBounds,
    pub valuation_family: ValuationFamily,
    pub fc_value: f64,
    /// Exponent `k` of the residual-energy multiplier.
    pub energy_exponent: f64,
    pub initial_energy: InitialEnergy,
    /// Dead fraction that ends the network's lifetime.
    pub alpha: f64,
    pub policy: Policy,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            roi_size: 50.0,
            fc_position: [-22.0, 20.0],
            layout: Layout::Grid { count: 25 },
            signal_power: 1000.0,
            noise_std: 1.0,
            quantizer: ThresholdStrategy::Uniform,
            sampling_interval: 1.25,
            noise_intensity: 2.5e-3,
            reverse_every: None,
            prior_mean: [-23.0, -23.0, 2.0, 2.0],
            prior_variance: [4.0 / 9.0, 4.0 / 9.0, 0.01, 0.01],
            bandwidth: 8,
            steps: 20,
            trials: 100,
            particles: 5000,
            fim_particles: None,
            valuation_bounds: ValuationBounds { lo: 0.1, hi: 1.0 },
            valuation_family: ValuationFamily::Uniform,
            fc_value: 1.0,
            energy_exponent: 0.0,
            initial_energy: InitialEnergy::Transmissions(40.0),
            alpha: 0.6,
            policy: Policy::Auction,
            seed: 1,
        }
    }
}

/// Stream identifiers: each trial owns `STREAMS_PER_TRIAL` consecutive streams.
pub(crate) const STREAMS_PER_TRIAL: u64 = 4;
pub(crate) const STREAM_TRUTH: u64 = 0;
pub(crate) const STREAM_MEASUREMENT: u64 = 1;
pub(crate) const STREAM_FILTER: u64 = 2;
pub(crate) const STREAM_VALUATION: u64 = 3;
const STREAM_LAYOUT: u64 = u64::MAX;

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let positive = [
            ("roi_size", self.roi_size),
            ("signal_power", self.signal_power),
            ("noise_std", self.noise_std),
            ("sampling_interval", self.sampling_interval),
            ("fc_value", self.fc_value),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_intensity >= 0.0 && self.noise_intensity.is_finite()) {
            return bad(format!(
                "noise_intensity must be non-negative, got {}",
                self.noise_intensity
            ));
        }
        if self.prior_variance.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("prior_variance entries must be non-negative".into());
        }
        if self.prior_mean.iter().any(|v| !v.is_finite()) {
            return bad("prior_mean must be finite".into());
        }
        if self.sensor_count() == 0 {
            return bad("the layout has no sensors".into());
        }
        if let Layout::Explicit { positions } = &self.layout {
            if positions.iter().flatten().any(|v| !v.is_finite()) {
                return bad("sensor positions must be finite".into());
            }
        }
        if self.bandwidth > u32::from(u8::MAX) {
            return bad(format!("bandwidth {} exceeds 255 bits", self.bandwidth));
        }
        if self.steps == 0 || self.trials == 0 || self.particles == 0 {
            return bad("steps, trials and particles must be at least 1".into());
        }
        if self.fim_particles == Some(0) {
            return bad("fim_particles must be at least 1".into());
        }
        if self.reverse_every == Some(0) {
            return bad("reverse_every must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        let e0 = match self.initial_energy {
            InitialEnergy::Transmissions(x) | InitialEnergy::Joules(x) => x,
        };
        if !(e0 > 0.0 && e0.is_finite()) {
            return bad(format!("initial energy must be positive, got {e0}"));
        }
        ValuationBounds::new(self.valuation_bounds.lo, self.valuation_bounds.hi)?;
        self.valuation_model()?;
        self.signal_model()?;
        self.motion_model()?;
        Ok(())
    }

    pub fn sensor_count(&self) -> usize {
        match &self.layout {
            Layout::Grid { count } | Layout::Random { count } => *count,
            Layout::Explicit { positions } => positions.len(),
        }
    }

    pub fn roi(&self) -> Roi {
        Roi { size: self.roi_size }
    }

    pub fn signal_model(&self) -> Result<SignalModel> {
        SignalModel::new(self.signal_power, self.noise_std)
    }

    pub fn motion_model(&self) -> Result<MotionModel> {
        MotionModel::new(self.sampling_interval, self.noise_intensity)
    }

    pub fn valuation_model(&self) -> Result<ValuationModel> {
        ValuationModel::new(self.valuation_family, self.fc_value, self.energy_exponent)
    }

    pub fn prior_mean(&self) -> TargetState {
        TargetState::from(self.prior_mean)
    }

    pub fn prior_covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&self.prior_variance.into())
    }

    /// Sensor coordinates, independent of the trial.
    pub fn sensor_positions(&self) -> Vec<[f64; 2]> {
        let roi = self.roi();
        match &self.layout {
            Layout::Grid { count } => {
                let side = (*count as f64).sqrt().ceil() as usize;
                let cell = self.roi_size / side as f64;
                (0..*count)
                    .map(|k| {
                        let (row, col) = (k / side, k % side);
                        [
                            roi.min() + (col as f64 + 0.5) * cell,
                            roi.min() + (row as f64 + 0.5) * cell,
                        ]
                    })
                    .collect()
            }
            Layout::Random { count } => {
                let mut rng = self.stream(STREAM_LAYOUT);
                (0..*count)
                    .map(|_| {
                        [
                            rng.random_range(roi.min()..roi.max()),
                            rng.random_range(roi.min()..roi.max()),
                        ]
                    })
                    .collect()
            }
            Layout::Explicit { positions } => positions.clone(),
        }
    }

    /// Initial energy (J) of a sensor `h` metres from the fusion center.
    pub fn initial_energy_at(&self, h: f64) -> f64 {
        match self.initial_energy {
            InitialEnergy::Transmissions(n) => n * transmit_energy(self.bandwidth, h),
            InitialEnergy::Joules(j) => j,
        }
    }

    pub(crate) fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    pub(crate) fn trial_stream(&self, trial: usize, purpose: u64) -> ChaCha8Rng {
        self.stream(trial as u64 * STREAMS_PER_TRIAL + purpose)
    }
}
