//! Signal attenuation, noisy amplitude measurements and their m-bit quantization.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::auction::ValuationBounds;
use crate::dynamics::TargetState;
use crate::error::{Error, Result};

/// Smallest value a per-sensor likelihood factor may take.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

/// A sensor and its private/public economic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Distance to the fusion center (m).
    pub fc_distance: f64,
    /// Joules left.
    pub residual_energy: f64,
    /// Joules at deployment.
    pub initial_energy: f64,
    /// True energy cost per joule; private to the sensor.
    pub valuation: f64,
    pub bounds: ValuationBounds,
}

impl SensorNode {
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Square region of interest centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub size: f64,
}

impl Roi {
    pub fn min(&self) -> f64 {
        -self.size / 2.0
    }

    pub fn max(&self) -> f64 {
        self.size / 2.0
    }
}

/// Isotropic power attenuation with additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Power at zero distance.
    pub p0: f64,
    /// Measurement noise standard deviation.
    pub sigma: f64,
}

impl SignalModel {
    pub fn new(p0: f64, sigma: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "signal model needs p0 > 0 and sigma > 0, got p0={p0}, sigma={sigma}"
            )));
        }
        Ok(Self { p0, sigma })
    }

    pub fn max_amplitude(&self) -> f64 {
        self.p0.sqrt()
    }

    /// `sqrt(P0 / (1 + d²))` at the sensor for a target at `target`.
    pub fn amplitude(&self, sensor: &SensorNode, target: &TargetState) -> f64 {
        self.amplitude_at_sq_distance(squared_distance(sensor, target))
    }

    pub fn amplitude_at_sq_distance(&self, d2: f64) -> f64 {
        (self.p0 / (1.0 + d2)).sqrt()
    }

    pub fn measure<R: Rng + ?Sized>(&self, sensor: &SensorNode, target: &TargetState, rng: &mut R) -> f64 {
        let n: f64 = rng.sample(StandardNormal);
        self.amplitude(sensor, target) + self.sigma * n
    }
}

pub(crate) fn squared_distance(sensor: &SensorNode, target: &TargetState) -> f64 {
    let dx = sensor.x - target.x;
    let dy = sensor.y - target.y;
    dx * dx + dy * dy
}

/// How quantizer thresholds are placed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThresholdStrategy {
    /// `L - 1` thresholds equispaced inside `[0, sqrt(P0)]`. Nested across bit depths.
    #[default]
    Uniform,
    /// Thresholds that make the `L` levels equiprobable for a reference
    /// amplitude. When no reference is given, the mean amplitude over a grid
    /// of ROI positions and all sensors is used.
    EqualProbability {
        #[serde(default)]
        reference_amplitude: Option<f64>,
    },
}

/// An m-bit quantizer with `2^m - 1` finite, strictly increasing thresholds.
/// The outer thresholds `-inf` and `+inf` are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    bits: u8,
    thresholds: Vec<f64>,
}

impl Quantizer {
    pub fn from_thresholds(bits: u8, thresholds: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(Error::Config(format!("quantizer bit depth {bits} not in 1..=16")));
        }
        if thresholds.len() != (1usize << bits) - 1 {
            return Err(Error::Config(format!(
                "{bits}-bit quantizer needs {} thresholds, got {}",
                (1usize << bits) - 1,
                thresholds.len()
            )));
        }
        if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "thresholds must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { bits, thresholds })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// `(η_l, η_{l+1})` with infinite outer edges.
    pub fn cell(&self, level: usize) -> (f64, f64) {
        let lo = if level == 0 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[level - 1]
        };
        let hi = self.thresholds.get(level).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Level `l` with `η_l < z <= η_{l+1}`.
    pub fn quantize(&self, z: f64) -> usize {
        self.thresholds.partition_point(|&t| t < z)
    }

    /// Probability of reporting `level` when the noiseless amplitude is `a`.
    pub fn level_probability(&self, sm: &SignalModel, a: f64, level: usize) -> f64 {
        let (lo, hi) = self.cell(level);
        normal_interval((lo - a) / sm.sigma, (hi - a) / sm.sigma)
    }
}

pub fn build_quantizer(
    bits: u8,
    sm: &SignalModel,
    strategy: ThresholdStrategy,
    sensors: &[SensorNode],
    roi: &Roi,
) -> Result<Quantizer> {
    if bits == 0 {
        return Err(Error::Config("a 0-bit allocation has no quantizer".into()));
    }
    let levels = 1usize << bits;
    let thresholds = match strategy {
        ThresholdStrategy::Uniform => {
            let step = sm.max_amplitude() / levels as f64;
            (1..levels).map(|j| j as f64 * step).collect()
        }
        ThresholdStrategy::EqualProbability { reference_amplitude } => {
            let reference = reference_amplitude.unwrap_or_else(|| mean_amplitude(sm, sensors, roi));
            let normal =
                Normal::new(reference, sm.sigma).map_err(|e| Error::Config(format!("reference amplitude: {e}")))?;
            (1..levels)
                .map(|j| normal.inverse_cdf(j as f64 / levels as f64))
                .collect()
        }
    };
    Quantizer::from_thresholds(bits, thresholds)
}

fn mean_amplitude(sm: &SignalModel, sensors: &[SensorNode], roi: &Roi) -> f64 {
    if sensors.is_empty() {
        return sm.max_amplitude() / 2.0;
    }
    const GRID: usize = 21;
    let step = roi.size / (GRID - 1) as f64;
    let mut sum = 0.0;
    for i in 0..GRID {
        for j in 0..GRID {
            let t = TargetState::new(roi.min() + i as f64 * step, roi.min() + j as f64 * step, 0.0, 0.0);
            sum += sensors.iter().map(|s| sm.amplitude(s, &t)).sum::<f64>();
        }
    }
    sum / (GRID * GRID * sensors.len()) as f64
}

/// Quantizers for every bit depth `1..=max_bits`, shared by all sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerBank {
    quantizers: Vec<Quantizer>,
}

impl QuantizerBank {
    pub fn build(
        max_bits: u8,
        sm: &SignalModel,
        strategy: ThresholdStrategy,
        sensors: &[SensorNode],
        roi: &Roi,
    ) -> Result<Self> {
        let quantizers = (1..=max_bits)
            .map(|m| build_quantizer(m, sm, strategy, sensors, roi))
            .collect::<Result<_>>()?;
        Ok(Self { quantizers })
    }

    /// `quantizers[i]` must be the `(i + 1)`-bit quantizer.
    pub fn from_quantizers(quantizers: Vec<Quantizer>) -> Result<Self> {
        for (i, q) in quantizers.iter().enumerate() {
            if q.bits as usize != i + 1 {
                return Err(Error::Config(format!("slot {i} holds a {}-bit quantizer", q.bits)));
            }
        }
        Ok(Self { quantizers })
    }

    pub fn max_bits(&self) -> u8 {
        self.quantizers.len() as u8
    }

    /// `None` for `bits == 0` or beyond the bank.
    pub fn get(&self, bits: u8) -> Option<&Quantizer> {
        (bits as usize).checked_sub(1).and_then(|i| self.quantizers.get(i))
    }
}

/// A quantized report from one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub sensor: usize,
    pub bits: u8,
    pub level: usize,
}

/// `p(D | x)` as the product of per-sensor level probabilities. Sensors
/// without a quantizer (0 bits) contribute a factor of one. Each factor is
/// floored at [`LIKELIHOOD_FLOOR`].
pub fn joint_likelihood(
    bank: &QuantizerBank,
    sm: &SignalModel,
    sensors: &[SensorNode],
    target: &TargetState,
    observations: &[Observation],
) -> f64 {
    log_joint_likelihood(bank, sm, sensors, target, observations).exp()
}

pub fn log_joint_likelihood(
    bank: &QuantizerBank,
    sm: &SignalModel,
    sensors: &[SensorNode],
    target: &TargetState,
    observations: &[Observation],
) -> f64 {
    observations
        .iter()
        .filter_map(|o| {
            let q = bank.get(o.bits)?;
            let a = sm.amplitude(&sensors[o.sensor], target);
            Some(q.level_probability(sm, a, o.level).max(LIKELIHOOD_FLOOR).ln())
        })
        .sum()
}

/// Standard normal upper tail `Q(x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(lo < Z <= hi)` for a standard normal, accurate in both tails.
pub fn normal_interval(lo: f64, hi: f64) -> f64 {
    let p = if lo >= 0.0 {
        normal_tail(lo) - normal_tail(hi)
    } else if hi <= 0.0 {
        normal_tail(-hi) - normal_tail(-lo)
    } else {
        1.0 - normal_tail(hi) - normal_tail(-lo)
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sensor_at(x: f64, y: f64) -> SensorNode {
        SensorNode {
            id: 0,
            x,
            y,
            fc_distance: 10.0,
            residual_energy: 1.0,
            initial_energy: 1.0,
            valuation: 0.5,
            bounds: ValuationBounds::new(0.1, 1.0).unwrap(),
        }
    }

    fn reference_signal() -> SignalModel {
        SignalModel::new(1000.0, 1.0).unwrap()
    }

    fn bank(max_bits: u8) -> QuantizerBank {
        let roi = Roi { size: 50.0 };
        QuantizerBank::build(max_bits, &reference_signal(), ThresholdStrategy::Uniform, &[], &roi).unwrap()
    }

    #[test]
    fn amplitude_values() {
        let sm = reference_signal();
        let s = sensor_at(0.0, 0.0);
        assert_relative_eq!(sm.amplitude(&s, &TargetState::default()), 1000f64.sqrt());
        let t = TargetState::new(999f64.sqrt(), 0.0, 0.0, 0.0);
        assert_relative_eq!(sm.amplitude(&s, &t), 1.0, epsilon = 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let a = sm.amplitude(&s, &TargetState::new(i as f64 * 0.1, 0.0, 0.0, 0.0));
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn amplitude_is_translation_invariant() {
        let sm = reference_signal();
        let s = sensor_at(3.0, -4.0);
        let t = TargetState::new(7.0, 2.0, 0.0, 0.0);
        let shifted = sensor_at(3.0 + 11.5, -4.0 - 6.25);
        let t2 = TargetState::new(7.0 + 11.5, 2.0 - 6.25, 0.0, 0.0);
        assert_relative_eq!(sm.amplitude(&s, &t), sm.amplitude(&shifted, &t2), max_relative = 1e-14);
    }

    #[test]
    fn measurement_noise_moments() {
        let sm = SignalModel::new(1000.0, 1.0).unwrap();
        let s = sensor_at(0.0, 0.0);
        let t = TargetState::new(5.0, 5.0, 0.0, 0.0);
        let a = sm.amplitude(&s, &t);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let z: Vec<f64> = (0..n).map(|_| sm.measure(&s, &t, &mut rng)).collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert_relative_eq!(var, 1.0, max_relative = 0.05);
        assert!((mean - a).abs() < 0.02);

        let quiet = SignalModel::new(1000.0, 1e-300).unwrap();
        assert_relative_eq!(quiet.measure(&s, &t, &mut rng), a, max_relative = 1e-12);
    }

    #[test]
    fn quantizer_shapes() {
        let b = bank(3);
        assert_eq!(b.get(1).unwrap().thresholds().len(), 1);
        assert_eq!(b.get(3).unwrap().thresholds().len(), 7);
        assert!(b.get(0).is_none());
        assert!(b.get(4).is_none());
        let q3 = b.get(3).unwrap();
        let step = 1000f64.sqrt() / 8.0;
        for (j, t) in q3.thresholds().iter().enumerate() {
            assert_relative_eq!(*t, (j + 1) as f64 * step);
        }
        // nested: every 2-bit threshold is a 3-bit threshold
        for t in b.get(2).unwrap().thresholds() {
            assert!(q3.thresholds().iter().any(|u| (u - t).abs() < 1e-12));
        }
    }

    #[test]
    fn quantize_edges_and_monotonicity() {
        let q = bank(3).get(3).unwrap().clone();
        let th = q.thresholds().to_vec();
        assert_eq!(q.quantize(th[0] - 1.0), 0);
        assert_eq!(q.quantize(-1e9), 0);
        assert_eq!(q.quantize(th[6] + 1.0), 7);
        assert_eq!(q.quantize(th[2]), 2, "tie goes to the lower cell");
        let mut prev = 0;
        for i in 0..5000 {
            let l = q.quantize(-5.0 + i as f64 * 0.01);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn level_probabilities() {
        let sm = reference_signal();
        let q1 = Quantizer::from_thresholds(1, vec![4.0]).unwrap();
        assert_relative_eq!(q1.level_probability(&sm, 4.0, 0), 0.5);
        assert_relative_eq!(q1.level_probability(&sm, 4.0, 1), 0.5);
        let b = bank(6);
        for m in 1..=6 {
            let q = b.get(m).unwrap();
            for i in 0..=100 {
                let a = i as f64 * sm.max_amplitude() / 100.0;
                let total: f64 = (0..q.levels()).map(|l| q.level_probability(&sm, a, l)).sum();
                assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn empirical_level_frequencies_match() {
        let sm = SignalModel::new(1000.0, 1.0).unwrap();
        let q = Quantizer::from_thresholds(2, vec![2.0, 3.0, 4.5]).unwrap();
        let s = sensor_at(0.0, 0.0);
        let t = TargetState::new(9.0, 0.0, 0.0, 0.0); // a ~ 3.14
        let a = sm.amplitude(&s, &t);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[q.quantize(sm.measure(&s, &t, &mut rng))] += 1;
        }
        for (l, &c) in counts.iter().enumerate() {
            let p = q.level_probability(&sm, a, l);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() < 3.0 * sd.max(1e-6), "level {l}");
        }
    }

    #[test]
    fn joint_likelihood_cases() {
        let sm = reference_signal();
        let b = bank(2);
        let sensors = vec![sensor_at(0.0, 0.0), sensor_at(10.0, 0.0)];
        let t = TargetState::new(3.0, 1.0, 0.0, 0.0);
        assert_eq!(joint_likelihood(&b, &sm, &sensors, &t, &[]), 1.0);
        let zero_bits = [Observation {
            sensor: 0,
            bits: 0,
            level: 0,
        }];
        assert_eq!(joint_likelihood(&b, &sm, &sensors, &t, &zero_bits), 1.0);

        let o1 = Observation {
            sensor: 0,
            bits: 2,
            level: 2,
        };
        let direct = b
            .get(2)
            .unwrap()
            .level_probability(&sm, sm.amplitude(&sensors[0], &t), 2);
        assert_relative_eq!(
            joint_likelihood(&b, &sm, &sensors, &t, &[o1]),
            direct,
            max_relative = 1e-12
        );
    }

    #[test]
    fn two_sensor_likelihood_matches_monte_carlo() {
        let sm = SignalModel::new(1000.0, 1.0).unwrap();
        let q = Quantizer::from_thresholds(1, vec![3.0]).unwrap();
        let b = QuantizerBank {
            quantizers: vec![q.clone()],
        };
        let sensors = vec![sensor_at(0.0, 0.0), sensor_at(14.0, 0.0)];
        let t = TargetState::new(8.0, 0.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let mut joint = [[0usize; 2]; 2];
        for _ in 0..n {
            let l0 = q.quantize(sm.measure(&sensors[0], &t, &mut rng));
            let l1 = q.quantize(sm.measure(&sensors[1], &t, &mut rng));
            joint[l0][l1] += 1;
        }
        #[allow(clippy::needless_range_loop)]
        for l0 in 0..2 {
            for l1 in 0..2 {
                let obs = [
                    Observation {
                        sensor: 0,
                        bits: 1,
                        level: l0,
                    },
                    Observation {
                        sensor: 1,
                        bits: 1,
                        level: l1,
                    },
                ];
                let p = joint_likelihood(&b, &sm, &sensors, &t, &obs);
                let sd = (p * (1.0 - p) / n as f64).sqrt();
                assert!((joint[l0][l1] as f64 / n as f64 - p).abs() < 4.0 * sd.max(1e-6));
            }
        }
    }

    #[test]
    fn equal_probability_strategy() {
        let sm = reference_signal();
        let roi = Roi { size: 50.0 };
        let strat = ThresholdStrategy::EqualProbability {
            reference_amplitude: Some(5.0),
        };
        let q = build_quantizer(2, &sm, strat, &[], &roi).unwrap();
        for l in 0..4 {
            assert_relative_eq!(q.level_probability(&sm, 5.0, l), 0.25, epsilon = 1e-9);
        }
        let auto = ThresholdStrategy::EqualProbability {
            reference_amplitude: None,
        };
        let q = build_quantizer(3, &sm, auto, &[sensor_at(0.0, 0.0)], &roi).unwrap();
        assert_eq!(q.thresholds().len(), 7);
    }

    #[test]
    fn zero_bits_has_no_quantizer() {
        let roi = Roi { size: 50.0 };
        assert!(build_quantizer(0, &reference_signal(), ThresholdStrategy::Uniform, &[], &roi).is_err());
    }

    #[test]
    fn tail_accuracy() {
        assert_relative_eq!(normal_interval(f64::NEG_INFINITY, 0.0), 0.5);
        // far tail stays relative-accurate instead of cancelling to zero
        let p = normal_interval(20.0, f64::INFINITY);
        assert!(p > 0.0 && p < 1e-80);
        let p2 = normal_interval(f64::NEG_INFINITY, -20.0);
        assert_relative_eq!(p, p2, max_relative = 1e-12);
    }
}
