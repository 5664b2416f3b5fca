//! Fisher information carried by quantized amplitude measurements.
//!
//! The per-sensor standard FIM is a rank-one position block scaled by
//! `4 κ a² / (1 + d²)²`, where `κ` is the quantization-dependent information
//! about the amplitude. The expected FIM over the predicted prior is the
//! weighted average over particles.

use nalgebra::{Matrix4, SymmetricEigen};

use crate::error::{Error, Result};
use crate::filter::ParticleCloud;
use crate::sensing::{squared_distance, Quantizer, QuantizerBank, SensorNode, SignalModel};
use crate::TargetState;

pub type Fim4 = Matrix4<f64>;

/// Eigenvalue floor applied to the predicted covariance before inversion.
pub const COVARIANCE_FLOOR: f64 = 1e-8;

/// `κ(a) = 1/(8πσ²) Σ_l [e^{-(η_l-a)²/2σ²} - e^{-(η_{l+1}-a)²/2σ²}]² / p_l`.
///
/// Levels whose probability underflows are skipped. Each term is evaluated
/// as `diff * (diff / p)` so deep-tail levels, which dominate when `a` is
/// far from every threshold, do not underflow.
pub fn kappa(q: &Quantizer, sm: &SignalModel, a: f64) -> f64 {
    let two_var = 2.0 * sm.sigma * sm.sigma;
    let gauss = |eta: f64| {
        if eta.is_finite() {
            (-(eta - a).powi(2) / two_var).exp()
        } else {
            0.0
        }
    };
    let mut sum = 0.0;
    for l in 0..q.levels() {
        let p = q.level_probability(sm, a, l);
        if p < f64::MIN_POSITIVE {
            continue;
        }
        let (lo, hi) = q.cell(l);
        let diff = gauss(lo) - gauss(hi);
        sum += diff * (diff / p);
    }
    sum / (4.0 * std::f64::consts::PI * two_var)
}

/// Scale `4 κ a² / (1 + d²)²` times `d²`: the trace of the standard FIM.
fn trace_weight(sm: &SignalModel, d2: f64) -> (f64, f64) {
    let a = sm.amplitude_at_sq_distance(d2);
    let denom = 1.0 + d2;
    (a, 4.0 * a * a * d2 / (denom * denom))
}

/// Standard FIM of one sensor for a target at `x`.
pub fn standard_fim(q: &Quantizer, sm: &SignalModel, sensor: &SensorNode, x: &TargetState) -> Fim4 {
    let dx = sensor.x - x.x;
    let dy = sensor.y - x.y;
    let d2 = dx * dx + dy * dy;
    let a = sm.amplitude_at_sq_distance(d2);
    let denom = 1.0 + d2;
    let scale = 4.0 * kappa(q, sm, a) * a * a / (denom * denom);
    let mut j = Fim4::zeros();
    j[(0, 0)] = scale * dx * dx;
    j[(0, 1)] = scale * dx * dy;
    j[(1, 0)] = scale * dx * dy;
    j[(1, 1)] = scale * dy * dy;
    j
}

/// Expected FIM of one sensor using `bits` bits, averaged over the cloud.
pub fn expected_sensor_fim(
    bank: &QuantizerBank,
    sm: &SignalModel,
    sensor: &SensorNode,
    cloud: &ParticleCloud,
    bits: u8,
) -> Result<Fim4> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let Some(q) = bank.get(bits) else {
        return Ok(Fim4::zeros());
    };
    Ok(cloud
        .iter()
        .fold(Fim4::zeros(), |acc, (x, w)| acc + standard_fim(q, sm, sensor, x) * w))
}

/// Anything that can produce `κ` for a bit depth and amplitude.
pub trait KappaSource {
    fn max_bits(&self) -> u8;
    fn kappa(&self, bits: u8, amplitude: f64) -> f64;
}

/// Direct evaluation through a quantizer bank.
pub struct ExactKappa<'a> {
    pub bank: &'a QuantizerBank,
    pub signal: &'a SignalModel,
}

impl KappaSource for ExactKappa<'_> {
    fn max_bits(&self) -> u8 {
        self.bank.max_bits()
    }

    fn kappa(&self, bits: u8, amplitude: f64) -> f64 {
        self.bank.get(bits).map_or(0.0, |q| kappa(q, self.signal, amplitude))
    }
}

/// `κ` tabulated on a uniform amplitude grid over `[0, sqrt(P0)]`, linearly
/// interpolated. Amplitudes can never exceed `sqrt(P0)`.
#[derive(Debug, Clone)]
pub struct KappaTable {
    spacing: f64,
    // values[bits - 1][grid index]
    values: Vec<Vec<f64>>,
}

impl KappaTable {
    /// Default grid spacing in units of the noise standard deviation.
    pub const DEFAULT_RESOLUTION: f64 = 1.0 / 200.0;

    pub fn new(bank: &QuantizerBank, sm: &SignalModel) -> Self {
        Self::with_spacing(bank, sm, sm.sigma * Self::DEFAULT_RESOLUTION)
    }

    pub fn with_spacing(bank: &QuantizerBank, sm: &SignalModel, spacing: f64) -> Self {
        let n = (sm.max_amplitude() / spacing).ceil() as usize + 2;
        let values = (1..=bank.max_bits())
            .map(|m| {
                let q = bank.get(m).expect("bit depth inside bank");
                (0..n).map(|i| kappa(q, sm, i as f64 * spacing)).collect()
            })
            .collect();
        Self { spacing, values }
    }
}

impl KappaSource for KappaTable {
    fn max_bits(&self) -> u8 {
        self.values.len() as u8
    }

    fn kappa(&self, bits: u8, amplitude: f64) -> f64 {
        let Some(row) = (bits as usize).checked_sub(1).and_then(|i| self.values.get(i)) else {
            return 0.0;
        };
        let pos = (amplitude / self.spacing).max(0.0);
        let i = (pos.floor() as usize).min(row.len() - 2);
        let frac = (pos - i as f64).min(1.0);
        row[i] + (row[i + 1] - row[i]) * frac
    }
}

/// Traces of the expected FIM for every bit depth `0..=max_bits`
/// (index 0 is always zero).
///
/// Only the trace enters the auction, and `tr J^S = 4 κ a² d² / (1 + d²)²`,
/// so the full matrices are never formed.
pub fn expected_fim_traces(
    source: &impl KappaSource,
    sm: &SignalModel,
    sensor: &SensorNode,
    cloud: &ParticleCloud,
) -> Vec<f64> {
    let max_bits = source.max_bits();
    let mut traces = vec![0.0; max_bits as usize + 1];
    for (x, w) in cloud.iter() {
        let (a, weight) = trace_weight(sm, squared_distance(sensor, x));
        if weight == 0.0 {
            continue;
        }
        for m in 1..=max_bits {
            traces[m as usize] += w * weight * source.kappa(m, a);
        }
    }
    traces
}

/// Prior information of the predicted cloud: the inverse of its weighted
/// covariance, with eigenvalues floored at [`COVARIANCE_FLOOR`].
pub fn prior_fim(cloud: &ParticleCloud) -> Fim4 {
    let eig = SymmetricEigen::new(cloud.covariance());
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(COVARIANCE_FLOOR));
    let j = eig.eigenvectors * Matrix4::from_diagonal(&inv) * eig.eigenvectors.transpose();
    (j + j.transpose()) * 0.5
}
