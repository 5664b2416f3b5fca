//! Sequential importance resampling over the target state.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;

use crate::dynamics::{GaussianSampler, MotionModel, TargetState};
use crate::error::{Error, Result};
use crate::sensing::{log_joint_likelihood, Observation, QuantizerBank, SensorNode, SignalModel};

/// Weighted particle approximation of the target posterior.
///
/// Weights are kept normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    particles: Vec<TargetState>,
    weights: Vec<f64>,
}

impl ParticleCloud {
    pub fn new(particles: Vec<TargetState>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if particles.len() != weights.len() {
            return Err(Error::Config(format!(
                "{} particles but {} weights",
                particles.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("particle weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("particle weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { particles, weights })
    }

    pub fn uniform(particles: Vec<TargetState>) -> Result<Self> {
        let n = particles.len();
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        Ok(Self {
            particles,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn from_prior<R: Rng + ?Sized>(prior: &GaussianSampler, count: usize, rng: &mut R) -> Result<Self> {
        Self::uniform((0..count).map(|_| prior.sample(rng)).collect())
    }

    #[cfg(test)]
    pub(crate) fn empty() -> Self {
        Self {
            particles: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[TargetState] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TargetState, f64)> + '_ {
        self.particles.iter().zip(self.weights.iter().copied())
    }

    /// Push every particle through the motion model; weights untouched.
    pub fn predict<R: Rng + ?Sized>(&mut self, model: &MotionModel, rng: &mut R) {
        for p in &mut self.particles {
            *p = model.step(p, rng);
        }
    }

    pub fn reverse_velocities(&mut self) {
        for p in &mut self.particles {
            *p = p.reversed();
        }
    }

    /// Multiply each weight by the likelihood of `observations` and
    /// renormalize. Works in the log domain; if the total still collapses the
    /// weights are reset to uniform and `true` is returned.
    pub fn update_weights(
        &mut self,
        observations: &[Observation],
        sensors: &[SensorNode],
        sm: &SignalModel,
        bank: &QuantizerBank,
    ) -> bool {
        if observations.iter().all(|o| o.bits == 0) {
            return false;
        }
        let log_w: Vec<f64> = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w.ln() + log_joint_likelihood(bank, sm, sensors, p, observations))
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnormalized: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = unnormalized.iter().sum();
        if !max.is_finite() || !(total > 0.0 && total.is_finite()) {
            let n = self.len() as f64;
            self.weights.iter_mut().for_each(|w| *w = 1.0 / n);
            return true;
        }
        for (w, u) in self.weights.iter_mut().zip(unnormalized) {
            *w = u / total;
        }
        false
    }

    /// Weighted mean.
    pub fn estimate(&self) -> TargetState {
        TargetState::from_vector(&self.mean_vector())
    }

    fn mean_vector(&self) -> Vector4<f64> {
        self.iter()
            .fold(Vector4::zeros(), |acc, (p, w)| acc + p.to_vector() * w)
    }

    /// Weighted covariance (normalized by the total weight, no bias correction).
    pub fn covariance(&self) -> Matrix4<f64> {
        let mean = self.mean_vector();
        self.iter().fold(Matrix4::zeros(), |acc, (p, w)| {
            let e = p.to_vector() - mean;
            acc + e * e.transpose() * w
        })
    }

    /// Systematic resampling; all weights become `1 / N`.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.len();
        let step = 1.0 / n as f64;
        let start: f64 = rng.random::<f64>() * step;
        let mut out = Vec::with_capacity(n);
        let mut cumulative = self.weights[0];
        let mut j = 0;
        for k in 0..n {
            let u = start + k as f64 * step;
            while u > cumulative && j + 1 < n {
                j += 1;
                cumulative += self.weights[j];
            }
            out.push(self.particles[j]);
        }
        self.particles = out;
        self.weights.iter_mut().for_each(|w| *w = step);
    }

    /// Deterministic stride subsample with at most `max` particles,
    /// weights renormalized.
    pub fn subsample(&self, max: usize) -> ParticleCloud {
        if max == 0 || self.len() <= max {
            return self.clone();
        }
        let stride = self.len().div_ceil(max);
        let (particles, weights) = self.iter().step_by(stride).map(|(p, w)| (*p, w)).unzip();
        ParticleCloud::new(particles, weights).unwrap_or_else(|_| {
            // every sampled weight was zero; fall back to the strided particles, equally weighted
            let particles: Vec<_> = self.particles.iter().step_by(stride).copied().collect();
            ParticleCloud::uniform(particles).expect("non-empty by construction")
        })
    }
}
