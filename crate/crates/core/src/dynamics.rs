//! Target state and the white-noise-acceleration motion model.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar position (m) and velocity (m/s) of the tracked target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TargetState {
    pub const fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.vx, self.vy)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }

    /// Same position, velocity negated.
    pub fn reversed(self) -> Self {
        Self::new(self.x, self.y, -self.vx, -self.vy)
    }

    pub fn squared_position_error(&self, other: &TargetState) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<[f64; 4]> for TargetState {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// `x_{t+1} = F x_t + v_t`, `v_t ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    sampling_interval: f64,
    noise_intensity: f64,
    transition: Matrix4<f64>,
    noise_covariance: Matrix4<f64>,
    noise_factor: Matrix4<f64>,
}

impl MotionModel {
    pub fn new(sampling_interval: f64, noise_intensity: f64) -> Result<Self> {
        if !(sampling_interval > 0.0 && sampling_interval.is_finite()) {
            return Err(Error::NonPositiveInterval(sampling_interval));
        }
        if !(noise_intensity >= 0.0 && noise_intensity.is_finite()) {
            return Err(Error::NegativeNoiseIntensity(noise_intensity));
        }
        let d = sampling_interval;
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, 0.0, d,   0.0,
            0.0, 1.0, 0.0, d,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let (d2, d3) = (d * d / 2.0, d * d * d / 3.0);
        #[rustfmt::skip]
        let noise_covariance = Matrix4::new(
            d3,  0.0, d2,  0.0,
            0.0, d3,  0.0, d2,
            d2,  0.0, d,   0.0,
            0.0, d2,  0.0, d,
        ) * noise_intensity;
        let noise_factor = gaussian_factor(&noise_covariance)?;
        Ok(Self {
            sampling_interval,
            noise_intensity,
            transition,
            noise_covariance,
            noise_factor,
        })
    }

    pub fn sampling_interval(&self) -> f64 {
        self.sampling_interval
    }

    pub fn noise_intensity(&self) -> f64 {
        self.noise_intensity
    }

    pub fn transition(&self) -> &Matrix4<f64> {
        &self.transition
    }

    pub fn noise_covariance(&self) -> &Matrix4<f64> {
        &self.noise_covariance
    }

    /// Noise-free propagation `F s`.
    pub fn propagate_mean(&self, s: &TargetState) -> TargetState {
        TargetState::from_vector(&(self.transition * s.to_vector()))
    }

    pub fn step<R: Rng + ?Sized>(&self, s: &TargetState, rng: &mut R) -> TargetState {
        let mean = self.transition * s.to_vector();
        TargetState::from_vector(&(mean + self.noise_factor * standard_normal4(rng)))
    }
}

/// Draw from `N(mean, cov)`.
pub fn sample_initial<R: Rng + ?Sized>(mean: &TargetState, cov: &Matrix4<f64>, rng: &mut R) -> Result<TargetState> {
    let factor = gaussian_factor(cov)?;
    Ok(GaussianSampler::from_factor(*mean, factor).sample(rng))
}

/// Reusable `N(mean, cov)` sampler; factorizes the covariance once.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vector4<f64>,
    factor: Matrix4<f64>,
}

impl GaussianSampler {
    pub fn new(mean: TargetState, cov: &Matrix4<f64>) -> Result<Self> {
        Ok(Self::from_factor(mean, gaussian_factor(cov)?))
    }

    fn from_factor(mean: TargetState, factor: Matrix4<f64>) -> Self {
        Self {
            mean: mean.to_vector(),
            factor,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TargetState {
        TargetState::from_vector(&(self.mean + self.factor * standard_normal4(rng)))
    }
}

fn standard_normal4<R: Rng + ?Sized>(rng: &mut R) -> Vector4<f64> {
    Vector4::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// A matrix `L` with `L Lᵀ = cov`.
///
/// Cholesky when the covariance is positive definite; otherwise an
/// eigen-decomposition square root with negative rounding noise clipped to
/// zero. The all-zero covariance yields the zero factor.
pub(crate) fn gaussian_factor(cov: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveSemidefinite);
    }
    let scale = cov.amax();
    if (cov - cov.transpose()).amax() > 1e-12 * scale.max(1.0) {
        return Err(Error::NotPositiveSemidefinite);
    }
    if scale == 0.0 {
        return Ok(Matrix4::zeros());
    }
    if let Some(chol) = cov.cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(*cov);
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::NotPositiveSemidefinite);
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix4::from_diagonal(&roots))
}
