//! Auction side of a tracking step: sensor valuations, virtual costs,
//! transmission energy and the knapsack instance they induce.
//!
//! Item `(i, m)` of the per-step instance has weight `m` and value
//!
//! ```text
//! V[i][m] = v_FC · tr J_i(m) − g_i · E(m, h_i) · φ_i(r_i)
//! ```
//!
//! where `J_i(m)` is the expected FIM of sensor `i` quantizing with `m` bits,
//! `E` the transmission energy, `φ_i(r) = r + F_i(r)/f_i(r)` the virtual
//! valuation of the report `r_i`, and `g_i = (e_i / E_i0)^(-k)` the public
//! residual-energy multiplier (1 when `k = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::ParticleCloud;
use crate::fisher::{expected_fim_traces, ExactKappa, KappaSource};
use crate::mckp::{solve_dp, Item, MckpInstance};
use crate::sensing::{QuantizerBank, SensorNode, SignalModel};

/// Transmit amplifier energy, J/bit/m².
pub const EPS_AMP: f64 = 1e-8;

/// Energy (J) to send `bits` bits over `h` metres.
pub fn transmit_energy(bits: u32, h: f64) -> f64 {
    EPS_AMP * f64::from(bits) * h * h
}

/// Support `[lo, hi]` of a sensor's valuation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ValuationBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidBounds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn check(&self, v: f64) -> Result<f64> {
        if v >= self.lo && v <= self.hi {
            Ok(v)
        } else {
            Err(Error::ValuationOutOfBounds {
                value: v,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// Distribution family of the fusion center's belief about each valuation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ValuationFamily {
    #[default]
    Uniform,
    /// `F(v) = ((v - lo) / (hi - lo))^exponent`, `exponent > 0`.
    Power { exponent: f64 },
}

impl ValuationFamily {
    pub fn cdf(&self, b: &ValuationBounds, v: f64) -> f64 {
        let u = ((v - b.lo) / b.width()).clamp(0.0, 1.0);
        match *self {
            ValuationFamily::Uniform => u,
            ValuationFamily::Power { exponent } => u.powf(exponent),
        }
    }

    pub fn pdf(&self, b: &ValuationBounds, v: f64) -> f64 {
        if v < b.lo || v > b.hi {
            return 0.0;
        }
        let u = (v - b.lo) / b.width();
        match *self {
            ValuationFamily::Uniform => 1.0 / b.width(),
            ValuationFamily::Power { exponent } => exponent * u.powf(exponent - 1.0) / b.width(),
        }
    }

    /// `F(v) / f(v)` in closed form, finite at the lower bound.
    fn inverse_hazard(&self, b: &ValuationBounds, v: f64) -> f64 {
        match *self {
            ValuationFamily::Uniform => v - b.lo,
            ValuationFamily::Power { exponent } => (v - b.lo) / exponent,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ValuationFamily::Power { exponent } if !(exponent > 0.0 && exponent.is_finite()) => Err(Error::Config(
                format!("power valuation family needs a positive exponent, got {exponent}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Public parameters of the mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationModel {
    #[serde(default)]
    pub family: ValuationFamily,
    /// Fusion center's value per unit of FIM trace.
    pub fc_value: f64,
    /// Exponent `k` of the residual-energy multiplier; 0 disables it.
    #[serde(default)]
    pub energy_exponent: f64,
}

impl ValuationModel {
    pub fn new(family: ValuationFamily, fc_value: f64, energy_exponent: f64) -> Result<Self> {
        let vm = Self {
            family,
            fc_value,
            energy_exponent,
        };
        vm.validate()?;
        Ok(vm)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if !(self.fc_value > 0.0 && self.fc_value.is_finite()) {
            return Err(Error::Config(format!(
                "fc_value must be positive, got {}",
                self.fc_value
            )));
        }
        if !(self.energy_exponent >= 0.0 && self.energy_exponent.is_finite()) {
            return Err(Error::Config(format!(
                "energy exponent must be non-negative, got {}",
                self.energy_exponent
            )));
        }
        Ok(())
    }
}

/// `v + F(v)/f(v)`.
pub fn virtual_valuation(vm: &ValuationModel, bounds: &ValuationBounds, v: f64) -> Result<f64> {
    bounds.check(v)?;
    Ok(v + vm.family.inverse_hazard(bounds, v))
}

/// `(e / E0)^(-k)`. Only meaningful for live sensors.
pub fn energy_factor(vm: &ValuationModel, sensor: &SensorNode) -> f64 {
    if vm.energy_exponent == 0.0 {
        return 1.0;
    }
    (sensor.residual_energy / sensor.initial_energy).powf(-vm.energy_exponent)
}

/// A sensor is alive while it can still afford a single bit.
pub fn is_alive(sensor: &SensorNode) -> bool {
    sensor.residual_energy > 0.0 && sensor.residual_energy >= transmit_energy(1, sensor.fc_distance)
}

/// Largest bit count `<= capacity` the sensor's residual energy covers.
pub fn affordable_bits(sensor: &SensorNode, capacity: u32) -> u32 {
    if !is_alive(sensor) {
        return 0;
    }
    (0..=capacity)
        .rev()
        .find(|&m| transmit_energy(m, sensor.fc_distance) <= sensor.residual_energy)
        .unwrap_or(0)
}

fn value_formula(fc_value: f64, trace: f64, scaled_energy: f64, virtual_cost: f64) -> f64 {
    fc_value * trace - scaled_energy * virtual_cost
}

/// `V[i][m]` for one sensor given the trace of its `m`-bit expected FIM.
pub fn item_value(vm: &ValuationModel, sensor: &SensorNode, bits: u32, reported: f64, fim_trace: f64) -> Result<f64> {
    let phi = virtual_valuation(vm, &sensor.bounds, reported)?;
    if bits == 0 {
        return Ok(0.0);
    }
    let scaled = energy_factor(vm, sensor) * transmit_energy(bits, sensor.fc_distance);
    Ok(value_formula(vm.fc_value, fim_trace, scaled, phi))
}

/// Bits granted to each sensor in one step.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitAllocation(pub Vec<u32>);

impl BitAllocation {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn bits(&self, sensor: usize) -> u32 {
        self.0[sensor]
    }

    pub fn active_sensors(&self) -> usize {
        self.0.iter().filter(|&&m| m > 0).count()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Everything the mechanism knows about one sensor in one step, except its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bidder {
    pub bounds: ValuationBounds,
    pub fc_distance: f64,
    /// Residual-energy multiplier `g`.
    pub energy_factor: f64,
    /// Expected FIM trace for `0..=affordable` bits; just `[0]` for dead sensors.
    pub traces: Vec<f64>,
}

impl Bidder {
    pub fn max_bits(&self) -> u32 {
        (self.traces.len() - 1) as u32
    }

    /// `g · E(bits, h)`: the energy a sensor's valuation is applied to.
    pub fn scaled_energy(&self, bits: u32) -> f64 {
        self.energy_factor * transmit_energy(bits, self.fc_distance)
    }
}

/// One step of the auction with all report-independent quantities fixed.
///
/// Re-running the mechanism with a different report only rebuilds item
/// values; the FIM traces are computed once in [`AuctionRound::prepare`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionRound {
    bidders: Vec<Bidder>,
    model: ValuationModel,
    capacity: u32,
}

impl AuctionRound {
    pub fn from_bidders(bidders: Vec<Bidder>, model: ValuationModel, capacity: u32) -> Result<Self> {
        model.validate()?;
        for (i, b) in bidders.iter().enumerate() {
            if b.traces.first() != Some(&0.0) {
                return Err(Error::Config(format!(
                    "bidder {i}: traces must start with 0 for 0 bits"
                )));
            }
            if b.traces.iter().any(|t| !t.is_finite()) || !(b.energy_factor.is_finite() && b.energy_factor > 0.0) {
                return Err(Error::Config(format!("bidder {i}: non-finite traces or energy factor")));
            }
        }
        Ok(Self {
            bidders,
            model,
            capacity,
        })
    }

    /// Compute expected FIM traces of every live sensor over the predicted cloud.
    pub fn prepare(
        cloud: &ParticleCloud,
        sensors: &[SensorNode],
        model: &ValuationModel,
        capacity: u32,
        kappa: &impl KappaSource,
        sm: &SignalModel,
    ) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if capacity > u32::from(kappa.max_bits()) {
            return Err(Error::Config(format!(
                "bandwidth {capacity} exceeds the {}-bit quantizer bank",
                kappa.max_bits()
            )));
        }
        let bidders = sensors
            .iter()
            .map(|s| {
                let afford = affordable_bits(s, capacity);
                let traces = if afford == 0 {
                    vec![0.0]
                } else {
                    let mut t = expected_fim_traces(kappa, sm, s, cloud);
                    t.truncate(afford as usize + 1);
                    t
                };
                Bidder {
                    bounds: s.bounds,
                    fc_distance: s.fc_distance,
                    energy_factor: if afford == 0 { 1.0 } else { energy_factor(model, s) },
                    traces,
                }
            })
            .collect();
        Self::from_bidders(bidders, *model, capacity)
    }

    pub fn bidders(&self) -> &[Bidder] {
        &self.bidders
    }

    pub fn model(&self) -> &ValuationModel {
        &self.model
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.bidders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bidders.is_empty()
    }

    pub fn trace(&self, sensor: usize, bits: u32) -> f64 {
        self.bidders[sensor].traces.get(bits as usize).copied().unwrap_or(0.0)
    }

    pub fn item_value(&self, sensor: usize, bits: u32, report: f64) -> Result<f64> {
        let b = &self.bidders[sensor];
        let phi = virtual_valuation(&self.model, &b.bounds, report)?;
        Ok(if bits == 0 {
            0.0
        } else {
            value_formula(self.model.fc_value, b.traces[bits as usize], b.scaled_energy(bits), phi)
        })
    }

    /// The knapsack instance for a vector of reports (one per sensor; ignored
    /// for sensors with no affordable bits).
    pub fn instance(&self, reports: &[f64]) -> Result<MckpInstance> {
        if reports.len() != self.bidders.len() {
            return Err(Error::Config(format!(
                "{} reports for {} sensors",
                reports.len(),
                self.bidders.len()
            )));
        }
        let classes = self
            .bidders
            .iter()
            .zip(reports)
            .enumerate()
            .map(|(i, (b, &r))| {
                if b.max_bits() == 0 {
                    return Ok(vec![Item::new(0, 0.0)]);
                }
                (0..=b.max_bits())
                    .map(|m| Ok(Item::new(m, self.item_value(i, m, r)?)))
                    .collect()
            })
            .collect::<Result<_>>()?;
        MckpInstance::new(classes, self.capacity)
    }

    pub fn allocate(&self, reports: &[f64]) -> Result<BitAllocation> {
        Ok(BitAllocation(solve_dp(&self.instance(reports)?)?.choice))
    }

    /// Allocation that maximizes `v_FC · tr` alone, ignoring every cost.
    pub fn fim_instance(&self) -> MckpInstance {
        let classes = self
            .bidders
            .iter()
            .map(|b| {
                (0..=b.max_bits())
                    .map(|m| Item::new(m, self.model.fc_value * b.traces[m as usize]))
                    .collect()
            })
            .collect();
        MckpInstance {
            classes,
            capacity: self.capacity,
        }
    }
}

/// Build the per-step instance directly from a cloud with exact `κ`.
#[allow(clippy::too_many_arguments)]
pub fn build_instance(
    cloud: &ParticleCloud,
    sensors: &[SensorNode],
    reports: &[f64],
    model: &ValuationModel,
    capacity: u32,
    bank: &QuantizerBank,
    sm: &SignalModel,
) -> Result<MckpInstance> {
    let kappa = ExactKappa { bank, signal: sm };
    AuctionRound::prepare(cloud, sensors, model, capacity, &kappa, sm)?.instance(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TargetState;
    use crate::fisher::expected_sensor_fim;
    use crate::sensing::{Roi, ThresholdStrategy};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_model(k: f64) -> ValuationModel {
        ValuationModel::new(ValuationFamily::Uniform, 1.0, k).unwrap()
    }

    fn sensor(x: f64, y: f64, h: f64) -> SensorNode {
        SensorNode {
            id: 0,
            x,
            y,
            fc_distance: h,
            residual_energy: 1.0,
            initial_energy: 1.0,
            valuation: 0.5,
            bounds: ValuationBounds::new(0.1, 1.0).unwrap(),
        }
    }

    #[test]
    fn energy_model() {
        assert_relative_eq!(transmit_energy(3, 10.0), 3e-6, max_relative = 1e-12);
        assert_eq!(transmit_energy(0, 10.0), 0.0);
        assert_relative_eq!(
            transmit_energy(6, 7.5),
            2.0 * transmit_energy(3, 7.5),
            max_relative = 1e-15
        );
    }

    #[test]
    fn virtual_valuations() {
        let vm = uniform_model(0.0);
        let b = ValuationBounds::new(0.1, 1.0).unwrap();
        assert_relative_eq!(virtual_valuation(&vm, &b, 0.5).unwrap(), 0.9, max_relative = 1e-12);
        assert_eq!(virtual_valuation(&vm, &b, 0.1).unwrap(), 0.1);
        assert!(virtual_valuation(&vm, &b, 1.5).is_err());
        assert!(virtual_valuation(&vm, &b, 0.05).is_err());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let v = 0.1 + 0.9 * i as f64 / 100.0;
            let phi = virtual_valuation(&vm, &b, v).unwrap();
            assert!(phi > prev);
            // generic definition v + F/f agrees with the closed form
            assert_relative_eq!(
                phi,
                v + vm.family.cdf(&b, v) / vm.family.pdf(&b, v),
                max_relative = 1e-12
            );
            prev = phi;
        }
        let power = ValuationModel::new(ValuationFamily::Power { exponent: 2.0 }, 1.0, 0.0).unwrap();
        let v = 0.7;
        assert_relative_eq!(
            virtual_valuation(&power, &b, v).unwrap(),
            v + power.family.cdf(&b, v) / power.family.pdf(&b, v),
            max_relative = 1e-12
        );
    }

    #[test]
    fn energy_factors() {
        let mut s = sensor(0.0, 0.0, 10.0);
        assert_eq!(energy_factor(&uniform_model(3.0), &s), 1.0);
        s.residual_energy = 0.5;
        assert_relative_eq!(energy_factor(&uniform_model(3.0), &s), 8.0, max_relative = 1e-12);
        assert_eq!(energy_factor(&uniform_model(0.0), &s), 1.0);
    }

    #[test]
    fn item_values() {
        let vm = uniform_model(0.0);
        let s = sensor(0.0, 0.0, 30.0);
        assert_eq!(item_value(&vm, &s, 0, 0.4, 5.0).unwrap(), 0.0);
        assert!(item_value(&vm, &s, 3, 0.4, 0.0).unwrap() < 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..=50 {
            let r = 0.1 + 0.9 * i as f64 / 50.0;
            let v = item_value(&vm, &s, 2, r, 1e-4).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn liveness_and_affordability() {
        let mut s = sensor(0.0, 0.0, 10.0);
        s.residual_energy = transmit_energy(3, 10.0) * 1.0000001;
        assert!(is_alive(&s));
        assert_eq!(affordable_bits(&s, 8), 3);
        assert_eq!(affordable_bits(&s, 2), 2);
        s.residual_energy = transmit_energy(1, 10.0) * 0.999;
        assert!(!is_alive(&s));
        assert_eq!(affordable_bits(&s, 8), 0);
    }

    fn scene(n: usize, capacity: u32, seed: u64) -> (Vec<SensorNode>, ParticleCloud, QuantizerBank, SignalModel) {
        let sm = SignalModel::new(1000.0, 1.0).unwrap();
        let roi = Roi { size: 50.0 };
        let bank = QuantizerBank::build(capacity.max(1) as u8, &sm, ThresholdStrategy::Uniform, &[], &roi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensors = (0..n)
            .map(|i| {
                let mut s = sensor(
                    rng.random_range(-25.0..25.0),
                    rng.random_range(-25.0..25.0),
                    rng.random_range(5.0..60.0),
                );
                s.id = i;
                s
            })
            .collect();
        let c = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let cloud = ParticleCloud::uniform(
            (0..200)
                .map(|_| {
                    TargetState::new(
                        c.0 + rng.random_range(-2.0..2.0),
                        c.1 + rng.random_range(-2.0..2.0),
                        0.0,
                        0.0,
                    )
                })
                .collect(),
        )
        .unwrap();
        (sensors, cloud, bank, sm)
    }

    #[test]
    fn instance_shape_and_recomposition() {
        let vm = uniform_model(0.0);
        let (sensors, cloud, bank, sm) = scene(1, 2, 41);
        let inst = build_instance(&cloud, &sensors, &[0.5], &vm, 2, &bank, &sm).unwrap();
        assert_eq!(inst.classes.len(), 1);
        assert_eq!(
            inst.classes[0].iter().map(|it| it.weight).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );

        for seed in 0..20 {
            let (sensors, cloud, bank, sm) = scene(4, 3, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let reports: Vec<f64> = sensors.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let inst = build_instance(&cloud, &sensors, &reports, &vm, 3, &bank, &sm).unwrap();
            for (i, s) in sensors.iter().enumerate() {
                for m in 0..=3u32 {
                    let fim = expected_sensor_fim(&bank, &sm, s, &cloud, m as u8).unwrap();
                    let expect = item_value(&vm, s, m, reports[i], fim.trace()).unwrap();
                    assert_relative_eq!(
                        inst.value_of(i, m).unwrap(),
                        expect,
                        max_relative = 1e-9,
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn zero_information_means_no_allocation() {
        let vm = uniform_model(0.0);
        let bidders = (0..3)
            .map(|_| Bidder {
                bounds: ValuationBounds::new(0.1, 1.0).unwrap(),
                fc_distance: 20.0,
                energy_factor: 1.0,
                traces: vec![0.0; 5],
            })
            .collect();
        let round = AuctionRound::from_bidders(bidders, vm, 4).unwrap();
        assert_eq!(round.allocate(&[0.5, 0.5, 0.5]).unwrap(), BitAllocation::zeros(3));
    }

    #[test]
    fn dead_sensors_get_a_single_zero_item() {
        let vm = uniform_model(0.0);
        let (mut sensors, cloud, bank, sm) = scene(3, 4, 42);
        sensors[1].residual_energy = 0.0;
        let kappa = ExactKappa {
            bank: &bank,
            signal: &sm,
        };
        let round = AuctionRound::prepare(&cloud, &sensors, &vm, 4, &kappa, &sm).unwrap();
        let inst = round.instance(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(inst.classes[1], vec![Item::new(0, 0.0)]);
        // a dead sensor's out-of-range report is ignored
        assert!(round.instance(&[0.5, 7.0, 0.5]).is_ok());
        assert!(round.instance(&[0.5, 0.5, 7.0]).is_err());
    }

    #[test]
    fn allocation_invariant_to_common_scaling() {
        for seed in 0..50 {
            let (sensors, cloud, bank, sm) = scene(5, 4, 200 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let reports: Vec<f64> = sensors.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let kappa = ExactKappa {
                bank: &bank,
                signal: &sm,
            };
            let base = AuctionRound::prepare(&cloud, &sensors, &uniform_model(0.0), 4, &kappa, &sm).unwrap();
            // scale v_FC and every cost by a power of two so values scale exactly
            let c = 4.0;
            let scaled_model = ValuationModel::new(ValuationFamily::Uniform, c, 0.0).unwrap();
            let bidders = base
                .bidders()
                .iter()
                .map(|b| Bidder {
                    energy_factor: b.energy_factor * c,
                    ..b.clone()
                })
                .collect();
            let scaled = AuctionRound::from_bidders(bidders, scaled_model, 4).unwrap();
            assert_eq!(base.allocate(&reports).unwrap(), scaled.allocate(&reports).unwrap());
        }
    }

    #[test]
    fn fim_only_allocation_uses_full_bandwidth() {
        let (sensors, cloud, bank, sm) = scene(6, 5, 43);
        let kappa = ExactKappa {
            bank: &bank,
            signal: &sm,
        };
        let round = AuctionRound::prepare(&cloud, &sensors, &uniform_model(0.0), 5, &kappa, &sm).unwrap();
        let sol = solve_dp(&round.fim_instance()).unwrap();
        let any_info = (0..6).any(|i| round.trace(i, 1) > 0.0);
        if any_info {
            assert_eq!(sol.total_weight(), 5);
        }
        // with zero costs the auction coincides with the FIM-only allocation
        let free: Vec<Bidder> = round
            .bidders()
            .iter()
            .map(|b| Bidder {
                fc_distance: 0.0,
                ..b.clone()
            })
            .collect();
        let free_round = AuctionRound::from_bidders(free, *round.model(), 5).unwrap();
        assert_eq!(free_round.allocate(&[0.5; 6]).unwrap().0, sol.choice);
    }
}
