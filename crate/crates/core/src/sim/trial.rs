use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{is_alive, transmit_energy, AuctionRound, BitAllocation, ValuationModel};
use crate::dynamics::{GaussianSampler, MotionModel, TargetState};
use crate::error::Result;
use crate::filter::ParticleCloud;
use crate::fisher::{prior_fim, KappaTable};
use crate::mckp::solve_dp;
use crate::payment::settle;
use crate::sensing::{Observation, QuantizerBank, SensorNode, SignalModel};

use super::scenario::{Policy, Scenario, STREAM_FILTER, STREAM_MEASUREMENT, STREAM_TRUTH, STREAM_VALUATION};

/// What happened in one tracking step of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub truth: TargetState,
    pub estimate: TargetState,
    pub squared_error: f64,
    pub allocation: BitAllocation,
    pub payments: Vec<f64>,
    /// `v_FC · tr(Σ J_i(m_i) + J^P) − Σ p_i`.
    pub fc_utility: f64,
    /// Same without the prior information term.
    pub fc_utility_without_prior: f64,
    /// Residual energy of every sensor after this step's transmissions.
    pub residual_energy: Vec<f64>,
    pub dead_sensors: usize,
    /// The likelihood collapsed and the weights were reset to uniform.
    pub degenerate: bool,
}

impl StepRecord {
    pub fn total_payment(&self) -> f64 {
        self.payments.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Sensors as deployed, with this trial's private valuations.
    pub sensors: Vec<SensorNode>,
    pub steps: Vec<StepRecord>,
}

/// Trial-independent objects derived from a scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub signal: SignalModel,
    pub motion: MotionModel,
    pub valuation: ValuationModel,
    pub bank: QuantizerBank,
    pub kappa: KappaTable,
    pub prior: GaussianSampler,
    /// Sensors with full batteries; valuations are filled in per trial.
    pub sensors: Vec<SensorNode>,
}

impl Setup {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let signal = scenario.signal_model()?;
        let [fx, fy] = scenario.fc_position;
        let bounds = scenario.valuation_bounds;
        let sensors: Vec<SensorNode> = scenario
            .sensor_positions()
            .into_iter()
            .enumerate()
            .map(|(id, [x, y])| {
                let h = (x - fx).hypot(y - fy);
                let e0 = scenario.initial_energy_at(h);
                SensorNode {
                    id,
                    x,
                    y,
                    fc_distance: h,
                    residual_energy: e0,
                    initial_energy: e0,
                    valuation: bounds.lo,
                    bounds,
                }
            })
            .collect();
        let bank = QuantizerBank::build(
            scenario.bandwidth as u8,
            &signal,
            scenario.quantizer,
            &sensors,
            &scenario.roi(),
        )?;
        let kappa = KappaTable::new(&bank, &signal);
        Ok(Self {
            scenario: scenario.clone(),
            signal,
            motion: scenario.motion_model()?,
            valuation: scenario.valuation_model()?,
            prior: GaussianSampler::new(scenario.prior_mean(), &scenario.prior_covariance())?,
            bank,
            kappa,
            sensors,
        })
    }

    pub fn run_trial(&self, trial: usize) -> Result<TrialRecord> {
        let sc = &self.scenario;
        let mut truth_rng = sc.trial_stream(trial, STREAM_TRUTH);
        let mut noise_rng = sc.trial_stream(trial, STREAM_MEASUREMENT);
        let mut filter_rng = sc.trial_stream(trial, STREAM_FILTER);
        let mut value_rng = sc.trial_stream(trial, STREAM_VALUATION);

        let b = sc.valuation_bounds;
        let mut sensors = self.sensors.clone();
        for s in &mut sensors {
            s.valuation = value_rng.random_range(b.lo..=b.hi);
        }
        let deployed = sensors.clone();
        let reports: Vec<f64> = sensors.iter().map(|s| s.valuation).collect();

        let mut truth = self.prior.sample(&mut truth_rng);
        let mut cloud = ParticleCloud::from_prior(&self.prior, sc.particles, &mut filter_rng)?;
        let mut steps = Vec::with_capacity(sc.steps);

        for t in 1..=sc.steps {
            if sc.reverse_every.is_some_and(|r| t > 1 && (t - 1) % r == 0) {
                truth = truth.reversed();
                cloud.reverse_velocities();
            }
            truth = self.motion.step(&truth, &mut truth_rng);
            cloud.predict(&self.motion, &mut filter_rng);

            let fim_cloud = match sc.fim_particles {
                Some(n) => cloud.subsample(n),
                None => cloud.clone(),
            };
            let round = AuctionRound::prepare(
                &fim_cloud,
                &sensors,
                &self.valuation,
                sc.bandwidth,
                &self.kappa,
                &self.signal,
            )?;
            let (allocation, payments) = match sc.policy {
                Policy::Auction => {
                    let s = settle(&round, &reports)?;
                    (s.allocation, s.payments)
                }
                Policy::Fim => {
                    let alloc = BitAllocation(solve_dp(&round.fim_instance())?.choice);
                    let pay = (0..sensors.len())
                        .map(|i| reports[i] * round.bidders()[i].scaled_energy(alloc.bits(i)))
                        .collect();
                    (alloc, pay)
                }
            };

            let data_trace: f64 = (0..sensors.len()).map(|i| round.trace(i, allocation.bits(i))).sum();
            let prior_trace = prior_fim(&cloud).trace();
            let paid: f64 = payments.iter().sum();
            let v = self.valuation.fc_value;

            // every sensor measures so the noise stream does not depend on the allocation
            let observations: Vec<Observation> = sensors
                .iter()
                .enumerate()
                .filter_map(|(i, s)| {
                    let z = self.signal.measure(s, &truth, &mut noise_rng);
                    let bits = allocation.bits(i) as u8;
                    let q = self.bank.get(bits)?;
                    Some(Observation {
                        sensor: i,
                        bits,
                        level: q.quantize(z),
                    })
                })
                .collect();
            let degenerate = cloud.update_weights(&observations, &sensors, &self.signal, &self.bank);
            let estimate = cloud.estimate();
            cloud.resample(&mut filter_rng);

            for (i, s) in sensors.iter_mut().enumerate() {
                s.residual_energy -= transmit_energy(allocation.bits(i), s.fc_distance);
            }

            steps.push(StepRecord {
                step: t,
                truth,
                estimate,
                squared_error: truth.squared_position_error(&estimate),
                fc_utility: v * (data_trace + prior_trace) - paid,
                fc_utility_without_prior: v * data_trace - paid,
                allocation,
                payments,
                residual_energy: sensors.iter().map(|s| s.residual_energy).collect(),
                dead_sensors: sensors.iter().filter(|s| !is_alive(s)).count(),
                degenerate,
            });
        }
        Ok(TrialRecord {
            trial,
            sensors: deployed,
            steps,
        })
    }
}

/// Run a single trial of `scenario`.
pub fn run_trial(scenario: &Scenario, trial: usize) -> Result<TrialRecord> {
    Setup::new(scenario)?.run_trial(trial)
}
