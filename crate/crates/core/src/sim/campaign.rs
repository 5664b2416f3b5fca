use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::scenario::Scenario;
use super::trial::{Setup, TrialRecord};

/// Trial means for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStep {
    pub step: usize,
    pub mse: f64,
    pub fc_utility: f64,
    pub fc_utility_without_prior: f64,
    pub active_sensors: f64,
    pub total_bits: f64,
    pub total_payment: f64,
    pub dead_fraction: f64,
    pub degenerate_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub scenario: Scenario,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Vec<AggregateStep>,
}

impl CampaignResult {
    /// First step at which the trial-averaged fraction of dead sensors
    /// reaches `alpha`; `None` if the network outlives the horizon.
    pub fn lifetime(&self, alpha: f64) -> Option<usize> {
        self.aggregate.iter().find(|a| a.dead_fraction >= alpha).map(|a| a.step)
    }

    /// Mean of the per-step MSE over the 1-based inclusive step range.
    pub fn mean_mse(&self, first: usize, last: usize) -> f64 {
        let sel: Vec<f64> = self
            .aggregate
            .iter()
            .filter(|a| a.step >= first && a.step <= last)
            .map(|a| a.mse)
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    }
}

/// Run every trial of the scenario (in parallel) and aggregate in trial order.
pub fn run_campaign(scenario: &Scenario) -> Result<CampaignResult> {
    let setup = Setup::new(scenario)?;
    let trials = (0..scenario.trials)
        .into_par_iter()
        .map(|t| setup.run_trial(t))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&trials, setup.sensors.len());
    Ok(CampaignResult {
        scenario: scenario.clone(),
        trials,
        aggregate,
    })
}

pub fn aggregate(trials: &[TrialRecord], sensors: usize) -> Vec<AggregateStep> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    let n = trials.len() as f64;
    (0..first.steps.len())
        .map(|k| {
            let mut a = AggregateStep {
                step: first.steps[k].step,
                mse: 0.0,
                fc_utility: 0.0,
                fc_utility_without_prior: 0.0,
                active_sensors: 0.0,
                total_bits: 0.0,
                total_payment: 0.0,
                dead_fraction: 0.0,
                degenerate_trials: 0,
            };
            for tr in trials {
                let s = &tr.steps[k];
                a.mse += s.squared_error;
                a.fc_utility += s.fc_utility;
                a.fc_utility_without_prior += s.fc_utility_without_prior;
                a.active_sensors += s.allocation.active_sensors() as f64;
                a.total_bits += f64::from(s.allocation.total());
                a.total_payment += s.total_payment();
                a.dead_fraction += s.dead_sensors as f64 / sensors as f64;
                a.degenerate_trials += usize::from(s.degenerate);
            }
            a.mse /= n;
            a.fc_utility /= n;
            a.fc_utility_without_prior /= n;
            a.active_sensors /= n;
            a.total_bits /= n;
            a.total_payment /= n;
            a.dead_fraction /= n;
            a
        })
        .collect()
}
