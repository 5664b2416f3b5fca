//! CSV emission. Floats use Rust's shortest round-trip formatting, so every
//! value read back parses to the identical `f64`.
//!
//! * `steps.csv`: one row per (trial, step). Fixed columns
//!   `trial, step, true_x, true_y, true_vx, true_vy, est_x, est_y, est_vx, est_vy,
//!   squared_error, active_sensors, total_bits, total_payment, fc_utility,
//!   fc_utility_without_prior, dead_sensors, degenerate`, then `bits_<i>`,
//!   `payment_<i>` and `energy_<i>` (residual after the step) per sensor.
//! * `sensors.csv`: `trial, id, x, y, fc_distance, initial_energy, valuation`.
//! * `aggregate.csv`: trial means per step, see [`AggregateStep`](super::AggregateStep).
//! * `scenario.json`: the resolved configuration.

use std::fs;
use std::path::Path;

use csv::Writer;

use crate::error::{Error, Result};

use super::campaign::CampaignResult;

pub const STEP_COLUMNS: [&str; 18] = [
    "trial",
    "step",
    "true_x",
    "true_y",
    "true_vx",
    "true_vy",
    "est_x",
    "est_y",
    "est_vx",
    "est_vy",
    "squared_error",
    "active_sensors",
    "total_bits",
    "total_payment",
    "fc_utility",
    "fc_utility_without_prior",
    "dead_sensors",
    "degenerate",
];

pub const SENSOR_COLUMNS: [&str; 7] = ["trial", "id", "x", "y", "fc_distance", "initial_energy", "valuation"];

pub const AGGREGATE_COLUMNS: [&str; 9] = [
    "step",
    "mse",
    "fc_utility",
    "fc_utility_without_prior",
    "active_sensors",
    "total_bits",
    "total_payment",
    "dead_fraction",
    "degenerate_trials",
];

fn writer(path: &Path) -> Result<Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(Writer::from_writer(file))
}

pub fn write_steps(result: &CampaignResult, path: &Path) -> Result<()> {
    let n = result.trials.first().map_or(0, |t| t.sensors.len());
    let mut w = writer(path)?;
    let mut header: Vec<String> = STEP_COLUMNS.iter().map(|s| s.to_string()).collect();
    for prefix in ["bits", "payment", "energy"] {
        header.extend((0..n).map(|i| format!("{prefix}_{i}")));
    }
    w.write_record(&header)?;
    for tr in &result.trials {
        for s in &tr.steps {
            let mut row = vec![
                tr.trial.to_string(),
                s.step.to_string(),
                s.truth.x.to_string(),
                s.truth.y.to_string(),
                s.truth.vx.to_string(),
                s.truth.vy.to_string(),
                s.estimate.x.to_string(),
                s.estimate.y.to_string(),
                s.estimate.vx.to_string(),
                s.estimate.vy.to_string(),
                s.squared_error.to_string(),
                s.allocation.active_sensors().to_string(),
                s.allocation.total().to_string(),
                s.total_payment().to_string(),
                s.fc_utility.to_string(),
                s.fc_utility_without_prior.to_string(),
                s.dead_sensors.to_string(),
                u8::from(s.degenerate).to_string(),
            ];
            row.extend(s.allocation.as_slice().iter().map(|m| m.to_string()));
            row.extend(s.payments.iter().map(|p| p.to_string()));
            row.extend(s.residual_energy.iter().map(|e| e.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sensors(result: &CampaignResult, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SENSOR_COLUMNS)?;
    for tr in &result.trials {
        for s in &tr.sensors {
            w.write_record([
                tr.trial.to_string(),
                s.id.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.fc_distance.to_string(),
                s.initial_energy.to_string(),
                s.valuation.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_aggregate(result: &CampaignResult, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(AGGREGATE_COLUMNS)?;
    for a in &result.aggregate {
        w.write_record([
            a.step.to_string(),
            a.mse.to_string(),
            a.fc_utility.to_string(),
            a.fc_utility_without_prior.to_string(),
            a.active_sensors.to_string(),
            a.total_bits.to_string(),
            a.total_payment.to_string(),
            a.dead_fraction.to_string(),
            a.degenerate_trials.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write all outputs into `dir`, creating it if needed.
pub fn write_outputs(result: &CampaignResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_steps(result, &dir.join("steps.csv"))?;
    write_sensors(result, &dir.join("sensors.csv"))?;
    write_aggregate(result, &dir.join("aggregate.csv"))?;
    let cfg = dir.join("scenario.json");
    let text = serde_json::to_string_pretty(&result.scenario)?;
    fs::write(&cfg, text + "\n").map_err(|e| Error::io(&cfg, e))
}
