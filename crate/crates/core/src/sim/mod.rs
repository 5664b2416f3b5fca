//! Monte Carlo experiment harness.
//!
//! A [`Scenario`] is read from JSON; [`run_campaign`] runs its trials in
//! parallel and aggregates them in trial order. Each trial draws from its own
//! ChaCha streams keyed by (master seed, trial, purpose), so results do not
//! depend on scheduling.

mod auction_io;
mod campaign;
mod output;
mod scenario;
mod trial;

pub use auction_io::{AuctionOutcome, AuctionScenario, BidderSpec, TargetBelief};
pub use campaign::{aggregate, run_campaign, AggregateStep, CampaignResult};
pub use output::{
    write_aggregate, write_outputs, write_sensors, write_steps, AGGREGATE_COLUMNS, SENSOR_COLUMNS, STEP_COLUMNS,
};
pub use scenario::{InitialEnergy, Layout, Policy, Scenario};
pub use trial::{run_trial, Setup, StepRecord, TrialRecord};
