//! Myopic target tracking in a bandwidth-limited sensor network where the
//! fusion center buys quantized measurements from selfish sensors through a
//! truthful optimal auction.
//!
//! Each tracking step runs the same pipeline:
//!
//! 1. propagate the particle cloud through the motion model ([`dynamics`], [`filter`]);
//! 2. score every (sensor, bit count) pair by expected Fisher information
//!    minus a virtual energy cost ([`fisher`], [`auction`]);
//! 3. solve the resulting multiple-choice knapsack exactly ([`mckp`]);
//! 4. pay each winning sensor its threshold price ([`payment`]);
//! 5. fold the quantized measurements back into the filter ([`sensing`], [`filter`]).
//!
//! [`sim`] wraps all of it in a reproducible Monte Carlo harness.

pub mod auction;
pub mod dynamics;
pub mod error;
pub mod filter;
pub mod fisher;
pub mod mckp;
pub mod payment;
pub mod sensing;
pub mod sim;

pub use auction::{AuctionRound, BitAllocation, ValuationFamily, ValuationModel, EPS_AMP};
pub use dynamics::{MotionModel, TargetState};
pub use error::{Error, Result};
pub use filter::ParticleCloud;
pub use fisher::{Fim4, KappaSource, KappaTable};
pub use mckp::{Item, MckpInstance, MckpSolution};
pub use payment::Settlement;
pub use sensing::{Quantizer, QuantizerBank, SensorNode, SignalModel, ThresholdStrategy};
pub use sim::{Scenario, StepRecord};
