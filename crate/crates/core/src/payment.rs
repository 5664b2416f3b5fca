//! Threshold payments.
//!
//! Holding the other reports fixed, the bits granted to sensor `i` are a
//! non-increasing step function `q(w)` of its report `w`. Its payment is
//!
//! ```text
//! p_i = r_i · C(q(r_i)) + ∫_{r_i}^{b} C(q(w)) dw
//! ```
//!
//! with `C(m) = g_i · E(m, h_i)`. The integral is exact once the jump points
//! of `q` are known, and these are located by probing and bisection.

use serde::{Deserialize, Serialize};

use crate::auction::{AuctionRound, BitAllocation};
use crate::error::Result;

/// Equally spaced probes on `[r_i, b]` used to detect drops in the allocation.
pub const PROBES: usize = 17;
/// Bisection stops once a bracket is narrower than this fraction of `b - a`.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

/// Report above which sensor `i` receives `bits_above` bits (and below
/// which, down to the previous threshold, it received more).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub valuation: f64,
    pub bits_above: u32,
}

/// Bits sensor `i` would receive if it reported `report` instead of `reports[i]`.
pub fn allocation_for_report(round: &AuctionRound, reports: &[f64], sensor: usize, report: f64) -> Result<u32> {
    let mut r = reports.to_vec();
    r[sensor] = report;
    Ok(round.allocate(&r)?.bits(sensor))
}

/// Jump points of sensor `i`'s allocation on `(reports[i], b]`, ascending.
pub fn find_thresholds(round: &AuctionRound, reports: &[f64], sensor: usize) -> Result<Vec<Threshold>> {
    let bounds = round.bidders()[sensor].bounds;
    let start = reports[sensor];
    bounds.check(start)?;
    let tol = RELATIVE_TOLERANCE * bounds.width();
    let mut scratch = reports.to_vec();
    let mut alloc = |w: f64| -> Result<u32> {
        scratch[sensor] = w;
        Ok(round.allocate(&scratch)?.bits(sensor))
    };

    let granted = alloc(start)?;
    let mut found = Vec::new();
    if granted == 0 || start >= bounds.hi {
        return Ok(found);
    }

    let probes: Vec<f64> = (0..PROBES)
        .map(|k| {
            if k + 1 == PROBES {
                bounds.hi
            } else {
                start + (bounds.hi - start) * k as f64 / (PROBES - 1) as f64
            }
        })
        .collect();
    let mut prev_w = start;
    let mut prev_q = granted;
    for &w in &probes[1..] {
        let q = alloc(w)?;
        // refine every drop inside (prev_w, w], one jump at a time
        let (mut lo, mut lo_q) = (prev_w, prev_q);
        while lo_q > q {
            let mut hi = w;
            let mut hi_q = q;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let mq = alloc(mid)?;
                if mq == lo_q {
                    lo = mid;
                } else {
                    hi = mid;
                    hi_q = mq;
                }
            }
            found.push(Threshold {
                valuation: 0.5 * (lo + hi),
                bits_above: hi_q,
            });
            lo = hi;
            lo_q = hi_q;
        }
        prev_w = w;
        prev_q = q;
    }
    Ok(found)
}

/// Threshold payment to sensor `i`. Zero if it receives no bits.
pub fn payment(round: &AuctionRound, reports: &[f64], sensor: usize) -> Result<f64> {
    let granted = allocation_for_report(round, reports, sensor, reports[sensor])?;
    let thresholds = find_thresholds(round, reports, sensor)?;
    Ok(payment_from_thresholds(round, sensor, granted, &thresholds))
}

fn payment_from_thresholds(round: &AuctionRound, sensor: usize, granted: u32, thresholds: &[Threshold]) -> f64 {
    if granted == 0 {
        return 0.0;
    }
    let bidder = &round.bidders()[sensor];
    let hi = bidder.bounds.hi;
    let cost = |m: u32| bidder.scaled_energy(m);
    let Some(first) = thresholds.first() else {
        return hi * cost(granted);
    };
    let mut total = first.valuation * cost(granted);
    for pair in thresholds.windows(2) {
        total += (pair[1].valuation - pair[0].valuation) * cost(pair[0].bits_above);
    }
    let last = thresholds.last().expect("non-empty");
    total += (hi - last.valuation) * cost(last.bits_above);
    total
}

/// Allocation and payments for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub allocation: BitAllocation,
    pub payments: Vec<f64>,
    /// Objective of the knapsack at the reported valuations.
    pub objective: f64,
}

impl Settlement {
    pub fn total_payment(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// Run the mechanism: allocate, then pay every winner its threshold price.
pub fn settle(round: &AuctionRound, reports: &[f64]) -> Result<Settlement> {
    let instance = round.instance(reports)?;
    let solution = crate::mckp::solve_dp(&instance)?;
    let allocation = BitAllocation(solution.choice);
    let payments = (0..round.len())
        .map(|i| {
            let m = allocation.bits(i);
            if m == 0 {
                return Ok(0.0);
            }
            let thresholds = find_thresholds(round, reports, i)?;
            Ok(payment_from_thresholds(round, i, m, &thresholds))
        })
        .collect::<Result<_>>()?;
    Ok(Settlement {
        allocation,
        payments,
        objective: solution.objective,
    })
}

/// Quasi-linear utility of a sensor with true valuation `valuation`.
pub fn sensor_utility(round: &AuctionRound, sensor: usize, valuation: f64, bits: u32, payment: f64) -> f64 {
    payment - valuation * round.bidders()[sensor].scaled_energy(bits)
}
