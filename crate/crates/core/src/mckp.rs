//! Multiple-choice knapsack: pick exactly one item per class, maximize total
//! value subject to a weight capacity.
//!
//! Ties between allocations of equal objective are broken by fewer total
//! weight first, then lexicographically smallest choice vector in class order.
//! Both solvers apply the same rule, and both sum the chosen values in class
//! order starting from zero, so their objectives agree bit for bit.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the combinations [`brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub weight: u32,
    pub value: f64,
}

impl Item {
    pub const fn new(weight: u32, value: f64) -> Self {
        Self { weight, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MckpInstance {
    pub classes: Vec<Vec<Item>>,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MckpSolution {
    /// Selected weight for each class.
    pub choice: Vec<u32>,
    pub objective: f64,
}

impl MckpSolution {
    pub fn total_weight(&self) -> u64 {
        self.choice.iter().map(|&w| u64::from(w)).sum()
    }
}

impl MckpInstance {
    pub fn new(classes: Vec<Vec<Item>>, capacity: u32) -> Result<Self> {
        let inst = Self { classes, capacity };
        inst.validate()?;
        Ok(inst)
    }

    /// Every class holds a zero-weight item, weights are unique within a
    /// class and all values are finite.
    pub fn validate(&self) -> Result<()> {
        for (i, class) in self.classes.iter().enumerate() {
            if !class.iter().any(|it| it.weight == 0) {
                return Err(Error::InvalidInstance(format!("class {i} has no zero-weight item")));
            }
            if let Some(it) = class.iter().find(|it| !it.value.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "class {i} item of weight {} has non-finite value",
                    it.weight
                )));
            }
            let mut weights: Vec<u32> = class.iter().map(|it| it.weight).collect();
            weights.sort_unstable();
            if weights.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInstance(format!("class {i} repeats a weight")));
            }
        }
        Ok(())
    }

    /// Value of the item with weight `w` in `class`, if present.
    pub fn value_of(&self, class: usize, w: u32) -> Option<f64> {
        self.classes[class].iter().find(|it| it.weight == w).map(|it| it.value)
    }

    /// Canonical objective of a choice vector: values summed in class order
    /// from zero. `None` if infeasible.
    pub fn evaluate(&self, choice: &[u32]) -> Option<f64> {
        if choice.len() != self.classes.len()
            || choice.iter().map(|&w| u64::from(w)).sum::<u64>() > u64::from(self.capacity)
        {
            return None;
        }
        choice
            .iter()
            .enumerate()
            .try_fold(0.0, |acc, (i, &w)| Some(acc + self.value_of(i, w)?))
    }
}

const UNREACHABLE: u32 = u32::MAX;

/// Exact solution by dynamic programming over (classes × used capacity).
///
/// `best[y]` after class `l` is the best objective of the first `l` classes
/// using exactly `y` capacity; the optimum is the best over `y <= M`. Every
/// state records the weight picked for its last class so the allocation can be
/// recovered by walking back. Runs in `O(N · M · K)` for `K` items per class.
pub fn solve_dp(inst: &MckpInstance) -> Result<MckpSolution> {
    inst.validate()?;
    let cap = inst.capacity as usize;
    let mut best = vec![f64::NEG_INFINITY; cap + 1];
    best[0] = 0.0;
    let mut picks: Vec<Vec<u32>> = Vec::with_capacity(inst.classes.len());

    for class in &inst.classes {
        let mut next = vec![f64::NEG_INFINITY; cap + 1];
        let mut pick = vec![UNREACHABLE; cap + 1];
        for y in 0..=cap {
            for item in class.iter().filter(|it| it.weight as usize <= y) {
                let prev = best[y - item.weight as usize];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev + item.value;
                let better = match cand.partial_cmp(&next[y]) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => {
                        let current = pick[y];
                        lexicographic_prefix(&picks, y, item.weight, current) == Ordering::Less
                    }
                    _ => false,
                };
                if better {
                    next[y] = cand;
                    pick[y] = item.weight;
                }
            }
        }
        best = next;
        picks.push(pick);
    }

    // strict `>` keeps the smallest total on ties
    let mut end = 0;
    for y in 1..=cap {
        if best[y] > best[end] {
            end = y;
        }
    }
    let objective = best[end];
    let choice = backtrack(&picks, picks.len(), end);
    Ok(MckpSolution { choice, objective })
}

/// Choice vector of the first `layers` classes ending in state `y`.
fn backtrack(picks: &[Vec<u32>], layers: usize, mut y: usize) -> Vec<u32> {
    let mut choice = vec![0; layers];
    for l in (0..layers).rev() {
        let w = picks[l][y];
        debug_assert_ne!(w, UNREACHABLE);
        choice[l] = w;
        y -= w as usize;
    }
    choice
}

/// Compare the prefixes ending in `(.., a)` and `(.., b)` at capacity `y`
/// for the class currently being added.
fn lexicographic_prefix(picks: &[Vec<u32>], y: usize, a: u32, b: u32) -> Ordering {
    let layers = picks.len();
    let mut pa = backtrack(picks, layers, y - a as usize);
    pa.push(a);
    let mut pb = backtrack(picks, layers, y - b as usize);
    pb.push(b);
    pa.cmp(&pb)
}

/// Exhaustive enumeration with the same tie-break as [`solve_dp`].
pub fn brute_force(inst: &MckpInstance) -> Result<MckpSolution> {
    inst.validate()?;
    let classes: Vec<Vec<Item>> = inst
        .classes
        .iter()
        .map(|c| {
            let mut c: Vec<Item> = c.iter().copied().filter(|it| it.weight <= inst.capacity).collect();
            c.sort_by_key(|it| it.weight);
            c
        })
        .collect();
    let combos = classes
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if combos > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge(combos));
    }

    let n = classes.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, u64, Vec<u32>)> = None;
    loop {
        let choice: Vec<u32> = idx.iter().zip(&classes).map(|(&k, c)| c[k].weight).collect();
        let total: u64 = choice.iter().map(|&w| u64::from(w)).sum();
        if total <= u64::from(inst.capacity) {
            let obj = idx.iter().zip(&classes).fold(0.0, |acc, (&k, c)| acc + c[k].value);
            let wins = match &best {
                None => true,
                Some((bo, bt, bc)) => obj > *bo || (obj == *bo && (total < *bt || (total == *bt && choice < *bc))),
            };
            if wins {
                best = Some((obj, total, choice));
            }
        }
        // odometer
        let mut pos = n;
        loop {
            if pos == 0 {
                let (objective, _, choice) = best.expect("all-zero choice is always feasible");
                return Ok(MckpSolution { choice, objective });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < classes[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
