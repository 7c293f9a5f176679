//! Greedy allocation by declared value for single-supply goods.

use num_traits::Zero;
use serde::Serialize;

use super::MechanismError;
use crate::bundle::Bundle;
use crate::model::{Allocation, Instance};
use crate::rational::{serde_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    /// Keep zero-valued bids (sorted last). Off gives the nonzero-bids-only variant.
    pub include_zero_bids: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig { include_zero_bids: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GreedyStep {
    pub bidder: usize,
    pub demand_index: usize,
    pub bundle: Bundle,
    #[serde(with = "serde_rational")]
    pub value: Rational,
    pub accepted: bool,
}

/// Bids in processing order with the decision taken on each.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
}

impl GreedyTrace {
    /// Accepted steps in acceptance order.
    pub fn accepted(&self) -> impl Iterator<Item = &GreedyStep> {
        self.steps.iter().filter(|s| s.accepted)
    }
}

/// Bids sorted by value descending, then bidder index, then declaration index.
pub fn sorted_bids(instance: &Instance, cfg: GreedyConfig) -> Vec<(usize, usize)> {
    let mut bids: Vec<(usize, usize)> = instance
        .declarations()
        .iter()
        .enumerate()
        .flat_map(|(i, decl)| {
            decl.demands()
                .iter()
                .enumerate()
                .filter(move |(_, d)| cfg.include_zero_bids || !d.value.is_zero())
                .map(move |(j, _)| (i, j))
        })
        .collect();
    bids.sort_by(|&(i1, j1), &(i2, j2)| {
        let v1 = instance.declaration(i1).demands()[j1].value;
        let v2 = instance.declaration(i2).demands()[j2].value;
        v2.cmp(&v1).then(i1.cmp(&i2)).then(j1.cmp(&j2))
    });
    bids
}

pub fn greedy(instance: &Instance, cfg: GreedyConfig) -> Result<(Allocation, GreedyTrace), MechanismError> {
    if instance.supply() != 1 {
        return Err(MechanismError::UnsupportedSupply { b: instance.supply() });
    }
    let mut alloc = instance.empty_allocation();
    let mut served = vec![false; instance.n()];
    let mut taken = Bundle::EMPTY;
    let mut trace = GreedyTrace::default();
    for (bidder, j) in sorted_bids(instance, cfg) {
        let demand = &instance.declaration(bidder).demands()[j];
        let accepted = !served[bidder] && demand.bundle.is_disjoint(taken);
        if accepted {
            served[bidder] = true;
            taken = taken.union(demand.bundle);
            alloc.set(bidder, demand.bundle);
        }
        trace.steps.push(GreedyStep { bidder, demand_index: j, bundle: demand.bundle, value: demand.value, accepted });
    }
    Ok((alloc, trace))
}

/// Allocation only; skips trace bookkeeping.
pub fn greedy_allocation(instance: &Instance, cfg: GreedyConfig) -> Result<Allocation, MechanismError> {
    if instance.supply() != 1 {
        return Err(MechanismError::UnsupportedSupply { b: instance.supply() });
    }
    let mut alloc = instance.empty_allocation();
    let mut taken = Bundle::EMPTY;
    for (bidder, j) in sorted_bids(instance, cfg) {
        let bundle = instance.declaration(bidder).demands()[j].bundle;
        if alloc.get(bidder).is_empty() && bundle.is_disjoint(taken) {
            taken = taken.union(bundle);
            alloc.set(bidder, bundle);
        }
    }
    Ok(alloc)
}
