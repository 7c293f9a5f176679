//! Allocation mechanisms and their run traces.

mod coins;
mod composite;
mod greedy;
mod price;
mod randomized;

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

pub use coins::{
    enumerate_coins, AllHeads, CoinDistribution, CoinOutcome, CoinSource, CoinSpec, CoinVector, SeededCoins,
    MAX_ENUMERATED_COINS,
};
pub use composite::{composite_any_m, composite_cardinality_cap, super_item_instance};
pub use greedy::{greedy, greedy_allocation, sorted_bids, GreedyConfig, GreedyStep, GreedyTrace};
pub use price::{
    check_price_bounds, copies_within_ceil_log_bound, copies_within_log_bound, default_eps, max_bidder, mpu,
    mpu_modified, mpu_modified_rand, mpu_modified_rand_with_q, mpu_rand, mpu_with_rate, rate_f64, rounding_probability,
    run_price_update, PriceBoundReport, PriceParams, PriceTrace,
};
pub use randomized::{rand_exp, rand_poly, s_max_allocation};

use crate::bundle::Bundle;
use crate::model::{extend_valuation, welfare, Allocation, Declaration, Instance};
use crate::oracle::OracleError;
use crate::rational::{serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error("mechanism requires single supply, instance has b = {b}")]
    UnsupportedSupply { b: u32 },
    #[error("mu = {mu} violates mu/2 <= v_max < mu (v_max = {v_max})")]
    MuOutOfRange { mu: Rational, v_max: Rational },
    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    InvalidEpsilon(Rational),
    #[error("instance has no positively valued demand")]
    EmptyInstance,
    #[error("coin vector ran out after {supplied} flips")]
    CoinsExhausted { supplied: usize },
    #[error("refusing to enumerate 2^{bits} coin vectors")]
    TooManyCoins { bits: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeEntry {
    #[serde(with = "serde_rational")]
    pub probability: Rational,
    pub allocation: Allocation,
}

/// A finite lottery over allocations with exact probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeDistribution {
    pub support: Vec<OutcomeEntry>,
}

impl OutcomeDistribution {
    pub fn certain(allocation: Allocation) -> Self {
        OutcomeDistribution { support: vec![OutcomeEntry { probability: Rational::from_integer(1), allocation }] }
    }

    pub fn uniform(allocations: Vec<Allocation>) -> Self {
        let p = Rational::new(1, allocations.len() as i128);
        OutcomeDistribution {
            support: allocations.into_iter().map(|allocation| OutcomeEntry { probability: p, allocation }).collect(),
        }
    }

    pub fn total_probability(&self) -> Rational {
        self.support.iter().fold(Rational::zero(), |a, e| a + e.probability)
    }

    pub fn expected_welfare(&self, instance: &Instance) -> Rational {
        self.support.iter().fold(Rational::zero(), |a, e| a + e.probability * welfare(instance, &e.allocation))
    }

    /// Expected value of `bidder`'s awards measured by `valuation`.
    pub fn expected_value(&self, bidder: usize, valuation: &Declaration) -> Rational {
        self.support
            .iter()
            .fold(Rational::zero(), |a, e| a + e.probability * extend_valuation(valuation, e.allocation.get(bidder)))
    }

    /// The allocation if the lottery is degenerate.
    pub fn deterministic(&self) -> Option<&Allocation> {
        match self.support.as_slice() {
            [only] => Some(&only.allocation),
            _ => None,
        }
    }

    /// Bundles `bidder` can receive, each once.
    pub fn awards_of(&self, bidder: usize) -> Vec<Bundle> {
        let mut out: Vec<Bundle> = Vec::new();
        for e in &self.support {
            let b = e.allocation.get(bidder);
            if !out.contains(&b) {
                out.push(b);
            }
        }
        out
    }
}

/// A mechanism viewed as a black box from instances to outcome lotteries.
pub trait Mechanism: Sync {
    fn name(&self) -> String;
    fn run(&self, instance: &Instance) -> Result<OutcomeDistribution, MechanismError>;
}

/// Adapts a deterministic allocation rule.
pub struct FnMechanism<F> {
    pub name: &'static str,
    pub rule: F,
}

impl<F> Mechanism for FnMechanism<F>
where
    F: Fn(&Instance) -> Result<Allocation, MechanismError> + Sync,
{
    fn name(&self) -> String {
        self.name.to_string()
    }

    fn run(&self, instance: &Instance) -> Result<OutcomeDistribution, MechanismError> {
        (self.rule)(instance).map(OutcomeDistribution::certain)
    }
}

/// Every mechanism in the crate with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismKind {
    Greedy(GreedyConfig),
    Mpu { mu: Rational },
    MpuModified { eps: Rational },
    MpuRand { mu: Rational, coins: CoinSpec },
    MpuModifiedRand { eps: Rational, coins: CoinSpec },
    Composite { eps: Rational, coins: CoinSpec },
    RandExp,
    RandPoly,
}

impl MechanismKind {
    pub fn label(&self) -> &'static str {
        match self {
            MechanismKind::Greedy(_) => "greedy",
            MechanismKind::Mpu { .. } => "mpu",
            MechanismKind::MpuModified { .. } => "mpu-mod",
            MechanismKind::MpuRand { .. } => "mpu-rand",
            MechanismKind::MpuModifiedRand { .. } => "mpu-mod-rand",
            MechanismKind::Composite { .. } => "composite",
            MechanismKind::RandExp => "randexp",
            MechanismKind::RandPoly => "randpoly",
        }
    }
}

impl Mechanism for MechanismKind {
    fn name(&self) -> String {
        self.label().to_string()
    }

    fn run(&self, instance: &Instance) -> Result<OutcomeDistribution, MechanismError> {
        let alloc = match self {
            MechanismKind::Greedy(cfg) => greedy_allocation(instance, *cfg)?,
            MechanismKind::Mpu { mu } => mpu(instance, *mu)?.0,
            MechanismKind::MpuModified { eps } => mpu_modified(instance, *eps)?.0,
            MechanismKind::MpuRand { mu, coins } => mpu_rand(instance, *mu, coins.source().as_mut())?.0,
            MechanismKind::MpuModifiedRand { eps, coins } => {
                mpu_modified_rand(instance, *eps, coins.source().as_mut())?.0
            }
            MechanismKind::Composite { eps, coins } => return composite_any_m(instance, *eps, coins.source().as_mut()),
            MechanismKind::RandExp => return rand_exp(instance),
            MechanismKind::RandPoly => return rand_poly(instance),
        };
        Ok(OutcomeDistribution::certain(alloc))
    }
}
