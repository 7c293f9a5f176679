//! Fair-coin mix of the rounded price update on small bundles and a
//! single-super-item auction of the whole universe.

use num_traits::Zero;

use super::coins::CoinSource;
use super::price::{max_bidder, mpu_modified_rand_with_q, rounding_probability};
use super::{MechanismError, OutcomeDistribution};
use crate::bundle::Bundle;
use crate::model::{extend_valuation, sigma, Allocation, Declaration, Demand, GoodUniverse, Instance};
use crate::oracle::{restrict_instance, Restriction};
use crate::rational::Rational;

/// `floor(m^{b/(b+1)})`, computed exactly.
pub fn composite_cardinality_cap(m: usize, b: u32) -> usize {
    let target = num_bigint::BigUint::from(m).pow(b);
    let mut d = 1usize;
    while num_bigint::BigUint::from(d + 1).pow(b + 1) <= target {
        d += 1;
    }
    d
}

/// One good with `b` copies; each bidder bids her value for the whole universe.
pub fn super_item_instance(instance: &Instance) -> Instance {
    let all = instance.universe().all_goods();
    let universe = GoodUniverse::new(1, instance.supply()).expect("supply is at least one");
    let decls = instance
        .declarations()
        .iter()
        .map(|decl| {
            let v = extend_valuation(decl, all);
            if v.is_zero() {
                Declaration::empty()
            } else {
                Declaration::new(vec![Demand::new(Bundle::singleton(0), v)]).expect("single positive demand")
            }
        })
        .collect();
    Instance::new(universe, decls).expect("super item fits")
}

fn rounded_or_empty(
    instance: &Instance,
    eps: Rational,
    q: f64,
    coins: &mut dyn CoinSource,
) -> Result<Allocation, MechanismError> {
    if max_bidder(instance).is_none() {
        return Ok(instance.empty_allocation());
    }
    Ok(mpu_modified_rand_with_q(instance, eps, q, coins)?.0)
}

/// Both branches realized with the given coins, each with probability 1/2.
///
/// Branch one keeps bundles of at most `floor(m^{b/(b+1)})` goods and uses
/// that cap as `d` in the rounding probability. Branch two sells the super
/// item with `m = d = 1`; a winner receives the bundle defining her value for
/// the whole universe.
pub fn composite_any_m(
    instance: &Instance,
    eps: Rational,
    coins: &mut dyn CoinSource,
) -> Result<OutcomeDistribution, MechanismError> {
    if max_bidder(instance).is_none() {
        return Err(MechanismError::EmptyInstance);
    }
    let b = instance.supply();
    let m = instance.m();
    let cap = composite_cardinality_cap(m, b);
    let small = restrict_instance(instance, Restriction::MaxCardinality(cap));
    let branch_small = rounded_or_empty(&small, eps, rounding_probability(cap, b, m), coins)?;

    let sup = super_item_instance(instance);
    let sold = rounded_or_empty(&sup, eps, rounding_probability(1, b, 1), coins)?;
    let all = instance.universe().all_goods();
    let mut branch_super = instance.empty_allocation();
    for i in sold.winners() {
        branch_super.set(i, sigma(instance.declaration(i), all));
    }
    Ok(OutcomeDistribution::uniform(vec![branch_small, branch_super]))
}
