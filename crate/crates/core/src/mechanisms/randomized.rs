//! Lotteries over exact optima of rank slices, and over a max-value award
//! versus greedy on small bundles.

use num_integer::Roots;

use super::greedy::{greedy_allocation, GreedyConfig};
use super::{MechanismError, OutcomeDistribution};
use crate::model::{Allocation, Instance};
use crate::oracle::{optimal_welfare, restrict_instance, Restriction};

/// Uniform over the oracle optima of each rank slice `ℓ = 1..=k`.
pub fn rand_exp(instance: &Instance) -> Result<OutcomeDistribution, MechanismError> {
    let k = instance.k();
    if k == 0 {
        return Ok(OutcomeDistribution::certain(instance.empty_allocation()));
    }
    let mut allocations = Vec::with_capacity(k);
    for rank in 1..=k {
        let slice = restrict_instance(instance, Restriction::Rank(rank));
        allocations.push(optimal_welfare(&slice)?.1);
    }
    Ok(OutcomeDistribution::uniform(allocations))
}

/// Awards only the highest-valued bundle (lowest bidder index, then lowest
/// declaration index on ties).
pub fn s_max_allocation(instance: &Instance) -> Allocation {
    let mut alloc = instance.empty_allocation();
    let mut best = None;
    for (i, decl) in instance.declarations().iter().enumerate() {
        for d in decl.demands() {
            if best.map_or(true, |(_, _, v)| d.value > v) {
                best = Some((i, d.bundle, d.value));
            }
        }
    }
    if let Some((i, s, _)) = best {
        alloc.set(i, s);
    }
    alloc
}

/// Half the time the max-value award, half the time greedy restricted to
/// bundles of at most `floor(sqrt(m))` goods.
pub fn rand_poly(instance: &Instance) -> Result<OutcomeDistribution, MechanismError> {
    if instance.supply() != 1 {
        return Err(MechanismError::UnsupportedSupply { b: instance.supply() });
    }
    let small = restrict_instance(instance, Restriction::MaxCardinality(instance.m().sqrt()));
    let g = greedy_allocation(&small, GreedyConfig::default())?;
    Ok(OutcomeDistribution::uniform(vec![s_max_allocation(instance), g]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::Bundle;
    use crate::model::{Declaration, GoodUniverse};
    use crate::rational::{from_integer as int, Rational};

    fn inst(m: usize, decls: Vec<Declaration>) -> Instance {
        Instance::new(GoodUniverse::single(m).unwrap(), decls).unwrap()
    }

    #[test]
    fn single_minded_rand_exp_is_the_optimum() {
        let i = inst(
            2,
            vec![Declaration::from_pairs([(vec![0], int(2))]), Declaration::from_pairs([(vec![0, 1], int(3))])],
        );
        let dist = rand_exp(&i).unwrap();
        assert_eq!(dist.support.len(), 1);
        assert_eq!(dist.expected_welfare(&i), int(3));
    }

    #[test]
    fn rank_slices_share_value() {
        let i = inst(2, vec![Declaration::from_pairs([(vec![0], int(2)), (vec![1], int(2))])]);
        let dist = rand_exp(&i).unwrap();
        assert_eq!(dist.support.len(), 2);
        assert!(dist.support.iter().all(|e| e.probability == Rational::new(1, 2)));
        assert_eq!(dist.expected_welfare(&i), int(2));
    }

    #[test]
    fn empty_declarations_give_empty_lottery() {
        let i = inst(1, vec![Declaration::empty()]);
        let dist = rand_exp(&i).unwrap();
        assert_eq!(dist.support.len(), 1);
        assert_eq!(dist.support[0].allocation.get(0), Bundle::EMPTY);
    }

    #[test]
    fn large_bundle_only_in_max_branch() {
        let i = inst(
            4,
            vec![
                Declaration::from_pairs([(vec![0, 1, 2, 3], int(10)), (vec![0], int(1))]),
                Declaration::from_pairs([(vec![1], int(2))]),
            ],
        );
        let dist = rand_poly(&i).unwrap();
        assert_eq!(dist.support[0].allocation.get(0), Bundle::full(4));
        assert_eq!(dist.support[1].allocation.get(0), Bundle::singleton(0));
        assert_eq!(dist.support[1].allocation.get(1), Bundle::singleton(1));
    }
}
