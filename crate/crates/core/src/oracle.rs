//! Exhaustive winner determination and the greedy dual certificate.

use std::sync::OnceLock;

use num_integer::Integer;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::Bundle;
use crate::mechanisms::GreedyTrace;
use crate::model::{welfare, Allocation, Declaration, Demand, Instance};
use crate::rational::{serde_rational, serde_rational_vec, Rational};

/// Default cap on `(k+1)^n`.
pub const DEFAULT_BUDGET: u128 = 20_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "VERIAUCTION_ORACLE_BUDGET";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search space (k+1)^n = {states} exceeds the oracle budget {budget}")]
    BudgetExceeded { states: u128, budget: u128 },
    #[error("dual certificate infeasible: {0}")]
    CertificateInfeasible(String),
}

/// The budget in effect: the environment override if it parses, else the
/// default. Read once per process.
pub fn oracle_budget() -> u128 {
    static BUDGET: OnceLock<u128> = OnceLock::new();
    *BUDGET.get_or_init(|| std::env::var(BUDGET_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET))
}

fn search_space(instance: &Instance) -> u128 {
    let base = instance.k() as u128 + 1;
    (0..instance.n()).fold(1u128, |acc, _| acc.saturating_mul(base))
}

/// Maximum-welfare exact feasible allocation under the default budget.
pub fn optimal_welfare(instance: &Instance) -> Result<(Rational, Allocation), OracleError> {
    optimal_welfare_with_budget(instance, oracle_budget())
}

/// Values times the lcm of their denominators, when everything fits.
fn integer_values(instance: &Instance) -> Option<(i128, Vec<Vec<i128>>)> {
    let mut lcm: i128 = 1;
    for decl in instance.declarations() {
        for d in decl.demands() {
            let g = lcm.gcd(d.value.denom());
            lcm = lcm.checked_mul(d.value.denom() / g)?;
        }
    }
    let mut total: i128 = 0;
    let mut out = Vec::with_capacity(instance.n());
    for decl in instance.declarations() {
        let mut row = Vec::with_capacity(decl.len());
        let mut best: i128 = 0;
        for d in decl.demands() {
            let v = d.value.numer().checked_mul(lcm / d.value.denom())?;
            best = best.max(v);
            row.push(v);
        }
        total = total.checked_add(best)?;
        out.push(row);
    }
    Some((lcm, out))
}

/// Depth-first search over per-bidder choices (`∅` first, then demands in
/// declaration order). The first optimum in that lexicographic order wins.
pub fn optimal_welfare_with_budget(instance: &Instance, budget: u128) -> Result<(Rational, Allocation), OracleError> {
    let states = search_space(instance);
    if states > budget {
        return Err(OracleError::BudgetExceeded { states, budget });
    }
    // Integer search when a common denominator fits; same order, same ties.
    let (value, awarded) = match integer_values(instance) {
        Some((lcm, values)) => {
            let (v, a) = run_search(instance, values);
            (Rational::new(v, lcm), a)
        }
        None => {
            let values =
                instance.declarations().iter().map(|decl| decl.demands().iter().map(|d| d.value).collect()).collect();
            run_search(instance, values)
        }
    };
    Ok((value, Allocation { awarded }))
}

trait Score: Copy + PartialOrd + std::ops::Add<Output = Self> + Zero {}
impl<T: Copy + PartialOrd + std::ops::Add<Output = T> + Zero> Score for T {}

fn run_search<T: Score>(instance: &Instance, values: Vec<Vec<T>>) -> (T, Vec<Bundle>) {
    let n = instance.n();
    let mut suffix = vec![T::zero(); n + 1];
    for i in (0..n).rev() {
        let best = values[i].iter().copied().fold(T::zero(), |a, v| if v > a { v } else { a });
        suffix[i] = suffix[i + 1] + best;
    }
    let mut search =
        Search { instance, values, suffix, usage: vec![0; instance.m()], current: vec![Bundle::EMPTY; n], best: None };
    search.dfs(0, T::zero());
    search.best.unwrap_or_else(|| (T::zero(), vec![Bundle::EMPTY; n]))
}

struct Search<'a, T> {
    instance: &'a Instance,
    values: Vec<Vec<T>>,
    suffix: Vec<T>,
    usage: Vec<u32>,
    current: Vec<Bundle>,
    best: Option<(T, Vec<Bundle>)>,
}

impl<T: Score> Search<'_, T> {
    fn dfs(&mut self, i: usize, value: T) {
        if let Some((best, _)) = &self.best {
            if value + self.suffix[i] <= *best {
                return;
            }
        }
        if i == self.instance.n() {
            self.best = Some((value, self.current.clone()));
            return;
        }
        self.current[i] = Bundle::EMPTY;
        self.dfs(i + 1, value);
        let supply = self.instance.supply();
        for (j, d) in self.instance.declaration(i).demands().iter().enumerate() {
            if d.bundle.goods().any(|e| self.usage[e] >= supply) {
                continue;
            }
            for e in d.bundle.goods() {
                self.usage[e] += 1;
            }
            self.current[i] = d.bundle;
            let v = self.values[i][j];
            self.dfs(i + 1, value + v);
            for e in d.bundle.goods() {
                self.usage[e] -= 1;
            }
        }
        self.current[i] = Bundle::EMPTY;
    }
}

/// Built-in demand filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restriction {
    /// Keep bundles with at most this many goods.
    MaxCardinality(usize),
    /// Keep each bidder's `ℓ`-th most valuable bundle (1-based; value ties by
    /// declaration index).
    Rank(usize),
}

/// Keeps only the demands for which `keep(bidder, demand)` holds.
pub fn restrict_instance_by<F>(instance: &Instance, mut keep: F) -> Instance
where
    F: FnMut(usize, &Demand) -> bool,
{
    let decls = instance
        .declarations()
        .iter()
        .enumerate()
        .map(|(i, decl)| {
            let kept = decl.demands().iter().filter(|d| keep(i, d)).cloned().collect();
            Declaration::new(kept).expect("a sub-list of a valid declaration is valid")
        })
        .collect();
    Instance::new(instance.universe(), decls).expect("same universe, same bundles")
}

pub fn restrict_instance(instance: &Instance, restriction: Restriction) -> Instance {
    match restriction {
        Restriction::MaxCardinality(c) => restrict_instance_by(instance, |_, d| d.bundle.len() <= c),
        Restriction::Rank(rank) => {
            let picks: Vec<Option<Bundle>> = instance
                .declarations()
                .iter()
                .map(|decl| {
                    rank.checked_sub(1).and_then(|r| decl.ranked().get(r).copied()).map(|j| decl.demands()[j].bundle)
                })
                .collect();
            restrict_instance_by(instance, |i, d| picks[i] == Some(d.bundle))
        }
    }
}

/// How the dual solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateConstruction {
    /// Witness-based `y` scaled by `d'`, with `z` the accepted values.
    Scaled,
    /// `m = 1`: `y` equals the greedy welfare on the only good.
    SingleGood,
    /// The first accepted bundle is the whole universe: `y_e` equals its value
    /// everywhere and `z = 0`.
    FullBundle,
}

/// A feasible dual solution bounding OPT by `(d'+1)` times the greedy welfare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualCertificate {
    /// Per-good duals before scaling.
    #[serde(with = "serde_rational_vec")]
    pub y: Vec<Rational>,
    #[serde(with = "serde_rational_vec")]
    pub z: Vec<Rational>,
    /// Factor applied to `y` in the certified dual.
    #[serde(with = "serde_rational")]
    pub scale: Rational,
    pub d_prime: usize,
    pub construction: CertificateConstruction,
    pub witness_allocation: Allocation,
    #[serde(with = "serde_rational")]
    pub greedy_welfare: Rational,
    /// Dual objective `scale·Σy + Σz`, an upper bound on OPT.
    #[serde(with = "serde_rational")]
    pub bound: Rational,
}

fn sum(values: &[Rational]) -> Rational {
    values.iter().fold(Rational::zero(), |a, v| a + v)
}

/// First dual constraint `z_i + scale·Σ_{e∈S} y_e >= b_i(S)` that fails, if any.
fn first_violation(instance: &Instance, y: &[Rational], z: &[Rational], scale: Rational) -> Option<(usize, Bundle)> {
    for (i, decl) in instance.declarations().iter().enumerate() {
        for d in decl.demands() {
            if z[i] >= d.value {
                continue;
            }
            let covered = z[i] + scale * d.bundle.goods().fold(Rational::zero(), |a, e| a + y[e]);
            if covered < d.value {
                return Some((i, d.bundle));
            }
        }
    }
    None
}

/// The witness-based dual exactly as the analysis prescribes, unscaled.
pub fn witness_dual(instance: &Instance, trace: &GreedyTrace) -> (Vec<Rational>, Vec<Rational>) {
    let accepted: Vec<(usize, Bundle, Rational)> = trace.accepted().map(|s| (s.bidder, s.bundle, s.value)).collect();
    let covered = accepted.iter().fold(Bundle::EMPTY, |acc, &(_, s, _)| acc.union(s));

    let mut sat = Bundle::EMPTY;
    for (i, decl) in instance.declarations().iter().enumerate() {
        for d in decl.demands() {
            if accepted.iter().any(|&(b, s, _)| b == i && s == d.bundle) {
                continue;
            }
            if d.bundle.is_disjoint(covered) {
                continue;
            }
            let first =
                accepted.iter().find(|&&(_, t, _)| !t.is_disjoint(d.bundle)).expect("intersects the covered goods");
            let witness = d.bundle.intersection(first.1).first().expect("nonempty intersection");
            sat = sat.union(Bundle::singleton(witness));
        }
    }

    let mut y = vec![Rational::zero(); instance.m()];
    let mut z = vec![Rational::zero(); instance.n()];
    for &(bidder, s, value) in &accepted {
        let part = match s.intersection(sat) {
            p if p.is_empty() => s,
            p => p,
        };
        let share = value / Rational::from_integer(part.len() as i128);
        for e in part.goods() {
            y[e] = share;
        }
        z[bidder] = value;
    }
    (y, z)
}

/// Builds and checks the dual certificate for a greedy run.
pub fn greedy_dual_certificate(
    instance: &Instance,
    allocation: &Allocation,
    trace: &GreedyTrace,
) -> Result<DualCertificate, OracleError> {
    let w = welfare(instance, allocation);
    let d_prime = instance.d_prime();
    let bound_factor = Rational::from_integer(d_prime as i128 + 1);

    let (y, z, scale, construction) = if instance.m() == 1 {
        (vec![w], vec![Rational::zero(); instance.n()], Rational::from_integer(1), CertificateConstruction::SingleGood)
    } else {
        let (y, z) = witness_dual(instance, trace);
        let scale = Rational::from_integer(d_prime as i128);
        let universe = instance.universe().all_goods();
        let first_is_universe = trace.accepted().next().is_some_and(|s| s.bundle == universe);
        if first_is_universe && first_violation(instance, &y, &z, scale).is_some() {
            (
                vec![w; instance.m()],
                vec![Rational::zero(); instance.n()],
                Rational::from_integer(1),
                CertificateConstruction::FullBundle,
            )
        } else {
            (y, z, scale, CertificateConstruction::Scaled)
        }
    };

    if construction != CertificateConstruction::FullBundle && sum(&y) > w {
        return Err(OracleError::CertificateInfeasible(format!("sum of y = {} exceeds greedy welfare {}", sum(&y), w)));
    }
    if let Some((bidder, bundle)) = first_violation(instance, &y, &z, scale) {
        return Err(OracleError::CertificateInfeasible(format!(
            "dual constraint for bidder {bidder}, bundle {bundle} fails"
        )));
    }
    let bound = scale * sum(&y) + sum(&z);
    if bound > bound_factor * w {
        return Err(OracleError::CertificateInfeasible(format!(
            "dual objective {bound} exceeds (d'+1)·welfare {}",
            bound_factor * w
        )));
    }
    Ok(DualCertificate {
        y,
        z,
        scale,
        d_prime,
        construction,
        witness_allocation: allocation.clone(),
        greedy_welfare: w,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{greedy, GreedyConfig};
    use crate::model::GoodUniverse;
    use crate::rational::from_integer as int;

    fn inst(m: usize, decls: Vec<Declaration>) -> Instance {
        Instance::new(GoodUniverse::single(m).unwrap(), decls).unwrap()
    }

    #[test]
    fn empty_instance_has_zero_optimum() {
        let i = inst(2, vec![]);
        let (v, a) = optimal_welfare(&i).unwrap();
        assert_eq!(v, int(0));
        assert!(a.awarded.is_empty());
    }

    #[test]
    fn two_good_exchange() {
        let d = Rational::new(1, 10);
        let i = inst(
            2,
            vec![
                Declaration::from_pairs([(vec![0], int(1) + d), (vec![1], int(1))]),
                Declaration::from_pairs([(vec![0], int(1) + d), (vec![1], int(1))]),
            ],
        );
        let (v, a) = optimal_welfare(&i).unwrap();
        assert_eq!(v, Rational::new(21, 10));
        // first optimum in lexicographic choice order: bidder 0 takes {0}
        assert_eq!(a.awarded, vec![Bundle::singleton(0), Bundle::singleton(1)]);
    }

    #[test]
    fn multi_supply_search() {
        let i = Instance::new(
            GoodUniverse::new(1, 2).unwrap(),
            (0..3).map(|v| Declaration::from_pairs([(vec![0], int(v + 1))])).collect(),
        )
        .unwrap();
        let (v, _) = optimal_welfare(&i).unwrap();
        assert_eq!(v, int(5));
    }

    #[test]
    fn budget_is_enforced() {
        let i = inst(1, (0..5).map(|_| Declaration::from_pairs([(vec![0], int(1))])).collect());
        assert!(matches!(
            optimal_welfare_with_budget(&i, 31),
            Err(OracleError::BudgetExceeded { states: 32, budget: 31 })
        ));
        assert!(optimal_welfare_with_budget(&i, 32).is_ok());
    }

    #[test]
    fn restrictions() {
        let i = inst(
            4,
            vec![
                Declaration::from_pairs([(vec![0, 1, 2], int(5)), (vec![0, 1], int(3)), (vec![3], int(4))]),
                Declaration::from_pairs([(vec![2], int(1))]),
            ],
        );
        assert_eq!(restrict_instance_by(&i, |_, _| true), i);
        let small = restrict_instance(&i, Restriction::MaxCardinality(2));
        assert_eq!(small.declaration(0).len(), 2);
        let top = restrict_instance(&i, Restriction::Rank(1));
        assert_eq!(top.declaration(0).demands()[0].bundle, Bundle::from_goods([0, 1, 2]));
        assert_eq!(top.declaration(1).len(), 1);
        let second = restrict_instance(&i, Restriction::Rank(2));
        assert_eq!(second.declaration(0).demands()[0].bundle, Bundle::singleton(3));
        assert!(second.declaration(1).is_empty());
    }

    fn certify(i: &Instance) -> DualCertificate {
        let (alloc, trace) = greedy(i, GreedyConfig::default()).unwrap();
        greedy_dual_certificate(i, &alloc, &trace).unwrap()
    }

    #[test]
    fn single_set_certificate() {
        let i = inst(1, vec![Declaration::from_pairs([(vec![0], int(5))])]);
        let c = certify(&i);
        assert_eq!(c.y, vec![int(5)]);
        assert_eq!(c.bound, int(5));
    }

    #[test]
    fn full_bundle_needs_the_fallback() {
        // The literal witness dual leaves y = (3/2, 3/2) with scale d' = 1,
        // which cannot cover the rejected singletons valued 3.
        let i = inst(
            2,
            vec![
                Declaration::from_pairs([(vec![0, 1], int(3))]),
                Declaration::from_pairs([(vec![0], int(3))]),
                Declaration::from_pairs([(vec![1], int(3))]),
            ],
        );
        let (alloc, trace) = greedy(&i, GreedyConfig::default()).unwrap();
        let (y, z) = witness_dual(&i, &trace);
        assert!(first_violation(&i, &y, &z, Rational::from_integer(1)).is_some());
        let c = greedy_dual_certificate(&i, &alloc, &trace).unwrap();
        assert_eq!(c.construction, CertificateConstruction::FullBundle);
        assert_eq!(c.bound, int(6));
        assert_eq!(optimal_welfare(&i).unwrap().0, int(6));
    }

    #[test]
    fn scaled_certificate_on_exchange_instance() {
        let d = Rational::new(1, 10);
        let i = inst(
            2,
            vec![
                Declaration::from_pairs([(vec![0], int(1) + d), (vec![1], int(1))]),
                Declaration::from_pairs([(vec![0], int(1) + d)]),
            ],
        );
        let c = certify(&i);
        assert_eq!(c.construction, CertificateConstruction::Scaled);
        assert_eq!(c.greedy_welfare, Rational::new(11, 10));
        assert_eq!(c.bound, Rational::new(22, 10));
        assert_eq!(c.y, vec![Rational::new(11, 10), int(0)]);
    }
}
