//! Instances, XOR declarations, allocations and the verification predicate.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{Bundle, MAX_GOODS};
use crate::rational::{is_nonnegative, serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("universe needs m >= 1 goods and supply b >= 1 (got m={m}, b={b})")]
    InvalidUniverse { m: usize, b: u32 },
    #[error("m={0} exceeds the {MAX_GOODS}-good cap of this build")]
    TooManyGoods(usize),
    #[error("declaration contains an empty bundle")]
    EmptyBundle,
    #[error("bundle {0} is declared twice")]
    DuplicateBundle(Bundle),
    #[error("negative value declared for bundle {0}")]
    NegativeValue(Bundle),
    #[error("bidder {bidder} demands {bundle}, which is outside a universe of {m} goods")]
    GoodOutOfRange { bidder: usize, bundle: Bundle, m: usize },
    #[error("bidder {bidder} declares {len} bundles but at most {k} are allowed")]
    TooManyDemands { bidder: usize, len: usize, k: usize },
    #[error("malformed instance JSON: {0}")]
    Json(String),
}

/// `m` goods, each available in `b` identical copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GoodUniverse {
    m: usize,
    b: u32,
}

impl GoodUniverse {
    pub fn new(m: usize, b: u32) -> Result<Self, ModelError> {
        if m == 0 || b == 0 {
            return Err(ModelError::InvalidUniverse { m, b });
        }
        if m > MAX_GOODS {
            return Err(ModelError::TooManyGoods(m));
        }
        Ok(GoodUniverse { m, b })
    }

    /// Single-supply universe.
    pub fn single(m: usize) -> Result<Self, ModelError> {
        Self::new(m, 1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn supply(&self) -> u32 {
        self.b
    }

    pub fn all_goods(&self) -> Bundle {
        Bundle::full(self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demand {
    #[serde(rename = "set")]
    pub bundle: Bundle,
    #[serde(with = "serde_rational")]
    pub value: Rational,
}

impl Demand {
    pub fn new(bundle: Bundle, value: Rational) -> Self {
        Demand { bundle, value }
    }
}

/// An XOR bid: an ordered list of distinct nonempty bundles with values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Declaration {
    demands: Vec<Demand>,
}

impl Declaration {
    pub fn new(demands: Vec<Demand>) -> Result<Self, ModelError> {
        for (i, d) in demands.iter().enumerate() {
            if d.bundle.is_empty() {
                return Err(ModelError::EmptyBundle);
            }
            if !is_nonnegative(&d.value) {
                return Err(ModelError::NegativeValue(d.bundle));
            }
            if demands[..i].iter().any(|e| e.bundle == d.bundle) {
                return Err(ModelError::DuplicateBundle(d.bundle));
            }
        }
        Ok(Declaration { demands })
    }

    /// Convenience constructor from `(goods, value)` pairs; panics on invalid input.
    pub fn from_pairs<I, G>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (G, Rational)>,
        G: IntoIterator<Item = usize>,
    {
        let demands = pairs.into_iter().map(|(g, v)| Demand::new(Bundle::from_goods(g), v)).collect();
        Declaration::new(demands).expect("invalid declaration")
    }

    pub fn empty() -> Self {
        Declaration::default()
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    /// Declared value of a bundle in the list, if it is listed.
    pub fn value_of(&self, bundle: Bundle) -> Option<Rational> {
        self.demands.iter().find(|d| d.bundle == bundle).map(|d| d.value)
    }

    pub fn position(&self, bundle: Bundle) -> Option<usize> {
        self.demands.iter().position(|d| d.bundle == bundle)
    }

    pub fn declares(&self, bundle: Bundle) -> bool {
        self.position(bundle).is_some()
    }

    pub fn max_value(&self) -> Rational {
        self.demands.iter().map(|d| d.value).max().unwrap_or_else(Rational::zero)
    }

    /// Values positive and pairwise distinct.
    pub fn is_strict(&self) -> bool {
        self.demands
            .iter()
            .enumerate()
            .all(|(i, d)| d.value > Rational::zero() && self.demands[..i].iter().all(|e| e.value != d.value))
    }

    /// Demand indices sorted by value descending, ties by declaration index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.demands.len()).collect();
        idx.sort_by(|&a, &b| self.demands[b].value.cmp(&self.demands[a].value).then(a.cmp(&b)));
        idx
    }

    /// Copy with the value of `bundle` replaced (the bundle must be listed).
    pub fn with_value(&self, bundle: Bundle, value: Rational) -> Option<Declaration> {
        let pos = self.position(bundle)?;
        let mut demands = self.demands.clone();
        demands[pos].value = value;
        Declaration::new(demands).ok()
    }
}

impl<'de> Deserialize<'de> for Declaration {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            demands: Vec<Demand>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Declaration::new(raw.demands).map_err(serde::de::Error::custom)
    }
}

/// Valuation of an arbitrary bundle under an XOR declaration: the best value of
/// a demanded subset, or zero.
pub fn extend_valuation(decl: &Declaration, s: Bundle) -> Rational {
    decl.demands.iter().filter(|d| d.bundle.is_subset(s)).map(|d| d.value).max().unwrap_or_else(Rational::zero)
}

/// The demanded bundle that defines the valuation of `s`: an inclusion-maximal
/// demanded subset of `s` attaining [`extend_valuation`], lexicographically
/// smallest among those. Empty when the valuation is zero.
pub fn sigma(decl: &Declaration, s: Bundle) -> Bundle {
    let best = extend_valuation(decl, s);
    if best.is_zero() {
        return Bundle::EMPTY;
    }
    let candidates: Vec<Bundle> =
        decl.demands.iter().filter(|d| d.bundle.is_subset(s) && d.value == best).map(|d| d.bundle).collect();
    candidates
        .iter()
        .copied()
        .filter(|&c| !candidates.iter().any(|&o| o != c && c.is_subset(o)))
        .min_by(|a, b| a.lex_cmp(*b))
        .unwrap_or(Bundle::EMPTY)
}

/// Whether a bidder of type `truth` who declared `declared` and received
/// `awarded` escapes a-posteriori verification, i.e. did not overbid on the
/// awarded set.
pub fn verification_allows(truth: &Declaration, declared: &Declaration, awarded: Bundle) -> bool {
    if awarded.is_empty() {
        return true;
    }
    // The declared value of sigma(awarded | declared) equals the declared
    // extension of `awarded`, and the truth values it at its own extension.
    extend_valuation(declared, awarded) <= extend_valuation(truth, awarded)
}

/// A combinatorial auction instance: a universe plus one declaration per bidder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    universe: GoodUniverse,
    declarations: Vec<Declaration>,
}

impl Instance {
    pub fn new(universe: GoodUniverse, declarations: Vec<Declaration>) -> Result<Self, ModelError> {
        for (bidder, decl) in declarations.iter().enumerate() {
            for d in decl.demands() {
                if !d.bundle.fits(universe.m()) {
                    return Err(ModelError::GoodOutOfRange { bidder, bundle: d.bundle, m: universe.m() });
                }
            }
        }
        Ok(Instance { universe, declarations })
    }

    pub fn universe(&self) -> GoodUniverse {
        self.universe
    }

    pub fn m(&self) -> usize {
        self.universe.m()
    }

    pub fn supply(&self) -> u32 {
        self.universe.supply()
    }

    pub fn n(&self) -> usize {
        self.declarations.len()
    }

    pub fn declarations(&self) -> &[Declaration] {
        &self.declarations
    }

    pub fn declaration(&self, bidder: usize) -> &Declaration {
        &self.declarations[bidder]
    }

    /// Largest number of bundles any bidder declares.
    pub fn k(&self) -> usize {
        self.declarations.iter().map(Declaration::len).max().unwrap_or(0)
    }

    /// Largest cardinality of a positively valued demanded bundle (0 if none).
    pub fn d(&self) -> usize {
        self.declarations
            .iter()
            .flat_map(|decl| decl.demands())
            .filter(|d| d.value > Rational::zero())
            .map(|d| d.bundle.len())
            .max()
            .unwrap_or(0)
    }

    /// `min{d, m-1}`, the dual scale of the greedy analysis.
    pub fn d_prime(&self) -> usize {
        self.d().min(self.m() - 1)
    }

    pub fn max_value(&self) -> Rational {
        self.declarations.iter().map(Declaration::max_value).max().unwrap_or_else(Rational::zero)
    }

    pub fn check_max_demands(&self, k: usize) -> Result<(), ModelError> {
        for (bidder, decl) in self.declarations.iter().enumerate() {
            if decl.len() > k {
                return Err(ModelError::TooManyDemands { bidder, len: decl.len(), k });
            }
        }
        Ok(())
    }

    /// Replaces bidder `i`'s declaration (the `(b_i, b_-i)` operation).
    pub fn with_declaration(&self, bidder: usize, decl: Declaration) -> Result<Instance, ModelError> {
        let mut declarations = self.declarations.clone();
        declarations[bidder] = decl;
        Instance::new(self.universe, declarations)
    }

    pub fn empty_allocation(&self) -> Allocation {
        Allocation::empty(self.n())
    }

    pub fn from_json(text: &str) -> Result<Instance, ModelError> {
        let raw: RawInstance = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        let universe = GoodUniverse::new(raw.m, raw.b)?;
        let declarations =
            raw.bidders.into_iter().map(|b| Declaration::new(b.demands)).collect::<Result<Vec<_>, _>>()?;
        Instance::new(universe, declarations)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct RawBidder {
    demands: Vec<Demand>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    m: usize,
    #[serde(default = "default_supply")]
    b: u32,
    bidders: Vec<RawBidder>,
}

fn default_supply() -> u32 {
    1
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawInstance {
            m: self.m(),
            b: self.supply(),
            bidders: self.declarations.iter().map(|d| RawBidder { demands: d.demands().to_vec() }).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawInstance::deserialize(deserializer)?;
        let universe = GoodUniverse::new(raw.m, raw.b).map_err(serde::de::Error::custom)?;
        let declarations = raw
            .bidders
            .into_iter()
            .map(|b| Declaration::new(b.demands))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        Instance::new(universe, declarations).map_err(serde::de::Error::custom)
    }
}

/// One bundle per bidder, empty meaning "nothing".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub awarded: Vec<Bundle>,
}

impl Allocation {
    pub fn empty(n: usize) -> Self {
        Allocation { awarded: vec![Bundle::EMPTY; n] }
    }

    pub fn get(&self, bidder: usize) -> Bundle {
        self.awarded[bidder]
    }

    pub fn set(&mut self, bidder: usize, bundle: Bundle) {
        self.awarded[bidder] = bundle;
    }

    pub fn winners(&self) -> impl Iterator<Item = usize> + '_ {
        self.awarded.iter().enumerate().filter(|(_, b)| !b.is_empty()).map(|(i, _)| i)
    }

    /// Copies of each good handed out.
    pub fn usage(&self, m: usize) -> Vec<u32> {
        let mut used = vec![0u32; m];
        for b in &self.awarded {
            for g in b.goods() {
                if g < m {
                    used[g] += 1;
                }
            }
        }
        used
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationViolation {
    #[error("allocation has {got} entries for {expected} bidders")]
    WrongLength { expected: usize, got: usize },
    #[error("good {good} is handed out {used} times with supply {supply}")]
    OverSupplied { good: usize, used: u32, supply: u32 },
    #[error("bidder {bidder} receives {bundle}, which she did not declare")]
    NotExact { bidder: usize, bundle: Bundle },
    #[error("bidder {bidder} receives {bundle}, outside the universe")]
    OutOfRange { bidder: usize, bundle: Bundle },
}

/// Checks dimension, supply and exactness.
pub fn check_allocation(instance: &Instance, alloc: &Allocation) -> Result<(), AllocationViolation> {
    if alloc.awarded.len() != instance.n() {
        return Err(AllocationViolation::WrongLength { expected: instance.n(), got: alloc.awarded.len() });
    }
    for (bidder, &bundle) in alloc.awarded.iter().enumerate() {
        if bundle.is_empty() {
            continue;
        }
        if !bundle.fits(instance.m()) {
            return Err(AllocationViolation::OutOfRange { bidder, bundle });
        }
        if !instance.declaration(bidder).declares(bundle) {
            return Err(AllocationViolation::NotExact { bidder, bundle });
        }
    }
    let supply = instance.supply();
    for (good, used) in alloc.usage(instance.m()).into_iter().enumerate() {
        if used > supply {
            return Err(AllocationViolation::OverSupplied { good, used, supply });
        }
    }
    Ok(())
}

pub fn is_feasible(instance: &Instance, alloc: &Allocation) -> bool {
    check_allocation(instance, alloc).is_ok()
}

/// Social welfare of `alloc` under the instance's declarations.
pub fn welfare(instance: &Instance, alloc: &Allocation) -> Rational {
    welfare_under(instance.declarations(), alloc)
}

/// Social welfare of `alloc` evaluated with arbitrary (e.g. true) valuations.
pub fn welfare_under(valuations: &[Declaration], alloc: &Allocation) -> Rational {
    valuations
        .iter()
        .zip(&alloc.awarded)
        .map(|(decl, &b)| extend_valuation(decl, b))
        .fold(Rational::zero(), |acc, v| acc + v)
}
