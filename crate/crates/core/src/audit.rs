//! Declaration graphs over finite domains and the truthfulness checks built on them.
//!
//! For a fixed bidder `i` and fixed other declarations, each vertex is a
//! possible declaration of `i`. The arc `a -> b` ("type `a` reports `b`")
//! weighs `a(A_i(a)) - a(A_i(b))`, the loss of that lie measured by `a`.
//! In verification mode the arc exists only if the lie would not be caught on
//! the awarded set.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::Bundle;
use crate::mechanisms::{Mechanism, MechanismError, OutcomeDistribution};
use crate::model::{extend_valuation, sigma, verification_allows, Declaration, Demand, Instance, ModelError};
use crate::rational::{serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("declaration domain is empty")]
    EmptyDomain,
    #[error("known-mode domain mixes bundle collections (declaration {0})")]
    MixedCollections(usize),
    #[error("check needs a {expected:?}-mode graph")]
    WrongMode { expected: EdgeMode },
    #[error("check needs a {expected:?}-mode domain")]
    WrongDomainMode { expected: DomainMode },
    #[error("mechanism returned a lottery; this check needs a deterministic rule")]
    NotDeterministic,
    #[error("threshold extraction needs distinct positive true values")]
    NotStrict,
    #[error("threshold structure broken at rank {rank}: declaration {below} loses at a higher value than declaration {above} wins")]
    NotMonotoneOnGrid { rank: usize, below: usize, above: usize },
    #[error("bidder {bidder} is out of range for an instance with {n} bidders")]
    BidderOutOfRange { bidder: usize, n: usize },
    #[error("invalid domain spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// Bundle collection public; only values vary.
    Known,
    /// Collections vary as well.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    Verification,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclarationDomain {
    bidder: usize,
    mode: DomainMode,
    declarations: Vec<Declaration>,
}

fn same_collection(a: &Declaration, b: &Declaration) -> bool {
    a.len() == b.len() && a.demands().iter().all(|d| b.declares(d.bundle))
}

impl DeclarationDomain {
    pub fn new(bidder: usize, mode: DomainMode, declarations: Vec<Declaration>) -> Result<Self, AuditError> {
        let first = declarations.first().ok_or(AuditError::EmptyDomain)?;
        if mode == DomainMode::Known {
            if let Some(pos) = declarations.iter().position(|d| !same_collection(first, d)) {
                return Err(AuditError::MixedCollections(pos));
            }
        }
        Ok(DeclarationDomain { bidder, mode, declarations })
    }

    pub fn from_spec(spec: &DomainSpec) -> Result<Self, AuditError> {
        if spec.values.is_empty() || spec.pool.is_empty() {
            return Err(AuditError::EmptyDomain);
        }
        if spec.pool.iter().any(|b| b.is_empty()) {
            return Err(AuditError::Spec("empty bundle in pool".into()));
        }
        let collections: Vec<Vec<Bundle>> = match spec.mode {
            DomainMode::Known => vec![spec.pool.clone()],
            DomainMode::Unknown => {
                let k = spec.max_bundles.unwrap_or(spec.pool.len()).min(spec.pool.len());
                let p = spec.pool.len();
                if p > 16 {
                    return Err(AuditError::Spec("bundle pool larger than 16".into()));
                }
                let mut out: Vec<Vec<Bundle>> = (1u32..(1 << p))
                    .filter(|mask| (mask.count_ones() as usize) <= k)
                    .map(|mask| (0..p).filter(|j| mask >> j & 1 == 1).map(|j| spec.pool[j]).collect())
                    .collect();
                out.sort_by_key(|c: &Vec<Bundle>| c.len());
                out
            }
        };
        let mut declarations = Vec::new();
        for collection in collections {
            for values in value_assignments(&spec.values, collection.len()) {
                let demands = collection.iter().zip(&values).map(|(&b, &v)| Demand::new(b, v)).collect();
                let decl = Declaration::new(demands)?;
                if !spec.strict || decl.is_strict() {
                    declarations.push(decl);
                }
            }
        }
        DeclarationDomain::new(spec.bidder, spec.mode, declarations)
    }

    pub fn bidder(&self) -> usize {
        self.bidder
    }

    pub fn mode(&self) -> DomainMode {
        self.mode
    }

    pub fn declarations(&self) -> &[Declaration] {
        &self.declarations
    }

    pub fn len(&self) -> usize {
        self.declarations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.declarations.is_empty()
    }
}

/// All `len`-tuples over `grid`, first coordinate slowest.
pub fn value_assignments(grid: &[Rational], len: usize) -> Vec<Vec<Rational>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                grid.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out
}

/// JSON description of a grid domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub bidder: usize,
    pub mode: DomainMode,
    /// Candidate bundles. In known mode this is the collection itself.
    pub pool: Vec<Bundle>,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub values: Vec<Rational>,
    /// Largest collection size in unknown mode (default: the whole pool).
    #[serde(default)]
    pub max_bundles: Option<usize>,
    /// Keep only declarations with distinct positive values.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    #[serde(with = "serde_rational")]
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeclarationGraph {
    pub bidder: usize,
    pub mode: EdgeMode,
    pub vertices: Vec<Declaration>,
    /// Mechanism outcome with each vertex declared.
    pub outcomes: Vec<OutcomeDistribution>,
    /// Row-major `weights[from * V + to]`; `None` where the arc is absent.
    #[serde(skip)]
    weights: Vec<Option<Rational>>,
}

impl DeclarationGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<Rational> {
        self.weights[from * self.len() + to]
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        let v = self.len();
        self.weights
            .iter()
            .enumerate()
            .filter_map(move |(idx, w)| w.map(|weight| Arc { from: idx / v, to: idx % v, weight }))
    }

    pub fn arc_count(&self) -> usize {
        self.weights.iter().filter(|w| w.is_some()).count()
    }
}

/// Runs `mechanism` once per domain declaration, substituted for the
/// domain's bidder in `context`, and assembles the graph.
pub fn build_graph(
    mechanism: &dyn Mechanism,
    context: &Instance,
    domain: &DeclarationDomain,
    mode: EdgeMode,
) -> Result<DeclarationGraph, AuditError> {
    let bidder = domain.bidder();
    if bidder >= context.n() {
        return Err(AuditError::BidderOutOfRange { bidder, n: context.n() });
    }
    let outcomes = domain
        .declarations()
        .iter()
        .map(|decl| {
            let inst = context.with_declaration(bidder, decl.clone())?;
            Ok(mechanism.run(&inst)?)
        })
        .collect::<Result<Vec<_>, AuditError>>()?;
    Ok(assemble(bidder, domain.declarations().to_vec(), outcomes, mode))
}

fn assemble(
    bidder: usize,
    vertices: Vec<Declaration>,
    outcomes: Vec<OutcomeDistribution>,
    mode: EdgeMode,
) -> DeclarationGraph {
    let v = vertices.len();
    let mut weights = vec![None; v * v];
    for a in 0..v {
        let truthful = outcomes[a].expected_value(bidder, &vertices[a]);
        for b in 0..v {
            let allowed = mode == EdgeMode::Complete
                || outcomes[b]
                    .support
                    .iter()
                    .all(|e| verification_allows(&vertices[a], &vertices[b], e.allocation.get(bidder)));
            if allowed {
                weights[a * v + b] = Some(truthful - outcomes[b].expected_value(bidder, &vertices[a]));
            }
        }
    }
    DeclarationGraph { bidder, mode, vertices, outcomes, weights }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EdgeVerdict {
    Ok,
    Violation { arc: Arc },
}

impl EdgeVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, EdgeVerdict::Ok)
    }
}

/// No negative arc in the verification graph. The witness is the most negative
/// arc, lowest `(from, to)` on ties.
pub fn check_truthful_no_money(graph: &DeclarationGraph) -> Result<EdgeVerdict, AuditError> {
    if graph.mode != EdgeMode::Verification {
        return Err(AuditError::WrongMode { expected: EdgeMode::Verification });
    }
    let worst = graph.arcs().filter(|a| a.weight < Rational::zero()).fold(None::<Arc>, |best, arc| match best {
        Some(b) if b.weight <= arc.weight => Some(b),
        _ => Some(arc),
    });
    Ok(worst.map_or(EdgeVerdict::Ok, |arc| EdgeVerdict::Violation { arc }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CycleVerdict {
    Ok,
    NegativeCycle {
        /// Vertices in traversal order, starting at the smallest index.
        vertices: Vec<usize>,
        arcs: Vec<Arc>,
        #[serde(with = "serde_rational")]
        total: Rational,
    },
}

impl CycleVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, CycleVerdict::Ok)
    }
}

fn has_negative_cycle(graph: &DeclarationGraph) -> bool {
    let v = graph.len();
    let arcs: Vec<Arc> = graph.arcs().collect();
    let mut dist = vec![Rational::zero(); v];
    for _ in 0..v {
        let mut changed = false;
        for a in &arcs {
            let cand = dist[a.from] + a.weight;
            if cand < dist[a.to] {
                dist[a.to] = cand;
                changed = true;
            }
        }
        if !changed {
            return false;
        }
    }
    arcs.iter().any(|a| dist[a.from] + a.weight < dist[a.to])
}

/// Bellman-Ford test for a negative cycle. When one exists, the witness has
/// the fewest arcs, then the smallest total, then the lexicographically
/// smallest vertex sequence among rotations starting at the minimum vertex.
pub fn check_money_implementable(graph: &DeclarationGraph) -> CycleVerdict {
    if !has_negative_cycle(graph) {
        return CycleVerdict::Ok;
    }
    let v = graph.len();
    // dist[s][u]: lightest walk of exactly `len` arcs from s to u through vertices >= s.
    let mut dist: Vec<Vec<Option<Rational>>> =
        (0..v).map(|s| (0..v).map(|u| (u == s).then(Rational::zero)).collect()).collect();
    let mut pred: Vec<Vec<Vec<usize>>> = vec![Vec::new(); v];
    for len in 1..=v {
        let mut best: Option<(Rational, Vec<usize>)> = None;
        for s in 0..v {
            let mut next = vec![None; v];
            let mut step = vec![usize::MAX; v];
            for (u, du) in dist[s].iter().enumerate().skip(s) {
                let Some(du) = *du else { continue };
                for t in s..v {
                    if let Some(w) = graph.weight(u, t) {
                        let cand = du + w;
                        if next[t].map_or(true, |c| cand < c) {
                            next[t] = Some(cand);
                            step[t] = u;
                        }
                    }
                }
            }
            pred[s].push(step);
            dist[s] = next;
            if let Some(total) = dist[s][s] {
                if total < Rational::zero() {
                    let mut path = vec![s];
                    let mut cur = s;
                    for l in (1..len).rev() {
                        cur = pred[s][l][cur];
                        path.push(cur);
                    }
                    path.reverse();
                    // path now s .. ending before the closing return to s
                    path.rotate_right(1);
                    let better = match &best {
                        None => true,
                        Some((bt, bp)) => total < *bt || (total == *bt && path < *bp),
                    };
                    if better {
                        best = Some((total, path));
                    }
                }
            }
        }
        if let Some((total, vertices)) = best {
            let arcs = (0..vertices.len())
                .map(|j| {
                    let from = vertices[j];
                    let to = vertices[(j + 1) % vertices.len()];
                    Arc { from, to, weight: graph.weight(from, to).expect("cycle uses existing arcs") }
                })
                .collect();
            return CycleVerdict::NegativeCycle { vertices, arcs, total };
        }
    }
    unreachable!("Bellman-Ford found a negative cycle, so one of length <= V exists")
}

/// Result of a direct monotonicity check, with the graph cross-check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonotonicityReport {
    /// `(a, b, S, U)`: declaring `a` wins `S`; `b` values `S` through `U` at
    /// least as much as `a` does but `A_i(b)` is worth less than `U` to `b`.
    pub violation: Option<(usize, usize, Bundle, Bundle)>,
    /// Verdict of the negative-arc test on the verification graph.
    pub graph_ok: bool,
}

impl MonotonicityReport {
    pub fn is_ok(&self) -> bool {
        self.violation.is_none()
    }

    /// Whether the direct check and the graph test agree.
    pub fn agrees(&self) -> bool {
        self.is_ok() == self.graph_ok
    }
}

fn deterministic_outcomes(graph: &DeclarationGraph) -> Result<Vec<Bundle>, AuditError> {
    graph
        .outcomes
        .iter()
        .map(|o| o.deterministic().map(|a| a.get(graph.bidder)).ok_or(AuditError::NotDeterministic))
        .collect()
}

fn set_monotone_violation(graph: &DeclarationGraph) -> Result<Option<(usize, usize, Bundle, Bundle)>, AuditError> {
    let won = deterministic_outcomes(graph)?;
    let decls = &graph.vertices;
    for a in 0..decls.len() {
        let t = won[a];
        for b in 0..decls.len() {
            let u = sigma(&decls[b], t);
            let w_u = extend_valuation(&decls[b], u);
            if w_u >= extend_valuation(&decls[a], t) && extend_valuation(&decls[b], won[b]) < w_u {
                return Ok(Some((a, b, t, u)));
            }
        }
    }
    Ok(None)
}

/// Direct `k`-monotonicity check on a known-bidder domain, cross-checked
/// against the verification graph.
pub fn check_k_monotone(
    mechanism: &dyn Mechanism,
    context: &Instance,
    domain: &DeclarationDomain,
) -> Result<MonotonicityReport, AuditError> {
    if domain.mode() != DomainMode::Known {
        return Err(AuditError::WrongDomainMode { expected: DomainMode::Known });
    }
    let graph = build_graph(mechanism, context, domain, EdgeMode::Verification)?;
    let won = deterministic_outcomes(&graph)?;
    let decls = &graph.vertices;
    let mut violation = None;
    'outer: for a in 0..decls.len() {
        let s = won[a];
        for b in 0..decls.len() {
            let b_s = extend_valuation(&decls[b], s);
            if b_s >= extend_valuation(&decls[a], s) && extend_valuation(&decls[b], won[b]) < b_s {
                violation = Some((a, b, s, s));
                break 'outer;
            }
        }
    }
    Ok(MonotonicityReport { violation, graph_ok: check_truthful_no_money(&graph)?.is_ok() })
}

/// Direct `k`-set-monotonicity check on an unknown-bidder domain,
/// cross-checked against the verification graph.
pub fn check_k_set_monotone(
    mechanism: &dyn Mechanism,
    context: &Instance,
    domain: &DeclarationDomain,
) -> Result<MonotonicityReport, AuditError> {
    if domain.mode() != DomainMode::Unknown {
        return Err(AuditError::WrongDomainMode { expected: DomainMode::Unknown });
    }
    let graph = build_graph(mechanism, context, domain, EdgeMode::Verification)?;
    Ok(MonotonicityReport {
        violation: set_monotone_violation(&graph)?,
        graph_ok: check_truthful_no_money(&graph)?.is_ok(),
    })
}

/// Grid evidence for one threshold: `lo <= Θ <= hi` where observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThresholdBracket {
    pub rank: usize,
    pub bundle: Bundle,
    /// Largest grid value of the rank-`j` bundle at which neither it nor a
    /// better-ranked bundle was won. `None`: never observed.
    #[serde(with = "opt_rational")]
    pub lo: Option<Rational>,
    /// Smallest grid value at which the rank-`j` bundle was won.
    #[serde(with = "opt_rational")]
    pub hi: Option<Rational>,
}

mod opt_rational {
    use super::*;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&crate::rational::format_rational(r)),
            None => s.serialize_none(),
        }
    }
}

/// Scans every assignment of `grid` values to the true collection of `truth`
/// and brackets each rank's threshold.
pub fn extract_thresholds(
    mechanism: &dyn Mechanism,
    context: &Instance,
    bidder: usize,
    truth: &Declaration,
    grid: &[Rational],
) -> Result<Vec<ThresholdBracket>, AuditError> {
    if !truth.is_strict() {
        return Err(AuditError::NotStrict);
    }
    let ranked: Vec<Bundle> = truth.ranked().into_iter().map(|j| truth.demands()[j].bundle).collect();
    let collection: Vec<Bundle> = truth.demands().iter().map(|d| d.bundle).collect();
    let mut decls = Vec::new();
    for values in value_assignments(grid, collection.len()) {
        let demands = collection.iter().zip(&values).map(|(&b, &v)| Demand::new(b, v)).collect();
        decls.push(Declaration::new(demands)?);
    }
    let domain = DeclarationDomain::new(bidder, DomainMode::Known, decls)?;
    let graph = build_graph(mechanism, context, &domain, EdgeMode::Verification)?;
    let won = deterministic_outcomes(&graph)?;
    // 1-based rank of sigma(won | truth); 0 for nothing.
    let got: Vec<usize> = won
        .iter()
        .map(|&s| {
            let defining = sigma(truth, s);
            ranked.iter().position(|&b| b == defining).map_or(0, |p| p + 1)
        })
        .collect();

    let mut out = Vec::with_capacity(ranked.len());
    for (j0, &bundle) in ranked.iter().enumerate() {
        let rank = j0 + 1;
        let value_at = |x: usize| graph.vertices[x].value_of(bundle).expect("same collection");
        let mut lo: Option<(Rational, usize)> = None;
        let mut hi: Option<(Rational, usize)> = None;
        for (x, &g) in got.iter().enumerate() {
            let v = value_at(x);
            if g == rank && hi.map_or(true, |(h, _)| v < h) {
                hi = Some((v, x));
            }
            if (g == 0 || g > rank) && lo.map_or(true, |(l, _)| v > l) {
                lo = Some((v, x));
            }
        }
        if let (Some((l, below)), Some((h, above))) = (lo, hi) {
            if l > h {
                return Err(AuditError::NotMonotoneOnGrid { rank, below, above });
            }
        }
        out.push(ThresholdBracket { rank, bundle, lo: lo.map(|x| x.0), hi: hi.map(|x| x.0) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{FnMechanism, GreedyConfig, MechanismKind};
    use crate::model::{Allocation, GoodUniverse};
    use crate::rational::from_integer as int;

    fn greedy() -> MechanismKind {
        MechanismKind::Greedy(GreedyConfig::default())
    }

    #[test]
    fn singleton_domain_has_zero_self_loop() {
        let ctx = Instance::new(GoodUniverse::single(1).unwrap(), vec![Declaration::from_pairs([(vec![0], int(1))])])
            .unwrap();
        let dom = DeclarationDomain::new(0, DomainMode::Known, vec![ctx.declaration(0).clone()]).unwrap();
        let g = build_graph(&greedy(), &ctx, &dom, EdgeMode::Verification).unwrap();
        assert_eq!(g.weight(0, 0), Some(int(0)));
        assert!(check_truthful_no_money(&g).unwrap().is_ok());
        assert!(check_money_implementable(&g).is_ok());
    }

    #[test]
    fn constant_mechanism_is_truthful() {
        let nothing = FnMechanism { name: "nothing", rule: |i: &Instance| Ok(i.empty_allocation()) };
        let ctx = Instance::new(GoodUniverse::single(2).unwrap(), vec![Declaration::empty()]).unwrap();
        let spec = DomainSpec {
            bidder: 0,
            mode: DomainMode::Unknown,
            pool: vec![Bundle::singleton(0), Bundle::from_goods([0, 1])],
            values: vec![int(1), int(2)],
            max_bundles: Some(2),
            strict: false,
        };
        let dom = DeclarationDomain::from_spec(&spec).unwrap();
        assert_eq!(dom.len(), 2 + 2 + 4);
        let g = build_graph(&nothing, &ctx, &dom, EdgeMode::Complete).unwrap();
        assert!(g.arcs().all(|a| a.weight == int(0)));
        assert!(check_money_implementable(&g).is_ok());
        assert!(matches!(check_truthful_no_money(&g), Err(AuditError::WrongMode { .. })));
        let report = check_k_set_monotone(&nothing, &ctx, &dom).unwrap();
        assert!(report.is_ok() && report.agrees());
    }

    /// Awards `{0,1}` whenever it is declared and nothing otherwise, so a
    /// bidder who only wants `{0}` gains by also claiming `{0,1}`.
    fn superset_rewarding() -> FnMechanism<impl Fn(&Instance) -> Result<Allocation, MechanismError> + Sync> {
        FnMechanism {
            name: "superset",
            rule: |i: &Instance| {
                let mut a = i.empty_allocation();
                let decl = i.declaration(0);
                let big = Bundle::from_goods([0, 1]);
                if decl.declares(big) {
                    a.set(0, big);
                }
                Ok(a)
            },
        }
    }

    #[test]
    fn superset_reward_is_caught() {
        let mech = superset_rewarding();
        let ctx = Instance::new(GoodUniverse::single(2).unwrap(), vec![Declaration::empty()]).unwrap();
        let spec = DomainSpec {
            bidder: 0,
            mode: DomainMode::Unknown,
            pool: vec![Bundle::singleton(0), Bundle::from_goods([0, 1])],
            values: vec![int(1), int(2)],
            max_bundles: Some(2),
            strict: false,
        };
        let dom = DeclarationDomain::from_spec(&spec).unwrap();
        let report = check_k_set_monotone(&mech, &ctx, &dom).unwrap();
        assert!(!report.is_ok());
        assert!(report.agrees());
    }

    #[test]
    fn threshold_against_single_competitor() {
        let ctx = Instance::new(
            GoodUniverse::single(1).unwrap(),
            vec![Declaration::empty(), Declaration::from_pairs([(vec![0], int(5))])],
        )
        .unwrap();
        let truth = Declaration::from_pairs([(vec![0], int(7))]);
        let grid: Vec<Rational> = (1..=10).map(int).collect();
        let t = extract_thresholds(&greedy(), &ctx, 0, &truth, &grid).unwrap();
        assert_eq!(t[0].lo, Some(int(4)));
        assert_eq!(t[0].hi, Some(int(5)));

        let alone = Instance::new(GoodUniverse::single(1).unwrap(), vec![Declaration::empty()]).unwrap();
        let t = extract_thresholds(&greedy(), &alone, 0, &truth, &grid).unwrap();
        assert_eq!(t[0].lo, None);
        assert_eq!(t[0].hi, Some(int(1)));
    }

    #[test]
    fn cycle_search_prefers_short_cycles() {
        let vertices = vec![Declaration::empty(); 3];
        let mut g =
            assemble(0, vertices, vec![OutcomeDistribution::certain(Allocation::empty(1)); 3], EdgeMode::Complete);
        for w in g.weights.iter_mut() {
            *w = Some(int(0));
        }
        let set = |g: &mut DeclarationGraph, a: usize, b: usize, w: i128| g.weights[a * 3 + b] = Some(int(w));
        set(&mut g, 2, 1, -1);
        set(&mut g, 1, 2, -1);
        set(&mut g, 0, 1, -5);
        match check_money_implementable(&g) {
            CycleVerdict::NegativeCycle { vertices, total, .. } => {
                // (0 -> 1 -> 0) totals -5, shorter cycles do not exist, and it beats (1 -> 2 -> 1) at -2
                assert_eq!(vertices, vec![0, 1]);
                assert_eq!(total, int(-5));
            }
            CycleVerdict::Ok => panic!("expected a cycle"),
        }
    }
}
