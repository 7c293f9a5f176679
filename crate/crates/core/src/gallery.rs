//! Small hand-built instances with exactly known behavior: the greedy
//! negative cycle, the deterministic and randomized lower-bound pairs, and the
//! feasibility system behind the truthful-in-expectation bound.
//!
//! Every builder recomputes its facts through the mechanisms, oracle and
//! audit code and records expected versus observed values.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::audit::{
    build_graph, check_money_implementable, check_truthful_no_money, CycleVerdict, DeclarationDomain, DeclarationGraph,
    DomainMode, EdgeMode,
};
use crate::mechanisms::{greedy, GreedyConfig, MechanismKind};
use crate::model::{welfare, Allocation, Declaration, GoodUniverse, Instance};
use crate::oracle::optimal_welfare;
use crate::rational::{format_rational, to_big, Rational};
use crate::{audit::AuditError, mechanisms::MechanismError, oracle::OracleError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GalleryError {
    #[error("delta = {delta} outside the admissible range ({range})")]
    BadDelta { delta: Rational, range: &'static str },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalleryFact {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalleryCase {
    pub name: String,
    pub parameters: Vec<(String, String)>,
    pub instances: Vec<(String, Instance)>,
    pub facts: Vec<GalleryFact>,
}

impl GalleryCase {
    fn new(name: &str) -> Self {
        GalleryCase { name: name.to_string(), parameters: Vec::new(), instances: Vec::new(), facts: Vec::new() }
    }

    fn exact(&mut self, name: &str, expected: Rational, observed: Rational) {
        self.facts.push(GalleryFact {
            name: name.to_string(),
            expected: format_rational(&expected),
            observed: format_rational(&observed),
            holds: expected == observed,
        });
    }

    fn text(&mut self, name: &str, expected: String, observed: String) {
        let holds = expected == observed;
        self.facts.push(GalleryFact { name: name.to_string(), expected, observed, holds });
    }

    fn approx(&mut self, name: &str, expected: f64, observed: f64, tol: f64) {
        self.facts.push(GalleryFact {
            name: name.to_string(),
            expected: format!("{expected:.15}"),
            observed: format!("{observed:.15}"),
            holds: (expected - observed).abs() <= tol,
        });
    }

    pub fn all_hold(&self) -> bool {
        self.facts.iter().all(|f| f.holds)
    }

    pub fn fact(&self, name: &str) -> Option<&GalleryFact> {
        self.facts.iter().find(|f| f.name == name)
    }

    pub fn instance(&self, label: &str) -> Option<&Instance> {
        self.instances.iter().find(|(l, _)| l == label).map(|(_, i)| i)
    }
}

fn int(v: i128) -> Rational {
    Rational::from_integer(v)
}

fn two_goods(decls: Vec<Declaration>) -> Instance {
    Instance::new(GoodUniverse::single(2).expect("two goods"), decls).expect("goods a=0, b=1")
}

// Goods: a = 0, b = 1.
fn decl(pairs: &[(&[usize], Rational)]) -> Declaration {
    Declaration::from_pairs(pairs.iter().map(|(g, v)| (g.iter().copied(), *v)))
}

fn alloc_text(a: &Allocation) -> String {
    a.awarded.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
}

fn check_delta(delta: Rational, hi: Rational, range: &'static str) -> Result<(), GalleryError> {
    if delta <= Rational::zero() || delta >= hi {
        return Err(GalleryError::BadDelta { delta, range });
    }
    Ok(())
}

/// Bidder 1's three declarations `v1, v1', v1''` and the fixed bidder 2.
pub fn prop10_declarations(delta: Rational) -> (Vec<Declaration>, Declaration) {
    let one = int(1);
    let v1 = decl(&[(&[0], one - delta), (&[1], int(0))]);
    let v1p = decl(&[(&[0], one + delta), (&[1], one)]);
    let v1pp = decl(&[(&[0], one - delta), (&[1], one - delta * int(2))]);
    (vec![v1, v1p, v1pp], decl(&[(&[0], one)]))
}

/// Greedy's declaration graph for bidder 1 over `{v1, v1', v1''}`.
pub fn prop10_graph(delta: Rational, mode: EdgeMode) -> Result<DeclarationGraph, GalleryError> {
    let (vs, other) = prop10_declarations(delta);
    let context = two_goods(vec![vs[0].clone(), other]);
    let domain = DeclarationDomain::new(0, DomainMode::Known, vs)?;
    Ok(build_graph(&MechanismKind::Greedy(GreedyConfig::default()), &context, &domain, mode)?)
}

/// The three-instance family on which greedy admits no payments.
pub fn prop10_triple(delta: Rational) -> Result<GalleryCase, GalleryError> {
    check_delta(delta, Rational::new(1, 2), "0 < delta < 1/2")?;
    let mut case = GalleryCase::new("prop10");
    case.parameters.push(("delta".into(), format_rational(&delta)));
    case.parameters.push(("include_zero_bids".into(), "true".into()));
    let (vs, other) = prop10_declarations(delta);
    let labels = ["I", "I'", "I''"];
    let expected_allocs = ["{1} {0}", "{0} {}", "{1} {0}"];
    for ((label, v), expected) in labels.iter().zip(&vs).zip(expected_allocs) {
        let inst = two_goods(vec![v.clone(), other.clone()]);
        let (alloc, _) = greedy(&inst, GreedyConfig::default())?;
        case.text(&format!("greedy {label}"), expected.to_string(), alloc_text(&alloc));
        case.instances.push((label.to_string(), inst));
    }

    let complete = prop10_graph(delta, EdgeMode::Complete)?;
    let one = int(1);
    let arcs = [
        ("weight v1->v1'", 0, 1, -(one - delta)),
        ("weight v1'->v1''", 1, 2, delta),
        ("weight v1''->v1", 2, 0, int(0)),
    ];
    for (name, a, b, w) in arcs {
        case.exact(name, w, complete.weight(a, b).expect("complete graph"));
    }
    let cycle_expected = -(one - delta * int(2));
    match check_money_implementable(&complete) {
        CycleVerdict::NegativeCycle { total, vertices, .. } => {
            // v1 <-> v1' already closes a cycle of the same total, so the
            // shortest witness has two vertices.
            let three =
                complete.weight(0, 1).unwrap() + complete.weight(1, 2).unwrap() + complete.weight(2, 0).unwrap();
            case.exact("cycle v1->v1'->v1''->v1", cycle_expected, three);
            case.text("negative cycle found", "true".into(), "true".into());
            case.text(
                "witness cycle",
                "0 1".into(),
                vertices.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            );
            case.exact("witness total", cycle_expected, total);
        }
        CycleVerdict::Ok => case.text("negative cycle found", "true".into(), "false".into()),
    }

    let verification = prop10_graph(delta, EdgeMode::Verification)?;
    case.text("verification arc v1->v1' present", "false".into(), verification.weight(0, 1).is_some().to_string());
    case.text(
        "verification graph free of negative arcs",
        "true".into(),
        check_truthful_no_money(&verification)?.is_ok().to_string(),
    );
    Ok(case)
}

/// Two 2-minded instances forcing ratio `(2+δ)/(1+δ)` on a truthful rule.
pub fn thm11_pair(delta: Rational) -> Result<GalleryCase, GalleryError> {
    check_delta(delta, int(1), "0 < delta < 1")?;
    let one = int(1);
    let mut case = GalleryCase::new("thm11");
    case.parameters.push(("delta".into(), format_rational(&delta)));
    let b1 = decl(&[(&[0], one + delta), (&[1], one)]);
    let first = two_goods(vec![b1.clone(), b1.clone()]);
    let second = two_goods(vec![b1, decl(&[(&[0], one + delta), (&[1], int(0))])]);
    for (label, inst) in [("instance 1", &first), ("instance 2", &second)] {
        let (opt, _) = optimal_welfare(inst)?;
        case.exact(&format!("OPT {label}"), int(2) + delta, opt);
    }
    let (alloc, _) = greedy(&second, GreedyConfig::default())?;
    let w = welfare(&second, &alloc);
    case.exact("greedy welfare instance 2", one + delta, w);
    case.exact("greedy ratio instance 2", (int(2) + delta) / (one + delta), (int(2) + delta) / w);
    case.instances.push(("instance 1".into(), first));
    case.instances.push(("instance 2".into(), second));
    Ok(case)
}

/// Two equiprobable instances bounding universally truthful rules.
pub fn thm12_pair(delta: Rational) -> Result<GalleryCase, GalleryError> {
    check_delta(delta, int(1), "0 < delta < 1")?;
    let mut case = GalleryCase::new("thm12");
    case.parameters.push(("delta".into(), format_rational(&delta)));
    let bidder2 = decl(&[(&[0], int(1))]);
    let first = two_goods(vec![decl(&[(&[0, 1], int(2)), (&[1], int(0))]), bidder2.clone()]);
    let second = two_goods(vec![decl(&[(&[0, 1], int(2)), (&[1], int(2) - delta)]), bidder2]);
    let mut opt_sum = Rational::zero();
    let mut greedy_sum = Rational::zero();
    for (label, inst, opt_expected) in [("I", &first, int(2)), ("I'", &second, int(3) - delta)] {
        let (opt, _) = optimal_welfare(inst)?;
        case.exact(&format!("OPT {label}"), opt_expected, opt);
        let (alloc, _) = greedy(inst, GreedyConfig::default())?;
        case.text(&format!("greedy {label}"), "{0,1} {}".into(), alloc_text(&alloc));
        opt_sum += opt;
        greedy_sum += welfare(inst, &alloc);
    }
    let half = Rational::new(1, 2);
    case.exact("expected OPT", (int(5) - delta) / int(2), opt_sum * half);
    case.exact("greedy expected welfare", int(2), greedy_sum * half);
    case.exact("greedy expected-welfare ratio", (int(5) - delta) / int(4), opt_sum / greedy_sum);
    case.instances.push(("I".into(), first));
    case.instances.push(("I'".into(), second));
    Ok(case)
}

/// Consecutive Fibonacci numbers `F41 / F40`, within `5e-17` of the golden ratio.
pub fn golden_ratio() -> Rational {
    Rational::new(165_580_141, 102_334_155)
}

/// The golden-ratio pair behind the truthful-in-expectation bound.
pub fn thm13_pair() -> Result<GalleryCase, GalleryError> {
    let phi = golden_ratio();
    let exact_phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut case = GalleryCase::new("thm13");
    case.parameters.push(("phi".into(), format_rational(&phi)));
    let bidder2 = decl(&[(&[0], int(1))]);
    let first = two_goods(vec![decl(&[(&[0, 1], phi), (&[1], int(0))]), bidder2.clone()]);
    let second = two_goods(vec![decl(&[(&[0, 1], phi), (&[1], int(1))]), bidder2]);
    let (opt1, _) = optimal_welfare(&first)?;
    let (opt2, a2) = optimal_welfare(&second)?;
    case.approx("OPT I", exact_phi, crate::rational::to_f64(&opt1), 1e-12);
    case.exact("OPT I'", int(2), opt2);
    case.text("optimum I'", "{1} {0}".into(), alloc_text(&a2));
    case.instances.push(("I".into(), first));
    case.instances.push(("I'".into(), second));
    Ok(case)
}

/// Outcome of the two-variable feasibility system for ratio `rho`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thm13Feasibility {
    pub feasible: bool,
    /// `(p, q)`: the smallest admissible `p`, then the smallest admissible `q`.
    pub witness: Option<(BigRational, BigRational)>,
}

fn big(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// The three constraints on `(p, q) ∈ [0,1]^2` at ratio `rho`.
pub fn thm13_constraints_hold(rho: &BigRational, p: &BigRational, q: &BigRational) -> bool {
    let phi = to_big(&golden_ratio());
    let one = BigRational::one();
    let in_unit = |x: &BigRational| *x >= BigRational::zero() && *x <= one;
    in_unit(p)
        && in_unit(q)
        && *p >= (&phi - rho) / (rho * (&phi - &one))
        && &one - q >= (big(2) - rho * &phi) / (rho * (big(2) - &phi))
        && *q >= (p * &phi - &one) / (&phi - &one)
}

/// Solves the system in closed form: take `p` minimal, then check that the
/// resulting interval for `q` is nonempty.
pub fn thm13_feasibility(rho: &BigRational) -> Thm13Feasibility {
    let phi = to_big(&golden_ratio());
    let one = BigRational::one();
    let zero = BigRational::zero();
    let p = ((&phi - rho) / (rho * (&phi - &one))).max(zero.clone());
    let q_lo = ((&p * &phi - &one) / (&phi - &one)).max(zero.clone());
    let q_hi = (&one - (big(2) - rho * &phi) / (rho * (big(2) - &phi))).min(one.clone());
    let feasible = p <= one && q_lo <= q_hi;
    Thm13Feasibility { feasible, witness: feasible.then_some((p, q_lo)) }
}

/// Convenience for decimal or fractional `rho`.
pub fn thm13_feasibility_at(rho: Rational) -> Thm13Feasibility {
    thm13_feasibility(&to_big(&rho))
}
