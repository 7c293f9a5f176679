//! Truthful combinatorial auctions without money under a-posteriori verification.

pub mod audit;
pub mod bundle;
pub mod gallery;
pub mod harness;
pub mod mechanisms;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod surd;

pub use bundle::{Bundle, MAX_GOODS};
pub use mechanisms::{Mechanism, MechanismError, MechanismKind, OutcomeDistribution};
pub use model::{
    check_allocation, extend_valuation, is_feasible, sigma, verification_allows, welfare, welfare_under, Allocation,
    AllocationViolation, Declaration, Demand, GoodUniverse, Instance, ModelError,
};
pub use oracle::{greedy_dual_certificate, optimal_welfare, DualCertificate, OracleError};
pub use rational::{format_rational, parse_rational, Rational};
