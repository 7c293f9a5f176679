//! Multiplicative price-update mechanisms.
//!
//! Every good starts at price `p0 = mu / (4bm)`. Bidders are visited once; each
//! picks her most valuable demanded bundle whose current price sum she can
//! afford, and the price of every good in that bundle is multiplied by
//! `r = base^{1/b}`. Prices are kept as exponents `ℓ_e` so that
//! `p_e = p0 · r^{ℓ_e}` and all comparisons are exact.

use std::cmp::Ordering;

use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::coins::CoinSource;
use super::MechanismError;
use crate::bundle::Bundle;
use crate::model::{Allocation, Instance};
use crate::rational::{serde_rational, to_big, to_f64, Rational};
use crate::surd::{RadicalField, Surd};

/// Default `ε` for the max-bidder variants: `2^-10`.
pub fn default_eps() -> Rational {
    Rational::new(1, 1024)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceParams {
    pub mu: Rational,
    /// `r = rate_base^{1/b}`.
    pub rate_base: u64,
    /// Track remaining supply and only offer bundles inside goods still available.
    pub supply_tracking: bool,
    /// Visit the bidder with the largest declared value first.
    pub max_bidder_first: bool,
    /// Award each chosen bundle (other than the max bidder's) with this probability.
    pub rounding: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceTrace {
    #[serde(with = "serde_rational")]
    pub mu: Rational,
    #[serde(with = "serde_rational")]
    pub p0: Rational,
    pub rate_base: u64,
    pub root: u32,
    /// Bidders in processing order.
    pub order: Vec<usize>,
    /// `levels[t][e]`: copies of good `e` sold before step `t`; one extra final row.
    pub levels: Vec<Vec<u32>>,
    /// Bundle chosen at each step (the virtual allocation), empty if none.
    pub chosen: Vec<Bundle>,
    /// Whether the chosen bundle was actually handed out.
    pub awarded: Vec<bool>,
    /// Remaining supply at the end, if tracked.
    pub supply_left: Option<Vec<u32>>,
}

impl PriceTrace {
    /// Final exponents `ℓ_e^*`.
    pub fn final_levels(&self) -> &[u32] {
        self.levels.last().expect("trace always has a final row")
    }

    pub fn rate(&self) -> f64 {
        (self.rate_base as f64).powf(1.0 / f64::from(self.root))
    }

    /// Final prices `p_e^* = p0 · r^{ℓ_e^*}` (approximate, for reporting).
    pub fn final_prices(&self) -> Vec<f64> {
        let p0 = to_f64(&self.p0);
        let r = self.rate();
        self.final_levels().iter().map(|&l| p0 * r.powi(l as i32)).collect()
    }

    /// The virtual allocation `S` indexed by bidder.
    pub fn virtual_allocation(&self, n: usize) -> Allocation {
        let mut alloc = Allocation::empty(n);
        for (&bidder, &bundle) in self.order.iter().zip(&self.chosen) {
            alloc.set(bidder, bundle);
        }
        alloc
    }

    fn field(&self) -> RadicalField {
        RadicalField::new(self.rate_base, self.root)
    }
}

/// `1 / (2e · d^{1/b} · log2(4bm))`.
pub fn rounding_probability(d: usize, b: u32, m: usize) -> f64 {
    let d = d.max(1) as f64;
    let log = (4.0 * f64::from(b) * m as f64).log2();
    1.0 / (2.0 * std::f64::consts::E * d.powf(1.0 / f64::from(b)) * log)
}

/// Largest declared value and the lowest-index bidder holding it.
pub fn max_bidder(instance: &Instance) -> Option<(usize, Rational)> {
    let mut best: Option<(usize, Rational)> = None;
    for (i, decl) in instance.declarations().iter().enumerate() {
        let v = decl.max_value();
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.filter(|(_, v)| *v > Rational::zero())
}

fn price_sum(field: &RadicalField, levels: &[u32], bundle: Bundle) -> Surd {
    bundle.goods().fold(field.zero(), |acc, e| field.add(&acc, &field.generator_pow(u64::from(levels[e]))))
}

/// Runs the price-update loop with explicit parameters.
pub fn run_price_update(
    instance: &Instance,
    params: &PriceParams,
    coins: &mut dyn CoinSource,
) -> Result<(Allocation, PriceTrace), MechanismError> {
    let n = instance.n();
    let m = instance.m();
    let b = instance.supply();
    let four_bm = 4 * i128::from(b) * m as i128;
    let p0 = params.mu / Rational::from_integer(four_bm);
    if p0 <= Rational::zero() {
        return Err(MechanismError::MuOutOfRange { mu: params.mu, v_max: instance.max_value() });
    }
    let field = RadicalField::new(params.rate_base, b);
    let p0_big = to_big(&p0);

    let first =
        if params.max_bidder_first { Some(max_bidder(instance).ok_or(MechanismError::EmptyInstance)?.0) } else { None };
    let order: Vec<usize> = first.into_iter().chain((0..n).filter(|&i| Some(i) != first)).collect();

    let mut levels = vec![0u32; m];
    let mut supply = vec![b; m];
    let mut alloc = instance.empty_allocation();
    let mut trace = PriceTrace {
        mu: params.mu,
        p0,
        rate_base: params.rate_base,
        root: b,
        order: order.clone(),
        levels: Vec::with_capacity(n + 1),
        chosen: Vec::with_capacity(n),
        awarded: Vec::with_capacity(n),
        supply_left: None,
    };

    for &bidder in &order {
        trace.levels.push(levels.clone());
        let available = if params.supply_tracking {
            Bundle::from_goods((0..m).filter(|&e| supply[e] > 0))
        } else {
            Bundle::full(m)
        };
        let mut choice: Option<(Bundle, Rational)> = None;
        for d in instance.declaration(bidder).demands() {
            if !d.bundle.is_subset(available) || d.value.is_zero() {
                continue;
            }
            if choice.is_some_and(|(_, v)| d.value <= v) {
                continue;
            }
            let price = field.scale(&price_sum(&field, &levels, d.bundle), &p0_big);
            if field.cmp(&field.from_rational(to_big(&d.value)), &price) != Ordering::Less {
                choice = Some((d.bundle, d.value));
            }
        }
        let chosen = choice.map_or(Bundle::EMPTY, |(s, _)| s);
        for e in chosen.goods() {
            levels[e] += 1;
        }
        let awarded = match params.rounding {
            Some(q) if Some(bidder) != first => coins.flip(q)?,
            _ => true,
        };
        if awarded && !chosen.is_empty() {
            alloc.set(bidder, chosen);
            for e in chosen.goods() {
                supply[e] = supply[e].saturating_sub(1);
            }
        }
        trace.chosen.push(chosen);
        trace.awarded.push(awarded && !chosen.is_empty());
    }
    trace.levels.push(levels);
    if params.supply_tracking {
        trace.supply_left = Some(supply);
    }
    Ok((alloc, trace))
}

fn check_mu(instance: &Instance, mu: Rational) -> Result<(), MechanismError> {
    let v_max = instance.max_value();
    if mu / Rational::from_integer(2) <= v_max && v_max < mu {
        Ok(())
    } else {
        Err(MechanismError::MuOutOfRange { mu, v_max })
    }
}

fn mu_from_eps(instance: &Instance, eps: Rational) -> Result<Rational, MechanismError> {
    if eps <= Rational::zero() || eps >= Rational::one() {
        return Err(MechanismError::InvalidEpsilon(eps));
    }
    let (_, v) = max_bidder(instance).ok_or(MechanismError::EmptyInstance)?;
    Ok((Rational::one() + eps) * v)
}

fn four_bm(instance: &Instance) -> u64 {
    4 * u64::from(instance.supply()) * instance.m() as u64
}

/// Fixed-order price update with `r = (4bm)^{1/b}`; requires `mu/2 <= v_max < mu`.
pub fn mpu(instance: &Instance, mu: Rational) -> Result<(Allocation, PriceTrace), MechanismError> {
    mpu_with_rate(instance, mu, four_bm(instance))
}

/// Fixed-order price update with `r = rate_base^{1/b}` and no supply cap.
///
/// With `rate_base = 2` this is the overselling variant whose copy count is
/// bounded logarithmically.
pub fn mpu_with_rate(
    instance: &Instance,
    mu: Rational,
    rate_base: u64,
) -> Result<(Allocation, PriceTrace), MechanismError> {
    check_mu(instance, mu)?;
    let params = PriceParams { mu, rate_base, supply_tracking: false, max_bidder_first: false, rounding: None };
    run_price_update(instance, &params, &mut super::coins::AllHeads)
}

/// Max-bidder-first price update with `mu = (1+eps) v_max`.
pub fn mpu_modified(instance: &Instance, eps: Rational) -> Result<(Allocation, PriceTrace), MechanismError> {
    let mu = mu_from_eps(instance, eps)?;
    let params = PriceParams {
        mu,
        rate_base: four_bm(instance),
        supply_tracking: false,
        max_bidder_first: true,
        rounding: None,
    };
    run_price_update(instance, &params, &mut super::coins::AllHeads)
}

/// Fixed-order price update with `r = 2^{1/b}`, supply tracking and
/// randomized rounding; one coin per bidder.
pub fn mpu_rand(
    instance: &Instance,
    mu: Rational,
    coins: &mut dyn CoinSource,
) -> Result<(Allocation, PriceTrace), MechanismError> {
    check_mu(instance, mu)?;
    let d = instance.d();
    if d == 0 {
        return Err(MechanismError::EmptyInstance);
    }
    let params = PriceParams {
        mu,
        rate_base: 2,
        supply_tracking: true,
        max_bidder_first: false,
        rounding: Some(rounding_probability(d, instance.supply(), instance.m())),
    };
    run_price_update(instance, &params, coins)
}

/// Max-bidder-first variant of [`mpu_rand`]; the max bidder is always served
/// and every other bidder consumes one coin.
pub fn mpu_modified_rand(
    instance: &Instance,
    eps: Rational,
    coins: &mut dyn CoinSource,
) -> Result<(Allocation, PriceTrace), MechanismError> {
    let q = rounding_probability(instance.d(), instance.supply(), instance.m());
    mpu_modified_rand_with_q(instance, eps, q, coins)
}

pub fn mpu_modified_rand_with_q(
    instance: &Instance,
    eps: Rational,
    q: f64,
    coins: &mut dyn CoinSource,
) -> Result<(Allocation, PriceTrace), MechanismError> {
    let mu = mu_from_eps(instance, eps)?;
    let params = PriceParams { mu, rate_base: 2, supply_tracking: true, max_bidder_first: true, rounding: Some(q) };
    run_price_update(instance, &params, coins)
}

/// Outcome of the per-run price inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PriceBoundReport {
    /// `v(S)·(r-1) >= Σ p_e^* - m·p0`.
    pub revenue_bound: bool,
    /// `v(S) >= OPT - b·Σ p_e^*`, when OPT is known.
    pub opt_bound: Option<bool>,
    /// `v(S)·2(b(r-1)+1) >= OPT`, when OPT is known.
    pub ratio_bound: Option<bool>,
    /// No copy was ever sold at a price above `mu`.
    pub no_sale_above_mu: bool,
}

impl PriceBoundReport {
    pub fn all_hold(&self) -> bool {
        self.revenue_bound
            && self.opt_bound.unwrap_or(true)
            && self.ratio_bound.unwrap_or(true)
            && self.no_sale_above_mu
    }
}

/// Checks the price inequalities on the virtual allocation recorded in `trace`.
pub fn check_price_bounds(instance: &Instance, trace: &PriceTrace, opt: Option<Rational>) -> PriceBoundReport {
    let field = trace.field();
    let p0 = to_big(&trace.p0);
    let m = instance.m();
    let b = num_bigint::BigInt::from(instance.supply());
    let virtual_welfare: Rational = trace
        .order
        .iter()
        .zip(&trace.chosen)
        .map(|(&i, &s)| instance.declaration(i).value_of(s).unwrap_or_else(Rational::zero))
        .fold(Rational::zero(), |a, v| a + v);
    let v = field.from_rational(to_big(&virtual_welfare));
    let one = field.from_rational(num_rational::BigRational::one());
    let r_minus_1 = field.sub(&field.generator(), &one);

    let all_goods = Bundle::full(m);
    let total_price = field.scale(&price_sum(&field, trace.final_levels(), all_goods), &p0);
    let m_p0 = field.from_rational(p0.clone() * num_rational::BigRational::from_integer(m.into()));
    let revenue_bound = field.cmp(&field.mul(&v, &r_minus_1), &field.sub(&total_price, &m_p0)) != Ordering::Less;

    let (opt_bound, ratio_bound) = match opt {
        Some(opt) => {
            let opt_s = field.from_rational(to_big(&opt));
            let b_r = field.from_rational(num_rational::BigRational::from_integer(b.clone()));
            let rhs = field.sub(&opt_s, &field.mul(&b_r, &total_price));
            let first = field.cmp(&v, &rhs) != Ordering::Less;
            // 2(b(r-1)+1)
            let factor = field.scale(
                &field.add(&field.mul(&b_r, &r_minus_1), &one),
                &num_rational::BigRational::from_integer(2.into()),
            );
            let second = field.cmp(&field.mul(&v, &factor), &opt_s) != Ordering::Less;
            (Some(first), Some(second))
        }
        None => (None, None),
    };

    let mu = field.from_rational(to_big(&trace.mu));
    let mut no_sale_above_mu = true;
    for (t, &s) in trace.chosen.iter().enumerate() {
        for e in s.goods() {
            let price = field.scale(&field.generator_pow(u64::from(trace.levels[t][e])), &p0);
            if field.cmp(&price, &mu) == Ordering::Greater {
                no_sale_above_mu = false;
            }
        }
    }
    PriceBoundReport { revenue_bound, opt_bound, ratio_bound, no_sale_above_mu }
}

/// Whether every good sold at most `b·log2(4bm)` copies, i.e. `2^ℓ <= (4bm)^b`.
pub fn copies_within_log_bound(trace: &PriceTrace, m: usize) -> bool {
    let b = trace.root;
    let four_bm = num_bigint::BigUint::from(4u64 * u64::from(b) * m as u64);
    let cap = num_traits::pow(four_bm, b as usize);
    trace.final_levels().iter().all(|&l| num_traits::pow(num_bigint::BigUint::from(2u32), l as usize) <= cap)
}

/// Whether every good sold at most `ceil(b·log2(4bm))` copies.
pub fn copies_within_ceil_log_bound(trace: &PriceTrace, m: usize) -> bool {
    let b = trace.root;
    let four_bm = num_bigint::BigUint::from(4u64 * u64::from(b) * m as u64);
    let cap = num_traits::pow(four_bm, b as usize);
    // smallest s with 2^s >= (4bm)^b
    let s = (0u32..).find(|&s| num_traits::pow(num_bigint::BigUint::from(2u32), s as usize) >= cap).unwrap();
    trace.final_levels().iter().all(|&l| l <= s)
}

/// Approximate `r` for reporting.
pub fn rate_f64(rate_base: u64, b: u32) -> f64 {
    rate_base.to_f64().unwrap_or(f64::NAN).powf(1.0 / f64::from(b))
}
