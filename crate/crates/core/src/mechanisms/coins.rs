//! Coin sources for the randomized rounding step and exact coin enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MechanismError;
use crate::model::{welfare, Allocation, Instance};
use crate::rational::{serde_rational, to_f64, Rational};

/// Supplies one biased coin per rounding decision, in processing order.
pub trait CoinSource {
    fn flip(&mut self, q: f64) -> Result<bool, MechanismError>;
}

/// Every flip succeeds; turns the rounding step off.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllHeads;

impl CoinSource for AllHeads {
    fn flip(&mut self, _q: f64) -> Result<bool, MechanismError> {
        Ok(true)
    }
}

/// A fixed outcome vector consumed front to back; the bias is ignored.
#[derive(Debug, Clone)]
pub struct CoinVector {
    bits: Vec<bool>,
    pos: usize,
}

impl CoinVector {
    pub fn new(bits: Vec<bool>) -> Self {
        CoinVector { bits, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl CoinSource for CoinVector {
    fn flip(&mut self, _q: f64) -> Result<bool, MechanismError> {
        let bit = *self.bits.get(self.pos).ok_or(MechanismError::CoinsExhausted { supplied: self.bits.len() })?;
        self.pos += 1;
        Ok(bit)
    }
}

/// Biased coins from a ChaCha8 stream keyed by `seed`.
#[derive(Debug, Clone)]
pub struct SeededCoins {
    rng: ChaCha8Rng,
}

impl SeededCoins {
    pub fn new(seed: u64) -> Self {
        SeededCoins { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl CoinSource for SeededCoins {
    fn flip(&mut self, q: f64) -> Result<bool, MechanismError> {
        Ok(self.rng.gen_bool(q.clamp(0.0, 1.0)))
    }
}

/// Serializable description of a coin source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinSpec {
    AllHeads,
    Vector(Vec<bool>),
    Seeded(u64),
}

impl CoinSpec {
    pub fn source(&self) -> Box<dyn CoinSource> {
        match self {
            CoinSpec::AllHeads => Box::new(AllHeads),
            CoinSpec::Vector(bits) => Box::new(CoinVector::new(bits.clone())),
            CoinSpec::Seeded(seed) => Box::new(SeededCoins::new(*seed)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoinOutcome {
    pub coins: Vec<bool>,
    pub probability: f64,
    pub allocation: Allocation,
    #[serde(with = "serde_rational")]
    pub welfare: Rational,
}

/// Outcome of every coin vector with its probability under bias `q`.
#[derive(Debug, Clone, Serialize)]
pub struct CoinDistribution {
    pub q: f64,
    pub outcomes: Vec<CoinOutcome>,
}

impl CoinDistribution {
    pub fn expected_welfare(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability * to_f64(&o.welfare)).sum()
    }
}

/// Largest number of coin bits [`enumerate_coins`] accepts.
pub const MAX_ENUMERATED_COINS: usize = 20;

/// Runs `run` on all `2^bits` coin vectors (lexicographic, tails first).
pub fn enumerate_coins<F>(
    instance: &Instance,
    bits: usize,
    q: f64,
    mut run: F,
) -> Result<CoinDistribution, MechanismError>
where
    F: FnMut(&mut CoinVector) -> Result<Allocation, MechanismError>,
{
    if bits > MAX_ENUMERATED_COINS {
        return Err(MechanismError::TooManyCoins { bits });
    }
    let mut outcomes = Vec::with_capacity(1 << bits);
    for mask in 0u32..(1u32 << bits) {
        let coins: Vec<bool> = (0..bits).map(|i| mask >> (bits - 1 - i) & 1 == 1).collect();
        let heads = coins.iter().filter(|&&c| c).count() as i32;
        let probability = q.powi(heads) * (1.0 - q).powi(bits as i32 - heads);
        let mut source = CoinVector::new(coins.clone());
        let allocation = run(&mut source)?;
        let w = welfare(instance, &allocation);
        outcomes.push(CoinOutcome { coins, probability, allocation, welfare: w });
    }
    Ok(CoinDistribution { q, outcomes })
}
