//! Fixed benchmark inputs.

use veriauction::harness::{generate, GeneratorSpec, ValueDistribution};
use veriauction::Instance;

/// A reproducible random instance; every bundle has at most `d_cap` goods.
pub fn fixture(n: usize, m: usize, k: usize, b: u32, d_cap: usize) -> Instance {
    generate(&GeneratorSpec {
        n,
        m,
        k,
        b,
        d_cap,
        values: ValueDistribution::UniformInt { lo: 1, hi: 1000 },
        seed: 2024,
        strict: true,
    })
    .expect("benchmark specs are valid")
}
