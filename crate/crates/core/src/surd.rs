//! Exact arithmetic in `Q(θ)` with `θ = N^{1/b}`.
//!
//! Multiplicative prices are `p0 · r^ℓ` with `r = N^{1/b}`; comparing sums of
//! such prices against rational valuations needs exact signs. Elements are
//! stored as coefficient vectors over `1, θ, .., θ^{n-1}` where `θ = M^{1/n}` is
//! the reduced form of `N^{1/b}` (largest `g | b` with `N` a perfect `g`-th
//! power gives `M = N^{1/g}`, `n = b/g`). With that reduction `x^n - M` is
//! irreducible, so a nonzero coefficient vector is a nonzero number and sign
//! detection by interval refinement terminates.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Surd {
    coeffs: Vec<BigRational>,
}

impl Surd {
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Rational value if the element lies in `Q`.
    pub fn as_rational(&self) -> Option<BigRational> {
        self.coeffs[1..].iter().all(Zero::is_zero).then(|| self.coeffs[0].clone())
    }
}

/// The field `Q(N^{1/b})` together with a rational bracket around the generator.
#[derive(Debug, Clone)]
pub struct RadicalField {
    base: u64,
    root: u32,
    m: BigInt,
    degree: usize,
    lo: BigRational,
    hi: BigRational,
}

fn exact_root(n: u64, g: u32) -> Option<u64> {
    let c = n.nth_root(g);
    (c.checked_pow(g) == Some(n)).then_some(c)
}

impl RadicalField {
    /// Field generated by `base^{1/root}`; panics if `base == 0` or `root == 0`.
    pub fn new(base: u64, root: u32) -> Self {
        assert!(base >= 1 && root >= 1, "radical field needs base >= 1 and root >= 1");
        let (m, degree) = (1..=root)
            .rev()
            .filter(|g| root % g == 0)
            .find_map(|g| exact_root(base, g).map(|c| (c, (root / g) as usize)))
            .expect("g = 1 always divides");
        let m_big = BigInt::from(m);
        let mut lo = BigRational::zero();
        let mut hi = BigRational::from_integer(m_big.clone().max(BigInt::one()));
        if degree == 1 {
            lo = BigRational::from_integer(m_big.clone());
            hi = lo.clone();
        } else {
            for _ in 0..64 {
                let mid = (&lo + &hi) / BigRational::from_integer(BigInt::from(2));
                if mid.pow(degree as i32) <= BigRational::from_integer(m_big.clone()) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        RadicalField { base, root, m: m_big, degree, lo, hi }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    /// Degree of the reduced generator over `Q`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn zero(&self) -> Surd {
        Surd { coeffs: vec![BigRational::zero(); self.degree] }
    }

    pub fn from_rational(&self, q: BigRational) -> Surd {
        let mut s = self.zero();
        s.coeffs[0] = q;
        s
    }

    /// `r^k` where `r = base^{1/root}` is the field generator.
    pub fn generator_pow(&self, k: u64) -> Surd {
        let d = self.degree as u64;
        let mut s = self.zero();
        let whole = u32::try_from(k / d).expect("exponent too large");
        s.coeffs[(k % d) as usize] = BigRational::from_integer(num_traits::pow(self.m.clone(), whole as usize));
        s
    }

    pub fn generator(&self) -> Surd {
        self.generator_pow(1)
    }

    pub fn add(&self, a: &Surd, b: &Surd) -> Surd {
        Surd { coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, a: &Surd, b: &Surd) -> Surd {
        Surd { coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect() }
    }

    pub fn scale(&self, a: &Surd, q: &BigRational) -> Surd {
        Surd { coeffs: a.coeffs.iter().map(|x| x * q).collect() }
    }

    pub fn mul(&self, a: &Surd, b: &Surd) -> Surd {
        let d = self.degree;
        let mut out = vec![BigRational::zero(); d];
        let m = BigRational::from_integer(self.m.clone());
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let prod = x * y;
                if i + j >= d {
                    out[i + j - d] += prod * &m;
                } else {
                    out[i + j] += prod;
                }
            }
        }
        Surd { coeffs: out }
    }

    fn interval(&self, a: &Surd, lo: &BigRational, hi: &BigRational) -> (BigRational, BigRational) {
        let mut low = a.coeffs[0].clone();
        let mut high = a.coeffs[0].clone();
        let mut plo = BigRational::one();
        let mut phi = BigRational::one();
        for c in &a.coeffs[1..] {
            plo *= lo;
            phi *= hi;
            if c.is_positive() {
                low += c * &plo;
                high += c * &phi;
            } else if c.is_negative() {
                low += c * &phi;
                high += c * &plo;
            }
        }
        (low, high)
    }

    pub fn signum(&self, a: &Surd) -> Ordering {
        if let Some(q) = a.as_rational() {
            return q.cmp(&BigRational::zero());
        }
        let two = BigRational::from_integer(BigInt::from(2));
        let m = BigRational::from_integer(self.m.clone());
        let (mut lo, mut hi) = (self.lo.clone(), self.hi.clone());
        loop {
            let (low, high) = self.interval(a, &lo, &hi);
            if low.is_positive() {
                return Ordering::Greater;
            }
            if high.is_negative() {
                return Ordering::Less;
            }
            let mid = (&lo + &hi) / &two;
            if mid.pow(self.degree as i32) <= m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    pub fn cmp(&self, a: &Surd, b: &Surd) -> Ordering {
        self.signum(&self.sub(a, b))
    }

    pub fn to_f64(&self, a: &Surd) -> f64 {
        let theta = self.m.to_f64().unwrap_or(f64::INFINITY).powf(1.0 / self.degree as f64);
        a.coeffs.iter().enumerate().map(|(i, c)| c.to_f64().unwrap_or(f64::NAN) * theta.powi(i as i32)).sum()
    }
}
