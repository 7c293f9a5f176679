//! Exact rational values used for valuations, welfare and graph weights.
//!
//! Values are `Ratio<i128>`. Numerators and denominators stay small for every
//! instance this crate is meant for; arithmetic overflow panics (overflow checks
//! are enabled in every build profile) instead of silently wrapping.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use serde::{de, Deserializer, Serializer};
use thiserror::Error;

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{input}` as a rational: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

fn parse_err(input: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError { input: input.to_string(), reason }
}

/// Parses `p/q`, an integer, or a finite decimal such as `1.25` or `-0.1`.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let s = input.trim();
    if s.is_empty() {
        return Err(parse_err(input, "empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i128 = num.trim().parse().map_err(|_| parse_err(input, "bad numerator"))?;
        let d: i128 = den.trim().parse().map_err(|_| parse_err(input, "bad denominator"))?;
        if d == 0 {
            return Err(parse_err(input, "zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(parse_err(input, "no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(parse_err(input, "not a decimal"));
    }
    if frac_part.len() > 30 {
        return Err(parse_err(input, "too many decimal places"));
    }
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add(i128::from(c as u8 - b'0')))
            .ok_or_else(|| parse_err(input, "overflow"))?;
    }
    let denom = 10i128.checked_pow(frac_part.len() as u32).ok_or_else(|| parse_err(input, "overflow"))?;
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// `p/q` in lowest terms, or just `p` for integers.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn to_big(value: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*value.numer()), BigInt::from(*value.denom()))
}

pub fn from_integer(value: i128) -> Rational {
    Rational::from_integer(value)
}

pub fn is_nonnegative(value: &Rational) -> bool {
    !(*value < Rational::zero())
}

/// Serde adapter: writes rationals as strings, reads strings or JSON numbers.
///
/// Floating JSON numbers are read through their shortest decimal text, so
/// `1.1` becomes exactly `11/10`.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }

    struct RationalVisitor;

    impl<'de> de::Visitor<'de> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a rational as \"p/q\", a decimal string, or a number")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse_rational(v).map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(i128::from(v)))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(i128::from(v)))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            if !v.is_finite() {
                return Err(E::custom("non-finite number"));
            }
            parse_rational(&format!("{v}")).map_err(E::custom)
        }
    }
}

pub mod serde_rational_vec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::Deserialize;

    pub fn serialize<S: Serializer>(values: &[Rational], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&format_rational(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Rational>, D::Error> {
        #[derive(Deserialize)]
        struct Wrapped(#[serde(with = "super::serde_rational")] Rational);
        let raw: Vec<Wrapped> = Vec::deserialize(deserializer)?;
        Ok(raw.into_iter().map(|w| w.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/6").unwrap(), Rational::new(1, 2));
        assert_eq!(parse_rational("1.1").unwrap(), Rational::new(11, 10));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::new(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), Rational::from_integer(7));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1e5").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn formats_lowest_terms() {
        assert_eq!(format_rational(&Rational::new(4, 8)), "1/2");
        assert_eq!(format_rational(&Rational::new(-6, 3)), "-2");
    }

    #[test]
    fn json_numbers_read_exactly() {
        #[derive(serde::Deserialize)]
        struct V {
            #[serde(with = "serde_rational")]
            v: Rational,
        }
        let a: V = serde_json::from_str(r#"{"v": 1.1}"#).unwrap();
        assert_eq!(a.v, Rational::new(11, 10));
        let b: V = serde_json::from_str(r#"{"v": "9/10"}"#).unwrap();
        assert_eq!(b.v, Rational::new(9, 10));
        let c: V = serde_json::from_str(r#"{"v": 3}"#).unwrap();
        assert_eq!(c.v, Rational::from_integer(3));
    }
}
