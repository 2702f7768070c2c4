//! Exact rational helpers: parsing, formatting and exact comparison against `f64`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{0}` as a rational number")]
pub struct ParseRationalError(pub String);

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn integer(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.375"`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_owned());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| err())?;
        let den: BigInt = den.trim().parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = whole.trim_start_matches(['-', '+']);
        if !digits.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || (digits.is_empty() && frac.is_empty())
        {
            return Err(err());
        }
        let joined = format!("{digits}{frac}");
        let mut numer: BigInt = if joined.is_empty() {
            BigInt::zero()
        } else {
            joined.parse().map_err(|_| err())?
        };
        if negative {
            numer = -numer;
        }
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(numer, denom));
    }
    let value: BigInt = s.parse().map_err(|_| err())?;
    Ok(Rational::from_integer(value))
}

/// `"p/q"`, or just `"p"` for integers.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Exact value of a finite double.
pub fn from_f64(value: f64) -> Rational {
    Rational::from_float(value).expect("finite float")
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// A rational endpoint prepared for exact comparison against doubles.
///
/// `floor` is the largest double not exceeding the exact value; `exact`
/// records whether the two coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleBracket {
    pub floor: f64,
    pub exact: bool,
}

impl DoubleBracket {
    pub fn new(value: &Rational) -> Self {
        let mut floor = to_f64(value);
        while from_f64(floor) > *value {
            floor = floor.next_down();
        }
        while from_f64(floor.next_up()) <= *value {
            floor = floor.next_up();
        }
        let exact = from_f64(floor) == *value;
        DoubleBracket { floor, exact }
    }

    /// Exact ordering of the double `x` relative to the bracketed rational.
    #[inline]
    pub fn cmp_double(&self, x: f64) -> Ordering {
        if x < self.floor {
            Ordering::Less
        } else if x > self.floor {
            Ordering::Greater
        } else if self.exact {
            Ordering::Equal
        } else {
            Ordering::Less
        }
    }
}

/// Newtype so rationals print as `p/q` in messages.
pub struct Display<'a>(pub &'a Rational);

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(self.0))
    }
}

/// Serde adapter: rationals travel as `"p/q"` strings; integers are accepted on input.
pub mod serde_rational {
    use super::*;
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    pub(crate) struct RationalVisitor;

    impl<'de> Visitor<'de> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a rational as \"p/q\" or an integer")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse_rational(v).map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(integer(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(BigInt::from(v)))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            if v.is_finite() {
                Ok(from_f64(v))
            } else {
                Err(E::custom("non-finite number"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("1/2").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("2/4").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("3").unwrap(), integer(3));
        assert_eq!(parse_rational("0.3").unwrap(), rational(3, 10));
        assert_eq!(parse_rational("-0.25").unwrap(), rational(-1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn formats() {
        assert_eq!(format_rational(&rational(6, 8)), "3/4");
        assert_eq!(format_rational(&integer(1)), "1");
    }

    #[test]
    fn bracket_is_exact_for_non_dyadic_values() {
        let third = rational(1, 3);
        let b = DoubleBracket::new(&third);
        assert!(!b.exact);
        assert!(from_f64(b.floor) < third);
        assert!(from_f64(b.floor.next_up()) > third);
        assert_eq!(b.cmp_double(b.floor), Ordering::Less);
        assert_eq!(b.cmp_double(b.floor.next_up()), Ordering::Greater);

        let half = DoubleBracket::new(&rational(1, 2));
        assert!(half.exact);
        assert_eq!(half.cmp_double(0.5), Ordering::Equal);
        assert_eq!(half.cmp_double(0.5f64.next_down()), Ordering::Less);
    }
}
