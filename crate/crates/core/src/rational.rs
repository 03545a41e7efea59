//! Exact rational helpers shared by every module: parsing, JSON encoding as
//! `"p/q"` strings, and careful conversion to `f64` for approximate norms.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use std::fmt;

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// `2^k` for any integer `k`.
pub fn pow2(k: i64) -> Rational {
    let p = BigInt::one() << k.unsigned_abs() as usize;
    if k >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

/// `base^k` for any integer `k`; `base` must be nonzero when `k < 0`.
pub fn powi(base: &Rational, k: i64) -> Rational {
    let mut acc = Rational::one();
    let mut b = if k < 0 { base.recip() } else { base.clone() };
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        b = &b * &b;
        e >>= 1;
    }
    acc
}

pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Malformed(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::Malformed(format!("zero denominator in {s:?}")));
            }
            Ok(Rational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(p))
        }
    }
}

pub fn to_string(r: &Rational) -> String {
    r.to_string()
}

/// Exact value of a finite double.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Malformed(format!("non-finite number {x}")))
}

fn bigint_log2_parts(n: &BigInt) -> (f64, i64) {
    // n = m * 2^e with m in [2^52, 2^53) (or exact if small)
    let bits = n.bits() as i64;
    if bits <= 60 {
        return (n.to_f64().unwrap_or(0.0), 0);
    }
    let shift = bits - 60;
    let top: BigInt = n >> (shift as usize);
    (top.to_f64().unwrap_or(0.0), shift)
}

/// Conversion that stays accurate when numerator and denominator are both
/// far outside the `f64` range.
pub fn to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.numer().sign() == Sign::Minus { -1.0 } else { 1.0 };
    let (mn, en) = bigint_log2_parts(&r.numer().abs());
    let (md, ed) = bigint_log2_parts(r.denom());
    let e = en - ed;
    let m = mn / md;
    let e = e.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    sign * m * 2f64.powi(e.clamp(-1100, 1100))
}

/// Natural logarithm of a positive rational, accurate for huge or tiny values.
pub fn ln(r: &Rational) -> f64 {
    debug_assert!(r.is_positive());
    let (mn, en) = bigint_log2_parts(r.numer());
    let (md, ed) = bigint_log2_parts(r.denom());
    mn.ln() - md.ln() + (en - ed) as f64 * std::f64::consts::LN_2
}

/// `ln(1 + r)` for `r >= 0`.
pub fn ln_1p(r: &Rational) -> f64 {
    let x = to_f64(r);
    if x < 1e15 {
        x.ln_1p()
    } else {
        ln(r) + (1.0 / x).ln_1p()
    }
}

/// `r^alpha` for `r >= 0`, evaluated in floating point via logarithms.
pub fn powf(r: &Rational, alpha: f64) -> f64 {
    if r.is_zero() {
        return if alpha == 0.0 { 1.0 } else { 0.0 };
    }
    (alpha * ln(r)).exp()
}

/// A rational or `+∞`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Extended {
    Finite(Rational),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(r) => Some(r),
            Extended::PosInfinity => None,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Extended::Finite(r) => write!(f, "{r}"),
            Extended::PosInfinity => f.write_str("inf"),
        }
    }
}

impl serde::Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            Ok(Extended::PosInfinity)
        } else {
            parse(&s).map(Extended::Finite).map_err(de::Error::custom)
        }
    }
}

pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }
}

pub mod serde_rational_vec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::Deserialize;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&r.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let raw: Vec<RationalRepr> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|r| r.0).collect())
    }
}

/// Newtype used when a rational appears inside a derived (de)serializer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalRepr(pub Rational);

impl serde::Serialize for RationalRepr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for RationalRepr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        d.deserialize_any(RationalVisitor).map(RationalRepr)
    }
}

struct RationalVisitor;

impl<'de> Visitor<'de> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational as a \"p/q\" string or an integer")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rational, E> {
        parse(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rational, E> {
        Ok(int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Rational, E> {
        Ok(Rational::from_integer(BigInt::from(v)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Rational, E> {
        Err(E::custom(format!(
            "floating-point literal {v} is not an exact rational; write it as a \"p/q\" string"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!(parse("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse("-7").unwrap(), int(-7));
        assert!(parse("1/0").is_err());
        assert!(parse("0.5").is_err());
    }

    #[test]
    fn powers() {
        assert_eq!(pow2(-3), ratio(1, 8));
        assert_eq!(powi(&ratio(5, 4), 2), ratio(25, 16));
        assert_eq!(powi(&ratio(5, 4), -1), ratio(4, 5));
    }

    #[test]
    fn float_conversion_survives_huge_components() {
        let big = pow2(2000) + int(1);
        let r = &big / (&big * int(3));
        assert!((to_f64(&r) - 1.0 / 3.0).abs() < 1e-15);
        assert!((ln(&pow2(1024)) - 1024.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((ln_1p(&pow2(1200)) - 1200.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(to_f64(&ratio(-3, 4)), -0.75);
    }
}
