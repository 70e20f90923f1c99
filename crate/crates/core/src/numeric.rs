//! Exact rational scalars and resistances.
//!
//! Utilities, weights, resistance-function parameters and polynomial
//! exponents are all carried as exact rationals so that resistance
//! comparisons (arborescence minima, argmax sets) never depend on floating
//! point rounding.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational scalar used throughout the crate.
pub type Q = Ratio<i128>;

/// Maximal number of fractional decimal digits kept when converting a float.
const MAX_DECIMALS: usize = 12;

pub fn q(num: i128, den: i128) -> Q {
    Q::new(num, den)
}

pub fn q_int(n: i128) -> Q {
    Q::from_integer(n)
}

/// Converts a float to the rational written by its shortest decimal
/// representation (`0.4` becomes exactly `2/5`), rounded to 12 decimals.
pub fn q_from_f64(x: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    parse_decimal(&format!("{x}"))
}

/// Parses a plain or scientific decimal literal into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Q> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut all_digits = String::with_capacity(int_part.len() + frac_part.len());
    all_digits.push_str(int_part);
    all_digits.push_str(frac_part);
    // value = all_digits * 10^(exponent - frac_len)
    let scale = exponent - frac_part.len() as i32;
    let digits = all_digits.trim_start_matches('0');
    if digits.is_empty() {
        return Some(Q::zero());
    }
    let mut value: i128 = digits.parse().ok()?;
    let v = if scale >= 0 {
        Q::from_integer(value.checked_mul(10i128.checked_pow(scale as u32)?)?)
    } else {
        let mut places = (-scale) as u32;
        if places > MAX_DECIMALS as u32 {
            let drop = places - MAX_DECIMALS as u32;
            if drop > 38 {
                return Some(Q::zero());
            }
            let div = 10i128.pow(drop);
            value = (value + div / 2) / div;
            places = MAX_DECIMALS as u32;
        }
        Q::new(value, 10i128.pow(places))
    };
    Some(if negative { -v } else { v })
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| *x.numer() as f64 / *x.denom() as f64)
}

pub fn clamp_unit(x: Q) -> Q {
    if x < Q::zero() {
        Q::zero()
    } else if x > Q::one() {
        Q::one()
    } else {
        x
    }
}

/// Renders a rational as a short decimal when it has a finite expansion
/// with at most 12 digits, otherwise as `p/q`.
pub fn fmt_q(x: &Q) -> String {
    let mut den = *x.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    let places = twos.max(fives);
    if den != 1 || places as usize > MAX_DECIMALS {
        return format!("{}/{}", x.numer(), x.denom());
    }
    if places == 0 {
        return format!("{}", x.numer());
    }
    let scaled = x * Q::from_integer(10i128.pow(places));
    let n = scaled.to_integer();
    let sign = if n < 0 { "-" } else { "" };
    let n = n.abs();
    let p = 10i128.pow(places);
    format!("{sign}{}.{:0width$}", n / p, n % p, width = places as usize)
}

/// Resistance of a transition or path: a non-negative rational, or `+∞`
/// for impossible events. Arithmetic saturates at infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Resistance {
    Finite(Q),
    Infinite,
}

impl Resistance {
    pub fn zero() -> Self {
        Resistance::Finite(Q::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Resistance::Finite(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Resistance::Finite(r) if r.is_zero())
    }

    pub fn finite(&self) -> Option<&Q> {
        match self {
            Resistance::Finite(r) => Some(r),
            Resistance::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Resistance::Finite(r) => to_f64(r),
            Resistance::Infinite => f64::INFINITY,
        }
    }
}

impl From<Q> for Resistance {
    fn from(r: Q) -> Self {
        Resistance::Finite(r)
    }
}

impl PartialOrd for Resistance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Resistance {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Resistance::Finite(a), Resistance::Finite(b)) => a.cmp(b),
            (Resistance::Finite(_), Resistance::Infinite) => Ordering::Less,
            (Resistance::Infinite, Resistance::Finite(_)) => Ordering::Greater,
            (Resistance::Infinite, Resistance::Infinite) => Ordering::Equal,
        }
    }
}

impl Add for Resistance {
    type Output = Resistance;

    fn add(self, rhs: Resistance) -> Resistance {
        match (self, rhs) {
            (Resistance::Finite(a), Resistance::Finite(b)) => Resistance::Finite(a + b),
            _ => Resistance::Infinite,
        }
    }
}

impl<'a> Add<&'a Resistance> for &'a Resistance {
    type Output = Resistance;

    fn add(self, rhs: &Resistance) -> Resistance {
        match (self, rhs) {
            (Resistance::Finite(a), Resistance::Finite(b)) => Resistance::Finite(a + b),
            _ => Resistance::Infinite,
        }
    }
}

impl fmt::Display for Resistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resistance::Finite(r) => f.write_str(&fmt_q(r)),
            Resistance::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Resistance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Resistance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "inf" {
            return Ok(Resistance::Infinite);
        }
        parse_q(&s)
            .map(Resistance::Finite)
            .ok_or_else(|| serde::de::Error::custom(format!("bad resistance `{s}`")))
    }
}

/// Parses either `p/q` or a decimal literal.
pub fn parse_q(s: &str) -> Option<Q> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.trim().parse().ok()?;
            let d: i128 = d.trim().parse().ok()?;
            (d != 0).then(|| Q::new(n, d))
        }
        None => parse_decimal(s),
    }
}

/// Serde adapter storing a rational as its `fmt_q` string.
pub mod q_string {
    use super::*;

    pub fn serialize<S: serde::Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational `{s}`")))
    }
}

/// A rational written in JSON as a plain number when it has a short decimal
/// form and as a `"p/q"` string otherwise; both forms are accepted on input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QFlex(pub Q);

impl Serialize for QFlex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text = fmt_q(&self.0);
        if self.0.is_integer() {
            if let Some(v) = self.0.to_integer().to_i64() {
                return s.serialize_i64(v);
            }
        }
        match text.contains('/') {
            false => s.serialize_f64(text.parse::<f64>().map_err(serde::ser::Error::custom)?),
            true => s.serialize_str(&text),
        }
    }
}

impl<'de> Deserialize<'de> for QFlex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl serde::de::Visitor<'_> for Visitor {
            type Value = QFlex;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a \"p/q\" string")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<QFlex, E> {
                Ok(QFlex(q_int(v as i128)))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<QFlex, E> {
                Ok(QFlex(q_int(v as i128)))
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<QFlex, E> {
                q_from_f64(v)
                    .map(QFlex)
                    .ok_or_else(|| E::custom(format!("non-finite number {v}")))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<QFlex, E> {
                parse_q(v)
                    .map(QFlex)
                    .ok_or_else(|| E::custom(format!("bad rational `{v}`")))
            }
        }

        d.deserialize_any(Visitor)
    }
}

/// Serde adapters built on [`QFlex`].
pub mod q_flex {
    use super::*;

    pub fn serialize<S: serde::Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        QFlex(*x).serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        QFlex::deserialize(d).map(|v| v.0)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: serde::Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(xs.iter().map(|x| QFlex(*x)))
        }

        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
            Ok(Vec::<QFlex>::deserialize(d)?.into_iter().map(|v| v.0).collect())
        }
    }

    pub mod pairs {
        use super::*;

        pub fn serialize<S: serde::Serializer>(xs: &[(Q, Q)], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(xs.iter().map(|(a, b)| [QFlex(*a), QFlex(*b)]))
        }

        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<(Q, Q)>, D::Error> {
            Ok(Vec::<[QFlex; 2]>::deserialize(d)?
                .into_iter()
                .map(|[a, b]| (a.0, b.0))
                .collect())
        }
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: serde::Serializer>(xs: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(xs.iter().map(|row| row.iter().map(|x| QFlex(*x)).collect::<Vec<_>>()))
        }

        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
            Ok(Vec::<Vec<QFlex>>::deserialize(d)?
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.0).collect())
                .collect())
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: serde::Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
            x.map(QFlex).serialize(s)
        }

        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
            Ok(Option::<QFlex>::deserialize(d)?.map(|v| v.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(q_from_f64(0.4), Some(q(2, 5)));
        assert_eq!(q_from_f64(0.05), Some(q(1, 20)));
        assert_eq!(q_from_f64(1.0), Some(q_int(1)));
        assert_eq!(parse_decimal("2.5e-1"), Some(q(1, 4)));
        assert_eq!(parse_decimal("-0.75"), Some(q(-3, 4)));
        assert_eq!(q_from_f64(0.1 + 0.2), Some(q(3, 10)));
        assert!(parse_decimal("abc").is_none());
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_q(&q(2, 5)), "0.4");
        assert_eq!(fmt_q(&q(1, 3)), "1/3");
        assert_eq!(fmt_q(&q_int(2)), "2");
        assert_eq!(fmt_q(&q(-21, 50)), "-0.42");
        assert_eq!(parse_q("1/3"), Some(q(1, 3)));
    }

    #[test]
    fn flexible_json_form() {
        let xs = vec![QFlex(q(2, 5)), QFlex(q(1, 3)), QFlex(q_int(2))];
        let text = serde_json::to_string(&xs).unwrap();
        assert_eq!(text, r#"[0.4,"1/3",2]"#);
        let back: Vec<QFlex> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn resistance_order_and_saturation() {
        let a = Resistance::Finite(q(1, 2));
        let b = Resistance::Finite(q(3, 2));
        assert!(a < b);
        assert!(b < Resistance::Infinite);
        assert_eq!(a.clone() + b, Resistance::Finite(q_int(2)));
        assert_eq!(a + Resistance::Infinite, Resistance::Infinite);
    }
}
