//! Generalized polynomials in the perturbation factor ε.
//!
//! A transition probability of the induced process is a finite sum
//! `Σ c_k ε^{r_k}` with rational exponents `r_k ≥ 0` and exact rational
//! coefficients. Its resistance is the smallest exponent carrying a
//! non-zero coefficient. Coefficients may be negative (`1 − ε^r` is stored as
//! `ε^0 − ε^r`), but an assembled probability must have a positive leading
//! coefficient; anything else is reported rather than silently accepted.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{fmt_q, parse_q, to_f64, Resistance, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpsPolyError {
    #[error("leading coefficient {coeff} at exponent {exponent} is not positive in {poly}")]
    NonPositiveLeading {
        exponent: String,
        coeff: String,
        poly: String,
    },
}

/// `Σ coeff · ε^exponent`, kept sorted by strictly increasing exponent with
/// no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EpsPoly {
    terms: Vec<(Q, Q)>,
}

impl EpsPoly {
    pub fn zero() -> Self {
        EpsPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial(c, Q::zero())
    }

    /// `coeff · ε^exponent`.
    pub fn monomial(coeff: Q, exponent: Q) -> Self {
        assert!(!exponent.is_negative(), "negative ε exponent");
        if coeff.is_zero() {
            Self::zero()
        } else {
            EpsPoly {
                terms: vec![(exponent, coeff)],
            }
        }
    }

    /// `ε^exponent`.
    pub fn eps_pow(exponent: Q) -> Self {
        Self::monomial(Q::one(), exponent)
    }

    /// `1 − ε^exponent`; the zero polynomial when the exponent is 0.
    pub fn one_minus_eps_pow(exponent: Q) -> Self {
        Self::one() - Self::eps_pow(exponent)
    }

    pub fn from_terms<I: IntoIterator<Item = (Q, Q)>>(terms: I) -> Self {
        let mut acc: BTreeMap<Q, Q> = BTreeMap::new();
        for (e, c) in terms {
            assert!(!e.is_negative(), "negative ε exponent");
            *acc.entry(e).or_insert_with(Q::zero) += c;
        }
        EpsPoly {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    /// `(exponent, coefficient)` pairs in increasing exponent order.
    pub fn terms(&self) -> &[(Q, Q)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_zero() && self.terms[0].1.is_one()
    }

    /// Coefficient of `ε^0`, i.e. the limit as ε → 0.
    pub fn constant_term(&self) -> Q {
        match self.terms.first() {
            Some((e, c)) if e.is_zero() => *c,
            _ => Q::zero(),
        }
    }

    pub fn leading(&self) -> Option<&(Q, Q)> {
        self.terms.first()
    }

    /// Minimal exponent with non-zero coefficient; `+∞` for the zero
    /// polynomial. Fails when the leading coefficient is not positive, which
    /// would make the quantity negative for small ε.
    pub fn resistance(&self) -> Result<Resistance, EpsPolyError> {
        match self.terms.first() {
            None => Ok(Resistance::Infinite),
            Some((e, c)) if c.is_positive() => Ok(Resistance::Finite(*e)),
            Some((e, c)) => Err(EpsPolyError::NonPositiveLeading {
                exponent: fmt_q(e),
                coeff: fmt_q(c),
                poly: self.to_string(),
            }),
        }
    }

    /// Whether `self + other` loses both leading terms to cancellation.
    pub fn leading_cancels_with(&self, other: &EpsPoly) -> bool {
        match (self.terms.first(), other.terms.first()) {
            (Some((ea, ca)), Some((eb, cb))) => ea == eb && (*ca + *cb).is_zero(),
            _ => false,
        }
    }

    pub fn eval(&self, eps: f64) -> f64 {
        if eps == 0.0 {
            return to_f64(&self.constant_term());
        }
        let ln_eps = eps.ln();
        self.terms
            .iter()
            .map(|(e, c)| {
                let e = to_f64(e);
                to_f64(c) * if e == 0.0 { 1.0 } else { (e * ln_eps).exp() }
            })
            .sum()
    }

    pub fn max_exponent(&self) -> Option<Q> {
        self.terms.last().map(|(e, _)| *e)
    }
}

impl Add for &EpsPoly {
    type Output = EpsPoly;

    fn add(self, rhs: &EpsPoly) -> EpsPoly {
        let mut out = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < rhs.terms.len() {
            let (ea, ca) = &self.terms[i];
            let (eb, cb) = &rhs.terms[j];
            match ea.cmp(eb) {
                std::cmp::Ordering::Less => {
                    out.push((*ea, *ca));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((*eb, *cb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = *ca + *cb;
                    if !c.is_zero() {
                        out.push((*ea, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&rhs.terms[j..]);
        EpsPoly { terms: out }
    }
}

impl Add for EpsPoly {
    type Output = EpsPoly;

    fn add(self, rhs: EpsPoly) -> EpsPoly {
        &self + &rhs
    }
}

impl Neg for EpsPoly {
    type Output = EpsPoly;

    fn neg(self) -> EpsPoly {
        EpsPoly {
            terms: self.terms.into_iter().map(|(e, c)| (e, -c)).collect(),
        }
    }
}

impl Sub for EpsPoly {
    type Output = EpsPoly;

    fn sub(self, rhs: EpsPoly) -> EpsPoly {
        &self + &(-rhs)
    }
}

impl Mul for &EpsPoly {
    type Output = EpsPoly;

    fn mul(self, rhs: &EpsPoly) -> EpsPoly {
        if self.is_zero() || rhs.is_zero() {
            return EpsPoly::zero();
        }
        EpsPoly::from_terms(self.terms.iter().flat_map(|(ea, ca)| {
            rhs.terms.iter().map(move |(eb, cb)| (*ea + *eb, *ca * *cb))
        }))
    }
}

impl Mul for EpsPoly {
    type Output = EpsPoly;

    fn mul(self, rhs: EpsPoly) -> EpsPoly {
        &self * &rhs
    }
}

impl std::iter::Sum for EpsPoly {
    fn sum<I: Iterator<Item = EpsPoly>>(iter: I) -> EpsPoly {
        iter.fold(EpsPoly::zero(), |acc, p| &acc + &p)
    }
}

impl fmt::Display for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() {
                "-"
            } else if k > 0 {
                "+"
            } else {
                ""
            };
            if k > 0 {
                f.write_str(" ")?;
            }
            let mag = fmt_q(&c.abs());
            if e.is_zero() {
                write!(f, "{sign}{mag}")?;
            } else {
                write!(f, "{sign}{mag}·ε^{}", fmt_q(e))?;
            }
        }
        Ok(())
    }
}

/// Wire form: `[[exponent, coeff], ...]` with rationals as strings.
impl Serialize for EpsPoly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[String; 2]> = self
            .terms
            .iter()
            .map(|(e, c)| [fmt_q(e), fmt_q(c)])
            .collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EpsPoly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs: Vec<[String; 2]> = Vec::deserialize(deserializer)?;
        let mut terms = Vec::with_capacity(pairs.len());
        for [e, c] in pairs {
            let e = parse_q(&e).ok_or_else(|| serde::de::Error::custom("bad exponent"))?;
            let c = parse_q(&c).ok_or_else(|| serde::de::Error::custom("bad coefficient"))?;
            terms.push((e, c));
        }
        Ok(EpsPoly::from_terms(terms))
    }
}
