//! Polynomials in one variable with exact rational coefficients, stored
//! sparsely by exponent.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactPolynomial {
    coeffs: BTreeMap<u32, BigRational>,
}

impl ExactPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, BigRational::one())
    }

    /// `c · t^e`.
    pub fn monomial(e: u32, c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// `t^e`.
    pub fn t_pow(e: u32) -> Self {
        Self::monomial(e, BigRational::one())
    }

    /// From integer coefficients, lowest degree first.
    pub fn from_ints<I: Into<BigInt>>(coeffs: impl IntoIterator<Item = I>) -> Self {
        let mut p = Self::zero();
        for (e, c) in coeffs.into_iter().enumerate() {
            p.add_term(e as u32, BigRational::from_integer(c.into()));
        }
        p
    }

    /// From `(exponent, count)` pairs, e.g. a histogram of statistic values.
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Self {
        let mut p = Self::zero();
        for (e, c) in counts {
            p.add_term(e, BigRational::from_integer(c.into()));
        }
        p
    }

    pub fn add_term(&mut self, e: u32, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(e).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn coeff(&self, e: u32) -> BigRational {
        self.coeffs.get(&e).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (u32, &BigRational)> {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        ExactPolynomial {
            coeffs: self.coeffs.iter().map(|(&e, c)| (e, c * s)).collect(),
        }
    }

    /// Multiplies by `t^e`.
    pub fn shift(&self, e: u32) -> Self {
        ExactPolynomial {
            coeffs: self.coeffs.iter().map(|(&k, c)| (k + e, c.clone())).collect(),
        }
    }

    pub fn derivative(&self) -> Self {
        ExactPolynomial {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&e, _)| e > 0)
                .map(|(&e, c)| (e - 1, c * BigRational::from_integer(e.into())))
                .collect(),
        }
    }

    pub fn evaluate(&self, at: &BigRational) -> BigRational {
        // Horner over the sparse exponents, highest first.
        let mut acc = BigRational::zero();
        let mut prev: Option<u32> = None;
        for (&e, c) in self.coeffs.iter().rev() {
            if let Some(p) = prev {
                acc *= num_traits::pow(at.clone(), (p - e) as usize);
            }
            acc += c;
            prev = Some(e);
        }
        if let Some(p) = prev {
            acc *= num_traits::pow(at.clone(), p as usize);
        }
        acc
    }

    /// Value at `t = 1`, the sum of coefficients.
    pub fn at_one(&self) -> BigRational {
        self.coeffs.values().fold(BigRational::zero(), |a, c| a + c)
    }
}

impl Add for &ExactPolynomial {
    type Output = ExactPolynomial;
    fn add(self, rhs: &ExactPolynomial) -> ExactPolynomial {
        let mut out = self.clone();
        for (&e, c) in &rhs.coeffs {
            out.add_term(e, c.clone());
        }
        out
    }
}

impl Sub for &ExactPolynomial {
    type Output = ExactPolynomial;
    fn sub(self, rhs: &ExactPolynomial) -> ExactPolynomial {
        let mut out = self.clone();
        for (&e, c) in &rhs.coeffs {
            out.add_term(e, -c.clone());
        }
        out
    }
}

impl Mul for &ExactPolynomial {
    type Output = ExactPolynomial;
    fn mul(self, rhs: &ExactPolynomial) -> ExactPolynomial {
        let mut out = ExactPolynomial::zero();
        for (&a, x) in &self.coeffs {
            for (&b, y) in &rhs.coeffs {
                out.add_term(a + b, x * y);
            }
        }
        out
    }
}

impl fmt::Display for ExactPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (&e, c)) in self.coeffs.iter().rev().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match e {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}t")?,
                _ => write!(f, "{c}t^{e}")?,
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawPoly {
    coeffs: BTreeMap<u32, String>,
}

impl Serialize for ExactPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawPoly {
            coeffs: self.coeffs.iter().map(|(&e, c)| (e, c.to_string())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawPoly::deserialize(d)?;
        let mut p = ExactPolynomial::zero();
        for (e, c) in raw.coeffs {
            let c: BigRational = c.parse().map_err(|_| D::Error::custom(format!("bad rational {c:?}")))?;
            p.add_term(e, c);
        }
        Ok(p)
    }
}

/// Formats a rational as `p` or `p/q`.
pub fn fmt_rational(r: &BigRational) -> String {
    r.to_string()
}

/// Parses `p` or `p/q`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let r: BigRational = s.parse().ok()?;
    Some(r)
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn product_expansion() {
        let a = ExactPolynomial::from_ints([1, 2]);
        let b = ExactPolynomial::from_ints([1, 3]);
        let p = (&a * &b).shift(1);
        assert_eq!(p, ExactPolynomial::from_ints([0, 1, 5, 6]));
        assert_eq!(p.degree(), Some(3));
        assert_eq!(p.to_string(), "6t^3 + 5t^2 + 1t");
    }

    #[test]
    fn derivative_at_one() {
        let b3 = ExactPolynomial::from_ints([0, 1, 5, 6]);
        assert_eq!(b3.derivative().at_one(), int(29));
        assert_eq!(b3.derivative().evaluate(&int(1)), int(29));
        assert_eq!(b3.evaluate(&ratio(1, 2)), ratio(6, 8) + ratio(5, 4) + ratio(1, 2));
        assert_eq!(ExactPolynomial::zero().evaluate(&int(3)), int(0));
    }

    #[test]
    fn no_stored_zeros() {
        let a = ExactPolynomial::from_ints([1, 2]);
        assert!((&a - &a).is_zero());
        assert_eq!((&a - &a).degree(), None);
        assert!(a.scale(&int(0)).is_zero());
    }

    #[test]
    fn json_form() {
        let p = ExactPolynomial::from_ints([7, 5]);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"coeffs":{"0":"7","1":"5"}}"#);
        let q = ExactPolynomial::monomial(2, ratio(-3, 4));
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"coeffs":{"2":"-3/4"}}"#);
        assert_eq!(serde_json::from_str::<ExactPolynomial>(&s).unwrap(), q);
        assert!(serde_json::from_str::<ExactPolynomial>(r#"{"coeffs":{"0":"x"}}"#).is_err());
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("3/6"), Some(ratio(1, 2)));
        assert_eq!(parse_rational("-2"), Some(int(-2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(fmt_rational(&ratio(4, 2)), "2");
    }

    fn small_poly() -> impl Strategy<Value = ExactPolynomial> {
        proptest::collection::vec(-5i64..=5, 0..6).prop_map(ExactPolynomial::from_ints)
    }

    proptest! {
        #[test]
        fn evaluation_is_a_ring_map(a in small_poly(), b in small_poly(), x in -4i64..=4) {
            let x = int(x);
            prop_assert_eq!((&a * &b).evaluate(&x), a.evaluate(&x) * b.evaluate(&x));
            prop_assert_eq!((&a + &b).evaluate(&x), a.evaluate(&x) + b.evaluate(&x));
        }

        #[test]
        fn leibniz_rule(a in small_poly(), b in small_poly()) {
            let lhs = (&a * &b).derivative();
            let rhs = &(&a.derivative() * &b) + &(&a * &b.derivative());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
