//! Fixed-point binary numbers with a configurable number of fractional bits.
//!
//! Used where inputs are generic reals that no quadratic field can hold. The
//! absolute resolution is `2^-bits`; sign decisions closer to zero than
//! `10^-(bits/4)` are reported as ambiguous instead of being guessed.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::ExactScalar;

pub const DEFAULT_BITS: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("value within 10^-{digits} of zero: sign not decidable at {bits} bits")]
pub struct Ambiguous {
    pub bits: u32,
    pub digits: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseHpError {
    #[error("not a decimal number: {0:?}")]
    Syntax(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct HpFloat {
    /// value = mantissa / 2^bits
    mantissa: BigInt,
    bits: u32,
}

impl HpFloat {
    pub fn zero(bits: u32) -> Self {
        HpFloat {
            mantissa: BigInt::zero(),
            bits,
        }
    }

    pub fn from_int(n: i64, bits: u32) -> Self {
        HpFloat {
            mantissa: BigInt::from(n) << bits,
            bits,
        }
    }

    pub fn from_rational(r: &BigRational, bits: u32) -> Self {
        let num = r.numer() << bits;
        HpFloat {
            mantissa: round_div(&num, r.denom()),
            bits,
        }
    }

    /// Rounds an exact scalar to `bits` fractional bits.
    pub fn from_exact(x: &ExactScalar, bits: u32) -> Self {
        let a = Self::from_rational(x.rational_part(), bits);
        match x.radicand() {
            None => a,
            Some(d) => {
                // carry extra guard bits through the product with √D
                let guard = bits + 64;
                let root = HpFloat {
                    mantissa: (BigInt::from(d) << (2 * guard)).sqrt(),
                    bits: guard,
                };
                let b = Self::from_rational(x.surd_part(), guard);
                (a.with_bits(guard) + b * root).with_bits(bits)
            }
        }
    }

    pub fn parse_decimal(s: &str, bits: u32) -> Result<Self, ParseHpError> {
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty()
            || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
        {
            return Err(ParseHpError::Syntax(s.to_string()));
        }
        let digits = format!("{int_part}{frac_part}");
        let mut num: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| ParseHpError::Syntax(s.to_string()))?
        };
        if neg {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        Ok(Self::from_rational(&BigRational::new(num, den), bits))
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), BigInt::one() << self.bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn with_bits(&self, bits: u32) -> Self {
        let mantissa = match bits.cmp(&self.bits) {
            Ordering::Equal => self.mantissa.clone(),
            Ordering::Greater => &self.mantissa << (bits - self.bits),
            Ordering::Less => round_div(&self.mantissa, &(BigInt::one() << (self.bits - bits))),
        };
        HpFloat { mantissa, bits }
    }

    /// Magnitudes below this are treated as indistinguishable from zero.
    pub fn ambiguity_digits(bits: u32) -> u32 {
        bits / 4
    }

    /// Sign, or `Ambiguous` when `|x| < 10^-(bits/4)`.
    pub fn sign(&self) -> Result<i32, Ambiguous> {
        let digits = Self::ambiguity_digits(self.bits);
        // |m| / 2^bits < 10^-digits  <=>  |m| * 10^digits < 2^bits
        let lhs = self.mantissa.abs() * num_traits::pow(BigInt::from(10), digits as usize);
        if lhs < (BigInt::one() << self.bits) {
            return Err(Ambiguous {
                bits: self.bits,
                digits,
            });
        }
        Ok(if self.mantissa.is_positive() { 1 } else { -1 })
    }

    pub fn floor(&self) -> BigInt {
        self.mantissa.div_floor(&(BigInt::one() << self.bits))
    }

    pub fn abs(&self) -> Self {
        HpFloat {
            mantissa: self.mantissa.abs(),
            bits: self.bits,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        let shift = self.mantissa.bits().saturating_sub(60);
        let top = (&self.mantissa >> shift).to_f64().unwrap_or(0.0);
        top * 2f64.powi(shift as i32 - self.bits as i32)
    }
}

fn round_div(num: &BigInt, den: &BigInt) -> BigInt {
    // nearest, ties upward
    let twice: BigInt = num * BigInt::from(2);
    let q = twice.div_floor(den);
    (q + BigInt::one()).div_floor(&BigInt::from(2))
}

fn align(a: &HpFloat, b: &HpFloat) -> (BigInt, BigInt, u32) {
    let bits = a.bits.max(b.bits);
    (a.with_bits(bits).mantissa, b.with_bits(bits).mantissa, bits)
}

impl Add for HpFloat {
    type Output = HpFloat;
    fn add(self, rhs: HpFloat) -> HpFloat {
        let (x, y, bits) = align(&self, &rhs);
        HpFloat {
            mantissa: x + y,
            bits,
        }
    }
}

impl Sub for HpFloat {
    type Output = HpFloat;
    fn sub(self, rhs: HpFloat) -> HpFloat {
        let (x, y, bits) = align(&self, &rhs);
        HpFloat {
            mantissa: x - y,
            bits,
        }
    }
}

impl Mul for HpFloat {
    type Output = HpFloat;
    fn mul(self, rhs: HpFloat) -> HpFloat {
        let (x, y, bits) = align(&self, &rhs);
        HpFloat {
            mantissa: round_div(&(x * y), &(BigInt::one() << bits)),
            bits,
        }
    }
}

impl Div for HpFloat {
    type Output = HpFloat;
    fn div(self, rhs: HpFloat) -> HpFloat {
        let (x, y, bits) = align(&self, &rhs);
        assert!(!y.is_zero(), "division by zero");
        HpFloat {
            mantissa: round_div(&(x << bits), &y),
            bits,
        }
    }
}

impl Neg for HpFloat {
    type Output = HpFloat;
    fn neg(self) -> HpFloat {
        HpFloat {
            mantissa: -self.mantissa,
            bits: self.bits,
        }
    }
}

impl fmt::Debug for HpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HpFloat({:e}, {} bits)", self.to_f64(), self.bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two_squared() {
        let r2 = HpFloat::from_exact(&ExactScalar::sqrt_of(2), 256);
        let diff = r2.clone() * r2 - HpFloat::from_int(2, 256);
        assert!(diff.sign().is_err(), "difference should be below resolution");
    }

    #[test]
    fn decimal_parse() {
        let x = HpFloat::parse_decimal("-0.125", 64).unwrap();
        assert_eq!(x.to_f64(), -0.125);
        assert_eq!(x.floor(), BigInt::from(-1));
        assert!(HpFloat::parse_decimal("1.2.3", 64).is_err());
        assert!(HpFloat::parse_decimal("abc", 64).is_err());
    }

    #[test]
    fn sign_decides_away_from_zero() {
        let eps = HpFloat::from_rational(&BigRational::new(1.into(), BigInt::from(10).pow(30)), 256);
        assert_eq!(eps.sign(), Ok(1));
        let tiny = HpFloat::from_rational(&BigRational::new(1.into(), BigInt::from(10).pow(70)), 256);
        assert!(tiny.sign().is_err());
    }
}
