//! Exact scalars `a + b√D` over ℚ or a real quadratic field ℚ(√D).
//!
//! Values are kept in a normal form: `D` is square-free and greater than one,
//! and a scalar with `b = 0` is stored as a pure rational (`D` absent). Two
//! scalars are equal iff their normal forms agree, and the sign of any scalar
//! is decided by rational comparisons only.
//!
//! Arithmetic between two irrational scalars from different fields panics;
//! every construction in this crate lives in one field at a time.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseScalarError {
    #[error("empty scalar expression")]
    Empty,
    #[error("unexpected character {0:?} at offset {1}")]
    Unexpected(char, usize),
    #[error("unexpected end of scalar expression")]
    UnexpectedEnd,
    #[error("division by zero in scalar expression")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeRadicand,
    #[error("scalar mixes incompatible quadratic fields")]
    MixedFields,
}

/// An exact element of ℚ(√D).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactScalar {
    rational: BigRational,
    surd: BigRational,
    /// Square-free radicand, `0` for a pure rational.
    radicand: u64,
}

fn square_free_split(d: u64) -> (u64, u64) {
    // d = outer² · inner with inner square-free
    let mut outer = 1u64;
    let mut inner = d;
    let mut p = 2u64;
    while p * p <= inner {
        while inner % (p * p) == 0 {
            inner /= p * p;
            outer *= p;
        }
        p += 1;
    }
    (outer, inner)
}

/// Merges two radicands for a binary operation.
fn common_radicand(a: u64, b: u64) -> u64 {
    match (a, b) {
        (0, d) | (d, 0) => d,
        (x, y) if x == y => x,
        (x, y) => panic!("arithmetic between incompatible quadratic fields Q(√{x}) and Q(√{y})"),
    }
}

impl ExactScalar {
    /// Builds `rational + surd·√radicand`, normalising the radicand.
    pub fn new(rational: BigRational, surd: BigRational, radicand: u64) -> Self {
        if radicand == 0 || surd.is_zero() {
            return Self::from_rational(rational);
        }
        let (outer, inner) = square_free_split(radicand);
        let surd = surd * BigRational::from_integer(BigInt::from(outer));
        if inner == 1 {
            return Self::from_rational(rational + surd);
        }
        ExactScalar {
            rational,
            surd,
            radicand: inner,
        }
    }

    pub fn from_rational(r: BigRational) -> Self {
        ExactScalar {
            rational: r,
            surd: BigRational::zero(),
            radicand: 0,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Self::from_rational(BigRational::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `√d` for a non-negative integer `d`.
    pub fn sqrt_of(d: u64) -> Self {
        Self::new(BigRational::zero(), BigRational::one(), d)
    }

    /// `(p + q√d) / r` from small integers.
    pub fn quadratic(p: i64, q: i64, d: u64, r: i64) -> Self {
        let den = BigInt::from(r);
        Self::new(
            BigRational::new(BigInt::from(p), den.clone()),
            BigRational::new(BigInt::from(q), den),
            d,
        )
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rational
    }

    pub fn surd_part(&self) -> &BigRational {
        &self.surd
    }

    /// The square-free radicand, or `None` for a rational value.
    pub fn radicand(&self) -> Option<u64> {
        (self.radicand != 0).then_some(self.radicand)
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.surd.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.radicand == 0
    }

    pub fn is_integer(&self) -> bool {
        self.is_rational() && self.rational.is_integer()
    }

    /// Exact sign, `-1`, `0` or `+1`.
    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.rational);
        let sb = sign_of(&self.surd);
        if sb == 0 {
            return sa;
        }
        if sa >= 0 && sb > 0 {
            return 1;
        }
        if sa <= 0 && sb < 0 {
            return -1;
        }
        // opposite signs: compare a² with b²·D
        let a2 = &self.rational * &self.rational;
        let b2d = &self.surd * &self.surd * BigRational::from_integer(BigInt::from(self.radicand));
        match a2.cmp(&b2d) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Galois conjugate `a - b√D`.
    pub fn conjugate(&self) -> Self {
        ExactScalar {
            rational: self.rational.clone(),
            surd: -self.surd.clone(),
            radicand: self.radicand,
        }
    }

    /// Field norm `a² - b²D`.
    pub fn norm(&self) -> BigRational {
        &self.rational * &self.rational
            - &self.surd * &self.surd * BigRational::from_integer(BigInt::from(self.radicand))
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        let n = self.norm();
        ExactScalar {
            rational: &self.rational / &n,
            surd: -&self.surd / &n,
            radicand: self.radicand,
        }
    }

    pub fn floor(&self) -> BigInt {
        let approx = self.to_f64().floor();
        let mut k = if approx.is_finite() && approx.abs() < 1e15 {
            BigInt::from(approx as i64)
        } else {
            // huge values: start from the rational part alone
            self.rational.floor().to_integer()
        };
        loop {
            let kk = ExactScalar::from_bigint(k.clone());
            if (self - &kk).signum() < 0 {
                k -= 1;
            } else if (self - &(kk + ExactScalar::one())).signum() >= 0 {
                k += 1;
            } else {
                return k;
            }
        }
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract(&self) -> Self {
        self - &ExactScalar::from_bigint(self.floor())
    }

    pub fn to_f64(&self) -> f64 {
        let a = ratio_to_f64(&self.rational);
        if self.radicand == 0 {
            return a;
        }
        a + ratio_to_f64(&self.surd) * (self.radicand as f64).sqrt()
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = ExactScalar::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator or denominator beyond f64 range
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n - d - 60).max(0);
        let scaled = r / BigRational::from_integer(BigInt::one() << shift);
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    })
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl Default for ExactScalar {
    fn default() -> Self {
        ExactScalar::zero()
    }
}

impl From<i64> for ExactScalar {
    fn from(n: i64) -> Self {
        ExactScalar::from_int(n)
    }
}

impl From<BigInt> for ExactScalar {
    fn from(n: BigInt) -> Self {
        ExactScalar::from_bigint(n)
    }
}

impl From<BigRational> for ExactScalar {
    fn from(r: BigRational) -> Self {
        ExactScalar::from_rational(r)
    }
}

impl PartialOrd for ExactScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl<'a> Add<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn add(self, rhs: &ExactScalar) -> ExactScalar {
        let d = common_radicand(self.radicand, rhs.radicand);
        ExactScalar::new(&self.rational + &rhs.rational, &self.surd + &rhs.surd, d)
    }
}

impl<'a> Sub<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn sub(self, rhs: &ExactScalar) -> ExactScalar {
        let d = common_radicand(self.radicand, rhs.radicand);
        ExactScalar::new(&self.rational - &rhs.rational, &self.surd - &rhs.surd, d)
    }
}

impl<'a> Mul<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn mul(self, rhs: &ExactScalar) -> ExactScalar {
        let d = common_radicand(self.radicand, rhs.radicand);
        let dd = BigRational::from_integer(BigInt::from(d));
        let rational = &self.rational * &rhs.rational + &self.surd * &rhs.surd * dd;
        let surd = &self.rational * &rhs.surd + &self.surd * &rhs.rational;
        ExactScalar::new(rational, surd, d)
    }
}

impl<'a> Div<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn div(self, rhs: &ExactScalar) -> ExactScalar {
        self * &rhs.recip()
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: ExactScalar) -> ExactScalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: &ExactScalar) -> ExactScalar {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<ExactScalar> for &'a ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: ExactScalar) -> ExactScalar {
                self.$m(&rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&ExactScalar> for ExactScalar {
    fn add_assign(&mut self, rhs: &ExactScalar) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&ExactScalar> for ExactScalar {
    fn sub_assign(&mut self, rhs: &ExactScalar) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&ExactScalar> for ExactScalar {
    fn mul_assign(&mut self, rhs: &ExactScalar) {
        *self = &*self * rhs;
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar {
            rational: -self.rational,
            surd: -self.surd,
            radicand: self.radicand,
        }
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        -self.clone()
    }
}

impl Sum for ExactScalar {
    fn sum<I: Iterator<Item = ExactScalar>>(iter: I) -> Self {
        iter.fold(ExactScalar::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for ExactScalar {
    /// Canonical `a+b√D` form, e.g. `1/2+1/2√5`, `-3√2`, `7/3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand == 0 {
            return write!(f, "{}", self.rational);
        }
        if !self.rational.is_zero() {
            write!(f, "{}", self.rational)?;
            if self.surd.is_positive() {
                write!(f, "+")?;
            }
        }
        write!(f, "{}√{}", self.surd, self.radicand)
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} (≈{})", self.to_f64())
    }
}

impl FromStr for ExactScalar {
    type Err = ParseScalarError;

    /// Parses expressions built from integers, decimals, `√n` / `sqrt(n)`,
    /// `+ - * /` and parentheses, e.g. `(1+√5)/2`, `3-2√2`, `-1/2+1/2√5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser {
            chars: s.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
        };
        if p.chars.is_empty() {
            return Err(ParseScalarError::Empty);
        }
        let v = p.expr()?;
        match p.peek() {
            None => Ok(v),
            Some(c) => Err(ParseScalarError::Unexpected(c, p.pos)),
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<ExactScalar, ParseScalarError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                '+' => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = checked(&acc, &t, |a, b| a + b)?;
                }
                '-' => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = checked(&acc, &t, |a, b| a - b)?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<ExactScalar, ParseScalarError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    let u = self.unary()?;
                    acc = checked(&acc, &u, |a, b| a * b)?;
                }
                Some('/') => {
                    self.pos += 1;
                    let u = self.unary()?;
                    if u.is_zero() {
                        return Err(ParseScalarError::DivisionByZero);
                    }
                    acc = checked(&acc, &u, |a, b| a / b)?;
                }
                // implicit product: `2√5`, `1/2√5`
                Some('√') | Some('s') | Some('(') => {
                    let u = self.unary()?;
                    acc = checked(&acc, &u, |a, b| a * b)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ExactScalar, ParseScalarError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<ExactScalar, ParseScalarError> {
        match self.peek() {
            None => Err(ParseScalarError::UnexpectedEnd),
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            Some('√') => {
                self.pos += 1;
                self.radical()
            }
            Some('s') => {
                for c in "sqrt".chars() {
                    self.expect(c)?;
                }
                self.radical()
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) => Err(ParseScalarError::Unexpected(c, self.pos)),
        }
    }

    fn radical(&mut self) -> Result<ExactScalar, ParseScalarError> {
        let inner = if self.peek() == Some('(') {
            self.pos += 1;
            let v = self.expr()?;
            self.expect(')')?;
            v
        } else {
            self.number()?
        };
        if !inner.is_integer() {
            return Err(ParseScalarError::Unexpected('√', self.pos));
        }
        let n = inner.rational.to_integer();
        if n.is_negative() {
            return Err(ParseScalarError::NegativeRadicand);
        }
        let d = n.to_u64().ok_or(ParseScalarError::Unexpected('√', self.pos))?;
        Ok(ExactScalar::sqrt_of(d))
    }

    fn number(&mut self) -> Result<ExactScalar, ParseScalarError> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len = 0u32;
        let mut seen_dot = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                if seen_dot {
                    frac_len += 1;
                }
            } else if c == '.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            return Err(ParseScalarError::Unexpected(
                self.chars.get(start).copied().unwrap_or('.'),
                start,
            ));
        }
        let n: BigInt = digits.parse().expect("ascii digits");
        let den = num_traits::pow(BigInt::from(10), frac_len as usize);
        Ok(ExactScalar::from_rational(BigRational::new(n, den)))
    }

    fn expect(&mut self, c: char) -> Result<(), ParseScalarError> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(ParseScalarError::Unexpected(x, self.pos)),
            None => Err(ParseScalarError::UnexpectedEnd),
        }
    }
}

fn checked(
    a: &ExactScalar,
    b: &ExactScalar,
    op: impl Fn(&ExactScalar, &ExactScalar) -> ExactScalar,
) -> Result<ExactScalar, ParseScalarError> {
    if a.radicand != 0 && b.radicand != 0 && a.radicand != b.radicand {
        return Err(ParseScalarError::MixedFields);
    }
    Ok(op(a, b))
}

/// Common field of a collection of scalars (`0` when all are rational).
pub fn common_field<'a>(values: impl IntoIterator<Item = &'a ExactScalar>) -> Option<u64> {
    let mut d = 0u64;
    for v in values {
        if v.radicand != 0 {
            if d != 0 && d != v.radicand {
                return None;
            }
            d = v.radicand;
        }
    }
    Some(d)
}

/// Least common multiple of the denominators of `a` and `b` parts.
pub(crate) fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a ExactScalar>) -> BigInt {
    let mut l = BigInt::one();
    for v in values {
        l = l.lcm(v.rational.denom());
        l = l.lcm(v.surd.denom());
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    #[test]
    fn sign_examples() {
        assert_eq!(ExactScalar::zero().signum(), 0);
        assert_eq!(ExactScalar::quadratic(-1, 1, 2, 1).signum(), 1);
        assert_eq!(ExactScalar::quadratic(3, -2, 2, 1).signum(), 1);
        assert_eq!(ExactScalar::quadratic(-3, 2, 2, 1).signum(), -1);
        // 3 - √9 normalises to zero
        assert_eq!(ExactScalar::quadratic(3, -1, 9, 1).signum(), 0);
    }

    #[test]
    fn normal_form() {
        assert_eq!(ExactScalar::sqrt_of(8), s("2√2"));
        assert_eq!(ExactScalar::sqrt_of(4), ExactScalar::from_int(2));
        assert!(ExactScalar::quadratic(1, 0, 5, 1).is_rational());
    }

    #[test]
    fn golden_ratio_identity() {
        let phi = s("(1+√5)/2");
        assert_eq!(&phi * &phi, &phi + &ExactScalar::one());
        assert_eq!(phi.recip(), &phi - &ExactScalar::one());
        assert_eq!(phi.floor(), BigInt::from(1));
        assert_eq!(s("-1/2+1/2√5").fract(), s("-1/2+1/2√5"));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(s("1/2+1/2√5"), s("(1+sqrt(5))/2"));
        assert_eq!(s("3-2√2"), s("(√2-1)*(√2-1)"));
        assert_eq!(s("0.25"), ExactScalar::ratio(1, 4));
        assert_eq!(s("-√3"), -ExactScalar::sqrt_of(3));
        assert!(matches!("√2+√3".parse::<ExactScalar>(), Err(ParseScalarError::MixedFields)));
        assert!("1/0".parse::<ExactScalar>().is_err());
        assert!("".parse::<ExactScalar>().is_err());
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(s("(1+√5)/2").to_string(), "1/2+1/2√5");
        assert_eq!(s("3-2√2").to_string(), "3-2√2");
        assert_eq!(s("-√8").to_string(), "-2√2");
        assert_eq!(s("7/3").to_string(), "7/3");
    }

    #[test]
    #[should_panic(expected = "incompatible quadratic fields")]
    fn mixed_fields_panic() {
        let _ = ExactScalar::sqrt_of(2) + ExactScalar::sqrt_of(3);
    }
}
