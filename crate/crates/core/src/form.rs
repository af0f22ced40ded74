//! Affine forms `γ ↦ c·γ + c₀` over ℚ(√D), evaluated exactly at integer points.
//!
//! A form is stored over a common denominator as
//! `(p·γ + p₀ + (q·γ + q₀)√D) / den`, so that evaluation at an integer point
//! needs only integer arithmetic. A machine-word path with overflow checks is
//! tried first and arbitrary precision is used when it overflows.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::scalar::{common_field, denominator_lcm, ExactScalar};

/// Position of a value relative to the half-open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Below,
    AtZero,
    Inside,
    AtOne,
    Above,
}

impl Placement {
    pub fn in_half_open(self) -> bool {
        matches!(self, Placement::AtZero | Placement::Inside)
    }

    pub fn on_boundary(self) -> bool {
        matches!(self, Placement::AtZero | Placement::AtOne)
    }

    pub fn in_closed(self) -> bool {
        !matches!(self, Placement::Below | Placement::Above)
    }
}

#[derive(Clone, Debug)]
struct SmallForm {
    den: i128,
    p: Vec<i128>,
    p0: i128,
    q: Vec<i128>,
    q0: i128,
}

#[derive(Clone, Debug)]
pub struct AffineForm {
    radicand: u64,
    den: BigInt,
    p: Vec<BigInt>,
    p0: BigInt,
    q: Vec<BigInt>,
    q0: BigInt,
    small: Option<SmallForm>,
    approx: (Vec<f64>, f64),
}

fn scaled(x: &BigRational, l: &BigInt) -> BigInt {
    (x * BigRational::from_integer(l.clone())).to_integer()
}

impl AffineForm {
    /// Panics when the coefficients span two different quadratic fields.
    pub fn new(coeffs: &[ExactScalar], constant: &ExactScalar) -> Self {
        let all = || coeffs.iter().chain(std::iter::once(constant));
        let radicand = common_field(all()).expect("affine form over mixed quadratic fields");
        let den = denominator_lcm(all());
        let split = |x: &ExactScalar| (scaled(x.rational_part(), &den), scaled(x.surd_part(), &den));
        let (p, q): (Vec<BigInt>, Vec<BigInt>) = coeffs.iter().map(split).unzip();
        let (p0, q0) = split(constant);
        let small = (|| {
            Some(SmallForm {
                den: den.to_i128()?,
                p: p.iter().map(ToPrimitive::to_i128).collect::<Option<_>>()?,
                p0: p0.to_i128()?,
                q: q.iter().map(ToPrimitive::to_i128).collect::<Option<_>>()?,
                q0: q0.to_i128()?,
            })
        })();
        let approx = (coeffs.iter().map(ExactScalar::to_f64).collect(), constant.to_f64());
        AffineForm {
            radicand,
            den,
            p,
            p0,
            q,
            q0,
            small,
            approx,
        }
    }

    /// Coefficients and constant term as exact scalars.
    pub fn coefficients(&self) -> (Vec<ExactScalar>, ExactScalar) {
        let mk = |a: &BigInt, b: &BigInt| {
            ExactScalar::new(
                BigRational::new(a.clone(), self.den.clone()),
                BigRational::new(b.clone(), self.den.clone()),
                self.radicand,
            )
        };
        let coeffs = self.p.iter().zip(&self.q).map(|(a, b)| mk(a, b)).collect();
        (coeffs, mk(&self.p0, &self.q0))
    }

    pub fn arity(&self) -> usize {
        self.p.len()
    }

    fn big_parts(&self, g: &[i64]) -> (BigInt, BigInt) {
        let mut a = self.p0.clone();
        let mut b = self.q0.clone();
        for ((pi, qi), &x) in self.p.iter().zip(&self.q).zip(g) {
            let x = BigInt::from(x);
            a += pi * &x;
            b += qi * &x;
        }
        (a, b)
    }

    fn small_parts(&self, g: &[i64]) -> Option<(i128, i128)> {
        let s = self.small.as_ref()?;
        let mut a = s.p0;
        let mut b = s.q0;
        for ((pi, qi), &x) in s.p.iter().zip(&s.q).zip(g) {
            a = a.checked_add(pi.checked_mul(x as i128)?)?;
            b = b.checked_add(qi.checked_mul(x as i128)?)?;
        }
        Some((a, b))
    }

    pub fn eval(&self, g: &[i64]) -> ExactScalar {
        assert_eq!(g.len(), self.arity());
        let (a, b) = self.big_parts(g);
        ExactScalar::new(
            BigRational::new(a, self.den.clone()),
            BigRational::new(b, self.den.clone()),
            self.radicand,
        )
    }

    pub fn approx(&self, g: &[i64]) -> f64 {
        self.approx.0.iter().zip(g).map(|(c, &x)| c * x as f64).sum::<f64>() + self.approx.1
    }

    pub fn sign(&self, g: &[i64]) -> i32 {
        if let Some((a, b)) = self.small_parts(g) {
            if let Some(s) = small_sign(a, b, self.radicand) {
                return s;
            }
        }
        let (a, b) = self.big_parts(g);
        big_sign(&a, &b, self.radicand)
    }

    /// Exact placement of the value relative to `[0, 1)`.
    pub fn placement(&self, g: &[i64]) -> Placement {
        let signs = self.small_parts(g).and_then(|(a, b)| {
            let s = self.small.as_ref()?;
            let lo = small_sign(a, b, self.radicand)?;
            let hi = small_sign(a.checked_sub(s.den)?, b, self.radicand)?;
            Some((lo, hi))
        });
        let (lo, hi) = signs.unwrap_or_else(|| {
            let (a, b) = self.big_parts(g);
            let lo = big_sign(&a, &b, self.radicand);
            let hi = big_sign(&(a - &self.den), &b, self.radicand);
            (lo, hi)
        });
        match (lo, hi) {
            (-1, _) => Placement::Below,
            (0, _) => Placement::AtZero,
            (_, -1) => Placement::Inside,
            (_, 0) => Placement::AtOne,
            _ => Placement::Above,
        }
    }
}

fn small_sign(a: i128, b: i128, d: u64) -> Option<i32> {
    let (sa, sb) = (a.signum() as i32, b.signum() as i32);
    if sb == 0 || d == 0 {
        return Some(sa);
    }
    if sa == 0 || sa == sb {
        return Some(sb);
    }
    let a2 = a.checked_mul(a)?;
    let b2d = b.checked_mul(b)?.checked_mul(d as i128)?;
    Some(match a2.cmp(&b2d) {
        std::cmp::Ordering::Greater => sa,
        std::cmp::Ordering::Less => sb,
        std::cmp::Ordering::Equal => 0,
    })
}

fn big_sign(a: &BigInt, b: &BigInt, d: u64) -> i32 {
    let sig = |x: &BigInt| {
        if x.is_positive() {
            1
        } else if x.is_negative() {
            -1
        } else {
            0
        }
    };
    let (sa, sb) = (sig(a), sig(b));
    if sb == 0 || d == 0 {
        return sa;
    }
    if sa == 0 || sa == sb {
        return sb;
    }
    let a2 = a * a;
    let b2d = b * b * BigInt::from(d);
    match a2.cmp(&b2d) {
        std::cmp::Ordering::Greater => sa,
        std::cmp::Ordering::Less => sb,
        std::cmp::Ordering::Equal => 0,
    }
}

/// `⌈x⌉` computed exactly.
pub fn ceil(x: &ExactScalar) -> BigInt {
    let f = x.floor();
    if ExactScalar::from_bigint(f.clone()) == *x {
        f
    } else {
        f + BigInt::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    #[test]
    fn eval_matches_scalar_arithmetic() {
        let c = [s("(1+√5)/2"), s("-1/3"), s("2√5")];
        let c0 = s("1/7");
        let f = AffineForm::new(&c, &c0);
        for g in [[0i64, 0, 0], [1, 2, 3], [-5, 7, -11], [1000, -3, 2]] {
            let direct = c
                .iter()
                .zip(g)
                .fold(c0.clone(), |acc, (ci, x)| &acc + &(ci * &ExactScalar::from_int(x)));
            assert_eq!(f.eval(&g), direct);
            assert_eq!(f.sign(&g), direct.signum());
        }
    }

    #[test]
    fn placement_boundaries() {
        let f = AffineForm::new(&[s("1/2")], &ExactScalar::zero());
        assert_eq!(f.placement(&[0]), Placement::AtZero);
        assert_eq!(f.placement(&[1]), Placement::Inside);
        assert_eq!(f.placement(&[2]), Placement::AtOne);
        assert_eq!(f.placement(&[3]), Placement::Above);
        assert_eq!(f.placement(&[-1]), Placement::Below);
    }

    #[test]
    fn overflow_falls_back_to_big_integers() {
        let f = AffineForm::new(&[s("1+√2"), s("-1")], &ExactScalar::zero());
        // huge inputs overflow the i128 squares
        let g = [i64::MAX / 2, i64::MAX];
        assert_eq!(f.sign(&g), f.eval(&g).signum());
    }

    #[test]
    fn ceil_exact() {
        assert_eq!(ceil(&s("1/2")), BigInt::from(1));
        assert_eq!(ceil(&s("2")), BigInt::from(2));
        assert_eq!(ceil(&s("-1/2+0√5")), BigInt::from(0));
    }
}
