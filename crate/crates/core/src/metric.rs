//! Exact comparisons involving Euclidean lengths.
//!
//! Lengths of vectors over ℚ(√D) are square roots of field elements. Bounds
//! of the form `√A + √B` and orthonormal coordinates of the form `q·√E` are
//! compared against field elements and integers without rounding.

use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

use crate::matrix::dot;
use crate::scalar::ExactScalar;

/// `Σ √aᵢ` for non-negative field elements `aᵢ` (at most two terms).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(into = "RadicalSumRepr")]
pub struct RadicalSum {
    squares: Vec<ExactScalar>,
}

#[derive(Serialize)]
struct RadicalSumRepr {
    sqrt_terms: Vec<String>,
    value: f64,
}

impl From<RadicalSum> for RadicalSumRepr {
    fn from(r: RadicalSum) -> Self {
        RadicalSumRepr {
            value: r.to_f64(),
            sqrt_terms: r.squares.iter().map(ToString::to_string).collect(),
        }
    }
}

impl RadicalSum {
    pub fn new(squares: Vec<ExactScalar>) -> Self {
        assert!(squares.len() <= 2, "radical sums are limited to two terms");
        assert!(squares.iter().all(|a| a.signum() >= 0), "negative radicand");
        let squares = squares.into_iter().filter(|a| !a.is_zero()).collect();
        RadicalSum { squares }
    }

    pub fn zero() -> Self {
        RadicalSum { squares: Vec::new() }
    }

    pub fn squares(&self) -> &[ExactScalar] {
        &self.squares
    }

    pub fn to_f64(&self) -> f64 {
        self.squares.iter().map(|a| a.to_f64().sqrt()).sum()
    }

    /// Multiplies by a non-negative field element.
    pub fn scaled(&self, k: &ExactScalar) -> Self {
        assert!(k.signum() >= 0);
        let k2 = k * k;
        RadicalSum::new(self.squares.iter().map(|a| &k2 * a).collect())
    }

    /// `√x ≤ self` for `x ≥ 0`.
    pub fn bounds_sqrt(&self, x: &ExactScalar) -> bool {
        match self.squares.as_slice() {
            [] => x.is_zero(),
            [a] => x <= a,
            [a, b] => {
                let lhs = &(x - a) - b;
                lhs.signum() <= 0 || &lhs * &lhs <= &ExactScalar::from_int(4) * &(a * b)
            }
            _ => unreachable!(),
        }
    }

    /// `y ≤ self` for any field element `y`.
    pub fn bounds(&self, y: &ExactScalar) -> bool {
        y.signum() <= 0 || self.bounds_sqrt(&(y * y))
    }
}

/// `q·√e` with `e > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledSqrt {
    pub q: ExactScalar,
    pub e: ExactScalar,
}

impl ScaledSqrt {
    pub fn to_f64(&self) -> f64 {
        self.q.to_f64() * self.e.to_f64().sqrt()
    }

    /// `m ≤ q√e`.
    fn at_least(&self, m: &BigInt) -> bool {
        let m = ExactScalar::from_bigint(m.clone());
        let v2 = &(&self.q * &self.q) * &self.e;
        let m2 = &m * &m;
        if self.q.signum() >= 0 {
            m.signum() <= 0 || m2 <= v2
        } else {
            m.signum() < 0 && m2 >= v2
        }
    }

    pub fn floor(&self) -> BigInt {
        let f = self.to_f64();
        if f.is_finite() && f.abs() < 1e12 && (f - f.round()).abs() > 1e-9 * (1.0 + f.abs()) {
            return BigInt::from(f.floor() as i64);
        }
        let mut m = BigInt::from(f.floor() as i64);
        while !self.at_least(&m) {
            m -= BigInt::one();
        }
        while self.at_least(&(&m + BigInt::one())) {
            m += BigInt::one();
        }
        m
    }
}

/// Orthogonal (not normalised) basis of a subspace, used to read off exact
/// orthonormal coordinates `(x·bₖ)/|bₖ|`.
#[derive(Clone, Debug)]
pub struct OrthoFrame {
    basis: Vec<Vec<ExactScalar>>,
    inv_norms2: Vec<ExactScalar>,
}

impl OrthoFrame {
    /// Gram–Schmidt without normalisation on independent rows.
    pub fn new(rows: &[Vec<ExactScalar>]) -> Self {
        let mut basis: Vec<Vec<ExactScalar>> = Vec::new();
        for r in rows {
            let mut v = r.clone();
            for b in &basis {
                let k = &dot(&v, b) / &dot(b, b);
                v = v.iter().zip(b).map(|(x, y)| x - &(&k * y)).collect();
            }
            basis.push(v);
        }
        let inv_norms2 = basis.iter().map(|b| dot(b, b).recip()).collect();
        OrthoFrame { basis, inv_norms2 }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn coordinates(&self, x: &[ExactScalar]) -> Vec<ScaledSqrt> {
        self.basis
            .iter()
            .zip(&self.inv_norms2)
            .map(|(b, e)| ScaledSqrt {
                q: dot(x, b),
                e: e.clone(),
            })
            .collect()
    }

    /// Index of the half-open unit cube containing `x`.
    pub fn cell(&self, x: &[ExactScalar]) -> Vec<BigInt> {
        self.coordinates(x).iter().map(ScaledSqrt::floor).collect()
    }

    pub fn approx_coordinates(&self, x: &[ExactScalar]) -> Vec<f64> {
        self.coordinates(x).iter().map(ScaledSqrt::to_f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    #[test]
    fn radical_sum_comparisons() {
        // √2 + √3 ≈ 3.146
        let r = RadicalSum::new(vec![s("2"), s("3")]);
        assert!(r.bounds(&s("3.146")));
        assert!(!r.bounds(&s("3.147")));
        assert!(r.bounds(&s("-10")));
        assert!(r.bounds_sqrt(&s("9.89")));
        assert!(!r.bounds_sqrt(&s("9.9")));
        // √(1/4) + √(9/4) = 2 exactly
        let e = RadicalSum::new(vec![s("1/4"), s("9/4")]);
        assert!(e.bounds(&s("2")));
        assert!(!e.bounds(&s("2.000001")));
        assert!(RadicalSum::zero().bounds(&ExactScalar::zero()));
    }

    #[test]
    fn scaled_sqrt_floor() {
        let x = ScaledSqrt { q: s("3"), e: s("2") };
        assert_eq!(x.floor(), BigInt::from(4));
        let y = ScaledSqrt { q: s("-3"), e: s("2") };
        assert_eq!(y.floor(), BigInt::from(-5));
        let z = ScaledSqrt { q: s("2"), e: s("4") };
        assert_eq!(z.floor(), BigInt::from(4));
        let w = ScaledSqrt { q: s("-1/2+1/2√5"), e: s("5") };
        assert_eq!(w.floor(), BigInt::from((w.to_f64()).floor() as i64));
    }

    #[test]
    fn ortho_frame_coordinates() {
        let f = OrthoFrame::new(&[vec![s("1"), s("1")], vec![s("1"), s("0")]]);
        let c = f.approx_coordinates(&[s("1"), s("0")]);
        assert!((c[0] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((c[1] - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
