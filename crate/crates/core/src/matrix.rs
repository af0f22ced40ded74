//! Dense integer matrices and small exact linear algebra over ℚ(√D).

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::ExactScalar;

/// Integer matrix with arbitrary-precision entries, stored row-major.
///
/// Lattice bases are stored as rows.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<String>>", try_from = "Vec<Vec<String>>")]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from rows; all rows must have `cols` entries.
    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged integer matrix");
            for (j, x) in r.iter().enumerate() {
                m[(i, j)] = x.clone().into();
            }
        }
        m
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let owned: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        Self::from_rows(&owned, cols)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vec(&self, i: usize) -> Vec<BigInt> {
        self.row(i).to_vec()
    }

    pub fn row_i64(&self, i: usize) -> Option<Vec<i64>> {
        self.row(i).iter().map(|x| x.to_i64()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row_vec(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    pub fn add_row_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &self[(src, j)] * k;
            self[(dst, j)] += v;
        }
    }

    /// col[dst] += k * col[src]
    pub fn add_col_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &self[(i, src)] * k;
            self[(i, dst)] += v;
        }
    }

    pub fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -&self[(i, j)];
            self[(i, j)] = v;
        }
    }

    pub fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            let v = -&self[(i, j)];
            self[(i, j)] = v;
        }
    }

    /// Rows `range` as a new matrix.
    pub fn select_rows(&self, range: impl IntoIterator<Item = usize>) -> Self {
        let rows: Vec<Vec<BigInt>> = range.into_iter().map(|i| self.row_vec(i)).collect();
        Self::from_rows(&rows, self.cols)
    }

    pub fn stack(&self, below: &IntMatrix) -> Self {
        assert_eq!(self.cols, below.cols);
        let mut data = self.data.clone();
        data.extend(below.data.iter().cloned());
        IntMatrix {
            rows: self.rows + below.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a[(i, k)].is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                    a[(i, j)] = v;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * a[(n - 1, n - 1)].clone()
    }

    pub fn to_exact(&self) -> Vec<Vec<ExactScalar>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| ExactScalar::from_bigint(x.clone())).collect())
            .collect()
    }

    /// Exact rank over ℚ.
    pub fn rank(&self) -> usize {
        rank(&self.to_exact())
    }

    /// Integer inverse of a unimodular matrix, `None` otherwise.
    pub fn unimodular_inverse(&self) -> Option<IntMatrix> {
        if self.rows != self.cols || !self.determinant().abs().is_one() {
            return None;
        }
        let inv = inverse(&self.to_exact())?;
        let rows: Option<Vec<Vec<BigInt>>> = inv
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| x.is_integer().then(|| x.rational_part().to_integer()))
                    .collect()
            })
            .collect();
        Some(IntMatrix::from_rows(&rows?, self.cols))
    }

    /// `v · self` for an integer row vector `v`.
    pub fn left_mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|j| v.iter().enumerate().map(|(i, x)| x * &self[(i, j)]).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;
    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = IntMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = a * &rhs[(k, j)];
                    out[(i, j)] += v;
                }
            }
        }
        out
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = self.clone().into();
        write!(f, "{rows:?}")
    }
}

impl From<IntMatrix> for Vec<Vec<String>> {
    fn from(m: IntMatrix) -> Self {
        (0..m.rows).map(|i| m.row(i).iter().map(|x| x.to_string()).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<String>>> for IntMatrix {
    type Error = String;
    fn try_from(rows: Vec<Vec<String>>) -> Result<Self, String> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut parsed = Vec::with_capacity(rows.len());
        for r in &rows {
            if r.len() != cols {
                return Err("ragged integer matrix".into());
            }
            let pr: Result<Vec<BigInt>, _> = r.iter().map(|s| s.trim().parse::<BigInt>()).collect();
            parsed.push(pr.map_err(|e| e.to_string())?);
        }
        Ok(IntMatrix::from_rows(&parsed, cols))
    }
}

pub type Vector = Vec<ExactScalar>;
pub type Matrix = Vec<Vec<ExactScalar>>;

pub fn dot(a: &[ExactScalar], b: &[ExactScalar]) -> ExactScalar {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `v · m` for a row vector `v`.
pub fn vec_mat(v: &[ExactScalar], m: &[Vec<ExactScalar>]) -> Vector {
    assert_eq!(v.len(), m.len());
    let cols = m.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| v.iter().zip(m).map(|(x, row)| x * &row[j]).sum())
        .collect()
}

pub fn mat_mul(a: &[Vec<ExactScalar>], b: &[Vec<ExactScalar>]) -> Matrix {
    a.iter().map(|row| vec_mat(row, b)).collect()
}

pub fn add_vec(a: &[ExactScalar], b: &[ExactScalar]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vec(a: &[ExactScalar], b: &[ExactScalar]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale_vec(k: &ExactScalar, a: &[ExactScalar]) -> Vector {
    a.iter().map(|x| k * x).collect()
}

pub fn int_vec(v: &[i64]) -> Vector {
    v.iter().map(|&x| ExactScalar::from_int(x)).collect()
}

pub fn big_vec(v: &[BigInt]) -> Vector {
    v.iter().map(|x| ExactScalar::from_bigint(x.clone())).collect()
}

pub fn to_f64_vec(v: &[ExactScalar]) -> Vec<f64> {
    v.iter().map(ExactScalar::to_f64).collect()
}

/// Reduced row echelon form; returns the pivot columns.
pub fn rref(m: &mut [Vec<ExactScalar>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot_row = m[r].clone();
                for (x, p) in m[i].iter_mut().zip(&pivot_row) {
                    *x = &*x - &(&f * p);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &[Vec<ExactScalar>]) -> usize {
    let mut w = m.to_vec();
    rref(&mut w).len()
}

pub fn inverse(m: &[Vec<ExactScalar>]) -> Option<Matrix> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return None;
    }
    if n == 0 {
        return Some(Vec::new());
    }
    let mut aug: Matrix = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { ExactScalar::one() } else { ExactScalar::zero() }));
            row
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn determinant(m: &[Vec<ExactScalar>]) -> ExactScalar {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = ExactScalar::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return ExactScalar::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det = &det * &a[c][c];
        let inv = a[c][c].recip();
        for i in c + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] * &inv;
            let pivot_row = a[c].clone();
            for (x, p) in a[i].iter_mut().zip(&pivot_row) {
                *x = &*x - &(&f * p);
            }
        }
    }
    det
}

/// Solves `x · basis = target` for `x` when `target` lies in the row space
/// of `basis` (rows independent); `None` otherwise.
pub fn solve_in_span(basis: &[Vec<ExactScalar>], target: &[ExactScalar]) -> Option<Vector> {
    let k = basis.len();
    if k == 0 {
        return target.iter().all(ExactScalar::is_zero).then(Vec::new);
    }
    let n = target.len();
    // columns of the transposed system: basisᵀ x = target
    let mut aug: Matrix = (0..n)
        .map(|j| {
            let mut row: Vector = basis.iter().map(|b| b[j].clone()).collect();
            row.push(target[j].clone());
            row
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&k) || pivots.len() < k {
        return None;
    }
    Some((0..k).map(|i| aug[i][k].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bareiss_determinant() {
        let m = IntMatrix::from_i64_rows(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 1]]);
        // 2(3-2) - 0 + 1(1-3) = 0
        assert_eq!(m.determinant(), BigInt::zero());
        let m = IntMatrix::from_i64_rows(&[&[0, 1], &[1, 0]]);
        assert_eq!(m.determinant(), BigInt::from(-1));
    }

    #[test]
    fn unimodular_inverse_roundtrip() {
        let m = IntMatrix::from_i64_rows(&[&[1, 1], &[0, 1]]);
        let inv = m.unimodular_inverse().unwrap();
        assert_eq!(&m * &inv, IntMatrix::identity(2));
        assert!(IntMatrix::from_i64_rows(&[&[2, 0], &[0, 1]]).unimodular_inverse().is_none());
    }

    #[test]
    fn span_solve() {
        let phi: ExactScalar = "(1+√5)/2".parse().unwrap();
        let basis = vec![vec![phi.clone(), ExactScalar::one()]];
        let target = vec![&phi * &phi, phi.clone()];
        assert_eq!(solve_in_span(&basis, &target), Some(vec![phi.clone()]));
        assert_eq!(solve_in_span(&basis, &int_vec(&[1, 0])), None);
    }

    #[test]
    fn exact_inverse() {
        let r2 = ExactScalar::sqrt_of(2);
        let m = vec![vec![r2.clone(), ExactScalar::one()], vec![ExactScalar::one(), r2.clone()]];
        let inv = inverse(&m).unwrap();
        let prod = mat_mul(&m, &inv);
        assert_eq!(prod[0][0], ExactScalar::one());
        assert_eq!(prod[0][1], ExactScalar::zero());
        assert_eq!(determinant(&m), ExactScalar::one());
    }
}
