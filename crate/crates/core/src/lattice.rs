//! Integer lattice structure: Smith normal form, saturation, direct-sum
//! complements and sublattice indices.
//!
//! Lattices are given by integer matrices whose rows form a basis.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::matrix::{big_vec, solve_in_span, IntMatrix};
use crate::scalar::ExactScalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("rank deficient: {rows} rows span a space of rank {rank}")]
    RankDeficient { rows: usize, rank: usize },
    #[error("no complement exists: lattice is not saturated (index {index} in its saturation)")]
    NotSaturated { index: BigInt },
    #[error("not a sublattice: row {row} is not an integer combination of the ambient basis")]
    NotSublattice { row: usize },
    #[error("rank mismatch: lattice of rank {expected} vs sublattice of rank {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0} vs {1} columns")]
    DimensionMismatch(usize, usize),
}

/// `left · input · right = diagonal`, with `left`, `right` unimodular and the
/// diagonal entries non-negative, each dividing the next.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub diagonal: IntMatrix,
    pub left: IntMatrix,
    pub right: IntMatrix,
    /// Inverse of `right`, maintained alongside it.
    pub right_inverse: IntMatrix,
}

impl SmithForm {
    /// The `min(rows, cols)` diagonal entries `d_1 | d_2 | …`.
    pub fn invariants(&self) -> Vec<BigInt> {
        let k = self.diagonal.nrows().min(self.diagonal.ncols());
        (0..k).map(|i| self.diagonal[(i, i)].clone()).collect()
    }

    pub fn rank(&self) -> usize {
        self.invariants().iter().filter(|d| !d.is_zero()).count()
    }
}

/// Smith normal form with a fixed pivoting rule: the nonzero entry of least
/// magnitude in the active block, ties broken by lowest row, then column.
pub fn smith_normal_form(a: &IntMatrix) -> SmithForm {
    let (r, c) = (a.nrows(), a.ncols());
    let mut d = a.clone();
    let mut u = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);
    let mut vinv = IntMatrix::identity(c);

    // column op col[dst] += k col[src], mirrored on v and its inverse
    let col_add = |d: &mut IntMatrix, v: &mut IntMatrix, vinv: &mut IntMatrix, dst, src, k: &BigInt| {
        d.add_col_multiple(dst, src, k);
        v.add_col_multiple(dst, src, k);
        vinv.add_row_multiple(src, dst, &-k);
    };
    let col_swap = |d: &mut IntMatrix, v: &mut IntMatrix, vinv: &mut IntMatrix, a, b| {
        d.swap_cols(a, b);
        v.swap_cols(a, b);
        vinv.swap_rows(a, b);
    };

    for k in 0..r.min(c) {
        loop {
            let Some((pi, pj)) = least_pivot(&d, k) else {
                break;
            };
            d.swap_rows(k, pi);
            u.swap_rows(k, pi);
            col_swap(&mut d, &mut v, &mut vinv, k, pj);

            let p = d[(k, k)].clone();
            for i in k + 1..r {
                let q = d[(i, k)].div_floor(&p);
                if !q.is_zero() {
                    d.add_row_multiple(i, k, &-&q);
                    u.add_row_multiple(i, k, &-&q);
                }
            }
            for j in k + 1..c {
                let q = d[(k, j)].div_floor(&p);
                if !q.is_zero() {
                    col_add(&mut d, &mut v, &mut vinv, j, k, &-&q);
                }
            }
            let dirty = (k + 1..r).any(|i| !d[(i, k)].is_zero())
                || (k + 1..c).any(|j| !d[(k, j)].is_zero());
            if dirty {
                continue;
            }
            // row and column cleared; enforce divisibility of the remaining block
            let offender = (k + 1..r).find(|&i| (k + 1..c).any(|j| !d[(i, j)].is_multiple_of(&p)));
            match offender {
                Some(i) => {
                    d.add_row_multiple(k, i, &BigInt::one());
                    u.add_row_multiple(k, i, &BigInt::one());
                }
                None => break,
            }
        }
        if d[(k, k)].is_negative() {
            d.negate_row(k);
            u.negate_row(k);
        }
    }
    SmithForm {
        diagonal: d,
        left: u,
        right: v,
        right_inverse: vinv,
    }
}

fn least_pivot(d: &IntMatrix, k: usize) -> Option<(usize, usize)> {
    let mut best: Option<(BigInt, usize, usize)> = None;
    for i in k..d.nrows() {
        for j in k..d.ncols() {
            let x = d[(i, j)].abs();
            if x.is_zero() {
                continue;
            }
            if best.as_ref().map_or(true, |(b, _, _)| &x < b) {
                best = Some((x, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

/// Row-style Hermite normal form of a matrix with independent rows: upper
/// echelon, positive pivots, entries above each pivot reduced into `[0, pivot)`.
pub(crate) fn hermite_normal_form(a: &IntMatrix) -> IntMatrix {
    let mut h = a.clone();
    let (rows, cols) = (h.nrows(), h.ncols());
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        loop {
            let mut best: Option<(BigInt, usize)> = None;
            for i in r..rows {
                let x = h[(i, c)].abs();
                if !x.is_zero() && best.as_ref().map_or(true, |(b, _)| &x < b) {
                    best = Some((x, i));
                }
            }
            let Some((_, p)) = best else { break };
            h.swap_rows(r, p);
            let pivot = h[(r, c)].clone();
            let mut done = true;
            for i in r + 1..rows {
                let q = h[(i, c)].div_floor(&pivot);
                h.add_row_multiple(i, r, &-q);
                if !h[(i, c)].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if h[(r, c)].is_zero() {
            continue;
        }
        if h[(r, c)].is_negative() {
            h.negate_row(r);
        }
        let pivot = h[(r, c)].clone();
        for i in 0..r {
            let q = h[(i, c)].div_floor(&pivot);
            h.add_row_multiple(i, r, &-q);
        }
        r += 1;
    }
    h
}

fn check_independent(b: &IntMatrix) -> Result<(), LatticeError> {
    let rank = b.rank();
    if rank < b.nrows() {
        return Err(LatticeError::RankDeficient {
            rows: b.nrows(),
            rank,
        });
    }
    Ok(())
}

/// Basis of `span_ℝ(B) ∩ ℤⁿ` in Hermite normal form.
pub fn saturate(b: &IntMatrix) -> Result<IntMatrix, LatticeError> {
    check_independent(b)?;
    let k = b.nrows();
    if k == 0 {
        return Ok(b.clone());
    }
    let snf = smith_normal_form(b);
    Ok(hermite_normal_form(&snf.right_inverse.select_rows(0..k)))
}

/// Basis of a lattice `C` with `ℤⁿ = L ⊕ C`, for a saturated lattice `L`.
pub fn complement(l: &IntMatrix) -> Result<IntMatrix, LatticeError> {
    check_independent(l)?;
    let (k, n) = (l.nrows(), l.ncols());
    if k == 0 {
        return Ok(IntMatrix::identity(n));
    }
    let snf = smith_normal_form(l);
    let defect: BigInt = snf.invariants().iter().product();
    if !defect.is_one() {
        return Err(LatticeError::NotSaturated { index: defect });
    }
    if k == n {
        return Ok(IntMatrix::zeros(0, n));
    }
    Ok(hermite_normal_form(&snf.right_inverse.select_rows(k..n)))
}

/// Coordinates `C` with `sub = C · lattice`, required to be integral.
pub fn coordinates_in(lattice: &IntMatrix, sub: &IntMatrix) -> Result<IntMatrix, LatticeError> {
    if lattice.ncols() != sub.ncols() {
        return Err(LatticeError::DimensionMismatch(lattice.ncols(), sub.ncols()));
    }
    check_independent(lattice)?;
    let basis = lattice.to_exact();
    let mut rows = Vec::with_capacity(sub.nrows());
    for i in 0..sub.nrows() {
        let x = solve_in_span(&basis, &big_vec(sub.row(i)))
            .ok_or(LatticeError::NotSublattice { row: i })?;
        let ints: Option<Vec<BigInt>> = x
            .iter()
            .map(|v: &ExactScalar| v.is_integer().then(|| v.rational_part().to_integer()))
            .collect();
        rows.push(ints.ok_or(LatticeError::NotSublattice { row: i })?);
    }
    Ok(IntMatrix::from_rows(&rows, lattice.nrows()))
}

/// `[L : L']` for a full-rank sublattice `L' ≤ L`.
pub fn index(lattice: &IntMatrix, sub: &IntMatrix) -> Result<BigInt, LatticeError> {
    if sub.nrows() != lattice.nrows() {
        return Err(LatticeError::RankMismatch {
            expected: lattice.nrows(),
            found: sub.nrows(),
        });
    }
    let c = coordinates_in(lattice, sub)?;
    let det = c.determinant().abs();
    if det.is_zero() {
        return Err(LatticeError::RankMismatch {
            expected: lattice.nrows(),
            found: c.rank(),
        });
    }
    Ok(det)
}

/// `ℤⁿ = A ⊕ B` as ℤ-modules: the stacked bases form a unimodular matrix.
pub fn is_direct_sum_decomposition(a: &IntMatrix, b: &IntMatrix) -> bool {
    let stacked = a.stack(b);
    stacked.nrows() == stacked.ncols() && stacked.determinant().abs().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_i64_rows(rows)
    }

    fn check_snf(a: &IntMatrix) -> SmithForm {
        let s = smith_normal_form(a);
        assert_eq!(&(&s.left * a) * &s.right, s.diagonal);
        assert!(s.left.determinant().abs().is_one());
        assert!(s.right.determinant().abs().is_one());
        assert_eq!(&s.right * &s.right_inverse, IntMatrix::identity(a.ncols()));
        s
    }

    #[test]
    fn snf_examples() {
        assert_eq!(check_snf(&IntMatrix::identity(2)).invariants(), vec![1.into(), 1.into()]);
        let inv = check_snf(&m(&[&[2, 0], &[0, 3]])).invariants();
        assert_eq!(inv, vec![BigInt::from(1), BigInt::from(6)]);
        let inv = check_snf(&m(&[&[2, 4], &[0, 0]])).invariants();
        assert_eq!(inv, vec![BigInt::from(2), BigInt::from(0)]);
    }

    #[test]
    fn snf_is_deterministic() {
        let a = m(&[&[4, -6, 2], &[3, 9, -1]]);
        let s1 = smith_normal_form(&a);
        let s2 = smith_normal_form(&a);
        assert_eq!(s1.left, s2.left);
        assert_eq!(s1.right, s2.right);
    }

    #[test]
    fn saturate_examples() {
        assert_eq!(saturate(&m(&[&[2, 0]])).unwrap(), m(&[&[1, 0]]));
        assert_eq!(saturate(&m(&[&[1, 0]])).unwrap(), m(&[&[1, 0]]));
        assert_eq!(saturate(&m(&[&[2, 2], &[0, 4]])).unwrap(), IntMatrix::identity(2));
        assert_eq!(saturate(&m(&[&[0, -1]])).unwrap(), m(&[&[0, 1]]));
        assert!(matches!(
            saturate(&m(&[&[1, 2], &[2, 4]])),
            Err(LatticeError::RankDeficient { .. })
        ));
    }

    #[test]
    fn complement_examples() {
        assert_eq!(complement(&m(&[&[1, 0]])).unwrap(), m(&[&[0, 1]]));
        assert_eq!(complement(&m(&[&[1, 1]])).unwrap(), m(&[&[0, 1]]));
        assert_eq!(complement(&m(&[&[0, 1]])).unwrap(), m(&[&[1, 0]]));
        assert!(matches!(
            complement(&m(&[&[2, 0]])),
            Err(LatticeError::NotSaturated { .. })
        ));
    }

    #[test]
    fn index_examples() {
        let z2 = IntMatrix::identity(2);
        assert_eq!(index(&z2, &m(&[&[2, 0], &[0, 1]])).unwrap(), BigInt::from(2));
        assert_eq!(index(&z2, &m(&[&[1, 1], &[1, -1]])).unwrap(), BigInt::from(2));
        assert_eq!(index(&z2, &z2).unwrap(), BigInt::from(1));
        assert!(matches!(
            index(&m(&[&[2, 0], &[0, 1]]), &m(&[&[1, 0], &[0, 1]])),
            Err(LatticeError::NotSublattice { .. })
        ));
        assert!(matches!(
            index(&z2, &m(&[&[1, 0]])),
            Err(LatticeError::RankMismatch { .. })
        ));
    }

    #[test]
    fn hnf_canonical() {
        let h = hermite_normal_form(&m(&[&[3, 1], &[1, 0]]));
        assert_eq!(h, IntMatrix::identity(2));
        let h = hermite_normal_form(&m(&[&[2, 2], &[0, 4]]));
        assert_eq!(h, m(&[&[2, 2], &[0, 4]]));
    }
}
