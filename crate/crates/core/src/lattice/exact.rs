//! Fraction-free integer row reduction.
//!
//! Rows are kept primitive (gcd of entries 1) after every combination, so the
//! echelon form never needs rational arithmetic. The routines are generic over
//! [`ExactInt`]: `i64` reports overflow through `None`, `BigInt` never does.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub(crate) trait ExactInt: Clone + PartialEq + core::fmt::Debug {
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn checked_mul(&self, rhs: &Self) -> Option<Self>;
    fn checked_sub(&self, rhs: &Self) -> Option<Self>;
    fn checked_neg(&self) -> Option<Self>;
    /// Non-negative gcd; `gcd(0, 0) = 0`.
    fn gcd(&self, rhs: &Self) -> Self;
    /// Division known to be exact.
    fn div_exact(&self, rhs: &Self) -> Self;
    fn to_i64(&self) -> Option<i64>;
}

impl ExactInt for i64 {
    fn zero() -> Self {
        0
    }
    fn from_i64(v: i64) -> Self {
        v
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        i64::checked_mul(*self, *rhs)
    }
    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        i64::checked_sub(*self, *rhs)
    }
    fn checked_neg(&self) -> Option<Self> {
        i64::checked_neg(*self)
    }
    fn gcd(&self, rhs: &Self) -> Self {
        // i64::MIN has no positive counterpart; callers treat the result as a
        // divisor only, so unsigned_abs + cast is safe for every other input.
        let g = Integer::gcd(&self.unsigned_abs(), &rhs.unsigned_abs());
        g as i64
    }
    fn div_exact(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn to_i64(&self) -> Option<i64> {
        Some(*self)
    }
}

impl ExactInt for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        Some(self * rhs)
    }
    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        Some(self - rhs)
    }
    fn checked_neg(&self) -> Option<Self> {
        Some(-self)
    }
    fn gcd(&self, rhs: &Self) -> Self {
        Integer::gcd(self, rhs)
    }
    fn div_exact(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn to_i64(&self) -> Option<i64> {
        ToPrimitive::to_i64(self)
    }
}

/// Reduced row echelon form with primitive rows.
#[derive(Debug, Clone)]
pub(crate) struct Echelon<T> {
    /// Nonzero rows only, one per pivot.
    pub rows: Vec<Vec<T>>,
    /// `pivots[i]` is the pivot column of `rows[i]`; strictly increasing.
    pub pivots: Vec<usize>,
    pub cols: usize,
}

fn make_primitive<T: ExactInt>(row: &mut [T]) {
    let mut g = T::zero();
    for v in row.iter() {
        if !v.is_zero() {
            g = g.gcd(v);
        }
    }
    if g.is_zero() || g == T::from_i64(1) {
        return;
    }
    for v in row.iter_mut() {
        *v = v.div_exact(&g);
    }
}

/// Gauss-Jordan elimination over the integers. Every non-pivot row is cleared
/// in each pivot column (above and below), so the result is a scaled RREF.
pub(crate) fn row_reduce<T: ExactInt>(
    mut rows: Vec<Vec<T>>,
    cols: usize,
) -> core::result::Result<Echelon<T>, Error> {
    let overflow = || Error::Overflow;
    let mut pivots = Vec::new();
    let mut rank = 0usize;
    for col in 0..cols {
        if rank == rows.len() {
            break;
        }
        let Some(found) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, found);
        make_primitive(&mut rows[rank]);
        if rows[rank][col].is_negative() {
            for v in rows[rank].iter_mut() {
                *v = v.checked_neg().ok_or_else(overflow)?;
            }
        }
        let pivot_row = rows[rank].clone();
        let p = pivot_row[col].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == rank || row[col].is_zero() {
                continue;
            }
            let g = p.gcd(&row[col]);
            let fp = p.div_exact(&g);
            let fa = row[col].div_exact(&g);
            for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                let lhs = v.checked_mul(&fp).ok_or_else(overflow)?;
                let rhs = pv.checked_mul(&fa).ok_or_else(overflow)?;
                *v = lhs.checked_sub(&rhs).ok_or_else(overflow)?;
            }
            make_primitive(row);
        }
        pivots.push(col);
        rank += 1;
    }
    rows.truncate(rank);
    Ok(Echelon { rows, pivots, cols })
}

impl<T: ExactInt> Echelon<T> {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// One primitive kernel vector per free column, sign-normalized so the
    /// first nonzero entry is positive.
    pub fn kernel(&self) -> core::result::Result<Vec<Vec<T>>, Error> {
        let overflow = || Error::Overflow;
        let mut is_pivot = alloc::vec![false; self.cols];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        let mut out = Vec::new();
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            // x_free = L, x_pivot(i) = -a[i][free] * L / p_i with L = lcm |p_i|.
            let mut lcm = T::from_i64(1);
            for (row, &pc) in self.rows.iter().zip(&self.pivots) {
                if row[free].is_zero() {
                    continue;
                }
                let p = &row[pc];
                let g = lcm.gcd(p);
                let scaled = lcm.div_exact(&g).checked_mul(p).ok_or_else(overflow)?;
                lcm = if scaled.is_negative() {
                    scaled.checked_neg().ok_or_else(overflow)?
                } else {
                    scaled
                };
            }
            let mut v = alloc::vec![T::zero(); self.cols];
            v[free] = lcm.clone();
            for (row, &pc) in self.rows.iter().zip(&self.pivots) {
                if row[free].is_zero() {
                    continue;
                }
                let factor = lcm.div_exact(&row[pc]);
                v[pc] = row[free]
                    .checked_mul(&factor)
                    .and_then(|x| x.checked_neg())
                    .ok_or_else(overflow)?;
            }
            make_primitive(&mut v);
            if let Some(first) = v.iter().find(|x| !x.is_zero()) {
                if first.is_negative() {
                    for x in v.iter_mut() {
                        *x = x.checked_neg().ok_or_else(overflow)?;
                    }
                }
            }
            out.push(v);
        }
        Ok(out)
    }
}

fn widen(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
        .collect()
}

/// Rank of an integer matrix given as rows, escalating to big integers when
/// 64-bit elimination overflows.
pub fn integer_rank(rows: &[Vec<i64>], cols: usize) -> usize {
    match row_reduce(rows.to_vec(), cols) {
        Ok(e) => e.rank(),
        Err(_) => row_reduce(widen(rows), cols)
            .map(|e| e.rank())
            .expect("big-integer elimination cannot overflow"),
    }
}

/// Kernel basis of an integer matrix (rows of length `cols`).
///
/// Tries checked 64-bit elimination first; on overflow the elimination is
/// repeated with arbitrary precision. Fails with [`Error::Overflow`] only if a
/// final primitive kernel vector does not fit in 64 bits.
pub fn integer_kernel(rows: &[Vec<i64>], cols: usize) -> Result<(usize, Vec<Vec<i64>>)> {
    if let Ok(e) = row_reduce(rows.to_vec(), cols) {
        if let Ok(k) = e.kernel() {
            return Ok((e.rank(), k));
        }
    }
    integer_kernel_wide(rows, cols)
}

/// Arbitrary-precision kernel computation; results narrowed to `i64`.
pub fn integer_kernel_wide(rows: &[Vec<i64>], cols: usize) -> Result<(usize, Vec<Vec<i64>>)> {
    let e = row_reduce(widen(rows), cols)?;
    let wide = e.kernel()?;
    let mut out = Vec::with_capacity(wide.len());
    for v in wide {
        let narrow: Option<Vec<i64>> = v.iter().map(ExactInt::to_i64).collect();
        out.push(narrow.ok_or(Error::Overflow)?);
    }
    Ok((e.rank(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rank_of_identity_and_duplicate_rows() {
        assert_eq!(integer_rank(&[vec![1, 0], vec![0, 1]], 2), 2);
        assert_eq!(integer_rank(&[vec![1, 1], vec![2, 2]], 2), 1);
        assert_eq!(integer_rank(&[vec![0, 0]], 2), 0);
    }

    #[test]
    fn kernel_of_single_row() {
        let (rank, k) = integer_kernel(&[vec![1, 1]], 2).unwrap();
        assert_eq!(rank, 1);
        assert_eq!(k, vec![vec![1, -1]]);
    }

    #[test]
    fn kernel_vectors_are_primitive() {
        // 2x - 4y + 6z = 0 has kernel spanned by (2,1,0), (-3,0,1) -> sign normalized.
        let (_, k) = integer_kernel(&[vec![2, -4, 6]], 3).unwrap();
        assert_eq!(k, vec![vec![2, 1, 0], vec![3, 0, -1]]);
    }

    #[test]
    fn overflow_in_i64_escalates() {
        let big = i64::MAX / 3;
        let rows = vec![vec![big, big - 1, 1], vec![big - 7, big, 3]];
        assert!(matches!(row_reduce(rows.clone(), 3).and_then(|e| e.kernel()), Err(Error::Overflow)));
        let wide = integer_kernel_wide(&rows, 3);
        // The exact kernel exists; whether it fits in i64 decides the outcome.
        match wide {
            Ok((rank, k)) => {
                assert_eq!(rank, 2);
                for v in &k {
                    for r in &rows {
                        let dot: i128 = r.iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum();
                        assert_eq!(dot, 0);
                    }
                }
            }
            Err(e) => assert_eq!(e, Error::Overflow),
        }
    }
}
