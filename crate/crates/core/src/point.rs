use alloc::vec::Vec;
use core::ops::Deref;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Identifier of a design-matrix column: a table cell multi-index or an
/// edge `(i, j)` with `i < j`. Ordered lexicographically.
pub type Label = Vec<usize>;

/// A nonnegative integer vector; a point of some fiber once paired with a
/// design matrix and marginal vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiberPoint(Vec<i64>);

impl FiberPoint {
    pub fn new(values: Vec<i64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| v < 0) {
            return Err(Error::Validation(alloc::format!(
                "coordinate {i} is negative ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    /// Caller guarantees nonnegativity.
    pub(crate) fn from_vec_unchecked(values: Vec<i64>) -> Self {
        debug_assert!(values.iter().all(|&v| v >= 0));
        Self(values)
    }

    pub fn zeros(d: usize) -> Self {
        Self(alloc::vec![0; d])
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().sum()
    }

    /// 128-bit prefix of the SHA-256 digest of the little-endian encoding.
    pub fn digest(&self) -> u128 {
        point_digest(&self.0)
    }
}

impl Deref for FiberPoint {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

pub(crate) fn point_digest(values: &[i64]) -> u128 {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    let out = h.finalize();
    let mut prefix = [0u8; 16];
    prefix.copy_from_slice(&out[..16]);
    u128::from_le_bytes(prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_negative_coordinates() {
        assert!(FiberPoint::new(vec![1, -1]).is_err());
        assert_eq!(FiberPoint::new(vec![1, 0]).unwrap().l1_norm(), 1);
    }

    #[test]
    fn digest_distinguishes_permutations() {
        let a = FiberPoint::new(vec![1, 0, 2]).unwrap();
        let b = FiberPoint::new(vec![0, 1, 2]).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }
}
