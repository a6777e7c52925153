//! Lattice bases of design matrices and move arithmetic.

pub mod decompose;
pub mod enumerate;
pub(crate) mod exact;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::DesignMatrix;

pub use decompose::{decompose_initial_point, lift_move, lift_with_map, Graph, Strategy, SubProblem, MIN_SUBPROBLEM_NODES};
pub use enumerate::enumerate_fiber;
pub use exact::{integer_kernel, integer_rank};

/// Sparse integer vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseVector {
    entries: Vec<(u32, i64)>,
}

impl SparseVector {
    pub fn from_dense(v: &[i64]) -> Self {
        let entries = v
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0)
            .map(|(i, &x)| (i as u32, x))
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[(u32, i64)] {
        &self.entries
    }

    pub fn to_dense(&self, dim: usize) -> Vec<i64> {
        let mut v = vec![0; dim];
        for &(i, x) in &self.entries {
            v[i as usize] = x;
        }
        v
    }

    /// `target += scale * self`.
    pub fn add_scaled_to(&self, scale: i64, target: &mut [i64]) {
        for &(i, x) in &self.entries {
            target[i as usize] += scale * x;
        }
    }
}

/// `d - rank(M)` linearly independent integer vectors of `ker M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBasis {
    dim: usize,
    vectors: Vec<SparseVector>,
}

impl LatticeBasis {
    /// Wraps dense vectors of length `dim` without checking kernel membership.
    pub fn from_dense(dim: usize, vectors: &[Vec<i64>]) -> Result<Self> {
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::Validation(alloc::format!(
                "basis vector of length {} in a basis of dimension {dim}",
                bad.len()
            )));
        }
        Ok(Self { dim, vectors: vectors.iter().map(|v| SparseVector::from_dense(v)).collect() })
    }

    /// Number of vectors `c`.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn dense(&self, i: usize) -> Vec<i64> {
        self.vectors[i].to_dense(self.dim)
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<i64>> {
        (0..self.len()).map(|i| self.dense(i)).collect()
    }

    /// Hex SHA-256 over the dimension and the dense vectors; ties a trained
    /// policy to the basis it was trained against.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for v in &self.vectors {
            for x in v.to_dense(self.dim) {
                h.update(x.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| alloc::format!("{b:02x}")).collect()
    }
}

/// An integer vector of `ker M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move(pub Vec<i64>);

impl Move {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }
    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

/// Kernel basis by exact fraction-free elimination. Vectors are primitive and
/// their first nonzero entry is positive.
pub fn compute_lattice_basis(m: &DesignMatrix) -> Result<LatticeBasis> {
    if m.n() == 0 || m.d() == 0 {
        return Err(Error::Validation("design matrix is empty".into()));
    }
    let rows: Vec<Vec<i64>> = m.rows().map(<[i64]>::to_vec).collect();
    let (_, kernel) = integer_kernel(&rows, m.d())?;
    LatticeBasis::from_dense(m.d(), &kernel)
}

/// `sum_i coeffs[i] * l_i`.
pub fn combine_moves(coeffs: &[i64], basis: &LatticeBasis) -> Result<Move> {
    let mut delta = vec![0; basis.dim()];
    combine_into(coeffs, basis, &mut delta)?;
    Ok(Move(delta))
}

/// Adds `sum_i coeffs[i] * l_i` to `target`.
pub fn combine_into(coeffs: &[i64], basis: &LatticeBasis, target: &mut [i64]) -> Result<()> {
    if coeffs.len() != basis.len() {
        return Err(Error::Contract(alloc::format!(
            "{} coefficients for a basis of {} vectors",
            coeffs.len(),
            basis.len()
        )));
    }
    if target.len() != basis.dim() {
        return Err(Error::Contract("target length differs from the basis dimension".into()));
    }
    for (&a, v) in coeffs.iter().zip(basis.vectors()) {
        if a != 0 {
            v.add_scaled_to(a, target);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_design_matrix, ModelFamily, ModelSpec};

    #[test]
    fn single_row_kernel() {
        let m = DesignMatrix::from_rows(&[vec![1, 1]]).unwrap();
        let b = compute_lattice_basis(&m).unwrap();
        assert_eq!(b.to_dense_rows(), vec![vec![1, -1]]);
    }

    #[test]
    fn identity_has_empty_basis() {
        let m = DesignMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert!(compute_lattice_basis(&m).unwrap().is_empty());
    }

    #[test]
    fn independence_2x2_basic_move() {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::Independence { rows: 2, cols: 2 })).unwrap();
        let b = compute_lattice_basis(&m).unwrap();
        assert_eq!(b.to_dense_rows(), vec![vec![1, -1, -1, 1]]);
    }

    #[test]
    fn combine_examples() {
        let b = LatticeBasis::from_dense(4, &[vec![1, -1, -1, 1]]).unwrap();
        assert_eq!(combine_moves(&[2], &b).unwrap().0, vec![2, -2, -2, 2]);
        assert!(combine_moves(&[0], &b).unwrap().is_zero());
        let b3 = LatticeBasis::from_dense(3, &[vec![1, -1, 0], vec![0, 1, -1]]).unwrap();
        assert_eq!(combine_moves(&[1, -1], &b3).unwrap().0, vec![1, -2, 1]);
        assert!(combine_moves(&[1], &b3).is_err());
    }

    #[test]
    fn checksum_is_stable_and_sensitive() {
        let a = LatticeBasis::from_dense(3, &[vec![1, -1, 0]]).unwrap();
        let b = LatticeBasis::from_dense(3, &[vec![1, 0, -1]]).unwrap();
        assert_eq!(a.checksum(), a.clone().checksum());
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum().len(), 64);
    }
}
