//! Exhaustive fiber enumeration, used as a ground-truth oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::models::DesignMatrix;
use crate::point::FiberPoint;

struct Search<'a> {
    m: &'a DesignMatrix,
    /// Rows touching each column, with the entry.
    support: Vec<Vec<(usize, i64)>>,
    /// `suffix[j][r]`: largest value row `r` can still gain from columns `j..`.
    suffix: Vec<Vec<i64>>,
    residual: Vec<i64>,
    current: Vec<i64>,
    out: Vec<FiberPoint>,
    cap: usize,
}

impl Search<'_> {
    fn run(&mut self, j: usize) -> Result<()> {
        let d = self.m.d();
        if self.residual.iter().zip(&self.suffix[j]).any(|(&r, &s)| r > s) {
            return Ok(());
        }
        if j == d {
            if self.residual.iter().all(|&r| r == 0) {
                if self.out.len() == self.cap {
                    return Err(Error::OracleTooLarge { cap: self.cap });
                }
                self.out.push(FiberPoint::from_vec_unchecked(self.current.clone()));
            }
            return Ok(());
        }
        let hi = self.support[j]
            .iter()
            .map(|&(r, a)| self.residual[r] / a)
            .min()
            .unwrap_or(0);
        for x in 0..=hi {
            self.current[j] = x;
            for &(r, a) in &self.support[j] {
                self.residual[r] -= a * x;
            }
            let res = self.run(j + 1);
            for &(r, a) in &self.support[j] {
                self.residual[r] += a * x;
            }
            res?;
        }
        self.current[j] = 0;
        Ok(())
    }
}

/// All `x >= 0` with `M x = b`, in lexicographic order.
///
/// Requires a nonnegative `M` in which every column has a positive entry, so
/// each coordinate is bounded by the marginals.
pub fn enumerate_fiber(m: &DesignMatrix, b: &[i64], cap: usize) -> Result<Vec<FiberPoint>> {
    let (n, d) = (m.n(), m.d());
    if b.len() != n {
        return Err(Error::Validation(alloc::format!("marginal vector has {} entries, expected {n}", b.len())));
    }
    if m.rows().any(|r| r.iter().any(|&a| a < 0)) {
        return Err(Error::Validation("enumeration needs a nonnegative design matrix".into()));
    }
    let support: Vec<Vec<(usize, i64)>> = (0..d)
        .map(|c| (0..n).filter(|&r| m.entry(r, c) > 0).map(|r| (r, m.entry(r, c))).collect())
        .collect();
    if support.iter().any(Vec::is_empty) {
        return Err(Error::Validation("a zero column makes the fiber unbounded".into()));
    }
    if b.iter().any(|&v| v < 0) {
        return Ok(Vec::new());
    }
    let upper: Vec<i64> = support
        .iter()
        .map(|s| s.iter().map(|&(r, a)| b[r] / a).min().unwrap_or(0))
        .collect();
    let mut suffix = vec![vec![0i64; n]; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1].clone();
        for &(r, a) in &support[j] {
            suffix[j][r] += a * upper[j];
        }
    }
    let mut search = Search {
        m,
        support,
        suffix,
        residual: b.to_vec(),
        current: vec![0; d],
        out: Vec::new(),
        cap,
    };
    search.run(0)?;
    // Depth-first with increasing values at each column is already lexicographic.
    Ok(search.out)
}
