//! Design matrices for the supported log-linear families, maximum-likelihood
//! expected counts, and the Pearson goodness-of-fit statistic.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::lattice::exact::integer_rank;
use crate::point::{FiberPoint, Label};

/// Largest number of design-matrix columns built by default.
pub const DEFAULT_MAX_COLUMNS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    /// Two-way table, row and column margins.
    Independence { rows: usize, cols: usize },
    /// Three-way table, all three two-way margins.
    AllTwoWay { dims: [usize; 3] },
    /// Undirected graph on `nodes` vertices, degree sequence.
    BetaModel { nodes: usize },
}

impl ModelFamily {
    /// Number of cells (or node pairs) before structural zeros are removed.
    pub fn full_cells(&self) -> usize {
        match *self {
            ModelFamily::Independence { rows, cols } => rows * cols,
            ModelFamily::AllTwoWay { dims } => dims[0] * dims[1] * dims[2],
            ModelFamily::BetaModel { nodes } => nodes * nodes.saturating_sub(1) / 2,
        }
    }

    /// Table dimensions; `None` for the graph family.
    pub fn table_dims(&self) -> Option<Vec<usize>> {
        match *self {
            ModelFamily::Independence { rows, cols } => Some(vec![rows, cols]),
            ModelFamily::AllTwoWay { dims } => Some(dims.to_vec()),
            ModelFamily::BetaModel { .. } => None,
        }
    }

    /// Label of full cell `index` (0-based multi-index, or node pair).
    pub fn cell_label(&self, index: usize) -> Label {
        match *self {
            ModelFamily::Independence { cols, .. } => vec![index / cols, index % cols],
            ModelFamily::AllTwoWay { dims } => {
                let plane = dims[1] * dims[2];
                vec![index / plane, (index % plane) / dims[2], index % dims[2]]
            }
            ModelFamily::BetaModel { nodes } => {
                let (i, j) = edge_from_index(nodes, index);
                vec![i, j]
            }
        }
    }
}

/// Column index of node pair `(i, j)`, `i < j`, in the lexicographic order.
pub fn edge_index(nodes: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < nodes);
    i * nodes - i * (i + 1) / 2 + (j - i - 1)
}

fn edge_from_index(nodes: usize, mut index: usize) -> (usize, usize) {
    let mut i = 0;
    while index >= nodes - i - 1 {
        index -= nodes - i - 1;
        i += 1;
    }
    (i, i + 1 + index)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// Full-cell indices constrained to zero.
    pub structural_zeros: BTreeSet<usize>,
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Self {
        Self { family, structural_zeros: BTreeSet::new() }
    }

    pub fn with_structural_zeros(family: ModelFamily, zeros: impl IntoIterator<Item = usize>) -> Self {
        Self { family, structural_zeros: zeros.into_iter().collect() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            ModelFamily::Independence { rows, cols } => rows >= 2 && cols >= 2,
            ModelFamily::AllTwoWay { dims } => dims.iter().all(|&k| k >= 2),
            ModelFamily::BetaModel { nodes } => nodes >= 2,
        };
        if !ok {
            return Err(Error::Validation("every model dimension must be at least 2".into()));
        }
        let cells = self.family.full_cells();
        if let Some(&bad) = self.structural_zeros.iter().find(|&&z| z >= cells) {
            return Err(Error::Validation(format!(
                "structural zero {bad} is not a cell index (model has {cells} cells)"
            )));
        }
        if self.structural_zeros.len() == cells {
            return Err(Error::Validation("every cell is a structural zero".into()));
        }
        Ok(())
    }
}

/// Integer design matrix `M` (n x d, row-major) of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    spec: Option<ModelSpec>,
    n: usize,
    d: usize,
    entries: Vec<i64>,
    rank: usize,
    column_labels: Vec<Label>,
    kept_cells: Vec<usize>,
    deleted_labels: Vec<Label>,
    families: Vec<Range<usize>>,
}

pub fn build_design_matrix(spec: &ModelSpec) -> Result<DesignMatrix> {
    build_design_matrix_with_limit(spec, DEFAULT_MAX_COLUMNS)
}

/// Builds the design matrix; structural zeros are realized by dropping their
/// columns.
pub fn build_design_matrix_with_limit(spec: &ModelSpec, max_columns: usize) -> Result<DesignMatrix> {
    spec.validate()?;
    let full = spec.family.full_cells();
    if full > max_columns {
        return Err(Error::Sizing { requested: full, max: max_columns });
    }
    // Full-cell -> list of rows with a 1.
    let (n, families, support): (usize, Vec<Range<usize>>, Vec<Vec<usize>>) = match spec.family {
        ModelFamily::Independence { rows, cols } => {
            let support = (0..full).map(|k| vec![k / cols, rows + k % cols]).collect();
            (rows + cols, vec![0..rows, rows..rows + cols], support)
        }
        ModelFamily::AllTwoWay { dims: [a, b, c] } => {
            let ab = a * b;
            let ac = a * c;
            let bc = b * c;
            let support = (0..full)
                .map(|k| {
                    let (i, j, l) = (k / (b * c), (k / c) % b, k % c);
                    vec![i * b + j, ab + i * c + l, ab + ac + j * c + l]
                })
                .collect();
            (ab + ac + bc, vec![0..ab, ab..ab + ac, ab + ac..ab + ac + bc], support)
        }
        ModelFamily::BetaModel { nodes } => {
            let support = (0..full)
                .map(|k| {
                    let (i, j) = edge_from_index(nodes, k);
                    vec![i, j]
                })
                .collect();
            (nodes, Vec::new(), support)
        }
    };
    let kept_cells: Vec<usize> = (0..full).filter(|k| !spec.structural_zeros.contains(k)).collect();
    let d = kept_cells.len();
    let mut entries = vec![0i64; n * d];
    for (col, &cell) in kept_cells.iter().enumerate() {
        for &r in &support[cell] {
            entries[r * d + col] = 1;
        }
    }
    let column_labels = kept_cells.iter().map(|&k| spec.family.cell_label(k)).collect();
    let deleted_labels = spec.structural_zeros.iter().map(|&k| spec.family.cell_label(k)).collect();
    let rows: Vec<Vec<i64>> = entries.chunks(d).map(|r| r.to_vec()).collect();
    let rank = integer_rank(&rows, d);
    Ok(DesignMatrix {
        spec: Some(spec.clone()),
        n,
        d,
        entries,
        rank,
        column_labels,
        kept_cells,
        deleted_labels,
        families,
    })
}

impl DesignMatrix {
    /// A design matrix from explicit rows, for callers outside the supported
    /// families (labels are the column indices).
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if n == 0 || d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Validation("design matrix rows must be nonempty and equal length".into()));
        }
        let entries = rows.concat();
        Ok(Self {
            spec: None,
            n,
            d,
            entries,
            rank: integer_rank(rows, d),
            column_labels: (0..d).map(|c| vec![c]).collect(),
            kept_cells: (0..d).collect(),
            deleted_labels: Vec::new(),
            families: Vec::new(),
        })
    }

    /// The generating model; `None` for matrices built with [`DesignMatrix::from_rows`].
    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    fn model(&self) -> Result<&ModelSpec> {
        self.spec
            .as_ref()
            .ok_or_else(|| Error::Validation("design matrix has no model family".into()))
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn entry(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.d + col]
    }
    pub fn row(&self, row: usize) -> &[i64] {
        &self.entries[row * self.d..(row + 1) * self.d]
    }
    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        self.entries.chunks(self.d)
    }
    pub fn column_labels(&self) -> &[Label] {
        &self.column_labels
    }
    /// Labels of the columns removed as structural zeros.
    pub fn deleted_labels(&self) -> &[Label] {
        &self.deleted_labels
    }
    /// Full-cell index of each surviving column.
    pub fn kept_cells(&self) -> &[usize] {
        &self.kept_cells
    }
    /// Row ranges of the marginal families (empty for the graph family).
    pub fn families(&self) -> &[Range<usize>] {
        &self.families
    }

    pub fn column_of_label(&self, label: &[usize]) -> Option<usize> {
        self.column_labels.binary_search_by(|l| l.as_slice().cmp(label)).ok()
    }

    /// `M x`.
    pub fn marginals(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.d, "vector length must equal the column count");
        self.rows().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn marginals_f64(&self, x: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum())
            .collect()
    }

    pub fn in_kernel(&self, v: &[i64]) -> bool {
        v.len() == self.d && self.marginals(v).iter().all(|&m| m == 0)
    }

    pub fn is_feasible(&self, x: &[i64], b: &[i64]) -> bool {
        x.len() == self.d && x.iter().all(|&v| v >= 0) && self.marginals(x) == b
    }

    /// Full-table vector with zeros at the deleted cells.
    pub fn expand(&self, x: &[i64]) -> Vec<i64> {
        let cells = self.spec.as_ref().map_or(self.d, |s| s.family.full_cells());
        let mut full = vec![0; cells];
        for (&cell, &v) in self.kept_cells.iter().zip(x) {
            full[cell] = v;
        }
        full
    }
}

/// Observed counts on the surviving columns together with their marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub counts: FiberPoint,
    pub marginals: Vec<i64>,
}

impl ObservedData {
    pub fn new(design: &DesignMatrix, counts: FiberPoint) -> Result<Self> {
        if counts.len() != design.d() {
            return Err(Error::Validation(format!(
                "data has {} cells but the design has {} columns",
                counts.len(),
                design.d()
            )));
        }
        let marginals = design.marginals(&counts);
        Ok(Self { counts, marginals })
    }

    /// From a full table (or full pair vector); structural-zero cells must
    /// be empty.
    pub fn from_full_counts(design: &DesignMatrix, full: &[i64]) -> Result<Self> {
        let spec = design.model()?;
        let cells = spec.family.full_cells();
        if full.len() != cells {
            return Err(Error::Validation(format!("expected {cells} cells, got {}", full.len())));
        }
        for &z in &spec.structural_zeros {
            if full[z] != 0 {
                return Err(Error::Validation(format!(
                    "structural-zero cell {z} has observed count {}",
                    full[z]
                )));
            }
        }
        let reduced = design.kept_cells().iter().map(|&k| full[k]).collect();
        Self::new(design, FiberPoint::new(reduced)?)
    }

    /// Edge-indicator data for the graph family; edges are 0-based pairs.
    pub fn from_edges(design: &DesignMatrix, edges: &[(usize, usize)]) -> Result<Self> {
        let spec = design.model()?;
        let ModelFamily::BetaModel { nodes } = spec.family else {
            return Err(Error::Validation("edge data requires the beta model".into()));
        };
        let mut full = vec![0i64; spec.family.full_cells()];
        for &(a, b) in edges {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if i == j || j >= nodes {
                return Err(Error::Validation(format!("edge ({a}, {b}) is not a pair of distinct nodes below {nodes}")));
            }
            full[edge_index(nodes, i, j)] += 1;
        }
        Self::from_full_counts(design, &full)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation step of the beta-model fixed point.
    pub damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000, damping: 0.5 }
    }
}

/// Maximum-likelihood expected counts on the surviving columns.
pub fn fit_expected_counts(design: &DesignMatrix, data: &ObservedData, opts: FitOptions) -> Result<Vec<f64>> {
    if !(opts.tol > 0.0) {
        return Err(Error::Validation("fit tolerance must be positive".into()));
    }
    if data.counts.len() != design.d() {
        return Err(Error::Validation("data does not match the design".into()));
    }
    if data.counts.l1_norm() == 0 {
        return Err(Error::Degenerate("grand total is zero".into()));
    }
    let spec = design.model()?;
    match spec.family {
        ModelFamily::Independence { rows, cols } if spec.structural_zeros.is_empty() => {
            let total = data.counts.l1_norm() as f64;
            let b = &data.marginals;
            Ok((0..rows * cols)
                .map(|k| b[k / cols] as f64 * b[rows + k % cols] as f64 / total)
                .collect())
        }
        ModelFamily::Independence { .. } | ModelFamily::AllTwoWay { .. } => ipf(design, &data.marginals, opts),
        ModelFamily::BetaModel { nodes } => fit_beta(design, nodes, &data.marginals, opts),
    }
}

fn margin_gap(design: &DesignMatrix, m: &[f64], b: &[i64]) -> f64 {
    design
        .marginals_f64(m)
        .iter()
        .zip(b)
        .map(|(fit, &obs)| libm::fabs(fit - obs as f64))
        .fold(0.0, f64::max)
}

/// Iterative proportional fitting over the marginal families.
fn ipf(design: &DesignMatrix, b: &[i64], opts: FitOptions) -> Result<Vec<f64>> {
    let d = design.d();
    let members: Vec<Vec<usize>> = design
        .rows()
        .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, _)| j).collect())
        .collect();
    let mut m = vec![1.0; d];
    let mut gap = f64::INFINITY;
    for _ in 0..opts.max_iter {
        for family in design.families() {
            for r in family.clone() {
                let s: f64 = members[r].iter().map(|&j| m[j]).sum();
                let factor = if s > 0.0 { b[r] as f64 / s } else { 0.0 };
                for &j in &members[r] {
                    m[j] *= factor;
                }
            }
        }
        gap = margin_gap(design, &m, b);
        if !gap.is_finite() {
            return Err(Error::Numeric("iterative proportional fitting".into()));
        }
        if gap <= opts.tol {
            return Ok(m);
        }
    }
    Err(Error::Fit { iterations: opts.max_iter, gap })
}

/// Beta-model MLE: expected edge count `p_ij = 1 / (1 + exp(-b_i - b_j))`,
/// solved with the damped fixed point `b_i <- ln deg_i - ln sum_j 1/(e^{-b_j} + e^{b_i})`.
/// Isolated vertices are pinned at probability 0.
fn fit_beta(design: &DesignMatrix, nodes: usize, deg: &[i64], opts: FitOptions) -> Result<Vec<f64>> {
    let edges: Vec<(usize, usize)> = design.column_labels().iter().map(|l| (l[0], l[1])).collect();
    let mut neighbours = vec![Vec::new(); nodes];
    for &(i, j) in &edges {
        neighbours[i].push(j);
        neighbours[j].push(i);
    }
    let active: Vec<bool> = deg.iter().map(|&k| k > 0).collect();
    let total: f64 = deg.iter().sum::<i64>() as f64;
    let mut beta: Vec<f64> = deg
        .iter()
        .map(|&k| if k > 0 { libm::log(k as f64 / libm::sqrt(total)) } else { f64::NEG_INFINITY })
        .collect();
    let prob = |beta: &[f64], i: usize, j: usize| -> f64 {
        if !active[i] || !active[j] {
            0.0
        } else {
            1.0 / (1.0 + libm::exp(-beta[i] - beta[j]))
        }
    };
    let mut gap = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let mut next = beta.clone();
        for i in (0..nodes).filter(|&i| active[i]) {
            let s: f64 = neighbours[i]
                .iter()
                .filter(|&&j| active[j])
                .map(|&j| 1.0 / (libm::exp(-beta[j]) + libm::exp(beta[i])))
                .sum();
            let target = libm::log(deg[i] as f64) - libm::log(s);
            next[i] = beta[i] + opts.damping * (target - beta[i]);
        }
        beta = next;
        let fitted: Vec<f64> = edges.iter().map(|&(i, j)| prob(&beta, i, j)).collect();
        gap = margin_gap(design, &fitted, deg);
        if !gap.is_finite() {
            return Err(Error::Numeric("beta-model fixed point".into()));
        }
        if gap <= opts.tol {
            return Ok(fitted);
        }
    }
    Err(Error::Fit { iterations: opts.max_iter, gap })
}

/// Pearson statistic `sum (o - e)^2 / e` over cells with `e > 0`.
/// Returns `f64::INFINITY` when a cell with `e = 0` has a positive count.
pub fn chi_square_statistic(observed: &[i64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len(), "observed and expected lengths differ");
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            let diff = o as f64 - e;
            stat += diff * diff / e;
        } else if o > 0 {
            return f64::INFINITY;
        }
    }
    stat
}

#[cfg(test)]
mod tests {
    use super::*;

    fn independence(r: usize, c: usize) -> ModelSpec {
        ModelSpec::new(ModelFamily::Independence { rows: r, cols: c })
    }

    #[test]
    fn independence_2x2_shape_and_rank() {
        let m = build_design_matrix(&independence(2, 2)).unwrap();
        assert_eq!((m.n(), m.d(), m.rank()), (4, 4, 3));
        assert_eq!(m.row(0), &[1, 1, 0, 0]);
        assert_eq!(m.row(2), &[1, 0, 1, 0]);
        assert_eq!(m.column_labels()[1], vec![0, 1]);
    }

    #[test]
    fn beta_model_marginals_are_degrees() {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::BetaModel { nodes: 3 })).unwrap();
        assert_eq!(m.marginals(&[1, 0, 0]), vec![1, 1, 0]);
        assert_eq!(m.column_labels(), &[vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn edge_index_roundtrip() {
        for nodes in 2..9 {
            let mut k = 0;
            for i in 0..nodes {
                for j in i + 1..nodes {
                    assert_eq!(edge_index(nodes, i, j), k);
                    assert_eq!(edge_from_index(nodes, k), (i, j));
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn structural_zero_deletes_column() {
        let spec = ModelSpec::with_structural_zeros(ModelFamily::Independence { rows: 2, cols: 2 }, [0]);
        let m = build_design_matrix(&spec).unwrap();
        assert_eq!((m.n(), m.d()), (4, 3));
        assert_eq!(m.deleted_labels(), &[vec![0, 0]]);
        assert_eq!(m.row(0), &[1, 0, 0]);
        assert_eq!(m.expand(&[1, 2, 3]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn all_two_way_columns_sum_to_three() {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::AllTwoWay { dims: [2, 3, 2] })).unwrap();
        for c in 0..m.d() {
            assert_eq!((0..m.n()).map(|r| m.entry(r, c)).sum::<i64>(), 3);
        }
        // d1 d2 + d1 d3 + d2 d3 - d1 - d2 - d3 + 1
        assert_eq!(m.rank(), 6 + 4 + 6 - 2 - 3 - 2 + 1);
    }

    #[test]
    fn sizing_limit() {
        let spec = ModelSpec::new(ModelFamily::BetaModel { nodes: 100 });
        assert_eq!(
            build_design_matrix_with_limit(&spec, 1000),
            Err(Error::Sizing { requested: 4950, max: 1000 })
        );
    }

    #[test]
    fn invalid_specs() {
        assert!(build_design_matrix(&independence(1, 3)).is_err());
        let bad = ModelSpec::with_structural_zeros(ModelFamily::Independence { rows: 2, cols: 2 }, [4]);
        assert!(build_design_matrix(&bad).is_err());
    }

    #[test]
    fn structural_zero_with_positive_count_rejected() {
        let spec = ModelSpec::with_structural_zeros(ModelFamily::Independence { rows: 2, cols: 2 }, [0]);
        let m = build_design_matrix(&spec).unwrap();
        assert!(ObservedData::from_full_counts(&m, &[1, 1, 1, 1]).is_err());
        let ok = ObservedData::from_full_counts(&m, &[0, 1, 1, 1]).unwrap();
        assert_eq!(ok.counts.as_slice(), &[1, 1, 1]);
    }

    #[test]
    fn independence_closed_form() {
        let m = build_design_matrix(&independence(2, 2)).unwrap();
        let sym = ObservedData::new(&m, FiberPoint::new(vec![5, 5, 5, 5]).unwrap()).unwrap();
        assert_eq!(fit_expected_counts(&m, &sym, FitOptions::default()).unwrap(), vec![5.0; 4]);
        let diag = ObservedData::new(&m, FiberPoint::new(vec![10, 0, 0, 10]).unwrap()).unwrap();
        assert_eq!(fit_expected_counts(&m, &diag, FitOptions::default()).unwrap(), vec![5.0; 4]);
    }

    #[test]
    fn zero_total_is_degenerate() {
        let m = build_design_matrix(&independence(2, 2)).unwrap();
        let z = ObservedData::new(&m, FiberPoint::zeros(4)).unwrap();
        assert!(matches!(fit_expected_counts(&m, &z, FitOptions::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ipf_fixed_point_on_model_table() {
        // Product table p(i) q(j) r(k) satisfies the all-two-way model.
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::AllTwoWay { dims: [2, 2, 2] })).unwrap();
        let (p, q, r) = ([1, 3], [2, 1], [1, 2]);
        let mut full = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    full.push(p[i] * q[j] * r[k]);
                }
            }
        }
        let data = ObservedData::from_full_counts(&m, &full).unwrap();
        let fit = fit_expected_counts(&m, &data, FitOptions::default()).unwrap();
        for (f, &o) in fit.iter().zip(&full) {
            assert!((f - o as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn quasi_independence_holds_zero_cells() {
        let spec = ModelSpec::with_structural_zeros(ModelFamily::Independence { rows: 3, cols: 3 }, [0, 4]);
        let m = build_design_matrix(&spec).unwrap();
        let data = ObservedData::from_full_counts(&m, &[0, 3, 2, 4, 0, 1, 2, 5, 6]).unwrap();
        let fit = fit_expected_counts(&m, &data, FitOptions::default()).unwrap();
        assert_eq!(fit.len(), 7);
        let gap = margin_gap(&m, &fit, &data.marginals);
        assert!(gap <= 1e-8);
    }

    #[test]
    fn beta_fit_matches_degrees() {
        // degrees stay strictly inside the degree polytope of the active nodes
        let spec = ModelSpec::new(ModelFamily::BetaModel { nodes: 6 });
        let m = build_design_matrix(&spec).unwrap();
        let data = ObservedData::from_edges(&m, &[(0, 1), (1, 2), (2, 3), (3, 5), (5, 0), (0, 2)]).unwrap();
        let fit = fit_expected_counts(&m, &data, FitOptions::default()).unwrap();
        let fitted_deg = m.marginals_f64(&fit);
        for (f, &o) in fitted_deg.iter().zip(&data.marginals) {
            assert!((f - o as f64).abs() <= 1e-8);
        }
        // node 4 is isolated
        assert_eq!(fit[edge_index(6, 0, 4)], 0.0);
    }

    #[test]
    fn fit_reports_non_convergence() {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::AllTwoWay { dims: [2, 2, 2] })).unwrap();
        let data = ObservedData::from_full_counts(&m, &[3, 1, 0, 2, 1, 4, 2, 2]).unwrap();
        let r = fit_expected_counts(&m, &data, FitOptions { max_iter: 1, ..FitOptions::default() });
        assert!(matches!(r, Err(Error::Fit { iterations: 1, .. })));
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_statistic(&[5, 5, 5, 5], &[5.0; 4]), 0.0);
        assert_eq!(chi_square_statistic(&[10, 0, 0, 10], &[5.0; 4]), 20.0);
        assert_eq!(chi_square_statistic(&[1, 0], &[0.0, 1.0]), f64::INFINITY);
        assert_eq!(chi_square_statistic(&[0, 1], &[0.0, 1.0]), 0.0);
    }
}
