//! Monomial bases, polynomial evaluation and the dataset container shared by
//! every solver stage.
//!
//! The basis is kept in graded-lexicographic order: total degree ascending,
//! ties broken by comparing exponent vectors lexicographically. Every support
//! vector, coefficient vector and design-matrix column uses this order.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;

/// Largest basis [`enumerate_basis`] will build unless told otherwise.
pub const DEFAULT_BASIS_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn constant(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Renders as `1`, `x1`, `x2^2`, `x1*x3` (features are 1-based).
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            write!(f, "x{}", i + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, j: usize) -> &MultiIndex {
        &self.indices[j]
    }

    /// Canonical position of `alpha`, if it belongs to the basis.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dim() != self.dim {
            return None;
        }
        self.indices.binary_search(alpha).ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }
}

/// `binomial(n + d, d)`, saturating at `u128::MAX`.
pub fn basis_size(n: usize, d: u32) -> u128 {
    let d = d as u128;
    let mut acc: u128 = 1;
    for i in 1..=d {
        // acc * (n + i) / i stays integral at every step.
        acc = match acc.checked_mul(n as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

pub fn enumerate_basis(n: usize, d: u32) -> Result<MonomialBasis> {
    enumerate_basis_with_limit(n, d, DEFAULT_BASIS_LIMIT)
}

pub fn enumerate_basis_with_limit(n: usize, d: u32, limit: usize) -> Result<MonomialBasis> {
    if n == 0 {
        return Err(Error::InvalidInstance("basis dimension must be at least 1".into()));
    }
    let size = basis_size(n, d);
    if size > limit as u128 {
        return Err(Error::CapacityExceeded { size, limit });
    }
    let mut indices = Vec::with_capacity(size as usize);
    let mut current = vec![0u32; n];
    for total in 0..=d {
        push_compositions(&mut current, 0, total, &mut indices);
    }
    debug_assert_eq!(indices.len() as u128, size);
    Ok(MonomialBasis { dim: n, degree: d, indices })
}

// Emits every exponent vector with `remaining` spread over positions
// `pos..`, in ascending lexicographic order.
fn push_compositions(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for e in 0..=remaining {
        current[pos] = e;
        push_compositions(current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}

/// `prod_i x_i^alpha_i`, with `0^0 = 1`.
pub fn eval_monomial(x: &[f64], alpha: &MultiIndex) -> f64 {
    debug_assert_eq!(x.len(), alpha.dim());
    x.iter()
        .zip(alpha.exponents())
        .fold(1.0, |acc, (&xi, &e)| if e == 0 { acc } else { acc * xi.powi(e as i32) })
}

/// Min-max statistics used to map raw columns onto the unit interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub features: Vec<(f64, f64)>,
    pub target: (f64, f64),
}

impl Normalization {
    /// Affine map onto `[0, 1]`; constant columns collapse to 0.5.
    pub fn scale(value: f64, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            (value - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    pub fn unscale(value: f64, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            lo + value * (hi - lo)
        } else {
            lo
        }
    }

    pub fn scale_features(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.features)
            .map(|(&v, &range)| Self::scale(v, range))
            .collect()
    }

    pub fn unscale_target(&self, y: f64) -> f64 {
        Self::unscale(y, self.target)
    }
}

/// `N` samples of `n` features (row-major) with their targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        let names = (1..=n).map(|i| format!("x{i}")).collect();
        Self::with_names(rows, y, names, "y".to_string())
    }

    pub fn with_names(
        rows: Vec<Vec<f64>>,
        y: Vec<f64>,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("at least one sample is required".into()));
        }
        if rows.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: y.len() });
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::InvalidDataset("at least one feature is required".into()));
        }
        if feature_names.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: feature_names.len() });
        }
        let mut x = Vec::with_capacity(rows.len() * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            x.extend_from_slice(row);
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite value".into()));
        }
        Ok(Dataset { n, x, y, feature_names, target_name, normalization: None })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n)
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn feature(&self, k: usize, i: usize) -> f64 {
        self.x[k * self.n + i]
    }

    /// Rows `idx` in the given order; names and normalization carry over.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.n);
        let mut y = Vec::with_capacity(idx.len());
        for &k in idx {
            x.extend_from_slice(self.row(k));
            y.push(self.y[k]);
        }
        Dataset {
            n: self.n,
            x,
            y,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            normalization: self.normalization.clone(),
        }
    }

    pub(crate) fn from_parts(
        n: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        template: &Dataset,
        normalization: Option<Normalization>,
    ) -> Dataset {
        Dataset {
            n,
            x,
            y,
            feature_names: template.feature_names.clone(),
            target_name: template.target_name.clone(),
            normalization,
        }
    }
}

pub fn design_matrix(data: &Dataset, basis: &MonomialBasis) -> Result<DMatrix<f64>> {
    design_matrix_with(data, basis, Execution::Sequential)
}

pub fn design_matrix_with(
    data: &Dataset,
    basis: &MonomialBasis,
    exec: Execution,
) -> Result<DMatrix<f64>> {
    if data.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: data.dim() });
    }
    let m = basis.len();
    let rows = exec.map_range(data.len(), |k| {
        let x = data.row(k);
        basis.iter().map(|alpha| eval_monomial(x, alpha)).collect::<Vec<_>>()
    });
    Ok(DMatrix::from_fn(data.len(), m, |k, j| rows[k][j]))
}

/// The fitted artifact: a sparse polynomial on the unit-scaled inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseModel {
    pub basis: MonomialBasis,
    /// Canonical basis positions, ascending.
    pub selected: Vec<usize>,
    /// One coefficient per entry of `selected`.
    pub coefficients: Vec<f64>,
    /// Minimax training error over the non-anomalous rows.
    pub gamma: f64,
    /// Training rows treated as anomalous, ascending.
    pub anomalies: Vec<usize>,
    pub normalization: Option<Normalization>,
}

impl SparseModel {
    pub fn validate(&self) -> Result<()> {
        if self.selected.is_empty() {
            return Err(Error::InvalidInstance("a model needs at least one monomial".into()));
        }
        if self.selected.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.selected.len(),
                found: self.coefficients.len(),
            });
        }
        if self.selected.iter().any(|&j| j >= self.basis.len()) {
            return Err(Error::InvalidInstance("selected index outside the basis".into()));
        }
        if !self.selected.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInstance("selected indices must be strictly ascending".into()));
        }
        Ok(())
    }

    /// Evaluates the model at an already-normalized input.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.basis.dim() {
            return Err(Error::DimensionMismatch { expected: self.basis.dim(), found: x.len() });
        }
        Ok(self
            .selected
            .iter()
            .zip(&self.coefficients)
            .map(|(&j, &c)| c * eval_monomial(x, self.basis.get(j)))
            .sum())
    }

    /// Evaluates at a raw input, applying the stored normalization both ways.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        match &self.normalization {
            Some(norm) => {
                if x.len() != norm.features.len() {
                    return Err(Error::DimensionMismatch {
                        expected: norm.features.len(),
                        found: x.len(),
                    });
                }
                let scaled = norm.scale_features(x);
                Ok(norm.unscale_target(self.predict(&scaled)?))
            }
            None => self.predict(x),
        }
    }

    pub fn terms(&self) -> Vec<String> {
        self.selected.iter().map(|&j| self.basis.get(j).to_string()).collect()
    }
}
