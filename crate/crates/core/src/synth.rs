//! Bundled synthetic datasets and random instance generators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::oracle::{MilpInstance, DEFAULT_BIG_M};
use crate::poly::{design_matrix, enumerate_basis, Dataset};

/// Rows of the outlier set that carry injected gross errors.
pub const OUTLIER_ROWS: [usize; 2] = [7, 13];

/// `y = 1 + 2 x1 - x2^2` on a 5 x 4 grid over the unit square, with rows 7
/// and 13 shifted by +5 and -4.
pub fn outlier_synthetic() -> Dataset {
    let mut rows = Vec::with_capacity(20);
    let mut y = Vec::with_capacity(20);
    for i in 0..20 {
        let x1 = (i % 5) as f64 / 4.0;
        let x2 = (i / 5) as f64 / 3.0;
        rows.push(vec![x1, x2]);
        y.push(1.0 + 2.0 * x1 - x2 * x2);
    }
    y[OUTLIER_ROWS[0]] += 5.0;
    y[OUTLIER_ROWS[1]] -= 4.0;
    Dataset::with_names(rows, y, vec!["x1".into(), "x2".into()], "y".into())
        .expect("the outlier synthetic is well formed")
}

pub const SERIES_LEN: usize = 720;
pub const SERIES_SEED: u64 = 42;
pub const SERIES_ANOMALIES: [usize; 10] = [37, 101, 188, 250, 333, 401, 477, 530, 612, 655];

/// Hourly-style series with a daily cycle, a slow cycle and a trend:
/// `y = 0.3 + 0.5 x1 x2 + 0.4 x3^2 - 0.2 x2 + U(-0.01, 0.01)`, with gross
/// errors of +1.5 / -1.2 (alternating) at [`SERIES_ANOMALIES`].
pub fn time_series(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = (SERIES_LEN - 1) as f64;
    let mut rows = Vec::with_capacity(SERIES_LEN);
    let mut y = Vec::with_capacity(SERIES_LEN);
    for t in 0..SERIES_LEN {
        let tf = t as f64;
        let x1 = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * tf / 24.0).sin();
        let x2 = 0.5 + 0.4 * (2.0 * std::f64::consts::PI * tf / 173.0 + 0.7).sin();
        let x3 = tf / last;
        rows.push(vec![x1, x2, x3]);
        y.push(0.3 + 0.5 * x1 * x2 + 0.4 * x3 * x3 - 0.2 * x2 + rng.random_range(-0.01..0.01));
    }
    for (i, &t) in SERIES_ANOMALIES.iter().enumerate() {
        y[t] += if i % 2 == 0 { 1.5 } else { -1.2 };
    }
    Dataset::with_names(rows, y, vec!["x1".into(), "x2".into(), "x3".into()], "y".into())
        .expect("the series is well formed")
}

/// Shape limits for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct InstanceShape {
    pub max_dim: usize,
    pub max_degree: u32,
    pub max_points: usize,
    pub max_basis: usize,
    /// Largest number of excluded rows.
    pub max_excluded: usize,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape { max_dim: 3, max_degree: 2, max_points: 10, max_basis: 10, max_excluded: 2 }
    }
}

/// A random small regression instance: uniform inputs, a sparse polynomial
/// target with small noise, and a few shifted rows.
pub fn random_instance(rng: &mut impl Rng, shape: &InstanceShape) -> Result<MilpInstance> {
    let (dim, basis) = loop {
        let dim = rng.random_range(1..=shape.max_dim);
        let degree = rng.random_range(1..=shape.max_degree);
        let basis = enumerate_basis(dim, degree)?;
        if basis.len() <= shape.max_basis {
            break (dim, basis);
        }
    };
    let n = rng.random_range(3.max(dim + 1)..=shape.max_points.max(4));
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let m_d = basis.len();
    let true_terms = rng.random_range(1..=m_d.min(3));
    let mut coef = vec![0.0; m_d];
    for _ in 0..true_terms {
        coef[rng.random_range(0..m_d)] = rng.random_range(-2.0..2.0);
    }
    let data = Dataset::new(rows, vec![0.0; n])?;
    let design = design_matrix(&data, &basis)?;
    let mut y: Vec<f64> = (0..n)
        .map(|k| (0..m_d).map(|j| design[(k, j)] * coef[j]).sum::<f64>() + rng.random_range(-0.05..0.05))
        .collect();
    let excluded = rng.random_range(0..=shape.max_excluded.min(n - 1));
    for _ in 0..excluded {
        let k = rng.random_range(0..n);
        y[k] += if rng.random::<bool>() { 3.0 } else { -3.0 };
    }
    let l_m = rng.random_range(1..=m_d);
    let l_b = n - excluded;
    MilpInstance::new(design, y, l_m, l_b, DEFAULT_BIG_M)
}

/// A random instance from a seed, for reproducible suites.
pub fn seeded_instance(seed: u64, shape: &InstanceShape) -> Result<MilpInstance> {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), shape)
}

/// Same instance with `l_m = m_d` and `l_b = N`.
pub fn unconstrained(inst: &MilpInstance) -> MilpInstance {
    MilpInstance { l_m: inst.m_d(), l_b: inst.n_points(), ..inst.clone() }
}

/// A design matrix of uniform entries, for cases that need no polynomial
/// structure.
pub fn random_design(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}
