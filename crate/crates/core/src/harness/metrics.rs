//! Error metrics and the least-squares baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::solve_least_squares;
use crate::poly::{design_matrix, enumerate_basis, Dataset, MonomialBasis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the true values are constant and the fit is not exact.
    pub r2: Option<f64>,
    pub mse: f64,
    /// Always `mse * count`.
    pub sse: f64,
    pub count: usize,
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch { expected: y_true.len(), found: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::InvalidDataset("metrics need at least one value".into()));
    }
    let count = y_true.len();
    let raw_sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    let mean = y_true.iter().sum::<f64>() / count as f64;
    let total: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if total > 0.0 {
        Some(1.0 - raw_sse / total)
    } else if raw_sse == 0.0 {
        Some(1.0)
    } else {
        None
    };
    let mse = raw_sse / count as f64;
    Ok(Metrics { r2, mse, sse: mse * count as f64, count })
}

/// A least-squares polynomial over a full basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresModel {
    pub basis: MonomialBasis,
    pub coefficients: Vec<f64>,
}

impl LeastSquaresModel {
    pub fn fit(train: &Dataset, degree: u32) -> Result<Self> {
        let basis = enumerate_basis(train.dim(), degree)?;
        let design = design_matrix(train, &basis)?;
        let coefficients = solve_least_squares(&design, train.targets());
        Ok(LeastSquaresModel { basis, coefficients })
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let design = design_matrix(data, &self.basis)?;
        Ok((design * nalgebra::DVector::from_column_slice(&self.coefficients)).iter().copied().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Linear,
    Polynomial,
}

impl Baseline {
    pub fn label(self) -> &'static str {
        match self {
            Baseline::Linear => "linear",
            Baseline::Polynomial => "polynomial",
        }
    }
}

/// Fits the degree-1 and degree-`degree` baselines on `train` and scores
/// them on `test`.
pub fn run_baselines(train: &Dataset, test: &Dataset, degree: u32) -> Result<Vec<(Baseline, Metrics)>> {
    [(Baseline::Linear, 1), (Baseline::Polynomial, degree)]
        .into_iter()
        .map(|(which, d)| {
            let model = LeastSquaresModel::fit(train, d)?;
            Ok((which, compute_metrics(test.targets(), &model.predict(test)?)?))
        })
        .collect()
}
