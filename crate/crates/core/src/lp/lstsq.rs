use nalgebra::{DMatrix, DVector};

/// Least-squares coefficients; rank-deficient systems get the minimum-norm
/// solution. Singular values below `max(N, m) * eps * sigma_max` are treated
/// as zero.
pub fn solve_least_squares(design: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let m = design.ncols();
    if m == 0 || design.nrows() == 0 {
        return vec![0.0; m];
    }
    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = design.nrows().max(m) as f64 * f64::EPSILON * sigma_max;
    let b = DVector::from_column_slice(y);
    svd.solve(&b, eps)
        .map(|c| c.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; m])
}
