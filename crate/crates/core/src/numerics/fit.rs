//! Least-squares fits.

use nalgebra::{DMatrix, DVector};

/// Straight-line fit, returns (slope, intercept).
pub fn line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares coefficients of `y ≈ Σ c_k basis_k(x)`.
pub fn linear_least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let n = rows[0].len();
    // Column scaling keeps the SVD well conditioned for monomials of very different size.
    let mut scale = vec![0.0f64; n];
    for r in rows {
        for (j, v) in r.iter().enumerate() {
            scale[j] = scale[j].max(v.abs());
        }
    }
    for s in &mut scale {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let a = DMatrix::from_fn(m, n, |i, j| rows[i][j] / scale[j]);
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-300).expect("svd solve");
    (0..n).map(|j| sol[j] / scale[j]).collect()
}

/// Polynomial fit, coefficients in increasing degree.
pub fn polyfit(x: &[f64], y: &[f64], deg: usize) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&xi| (0..=deg).map(|k| xi.powi(k as i32)).collect()).collect();
    linear_least_squares(&rows, y)
}
