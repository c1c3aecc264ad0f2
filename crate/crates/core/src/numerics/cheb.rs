//! Chebyshev series on [-1, 1].

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Cheb {
    pub coeffs: Vec<f64>,
}

/// Lobatto points cos(jπ/n), j = 0..=n, running from +1 to -1.
pub fn lobatto(n: usize) -> Vec<f64> {
    (0..=n).map(|j| lobatto_point(j, n)).collect()
}

/// cos(jπ/n) evaluated through sin of the reflected angle for full relative accuracy near ±1.
pub fn lobatto_point(j: usize, n: usize) -> f64 {
    (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin()
}

impl Cheb {
    /// Interpolant through values at `lobatto(n)`.
    pub fn from_lobatto(values: &[f64]) -> Self {
        let n = values.len() - 1;
        assert!(n >= 1);
        let two_n = 2 * n;
        let table: Vec<f64> = (0..two_n).map(|m| (PI * m as f64 / n as f64).cos()).collect();
        let mut coeffs = vec![0.0; n + 1];
        for (k, ck) in coeffs.iter_mut().enumerate() {
            let mut s = 0.5 * (values[0] + values[n] * table[(k * n) % two_n]);
            for (j, v) in values.iter().enumerate().take(n).skip(1) {
                s += v * table[(j * k) % two_n];
            }
            *ck = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        Self { coeffs }
    }

    /// Interpolant through values at the interior points cos((j+½)π/n), j = 0..n−1.
    pub fn from_gauss(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 1);
        let mut coeffs = vec![0.0; n];
        for (k, ck) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                s += v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
            *ck = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        Self { coeffs }
    }

    /// Interpolate `f` at n+1 Lobatto points.
    pub fn fit<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> Self {
        let v: Vec<f64> = lobatto(n).into_iter().map(&mut f).collect();
        Self::from_lobatto(&v)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + t * b1 - b2
    }

    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        if n <= 1 {
            return Self { coeffs: vec![0.0] };
        }
        let mut d = vec![0.0; n];
        for k in (1..n).rev() {
            let next = if k + 1 < n { d[k + 1] } else { 0.0 };
            d[k - 1] = next + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] *= 0.5;
        d.pop();
        if d.is_empty() {
            d.push(0.0);
        }
        Self { coeffs: d }
    }

    /// Drop trailing coefficients below `tol · max|c|`.
    pub fn chop(&mut self, tol: f64) {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut keep = 1;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.abs() > tol * scale {
                keep = k + 1;
            }
        }
        self.coeffs.truncate(keep);
    }

    /// Chop at the larger of `tol · max|c|` and ten times the median of the last quarter,
    /// which is where interpolated data with a noise floor flattens out.
    pub fn chop_plateau(&mut self, tol: f64) {
        let n = self.coeffs.len();
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if n >= 16 && scale > 0.0 {
            let mut tail: Vec<f64> = self.coeffs[n - n / 4..].iter().map(|c| c.abs()).collect();
            tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let floor = 10.0 * tail[tail.len() / 2];
            self.chop(tol.max(floor / scale));
        } else {
            self.chop(tol);
        }
    }

    /// Geometric decay rate ρ of |c_k| ~ Cρ^k fitted over the coefficients above `floor · max|c|`.
    pub fn decay_rate(&self, floor: f64) -> Option<f64> {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let pts: Vec<(f64, f64)> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > floor * scale)
            .map(|(k, c)| (k as f64, c.abs().ln()))
            .collect();
        if pts.len() < 4 {
            return None;
        }
        let (slope, _) = super::fit::line(&pts);
        Some(slope.exp())
    }
}
