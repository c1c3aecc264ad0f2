//! Orthonormal Jacobi polynomials on [0, 1] for the weight x^b (1-x)^a and the
//! matching Gauss rule (Golub–Welsch, then Newton polish).

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct JacobiBasis {
    /// Exponent of (1 - x).
    pub a: f64,
    /// Exponent of x.
    pub b: f64,
    diag: Vec<f64>,
    /// off[n] = sqrt(beta_{n+1}) couples p_n and p_{n+1}.
    off: Vec<f64>,
    p0: f64,
}

pub fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const G: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut s = G[0];
    for (i, g) in G.iter().enumerate().skip(1) {
        s += g / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

impl JacobiBasis {
    pub fn new(a: f64, b: f64, n_max: usize) -> Self {
        assert!(a > -1.0 && b > -1.0);
        let mut diag = Vec::with_capacity(n_max + 1);
        let mut off = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max + 1 {
            let nf = n as f64;
            let s = 2.0 * nf + a + b;
            // Recurrence on s ∈ [-1,1] for (1-s)^a (1+s)^b, mapped to x = (1+s)/2.
            let alpha_s = if n == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
            diag.push(0.5 * (1.0 + alpha_s));
            let m = nf + 1.0;
            let sm = 2.0 * m + a + b;
            let beta = if n == 0 {
                4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0).powi(2) * (a + b + 3.0))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + a + b) / (sm * sm * (sm + 1.0) * (sm - 1.0))
            };
            off.push(0.5 * beta.sqrt());
        }
        let mu0 = (ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(a + b + 2.0)).exp();
        Self { a, b, diag, off, p0: 1.0 / mu0.sqrt() }
    }

    pub fn len(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// p_0..p_{n-1} and their first two derivatives at x.
    pub fn eval_all(&self, n: usize, x: f64, p: &mut [f64], dp: &mut [f64], ddp: &mut [f64]) {
        assert!(n <= self.len());
        p[0] = self.p0;
        dp[0] = 0.0;
        ddp[0] = 0.0;
        if n == 1 {
            return;
        }
        p[1] = (x - self.diag[0]) * p[0] / self.off[0];
        dp[1] = p[0] / self.off[0];
        ddp[1] = 0.0;
        for k in 1..n - 1 {
            let w = x - self.diag[k];
            p[k + 1] = (w * p[k] - self.off[k - 1] * p[k - 1]) / self.off[k];
            dp[k + 1] = (p[k] + w * dp[k] - self.off[k - 1] * dp[k - 1]) / self.off[k];
            ddp[k + 1] = (2.0 * dp[k] + w * ddp[k] - self.off[k - 1] * ddp[k - 1]) / self.off[k];
        }
    }

    /// Value and derivative of p_n at x.
    fn pn(&self, n: usize, x: f64) -> (f64, f64) {
        let mut pm = 0.0;
        let mut p = self.p0;
        let mut dpm = 0.0;
        let mut dp = 0.0;
        for k in 0..n {
            let w = x - self.diag[k];
            let prev = if k == 0 { 0.0 } else { self.off[k - 1] };
            let pn = (w * p - prev * pm) / self.off[k];
            let dpn = (p + w * dp - prev * dpm) / self.off[k];
            pm = p;
            p = pn;
            dpm = dp;
            dp = dpn;
        }
        (p, dp)
    }

    /// n-point Gauss rule for ∫₀¹ x^b (1-x)^a f(x) dx.
    pub fn gauss(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(n <= self.len());
        let t = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut x: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for xi in x.iter_mut() {
            for _ in 0..4 {
                let (p, dp) = self.pn(n, *xi);
                let step = p / dp;
                *xi -= step;
                if step.abs() < 1e-17 {
                    break;
                }
            }
        }
        let mut w = Vec::with_capacity(n);
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut ddp = vec![0.0; n];
        for &xi in &x {
            self.eval_all(n, xi, &mut p, &mut dp, &mut ddp);
            let s: f64 = p.iter().map(|v| v * v).sum();
            w.push(1.0 / s);
        }
        (x, w)
    }
}
