//! Dormand–Prince 5(4) with step-size control and a recorded step history.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e}")]
    StepUnderflow { t: f64 },
    #[error("maximum number of steps ({steps}) exceeded at t = {t:e}")]
    MaxSteps { t: f64, steps: usize },
    #[error("right-hand side failed at the initial point t = {t:e}")]
    InitialRhs { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; `f64::INFINITY` disables the cap.
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, h_max: f64::INFINITY, h_init: None, max_steps: 1_000_000 }
    }
}

/// Accepted point with its derivative, enough for cubic Hermite dense output.
#[derive(Debug, Clone)]
pub struct Knot {
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    /// True when the stop predicate fired before reaching `t_end`.
    pub stopped: bool,
    pub knots: Vec<Knot>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// Integrate from `t0` to `t_end` (either direction). The right-hand side may
    /// refuse a point by returning `false`; the step is then retried smaller.
    /// `stop` is checked after each accepted step.
    pub fn solve<F, S>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        mut stop: S,
        record: bool,
    ) -> Result<Solution, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> bool,
        S: FnMut(f64, &[f64]) -> bool,
    {
        let n = y0.len();
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let span = (t_end - t0).abs();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        if !f(t, &y, &mut k[0]) {
            return Err(OdeError::InitialRhs { t });
        }
        let mut knots = Vec::new();
        if record {
            knots.push(Knot { t, y: y.clone(), dy: k[0].clone() });
        }
        if span == 0.0 {
            let dy = k[0].clone();
            return Ok(Solution { t, y, dy, stopped: false, knots, n_accepted: 0, n_rejected: 0 });
        }

        let mut h = match self.h_init {
            Some(h) => h.abs(),
            None => self.initial_step(&mut f, t, &y, &k[0], dir),
        }
        .min(self.h_max)
        .min(span);
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut last_fac_reject = false;

        loop {
            if accepted + rejected >= self.max_steps {
                return Err(OdeError::MaxSteps { t, steps: self.max_steps });
            }
            let remaining = (t_end - t).abs();
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            let hs = dir * h;
            let mut ok = true;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    ytmp[i] = y[i] + hs * acc;
                }
                if !f(t + C[s] * hs, &ytmp, &mut k[s]) {
                    ok = false;
                    break;
                }
                if s == 6 {
                    ynew.copy_from_slice(&ytmp);
                }
            }
            if !ok {
                rejected += 1;
                h *= 0.25;
                if h < 1e-15 * t.abs().max(span) {
                    return Err(OdeError::StepUnderflow { t });
                }
                continue;
            }
            // k[6] is f(t+h, ynew): the FSAL stage.
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                let r = hs * e / sc;
                err += r * r;
            }
            let err = (err / n as f64).sqrt();
            if err <= 1.0 {
                t = if last { t_end } else { t + hs };
                y.copy_from_slice(&ynew);
                let k6 = k[6].clone();
                k[0] = k6;
                accepted += 1;
                if record {
                    knots.push(Knot { t, y: y.clone(), dy: k[0].clone() });
                }
                if last {
                    let dy = k[0].clone();
                    return Ok(Solution { t, y, dy, stopped: false, knots, n_accepted: accepted, n_rejected: rejected });
                }
                if stop(t, &y) {
                    let dy = k[0].clone();
                    return Ok(Solution { t, y, dy, stopped: true, knots, n_accepted: accepted, n_rejected: rejected });
                }
                let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                fac = fac.clamp(0.2, 5.0);
                if last_fac_reject {
                    fac = fac.min(1.0);
                }
                last_fac_reject = false;
                h = (h * fac).min(self.h_max);
            } else {
                rejected += 1;
                last_fac_reject = true;
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
                if h < 1e-15 * t.abs().max(span) {
                    return Err(OdeError::StepUnderflow { t });
                }
            }
        }
    }

    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[f64], f0: &[f64], dir: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> bool,
    {
        let n = y.len();
        let sc: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.h_max);
        let y1: Vec<f64> = y.iter().zip(f0).map(|(v, d)| v + dir * h0 * d).collect();
        let mut f1 = vec![0.0; n];
        if !f(t + dir * h0, &y1, &mut f1) {
            return h0 * 1e-3;
        }
        let d2 = (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n as f64)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1)
    }
}

/// Cubic Hermite interpolation between two knots, component-wise.
pub fn hermite(a: &Knot, b: &Knot, t: f64, out: &mut [f64]) {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    for i in 0..out.len() {
        out[i] = h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i];
    }
}

/// Classical fourth-order Runge–Kutta step for a vector field.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let k1 = f(t, y);
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(t + 0.5 * h, &y2);
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(t + 0.5 * h, &y3);
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(t + h, &y4);
    (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}
