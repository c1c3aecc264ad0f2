//! Junction of the interior solution with the Schwarzschild exterior.
//!
//! The static check compares one-sided r-derivatives of g₀₀ and g₁₁ at r₊. The dynamic
//! construction builds exterior coordinates t♯(t, r), R♯(t, r) from the surface history of a
//! run so that the patched metric is C¹ across r₊, and reports the second-derivative jump 𝒜.

use crate::error::{domain, Error, Result};
use crate::evolution::{EvolutionMode, Grid, PerturbationState};
use crate::numerics::fit::polyfit;
use crate::tov::Equilibrium;
use nalgebra::{DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sided {
    pub interior: f64,
    pub exterior: f64,
    pub residual: f64,
}

impl Sided {
    fn new(interior: f64, exterior: f64, scale: f64) -> Self {
        Self { interior, exterior, residual: (interior - exterior).abs() / scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticReport {
    /// Value, first and second r-derivative of g₀₀ at r₊.
    pub g00: [Sided; 3],
    pub g11: [Sided; 3],
    /// d²u/dr² at r₊ from the interior fit and from differentiating the TOV equation.
    pub d2u_fit: f64,
    pub d2u_formula: f64,
    /// max |g₀₀ g₁₁ + 1| on exterior sample radii.
    pub vacuum_residual: f64,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl StaticReport {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// Value and two derivatives at r₊ of a polynomial fit to interior samples in [r₊(1 − w), r₊].
fn one_sided<F: FnMut(f64) -> Result<f64>>(r_plus: f64, w: f64, mut f: F) -> Result<[f64; 3]> {
    let n = 32;
    let mut s = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        // Chebyshev points on s ∈ [−1, 0], r = r₊(1 + w s).
        let sj = -0.5 * (1.0 + (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos());
        s.push(sj);
        v.push(f(r_plus * (1.0 + w * sj))?);
    }
    let c = polyfit(&s, &v, 10);
    let h = w * r_plus;
    Ok([c[0], c[1] / h, 2.0 * c[2] / (h * h)])
}

pub fn static_c2_check(eq: &Equilibrium, tolerance: f64) -> Result<StaticReport> {
    let ic2 = eq.eos.inv_c2();
    let (rp, mp, g) = (eq.r_plus, eq.m_plus, eq.eos.g);
    let a = 2.0 * g * mp * ic2;
    let w = 0.02;
    let g00_int = one_sided(rp, w, |r| Ok(eq.kappa * (-2.0 * eq.u_at_r(r)? * ic2).exp()))?;
    let g11_int = one_sided(rp, w, |r| {
        let p = eq.at_r(r)?;
        Ok(-1.0 / (1.0 - p.compactness))
    })?;
    let u_int = one_sided(rp, w, |r| eq.u_at_r(r))?;
    let f = 1.0 - a / rp;
    let (f1, f2) = (a / (rp * rp), -2.0 * a / (rp * rp * rp));
    let g00_ext = [f, f1, f2];
    let g11_ext = [-1.0 / f, f1 / (f * f), -2.0 * f1 * f1 / (f * f * f) + f2 / (f * f)];
    let scales = [1.0, a / (rp * rp), a / (rp * rp * rp)];
    let g00: [Sided; 3] = std::array::from_fn(|k| Sided::new(g00_int[k], g00_ext[k], scales[k].max(g00_ext[k].abs())));
    let g11: [Sided; 3] = std::array::from_fn(|k| Sided::new(g11_int[k], g11_ext[k], scales[k].max(g11_ext[k].abs())));
    let kk = eq.k_surf;
    let d2u_formula = 2.0 * g * mp / (rp * rp * rp * eq.kappa) + 2.0 * ic2 * kk * kk;
    let vacuum_residual = (1..=8)
        .map(|k| {
            let r = rp * (1.0 + 0.25 * k as f64);
            let f = 1.0 - a / r;
            (f * (-1.0 / f) + 1.0).abs()
        })
        .fold(0.0, f64::max);
    let max_residual = g00.iter().chain(&g11).map(|s| s.residual).fold(vacuum_residual, f64::max);
    Ok(StaticReport { g00, g11, d2u_fit: u_int[2], d2u_formula, vacuum_residual, max_residual, tolerance })
}

/// Smooth cutoff: 1 on [0, 1], 0 on [2, ∞), built from e^{−1/s}. Returns (χ, χ′).
pub fn cutoff(s: f64) -> (f64, f64) {
    if s <= 1.0 {
        return (1.0, 0.0);
    }
    if s >= 2.0 {
        return (0.0, 0.0);
    }
    let (a, b) = (2.0 - s, s - 1.0);
    let (p, q) = ((-1.0 / a).exp(), (-1.0 / b).exp());
    let d = p + q;
    (p / d, -p * q * (1.0 / (a * a) + 1.0 / (b * b)) / (d * d))
}

/// Interior quantities at r = r₊ − 0 for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub t: f64,
    /// R, ∂ᵣR, ∂ᵣ²R.
    pub r: f64,
    pub r_r: f64,
    pub r_rr: f64,
    /// V = rv and ∂ᵣV.
    pub v: f64,
    pub v_r: f64,
    /// ∂ₜR, ∂ₜV, ∂ₜ∂ᵣR from the evolution equations.
    pub r_t: f64,
    pub v_t: f64,
    pub r_rt: f64,
    /// ∂ᵣu of the perturbed enthalpy.
    pub u_r: f64,
}

/// dx/dr at the nodes and its value and x-derivative at x = 1 from the basis interpolant.
fn surface_dx_dr(grid: &Grid) -> (f64, f64) {
    let g: Vec<f64> = (0..grid.size).map(|k| grid.r[k] * grid.dx_dr_over_r[k]).collect();
    let c = grid.coeffs(&g);
    (c.dot(&grid.surface_row), c.dot(&grid.surface_drow))
}

/// Limit of u(σρ)/u(ρ) as ρ → 0.
fn enthalpy_ratio_at_vacuum(eq: &Equilibrium, sigma: f64) -> Result<f64> {
    let rho = eq.rho_c * 1e-16;
    Ok(eq.eos.enthalpy_u(sigma * rho)? / eq.eos.enthalpy_u(rho)?)
}

pub fn surface_sample(eq: &Equilibrium, grid: &Grid, mode: EvolutionMode, s: &PerturbationState) -> Result<SurfaceSample> {
    let (dy, dv) = match mode {
        EvolutionMode::Linear => grid.rhs_linear(&s.y, &s.v),
        EvolutionMode::Nonlinear => grid.rhs_nonlinear(s.t, &s.y, &s.v)?,
    };
    let (g, gx) = surface_dx_dr(grid);
    let rp = grid.r_plus;
    let cy = grid.coeffs(&s.y);
    let cv = grid.coeffs(&s.v);
    let val = |c: &DVector<f64>| (c.dot(&grid.surface_row), c.dot(&grid.surface_drow), c.dot(&grid.surface_ddrow));
    let (y, yx, yxx) = val(&cy);
    let (v, vx, _) = val(&cv);
    let y_r = yx * g;
    let y_rr = yxx * g * g + yx * gx * g;
    let z = rp * y_r;
    let dz = grid.z_of(&dy);
    let (dys, dvs) = (grid.surface_value(&dy), grid.surface_value(&dv));
    if !(1.0 + y > 0.0 && 1.0 + y + z > 0.0) {
        return Err(Error::Blowup { t: s.t, reason: format!("positivity lost at the surface (1+y = {}, 1+y+z = {})", 1.0 + y, 1.0 + y + z) });
    }
    let sigma = 1.0 / ((1.0 + y) * (1.0 + y) * (1.0 + y + z));
    let u_r = -eq.k_surf * enthalpy_ratio_at_vacuum(eq, sigma)?;
    Ok(SurfaceSample {
        t: s.t,
        r: rp * (1.0 + y),
        r_r: 1.0 + y + z,
        r_rr: 2.0 * y_r + rp * y_rr,
        v: rp * v,
        v_r: v + rp * vx * g,
        r_t: rp * dys,
        v_t: rp * dvs,
        r_rt: dys + grid.surface_value(&dz),
        u_r,
    })
}

/// Matching data at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchSample {
    pub t: f64,
    pub k_sharp: f64,
    /// 1 + V²/c² − 2Gm₊/(c²R).
    pub lapse: f64,
    /// ∂ₜt♯, ∂ᵣt♯, ∂ₜ∂ᵣt♯, ∂ᵣ²t♯ at r₊ + 0.
    pub h: f64,
    pub h1: f64,
    pub h1_t: f64,
    /// ∂ₜ∂ᵣt♯ by the chain rule through the surface equations.
    pub h1_t_chain: f64,
    pub h2: f64,
    /// ∂ᵣ²R♯ at r₊ + 0.
    pub f2: f64,
    pub determinant: f64,
    pub determinant_formula: f64,
    /// (∂ᵣ²R♯ − ∂ᵣ²R)/(∂ᵣR)² and the closed form in V, ∂ₜV, R.
    pub jump: f64,
    pub jump_formula: f64,
    /// One-sided g₀₀, g₀₁, g₁₁ and their r-derivatives at r₊ − 0 and r₊ + 0.
    pub interior: [f64; 6],
    pub exterior: [f64; 6],
    /// Relative C¹ residuals: g₀₀, g₀₁, g₁₁, g₂₂ and their r-derivatives.
    pub residuals: [f64; 8],
    /// |∂ₜR − √κ V|, zero by the surface equations.
    pub surface_velocity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExteriorChart {
    pub t: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub h_t: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub delta_cut: f64,
    pub r_plus: f64,
    f0_t: Vec<f64>,
    f1_t: Vec<f64>,
    f2_t: Vec<f64>,
    h1_t: Vec<f64>,
    h2_t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicReport {
    pub samples: Vec<MatchSample>,
    pub max_c1_residual: f64,
    pub max_jump: f64,
    pub max_jump_formula_error: f64,
    pub min_abs_determinant: f64,
    pub max_determinant_deviation: f64,
    /// max |h1_t − h1_t_chain| relative to max |h1_t|.
    pub route_agreement: f64,
}

/// Fourth-order derivative of a uniformly sampled series, one-sided at the ends.
fn time_derivative(f: &[f64], dt: f64) -> Vec<f64> {
    let n = f.len();
    if n < 5 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let d = if i >= 2 && i + 2 < n {
                f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]
            } else if i == 0 {
                -25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]
            } else if i == 1 {
                -3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]
            } else if i == n - 1 {
                25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3] + 3.0 * f[i - 4]
            } else {
                3.0 * f[i + 1] + 10.0 * f[i] - 18.0 * f[i - 1] + 6.0 * f[i - 2] - f[i - 3]
            };
            d / (12.0 * dt)
        })
        .collect()
}

/// Build t♯, R♯ at r₊ + 0 from consecutive equally spaced states of one run.
pub fn dynamic_c1_match(
    eq: &Equilibrium,
    grid: &Grid,
    mode: EvolutionMode,
    states: &[PerturbationState],
    delta_cut: f64,
) -> Result<(ExteriorChart, DynamicReport)> {
    let surf: Vec<SurfaceSample> = states.iter().map(|s| surface_sample(eq, grid, mode, s)).collect::<Result<_>>()?;
    dynamic_c1_match_surface(eq, &surf, delta_cut)
}

/// As `dynamic_c1_match` from a stored surface series.
pub fn dynamic_c1_match_surface(eq: &Equilibrium, surf: &[SurfaceSample], delta_cut: f64) -> Result<(ExteriorChart, DynamicReport)> {
    if surf.len() < 5 {
        return domain("matching needs at least five states");
    }
    let dt = surf[1].t - surf[0].t;
    let ic2 = eq.eos.inv_c2();
    let c = eq.eos.c;
    let (gm, sk) = (eq.eos.g * eq.m_plus, eq.kappa.sqrt());
    let n = surf.len();
    let mut ks = vec![0.0; n];
    let mut lapse = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut h1 = vec![0.0; n];
    let mut h1_chain = vec![0.0; n];
    for (i, s) in surf.iter().enumerate() {
        ks[i] = 1.0 - 2.0 * gm * ic2 / s.r;
        lapse[i] = 1.0 + s.v * s.v * ic2 - 2.0 * gm * ic2 / s.r;
        if !(lapse[i] > 0.0) {
            return Err(Error::Matching(format!("surface lapse {} not positive at t = {}", lapse[i], s.t)));
        }
        h[i] = sk / ks[i] * lapse[i].sqrt();
        h1[i] = ic2 / ks[i] / lapse[i].sqrt() * s.v * s.r_r;
        let kp = 2.0 * gm * ic2 / (s.r * s.r);
        let k_t = kp * s.r_t;
        let l_t = 2.0 * s.v * s.v_t * ic2 + kp * s.r_t;
        let (k, l) = (ks[i], lapse[i]);
        h1_chain[i] = ic2
            * (-k_t / (k * k) / l.sqrt() * s.v * s.r_r - 0.5 / k * l.powf(-1.5) * l_t * s.v * s.r_r
                + (s.v_t * s.r_r + s.v * s.r_rt) / (k * l.sqrt()));
    }
    let h1_t = time_derivative(&h1, dt);
    let mut samples = Vec::with_capacity(n);
    let (mut f2, mut h2) = (vec![0.0; n], vec![0.0; n]);
    for (i, s) in surf.iter().enumerate() {
        let (k, l) = (ks[i], lapse[i]);
        let kp = 2.0 * gm * ic2 / (s.r * s.r);
        let (tt, tr, ttr) = (h[i], h1[i], h1_t[i]);
        // Interior one-sided values at r₊ − 0.
        let g00_i = eq.kappa;
        let g11_i = -s.r_r * s.r_r / l;
        let l_r = 2.0 * s.v * s.v_r * ic2 + kp * s.r_r;
        let dg00_i = -2.0 * eq.kappa * ic2 * s.u_r;
        let dg11_i = l_r / (l * l) * s.r_r * s.r_r - 2.0 / l * s.r_r * s.r_rr;
        // ∂ᵣg₀₁ = 0 and ∂ᵣg₁₁ continuity, linear in (∂ᵣ²t♯, ∂ᵣ²R♯).
        let a = Matrix2::new(c * k * tt, -s.r_t / (c * k), 2.0 * c * c * k * tr, -2.0 * s.r_r / k);
        let rhs = Vector2::new(
            -(c * kp * s.r_r * tt * tr + kp * s.r_r * s.r_r * s.r_t / (c * k * k) + c * k * ttr * tr - s.r_rt * s.r_r / (c * k)),
            dg11_i - (c * c * kp * s.r_r * tr * tr + kp * s.r_r.powi(3) / (k * k)),
        );
        // The rows are c and 2 times the normalized junction conditions.
        let det = a.determinant() / (2.0 * c);
        if det.abs() < 0.5 {
            return Err(Error::Matching(format!("junction determinant {det} too small at t = {}", s.t)));
        }
        let sol = a.lu().solve(&rhs).ok_or_else(|| Error::Matching("singular junction system".into()))?;
        let (trr, rrr) = (sol[0], sol[1]);
        h2[i] = trr;
        f2[i] = rrr;
        // Exterior one-sided values at r₊ + 0.
        let g00_e = k * tt * tt - s.r_t * s.r_t * ic2 / k;
        let g01_e = c * k * tt * tr - s.r_t * s.r_r / (c * k);
        let g11_e = c * c * k * tr * tr - s.r_r * s.r_r / k;
        let dg00_e = kp * s.r_r * (tt * tt + s.r_t * s.r_t * ic2 / (k * k)) + 2.0 * k * tt * ttr - 2.0 * s.r_t * s.r_rt * ic2 / k;
        let dg01_e = c * kp * s.r_r * tt * tr + kp * s.r_r * s.r_r * s.r_t / (c * k * k) + c * k * (ttr * tr + tt * trr)
            - (s.r_rt * s.r_r + s.r_t * rrr) / (c * k);
        let dg11_e = c * c * kp * s.r_r * tr * tr + kp * s.r_r.powi(3) / (k * k) + 2.0 * c * c * k * tr * trr - 2.0 * s.r_r * rrr / k;
        let rel = |i: f64, e: f64, scale: f64| (i - e).abs() / scale.max(i.abs()).max(e.abs());
        let dscale = kp;
        let residuals = [
            rel(g00_i, g00_e, 1.0),
            rel(0.0, g01_e, 1.0),
            rel(g11_i, g11_e, 1.0),
            0.0,
            rel(dg00_i, dg00_e, dscale),
            rel(0.0, dg01_e, dscale),
            rel(dg11_i, dg11_e, dscale),
            0.0,
        ];
        let jump = (rrr - s.r_rr) / (s.r_r * s.r_r);
        let jump_formula = -s.v * s.v * ic2 * (gm * ic2 / (s.r * s.r) + ic2 * s.v_t / sk) / (l * l);
        samples.push(MatchSample {
            t: s.t,
            k_sharp: k,
            lapse: l,
            h: tt,
            h1: tr,
            h1_t: ttr,
            h1_t_chain: h1_chain[i],
            h2: trr,
            f2: rrr,
            determinant: det,
            determinant_formula: -sk / l.sqrt() * s.r_r,
            jump,
            jump_formula,
            interior: [g00_i, 0.0, g11_i, dg00_i, 0.0, dg11_i],
            exterior: [g00_e, g01_e, g11_e, dg00_e, dg01_e, dg11_e],
            residuals,
            surface_velocity_residual: (s.r_t - sk * s.v).abs(),
        });
    }
    let mut h0 = vec![0.0; n];
    for i in 1..n {
        h0[i] = h0[i - 1] + 0.5 * dt * (h[i - 1] + h[i]);
    }
    let chart = ExteriorChart {
        t: surf.iter().map(|s| s.t).collect(),
        f0: surf.iter().map(|s| s.r).collect(),
        f1: surf.iter().map(|s| s.r_r).collect(),
        f2_t: time_derivative(&f2, dt),
        h2_t: time_derivative(&h2, dt),
        f2,
        h_t: h.clone(),
        h0,
        h1: h1.clone(),
        h2,
        delta_cut,
        r_plus: eq.r_plus,
        f0_t: surf.iter().map(|s| s.r_t).collect(),
        f1_t: surf.iter().map(|s| s.r_rt).collect(),
        h1_t: h1_t.clone(),
    };
    let fold = |f: &dyn Fn(&MatchSample) -> f64| samples.iter().map(f).fold(0.0f64, f64::max);
    let h1_scale = h1_t.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
    let jump_scale = samples.iter().map(|s| s.jump_formula.abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let report = DynamicReport {
        max_c1_residual: fold(&|s| s.residuals.iter().cloned().fold(0.0, f64::max)),
        max_jump: fold(&|s| s.jump.abs()),
        max_jump_formula_error: fold(&|s| (s.jump - s.jump_formula).abs()) / jump_scale,
        min_abs_determinant: samples.iter().map(|s| s.determinant.abs()).fold(f64::INFINITY, f64::min),
        max_determinant_deviation: fold(&|s| (s.determinant + 1.0).abs()),
        route_agreement: samples.iter().map(|s| (s.h1_t - s.h1_t_chain).abs()).fold(0.0, f64::max) / h1_scale,
        samples,
    };
    Ok((chart, report))
}

/// One row of the patched metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub t: f64,
    pub r: f64,
    pub g00: f64,
    pub g01: f64,
    pub g11: f64,
    pub g22: f64,
}

impl ExteriorChart {
    /// Exterior metric components at time index i and radius r ≥ r₊.
    pub fn exterior(&self, eq: &Equilibrium, i: usize, r: f64) -> MetricRow {
        let ic2 = eq.eos.inv_c2();
        let c = eq.eos.c;
        let s = r - self.r_plus;
        let (chi, dchi) = cutoff(s / self.delta_cut);
        let dchi = dchi / self.delta_cut;
        // Written as r plus corrections so that a static run reproduces r exactly.
        let rs = r + (self.f0[i] - self.r_plus) + (self.f1[i] - 1.0) * s + 0.5 * self.f2[i] * s * s * chi;
        let rs_t = self.f0_t[i] + self.f1_t[i] * s + 0.5 * self.f2_t[i] * s * s * chi;
        let rs_r = self.f1[i] + self.f2[i] * s * chi + 0.5 * self.f2[i] * s * s * dchi;
        let poly = self.h1[i] * s + 0.5 * self.h2[i] * s * s;
        let ts_t = self.h_t[i] + (self.h1_t[i] * s + 0.5 * self.h2_t[i] * s * s) * chi;
        let ts_r = (self.h1[i] + self.h2[i] * s) * chi + poly * dchi;
        let k = 1.0 - 2.0 * eq.eos.g * eq.m_plus * ic2 / rs;
        MetricRow {
            t: self.t[i],
            r,
            g00: k * ts_t * ts_t - ic2 * rs_t * rs_t / k,
            g01: c * k * ts_t * ts_r - rs_t * rs_r / (c * k),
            g11: c * c * k * ts_r * ts_r - rs_r * rs_r / k,
            g22: -rs * rs,
        }
    }
}

/// Interior metric components at the nodes with r ≥ r_min.
pub fn interior_rows(eq: &Equilibrium, grid: &Grid, s: &PerturbationState, r_min: f64) -> Result<Vec<MetricRow>> {
    let ic2 = eq.eos.inv_c2();
    let z = grid.z_of(&s.y);
    let mut out = Vec::new();
    for k in 0..grid.size {
        if grid.r[k] < r_min {
            continue;
        }
        let (a, b) = (1.0 + s.y[k], 1.0 + s.y[k] + z[k]);
        let rho = grid.rho[k] / (a * a * b);
        let u = eq.eos.enthalpy_u(rho)?;
        let big_r = grid.r[k] * a;
        let vv = grid.r[k] * s.v[k];
        let m = grid.mu[k] * grid.r[k].powi(3);
        let l = 1.0 + vv * vv * ic2 - 2.0 * eq.eos.g * m * ic2 / big_r;
        out.push(MetricRow { t: s.t, r: grid.r[k], g00: eq.kappa * (-2.0 * u * ic2).exp(), g01: 0.0, g11: -b * b / l, g22: -big_r * big_r });
    }
    Ok(out)
}

/// Patched metric on the stored times (every `stride`-th) at interior nodes r ≥ r₊/2 and
/// exterior radii out to r₊ + 3δ.
pub fn patched_metric(eq: &Equilibrium, grid: &Grid, chart: &ExteriorChart, states: &[PerturbationState], stride: usize) -> Result<Vec<MetricRow>> {
    let stride = stride.max(1);
    let picked: Vec<PerturbationState> = states.iter().step_by(stride).cloned().collect();
    patched_metric_snapshots(eq, grid, chart, &picked, stride)
}

/// Patched metric from snapshots taken every `every` steps of the matched run.
pub fn patched_metric_snapshots(
    eq: &Equilibrium,
    grid: &Grid,
    chart: &ExteriorChart,
    snapshots: &[PerturbationState],
    every: usize,
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for (j, s) in snapshots.iter().enumerate() {
        let i = j * every;
        if i >= chart.t.len() {
            return domain(format!("snapshot {j} lies beyond the matched series"));
        }
        rows.extend(interior_rows(eq, grid, s, 0.5 * eq.r_plus)?);
        for k in 0..=24 {
            rows.push(chart.exterior(eq, i, eq.r_plus + chart.delta_cut * k as f64 / 8.0));
        }
    }
    Ok(rows)
}

/// 𝒜(t) from surface V, ∂ₜV and R.
pub fn jump_a(eq: &Equilibrium, v: f64, v_t: f64, r: f64) -> f64 {
    let ic2 = eq.eos.inv_c2();
    let gm = eq.eos.g * eq.m_plus;
    let l = 1.0 + v * v * ic2 - 2.0 * gm * ic2 / r;
    -v * v * ic2 * (gm * ic2 / (r * r) + ic2 * v_t / eq.kappa.sqrt()) / (l * l)
}
