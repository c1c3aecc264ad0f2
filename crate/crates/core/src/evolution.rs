//! Time evolution of radial perturbations R = r(1+y), V = rv in the Lagrangian frame.
//!
//! Fields are stored as nodal values at the Gauss–Jacobi nodes of the x-chart. The linear
//! system uses the Galerkin operator of the spectrum solver; the nonlinear system is
//! evaluated pointwise from the equilibrium and the equation of state, with x-derivatives
//! taken through the same polynomial basis.

use crate::error::{domain, Error, Result};
use crate::numerics::jacobi::JacobiBasis;
use crate::numerics::ode::rk4_step;
use crate::pulsation::{galerkin_matrices, gauss_rule, sl_point, LiouvilleChart, PeriodicMode, Spectrum, XChart};
use crate::tov::Equilibrium;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Time step; `None` gives period/steps_per_period of the driving mode.
    pub dt: Option<f64>,
    pub steps_per_period: usize,
    /// End time in periods of the driving mode.
    pub periods: f64,
    pub mode: EvolutionMode,
    pub epsilon: f64,
    /// Exponential filter applied to the top third of coefficients after each nonlinear step.
    pub filter_strength: f64,
    pub basis_size: usize,
    /// Driving mode, counted from 1.
    pub mode_index: usize,
    pub theta0: f64,
    /// Keep a full-field snapshot every this many steps (0 = none).
    pub snapshot_every: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: None,
            steps_per_period: 2000,
            periods: 1.0,
            mode: EvolutionMode::Linear,
            epsilon: 1e-3,
            filter_strength: 1e-3,
            basis_size: 64,
            mode_index: 1,
            theta0: 0.0,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationState {
    pub t: f64,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
}

/// Equilibrium profile and polynomial machinery at the Gauss–Jacobi nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    pub size: usize,
    pub x: Vec<f64>,
    pub one_minus_x: Vec<f64>,
    pub weights: Vec<f64>,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    /// ū′/r.
    pub dudr_over_r: Vec<f64>,
    pub mu: Vec<f64>,
    pub compactness: Vec<f64>,
    /// 1 + P̄/(c²ρ̄).
    pub enthalpy_factor: Vec<f64>,
    pub j0: Vec<f64>,
    /// (1/r) dx/dr.
    pub dx_dr_over_r: Vec<f64>,
    pub w_hat: Vec<f64>,
    /// Nodal values to basis coefficients.
    pub to_coeffs: DMatrix<f64>,
    pub from_coeffs: DMatrix<f64>,
    /// Nodal first and second x-derivatives.
    pub dx: DMatrix<f64>,
    pub dxx: DMatrix<f64>,
    /// Basis values and x-derivatives at x = 1.
    pub surface_row: DVector<f64>,
    pub surface_drow: DVector<f64>,
    pub surface_ddrow: DVector<f64>,
    /// Physical Galerkin mass and stiffness in coefficient space.
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Nodal Galerkin operator 𝓛ₕ.
    pub operator: DMatrix<f64>,
    /// Nodal pointwise operator in the x-chart.
    pub operator_strong: DMatrix<f64>,
    pub lambda_scale: f64,
    pub xi_plus: f64,
    pub r_plus: f64,
    pub sqrt_kappa: f64,
    pub(crate) eos: crate::eos::EosModel,
}

pub fn build_grid(eq: &Equilibrium, chart: &LiouvilleChart, xc: &XChart, size: usize) -> Result<Grid> {
    if size < 4 {
        return domain(format!("basis size {size} too small"));
    }
    let basis = JacobiBasis::new(0.5 * xc.n_param - 1.0, 1.5, size);
    let rule = gauss_rule(&basis, size);
    let m = size;
    let mut from = DMatrix::zeros(m, m);
    let mut dfrom = DMatrix::zeros(m, m);
    let mut ddfrom = DMatrix::zeros(m, m);
    let (mut p, mut dp, mut ddp) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for g in 0..m {
        basis.eval_all(m, rule.x[g], &mut p, &mut dp, &mut ddp);
        for i in 0..m {
            from[(g, i)] = p[i];
            dfrom[(g, i)] = dp[i];
            ddfrom[(g, i)] = ddp[i];
        }
    }
    let to = DMatrix::from_fn(m, m, |i, g| rule.w[g] * from[(g, i)]);
    basis.eval_all(m, 1.0, &mut p, &mut dp, &mut ddp);
    let surface_row = DVector::from_column_slice(&p);
    let surface_drow = DVector::from_column_slice(&dp);
    let surface_ddrow = DVector::from_column_slice(&ddp);
    let dx = &dfrom * &to;
    let dxx = &ddfrom * &to;

    let ic2 = eq.eos.inv_c2();
    let mut g = Grid {
        size,
        x: rule.x.clone(),
        one_minus_x: rule.one_minus_x.clone(),
        weights: rule.w.clone(),
        r: vec![0.0; m],
        rho: vec![0.0; m],
        p: vec![0.0; m],
        dudr_over_r: vec![0.0; m],
        mu: vec![0.0; m],
        compactness: vec![0.0; m],
        enthalpy_factor: vec![0.0; m],
        j0: vec![0.0; m],
        dx_dr_over_r: vec![0.0; m],
        w_hat: vec![0.0; m],
        to_coeffs: to,
        from_coeffs: from,
        dx,
        dxx,
        surface_row,
        surface_drow,
        surface_ddrow,
        mass: DMatrix::zeros(m, m),
        stiffness: DMatrix::zeros(m, m),
        operator: DMatrix::zeros(m, m),
        operator_strong: DMatrix::zeros(m, m),
        lambda_scale: xc.lambda_scale(),
        xi_plus: xc.xi_plus,
        r_plus: eq.r_plus,
        sqrt_kappa: eq.kappa.sqrt(),
        eos: eq.eos,
    };
    for k in 0..m {
        let (x, omx) = (rule.x[k], rule.one_minus_x[k]);
        let vt = if x <= 0.5 { x.sqrt().asin() } else { FRAC_PI_2 - omx.sqrt().asin() };
        let cp = chart.at_vartheta(vt, FRAC_PI_2 - vt);
        let pt = eq.at_ud(cp.u, cp.deficit)?;
        let sl = sl_point(eq, &pt);
        g.r[k] = pt.r;
        g.rho[k] = pt.th.rho;
        g.p[k] = pt.th.p;
        g.dudr_over_r[k] = pt.dudr_over_r;
        g.mu[k] = pt.mu;
        g.compactness[k] = pt.compactness;
        g.enthalpy_factor[k] = 1.0 + pt.th.p_over_rho * ic2;
        g.j0[k] = sl.j0;
        let sqrt_b_over_a = (pt.th.rho / (pt.th.gamma_p * pt.th.p)).sqrt() * (pt.h - pt.f).exp();
        g.dx_dr_over_r[k] = (PI / xc.xi_plus) * (x * omx).sqrt() * sqrt_b_over_a / pt.r;
        g.w_hat[k] = xc.w_hat_at(x);
    }
    let (k, mass) = galerkin_matrices(xc.n_param, m, |x| xc.w_hat_at(x), |x| xc.q_tilde_at(x));
    let stiffness = g.lambda_scale * k;
    let minv_k = mass.clone().cholesky().ok_or_else(|| Error::Numerical("mass matrix not positive definite".into()))?.solve(&stiffness);
    g.operator = &g.from_coeffs * minv_k * &g.to_coeffs;
    g.mass = mass;
    g.stiffness = stiffness;
    let mut strong = DMatrix::zeros(m, m);
    for i in 0..m {
        let (x, omx) = (g.x[i], g.one_minus_x[i]);
        let b = xc.b_coef(x);
        for j in 0..m {
            strong[(i, j)] = g.lambda_scale * (-x * omx * g.dxx[(i, j)] - b * g.dx[(i, j)]);
        }
        strong[(i, i)] += g.lambda_scale * xc.q_tilde_at(x);
    }
    g.operator_strong = strong;
    Ok(g)
}

impl Grid {
    pub fn coeffs(&self, f: &[f64]) -> DVector<f64> {
        &self.to_coeffs * DVector::from_column_slice(f)
    }

    pub fn surface_value(&self, f: &[f64]) -> f64 {
        self.coeffs(f).dot(&self.surface_row)
    }

    /// Nodal values of a function.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.x.iter().map(|&x| f(x)).collect()
    }

    /// Linear energy ‖∂ₜy‖²_b + (𝓛y|y)_b from nodal y and ∂ₜy.
    pub fn energy(&self, y: &[f64], dy: &[f64]) -> f64 {
        let c = self.coeffs(y);
        let d = self.coeffs(dy);
        (d.transpose() * &self.mass * &d)[(0, 0)] + (c.transpose() * &self.stiffness * &c)[(0, 0)]
    }

    /// Weighted inner product (f|g)_b = ∫ W f g dx by the nodal Gauss rule.
    pub fn inner_b(&self, f: &[f64], g: &[f64]) -> f64 {
        (0..self.size).map(|k| self.weights[k] * (self.xi_plus / PI) * self.w_hat[k] * f[k] * g[k]).sum()
    }

    /// Largest stable time step: half the smallest Liouville spacing between nodes.
    pub fn cfl_limit(&self) -> f64 {
        let xi: Vec<f64> = (0..self.size)
            .map(|k| {
                let vt = if self.x[k] <= 0.5 { self.x[k].sqrt().asin() } else { FRAC_PI_2 - self.one_minus_x[k].sqrt().asin() };
                2.0 * self.xi_plus * vt / PI
            })
            .collect();
        0.5 * xi.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn rhs_linear(&self, y: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ly = &self.operator * DVector::from_column_slice(y);
        let dy = (0..self.size).map(|k| self.j0[k] * v[k]).collect();
        let dv = (0..self.size).map(|k| -ly[k] / self.j0[k]).collect();
        (dy, dv)
    }

    /// z = r ∂y/∂r at the nodes.
    pub fn z_of(&self, y: &[f64]) -> Vec<f64> {
        let yx = &self.dx * DVector::from_column_slice(y);
        (0..self.size).map(|k| self.r[k] * self.r[k] * self.dx_dr_over_r[k] * yx[k]).collect()
    }

    pub fn rhs_nonlinear(&self, t: f64, y: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.z_of(y);
        self.rhs_nonlinear_yz(t, y, &z, v)
    }

    /// Right-hand side with z supplied as an independent field.
    pub fn rhs_nonlinear_yz(&self, t: f64, y: &[f64], z: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.size;
        let eos = &self.eos;
        let (g_const, ic2) = (eos.g, eos.inv_c2());
        let mut pi = vec![0.0; m];
        let mut p = vec![0.0; m];
        let mut onep = vec![0.0; m];
        let mut ef = vec![0.0; m];
        for k in 0..m {
            let (a, b) = (1.0 + y[k], 1.0 + y[k] + z[k]);
            if !(a > 0.0 && b > 0.0) || !v[k].is_finite() {
                return Err(Error::Blowup { t, reason: format!("positivity lost at x = {:.6} (1+y = {a:e}, 1+y+z = {b:e})", self.x[k]) });
            }
            let rho = self.rho[k] / (a * a * b);
            p[k] = eos.pressure(rho)?;
            pi[k] = p[k] / self.p[k];
            onep[k] = 1.0 + p[k] / rho * ic2;
            ef[k] = self.sqrt_kappa * (-eos.enthalpy_u(rho)? * ic2).exp();
        }
        let pi_x = &self.dx * DVector::from_column_slice(&pi);
        let v_x = &self.dx * DVector::from_column_slice(v);
        let mut dy = vec![0.0; m];
        let mut dv = vec![0.0; m];
        for k in 0..m {
            let a = 1.0 + y[k];
            let r2d = self.r[k] * self.r[k] * self.dx_dr_over_r[k];
            let p_over_rho_bar = p[k] / self.rho[k];
            // (1/(r ρ̄)) ∂P/∂r with P = P̄ Π and P̄′/ρ̄ = (1 + P̄/c²ρ̄) ū′.
            let grad = self.enthalpy_factor[k] * self.dudr_over_r[k] * pi[k] + (self.p[k] / self.rho[k]) * self.dx_dr_over_r[k] * pi_x[k];
            let t1 = ic2 * a * a * p_over_rho_bar * v[k] * (v[k] + r2d * v_x[k]);
            let t2 = -g_const / (a * a) * (self.mu[k] + 4.0 * PI * ic2 * p[k] * a * a * a);
            let r2v2 = self.r[k] * self.r[k] * v[k] * v[k];
            let t3 = -(1.0 + ic2 * r2v2 - self.compactness[k] / a) / onep[k] * a * a * grad;
            dy[k] = ef[k] * onep[k] * v[k];
            dv[k] = ef[k] * (t1 + t2 + t3);
        }
        Ok((dy, dv))
    }

    /// Exponential filter on the top third of the basis coefficients.
    pub fn filter(&self, f: &mut [f64], strength: f64) {
        if strength <= 0.0 {
            return;
        }
        let mut c = self.coeffs(f);
        let k0 = 2 * self.size / 3;
        let span = (self.size - 1 - k0).max(1) as f64;
        for k in k0..self.size {
            let eta = (k - k0) as f64 / span;
            c[k] *= (-strength * eta.powi(8)).exp();
        }
        let back = &self.from_coeffs * c;
        f.copy_from_slice(back.as_slice());
    }

    /// Surface radius R₊ = r₊(1 + y(1)).
    pub fn surface_radius(&self, y: &[f64]) -> f64 {
        self.r_plus * (1.0 + self.surface_value(y))
    }

    /// m₊ from ∫4πρR²∂ᵣR dr, written as ∫4πρ̄r² σ(1+y)²(1+y+z) dr on the nodal rule.
    pub fn lagrangian_mass_ratio(&self, y: &[f64]) -> f64 {
        let z = self.z_of(y);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.size {
            let (a, b) = (1.0 + y[k], 1.0 + y[k] + z[k]);
            let sigma = 1.0 / (a * a * b);
            let w = self.weights[k] * self.rho[k] * self.r[k] / self.dx_dr_over_r[k];
            num += w * sigma * a * a * b;
            den += w;
        }
        num / den
    }
}

fn pack(y: &[f64], v: &[f64]) -> Vec<f64> {
    let mut s = y.to_vec();
    s.extend_from_slice(v);
    s
}

/// One RK4 step of the chosen system.
pub fn step(grid: &Grid, cfg: &EvolutionConfig, state: &PerturbationState, dt: f64) -> Result<PerturbationState> {
    let m = grid.size;
    let mut err = None;
    let mut f = |t: f64, s: &[f64]| -> Vec<f64> {
        let (y, v) = s.split_at(m);
        let r = match cfg.mode {
            EvolutionMode::Linear => Ok(grid.rhs_linear(y, v)),
            EvolutionMode::Nonlinear => grid.rhs_nonlinear(t, y, v),
        };
        match r {
            Ok((dy, dv)) => pack(&dy, &dv),
            Err(e) => {
                err.get_or_insert(e);
                vec![f64::NAN; 2 * m]
            }
        }
    };
    let next = rk4_step(&mut f, state.t, &pack(&state.y, &state.v), dt);
    if let Some(e) = err {
        return Err(e);
    }
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::Blowup { t: state.t, reason: "non-finite state".into() });
    }
    let (y, v) = next.split_at(m);
    let mut out = PerturbationState { t: state.t + dt, y: y.to_vec(), v: v.to_vec() };
    if cfg.mode == EvolutionMode::Nonlinear {
        grid.filter(&mut out.y, cfg.filter_strength);
        grid.filter(&mut out.v, cfg.filter_strength);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub e_lin: f64,
    pub r_plus: f64,
    pub sup_y: f64,
    pub sup_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<EnergySample>,
    pub snapshots: Vec<PerturbationState>,
    pub initial: PerturbationState,
    pub final_state: PerturbationState,
    pub dt: f64,
    /// sup_t ‖y/ε − Y₁‖∞ for runs started from ε(Y₁, V₁).
    pub defect: Option<f64>,
    /// Per-step ℓ = log(φ/r) is kept only through `comoving_map`.
    pub steps: usize,
}

/// Nodal (Y₁, V₁) of a periodic mode at time t.
pub fn mode_fields(grid: &Grid, spec: &Spectrum, mode: &PeriodicMode, t: f64) -> (Vec<f64>, Vec<f64>) {
    let psi: Vec<f64> = grid.x.iter().map(|&x| spec.psi(mode.index, x)).collect();
    let (s, ds) = mode.time_factor(t);
    let y = psi.iter().map(|p| s * p).collect();
    let v = psi.iter().zip(&grid.j0).map(|(p, j)| ds * p / j).collect();
    (y, v)
}

fn sample(grid: &Grid, cfg: &EvolutionConfig, s: &PerturbationState) -> Result<EnergySample> {
    let dy = match cfg.mode {
        EvolutionMode::Linear => grid.rhs_linear(&s.y, &s.v).0,
        EvolutionMode::Nonlinear => grid.rhs_nonlinear(s.t, &s.y, &s.v)?.0,
    };
    let sup = |f: &[f64]| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(EnergySample { t: s.t, e_lin: grid.energy(&s.y, &dy), r_plus: grid.surface_radius(&s.y), sup_y: sup(&s.y), sup_v: sup(&s.v) })
}

/// Evolve `steps` steps from `initial`. With a driving mode, the defect against ε·Y₁ is tracked.
pub fn run(
    grid: &Grid,
    cfg: &EvolutionConfig,
    initial: PerturbationState,
    dt: f64,
    steps: usize,
    reference: Option<(&Spectrum, &PeriodicMode)>,
) -> Result<Trajectory> {
    run_observed(grid, cfg, initial, dt, steps, reference, |_| Ok(()))
}

/// As `run`, calling `observe` on every state including the initial one.
pub fn run_observed<F>(
    grid: &Grid,
    cfg: &EvolutionConfig,
    initial: PerturbationState,
    dt: f64,
    steps: usize,
    reference: Option<(&Spectrum, &PeriodicMode)>,
    mut observe: F,
) -> Result<Trajectory>
where
    F: FnMut(&PerturbationState) -> Result<()>,
{
    if !(dt.abs() > 0.0) {
        return domain("time step must be non-zero");
    }
    if dt.abs() > grid.cfl_limit() {
        return domain(format!("dt = {dt:e} exceeds the CFL bound {:e}", grid.cfl_limit()));
    }
    let defect_at = |s: &PerturbationState| {
        reference.map(|(spec, mode)| {
            let (y1, _) = mode_fields(grid, spec, mode, s.t);
            s.y.iter().zip(&y1).map(|(y, y1)| (y / cfg.epsilon - y1).abs()).fold(0.0f64, f64::max)
        })
    };
    let mut samples = vec![sample(grid, cfg, &initial)?];
    let mut snapshots = Vec::new();
    if cfg.snapshot_every > 0 {
        snapshots.push(initial.clone());
    }
    let mut defect = defect_at(&initial);
    observe(&initial)?;
    let mut s = initial.clone();
    for n in 1..=steps {
        s = step(grid, cfg, &s, dt)?;
        observe(&s)?;
        samples.push(sample(grid, cfg, &s)?);
        if cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0 {
            snapshots.push(s.clone());
        }
        if let (Some(d), Some(dn)) = (defect, defect_at(&s)) {
            defect = Some(d.max(dn));
        }
    }
    Ok(Trajectory { samples, snapshots, initial, final_state: s, dt, defect, steps })
}

/// Initial data ε(Y₁, V₁)(0) and the step for `steps_per_period` per period.
pub fn mode_initial(grid: &Grid, spec: &Spectrum, mode: &PeriodicMode, epsilon: f64) -> PerturbationState {
    let (y, v) = mode_fields(grid, spec, mode, 0.0);
    PerturbationState { t: 0.0, y: y.iter().map(|a| epsilon * a).collect(), v: v.iter().map(|a| epsilon * a).collect() }
}

/// Frequency of a sampled signal from its zero crossings, two per period.
pub fn crossing_frequency(t: &[f64], f: &[f64]) -> Option<f64> {
    let mut zeros = Vec::new();
    for i in 1..f.len() {
        if (f[i - 1] <= 0.0 && f[i] > 0.0) || (f[i - 1] >= 0.0 && f[i] < 0.0) {
            zeros.push(t[i - 1] + (t[i] - t[i - 1]) * f[i - 1] / (f[i - 1] - f[i]));
        }
    }
    if zeros.len() < 2 {
        return None;
    }
    Some((zeros.len() - 1) as f64 / (2.0 * (zeros[zeros.len() - 1] - zeros[0])))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetReport {
    pub s: f64,
    /// ‖FD − 𝓛‖/‖𝓛‖ on the v-equation, nodal max norm.
    pub rel_error: f64,
    pub rel_error_y: f64,
    pub residual: Vec<f64>,
}

/// Central-difference directional derivative of the nonlinear right-hand side at equilibrium
/// along (h, k), compared with the linear right-hand side.
pub fn frechet_check(grid: &Grid, h: &[f64], k: &[f64], s: f64) -> Result<FrechetReport> {
    let m = grid.size;
    let plus: Vec<f64> = h.iter().map(|a| s * a).collect();
    let minus: Vec<f64> = h.iter().map(|a| -s * a).collect();
    let kp: Vec<f64> = k.iter().map(|a| s * a).collect();
    let km: Vec<f64> = k.iter().map(|a| -s * a).collect();
    let (ayp, avp) = grid.rhs_nonlinear(0.0, &plus, &kp)?;
    let (aym, avm) = grid.rhs_nonlinear(0.0, &minus, &km)?;
    let fd_y: Vec<f64> = (0..m).map(|i| (ayp[i] - aym[i]) / (2.0 * s)).collect();
    let fd_v: Vec<f64> = (0..m).map(|i| (avp[i] - avm[i]) / (2.0 * s)).collect();
    // Pointwise x-chart operator, so the comparison carries no projection error.
    let ly = &grid.operator_strong * DVector::from_column_slice(h);
    let lin_y: Vec<f64> = (0..m).map(|i| grid.j0[i] * k[i]).collect();
    let lin_v: Vec<f64> = (0..m).map(|i| -ly[i] / grid.j0[i]).collect();
    let sup = |f: &[f64]| f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let residual: Vec<f64> = (0..m).map(|i| fd_v[i] - lin_v[i]).collect();
    let ry: Vec<f64> = (0..m).map(|i| fd_y[i] - lin_y[i]).collect();
    Ok(FrechetReport { s, rel_error: sup(&residual) / sup(&lin_v), rel_error_y: sup(&ry) / sup(&lin_y).max(1e-300), residual })
}

/// 𝓛h extracted as −J° times the central difference of ∂ₜv along (h, 0).
pub fn linearized_action(grid: &Grid, h: &[f64], s: f64) -> Result<Vec<f64>> {
    let m = grid.size;
    let zero = vec![0.0; m];
    let plus: Vec<f64> = h.iter().map(|a| s * a).collect();
    let minus: Vec<f64> = h.iter().map(|a| -s * a).collect();
    let (_, vp) = grid.rhs_nonlinear(0.0, &plus, &zero)?;
    let (_, vm) = grid.rhs_nonlinear(0.0, &minus, &zero)?;
    Ok((0..m).map(|i| -grid.j0[i] * (vp[i] - vm[i]) / (2.0 * s)).collect())
}

/// Rayleigh quotient (𝓛ψ|ψ)_b/(ψ|ψ)_b of the finite-difference linearization.
pub fn fd_rayleigh_quotient(grid: &Grid, psi: &[f64], s: f64) -> Result<f64> {
    let lp = linearized_action(grid, psi, s)?;
    Ok(grid.inner_b(&lp, psi) / grid.inner_b(psi, psi))
}

/// Rayleigh quotient (𝓛ψ|ψ)_b/(ψ|ψ)_b with a nodal operator matrix.
pub fn rayleigh_quotient(grid: &Grid, op: &DMatrix<f64>, psi: &[f64]) -> f64 {
    let lp = op * DVector::from_column_slice(psi);
    grid.inner_b(lp.as_slice(), psi) / grid.inner_b(psi, psi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyFit {
    pub x: Vec<f64>,
    /// Coefficient of ∂ₓh in the z-sensitivity of ∂ₜv.
    pub coefficient: Vec<f64>,
    /// Fitted exponent p in |coefficient| ~ (1 − x)^p near x = 1.
    pub exponent: f64,
}

/// At state (y, v), the map h ↦ ∂ₜv(y, z + s h, v) is c₀h + c₁∂ₓh; c₁ is recovered from h = 1 and h = x.
pub fn degeneracy_check(grid: &Grid, y: &[f64], v: &[f64], s: f64) -> Result<DegeneracyFit> {
    let m = grid.size;
    let z = grid.z_of(y);
    let response = |h: &[f64]| -> Result<Vec<f64>> {
        let zp: Vec<f64> = (0..m).map(|i| z[i] + s * h[i]).collect();
        let zm: Vec<f64> = (0..m).map(|i| z[i] - s * h[i]).collect();
        let (_, a) = grid.rhs_nonlinear_yz(0.0, y, &zp, v)?;
        let (_, b) = grid.rhs_nonlinear_yz(0.0, y, &zm, v)?;
        Ok((0..m).map(|i| (a[i] - b[i]) / (2.0 * s)).collect())
    };
    let one = vec![1.0; m];
    let r1 = response(&one)?;
    let rx = response(&grid.x)?;
    let coefficient: Vec<f64> = (0..m).map(|i| rx[i] - grid.x[i] * r1[i]).collect();
    let pts: Vec<(f64, f64)> =
        (0..m).filter(|&i| grid.one_minus_x[i] < 0.05).map(|i| (grid.one_minus_x[i].ln(), coefficient[i].abs().ln())).collect();
    let exponent = if pts.len() >= 2 { crate::numerics::fit::line(&pts).0 } else { f64::NAN };
    Ok(DegeneracyFit { x: grid.x.clone(), coefficient, exponent })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComovingMap {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    /// φ(t, r) per time (rows) and radius (columns).
    pub phi: Vec<Vec<f64>>,
}

/// φ(t, r) from ∂ₜφ = −(√κ/c²)e^{−u/c²}(1+y)²(P/ρ̄)v φ along the stored snapshots, with φ(0, r) = r.
/// Integrated as ℓ = log(φ/r) by RK4 over pairs of consecutive snapshot intervals.
pub fn comoving_map(eq: &Equilibrium, chart: &LiouvilleChart, grid: &Grid, snapshots: &[PerturbationState], radii: &[f64]) -> Result<ComovingMap> {
    let ic2 = eq.eos.inv_c2();
    let sk = eq.kappa.sqrt();
    let rate = |s: &PerturbationState, cy: &DVector<f64>, cv: &DVector<f64>, cz: &DVector<f64>, rs: f64| -> Result<f64> {
        if rs <= 0.0 || rs >= eq.r_plus {
            return Ok(0.0);
        }
        let p = eq.at_r(rs)?;
        let cp = chart.at_theta(2.0 * p.deficit.sqrt().atan2(p.u.sqrt()));
        let basis = JacobiBasis::new(0.5 * eq.eos.n_param() - 1.0, 1.5, grid.size);
        let (mut b, mut db, mut ddb) = (vec![0.0; grid.size], vec![0.0; grid.size], vec![0.0; grid.size]);
        basis.eval_all(grid.size, cp.x, &mut b, &mut db, &mut ddb);
        let bv = DVector::from_column_slice(&b);
        let (y, v, z) = (cy.dot(&bv), cv.dot(&bv), cz.dot(&bv));
        let _ = s;
        let (a, bb) = (1.0 + y, 1.0 + y + z);
        let rho = p.th.rho / (a * a * bb);
        let pr = eq.eos.pressure(rho)?;
        let u = eq.eos.enthalpy_u(rho)?;
        Ok(-sk * ic2 * (-u * ic2).exp() * a * a * (pr / p.th.rho) * v)
    };
    let mut ell = vec![0.0; radii.len()];
    let mut times = vec![snapshots[0].t];
    let mut phi = vec![radii.to_vec()];
    let coeffs = |s: &PerturbationState| (grid.coeffs(&s.y), grid.coeffs(&s.v), grid.coeffs(&grid.z_of(&s.y)));
    let mut i = 0;
    while i + 2 < snapshots.len() {
        let (s0, s1, s2) = (&snapshots[i], &snapshots[i + 1], &snapshots[i + 2]);
        let h = s2.t - s0.t;
        let (c0, c1, c2) = (coeffs(s0), coeffs(s1), coeffs(s2));
        for (j, &r) in radii.iter().enumerate() {
            let l = ell[j];
            let f = |c: &(DVector<f64>, DVector<f64>, DVector<f64>), s: &PerturbationState, l: f64| rate(s, &c.0, &c.1, &c.2, r * l.exp());
            let k1 = f(&c0, s0, l)?;
            let k2 = f(&c1, s1, l + 0.5 * h * k1)?;
            let k3 = f(&c1, s1, l + 0.5 * h * k2)?;
            let k4 = f(&c2, s2, l + h * k3)?;
            ell[j] = l + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        times.push(s2.t);
        phi.push(radii.iter().zip(&ell).map(|(r, l)| r * l.exp()).collect());
        i += 2;
    }
    Ok(ComovingMap { r: radii.to_vec(), t: times, phi })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyData {
    pub state: PerturbationState,
    pub r: Vec<f64>,
    /// R(0) = r(1 + ψ₀).
    pub radius: Vec<f64>,
    /// ∂ₜR(0) = r J(x, ψ₀, z₀) ψ₁ from the evolution equation.
    pub radius_rate: Vec<f64>,
    /// The closed form (1/c)√κ e^{−u(ρ⁰)/c²} r ψ₁, which omits the factor 1 + P/c²ρ⁰.
    pub radius_rate_quoted: Vec<f64>,
    pub smallness: f64,
    pub warning: Option<String>,
}

/// Initial data y = ψ₀, v = ψ₁ with the physical radius and its rate.
pub fn cauchy_setup<F0, F1>(grid: &Grid, psi0: F0, psi1: F1, delta: f64) -> Result<CauchyData>
where
    F0: Fn(f64) -> f64,
    F1: Fn(f64) -> f64,
{
    let y = grid.sample(&psi0);
    let v = grid.sample(&psi1);
    let eos = &grid.eos;
    let ic2 = eos.inv_c2();
    let z = grid.z_of(&y);
    let mut radius_rate = Vec::with_capacity(grid.size);
    let mut quoted = Vec::with_capacity(grid.size);
    for k in 0..grid.size {
        let (a, b) = (1.0 + y[k], 1.0 + y[k] + z[k]);
        if !(a > 0.0 && b > 0.0) {
            return domain(format!("initial data violate positivity at x = {}", grid.x[k]));
        }
        let rho0 = grid.rho[k] / (a * a * b);
        let p0 = eos.pressure(rho0)?;
        let ef = grid.sqrt_kappa * (-eos.enthalpy_u(rho0)? * ic2).exp();
        radius_rate.push(grid.r[k] * ef * (1.0 + p0 / rho0 * ic2) * v[k]);
        quoted.push(if eos.c.is_finite() { ef * grid.r[k] * v[k] / eos.c } else { ef * grid.r[k] * v[k] });
    }
    let yc = grid.coeffs(&y);
    let vc = grid.coeffs(&v);
    let dy = &grid.dx * DVector::from_column_slice(&y);
    let dv = &grid.dx * DVector::from_column_slice(&v);
    let sup = |f: &[f64]| f.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let smallness = sup(&y).max(sup(&v)).max(sup(dy.as_slice())).max(sup(dv.as_slice()));
    let _ = (yc, vc);
    let warning = (smallness > delta).then(|| format!("initial data of size {smallness:e} exceed the smallness bound {delta:e}"));
    Ok(CauchyData {
        radius: (0..grid.size).map(|k| grid.r[k] * (1.0 + y[k])).collect(),
        r: grid.r.clone(),
        state: PerturbationState { t: 0.0, y, v },
        radius_rate,
        radius_rate_quoted: quoted,
        smallness,
        warning,
    })
}
