//! Static equilibria: TOV integration from the center to the vacuum surface.
//!
//! The profile is stored on Chebyshev–Lobatto nodes in the enthalpy u, where
//! u = u_c cos²(θ/2), θ ∈ [0, π] running from the center to the surface. Both
//! X̂ = r²/(u_c − u) and μ = m/r³ are analytic in u on the closed interval, so
//! they are carried as Chebyshev series and every downstream quantity is
//! evaluated from them.

use crate::eos::{EosModel, ThermoPoint};
use crate::error::{domain, numerical, Error, Result};
use crate::numerics::cheb::{lobatto_point, Cheb};
use crate::numerics::ode::{hermite, Dopri5, OdeError};
use crate::numerics::roots::brent;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TovOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Start radius; `None` picks 1e-3 of the Newtonian radius scale.
    pub delta: Option<f64>,
    pub u_switch_frac: f64,
    pub grid_points: usize,
    /// Give up ("long equilibrium") past this multiple of the radius scale.
    pub r_max_factor: f64,
    pub cheb_chop: f64,
}

impl Default for TovOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-30,
            delta: None,
            u_switch_frac: 1e-3,
            grid_points: 2048,
            r_max_factor: 1e3,
            cheb_chop: 1e-12,
        }
    }
}

/// Second-order center series u = u_c + u₂r² + u₄r⁴, m = m₃r³ + m₅r⁵.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterSeries {
    pub rho_c: f64,
    pub p_c: f64,
    pub u_c: f64,
    /// (4π/3)ρ_c.
    pub m3: f64,
    pub m5: f64,
    /// Pressure deficit: P = P_c − p2·r² + O(r⁴).
    pub p2: f64,
    pub u2: f64,
    pub u4: f64,
    pub delta: f64,
    pub m_delta: f64,
    pub u_delta: f64,
    pub p_delta: f64,
    /// Relative size of the first neglected term at δ.
    pub truncation: f64,
}

impl CenterSeries {
    /// r² at enthalpy u = u_c − d, inverting the series.
    pub fn r2_of_deficit(&self, d: f64) -> f64 {
        let disc = (self.u2 * self.u2 - 4.0 * self.u4 * d).max(0.0);
        2.0 * d / (-self.u2 + disc.sqrt())
    }

    pub fn deficit_delta(&self) -> f64 {
        let d2 = self.delta * self.delta;
        -d2 * (self.u2 + self.u4 * d2)
    }

    pub fn mass(&self, r: f64) -> f64 {
        r.powi(3) * (self.m3 + self.m5 * r * r)
    }

    /// Radius scale sqrt(u_c/|u₂|).
    pub fn radius_scale(&self) -> f64 {
        (self.u_c / -self.u2).sqrt()
    }
}

pub fn center_expansion(eos: &EosModel, rho_c: f64, delta: Option<f64>) -> Result<CenterSeries> {
    if !(rho_c > 0.0) {
        return domain(format!("central density must be positive, got {rho_c}"));
    }
    let g = eos.g;
    let ic2 = eos.inv_c2();
    let th = eos.thermo(rho_c)?;
    let m3 = 4.0 * PI * rho_c / 3.0;
    let core = m3 + 4.0 * PI * th.p * ic2;
    let u2 = -0.5 * g * core;
    let p2c = (rho_c + th.p * ic2) * u2;
    let rho2 = p2c / th.dpdrho;
    let m5 = 4.0 * PI * rho2 / 5.0;
    let u4 = -0.25 * g * (m5 + 4.0 * PI * p2c * ic2 + core * 2.0 * g * m3 * ic2);
    let scale = (th.u / -u2).sqrt();
    let delta = delta.unwrap_or(1e-3 * scale);
    let ratio = (u4 / u2).abs() * delta * delta;
    let truncation = ratio * ratio;
    if truncation > 1e-12 {
        let suggested = delta * (1e-12 / truncation).powf(0.25) * 0.9;
        return domain(format!(
            "center series truncation {truncation:.3e} exceeds 1e-12 at delta = {delta:.3e}; use delta <= {suggested:.3e}"
        ));
    }
    let u_delta = th.u + u2 * delta * delta + u4 * delta.powi(4);
    let p_delta = eos.thermo(eos.rho_of_u(u_delta)?)?.p;
    Ok(CenterSeries {
        rho_c,
        p_c: th.p,
        u_c: th.u,
        m3,
        m5,
        p2: -p2c,
        u2,
        u4,
        delta,
        m_delta: delta.powi(3) * (m3 + m5 * delta * delta),
        u_delta,
        p_delta,
        truncation,
    })
}

/// Everything known about the equilibrium at one enthalpy value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub u: f64,
    /// u_c − u, kept separately for accuracy near the center.
    pub deficit: f64,
    pub r: f64,
    pub r2: f64,
    pub xhat: f64,
    /// m/r³.
    pub mu: f64,
    pub m: f64,
    pub th: ThermoPoint,
    /// 2Gm/(c²r).
    pub compactness: f64,
    pub f: f64,
    pub h: f64,
    /// (du/dr)/r from the TOV equation, regular at the center.
    pub dudr_over_r: f64,
    pub dudr: f64,
    /// d(r²)/du and d²(r²)/du² from the stored series.
    pub dr2_du: f64,
    pub d2r2_du2: f64,
    pub dmu_du: f64,
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub eos: EosModel,
    pub options: TovOptions,
    pub series: CenterSeries,
    pub rho_c: f64,
    pub u_c: f64,
    pub r_plus: f64,
    pub m_plus: f64,
    pub kappa: f64,
    pub k_surf: f64,
    pub grid_r: Vec<f64>,
    pub m: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    /// (r, m, u) at accepted r-phase steps.
    pub rphase: Vec<[f64; 3]>,
    pub xhat_series: Cheb,
    pub mu_series: Cheb,
    dxhat_series: Cheb,
    ddxhat_series: Cheb,
    dmu_series: Cheb,
}

fn ode_err(e: OdeError, phase: &str) -> Error {
    Error::Numerical(format!("{phase}: {e}"))
}

pub fn integrate_outward(eos: &EosModel, rho_c: f64, opts: &TovOptions) -> Result<Equilibrium> {
    let report = eos.validate_assumptions(rho_c.max(1e-300));
    if !report.equilibrium_ok() {
        return domain(report.failures.join("; "));
    }
    if !(opts.rtol > 0.0) || opts.grid_points < 16 {
        return domain("tov options need rtol > 0 and at least 16 grid points");
    }
    let series = center_expansion(eos, rho_c, opts.delta)?;
    let g = eos.g;
    let ic2 = eos.inv_c2();
    let scale = series.radius_scale();
    let r_max = opts.r_max_factor * scale;
    let u_switch = opts.u_switch_frac * series.u_c;

    // r-phase: y = (m, u_c − u), the deficit keeping full relative accuracy near the center.
    let mut collapse = false;
    let u_c = series.u_c;
    let rhs_r = |r: f64, y: &[f64], d: &mut [f64]| -> bool {
        let (m, u) = (y[0], u_c - y[1]);
        if !(u > 0.0) {
            return false;
        }
        let comp = 2.0 * g * m * ic2 / r;
        if !(comp < 1.0) {
            return false;
        }
        let Ok(th) = eos.at_u(u) else { return false };
        d[0] = 4.0 * PI * r * r * th.rho;
        d[1] = g * (m + 4.0 * PI * r.powi(3) * th.p * ic2) / (r * r * (1.0 - comp));
        true
    };
    let integrator = Dopri5 { rtol: opts.rtol, atol: opts.atol, h_max: scale / 2048.0, h_init: None, max_steps: 10_000_000 };
    let sol = integrator
        .solve(
            rhs_r,
            series.delta,
            &[series.m_delta, series.deficit_delta()],
            r_max,
            |r, y| u_c - y[1] < u_switch || r >= r_max || {
                collapse = 2.0 * g * y[0] * ic2 / r > 1.0 - 1e-6;
                false
            },
            true,
        )
        .map_err(|e| ode_err(e, "r-phase"))?;
    if collapse {
        return domain("2Gm/(c^2 r) reached 1: the configuration collapses");
    }
    if !sol.stopped || u_c - sol.y[1] >= u_switch {
        return domain(format!(
            "long equilibrium: u = {:.3e} still positive at r = {:.3e} (r_max = {r_max:.3e})",
            u_c - sol.y[1], sol.t
        ));
    }
    let rknots = sol.knots;
    let (r_s, m_s, u_s) = (sol.t, sol.y[0], u_c - sol.y[1]);

    // u-phase: y = (r, m) as functions of u, down to the surface u = 0.
    let rhs_u = |u: f64, y: &[f64], d: &mut [f64]| -> bool {
        let (r, m) = (y[0], y[1]);
        if !(u >= 0.0) {
            return false;
        }
        let comp = 2.0 * g * m * ic2 / r;
        if !(comp < 1.0) {
            return false;
        }
        let Ok(th) = eos.at_u(u) else { return false };
        let dudr = -g * (m + 4.0 * PI * r.powi(3) * th.p * ic2) / (r * r * (1.0 - comp));
        d[0] = 1.0 / dudr;
        d[1] = 4.0 * PI * r * r * th.rho / dudr;
        true
    };
    let integrator_u = Dopri5 { h_max: u_switch / 256.0, ..integrator };
    let usol = integrator_u.solve(rhs_u, u_s, &[r_s, m_s], 0.0, |_, _| false, true).map_err(|e| ode_err(e, "u-phase"))?;
    let uknots = usol.knots;
    let r_plus = usol.y[0];
    let m_plus = usol.y[1];
    let kappa = 1.0 - 2.0 * g * m_plus * ic2 / r_plus;
    if !(kappa > 0.0) {
        return domain(format!("kappa = {kappa} is not positive"));
    }
    let k_surf = g * m_plus / (r_plus * r_plus * kappa);

    // Storage grid.
    let n = opts.grid_points - 1;
    let mut r2v = vec![0.0; n + 1];
    let mut mv = vec![0.0; n + 1];
    let mut uv = vec![0.0; n + 1];
    let mut dv = vec![0.0; n + 1];
    let mut tmp = vec![0.0; 2];
    for j in 0..=n {
        let half = 0.5 * PI * j as f64 / n as f64;
        let (u, d) = if j == n { (0.0, series.u_c) } else { (series.u_c * half.cos().powi(2), series.u_c * half.sin().powi(2)) };
        uv[j] = u;
        dv[j] = d;
        if j == 0 {
            continue;
        }
        if d < series.deficit_delta() {
            let r2 = series.r2_of_deficit(d);
            r2v[j] = r2;
            mv[j] = series.mass(r2.sqrt());
        } else if u >= u_s {
            let k = rknots.partition_point(|kn| kn.y[1] < d).clamp(1, rknots.len() - 1);
            let (a, b) = (&rknots[k - 1], &rknots[k]);
            let r = if d == a.y[1] {
                a.t
            } else {
                brent(
                    |r| {
                        hermite(a, b, r, &mut tmp);
                        tmp[1] - d
                    },
                    a.t,
                    b.t,
                    1e-16 * b.t,
                    200,
                )
                .map_err(|_| Error::Numerical(format!("storage node {j}: bracket lost")))?
            };
            hermite(a, b, r, &mut tmp);
            r2v[j] = r * r;
            mv[j] = tmp[0];
        } else {
            let k = uknots.partition_point(|kn| kn.t > u).clamp(1, uknots.len() - 1);
            hermite(&uknots[k - 1], &uknots[k], u, &mut tmp);
            r2v[j] = tmp[0] * tmp[0];
            mv[j] = tmp[1];
        }
    }
    r2v[n] = r_plus * r_plus;
    mv[n] = m_plus;

    let mut xhat = vec![0.0; n + 1];
    let mut mu = vec![0.0; n + 1];
    xhat[0] = 1.0 / -series.u2;
    mu[0] = series.m3;
    for j in 1..=n {
        xhat[j] = r2v[j] / dv[j];
        mu[j] = mv[j] / (r2v[j] * r2v[j].sqrt());
    }
    let mut xhat_series = Cheb::from_lobatto(&xhat);
    let mut mu_series = Cheb::from_lobatto(&mu);
    xhat_series.chop_plateau(opts.cheb_chop);
    mu_series.chop_plateau(opts.cheb_chop);
    let dxhat_series = xhat_series.derivative();
    let ddxhat_series = dxhat_series.derivative();
    let dmu_series = mu_series.derivative();

    let mut eq = Equilibrium {
        eos: *eos,
        options: *opts,
        series,
        rho_c,
        u_c: series.u_c,
        r_plus,
        m_plus,
        kappa,
        k_surf,
        grid_r: r2v.iter().map(|v| v.sqrt()).collect(),
        m: mv,
        rho: Vec::new(),
        p: Vec::new(),
        u: uv,
        f: Vec::new(),
        h: Vec::new(),
        rphase: rknots.iter().map(|k| [k.t, k.y[0], u_c - k.y[1]]).collect(),
        xhat_series,
        mu_series,
        dxhat_series,
        ddxhat_series,
        dmu_series,
    };
    eq.fill_thermo()?;
    eq.check_invariants()?;
    Ok(eq)
}

impl Equilibrium {
    /// Rebuild from stored grid columns (r, m, u) on the Lobatto nodes.
    pub fn from_grid(eos: EosModel, options: TovOptions, rho_c: f64, grid_r: Vec<f64>, m: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let series = center_expansion(&eos, rho_c, options.delta)?;
        let n = grid_r.len() - 1;
        if n + 1 != options.grid_points || m.len() != n + 1 || u.len() != n + 1 {
            return domain("equilibrium grid has inconsistent length");
        }
        let mut xhat = vec![0.0; n + 1];
        let mut mu = vec![0.0; n + 1];
        xhat[0] = 1.0 / -series.u2;
        mu[0] = series.m3;
        for j in 1..=n {
            let half = 0.5 * PI * j as f64 / n as f64;
            let d = if j == n { series.u_c } else { series.u_c * half.sin().powi(2) };
            let r2 = grid_r[j] * grid_r[j];
            xhat[j] = r2 / d;
            mu[j] = m[j] / (r2 * grid_r[j]);
        }
        let mut xhat_series = Cheb::from_lobatto(&xhat);
        let mut mu_series = Cheb::from_lobatto(&mu);
        xhat_series.chop_plateau(options.cheb_chop);
        mu_series.chop_plateau(options.cheb_chop);
        let r_plus = grid_r[n];
        let m_plus = m[n];
        let kappa = 1.0 - 2.0 * eos.g * m_plus * eos.inv_c2() / r_plus;
        let mut eq = Equilibrium {
            eos,
            options,
            series,
            rho_c,
            u_c: series.u_c,
            r_plus,
            m_plus,
            kappa,
            k_surf: eos.g * m_plus / (r_plus * r_plus * kappa),
            grid_r,
            m,
            rho: Vec::new(),
            p: Vec::new(),
            u,
            f: Vec::new(),
            h: Vec::new(),
            rphase: Vec::new(),
            dxhat_series: xhat_series.derivative(),
            ddxhat_series: xhat_series.derivative().derivative(),
            dmu_series: mu_series.derivative(),
            xhat_series,
            mu_series,
        };
        eq.fill_thermo()?;
        Ok(eq)
    }

    fn fill_thermo(&mut self) -> Result<()> {
        let ic2 = self.eos.inv_c2();
        let n = self.u.len();
        self.rho = Vec::with_capacity(n);
        self.p = Vec::with_capacity(n);
        self.f = Vec::with_capacity(n);
        self.h = Vec::with_capacity(n);
        for j in 0..n {
            let th = if j == 0 { self.eos.thermo(self.rho_c)? } else { self.eos.at_u(self.u[j])? };
            self.rho.push(th.rho);
            self.p.push(th.p);
            self.f.push(-self.u[j] * ic2 + 0.5 * self.kappa.ln());
            let comp = if j == 0 { 0.0 } else { 2.0 * self.eos.g * self.m[j] * ic2 / self.grid_r[j] };
            self.h.push(-0.5 * (1.0 - comp).ln());
        }
        Ok(())
    }

    fn check_invariants(&self) -> Result<()> {
        let ic2 = self.eos.inv_c2();
        for j in 1..self.grid_r.len() {
            let comp = 2.0 * self.eos.g * self.m[j] * ic2 / self.grid_r[j];
            if !(0.0..1.0).contains(&comp) {
                return numerical(format!("2Gm/c^2r = {comp} outside (0,1) at node {j}"));
            }
            if self.grid_r[j] <= self.grid_r[j - 1] {
                return numerical(format!("storage radii not increasing at node {j}"));
            }
            if self.m[j] < self.m[j - 1] * (1.0 - 1e-14) {
                return numerical(format!("mass decreases at node {j}"));
            }
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return numerical(format!("kappa = {} outside (0,1]", self.kappa));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.grid_r.len()
    }

    /// Profile at the Chebyshev angle θ ∈ [0, π] (0 = center).
    pub fn at_theta(&self, theta: f64) -> Result<ProfilePoint> {
        let half = 0.5 * theta;
        self.at_ud(self.u_c * half.cos().powi(2), self.u_c * half.sin().powi(2))
    }

    pub fn at_u(&self, u: f64) -> Result<ProfilePoint> {
        if !(0.0..=self.u_c).contains(&u) {
            return domain(format!("u = {u:e} outside [0, u_c]"));
        }
        self.at_ud(u, self.u_c - u)
    }

    /// Profile at u with the deficit u_c − u supplied separately for accuracy.
    pub fn at_ud(&self, u: f64, deficit: f64) -> Result<ProfilePoint> {
        let g = self.eos.g;
        let ic2 = self.eos.inv_c2();
        let t = -((deficit - u) / self.u_c).clamp(-1.0, 1.0);
        let xhat = self.xhat_series.eval(t);
        let mu = self.mu_series.eval(t);
        let dt_du = 2.0 / self.u_c;
        let dxhat = self.dxhat_series.eval(t) * dt_du;
        let ddxhat = self.ddxhat_series.eval(t) * dt_du * dt_du;
        let dmu = self.dmu_series.eval(t) * dt_du;
        let th = if deficit == 0.0 { self.eos.thermo(self.rho_c)? } else { self.eos.at_u(u)? };
        let r2 = deficit * xhat;
        let r = r2.sqrt();
        let compactness = 2.0 * g * mu * r2 * ic2;
        let dudr_over_r = -g * (mu + 4.0 * PI * th.p * ic2) / (1.0 - compactness);
        Ok(ProfilePoint {
            u,
            deficit,
            r,
            r2,
            xhat,
            mu,
            m: mu * r2 * r,
            th,
            compactness,
            f: -u * ic2 + 0.5 * self.kappa.ln(),
            h: -0.5 * (1.0 - compactness).ln(),
            dudr_over_r,
            dudr: dudr_over_r * r,
            dr2_du: -xhat + deficit * dxhat,
            d2r2_du2: -2.0 * dxhat + deficit * ddxhat,
            dmu_du: dmu,
        })
    }

    /// Invert r(u) on the stored series.
    pub fn u_at_r(&self, r: f64) -> Result<f64> {
        if !(0.0..=self.r_plus).contains(&r) {
            return domain(format!("r = {r:e} outside [0, r_+]"));
        }
        if r == 0.0 {
            return Ok(self.u_c);
        }
        if r == self.r_plus {
            return Ok(0.0);
        }
        let target = r * r;
        let f = |u: f64| {
            let d = self.u_c - u;
            let t = -((d - u) / self.u_c);
            d * self.xhat_series.eval(t) - target
        };
        // The series radius differs from r_+ at rounding level.
        if f(0.0) <= 0.0 {
            return Ok(0.0);
        }
        brent(f, 0.0, self.u_c, 1e-17 * self.u_c, 300).map_err(|_| Error::Numerical(format!("u_at_r failed at r = {r:e}")))
    }

    pub fn at_r(&self, r: f64) -> Result<ProfilePoint> {
        let u = self.u_at_r(r)?;
        self.at_u(u)
    }

    pub fn x_aux(&self, p: &ProfilePoint) -> f64 {
        p.m / (p.u * p.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxXYU {
    pub x_aux: f64,
    pub y_aux: f64,
    pub u: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub gtilde: f64,
}

/// Auxiliary variables x = m/(ur), y = 4πr²ρ²/P and their coefficient functions.
pub fn aux_xyu(eq: &Equilibrium, p: &ProfilePoint) -> Result<AuxXYU> {
    if !(p.u > 0.0 && p.r > 0.0) {
        return domain("auxiliary variables need 0 < u < u_c");
    }
    let ic2 = eq.eos.inv_c2();
    let th = &p.th;
    let x_aux = p.m / (p.u * p.r);
    let y_aux = 4.0 * PI * p.r2 * th.rho / th.p_over_rho;
    let beta = p.u * (1.0 + th.p_over_rho * ic2) * (2.0 / th.dpdrho - 1.0 / th.p_over_rho);
    let omega = th.p_over_rho * th.p_over_rho / p.u;
    let gtilde = eq.eos.g * (1.0 + omega * y_aux * ic2 / x_aux) / (1.0 - 2.0 * eq.eos.g * p.u * x_aux * ic2);
    Ok(AuxXYU { x_aux, y_aux, u: p.u, alpha: th.alpha, beta, omega, gtilde })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShortnessBound {
    pub r0: f64,
    pub x0: f64,
    pub bound: f64,
}

/// If x = m/(ur) exceeds 1/G at a sample, r₊ ≤ r₀ exp(1/(Gx(r₀) − 1)); returns the tightest such bound.
pub fn shortness_criterion(samples: &[[f64; 3]], g: f64) -> Option<ShortnessBound> {
    samples
        .iter()
        .filter(|s| s[0] > 0.0 && s[2] > 0.0)
        .filter_map(|s| {
            let x = s[1] / (s[2] * s[0]);
            (x > 1.0 / g).then(|| ShortnessBound { r0: s[0], x0: x, bound: s[0] * (1.0 / (g * x - 1.0)).exp() })
        })
        .min_by(|a, b| a.bound.partial_cmp(&b.bound).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub expected_exponent: f64,
    pub expected_amplitude: f64,
}

/// Log-log fit of ρ against r₊ − r for (r₊ − r)/r₊ ∈ [1e-4, 1e-3].
pub fn surface_exponent_check(eq: &Equilibrium) -> Result<SurfaceFit> {
    let g = eq.eos.gamma;
    let mut pts = Vec::new();
    for i in 0..=40 {
        let s = eq.r_plus * 10f64.powf(-4.0 + i as f64 / 40.0);
        let p = eq.at_r(eq.r_plus - s)?;
        if !(p.th.rho > 0.0) {
            return numerical("surface fit window underresolved: rho vanished inside the window");
        }
        pts.push((s.ln(), p.th.rho.ln()));
    }
    let (exponent, lnamp) = crate::numerics::fit::line(&pts);
    Ok(SurfaceFit {
        exponent,
        amplitude: lnamp.exp(),
        expected_exponent: 1.0 / (g - 1.0),
        expected_amplitude: ((g - 1.0) * eq.k_surf / (eq.eos.a * g)).powf(1.0 / (g - 1.0)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceChart {
    pub u_grid: Vec<f64>,
    pub xcheck: Vec<f64>,
    pub ycheck: Vec<f64>,
    pub xstar: f64,
    pub ystar: f64,
    /// Values of the Chebyshev interpolants at u = 0.
    pub xcheck_limit: f64,
    pub ycheck_limit: f64,
    pub xcheck_coeffs: Vec<f64>,
    pub ycheck_coeffs: Vec<f64>,
}

/// X̌ = r/m and Y̌ = Y/u^{γ/(γ−1)} on [0, u_c/2], with their Chebyshev series.
pub fn surface_chart(eq: &Equilibrium, n: usize) -> Result<SurfaceChart> {
    let gm = eq.eos.gamma;
    let a = eq.eos.a;
    let umax = 0.5 * eq.u_c;
    let mut u_grid = Vec::with_capacity(n + 1);
    let mut xc = Vec::with_capacity(n + 1);
    let mut yc = Vec::with_capacity(n + 1);
    let xstar = eq.r_plus / eq.m_plus;
    let ystar = 4.0 * PI * ((gm - 1.0) / (a * gm)).powf((2.0 - gm) / (gm - 1.0)) * eq.r_plus.powi(4) / (a * eq.m_plus * eq.m_plus);
    for j in 0..=n {
        let t = lobatto_point(j, n);
        let u = 0.5 * umax * (1.0 + t);
        let p = eq.at_u(u)?;
        u_grid.push(u);
        xc.push(p.r / p.m);
        let ycheck = if u == 0.0 {
            // ρ u^{−1/(γ−1)} → ((γ−1)/Aγ)^{1/(γ−1)}, α → (γ−1)/γ
            let lead = ((gm - 1.0) / (a * gm)).powf(1.0 / (gm - 1.0));
            4.0 * PI * p.r.powi(4) / (p.m * p.m) * lead / p.th.alpha
        } else {
            4.0 * PI * p.r.powi(4) / (p.m * p.m) * (p.th.rho * u.powf(-1.0 / (gm - 1.0))) / p.th.alpha
        };
        yc.push(ycheck);
    }
    let cx = Cheb::from_lobatto(&xc);
    let cy = Cheb::from_lobatto(&yc);
    let xcheck_limit = extrapolate_to_zero(&u_grid, &xc);
    let ycheck_limit = extrapolate_to_zero(&u_grid, &yc);
    Ok(SurfaceChart {
        u_grid,
        xcheck: xc,
        ycheck: yc,
        xstar,
        ystar,
        xcheck_limit,
        ycheck_limit,
        xcheck_coeffs: cx.coeffs,
        ycheck_coeffs: cy.coeffs,
    })
}

/// Polynomial extrapolation to u = 0 from the smallest positive samples.
fn extrapolate_to_zero(u: &[f64], v: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = u.iter().copied().zip(v.iter().copied()).filter(|p| p.0 > 0.0).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let take = pairs.len().min(12);
    let xs: Vec<f64> = pairs[..take].iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs[..take].iter().map(|p| p.1).collect();
    let c = crate::numerics::fit::polyfit(&xs, &ys, 6);
    c[0]
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceMetric {
    /// One-sided interior derivatives of g₀₀ = κe^{−2u/c²} at r₊, from the spectral r(u).
    pub dg00: f64,
    pub d2g00: f64,
    pub d2u: f64,
    /// Exterior values for 1 − 2Gm₊/(c²r) and the TOV surface second derivative of u.
    pub dg00_exterior: f64,
    pub d2g00_exterior: f64,
    pub d2u_expected: f64,
}

pub struct MetricPotentials {
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    pub g00: Vec<f64>,
    pub g11: Vec<f64>,
    pub surface: SurfaceMetric,
}

pub fn metric_potentials(eq: &Equilibrium) -> Result<MetricPotentials> {
    let ic2 = eq.eos.inv_c2();
    let g = eq.eos.g;
    let p = eq.at_u(0.0)?;
    // r² = S(u): r' = S'/2r, r'' = (S''/2 − r'²)/r, then invert to u(r).
    let rp = p.dr2_du / (2.0 * p.r);
    let rpp = (0.5 * p.d2r2_du2 - rp * rp) / p.r;
    let du = 1.0 / rp;
    let d2u = -rpp / rp.powi(3);
    let dg00 = -2.0 * eq.kappa * ic2 * du;
    let d2g00 = eq.kappa * (4.0 * ic2 * ic2 * du * du - 2.0 * ic2 * d2u);
    let (rp_, mp) = (eq.r_plus, eq.m_plus);
    let surface = SurfaceMetric {
        dg00,
        d2g00,
        d2u,
        dg00_exterior: 2.0 * g * mp * ic2 / (rp_ * rp_),
        d2g00_exterior: -4.0 * g * mp * ic2 / rp_.powi(3),
        d2u_expected: 2.0 * g * mp / (rp_.powi(3) * eq.kappa) + 2.0 * ic2 * eq.k_surf * eq.k_surf,
    };
    Ok(MetricPotentials {
        f: eq.f.clone(),
        h: eq.h.clone(),
        g00: eq.f.iter().map(|f| (2.0 * f).exp()).collect(),
        g11: eq.h.iter().map(|h| -(2.0 * h).exp()).collect(),
        surface,
    })
}
