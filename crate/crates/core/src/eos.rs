//! Barotropic equations of state and the enthalpy variable u = ∫ dP/(ρ + P/c²).

use crate::error::{domain, numerical, Result};
use crate::numerics::quad::gauss_kronrod;
use crate::numerics::roots::newton_bracketed;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EosKind {
    CappedPolytrope,
    NeutronFermiGas,
}

/// `P = Aρ^γ/(1 + bρ^{γ−1})` or the degenerate neutron gas with coefficient `k_fermi`.
/// `c = ∞` gives the Newtonian limit (1/c² = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EosModel {
    pub kind: EosKind,
    #[serde(rename = "A")]
    pub a: f64,
    pub gamma: f64,
    pub c: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub cap_b: f64,
    pub k_fermi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoPoint {
    pub rho: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "dPdrho")]
    pub dpdrho: f64,
    pub u: f64,
    #[serde(rename = "gammaP")]
    pub gamma_p: f64,
    /// P/(uρ); tends to (γ−1)/γ at the surface.
    pub alpha: f64,
    /// P/ρ.
    pub p_over_rho: f64,
    /// ρ P''(ρ)/P'(ρ); tends to γ−1 at the surface.
    pub stiff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub positivity: bool,
    pub causal: bool,
    pub low_density_exponent: f64,
    pub exponent_ok: bool,
    pub integral_index: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }

    /// Positivity, causality and the low-density exponent: enough for an equilibrium.
    pub fn equilibrium_ok(&self) -> bool {
        self.positivity && self.causal && self.exponent_ok
    }
}

const QUAD_RTOL: f64 = 1e-15;

impl EosModel {
    /// Capped polytrope; `b = None` selects the default cap 2Aγ/c².
    pub fn capped_polytrope(a: f64, gamma: f64, b: Option<f64>, c: f64, g: f64) -> Self {
        let cap_b = b.unwrap_or(2.0 * a * gamma * inv_c2(c));
        Self { kind: EosKind::CappedPolytrope, a, gamma, c, g, cap_b, k_fermi: 0.0 }
    }

    pub fn neutron_fermi_gas(k: f64, c: f64, g: f64) -> Self {
        Self {
            kind: EosKind::NeutronFermiGas,
            a: 0.2 * k.powf(-2.0 / 3.0),
            gamma: 5.0 / 3.0,
            c,
            g,
            cap_b: 0.0,
            k_fermi: k,
        }
    }

    pub fn inv_c2(&self) -> f64 {
        inv_c2(self.c)
    }

    /// N = 2γ/(γ−1).
    pub fn n_param(&self) -> f64 {
        2.0 * self.gamma / (self.gamma - 1.0)
    }

    fn check_rho(rho: f64) -> Result<()> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return domain(format!("density must be finite and non-negative, got {rho}"));
        }
        Ok(())
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        Ok(match self.kind {
            EosKind::CappedPolytrope => {
                let s = rho.powf(self.gamma - 1.0);
                self.a * rho * s / (1.0 + self.cap_b * s)
            }
            EosKind::NeutronFermiGas => {
                let z = self.zeta_of_rho(rho)?;
                fermi_p(self.k_fermi, self.c, z)
            }
        })
    }

    pub fn dp_drho(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        Ok(match self.kind {
            EosKind::CappedPolytrope => {
                let s = rho.powf(self.gamma - 1.0);
                let d = 1.0 + self.cap_b * s;
                self.a * s * (self.gamma + self.cap_b * s) / (d * d)
            }
            EosKind::NeutronFermiGas => {
                let z = self.zeta_of_rho(rho)?;
                self.c * self.c * z * z / (3.0 * (1.0 + z * z))
            }
        })
    }

    pub fn gamma_p(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return domain(format!("gamma_p needs rho > 0, got {rho}"));
        }
        Ok(self.thermo(rho)?.gamma_p)
    }

    pub fn enthalpy_u(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        if rho == 0.0 {
            return Ok(0.0);
        }
        match self.kind {
            EosKind::CappedPolytrope => self.u_of_s(rho.powf(self.gamma - 1.0)),
            EosKind::NeutronFermiGas => self.u_of_zeta(self.zeta_of_rho(rho)?),
        }
    }

    pub fn rho_of_u(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) || !u.is_finite() {
            return domain(format!("enthalpy must be finite and non-negative, got {u}"));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        match self.kind {
            EosKind::CappedPolytrope => {
                let s = self.s_of_u(u)?;
                Ok(s.powf(1.0 / (self.gamma - 1.0)))
            }
            EosKind::NeutronFermiGas => {
                let z = self.zeta_of_u(u)?;
                Ok(fermi_rho(self.k_fermi, self.c, z))
            }
        }
    }

    pub fn thermo(&self, rho: f64) -> Result<ThermoPoint> {
        Self::check_rho(rho)?;
        if rho == 0.0 {
            return Ok(self.vacuum_point());
        }
        match self.kind {
            EosKind::CappedPolytrope => {
                let s = rho.powf(self.gamma - 1.0);
                let u = self.u_of_s(s)?;
                Ok(self.capped_point(rho, s, u))
            }
            EosKind::NeutronFermiGas => {
                let z = self.zeta_of_rho(rho)?;
                let u = self.u_of_zeta(z)?;
                Ok(self.fermi_point(z, u))
            }
        }
    }

    /// Thermodynamic state at enthalpy u, with the exact surface limits at u = 0.
    pub fn at_u(&self, u: f64) -> Result<ThermoPoint> {
        if !(u >= 0.0) || !u.is_finite() {
            return domain(format!("enthalpy must be finite and non-negative, got {u}"));
        }
        if u == 0.0 {
            return Ok(self.vacuum_point());
        }
        match self.kind {
            EosKind::CappedPolytrope => {
                let s = self.s_of_u(u)?;
                let rho = s.powf(1.0 / (self.gamma - 1.0));
                Ok(self.capped_point(rho, s, u))
            }
            EosKind::NeutronFermiGas => {
                let z = self.zeta_of_u(u)?;
                Ok(self.fermi_point(z, u))
            }
        }
    }

    fn vacuum_point(&self) -> ThermoPoint {
        ThermoPoint {
            rho: 0.0,
            p: 0.0,
            dpdrho: 0.0,
            u: 0.0,
            gamma_p: self.gamma,
            alpha: (self.gamma - 1.0) / self.gamma,
            p_over_rho: 0.0,
            stiff: self.gamma - 1.0,
        }
    }

    fn capped_point(&self, rho: f64, s: f64, u: f64) -> ThermoPoint {
        let (g, b) = (self.gamma, self.cap_b);
        let d = 1.0 + b * s;
        let p_over_rho = self.a * s / d;
        ThermoPoint {
            rho,
            p: rho * p_over_rho,
            dpdrho: self.a * s * (g + b * s) / (d * d),
            u,
            gamma_p: (g + b * s) / d,
            alpha: p_over_rho / u,
            p_over_rho,
            stiff: (g - 1.0) * (g + (2.0 - g) * b * s) / (d * (g + b * s)),
        }
    }

    fn fermi_point(&self, z: f64, u: f64) -> ThermoPoint {
        let (k, c) = (self.k_fermi, self.c);
        let rho = fermi_rho(k, c, z);
        let p = fermi_p(k, c, z);
        let z2 = z * z;
        let dpdrho = c * c * z2 / (3.0 * (1.0 + z2));
        // dP'/dρ = (c²/3)·2ζ/(1+ζ²)² · dζ/dρ,  dζ/dρ = 1/(3Kc³ζ²√(1+ζ²)).
        let d2 = c * c / 3.0 * 2.0 * z / (1.0 + z2).powi(2) / (3.0 * k * c.powi(3) * z2 * (1.0 + z2).sqrt());
        ThermoPoint {
            rho,
            p,
            dpdrho,
            u,
            gamma_p: rho * dpdrho / p,
            alpha: p / (u * rho),
            p_over_rho: p / rho,
            stiff: rho * d2 / dpdrho,
        }
    }

    /// du/ds for the capped polytrope, s = ρ^{γ−1}.
    fn du_ds(&self, s: f64) -> f64 {
        let (g, b) = (self.gamma, self.cap_b);
        let beta = b + self.a * self.inv_c2();
        self.a * (g + b * s) / ((g - 1.0) * (1.0 + b * s) * (1.0 + beta * s))
    }

    fn u_of_s(&self, s: f64) -> Result<f64> {
        let r = gauss_kronrod(|t| self.du_ds(t), 0.0, s, QUAD_RTOL, 0.0, 200);
        if !r.converged {
            return numerical(format!("enthalpy quadrature did not converge at s = {s:e} (error {:e})", r.error));
        }
        Ok(r.value)
    }

    fn s_of_u(&self, u: f64) -> Result<f64> {
        let s0 = (self.gamma - 1.0) * u / (self.a * self.gamma);
        let mut hi = 2.0 * s0;
        let mut guard = 0;
        while self.u_of_s(hi)? < u {
            hi *= 4.0;
            guard += 1;
            if guard > 200 {
                return numerical(format!("cannot bracket rho_of_u at u = {u:e}"));
            }
        }
        let f = |s: f64| match self.u_of_s(s) {
            Ok(v) => (v - u, self.du_ds(s)),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let s = newton_bracketed(f, 0.0, hi, s0, 1e-15, 200)
            .map_err(|_| crate::error::Error::Numerical(format!("rho_of_u bracket failed at u = {u:e}")))?;
        if !s.is_finite() {
            return numerical(format!("rho_of_u produced a non-finite value at u = {u:e}"));
        }
        Ok(s)
    }

    fn zeta_of_rho(&self, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(0.0);
        }
        let (k, c) = (self.k_fermi, self.c);
        let z0 = (rho / (k * c.powi(3))).cbrt();
        let mut hi = 2.0 * z0 + 1.0;
        while fermi_rho(k, c, hi) < rho {
            hi *= 2.0;
        }
        let f = |z: f64| (fermi_rho(k, c, z) - rho, 3.0 * k * c.powi(3) * z * z * (1.0 + z * z).sqrt());
        newton_bracketed(f, 0.0, hi, z0.min(hi), 1e-15, 200)
            .map_err(|_| crate::error::Error::Numerical(format!("zeta_of_rho failed at rho = {rho:e}")))
    }

    fn du_dzeta(&self, z: f64) -> f64 {
        let (k, c) = (self.k_fermi, self.c);
        if z == 0.0 {
            return 0.0;
        }
        let dp = k * c.powi(5) * z.powi(4) / (1.0 + z * z).sqrt();
        dp / (fermi_rho(k, c, z) + fermi_p(k, c, z) * self.inv_c2())
    }

    fn u_of_zeta(&self, z: f64) -> Result<f64> {
        let r = gauss_kronrod(|t| self.du_dzeta(t), 0.0, z, QUAD_RTOL, 0.0, 200);
        if !r.converged {
            return numerical(format!("Fermi enthalpy quadrature did not converge at zeta = {z:e}"));
        }
        Ok(r.value)
    }

    fn zeta_of_u(&self, u: f64) -> Result<f64> {
        // u ≈ c²ζ²/2 at low density.
        let z0 = (2.0 * u).sqrt() / self.c;
        let mut hi = 2.0 * z0;
        while self.u_of_zeta(hi)? < u {
            hi *= 2.0;
            if hi > 1e12 {
                return numerical(format!("cannot bracket zeta at u = {u:e}"));
            }
        }
        let f = |z: f64| match self.u_of_zeta(z) {
            Ok(v) => (v - u, self.du_dzeta(z)),
            Err(_) => (f64::NAN, f64::NAN),
        };
        newton_bracketed(f, 0.0, hi, z0, 1e-15, 200)
            .map_err(|_| crate::error::Error::Numerical(format!("zeta_of_u failed at u = {u:e}")))
    }

    /// Checks positivity and causality on a log grid over (0, rho_max], the low-density exponent,
    /// and integrality of γ/(γ−1).
    pub fn validate_assumptions(&self, rho_max: f64) -> ValidationReport {
        let mut failures = Vec::new();
        let (mut positivity, mut causal) = (true, true);
        let n = 10_000;
        let lo = (rho_max * 1e-12).ln();
        let hi = rho_max.ln();
        let mut prev_p = 0.0;
        for i in 0..=n {
            let rho = (lo + (hi - lo) * i as f64 / n as f64).exp();
            match (self.pressure(rho), self.dp_drho(rho)) {
                (Ok(p), Ok(dp)) => {
                    if !(p > 0.0) || p <= prev_p {
                        positivity = false;
                    }
                    if !(dp > 0.0 && dp * self.inv_c2() < 1.0) {
                        causal = false;
                    }
                    prev_p = p;
                }
                _ => {
                    positivity = false;
                }
            }
        }
        if !positivity {
            failures.push("positivity violated: P must be positive and increasing".to_string());
        }
        if !causal {
            failures.push("causality violated: need 0 < dP/drho < c^2".to_string());
        }
        let pts: Vec<(f64, f64)> = (0..=40)
            .filter_map(|i| {
                let rho = 10f64.powf(-14.0 + 2.0 * i as f64 / 40.0);
                self.pressure(rho).ok().map(|p| (rho.ln(), p.ln()))
            })
            .collect();
        let (slope, _) = crate::numerics::fit::line(&pts);
        let in_range = self.gamma > 1.0 && self.gamma < 2.0;
        if !in_range {
            failures.push(format!("exponent range violated: need 1 < gamma < 2, got {}", self.gamma));
        }
        let exponent_ok = (slope - self.gamma).abs() < 1e-3 && in_range;
        if in_range && !exponent_ok {
            failures.push(format!("exponent violated: low-density exponent {slope:.6} vs gamma {}", self.gamma));
        }
        let idx = self.gamma / (self.gamma - 1.0);
        let integral_index = (idx - idx.round()).abs() < 1e-9 && in_range;
        if in_range && !integral_index {
            failures.push(format!("integral index violated: gamma/(gamma-1) = {idx} is not an integer"));
        }
        ValidationReport { positivity, causal, low_density_exponent: slope, exponent_ok, integral_index, failures }
    }
}

fn inv_c2(c: f64) -> f64 {
    if c.is_infinite() {
        0.0
    } else {
        1.0 / (c * c)
    }
}

fn asinh_series_guard(z: f64) -> bool {
    z < 0.5
}

/// P(ζ) = Kc⁵ ∫₀^ζ q⁴(1+q²)^{−1/2} dq.
pub fn fermi_p(k: f64, c: f64, z: f64) -> f64 {
    let kc5 = k * c.powi(5);
    if asinh_series_guard(z) {
        // Binomial series of (1+q²)^{−1/2}, integrated termwise.
        let z2 = z * z;
        let mut term = 1.0;
        let mut pow = z.powi(5);
        let mut sum = 0.0;
        for j in 0..80 {
            let add = term * pow / (5 + 2 * j) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
            term *= -(0.5 + j as f64) / (j as f64 + 1.0);
            pow *= z2;
        }
        return kc5 * sum;
    }
    let s = (1.0 + z * z).sqrt();
    kc5 / 8.0 * (z * (2.0 * z * z - 3.0) * s + 3.0 * z.asinh())
}

/// ρ(ζ) = 3Kc³ ∫₀^ζ q²(1+q²)^{1/2} dq.
pub fn fermi_rho(k: f64, c: f64, z: f64) -> f64 {
    let kc3 = k * c.powi(3);
    if asinh_series_guard(z) {
        let z2 = z * z;
        let mut term = 1.0;
        let mut pow = z.powi(3);
        let mut sum = 0.0;
        for j in 0..80 {
            let add = term * pow / (3 + 2 * j) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
            term *= (0.5 - j as f64) / (j as f64 + 1.0);
            pow *= z2;
        }
        return 3.0 * kc3 * sum;
    }
    let s = (1.0 + z * z).sqrt();
    0.375 * kc3 * ((2.0 * z * z + 1.0) * z * s - z.asinh())
}

/// Closed-form Fermi gas point (ρ, P) at Fermi parameter ζ.
pub fn neutron_fermi_gas(k: f64, c: f64, zeta: f64) -> Result<ThermoPoint> {
    if !(zeta >= 0.0) || !(k > 0.0) {
        return domain(format!("need zeta >= 0 and K > 0, got zeta = {zeta}, K = {k}"));
    }
    let model = EosModel::neutron_fermi_gas(k, c, f64::NAN);
    if zeta == 0.0 {
        return Ok(model.vacuum_point());
    }
    let u = model.u_of_zeta(zeta)?;
    Ok(model.fermi_point(zeta, u))
}
