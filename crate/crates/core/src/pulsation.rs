//! Linear radial pulsations of an equilibrium.
//!
//! The operator 𝓛y = −(1/b)(ay′)′ + Qy is carried through three charts: the
//! radius r, the Liouville length ξ = ∫√(b/a) dr, and x = sin²(πξ/2ξ₊) ∈ [0, 1].
//! Every profile function is an analytic function of the enthalpy, which is
//! parametrized by the Chebyshev angle θ (u = u_c cos²(θ/2)); the singular
//! endpoint factors are split off in closed form.

use crate::error::{domain, numerical, Result};
use crate::numerics::cheb::Cheb;
use crate::numerics::jacobi::JacobiBasis;
use crate::numerics::ode::Dopri5;
use crate::numerics::roots::brent;
use crate::tov::{Equilibrium, ProfilePoint};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Sturm–Liouville data at one point of the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlPoint {
    pub a: f64,
    pub b: f64,
    #[doc(alias = "Q")]
    pub q: f64,
    pub e2: f64,
    /// E₁/E₂; only finite for 0 < r < r₊.
    pub e1_over_e2: f64,
    pub e0: f64,
    pub sqrt_ab: f64,
    /// 1 + P/(c²ρ).
    pub enthalpy_factor: f64,
    /// J° = e^F (1 + P/c²ρ).
    pub j0: f64,
    /// F′ + H′ from the profile derivatives.
    pub dfh: f64,
}

pub fn sl_point(eq: &Equilibrium, p: &ProfilePoint) -> SlPoint {
    let ic2 = eq.eos.inv_c2();
    let g = eq.eos.g;
    let th = &p.th;
    let onep = 1.0 + th.p_over_rho * ic2;
    let (ef, eh) = (p.f.exp(), p.h.exp());
    let e2h = eh * eh;
    let r4 = p.r2 * p.r2;
    let du = p.dudr;
    let em2h = 1.0 / e2h;
    let df = -du * ic2;
    let dh = g * ic2 * e2h * (4.0 * PI * th.rho - p.mu) * p.r;
    let e1_over_e2 = if p.r > 0.0 && th.dpdrho > 0.0 {
        df + dh - ic2 * (1.0 - 1.0 / th.gamma_p) * du + 4.0 / p.r + (1.0 + th.stiff) * onep * du / th.dpdrho
    } else {
        f64::NAN
    };
    let e0 = 12.0 * PI * g * ic2 * (th.gamma_p - 1.0) * th.p
        + (-1.0 - 3.0 * th.gamma_p * em2h + 3.0 * (th.gamma_p - 1.0) * em2h / onep + 3.0 * em2h * (1.0 + th.stiff)) * p.dudr_over_r;
    SlPoint {
        a: th.gamma_p * th.p * r4 * ef * eh / onep,
        b: th.rho * r4 * eh.powi(3) / (ef * onep),
        q: -ef * ef * onep * e0,
        e2: em2h * th.gamma_p * th.p_over_rho / onep,
        e1_over_e2,
        e0,
        sqrt_ab: r4 * e2h * (th.gamma_p * th.p * th.rho).sqrt() / onep,
        enthalpy_factor: onep,
        j0: ef * onep,
        dfh: df + dh,
    }
}

/// Sturm–Liouville data on the interior storage-grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SlCoefficients {
    /// Grid indices into the equilibrium columns.
    pub index: Vec<usize>,
    pub r: Vec<f64>,
    pub points: Vec<SlPoint>,
    /// max |log a − log a(ref) − ∫E₁/E₂ dr| over the checked nodes.
    pub a_check: f64,
}

/// d log a/dθ in the Chebyshev angle, regular away from θ = 0, π.
fn dlog_a_dtheta(eq: &Equilibrium, theta: f64) -> Result<f64> {
    let (u, d) = (eq.u_c * (0.5 * theta).cos().powi(2), eq.u_c * (0.5 * theta).sin().powi(2));
    let p = eq.at_ud(u, d)?;
    let sl = sl_point(eq, &p);
    Ok(sl.e1_over_e2 * (-0.5 * eq.u_c * theta.sin()) / (p.r * p.dudr_over_r))
}

pub fn build_coefficients(eq: &Equilibrium) -> Result<SlCoefficients> {
    let n = eq.n_nodes() - 1;
    let mut index = Vec::new();
    let mut r = Vec::new();
    let mut points = Vec::new();
    for j in 1..n {
        let p = eq.at_theta(PI * j as f64 / n as f64)?;
        let sl = sl_point(eq, &p);
        if !(sl.a > 0.0 && sl.b > 0.0 && sl.e2 > 0.0) {
            return numerical(format!("non-positive coefficient at r = {}", p.r));
        }
        index.push(j);
        r.push(p.r);
        points.push(sl);
    }
    // Integrate d log a/dθ node to node with 8-point Gauss–Legendre, starting mid-grid.
    let rule = crate::numerics::quad::gauss_legendre(8);
    let lo = n / 64;
    let hi = n - n / 64;
    let mid = n / 2;
    let mut a_check = 0.0f64;
    for dir in [1i64, -1] {
        let mut acc = 0.0;
        let mut j = mid as i64;
        loop {
            let next = j + dir;
            if next < lo as i64 || next > hi as i64 {
                break;
            }
            let (t0, t1) = (PI * j as f64 / n as f64, PI * next as f64 / n as f64);
            let mut err = None;
            acc += crate::numerics::quad::integrate_gl(
                |t| dlog_a_dtheta(eq, t).unwrap_or_else(|e| {
                    err = Some(e);
                    f64::NAN
                }),
                t0,
                t1,
                &rule,
            );
            if let Some(e) = err {
                return Err(e);
            }
            let direct = points[next as usize - 1].a.ln() - points[mid - 1].a.ln();
            a_check = a_check.max((direct - acc).abs());
            j = next;
        }
    }
    if !(a_check <= 1e-6) {
        return numerical(format!(
            "closed-form a disagrees with exp of the integrated E1/E2 by {a_check:.2e}; tighten the equilibrium rtol"
        ));
    }
    Ok(SlCoefficients { index, r, points, a_check })
}

/// Exponent s₂ = (γ+1)/(4(γ−1)) of cos²(θ/2) in (ab)^{1/4}.
fn surface_exponent(gamma: f64) -> f64 {
    (gamma + 1.0) / (4.0 * (gamma - 1.0))
}

/// Regular part of log (ab)^{1/4} after removing log sin²(θ/2) + s₂ log cos²(θ/2).
fn log_f_regular(eq: &Equilibrium, p: &ProfilePoint) -> f64 {
    let gm = eq.eos.gamma;
    let th = &p.th;
    let onep = 1.0 + th.p_over_rho * eq.eos.inv_c2();
    let rho_hat = if p.u > 0.0 {
        th.rho / p.u.powf(1.0 / (gm - 1.0))
    } else {
        ((gm - 1.0) / (eq.eos.a * gm)).powf(1.0 / (gm - 1.0))
    };
    (eq.u_c * p.xhat).ln() + p.h + 0.25 * (th.gamma_p * th.alpha).ln() + surface_exponent(gm) * eq.u_c.ln() + 0.5 * rho_hat.ln()
        - 0.5 * onep.ln()
}

/// dξ/dθ, regular on [0, π].
fn xi_density(p: &ProfilePoint) -> f64 {
    (-p.f + p.h).exp() / ((p.th.gamma_p * p.th.alpha * p.xhat).sqrt() * p.dudr_over_r.abs())
}

/// Position in every chart at once, with complements kept for accuracy at the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub theta: f64,
    /// π − θ.
    pub phi: f64,
    pub u: f64,
    pub deficit: f64,
    pub xi: f64,
    /// ξ₊ − ξ.
    pub xi_rem: f64,
    pub x: f64,
    pub one_minus_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleChart {
    pub xi_plus: f64,
    pub u_c: f64,
    pub gamma: f64,
    /// Cosine coefficients of dξ/dθ.
    pub h_coeffs: Vec<f64>,
    /// Cosine coefficients of the regular part of log (ab)^{1/4}.
    pub reg_coeffs: Vec<f64>,
}

/// Chebyshev series of several functions sampled at Gauss points cos β_j, β_j = (j+½)π/n.
/// The sample count doubles until every chopped series uses at most half of it.
fn adaptive_gauss<F>(n_series: usize, mut sample: F) -> Result<Vec<Cheb>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mut n = 64;
    loop {
        let mut cols = vec![Vec::with_capacity(n); n_series];
        for j in 0..n {
            let v = sample(PI * (j as f64 + 0.5) / n as f64)?;
            if v.iter().any(|x| !x.is_finite()) {
                return numerical(format!("non-finite profile sample at node {j} of {n}"));
            }
            for (c, x) in cols.iter_mut().zip(v) {
                c.push(x);
            }
        }
        let series: Vec<Cheb> = cols
            .iter()
            .map(|c| {
                let mut s = Cheb::from_gauss(c);
                // The equilibrium series carry a structured floor near 1e-13.
                s.chop(1e-11);
                s
            })
            .collect();
        if series.iter().all(|s| 2 * s.coeffs.len() <= n) {
            return Ok(series);
        }
        if n >= 4096 {
            return numerical(format!("profile series not resolved with {n} samples"));
        }
        n *= 2;
    }
}

pub fn liouville_transform(eq: &Equilibrium) -> Result<LiouvilleChart> {
    let s = adaptive_gauss(2, |theta| {
        let p = eq.at_ud(eq.u_c * (0.5 * theta).cos().powi(2), eq.u_c * (0.5 * theta).sin().powi(2))?;
        let h = xi_density(&p);
        if !(h > 0.0 && h.is_finite()) {
            return numerical(format!("Liouville density not positive at theta = {theta}"));
        }
        Ok(vec![h, log_f_regular(eq, &p)])
    })?;
    let [h, reg]: [Cheb; 2] = s.try_into().unwrap();
    Ok(LiouvilleChart { xi_plus: PI * h.coeffs[0], u_c: eq.u_c, gamma: eq.eos.gamma, h_coeffs: h.coeffs, reg_coeffs: reg.coeffs })
}

fn cos_series(c: &[f64], theta: f64) -> f64 {
    c.iter().enumerate().map(|(k, a)| a * (k as f64 * theta).cos()).sum()
}

impl LiouvilleChart {
    pub fn h(&self, theta: f64) -> f64 {
        cos_series(&self.h_coeffs, theta)
    }

    pub fn h_theta(&self, theta: f64) -> f64 {
        -self.h_coeffs.iter().enumerate().map(|(k, a)| k as f64 * a * (k as f64 * theta).sin()).sum::<f64>()
    }

    pub fn xi(&self, theta: f64) -> f64 {
        let c = &self.h_coeffs;
        c[0] * theta + c.iter().enumerate().skip(1).map(|(k, a)| a * (k as f64 * theta).sin() / k as f64).sum::<f64>()
    }

    /// ξ₊ − ξ at θ = π − φ.
    pub fn xi_rem(&self, phi: f64) -> f64 {
        let c = &self.h_coeffs;
        c[0] * phi
            + c.iter().enumerate().skip(1).map(|(k, a)| if k % 2 == 0 { 1.0 } else { -1.0 } * a * (k as f64 * phi).sin() / k as f64).sum::<f64>()
    }

    pub fn s_surface(&self) -> f64 {
        surface_exponent(self.gamma)
    }

    /// Chart point at Chebyshev angle θ (use `at_phi` near the surface).
    pub fn at_theta(&self, theta: f64) -> ChartPoint {
        self.assemble(theta, PI - theta)
    }

    pub fn at_phi(&self, phi: f64) -> ChartPoint {
        self.assemble(PI - phi, phi)
    }

    fn assemble(&self, theta: f64, phi: f64) -> ChartPoint {
        let (xi, xi_rem) = if theta <= FRAC_PI_2 { let xi = self.xi(theta); (xi, self.xi_plus - xi) } else { let s = self.xi_rem(phi); (self.xi_plus - s, s) };
        let vt = FRAC_PI_2 * xi / self.xi_plus;
        let vc = FRAC_PI_2 * xi_rem / self.xi_plus;
        let (u, deficit) = if theta <= FRAC_PI_2 {
            (self.u_c * (0.5 * theta).cos().powi(2), self.u_c * (0.5 * theta).sin().powi(2))
        } else {
            (self.u_c * (0.5 * phi).sin().powi(2), self.u_c * (0.5 * phi).cos().powi(2))
        };
        ChartPoint { theta, phi, u, deficit, xi, xi_rem, x: vt.sin().powi(2), one_minus_x: vc.sin().powi(2) }
    }

    /// Chart point at x given through ϑ = πξ/(2ξ₊) and its complement π/2 − ϑ.
    pub fn at_vartheta(&self, vt: f64, vc: f64) -> ChartPoint {
        if vt <= vc {
            let target = 2.0 * self.xi_plus * vt / PI;
            let mut th = target / self.h_coeffs[0];
            for _ in 0..60 {
                let step = (self.xi(th) - target) / self.h(th);
                th = (th - step).clamp(0.0, PI);
                if step.abs() <= 1e-16 * th.max(1e-300) {
                    break;
                }
            }
            let mut cp = self.at_theta(th);
            cp.x = vt.sin().powi(2);
            cp.one_minus_x = vc.sin().powi(2);
            cp
        } else {
            let target = 2.0 * self.xi_plus * vc / PI;
            let mut ph = target / self.h_coeffs[0];
            for _ in 0..60 {
                let step = (self.xi_rem(ph) - target) / self.h(PI - ph);
                ph = (ph - step).clamp(0.0, PI);
                if step.abs() <= 1e-16 * ph.max(1e-300) {
                    break;
                }
            }
            let mut cp = self.at_phi(ph);
            cp.x = vt.sin().powi(2);
            cp.one_minus_x = vc.sin().powi(2);
            cp
        }
    }

    pub fn at_x(&self, x: f64) -> ChartPoint {
        let (vt, vc) = if x <= 0.5 {
            let vt = x.sqrt().asin();
            (vt, FRAC_PI_2 - vt)
        } else {
            let vc = (1.0 - x).sqrt().asin();
            (FRAC_PI_2 - vc, vc)
        };
        self.at_vartheta(vt, vc)
    }

    /// Normal-form potential q at a chart point.
    pub fn q(&self, eq: &Equilibrium, cp: &ChartPoint) -> Result<f64> {
        let p = eq.at_ud(cp.u, cp.deficit)?;
        let qq = sl_point(eq, &p).q;
        let th = cp.theta;
        let s2 = self.s_surface();
        let (sh, ch) = if th <= FRAC_PI_2 { ((0.5 * th).sin(), (0.5 * th).cos()) } else { ((0.5 * cp.phi).cos(), (0.5 * cp.phi).sin()) };
        let rt = -self.reg_coeffs.iter().enumerate().map(|(k, a)| k as f64 * a * (k as f64 * th).sin()).sum::<f64>();
        let rtt = -self.reg_coeffs.iter().enumerate().map(|(k, a)| (k * k) as f64 * a * (k as f64 * th).cos()).sum::<f64>();
        let lt = ch / sh - s2 * sh / ch + rt;
        let ltt = -0.5 / (sh * sh) - 0.5 * s2 / (ch * ch) + rtt;
        let h = self.h(th);
        let ht = self.h_theta(th);
        let lx = lt / h;
        let lxx = (ltt - lt * ht / h) / (h * h);
        Ok(qq + lxx + lx * lx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XChart {
    pub gamma: f64,
    pub n_param: f64,
    pub xi_plus: f64,
    pub c0: f64,
    pub c1: f64,
    /// log Ŵ, Ŵ(x) = W/(x^{3/2}(1−x)^{N/2−1}), as a Chebyshev series in 2x − 1.
    pub log_w_hat: Vec<f64>,
    /// Q̃ = (ξ₊/π)² Q as a Chebyshev series in 2x − 1.
    pub q_tilde: Vec<f64>,
    /// J° = e^F(1 + P/c²ρ) as a Chebyshev series in 2x − 1.
    pub j0: Vec<f64>,
}

pub fn build_x_chart(eq: &Equilibrium, chart: &LiouvilleChart) -> Result<XChart> {
    let gm = eq.eos.gamma;
    let s2 = surface_exponent(gm);
    let scale = chart.xi_plus / PI;
    // t = cos β = 2x − 1, so x = cos²(β/2) and ϑ = π/2 − β/2.
    let s = adaptive_gauss(3, |beta| {
        let cp = chart.at_vartheta(FRAC_PI_2 - 0.5 * beta, 0.5 * beta);
        let p = eq.at_ud(cp.u, cp.deficit)?;
        let sl = sl_point(eq, &p);
        let (sh2, ch2) = if cp.theta <= FRAC_PI_2 {
            ((0.5 * cp.theta).sin().powi(2), (0.5 * cp.theta).cos().powi(2))
        } else {
            ((0.5 * cp.phi).cos().powi(2), (0.5 * cp.phi).sin().powi(2))
        };
        let lw = scale.ln() + 2.0 * log_f_regular(eq, &p) + 2.0 * (sh2 / cp.x).ln() + 2.0 * s2 * (ch2 / cp.one_minus_x).ln();
        Ok(vec![lw, scale * scale * sl.q, sl.j0])
    })?;
    let [log_w_hat, q_tilde, j0]: [Cheb; 3] = s.try_into().unwrap();
    let centre = eq.at_u(eq.u_c)?;
    Ok(XChart {
        gamma: gm,
        n_param: eq.eos.n_param(),
        xi_plus: chart.xi_plus,
        c0: 2.0 * (centre.th.gamma_p * centre.th.p_over_rho).sqrt() * (centre.f - centre.h).exp(),
        c1: 1.0 / ((gm - 1.0) * eq.kappa * eq.kappa * eq.k_surf),
        log_w_hat: log_w_hat.coeffs,
        q_tilde: q_tilde.coeffs,
        j0: j0.coeffs,
    })
}

fn cheb_x(c: &[f64], x: f64) -> f64 {
    Cheb { coeffs: c.to_vec() }.eval(2.0 * x - 1.0)
}

impl XChart {
    pub fn w_hat_at(&self, x: f64) -> f64 {
        cheb_x(&self.log_w_hat, x).exp()
    }

    pub fn q_tilde_at(&self, x: f64) -> f64 {
        cheb_x(&self.q_tilde, x)
    }

    pub fn j0_at(&self, x: f64) -> f64 {
        cheb_x(&self.j0, x)
    }

    /// d log Ŵ/dx.
    pub fn dlog_w_hat(&self, x: f64) -> f64 {
        2.0 * Cheb { coeffs: self.log_w_hat.clone() }.derivative().eval(2.0 * x - 1.0)
    }

    /// First-order coefficient B, with (ξ₊/π)²𝓛 = −x(1−x)d² − B d + Q̃.
    pub fn b_coef(&self, x: f64) -> f64 {
        2.5 * (1.0 - x) - 0.5 * self.n_param * x - self.l1(x)
    }

    /// L₁ = B_model − B = −x(1−x) d log Ŵ/dx.
    pub fn l1(&self, x: f64) -> f64 {
        -x * (1.0 - x) * self.dlog_w_hat(x)
    }

    pub fn l0(&self, x: f64) -> f64 {
        self.q_tilde_at(x)
    }

    /// Physical-to-chart eigenvalue factor (π/ξ₊)².
    pub fn lambda_scale(&self) -> f64 {
        (PI / self.xi_plus).powi(2)
    }

    pub fn basis(&self, size: usize) -> JacobiBasis {
        JacobiBasis::new(0.5 * self.n_param - 1.0, 1.5, size)
    }
}

/// Gauss rule for x^{3/2}(1−x)^{N/2−1} with complements accurate near x = 1.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub x: Vec<f64>,
    pub one_minus_x: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn gauss_rule(basis: &JacobiBasis, n: usize) -> GaussRule {
    let (x, w) = basis.gauss(n);
    let mirror = JacobiBasis::new(basis.b, basis.a, n);
    let (y, _) = mirror.gauss(n);
    let omx: Vec<f64> = (0..n).map(|i| if x[i] <= 0.5 { 1.0 - x[i] } else { y[n - 1 - i] }).collect();
    let x: Vec<f64> = (0..n).map(|i| if x[i] <= 0.5 { x[i] } else { 1.0 - omx[i] }).collect();
    GaussRule { x, one_minus_x: omx, w }
}

/// Stiffness and mass matrices of the weighted form in the orthonormal Jacobi basis,
/// assembled with a Gauss rule of twice the basis size.
pub fn galerkin_matrices<W, Q>(n_param: f64, basis_size: usize, w_hat: W, q_tilde: Q) -> (DMatrix<f64>, DMatrix<f64>)
where
    W: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let m = basis_size;
    let basis = JacobiBasis::new(0.5 * n_param - 1.0, 1.5, 2 * m);
    let rule = gauss_rule(&basis, 2 * m);
    let mut k = DMatrix::<f64>::zeros(m, m);
    let mut mm = DMatrix::<f64>::zeros(m, m);
    let (mut p, mut dp, mut ddp) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for g in 0..rule.x.len() {
        let x = rule.x[g];
        basis.eval_all(m, x, &mut p, &mut dp, &mut ddp);
        let wh = rule.w[g] * w_hat(x);
        let xx = x * rule.one_minus_x[g];
        let qt = q_tilde(x);
        for i in 0..m {
            for j in 0..m {
                k[(i, j)] += wh * (xx * dp[i] * dp[j] + qt * p[i] * p[j]);
                mm[(i, j)] += wh * p[i] * p[j];
            }
        }
    }
    (k, mm)
}

/// Lowest eigenpairs of −(1/Ŵw)(Ŵw x(1−x)ψ′)′ + Q̃ψ in the orthonormal Jacobi basis.
pub fn solve_weighted<W, Q>(n_param: f64, basis_size: usize, n_modes: usize, w_hat: W, q_tilde: Q) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    W: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    if n_modes == 0 || n_modes > basis_size {
        return domain(format!("need 1 <= n_modes <= basis_size, got {n_modes} and {basis_size}"));
    }
    let (k, mm) = galerkin_matrices(n_param, basis_size, w_hat, q_tilde);
    let m = basis_size;
    let basis = JacobiBasis::new(0.5 * n_param - 1.0, 1.5, m);
    let (mut dp, mut ddp) = (vec![0.0; m], vec![0.0; m]);
    let chol = mm.clone().cholesky().ok_or_else(|| crate::Error::Numerical("mass matrix not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| crate::Error::Numerical("mass factor singular".into()))?;
    let mut c = &linv * &k * linv.transpose();
    c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut lambdas = Vec::with_capacity(n_modes);
    let mut coeffs = Vec::with_capacity(n_modes);
    let mut p1 = vec![0.0; m];
    basis.eval_all(m, 1.0, &mut p1, &mut dp, &mut ddp);
    for &i in order.iter().take(n_modes) {
        lambdas.push(eig.eigenvalues[i]);
        let v = eig.eigenvectors.column(i);
        let cvec = linv.transpose() * v;
        let norm = cvec.norm();
        let end: f64 = cvec.iter().zip(&p1).map(|(a, b)| a * b).sum();
        let sign = if end < 0.0 { -1.0 } else { 1.0 };
        coeffs.push(cvec.iter().map(|c| sign * c / norm).collect());
    }
    Ok((lambdas, coeffs))
}

/// Eigenvalues of the model operator with Ŵ ≡ 1, Q̃ ≡ 0.
pub fn model_spectrum(n_param: f64, basis_size: usize, n_modes: usize) -> Result<Vec<f64>> {
    Ok(solve_weighted(n_param, basis_size, n_modes, |_| 1.0, |_| 0.0)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub gamma: f64,
    pub n_param: f64,
    pub xi_plus: f64,
    pub basis_size: usize,
    /// Physical eigenvalues (time⁻²).
    pub lambdas: Vec<f64>,
    /// Relative change of each eigenvalue under basis doubling.
    pub convergence: Vec<f64>,
    /// Jacobi coefficients of ψₙ, unit norm in L²(x^{3/2}(1−x)^{N/2−1}dx), ψ(1) > 0.
    pub coeffs: Vec<Vec<f64>>,
    pub endpoint_constants: Vec<[f64; 2]>,
}

pub fn solve_spectrum(xc: &XChart, n_modes: usize, basis_size: usize, conv_tol: f64) -> Result<Spectrum> {
    let wh = |x: f64| xc.w_hat_at(x);
    let qt = |x: f64| xc.q_tilde_at(x);
    let (lt, coeffs) = solve_weighted(xc.n_param, basis_size, n_modes, wh, qt)?;
    let (lt2, _) = solve_weighted(xc.n_param, 2 * basis_size, n_modes, wh, qt)?;
    let convergence: Vec<f64> = lt.iter().zip(&lt2).map(|(a, b)| ((a - b) / b).abs()).collect();
    if let Some((i, c)) = convergence.iter().enumerate().find(|(_, c)| **c > conv_tol) {
        return numerical(format!("eigenvalue {} not converged under basis doubling: relative change {c:.3e}", i + 1));
    }
    if lt.windows(2).any(|w| !(w[1] > w[0])) {
        return numerical("eigenvalues not strictly increasing");
    }
    let scale = xc.lambda_scale();
    let mut spec = Spectrum {
        gamma: xc.gamma,
        n_param: xc.n_param,
        xi_plus: xc.xi_plus,
        basis_size,
        lambdas: lt.iter().map(|l| l * scale).collect(),
        convergence,
        coeffs,
        endpoint_constants: Vec::new(),
    };
    spec.endpoint_constants = (0..n_modes).map(|n| [spec.psi(n, 0.0), spec.psi(n, 1.0)]).collect();
    Ok(spec)
}

impl Spectrum {
    pub fn basis(&self) -> JacobiBasis {
        JacobiBasis::new(0.5 * self.n_param - 1.0, 1.5, self.basis_size)
    }

    /// ψₙ and its first two x-derivatives (n from 0).
    pub fn psi_derivs(&self, n: usize, x: f64) -> [f64; 3] {
        let m = self.basis_size;
        let (mut p, mut dp, mut ddp) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        self.basis().eval_all(m, x, &mut p, &mut dp, &mut ddp);
        let c = &self.coeffs[n];
        let dot = |v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        [dot(&p), dot(&dp), dot(&ddp)]
    }

    pub fn psi(&self, n: usize, x: f64) -> f64 {
        self.psi_derivs(n, x)[0]
    }

    /// Interior sign changes of ψₙ sampled on a fine grid.
    pub fn sign_changes(&self, n: usize, samples: usize) -> usize {
        let vals: Vec<f64> = (1..samples).map(|i| self.psi(n, i as f64 / samples as f64)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut last = 0.0;
        let mut count = 0;
        for &v in &vals {
            if v.abs() < 1e-10 * scale {
                continue;
            }
            if last != 0.0 && v.signum() != last {
                count += 1;
            }
            last = v.signum();
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointFit {
    pub c0: f64,
    pub c1: f64,
    /// Linear coefficients of ψ in x and in 1 − x from least squares on the outer 2%.
    pub slope0: f64,
    pub slope1: f64,
    pub taylor_residual: f64,
}

pub fn eigenfunction_endpoints(spec: &Spectrum, n: usize) -> Result<EndpointFit> {
    let [c0, c1] = spec.endpoint_constants[n];
    let scale = (0..=100).map(|i| spec.psi(n, i as f64 / 100.0).abs()).fold(0.0, f64::max);
    if c0.abs() < 1e-8 * scale || c1.abs() < 1e-8 * scale {
        return numerical(format!("eigenfunction {} vanishes at an endpoint (c0 = {c0:e}, c1 = {c1:e})", n + 1));
    }
    let fit = |side: f64| {
        let s: Vec<f64> = (1..=20).map(|i| 1e-3 * i as f64).collect();
        let v: Vec<f64> = s.iter().map(|&s| spec.psi(n, if side == 0.0 { s } else { 1.0 - s })).collect();
        crate::numerics::fit::polyfit(&s, &v, 3)
    };
    let (left, right) = (fit(0.0), fit(1.0));
    let d0 = spec.psi_derivs(n, 0.0)[1];
    let d1 = -spec.psi_derivs(n, 1.0)[1];
    let taylor_residual = [
        (left[0] - c0).abs() / c0.abs(),
        (right[0] - c1).abs() / c1.abs(),
        (left[1] - d0).abs() / d0.abs().max(c0.abs()),
        (right[1] - d1).abs() / d1.abs().max(c1.abs()),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(EndpointFit { c0, c1, slope0: left[1], slope1: -right[1], taylor_residual })
}

/// Wronskian mismatch at θ = π/2 of the recessive solutions of −η″ + qη = λη from both ends.
pub fn shooting_mismatch(eq: &Equilibrium, chart: &LiouvilleChart, lambda: f64) -> Result<f64> {
    let nu = 2.0 * chart.s_surface();
    let xi0 = 1e-3 * chart.xi_plus;
    let start_left = chart.at_vartheta(FRAC_PI_2 * xi0 / chart.xi_plus, FRAC_PI_2 * (1.0 - xi0 / chart.xi_plus));
    let start_right = chart.at_vartheta(FRAC_PI_2 * (1.0 - xi0 / chart.xi_plus), FRAC_PI_2 * xi0 / chart.xi_plus);
    let q_left = chart.q(eq, &start_left)? - 2.0 / (start_left.xi * start_left.xi);
    let q_right = chart.q(eq, &start_right)? - nu * (nu - 1.0) / (start_right.xi_rem * start_right.xi_rem);

    let integrator = Dopri5 { rtol: 1e-12, atol: 1e-300, h_max: 0.01, h_init: None, max_steps: 200_000 };
    let mut failed = None;
    // Left: independent variable θ, state (η, dη/dξ).
    let s = start_left.xi;
    let c2 = (q_left - lambda) / 10.0;
    let y0 = [s * s * (1.0 + c2 * s * s), 2.0 * s * (1.0 + 2.0 * c2 * s * s)];
    let left = integrator
        .solve(
            |th, y: &[f64], d: &mut [f64]| {
                let cp = chart.at_theta(th);
                match chart.q(eq, &cp) {
                    Ok(q) => {
                        let h = chart.h(th);
                        d[0] = h * y[1];
                        d[1] = h * (q - lambda) * y[0];
                        true
                    }
                    Err(e) => {
                        failed = Some(e.to_string());
                        false
                    }
                }
            },
            start_left.theta,
            &y0,
            FRAC_PI_2,
            |_, _| false,
            false,
        )
        .map_err(|e| crate::Error::Numerical(format!("left shooting: {e}")))?;
    // Right: independent variable φ = π − θ, state (η, dη/ds) with s = ξ₊ − ξ.
    let s = start_right.xi_rem;
    let d2 = (q_right - lambda) / (4.0 * nu + 2.0);
    let y0 = [s.powf(nu) * (1.0 + d2 * s * s), s.powf(nu - 1.0) * (nu + (nu + 2.0) * d2 * s * s)];
    let right = integrator
        .solve(
            |ph, y: &[f64], d: &mut [f64]| {
                let cp = chart.at_phi(ph);
                match chart.q(eq, &cp) {
                    Ok(q) => {
                        let h = chart.h(PI - ph);
                        d[0] = h * y[1];
                        d[1] = h * (q - lambda) * y[0];
                        true
                    }
                    Err(e) => {
                        failed = Some(e.to_string());
                        false
                    }
                }
            },
            start_right.phi,
            &y0,
            FRAC_PI_2,
            |_, _| false,
            false,
        )
        .map_err(|e| crate::Error::Numerical(format!("right shooting: {e}")))?;
    if let Some(e) = failed {
        return numerical(e);
    }
    let (el, dl) = (left.y[0], left.y[1]);
    let (er, dr) = (right.y[0], -right.y[1]);
    Ok((el * dr - dl * er) / ((el * el + dl * dl).sqrt() * (er * er + dr * dr).sqrt()))
}

/// Root of the shooting mismatch bracketed around `guess`.
pub fn shooting_eigenvalue(eq: &Equilibrium, chart: &LiouvilleChart, guess: f64, rel_width: f64) -> Result<f64> {
    let f = |l: f64| shooting_mismatch(eq, chart, l).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (guess * (1.0 - rel_width), guess * (1.0 + rel_width));
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo * fhi < 0.0) {
        let mid = f(guess);
        if flo * mid < 0.0 {
            hi = guess;
        } else if mid * fhi < 0.0 {
            lo = guess;
        } else {
            return numerical(format!("shooting mismatch does not change sign around {guess}"));
        }
    }
    brent(f, lo, hi, 1e-15 * guess.abs(), 200).map_err(|_| crate::Error::Numerical("shooting root lost its bracket".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMode {
    pub index: usize,
    pub lambda: f64,
    pub theta0: f64,
    pub coeffs: Vec<f64>,
    pub n_param: f64,
    /// False if λ ≤ 0: the mode then grows like sinh/cosh instead.
    pub periodic: bool,
}

pub fn periodic_mode(spec: &Spectrum, n: usize, theta0: f64) -> Result<PeriodicMode> {
    if n >= spec.lambdas.len() {
        return domain(format!("mode {} not computed", n + 1));
    }
    let lambda = spec.lambdas[n];
    Ok(PeriodicMode { index: n, lambda, theta0, coeffs: spec.coeffs[n].clone(), n_param: spec.n_param, periodic: lambda > 0.0 })
}

impl PeriodicMode {
    pub fn omega(&self) -> f64 {
        self.lambda.abs().sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    /// Time factor of Y₁ and its derivative.
    pub fn time_factor(&self, t: f64) -> (f64, f64) {
        let w = self.omega();
        if self.periodic {
            ((w * t + self.theta0).sin(), w * (w * t + self.theta0).cos())
        } else {
            ((w * t + self.theta0).sinh(), w * (w * t + self.theta0).cosh())
        }
    }

    /// Y₁ and V₁ = ∂ₜY₁/J° at (t, x).
    pub fn y1_v1(&self, spec: &Spectrum, xc: &XChart, t: f64, x: f64) -> (f64, f64) {
        let psi = spec.psi(self.index, x);
        let (s, ds) = self.time_factor(t);
        (s * psi, ds * psi / xc.j0_at(x))
    }
}
