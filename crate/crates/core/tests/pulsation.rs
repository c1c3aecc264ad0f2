use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;
use tovpulse_core::eos::EosModel;
use tovpulse_core::numerics::fit::polyfit;
use tovpulse_core::pulsation::*;
use tovpulse_core::tov::{integrate_outward, Equilibrium, TovOptions};

struct Star {
    eq: Equilibrium,
    chart: LiouvilleChart,
    xc: XChart,
    spec: Spectrum,
}

fn star_for(gamma: f64, rho_c: f64) -> Star {
    let eos = EosModel::capped_polytrope(1.0, gamma, None, 1.0, 1.0);
    let eq = integrate_outward(&eos, rho_c, &TovOptions::default()).unwrap();
    let chart = liouville_transform(&eq).unwrap();
    let xc = build_x_chart(&eq, &chart).unwrap();
    let spec = solve_spectrum(&xc, 4, 64, 1e-8).unwrap();
    Star { eq, chart, xc, spec }
}

fn star() -> &'static Star {
    static S: OnceLock<Star> = OnceLock::new();
    S.get_or_init(|| star_for(1.5, 1e-3))
}

fn chart_at_r(s: &Star, r: f64) -> ChartPoint {
    let p = s.eq.at_r(r).unwrap();
    s.chart.at_theta(2.0 * p.deficit.sqrt().atan2(p.u.sqrt()))
}

/// Five-point central difference.
fn d1<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

#[test]
fn metric_identity_and_positivity() {
    let s = star();
    let c = build_coefficients(&s.eq).unwrap();
    assert!(c.a_check < 1e-6, "{}", c.a_check);
    assert!(c.points.iter().all(|p| p.e2 > 0.0 && p.a > 0.0 && p.b > 0.0));
    let rp = s.eq.r_plus;
    for &f in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        let r = f * rp;
        let h = 3e-4 * rp;
        let dfh = d1(|r| { let p = s.eq.at_r(r).unwrap(); p.f + p.h }, r, h);
        let dh = d1(|r| s.eq.at_r(r).unwrap().h, r, h);
        let p = s.eq.at_r(r).unwrap();
        let rhs = 4.0 * PI * (2.0 * p.h).exp() * (p.th.rho + p.th.p) * r;
        // Near the surface H′ is a difference of two much larger terms; scale by |F′| + |H′|.
        let scale = (dfh - dh).abs() + dh.abs();
        assert!(((dfh - rhs) / scale).abs() < 1e-8, "r {r}: {dfh} vs {rhs}");
    }
}

#[test]
fn a_near_centre() {
    let s = star();
    let c = s.eq.at_u(s.eq.u_c).unwrap();
    let lead = c.th.gamma_p * c.th.p * (c.f + c.h).exp() / (1.0 + c.th.p_over_rho);
    let r = 1e-4 * s.eq.r_plus;
    let p = s.eq.at_r(r).unwrap();
    let a = sl_point(&s.eq, &p).a;
    assert!((a / r.powi(4) / lead - 1.0).abs() < 1e-6);
}

#[test]
fn self_adjoint_form_on_polynomials() {
    let s = star();
    let rp = s.eq.r_plus;
    let a_of = |r: f64| sl_point(&s.eq, &s.eq.at_r(r).unwrap()).a;
    for k in 1..=3 {
        let y = |r: f64| (r / rp).powi(k);
        let dy = |r: f64| k as f64 * (r / rp).powi(k - 1) / rp;
        let ddy = |r: f64| (k * (k - 1)) as f64 * (r / rp).powi(k - 2) / (rp * rp);
        for &f in &[0.2, 0.5, 0.8] {
            let r = f * rp;
            let h = 3e-4 * rp;
            let p = s.eq.at_r(r).unwrap();
            let sl = sl_point(&s.eq, &p);
            let div = -d1(|r| a_of(r) * dy(r), r, h) / sl.b + sl.q * y(r);
            let da = sl.a * sl.e1_over_e2;
            let exp = -(sl.a / sl.b) * ddy(r) - da / sl.b * dy(r) + sl.q * y(r);
            let scale = (sl.a / sl.b * ddy(r)).abs() + (da / sl.b * dy(r)).abs() + (sl.q * y(r)).abs();
            assert!(((div - exp) / scale).abs() < 1e-10, "k {k} r {r}: {:e}", (div - exp) / scale);
        }
    }
}

#[test]
fn potential_endpoint_limits() {
    let s = star();
    let near = |x: f64| {
        let cp = s.chart.at_x(x);
        let q = s.chart.q(&s.eq, &cp).unwrap();
        (q * cp.xi * cp.xi, q * cp.xi_rem * cp.xi_rem)
    };
    let (left, _) = near(1e-8);
    let (_, right) = near(1.0 - 1e-8);
    let g = 1.5;
    let expect_right = (g + 1.0) * (3.0 - g) / (4.0 * (g - 1.0) * (g - 1.0));
    assert!((left - 2.0).abs() < 0.02, "{left}");
    assert!((right - expect_right).abs() < 0.01 * expect_right, "{right}");
    assert!(left > 0.75 && right > 0.75);
}

#[test]
fn liouville_length_against_quadrature() {
    let s = star();
    // ξ(r) = ∫ √(b/a) dr by adaptive quadrature, independent of the cosine series.
    let r1 = 0.6 * s.eq.r_plus;
    let f = |r: f64| {
        let sl = sl_point(&s.eq, &s.eq.at_r(r).unwrap());
        (sl.b / sl.a).sqrt()
    };
    let q = tovpulse_core::numerics::quad::gauss_kronrod(f, 0.0, r1, 1e-12, 0.0, 200);
    let cp = chart_at_r(s, r1);
    assert!(((q.value - cp.xi) / cp.xi).abs() < 1e-9, "{} vs {}", q.value, cp.xi);
    // The surface piece behaves like (r₊ − r)^{-1/2}: substitute r = r₊ − w².
    let limit = 2.0 / (s.eq.kappa * (0.5 * s.eq.k_surf).sqrt());
    // Below w0 the integrand is its limit to O(w0²); r₊ − w² loses digits there.
    let w0 = 1e-3;
    let g = |w: f64| 2.0 * w * f(s.eq.r_plus - w * w);
    let w1 = (s.eq.r_plus - r1).sqrt();
    let tail = tovpulse_core::numerics::quad::gauss_kronrod(g, w0, w1, 1e-12, 0.0, 200);
    let total = q.value + tail.value + limit * w0;
    assert!(((total - s.chart.xi_plus) / s.chart.xi_plus).abs() < 1e-9, "{total} vs {} ({:?})", s.chart.xi_plus, tail);
}

#[test]
fn chart_constants_and_b_limits() {
    let s = star();
    let xc = &s.xc;
    assert_eq!(xc.n_param, 6.0);
    assert!((xc.b_coef(0.0) - 2.5).abs() < 1e-12);
    assert!((xc.b_coef(1.0) + 3.0).abs() < 1e-12);
    for &x in &[0.0, 1e-6, 0.3, 0.7, 1.0 - 1e-6, 1.0] {
        let bound = (xc.l1(x) / (x * (1.0 - x)).max(1e-300)).abs();
        assert!(x == 0.0 || x == 1.0 || bound < 1e3, "{x}: {bound}");
    }
    // B = (1 − 2x) + x(1−x) (log W)_x with W from the physical √(ab).
    let log_w = |x: f64| {
        let cp = s.chart.at_x(x);
        let sl = sl_point(&s.eq, &s.eq.at_ud(cp.u, cp.deficit).unwrap());
        (xc.xi_plus / PI * sl.sqrt_ab / (cp.x * cp.one_minus_x).sqrt()).ln()
    };
    for &x in &[0.1, 0.4, 0.6, 0.9] {
        let b = (1.0 - 2.0 * x) + x * (1.0 - x) * d1(log_w, x, 1e-3);
        assert!((b - xc.b_coef(x)).abs() < 1e-7, "x {x}: {b} vs {}", xc.b_coef(x));
    }
    // Endpoint scales: x ≈ (π/ξ₊)² r²/C0², 1 − x ≈ (π/ξ₊)² C1 (r₊ − r).
    let k = (PI / xc.xi_plus).powi(2);
    let rp = s.eq.r_plus;
    let fit0: Vec<(f64, f64)> = (1..=20).map(|i| { let r = 1e-3 * rp * i as f64; (r * r, chart_at_r(s, r).x) }).collect();
    let c0 = polyfit(&fit0.iter().map(|p| p.0).collect::<Vec<_>>(), &fit0.iter().map(|p| p.1).collect::<Vec<_>>(), 2);
    assert!((c0[1] / (k / (xc.c0 * xc.c0)) - 1.0).abs() < 0.01, "{c0:?}");
    let fit1: Vec<(f64, f64)> = (1..=20).map(|i| { let d = 1e-4 * rp * i as f64; (d, chart_at_r(s, rp - d).one_minus_x) }).collect();
    let c1 = polyfit(&fit1.iter().map(|p| p.0).collect::<Vec<_>>(), &fit1.iter().map(|p| p.1).collect::<Vec<_>>(), 2);
    assert!((c1[1] / (k * xc.c1) - 1.0).abs() < 0.01, "{c1:?} vs {}", k * xc.c1);
}

#[test]
fn chart_consistency_on_test_functions() {
    let s = star();
    let xc = &s.xc;
    let k = xc.lambda_scale();
    let rp = s.eq.r_plus;
    for m in 1..=10 {
        let w = 0.7 * m as f64;
        let p = |x: f64| (w * x).sin() + 0.3 * x * x;
        let dp = |x: f64| w * (w * x).cos() + 0.6 * x;
        let ddp = |x: f64| -w * w * (w * x).sin() + 0.6;
        let mut num = 0.0;
        let mut den = 0.0;
        for &f in &[0.15, 0.35, 0.55, 0.75, 0.9] {
            let r = f * rp;
            let cp = chart_at_r(s, r);
            let x = cp.x;
            let flux = |r: f64| {
                let cp = chart_at_r(s, r);
                let sl = sl_point(&s.eq, &s.eq.at_ud(cp.u, cp.deficit).unwrap());
                (PI / xc.xi_plus) * sl.sqrt_ab * (cp.x * cp.one_minus_x).sqrt() * dp(cp.x)
            };
            let sl = sl_point(&s.eq, &s.eq.at_ud(cp.u, cp.deficit).unwrap());
            let lr = -d1(flux, r, 1e-3 * rp) / sl.b + sl.q * p(x);
            let lx = k * (-x * (1.0 - x) * ddp(x) - xc.b_coef(x) * dp(x) + xc.q_tilde_at(x) * p(x));
            num += (lr - lx).powi(2);
            den += lx.powi(2);
        }
        assert!((num / den).sqrt() < 1e-6, "m {m}: {}", (num / den).sqrt());
    }
}

#[test]
fn model_operator_oracle() {
    let l = model_spectrum(6.0, 32, 4).unwrap();
    for (n, l) in l.iter().enumerate() {
        let n = n as f64;
        assert!((l - n * (n + 4.5)).abs() < 1e-10, "{n}: {l}");
    }
}

#[test]
fn galerkin_matrix_symmetric() {
    let s = star();
    let (k, m) = galerkin_matrices(6.0, 48, |x| s.xc.w_hat_at(x), |x| s.xc.q_tilde_at(x));
    let asym = |a: &nalgebra::DMatrix<f64>| (a - a.transpose()).amax() / a.amax();
    assert!(asym(&k) < 1e-12 && asym(&m) < 1e-12);
}

#[test]
fn fundamental_self_convergence_and_shooting() {
    let s = star();
    let a = solve_spectrum(&s.xc, 2, 64, 1.0).unwrap();
    let b = solve_spectrum(&s.xc, 2, 128, 1.0).unwrap();
    let l1 = a.lambdas[0];
    assert!(((l1 - b.lambdas[0]) / b.lambdas[0]).abs() < 1e-8);
    for n in 0..3 {
        let ln = s.spec.lambdas[n];
        let lo = shooting_mismatch(&s.eq, &s.chart, ln * (1.0 - 1e-4)).unwrap();
        let hi = shooting_mismatch(&s.eq, &s.chart, ln * (1.0 + 1e-4)).unwrap();
        assert!(lo * hi < 0.0, "mode {n}");
        let root = shooting_eigenvalue(&s.eq, &s.chart, ln, 0.02).unwrap();
        assert!(((root - ln) / ln).abs() < 1e-6, "mode {n}: {root} vs {ln}");
    }
}

#[test]
fn spectral_convergence_is_geometric() {
    let s = star();
    let reference = solve_spectrum(&s.xc, 2, 128, 1.0).unwrap().lambdas[1];
    let err: Vec<f64> =
        [8usize, 12, 16].iter().map(|&m| ((solve_spectrum(&s.xc, 2, m, 1.0).unwrap().lambdas[1] - reference) / reference).abs()).collect();
    assert!(err[1] < 0.2 * err[0] && err[2] < 0.2 * err[1], "{err:?}");
}

#[test]
fn eigenstructure() {
    let s = star();
    let spec = &s.spec;
    assert!(spec.lambdas.windows(2).all(|w| w[1] > w[0]));
    assert!(spec.lambdas[0] > 0.0);
    for n in 0..4 {
        assert_eq!(spec.sign_changes(n, 4000), n, "mode {}", n + 1);
        let e = eigenfunction_endpoints(spec, n).unwrap();
        assert!(e.c0.abs() > 1e-3 && e.c1 > 1e-3);
        assert!(e.taylor_residual < 1e-4, "{e:?}");
        // Analytic ψ: basis coefficients decay geometrically.
        let c = &spec.coeffs[n];
        let head = c[..8].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = c[40..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(tail < 1e-10 * head, "mode {n}: {tail:e}");
    }
}

#[test]
fn eigenfunctions_satisfy_operator_pointwise() {
    let s = star();
    let k = s.xc.lambda_scale();
    for n in 0..3 {
        let l = s.spec.lambdas[n];
        for &x in &[0.05, 0.3, 0.6, 0.95] {
            let [p, dp, ddp] = s.spec.psi_derivs(n, x);
            let lp = k * (-x * (1.0 - x) * ddp - s.xc.b_coef(x) * dp + s.xc.q_tilde_at(x) * p);
            assert!((lp - l * p).abs() < 1e-8 * l * s.spec.endpoint_constants[n][1].abs(), "n {n} x {x}");
        }
    }
}

#[test]
fn periodic_mode_package() {
    let s = star();
    let theta0 = 0.4;
    let mode = periodic_mode(&s.spec, 0, theta0).unwrap();
    assert!(mode.periodic);
    let t = 1.234;
    for &x in &[0.0, 0.5, 1.0] {
        let (y, _) = mode.y1_v1(&s.spec, &s.xc, t, x);
        let (y2, _) = mode.y1_v1(&s.spec, &s.xc, t + mode.period(), x);
        assert!((y - y2).abs() < 1e-12);
        let (_, v0) = mode.y1_v1(&s.spec, &s.xc, 0.0, x);
        let cp = s.chart.at_x(x.clamp(1e-12, 1.0 - 1e-12));
        let j0 = sl_point(&s.eq, &s.eq.at_ud(cp.u, cp.deficit).unwrap()).j0;
        let expect = mode.lambda.sqrt() * theta0.cos() / j0 * s.spec.psi(0, x);
        assert!((v0 - expect).abs() < 1e-9 * expect.abs(), "{v0} vs {expect}");
    }
    // ∂ₜ²Y₁ + 𝓛Y₁ = 0 from the time factor and the pointwise eigen-equation.
    let h = 1e-3;
    let x = 0.4;
    let ytt = (mode.y1_v1(&s.spec, &s.xc, t + h, x).0 - 2.0 * mode.y1_v1(&s.spec, &s.xc, t, x).0 + mode.y1_v1(&s.spec, &s.xc, t - h, x).0) / (h * h);
    let [p, dp, ddp] = s.spec.psi_derivs(0, x);
    let lp = s.xc.lambda_scale() * (-x * (1.0 - x) * ddp - s.xc.b_coef(x) * dp + s.xc.q_tilde_at(x) * p);
    let ly = (mode.omega() * t + theta0).sin() * lp;
    assert!((ytt + ly).abs() < 1e-6 * mode.lambda * p.abs());
}

#[test]
fn unstable_mode_flagged() {
    let s = star();
    let mut spec = s.spec.clone();
    spec.lambdas[0] = -spec.lambdas[0];
    let m = periodic_mode(&spec, 0, 0.0).unwrap();
    assert!(!m.periodic);
    assert!(periodic_mode(&spec, 10, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn model_spectrum_for_even_n(half in 3usize..8) {
        let n = 2.0 * half as f64;
        let l = model_spectrum(n, 24, 5).unwrap();
        for (k, l) in l.iter().enumerate() {
            let k = k as f64;
            prop_assert!((l - k * (k + (n + 3.0) / 2.0)).abs() < 1e-9 * (1.0 + l));
        }
    }

    #[test]
    fn spectra_are_ordered_with_sturm_nodes(log_rho in -9.0f64..-5.0, gi in 0usize..2) {
        let gamma = [1.5, 4.0 / 3.0][gi];
        let s = star_for(gamma, log_rho.exp());
        prop_assert!(s.spec.lambdas.windows(2).all(|w| w[1] > w[0]));
        for n in 0..4 {
            // An unstable mode is evanescent in the envelope; its surface tail sits below round-off.
            if s.spec.lambdas[n] > 0.0 {
                prop_assert_eq!(s.spec.sign_changes(n, 3000), n);
                prop_assert!(s.spec.psi(n, 1.0) > 0.0 && s.spec.psi(n, 0.0) != 0.0);
            }
        }
        let (k, _) = galerkin_matrices(s.xc.n_param, 32, |x| s.xc.w_hat_at(x), |x| s.xc.q_tilde_at(x));
        prop_assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
    }
}
