//! One PASS/FAIL line per acceptance criterion on the default star
//! (γ = 3/2, A = G = c = 1, ρ_c = 10⁻³).

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use tovpulse_core::eos::EosModel;
use tovpulse_core::evolution::*;
use tovpulse_core::matching::*;
use tovpulse_core::numerics::cheb::Cheb;
use tovpulse_core::numerics::fit::{line, polyfit};
use tovpulse_core::pulsation::*;
use tovpulse_core::tov::*;
use tovpulse_core::Result;

struct Star {
    eq: Equilibrium,
    chart: LiouvilleChart,
    xc: XChart,
    spec: Spectrum,
    grid: Grid,
}

fn star() -> Result<Star> {
    let eos = EosModel::capped_polytrope(1.0, 1.5, None, 1.0, 1.0);
    let eq = integrate_outward(&eos, 1e-3, &TovOptions::default())?;
    let chart = liouville_transform(&eq)?;
    let xc = build_x_chart(&eq, &chart)?;
    let spec = solve_spectrum(&xc, 4, 64, 1e-6)?;
    let grid = build_grid(&eq, &chart, &xc, 64)?;
    Ok(Star { eq, chart, xc, spec, grid })
}

type Outcome = Result<(bool, String)>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

fn criterion_1(s: &Star) -> Outcome {
    let eq = &s.eq;
    let rmax = 0.05 * eq.series.radius_scale();
    let near: Vec<[f64; 3]> = eq.rphase.iter().copied().filter(|k| k[0] < rmax).collect();
    let r2: Vec<f64> = near.iter().map(|k| k[0] * k[0]).collect();
    let mu: Vec<f64> = near.iter().map(|k| k[1] / k[0].powi(3)).collect();
    let m3 = polyfit(&r2, &mu, 2)[0];
    let m3_err = rel(m3, 4.0 * PI / 3.0 * eq.rho_c);
    let p_c = eq.eos.pressure(eq.rho_c)?;
    let mut deficit = Vec::new();
    for k in &near {
        deficit.push((p_c - eq.eos.at_u(k[2])?.p) / (k[0] * k[0]));
    }
    let p2 = polyfit(&r2, &deficit, 2)[0];
    let quoted = (eq.rho_c + p_c) * (4.0 * PI * eq.rho_c / 3.0 + 4.0 * PI * p_c) / 2.0;
    let p2_err = rel(p2, quoted);
    Ok((m3_err < 1e-6 && p2_err < 1e-4, format!("m r^3 coefficient rel err {m3_err:.2e}, P r^2 deficit rel err {p2_err:.2e}")))
}

fn criterion_2(s: &Star) -> Outcome {
    let eq = &s.eq;
    let k = eq.k_surf;
    let k_def = eq.eos.g * eq.m_plus / (eq.r_plus * eq.r_plus * eq.kappa);
    // Richardson-extrapolated one-sided slope of u(r) at r₊.
    let fd = |h: f64| -> Result<f64> { Ok(-eq.u_at_r(eq.r_plus - h)? / h) };
    let h = 1e-3 * eq.r_plus;
    let (d1, d2, d3) = (fd(h)?, fd(h / 2.0)?, fd(h / 4.0)?);
    let slope = (4.0 * (2.0 * d3 - d2) - (2.0 * d2 - d1)) / 3.0;
    let slope_err = rel(-slope, k_def);
    let fit = surface_exponent_check(eq)?;
    let exp_err = rel(fit.exponent, 2.0);
    let amp_err = rel(fit.amplitude, fit.expected_amplitude);
    let ok = eq.kappa > 0.0 && eq.kappa < 1.0 && slope_err < 1e-6 && exp_err < 0.01 && amp_err < 0.01 && rel(k, k_def) < 1e-12;
    Ok((ok, format!("kappa {:.6}, du/dr vs -K rel err {slope_err:.2e}, exponent {:.5}, amplitude rel err {amp_err:.2e}", eq.kappa, fit.exponent)))
}

fn criterion_3(s: &Star) -> Outcome {
    let sc = surface_chart(&s.eq, 64)?;
    let xe = rel(sc.xcheck_limit, s.eq.r_plus / s.eq.m_plus);
    let xs = rel(sc.xcheck_limit, sc.xstar);
    let ye = rel(sc.ycheck_limit, sc.ystar);
    let rx = Cheb { coeffs: sc.xcheck_coeffs.clone() }.decay_rate(1e-11);
    let ry = Cheb { coeffs: sc.ycheck_coeffs.clone() }.decay_rate(1e-11);
    let geometric = matches!((rx, ry), (Some(a), Some(b)) if a < 0.8 && b < 0.8);
    Ok((
        xe < 5e-3 && xs < 5e-3 && ye < 5e-3 && geometric,
        format!("X limit vs r+/m+ {xe:.2e}, Y limit vs quoted {ye:.2e}, Chebyshev decay rates {rx:?} {ry:?}"),
    ))
}

fn criterion_4(s: &Star) -> Outcome {
    let near = |x: f64| -> Result<(f64, f64)> {
        let cp = s.chart.at_x(x);
        let q = s.chart.q(&s.eq, &cp)?;
        Ok((q * cp.xi * cp.xi, q * cp.xi_rem * cp.xi_rem))
    };
    let (left, _) = near(1e-8)?;
    let (_, right) = near(1.0 - 1e-8)?;
    let ok = rel(left, 2.0) < 0.01 && rel(right, 3.75) < 0.01 && left > 0.75 && right > 0.75;
    Ok((ok, format!("q xi^2 -> {left:.6}, q (xi+ - xi)^2 -> {right:.6}")))
}

fn criterion_5(s: &Star) -> Outcome {
    let model = model_spectrum(6.0, 32, 4)?;
    let oracle = model.iter().enumerate().map(|(n, l)| (l - n as f64 * (n as f64 + 4.5)).abs()).fold(0.0f64, f64::max);
    let a = solve_spectrum(&s.xc, 2, 64, 1.0)?.lambdas[0];
    let b = solve_spectrum(&s.xc, 2, 128, 1.0)?.lambdas[0];
    let conv = rel(a, b);
    let shot = shooting_eigenvalue(&s.eq, &s.chart, a, 0.02)?;
    let shoot_err = rel(shot, a);
    Ok((
        oracle < 1e-10 && conv < 1e-8 && shoot_err < 1e-6,
        format!("model spectrum {model:.12?} max err {oracle:.1e}, lambda1 doubling {conv:.1e}, shooting {shoot_err:.1e}"),
    ))
}

fn criterion_6(s: &Star) -> Outcome {
    let spec = &s.spec;
    let increasing = spec.lambdas.windows(2).all(|w| w[1] > w[0]);
    let mut nodes = Vec::new();
    let mut endpoints = true;
    for n in 0..spec.lambdas.len() {
        nodes.push(spec.sign_changes(n, 4000));
        let e = eigenfunction_endpoints(spec, n)?;
        endpoints &= e.c0.abs() > 1e-3 && e.c1.abs() > 1e-3;
    }
    let nodes_ok = nodes.iter().enumerate().all(|(n, &k)| k == n);
    Ok((increasing && nodes_ok && endpoints, format!("increasing {increasing}, interior sign changes {nodes:?}, c0 c1 nonzero {endpoints}")))
}

fn criterion_7(s: &Star) -> Outcome {
    let cfg = EvolutionConfig { mode: EvolutionMode::Linear, ..Default::default() };
    let mode = periodic_mode(&s.spec, 0, 0.3)?;
    let dt = mode.period() / 2000.0;
    let init = mode_initial(&s.grid, &s.spec, &mode, 1e-3);
    let tr = run(&s.grid, &cfg, init.clone(), dt, 2000, None)?;
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0f64, f64::max);
    let ret = d(&tr.final_state.y, &init.y).max(d(&tr.final_state.v, &init.v)) / sup(&init.y).max(sup(&init.v));
    let e0 = tr.samples[0].e_lin;
    let drift = tr.samples.iter().map(|p| (p.e_lin - e0).abs() / e0).fold(0.0, f64::max);
    let t: Vec<f64> = tr.samples.iter().map(|p| p.t).collect();
    let f: Vec<f64> = tr.samples.iter().map(|p| p.r_plus - s.eq.r_plus).collect();
    let nu = crossing_frequency(&t, &f).unwrap_or(f64::NAN);
    let nu_err = rel(nu, s.spec.lambdas[0].sqrt() / (2.0 * PI));
    Ok((ret < 1e-6 && drift <= 1e-8 && nu_err < 1e-3, format!("return {ret:.2e}, energy drift {drift:.2e}, R+ frequency rel err {nu_err:.2e}")))
}

fn criterion_8(s: &Star) -> Outcome {
    let mode = periodic_mode(&s.spec, 0, 0.0)?;
    let dt = mode.period() / 2000.0;
    let mut d = Vec::new();
    for eps in [1e-3, 5e-4] {
        let cfg = EvolutionConfig { mode: EvolutionMode::Nonlinear, epsilon: eps, ..Default::default() };
        d.push(run(&s.grid, &cfg, mode_initial(&s.grid, &s.spec, &mode, eps), dt, 2000, Some((&s.spec, &mode)))?.defect.unwrap_or(f64::NAN));
    }
    let ratio = d[0] / d[1];
    Ok(((1.6..=2.4).contains(&ratio), format!("D(1e-3) = {:.4e}, D(5e-4) = {:.4e}, ratio {ratio:.4}", d[0], d[1])))
}

fn criterion_9(s: &Star) -> Outcome {
    let psi = |n: usize| -> Vec<f64> { s.grid.x.iter().map(|&x| s.spec.psi(n, x)).collect() };
    let rep = frechet_check(&s.grid, &psi(0), &psi(1), 1e-5)?;
    let rq: Vec<f64> = (0..2).map(|n| fd_rayleigh_quotient(&s.grid, &psi(n), 1e-5).map(|q| rel(q, s.spec.lambdas[n]))).collect::<Result<_>>()?;
    let z = vec![0.0; s.grid.size];
    let fit = degeneracy_check(&s.grid, &z, &z, 1e-5)?;
    Ok((
        rep.rel_error < 1e-4 && rq.iter().all(|&e| e < 1e-4) && fit.exponent >= 0.95,
        format!("linearization rel err {:.2e}, Rayleigh quotients rel err {:.2e} {:.2e}, degeneracy exponent {:.4}", rep.rel_error, rq[0], rq[1], fit.exponent),
    ))
}

fn criterion_10(s: &Star) -> Outcome {
    let st = static_c2_check(&s.eq, 1e-4)?;
    let ic2 = s.eq.eos.inv_c2();
    let (gm, rp) = (s.eq.eos.g * s.eq.m_plus, s.eq.r_plus);
    let j1 = rel(st.g00[1].interior, 2.0 * gm * ic2 / (rp * rp));
    let j2 = rel(st.g00[2].interior, -4.0 * gm * ic2 / (rp * rp * rp));
    let mode = periodic_mode(&s.spec, 0, 0.0)?;
    let dt = mode.period() / 2000.0;
    let matched = |eps: f64| -> Result<DynamicReport> {
        let cfg = EvolutionConfig { mode: EvolutionMode::Nonlinear, epsilon: eps, snapshot_every: 1, ..Default::default() };
        let states = run(&s.grid, &cfg, mode_initial(&s.grid, &s.spec, &mode, eps), dt, 2000, None)?.snapshots;
        Ok(dynamic_c1_match(&s.eq, &s.grid, EvolutionMode::Nonlinear, &states, 0.1 * rp)?.1)
    };
    let eps = [1e-3, 5e-4, 2.5e-4];
    let reps: Vec<DynamicReport> = eps.iter().map(|&e| matched(e)).collect::<Result<_>>()?;
    let c1 = reps.iter().map(|r| r.max_c1_residual).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = eps.iter().zip(&reps).map(|(e, r)| (e.ln(), r.max_jump.ln())).collect();
    let (slope, _) = line(&pts);
    let zero = vec![0.0; s.grid.size];
    let still: Vec<PerturbationState> = (0..8).map(|k| PerturbationState { t: k as f64 * dt, y: zero.clone(), v: zero.clone() }).collect();
    let static_jump = dynamic_c1_match(&s.eq, &s.grid, EvolutionMode::Linear, &still, 0.1 * rp)?.1.max_jump;
    let ok = st.passed() && j1 < 1e-4 && j2 < 1e-4 && c1 <= 1e-6 && (slope - 2.0).abs() <= 0.1 && static_jump == 0.0
        && reps.iter().all(|r| r.max_jump > 0.0);
    Ok((
        ok,
        format!(
            "static max residual {:.2e} ([g00'] {j1:.1e}, [g00''] {j2:.1e}), dynamic C1 {c1:.2e}, jump exponent {slope:.4}, static jump {static_jump:e}",
            st.max_residual
        ),
    ))
}

fn pipeline(dir: &Path, threads: &str) -> std::io::Result<bool> {
    let status = Command::new(env!("CARGO_BIN_EXE_tovpulse"))
        .args(["all", "--out"])
        .arg(dir)
        .args(["--rho-c", "1e-3,2e-3"])
        .env("TOVPULSE_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .status()?;
    Ok(status.success())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, std::fs::read(&p).unwrap_or_default()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ran = pipeline(&a, "1")? && pipeline(&b, "4")?;
    let (fa, fb) = (files(&a), files(&b));
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let ok = ran && fa.len() == fb.len() && !fa.is_empty() && differing.is_empty();
    Ok((ok, format!("{} files compared across reruns with 1 and 4 threads, {} differ {differing:?}", fa.len(), differing.len())))
}

fn main() {
    let s = match star() {
        Ok(s) => s,
        Err(e) => {
            println!("default star could not be built: {e}");
            std::process::exit(1);
        }
    };
    let criteria: Vec<Criterion> = vec![
        ("TOV centre expansion", Box::new(|| criterion_1(&s))),
        ("surface structure", Box::new(|| criterion_2(&s))),
        ("surface analyticity proxy", Box::new(|| criterion_3(&s))),
        ("Liouville potential limits", Box::new(|| criterion_4(&s))),
        ("spectral oracle and convergence", Box::new(|| criterion_5(&s))),
        ("eigenstructure", Box::new(|| criterion_6(&s))),
        ("linear evolution", Box::new(|| criterion_7(&s))),
        ("epsilon scaling of the defect", Box::new(|| criterion_8(&s))),
        ("Frechet consistency", Box::new(|| criterion_9(&s))),
        ("junction conditions", Box::new(|| criterion_10(&s))),
        ("determinism", Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {}: {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
