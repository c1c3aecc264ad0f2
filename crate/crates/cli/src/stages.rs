use crate::Stage;
use serde_json::{json, Value};
use std::cell::Cell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use tovpulse_core::config::RunConfig;
use tovpulse_core::evolution::{
    build_grid, cauchy_setup, crossing_frequency, mode_initial, run_observed, EvolutionConfig, Grid, PerturbationState,
    Trajectory,
};
use tovpulse_core::io::{self, RunManifest};
use tovpulse_core::matching::{dynamic_c1_match_surface, patched_metric_snapshots, static_c2_check, surface_sample, SurfaceSample};
use tovpulse_core::pulsation::{build_x_chart, liouville_transform, model_spectrum, periodic_mode, solve_spectrum, Spectrum, XChart};
use tovpulse_core::tov::{integrate_outward, surface_exponent_check, Equilibrium};
use tovpulse_core::{Error, Result};

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const SURFACE_CSV: &str = "surface.csv";
pub const SURFACE_HALF_CSV: &str = "surface_half.csv";
pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const CAUCHY_TRAJECTORY_CSV: &str = "cauchy_trajectory.csv";
pub const CAUCHY_INITIAL_CSV: &str = "cauchy_initial.csv";
pub const CAUCHY_MANIFEST_JSON: &str = "cauchy_manifest.json";
pub const MATCHING_JSON: &str = "matching.json";
pub const METRIC_CSV: &str = "metric.csv";

pub fn run_stage(stage: Stage, cfg: &RunConfig, dir: &Path, oracle: bool) -> Result<String> {
    match stage {
        Stage::Tov => tov(cfg, dir),
        Stage::Spectrum => spectrum(cfg, dir, oracle),
        Stage::Evolve => evolve(cfg, dir),
        Stage::Cauchy => cauchy(cfg, dir),
        Stage::Match => matching(cfg, dir),
        Stage::All => {
            let mut out = tov(cfg, dir)?;
            out += &spectrum(cfg, dir, oracle)?;
            out += &evolve(cfg, dir)?;
            out += &cauchy(cfg, dir)?;
            out += &matching(cfg, dir)?;
            Ok(out)
        }
    }
}

fn tov(cfg: &RunConfig, dir: &Path) -> Result<String> {
    let eos = cfg.checked_eos()?;
    let eq = integrate_outward(&eos, cfg.tov.rho_c, &cfg.tov.options())?;
    io::write_equilibrium(dir, &eq)?;
    let fit = surface_exponent_check(&eq)?;
    let mut s = String::new();
    writeln!(s, "tov: rho_c = {:e}", eq.rho_c).ok();
    writeln!(s, "  r_plus = {:.10e}  m_plus = {:.10e}", eq.r_plus, eq.m_plus).ok();
    writeln!(s, "  kappa = {:.10e}  K = {:.10e}", eq.kappa, eq.k_surf).ok();
    writeln!(
        s,
        "  surface density exponent {:.6} (expected {:.6}), amplitude {:.6e} (expected {:.6e})",
        fit.exponent, fit.expected_exponent, fit.amplitude, fit.expected_amplitude
    )
    .ok();
    Ok(s)
}

struct Charts {
    eq: Equilibrium,
    eq_sha: String,
    xc: XChart,
    chart: tovpulse_core::pulsation::LiouvilleChart,
}

fn load_charts(dir: &Path) -> Result<Charts> {
    let (eq, eq_sha) = io::read_equilibrium(dir)?;
    let chart = liouville_transform(&eq)?;
    let xc = build_x_chart(&eq, &chart)?;
    Ok(Charts { eq, eq_sha, xc, chart })
}

fn spectrum(cfg: &RunConfig, dir: &Path, oracle: bool) -> Result<String> {
    let c = load_charts(dir)?;
    let p = &cfg.pulsation;
    let spec = solve_spectrum(&c.xc, p.modes, p.basis_size, p.conv_tol)?;
    io::write_spectrum(dir, &spec, p.conv_tol, &c.eq_sha, p.output_points)?;
    let mut s = String::new();
    writeln!(s, "spectrum: N = {}, xi_plus = {:.10e}, basis {}", spec.n_param, spec.xi_plus, spec.basis_size).ok();
    for (n, (l, conv)) in spec.lambdas.iter().zip(&spec.convergence).enumerate() {
        writeln!(s, "  lambda_{} = {:.12e}  (doubling change {:.2e})", n + 1, l, conv).ok();
    }
    let near = |x: f64| -> Result<(f64, f64)> {
        let cp = c.chart.at_x(x);
        let q = c.chart.q(&c.eq, &cp)?;
        Ok((q * cp.xi * cp.xi, q * cp.xi_rem * cp.xi_rem))
    };
    let g = spec.gamma;
    let (left, _) = near(1e-8)?;
    let (_, right) = near(1.0 - 1e-8)?;
    let expect_right = (g + 1.0) * (3.0 - g) / (4.0 * (g - 1.0) * (g - 1.0));
    writeln!(s, "  q xi^2 -> {left:.6} (expected 2), q (xi_plus - xi)^2 -> {right:.6} (expected {expect_right:.6})").ok();
    if oracle {
        let n = spec.n_param;
        let model = model_spectrum(n, p.basis_size, p.modes)?;
        let err = model
            .iter()
            .enumerate()
            .map(|(k, l)| (l - k as f64 * (k as f64 + 0.5 * (n + 3.0))).abs())
            .fold(0.0f64, f64::max);
        writeln!(s, "  oracle: model eigenvalues {model:?}, max error {err:.2e}").ok();
        if !(err <= 1e-10) {
            return Err(Error::Numerical(format!("model operator oracle failed: max error {err:e}")));
        }
    }
    Ok(s)
}

struct Setup {
    charts: Charts,
    spec: Spectrum,
    spec_sha: String,
    grid: Grid,
}

fn load_setup(cfg: &RunConfig, dir: &Path) -> Result<Setup> {
    let charts = load_charts(dir)?;
    let (spec, spec_sha) = io::read_spectrum(dir, &charts.eq_sha)?;
    let grid = build_grid(&charts.eq, &charts.chart, &charts.xc, cfg.evolution.basis_size)?;
    Ok(Setup { charts, spec, spec_sha, grid })
}

/// Configuration as recorded in manifests.
fn recorded_config(cfg: &RunConfig) -> Result<Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(map) = v.as_object_mut() {
        map.remove("output");
    }
    Ok(v)
}

/// Runs and records the surface series; blow-ups report the last good time.
fn observed_run(
    s: &Setup,
    cfg: &EvolutionConfig,
    initial: PerturbationState,
    dt: f64,
    steps: usize,
    reference: Option<(&Spectrum, &tovpulse_core::pulsation::PeriodicMode)>,
) -> Result<(Trajectory, Vec<SurfaceSample>)> {
    let mut surf = Vec::with_capacity(steps + 1);
    let last = Cell::new(initial.t);
    let traj = run_observed(&s.grid, cfg, initial, dt, steps, reference, |st| {
        surf.push(surface_sample(&s.charts.eq, &s.grid, cfg.mode, st)?);
        last.set(st.t);
        Ok(())
    })
    .map_err(|e| match e {
        Error::Blowup { t, reason } => Error::Blowup { t, reason: format!("{reason}; last good state at t = {:.6e}", last.get()) },
        e => e,
    })?;
    Ok((traj, surf))
}

fn time_grid(cfg: &EvolutionConfig, period: f64) -> (f64, usize) {
    let dt = cfg.dt.unwrap_or(period / cfg.steps_per_period as f64);
    let steps = (cfg.periods * period / dt.abs()).round().max(1.0) as usize;
    (dt, steps)
}

fn energy_drift(t: &Trajectory) -> f64 {
    let e0 = t.samples[0].e_lin;
    let d = t.samples.iter().map(|s| (s.e_lin - e0).abs()).fold(0.0f64, f64::max);
    if e0 > 0.0 {
        d / e0
    } else {
        d
    }
}

fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

fn evolve(cfg: &RunConfig, dir: &Path) -> Result<String> {
    let s = load_setup(cfg, dir)?;
    let ec = &cfg.evolution;
    let mode = periodic_mode(&s.spec, ec.mode_index - 1, ec.theta0)?;
    let (dt, steps) = time_grid(ec, mode.period());
    let eps = ec.epsilon;
    let reference = (eps > 0.0).then_some((&s.spec, &mode));
    let (traj, surf) = observed_run(&s, ec, mode_initial(&s.grid, &s.spec, &mode, eps), dt, steps, reference)?;

    let mut files = BTreeMap::new();
    let mut record = |name: &str| -> Result<()> {
        files.insert(name.to_string(), io::sha256_file(&dir.join(name))?);
        Ok(())
    };
    io::write_trajectory(&dir.join(TRAJECTORY_CSV), &traj.samples)?;
    record(TRAJECTORY_CSV)?;
    io::write_surface(&dir.join(SURFACE_CSV), &surf)?;
    record(SURFACE_CSV)?;
    if ec.snapshot_every > 0 {
        io::write_snapshots(&dir.join(SNAPSHOTS_CSV), &s.grid, &traj.snapshots)?;
        record(SNAPSHOTS_CSV)?;
    }

    let t_end = traj.final_state.t;
    let whole_periods = ((t_end / mode.period()) - (t_end / mode.period()).round()).abs() < 1e-9 && mode.periodic;
    let scale = sup(&traj.initial.y).max(sup(&traj.initial.v));
    let return_error = (whole_periods && scale > 0.0).then(|| {
        let dy = traj.final_state.y.iter().zip(&traj.initial.y).map(|(a, b)| (a - b).abs());
        let dv = traj.final_state.v.iter().zip(&traj.initial.v).map(|(a, b)| (a - b).abs());
        dy.chain(dv).fold(0.0f64, f64::max) / scale
    });
    let times: Vec<f64> = traj.samples.iter().map(|x| x.t).collect();
    let radius: Vec<f64> = traj.samples.iter().map(|x| x.r_plus - s.grid.r_plus).collect();
    let expected = mode.omega() / (2.0 * std::f64::consts::PI);
    let frequency = crossing_frequency(&times, &radius);
    let frequency_error = frequency.map(|f| (f - expected).abs() / expected);
    let drift = energy_drift(&traj);

    let mut text = String::new();
    writeln!(text, "evolve: {:?} mode {} eps = {eps:e}, dt = {dt:.6e}, {steps} steps", ec.mode, ec.mode_index).ok();
    match return_error {
        Some(r) => writeln!(text, "  period return error {r:.3e}").ok(),
        None => writeln!(text, "  period return error not defined for this run").ok(),
    };
    match (frequency, frequency_error) {
        (Some(f), Some(e)) => writeln!(text, "  surface frequency {f:.10e} vs sqrt(lambda)/2pi {expected:.10e}: period error {e:.3e}").ok(),
        _ => writeln!(text, "  surface frequency: too few zero crossings").ok(),
    };
    writeln!(text, "  energy drift {drift:.3e}").ok();

    let mut diagnostics = json!({
        "period": mode.period(),
        "return_error": return_error,
        "frequency": frequency,
        "frequency_expected": expected,
        "frequency_error": frequency_error,
        "energy_drift": drift,
        "defect": traj.defect,
    });
    if ec.mode == tovpulse_core::evolution::EvolutionMode::Nonlinear && eps > 0.0 {
        let half = EvolutionConfig { epsilon: 0.5 * eps, snapshot_every: 0, ..ec.clone() };
        let (traj_h, surf_h) = observed_run(&s, &half, mode_initial(&s.grid, &s.spec, &mode, half.epsilon), dt, steps, Some((&s.spec, &mode)))?;
        io::write_surface(&dir.join(SURFACE_HALF_CSV), &surf_h)?;
        record(SURFACE_HALF_CSV)?;
        let (d, dh) = (traj.defect.unwrap_or(0.0), traj_h.defect.unwrap_or(0.0));
        let ratio = d / dh;
        writeln!(text, "  D(eps) = {d:.6e}, D(eps/2) = {dh:.6e}, ratio {ratio:.4}").ok();
        diagnostics["defect_half"] = json!(dh);
        diagnostics["defect_ratio"] = json!(ratio);
    } else if let Some(d) = traj.defect {
        writeln!(text, "  D(eps) = {d:.6e}").ok();
    }

    let manifest = RunManifest {
        stage: "evolve".into(),
        config: recorded_config(cfg)?,
        equilibrium_sha256: s.charts.eq_sha.clone(),
        spectrum_sha256: s.spec_sha.clone(),
        files,
        dt,
        steps,
        snapshot_every: ec.snapshot_every,
        diagnostics,
        code_version: io::CODE_VERSION.into(),
    };
    io::write_json(&dir.join(io::MANIFEST_JSON), &manifest)?;
    Ok(text)
}

fn cauchy(cfg: &RunConfig, dir: &Path) -> Result<String> {
    let s = load_setup(cfg, dir)?;
    let cc = &cfg.cauchy;
    let spec = &s.spec;
    let combo = |amps: &[f64], x: f64| amps.iter().enumerate().map(|(n, a)| a * spec.psi(n, x)).sum::<f64>();
    let data = cauchy_setup(&s.grid, |x| combo(&cc.psi0, x), |x| combo(&cc.psi1, x), cc.delta)?;
    let mut text = String::new();
    writeln!(text, "cauchy: smallness {:.3e} (bound {:e})", data.smallness, cc.delta).ok();
    if let Some(w) = &data.warning {
        writeln!(text, "  warning: {w}").ok();
    }
    let dev = data.radius_rate.iter().zip(&data.radius_rate_quoted).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    writeln!(text, "  max |dR/dt(0) - quoted form| = {dev:.3e}, max |dR/dt(0)| = {:.3e}", sup(&data.radius_rate)).ok();
    let rows: Vec<Vec<f64>> =
        (0..s.grid.size).map(|k| vec![data.r[k], data.radius[k], data.radius_rate[k], data.radius_rate_quoted[k]]).collect();
    io::write_csv(&dir.join(CAUCHY_INITIAL_CSV), &["r", "R", "R_t", "R_t_quoted"], &rows)?;

    let ec = &cfg.evolution;
    let mode = periodic_mode(spec, 0, 0.0)?;
    let (dt, steps) = time_grid(ec, mode.period());
    let run_cfg = EvolutionConfig { snapshot_every: 0, ..ec.clone() };
    let (traj, _) = observed_run(&s, &run_cfg, data.state.clone(), dt, steps, None)?;
    io::write_trajectory(&dir.join(CAUCHY_TRAJECTORY_CSV), &traj.samples)?;
    let static_run = traj.samples.iter().all(|x| x.sup_y == 0.0 && x.sup_v == 0.0);
    let max_y = traj.samples.iter().map(|x| x.sup_y).fold(0.0f64, f64::max);
    writeln!(text, "  {:?} run of {steps} steps: max sup|y| = {max_y:.3e}, energy drift {:.3e}", ec.mode, energy_drift(&traj)).ok();
    if static_run {
        writeln!(text, "  static trajectory: y and v vanish identically").ok();
    }
    let mut files = BTreeMap::new();
    for name in [CAUCHY_INITIAL_CSV, CAUCHY_TRAJECTORY_CSV] {
        files.insert(name.to_string(), io::sha256_file(&dir.join(name))?);
    }
    let manifest = RunManifest {
        stage: "cauchy".into(),
        config: recorded_config(cfg)?,
        equilibrium_sha256: s.charts.eq_sha.clone(),
        spectrum_sha256: s.spec_sha.clone(),
        files,
        dt,
        steps,
        snapshot_every: 0,
        diagnostics: json!({
            "smallness": data.smallness,
            "warning": data.warning,
            "radius_rate_deviation": dev,
            "max_sup_y": max_y,
            "static": static_run,
        }),
        code_version: io::CODE_VERSION.into(),
    };
    io::write_json(&dir.join(CAUCHY_MANIFEST_JSON), &manifest)?;
    Ok(text)
}

fn matching(cfg: &RunConfig, dir: &Path) -> Result<String> {
    let (manifest, manifest_sha) = io::read_manifest(dir)?;
    if manifest.stage != "evolve" {
        return Err(Error::Config(format!("{} does not describe an evolution run", io::MANIFEST_JSON)));
    }
    let charts = load_charts(dir)?;
    let eq = &charts.eq;
    let mc = &cfg.matching;
    let stat = static_c2_check(eq, mc.static_tolerance)?;
    let delta_cut = mc.delta_cut_frac * eq.r_plus;
    let surf = io::read_surface(&dir.join(SURFACE_CSV))?;
    let (chart, rep) = dynamic_c1_match_surface(eq, &surf, delta_cut)?;
    let half = if manifest.files.contains_key(SURFACE_HALF_CSV) {
        Some(dynamic_c1_match_surface(eq, &io::read_surface(&dir.join(SURFACE_HALF_CSV))?, delta_cut)?.1)
    } else {
        None
    };
    let eps = manifest.config["evolution"]["epsilon"].as_f64().unwrap_or(0.0);
    let scaling = half.as_ref().map(|h| {
        let exponent = (rep.max_jump / h.max_jump).log2();
        json!({ "epsilon": [eps, 0.5 * eps], "max_jump": [rep.max_jump, h.max_jump], "exponent": exponent })
    });

    let basis = manifest.config["evolution"]["basis_size"].as_u64().unwrap_or(cfg.evolution.basis_size as u64) as usize;
    let mut metric = Vec::new();
    if manifest.files.contains_key(SNAPSHOTS_CSV) {
        let grid = build_grid(eq, &charts.chart, &charts.xc, basis)?;
        let snaps = io::read_snapshots(&dir.join(SNAPSHOTS_CSV), grid.size)?;
        metric = patched_metric_snapshots(eq, &grid, &chart, &snaps, manifest.snapshot_every)?;
    } else {
        for i in (0..chart.t.len()).step_by(100) {
            for k in 0..=24 {
                metric.push(chart.exterior(eq, i, eq.r_plus + delta_cut * k as f64 / 8.0));
            }
        }
    }
    io::write_metric(&dir.join(METRIC_CSV), &metric)?;

    let stride = if manifest.snapshot_every > 0 { manifest.snapshot_every } else { 100 };
    let c1_passed = rep.max_c1_residual <= mc.c1_tolerance;
    let report = json!({
        "equilibrium_sha256": charts.eq_sha,
        "manifest_sha256": manifest_sha,
        "tolerances": { "static": mc.static_tolerance, "c1": mc.c1_tolerance },
        "delta_cut": delta_cut,
        "static": stat,
        "static_passed": stat.passed(),
        "dynamic": {
            "max_c1_residual": rep.max_c1_residual,
            "max_jump": rep.max_jump,
            "max_jump_formula_error": rep.max_jump_formula_error,
            "min_abs_determinant": rep.min_abs_determinant,
            "max_determinant_deviation": rep.max_determinant_deviation,
            "route_agreement": rep.route_agreement,
            "c1_passed": c1_passed,
        },
        "jump_scaling": scaling,
        "samples": rep.samples.iter().step_by(stride).collect::<Vec<_>>(),
        "metric_csv_sha256": io::sha256_file(&dir.join(METRIC_CSV))?,
        "code_version": io::CODE_VERSION,
    });
    io::write_json(&dir.join(MATCHING_JSON), &report)?;

    let mut text = String::new();
    writeln!(text, "match: static C2 max residual {:.3e} (tolerance {:e})", stat.max_residual, mc.static_tolerance).ok();
    writeln!(
        text,
        "  [g00'] = {:.10e}, [g00''] = {:.10e}",
        stat.g00[1].interior, stat.g00[2].interior
    )
    .ok();
    writeln!(text, "  dynamic C1 max residual {:.3e} (tolerance {:e})", rep.max_c1_residual, mc.c1_tolerance).ok();
    if rep.max_jump == 0.0 {
        writeln!(text, "  jump A vanishes identically").ok();
    } else {
        writeln!(text, "  max |A| = {:.6e}", rep.max_jump).ok();
    }
    if let (Some(h), Some(sc)) = (&half, &scaling) {
        writeln!(text, "  max |A| at eps/2 = {:.6e}, fitted exponent {:.4}", h.max_jump, sc["exponent"].as_f64().unwrap_or(f64::NAN)).ok();
    }
    if !stat.passed() {
        return Err(Error::Matching(format!("static C2 residual {:e} exceeds {:e}", stat.max_residual, mc.static_tolerance)));
    }
    if !c1_passed {
        return Err(Error::Matching(format!("dynamic C1 residual {:e} exceeds {:e}", rep.max_c1_residual, mc.c1_tolerance)));
    }
    Ok(text)
}
