use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tovpulse(args: &[&str], dir: &Path, config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tovpulse"));
    cmd.args(args).arg("--out").arg(dir);
    if let Some(text) = config {
        let path = dir.with_extension("toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

const LINEAR: &str = "[evolution]\nmode = \"linear\"\n";

#[test]
fn default_tov_writes_one_file_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = tovpulse(&["tov"], &dir, None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(names(&dir), ["equilibrium.csv", "equilibrium.json"]);
    let out = stdout(&o);
    assert!(out.contains("r_plus = 1.1305143") && out.contains("kappa = 9.18031"), "{out}");
    let meta = json(dir.join("equilibrium.json"));
    for key in ["r_plus", "m_plus", "kappa", "K", "rho_c", "gamma", "A", "cap_b", "G", "c", "tolerances", "code_version"] {
        assert!(meta.get(key).is_some(), "{key}");
    }
    let head = std::fs::read_to_string(dir.join("equilibrium.csv")).unwrap();
    assert!(head.starts_with("r,m,rho,P,u,F,H\n"));
}

#[test]
fn five_thirds_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tovpulse(&["tov"], &tmp.path().join("g"), Some("[eos]\ngamma = 1.6666666666666667\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("integral index violated"), "{}", stderr(&o));
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let values = "1e-4,2e-4,3e-4,5e-4,7e-4,1e-3,2e-3,3e-3,5e-3,7e-3";
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(format!("t{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_tovpulse"))
            .args(["tov", "--rho-c", values, "--out"])
            .arg(&dir)
            .env("TOVPULSE_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push((dir, stdout(&o)));
    }
    let subdirs = names(&runs[0].0);
    assert_eq!(subdirs.len(), 10);
    for sub in &subdirs {
        assert_eq!(names(&runs[0].0.join(sub)).len(), 2);
        for f in ["equilibrium.csv", "equilibrium.json"] {
            assert_eq!(std::fs::read(runs[0].0.join(sub).join(f)).unwrap(), std::fs::read(runs[1].0.join(sub).join(f)).unwrap());
        }
    }
    // Radii decrease with central density on this branch.
    let r: Vec<f64> = subdirs.iter().map(|s| json(runs[0].0.join(s).join("equilibrium.json"))["r_plus"].as_f64().unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tovpulse")).args(["tov", "--out"]).arg(tmp.path()).env("TOVPULSE_THREADS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn lambdas(out: &str) -> Vec<f64> {
    out.lines()
        .filter(|l| l.trim_start().starts_with("lambda_"))
        .map(|l| l.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn spectrum_with_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    assert!(tovpulse(&["tov"], &dir, None).status.success());
    let o = tovpulse(&["spectrum", "--modes", "4", "--oracle"], &dir, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let l = lambdas(&out);
    assert_eq!(l.len(), 4);
    assert!(l.windows(2).all(|w| w[1] > w[0]) && l[0] > 0.0);
    assert!(out.contains("oracle: model eigenvalues"), "{out}");
    let meta = json(dir.join("spectrum.json"));
    assert!(meta["convergence"][0].as_f64().unwrap() < 1e-8);
    assert_eq!(meta["N"].as_f64(), Some(6.0));
    let psi = std::fs::read_to_string(dir.join("spectrum_psi.csv")).unwrap();
    assert!(psi.starts_with("x,psi_1,psi_2,psi_3,psi_4\n"));
    assert_eq!(psi.lines().count(), 202);
}

#[test]
fn unconverged_spectrum_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    assert!(tovpulse(&["tov"], &dir, None).status.success());
    let o = tovpulse(&["spectrum"], &dir, Some("[pulsation]\nbasis_size = 12\nconv_tol = 1e-12\n"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("not converged"));
}

#[test]
fn linear_evolution_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("e");
    let cfg = format!("{LINEAR}theta0 = 0.3\n");
    for stage in ["tov", "spectrum", "evolve"] {
        let o = tovpulse(&[stage], &dir, Some(&cfg));
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let m = json(dir.join("manifest.json"));
    let d = &m["diagnostics"];
    assert!(d["frequency_error"].as_f64().unwrap() < 1e-3);
    assert!(d["return_error"].as_f64().unwrap() < 1e-6);
    assert!(d["energy_drift"].as_f64().unwrap() <= 1e-8);
    assert!(m["config"].get("output").is_none());
    assert_eq!(m["files"].as_object().unwrap().len(), 2);
}

#[test]
fn tampered_equilibrium_aborts_evolution() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("h");
    for stage in ["tov", "spectrum"] {
        assert!(tovpulse(&[stage], &dir, None).status.success());
    }
    let path = dir.join("equilibrium.csv");
    let text = std::fs::read_to_string(&path).unwrap().replacen("e-", "e-0", 1);
    std::fs::write(&path, text).unwrap();
    let o = tovpulse(&["evolve"], &dir, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hash mismatch"), "{}", stderr(&o));
}

#[test]
fn match_needs_a_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("m");
    assert!(tovpulse(&["tov"], &dir, None).status.success());
    assert_eq!(tovpulse(&["match"], &dir, None).status.code(), Some(2));
}

#[test]
fn large_amplitude_blows_up() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("b");
    let o = tovpulse(&["all", "--epsilon", "0.3"], &dir, None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("last good state at t ="), "{}", stderr(&o));
}

#[test]
fn static_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("z");
    let o = tovpulse(&["all", "--epsilon", "0"], &dir, Some(LINEAR));
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("static trajectory: y and v vanish identically"), "{out}");
    assert!(out.contains("jump A vanishes identically"), "{out}");
    let rep = json(dir.join("matching.json"));
    assert_eq!(rep["dynamic"]["max_jump"].as_f64(), Some(0.0));
    // The pointwise nonlinear system holds the equilibrium to its discretization residual.
    let dir = tmp.path().join("zn");
    let o = tovpulse(&["all"], &dir, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = json(dir.join("cauchy_manifest.json"));
    assert!(c["diagnostics"]["max_sup_y"].as_f64().unwrap() < 1e-10);
}

#[test]
fn cauchy_data_from_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("c");
    let cfg = "[cauchy]\npsi0 = [0.0, 1e-4]\npsi1 = [1e-6]\ndelta = 1e-5\n";
    let o = tovpulse(&["all"], &dir, Some(cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("warning: initial data of size"));
    let c = json(dir.join("cauchy_manifest.json"));
    assert_eq!(c["diagnostics"]["static"].as_bool(), Some(false));
    let init = std::fs::read_to_string(dir.join("cauchy_initial.csv")).unwrap();
    assert!(init.starts_with("r,R,R_t,R_t_quoted\n"));
}

/// Checks `value` against the subset of JSON Schema used by the bundled schema.
fn validate(schema: &Value, root: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let target = r.trim_start_matches("#/").split('/').fold(root, |s, k| &s[k]);
        return validate(target, root, value, path, errors);
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !ok {
            errors.push(format!("{path}: expected {types:?}, got {value}"));
            return;
        }
    }
    if let Some(x) = value.as_f64() {
        if let Some(m) = schema.get("minimum").and_then(Value::as_f64) {
            if x < m {
                errors.push(format!("{path}: {x} < {m}"));
            }
        }
        if let Some(m) = schema.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                errors.push(format!("{path}: {x} <= {m}"));
            }
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                errors.push(format!("{path}: missing {key}"));
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (k, sub) in props {
                if let Some(v) = obj.get(k) {
                    validate(sub, root, v, &format!("{path}.{k}"), errors);
                }
            }
        }
    }
    if let Some(items) = value.as_array() {
        let n = items.len() as u64;
        if schema.get("minItems").and_then(Value::as_u64).is_some_and(|m| n < m) || schema.get("maxItems").and_then(Value::as_u64).is_some_and(|m| n > m) {
            errors.push(format!("{path}: {n} items out of range"));
        }
        if let Some(sub) = schema.get("items") {
            for (i, v) in items.iter().enumerate() {
                validate(sub, root, v, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

#[test]
fn matching_report_follows_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/matching.schema.json")).unwrap();
    let mut errors = Vec::new();
    validate(&schema, &schema, &serde_json::json!({ "static_passed": 1 }), "$", &mut errors);
    assert!(errors.iter().any(|e| e.contains("missing equilibrium_sha256")) && errors.iter().any(|e| e.contains("static_passed")));

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let o = tovpulse(&["all"], &dir, None);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("ratio") && out.contains("fitted exponent"), "{out}");
    let rep = json(dir.join("matching.json"));
    let mut errors = Vec::new();
    validate(&schema, &schema, &rep, "$", &mut errors);
    assert!(errors.is_empty(), "{errors:?}");
    let exponent = rep["jump_scaling"]["exponent"].as_f64().unwrap();
    assert!((exponent - 2.0).abs() < 0.1, "{exponent}");
    assert_eq!(rep["dynamic"]["c1_passed"].as_bool(), Some(true));
    let metric = std::fs::read_to_string(dir.join("metric.csv")).unwrap();
    assert!(metric.starts_with("t,r,g00,g01,g11,g22\n"));
    // Rerunning the match stage reproduces its outputs byte for byte.
    let before = (std::fs::read(dir.join("matching.json")).unwrap(), std::fs::read(dir.join("metric.csv")).unwrap());
    assert!(tovpulse(&["match"], &dir, None).status.success());
    assert_eq!(before.0, std::fs::read(dir.join("matching.json")).unwrap());
    assert_eq!(before.1, std::fs::read(dir.join("metric.csv")).unwrap());
}

#[test]
fn linear_run_does_not_satisfy_the_dynamic_junction() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("l");
    let o = tovpulse(&["all"], &dir, Some(LINEAR));
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("dynamic C1 residual"));
    assert!(dir.join("matching.json").exists());
}

#[test]
fn bundled_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = tovpulse_core::config::RunConfig::load(&path).unwrap();
    assert_eq!(cfg, tovpulse_core::config::RunConfig::default());
}
