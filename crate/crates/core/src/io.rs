//! Files exchanged between pipeline stages.
//!
//! Numeric tables are CSV with 16 significant digits; metadata is JSON. Every downstream
//! file records the SHA-256 of the upstream files it was built from, and readers refuse
//! inputs whose digest no longer matches.

use crate::eos::{EosKind, EosModel};
use crate::error::{Error, Result};
use crate::evolution::{EnergySample, Grid, PerturbationState};
use crate::matching::{MetricRow, SurfaceSample};
use crate::pulsation::Spectrum;
use crate::tov::{Equilibrium, TovOptions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EQUILIBRIUM_CSV: &str = "equilibrium.csv";
pub const EQUILIBRIUM_JSON: &str = "equilibrium.json";
pub const SPECTRUM_JSON: &str = "spectrum.json";
pub const SPECTRUM_CSV: &str = "spectrum_psi.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Fails with `HashMismatch` unless `path` has digest `expected`.
pub fn verify_hash(path: &Path, expected: &str) -> Result<()> {
    let found = sha256_file(path)?;
    if found != expected {
        return Err(Error::HashMismatch { file: path.display().to_string(), expected: expected.into(), found });
    }
    Ok(())
}

/// 16 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.15e}")
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_num(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a numeric table whose header must equal `header`.
pub fn read_csv<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found.len() != header.len() || found.iter().zip(header).any(|(a, b)| a != b.as_ref()) {
        return Err(Error::Config(format!("{}: unexpected columns {found:?}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Config(format!("{}: bad number {f:?}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumMeta {
    pub r_plus: f64,
    pub m_plus: f64,
    pub kappa: f64,
    #[serde(rename = "K")]
    pub k_surf: f64,
    pub rho_c: f64,
    pub gamma: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub cap_b: f64,
    #[serde(rename = "G")]
    pub g: f64,
    /// Absent for c = ∞.
    pub c: Option<f64>,
    pub eos_kind: EosKind,
    pub k_fermi: f64,
    pub tolerances: TovOptions,
    pub code_version: String,
    pub csv_sha256: String,
}

const EQ_COLUMNS: [&str; 7] = ["r", "m", "rho", "P", "u", "F", "H"];

/// Writes the equilibrium table and its sidecar into `dir`.
pub fn write_equilibrium(dir: &Path, eq: &Equilibrium) -> Result<EquilibriumMeta> {
    let csv_path = dir.join(EQUILIBRIUM_CSV);
    let rows: Vec<Vec<f64>> = (0..eq.grid_r.len())
        .map(|j| vec![eq.grid_r[j], eq.m[j], eq.rho[j], eq.p[j], eq.u[j], eq.f[j], eq.h[j]])
        .collect();
    write_csv(&csv_path, &EQ_COLUMNS, &rows)?;
    let e = &eq.eos;
    let meta = EquilibriumMeta {
        r_plus: eq.r_plus,
        m_plus: eq.m_plus,
        kappa: eq.kappa,
        k_surf: eq.k_surf,
        rho_c: eq.rho_c,
        gamma: e.gamma,
        a: e.a,
        cap_b: e.cap_b,
        g: e.g,
        c: e.c.is_finite().then_some(e.c),
        eos_kind: e.kind,
        k_fermi: e.k_fermi,
        tolerances: eq.options,
        code_version: CODE_VERSION.into(),
        csv_sha256: sha256_file(&csv_path)?,
    };
    write_json(&dir.join(EQUILIBRIUM_JSON), &meta)?;
    Ok(meta)
}

/// Reloads the equilibrium in `dir`; returns it with the digest of its sidecar.
pub fn read_equilibrium(dir: &Path) -> Result<(Equilibrium, String)> {
    let json_path = dir.join(EQUILIBRIUM_JSON);
    let meta: EquilibriumMeta = read_json(&json_path)?;
    let csv_path = dir.join(EQUILIBRIUM_CSV);
    verify_hash(&csv_path, &meta.csv_sha256)?;
    let rows = read_csv(&csv_path, &EQ_COLUMNS)?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let eos = EosModel {
        kind: meta.eos_kind,
        a: meta.a,
        gamma: meta.gamma,
        c: meta.c.unwrap_or(f64::INFINITY),
        g: meta.g,
        cap_b: meta.cap_b,
        k_fermi: meta.k_fermi,
    };
    let eq = Equilibrium::from_grid(eos, meta.tolerances, meta.rho_c, col(0), col(1), col(4))?;
    Ok((eq, sha256_file(&json_path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTolerances {
    pub conv_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n_param: f64,
    pub xi_plus: f64,
    pub lambdas: Vec<f64>,
    pub endpoint_constants: Vec<[f64; 2]>,
    pub basis_size: usize,
    pub tolerances: SpectrumTolerances,
    pub convergence: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub equilibrium_sha256: String,
    pub psi_csv_sha256: String,
    pub code_version: String,
}

/// Writes the spectrum and ψₙ on `points` uniform x-values.
pub fn write_spectrum(dir: &Path, spec: &Spectrum, conv_tol: f64, equilibrium_sha256: &str, points: usize) -> Result<SpectrumMeta> {
    let csv_path = dir.join(SPECTRUM_CSV);
    let n = spec.lambdas.len();
    let mut header = vec!["x".to_string()];
    header.extend((1..=n).map(|k| format!("psi_{k}")));
    let rows: Vec<Vec<f64>> = (0..points)
        .map(|i| {
            let x = i as f64 / (points - 1) as f64;
            std::iter::once(x).chain((0..n).map(|k| spec.psi(k, x))).collect()
        })
        .collect();
    write_csv(&csv_path, &header, &rows)?;
    let meta = SpectrumMeta {
        gamma: spec.gamma,
        n_param: spec.n_param,
        xi_plus: spec.xi_plus,
        lambdas: spec.lambdas.clone(),
        endpoint_constants: spec.endpoint_constants.clone(),
        basis_size: spec.basis_size,
        tolerances: SpectrumTolerances { conv_tol },
        convergence: spec.convergence.clone(),
        coeffs: spec.coeffs.clone(),
        equilibrium_sha256: equilibrium_sha256.into(),
        psi_csv_sha256: sha256_file(&csv_path)?,
        code_version: CODE_VERSION.into(),
    };
    write_json(&dir.join(SPECTRUM_JSON), &meta)?;
    Ok(meta)
}

/// Reloads the spectrum in `dir`, checking it was built from the equilibrium with digest
/// `equilibrium_sha256`; returns it with the digest of its JSON file.
pub fn read_spectrum(dir: &Path, equilibrium_sha256: &str) -> Result<(Spectrum, String)> {
    let json_path = dir.join(SPECTRUM_JSON);
    let meta: SpectrumMeta = read_json(&json_path)?;
    if meta.equilibrium_sha256 != equilibrium_sha256 {
        return Err(Error::HashMismatch {
            file: dir.join(EQUILIBRIUM_JSON).display().to_string(),
            expected: meta.equilibrium_sha256,
            found: equilibrium_sha256.into(),
        });
    }
    verify_hash(&dir.join(SPECTRUM_CSV), &meta.psi_csv_sha256)?;
    let spec = Spectrum {
        gamma: meta.gamma,
        n_param: meta.n_param,
        xi_plus: meta.xi_plus,
        basis_size: meta.basis_size,
        lambdas: meta.lambdas,
        convergence: meta.convergence,
        coeffs: meta.coeffs,
        endpoint_constants: meta.endpoint_constants,
    };
    Ok((spec, sha256_file(&json_path)?))
}

const TRAJECTORY_COLUMNS: [&str; 5] = ["t", "E_lin", "R_plus", "sup_abs_y", "sup_abs_v"];
const SURFACE_COLUMNS: [&str; 10] = ["t", "R", "R_r", "R_rr", "V", "V_r", "R_t", "V_t", "R_rt", "u_r"];
const SNAPSHOT_COLUMNS: [&str; 5] = ["t", "x", "r", "y", "v"];
const METRIC_COLUMNS: [&str; 6] = ["t", "r", "g00", "g01", "g11", "g22"];

pub fn write_trajectory(path: &Path, samples: &[EnergySample]) -> Result<()> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.t, s.e_lin, s.r_plus, s.sup_y, s.sup_v]).collect();
    write_csv(path, &TRAJECTORY_COLUMNS, &rows)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<EnergySample>> {
    Ok(read_csv(path, &TRAJECTORY_COLUMNS)?
        .into_iter()
        .map(|r| EnergySample { t: r[0], e_lin: r[1], r_plus: r[2], sup_y: r[3], sup_v: r[4] })
        .collect())
}

pub fn write_surface(path: &Path, samples: &[SurfaceSample]) -> Result<()> {
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| vec![s.t, s.r, s.r_r, s.r_rr, s.v, s.v_r, s.r_t, s.v_t, s.r_rt, s.u_r])
        .collect();
    write_csv(path, &SURFACE_COLUMNS, &rows)
}

pub fn read_surface(path: &Path) -> Result<Vec<SurfaceSample>> {
    Ok(read_csv(path, &SURFACE_COLUMNS)?
        .into_iter()
        .map(|r| SurfaceSample { t: r[0], r: r[1], r_r: r[2], r_rr: r[3], v: r[4], v_r: r[5], r_t: r[6], v_t: r[7], r_rt: r[8], u_r: r[9] })
        .collect())
}

/// One row per state and node.
pub fn write_snapshots(path: &Path, grid: &Grid, snapshots: &[PerturbationState]) -> Result<()> {
    let mut rows = Vec::with_capacity(snapshots.len() * grid.size);
    for s in snapshots {
        for k in 0..grid.size {
            rows.push(vec![s.t, grid.x[k], grid.r[k], s.y[k], s.v[k]]);
        }
    }
    write_csv(path, &SNAPSHOT_COLUMNS, &rows)
}

pub fn read_snapshots(path: &Path, size: usize) -> Result<Vec<PerturbationState>> {
    let rows = read_csv(path, &SNAPSHOT_COLUMNS)?;
    if size == 0 || rows.len() % size != 0 {
        return Err(Error::Config(format!("{}: {} rows do not fill states of {size} nodes", path.display(), rows.len())));
    }
    Ok(rows
        .chunks(size)
        .map(|c| PerturbationState { t: c[0][0], y: c.iter().map(|r| r[3]).collect(), v: c.iter().map(|r| r[4]).collect() })
        .collect())
}

pub fn write_metric(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let rows: Vec<Vec<f64>> = rows.iter().map(|m| vec![m.t, m.r, m.g00, m.g01, m.g11, m.g22]).collect();
    write_csv(path, &METRIC_COLUMNS, &rows)
}

/// Record of one evolution run and the digests of everything it read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    /// Stage configuration without the output section.
    pub config: serde_json::Value,
    pub equilibrium_sha256: String,
    pub spectrum_sha256: String,
    /// Output file name to digest.
    pub files: BTreeMap<String, String>,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub diagnostics: serde_json::Value,
    pub code_version: String,
}

/// Reads the manifest in `dir` and checks every digest it names against the files present.
pub fn read_manifest(dir: &Path) -> Result<(RunManifest, String)> {
    let path = dir.join(MANIFEST_JSON);
    let m: RunManifest = read_json(&path)?;
    verify_hash(&dir.join(EQUILIBRIUM_JSON), &m.equilibrium_sha256)?;
    verify_hash(&dir.join(SPECTRUM_JSON), &m.spectrum_sha256)?;
    for (name, digest) in &m.files {
        verify_hash(&dir.join(name), digest)?;
    }
    Ok((m, sha256_file(&path)?))
}
