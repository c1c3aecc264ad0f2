//! Run configuration read from TOML.

use crate::eos::{EosKind, EosModel};
use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, EvolutionMode};
use crate::tov::TovOptions;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EosConfig {
    pub kind: EosKind,
    #[serde(rename = "A")]
    pub a: f64,
    pub gamma: f64,
    /// Cap coefficient b; absent selects 2Aγ/c².
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap_b: Option<f64>,
    /// Coefficient of the neutron Fermi gas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_fermi: Option<f64>,
    pub c: f64,
    #[serde(rename = "G")]
    pub g: f64,
    /// Upper end of the density range on which the assumptions are checked.
    pub rho_max: f64,
}

impl Default for EosConfig {
    fn default() -> Self {
        Self { kind: EosKind::CappedPolytrope, a: 1.0, gamma: 1.5, cap_b: None, k_fermi: None, c: 1.0, g: 1.0, rho_max: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TovConfig {
    pub rho_c: f64,
    /// Central densities for a sweep; empty runs `rho_c` alone.
    pub sweep: Vec<f64>,
    pub rtol: f64,
    pub atol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub u_switch_frac: f64,
    pub grid_points: usize,
    pub r_max_factor: f64,
    pub cheb_chop: f64,
}

impl Default for TovConfig {
    fn default() -> Self {
        let o = TovOptions::default();
        Self {
            rho_c: 1e-3,
            sweep: Vec::new(),
            rtol: o.rtol,
            atol: o.atol,
            delta: o.delta,
            u_switch_frac: o.u_switch_frac,
            grid_points: o.grid_points,
            r_max_factor: o.r_max_factor,
            cheb_chop: o.cheb_chop,
        }
    }
}

impl TovConfig {
    pub fn options(&self) -> TovOptions {
        TovOptions {
            rtol: self.rtol,
            atol: self.atol,
            delta: self.delta,
            u_switch_frac: self.u_switch_frac,
            grid_points: self.grid_points,
            r_max_factor: self.r_max_factor,
            cheb_chop: self.cheb_chop,
        }
    }

    pub fn densities(&self) -> Vec<f64> {
        if self.sweep.is_empty() {
            vec![self.rho_c]
        } else {
            self.sweep.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsationConfig {
    pub modes: usize,
    pub basis_size: usize,
    /// Bound on the relative eigenvalue change under basis doubling.
    pub conv_tol: f64,
    /// Points of the uniform x-grid for the eigenfunction table.
    pub output_points: usize,
}

impl Default for PulsationConfig {
    fn default() -> Self {
        Self { modes: 4, basis_size: 64, conv_tol: 1e-6, output_points: 201 }
    }
}

/// Initial data ψ₀ = Σ aₙψₙ, ψ₁ = Σ bₙψₙ in eigenfunctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CauchyConfig {
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
    /// Smallness bound; larger data only raise a warning.
    pub delta: f64,
}

impl Default for CauchyConfig {
    fn default() -> Self {
        Self { psi0: Vec::new(), psi1: Vec::new(), delta: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    /// Cutoff width as a fraction of r₊.
    pub delta_cut_frac: f64,
    pub static_tolerance: f64,
    pub c1_tolerance: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self { delta_cut_frac: 0.1, static_tolerance: 1e-4, c1_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub eos: EosConfig,
    pub tov: TovConfig,
    pub pulsation: PulsationConfig,
    pub evolution: EvolutionConfig,
    pub cauchy: CauchyConfig,
    pub matching: MatchingConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eos: EosConfig::default(),
            tov: TovConfig::default(),
            pulsation: PulsationConfig::default(),
            evolution: EvolutionConfig { mode: EvolutionMode::Nonlinear, snapshot_every: 100, ..EvolutionConfig::default() },
            cauchy: CauchyConfig::default(),
            matching: MatchingConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tov.rtol", self.tov.rtol),
            ("tov.atol", self.tov.atol),
            ("tov.cheb_chop", self.tov.cheb_chop),
            ("pulsation.conv_tol", self.pulsation.conv_tol),
            ("cauchy.delta", self.cauchy.delta),
            ("matching.static_tolerance", self.matching.static_tolerance),
            ("matching.c1_tolerance", self.matching.c1_tolerance),
            ("matching.delta_cut_frac", self.matching.delta_cut_frac),
            ("eos.rho_max", self.eos.rho_max),
            ("eos.c", self.eos.c),
            ("eos.G", self.eos.g),
            ("eos.A", self.eos.a),
            ("evolution.periods", self.evolution.periods),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return config_err(format!("{name} must be positive, got {v}"));
            }
        }
        for (i, &r) in self.tov.densities().iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return config_err(format!("central density {i} must be positive and finite, got {r}"));
            }
        }
        if let Some(dt) = self.evolution.dt {
            if !(dt != 0.0 && dt.is_finite()) {
                return config_err(format!("evolution.dt must be non-zero, got {dt}"));
            }
        }
        if !(self.evolution.epsilon >= 0.0) || !(self.evolution.filter_strength >= 0.0) {
            return config_err("evolution.epsilon and evolution.filter_strength must be non-negative");
        }
        if self.pulsation.modes == 0 || self.evolution.mode_index == 0 || self.evolution.mode_index > self.pulsation.modes {
            return config_err(format!(
                "need 1 <= evolution.mode_index <= pulsation.modes, got {} and {}",
                self.evolution.mode_index, self.pulsation.modes
            ));
        }
        if self.evolution.steps_per_period == 0 || self.pulsation.output_points < 2 {
            return config_err("evolution.steps_per_period and pulsation.output_points must be at least 1 and 2");
        }
        if self.cauchy.psi0.len() > self.pulsation.modes || self.cauchy.psi1.len() > self.pulsation.modes {
            return config_err("cauchy amplitudes exceed the number of computed modes");
        }
        if self.eos.kind == EosKind::NeutronFermiGas && !self.eos.k_fermi.is_some_and(|k| k > 0.0) {
            return config_err("eos.k_fermi must be positive for the neutron Fermi gas");
        }
        Ok(())
    }

    pub fn eos_model(&self) -> EosModel {
        let e = &self.eos;
        match e.kind {
            EosKind::CappedPolytrope => EosModel::capped_polytrope(e.a, e.gamma, e.cap_b, e.c, e.g),
            EosKind::NeutronFermiGas => EosModel::neutron_fermi_gas(e.k_fermi.unwrap_or(0.0), e.c, e.g),
        }
    }

    /// The equation of state after checking all assumptions on (0, rho_max].
    pub fn checked_eos(&self) -> Result<EosModel> {
        let eos = self.eos_model();
        let rho_max = self.tov.densities().into_iter().fold(self.eos.rho_max, f64::max);
        let report = eos.validate_assumptions(rho_max);
        if !report.all_pass() {
            return Err(Error::Domain(report.failures.join("; ")));
        }
        Ok(eos)
    }
}
