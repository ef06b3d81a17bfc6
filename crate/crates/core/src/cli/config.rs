//! JSON configuration with built-in defaults and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimates::LabParams;
use crate::integrate::Tolerances;
use crate::lindblad::EvolveOptions;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub solver: SolverConfig,
    pub fig3: Fig3Config,
    pub fig4: Fig4Config,
    pub fig5: Fig5Config,
    pub estimate: EstimateConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub psd_checkpoints: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, psd_checkpoints: 10 }
    }
}

impl SolverConfig {
    pub fn options(&self, samples: usize) -> EvolveOptions {
        EvolveOptions {
            tolerances: Tolerances { rtol: self.rtol, atol: self.atol, ..Default::default() },
            samples,
            psd_checkpoints: self.psd_checkpoints,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Exact master equation up to `exact_max_dim`, moments beyond.
    Auto,
    Exact,
    Moments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Config {
    pub g: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "Gamma_s")]
    pub gamma_s: f64,
    #[serde(rename = "trajectory_N")]
    pub trajectory_n: Vec<u32>,
    pub t_final: f64,
    pub samples: usize,
    pub solver: SolverChoice,
    /// Largest single-node basis solved exactly under `auto`.
    pub exact_max_dim: usize,
    #[serde(rename = "scaling_Gamma_s")]
    pub scaling_gamma_s: f64,
    #[serde(rename = "scaling_N")]
    pub scaling_n: Vec<u32>,
    #[serde(rename = "scaling_Delta")]
    pub scaling_delta: Vec<f64>,
    #[serde(rename = "scaling_Delta_N")]
    pub scaling_delta_n: u32,
    /// Scaling runs last this many predicted decay times.
    pub decay_times: f64,
    #[serde(rename = "cross_check_N")]
    pub cross_check_n: u32,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            g: 1.0,
            delta: 10.0,
            gamma_s: 0.1,
            trajectory_n: vec![2, 10, 100],
            t_final: 300.0,
            samples: 3000,
            solver: SolverChoice::Auto,
            exact_max_dim: 120,
            scaling_gamma_s: 0.01,
            scaling_n: vec![20, 50, 100, 200],
            scaling_delta: vec![8.0, 10.0, 14.0, 20.0],
            scaling_delta_n: 100,
            decay_times: 5.0,
            cross_check_n: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Config {
    #[serde(rename = "G")]
    pub cavity_g: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "Gamma_c")]
    pub gamma_c: f64,
    #[serde(rename = "N")]
    pub n: Vec<u32>,
    /// Echo cycles; one predicted decay time when unset.
    pub cycles: Option<usize>,
    /// Fit window; half a predicted decay time when unset.
    pub window: Option<f64>,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self { cavity_g: 1.0, delta: 10.0, gamma_c: 1.0, n: vec![1, 2, 4], cycles: None, window: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Config {
    #[serde(rename = "Omega")]
    pub omega: f64,
    #[serde(rename = "Gamma_z")]
    pub gamma_z: f64,
    #[serde(rename = "z_N")]
    pub z_n: Vec<u32>,
    pub z_t_final: f64,
    pub z_samples: usize,
    #[serde(rename = "Gamma_x")]
    pub gamma_x: f64,
    #[serde(rename = "x_N")]
    pub x_n: Vec<u32>,
    /// x-dephasing runs last this many predicted decay times.
    pub x_decay_times: f64,
    pub x_samples: usize,
    #[serde(rename = "echo_N")]
    pub echo_n: Vec<u32>,
    /// Relative tolerance for the echo scan, where N = 40 dominates the cost.
    pub echo_rtol: f64,
    #[serde(rename = "cat_N_max")]
    pub cat_n_max: u32,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Self {
            omega: 1.0,
            gamma_z: 0.1,
            z_n: vec![2, 4, 6],
            z_t_final: 10.0,
            z_samples: 501,
            gamma_x: 0.01,
            x_n: vec![4, 8, 16],
            x_decay_times: 8.0,
            x_samples: 4000,
            echo_n: vec![5, 10, 20, 40],
            echo_rtol: 1e-7,
            cat_n_max: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(flatten)]
    pub lab: LabParams,
    /// Atom numbers for the ratio sweep CSV.
    #[serde(rename = "N_sweep")]
    pub n_sweep: Vec<f64>,
}

fn bad(key: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {why}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(bad(key, format!("must be >= 0, got {v}")))
    }
}

fn counts(key: &str, ns: &[u32], min_len: usize) -> Result<()> {
    if ns.len() < min_len {
        return Err(bad(key, format!("needs at least {min_len} entries")));
    }
    if ns.contains(&0) {
        return Err(bad(key, "boson numbers must be >= 1"));
    }
    Ok(())
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        positive("solver.rtol", s.rtol)?;
        positive("solver.atol", s.atol)?;

        let f = &self.fig3;
        positive("fig3.g", f.g)?;
        positive("fig3.Delta", f.delta)?;
        non_negative("fig3.Gamma_s", f.gamma_s)?;
        counts("fig3.trajectory_N", &f.trajectory_n, 1)?;
        positive("fig3.t_final", f.t_final)?;
        if f.samples < 2 {
            return Err(bad("fig3.samples", "must be >= 2"));
        }
        non_negative("fig3.scaling_Gamma_s", f.scaling_gamma_s)?;
        counts("fig3.scaling_N", &f.scaling_n, 3)?;
        if f.scaling_delta.len() < 3 {
            return Err(bad("fig3.scaling_Delta", "needs at least 3 entries"));
        }
        for &d in &f.scaling_delta {
            positive("fig3.scaling_Delta", d)?;
        }
        counts("fig3.scaling_Delta_N", &[f.scaling_delta_n], 1)?;
        positive("fig3.decay_times", f.decay_times)?;
        counts("fig3.cross_check_N", &[f.cross_check_n], 1)?;

        let f = &self.fig4;
        positive("fig4.G", f.cavity_g)?;
        positive("fig4.Delta", f.delta)?;
        non_negative("fig4.Gamma_c", f.gamma_c)?;
        counts("fig4.N", &f.n, 1)?;
        if f.cycles == Some(0) {
            return Err(bad("fig4.cycles", "must be >= 1"));
        }
        if let Some(w) = f.window {
            positive("fig4.window", w)?;
        }

        let f = &self.fig5;
        positive("fig5.Omega", f.omega)?;
        non_negative("fig5.Gamma_z", f.gamma_z)?;
        counts("fig5.z_N", &f.z_n, 1)?;
        positive("fig5.z_t_final", f.z_t_final)?;
        if f.z_samples < 2 {
            return Err(bad("fig5.z_samples", "must be >= 2"));
        }
        positive("fig5.Gamma_x", f.gamma_x)?;
        counts("fig5.x_N", &f.x_n, 1)?;
        positive("fig5.x_decay_times", f.x_decay_times)?;
        if f.x_samples < 2 {
            return Err(bad("fig5.x_samples", "must be >= 2"));
        }
        counts("fig5.echo_N", &f.echo_n, 1)?;
        positive("fig5.echo_rtol", f.echo_rtol)?;

        let e = &self.estimate.lab;
        for (key, v) in [
            ("estimate.G0", e.g0),
            ("estimate.Gamma_s", e.gamma_s),
            ("estimate.Gamma_c", e.gamma_c),
            ("estimate.D", e.d),
            ("estimate.N", e.n),
        ] {
            positive(key, v)?;
        }
        for &n in &self.estimate.n_sweep {
            positive("estimate.N_sweep", n)?;
        }
        Ok(())
    }
}

fn decode(value: Value) -> std::result::Result<Config, String> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        format!("{path}: {}", e.into_inner())
    })
}

/// Apply one `dotted.key=value` override. The key must already exist; the
/// value is read as JSON when it parses and as a string otherwise.
fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let key = key.trim();
    let mut node = &mut *root;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| Error::Config(format!("{key}: unknown key")))?;
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    decode(root.clone()).map_err(|e| Error::Config(format!("{key}: {e}")))?;
    Ok(())
}

/// Defaults, then the optional JSON file, then overrides in order.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
    let mut root = serde_json::to_value(Config::default())?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed = decode(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        root = serde_json::to_value(parsed)?;
    }
    for spec in overrides {
        apply_override(&mut root, spec)?;
    }
    let config = decode(root).map_err(Error::Config)?;
    config.validate()?;
    Ok(config)
}
