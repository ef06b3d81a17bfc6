//! Gate-time and decoherence budget in laboratory units.
//!
//! Rates are in MHz and times in µs. The collective couplings follow from the
//! single-atom ones as G = g = √N G₀ with detuning Δ = D G₀ N.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabParams {
    /// Single-atom cavity coupling (MHz).
    #[serde(rename = "G0")]
    pub g0: f64,
    /// Spontaneous emission rate (MHz).
    #[serde(rename = "Gamma_s")]
    pub gamma_s: f64,
    /// Cavity photon loss rate (MHz).
    #[serde(rename = "Gamma_c")]
    pub gamma_c: f64,
    /// Dimensionless detuning.
    #[serde(rename = "D")]
    pub d: f64,
    /// Atoms per condensate.
    #[serde(rename = "N")]
    pub n: f64,
}

impl Default for LabParams {
    fn default() -> Self {
        Self { g0: 1350.0, gamma_s: 19.0, gamma_c: 330.0, d: 1.0, n: 1000.0 }
    }
}

impl LabParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("G0", self.g0), ("Gamma_s", self.gamma_s), ("Gamma_c", self.gamma_c), ("D", self.d), ("N", self.n)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterTable {
    #[serde(rename = "Omega1_eff_MHz")]
    pub omega1: f64,
    #[serde(rename = "Gamma1_eff_MHz")]
    pub gamma1: f64,
    #[serde(rename = "Omega2_eff_MHz")]
    pub omega2: f64,
    #[serde(rename = "Gamma2_eff_MHz")]
    pub gamma2: f64,
    /// SzSz coupling Ω.
    #[serde(rename = "Omega_MHz")]
    pub omega: f64,
    /// π/(4NΩ).
    #[serde(rename = "t_CNOT_us")]
    pub t_cnot: f64,
    /// Spontaneous-emission lifetime over the gate time.
    pub ratio: f64,
}

pub fn parameter_table(lab: &LabParams) -> Result<ParameterTable> {
    lab.validate()?;
    let LabParams { g0, gamma_s, gamma_c, d, n } = *lab;
    let omega = g0 / (2.0 * d.powi(3) * n);
    let gamma1 = gamma_s / (d * d);
    let t_cnot = PI / (4.0 * n * omega);
    Ok(ParameterTable {
        omega1: g0 / d,
        gamma1,
        omega2: g0 / d,
        gamma2: gamma_c / (d * d * n),
        omega,
        t_cnot,
        ratio: (1.0 / gamma1) / t_cnot,
    })
}

impl ParameterTable {
    pub fn rows(&self) -> [(&'static str, f64, &'static str); 7] {
        [
            ("Omega1_eff", self.omega1, "MHz"),
            ("Gamma1_eff", self.gamma1, "MHz"),
            ("Omega2_eff", self.omega2, "MHz"),
            ("Gamma2_eff", self.gamma2, "MHz"),
            ("Omega", self.omega, "MHz"),
            ("t_CNOT", self.t_cnot, "us"),
            ("ratio", self.ratio, ""),
        ]
    }

    /// Aligned two-column table.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, v, unit) in rows {
            let _ = writeln!(out, "{name:<width$}  {v:>14.6}  {unit}");
        }
        out
    }
}
