//! Decay-rate extraction from oscillating trajectories, scaling-law fits and
//! closed-form rate predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::PhysicalParams;
use crate::lindblad::Trajectory;

/// Fewest peaks accepted for an envelope fit.
pub const MIN_PEAKS: usize = 4;

/// The fit window ends at the first peak below this fraction of the first
/// peak used.
pub const STOP_FRACTION: f64 = 0.05;

/// Local maxima whose prominence is below this fraction of the tallest
/// interior maximum are treated as ripple, not oscillation peaks.
pub const MIN_PROMINENCE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted rate γ in `A e^{−γt}`; zero or negative when nothing decays.
    pub gamma_eff: f64,
    pub amplitude: f64,
    /// RMS residual of the log-linear fit.
    pub rms_residual: f64,
    pub n_peaks_used: usize,
    pub method: String,
}

/// Peak of |y| located to sub-sample precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
    pub index: usize,
}

/// Local maxima of |y| by neighbour comparison, filtered by prominence and
/// refined by a parabola through the three samples around each maximum.
pub fn find_peaks(times: &[f64], values: &[f64]) -> Vec<Peak> {
    let y: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let candidates: Vec<usize> = (1..n - 1).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1]).collect();
    let ymax = candidates.iter().map(|&i| y[i]).fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in candidates {
        if prominence(&y, i) < MIN_PROMINENCE * ymax {
            continue;
        }
        let (ym, y0, yp) = (y[i - 1], y[i], y[i + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let (time, value) = if denom < 0.0 {
            let d = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
            let dt = if d >= 0.0 { times[i + 1] - times[i] } else { times[i] - times[i - 1] };
            (times[i] + d * dt, y0 - 0.25 * (ym - yp) * d)
        } else {
            (times[i], y0)
        };
        out.push(Peak { time, value, index: i });
    }
    out
}

/// Height of `y[i]` above the higher of the two lowest points separating it
/// from taller samples on either side.
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left_min = h;
    for &v in y[..i].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Least-squares line through `(x, y)`: slope, intercept, r², RMS residual.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2, (sse / n).sqrt())
}

/// Envelope fit on raw series; see [`extract_decay_rate`].
pub fn fit_envelope(times: &[f64], values: &[f64], name: &str) -> Result<DecayFit> {
    let peaks = find_peaks(times, values);
    let mut used: Vec<Peak> = Vec::new();
    for p in peaks.into_iter().skip(1) {
        if let Some(first) = used.first() {
            if p.value < STOP_FRACTION * first.value {
                break;
            }
        }
        if p.value <= 0.0 {
            break;
        }
        used.push(p);
    }
    if used.len() < MIN_PEAKS {
        return Err(Error::TooFewPeaks { observable: name.to_string(), found: used.len(), needed: MIN_PEAKS });
    }
    let t: Vec<f64> = used.iter().map(|p| p.time).collect();
    let l: Vec<f64> = used.iter().map(|p| p.value.ln()).collect();
    let (slope, intercept, _, rms) = least_squares(&t, &l);
    Ok(DecayFit {
        gamma_eff: -slope,
        amplitude: intercept.exp(),
        rms_residual: rms,
        n_peaks_used: used.len(),
        method: "peak-envelope".into(),
    })
}

/// Rate of the exponential envelope of an oscillating observable.
///
/// The first peak is dropped as transient and the window ends at the first
/// peak under 5% of the first one used. Fewer than [`MIN_PEAKS`] usable
/// peaks is an error: extend the run.
pub fn extract_decay_rate(traj: &Trajectory, name: &str) -> Result<DecayFit> {
    fit_envelope(&traj.times, traj.observable(name)?, name)
}

/// Log-linear fit of positive samples `y ≈ A e^{−γt}`, for quantities that
/// decay without oscillating (e.g. echo returns).
pub fn fit_exponential(times: &[f64], values: &[f64], method: &str) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = times.iter().zip(values).filter(|(_, &v)| v > 0.0).map(|(&t, &v)| (t, v.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::TooFewPeaks { observable: method.to_string(), found: pts.len(), needed: 2 });
    }
    let (t, l): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, intercept, _, rms) = least_squares(&t, &l);
    Ok(DecayFit { gamma_eff: -slope, amplitude: intercept.exp(), rms_residual: rms, n_peaks_used: t.len(), method: method.into() })
}

/// Fit for the non-oscillating tanh regime `y = N tanh(−κt + K₀)`: artanh(y/N)
/// is regressed on t. `gamma_eff` holds κ and `amplitude` holds K₀; samples
/// with |y| ≥ N are skipped.
pub fn fit_tanh(times: &[f64], values: &[f64], n: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(values).filter(|(_, &v)| (v / n).abs() < 1.0).map(|(&t, &v)| (t, (v / n).atanh())).collect();
    if pts.len() < 2 {
        return Err(Error::TooFewPeaks { observable: "tanh".into(), found: pts.len(), needed: 2 });
    }
    let (t, l): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, intercept, _, rms) = least_squares(&t, &l);
    Ok(DecayFit { gamma_eff: -slope, amplitude: intercept, rms_residual: rms, n_peaks_used: t.len(), method: "artanh".into() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares of γ against a predictor (N, or 1/Δ²).
pub fn fit_scaling(points: &[(f64, f64)], mode: ScalingMode) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!("scaling fit needs at least 3 points, got {}", points.len())));
    }
    match mode {
        ScalingMode::Linear => {
            let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            let (slope, intercept, r_squared, _) = least_squares(&x, &y);
            Ok(ScalingFit { slope, intercept, r_squared, n_points: points.len() })
        }
    }
}

/// Closed-form frequencies and rates (ħ = 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    /// Rabi frequency g²/Δ of the pumped λ-system.
    #[serde(rename = "Omega1")]
    pub omega1: f64,
    /// Spontaneous-emission rate g²Γ_s(N + 1)/Δ².
    #[serde(rename = "Gamma1")]
    pub gamma1: f64,
    /// Exchange frequency G²/Δ.
    #[serde(rename = "Omega2")]
    pub omega2: f64,
    /// Cavity-loss rate G²Γ_c/Δ².
    #[serde(rename = "Gamma2")]
    pub gamma2: f64,
    /// x-dephasing rate 4NΓ_x.
    #[serde(rename = "Gamma_x_eff")]
    pub gamma_x_eff: f64,
    /// SzSz coupling G²g²/2Δ³.
    #[serde(rename = "Omega")]
    pub omega: f64,
}

pub fn predict_rates(params: &PhysicalParams) -> RatePrediction {
    predict_rates_for(params, params.n as f64)
}

/// [`predict_rates`] with an explicit boson number, including N = 0.
pub fn predict_rates_for(params: &PhysicalParams, n: f64) -> RatePrediction {
    let g2 = params.pump_g.powi(2);
    let cg2 = params.cavity_g.powi(2);
    let d = params.delta;
    RatePrediction {
        omega1: g2 / d,
        gamma1: g2 * params.gamma_s * (n + 1.0) / (d * d),
        omega2: cg2 / d,
        gamma2: cg2 * params.gamma_c / (d * d),
        gamma_x_eff: 4.0 * n * params.gamma_x,
        omega: params.omega_eff(),
    }
}

/// Angular frequency from the mean spacing of sign changes, for a series
/// oscillating about zero.
pub fn zero_crossing_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let mut crossings = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1], values[i]);
        if a == 0.0 || (a > 0.0) != (b > 0.0) {
            let f = if a == b { 0.0 } else { a / (a - b) };
            crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let half_period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Some(std::f64::consts::PI / half_period)
}

/// Spread `(max − min)/mean` of a set of positive values.
pub fn relative_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}

/// True when consecutive values never rise by more than `slack`.
pub fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// True when consecutive values never fall by more than `slack`.
pub fn non_decreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - slack)
}
