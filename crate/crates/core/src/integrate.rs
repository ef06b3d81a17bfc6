//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems, with
//! fourth-order dense output for sampling on a fixed grid.

use crate::error::{Error, Result};
use crate::fockspace::{C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the right-hand side when `None`.
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, h_init: None, h_max: None, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// `out = y + h Σ cᵢ kᵢ`.
fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = ZERO;
        for &(c, k) in terms {
            s += k[i] * c;
        }
        *o = y[i] + s * h;
    }
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
}

/// Integrate `dy/dt = f(t, y)` from `t0`, reporting the solution at each time
/// in `t_out` (ascending, all ≥ `t0`) through `on_sample`.
///
/// `after_step` runs on every accepted state and may project it (e.g. restore
/// Hermiticity) or abort the run.
pub fn integrate<F, S, P>(
    mut f: F,
    t0: f64,
    y0: Vec<C64>,
    t_out: &[f64],
    tol: &Tolerances,
    mut on_sample: S,
    mut after_step: P,
) -> Result<(Vec<C64>, StepStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    S: FnMut(usize, f64, &[C64]) -> Result<()>,
    P: FnMut(f64, &mut [C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0;
    let mut t = t0;
    let mut next_out = 0;
    while next_out < t_out.len() && t_out[next_out] <= t0 {
        on_sample(next_out, t_out[next_out], &y)?;
        next_out += 1;
    }
    let Some(&t_end) = t_out.last() else {
        return Ok((y, stats));
    };
    if next_out == t_out.len() {
        return Ok((y, stats));
    }

    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![ZERO; n]).collect();
    let mut tmp = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let mut err = vec![ZERO; n];
    let mut dense = vec![ZERO; n];
    let mut interp = vec![ZERO; n];

    f(t, &y, &mut k[0]);
    stats.rhs_evals += 1;

    let span = t_end - t0;
    let h_max = tol.h_max.unwrap_or(span).min(span);
    let mut h = match tol.h_init {
        Some(h) => h,
        None => {
            let d0 = max_norm(&y);
            let d1 = max_norm(&k[0]);
            let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(h_max)
        }
    };
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    while next_out < t_out.len() {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::TooManySteps(tol.max_steps));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= f64::EPSILON * t.abs().max(1.0) * 10.0 {
            return Err(Error::StepUnderflow { time: t });
        }

        {
            let (k0, rest) = k.split_at_mut(1);
            let k0 = &k0[0];
            combine(&mut tmp, &y, h, &[(A21, k0)]);
            f(t + C2 * h, &tmp, &mut rest[0]);
            combine(&mut tmp, &y, h, &[(A31, k0), (A32, &rest[0])]);
            f(t + C3 * h, &tmp, &mut rest[1]);
            combine(&mut tmp, &y, h, &[(A41, k0), (A42, &rest[0]), (A43, &rest[1])]);
            f(t + C4 * h, &tmp, &mut rest[2]);
            combine(&mut tmp, &y, h, &[(A51, k0), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])]);
            f(t + C5 * h, &tmp, &mut rest[3]);
            combine(
                &mut tmp,
                &y,
                h,
                &[(A61, k0), (A62, &rest[0]), (A63, &rest[1]), (A64, &rest[2]), (A65, &rest[3])],
            );
            f(t + h, &tmp, &mut rest[4]);
            combine(
                &mut y_new,
                &y,
                h,
                &[(A71, k0), (A73, &rest[1]), (A74, &rest[2]), (A75, &rest[3]), (A76, &rest[4])],
            );
            f(t + h, &y_new, &mut rest[5]);
        }
        stats.rhs_evals += 6;

        for i in 0..n {
            err[i] = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
        }
        let sc = tol.atol + tol.rtol * max_norm(&y).max(max_norm(&y_new));
        let e_norm = max_norm(&err) / sc;
        if !e_norm.is_finite() || y_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            if h < 1e-300 {
                return Err(Error::NonFinite { time: t, step: h });
            }
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        // PI step-size control.
        let beta = 0.04;
        let expo = 0.2 - 0.75 * beta;
        let fac11 = e_norm.max(1e-300).powf(expo);
        let mut fac = fac11 / fac_old.powf(beta);
        fac = (fac / 0.9).clamp(0.1, 5.0);
        let h_new = h / fac;

        if e_norm <= 1.0 {
            fac_old = e_norm.max(1e-4);
            stats.accepted += 1;
            let t_new = t + h;
            let mut have_dense = false;
            while next_out < t_out.len() && t_out[next_out] <= t_new {
                let ts = t_out[next_out];
                if ts == t_new {
                    on_sample(next_out, ts, &y_new)?;
                } else {
                    if !have_dense {
                        for i in 0..n {
                            dense[i] = (k[0][i] * D1 + k[2][i] * D3 + k[3][i] * D4 + k[4][i] * D5 + k[5][i] * D6
                                + k[6][i] * D7)
                                * h;
                        }
                        have_dense = true;
                    }
                    let th = (ts - t) / h;
                    let th1 = 1.0 - th;
                    for i in 0..n {
                        let r2 = y_new[i] - y[i];
                        let r3 = k[0][i] * h - r2;
                        let r4 = r2 - k[6][i] * h - r3;
                        interp[i] = y[i] + (r2 + (r3 + (r4 + dense[i] * th1) * th) * th1) * th;
                    }
                    on_sample(next_out, ts, &interp)?;
                }
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            after_step(t, &mut y)?;
            // FSAL: k7 is the derivative at the accepted point.
            k.swap(0, 6);
            h = if last_rejected { h_new.min(h) } else { h_new };
            h = h.min(h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h /= (fac11 / 0.9).min(5.0).max(1.0);
            last_rejected = true;
        }
    }
    Ok((y, stats))
}

/// Uniform grid of `samples` points on `[0, t_final]`.
pub fn uniform_grid(t_final: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    let last = samples - 1;
    (0..samples).map(|i| if i == last { t_final } else { t_final * i as f64 / last as f64 }).collect()
}
