//! Mean-field moment equations for a λ-system condensate with spontaneous
//! emission, usable at boson numbers far beyond the exact master equation.
//!
//! Quartic correlators are factorized into products of quadratic ones; the
//! resulting six complex equations (plus conjugates) are integrated with the
//! same adaptive stepper as the master equation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::fockspace::{
    bilinear_operator, coherent_amplitude, collective_spin_operator, BasisIndex, enumerate_basis, number_operator, Axis, DensityMatrix,
    Level, Mode, ModeSpec, Operator, StateVector, C64, I,
};
use crate::hamiltonians::{build_lambda_hamiltonian, PhysicalParams};
use crate::integrate::{integrate, uniform_grid, StepStats, Tolerances};
use crate::lindblad::{
    evolve_master, make_spontaneous_emission_channels, EvolveOptions, JumpChannel, LindbladModel, Trajectory,
};

/// The correlators ⟨a†a⟩, ⟨a†e⟩, ⟨e†e⟩, ⟨a†b⟩, ⟨b†e⟩, ⟨b†b⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentState {
    pub aa: C64,
    pub ae: C64,
    pub ee: C64,
    pub ab: C64,
    pub be: C64,
    pub bb: C64,
    /// Nominal boson number.
    pub n: f64,
}

impl MomentState {
    /// All `n` bosons in level a.
    pub fn all_in_a(n: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self { aa: C64::new(n, 0.0), ae: z, ee: z, ab: z, be: z, bb: z, n }
    }

    pub fn sz(&self) -> f64 {
        (self.aa - self.bb).re
    }

    pub fn total(&self) -> f64 {
        (self.aa + self.bb + self.ee).re
    }

    fn to_vec(self) -> Vec<C64> {
        vec![self.aa, self.ae, self.ee, self.ab, self.be, self.bb]
    }

    fn from_slice(y: &[C64], n: f64) -> Self {
        Self { aa: y[0], ae: y[1], ee: y[2], ab: y[3], be: y[4], bb: y[5], n }
    }
}

/// Time derivative of the moments; the `n` field of the result is zero.
pub fn moment_rhs(s: &MomentState, params: &PhysicalParams) -> MomentState {
    let g = params.pump_g;
    let d = params.delta;
    let gs = params.gamma_s;
    let (aa, ae, ee, ab, be, bb) = (s.aa, s.ae, s.ee, s.ab, s.be, s.bb);
    let (ea, eb, ba) = (ae.conj(), be.conj(), ab.conj());
    let one = C64::new(1.0, 0.0);
    MomentState {
        aa: -I * g * (ae - ea) + gs * ee * (aa + one),
        ae: -I * g * (aa - ee + ab) - I * d * ae - 0.5 * gs * (aa - ee + bb + one) * ae,
        ee: -I * g * (ea - ae - be + eb) - gs * (aa + one) * ee - gs * (bb + one) * ee,
        ab: I * g * (eb - ae) + gs * ee * ab,
        be: -I * g * (ba + bb - ee) - I * d * be - 0.5 * gs * (aa + one) * be - 0.5 * gs * (bb - ee) * be,
        bb: I * g * (eb - be) + gs * ee * (bb + one),
        n: 0.0,
    }
}

#[derive(Clone, Debug)]
pub struct MomentOptions {
    pub tolerances: Tolerances,
    pub samples: usize,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), samples: 2000 }
    }
}

/// Integrate the moment equations, recording `Sz`, `aa`, `bb`, `ee` and
/// `total` on a uniform grid.
pub fn solve_moments(
    initial: &MomentState,
    params: &PhysicalParams,
    t_final: f64,
    options: &MomentOptions,
) -> Result<(Trajectory, MomentState)> {
    let grid = uniform_grid(t_final, options.samples);
    let names = ["Sz", "aa", "bb", "ee", "total"];
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); names.len()];
    let n = initial.n;
    let (y, stats): (Vec<C64>, StepStats) = integrate(
        |_, y, out| {
            let dy = moment_rhs(&MomentState::from_slice(y, n), params).to_vec();
            out.copy_from_slice(&dy);
        },
        0.0,
        initial.to_vec(),
        &grid,
        &options.tolerances,
        |_, _, y| {
            let s = MomentState::from_slice(y, n);
            for (v, x) in series.iter_mut().zip([s.sz(), s.aa.re, s.bb.re, s.ee.re, s.total()]) {
                v.push(x);
            }
            Ok(())
        },
        |_, _| Ok(()),
    )?;
    let mut traj = Trajectory::new(grid);
    for (name, v) in names.iter().zip(series) {
        traj.push_observable(*name, v)?;
    }
    traj.diagnostics.steps = stats;
    traj.diagnostics.psd_passed = true;
    Ok((traj, MomentState::from_slice(&y, n)))
}

/// Factorized two-level decay `d⟨e†e⟩/dt = −Γ(N+1)⟨e†e⟩ + Γ⟨e†e⟩²`, solved in
/// closed form.
pub fn toy_excited_population(n: f64, gamma: f64, ee0: f64, t: f64) -> f64 {
    if ee0 == 0.0 {
        return 0.0;
    }
    let r = gamma * (n + 1.0);
    let c = (n + 1.0) / ee0 - 1.0;
    (n + 1.0) / (1.0 + c * (r * t).exp())
}

/// `N tanh[−Γ(N+1)t/2 + K₀]`.
pub fn tanh_law(n: f64, gamma: f64, k0: f64, t: f64) -> f64 {
    n * (-0.5 * gamma * (n + 1.0) * t + k0).tanh()
}

/// K₀ from the initial inversion ⟨e†e − a†a⟩(0).
pub fn tanh_k0(n: f64, inversion0: f64) -> f64 {
    (inversion0 / n).atanh()
}

/// Exact two-level decay `e → a` with jump `a†e` at rate Γ, from the spin
/// coherent state with excited amplitude `√p`. Records the inversion
/// `e†e − a†a`.
pub fn toy_two_level_exact(n: u32, gamma: f64, p_excited: f64, t_final: f64, options: &EvolveOptions) -> Result<Trajectory> {
    let basis = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::E], n))?;
    let se = basis.spec().slot(Mode::e(0)).expect("basis has e");
    let (ce, ca) = (C64::new(p_excited.sqrt(), 0.0), C64::new((1.0 - p_excited).sqrt(), 0.0));
    let amps = basis.states().iter().map(|occ| coherent_amplitude(ce, ca, n, occ[se])).collect();
    let psi = StateVector::new(&basis, amps)?;
    let jump = bilinear_operator(&basis, Mode::a(0), Mode::e(0))?;
    let model = LindbladModel::new(Operator::zero(&basis), vec![JumpChannel::new(gamma, jump, "a†e")?])?;
    let inversion = &number_operator(&basis, Mode::e(0))? - &number_operator(&basis, Mode::a(0))?;
    Ok(evolve_master(&model, &DensityMatrix::from_pure(&psi), t_final, &[("inversion", &inversion)], options)?.trajectory)
}

/// Exact and moment ⟨Sz⟩ on a common grid.
#[derive(Clone, Debug, Serialize)]
pub struct ExactComparison {
    pub n: u32,
    /// max |Sz_exact − Sz_moments| / N.
    pub max_deviation: f64,
    /// RMS of the same difference over the grid.
    pub rms_deviation: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Solve the exact single-node master equation and the moment equations from
/// the all-in-a state and compare ⟨Sz⟩ on the grid of `options`.
pub fn compare_exact(params: &PhysicalParams, n: u32, t_final: f64, options: &EvolveOptions) -> Result<ExactComparison> {
    let exact = exact_lambda_run(params, n, t_final, options)?;
    let opts = MomentOptions { samples: options.samples, tolerances: options.tolerances };
    let (mom, _) = solve_moments(&MomentState::all_in_a(n as f64), params, t_final, &opts)?;
    let se = exact.observable("Sz")?.to_vec();
    let sm = mom.observable("Sz")?.to_vec();
    let nf = n as f64;
    let diffs: Vec<f64> = se.iter().zip(&sm).map(|(a, b)| (a - b).abs() / nf).collect();
    let max_deviation = diffs.iter().copied().fold(0.0, f64::max);
    let rms_deviation = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let mut trajectory = Trajectory::new(exact.times.clone());
    trajectory.diagnostics = exact.diagnostics.clone();
    trajectory.push_observable("Sz_exact", se)?;
    trajectory.push_observable("Sz_moments", sm)?;
    Ok(ExactComparison { n, max_deviation, rms_deviation, trajectory })
}

/// Single-node `{a, b, e}` basis.
pub fn lambda_basis(n: u32) -> Result<Arc<BasisIndex>> {
    enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], n))
}

/// Exact λ-system master equation from the all-in-a Fock state, recording
/// ⟨Sz⟩.
pub fn exact_lambda_run(params: &PhysicalParams, n: u32, t_final: f64, options: &EvolveOptions) -> Result<Trajectory> {
    let basis = lambda_basis(n)?;
    let h = build_lambda_hamiltonian(params, &basis)?;
    let model = LindbladModel::new(h, make_spontaneous_emission_channels(params, &basis)?)?;
    let rho0 = DensityMatrix::from_pure(&StateVector::fock(&basis, &[n, 0, 0])?);
    let sz = collective_spin_operator(&basis, 0, Axis::Z)?;
    Ok(evolve_master(&model, &rho0, t_final, &[("Sz", &sz)], options)?.trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_coherence_stays_zero() {
        let p = PhysicalParams { pump_g: 0.0, gamma_s: 0.1, ..Default::default() };
        let mut s = MomentState::all_in_a(5.0);
        s.ee = C64::new(2.0, 0.0);
        s.aa = C64::new(3.0, 0.0);
        let (_, end) = solve_moments(&s, &p, 5.0, &MomentOptions::default()).unwrap();
        assert_eq!(end.ae, C64::new(0.0, 0.0));
        assert_eq!(end.be, C64::new(0.0, 0.0));
    }

    #[test]
    fn closed_system_conserves_number() {
        let p = PhysicalParams { gamma_s: 0.0, ..Default::default() };
        let (traj, _) = solve_moments(&MomentState::all_in_a(10.0), &p, 200.0, &MomentOptions::default()).unwrap();
        for v in traj.observable("total").unwrap() {
            assert!((v - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn toy_solution_solves_its_ode() {
        let (n, gamma, ee0) = (6.0, 0.3, 4.0);
        let h = 1e-5;
        for &t in &[0.0, 0.2, 0.7, 1.5] {
            let x = toy_excited_population(n, gamma, ee0, t);
            let dx = (toy_excited_population(n, gamma, ee0, t + h) - toy_excited_population(n, gamma, ee0, t - h)) / (2.0 * h);
            assert!((dx - (-gamma * (n + 1.0) * x + gamma * x * x)).abs() < 1e-6);
        }
        assert_eq!(toy_excited_population(n, gamma, ee0, 0.0), ee0);
    }

    #[test]
    fn tanh_law_large_n() {
        let (n, gamma) = (100.0, 0.01);
        let ee0 = 0.5 * n;
        let k0 = tanh_k0(n, 2.0 * ee0 - n);
        for i in 0..50 {
            let t = i as f64 * 3.0 / (gamma * (n + 1.0)) / 50.0;
            let inv = 2.0 * toy_excited_population(n, gamma, ee0, t) - n;
            assert!((inv - tanh_law(n, gamma, k0, t)).abs() < 0.03 * n);
        }
    }
}
