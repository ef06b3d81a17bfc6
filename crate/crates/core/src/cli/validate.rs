//! Small-N oracle suite: closed-form identities checked against the numeric
//! machinery across modules.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde_json::json;

use super::config::Config;
use super::{report, Check, Output};
use crate::error::Result;
use crate::estimates::{parameter_table, LabParams};
use crate::fockspace::{
    enumerate_basis, excitation_operator, number_operator, spin_coherent_state, Axis, DensityMatrix, Level, Mode,
    ModeSpec, Operator, Sector, StateVector, C64,
};
use crate::hamiltonians::{
    build_collective_entangler, build_effective_blocked, build_effective_entangler, build_effective_two_node,
    build_interaction_hamiltonian, build_lambda_hamiltonian, build_pump_hamiltonian, build_szsz, build_total_effective,
    verify_fiber_diagonalization, PhysicalParams,
};
use crate::lindblad::{
    analytic_z_dephasing, evolve_master, make_spontaneous_emission_channels, propagate_master, propagate_unitary,
    EvolveOptions, LindbladModel,
};
use crate::protocols::{
    analytic_cat_state, analytic_entangled_state, run_dephasing_echo, run_gate_protocol, two_node_basis,
    validate_elimination, DephasingSetup,
};

/// Applied to every dissipative model before it is evolved; the identity for
/// a normal run. Tests use it to plant faults.
pub type ModelHook<'a> = &'a dyn Fn(LindbladModel) -> LindbladModel;

fn outcome(name: &str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check::new(name, passed, detail),
        Err(e) => Check::new(name, false, format!("error: {e}")),
    }
}

fn coherent_norms() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let basis = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B], n))?;
        for (a, b) in [(0.6, 0.8), (1.0, 0.0), (FRAC_1_SQRT_2, FRAC_1_SQRT_2)] {
            let psi = spin_coherent_state(C64::new(a, 0.0), C64::new(0.0, b), n, &basis)?;
            worst = worst.max((psi.norm() - 1.0).abs());
        }
    }
    Ok((worst < 1e-12, format!("max |norm - 1| = {worst:.2e}")))
}

fn hermitian_builders() -> Result<(bool, String)> {
    let p = PhysicalParams { phi: 0.7, ..Default::default() };
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let ab = two_node_basis(n)?;
        let full = enumerate_basis(ModeSpec::atoms(2, &[Level::A, Level::B, Level::E], n).with_photon(1))?;
        let be = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], n).with_photon(n).with_sector(Sector::AtMost(n)))?;
        let be0 = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], n))?;
        let lam = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], n))?;
        let ops: Vec<Operator> = vec![
            build_interaction_hamiltonian(&p, &full)?,
            build_pump_hamiltonian(&p, &full)?,
            build_effective_two_node(&p, &ab)?,
            build_effective_blocked(&p, -p.delta, &ab)?,
            build_total_effective(&p, &ab)?,
            build_lambda_hamiltonian(&p, &lam)?,
            build_collective_entangler(&p, &be)?,
            build_effective_entangler(&p, &be0)?,
        ];
        for op in &ops {
            worst = worst.max(op.hermiticity_residual());
        }
    }
    Ok((worst < 1e-12, format!("max residual {worst:.2e}")))
}

fn excitation_conservation() -> Result<(bool, String)> {
    let p = PhysicalParams { phi: 0.3, ..Default::default() };
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let full = enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], n).with_photon(2))?;
        let h = build_interaction_hamiltonian(&p, &full)?;
        worst = worst.max(h.commutator(&excitation_operator(&full))?.max_abs());
        let h2 = build_collective_entangler(&p, &full)?;
        worst = worst.max(h2.commutator(&excitation_operator(&full))?.max_abs());
    }
    Ok((worst < 1e-12, format!("max |[H, n_ex]| = {worst:.2e}")))
}

fn fiber() -> Result<(bool, String)> {
    let rep = verify_fiber_diagonalization(&PhysicalParams { phi: 1.1, ..Default::default() }, 2);
    Ok((rep.passed(1e-10), format!("identity error {:.2e}", rep.identity_error)))
}

fn cancellation() -> Result<(bool, String)> {
    let p = PhysicalParams { phi: 0.4, omega: 3.0, ..Default::default() };
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        let basis = two_node_basis(n)?;
        let psi = analytic_entangled_state(n, 0.0, 0.0, &basis)?;
        let tau = 700.0;
        let stepwise = run_gate_protocol(&p, tau, &psi)?;
        let direct = propagate_unitary(&build_total_effective(&p, &basis)?, &psi, tau)?;
        worst = worst.max(1.0 - stepwise.fidelity(&direct)?);
    }
    Ok((worst < 1e-10, format!("max infidelity {worst:.2e}")))
}

fn target_states() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let basis = two_node_basis(n)?;
        let psi0 = analytic_entangled_state(n, 1.0, 0.0, &basis)?;
        let h = build_szsz(0.8, &basis)?;
        let evolved = propagate_unitary(&h, &psi0, 0.9)?;
        worst = worst.max(1.0 - analytic_entangled_state(n, 0.8, 0.9, &basis)?.fidelity(&evolved)?);
        let cat = propagate_unitary(&build_szsz(1.0, &basis)?, &psi0, FRAC_PI_4)?;
        worst = worst.max(1.0 - analytic_cat_state(n, &basis)?.fidelity(&cat)?);
    }
    Ok((worst < 1e-10, format!("max infidelity {worst:.2e}")))
}

fn z_dephasing(hook: ModelHook) -> Result<(bool, String)> {
    let setup = DephasingSetup { n: 2, coupling: 1.0, axis: Axis::Z, rate: 0.1 };
    let basis = setup.basis()?;
    let model = hook(setup.model(&basis)?);
    let rho0 = DensityMatrix::from_pure(&setup.initial_state(&basis)?);
    let t = 3.0;
    let numeric = propagate_master(&model, &rho0, t, &EvolveOptions::default())?.final_state;
    let closed = analytic_z_dephasing(&rho0, setup.rate, setup.coupling, t)?;
    let diff = numeric.max_abs_diff(&closed)?;
    Ok((diff < 1e-8, format!("max |rho_num - rho_closed| = {diff:.2e}")))
}

fn spontaneous_decay(hook: ModelHook) -> Result<(bool, String)> {
    let p = PhysicalParams { pump_g: 0.0, gamma_s: 0.2, ..Default::default() };
    let basis = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B, Level::E], 1))?;
    let model = hook(LindbladModel::new(build_lambda_hamiltonian(&p, &basis)?, make_spontaneous_emission_channels(&p, &basis)?)?);
    let rho0 = DensityMatrix::from_pure(&StateVector::fock(&basis, &[0, 0, 1])?);
    let ne = number_operator(&basis, Mode::e(0))?;
    let run = evolve_master(&model, &rho0, 5.0, &[("ne", &ne)], &EvolveOptions::default().with_samples(51))?;
    let worst = run
        .trajectory
        .times
        .iter()
        .zip(run.trajectory.observable("ne")?)
        .map(|(&t, &v)| (v - (-2.0 * p.gamma_s * t).exp()).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max |P_e - exp(-2 Gamma_s t)| = {worst:.2e}")))
}

fn zero_rate_echo() -> Result<(bool, String)> {
    let setup = DephasingSetup { n: 2, coupling: 1.0, axis: Axis::X, rate: 0.0 };
    let echo = run_dephasing_echo(&setup, 0.3, 20, &EvolveOptions::default())?;
    let worst = echo.cycle_errors.iter().fold(0.0f64, |w, e| w.max(e.abs()));
    Ok((worst < 1e-8, format!("max error over 20 cycles {worst:.2e}")))
}

fn elimination() -> Result<(bool, String)> {
    let p = PhysicalParams { cavity_g: 1.0, pump_g: 1.0, delta: 50.0, phi: 0.0, ..Default::default() };
    let rep = validate_elimination(&p, 1, 2, 21)?;
    Ok((rep.min_fidelity > 0.98, format!("min fidelity {:.5}", rep.min_fidelity)))
}

fn estimates() -> Result<(bool, String)> {
    let t = parameter_table(&LabParams::default())?;
    let ok = (t.omega - 0.675).abs() < 1e-12 && (t.gamma2 - 0.33).abs() < 1e-12 && (t.gamma1 - 19.0).abs() < 1e-12;
    Ok((ok, format!("Omega {} MHz, Gamma2 {} MHz, ratio {:.3}", t.omega, t.gamma2, t.ratio)))
}

/// Run every oracle check, passing dissipative models through `hook`.
pub fn run_checks(hook: ModelHook) -> Vec<Check> {
    vec![
        outcome("coherent state normalization", coherent_norms()),
        outcome("Hamiltonian hermiticity", hermitian_builders()),
        outcome("excitation-number conservation", excitation_conservation()),
        outcome("fiber mode diagonalization", fiber()),
        outcome("self-interaction cancellation", cancellation()),
        outcome("entangled and cat target states", target_states()),
        outcome("z-dephasing closed form", z_dephasing(hook)),
        outcome("spontaneous decay rate", spontaneous_decay(hook)),
        outcome("zero-rate echo", zero_rate_echo()),
        outcome("adiabatic elimination", elimination()),
        outcome("parameter table", estimates()),
    ]
}

pub(crate) fn command(_config: &Config, out: &mut Output) -> Result<bool> {
    let checks = run_checks(&|m| m);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    out.json("validate_manifest.json", &json!({ "checks": checks, "failed": failed }))?;
    Ok(report(&checks))
}
