//! Composite experiments: the two-step self-interaction cancellation, the
//! forward/reverse echo sequences used to isolate cavity loss and dephasing,
//! and closed-form target states for SzSz evolution.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};
use std::sync::Arc;

use serde::Serialize;

use crate::analysis::{fit_exponential, DecayFit};
use crate::error::{Error, Result};
use crate::fockspace::{
    coherent_amplitude, collective_spin_operator, enumerate_basis, expectation, ln_binomial, pseudo_spin_z, spin_coherent_product,
    spin_coherent_state, Axis, BasisIndex, DensityMatrix, Level, Mode, ModeSpec, Sector, StateVector, C64,
    ZERO,
};
use crate::hamiltonians::{
    build_collective_entangler, build_effective_blocked, build_full_model, build_effective_two_node, build_szsz, PhysicalParams,
};
use crate::integrate::uniform_grid;
use crate::lindblad::{
    analytic_z_dephasing, evolve_master, make_cavity_loss_channel, make_dephasing_channels, propagate_unitary,
    EvolveOptions, LindbladModel, Observables, RunDiagnostics, SpectralPropagator, Trajectory,
};

fn require_two_node_ab(basis: &BasisIndex) -> Result<()> {
    let spec = basis.spec();
    if spec.nodes != 2 || spec.photon_modes != 0 {
        return Err(Error::BasisMismatch("expected a two-node basis without photons".into()));
    }
    for node in 0..2 {
        for m in [Mode::a(node), Mode::b(node)] {
            if !spec.has(m) {
                return Err(Error::MissingMode(m.to_string()));
            }
        }
    }
    Ok(())
}

/// Two-node `{a, b}` basis with `n` bosons per node.
pub fn two_node_basis(n: u32) -> Result<Arc<BasisIndex>> {
    enumerate_basis(ModeSpec::atoms(2, &[Level::A, Level::B], n))
}

/// Apply the fiber-coupled effective Hamiltonian for `tau`, then the
/// fiber-blocked one at reversed detuning `Δ' = −Δ` for `tau/2`. The
/// self-interaction terms cancel and only the SzSz coupling and a linear
/// shift survive.
pub fn run_gate_protocol(params: &PhysicalParams, tau: f64, psi0: &StateVector) -> Result<StateVector> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("gate time must be >= 0, got {tau}")));
    }
    let basis = psi0.basis();
    require_two_node_ab(basis)?;
    let h_on = build_effective_two_node(params, basis)?;
    let h_off = build_effective_blocked(params, -params.delta, basis)?;
    let mid = propagate_unitary(&h_on, psi0, tau)?;
    propagate_unitary(&h_off, &mid, 0.5 * tau)
}

/// `e^{−iΩ S₁ᶻS₂ᶻ t}` applied to two `(1/√2, 1/√2)` coherent states, summed
/// in closed form over the Fock states of node 2.
pub fn analytic_entangled_state(n: u32, omega: f64, t: f64, basis: &Arc<BasisIndex>) -> Result<StateVector> {
    require_two_node_ab(basis)?;
    if basis.spec().bosons_per_node != n {
        return Err(Error::BasisMismatch(format!("basis holds {} bosons per node", basis.spec().bosons_per_node)));
    }
    let (a1, a2) = (slot(basis, Mode::a(0))?, slot(basis, Mode::a(1))?);
    let nf = n as f64;
    let amps = basis
        .states()
        .iter()
        .map(|occ| {
            let (k1, k2) = (occ[a1], occ[a2]);
            let phase = (nf - 2.0 * k2 as f64) * omega * t;
            let alpha = C64::from_polar(FRAC_1_SQRT_2, phase);
            let beta = C64::from_polar(FRAC_1_SQRT_2, -phase);
            let node2 = (0.5 * ln_binomial(n, k2) - 0.5 * nf * std::f64::consts::LN_2).exp();
            coherent_amplitude(alpha, beta, n, k1) * node2
        })
        .collect();
    StateVector::new(basis, amps)
}

/// The entangled cat state reached at `Ωt = π/4`:
/// `e^{−iπN²/4}/2 [(P + M)|iᴺ/√2, 1/√2⟩⟩ + (P − M)|−iᴺ/√2, 1/√2⟩⟩]` with
/// `P, M = |±iᴺ/√2, 1/√2⟩⟩` on node 1. For N divisible by four this is the
/// familiar superposition of ±x coherent states.
pub fn analytic_cat_state(n: u32, basis: &Arc<BasisIndex>) -> Result<StateVector> {
    require_two_node_ab(basis)?;
    if n == 0 || basis.spec().bosons_per_node != n {
        return Err(Error::BasisMismatch(format!("cat state needs N >= 1 matching the basis, got {n}")));
    }
    let i_n = C64::new(0.0, 1.0).powu(n);
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let plus = (i_n * r, r);
    let minus = (-i_n * r, r);
    let global = C64::from_polar(0.5, -FRAC_PI_4 * (n as f64).powi(2));
    let mut amps = vec![ZERO; basis.dim()];
    for (node1, node2, sign) in [(plus, plus, 1.0), (minus, plus, 1.0), (plus, minus, 1.0), (minus, minus, -1.0)] {
        let branch = spin_coherent_product(basis, &[node1, node2])?;
        for (a, b) in amps.iter_mut().zip(branch.amplitudes()) {
            *a += global * sign * b;
        }
    }
    StateVector::new(basis, amps)
}

fn slot(basis: &BasisIndex, mode: Mode) -> Result<usize> {
    basis.spec().slot(mode).ok_or_else(|| Error::MissingMode(mode.to_string()))
}

/// Result of a forward/reverse sequence.
#[derive(Clone, Debug)]
pub struct EchoRun {
    /// Observables at every half-cycle boundary, plus a `cycle` column
    /// counting in steps of one half.
    pub trajectory: Trajectory,
    pub final_state: DensityMatrix,
}

/// Alternate evolution under `H` and `−H` (dissipators unchanged) for
/// `gate_time` each, `cycles` times, sampling observables at the end of
/// every leg.
///
/// `options.psd_checkpoints` is spread over the whole sequence rather than
/// applied to every leg.
pub fn run_echo_experiment(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    gate_time: f64,
    cycles: usize,
    observables: &Observables,
    options: &EvolveOptions,
) -> Result<EchoRun> {
    if !(gate_time > 0.0) {
        return Err(Error::InvalidParameter(format!("gate time must be > 0, got {gate_time}")));
    }
    if cycles == 0 {
        return Err(Error::InvalidParameter("echo needs at least one cycle".into()));
    }
    let legs = 2 * cycles;
    let reversed = model.reversed();
    let wanted = options.psd_checkpoints;
    let per_leg = wanted.div_ceil(legs);
    let check_every = legs.div_ceil(wanted.max(1));

    let mut times = vec![0.0];
    let mut cycle_col = vec![0.0];
    let mut series: Vec<Vec<f64>> = observables
        .iter()
        .map(|(_, op)| Ok(vec![expectation(rho0, op)?.re]))
        .collect::<Result<_>>()?;
    let mut diag = RunDiagnostics { psd_passed: true, ..Default::default() };
    let mut rho = rho0.clone();
    for leg in 0..legs {
        let m = if leg % 2 == 0 { model } else { &reversed };
        let checks = if wanted > 0 && ((leg + 1) % check_every == 0 || leg + 1 == legs) { per_leg } else { 0 };
        let opts = EvolveOptions { samples: checks.max(1) + 1, psd_checkpoints: checks, ..options.clone() };
        let run = evolve_master(m, &rho, gate_time, observables, &opts)?;
        for (s, (name, _)) in series.iter_mut().zip(observables) {
            s.push(*run.trajectory.observable(name)?.last().expect("non-empty grid"));
        }
        merge_diagnostics(&mut diag, &run.trajectory.diagnostics);
        rho = run.final_state;
        times.push((leg + 1) as f64 * gate_time);
        cycle_col.push(0.5 * (leg + 1) as f64);
    }
    let mut trajectory = Trajectory::new(times);
    trajectory.push_observable("cycle", cycle_col)?;
    for ((name, _), s) in observables.iter().zip(series) {
        trajectory.push_observable(*name, s)?;
    }
    trajectory.diagnostics = diag;
    Ok(EchoRun { trajectory, final_state: rho })
}

fn merge_diagnostics(into: &mut RunDiagnostics, from: &RunDiagnostics) {
    into.steps.accepted += from.steps.accepted;
    into.steps.rejected += from.steps.rejected;
    into.steps.rhs_evals += from.steps.rhs_evals;
    into.max_trace_drift = into.max_trace_drift.max(from.max_trace_drift);
    if let Some(m) = from.min_eigenvalue {
        into.min_eigenvalue = Some(into.min_eigenvalue.map_or(m, |x| x.min(m)));
    }
    into.psd_checks += from.psd_checks;
    into.psd_passed &= from.psd_passed;
    into.warnings.extend(from.warnings.iter().cloned());
}

/// Two-node cavity-loss setup: levels `{b, e}` per node, one collective
/// photon mode, and every state with at most N excitations so that photon
/// loss never leaves the basis.
pub fn cavity_basis(n: u32) -> Result<Arc<BasisIndex>> {
    enumerate_basis(ModeSpec::atoms(2, &[Level::B, Level::E], n).with_photon(n).with_sector(Sector::AtMost(n)))
}

/// Node 1 fully excited, node 2 fully in b, cavity empty, so ⟨F₁ᶻ⟩ = +N.
pub fn cavity_initial_state(basis: &Arc<BasisIndex>) -> Result<StateVector> {
    let n = basis.spec().bosons_per_node;
    let mut occ = vec![0; basis.spec().n_modes()];
    occ[slot(basis, Mode::e(0))?] = n;
    occ[slot(basis, Mode::b(1))?] = n;
    StateVector::fock(basis, &occ)
}

/// Gate time `π/(4NΩ₂)` with `Ω₂ = G²/Δ`.
pub fn cavity_gate_time(params: &PhysicalParams, n: u32) -> f64 {
    FRAC_PI_4 / (n as f64 * params.omega_exchange())
}

/// Echo of the photon-mediated exchange with cavity loss, tracking `Fz1`,
/// `Fz2` and the photon number `n_photon`.
pub fn run_cavity_echo(params: &PhysicalParams, n: u32, gate_time: f64, cycles: usize, options: &EvolveOptions) -> Result<EchoRun> {
    let basis = cavity_basis(n)?;
    let h = build_collective_entangler(params, &basis)?;
    let model = LindbladModel::new(h, vec![make_cavity_loss_channel(params, &basis)?])?;
    let rho0 = DensityMatrix::from_pure(&cavity_initial_state(&basis)?);
    let fz1 = pseudo_spin_z(&basis, 0)?;
    let fz2 = pseudo_spin_z(&basis, 1)?;
    let np = crate::fockspace::number_operator(&basis, Mode::Photon)?;
    run_echo_experiment(&model, &rho0, gate_time, cycles, &[("Fz1", &fz1), ("Fz2", &fz2), ("n_photon", &np)], options)
}

/// Number of echo cycles reaching one predicted decay time `1/Γ₂`, or
/// `fallback` when there is no loss.
pub fn cavity_echo_cycles(params: &PhysicalParams, n: u32, fallback: usize) -> usize {
    let g2 = params.cavity_g.powi(2) * params.gamma_c / params.delta.powi(2);
    if g2 <= 0.0 {
        return fallback;
    }
    ((1.0 / g2) / (2.0 * cavity_gate_time(params, n))).ceil().max(1.0) as usize
}

/// Excited fraction `(F₁ᶻ + N)/2N` of node 1 at every full-cycle return,
/// starting with t = 0.
pub fn echo_excited_returns(run: &EchoRun, n: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    let fz = run.trajectory.observable("Fz1")?;
    let nf = n as f64;
    Ok(run.trajectory.times.iter().zip(fz).step_by(2).map(|(&t, &v)| (t, (v + nf) / (2.0 * nf))).unzip())
}

/// Cavity echo and the exponential fit to its returns.
#[derive(Clone, Debug)]
pub struct CavityEchoFit {
    pub n: u32,
    pub gate_time: f64,
    pub cycles: usize,
    pub run: EchoRun,
    pub fit: DecayFit,
}

/// Run the cavity echo and fit the excited fraction at returns with
/// `t ≤ window`. The decay is not a single
/// exponential (bright and dark two-node modes lose photons differently), so
/// the window fixes which part of it the rate describes.
pub fn fit_cavity_echo(
    params: &PhysicalParams,
    n: u32,
    cycles: usize,
    window: f64,
    options: &EvolveOptions,
) -> Result<CavityEchoFit> {
    let gate_time = cavity_gate_time(params, n);
    let run = run_cavity_echo(params, n, gate_time, cycles, options)?;
    let (t, f) = echo_excited_returns(&run, n)?;
    let k = t.iter().filter(|&&x| x <= window * (1.0 + 1e-12)).count();
    let fit = fit_exponential(&t[..k], &f[..k], "echo-returns")?;
    Ok(CavityEchoFit { n, gate_time, cycles, run, fit })
}

/// SzSz evolution under collective dephasing along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingSetup {
    pub n: u32,
    /// SzSz coupling Ω.
    pub coupling: f64,
    pub axis: Axis,
    /// Dephasing rate Γ_z or Γ_x, depending on `axis`.
    pub rate: f64,
}

impl DephasingSetup {
    fn params(&self) -> PhysicalParams {
        PhysicalParams { gamma_x: self.rate, gamma_z: self.rate, n: self.n, ..Default::default() }
    }

    pub fn basis(&self) -> Result<Arc<BasisIndex>> {
        two_node_basis(self.n)
    }

    pub fn model(&self, basis: &Arc<BasisIndex>) -> Result<LindbladModel> {
        LindbladModel::new(build_szsz(self.coupling, basis)?, make_dephasing_channels(&self.params(), basis, self.axis)?)
    }

    /// Both nodes in `(1/√2, 1/√2)`.
    pub fn initial_state(&self, basis: &Arc<BasisIndex>) -> Result<StateVector> {
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        spin_coherent_state(r, r, self.n, basis)
    }
}

/// ⟨S₁ˣ⟩ and ⟨S₁ʸ⟩ under continuous SzSz evolution with dephasing.
pub fn run_dephasing_trajectory(setup: &DephasingSetup, t_final: f64, options: &EvolveOptions) -> Result<Trajectory> {
    let basis = setup.basis()?;
    let model = setup.model(&basis)?;
    let rho0 = DensityMatrix::from_pure(&setup.initial_state(&basis)?);
    let sx = collective_spin_operator(&basis, 0, Axis::X)?;
    let sy = collective_spin_operator(&basis, 0, Axis::Y)?;
    Ok(evolve_master(&model, &rho0, t_final, &[("Sx1", &sx), ("Sy1", &sy)], options)?.trajectory)
}

/// Same observables for z-dephasing, from the closed-form propagator at each
/// grid time.
pub fn analytic_z_trajectory(n: u32, coupling: f64, gamma_z: f64, t_final: f64, samples: usize) -> Result<Trajectory> {
    let setup = DephasingSetup { n, coupling, axis: Axis::Z, rate: gamma_z };
    let basis = setup.basis()?;
    let rho0 = DensityMatrix::from_pure(&setup.initial_state(&basis)?);
    let sx = collective_spin_operator(&basis, 0, Axis::X)?;
    let sy = collective_spin_operator(&basis, 0, Axis::Y)?;
    let grid = uniform_grid(t_final, samples);
    let (mut xs, mut ys) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for &t in &grid {
        let rho = analytic_z_dephasing(&rho0, gamma_z, coupling, t)?;
        xs.push(expectation(&rho, &sx)?.re);
        ys.push(expectation(&rho, &sy)?.re);
    }
    let mut traj = Trajectory::new(grid);
    traj.push_observable("Sx1", xs)?;
    traj.push_observable("Sy1", ys)?;
    traj.diagnostics.psd_passed = true;
    Ok(traj)
}

/// Dephasing echo with the error `1 − ⟨S₁ˣ⟩/N` after every full cycle.
#[derive(Clone, Debug)]
pub struct DephasingEcho {
    pub run: EchoRun,
    pub cycle_errors: Vec<f64>,
}

pub fn run_dephasing_echo(setup: &DephasingSetup, gate_time: f64, cycles: usize, options: &EvolveOptions) -> Result<DephasingEcho> {
    let basis = setup.basis()?;
    let model = setup.model(&basis)?;
    let rho0 = DensityMatrix::from_pure(&setup.initial_state(&basis)?);
    let sx = collective_spin_operator(&basis, 0, Axis::X)?;
    let run = run_echo_experiment(&model, &rho0, gate_time, cycles, &[("Sx1", &sx)], options)?;
    let nf = setup.n as f64;
    let cycle_errors = run.trajectory.observable("Sx1")?.iter().skip(2).step_by(2).map(|v| 1.0 - v / nf).collect();
    Ok(DephasingEcho { run, cycle_errors })
}

/// Full-model vs effective-Hamiltonian comparison over one effective period.
#[derive(Clone, Debug, Serialize)]
pub struct EliminationReport {
    pub n: u32,
    pub times: Vec<f64>,
    /// Overlap of the ground-manifold component with the effective state,
    /// maximized over independent z rotations of the two nodes.
    pub fidelities: Vec<f64>,
    /// Population outside the manifold with no excited atoms and no photon.
    pub leakage: Vec<f64>,
    pub min_fidelity: f64,
    pub max_leakage: f64,
}

/// Largest `|Σ w e^{i(θ₁s₁ + θ₂s₂)}|²` over the rotation angles. Spins move
/// in steps of two, so the angles live on `[0, π)`.
fn best_rotation_overlap(terms: &[(C64, f64, f64)]) -> f64 {
    let overlap = |t1: f64, t2: f64| -> f64 {
        terms.iter().map(|&(w, s1, s2)| w * C64::from_polar(1.0, t1 * s1 + t2 * s2)).sum::<C64>().norm_sqr()
    };
    const GRID: usize = 48;
    let mut step = PI / GRID as f64;
    let (mut best, mut b1, mut b2) = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..GRID {
        for j in 0..GRID {
            let (t1, t2) = (i as f64 * step, j as f64 * step);
            let v = overlap(t1, t2);
            if v > best {
                (best, b1, b2) = (v, t1, t2);
            }
        }
    }
    while step > 1e-9 {
        step *= 0.5;
        let (c1, c2) = (b1, b2);
        for di in -2..=2 {
            for dj in -2..=2 {
                let (t1, t2) = (c1 + di as f64 * step, c2 + dj as f64 * step);
                let v = overlap(t1, t2);
                if v > best {
                    (best, b1, b2) = (v, t1, t2);
                }
            }
        }
    }
    best
}

/// Evolve two `(1/√2, 1/√2)` coherent nodes under the full pump + cavity
/// model (levels a, b, e and a collective photon truncated at
/// `photon_cutoff`) and compare with the effective two-node Hamiltonian at
/// `points` times over one period `2π/Ω`.
///
/// Linear Sᶻ terms depend on the rotating frame, so each comparison is taken
/// up to a z rotation on each node.
pub fn validate_elimination(params: &PhysicalParams, n: u32, photon_cutoff: u32, points: usize) -> Result<EliminationReport> {
    if points < 2 {
        return Err(Error::InvalidParameter("need at least two comparison times".into()));
    }
    let full = enumerate_basis(ModeSpec::atoms(2, &[Level::A, Level::B, Level::E], n).with_photon(photon_cutoff))?;
    let eff = two_node_basis(n)?;
    let half = C64::new(FRAC_1_SQRT_2, 0.0);
    let psi_full = spin_coherent_product(&full, &[(half, half); 2])?;
    let psi_eff = spin_coherent_product(&eff, &[(half, half); 2])?;
    let prop = SpectralPropagator::new(&build_full_model(params, &full)?);
    let h_eff = build_effective_two_node(params, &eff)?;

    let slot = |b: &BasisIndex, m: Mode| b.spec().slot(m).expect("mode present");
    let (fa1, fb1, fa2, fb2) = (slot(&full, Mode::a(0)), slot(&full, Mode::b(0)), slot(&full, Mode::a(1)), slot(&full, Mode::b(1)));
    let (ea1, eb1, ea2, eb2) = (slot(&eff, Mode::a(0)), slot(&eff, Mode::b(0)), slot(&eff, Mode::a(1)), slot(&eff, Mode::b(1)));
    // Ground-manifold full index for each effective basis state.
    let mut ground = vec![0usize; eff.dim()];
    for (i, occ) in full.states().iter().enumerate() {
        if occ[fa1] + occ[fb1] == n && occ[fa2] + occ[fb2] == n && occ.iter().sum::<u32>() == 2 * n {
            let mut e_occ = vec![0; eff.spec().n_modes()];
            (e_occ[ea1], e_occ[eb1], e_occ[ea2], e_occ[eb2]) = (occ[fa1], occ[fb1], occ[fa2], occ[fb2]);
            ground[eff.index_of(&e_occ).expect("ground state in effective basis")] = i;
        }
    }
    let spins: Vec<(f64, f64)> = eff
        .states()
        .iter()
        .map(|o| (o[ea1] as f64 - o[eb1] as f64, o[ea2] as f64 - o[eb2] as f64))
        .collect();

    let period = 2.0 * PI / params.omega_eff().abs();
    let times = uniform_grid(period, points);
    let (mut fidelities, mut leakage) = (Vec::with_capacity(points), Vec::with_capacity(points));
    for &t in &times {
        let f = prop.apply(&psi_full, t)?;
        let e = propagate_unitary(&h_eff, &psi_eff, t)?;
        let fa = f.amplitudes();
        let terms: Vec<(C64, f64, f64)> = (0..eff.dim())
            .map(|k| (e.amplitudes()[k].conj() * fa[ground[k]], spins[k].0, spins[k].1))
            .collect();
        let kept: f64 = ground.iter().map(|&i| fa[i].norm_sqr()).sum();
        fidelities.push(best_rotation_overlap(&terms));
        leakage.push(1.0 - kept);
    }
    let min_fidelity = fidelities.iter().copied().fold(f64::INFINITY, f64::min);
    let max_leakage = leakage.iter().copied().fold(0.0, f64::max);
    Ok(EliminationReport { n, times, fidelities, leakage, min_fidelity, max_leakage })
}

/// Gate-time probe points, given as values of Ωt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateTime {
    /// π/4N, the short gate.
    PiOver4N,
    /// 1/(2√N), the robustness threshold.
    InvTwoSqrtN,
    /// π/4, the cat-state time.
    PiOver4,
}

impl GateTime {
    pub const ALL: [GateTime; 3] = [GateTime::PiOver4N, GateTime::InvTwoSqrtN, GateTime::PiOver4];

    /// Ωt for `n` bosons per node.
    pub fn omega_t(self, n: u32) -> f64 {
        let nf = n as f64;
        match self {
            GateTime::PiOver4N => FRAC_PI_4 / nf,
            GateTime::InvTwoSqrtN => 0.5 / nf.sqrt(),
            GateTime::PiOver4 => FRAC_PI_4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GateTime::PiOver4N => "pi/4N",
            GateTime::InvTwoSqrtN => "1/(2sqrtN)",
            GateTime::PiOver4 => "pi/4",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{evolve_unitary, propagate_unitary};

    #[test]
    fn cat_state_matches_evolution_small_n() {
        for n in 1..=6 {
            let basis = two_node_basis(n).unwrap();
            let setup = DephasingSetup { n, coupling: 1.0, axis: Axis::Z, rate: 0.0 };
            let psi0 = setup.initial_state(&basis).unwrap();
            let h = build_szsz(1.0, &basis).unwrap();
            let evolved = propagate_unitary(&h, &psi0, FRAC_PI_4).unwrap();
            let cat = analytic_cat_state(n, &basis).unwrap();
            assert!((cat.norm() - 1.0).abs() < 1e-12, "N={n}");
            assert!(1.0 - cat.fidelity(&evolved).unwrap() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn entangled_state_matches_evolution() {
        let n = 6;
        let basis = two_node_basis(n).unwrap();
        let psi0 = analytic_entangled_state(n, 1.0, 0.0, &basis).unwrap();
        let h = build_szsz(0.7, &basis).unwrap();
        let run = evolve_unitary(&h, &psi0, 1.3, &[], &EvolveOptions::default().with_samples(2)).unwrap();
        let target = analytic_entangled_state(n, 0.7, 1.3, &basis).unwrap();
        for (a, b) in run.final_state.amplitudes().iter().zip(target.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gate_protocol_zero_time_is_identity() {
        let basis = two_node_basis(3).unwrap();
        let psi = analytic_entangled_state(3, 1.0, 0.0, &basis).unwrap();
        let out = run_gate_protocol(&PhysicalParams::default(), 0.0, &psi).unwrap();
        assert!(1.0 - out.fidelity(&psi).unwrap() < 1e-15);
        assert!(run_gate_protocol(&PhysicalParams::default(), -1.0, &psi).is_err());
    }

    #[test]
    fn cavity_start_is_fully_inverted() {
        let basis = cavity_basis(3).unwrap();
        let psi = cavity_initial_state(&basis).unwrap();
        let fz1 = pseudo_spin_z(&basis, 0).unwrap();
        let fz2 = pseudo_spin_z(&basis, 1).unwrap();
        assert_eq!(crate::fockspace::expectation(&psi, &fz1).unwrap().re, 3.0);
        assert_eq!(crate::fockspace::expectation(&psi, &fz2).unwrap().re, -3.0);
    }

    #[test]
    fn closed_echo_returns_exactly() {
        let setup = DephasingSetup { n: 3, coupling: 1.0, axis: Axis::X, rate: 0.0 };
        let echo = run_dephasing_echo(&setup, 0.4, 3, &EvolveOptions::default()).unwrap();
        assert_eq!(echo.cycle_errors.len(), 3);
        for e in &echo.cycle_errors {
            assert!(e.abs() < 1e-8);
        }
        assert_eq!(echo.run.trajectory.observable("cycle").unwrap(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    }
}
