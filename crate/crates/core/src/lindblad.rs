//! Master-equation and unitary time evolution.
//!
//! The Lindblad generator is `dρ/dt = −i[H, ρ] + Σ Γ (LρL† − ½{L†L, ρ})`.
//! Evolution runs by default in the interaction picture of the diagonal part
//! of `H`, which removes the fast bare-energy phases from the integrated
//! variables; a purely diagonal closed system is propagated exactly.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fockspace::{
    bilinear_operator, collective_spin_operator, expectation_flat, hermitize, photon_lowering, psd_probe, Axis,
    BasisIndex, DensityMatrix, Expectation, Level, Mode, Operator, StateVector, C64, I, ZERO,
};
use crate::hamiltonians::PhysicalParams;
use crate::integrate::{integrate, uniform_grid, StepStats, Tolerances};

#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub rate: f64,
    pub jump: Operator,
    pub label: String,
}

impl JumpChannel {
    pub fn new(rate: f64, jump: Operator, label: impl Into<String>) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("channel rate must be finite and >= 0, got {rate}")));
        }
        Ok(Self { rate, jump, label: label.into() })
    }
}

#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub hamiltonian: Operator,
    pub channels: Vec<JumpChannel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, channels: Vec<JumpChannel>) -> Result<Self> {
        for c in &channels {
            if !c.jump.basis().compatible(hamiltonian.basis()) {
                return Err(Error::BasisMismatch(format!("channel '{}'", c.label)));
            }
        }
        Ok(Self { hamiltonian, channels })
    }

    pub fn closed(hamiltonian: Operator) -> Self {
        Self { hamiltonian, channels: Vec::new() }
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        self.hamiltonian.basis()
    }

    /// Same channels, Hamiltonian negated.
    pub fn reversed(&self) -> Self {
        Self { hamiltonian: -&self.hamiltonian, channels: self.channels.clone() }
    }
}

/// Frame in which the density matrix is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Interaction frame when H is diagonal, lab frame otherwise.
    Auto,
    /// Rotate away the diagonal part of H.
    Interaction,
    Lab,
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub tolerances: Tolerances,
    /// Points on the uniform output grid, endpoints included.
    pub samples: usize,
    pub trace_tol: f64,
    pub psd_checkpoints: usize,
    pub psd_tol: f64,
    /// Permit bases larger than [`DIMENSION_BUDGET`].
    pub allow_large: bool,
    pub frame: Frame,
    /// Keep the density matrix at every positivity checkpoint.
    pub store_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            samples: 2000,
            trace_tol: 1e-8,
            psd_checkpoints: 10,
            psd_tol: 1e-6,
            allow_large: false,
            frame: Frame::Auto,
            store_states: false,
        }
    }
}

impl EvolveOptions {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

/// Largest basis evolve_master accepts without `allow_large`.
pub const DIMENSION_BUDGET: usize = 4096;

/// Health of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunDiagnostics {
    pub steps: StepStats,
    pub max_trace_drift: f64,
    /// Smallest eigenvalue seen at checkpoints where it was computed exactly.
    pub min_eigenvalue: Option<f64>,
    pub psd_checks: usize,
    pub psd_passed: bool,
    pub warnings: Vec<String>,
}

/// Sampled expectation values.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub observables: Vec<(String, Vec<f64>)>,
    pub states: Vec<(f64, DensityMatrix)>,
    pub diagnostics: RunDiagnostics,
}

impl Trajectory {
    pub fn new(times: Vec<f64>) -> Self {
        Self { times, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observable(&self, name: &str) -> Result<&[f64]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownObservable(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.observables.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Add a series; its length must match `times`.
    pub fn push_observable(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::DimensionMismatch { expected: self.times.len(), got: values.len() });
        }
        self.observables.push((name.into(), values));
        Ok(())
    }

    /// CSV with a `# comment` line, a header row, then one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> std::io::Result<()> {
        writeln!(w, "# {comment}")?;
        let mut header = vec!["time".to_string()];
        header.extend(self.observables.iter().map(|(n, _)| n.clone()));
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt17(*t)];
            row.extend(self.observables.iter().map(|(_, v)| fmt17(v[i])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits, deterministic.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Result of a master-equation run.
#[derive(Clone, Debug)]
pub struct MasterRun {
    pub trajectory: Trajectory,
    pub final_state: DensityMatrix,
}

/// Result of a unitary run.
#[derive(Clone, Debug)]
pub struct UnitaryRun {
    pub trajectory: Trajectory,
    pub final_state: StateVector,
}

/// Observables as `(name, operator)` pairs.
pub type Observables<'a> = [(&'a str, &'a Operator)];

/// Matrices below this many entries are processed on the calling thread.
const PARALLEL_MIN: usize = 1 << 14;

/// Apply `f(row_index, row)` to every row of a row-major `n × n` matrix.
fn for_each_row<F>(m: &mut [C64], n: usize, f: F)
where
    F: Fn(usize, &mut [C64]) + Sync + Send,
{
    if m.len() < PARALLEL_MIN {
        m.chunks_mut(n).enumerate().for_each(|(i, row)| f(i, row));
    } else {
        m.par_chunks_mut(n).enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// Sparse term whose entries carry the interaction-picture phases
/// e^{i(dᵢ − dⱼ)t}.
struct Term {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    base: Vec<C64>,
    gaps: Vec<f64>,
}

impl Term {
    fn new(op: &Operator, diag: &[f64]) -> Self {
        let (row_ptr, cols, vals) = op.csr();
        let mut gaps = Vec::with_capacity(cols.len());
        for i in 0..op.dim() {
            gaps.extend(cols[row_ptr[i]..row_ptr[i + 1]].iter().map(|&j| diag[i] - diag[j]));
        }
        Self { row_ptr: row_ptr.to_vec(), cols: cols.to_vec(), base: vals.to_vec(), gaps }
    }

    /// Entries at time `t`, scaled by `s`.
    fn values(&self, t: f64, s: C64, out: &mut Vec<C64>) {
        out.clear();
        out.extend(self.base.iter().zip(&self.gaps).map(|(v, &g)| {
            if g == 0.0 {
                v * s
            } else {
                v * s * C64::from_polar(1.0, g * t)
            }
        }));
    }

    /// `out (+)= A m` with `A` carrying entries `vals`.
    fn left_mul(&self, vals: &[C64], m: &[C64], out: &mut [C64], n: usize, accumulate: bool) {
        for_each_row(out, n, |i, row| {
            if !accumulate {
                row.iter_mut().for_each(|x| *x = ZERO);
            }
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = vals[p];
                let src = &m[self.cols[p] * n..(self.cols[p] + 1) * n];
                for (o, &x) in row.iter_mut().zip(src) {
                    *o += a * x;
                }
            }
        });
    }

    /// `out (+)= m A†`, where `conj_vals` holds the conjugated entries of A.
    fn right_mul_adjoint(&self, conj_vals: &[C64], m: &[C64], out: &mut [C64], n: usize, accumulate: bool) {
        for_each_row(out, n, |r, row| {
            let src = &m[r * n..(r + 1) * n];
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = ZERO;
                for p in self.row_ptr[j]..self.row_ptr[j + 1] {
                    s += src[self.cols[p]] * conj_vals[p];
                }
                if accumulate {
                    *o += s;
                } else {
                    *o = s;
                }
            }
        });
    }
}

struct Generator {
    n: usize,
    diag: Vec<f64>,
    rotating: bool,
    /// H − (i/2) Σ Γ L†L, diagonal of H removed in the interaction frame.
    h_eff: Term,
    jumps: Vec<(f64, Term)>,
}

impl Generator {
    fn new(model: &LindbladModel, frame: Frame) -> Self {
        let n = model.basis().dim();
        let frame = match frame {
            Frame::Auto if model.hamiltonian.is_diagonal() => Frame::Interaction,
            Frame::Auto => Frame::Lab,
            f => f,
        };
        let (diag, h) = match frame {
            Frame::Auto | Frame::Interaction => {
                (model.hamiltonian.diagonal_entries().iter().map(|z| z.re).collect(), model.hamiltonian.off_diagonal())
            }
            Frame::Lab => (vec![0.0; n], model.hamiltonian.clone()),
        };
        let rotating = diag.iter().any(|&d| d != 0.0);
        let mut h_eff = h;
        let mut jumps = Vec::new();
        for c in &model.channels {
            if c.rate == 0.0 || c.jump.nnz() == 0 {
                continue;
            }
            let ldl = &c.jump.adjoint() * &c.jump;
            h_eff = &h_eff + &ldl.scale(C64::new(0.0, -0.5 * c.rate));
            jumps.push((c.rate, Term::new(&c.jump, &diag)));
        }
        Self { n, h_eff: Term::new(&h_eff, &diag), diag, rotating, jumps }
    }

    fn is_trivial(&self) -> bool {
        self.jumps.is_empty() && self.h_eff.base.is_empty()
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.diag.iter().map(|&d| C64::from_polar(1.0, -d * t)).collect()
    }

    /// Frame → lab: ρᵢⱼ = uᵢ ρ̃ᵢⱼ ūⱼ.
    fn to_lab(&self, u: &[C64], src: &[C64], dst: &mut [C64]) {
        let n = self.n;
        for_each_row(dst, n, |i, d| {
            let s = &src[i * n..(i + 1) * n];
            let ui = u[i];
            for j in 0..n {
                d[j] = ui * s[j] * u[j].conj();
            }
        });
    }

    /// −i H_eff ρ + i ρ H_eff† + Σ Γ LρL†, all operators in the current frame.
    fn rhs(&self, t: f64, y: &[C64], out: &mut [C64], work: &mut Work) {
        let n = self.n;
        self.h_eff.values(t, -I, &mut work.vals);
        self.h_eff.left_mul(&work.vals, y, out, n, false);
        // y is Hermitian, so i y H_eff† is the adjoint of −i H_eff y.
        add_adjoint_in_place(out, n);
        for (rate, l) in &self.jumps {
            l.values(t, C64::new(1.0, 0.0), &mut work.vals);
            work.conj.clear();
            work.conj.extend(work.vals.iter().map(|v| v.conj()));
            l.right_mul_adjoint(&work.conj, y, &mut work.x, n, false);
            work.vals.iter_mut().for_each(|v| *v *= *rate);
            l.left_mul(&work.vals, &work.x, out, n, true);
        }
    }
}

/// `m ← m + m†` for a square row-major matrix, in cache blocks.
fn add_adjoint_in_place(m: &mut [C64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let j0 = if bi == bj { i } else { bj };
                for j in j0..(bj + B).min(n) {
                    if i == j {
                        let d = m[i * n + i];
                        m[i * n + i] = C64::new(2.0 * d.re, 0.0);
                    } else {
                        let a = m[i * n + j];
                        let b = m[j * n + i];
                        m[i * n + j] = a + b.conj();
                        m[j * n + i] = b + a.conj();
                    }
                }
            }
        }
    }
}

struct Work {
    vals: Vec<C64>,
    conj: Vec<C64>,
    x: Vec<C64>,
}

fn check_same_basis(a: &BasisIndex, b: &BasisIndex, what: &str) -> Result<()> {
    if a.compatible(b) {
        Ok(())
    } else {
        Err(Error::BasisMismatch(what.to_string()))
    }
}

/// tr(ρ O) for ρ stored in the rotating frame.
fn frame_expectation(op: &Operator, rho_frame: &[C64], u: Option<&[C64]>) -> C64 {
    match u {
        None => expectation_flat(op, rho_frame),
        Some(u) => {
            let n = op.dim();
            op.triplets().map(|(i, j, v)| v * u[j] * rho_frame[j * n + i] * u[i].conj()).sum()
        }
    }
}

/// Evolve `rho0` under the master equation up to `t_final`, sampling the
/// observables on a uniform grid.
pub fn evolve_master(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    observables: &Observables,
    options: &EvolveOptions,
) -> Result<MasterRun> {
    let basis = model.basis();
    check_same_basis(basis, rho0.basis(), "initial state")?;
    for (name, op) in observables {
        check_same_basis(basis, op.basis(), name)?;
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!("t_final must be > 0, got {t_final}")));
    }
    let n = basis.dim();
    if n > DIMENSION_BUDGET && !options.allow_large {
        return Err(Error::DimensionBudget { dim: n, limit: DIMENSION_BUDGET });
    }

    let generator = Generator::new(model, options.frame);
    let grid = uniform_grid(t_final, options.samples);
    let mut trajectory = Trajectory::new(grid.clone());
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); observables.len()];
    let checkpoints: Vec<usize> = {
        let k = options.psd_checkpoints.min(grid.len());
        (1..=k).map(|c| (c * (grid.len() - 1)) / k.max(1)).collect()
    };
    let mut diag = RunDiagnostics { psd_passed: true, ..Default::default() };
    let mut stored = Vec::new();

    let mut y0 = rho0.entries().to_vec();
    hermitize(&mut y0, n);
    let tr0 = (0..n).map(|i| y0[i * n + i].re).sum::<f64>();
    let mut max_drift = (tr0 - 1.0).abs();
    if max_drift > options.trace_tol {
        return Err(Error::TraceDrift { time: 0.0, trace: tr0, tol: options.trace_tol });
    }

    let closed_diagonal = generator.is_trivial();
    let rotating = generator.rotating;

    let mut sample = |idx: usize, t: f64, y: &[C64]| -> Result<()> {
        let u = rotating.then(|| generator.phases(t));
        for (s, (_, op)) in series.iter_mut().zip(observables) {
            s.push(frame_expectation(op, y, u.as_deref()).re);
        }
        if checkpoints.contains(&idx) {
            let mut lab = vec![ZERO; n * n];
            match &u {
                Some(u) => generator.to_lab(u, y, &mut lab),
                None => lab.copy_from_slice(y),
            }
            let rho = DensityMatrix::new(basis, lab)?;
            let probe = psd_probe(&rho, options.psd_tol);
            diag.psd_checks += 1;
            if let Some(m) = probe.min_eigenvalue {
                diag.min_eigenvalue = Some(diag.min_eigenvalue.map_or(m, |x: f64| x.min(m)));
            }
            if !probe.passed {
                diag.psd_passed = false;
                diag.warnings.push(format!("negative eigenvalue below -{} at t = {t}", options.psd_tol));
            }
            if options.store_states {
                stored.push((t, rho));
            }
        }
        Ok(())
    };

    let y_final = if closed_diagonal {
        for (idx, &t) in grid.iter().enumerate() {
            sample(idx, t, &y0)?;
        }
        y0
    } else {
        let mut work = Work { vals: Vec::new(), conj: Vec::new(), x: vec![ZERO; n * n] };
        let trace_tol = options.trace_tol;
        let (y, stats) = integrate(
            |t, y, out| generator.rhs(t, y, out, &mut work),
            0.0,
            y0,
            &grid,
            &options.tolerances,
            &mut sample,
            |t, y| {
                hermitize(y, n);
                let tr = (0..n).map(|i| y[i * n + i].re).sum::<f64>();
                let drift = (tr - 1.0).abs();
                max_drift = max_drift.max(drift);
                if drift > trace_tol {
                    return Err(Error::TraceDrift { time: t, trace: tr, tol: trace_tol });
                }
                Ok(())
            },
        )?;
        diag.steps = stats;
        y
    };

    diag.max_trace_drift = max_drift;
    let mut lab = vec![ZERO; n * n];
    if rotating {
        generator.to_lab(&generator.phases(t_final), &y_final, &mut lab);
    } else {
        lab.copy_from_slice(&y_final);
    }
    for ((name, _), values) in observables.iter().zip(series) {
        trajectory.push_observable(*name, values)?;
    }
    trajectory.states = stored;
    trajectory.diagnostics = diag;
    Ok(MasterRun { trajectory, final_state: DensityMatrix::new(basis, lab)? })
}

/// Final state only, with no observables and a two-point grid.
pub fn propagate_master(model: &LindbladModel, rho0: &DensityMatrix, t: f64, options: &EvolveOptions) -> Result<MasterRun> {
    let opts = EvolveOptions { samples: 2, ..options.clone() };
    evolve_master(model, rho0, t, &[], &opts)
}

/// Cached eigendecomposition of a Hermitian Hamiltonian.
pub struct SpectralPropagator {
    basis: Arc<BasisIndex>,
    energies: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl SpectralPropagator {
    pub fn new(h: &Operator) -> Self {
        let eig = h.to_dense().symmetric_eigen();
        Self { basis: Arc::clone(h.basis()), energies: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// e^{−iHt}ψ.
    pub fn apply(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        check_same_basis(&self.basis, psi.basis(), "state")?;
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mut c = self.vectors.adjoint() * v;
        for (ci, e) in c.iter_mut().zip(&self.energies) {
            *ci *= C64::from_polar(1.0, -e * t);
        }
        let out = &self.vectors * c;
        StateVector::new(&self.basis, out.iter().copied().collect())
    }
}

/// Largest dimension propagated by full diagonalization.
const SPECTRAL_DIM: usize = 1500;

/// Evolve a pure state under `h`. Diagonal Hamiltonians get exact phases,
/// small ones exact spectral propagation, the rest adaptive Runge–Kutta.
pub fn evolve_unitary(
    h: &Operator,
    psi0: &StateVector,
    t_final: f64,
    observables: &Observables,
    options: &EvolveOptions,
) -> Result<UnitaryRun> {
    check_same_basis(h.basis(), psi0.basis(), "initial state")?;
    for (name, op) in observables {
        check_same_basis(h.basis(), op.basis(), name)?;
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_final must be >= 0, got {t_final}")));
    }
    let grid = uniform_grid(t_final, options.samples);
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); observables.len()];
    let mut record = |psi: &StateVector| -> Result<()> {
        for (s, (_, op)) in series.iter_mut().zip(observables) {
            s.push(psi.expectation(op)?.re);
        }
        Ok(())
    };
    let mut diag = RunDiagnostics { psd_passed: true, ..Default::default() };

    let final_state = if h.is_diagonal() {
        let e: Vec<f64> = h.diagonal_entries().iter().map(|z| z.re).collect();
        let evolve = |t: f64| {
            let amps = psi0.amplitudes().iter().zip(&e).map(|(a, &ek)| a * C64::from_polar(1.0, -ek * t)).collect();
            StateVector::new(h.basis(), amps)
        };
        for &t in &grid {
            record(&evolve(t)?)?;
        }
        evolve(t_final)?
    } else if h.dim() <= SPECTRAL_DIM {
        let prop = SpectralPropagator::new(h);
        for &t in &grid {
            record(&prop.apply(psi0, t)?)?;
        }
        prop.apply(psi0, t_final)?
    } else {
        let basis = Arc::clone(h.basis());
        let (y, stats) = integrate(
            |_, y, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = -I * h.row(i).map(|(j, v)| v * y[j]).sum::<C64>();
                }
            },
            0.0,
            psi0.amplitudes().to_vec(),
            &grid,
            &options.tolerances,
            |_, _, y| record(&StateVector::new(&basis, y.to_vec())?),
            |_, _| Ok(()),
        )?;
        diag.steps = stats;
        StateVector::new(&basis, y)?
    };

    let mut trajectory = Trajectory::new(grid);
    for ((name, _), values) in observables.iter().zip(series) {
        trajectory.push_observable(*name, values)?;
    }
    trajectory.diagnostics = diag;
    Ok(UnitaryRun { trajectory, final_state })
}

/// e^{−iHt}ψ without sampling.
pub fn propagate_unitary(h: &Operator, psi0: &StateVector, t: f64) -> Result<StateVector> {
    let opts = EvolveOptions { samples: 2, ..Default::default() };
    Ok(evolve_unitary(h, psi0, t, &[], &opts)?.final_state)
}

/// Decay of the excited level into both ground states, `a†e` and `b†e` at
/// rate Γ_s, on every node.
pub fn make_spontaneous_emission_channels(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Vec<JumpChannel>> {
    let mut out = Vec::new();
    for node in 0..basis.spec().nodes {
        for ground in [Level::A, Level::B] {
            let g = Mode::Atom { node, level: ground };
            let jump = bilinear_operator(basis, g, Mode::e(node))?;
            out.push(JumpChannel::new(params.gamma_s, jump, format!("{g}†e{}", node + 1))?);
        }
    }
    Ok(out)
}

/// Cavity photon loss, jump `p` at rate Γ_c.
pub fn make_cavity_loss_channel(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<JumpChannel> {
    JumpChannel::new(params.gamma_c, photon_lowering(basis)?, "p")
}

/// Collective dephasing, one channel `S_n^j` per node at rate Γ_j.
pub fn make_dephasing_channels(params: &PhysicalParams, basis: &Arc<BasisIndex>, axis: Axis) -> Result<Vec<JumpChannel>> {
    let rate = match axis {
        Axis::Z => params.gamma_z,
        Axis::X => params.gamma_x,
        Axis::Y => return Err(Error::InvalidParameter("dephasing axis must be x or z".into())),
    };
    (0..basis.spec().nodes)
        .map(|node| {
            let s = collective_spin_operator(basis, node, axis)?;
            let label = s.label().to_string();
            JumpChannel::new(rate, s, label)
        })
        .collect()
}

/// Closed-form solution of SzSz evolution `Ω S₁ᶻS₂ᶻ` with z-dephasing at
/// rate Γ_z on both nodes.
pub fn analytic_z_dephasing(rho0: &DensityMatrix, gamma_z: f64, omega: f64, t: f64) -> Result<DensityMatrix> {
    let basis = rho0.basis();
    let spec = basis.spec();
    if spec.nodes != 2 || !spec.has(Mode::a(0)) || !spec.has(Mode::b(0)) || spec.levels.len() != 2 || spec.photon_modes != 0 {
        return Err(Error::BasisMismatch("analytic z-dephasing needs a two-node {a, b} basis".into()));
    }
    let nb = spec.bosons_per_node as f64;
    let n = basis.dim();
    let ks: Vec<(f64, f64)> = (0..n)
        .map(|i| (basis.occupation(i, Mode::a(0)).unwrap() as f64, basis.occupation(i, Mode::a(1)).unwrap() as f64))
        .collect();
    let mut out = rho0.entries().to_vec();
    for i in 0..n {
        let (k1, k2) = ks[i];
        let e_i = (2.0 * k1 - nb) * (2.0 * k2 - nb);
        for j in 0..n {
            let (l1, l2) = ks[j];
            let e_j = (2.0 * l1 - nb) * (2.0 * l2 - nb);
            let damp = (-2.0 * gamma_z * ((k1 - l1).powi(2) + (k2 - l2).powi(2)) * t).exp();
            out[i * n + j] *= C64::from_polar(damp, -omega * (e_i - e_j) * t);
        }
    }
    DensityMatrix::new(basis, out)
}
