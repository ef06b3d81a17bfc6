//! Hamiltonian builders for the cavity/fiber network and its effective
//! descriptions after adiabatic elimination. Units have ħ = 1.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{
    bilinear_operator, number_operator, photon_assisted_operator, BasisIndex, Level, Mode, Operator, PhotonLadder,
    C64, ZERO,
};

/// Couplings, detunings and decoherence rates.
///
/// The transition frequency is derived as `omega0 = delta + omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Cavity coupling G.
    #[serde(rename = "G")]
    pub cavity_g: f64,
    /// Pump coupling g.
    #[serde(rename = "g")]
    pub pump_g: f64,
    /// Detuning Δ = ω₀ − ω.
    #[serde(rename = "Delta")]
    pub delta: f64,
    /// Cavity photon frequency ω.
    pub omega: f64,
    /// Cavity–fiber coupling ν.
    pub nu: f64,
    /// Fiber propagation phase φ.
    pub phi: f64,
    /// Bosons per node.
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "Gamma_s")]
    pub gamma_s: f64,
    #[serde(rename = "Gamma_c")]
    pub gamma_c: f64,
    #[serde(rename = "Gamma_z")]
    pub gamma_z: f64,
    #[serde(rename = "Gamma_x")]
    pub gamma_x: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            cavity_g: 1.0,
            pump_g: 1.0,
            delta: 10.0,
            omega: 0.0,
            nu: 1.0,
            phi: 0.0,
            n: 1,
            gamma_s: 0.1,
            gamma_c: 1.0,
            gamma_z: 0.1,
            gamma_x: 0.01,
        }
    }
}

impl PhysicalParams {
    pub fn omega0(&self) -> f64 {
        self.delta + self.omega
    }

    /// Effective SzSz coupling Ω = G²g²/2Δ³.
    pub fn omega_eff(&self) -> f64 {
        self.cavity_g.powi(2) * self.pump_g.powi(2) / (2.0 * self.delta.powi(3))
    }

    /// Self-interaction strength with the fiber blocked, Ω' = G²g²/Δ'³.
    pub fn omega_blocked(&self, delta_prime: f64) -> f64 {
        self.cavity_g.powi(2) * self.pump_g.powi(2) / delta_prime.powi(3)
    }

    /// Photon-mediated exchange rate Ω₂ = G²/Δ.
    pub fn omega_exchange(&self) -> f64 {
        self.cavity_g.powi(2) / self.delta
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.cavity_g,
            self.pump_g,
            self.delta,
            self.omega,
            self.nu,
            self.phi,
            self.gamma_s,
            self.gamma_c,
            self.gamma_z,
            self.gamma_x,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite physical parameter".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        for (name, v) in [
            ("Gamma_s", self.gamma_s),
            ("Gamma_c", self.gamma_c),
            ("Gamma_z", self.gamma_z),
            ("Gamma_x", self.gamma_x),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn need_levels(basis: &BasisIndex, levels: &[Level], nodes: usize, photon: bool) -> Result<()> {
    let spec = basis.spec();
    if spec.nodes != nodes {
        return Err(Error::BasisMismatch(format!("need {nodes} node(s), basis has {}", spec.nodes)));
    }
    for l in levels {
        if !spec.levels.contains(l) {
            return Err(Error::MissingMode(format!("level {l}")));
        }
    }
    if photon && spec.photon_modes == 0 {
        return Err(Error::MissingMode("photon mode".into()));
    }
    Ok(())
}

fn sum(basis: &Arc<BasisIndex>, label: &str, terms: Vec<Operator>) -> Operator {
    terms.iter().fold(Operator::zero(basis), |acc, t| &acc + t).with_label(label)
}

/// Diagonal operator from a function of the node spins `(s1, s2)`,
/// `s = n_a − n_b`.
fn spin_diagonal(basis: &Arc<BasisIndex>, label: &str, f: impl Fn(f64, f64) -> f64) -> Result<Operator> {
    need_levels(basis, &[Level::A, Level::B], 2, false)?;
    let spin = |i: usize, node: usize| -> f64 {
        let a = basis.occupation(i, Mode::a(node)).unwrap_or(0) as f64;
        let b = basis.occupation(i, Mode::b(node)).unwrap_or(0) as f64;
        a - b
    };
    let d: Vec<f64> = (0..basis.dim()).map(|i| f(spin(i, 0), spin(i, 1))).collect();
    Ok(Operator::diagonal(basis, label, &d))
}

fn interaction_terms(params: &PhysicalParams, basis: &Arc<BasisIndex>, omega0: f64, omega: f64) -> Result<Operator> {
    need_levels(basis, &[Level::B, Level::E], 2, true)?;
    let amp = params.cavity_g / SQRT_2;
    let phase = C64::from_polar(1.0, params.phi);
    let mut terms = Vec::new();
    for (node, coeff) in [(0, C64::new(amp, 0.0)), (1, -phase * amp)] {
        let absorb = photon_assisted_operator(basis, Mode::e(node), Mode::b(node), PhotonLadder::Lower)?;
        terms.push(coeff * &absorb);
        terms.push(coeff.conj() * &absorb.adjoint());
        terms.push(omega0 * &number_operator(basis, Mode::e(node))?);
    }
    terms.push(omega * &number_operator(basis, Mode::Photon)?);
    Ok(sum(basis, "H_int", terms))
}

/// Atom–collective-mode coupling
/// `(G/√2)(e₁†b₁c − e^{iφ}e₂†b₂c + h.c.) + ω₀(e₁†e₁ + e₂†e₂) + ω c†c`.
pub fn build_interaction_hamiltonian(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    interaction_terms(params, basis, params.omega0(), params.omega)
}

/// Laser pump `Σᵢ g(eᵢbᵢ† + bᵢeᵢ†) + Δ eᵢ†eᵢ` on every node of the basis.
pub fn build_pump_hamiltonian(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    let nodes = basis.spec().nodes;
    need_levels(basis, &[Level::B, Level::E], nodes, false)?;
    let mut terms = Vec::new();
    for node in 0..nodes {
        let eb = bilinear_operator(basis, Mode::e(node), Mode::b(node))?;
        terms.push(params.pump_g * &eb);
        terms.push(params.pump_g * &eb.adjoint());
        terms.push(params.delta * &number_operator(basis, Mode::e(node))?);
    }
    Ok(sum(basis, "H_pump", terms))
}

/// Pump plus cavity coupling in the frame used to check the elimination:
/// the excited state sits at Δ (carried by the pump term) and the collective
/// photon at −Δ/2, so both Raman legs are detuned and the fourth-order
/// exchange reproduces the effective SzSz coupling.
pub fn build_full_model(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    let h_int = interaction_terms(params, basis, 0.0, -0.5 * params.delta)?;
    let h_pump = build_pump_hamiltonian(params, basis)?;
    Ok((&h_int + &h_pump).with_label("H_full"))
}

/// Effective two-node Hamiltonian after eliminating the excited state and the
/// photon:
/// `−Ω cosφ S₁S₂ + (Ω/2)(S₁² + S₂²) + [Ω(N(cosφ − 1) + 2cosφ) − g²ω₀/2Δ](S₁ + S₂)`.
pub fn build_effective_two_node(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    let om = params.omega_eff();
    let c = params.phi.cos();
    let n = basis.spec().bosons_per_node as f64;
    let lin = om * (n * (c - 1.0) + 2.0 * c) - params.pump_g.powi(2) * params.omega0() / (2.0 * params.delta);
    spin_diagonal(basis, "H_eff", |s1, s2| -om * c * s1 * s2 + 0.5 * om * (s1 * s1 + s2 * s2) + lin * (s1 + s2))
}

/// Effective Hamiltonian with the fiber blocked and pump detuning Δ':
/// `(Ω'/2)(S₁² + S₂²) − [NΩ' + g²ω₀/2Δ'](S₁ + S₂)`.
pub fn build_effective_blocked(params: &PhysicalParams, delta_prime: f64, basis: &Arc<BasisIndex>) -> Result<Operator> {
    if delta_prime == 0.0 {
        return Err(Error::InvalidParameter("blocked detuning must be nonzero".into()));
    }
    let om = params.omega_blocked(delta_prime);
    let n = basis.spec().bosons_per_node as f64;
    let lin = n * om + params.pump_g.powi(2) * params.omega0() / (2.0 * delta_prime);
    spin_diagonal(basis, "H_blocked", |s1, s2| 0.5 * om * (s1 * s1 + s2 * s2) - lin * (s1 + s2))
}

/// Net Hamiltonian of the two-step cancellation protocol:
/// `−Ω cosφ S₁S₂ + [(N + 2)Ω cosφ − g²ω₀/4Δ](S₁ + S₂)`.
pub fn build_total_effective(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    let om = params.omega_eff();
    let c = params.phi.cos();
    let n = basis.spec().bosons_per_node as f64;
    let lin = (n + 2.0) * om * c - params.pump_g.powi(2) * params.omega0() / (4.0 * params.delta);
    spin_diagonal(basis, "H_total", |s1, s2| -om * c * s1 * s2 + lin * (s1 + s2))
}

/// Pure `Ω S₁ᶻ S₂ᶻ` coupling.
pub fn build_szsz(omega: f64, basis: &Arc<BasisIndex>) -> Result<Operator> {
    spin_diagonal(basis, "H_SzSz", |s1, s2| omega * s1 * s2)
}

/// λ-system `Δe†e + g(a†e + e†a) + g(b†e + e†b)` on one node.
pub fn build_lambda_hamiltonian(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    need_levels(basis, &[Level::A, Level::B, Level::E], 1, false)?;
    let ae = bilinear_operator(basis, Mode::a(0), Mode::e(0))?;
    let be = bilinear_operator(basis, Mode::b(0), Mode::e(0))?;
    let terms = vec![
        params.delta * &number_operator(basis, Mode::e(0))?,
        params.pump_g * &ae,
        params.pump_g * &ae.adjoint(),
        params.pump_g * &be,
        params.pump_g * &be.adjoint(),
    ];
    Ok(sum(basis, "H_lambda", terms))
}

/// Two-node exchange through one cavity mode:
/// `ω₀ Σ eₙ†eₙ + ω p†p + G Σ (Fₙ⁻ p† + Fₙ⁺ p)` with `Fₙ⁺ = eₙ†bₙ`.
pub fn build_collective_entangler(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    need_levels(basis, &[Level::B, Level::E], 2, true)?;
    let mut terms = vec![params.omega * &number_operator(basis, Mode::Photon)?];
    for node in 0..2 {
        let absorb = photon_assisted_operator(basis, Mode::e(node), Mode::b(node), PhotonLadder::Lower)?;
        terms.push(params.cavity_g * &absorb);
        terms.push(params.cavity_g * &absorb.adjoint());
        terms.push(params.omega0() * &number_operator(basis, Mode::e(node))?);
    }
    Ok(sum(basis, "H_2", terms))
}

/// Photon-eliminated exchange `Ω₂ (F₁⁺ + F₂⁺)(F₁⁻ + F₂⁻)` with Ω₂ = G²/Δ.
pub fn build_effective_entangler(params: &PhysicalParams, basis: &Arc<BasisIndex>) -> Result<Operator> {
    need_levels(basis, &[Level::B, Level::E], 2, false)?;
    let raise = &bilinear_operator(basis, Mode::e(0), Mode::b(0))? + &bilinear_operator(basis, Mode::e(1), Mode::b(1))?;
    let lower = raise.adjoint();
    Ok((params.omega_exchange() * &(&raise * &lower)).with_label("H_2eff"))
}

/// Outcome of [`verify_fiber_diagonalization`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberReport {
    pub cutoff: u32,
    pub dim: usize,
    /// max |H_f − √2ν(c₁†c₁ − c₂†c₂)| over the truncated Fock space.
    pub identity_error: f64,
    /// max |[cₘ, cₙ†] − δₘₙ|.
    pub commutator_error: f64,
    /// Largest off-diagonal entry of the single-particle matrix in the
    /// normal-mode basis.
    pub offdiagonal_residue: f64,
    /// max difference between the sorted spectrum and √2ν(n₁ − n₂).
    pub spectrum_error: f64,
}

impl FiberReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.identity_error < tol && self.commutator_error < tol && self.offdiagonal_residue < tol && self.spectrum_error < tol
    }
}

/// Check that the cavity–fiber coupling `ν p(p₁† + e^{iφ}p₂†) + h.c.` is
/// diagonalized by `c = (p₁ − e^{−iφ}p₂)/√2`,
/// `c₁,₂ = (p₁ + e^{−iφ}p₂ ± √2 p)/2`, on a three-mode space holding up to
/// `cutoff` photons in total.
pub fn verify_fiber_diagonalization(params: &PhysicalParams, cutoff: u32) -> FiberReport {
    let nu = params.nu;
    let ph = C64::from_polar(1.0, params.phi);
    // Single-particle matrix: H_f = Σ M_jk p_j† p_k on (p₁, p₂, p).
    let mut m = Matrix3::<C64>::zeros();
    m[(0, 2)] = C64::new(nu, 0.0);
    m[(1, 2)] = ph * nu;
    m[(2, 0)] = C64::new(nu, 0.0);
    m[(2, 1)] = ph.conj() * nu;
    let r = 1.0 / SQRT_2;
    let u = Matrix3::new(
        C64::new(r, 0.0),
        -ph.conj() * r,
        ZERO,
        C64::new(0.5, 0.0),
        ph.conj() * 0.5,
        C64::new(r, 0.0),
        C64::new(0.5, 0.0),
        ph.conj() * 0.5,
        C64::new(-r, 0.0),
    );
    let commutator_error = (u * u.adjoint() - Matrix3::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rotated = u * m * u.adjoint();
    let mut offdiagonal_residue: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                offdiagonal_residue = offdiagonal_residue.max(rotated[(i, j)].norm());
            }
        }
    }

    let mut states = Vec::new();
    for n1 in 0..=cutoff {
        for n2 in 0..=cutoff - n1 {
            for n3 in 0..=cutoff - n1 - n2 {
                states.push([n1, n2, n3]);
            }
        }
    }
    let index: HashMap<[u32; 3], usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let dim = states.len();
    let hop = |j: usize, k: usize| -> DMatrix<C64> {
        let mut b = DMatrix::zeros(dim, dim);
        for (col, s) in states.iter().enumerate() {
            if s[k] == 0 {
                continue;
            }
            let mut t = *s;
            let mut amp = (t[k] as f64).sqrt();
            t[k] -= 1;
            t[j] += 1;
            amp *= (t[j] as f64).sqrt();
            b[(index[&t], col)] += C64::new(amp, 0.0);
        }
        b
    };
    let many_body = |coeff: &Matrix3<C64>| -> DMatrix<C64> {
        let mut h = DMatrix::zeros(dim, dim);
        for j in 0..3 {
            for k in 0..3 {
                if coeff[(j, k)] != ZERO {
                    h += hop(j, k) * coeff[(j, k)];
                }
            }
        }
        h
    };
    let h_f = many_body(&m);
    // c_m†c_m = Σ_jk conj(U_mj) U_mk p_j†p_k.
    let number = |row: usize| -> Matrix3<C64> {
        Matrix3::from_fn(|j, k| u[(row, j)].conj() * u[(row, k)])
    };
    let target = many_body(&((number(1) - number(2)) * C64::new(SQRT_2 * nu, 0.0)));
    let identity_error = (&h_f - &target).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let mut spectrum: Vec<f64> = h_f.symmetric_eigenvalues().iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    let mut expected: Vec<f64> = states.iter().map(|s| SQRT_2 * nu * (s[1] as f64 - s[2] as f64)).collect();
    expected.sort_by(f64::total_cmp);
    let spectrum_error = spectrum.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    FiberReport { cutoff, dim, identity_error, commutator_error, offdiagonal_residue, spectrum_error }
}
