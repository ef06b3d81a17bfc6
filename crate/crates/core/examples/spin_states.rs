//! Fock bases, spin coherent states and collective spin operators.

use std::f64::consts::FRAC_1_SQRT_2;

use becnet::{collective_spin_operator, enumerate_basis, expectation, spin_coherent_state, Axis, Level, ModeSpec, C64};

fn main() -> becnet::Result<()> {
    let n = 6;
    let basis = enumerate_basis(ModeSpec::atoms(1, &[Level::A, Level::B], n))?;
    println!("single node, N = {n}: dim {}", basis.dim());

    let sz = collective_spin_operator(&basis, 0, Axis::Z)?;
    let sx = collective_spin_operator(&basis, 0, Axis::X)?;
    let sy = collective_spin_operator(&basis, 0, Axis::Y)?;
    println!("[Sx, Sy] - 2i Sz residual: {:.1e}", (&sx.commutator(&sy)? - &(C64::new(0.0, 2.0) * &sz)).max_abs());

    println!("\n theta/pi    <Sx>      <Sy>      <Sz>");
    for k in 0..=4 {
        let theta = std::f64::consts::PI * k as f64 / 4.0;
        let psi = spin_coherent_state(C64::new((theta / 2.0).cos(), 0.0), C64::new((theta / 2.0).sin(), 0.0), n, &basis)?;
        let e = |op| expectation(&psi, op).map(|z| z.re);
        println!("  {:5.2}   {:8.4}  {:8.4}  {:8.4}", k as f64 / 4.0, e(&sx)?, e(&sy)?, e(&sz)?);
    }

    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let psi = spin_coherent_state(r, r, n, &basis)?;
    println!("\nBinomial weights of the equal superposition:");
    for (occ, amp) in basis.states().iter().zip(psi.amplitudes()) {
        println!("  {occ:?}  {:.4}", amp.norm_sqr());
    }

    let two = enumerate_basis(ModeSpec::atoms(2, &[Level::A, Level::B, Level::E], 3).with_photon(1))?;
    println!("\ntwo nodes {{a, b, e}} with a photon mode, N = 3: dim {}", two.dim());
    Ok(())
}
