//! Full cavity-pump model against the effective SzSz Hamiltonian at large
//! detuning, and the fiber normal-mode transformation.

use becnet::hamiltonians::verify_fiber_diagonalization;
use becnet::protocols::validate_elimination;
use becnet::PhysicalParams;

fn main() -> becnet::Result<()> {
    for delta in [20.0, 50.0] {
        let p = PhysicalParams { cavity_g: 1.0, pump_g: 1.0, delta, ..Default::default() };
        let rep = validate_elimination(&p, 1, 2, 21)?;
        println!("Delta/G = {delta}: min fidelity {:.5}, max leakage {:.2e}", rep.min_fidelity, rep.max_leakage);
    }
    let rep = verify_fiber_diagonalization(&PhysicalParams { phi: 0.6, ..Default::default() }, 3);
    println!("\nfiber modes, cutoff 3 (dim {}): identity error {:.1e}, spectrum error {:.1e}", rep.dim, rep.identity_error, rep.spectrum_error);
    Ok(())
}
