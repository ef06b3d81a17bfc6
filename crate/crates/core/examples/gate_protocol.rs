//! Two-step cancellation of the self-interaction terms and the SzSz
//! entangled states it produces.

use std::f64::consts::FRAC_PI_4;

use becnet::hamiltonians::{build_szsz, build_total_effective};
use becnet::lindblad::propagate_unitary;
use becnet::protocols::{analytic_cat_state, analytic_entangled_state, run_gate_protocol, two_node_basis};
use becnet::PhysicalParams;

fn main() -> becnet::Result<()> {
    let p = PhysicalParams { cavity_g: 1.0, pump_g: 1.0, delta: 10.0, phi: 0.0, ..Default::default() };
    let omega = p.omega_eff();
    println!("Omega = G^2 g^2 / 2 Delta^3 = {omega:.3e}");

    let n = 5;
    let basis = two_node_basis(n)?;
    let psi0 = analytic_entangled_state(n, 1.0, 0.0, &basis)?;
    let net = build_total_effective(&p, &basis)?;
    println!("\n     tau      1 - F(protocol, net H)");
    for tau in [100.0, 500.0, 1570.8] {
        let out = run_gate_protocol(&p, tau, &psi0)?;
        let direct = propagate_unitary(&net, &psi0, tau)?;
        println!("  {tau:8.1}   {:.2e}", 1.0 - out.fidelity(&direct)?);
    }

    println!("\n N   1 - F(cat, evolved)");
    for n in [1, 2, 3, 8] {
        let basis = two_node_basis(n)?;
        let psi0 = analytic_entangled_state(n, 1.0, 0.0, &basis)?;
        let evolved = propagate_unitary(&build_szsz(1.0, &basis)?, &psi0, FRAC_PI_4)?;
        println!(" {n:2}   {:.2e}", 1.0 - analytic_cat_state(n, &basis)?.fidelity(&evolved)?);
    }
    Ok(())
}
