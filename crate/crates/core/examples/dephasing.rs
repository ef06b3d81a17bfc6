//! Collective dephasing of SzSz evolution: the closed-form z-dephasing
//! propagator against the master equation, and the one-cycle echo error
//! under x-dephasing for three gate times.

use becnet::fockspace::{Axis, DensityMatrix};
use becnet::lindblad::{analytic_z_dephasing, propagate_master};
use becnet::protocols::{run_dephasing_echo, DephasingSetup, GateTime};
use becnet::EvolveOptions;

fn main() -> becnet::Result<()> {
    let setup = DephasingSetup { n: 4, coupling: 1.0, axis: Axis::Z, rate: 0.1 };
    let basis = setup.basis()?;
    let rho0 = DensityMatrix::from_pure(&setup.initial_state(&basis)?);
    for t in [1.0, 5.0] {
        let numeric = propagate_master(&setup.model(&basis)?, &rho0, t, &EvolveOptions::default())?.final_state;
        let closed = analytic_z_dephasing(&rho0, setup.rate, setup.coupling, t)?;
        println!("z-dephasing, N = 4, t = {t}: max |rho_master - rho_closed| = {:.2e}", numeric.max_abs_diff(&closed)?);
    }

    println!("\none-cycle echo error, Gamma_x = 0.01");
    println!("  N   {:>12} {:>12} {:>12}", GateTime::PiOver4N.label(), GateTime::InvTwoSqrtN.label(), GateTime::PiOver4.label());
    for n in [2, 5, 10] {
        let setup = DephasingSetup { n, coupling: 1.0, axis: Axis::X, rate: 0.01 };
        let errs: Vec<f64> = GateTime::ALL
            .iter()
            .map(|g| run_dephasing_echo(&setup, g.omega_t(n), 1, &EvolveOptions::default()).map(|e| e.cycle_errors[0]))
            .collect::<becnet::Result<_>>()?;
        println!(" {n:2}   {:12.4e} {:12.4e} {:12.4e}", errs[0], errs[1], errs[2]);
    }
    Ok(())
}
