//! Photon-mediated exchange between two nodes, reversed every gate time, with
//! cavity photon loss. The returns of the excited fraction decay at Γ₂.

use becnet::analysis::predict_rates;
use becnet::protocols::{cavity_echo_cycles, echo_excited_returns, fit_cavity_echo};
use becnet::{EvolveOptions, PhysicalParams};

fn main() -> becnet::Result<()> {
    let base = PhysicalParams { cavity_g: 1.0, delta: 10.0, gamma_c: 1.0, ..Default::default() };
    let g2 = predict_rates(&base).gamma2;
    for n in [1, 2] {
        let p = PhysicalParams { n, ..base.clone() };
        let res = fit_cavity_echo(&p, n, cavity_echo_cycles(&p, n, 20), 0.5 / g2, &EvolveOptions::default())?;
        println!("N = {n}: gate time {:.3}, {} cycles, Gamma2 fit {:.4e} (G^2 Gamma_c / Delta^2 = {g2:.4e})", res.gate_time, res.cycles, res.fit.gamma_eff);
        let (t, f) = echo_excited_returns(&res.run, n)?;
        for (t, f) in t.iter().zip(&f).step_by(8) {
            println!("   t = {t:7.2}   excited fraction {f:.5}   exp(-Gamma2 t) {:.5}", (-g2 * t).exp());
        }
    }
    Ok(())
}
