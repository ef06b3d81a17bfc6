//! Pumped λ-system with spontaneous emission: moment equations at large N,
//! the exact master equation at small N, and the fitted decay rate.

use becnet::analysis::{extract_decay_rate, predict_rates};
use becnet::moments::{compare_exact, solve_moments, MomentOptions, MomentState};
use becnet::{EvolveOptions, PhysicalParams};

fn main() -> becnet::Result<()> {
    let base = PhysicalParams { pump_g: 1.0, delta: 10.0, gamma_s: 0.01, ..Default::default() };
    println!("   N   Gamma1 fit   Gamma1 = g^2 Gamma_s (N+1) / Delta^2");
    for n in [20, 50, 100] {
        let p = PhysicalParams { n, ..base.clone() };
        let pred = predict_rates(&p).gamma1;
        let opts = MomentOptions { samples: 6000, ..Default::default() };
        let (traj, _) = solve_moments(&MomentState::all_in_a(n as f64), &p, 5.0 / pred, &opts)?;
        let fit = extract_decay_rate(&traj, "Sz")?;
        println!(" {n:3}   {:.4e}   {pred:.4e}", fit.gamma_eff);
    }

    let p = PhysicalParams { n: 3, gamma_s: 0.1, ..base };
    let t_final = 3.0 / predict_rates(&p).gamma1;
    let cmp = compare_exact(&p, 3, t_final, &EvolveOptions::default().with_samples(2000))?;
    println!("\nN = 3, exact vs moments: max |dSz|/N = {:.3e}, rms {:.3e}", cmp.max_deviation, cmp.rms_deviation);
    Ok(())
}
