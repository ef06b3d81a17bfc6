//! Gate time and spontaneous-emission budget in laboratory units.

use becnet::estimates::{parameter_table, LabParams};

fn main() -> becnet::Result<()> {
    let lab = LabParams::default();
    print!("{}", parameter_table(&lab)?.to_text());

    println!("\n   D     Omega (MHz)   t_CNOT (us)   gates per lifetime");
    for d in [0.5, 1.0, 2.0, 4.0] {
        let t = parameter_table(&LabParams { d, ..lab.clone() })?;
        println!(" {d:4.1}   {:11.4e}   {:11.4e}   {:10.3}", t.omega, t.t_cnot, t.ratio);
    }
    Ok(())
}
