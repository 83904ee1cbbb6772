//! Emitter occupation dynamics: the exact signal against its effective
//! two-level (Rabi-like) approximation.
//!
//!     cargo run --release --example rabi_dynamics

use topowave::bound_states::analytic_bound_energy;
use topowave::dynamics::{approx_population, excited_population, rabi_reference, TimeGrid};
use topowave::model::{build_hamiltonian, eigendecompose, ModelParams};

fn main() -> topowave::Result<()> {
    let params = ModelParams::new(201, 0.2, 0.1, 0.0)?;
    let spectrum = eigendecompose(&build_hamiltonian(&params, None)?)?;
    let eb = analytic_bound_energy(&params)?;
    println!(
        "E_B = {eb:.6}, oscillation period pi/E_B = {:.2} (units 1/J)",
        std::f64::consts::PI / eb
    );

    let grid = TimeGrid::linspace(0.0, 100.0, 2001)?;
    let trace = excited_population(&spectrum, &grid)?;
    let mut worst = (0.0_f64, 0.0_f64);
    for (&t, &p1) in grid.times().iter().zip(&trace.p1) {
        let dev = (p1 - approx_population(&params, t)?).abs();
        if dev > worst.1 {
            worst = (t, dev);
        }
    }
    println!(
        "max |P1 - two-level approximation| = {:.4} at Jt = {:.2}",
        worst.1, worst.0
    );

    println!("\n{:>6} {:>10} {:>10} {:>10}", "Jt", "P1", "two-level", "rabi");
    for k in 0..=10 {
        let t = 10.0 * k as f64;
        let p1 = excited_population(&spectrum, &TimeGrid::new(vec![t.max(1e-9)])?)?.p1[0];
        println!(
            "{t:>6.0} {p1:>10.5} {:>10.5} {:>10.5}",
            approx_population(&params, t)?,
            rabi_reference(&params, t)?
        );
    }
    Ok(())
}
