//! Classical Fisher information of the emitter measurement: quadratic
//! growth, periodic dips, and the parameter-choice guideline.
//!
//!     cargo run --release --example fisher_information

use topowave::bound_states::analytic_bound_energy;
use topowave::dynamics::TimeGrid;
use topowave::fisher::{
    fisher_approx, fisher_numeric, rabi_fisher, SenseParameter, DEFAULT_FD_STEP,
};
use topowave::model::ModelParams;

fn main() -> topowave::Result<()> {
    let params = ModelParams::new(201, 0.2, 0.1, 0.0)?;
    let eb = analytic_bound_energy(&params)?;
    let grid = TimeGrid::linspace(0.25, 100.0, 400)?;
    let trace = fisher_numeric(&params, SenseParameter::Coupling, &grid, DEFAULT_FD_STEP)?;

    println!("{:>6} {:>12} {:>12} {:>12}", "Jt", "F_g exact", "closed form", "rabi bound");
    for k in (19..grid.len()).step_by(40) {
        let t = grid.times()[k];
        println!(
            "{t:>6.2} {:>12.1} {:>12.1} {:>12.1}",
            trace.values[k],
            fisher_approx(&params, SenseParameter::Coupling, t)?,
            rabi_fisher(&params, SenseParameter::Coupling, t)?
        );
    }

    println!("\ninformation dips sit at multiples of pi/E_B = {:.3}:", std::f64::consts::PI / eb);
    for k in 1..=2 {
        let predicted = k as f64 * std::f64::consts::PI / eb;
        let (t_min, f_min) = trace.min_in_window(predicted - 3.0, predicted + 3.0).unwrap();
        println!("  dip {k}: predicted {predicted:.2}, found {t_min:.2} (F = {f_min:.2})");
    }

    println!("\nenvelope near Jt = 50 grows with the dimerization:");
    for delta in [0.15, 0.2, 0.3] {
        let p = ModelParams::new(201, delta, 0.1, 0.0)?;
        let half = std::f64::consts::PI / analytic_bound_energy(&p)? / 2.0;
        let window = TimeGrid::linspace(50.0 - half, 50.0 + half, 200)?;
        let f = fisher_numeric(&p, SenseParameter::Coupling, &window, DEFAULT_FD_STEP)?;
        let peak = f.max_in_window(f64::NEG_INFINITY, f64::INFINITY).unwrap().1;
        println!("  delta = {delta}: max F_g = {peak:.0}");
    }
    Ok(())
}
