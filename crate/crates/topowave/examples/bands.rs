//! Spectrum of the emitter-chain system: band structure, the in-gap
//! bound-state pair, and the closed-form cross-check.
//!
//!     cargo run --release --example bands

use topowave::bound_states::{analytic_bound_energy, analytic_overlap, numeric_bound_states};
use topowave::model::{build_hamiltonian, chiral_residual, eigendecompose, ModelParams};

fn main() -> topowave::Result<()> {
    let params = ModelParams::new(41, 0.2, 0.1, 0.0)?;
    let h = build_hamiltonian(&params, None)?;
    println!(
        "chain of {} sites, delta = {}, g = {}, chiral residual = {:.1e}",
        params.n_sites,
        params.delta,
        params.g,
        chiral_residual(&h)
    );

    let spectrum = eigendecompose(&h)?;
    let gap = params.gap_half_width();
    println!("band gap: (-{gap}, {gap})");
    let ingap = spectrum.in_gap_indices(&params, 1e-6);
    for &k in &ingap {
        println!("  in-gap level {k}: E = {:+.7}", spectrum.energies()[k]);
    }

    let pair = numeric_bound_states(&spectrum, &params)?;
    println!(
        "numeric pair:   E_B = {:.7}, emitter overlap b = {:.6}",
        pair.energy, pair.overlap
    );
    println!(
        "closed form:    E_B = {:.7}, emitter overlap b = {:.6}",
        analytic_bound_energy(&params)?,
        analytic_overlap(&params)?
    );

    println!("\nbound-state amplitudes (first 12 basis entries):");
    println!("{:>8}  {:>10}  {:>10}", "entry", "plus", "minus");
    for i in 0..12 {
        let label = if i == 0 {
            "emitter".to_string()
        } else {
            format!("site-{i}")
        };
        println!(
            "{label:>8}  {:>10.6}  {:>10.6}",
            pair.amplitudes_plus[i], pair.amplitudes_minus[i]
        );
    }
    Ok(())
}
