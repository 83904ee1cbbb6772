//! Phase aliasing in the posterior and its removal.
//!
//! One record at a late time pins the accumulated phase only modulo 2*pi,
//! so several coupling values fit the data equally well. Chaining records
//! at slightly different times leaves a single peak.
//!
//!     cargo run --release --example posterior_aliasing

use topowave::bayes::{
    sequential_estimate, EstimationConfig, LikelihoodModel, PosteriorGrid, PriorInterval,
};
use topowave::fisher::SenseParameter;
use topowave::model::ModelParams;

fn top_modes(post: &PosteriorGrid, n: usize) -> Vec<(f64, f64)> {
    // local maxima of the weight profile, strongest first
    let w = post.weights();
    let mut modes: Vec<(f64, f64)> = (1..w.len() - 1)
        .filter(|&k| w[k] > w[k - 1] && w[k] >= w[k + 1] && w[k] > 1e-6)
        .map(|k| (post.xs()[k], w[k]))
        .collect();
    modes.sort_by(|a, b| b.1.total_cmp(&a.1));
    modes.truncate(n);
    modes
}

fn main() -> topowave::Result<()> {
    let base = ModelParams::new(201, 0.2, 0.1, 0.0)?;
    let prior = PriorInterval::new(0.0, 0.2, 1001)?;
    eprintln!("building the likelihood model...");
    let model = LikelihoodModel::build(&base, SenseParameter::Coupling, &prior)?;
    let cfg = EstimationConfig {
        which: SenseParameter::Coupling,
        x_true: 0.1,
        base,
        t: 100.0,
        shots: 10_000,
        n_samples: 1,
        prior,
        seed: 5,
    };

    let single = sequential_estimate(&cfg, &[100.0], &model)?;
    println!("single record at Jt = 100, true g = 0.1:");
    for (x, w) in top_modes(&single, 6) {
        println!("  mode at g = {x:.4} (weight {w:.4})");
    }

    let chained = sequential_estimate(&cfg, &[100.0, 107.0, 119.0], &model)?;
    println!("\nrecords chained at Jt = 100, 107, 119:");
    for (x, w) in top_modes(&chained, 6) {
        println!("  mode at g = {x:.4} (weight {w:.4})");
    }
    println!(
        "\nchained posterior: mean = {:.5}, std = {:.2e}",
        chained.mean(),
        chained.variance().sqrt()
    );
    Ok(())
}
