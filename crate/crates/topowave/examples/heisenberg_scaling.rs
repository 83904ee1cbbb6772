//! Bayesian sensing precision versus evolution time: the mean squared
//! relative error falls as t^-2 when records at a few chained times keep
//! the posterior alias-free.
//!
//!     cargo run --release --example heisenberg_scaling

use topowave::bayes::{
    chained_average_error, ChainPlan, CleanSource, EstimationConfig, LikelihoodModel,
    PriorInterval,
};
use topowave::fisher::SenseParameter;
use topowave::model::ModelParams;

fn main() -> topowave::Result<()> {
    let base = ModelParams::new(201, 0.2, 0.1, 0.0)?;
    let prior = PriorInterval::new(0.0, 0.2, 1001)?;
    eprintln!("building the likelihood model over {} grid points...", prior.n_grid);
    let model = LikelihoodModel::build(&base, SenseParameter::Coupling, &prior)?;
    let clean = CleanSource::new(&base)?;
    let plan = ChainPlan::Ladder(3);

    let times = [10.0, 16.0, 26.0, 40.0, 64.0, 100.0];
    println!("{:>6} {:>13} {:>13}", "Jt", "mean dx^2", "t^-2 reference");
    let mut points = Vec::new();
    let mut anchor = None;
    for &t in &times {
        let cfg = EstimationConfig {
            which: SenseParameter::Coupling,
            x_true: 0.1,
            base,
            t,
            shots: 10_000,
            n_samples: 40,
            prior,
            seed: 7,
        };
        let r = chained_average_error(&cfg, &plan.times(t)?, &model, &clean)?;
        let anchor_value = *anchor.get_or_insert(r.delta_sq * t * t);
        println!("{t:>6.0} {:>13.3e} {:>13.3e}", r.delta_sq, anchor_value / (t * t));
        points.push((t.ln(), r.delta_sq.ln()));
    }

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    println!("\nlog-log slope = {slope:.2} (ideal time scaling: -2)");
    Ok(())
}
