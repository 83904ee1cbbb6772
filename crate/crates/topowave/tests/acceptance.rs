//! End-to-end acceptance suite.
//!
//! Each test prints one `criterion N: PASS/FAIL` line and enforces the
//! corresponding tolerance. Heavy shared resources (likelihood models over
//! the full prior grids) are built once per process.

use std::sync::OnceLock;

use topowave::bayes::{
    average_error_clean, chained_average_error, disorder_averaged_error,
    disorder_averaged_error_chained, ChainPlan, CleanSource, EstimationConfig, EstimationResult,
    LikelihoodModel, P1Source, PriorInterval, TabulatedSource,
};
use topowave::bound_states::{
    analytic_bound_energy, analytic_overlap, analytic_wavefunction, numeric_bound_states,
    BoundStateSign, GAP_EPSILON,
};
use topowave::dynamics::{approx_population, excited_population, lindblad_evolve, TimeGrid};
use topowave::fisher::{fisher_numeric, SenseParameter, DEFAULT_FD_STEP};
use topowave::model::{build_hamiltonian, eigendecompose, ModelParams, Spectrum};

const SEED: u64 = 7;
const SHOTS: u64 = 10_000;
const N_SAMPLES: usize = 100;

/// Sweep times in [10, 100] staying clear of the information dips at
/// k*pi/E_B ~ 42.27 and 84.53.
const SWEEP_TIMES: [f64; 12] = [
    10.0, 13.0, 16.0, 20.0, 26.0, 33.0, 50.0, 57.0, 65.0, 75.0, 95.0, 100.0,
];

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn params(n: usize, delta: f64, g: f64) -> ModelParams {
    ModelParams::new(n, delta, g, 0.0).unwrap()
}

fn spectrum_for(p: &ModelParams) -> Spectrum {
    eigendecompose(&build_hamiltonian(p, None).unwrap()).unwrap()
}

fn coupling_prior() -> PriorInterval {
    PriorInterval::new(0.0, 0.2, 2001).unwrap()
}

fn dimerization_prior() -> PriorInterval {
    PriorInterval::new(0.0, 0.4, 2001).unwrap()
}

fn model_g201() -> &'static LikelihoodModel {
    static MODEL: OnceLock<LikelihoodModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        LikelihoodModel::build(&params(201, 0.2, 0.1), SenseParameter::Coupling, &coupling_prior())
            .unwrap()
    })
}

fn model_d201() -> &'static LikelihoodModel {
    static MODEL: OnceLock<LikelihoodModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        LikelihoodModel::build(
            &params(201, 0.2, 0.1),
            SenseParameter::Dimerization,
            &dimerization_prior(),
        )
        .unwrap()
    })
}

fn estimation(which: SenseParameter, n: usize, x_true: f64, t: f64) -> EstimationConfig {
    let (base, prior) = match which {
        SenseParameter::Coupling => (params(n, 0.2, x_true), coupling_prior()),
        SenseParameter::Dimerization => (params(n, x_true, 0.1), dimerization_prior()),
    };
    EstimationConfig {
        which,
        x_true,
        base,
        t,
        shots: SHOTS,
        n_samples: N_SAMPLES,
        prior,
        seed: SEED,
    }
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Error-vs-time sweep with the halving-ladder chain (four times per
/// record); the coarse times pin the phase so the posterior stays
/// single-peaked over the full prior.
fn ladder_sweep(
    which: SenseParameter,
    n: usize,
    x_true: f64,
    model: &LikelihoodModel,
) -> Vec<(f64, EstimationResult)> {
    let plan = ChainPlan::Ladder(3);
    let clean = CleanSource::new(&estimation(which, n, x_true, 10.0).true_params()).unwrap();
    SWEEP_TIMES
        .iter()
        .map(|&t| {
            let cfg = estimation(which, n, x_true, t);
            let times = plan.times(t).unwrap();
            (t, chained_average_error(&cfg, &times, model, &clean).unwrap())
        })
        .collect()
}

#[test]
fn criterion_01_bound_state_cross_validation() {
    let p = params(201, 0.2, 0.1);
    let spectrum = spectrum_for(&p);
    let pair = numeric_bound_states(&spectrum, &p).unwrap();

    let eb_analytic = analytic_bound_energy(&p).unwrap();
    let b_analytic = analytic_overlap(&p).unwrap();
    let de = (pair.energy - eb_analytic).abs();
    let db = (pair.overlap - b_analytic).abs();

    let mut overlap_min = f64::INFINITY;
    for (sign, numeric) in [
        (BoundStateSign::Plus, &pair.amplitudes_plus),
        (BoundStateSign::Minus, &pair.amplitudes_minus),
    ] {
        let analytic = analytic_wavefunction(&p, sign).unwrap();
        let dot: f64 = analytic.iter().zip(numeric).map(|(a, b)| a * b).sum();
        overlap_min = overlap_min.min(dot.abs());
    }

    report(
        "1",
        de <= 1e-6 && db <= 1e-4 && overlap_min >= 0.9999,
        &format!("|dE_B| = {de:.2e}, |db| = {db:.2e}, wavefunction overlap >= {overlap_min:.6}"),
    );
}

#[test]
fn criterion_02_dynamics_approximation() {
    let p = params(201, 0.2, 0.1);
    let spectrum = spectrum_for(&p);
    let grid = TimeGrid::linspace(0.0, 100.0, 2001).unwrap();
    let trace = excited_population(&spectrum, &grid).unwrap();
    let worst = grid
        .times()
        .iter()
        .zip(&trace.p1)
        .map(|(&t, &p1)| (p1 - approx_population(&p, t).unwrap()).abs())
        .fold(0.0_f64, f64::max);
    report(
        "2",
        worst <= 0.05,
        &format!("max |P1 - two-level approximation| = {worst:.4} over Jt in [0, 100]"),
    );
}

#[test]
fn criterion_03_fisher_dips_and_quadratic_growth() {
    let p = params(201, 0.2, 0.1);
    let step = 0.25;
    let grid = TimeGrid::linspace(20.0, 100.0, 321).unwrap();
    let trace = fisher_numeric(&p, SenseParameter::Coupling, &grid, DEFAULT_FD_STEP).unwrap();
    let eb = analytic_bound_energy(&p).unwrap();
    let dip_period = std::f64::consts::PI / eb;

    // dip alignment: local minima near k*pi/E_B within half a grid step
    let mut worst_offset = 0.0_f64;
    for k in 1..=2 {
        let predicted = k as f64 * dip_period;
        let (t_min, _) = trace
            .min_in_window(predicted - 3.0, predicted + 3.0)
            .unwrap();
        worst_offset = worst_offset.max((t_min - predicted).abs());
    }

    // per-period maxima over the complete inter-dip windows inside [20, 100]
    let mut maxima = Vec::new();
    let mut k = 0;
    loop {
        let lo = (k as f64 * dip_period + 1.0).max(20.0);
        let hi = (k + 1) as f64 * dip_period - 1.0;
        if hi > 100.0 {
            break;
        }
        maxima.push(trace.max_in_window(lo, hi).unwrap());
        k += 1;
    }
    let slope = log_log_slope(&maxima);

    report(
        "3",
        worst_offset <= step / 2.0 && (slope - 2.0).abs() <= 0.1,
        &format!(
            "dip offset {worst_offset:.3} <= {:.3}, growth slope {slope:.3} from {} maxima",
            step / 2.0,
            maxima.len()
        ),
    );
}

fn envelope_at(p: &ModelParams, which: SenseParameter, center: f64) -> f64 {
    let eb = analytic_bound_energy(p).unwrap();
    let half = std::f64::consts::PI / eb / 2.0;
    let grid = TimeGrid::linspace(center - half, center + half, 400).unwrap();
    let trace = fisher_numeric(p, which, &grid, DEFAULT_FD_STEP).unwrap();
    trace.max_in_window(f64::NEG_INFINITY, f64::INFINITY).unwrap().1
}

#[test]
fn criterion_04_fisher_envelope_orderings() {
    let fg: Vec<f64> = [0.15, 0.2, 0.3]
        .iter()
        .map(|&d| envelope_at(&params(201, d, 0.1), SenseParameter::Coupling, 50.0))
        .collect();
    let fd: Vec<f64> = [0.05, 0.1, 0.15]
        .iter()
        .map(|&g| envelope_at(&params(201, 0.2, g), SenseParameter::Dimerization, 50.0))
        .collect();
    let g_ordered = fg[0] < fg[1] && fg[1] < fg[2];
    let d_ordered = fd[0] < fd[1] && fd[1] < fd[2];
    report(
        "4",
        g_ordered && d_ordered,
        &format!(
            "F_g envelopes {:.0}/{:.0}/{:.0} increasing with delta; F_delta envelopes \
             {:.0}/{:.0}/{:.0} increasing with g",
            fg[0], fg[1], fg[2], fd[0], fd[1], fd[2]
        ),
    );
}

#[test]
fn criterion_05_heisenberg_scaling_and_crb() {
    // time scaling for both parameters
    let rows_g = ladder_sweep(SenseParameter::Coupling, 201, 0.1, model_g201());
    let slope_g = log_log_slope(
        &rows_g
            .iter()
            .map(|(t, r)| (*t, r.delta_sq))
            .collect::<Vec<_>>(),
    );
    let rows_d = ladder_sweep(SenseParameter::Dimerization, 201, 0.2, model_d201());
    let slope_d = log_log_slope(
        &rows_d
            .iter()
            .map(|(t, r)| (*t, r.delta_sq))
            .collect::<Vec<_>>(),
    );

    // Cramer-Rao saturation from single-time records at early (alias-free)
    // spot times: averaged posterior variance times the record information
    let mut ratios = Vec::new();
    for &t in &[10.0, 12.0, 13.0] {
        let cfg = estimation(SenseParameter::Coupling, 201, 0.1, t);
        let result = average_error_clean(&cfg, model_g201()).unwrap();
        let grid = TimeGrid::new(vec![t]).unwrap();
        let trace =
            fisher_numeric(&cfg.true_params(), SenseParameter::Coupling, &grid, DEFAULT_FD_STEP)
                .unwrap();
        ratios.push(result.variance * SHOTS as f64 * trace.values[0]);
    }
    let crb_ok = ratios.iter().all(|r| (0.5..=2.0).contains(r));

    report(
        "5",
        (slope_g + 2.0).abs() <= 0.3 && (slope_d + 2.0).abs() <= 0.3 && crb_ok,
        &format!(
            "slope(g) = {slope_g:.2}, slope(delta) = {slope_d:.2}, CRB ratios {:.2}/{:.2}/{:.2}",
            ratios[0], ratios[1], ratios[2]
        ),
    );
}

#[test]
fn criterion_06_shot_scaling() {
    let plan = ChainPlan::Ladder(3);
    let times = plan.times(50.0).unwrap();
    let clean =
        CleanSource::new(&estimation(SenseParameter::Coupling, 201, 0.1, 50.0).true_params())
            .unwrap();
    let mut points = Vec::new();
    for &shots in &[100u64, 1_000, 10_000] {
        let mut cfg = estimation(SenseParameter::Coupling, 201, 0.1, 50.0);
        cfg.shots = shots;
        let r = chained_average_error(&cfg, &times, model_g201(), &clean).unwrap();
        points.push((shots as f64, r.delta_sq));
    }
    let slope = log_log_slope(&points);
    report(
        "6",
        (slope + 1.0).abs() <= 0.2,
        &format!(
            "slope of mean error vs shot count = {slope:.3} over M = 100/1000/10000"
        ),
    );
}

#[test]
fn criterion_07_disorder_robustness() {
    // away from dips, single-time records: weak disorder barely moves the error
    let cfg = estimation(SenseParameter::Coupling, 201, 0.1, 50.0);
    let clean = average_error_clean(&cfg, model_g201()).unwrap();
    let mut cfg_dis = cfg.clone();
    cfg_dis.n_samples = 2; // 50 realizations x 2 records
    let weak = disorder_averaged_error(&cfg_dis, model_g201(), 0.1, 50).unwrap();
    let ratio = weak.delta_sq / clean.delta_sq;

    // around the first dip, paired records resolve the error peak; strong
    // disorder spreads each realization's dip time, flattening the peak
    let scan: Vec<f64> = vec![
        37.0, 38.0, 39.0, 40.0, 40.5, 41.0, 41.5, 42.0, 42.27, 42.5, 43.0, 43.5, 44.0, 45.0,
        46.0, 47.0,
    ];
    let pair = ChainPlan::Offsets(vec![0.0, 0.9]);
    let clean_source = CleanSource::new(&cfg.true_params()).unwrap();
    let mut clean_scan = Vec::new();
    let mut disordered_scan = Vec::new();
    for &t in &scan {
        let times = pair.times(t).unwrap();
        let mut c = estimation(SenseParameter::Coupling, 201, 0.1, t);
        c.n_samples = 300;
        clean_scan.push(
            chained_average_error(&c, &times, model_g201(), &clean_source)
                .unwrap()
                .delta_sq,
        );
        let mut d = estimation(SenseParameter::Coupling, 201, 0.1, t);
        d.n_samples = 6; // 50 realizations x 6 records
        disordered_scan.push(
            disorder_averaged_error_chained(&d, &times, model_g201(), 0.2, 50)
                .unwrap()
                .delta_sq,
        );
    }
    let peak_clean = clean_scan.iter().copied().fold(0.0_f64, f64::max);
    let peak_dis = disordered_scan.iter().copied().fold(0.0_f64, f64::max);
    let width = |vals: &[f64], peak: f64| vals.iter().filter(|&&v| v > peak / 2.0).count();
    let width_clean = width(&clean_scan, peak_clean);
    let width_dis = width(&disordered_scan, peak_dis);

    report(
        "7",
        (0.5..=2.0).contains(&ratio) && peak_dis < peak_clean && width_dis > width_clean,
        &format!(
            "away-from-dip error ratio (W=0.1 / clean) = {ratio:.3}; dip peak {peak_dis:.3} < \
             {peak_clean:.3} and width {width_dis} > {width_clean} scan points at W=0.2"
        ),
    );
}

#[test]
fn criterion_08_dephasing() {
    let true_params = params(201, 0.2, 0.1);

    // the zero-rate master equation reproduces the unitary signal
    let check_grid = TimeGrid::new(vec![10.0, 25.0, 50.0]).unwrap();
    let h = build_hamiltonian(&true_params, None).unwrap();
    let lind = lindblad_evolve(&h, 0.0, &check_grid).unwrap();
    let unitary = excited_population(&spectrum_for(&true_params), &check_grid).unwrap();
    let gamma0_dev = lind
        .p1
        .iter()
        .zip(&unitary.p1)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);

    // dephased data, clean likelihood, ladder-chained records
    let plan = ChainPlan::Ladder(3);
    let bases = [20.0, 30.0, 40.0, 50.0, 65.0, 80.0];
    let mut union: Vec<f64> = bases
        .iter()
        .flat_map(|&t| plan.times(t).unwrap())
        .collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    let union_grid = TimeGrid::new(union.clone()).unwrap();

    let sweep = |gamma: f64| -> Vec<f64> {
        let source: Box<dyn P1Source> = if gamma == 0.0 {
            Box::new(CleanSource::new(&true_params).unwrap())
        } else {
            let trace = lindblad_evolve(&h, gamma, &union_grid).unwrap();
            Box::new(TabulatedSource::new(&union, &trace.p1))
        };
        bases
            .iter()
            .map(|&t| {
                let cfg = estimation(SenseParameter::Coupling, 201, 0.1, t);
                let times = plan.times(t).unwrap();
                chained_average_error(&cfg, &times, model_g201(), source.as_ref())
                    .unwrap()
                    .delta_sq
            })
            .collect()
    };
    let d2_clean = sweep(0.0);
    let d2_weak = sweep(0.05);
    let d2_strong = sweep(0.2);

    // standard-quantum-limit reference anchored at the earliest tested time
    let sql_anchor = d2_weak[0] * bases[0];
    let beats_sql = bases
        .iter()
        .zip(&d2_weak)
        .skip(1)
        .any(|(&t, &v)| v < sql_anchor / t);

    let monotone = bases
        .iter()
        .enumerate()
        .all(|(i, _)| d2_clean[i] <= d2_weak[i] && d2_weak[i] <= d2_strong[i]);

    report(
        "8",
        gamma0_dev <= 1e-6 && beats_sql && monotone,
        &format!(
            "gamma=0 deviation {gamma0_dev:.1e}; weak-dephasing error beats the SQL line at \
             {} of {} later times; degradation monotone across gamma = 0/0.05/0.2",
            bases
                .iter()
                .zip(&d2_weak)
                .skip(1)
                .filter(|&(&t, &v)| v < sql_anchor / t)
                .count(),
            bases.len() - 1
        ),
    );
}

#[test]
fn criterion_09_finite_size_effect() {
    let grid = TimeGrid::linspace(1.0, 200.0, 399).unwrap();
    let trace_small = fisher_numeric(
        &params(100, 0.2, 0.1),
        SenseParameter::Coupling,
        &grid,
        DEFAULT_FD_STEP,
    )
    .unwrap();
    let trace_large = fisher_numeric(
        &params(400, 0.2, 0.1),
        SenseParameter::Coupling,
        &grid,
        DEFAULT_FD_STEP,
    )
    .unwrap();

    let eb = analytic_bound_energy(&params(400, 0.2, 0.1)).unwrap();
    let dip_period = std::f64::consts::PI / eb;
    let rel_dev = |k: usize| -> Option<f64> {
        let (s, l) = (trace_small.values[k], trace_large.values[k]);
        if !trace_small.mask[k] || !trace_large.mask[k] || l < 1e-3 {
            return None;
        }
        Some((s - l).abs() / l)
    };

    let mut early_dev = 0.0_f64;
    let mut late_dev = 0.0_f64;
    for k in 0..grid.len() {
        let t = grid.times()[k];
        if let Some(r) = rel_dev(k) {
            if t < 80.0 {
                // the agreement claim holds away from the dips, where the
                // quotient is well conditioned
                let near_dip = (1..=2).any(|j| (t - j as f64 * dip_period).abs() <= 3.0);
                if !near_dip {
                    early_dev = early_dev.max(r);
                }
            } else if (120.0..=200.0).contains(&t) {
                late_dev = late_dev.max(r);
            }
        }
    }
    report(
        "9",
        early_dev <= 0.05 && late_dev > 0.2,
        &format!(
            "N=100 vs N=400 relative deviation: {early_dev:.2e} below Jt=80, \
             max {late_dev:.2} in Jt in [120, 200]"
        ),
    );
}

#[test]
fn criterion_10_even_chain() {
    let p = params(200, 0.2, 0.1);
    let spectrum = spectrum_for(&p);
    let ingap = spectrum.in_gap_indices(&p, GAP_EPSILON);
    let three_states = ingap.len() == 3;

    let comps = spectrum.emitter_components();
    let zm = ingap
        .iter()
        .copied()
        .min_by(|&a, &b| {
            spectrum.energies()[a]
                .abs()
                .total_cmp(&spectrum.energies()[b].abs())
        })
        .unwrap();
    let zero_mode_weight = comps[zm] * comps[zm];

    // the time-scaling criterion, unchanged at even N
    let model_g = LikelihoodModel::build(&p, SenseParameter::Coupling, &coupling_prior()).unwrap();
    let rows_g = ladder_sweep(SenseParameter::Coupling, 200, 0.1, &model_g);
    let slope_g = log_log_slope(
        &rows_g
            .iter()
            .map(|(t, r)| (*t, r.delta_sq))
            .collect::<Vec<_>>(),
    );
    let model_d =
        LikelihoodModel::build(&p, SenseParameter::Dimerization, &dimerization_prior()).unwrap();
    let rows_d = ladder_sweep(SenseParameter::Dimerization, 200, 0.2, &model_d);
    let slope_d = log_log_slope(
        &rows_d
            .iter()
            .map(|(t, r)| (*t, r.delta_sq))
            .collect::<Vec<_>>(),
    );

    report(
        "10",
        three_states
            && zero_mode_weight < 1e-8
            && (slope_g + 2.0).abs() <= 0.3
            && (slope_d + 2.0).abs() <= 0.3,
        &format!(
            "{} in-gap states, zero-mode emitter weight {zero_mode_weight:.1e}, \
             slopes {slope_g:.2} (g) and {slope_d:.2} (delta)",
            ingap.len()
        ),
    );
}
