//! Bayesian estimation of the coupling or the dimerization from projective
//! emitter measurements.
//!
//! A sensing record is `M` preparation–evolution–measurement repetitions
//! at one evolution time; the count of excited outcomes is binomial in the
//! occupation `P₁`. The posterior lives on a uniform grid over the prior
//! interval and is updated in log space, so records chain cheaply.
//!
//! A single record at a late time leaves the accumulated phase known only
//! modulo `2π`, which makes the posterior multimodal over a wide prior.
//! Records taken at a few distinct times break that degeneracy (each alias
//! set differs), so the sweep helpers accept a [`ChainPlan`] describing
//! which times to chain per sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use std::io::Write;

use crate::dynamics::{lindblad_evolve, TimeGrid};
use crate::error::{Error, Result};
use crate::fisher::SenseParameter;
use crate::model::{build_hamiltonian, eigendecompose, DisorderSpec, ModelParams};

/// Likelihood clamp keeping `log` finite when the model occupation
/// saturates at 0 or 1.
pub const P_FLOOR: f64 = 1e-12;

/// Uniform prior support and grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorInterval {
    pub lo: f64,
    pub hi: f64,
    pub n_grid: usize,
}

impl PriorInterval {
    pub fn new(lo: f64, hi: f64, n_grid: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prior interval must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n_grid < 2 {
            return Err(Error::InvalidParameter(format!(
                "prior grid needs at least 2 points, got {n_grid}"
            )));
        }
        Ok(Self { lo, hi, n_grid })
    }

    /// Uniform grid including both endpoints.
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n_grid - 1) as f64;
        (0..self.n_grid)
            .map(|k| self.lo + step * k as f64)
            .collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

/// Discrete posterior: grid points and normalized weights.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    xs: Vec<f64>,
    weights: Vec<f64>,
}

impl PosteriorGrid {
    /// Uniform (flat-prior) distribution over the interval grid.
    pub fn uniform(prior: &PriorInterval) -> Self {
        let xs = prior.grid();
        let w = 1.0 / xs.len() as f64;
        let weights = vec![w; xs.len()];
        Self { xs, weights }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Posterior mean `⟨x⟩`.
    pub fn mean(&self) -> f64 {
        self.xs.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    /// Posterior variance `σ²_x` (clamped at zero against rounding).
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .xs
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * x * w)
            .sum();
        (second - mean * mean).max(0.0)
    }

    /// CSV dump: `x,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,weight")?;
        for (x, w) in self.xs.iter().zip(&self.weights) {
            writeln!(out, "{x},{w}")?;
        }
        Ok(())
    }
}

/// One estimation task: sense `which` around `x_true` at evolution time `t`
/// with `shots` repetitions per record, averaging `n_samples` records.
#[derive(Debug, Clone)]
pub struct EstimationConfig {
    pub which: SenseParameter,
    pub x_true: f64,
    /// Chain length, detuning, and the fixed value of the other parameter.
    pub base: ModelParams,
    pub t: f64,
    pub shots: u64,
    pub n_samples: usize,
    pub prior: PriorInterval,
    pub seed: u64,
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.shots < 1 {
            return Err(Error::InvalidParameter("shots must be >= 1".into()));
        }
        if self.n_samples < 1 {
            return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
        }
        if !self.prior.contains(self.x_true) {
            return Err(Error::InvalidParameter(format!(
                "x_true = {} outside the prior [{}, {}]",
                self.x_true, self.prior.lo, self.prior.hi
            )));
        }
        if !(self.t > 0.0) {
            return Err(Error::InvalidParameter(
                "evolution time must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Model parameters with the sensed parameter set to `x`.
    pub fn params_at(&self, x: f64) -> ModelParams {
        self.which.substitute(&self.base, x)
    }

    /// Parameters at the true value (the data-generating system).
    pub fn true_params(&self) -> ModelParams {
        self.params_at(self.x_true)
    }
}

/// Aggregated estimation outcome over the averaged records.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// Record-averaged posterior mean.
    pub mean: f64,
    /// Record-averaged posterior variance.
    pub variance: f64,
    /// Record-averaged squared relative error.
    pub delta_sq: f64,
    /// Standard error of `delta_sq` across records.
    pub std_error: f64,
    /// Per-record squared relative errors.
    pub per_sample: Vec<f64>,
}

/// Draw the number of excited outcomes in `shots` repetitions.
pub fn simulate_record(p1_true: f64, shots: u64, rng: &mut impl Rng) -> Result<u64> {
    if !p1_true.is_finite() {
        return Err(Error::Numerical("non-finite occupation".into()));
    }
    let p = p1_true.clamp(0.0, 1.0);
    let binom = Binomial::new(shots, p)
        .map_err(|e| Error::Numerical(format!("binomial setup failed: {e}")))?;
    Ok(binom.sample(rng))
}

/// Bayes update of `prior` with a binomial record `(m, shots)` against the
/// per-grid-point model occupations. Log-space with max subtraction; the
/// binomial coefficient cancels in the normalization.
pub fn posterior_update(
    m: u64,
    shots: u64,
    model_p1: &[f64],
    prior: &PosteriorGrid,
) -> Result<PosteriorGrid> {
    if m > shots {
        return Err(Error::InvalidParameter(format!(
            "count {m} exceeds shots {shots}"
        )));
    }
    if model_p1.len() != prior.xs.len() {
        return Err(Error::InvalidParameter(
            "model occupation grid does not match the prior grid".into(),
        ));
    }
    let mf = m as f64;
    let rest = (shots - m) as f64;
    let mut logw: Vec<f64> = prior
        .weights
        .iter()
        .zip(model_p1)
        .map(|(&w, &p)| {
            if w <= 0.0 {
                f64::NEG_INFINITY
            } else {
                let p = p.clamp(P_FLOOR, 1.0 - P_FLOOR);
                w.ln() + mf * p.ln() + rest * (-p).ln_1p()
            }
        })
        .collect();
    let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Numerical("posterior underflowed to zero".into()));
    }
    let mut total = 0.0;
    for lw in &mut logw {
        *lw = (*lw - peak).exp();
        total += *lw;
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical("posterior normalization failed".into()));
    }
    let weights = logw.into_iter().map(|w| w / total).collect();
    Ok(PosteriorGrid {
        xs: prior.xs.clone(),
        weights,
    })
}

/// Squared relative error `Δx² = (σ²_x + |⟨x⟩ - x|²) / x²` of a posterior
/// against the true value.
pub fn squared_relative_error(post: &PosteriorGrid, x_true: f64) -> Result<f64> {
    if x_true == 0.0 {
        return Err(Error::UndefinedRelativeError);
    }
    let bias = post.mean() - x_true;
    Ok((post.variance() + bias * bias) / (x_true * x_true))
}

/// Data-generating occupation source: returns the `P₁` the hardware would
/// produce at time `t` for record index `sample`.
pub trait P1Source: Sync {
    fn p1(&self, t: f64, sample: usize) -> Result<f64>;
}

/// Clean unitary occupation at fixed parameters, exact for all times.
pub struct CleanSource {
    energies: Vec<f64>,
    weights: Vec<f64>,
}

impl CleanSource {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let s = eigendecompose(&build_hamiltonian(params, None)?)?;
        Ok(Self {
            energies: s.energies().to_vec(),
            weights: s.emitter_weights(),
        })
    }

    fn from_spectral(energies: Vec<f64>, weights: Vec<f64>) -> Self {
        Self { energies, weights }
    }

    pub fn value(&self, t: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (e, w) in self.energies.iter().zip(&self.weights) {
            let (sin, cos) = (e * t).sin_cos();
            re += w * cos;
            im += w * sin;
        }
        (re * re + im * im).clamp(0.0, 1.0)
    }
}

impl P1Source for CleanSource {
    fn p1(&self, t: f64, _sample: usize) -> Result<f64> {
        Ok(self.value(t))
    }
}

/// Occupations precomputed on a fixed set of times (used for dephased
/// dynamics, where each evaluation is an integration).
pub struct TabulatedSource {
    entries: Vec<(u64, f64)>,
}

impl TabulatedSource {
    pub fn new(times: &[f64], values: &[f64]) -> Self {
        let entries = times
            .iter()
            .zip(values)
            .map(|(t, v)| (t.to_bits(), *v))
            .collect();
        Self { entries }
    }
}

impl P1Source for TabulatedSource {
    fn p1(&self, t: f64, _sample: usize) -> Result<f64> {
        let key = t.to_bits();
        self.entries
            .iter()
            .find(|(bits, _)| *bits == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::InvalidParameter(format!("no tabulated occupation at t = {t}")))
    }
}

/// One disordered chain per block of `samples_per_realization` records.
pub struct DisorderedEnsembleSource {
    realizations: Vec<CleanSource>,
    samples_per_realization: usize,
}

impl P1Source for DisorderedEnsembleSource {
    fn p1(&self, t: f64, sample: usize) -> Result<f64> {
        let r = sample / self.samples_per_realization;
        self.realizations
            .get(r)
            .map(|s| s.value(t))
            .ok_or_else(|| Error::InvalidParameter(format!("no disorder realization {r}")))
    }
}

/// Clean model occupations over the prior grid: one exact diagonalization
/// per grid point, done once and reused for every time and every record.
pub struct LikelihoodModel {
    which: SenseParameter,
    base: ModelParams,
    prior: PriorInterval,
    xs: Vec<f64>,
    spectral: Vec<(Vec<f64>, Vec<f64>)>,
}

impl LikelihoodModel {
    pub fn build(base: &ModelParams, which: SenseParameter, prior: &PriorInterval) -> Result<Self> {
        base.validate()?;
        let xs = prior.grid();
        let spectral: Result<Vec<_>> = xs
            .par_iter()
            .map(|&x| {
                let p = which.substitute(base, x);
                let s = eigendecompose(&build_hamiltonian(&p, None)?)?;
                Ok((s.energies().to_vec(), s.emitter_weights()))
            })
            .collect();
        Ok(Self {
            which,
            base: *base,
            prior: *prior,
            xs,
            spectral: spectral?,
        })
    }

    pub fn which(&self) -> SenseParameter {
        self.which
    }

    pub fn base(&self) -> &ModelParams {
        &self.base
    }

    pub fn prior(&self) -> &PriorInterval {
        &self.prior
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Model occupation at time `t` for every grid point.
    pub fn p1_at(&self, t: f64) -> Vec<f64> {
        self.spectral
            .iter()
            .map(|(energies, weights)| {
                let (mut re, mut im) = (0.0, 0.0);
                for (e, w) in energies.iter().zip(weights) {
                    let (sin, cos) = (e * t).sin_cos();
                    re += w * cos;
                    im += w * sin;
                }
                (re * re + im * im).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// RNG for one record stream; streams are independent for distinct indices.
pub fn record_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn aggregate(records: Vec<(f64, f64, f64)>) -> EstimationResult {
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.0).sum::<f64>() / n;
    let variance = records.iter().map(|r| r.1).sum::<f64>() / n;
    let delta_sq = records.iter().map(|r| r.2).sum::<f64>() / n;
    let spread = records
        .iter()
        .map(|r| (r.2 - delta_sq).powi(2))
        .sum::<f64>()
        / n;
    EstimationResult {
        mean,
        variance,
        delta_sq,
        std_error: (spread / n).sqrt(),
        per_sample: records.into_iter().map(|r| r.2).collect(),
    }
}

/// Core sampling loop: for every record draw one count per chained time,
/// fold the updates into a fresh flat prior, and score against `x_true`.
fn run_records(
    cfg: &EstimationConfig,
    times: &[f64],
    model: &LikelihoodModel,
    data: &dyn P1Source,
    n_records: usize,
) -> Result<EstimationResult> {
    cfg.validate()?;
    if times.is_empty() {
        return Err(Error::InvalidParameter("no evolution times".into()));
    }
    let model_p1: Vec<Vec<f64>> = times.iter().map(|&t| model.p1_at(t)).collect();
    let data_p1: Result<Vec<Vec<f64>>> = (0..n_records)
        .map(|s| times.iter().map(|&t| data.p1(t, s)).collect())
        .collect();
    let data_p1 = data_p1?;
    let flat = PosteriorGrid::uniform(&cfg.prior);

    let records: Result<Vec<(f64, f64, f64)>> = (0..n_records)
        .into_par_iter()
        .map(|s| {
            let mut rng = record_rng(cfg.seed, s as u64);
            let mut post = flat.clone();
            for (j, p1s) in model_p1.iter().enumerate() {
                let m = simulate_record(data_p1[s][j], cfg.shots, &mut rng)?;
                post = posterior_update(m, cfg.shots, p1s, &post)?;
            }
            let d2 = squared_relative_error(&post, cfg.x_true)?;
            Ok((post.mean(), post.variance(), d2))
        })
        .collect();
    Ok(aggregate(records?))
}

/// Average squared relative error of single-time records drawn from
/// `data` at the configured evolution time.
pub fn average_error(
    cfg: &EstimationConfig,
    model: &LikelihoodModel,
    data: &dyn P1Source,
) -> Result<EstimationResult> {
    run_records(cfg, &[cfg.t], model, data, cfg.n_samples)
}

/// Convenience wrapper generating the data from the clean system at the
/// true parameter value.
pub fn average_error_clean(
    cfg: &EstimationConfig,
    model: &LikelihoodModel,
) -> Result<EstimationResult> {
    let clean = CleanSource::new(&cfg.true_params())?;
    average_error(cfg, model, &clean)
}

/// Chain one record per listed time into a single posterior (records drawn
/// from the clean system). Listing a time twice is equivalent to doubling
/// the shot count once, since the likelihood exponents add.
pub fn sequential_estimate(
    cfg: &EstimationConfig,
    times: &[f64],
    model: &LikelihoodModel,
) -> Result<PosteriorGrid> {
    cfg.validate()?;
    if times.is_empty() {
        return Err(Error::InvalidParameter("no evolution times".into()));
    }
    let clean = CleanSource::new(&cfg.true_params())?;
    let mut rng = record_rng(cfg.seed, 0);
    let mut post = PosteriorGrid::uniform(&cfg.prior);
    for &t in times {
        let m = simulate_record(clean.p1(t, 0)?, cfg.shots, &mut rng)?;
        post = posterior_update(m, cfg.shots, &model.p1_at(t), &post)?;
    }
    Ok(post)
}

/// Multi-time sampling: every record chains the listed times before
/// scoring, which suppresses posterior phase aliases.
pub fn chained_average_error(
    cfg: &EstimationConfig,
    times: &[f64],
    model: &LikelihoodModel,
    data: &dyn P1Source,
) -> Result<EstimationResult> {
    run_records(cfg, times, model, data, cfg.n_samples)
}

/// Disordered data inverted with the clean likelihood: robustness of the
/// protocol itself, not of a re-fitted model. Each realization draws a
/// fresh chiral-symmetric disorder profile and contributes `n_samples`
/// records; the per-call total is `n_realizations * n_samples`.
pub fn disorder_averaged_error(
    cfg: &EstimationConfig,
    model: &LikelihoodModel,
    strength: f64,
    n_realizations: usize,
) -> Result<EstimationResult> {
    disorder_averaged_error_chained(cfg, &[cfg.t], model, strength, n_realizations)
}

/// Multi-time variant of [`disorder_averaged_error`].
pub fn disorder_averaged_error_chained(
    cfg: &EstimationConfig,
    times: &[f64],
    model: &LikelihoodModel,
    strength: f64,
    n_realizations: usize,
) -> Result<EstimationResult> {
    if cfg.which != SenseParameter::Coupling {
        return Err(Error::InvalidParameter(
            "the disorder study senses the coupling g".into(),
        ));
    }
    if n_realizations < 1 {
        return Err(Error::InvalidParameter("need at least one realization".into()));
    }
    let mut seed_rng = record_rng(cfg.seed, u64::MAX);
    let disorder_seeds: Vec<u64> = (0..n_realizations).map(|_| seed_rng.random()).collect();

    let realizations: Result<Vec<CleanSource>> = disorder_seeds
        .par_iter()
        .map(|&ds| {
            let spec = DisorderSpec::new(strength, ds)?;
            let s = eigendecompose(&build_hamiltonian(&cfg.true_params(), Some(&spec))?)?;
            Ok(CleanSource::from_spectral(
                s.energies().to_vec(),
                s.emitter_weights(),
            ))
        })
        .collect();
    let source = DisorderedEnsembleSource {
        realizations: realizations?,
        samples_per_realization: cfg.n_samples,
    };
    run_records(cfg, times, model, &source, n_realizations * cfg.n_samples)
}

/// Dephased data inverted with the clean unitary likelihood. At `gamma = 0`
/// the master equation reduces to the unitary evolution exactly, so the
/// clean occupation is used directly and the records reproduce
/// [`average_error_clean`] bit for bit.
pub fn dephasing_error(
    cfg: &EstimationConfig,
    model: &LikelihoodModel,
    gamma: f64,
) -> Result<EstimationResult> {
    dephasing_error_chained(cfg, &[cfg.t], model, gamma)
}

/// Multi-time variant of [`dephasing_error`]; one integration covers all
/// chained times.
pub fn dephasing_error_chained(
    cfg: &EstimationConfig,
    times: &[f64],
    model: &LikelihoodModel,
    gamma: f64,
) -> Result<EstimationResult> {
    if gamma == 0.0 {
        let clean = CleanSource::new(&cfg.true_params())?;
        return run_records(cfg, times, model, &clean, cfg.n_samples);
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let grid = TimeGrid::new(sorted.clone())?;
    let h = build_hamiltonian(&cfg.true_params(), None)?;
    let trace = lindblad_evolve(&h, gamma, &grid)?;
    let source = TabulatedSource::new(&sorted, &trace.p1);
    run_records(cfg, times, model, &source, cfg.n_samples)
}

/// Recipe for the evolution times chained within one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainPlan {
    /// One record at the base time only.
    Single,
    /// Halving ladder `t/2^k, ..., t/2, t`: coarse times pin the coarse
    /// phase, so the fine times stay alias-free at any shot count.
    Ladder(u32),
    /// Additive companions `t + o_i`; small offsets disambiguate while
    /// preserving structure near the information dips.
    Offsets(Vec<f64>),
    /// Multiplicative companions `f_i * t`.
    Factors(Vec<f64>),
}

impl ChainPlan {
    pub fn times(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter("base time must be positive".into()));
        }
        let times: Vec<f64> = match self {
            ChainPlan::Single => vec![t],
            ChainPlan::Ladder(stages) => (0..=*stages)
                .rev()
                .map(|k| t / (1u64 << k) as f64)
                .collect(),
            ChainPlan::Offsets(offsets) => offsets.iter().map(|o| t + o).collect(),
            ChainPlan::Factors(factors) => factors.iter().map(|f| f * t).collect(),
        };
        if times.iter().any(|u| !(*u > 0.0)) {
            return Err(Error::InvalidParameter(
                "chained times must stay positive".into(),
            ));
        }
        Ok(times)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = |m: String| Error::Config(m);
        if s == "single" {
            return Ok(ChainPlan::Single);
        }
        if let Some(rest) = s.strip_prefix("ladder:") {
            let stages: u32 = rest
                .parse()
                .map_err(|_| bad(format!("bad ladder stage count '{rest}'")))?;
            if stages == 0 || stages > 16 {
                return Err(bad("ladder stages must be in 1..=16".into()));
            }
            return Ok(ChainPlan::Ladder(stages));
        }
        let parse_list = |rest: &str| -> Result<Vec<f64>> {
            let vals: std::result::Result<Vec<f64>, _> =
                rest.split(',').map(str::trim).map(str::parse).collect();
            let vals = vals.map_err(|_| bad(format!("bad number list '{rest}'")))?;
            if vals.is_empty() {
                return Err(bad("empty chain list".into()));
            }
            Ok(vals)
        };
        if let Some(rest) = s.strip_prefix("offsets:") {
            return Ok(ChainPlan::Offsets(parse_list(rest)?));
        }
        if let Some(rest) = s.strip_prefix("factors:") {
            return Ok(ChainPlan::Factors(parse_list(rest)?));
        }
        Err(bad(format!(
            "unknown chain plan '{s}' (single | ladder:K | offsets:a,b,... | factors:a,b,...)"
        )))
    }
}

impl std::fmt::Display for ChainPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |vals: &[f64]| {
            vals.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            ChainPlan::Single => write!(f, "single"),
            ChainPlan::Ladder(stages) => write!(f, "ladder:{stages}"),
            ChainPlan::Offsets(o) => write!(f, "offsets:{}", join(o)),
            ChainPlan::Factors(v) => write!(f, "factors:{}", join(v)),
        }
    }
}
