//! Deterministic experiment runner.
//!
//! Every subcommand resolves a full configuration (command defaults, then
//! config file, then flags — flags win), runs one experiment, and writes
//! plain CSV data files plus a JSON manifest echoing the resolved
//! configuration. Identical invocations produce byte-identical outputs;
//! re-running from the manifest's config echo reproduces a run exactly.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical error. Failures
//! also emit a single machine-readable JSON record on stderr.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::bayes::{
    chained_average_error, disorder_averaged_error_chained, posterior_update, record_rng,
    simulate_record, ChainPlan, CleanSource, EstimationConfig, EstimationResult, LikelihoodModel,
    P1Source, PosteriorGrid, PriorInterval, TabulatedSource,
};
use crate::bound_states::numeric_bound_states;
use crate::dynamics::{
    approx_population, excited_population, lindblad_evolve, rabi_reference, TimeGrid,
};
use crate::error::{Error, ErrorClass, Result};
use crate::fisher::{dip_factor, fisher_approx, fisher_numeric, rabi_fisher, SenseParameter};
use crate::model::{build_hamiltonian, eigendecompose, ModelParams};

/// Environment variable capping the worker thread count.
pub const WORKERS_ENV: &str = "TOPOWAVE_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "topowave",
    version,
    about = "Emitter-on-a-topological-waveguide sensing toolkit",
    after_help = "All numeric outputs are CSV files with a one-line header, written to --out \
                  together with manifest.json (the resolved config echo). Runs are \
                  deterministic under a fixed --seed."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectrum and bound-state wavefunctions.
    ///
    /// Writes bands_energies.csv (k,energy,in_gap) and bands_amplitudes.csv
    /// (index,label,amplitude_plus,amplitude_minus).
    Bands,
    /// Excited-state occupation trace with its closed-form companions.
    ///
    /// Writes dynamics.csv (t,p1,p1_approx,p1_rabi).
    Dynamics,
    /// Classical Fisher information trace, exact and closed form.
    ///
    /// Writes fisher.csv (t,f_numeric,masked,f_approx,dip_factor,f_rabi).
    Fisher,
    /// Mean squared relative error versus evolution time.
    ///
    /// Writes bayes_time.csv (t,mean_dx2,stderr,hl_ref,sql_ref); the
    /// reference lines are anchored at the first listed time.
    BayesTime,
    /// Mean squared relative error versus the true parameter value.
    ///
    /// Writes bayes_range.csv (x_true,t,mean_dx2,stderr).
    BayesRange,
    /// Posterior snapshots at the listed evolution times.
    ///
    /// Writes posterior.csv (t,x,weight).
    Posterior,
    /// Error-versus-time with disordered data and the clean likelihood.
    ///
    /// Writes disorder.csv (t,w,mean_dx2,stderr), including a w=0 baseline.
    Disorder,
    /// Error-versus-time with dephased data and the clean likelihood.
    ///
    /// Writes dephasing.csv (t,gamma,mean_dx2,stderr), including gamma=0.
    Dephasing,
    /// Fisher traces for several chain lengths.
    ///
    /// Writes finite_size.csv (n,t,f_numeric,masked).
    FiniteSize,
    /// Bound states and time scaling for an even chain.
    ///
    /// Writes evenn_energies.csv, evenn_amplitudes.csv, evenn_zero_mode.csv
    /// and evenn_bayes_time.csv (same schemas as bands/bayes-time).
    EvenN,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Dynamics => "dynamics",
            Command::Fisher => "fisher",
            Command::BayesTime => "bayes-time",
            Command::BayesRange => "bayes-range",
            Command::Posterior => "posterior",
            Command::Disorder => "disorder",
            Command::Dephasing => "dephasing",
            Command::FiniteSize => "finite-size",
            Command::EvenN => "even-n",
        }
    }
}

/// Partial configuration: every knob optional, merged as
/// defaults < config file < flags.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Key=value config file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Chain length (number of lattice sites).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Dimerization parameter.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Emitter-chain coupling.
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Emitter transition frequency.
    #[arg(long, global = true)]
    pub detuning: Option<f64>,
    /// Bond disorder strength W.
    #[arg(long = "disorder-w", global = true)]
    pub disorder_w: Option<f64>,
    /// Number of disorder realizations.
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
    /// Emitter dephasing rate.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Measurement repetitions per record.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Independent records averaged per data point.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Posterior grid resolution.
    #[arg(long = "grid-points", global = true)]
    pub grid_points: Option<usize>,
    /// Lower prior bound.
    #[arg(long = "prior-lo", global = true)]
    pub prior_lo: Option<f64>,
    /// Upper prior bound.
    #[arg(long = "prior-hi", global = true)]
    pub prior_hi: Option<f64>,
    /// Sensed parameter: g or delta.
    #[arg(long, global = true)]
    pub which: Option<String>,
    /// True value of the sensed parameter.
    #[arg(long = "x-true", global = true)]
    pub x_true: Option<f64>,
    /// Evolution times: comma list or start:stop:count.
    #[arg(long, global = true)]
    pub times: Option<String>,
    /// True-value sweep grid: comma list or start:stop:count.
    #[arg(long = "x-grid", global = true)]
    pub x_grid: Option<String>,
    /// Times chained per record: single | ladder:K | offsets:... | factors:...
    #[arg(long, global = true)]
    pub chain: Option<String>,
    /// Central-difference step for the exact Fisher information.
    #[arg(long = "fd-step", global = true)]
    pub fd_step: Option<f64>,
    /// Chain lengths for finite-size: comma list.
    #[arg(long, global = true)]
    pub sizes: Option<String>,
    /// RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap (also TOPOWAVE_WORKERS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($field:ident),+ $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl Overrides {
    /// Overlay `self` with `stronger` (its entries win).
    fn merged_with(&self, stronger: &Overrides) -> Overrides {
        let mut merged = self.clone();
        merge_fields!(
            merged, stronger, config, out, n, delta, g, detuning, disorder_w, realizations,
            gamma, shots, samples, grid_points, prior_lo, prior_hi, which, x_true, times, x_grid,
            chain, fd_step, sizes, seed, workers
        );
        merged
    }

    /// Parse a key=value config file. Unknown keys are rejected.
    pub fn from_config_file(path: &Path) -> Result<Overrides> {
        let text = fs::read_to_string(path)?;
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            o.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(o)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
        }
        match key {
            "out" => self.out = Some(PathBuf::from(value)),
            "n" => self.n = Some(num(key, value)?),
            "delta" => self.delta = Some(num(key, value)?),
            "g" => self.g = Some(num(key, value)?),
            "detuning" => self.detuning = Some(num(key, value)?),
            "disorder-w" => self.disorder_w = Some(num(key, value)?),
            "realizations" => self.realizations = Some(num(key, value)?),
            "gamma" => self.gamma = Some(num(key, value)?),
            "shots" => self.shots = Some(num(key, value)?),
            "samples" => self.samples = Some(num(key, value)?),
            "grid-points" => self.grid_points = Some(num(key, value)?),
            "prior-lo" => self.prior_lo = Some(num(key, value)?),
            "prior-hi" => self.prior_hi = Some(num(key, value)?),
            "which" => self.which = Some(value.to_string()),
            "x-true" => self.x_true = Some(num(key, value)?),
            "times" => self.times = Some(value.to_string()),
            "x-grid" => self.x_grid = Some(value.to_string()),
            "chain" => self.chain = Some(value.to_string()),
            "fd-step" => self.fd_step = Some(num(key, value)?),
            "sizes" => self.sizes = Some(value.to_string()),
            "seed" => self.seed = Some(num(key, value)?),
            "workers" => self.workers = Some(num(key, value)?),
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }
}

/// Parse "a:b:n" (inclusive linspace) or a comma list.
fn parse_value_list(spec: &str) -> Result<Vec<f64>> {
    let bad = Error::Config;
    let parts: Vec<&str> = spec.split(':').collect();
    let values = if parts.len() == 3 {
        let a: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range start '{}'", parts[0])))?;
        let b: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range stop '{}'", parts[1])))?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range count '{}'", parts[2])))?;
        if n < 1 {
            return Err(bad("range count must be >= 1".into()));
        }
        if n == 1 {
            vec![a]
        } else {
            let step = (b - a) / (n - 1) as f64;
            (0..n).map(|k| a + step * k as f64).collect()
        }
    } else if parts.len() == 1 {
        let vals: std::result::Result<Vec<f64>, _> =
            spec.split(',').map(str::trim).map(str::parse).collect();
        vals.map_err(|_| bad(format!("bad number list '{spec}'")))?
    } else {
        return Err(bad(format!(
            "'{spec}' is neither start:stop:count nor a comma list"
        )));
    };
    if values.is_empty() {
        return Err(bad("empty value list".into()));
    }
    Ok(values)
}

fn format_value_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Fully resolved run configuration; every module precondition is checked
/// here before dispatch.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub out_dir: PathBuf,
    pub n: usize,
    pub delta: f64,
    pub g: f64,
    pub detuning: f64,
    pub disorder_w: f64,
    pub realizations: usize,
    pub gamma: f64,
    pub shots: u64,
    pub samples: usize,
    pub grid_points: usize,
    pub prior_lo: f64,
    pub prior_hi: f64,
    pub which: SenseParameter,
    pub x_true: f64,
    pub times: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub chain: ChainPlan,
    pub fd_step: f64,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn resolve(command: Command, opts: &Overrides) -> Result<Self> {
        let which = SenseParameter::parse(opts.which.as_deref().unwrap_or("g"))?;
        let (prior_lo_default, prior_hi_default, x_true_default) = match which {
            SenseParameter::Coupling => (0.0, 0.2, 0.1),
            SenseParameter::Dimerization => (0.0, 0.4, 0.2),
        };
        let n_default = match command {
            Command::Bands => 41,
            Command::EvenN => 200,
            _ => 201,
        };
        let times_default = match command {
            Command::Dynamics => "0:100:2001",
            Command::Fisher => "0:100:401",
            Command::FiniteSize => "0.5:200:400",
            Command::Posterior => "20,50,100",
            Command::BayesRange => "25,50,100",
            _ => "10,13,16,20,26,33,50,57,65,75,95,100",
        };
        let chain_default = match command {
            Command::Posterior => "single",
            Command::BayesRange => "ladder:3",
            _ => "offsets:0,0.9",
        };
        let x_grid_default = match which {
            SenseParameter::Coupling => "0.04:0.16:7",
            SenseParameter::Dimerization => "0.08:0.32:7",
        };
        let workers = opts
            .workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()));

        let cfg = ExperimentConfig {
            command,
            out_dir: opts.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            n: opts.n.unwrap_or(n_default),
            delta: opts.delta.unwrap_or(0.2),
            g: opts.g.unwrap_or(0.1),
            detuning: opts.detuning.unwrap_or(0.0),
            disorder_w: opts.disorder_w.unwrap_or(match command {
                Command::Disorder => 0.1,
                _ => 0.0,
            }),
            realizations: opts.realizations.unwrap_or(50),
            gamma: opts.gamma.unwrap_or(match command {
                Command::Dephasing => 0.05,
                _ => 0.0,
            }),
            shots: opts.shots.unwrap_or(10_000),
            samples: opts.samples.unwrap_or(100),
            grid_points: opts.grid_points.unwrap_or(2001),
            prior_lo: opts.prior_lo.unwrap_or(prior_lo_default),
            prior_hi: opts.prior_hi.unwrap_or(prior_hi_default),
            which,
            x_true: opts.x_true.unwrap_or(x_true_default),
            times: parse_value_list(opts.times.as_deref().unwrap_or(times_default))?,
            x_grid: parse_value_list(opts.x_grid.as_deref().unwrap_or(x_grid_default))?,
            chain: ChainPlan::parse(opts.chain.as_deref().unwrap_or(chain_default))?,
            fd_step: opts.fd_step.unwrap_or(crate::fisher::DEFAULT_FD_STEP),
            sizes: match opts.sizes.as_deref() {
                Some(s) => parse_value_list(s)?
                    .into_iter()
                    .map(|v| {
                        if v.fract() == 0.0 && v >= 2.0 {
                            Ok(v as usize)
                        } else {
                            Err(Error::Config(format!("bad chain length {v}")))
                        }
                    })
                    .collect::<Result<Vec<usize>>>()?,
                None => vec![100, 201, 400],
            },
            seed: opts.seed.unwrap_or(7),
            workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.model_params()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.shots < 1 {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        if self.samples < 1 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        if self.realizations < 1 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if !(self.disorder_w >= 0.0) {
            return Err(Error::Config("disorder-w must be >= 0".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config("gamma must be >= 0".into()));
        }
        PriorInterval::new(self.prior_lo, self.prior_hi, self.grid_points)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.delta, self.g, self.detuning)
    }

    fn prior(&self) -> PriorInterval {
        PriorInterval::new(self.prior_lo, self.prior_hi, self.grid_points).expect("validated prior")
    }

    fn estimation_config(&self, t: f64) -> Result<EstimationConfig> {
        Ok(EstimationConfig {
            which: self.which,
            x_true: self.x_true,
            base: self.model_params()?,
            t,
            shots: self.shots,
            n_samples: self.samples,
            prior: self.prior(),
            seed: self.seed,
        })
    }

    /// Canonical key=value echo; parsing it back reproduces this config.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("out", self.out_dir.display().to_string());
        put("n", self.n.to_string());
        put("delta", self.delta.to_string());
        put("g", self.g.to_string());
        put("detuning", self.detuning.to_string());
        put("disorder-w", self.disorder_w.to_string());
        put("realizations", self.realizations.to_string());
        put("gamma", self.gamma.to_string());
        put("shots", self.shots.to_string());
        put("samples", self.samples.to_string());
        put("grid-points", self.grid_points.to_string());
        put("prior-lo", self.prior_lo.to_string());
        put("prior-hi", self.prior_hi.to_string());
        put("which", self.which.to_string());
        put("x-true", self.x_true.to_string());
        put("times", format_value_list(&self.times));
        put("x-grid", format_value_list(&self.x_grid));
        put("chain", self.chain.to_string());
        put("fd-step", self.fd_step.to_string());
        put(
            "sizes",
            self.sizes
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("seed", self.seed.to_string());
        map
    }
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    versions: BTreeMap<String, String>,
    seed: u64,
    config: BTreeMap<String, String>,
}

fn write_manifest(cfg: &ExperimentConfig) -> Result<()> {
    let mut versions = BTreeMap::new();
    versions.insert(
        "topowave".to_string(),
        env!("CARGO_PKG_VERSION").to_string(),
    );
    let manifest = Manifest {
        command: cfg.command.name().to_string(),
        versions,
        seed: cfg.seed,
        config: cfg.echo(),
    };
    let path = cfg.out_dir.join("manifest.json");
    let mut file = BufWriter::new(fs::File::create(&path)?);
    serde_json::to_writer_pretty(&mut file, &manifest)
        .map_err(|e| Error::Numerical(format!("manifest serialization failed: {e}")))?;
    file.write_all(b"\n")?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn create_output(cfg: &ExperimentConfig, name: &str) -> Result<BufWriter<fs::File>> {
    let path = cfg.out_dir.join(name);
    let file = fs::File::create(&path)?;
    log::info!("writing {}", path.display());
    Ok(BufWriter::new(file))
}

/// Parse the process arguments and run; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli.command, &cli.overrides) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e.class() {
                ErrorClass::Validation => "validation",
                ErrorClass::Numerical => "numerical",
            };
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": kind, "message": e.to_string()}})
            );
            match e.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Numerical => 2,
            }
        }
    }
}

/// Resolve the configuration (config file, then flag overrides) and run
/// one experiment.
pub fn run(command: Command, opts: &Overrides) -> Result<()> {
    let merged = match &opts.config {
        Some(path) => Overrides::from_config_file(path)?.merged_with(opts),
        None => opts.clone(),
    };
    let cfg = ExperimentConfig::resolve(command, &merged)?;
    if let Some(w) = cfg.workers {
        // ignore failure: the global pool may already exist in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    fs::create_dir_all(&cfg.out_dir)?;
    dispatch(&cfg)?;
    write_manifest(&cfg)
}

fn dispatch(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.command {
        Command::Bands => run_bands(cfg, "bands"),
        Command::Dynamics => run_dynamics(cfg),
        Command::Fisher => run_fisher(cfg),
        Command::BayesTime => run_bayes_time_into(cfg, "bayes_time.csv"),
        Command::BayesRange => run_bayes_range(cfg),
        Command::Posterior => run_posterior(cfg),
        Command::Disorder => run_disorder(cfg),
        Command::Dephasing => run_dephasing(cfg),
        Command::FiniteSize => run_finite_size(cfg),
        Command::EvenN => run_even_n(cfg),
    }
}

fn run_bands(cfg: &ExperimentConfig, prefix: &str) -> Result<()> {
    let params = cfg.model_params()?;
    let spectrum = eigendecompose(&build_hamiltonian(&params, None)?)?;
    let pair = numeric_bound_states(&spectrum, &params)?;

    let mut out = create_output(cfg, &format!("{prefix}_energies.csv"))?;
    writeln!(out, "k,energy,in_gap")?;
    let gap = params.gap_half_width() - crate::bound_states::GAP_EPSILON;
    for (k, e) in spectrum.energies().iter().enumerate() {
        writeln!(out, "{k},{e},{}", u8::from(e.abs() < gap))?;
    }

    let out = create_output(cfg, &format!("{prefix}_amplitudes.csv"))?;
    pair.write_csv(out)?;

    if params.n_sites % 2 == 0 && params.delta > 0.0 {
        // the extra in-gap state: the edge-localized zero mode
        let ingap = spectrum.in_gap_indices(&params, crate::bound_states::GAP_EPSILON);
        let zm = ingap
            .iter()
            .copied()
            .min_by(|&a, &b| {
                spectrum.energies()[a]
                    .abs()
                    .total_cmp(&spectrum.energies()[b].abs())
            })
            .expect("even-chain in-gap manifold");
        let mut out = create_output(cfg, &format!("{prefix}_zero_mode.csv"))?;
        writeln!(out, "index,label,amplitude")?;
        let v = spectrum.vector(zm);
        for i in 0..v.len() {
            let label = if i == 0 {
                "emitter".to_string()
            } else {
                format!("site-{i}")
            };
            writeln!(out, "{i},{label},{}", v[i])?;
        }
    }
    Ok(())
}

fn run_dynamics(cfg: &ExperimentConfig) -> Result<()> {
    let params = cfg.model_params()?;
    let grid = TimeGrid::new(cfg.times.clone())?;
    let spectrum = eigendecompose(&build_hamiltonian(&params, None)?)?;
    let trace = excited_population(&spectrum, &grid)?;

    let mut out = create_output(cfg, "dynamics.csv")?;
    writeln!(out, "t,p1,p1_approx,p1_rabi")?;
    for (t, p1) in grid.times().iter().zip(&trace.p1) {
        let approx = approx_population(&params, *t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let rabi = rabi_reference(&params, *t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(out, "{t},{p1},{approx},{rabi}")?;
    }
    Ok(())
}

fn run_fisher(cfg: &ExperimentConfig) -> Result<()> {
    let params = cfg.model_params()?;
    let grid = TimeGrid::new(cfg.times.clone())?;
    let trace = fisher_numeric(&params, cfg.which, &grid, cfg.fd_step)?;

    let mut out = create_output(cfg, "fisher.csv")?;
    writeln!(out, "t,f_numeric,masked,f_approx,dip_factor,f_rabi")?;
    for ((t, v), m) in grid.times().iter().zip(&trace.values).zip(&trace.mask) {
        let numeric = if *m { v.to_string() } else { String::new() };
        let approx = fisher_approx(&params, cfg.which, *t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let a = dip_factor(&params, *t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let rabi = rabi_fisher(&params, cfg.which, *t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(out, "{t},{numeric},{},{approx},{a},{rabi}", u8::from(!*m))?;
    }
    Ok(())
}

fn build_model(cfg: &ExperimentConfig) -> Result<LikelihoodModel> {
    LikelihoodModel::build(&cfg.model_params()?, cfg.which, &cfg.prior())
}

/// Error-vs-time sweep over the configured times and chain plan.
fn time_sweep(
    cfg: &ExperimentConfig,
    compute: impl Fn(&[f64], &EstimationConfig) -> Result<EstimationResult>,
) -> Result<Vec<(f64, EstimationResult)>> {
    let mut rows = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let est = cfg.estimation_config(t)?;
        let times = cfg.chain.times(t)?;
        rows.push((t, compute(&times, &est)?));
    }
    Ok(rows)
}

fn run_bayes_time_into(cfg: &ExperimentConfig, file: &str) -> Result<()> {
    let model = build_model(cfg)?;
    let clean = CleanSource::new(&cfg.estimation_config(cfg.times[0])?.true_params())?;
    let rows = time_sweep(cfg, |times, est| {
        chained_average_error(est, times, &model, &clean)
    })?;

    let mut out = create_output(cfg, file)?;
    writeln!(out, "t,mean_dx2,stderr,hl_ref,sql_ref")?;
    let (t0, d0) = (rows[0].0, rows[0].1.delta_sq);
    for (t, r) in &rows {
        let hl = d0 * (t0 / t).powi(2);
        let sql = d0 * (t0 / t);
        writeln!(out, "{t},{},{},{hl},{sql}", r.delta_sq, r.std_error)?;
    }
    Ok(())
}

fn run_bayes_range(cfg: &ExperimentConfig) -> Result<()> {
    let model = build_model(cfg)?;
    let mut out = create_output(cfg, "bayes_range.csv")?;
    writeln!(out, "x_true,t,mean_dx2,stderr")?;
    for &x in &cfg.x_grid {
        for &t in &cfg.times {
            let mut est = cfg.estimation_config(t)?;
            est.x_true = x;
            let clean = CleanSource::new(&est.true_params())?;
            let times = cfg.chain.times(t)?;
            let r = chained_average_error(&est, &times, &model, &clean)?;
            writeln!(out, "{x},{t},{},{}", r.delta_sq, r.std_error)?;
        }
    }
    Ok(())
}

fn run_posterior(cfg: &ExperimentConfig) -> Result<()> {
    let model = build_model(cfg)?;
    let clean = CleanSource::new(&cfg.estimation_config(cfg.times[0])?.true_params())?;
    let mut out = create_output(cfg, "posterior.csv")?;
    writeln!(out, "t,x,weight")?;
    for (i, &t) in cfg.times.iter().enumerate() {
        let est = cfg.estimation_config(t)?;
        let mut rng = record_rng(cfg.seed, i as u64);
        let mut post = PosteriorGrid::uniform(&est.prior);
        for &u in &cfg.chain.times(t)? {
            let m = simulate_record(clean.p1(u, i)?, cfg.shots, &mut rng)?;
            post = posterior_update(m, cfg.shots, &model.p1_at(u), &post)?;
        }
        for (x, w) in post.xs().iter().zip(post.weights()) {
            writeln!(out, "{t},{x},{w}")?;
        }
    }
    Ok(())
}

fn run_disorder(cfg: &ExperimentConfig) -> Result<()> {
    let model = build_model(cfg)?;
    let clean = CleanSource::new(&cfg.estimation_config(cfg.times[0])?.true_params())?;
    let baseline = time_sweep(cfg, |times, est| {
        chained_average_error(est, times, &model, &clean)
    })?;
    let disordered = time_sweep(cfg, |times, est| {
        disorder_averaged_error_chained(est, times, &model, cfg.disorder_w, cfg.realizations)
    })?;

    let mut out = create_output(cfg, "disorder.csv")?;
    writeln!(out, "t,w,mean_dx2,stderr")?;
    for (t, r) in &baseline {
        writeln!(out, "{t},0,{},{}", r.delta_sq, r.std_error)?;
    }
    for (t, r) in &disordered {
        writeln!(out, "{t},{},{},{}", cfg.disorder_w, r.delta_sq, r.std_error)?;
    }
    Ok(())
}

fn run_dephasing(cfg: &ExperimentConfig) -> Result<()> {
    let model = build_model(cfg)?;
    let true_params = cfg.estimation_config(cfg.times[0])?.true_params();
    let clean = CleanSource::new(&true_params)?;
    let baseline = time_sweep(cfg, |times, est| {
        chained_average_error(est, times, &model, &clean)
    })?;

    // one integration covers every chained time of the sweep
    let dephased = if cfg.gamma > 0.0 {
        let mut union: Vec<f64> = Vec::new();
        for &t in &cfg.times {
            union.extend(cfg.chain.times(t)?);
        }
        union.sort_by(f64::total_cmp);
        union.dedup();
        let h = build_hamiltonian(&true_params, None)?;
        let trace = lindblad_evolve(&h, cfg.gamma, &TimeGrid::new(union.clone())?)?;
        let source = TabulatedSource::new(&union, &trace.p1);
        time_sweep(cfg, |times, est| {
            chained_average_error(est, times, &model, &source)
        })?
    } else {
        baseline.clone()
    };

    let mut out = create_output(cfg, "dephasing.csv")?;
    writeln!(out, "t,gamma,mean_dx2,stderr")?;
    for (t, r) in &baseline {
        writeln!(out, "{t},0,{},{}", r.delta_sq, r.std_error)?;
    }
    for (t, r) in &dephased {
        writeln!(out, "{t},{},{},{}", cfg.gamma, r.delta_sq, r.std_error)?;
    }
    Ok(())
}

fn run_finite_size(cfg: &ExperimentConfig) -> Result<()> {
    let grid = TimeGrid::new(cfg.times.clone())?;
    let mut out = create_output(cfg, "finite_size.csv")?;
    writeln!(out, "n,t,f_numeric,masked")?;
    for &n in &cfg.sizes {
        let params = ModelParams::new(n, cfg.delta, cfg.g, cfg.detuning)?;
        let trace = fisher_numeric(&params, cfg.which, &grid, cfg.fd_step)?;
        for ((t, v), m) in grid.times().iter().zip(&trace.values).zip(&trace.mask) {
            let numeric = if *m { v.to_string() } else { String::new() };
            writeln!(out, "{n},{t},{numeric},{}", u8::from(!*m))?;
        }
    }
    Ok(())
}

fn run_even_n(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.n % 2 != 0 {
        return Err(Error::Config(format!(
            "even-n requires an even chain length, got {}",
            cfg.n
        )));
    }
    run_bands(cfg, "evenn")?;
    run_bayes_time_into(cfg, "evenn_bayes_time.csv")
}
