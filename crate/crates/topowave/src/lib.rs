//! Quantum sensing with a single two-level emitter coupled to a dimerized
//! (SSH) waveguide.
//!
//! The emitter hybridizes with the chain's topological zero mode into a
//! pair of exponentially localized in-gap bound states at `±E_B`, turning
//! the system into an effective two-level oscillator whose frequency
//! encodes the coupling `g` and the dimerization `delta`. Projectively
//! measuring the emitter then senses either parameter; Bayesian inversion
//! of the binomial measurement records reaches a precision scaling as
//! `t⁻²` in the coherence time.
//!
//! Modules follow the pipeline:
//!
//! - [`model`]: single-excitation Hamiltonian, chiral symmetry, disorder,
//!   spectral decomposition;
//! - [`bound_states`]: closed-form bound-state pair and its numerical
//!   extraction, each validating the other;
//! - [`dynamics`]: exact unitary occupation signal, its two-level
//!   approximation, and dephasing via the master-equation integrator;
//! - [`fisher`]: classical Fisher information of the emitter measurement,
//!   exact and closed-form;
//! - [`bayes`]: binomial records, grid posteriors, error averaging, and
//!   the disorder/dephasing robustness studies;
//! - [`cli`]: deterministic experiment runner emitting CSV data files.
//!
//! All quantities are dimensionless with the uniform-chain hopping `J` as
//! the energy unit; times are in units of `1/J`.
//!
//! ```no_run
//! use topowave::model::{build_hamiltonian, eigendecompose, ModelParams};
//! use topowave::bound_states::{analytic_bound_energy, numeric_bound_states};
//!
//! let params = ModelParams::new(201, 0.2, 0.1, 0.0)?;
//! let spectrum = eigendecompose(&build_hamiltonian(&params, None)?)?;
//! let pair = numeric_bound_states(&spectrum, &params)?;
//! assert!((pair.energy - analytic_bound_energy(&params)?).abs() < 1e-6);
//! # Ok::<(), topowave::Error>(())
//! ```

pub mod bayes;
pub mod bound_states;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fisher;
pub mod model;

pub use error::{Error, ErrorClass, Result};
