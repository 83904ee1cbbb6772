//! Classical Fisher information of the projective emitter measurement.
//!
//! `F_x(t) = [∂P₁/∂x]² / (P₁(1-P₁))` for `x` either the coupling `g` or
//! the dimerization `delta`. The exact trace differentiates the full
//! numerical occupation by central differences; the closed form keeps
//! only the bound-state pair and the quadratic time dependence,
//! `F̃_x = 4 (∂E_B/∂x)² A(t) t²`, modulated by the periodic dip factor
//! `A(t)`.

use std::io::Write;

use crate::bound_states::{analytic_bound_energy, analytic_overlap};
use crate::dynamics::{excited_population, TimeGrid};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, eigendecompose, ModelParams};

/// Which parameter the measurement senses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenseParameter {
    Coupling,
    Dimerization,
}

impl SenseParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SenseParameter::Coupling => "g",
            SenseParameter::Dimerization => "delta",
        }
    }

    /// Parse from the CLI spelling (`g` or `delta`).
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(SenseParameter::Coupling),
            "delta" => Ok(SenseParameter::Dimerization),
            other => Err(Error::Config(format!(
                "unknown parameter '{other}', expected 'g' or 'delta'"
            ))),
        }
    }

    /// Copy of `params` with this parameter replaced by `x`.
    pub fn substitute(&self, params: &ModelParams, x: f64) -> ModelParams {
        match self {
            SenseParameter::Coupling => ModelParams { g: x, ..*params },
            SenseParameter::Dimerization => ModelParams { delta: x, ..*params },
        }
    }

    /// Current value of this parameter.
    pub fn value(&self, params: &ModelParams) -> f64 {
        match self {
            SenseParameter::Coupling => params.g,
            SenseParameter::Dimerization => params.delta,
        }
    }
}

impl std::fmt::Display for SenseParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default central-difference step for the exact Fisher trace.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Denominator floor below which the quotient is numerically indeterminate
/// and the point is masked.
pub const MASK_FLOOR: f64 = 1e-10;

/// Fisher information along a time grid; masked points (where
/// `P₁(1-P₁)` underflows) carry `NaN`.
#[derive(Debug, Clone)]
pub struct FisherTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub parameter: SenseParameter,
}

impl FisherTrace {
    /// CSV dump: `t,fisher,masked` with empty value on masked rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,fisher,masked")?;
        for ((t, v), m) in self.grid.times().iter().zip(&self.values).zip(&self.mask) {
            if *m {
                writeln!(out, "{t},{v},0")?;
            } else {
                writeln!(out, "{t},,1")?;
            }
        }
        Ok(())
    }

    /// Largest valid value within `[lo, hi]`, with its time.
    pub fn max_in_window(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.grid
            .times()
            .iter()
            .zip(&self.values)
            .zip(&self.mask)
            .filter(|((t, _), m)| **m && **t >= lo && **t <= hi)
            .map(|((t, v), _)| (*t, *v))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Smallest valid value within `[lo, hi]`, with its time.
    pub fn min_in_window(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.grid
            .times()
            .iter()
            .zip(&self.values)
            .zip(&self.mask)
            .filter(|((t, _), m)| **m && **t >= lo && **t <= hi)
            .map(|((t, v), _)| (*t, *v))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn require_in_gap(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.g == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    if !params.in_gap() {
        return Err(Error::OutOfGap {
            g: params.g,
            gap: params.gap_half_width(),
        });
    }
    Ok(())
}

/// Exact Fisher trace by central differences: the spectrum is recomputed
/// at `x ± step` and the occupation differentiated pointwise; the exact
/// occupation at `x` supplies the denominator.
pub fn fisher_numeric(
    params: &ModelParams,
    which: SenseParameter,
    grid: &TimeGrid,
    step: f64,
) -> Result<FisherTrace> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let x = which.value(params);
    for shifted in [
        which.substitute(params, x - step),
        *params,
        which.substitute(params, x + step),
    ] {
        require_in_gap(&shifted)?;
    }

    let occupation = |p: &ModelParams| -> Result<Vec<f64>> {
        let s = eigendecompose(&build_hamiltonian(p, None)?)?;
        Ok(excited_population(&s, grid)?.p1)
    };
    let plus = occupation(&which.substitute(params, x + step))?;
    let minus = occupation(&which.substitute(params, x - step))?;
    let center = occupation(params)?;

    let mut values = Vec::with_capacity(grid.len());
    let mut mask = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let den = center[k] * (1.0 - center[k]);
        if den < MASK_FLOOR {
            values.push(f64::NAN);
            mask.push(false);
        } else {
            let dp = (plus[k] - minus[k]) / (2.0 * step);
            values.push(dp * dp / den);
            mask.push(true);
        }
    }
    Ok(FisherTrace {
        grid: grid.clone(),
        values,
        mask,
        parameter: which,
    })
}

/// Closed-form derivative of the bound-state energy with respect to the
/// sensed parameter.
pub fn bound_energy_derivative(params: &ModelParams, which: SenseParameter) -> Result<f64> {
    require_in_gap(params)?;
    // evaluate on the mirrored (delta > 0) problem, restoring the sign of
    // d/d(delta) afterwards
    let mirrored = params.delta < 0.0;
    let p = if mirrored {
        ModelParams {
            delta: -params.delta,
            ..*params
        }
    } else {
        *params
    };
    let (g, jm, jp) = (p.g, p.j_minus(), p.j_plus());
    let denom = g * g - jp * jp; // negative in the gap
    let r = 1.0 + jm * jm / denom;
    let sqrt_r = r.sqrt();
    let value = match which {
        SenseParameter::Coupling => sqrt_r - g * g * jm * jm / (denom * denom * sqrt_r),
        SenseParameter::Dimerization => {
            let d = g * jm * (jm * jp - denom) / (sqrt_r * denom * denom);
            if mirrored {
                -d
            } else {
                d
            }
        }
    };
    Ok(value)
}

/// Periodic dip factor `A(t) = 4b⁴ sin²(E_B t) / (1 - 4b⁴ cos²(E_B t))`,
/// bounded in `[0, 1]` because `b ≤ 1/√2`.
pub fn dip_factor(params: &ModelParams, t: f64) -> Result<f64> {
    let eb = analytic_bound_energy(params)?;
    let b4 = 4.0 * analytic_overlap(params)?.powi(4);
    let (sin, cos) = (eb * t).sin_cos();
    Ok((b4 * sin * sin / (1.0 - b4 * cos * cos)).clamp(0.0, 1.0))
}

/// Closed-form Fisher information `F̃_x(t) = 4 (∂E_B/∂x)² A(t) t²`.
pub fn fisher_approx(params: &ModelParams, which: SenseParameter, t: f64) -> Result<f64> {
    let de = bound_energy_derivative(params, which)?;
    Ok(4.0 * de * de * dip_factor(params, t)? * t * t)
}

/// Rabi-model baseline `F̄_x(t) = 4 (∂E_B/∂x)² t²`: the purely quadratic
/// upper envelope of the closed form (`A ≤ 1`).
pub fn rabi_fisher(params: &ModelParams, which: SenseParameter, t: f64) -> Result<f64> {
    let de = bound_energy_derivative(params, which)?;
    Ok(4.0 * de * de * t * t)
}
