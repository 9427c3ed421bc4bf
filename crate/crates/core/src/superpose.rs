//! Superimposition of per-branch traces at the splitter.
//!
//! Every branch contributes its linear intensity; the aggregate is
//!
//! ```text
//! S(z) = 10 log10( sqrt( sum_c (10^(0.1 P_c(z)))^2 ) )
//! ```
//!
//! which is the form used throughout instead of the equivalent
//! `5 log10(sum p^2)`.

use crate::error::{Error, Result};
use crate::model::{Trace, DISCONNECTED};

/// Non-negative linear power.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LinearIntensity(f64);

impl LinearIntensity {
    pub const ZERO: LinearIntensity = LinearIntensity(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 || value.is_infinite() {
            return Err(Error::InvalidInput(format!(
                "linear intensity must be finite and >= 0, got {value}"
            )));
        }
        Ok(LinearIntensity(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `10^(0.1 p)`; the disconnected sentinel maps to zero.
pub fn db_to_linear(p_db: f64) -> Result<LinearIntensity> {
    if p_db.is_nan() {
        return Err(Error::InvalidInput("NaN power".into()));
    }
    if p_db == DISCONNECTED {
        return Ok(LinearIntensity::ZERO);
    }
    LinearIntensity::new(10f64.powf(0.1 * p_db))
}

/// Inverse of [`db_to_linear`]. Zero maps back to the sentinel.
pub fn linear_to_db(i: LinearIntensity) -> f64 {
    if i.0 == 0.0 {
        DISCONNECTED
    } else {
        10.0 * i.0.log10()
    }
}

/// Splitter sum at a single position. `powers_db` may contain sentinels, but not
/// only sentinels.
pub fn superpose_sample(powers_db: &[f64]) -> Result<f64> {
    let mut sum_sq = 0.0;
    for &p in powers_db {
        let lin = db_to_linear(p)?.value();
        sum_sq += lin * lin;
    }
    if sum_sq == 0.0 {
        return Err(Error::InvalidInput(
            "every channel is disconnected at this sample".into(),
        ));
    }
    Ok(10.0 * sum_sq.sqrt().log10())
}

/// Superposes traces sharing one grid.
pub fn superpose(traces: &[Trace]) -> Result<Trace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidInput("no traces to superpose".into()))?;
    if let Some((i, _)) = traces
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, t)| !t.same_grid(first))
    {
        return Err(Error::Grid(format!(
            "trace {i} does not share the grid of trace 0"
        )));
    }
    let mut column = Vec::with_capacity(traces.len());
    let mut out = Vec::with_capacity(first.len());
    for k in 0..first.len() {
        column.clear();
        column.extend(traces.iter().map(|t| t.samples()[k]));
        let s = superpose_sample(&column).map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!("sample {k}: {m}")),
            other => other,
        })?;
        out.push(s);
    }
    first.with_samples(out)
}

/// Splitter conservation: `|input - sum(branches)| <= tol * input`.
pub fn conservation_check(input: LinearIntensity, branches: &[LinearIntensity], tol: f64) -> bool {
    let total: f64 = branches.iter().map(|b| b.0).sum();
    (input.0 - total).abs() <= tol * input.0
}
