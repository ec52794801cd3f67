//! Pathwise Itô and Stratonovich integrals, quadratic covariation, and
//! window-restricted integrals on discrete paths.
//!
//! The midpoint (trapezoidal-in-integrand) rule is the definition of the
//! discrete Stratonovich integral throughout the crate, so the conversion
//! identity `stratonovich = ito + quadratic_covariation / 2` and the
//! local/intrinsic action equality hold exactly at every node.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::SamplePath;

/// Running value of a pathwise integral at each grid node.
#[derive(Clone, Debug)]
pub struct IntegralResult {
    /// Scalar path of cumulative values; starts at 0.
    pub cumulative: SamplePath,
    /// Final value, equal to the last cumulative entry.
    pub total: f64,
}

fn check_scalar_pair(z: &SamplePath, x: &SamplePath) -> Result<()> {
    if !z.same_grid(x) {
        return Err(Error::GridMismatch(
            "integrand and integrator live on different grids".into(),
        ));
    }
    if z.dim() != 1 || x.dim() != 1 {
        return Err(Error::invalid(
            "scalar integrals require one-dimensional paths",
        ));
    }
    Ok(())
}

fn accumulate<F>(z: &SamplePath, increment: F) -> Result<IntegralResult>
where
    F: Fn(usize) -> f64,
{
    let n = z.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 0..n - 1 {
        acc += increment(i);
        cumulative.push(acc);
    }
    let cumulative = SamplePath::new(Arc::clone(z.grid()), 1, cumulative)?;
    Ok(IntegralResult {
        total: acc,
        cumulative,
    })
}

/// Left-point (Itô) integral: `sum_i Z_i (X_{i+1} - X_i)`.
pub fn ito_integral(z: &SamplePath, x: &SamplePath) -> Result<IntegralResult> {
    check_scalar_pair(z, x)?;
    accumulate(z, |i| z.scalar(i) * (x.scalar(i + 1) - x.scalar(i)))
}

/// Midpoint (Stratonovich) integral:
/// `sum_i (Z_i + Z_{i+1}) / 2 * (X_{i+1} - X_i)`.
pub fn stratonovich_integral(z: &SamplePath, x: &SamplePath) -> Result<IntegralResult> {
    check_scalar_pair(z, x)?;
    accumulate(z, |i| {
        0.5 * (z.scalar(i) + z.scalar(i + 1)) * (x.scalar(i + 1) - x.scalar(i))
    })
}

/// Discrete quadratic covariation: `sum_i (Z_{i+1} - Z_i)(X_{i+1} - X_i)`.
pub fn quadratic_covariation(z: &SamplePath, x: &SamplePath) -> Result<IntegralResult> {
    check_scalar_pair(z, x)?;
    accumulate(z, |i| {
        (z.scalar(i + 1) - z.scalar(i)) * (x.scalar(i + 1) - x.scalar(i))
    })
}

/// Midpoint-rule sum restricted to increments `[i, i+1]` with both endpoints
/// inside the inclusive node interval `window`. An empty window (`None`)
/// integrates to 0.
pub fn integral_over_window(
    z: &SamplePath,
    x: &SamplePath,
    window: Option<(usize, usize)>,
) -> Result<f64> {
    check_scalar_pair(z, x)?;
    let Some((start, end)) = window else {
        return Ok(0.0);
    };
    if start > end || end >= z.len() {
        return Err(Error::invalid(format!(
            "window [{start}, {end}] does not fit a grid with {} nodes",
            z.len()
        )));
    }
    let mut acc = 0.0;
    for i in start..end {
        acc += 0.5 * (z.scalar(i) + z.scalar(i + 1)) * (x.scalar(i + 1) - x.scalar(i));
    }
    Ok(acc)
}

/// Vector pairing `< Z, o dX >` as the sum of componentwise Stratonovich
/// integrals. Both paths must share grid and dimension.
pub fn stratonovich_pairing(z: &SamplePath, x: &SamplePath) -> Result<IntegralResult> {
    if !z.same_grid(x) {
        return Err(Error::GridMismatch(
            "pairing operands live on different grids".into(),
        ));
    }
    if z.dim() != x.dim() {
        return Err(Error::invalid(format!(
            "pairing dimension mismatch: {} vs {}",
            z.dim(),
            x.dim()
        )));
    }
    let d = z.dim();
    accumulate(&z.component(0), |i| {
        let zi = z.at(i);
        let zn = z.at(i + 1);
        let xi = x.at(i);
        let xn = x.at(i + 1);
        (0..d)
            .map(|c| 0.5 * (zi[c] + zn[c]) * (xn[c] - xi[c]))
            .sum()
    })
}
