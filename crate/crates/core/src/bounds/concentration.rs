//! Tail bounds for sums of independent, zero-mean, bounded variables:
//! `P(sum x_i >= b)` with `|x_i| <= M` and known variances.

use super::lambert::lambert_w0_of_exp;
use crate::error::{Error, Result};

/// Bernstein: `exp(-(b^2 / 2) / (sum sigma_i^2 + M b / 3))`.
pub fn bernstein(b: f64, variances: &[f64], m_abs: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::out_of_range("b", format!("{b} must be >= 0")));
    }
    if !(m_abs > 0.0) {
        return Err(Error::out_of_range("M", format!("{m_abs} must be > 0")));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let total: f64 = variances.iter().sum();
    Ok((-(0.5 * b * b) / (total + m_abs * b / 3.0)).exp())
}

/// `h(x) = (1 + x) ln(1 + x) - x`.
pub fn bennett_h(x: f64) -> f64 {
    (1.0 + x) * x.ln_1p() - x
}

fn check_b_range(b: f64, n: usize, m_abs: f64, allow_zero: bool) -> Result<()> {
    if !(m_abs > 0.0) {
        return Err(Error::out_of_range("M", format!("{m_abs} must be > 0")));
    }
    let upper = n as f64 * m_abs;
    let lower_ok = if allow_zero { b >= 0.0 } else { b > 0.0 };
    if !(lower_ok && b < upper) {
        return Err(Error::out_of_range("b", format!("{b} must lie in {}0, {upper})", if allow_zero { "[" } else { "(" })));
    }
    Ok(())
}

/// Bennett: `exp(-(n sigma^2 / M^2) h(b M / (n sigma^2)))`, with `sigma^2` the
/// mean variance. Requires `0 <= b < n M`.
pub fn bennett(b: f64, sigma2_mean: f64, m_abs: f64, n: usize) -> Result<f64> {
    check_b_range(b, n, m_abs, true)?;
    if !(sigma2_mean > 0.0) {
        return Err(Error::out_of_range("sigma^2", format!("{sigma2_mean} must be > 0")));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let nv = n as f64 * sigma2_mean;
    Ok((-(nv / (m_abs * m_abs)) * bennett_h(b * m_abs / nv)).exp())
}

/// Optimizing exponent of the improved Bennett bound,
/// `Lambda = A - W(B e^A)` with `A = M^2/sigma^2 + nM/b - 1`, `B = nM/b - 1`.
pub fn improved_bennett_lambda(b: f64, sigma2_mean: f64, m_abs: f64, n: usize) -> Result<f64> {
    check_b_range(b, n, m_abs, false)?;
    if !(sigma2_mean > 0.0) {
        return Err(Error::out_of_range("sigma^2", format!("{sigma2_mean} must be > 0")));
    }
    let ratio = n as f64 * m_abs / b;
    let a = m_abs * m_abs / sigma2_mean + ratio - 1.0;
    let big_b = ratio - 1.0;
    // W(B e^A) = W(e^(A + ln B)); B > 0 since b < nM
    Ok(a - lambert_w0_of_exp(a + big_b.ln())?)
}

/// Improved Bennett:
/// `exp(-Lambda b / M + n ln(1 + (sigma^2 / M^2)(e^Lambda - 1 - Lambda)))`.
/// Requires `0 < b < n M`.
pub fn improved_bennett(b: f64, sigma2_mean: f64, m_abs: f64, n: usize) -> Result<f64> {
    let lambda = improved_bennett_lambda(b, sigma2_mean, m_abs, n)?;
    let s = sigma2_mean / (m_abs * m_abs);
    let exponent = -lambda * b / m_abs + n as f64 * (s * (lambda.exp_m1() - lambda)).ln_1p();
    Ok(exponent.exp())
}
