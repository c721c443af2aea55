//! Principal branch of the Lambert W function on `[0, inf)`.

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const REL_STEP: f64 = 1e-14;

/// `w` with `w * e^w = z`, for `z >= 0`. Halley iteration from an asymptotic
/// starting point.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if !(z >= 0.0) || z.is_infinite() {
        return Err(Error::out_of_range("lambert_w0 argument", format!("{z} must be finite and >= 0")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut w = if z < 3.0 {
        z.ln_1p() * (1.0 - z.ln_1p() / (2.0 + z.ln_1p()))
    } else {
        let l1 = z.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= REL_STEP * w.abs().max(f64::MIN_POSITIVE) {
            return Ok(w);
        }
    }
    Err(Error::NotConverged("Lambert W (Halley)"))
}

/// `W(e^a)` without forming `e^a`: the root of `w + ln w = a`.
pub fn lambert_w0_of_exp(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::out_of_range("lambert_w0_of_exp argument", format!("{a} must be finite")));
    }
    if a < 1.0 {
        return lambert_w0(a.exp());
    }
    let mut w = a - a.ln() + a.ln() / a;
    for _ in 0..MAX_ITER {
        let f = w + w.ln() - a;
        let step = f * w / (w + 1.0);
        w -= step;
        if step.abs() <= REL_STEP * w.abs() {
            return Ok(w);
        }
    }
    Err(Error::NotConverged("Lambert W (log domain)"))
}
