//! Expected-runtime upper bounds for the (1+1) algorithms.
//!
//! The bounds overflow fixed-width arithmetic for modest `n`, so they are
//! returned as natural logarithms; [`mvea_runtime_bound_exact`] gives the
//! integer itself for small `n`.

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// `ln(n^n)`, the classical bound for the (1+1)-EA on any function.
pub fn ea_runtime_bound_ln(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(n as f64 * (n as f64).ln())
}

/// `ln(r^r * l^n)`: bound for the (1+1)-MVEA with `r` blocks whose sizes
/// are at most `l`.
pub fn mvea_runtime_bound_ln(n: usize, r: usize, l: usize) -> Result<f64> {
    check_bound_args(n, r, l)?;
    let (n, r, l) = (n as f64, r as f64, l as f64);
    Ok(r * r.ln() + n * l.ln())
}

/// `r^r * l^n` exactly; limited to `n <= 64`.
pub fn mvea_runtime_bound_exact(n: usize, r: usize, l: usize) -> Result<BigUint> {
    check_bound_args(n, r, l)?;
    if n > 64 {
        return Err(Error::InvalidArgument(format!("exact bound is limited to n <= 64, got {n}")));
    }
    Ok(BigUint::from(r).pow(r as u32) * BigUint::from(l).pow(n as u32))
}

/// Exponent `e` of the bound `n^e` for uniform mappings with blocks of
/// about `delta` variables:
/// `e = n * (1/delta - log_n(delta)/delta + log_n(delta + 1))`.
pub fn mvea_uniform_bound_exponent(n: usize, delta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    let nf = n as f64;
    if !(delta > 1.0 && delta <= nf) {
        return Err(Error::InvalidArgument(format!("delta must lie in (1, n], got {delta}")));
    }
    let ln_n = nf.ln();
    Ok(nf * (1.0 / delta - delta.ln() / (delta * ln_n) + (delta + 1.0).ln() / ln_n))
}

fn check_bound_args(n: usize, r: usize, l: usize) -> Result<()> {
    if r < 2 || r >= n {
        return Err(Error::InvalidArgument(format!("need 2 <= r < n, got r = {r}, n = {n}")));
    }
    if l < 2 {
        return Err(Error::InvalidArgument(format!("block size bound l must be at least 2, got {l}")));
    }
    if l > n {
        return Err(Error::InvalidArgument(format!("block size bound l = {l} exceeds n = {n}")));
    }
    Ok(())
}
