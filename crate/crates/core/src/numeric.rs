//! Small one-dimensional solvers shared by the eigenvalue search, the peak
//! finder and the absorption-deadline inversion.

use crate::error::{Error, Result};

/// Bisects `f` on `[lo, hi]` until the bracket is narrower than `abs_tol`
/// or can no longer be split in floating point.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::ConvergenceFailure(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= abs_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "bisection did not terminate on [{lo}, {hi}]"
    )))
}

/// One Newton step from `x`, accepted only if it stays inside `[lo, hi]`
/// and does not increase `|f|`.
pub fn newton_polish<F, D>(f: F, df: D, x: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let fx = f(x);
    let slope = df(x);
    if slope == 0.0 || !slope.is_finite() {
        return x;
    }
    let next = x - fx / slope;
    if next >= lo && next <= hi && f(next).abs() <= fx.abs() {
        next
    } else {
        x
    }
}

/// Finds `t` with `f(t) = 0` for a function known to change sign somewhere in
/// `[lo, hi]`; the bracket is widened geometrically (by `grow` per side,
/// at most `max_expand` times) when it does not yet contain a sign change.
pub fn solve_bracketed<F>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    grow: f64,
    max_expand: usize,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        if expansions >= max_expand {
            return Err(Error::ConvergenceFailure(format!(
                "no sign change on [{lo}, {hi}] after {expansions} expansions"
            )));
        }
        expansions += 1;
        if f_lo.abs() < f_hi.abs() {
            lo /= grow;
            f_lo = f(lo)?;
        } else {
            hi *= grow;
            f_hi = f(hi)?;
        }
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * mid.abs() || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is narrower than `rel_tol` times its midpoint.
pub fn golden_max<F>(f: F, mut a: f64, mut b: f64, rel_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..500 {
        if (b - a).abs() <= rel_tol * (0.5 * (a + b)).abs() {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}
