//! Radial eigenmodes of the diffusion operator on the shell `alpha <= x <= 1`
//! with an absorbing (Dirichlet) inner surface and a reflecting (Neumann)
//! outer surface.
//!
//! A mode is `kappa0(z) = j0(z) + c y0(z)` evaluated at `z = beta x`. The
//! Dirichlet condition fixes `c = tan(beta alpha)`, which collapses
//! `kappa0(beta x)` to `sin(beta (x - alpha)) / (beta x cos(beta alpha))`.
//! Imposing `kappa0'(beta) = 0` on that form leaves the pole-free scalar
//! equation
//!
//! ```text
//! h(beta) = sin(u beta) - beta cos(u beta) = 0,   u = 1 - alpha
//! ```
//!
//! whose positive roots are the eigenvalues `beta_n`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::special::{self, HalfOrder};

/// Default distance `alpha` must keep from 0 and 1.
pub const DEFAULT_SHELL_MARGIN: f64 = 1e-6;

/// Receiver-to-boundary radius ratio `d0 / D0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShellRatio(f64);

impl ShellRatio {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_margin(alpha, DEFAULT_SHELL_MARGIN)
    }

    /// Accepts `alpha` only inside `(margin, 1 - margin)`.
    pub fn with_margin(alpha: f64, margin: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > margin && alpha < 1.0 - margin) {
            return Err(Error::DegenerateGeometry(format!(
                "shell ratio alpha = {alpha} must lie in ({margin}, {})",
                1.0 - margin
            )));
        }
        Ok(Self(alpha))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Shell thickness `u = 1 - alpha` in units of the boundary radius.
    pub fn thickness(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for ShellRatio {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<ShellRatio> for f64 {
    fn from(a: ShellRatio) -> f64 {
        a.0
    }
}

/// One eigenmode: eigenvalue `beta`, mixing coefficient `c` and the
/// weighted norm `I = int_alpha^1 x^2 kappa0(beta x)^2 dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    #[serde(rename = "n")]
    pub index: usize,
    pub beta: f64,
    pub c: f64,
    #[serde(rename = "I")]
    pub norm: f64,
}

/// Scalar eigenvalue equation `h(beta) = sin(u beta) - beta cos(u beta)`.
pub fn characteristic(beta: f64, alpha: ShellRatio) -> f64 {
    let u = alpha.thickness();
    (u * beta).sin() - beta * (u * beta).cos()
}

/// `dh/dbeta`.
pub fn characteristic_prime(beta: f64, alpha: ShellRatio) -> f64 {
    let u = alpha.thickness();
    let (s, c) = (u * beta).sin_cos();
    -alpha.get() * c + beta * u * s
}

/// Mixing coefficient that zeroes `kappa0` at the receiver surface.
pub fn mixing_coefficient(beta: f64, alpha: ShellRatio) -> f64 {
    let z = beta * alpha.get();
    let (s, c) = z.sin_cos();
    if c.abs() > 1e-8 {
        s / c
    } else {
        -special::sph_j0(z) / special::sph_y0(z)
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive, got {x}")))
    }
}

/// `kappa0(beta x) = j0(beta x) + c y0(beta x)`.
pub fn kappa0(x: f64, mode: &EigenMode) -> Result<f64> {
    check_positive(x, "radial coordinate x")?;
    Ok(kappa0_unchecked(mode.beta * x, mode.c))
}

/// Derivative of `kappa0` with respect to its argument, at `z = beta x`.
pub fn kappa0_prime(x: f64, mode: &EigenMode) -> Result<f64> {
    check_positive(x, "radial coordinate x")?;
    Ok(kappa0_prime_unchecked(mode.beta * x, mode.c))
}

#[inline]
pub(crate) fn kappa0_unchecked(z: f64, c: f64) -> f64 {
    special::sph_j0(z) + c * special::sph_y0(z)
}

#[inline]
pub(crate) fn kappa0_prime_unchecked(z: f64, c: f64) -> f64 {
    special::sph_j0_prime(z) + c * special::sph_y0_prime(z)
}

/// `eta_m(z) = J_m(z) + c_n Y_m(z)` for `m` in `{-1/2, 1/2, 3/2}`.
pub fn eta(m: f64, z: f64, mode: &EigenMode) -> Result<f64> {
    let order = HalfOrder::from_f64(m)
        .ok_or_else(|| Error::Domain(format!("unsupported Bessel order {m}")))?;
    check_positive(z, "argument z")?;
    Ok(special::eta(order, z, mode.c))
}

fn lommel_bracket(beta: f64, c: f64, x: f64) -> f64 {
    let z = beta * x;
    let e_half = special::eta(HalfOrder::Half, z, c);
    let e_three = special::eta(HalfOrder::ThreeHalves, z, c);
    let e_minus = special::eta(HalfOrder::MinusHalf, z, c);
    0.5 * x * x * (e_half * e_half - e_three * e_minus)
}

/// Closed-form norm from the Lommel integral of the half-integer
/// combination `eta_{1/2}`.
pub fn normalization(beta: f64, c: f64, alpha: ShellRatio) -> f64 {
    PI / (2.0 * beta) * (lommel_bracket(beta, c, 1.0) - lommel_bracket(beta, c, alpha.get()))
}

/// `I_n` for a mode satisfying both boundary conditions.
pub fn norm_in(mode: &EigenMode, alpha: ShellRatio) -> f64 {
    normalization(mode.beta, mode.c, alpha)
}

/// The first `count` eigenmodes, in ascending order of `beta`.
///
/// `h` is scanned on a grid of step `u pi / 64`, each sign change is bisected
/// to `1e-13` and polished by one Newton step.
pub fn find_modes(alpha: ShellRatio, count: usize) -> Result<ModeTable> {
    find_modes_with_margin(alpha, count, DEFAULT_SHELL_MARGIN)
}

/// [`find_modes`] with an explicit degenerate-shell margin.
pub fn find_modes_with_margin(alpha: ShellRatio, count: usize, margin: f64) -> Result<ModeTable> {
    let a = alpha.get();
    if !(a > margin && a < 1.0 - margin) {
        return Err(Error::DegenerateGeometry(format!(
            "shell ratio alpha = {a} must lie in ({margin}, {})",
            1.0 - margin
        )));
    }
    if count == 0 {
        return Err(Error::Config("mode count must be at least 1".into()));
    }
    let u = alpha.thickness();
    let step = u * PI / 64.0;
    let h = |b: f64| characteristic(b, alpha);
    let dh = |b: f64| characteristic_prime(b, alpha);

    let mut modes = Vec::with_capacity(count);
    // h(beta) ~ -alpha beta near the origin; the first sample sits well
    // below the smallest possible first root.
    let mut lo = 1e-3 * step;
    let mut h_lo = h(lo);
    let mut k: u64 = 1;
    while modes.len() < count {
        let hi = k as f64 * step;
        k += 1;
        if hi <= lo {
            continue;
        }
        let h_hi = h(hi);
        if h_lo.signum() != h_hi.signum() || h_hi == 0.0 {
            let tol = 1e-13 * lo.min(1.0);
            let root = numeric::bisect(h, lo, hi, tol)?;
            let beta = numeric::newton_polish(h, dh, root, lo, hi);
            if !(beta > lo && beta <= hi && beta.is_finite()) {
                return Err(Error::ConvergenceFailure(format!(
                    "eigenvalue bracket [{lo}, {hi}] could not be refined"
                )));
            }
            let c = mixing_coefficient(beta, alpha);
            let norm = normalization(beta, c, alpha);
            modes.push(EigenMode {
                index: modes.len() + 1,
                beta,
                c,
                norm,
            });
        }
        lo = hi;
        h_lo = h_hi;
        if k > 1_000_000_000 {
            return Err(Error::ConvergenceFailure(
                "eigenvalue scan exceeded its step budget".into(),
            ));
        }
    }
    Ok(ModeTable { alpha, modes })
}

/// Immutable ordered collection of eigenmodes for one shell ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    alpha: ShellRatio,
    modes: Vec<EigenMode>,
}

impl ModeTable {
    pub fn alpha(&self) -> ShellRatio {
        self.alpha
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Mode `n`, 1-based.
    pub fn get(&self, n: usize) -> Option<&EigenMode> {
        n.checked_sub(1).and_then(|i| self.modes.get(i))
    }

    fn check_source(&self, x0: f64) -> Result<()> {
        if !(x0 > self.alpha.get() && x0 <= 1.0) {
            return Err(Error::Domain(format!(
                "source position x0 = {x0} must lie in ({}, 1]",
                self.alpha.get()
            )));
        }
        Ok(())
    }

    /// Per-mode absorbed fractions
    /// `A_n = alpha^2 kappa0(beta_n x0) kappa0'(beta_n alpha) / (I_n beta_n)`.
    pub fn absorption_weights(&self, x0: f64) -> Result<Vec<f64>> {
        self.check_source(x0)?;
        let a = self.alpha.get();
        Ok(self
            .modes
            .iter()
            .map(|m| {
                a * a * kappa0_unchecked(m.beta * x0, m.c) * kappa0_prime_unchecked(m.beta * a, m.c)
                    / (m.norm * m.beta)
            })
            .collect())
    }

    /// Plain partial sum of the first `n` absorption weights.
    pub fn completeness_partial_sum(&self, x0: f64, n: usize) -> Result<f64> {
        Ok(self.absorption_weights(x0)?.iter().take(n).sum())
    }

    /// Sum of all absorption weights with an exponential spectral filter
    /// `exp(-36 (k / N)^4)`, `k = 0..N-1`. The plain partial sum converges
    /// only like `1/N` because the constant is expanded in modes that vanish
    /// at the receiver; the filtered sum converges much faster away from it.
    pub fn completeness_filtered_sum(&self, x0: f64) -> Result<f64> {
        let weights = self.absorption_weights(x0)?;
        let n = weights.len() as f64;
        Ok(weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (-36.0 * (k as f64 / n).powi(4)).exp())
            .sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
