//! Zeroth-order spherical Bessel functions and the half-integer cylinder
//! Bessel combinations they are built from, all in elementary closed form.

use std::f64::consts::PI;

/// Below this argument the derivative closed forms lose digits to
/// cancellation and a short Taylor expansion is used instead.
const SMALL_Z: f64 = 1e-2;

/// `j0(z) = sin z / z`.
pub fn sph_j0(z: f64) -> f64 {
    if z.abs() < SMALL_Z {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `y0(z) = -cos z / z`.
pub fn sph_y0(z: f64) -> f64 {
    -z.cos() / z
}

/// `j0'(z) = (z cos z - sin z) / z^2`.
pub fn sph_j0_prime(z: f64) -> f64 {
    if z.abs() < SMALL_Z {
        let z2 = z * z;
        -z / 3.0 + z * z2 / 30.0 - z * z2 * z2 / 840.0
    } else {
        (z * z.cos() - z.sin()) / (z * z)
    }
}

/// `y0'(z) = (z sin z + cos z) / z^2`.
pub fn sph_y0_prime(z: f64) -> f64 {
    (z * z.sin() + z.cos()) / (z * z)
}

/// Half-integer orders supported by [`eta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfOrder {
    MinusHalf,
    Half,
    ThreeHalves,
}

impl HalfOrder {
    /// Maps `-0.5`, `0.5` and `1.5` to their variants.
    pub fn from_f64(m: f64) -> Option<Self> {
        if m == -0.5 {
            Some(Self::MinusHalf)
        } else if m == 0.5 {
            Some(Self::Half)
        } else if m == 1.5 {
            Some(Self::ThreeHalves)
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::MinusHalf => -0.5,
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
        }
    }
}

/// `J_m(z) + c Y_m(z)` for half-integer `m`, with `z > 0`.
pub fn eta(order: HalfOrder, z: f64, c: f64) -> f64 {
    let scale = (2.0 / (PI * z)).sqrt();
    let (s, co) = z.sin_cos();
    match order {
        HalfOrder::Half => scale * (s - c * co),
        HalfOrder::MinusHalf => scale * (co + c * s),
        HalfOrder::ThreeHalves => scale * (s / z - co - c * (co / z + s)),
    }
}
