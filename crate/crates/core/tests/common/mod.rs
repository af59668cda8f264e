//! Independent reference computations used only by the test suites.
#![allow(dead_code)]

use std::f64::consts::PI;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS_K[7] * fc;
    let mut gauss = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            gauss += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature by recursive bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 50 {
            return v;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
    }
    let (rough, _) = gk15(&f, a, b);
    let tol = abs_tol.max(rel_tol * rough.abs());
    recurse(&f, a, b, tol, 0)
}

/// Gamma function at half-integers and integers >= -3/2, by recursion.
fn gamma_half_step(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        return PI.sqrt();
    }
    if (x - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    if x < 0.5 {
        // Gamma(x) = Gamma(x + 1) / x
        return gamma_half_step(x + 1.0) / x;
    }
    (x - 1.0) * gamma_half_step(x - 1.0)
}

/// `J_nu(z)` from its power series.
pub fn bessel_j_series(nu: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let half = 0.5 * z;
    let mut k_fact = 1.0;
    for k in 0..60 {
        if k > 0 {
            k_fact *= k as f64;
        }
        let term = (-1f64).powi(k) * half.powf(2.0 * k as f64 + nu) / (k_fact * gamma_half_step(k as f64 + nu + 1.0));
        sum += term;
        if term.abs() < 1e-20 * sum.abs().max(1e-300) && k > 5 {
            break;
        }
    }
    sum
}

/// `Y_nu(z) = (J_nu cos(nu pi) - J_{-nu}) / sin(nu pi)` for non-integer `nu`.
pub fn bessel_y_series(nu: f64, z: f64) -> f64 {
    (bessel_j_series(nu, z) * (nu * PI).cos() - bessel_j_series(-nu, z)) / (nu * PI).sin()
}

/// Spherical Bessel `j0` written directly as `sqrt(pi / 2z) J_{1/2}(z)`.
pub fn sph_j0_series(z: f64) -> f64 {
    (PI / (2.0 * z)).sqrt() * bessel_j_series(0.5, z)
}

/// Determinant form of the two boundary conditions:
/// `j0(beta alpha) y0'(beta) - y0(beta alpha) j0'(beta)`.
pub fn bessel_cross_product(beta: f64, alpha: f64) -> f64 {
    let za = beta * alpha;
    let j0a = za.sin() / za;
    let y0a = -za.cos() / za;
    let z = beta;
    let j0p = (z * z.cos() - z.sin()) / (z * z);
    let y0p = (z * z.sin() + z.cos()) / (z * z);
    j0a * y0p - y0a * j0p
}

/// First `count` positive roots of `f` by a uniform scan of step `step`
/// followed by plain bisection to machine precision.
pub fn scan_roots<F: Fn(f64) -> f64>(f: F, start: f64, step: f64, count: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut lo = start;
    let mut f_lo = f(lo);
    while roots.len() < count {
        let hi = lo + step;
        let f_hi = f(hi);
        if f_lo * f_hi < 0.0 {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = f(m);
                if fm * fa > 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots
}

/// Binomial standard deviation.
pub fn binomial_sd(n: f64, p: f64) -> f64 {
    (n * p * (1.0 - p)).sqrt()
}
