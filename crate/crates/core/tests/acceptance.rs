//! Acceptance suite. Every criterion prints one `[PASS]`/`[FAIL]` line; the
//! process exits non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use shellcir::analytic_cir::{unbounded_cdf, unbounded_peak, unbounded_rate};
use shellcir::ber_link::{ber_sweep, simulate_ber, BerConfig, BerResult, BerScenario, ChannelKind, TapVector};
use shellcir::eigenmodes::find_modes;
use shellcir::monte_carlo::{compare_to_analytic, simulate, SimConfig};
use shellcir::{Channel, ChannelGeometry, FreeSpaceChannel, ModeTable, ShellRatio, TStarMethod};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn table(alpha: f64, n: usize) -> ModeTable {
    find_modes(ShellRatio::new(alpha).unwrap(), n).unwrap()
}

fn reference_channel(r0: f64) -> Channel {
    Channel::new(ChannelGeometry::new(10.0, 100.0, r0, 80.0).unwrap()).unwrap()
}

fn kappa(beta: f64, c: f64, x: f64) -> f64 {
    let z = beta * x;
    (z.sin() - c * z.cos()) / z
}

fn eigenvalue_ratio() -> Outcome {
    let start = Instant::now();
    let t = table(0.1, 2);
    let secs = start.elapsed().as_secs_f64();
    let r = (t.modes()[1].beta / t.modes()[0].beta).powi(2);
    outcome(
        (r - 69.3).abs() <= 0.5 && secs < 1.0,
        format!("(beta2/beta1)^2 = {r:.4} (target 69.3 +- 0.5), {secs:.2e} s"),
    )
}

fn characteristic_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for &alpha in &[0.05, 0.1, 0.25, 1.0 / 3.0] {
        let t = table(alpha, 10);
        let oracle = common::scan_roots(|b| common::bessel_cross_product(b, alpha), 1e-3, 1e-3, 10);
        for (m, b) in t.modes().iter().zip(&oracle) {
            worst = worst.max((m.beta - b).abs());
        }
    }
    outcome(worst < 1e-9, format!("max |beta - beta_cross| = {worst:.2e} over 4 ratios x 10 roots"))
}

fn orthogonality() -> Outcome {
    let mut worst_gram: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for &alpha in &[0.1, 0.25] {
        let t = table(alpha, 20);
        let modes = t.modes();
        for i in 0..modes.len() {
            let a = &modes[i];
            let q = common::integrate(|x| x * x * kappa(a.beta, a.c, x).powi(2), alpha, 1.0, 0.0, 1e-13);
            worst_norm = worst_norm.max((a.norm - q).abs() / q);
            for b in &modes[..i] {
                let g = common::integrate(
                    |x| x * x * kappa(a.beta, a.c, x) * kappa(b.beta, b.c, x),
                    alpha,
                    1.0,
                    1e-14,
                    1e-13,
                );
                worst_gram = worst_gram.max((g / (a.norm * b.norm).sqrt()).abs());
            }
        }
    }
    outcome(
        worst_gram < 1e-8 && worst_norm < 1e-8,
        format!("max normalised off-diagonal = {worst_gram:.2e}, max I_n relative error = {worst_norm:.2e} (n <= 20)"),
    )
}

fn mass_conservation() -> Outcome {
    let mut worst_identity: f64 = 0.0;
    let mut worst_quadrature: f64 = 0.0;
    for &r0 in &[20.0, 60.0] {
        let ch = reference_channel(r0);
        let g = *ch.geometry();
        for k in 0..=10 {
            let tau = 1e-4 * 10f64.powf(0.5 * k as f64);
            let t = tau * g.time_scale();
            let s = ch.survival(t).unwrap();
            let c = ch.cumulative_hits(t).unwrap();
            worst_identity = worst_identity.max((s + c - 1.0).abs());
            let f = |r: f64| 4.0 * PI * r * r * ch.pdf(r, t).unwrap();
            let sq = common::integrate(f, g.receiver_radius, r0, 1e-13, 1e-11)
                + common::integrate(f, r0, g.boundary_radius, 1e-13, 1e-11);
            worst_quadrature = worst_quadrature.max((sq + c - 1.0).abs());
        }
    }
    let t = table(0.1, 200);
    let filtered = t.completeness_filtered_sum(0.2).unwrap();
    let raw = t.completeness_partial_sum(0.2, 200).unwrap();
    outcome(
        worst_identity < 1e-6 && worst_quadrature < 1e-6 && (filtered - 1.0).abs() < 1e-4,
        format!(
            "max |S + N - 1| = {worst_identity:.2e}, with S from density quadrature {worst_quadrature:.2e}; \
             200-mode N(inf) = {filtered:.8} (filtered), plain partial sum {raw:.6}"
        ),
    )
}

fn monte_carlo_agreement() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for &(r0, t_end) in &[(20.0, 5.0), (80.0, 200.0)] {
        let g = ChannelGeometry::new(10.0, 100.0, r0, 80.0).unwrap();
        let mut cfg = SimConfig::new(&g, 100_000, t_end, 2024);
        cfg.dt = 1e-4;
        assert!(cfg.respects_step_rule(&g));
        let h = simulate(&g, &cfg).unwrap();
        let report = compare_to_analytic(&h, &Channel::new(g).unwrap()).unwrap();
        pass &= report.fraction_within_3sigma >= 0.95;
        parts.push(format!(
            "r0={r0}: {:.2} of bins within 3 sigma, KS {:.1e}",
            report.fraction_within_3sigma, report.ks_distance
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    outcome(pass, format!("{}; {secs:.0} s", parts.join("; ")))
}

fn deadline_consistency() -> Outcome {
    let mut worst_rel: f64 = 0.0;
    let mut violations = Vec::new();
    let modes = reference_channel(50.0).shared_modes();
    for k in 0..20 {
        let r0 = 15.0 + 80.0 * k as f64 / 19.0;
        let g = ChannelGeometry::new(10.0, 100.0, r0, 80.0).unwrap();
        let ch = Channel::with_modes(g, modes.clone(), Default::default()).unwrap();
        for &eps in &[0.05, 0.03, 0.01, 1e-3] {
            let closed = ch.t_star(eps, TStarMethod::ClosedForm).unwrap();
            let exact = ch.t_star(eps, TStarMethod::ExactInversion).unwrap();
            worst_rel = worst_rel.max((exact / closed - 1.0).abs());
        }
        let exact = ch.t_star(0.03, TStarMethod::ExactInversion).unwrap();
        let bound = ch.t_star_max(0.03).unwrap();
        if exact > bound {
            violations.push(format!("{r0:.1} (A1 = {:.3})", ch.ground_mode_weight().unwrap()));
        }
    }
    outcome(
        worst_rel < 0.01 && violations.is_empty(),
        format!(
            "max |exact/closed - 1| = {worst_rel:.2e}; t* <= t*_max violated at {} of 20 r0 values{}",
            violations.len(),
            if violations.is_empty() {
                String::new()
            } else {
                format!(": {}", violations.join(", "))
            }
        ),
    )
}

fn free_space_reference() -> Outcome {
    let mut exact_limit = true;
    for &(d0, r0) in &[(10.0, 20.0), (5.0, 10.0), (10.0, 30.0), (7.0, 90.0)] {
        let fs = FreeSpaceChannel::new(d0, r0, 80.0).unwrap();
        exact_limit &= unbounded_cdf(f64::INFINITY, &fs).unwrap() == d0 / r0;
    }
    let mut worst_peak: f64 = 0.0;
    for &r0 in &[20.0, 50.0, 90.0] {
        let (d0, d_coef) = (10.0, 80.0);
        let fs = FreeSpaceChannel::new(d0, r0, d_coef).unwrap();
        let d: f64 = r0 - d0;
        let expected_peak = d0 * d_coef * (-1.5f64).exp() / (r0 * d * d * (PI / 54.0).sqrt());
        let rate = unbounded_rate(d * d / (6.0 * d_coef), &fs).unwrap();
        worst_peak = worst_peak.max((rate / expected_peak - 1.0).abs());
        worst_peak = worst_peak.max((unbounded_peak(&fs).n_peak_per_s / expected_peak - 1.0).abs());
    }
    let mut worst_large: f64 = 0.0;
    for &r0 in &[20.0, 40.0] {
        let ch = Channel::new(ChannelGeometry::new(10.0, 50.0 * r0, r0, 80.0).unwrap()).unwrap();
        let fs = ch.geometry().free_space();
        let d2_over_d = (r0 - 10.0) * (r0 - 10.0) / 80.0;
        for k in 0..12 {
            let t = d2_over_d / 20.0 * 20f64.powf(k as f64 / 11.0);
            let b = ch.cumulative_hits(t).unwrap();
            let u = unbounded_cdf(t, &fs).unwrap();
            worst_large = worst_large.max((b / u - 1.0).abs());
        }
    }
    outcome(
        exact_limit && worst_peak < 1e-12 && worst_large < 0.01,
        format!(
            "cdf(inf) == d0/r0: {exact_limit}; peak formula relative error {worst_peak:.1e}; \
             D0 = 50 r0 vs free space on [d^2/20D, d^2/D]: {worst_large:.1e}"
        ),
    )
}

fn peak_trend() -> Outcome {
    let modes = reference_channel(50.0).shared_modes();
    let lc = 90.0;
    let mut near_worst: f64 = 0.0;
    let mut far_least = f64::INFINITY;
    for k in 1..=40 {
        let d = lc * k as f64 / 40.0 * 0.98;
        let frac = d / lc;
        if frac > 0.4 && frac < 0.8 {
            continue;
        }
        let g = ChannelGeometry::new(10.0, 100.0, 10.0 + d, 80.0).unwrap();
        let ch = Channel::with_modes(g, modes.clone(), Default::default()).unwrap();
        let b = ch.find_peak().unwrap();
        let u = unbounded_peak(&g.free_space());
        let dt = (b.tau_peak_s / u.tau_peak_s - 1.0).abs();
        let dn = (b.n_peak_per_s / u.n_peak_per_s - 1.0).abs();
        if frac <= 0.4 {
            near_worst = near_worst.max(dt.max(dn));
        } else {
            far_least = far_least.min(dt.min(dn));
        }
    }
    outcome(
        near_worst < 0.05 && far_least > 0.2,
        format!("d <= 0.4 lc: max deviation {near_worst:.1e}; d >= 0.8 lc: min deviation {far_least:.2}"),
    )
}

fn sweep(d: f64, ts: &[f64]) -> Vec<BerResult> {
    let scenario = BerScenario {
        receiver_radius: 5.0,
        transmitter_distance: 10.0,
        diffusivity: d,
        boundary_radii: vec![15.0, 20.0],
        symbol_durations: ts.to_vec(),
    };
    ber_sweep(&scenario, &BerConfig::default()).unwrap()
}

fn pick(results: &[BerResult], t_s: f64, radius: Option<f64>) -> BerResult {
    *results
        .iter()
        .find(|r| r.t_s == t_s && r.boundary_radius_um == radius)
        .unwrap()
}

/// `a` is significantly below `b` when the intervals are disjoint.
fn below(a: &BerResult, b: &BerResult) -> bool {
    a.ci_hi < b.ci_lo
}

fn ber_orderings() -> Outcome {
    let start = Instant::now();
    let ts80 = [0.05, 0.1, 0.2, 0.5, 1.0];
    let r80 = sweep(80.0, &ts80);
    // (a) free space no worse than either bounded channel
    let mut reversals_a = 0;
    let mut separations_a = 0;
    for &t in &ts80 {
        let u = pick(&r80, t, None);
        for radius in [15.0, 20.0] {
            let b = pick(&r80, t, Some(radius));
            reversals_a += below(&b, &u) as usize;
            separations_a += below(&u, &b) as usize;
        }
    }
    let a_ok = reversals_a == 0 && separations_a > 0;
    // (b) smaller boundary no better at small symbol durations
    let mut reversals_b = 0;
    let mut separations_b = 0;
    for &t in &ts80[..2] {
        let b15 = pick(&r80, t, Some(15.0));
        let b20 = pick(&r80, t, Some(20.0));
        reversals_b += below(&b15, &b20) as usize;
        separations_b += below(&b20, &b15) as usize;
    }
    let b_ok = reversals_b == 0 && separations_b > 0;
    // (c) faster diffusion: some duration where the D0 = 15 channel wins
    let ts800 = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2];
    let r800 = sweep(800.0, &ts800);
    let wins: Vec<String> = ts800
        .iter()
        .filter(|&&t| below(&pick(&r800, t, Some(15.0)), &pick(&r800, t, None)))
        .map(|t| t.to_string())
        .collect();
    let closest = ts800
        .iter()
        .map(|&t| {
            let b = pick(&r800, t, Some(15.0));
            let u = pick(&r800, t, None);
            format!("{t}: {:.1e}/{:.1e}", b.ber, u.ber)
        })
        .collect::<Vec<_>>()
        .join(", ");
    let c_ok = !wins.is_empty();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        a_ok && b_ok && c_ok && secs < 600.0,
        format!(
            "(a) {} [{separations_a} separated, {reversals_a} reversed]; (b) {} [{separations_b} separated, \
             {reversals_b} reversed]; (c) {} [bounded/free BER at D=800: {closest}]; {secs:.0} s",
            if a_ok { "holds" } else { "fails" },
            if b_ok { "holds" } else { "fails" },
            if c_ok { "holds" } else { "fails" },
        ),
    )
}

fn binomial_miss(p: f64, m: u64, theta: u64) -> f64 {
    let mut pmf = (1.0 - p).powi(m as i32);
    let mut below = 0.0;
    for k in 0..theta {
        below += pmf;
        pmf *= (m - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
    }
    0.5 * below
}

fn single_tap_oracle() -> Outcome {
    let mut worst_z: f64 = 0.0;
    for &(p, m) in &[(0.002, 1000u64), (0.003, 1000), (0.01, 200)] {
        let taps = TapVector::new(1.0, vec![p], ChannelKind::Bounded).unwrap();
        let cfg = BerConfig {
            molecules_per_bit: m,
            ..BerConfig::default()
        };
        let r = simulate_ber(&taps, &cfg).unwrap();
        let expected = binomial_miss(p, m, r.threshold_used);
        let sd = (expected * (1.0 - expected) / r.n_bits as f64).sqrt();
        worst_z = worst_z.max((r.ber - expected).abs() / sd);
    }
    outcome(worst_z < 3.0, format!("max |z| = {worst_z:.2} over 3 operating points"))
}

fn rerun_identical(dir: &Path, args: &[&str], name: &str) -> bool {
    let bin = env!("CARGO_BIN_EXE_shellcir");
    let first = dir.join(format!("{name}.csv"));
    let second = dir.join(format!("{name}_rerun.csv"));
    let ok = Command::new(bin)
        .args(args)
        .arg("--out")
        .arg(&first)
        .status()
        .unwrap()
        .success();
    let manifest = dir.join(format!("{name}.manifest.json"));
    let ok2 = Command::new(bin)
        .arg(args[0])
        .arg("--config")
        .arg(&manifest)
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap()
        .success();
    ok && ok2 && std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mc = rerun_identical(
        dir.path(),
        &["montecarlo", "--r0", "40", "--particles", "5000", "--t-end", "10", "--seed", "31"],
        "mc",
    );
    let ber = rerun_identical(
        dir.path(),
        &["ber", "--ts", "0.1,0.5", "--bits", "20000", "--seed", "8"],
        "ber",
    );
    outcome(mc && ber, format!("montecarlo rerun identical: {mc}; ber rerun identical: {ber}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("eigenvalue ratio", eigenvalue_ratio),
        ("characteristic-equation equivalence", characteristic_equivalence),
        ("orthogonality and normalisation", orthogonality),
        ("mass conservation and completeness", mass_conservation),
        ("particle simulation vs analytic", monte_carlo_agreement),
        ("absorption deadline consistency", deadline_consistency),
        ("free-space reference", free_space_reference),
        ("peak shift with distance", peak_trend),
        ("BER orderings", ber_orderings),
        ("single-tap BER oracle", single_tap_oracle),
        ("determinism from manifests", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "[{}] {name}: {} ({:.1} s)",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
