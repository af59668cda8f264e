mod common;

use shellcir::monte_carlo::{compare_to_analytic, simulate, ComparisonReport, ReflectionPolicy, SimConfig, StepPolicy};
use shellcir::{Channel, ChannelGeometry, Error, TStarMethod};

fn geom(r0: f64) -> ChannelGeometry {
    ChannelGeometry::new(10.0, 100.0, r0, 80.0).unwrap()
}

#[test]
fn same_seed_same_histogram() {
    let g = geom(20.0);
    let cfg = SimConfig::new(&g, 3000, 2.0, 42);
    assert_eq!(simulate(&g, &cfg).unwrap(), simulate(&g, &cfg).unwrap());
    let other = SimConfig { seed: 43, ..cfg };
    assert_ne!(simulate(&g, &cfg).unwrap().counts, simulate(&g, &other).unwrap().counts);
}

#[test]
fn worker_count_does_not_change_result() {
    let g = geom(30.0);
    let mut cfg = SimConfig::new(&g, 4000, 3.0, 9);
    cfg.workers = 1;
    let one = simulate(&g, &cfg).unwrap();
    cfg.workers = 4;
    let four = simulate(&g, &cfg).unwrap();
    assert_eq!(one, four);
}

#[test]
fn histogram_invariants() {
    let g = geom(20.0);
    let h = simulate(&g, &SimConfig::new(&g, 2000, 1.0, 5)).unwrap();
    assert_eq!(h.counts.iter().sum::<u64>(), h.absorbed_total);
    assert!(h.absorbed_total <= h.released);
    assert!(h.bin_edges.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(h.seed, 5);
    assert!(h.max_radius_um < g.boundary_radius);
}

#[test]
fn halving_dt_stays_within_binomial_band() {
    let g = geom(20.0);
    let ch = Channel::new(g).unwrap();
    let t_peak = ch.find_peak().unwrap().tau_peak_s;
    let mut cfg = SimConfig::new(&g, 100_000, t_peak, 11);
    cfg.dt = 1e-4;
    cfg.bins = 1;
    let coarse = simulate(&g, &cfg).unwrap().absorbed_fraction();
    cfg.dt = 5e-5;
    let fine = simulate(&g, &cfg).unwrap().absorbed_fraction();
    let band = 3.0 * common::binomial_sd(1e5, coarse) / 1e5;
    assert!((coarse - fine).abs() < band, "{coarse} vs {fine}, band {band}");
}

#[test]
fn nearly_everything_absorbed_by_five_deadlines() {
    let g = geom(20.0);
    let ch = Channel::new(g).unwrap();
    let t_star = ch.t_star(0.03, TStarMethod::ExactInversion).unwrap();
    let cfg = SimConfig::new(&g, 2000, 5.0 * t_star, 3);
    let h = simulate(&g, &cfg).unwrap();
    assert!(h.absorbed_fraction() >= 0.99, "{}", h.absorbed_fraction());
}

#[test]
fn smaller_receiver_absorbs_less() {
    let mut last = f64::INFINITY;
    for &d0 in &[10.0, 1.0, 0.1] {
        let g = ChannelGeometry::new(d0, 100.0, 20.0, 80.0).unwrap();
        let h = simulate(&g, &SimConfig::new(&g, 5000, 5.0, 1)).unwrap();
        assert!(h.absorbed_fraction() < last);
        last = h.absorbed_fraction();
    }
}

#[test]
fn wrong_diffusivity_is_flagged() {
    let g = geom(20.0);
    let ch = Channel::new(g).unwrap();
    let mut cfg = SimConfig::new(&g, 20_000, 5.0, 17);
    cfg.dt = 1e-4;
    let matched = compare_to_analytic(&simulate(&g, &cfg).unwrap(), &ch).unwrap();
    let fast = ChannelGeometry::new(10.0, 100.0, 20.0, 160.0).unwrap();
    let wrong = compare_to_analytic(&simulate(&fast, &cfg).unwrap(), &ch).unwrap();
    assert!(
        wrong.ks_distance > 5.0 * matched.ks_distance,
        "{} vs {}",
        wrong.ks_distance,
        matched.ks_distance
    );
}

#[test]
fn reject_resample_agrees_and_stays_inside() {
    let g = geom(80.0);
    let ch = Channel::new(g).unwrap();
    let mut cfg = SimConfig::new(&g, 5000, 60.0, 23);
    cfg.reflection_policy = ReflectionPolicy::RejectResample;
    cfg.bins = 20;
    let h = simulate(&g, &cfg).unwrap();
    assert!(h.max_radius_um < g.boundary_radius);
    let report = compare_to_analytic(&h, &ch).unwrap();
    assert!(report.fraction_within_3sigma >= 0.9, "{report:?}");
}

#[test]
fn fixed_and_adaptive_steps_agree() {
    let g = geom(20.0);
    let mut cfg = SimConfig::new(&g, 20_000, 1.0, 4);
    cfg.dt = 1e-3;
    cfg.bins = 1;
    cfg.step_policy = StepPolicy::Fixed;
    let fixed = simulate(&g, &cfg).unwrap().absorbed_fraction();
    cfg.step_policy = StepPolicy::Adaptive;
    let adaptive = simulate(&g, &cfg).unwrap().absorbed_fraction();
    let sd = common::binomial_sd(2e4, fixed) / 2e4;
    assert!((fixed - adaptive).abs() < 4.0 * sd * 2f64.sqrt());
}

#[test]
fn analytic_against_itself_has_zero_z() {
    let cdf = [0.0, 0.1, 0.3, 0.6];
    let observed = [1000.0, 2000.0, 3000.0];
    let r = ComparisonReport::from_observed(&observed, 10_000, &cdf);
    assert!(r.z_scores.iter().all(|z| z.abs() < 1e-12));
    assert_eq!(r.fraction_within_3sigma, 1.0);
    assert!(r.ks_distance < 1e-12);
}

#[test]
fn invalid_configuration() {
    let g = geom(20.0);
    let cfg = SimConfig {
        particles: 0,
        ..SimConfig::new(&g, 1, 1.0, 1)
    };
    assert!(matches!(simulate(&g, &cfg), Err(Error::Config(_))));
    assert!(SimConfig::new(&g, 1, 1.0, 1).respects_step_rule(&g));
}
