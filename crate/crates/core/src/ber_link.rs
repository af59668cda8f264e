//! On-off keyed link over the bounded and free-space channels with
//! intersymbol interference and a counting threshold receiver.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic_cir::{unbounded_cdf, Channel, ChannelGeometry, FreeSpaceChannel};
use crate::error::{Error, Result};
use crate::numeric;
use crate::rng::{self, Domain};

/// Longest ISI memory considered.
pub const MAX_ISI_LENGTH: usize = 100;
/// Fraction of the eventual tap mass the default ISI length must cover.
pub const ISI_MASS_FRACTION: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Bounded,
    Unbounded,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bounded => "bounded",
            Self::Unbounded => "unbounded",
        }
    }
}

/// Per-slot absorption probabilities `p_k = N(k t_s) - N((k-1) t_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapVector {
    pub t_s: f64,
    pub taps: Vec<f64>,
    pub channel_kind: ChannelKind,
}

impl TapVector {
    pub fn new(t_s: f64, taps: Vec<f64>, channel_kind: ChannelKind) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("tap vector is empty".into()));
        }
        if taps.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("taps must lie in [0, 1]".into()));
        }
        if taps.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::Config("taps must sum to at most one".into()));
        }
        Ok(Self {
            t_s,
            taps,
            channel_kind,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.taps.iter().sum()
    }
}

fn taps_from_cdf<F>(t_s: f64, len: usize, cdf: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(t_s > 0.0 && t_s.is_finite()) {
        return Err(Error::Config(format!("symbol duration must be positive, got {t_s}")));
    }
    if len == 0 {
        return Err(Error::Config("ISI length must be at least 1".into()));
    }
    let mut prev = 0.0;
    let mut taps = Vec::with_capacity(len);
    for k in 1..=len {
        let cur = cdf(k as f64 * t_s)?;
        // rounding noise in the difference of two nearly equal fractions
        taps.push((cur - prev).max(0.0));
        prev = cur;
    }
    Ok(taps)
}

/// Taps of the bounded channel or of its free-space reference.
pub fn channel_taps(channel: &Channel, t_s: f64, isi_length: usize, kind: ChannelKind) -> Result<TapVector> {
    let taps = match kind {
        ChannelKind::Bounded => taps_from_cdf(t_s, isi_length, |t| channel.cumulative_hits(t))?,
        ChannelKind::Unbounded => {
            let fs = channel.geometry().free_space();
            taps_from_cdf(t_s, isi_length, |t| unbounded_cdf(t, &fs))?
        }
    };
    TapVector::new(t_s, taps, kind)
}

/// Taps of the free-space channel alone.
pub fn free_space_taps(fs: &FreeSpaceChannel, t_s: f64, isi_length: usize) -> Result<TapVector> {
    let taps = taps_from_cdf(t_s, isi_length, |t| unbounded_cdf(t, fs))?;
    TapVector::new(t_s, taps, ChannelKind::Unbounded)
}

/// Shortest ISI length whose taps cover [`ISI_MASS_FRACTION`] of the
/// eventual absorbed mass (`1` bounded, `d0 / r0` free space), capped at
/// [`MAX_ISI_LENGTH`].
pub fn default_isi_length(taps: &[f64], eventual_mass: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in taps.iter().enumerate() {
        acc += p;
        if acc >= ISI_MASS_FRACTION * eventual_mass {
            return k + 1;
        }
    }
    taps.len().clamp(1, MAX_ISI_LENGTH)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Decide 1 when the slot count is at least this value.
    Fixed(u64),
    /// Sweep all integer thresholds on a pilot sequence.
    Trained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerConfig {
    pub molecules_per_bit: u64,
    pub n_bits: usize,
    /// `None` picks [`default_isi_length`].
    pub isi_length: Option<usize>,
    pub threshold_policy: ThresholdPolicy,
    pub pilot_bits: usize,
    pub seed: u64,
}

impl Default for BerConfig {
    fn default() -> Self {
        Self {
            molecules_per_bit: 1000,
            n_bits: 100_000,
            isi_length: None,
            threshold_policy: ThresholdPolicy::Trained,
            pilot_bits: 10_000,
            seed: 1,
        }
    }
}

impl BerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.molecules_per_bit == 0 {
            return Err(Error::Config("molecules per bit must be at least 1".into()));
        }
        if self.n_bits < 1000 {
            return Err(Error::Config(format!(
                "at least 1000 bits are required, got {}",
                self.n_bits
            )));
        }
        if self.isi_length == Some(0) {
            return Err(Error::Config("ISI length must be at least 1".into()));
        }
        if self.threshold_policy == ThresholdPolicy::Trained && self.pilot_bits == 0 {
            return Err(Error::Config("trained threshold needs pilot bits".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub t_s: f64,
    pub channel_kind: ChannelKind,
    /// `None` for the free-space channel.
    pub boundary_radius_um: Option<f64>,
    pub ber: f64,
    pub errors: u64,
    pub n_bits: u64,
    pub threshold_used: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// 95% Wilson score interval for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn transmit(taps: &[f64], molecules: u64, n_bits: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<bool>, Vec<u64>)> {
    let bits: Vec<bool> = (0..n_bits).map(|_| rng.random::<bool>()).collect();
    let draws = taps
        .iter()
        .map(|&p| Binomial::new(molecules, p).map_err(|e| Error::Config(format!("tap {p}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut received = vec![0u64; n_bits];
    for (j, &bit) in bits.iter().enumerate() {
        if !bit {
            continue;
        }
        for (k, dist) in draws.iter().enumerate() {
            let slot = j + k;
            if slot >= n_bits {
                break;
            }
            received[slot] += dist.sample(rng);
        }
    }
    Ok((bits, received))
}

fn count_errors(bits: &[bool], received: &[u64], threshold: u64) -> u64 {
    bits.iter()
        .zip(received)
        .filter(|(&b, &r)| (r >= threshold) != b)
        .count() as u64
}

/// Picks the integer threshold with the fewest pilot errors. Among equally
/// good thresholds, the first contiguous run is taken and its midpoint
/// (rounded down) returned.
pub fn threshold_from_pilot(bits: &[bool], received: &[u64]) -> u64 {
    let top = received.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut ones = vec![0u64; top + 1];
    let mut zeros = vec![0u64; top + 1];
    for (&b, &r) in bits.iter().zip(received) {
        if b {
            ones[r as usize] += 1;
        } else {
            zeros[r as usize] += 1;
        }
    }
    // errors(theta) = #ones with count < theta + #zeros with count >= theta
    let total_zeros: u64 = zeros.iter().sum();
    let mut ones_below = 0u64;
    let mut zeros_below = 0u64;
    let mut errors = Vec::with_capacity(top + 1);
    for theta in 0..=top {
        errors.push(ones_below + (total_zeros - zeros_below));
        ones_below += ones[theta];
        zeros_below += zeros[theta];
    }
    let best = *errors.iter().min().unwrap_or(&0);
    let first = errors.iter().position(|&e| e == best).unwrap_or(0);
    let mut last = first;
    while last + 1 < errors.len() && errors[last + 1] == best {
        last += 1;
    }
    ((first + last) / 2) as u64
}

/// Trains a threshold on the pilot stream of `point`.
pub fn train_threshold_for_point(taps: &TapVector, cfg: &BerConfig, point: u64) -> Result<u64> {
    let mut rng = rng::stream(cfg.seed, Domain::BerPilot, point);
    let (bits, received) = transmit(&taps.taps, cfg.molecules_per_bit, cfg.pilot_bits, &mut rng)?;
    Ok(threshold_from_pilot(&bits, &received))
}

/// Trains a threshold on a pilot sequence independent of the test bits.
pub fn train_threshold(taps: &TapVector, cfg: &BerConfig) -> Result<u64> {
    train_threshold_for_point(taps, cfg, 0)
}

/// BER of one operating point; `point` selects the random streams.
pub fn simulate_ber_point(taps: &TapVector, cfg: &BerConfig, point: u64, boundary_radius_um: Option<f64>) -> Result<BerResult> {
    cfg.validate()?;
    let threshold = match cfg.threshold_policy {
        ThresholdPolicy::Fixed(theta) => theta,
        ThresholdPolicy::Trained => train_threshold_for_point(taps, cfg, point)?,
    };
    let mut rng = rng::stream(cfg.seed, Domain::BerTest, point);
    let (bits, received) = transmit(&taps.taps, cfg.molecules_per_bit, cfg.n_bits, &mut rng)?;
    let errors = count_errors(&bits, &received, threshold);
    let n = cfg.n_bits as u64;
    let (ci_lo, ci_hi) = wilson_interval(errors, n);
    Ok(BerResult {
        t_s: taps.t_s,
        channel_kind: taps.channel_kind,
        boundary_radius_um,
        ber: errors as f64 / n as f64,
        errors,
        n_bits: n,
        threshold_used: threshold,
        ci_lo,
        ci_hi,
    })
}

/// BER over i.i.d. equiprobable bits.
pub fn simulate_ber(taps: &TapVector, cfg: &BerConfig) -> Result<BerResult> {
    simulate_ber_point(taps, cfg, 0, None)
}

/// Error probability of a single-tap link with threshold `theta`:
/// `P(Bin(M, p) < theta) / 2 + [theta == 0] / 2`.
pub fn single_tap_error_probability(p: f64, molecules: u64, theta: u64) -> f64 {
    let zero_error = if theta == 0 { 0.5 } else { 0.0 };
    if theta == 0 {
        return zero_error;
    }
    if p <= 0.0 {
        return 0.5;
    }
    if p >= 1.0 {
        return if theta <= molecules { 0.0 } else { 0.5 };
    }
    let m = molecules as f64;
    let log_ratio = (p / (1.0 - p)).ln();
    let mut log_pmf = m * (1.0 - p).ln();
    let mut below = 0.0;
    for k in 0..theta.min(molecules + 1) {
        below += log_pmf.exp();
        let kf = k as f64;
        log_pmf += ((m - kf) / (kf + 1.0)).ln() + log_ratio;
    }
    0.5 * below.min(1.0)
}

/// Symbol durations and boundary radii for a bounded-vs-free-space sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerScenario {
    #[serde(rename = "d0_um")]
    pub receiver_radius: f64,
    #[serde(rename = "r0_um")]
    pub transmitter_distance: f64,
    #[serde(rename = "D_um2_per_s")]
    pub diffusivity: f64,
    #[serde(rename = "D0_um")]
    pub boundary_radii: Vec<f64>,
    #[serde(rename = "t_s_s")]
    pub symbol_durations: Vec<f64>,
}

enum PointChannel<'a> {
    Free(FreeSpaceChannel),
    Bounded(&'a Channel),
}

/// Runs every symbol duration against the free-space channel and each
/// bounded channel. Results come back ordered by symbol duration, then
/// free space first, then boundary radii in the given order; point `k` in
/// that order uses random stream `k`.
pub fn ber_sweep(scenario: &BerScenario, cfg: &BerConfig) -> Result<Vec<BerResult>> {
    cfg.validate()?;
    let fs = FreeSpaceChannel::new(
        scenario.receiver_radius,
        scenario.transmitter_distance,
        scenario.diffusivity,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    let channels = scenario
        .boundary_radii
        .iter()
        .map(|&big_d0| {
            ChannelGeometry::new(
                scenario.receiver_radius,
                big_d0,
                scenario.transmitter_distance,
                scenario.diffusivity,
            )
            .and_then(Channel::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for &t_s in &scenario.symbol_durations {
        points.push((t_s, PointChannel::Free(fs)));
        for ch in &channels {
            points.push((t_s, PointChannel::Bounded(ch)));
        }
    }
    points
        .par_iter()
        .enumerate()
        .map(|(k, (t_s, ch))| {
            let (full, mass, radius) = match ch {
                PointChannel::Free(fs) => (
                    free_space_taps(fs, *t_s, MAX_ISI_LENGTH)?,
                    fs.capture_probability(),
                    None,
                ),
                PointChannel::Bounded(ch) => (
                    channel_taps(ch, *t_s, MAX_ISI_LENGTH, ChannelKind::Bounded)?,
                    1.0,
                    Some(ch.geometry().boundary_radius),
                ),
            };
            let len = cfg
                .isi_length
                .unwrap_or_else(|| default_isi_length(&full.taps, mass))
                .min(full.taps.len());
            let taps = TapVector::new(*t_s, full.taps[..len].to_vec(), full.channel_kind)?;
            simulate_ber_point(&taps, cfg, k as u64, radius)
        })
        .collect()
}

/// Outcome of matching one stated absorbed fraction and predicting another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionCheck {
    /// Symbol duration at which the first channel absorbs `matched_fraction`.
    pub t_s: f64,
    pub matched_fraction: f64,
    pub predicted_other: f64,
    pub stated_other: f64,
    /// `|predicted_other - stated_other| <= tolerance`.
    pub consistent: bool,
}

/// Finds the symbol duration at which the channel with boundary radius
/// `ratio_a * r0` absorbs `fraction_a` within one slot, then evaluates the
/// channel with boundary `ratio_b * r0` at that duration.
#[allow(clippy::too_many_arguments)]
pub fn absorbed_fraction_check(
    receiver_radius: f64,
    transmitter_distance: f64,
    diffusivity: f64,
    ratio_a: f64,
    fraction_a: f64,
    ratio_b: f64,
    stated_b: f64,
    tolerance: f64,
) -> Result<FractionCheck> {
    let make = |ratio: f64| {
        ChannelGeometry::new(receiver_radius, ratio * transmitter_distance, transmitter_distance, diffusivity)
            .and_then(Channel::new)
    };
    let ch_a = make(ratio_a)?;
    let ch_b = make(ratio_b)?;
    let floor = ch_a.convergence_floor_s() * 2.0;
    let guess = ch_a.geometry().time_scale();
    let t_s = numeric::solve_bracketed(
        |t| Ok(ch_a.cumulative_hits(t.max(floor))? - fraction_a),
        floor,
        guess,
        1e-12,
        10.0,
        10,
    )?;
    let predicted_other = ch_b.cumulative_hits(t_s)?;
    Ok(FractionCheck {
        t_s,
        matched_fraction: fraction_a,
        predicted_other,
        stated_other: stated_b,
        consistent: (predicted_other - stated_b).abs() <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: u64, policy: ThresholdPolicy) -> BerConfig {
        BerConfig {
            molecules_per_bit: m,
            n_bits: 5000,
            isi_length: None,
            threshold_policy: policy,
            pilot_bits: 2000,
            seed: 3,
        }
    }

    #[test]
    fn perfect_single_tap_has_no_errors() {
        let mut taps = vec![0.0; 5];
        taps[0] = 1.0;
        let taps = TapVector::new(1.0, taps, ChannelKind::Bounded).unwrap();
        let r = simulate_ber(&taps, &cfg(1000, ThresholdPolicy::Fixed(500))).unwrap();
        assert_eq!(r.errors, 0);
        let theta = train_threshold(&taps, &cfg(1000, ThresholdPolicy::Trained)).unwrap();
        assert!(theta > 0 && theta <= 1000);
    }

    #[test]
    fn silent_channel_is_a_coin_flip() {
        let taps = TapVector::new(1.0, vec![0.0; 3], ChannelKind::Unbounded).unwrap();
        let mut c = cfg(1000, ThresholdPolicy::Trained);
        c.n_bits = 20_000;
        let r = simulate_ber(&taps, &c).unwrap();
        assert!((r.ber - 0.5).abs() < 0.02, "ber = {}", r.ber);
    }

    #[test]
    fn noise_free_levels_give_midpoint() {
        let bits = [true, false, true, false];
        let rx = [1000, 0, 1000, 0];
        assert_eq!(threshold_from_pilot(&bits, &rx), 500);
    }

    #[test]
    fn config_validation() {
        let mut c = BerConfig::default();
        c.n_bits = 10;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = BerConfig::default();
        c.molecules_per_bit = 0;
        assert!(c.validate().is_err());
        let mut c = BerConfig::default();
        c.isi_length = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (lo, hi) = wilson_interval(50, 1000);
        assert!(lo < 0.05 && hi > 0.05);
        let (lo, hi) = wilson_interval(0, 1000);
        assert!(lo < 1e-15);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn single_tap_closed_form_edges() {
        assert_eq!(single_tap_error_probability(0.3, 10, 0), 0.5);
        assert_eq!(single_tap_error_probability(1.0, 10, 5), 0.0);
        // theta = 1: error only when a one produces zero molecules
        let p: f64 = 0.1;
        let expect = 0.5 * (1.0 - p).powi(10);
        assert!((single_tap_error_probability(p, 10, 1) - expect).abs() < 1e-15);
        // theta above M: every one is missed
        assert!((single_tap_error_probability(p, 10, 11) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tap_vector_rejects_bad_mass() {
        assert!(TapVector::new(1.0, vec![0.7, 0.6], ChannelKind::Bounded).is_err());
        assert!(TapVector::new(1.0, vec![-0.1], ChannelKind::Bounded).is_err());
        assert!(TapVector::new(1.0, vec![], ChannelKind::Bounded).is_err());
    }

    #[test]
    fn default_isi_length_rule() {
        assert_eq!(default_isi_length(&[0.5, 0.4999, 0.0001], 1.0), 2);
        assert_eq!(default_isi_length(&[0.1; 5], 1.0), 5);
    }
}
