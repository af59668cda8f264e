//! Brownian-dynamics simulator of the bounded channel.
//!
//! Molecules start on the +z axis at `r0` and move by independent Gaussian
//! increments of variance `2 D dt` per axis. A molecule whose step ends inside
//! the receiver is absorbed at the step end time; a step ending outside the
//! boundary is reflected according to [`ReflectionPolicy`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic_cir::{unbounded_cdf, Channel, ChannelGeometry};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Handling of steps that end beyond the reflecting boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionPolicy {
    /// Mirror the radius, `r -> 2 D0 - r`, keeping the direction.
    #[default]
    RadialFold,
    /// Redraw the step until it stays inside (folding after 64 attempts).
    RejectResample,
}

/// Time-step schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Every step uses `dt`.
    Fixed,
    /// Steps grow with the distance to the nearest surface so that the step
    /// standard deviation stays below 1/6 of that distance (but never below
    /// D0 / 100 because of the reflecting wall alone); `dt` is the smallest
    /// step, taken next to the receiver.
    #[default]
    Adaptive,
}

/// Distance to the nearest surface, in step standard deviations, that an
/// adaptive step must respect.
const ADAPTIVE_SAFETY: f64 = 6.0;

/// Near the reflecting wall the fold is exact up to curvature terms of order
/// `sigma / D0`, so the step there need not shrink below this fraction of D0.
const WALL_STEP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub particles: u64,
    pub t_end: f64,
    pub seed: u64,
    pub reflection_policy: ReflectionPolicy,
    pub step_policy: StepPolicy,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub bins: usize,
}

impl SimConfig {
    /// Largest `dt` with `sqrt(2 D dt) <= d0 / 10`.
    pub fn default_dt(geom: &ChannelGeometry) -> f64 {
        let step = geom.receiver_radius / 10.0;
        step * step / (2.0 * geom.diffusivity)
    }

    pub fn new(geom: &ChannelGeometry, particles: u64, t_end: f64, seed: u64) -> Self {
        Self {
            dt: Self::default_dt(geom),
            particles,
            t_end,
            seed,
            reflection_policy: ReflectionPolicy::default(),
            step_policy: StepPolicy::default(),
            workers: 0,
            bins: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.particles == 0 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end = {} must be finite and at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        Ok(())
    }

    /// True when the smallest step respects `sqrt(2 D dt) <= d0 / 10`.
    pub fn respects_step_rule(&self, geom: &ChannelGeometry) -> bool {
        (2.0 * geom.diffusivity * self.dt).sqrt() <= geom.receiver_radius / 10.0 * (1.0 + 1e-12)
    }
}

/// Binned absorption times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub absorbed_total: u64,
    pub released: u64,
    pub seed: u64,
    /// Largest radius any molecule occupied after reflection handling.
    pub max_radius_um: f64,
    pub steps: u64,
}

impl HitHistogram {
    pub fn absorbed_fraction(&self) -> f64 {
        self.absorbed_total as f64 / self.released as f64
    }

    /// Absorbed fraction up to and including bin `k`'s upper edge.
    pub fn cumulative_fraction(&self) -> Vec<f64> {
        let mut acc = 0u64;
        self.counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / self.released as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Tally {
    counts: Vec<u64>,
    absorbed: u64,
    max_radius: f64,
    steps: u64,
}

impl Tally {
    fn new(bins: usize) -> Self {
        Self {
            counts: vec![0; bins],
            absorbed: 0,
            max_radius: 0.0,
            steps: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.absorbed += other.absorbed;
        self.max_radius = self.max_radius.max(other.max_radius);
        self.steps += other.steps;
        self
    }
}

struct Walker<'a> {
    geom: &'a ChannelGeometry,
    cfg: &'a SimConfig,
}

fn norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn gaussian_step(rng: &mut ChaCha8Rng, sigma: f64) -> [f64; 3] {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    [sigma * x, sigma * y, sigma * z]
}

impl Walker<'_> {
    fn step_length(&self, r: f64, t: f64) -> f64 {
        let dt = match self.cfg.step_policy {
            StepPolicy::Fixed => self.cfg.dt,
            StepPolicy::Adaptive => {
                let receiver_gap = r - self.geom.receiver_radius;
                let wall_gap = self.geom.boundary_radius - r;
                let sigma = (receiver_gap / ADAPTIVE_SAFETY)
                    .min((wall_gap / ADAPTIVE_SAFETY).max(WALL_STEP_FRACTION * self.geom.boundary_radius));
                self.cfg.dt.max(sigma * sigma / (2.0 * self.geom.diffusivity))
            }
        };
        dt.min(self.cfg.t_end - t)
    }

    /// Runs one molecule; returns its absorption time, if any.
    fn run(&self, index: u64, tally: &mut Tally) -> Option<f64> {
        let d0 = self.geom.receiver_radius;
        let big_d0 = self.geom.boundary_radius;
        let two_d = 2.0 * self.geom.diffusivity;
        let mut rng = rng::stream(self.cfg.seed, Domain::Particle, index);
        let mut pos = [0.0, 0.0, self.geom.transmitter_distance];
        let mut r = self.geom.transmitter_distance;
        let mut t = 0.0;
        loop {
            let dt = self.step_length(r, t);
            if dt <= 0.0 {
                return None;
            }
            let sigma = (two_d * dt).sqrt();
            let mut next;
            let mut attempts = 0;
            loop {
                let inc = gaussian_step(&mut rng, sigma);
                next = [pos[0] + inc[0], pos[1] + inc[1], pos[2] + inc[2]];
                attempts += 1;
                let outside = norm(&next) >= big_d0;
                if !outside || self.cfg.reflection_policy == ReflectionPolicy::RadialFold || attempts >= 64 {
                    break;
                }
            }
            let mut r_next = norm(&next);
            if r_next >= big_d0 {
                let folded = (2.0 * big_d0 - r_next).max(0.0);
                let scale = folded / r_next;
                next = [next[0] * scale, next[1] * scale, next[2] * scale];
                r_next = folded;
            }
            tally.steps += 1;
            t += dt;
            pos = next;
            r = r_next;
            tally.max_radius = tally.max_radius.max(r);
            if r <= d0 {
                return Some(t);
            }
            if t >= self.cfg.t_end {
                return None;
            }
        }
    }
}

/// Simulates `cfg.particles` independent molecules.
///
/// Molecule `i` draws from its own counter-based stream, so the histogram is
/// bit-identical for any worker count.
pub fn simulate(geom: &ChannelGeometry, cfg: &SimConfig) -> Result<HitHistogram> {
    geom.validate().map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    let width = cfg.t_end / cfg.bins as f64;
    let walker = Walker { geom, cfg };
    let bins = cfg.bins;
    let work = || {
        (0..cfg.particles)
            .into_par_iter()
            .fold(
                || Tally::new(bins),
                |mut tally, i| {
                    if let Some(t_hit) = walker.run(i, &mut tally) {
                        let k = ((t_hit / width) as usize).min(bins - 1);
                        tally.counts[k] += 1;
                        tally.absorbed += 1;
                    }
                    tally
                },
            )
            .reduce(|| Tally::new(bins), Tally::merge)
    };
    let tally = if cfg.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?
            .install(work)
    };
    let bin_edges = (0..=bins).map(|k| k as f64 * width).collect();
    Ok(HitHistogram {
        bin_edges,
        counts: tally.counts,
        absorbed_total: tally.absorbed,
        released: cfg.particles,
        seed: cfg.seed,
        max_radius_um: tally.max_radius,
        steps: tally.steps,
    })
}

/// Per-bin agreement between a histogram and the analytic prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub expected_counts: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    pub fraction_within_3sigma: f64,
    pub ks_distance: f64,
}

impl ComparisonReport {
    /// Builds the report from observed bin counts, the number released and
    /// the analytic absorbed fraction at every bin edge.
    pub fn from_observed(observed: &[f64], released: u64, cdf_at_edges: &[f64]) -> Self {
        assert_eq!(cdf_at_edges.len(), observed.len() + 1);
        let n = released as f64;
        let mut expected_counts = Vec::with_capacity(observed.len());
        let mut z_scores = Vec::with_capacity(observed.len());
        let mut ks: f64 = 0.0;
        let mut acc = 0.0;
        for (k, &obs) in observed.iter().enumerate() {
            let p = (cdf_at_edges[k + 1] - cdf_at_edges[k]).clamp(0.0, 1.0);
            let expected = n * p;
            let sd = (n * p * (1.0 - p)).sqrt();
            let z = if sd > 0.0 {
                (obs - expected) / sd
            } else if obs == expected {
                0.0
            } else {
                f64::INFINITY
            };
            expected_counts.push(expected);
            z_scores.push(z);
            acc += obs;
            ks = ks.max((acc / n - cdf_at_edges[k + 1]).abs());
        }
        let max_abs_z = z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        let within = z_scores.iter().filter(|z| z.abs() <= 3.0).count();
        Self {
            expected_counts,
            z_scores,
            max_abs_z,
            fraction_within_3sigma: within as f64 / observed.len().max(1) as f64,
            ks_distance: ks,
        }
    }
}

/// Analytic absorbed fraction at `t`; below the series' convergence floor
/// the free-space expression is used, which the bounded channel matches
/// there to exponentially small error.
pub fn analytic_cdf(channel: &Channel, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    if t < channel.convergence_floor_s() {
        return unbounded_cdf(t, &channel.geometry().free_space());
    }
    channel.cumulative_hits(t)
}

/// Compares a simulated histogram with the analytic cumulative absorption.
pub fn compare_to_analytic(hist: &HitHistogram, channel: &Channel) -> Result<ComparisonReport> {
    let cdf = hist
        .bin_edges
        .iter()
        .map(|&t| analytic_cdf(channel, t))
        .collect::<Result<Vec<_>>>()?;
    let observed: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    Ok(ComparisonReport::from_observed(&observed, hist.released, &cdf))
}
