//! Analytic channel impulse response of the bounded channel, built from the
//! eigenmode expansion, plus the free-space (unbounded) reference model.
//!
//! Public quantities are in micrometres and seconds. Internally every series
//! is evaluated in the dimensionless variables `x = r / D0`,
//! `tau = D t / D0^2` and `alpha = d0 / D0`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eigenmodes::{self, kappa0_prime_unchecked, kappa0_unchecked, ModeTable, ShellRatio};
use crate::error::{Error, Result};
use crate::numeric;

static CLAMPED_NEGATIVES: AtomicU64 = AtomicU64::new(0);

/// Number of slightly negative series values clamped to zero so far
/// (process-wide).
pub fn clamped_negative_count() -> u64 {
    CLAMPED_NEGATIVES.load(Ordering::Relaxed)
}

/// Receiver radius `d0`, boundary radius `D0`, transmitter distance `r0`
/// (all in um) and diffusion coefficient `D` (um^2/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    #[serde(rename = "d0_um")]
    pub receiver_radius: f64,
    #[serde(rename = "D0_um")]
    pub boundary_radius: f64,
    #[serde(rename = "r0_um")]
    pub transmitter_distance: f64,
    #[serde(rename = "D_um2_per_s")]
    pub diffusivity: f64,
}

impl ChannelGeometry {
    pub fn new(
        receiver_radius: f64,
        boundary_radius: f64,
        transmitter_distance: f64,
        diffusivity: f64,
    ) -> Result<Self> {
        let g = Self {
            receiver_radius,
            boundary_radius,
            transmitter_distance,
            diffusivity,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.receiver_radius,
            self.boundary_radius,
            self.transmitter_distance,
            self.diffusivity,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::DegenerateGeometry("non-finite geometry parameter".into()));
        }
        if !(self.receiver_radius > 0.0
            && self.receiver_radius < self.transmitter_distance
            && self.transmitter_distance < self.boundary_radius)
        {
            return Err(Error::DegenerateGeometry(format!(
                "need 0 < d0 < r0 < D0, got d0 = {}, r0 = {}, D0 = {}",
                self.receiver_radius, self.transmitter_distance, self.boundary_radius
            )));
        }
        if self.diffusivity <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "diffusion coefficient must be positive, got {}",
                self.diffusivity
            )));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.receiver_radius / self.boundary_radius
    }

    pub fn shell_ratio(&self) -> Result<ShellRatio> {
        ShellRatio::new(self.alpha())
    }

    /// `l_c = D0 - d0`.
    pub fn channel_length(&self) -> f64 {
        self.boundary_radius - self.receiver_radius
    }

    /// Transmitter-to-receiver-surface distance `d = r0 - d0`.
    pub fn gap(&self) -> f64 {
        self.transmitter_distance - self.receiver_radius
    }

    /// Source position `x0 = r0 / D0`.
    pub fn x0(&self) -> f64 {
        self.transmitter_distance / self.boundary_radius
    }

    /// Diffusive time scale `D0^2 / D` in seconds.
    pub fn time_scale(&self) -> f64 {
        self.boundary_radius * self.boundary_radius / self.diffusivity
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.diffusivity * t / (self.boundary_radius * self.boundary_radius)
    }

    pub fn free_space(&self) -> FreeSpaceChannel {
        FreeSpaceChannel {
            receiver_radius: self.receiver_radius,
            transmitter_distance: self.transmitter_distance,
            diffusivity: self.diffusivity,
        }
    }
}

/// Series truncation and convergence-floor settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Mode `n` is kept while `beta_n^2 tau < ln(1/tail_tolerance) + ln(n + 1)`.
    pub tail_tolerance: f64,
    /// Size of the mode table built by [`Channel::new`].
    pub max_modes: usize,
    /// Smallest dimensionless time at which the series is evaluated.
    pub tau_min: f64,
    /// Negative rate/pdf values smaller than this (dimensionless) are set to 0.
    pub negative_clamp: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tail_tolerance: 1e-12,
            max_modes: 2000,
            tau_min: 1e-6,
            negative_clamp: 1e-9,
        }
    }
}

impl SeriesOptions {
    fn log_budget(&self, n: usize) -> f64 {
        (1.0 / self.tail_tolerance).ln() + ((n + 1) as f64).ln()
    }

    /// Number of leading modes the truncation rule keeps at `tau`.
    fn terms_needed(&self, tau: f64, t_s: f64, modes: &ModeTable) -> Result<usize> {
        if tau < self.tau_min {
            return Err(Error::NotConverged {
                t_s,
                tau,
                required_modes: None,
                available_modes: modes.len(),
            });
        }
        for (i, m) in modes.modes().iter().enumerate() {
            if m.beta * m.beta * tau >= self.log_budget(i + 1) {
                return Ok(i);
            }
        }
        // Table exhausted: estimate the requirement from the asymptotic
        // spacing beta_n ~ (n - 1/2) pi / u.
        let u = modes.alpha().thickness();
        let mut n = modes.len() + 1;
        loop {
            let beta = (n as f64 - 0.5) * PI / u;
            if beta * beta * tau >= self.log_budget(n) || n > 100_000_000 {
                break;
            }
            n = (n as f64 * 1.1).ceil() as usize;
        }
        Err(Error::NotConverged {
            t_s,
            tau,
            required_modes: Some(n),
            available_modes: modes.len(),
        })
    }

    /// Smallest dimensionless time this table can serve.
    pub fn floor_tau(&self, modes: &ModeTable) -> f64 {
        let last = modes.modes().last().map(|m| m.beta).unwrap_or(0.0);
        if last == 0.0 {
            return f64::INFINITY;
        }
        let from_table = self.log_budget(modes.len()) / (last * last);
        from_table.max(self.tau_min)
    }
}

fn check_table(geom: &ChannelGeometry, modes: &ModeTable) -> Result<()> {
    geom.validate()?;
    let a = geom.alpha();
    let table_alpha = modes.alpha().get();
    if (a - table_alpha).abs() > 1e-12 * a.max(table_alpha) {
        return Err(Error::Config(format!(
            "mode table built for alpha = {table_alpha}, geometry has alpha = {a}"
        )));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

fn clamp_small_negative(value: f64, scale_free: f64, t_s: f64, tau: f64, opts: &SeriesOptions, n: usize) -> Result<f64> {
    if scale_free >= 0.0 {
        return Ok(value);
    }
    if -scale_free < opts.negative_clamp {
        CLAMPED_NEGATIVES.fetch_add(1, Ordering::Relaxed);
        Ok(0.0)
    } else {
        Err(Error::NotConverged {
            t_s,
            tau,
            required_modes: None,
            available_modes: n,
        })
    }
}

fn rate_with(t: f64, geom: &ChannelGeometry, modes: &ModeTable, opts: &SeriesOptions) -> Result<f64> {
    check_time(t)?;
    let tau = geom.tau(t);
    let n = opts.terms_needed(tau, t, modes)?;
    let a = modes.alpha().get();
    let x0 = geom.x0();
    let sum: f64 = modes.modes()[..n]
        .iter()
        .map(|m| {
            m.beta * a * a / m.norm
                * kappa0_unchecked(m.beta * x0, m.c)
                * kappa0_prime_unchecked(m.beta * a, m.c)
                * (-m.beta * m.beta * tau).exp()
        })
        .sum();
    clamp_small_negative(sum / geom.time_scale(), sum, t, tau, opts, modes.len())
}

fn survival_with(t: f64, geom: &ChannelGeometry, modes: &ModeTable, opts: &SeriesOptions) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    check_time(t)?;
    let tau = geom.tau(t);
    let n = opts.terms_needed(tau, t, modes)?;
    let a = modes.alpha().get();
    let x0 = geom.x0();
    Ok(modes.modes()[..n]
        .iter()
        .map(|m| {
            a * a * kappa0_unchecked(m.beta * x0, m.c) * kappa0_prime_unchecked(m.beta * a, m.c)
                / (m.norm * m.beta)
                * (-m.beta * m.beta * tau).exp()
        })
        .sum())
}

fn pdf_with(r: f64, t: f64, geom: &ChannelGeometry, modes: &ModeTable, opts: &SeriesOptions) -> Result<f64> {
    if !(r >= geom.receiver_radius && r <= geom.boundary_radius) {
        return Err(Error::Domain(format!(
            "r = {r} um lies outside the shell [{}, {}]",
            geom.receiver_radius, geom.boundary_radius
        )));
    }
    check_time(t)?;
    let tau = geom.tau(t);
    let n = opts.terms_needed(tau, t, modes)?;
    let x0 = geom.x0();
    let x = r / geom.boundary_radius;
    let sum: f64 = modes.modes()[..n]
        .iter()
        .map(|m| {
            kappa0_unchecked(m.beta * x0, m.c) * kappa0_unchecked(m.beta * x, m.c) / m.norm
                * (-m.beta * m.beta * tau).exp()
        })
        .sum();
    let d0 = geom.boundary_radius;
    clamp_small_negative(sum / (4.0 * PI * d0 * d0 * d0), sum, t, tau, opts, modes.len())
}

/// Absorption rate at the receiver (1/s) for one molecule released at `t = 0`.
pub fn hitting_rate(t: f64, geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    check_table(geom, modes)?;
    rate_with(t, geom, modes, &SeriesOptions::default())
}

/// Fraction of molecules absorbed by time `t`.
///
/// The sum of all absorption weights equals one exactly (the constant
/// expanded in eigenmodes), so the cumulative count is evaluated as
/// `1 - survival(t)`; this keeps the absolutely convergent part of the
/// series and avoids the slowly converging constant term. The value is not
/// clamped to `[0, 1]`.
pub fn cumulative_hits(t: f64, geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    check_table(geom, modes)?;
    Ok(1.0 - survival_with(t, geom, modes, &SeriesOptions::default())?)
}

/// Fraction of molecules still diffusing at time `t`.
pub fn survival(t: f64, geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    check_table(geom, modes)?;
    survival_with(t, geom, modes, &SeriesOptions::default())
}

/// Probability density (1/um^3) of a surviving molecule at radius `r`.
pub fn pdf(r: f64, t: f64, geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    check_table(geom, modes)?;
    pdf_with(r, t, geom, modes, &SeriesOptions::default())
}

/// Peak of the hitting rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPoint {
    pub tau_peak_s: f64,
    pub n_peak_per_s: f64,
}

/// Maximizes the hitting rate: coarse log-spaced scan, then golden-section
/// refinement to a relative width of `1e-8` in time.
pub fn find_peak(geom: &ChannelGeometry, modes: &ModeTable) -> Result<PeakPoint> {
    check_table(geom, modes)?;
    find_peak_with(geom, modes, &SeriesOptions::default())
}

fn find_peak_with(geom: &ChannelGeometry, modes: &ModeTable, opts: &SeriesOptions) -> Result<PeakPoint> {
    let ts = geom.time_scale();
    let beta1 = modes.modes()[0].beta;
    let t_lo = opts.floor_tau(modes) * ts * (1.0 + 1e-9);
    let t_hi = (4.0 * ts / (beta1 * beta1)).max(t_lo * 10.0);
    const GRID: usize = 400;
    let ratio = (t_hi / t_lo).ln() / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|i| t_lo * (ratio * i as f64).exp()).collect();
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &t) in grid.iter().enumerate() {
        let v = rate_with(t, geom, modes, opts)?;
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    if best == 0 || best == GRID - 1 {
        return Err(Error::ConvergenceFailure(format!(
            "hitting rate maximum not bracketed inside [{t_lo}, {t_hi}] s"
        )));
    }
    let (t, n) = numeric::golden_max(
        |t| rate_with(t, geom, modes, opts),
        grid[best - 1],
        grid[best + 1],
        1e-8,
    )?;
    Ok(PeakPoint {
        tau_peak_s: t,
        n_peak_per_s: n,
    })
}

/// How the absorption deadline is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TStarMethod {
    /// Single dominant mode, solved in closed form.
    ClosedForm,
    /// Root of `cumulative_hits(t) = 1 - eps` on the full series.
    ExactInversion,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

fn ground_weight(geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    Ok(modes.absorption_weights(geom.x0())?[0])
}

fn closed_form_t_star(eps: f64, geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    let a1 = ground_weight(geom, modes)?;
    let arg = a1 / eps;
    if !(arg > 0.0) {
        return Err(Error::NoSolution(format!(
            "closed-form deadline has a non-positive log argument {arg}"
        )));
    }
    let beta1 = modes.modes()[0].beta;
    let t = geom.time_scale() / (beta1 * beta1) * arg.ln();
    if !(t > 0.0) {
        return Err(Error::NoSolution(format!(
            "closed-form deadline is not positive (ground-mode weight {a1} < eps {eps})"
        )));
    }
    Ok(t)
}

/// Time after which a `1 - eps` fraction of the molecules has been absorbed.
pub fn t_star(eps: f64, geom: &ChannelGeometry, modes: &ModeTable, method: TStarMethod) -> Result<f64> {
    check_table(geom, modes)?;
    check_epsilon(eps)?;
    t_star_with(eps, geom, modes, method, &SeriesOptions::default())
}

fn t_star_with(
    eps: f64,
    geom: &ChannelGeometry,
    modes: &ModeTable,
    method: TStarMethod,
    opts: &SeriesOptions,
) -> Result<f64> {
    match method {
        TStarMethod::ClosedForm => closed_form_t_star(eps, geom, modes),
        TStarMethod::ExactInversion => {
            let floor = opts.floor_tau(modes) * geom.time_scale() * (1.0 + 1e-9);
            let (lo, hi) = match closed_form_t_star(eps, geom, modes) {
                Ok(t) => ((t / 10.0).max(floor), t * 10.0),
                Err(_) => (floor, geom.time_scale()),
            };
            let target = 1.0 - eps;
            numeric::solve_bracketed(
                |t| {
                    let t = t.max(floor);
                    Ok(1.0 - survival_with(t, geom, modes, opts)? - target)
                },
                lo,
                hi,
                1e-12,
                10.0,
                12,
            )
        }
    }
}

/// Single-mode upper estimate `-(D0^2 / (beta_1^2 D)) ln eps`.
pub fn t_star_max(eps: f64, geom: &ChannelGeometry, modes: &ModeTable) -> Result<f64> {
    check_table(geom, modes)?;
    check_epsilon(eps)?;
    let beta1 = modes.modes()[0].beta;
    Ok(-geom.time_scale() / (beta1 * beta1) * eps.ln())
}

/// A geometry bundled with its mode table and series settings.
#[derive(Debug, Clone)]
pub struct Channel {
    geometry: ChannelGeometry,
    modes: Arc<ModeTable>,
    options: SeriesOptions,
}

impl Channel {
    pub fn new(geometry: ChannelGeometry) -> Result<Self> {
        Self::with_options(geometry, SeriesOptions::default())
    }

    pub fn with_options(geometry: ChannelGeometry, options: SeriesOptions) -> Result<Self> {
        geometry.validate()?;
        let modes = eigenmodes::find_modes(geometry.shell_ratio()?, options.max_modes)?;
        Ok(Self {
            geometry,
            modes: Arc::new(modes),
            options,
        })
    }

    /// Reuses an existing table (for sweeps over `r0` at fixed `alpha`).
    pub fn with_modes(geometry: ChannelGeometry, modes: Arc<ModeTable>, options: SeriesOptions) -> Result<Self> {
        check_table(&geometry, &modes)?;
        Ok(Self {
            geometry,
            modes,
            options,
        })
    }

    pub fn geometry(&self) -> &ChannelGeometry {
        &self.geometry
    }

    pub fn modes(&self) -> &ModeTable {
        &self.modes
    }

    pub fn shared_modes(&self) -> Arc<ModeTable> {
        Arc::clone(&self.modes)
    }

    pub fn options(&self) -> &SeriesOptions {
        &self.options
    }

    /// Earliest time (s) at which the series is evaluated.
    pub fn convergence_floor_s(&self) -> f64 {
        self.options.floor_tau(&self.modes) * self.geometry.time_scale()
    }

    pub fn hitting_rate(&self, t: f64) -> Result<f64> {
        rate_with(t, &self.geometry, &self.modes, &self.options)
    }

    pub fn cumulative_hits(&self, t: f64) -> Result<f64> {
        Ok(1.0 - survival_with(t, &self.geometry, &self.modes, &self.options)?)
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        survival_with(t, &self.geometry, &self.modes, &self.options)
    }

    pub fn pdf(&self, r: f64, t: f64) -> Result<f64> {
        pdf_with(r, t, &self.geometry, &self.modes, &self.options)
    }

    pub fn find_peak(&self) -> Result<PeakPoint> {
        find_peak_with(&self.geometry, &self.modes, &self.options)
    }

    pub fn t_star(&self, eps: f64, method: TStarMethod) -> Result<f64> {
        check_epsilon(eps)?;
        t_star_with(eps, &self.geometry, &self.modes, method, &self.options)
    }

    pub fn t_star_max(&self, eps: f64) -> Result<f64> {
        t_star_max(eps, &self.geometry, &self.modes)
    }

    /// Weight `A_1` of the slowest mode in the cumulative count.
    pub fn ground_mode_weight(&self) -> Result<f64> {
        ground_weight(&self.geometry, &self.modes)
    }

    /// Evaluates one quantity on a time grid.
    pub fn series(&self, kind: SeriesKind, times: &[f64]) -> Result<TimeSeries> {
        let values = times
            .iter()
            .map(|&t| match kind {
                SeriesKind::Rate => self.hitting_rate(t),
                SeriesKind::Cumulative => self.cumulative_hits(t),
                SeriesKind::Survival => self.survival(t),
            })
            .collect::<Result<Vec<_>>>()?;
        TimeSeries::new(kind, times.to_vec(), values)
    }
}

/// Which quantity a [`TimeSeries`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Rate,
    Cumulative,
    Survival,
}

impl SeriesKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rate => "rate",
            Self::Cumulative => "cumulative",
            Self::Survival => "survival",
        }
    }
}

/// Values sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub kind: SeriesKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(kind: SeriesKind, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Config("time and value lengths differ".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time grid must be strictly increasing".into()));
        }
        if kind == SeriesKind::Cumulative {
            // Allow rounding noise in a non-decreasing fraction.
            let noisy = values.windows(2).any(|w| w[1] < w[0] - 1e-9)
                || values.iter().any(|&v| !(-1e-9..=1.0 + 1e-6).contains(&v));
            if noisy {
                return Err(Error::Config(
                    "cumulative series must be non-decreasing within [0, 1]".into(),
                ));
            }
        }
        Ok(Self { kind, times, values })
    }
}

/// Clamps a fraction into `[0, 1]` for output.
pub fn clamp_fraction(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Point transmitter and absorbing sphere in free space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceChannel {
    #[serde(rename = "d0_um")]
    pub receiver_radius: f64,
    #[serde(rename = "r0_um")]
    pub transmitter_distance: f64,
    #[serde(rename = "D_um2_per_s")]
    pub diffusivity: f64,
}

impl FreeSpaceChannel {
    pub fn new(receiver_radius: f64, transmitter_distance: f64, diffusivity: f64) -> Result<Self> {
        if !(receiver_radius > 0.0 && receiver_radius < transmitter_distance && diffusivity > 0.0)
            || !transmitter_distance.is_finite()
            || !diffusivity.is_finite()
        {
            return Err(Error::DegenerateGeometry(format!(
                "need 0 < d0 < r0 and D > 0, got d0 = {receiver_radius}, r0 = {transmitter_distance}, D = {diffusivity}"
            )));
        }
        Ok(Self {
            receiver_radius,
            transmitter_distance,
            diffusivity,
        })
    }

    pub fn gap(&self) -> f64 {
        self.transmitter_distance - self.receiver_radius
    }

    /// Fraction of molecules ever absorbed, `d0 / r0`.
    pub fn capture_probability(&self) -> f64 {
        self.receiver_radius / self.transmitter_distance
    }
}

/// Free-space hitting rate
/// `(d0/r0) d (4 pi D t^3)^{-1/2} exp(-d^2 / (4 D t))`.
pub fn unbounded_rate(t: f64, ch: &FreeSpaceChannel) -> Result<f64> {
    check_time(t)?;
    let d = ch.gap();
    let dd = ch.diffusivity;
    Ok(ch.capture_probability() * d / (4.0 * PI * dd * t * t * t).sqrt() * (-d * d / (4.0 * dd * t)).exp())
}

/// Free-space cumulative absorbed fraction `(d0/r0) erfc(d / sqrt(4 D t))`;
/// `t = inf` gives `d0 / r0`.
pub fn unbounded_cdf(t: f64, ch: &FreeSpaceChannel) -> Result<f64> {
    if t == f64::INFINITY {
        return Ok(ch.capture_probability());
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    check_time(t)?;
    Ok(ch.capture_probability() * libm::erfc(ch.gap() / (4.0 * ch.diffusivity * t).sqrt()))
}

/// Free-space peak: `d^2 / (6 D)` and
/// `d0 D e^{-3/2} / (r0 d^2 sqrt(pi / 54))`.
pub fn unbounded_peak(ch: &FreeSpaceChannel) -> PeakPoint {
    let d = ch.gap();
    PeakPoint {
        tau_peak_s: d * d / (6.0 * ch.diffusivity),
        n_peak_per_s: ch.receiver_radius * ch.diffusivity * (-1.5f64).exp()
            / (ch.transmitter_distance * d * d * (PI / 54.0).sqrt()),
    }
}
