//! C interface to `shellcir`.
//!
//! Every function returns a [`ShellcirStatus`]; results go through out
//! pointers. On failure a message is kept per thread and can be read with
//! [`shellcir_last_error`]. Handles are created by `*_new` functions and must
//! be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shellcir::analytic_cir::{unbounded_cdf, unbounded_rate};
use shellcir::eigenmodes::find_modes;
use shellcir::monte_carlo::{simulate, HitHistogram, SimConfig};
use shellcir::{Channel, ChannelGeometry, Error, FreeSpaceChannel, ModeTable, ShellRatio, TStarMethod};

/// Status codes; the non-zero geometry/convergence/config values match the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellcirStatus {
    Ok = 0,
    NullPointer = 1,
    DegenerateGeometry = 2,
    ConvergenceFailure = 3,
    NotConverged = 4,
    ConfigError = 5,
    DomainError = 6,
    NoSolution = 7,
    IoError = 8,
    Panic = 9,
}

/// Absorption-deadline method for [`shellcir_channel_t_star`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellcirTStarMethod {
    ClosedForm = 0,
    ExactInversion = 1,
}

pub struct ShellcirModeTable(ModeTable);

pub struct ShellcirChannel(Channel);

pub struct ShellcirHistogram(HitHistogram);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ShellcirStatus {
    match e {
        Error::DegenerateGeometry(_) => ShellcirStatus::DegenerateGeometry,
        Error::ConvergenceFailure(_) => ShellcirStatus::ConvergenceFailure,
        Error::NotConverged { .. } => ShellcirStatus::NotConverged,
        Error::Config(_) => ShellcirStatus::ConfigError,
        Error::Domain(_) => ShellcirStatus::DomainError,
        Error::NoSolution(_) => ShellcirStatus::NoSolution,
        Error::Io(_) | Error::Json(_) => ShellcirStatus::IoError,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), ShellcirStatusError>>(f: F) -> ShellcirStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShellcirStatus::Ok,
        Ok(Err(ShellcirStatusError::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(ShellcirStatusError::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            ShellcirStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ShellcirStatus::Panic
        }
    }
}

enum ShellcirStatusError {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for ShellcirStatusError {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

type Res = Result<(), ShellcirStatusError>;

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, ShellcirStatusError> {
    p.as_mut().ok_or(ShellcirStatusError::Null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, ShellcirStatusError> {
    p.as_ref().ok_or(ShellcirStatusError::Null(what))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn shellcir_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shellcir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// First `count` eigenmodes of a shell with radius ratio `alpha`.
///
/// # Safety
/// `out` must be a valid pointer; the handle written there is owned by the
/// caller and must be released with [`shellcir_modes_free`].
#[no_mangle]
pub unsafe extern "C" fn shellcir_modes_new(alpha: f64, count: usize, out: *mut *mut ShellcirModeTable) -> ShellcirStatus {
    guard(|| -> Res {
        let out = out_ref(out, "out")?;
        let table = find_modes(ShellRatio::new(alpha)?, count)?;
        *out = Box::into_raw(Box::new(ShellcirModeTable(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`shellcir_modes_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shellcir_modes_free(table: *mut ShellcirModeTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of modes in the table (0 for a null handle).
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shellcir_modes_len(table: *const ShellcirModeTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Mode `n` (1-based): eigenvalue, mixing coefficient and norm.
///
/// # Safety
/// `table` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_modes_get(
    table: *const ShellcirModeTable,
    n: usize,
    beta: *mut f64,
    c: *mut f64,
    norm: *mut f64,
) -> ShellcirStatus {
    guard(|| -> Res {
        let t = in_ref(table, "table")?;
        let (beta, c, norm) = (out_ref(beta, "beta")?, out_ref(c, "c")?, out_ref(norm, "norm")?);
        let m = t
            .0
            .get(n)
            .ok_or_else(|| Error::Domain(format!("mode {n} outside 1..={}", t.0.len())))?;
        *beta = m.beta;
        *c = m.c;
        *norm = m.norm;
        Ok(())
    })
}

/// Channel with receiver radius `d0`, boundary radius `big_d0` and source
/// distance `r0` (all um) and diffusivity `diffusivity` (um^2/s).
///
/// # Safety
/// `out` must be valid; release the handle with [`shellcir_channel_free`].
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_new(
    d0: f64,
    big_d0: f64,
    r0: f64,
    diffusivity: f64,
    out: *mut *mut ShellcirChannel,
) -> ShellcirStatus {
    guard(|| -> Res {
        let out = out_ref(out, "out")?;
        let ch = Channel::new(ChannelGeometry::new(d0, big_d0, r0, diffusivity)?)?;
        *out = Box::into_raw(Box::new(ShellcirChannel(ch)));
        Ok(())
    })
}

/// # Safety
/// `channel` must come from [`shellcir_channel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_free(channel: *mut ShellcirChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

unsafe fn channel_scalar(
    channel: *const ShellcirChannel,
    out: *mut f64,
    f: impl FnOnce(&Channel) -> shellcir::Result<f64>,
) -> ShellcirStatus {
    guard(|| -> Res {
        let ch = in_ref(channel, "channel")?;
        let out = out_ref(out, "out")?;
        *out = f(&ch.0)?;
        Ok(())
    })
}

/// Smallest time, s, at which the series is evaluated.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_floor(channel: *const ShellcirChannel, out: *mut f64) -> ShellcirStatus {
    channel_scalar(channel, out, |c| Ok(c.convergence_floor_s()))
}

/// Hitting rate at `t`, 1/s.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_hitting_rate(channel: *const ShellcirChannel, t: f64, out: *mut f64) -> ShellcirStatus {
    channel_scalar(channel, out, |c| c.hitting_rate(t))
}

/// Absorbed fraction by `t`.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_cumulative(channel: *const ShellcirChannel, t: f64, out: *mut f64) -> ShellcirStatus {
    channel_scalar(channel, out, |c| c.cumulative_hits(t))
}

/// Fraction still free at `t`.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_survival(channel: *const ShellcirChannel, t: f64, out: *mut f64) -> ShellcirStatus {
    channel_scalar(channel, out, |c| c.survival(t))
}

/// Concentration at radius `r` (um) and time `t`, 1/um^3.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_pdf(channel: *const ShellcirChannel, r: f64, t: f64, out: *mut f64) -> ShellcirStatus {
    channel_scalar(channel, out, |c| c.pdf(r, t))
}

/// Time and height of the hitting-rate maximum.
///
/// # Safety
/// `channel` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_peak(
    channel: *const ShellcirChannel,
    tau_peak: *mut f64,
    n_peak: *mut f64,
) -> ShellcirStatus {
    guard(|| -> Res {
        let ch = in_ref(channel, "channel")?;
        let (tp, np) = (out_ref(tau_peak, "tau_peak")?, out_ref(n_peak, "n_peak")?);
        let p = ch.0.find_peak()?;
        *tp = p.tau_peak_s;
        *np = p.n_peak_per_s;
        Ok(())
    })
}

/// Time by which a `1 - eps` fraction has been absorbed.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_t_star(
    channel: *const ShellcirChannel,
    eps: f64,
    method: ShellcirTStarMethod,
    out: *mut f64,
) -> ShellcirStatus {
    let method = match method {
        ShellcirTStarMethod::ClosedForm => TStarMethod::ClosedForm,
        ShellcirTStarMethod::ExactInversion => TStarMethod::ExactInversion,
    };
    channel_scalar(channel, out, |c| c.t_star(eps, method))
}

/// Single-mode upper estimate of the absorption deadline.
///
/// # Safety
/// `channel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_channel_t_star_max(channel: *const ShellcirChannel, eps: f64, out: *mut f64) -> ShellcirStatus {
    channel_scalar(channel, out, |c| c.t_star_max(eps))
}

/// Free-space hitting rate at `t`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_unbounded_rate(d0: f64, r0: f64, diffusivity: f64, t: f64, out: *mut f64) -> ShellcirStatus {
    guard(|| -> Res {
        let out = out_ref(out, "out")?;
        *out = unbounded_rate(t, &FreeSpaceChannel::new(d0, r0, diffusivity)?)?;
        Ok(())
    })
}

/// Free-space absorbed fraction by `t` (`t` may be infinite).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_unbounded_cdf(d0: f64, r0: f64, diffusivity: f64, t: f64, out: *mut f64) -> ShellcirStatus {
    guard(|| -> Res {
        let out = out_ref(out, "out")?;
        *out = unbounded_cdf(t, &FreeSpaceChannel::new(d0, r0, diffusivity)?)?;
        Ok(())
    })
}

/// Particle simulation with the default reflection and step policies.
/// `dt <= 0` selects the default step; `workers == 0` uses all cores.
///
/// # Safety
/// `channel` must be a live handle and `out` valid; release the histogram
/// with [`shellcir_histogram_free`].
#[no_mangle]
pub unsafe extern "C" fn shellcir_simulate(
    channel: *const ShellcirChannel,
    particles: u64,
    t_end: f64,
    dt: f64,
    bins: usize,
    seed: u64,
    workers: usize,
    out: *mut *mut ShellcirHistogram,
) -> ShellcirStatus {
    guard(|| -> Res {
        let ch = in_ref(channel, "channel")?;
        let out = out_ref(out, "out")?;
        let geom = ch.0.geometry();
        let mut cfg = SimConfig::new(geom, particles, t_end, seed);
        if dt > 0.0 {
            cfg.dt = dt;
        }
        cfg.bins = bins;
        cfg.workers = workers;
        *out = Box::into_raw(Box::new(ShellcirHistogram(simulate(geom, &cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `hist` must come from [`shellcir_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shellcir_histogram_free(hist: *mut ShellcirHistogram) {
    if !hist.is_null() {
        drop(Box::from_raw(hist));
    }
}

/// Number of bins (0 for a null handle).
///
/// # Safety
/// `hist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shellcir_histogram_bins(hist: *const ShellcirHistogram) -> usize {
    hist.as_ref().map_or(0, |h| h.0.counts.len())
}

/// Copies bin counts into `counts` (length `len`, at least the bin count)
/// and bin edges into `edges` (length at least bins + 1). Either buffer may
/// be null to skip it.
///
/// # Safety
/// `hist` must be a live handle; non-null buffers must hold `len` and
/// `len + 1` elements respectively.
#[no_mangle]
pub unsafe extern "C" fn shellcir_histogram_copy(
    hist: *const ShellcirHistogram,
    counts: *mut u64,
    edges: *mut f64,
    len: usize,
) -> ShellcirStatus {
    guard(|| -> Res {
        let h = &in_ref(hist, "hist")?.0;
        let n = h.counts.len();
        if len < n {
            return Err(Error::Config(format!("buffer holds {len} bins, histogram has {n}")).into());
        }
        if !counts.is_null() {
            ptr::copy_nonoverlapping(h.counts.as_ptr(), counts, n);
        }
        if !edges.is_null() {
            ptr::copy_nonoverlapping(h.bin_edges.as_ptr(), edges, n + 1);
        }
        Ok(())
    })
}

/// Molecules absorbed before the end of the simulation, and molecules released.
///
/// # Safety
/// `hist` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shellcir_histogram_totals(
    hist: *const ShellcirHistogram,
    absorbed: *mut u64,
    released: *mut u64,
) -> ShellcirStatus {
    guard(|| -> Res {
        let h = &in_ref(hist, "hist")?.0;
        *out_ref(absorbed, "absorbed")? = h.absorbed_total;
        *out_ref(released, "released")? = h.released;
        Ok(())
    })
}
