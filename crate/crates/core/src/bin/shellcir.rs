use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use shellcir::analytic_cir::{unbounded_cdf, unbounded_peak, unbounded_rate};
use shellcir::ber_link::{ber_sweep, BerConfig, BerScenario, ThresholdPolicy};
use shellcir::cli_io::{self, fmt_f64, RunManifest};
use shellcir::eigenmodes::find_modes;
use shellcir::monte_carlo::{compare_to_analytic, simulate, ReflectionPolicy, SimConfig, StepPolicy};
use shellcir::{Channel, ChannelGeometry, Error, SeriesKind, ShellRatio, TStarMethod, TimeSeries};

#[derive(Parser, Debug)]
#[command(name = "shellcir", version, about = "Impulse response of a bounded diffusion channel")]
struct Cli {
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON parameter file, or a run manifest written by a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Radial eigenvalues of a shell with inner/outer radius ratio alpha.
    Modes(ModesArgs),
    /// Hitting rate on a time grid.
    Cir(SeriesArgs),
    /// Cumulative absorbed fraction on a time grid.
    Cumulative(SeriesArgs),
    /// Peak time and height of the hitting rate.
    Peak(PeakArgs),
    /// Time by which a 1 - eps fraction has been absorbed.
    Tstar(TStarArgs),
    /// Particle simulation of absorption times.
    Montecarlo(McArgs),
    /// Bit error rate sweep, bounded against free space.
    Ber(BerArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct GeometryArgs {
    /// Receiver radius, um.
    #[arg(long = "d0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    d0: Option<f64>,
    /// Boundary radius, um.
    #[arg(long = "D0")]
    #[serde(rename = "D0", skip_serializing_if = "Option::is_none")]
    big_d0: Option<f64>,
    /// Transmitter distance from the centre, um.
    #[arg(long = "r0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    /// Diffusion coefficient, um^2/s.
    #[arg(long = "D")]
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    diffusivity: Option<f64>,
}

const DEFAULT_D0: f64 = 10.0;
const DEFAULT_BIG_D0: f64 = 100.0;
const DEFAULT_R0: f64 = 20.0;
const DEFAULT_D: f64 = 80.0;

impl GeometryArgs {
    fn resolve(&mut self) {
        self.d0.get_or_insert(DEFAULT_D0);
        self.big_d0.get_or_insert(DEFAULT_BIG_D0);
        self.r0.get_or_insert(DEFAULT_R0);
        self.diffusivity.get_or_insert(DEFAULT_D);
    }

    fn geometry(&self, r0: f64) -> shellcir::Result<ChannelGeometry> {
        ChannelGeometry::new(
            self.d0.unwrap_or(DEFAULT_D0),
            self.big_d0.unwrap_or(DEFAULT_BIG_D0),
            r0,
            self.diffusivity.unwrap_or(DEFAULT_D),
        )
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct ModesArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Spacing {
    Linear,
    Log,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct TimeGridArgs {
    /// First time point, s (default: just above the series floor).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_start: Option<f64>,
    /// Last time point, s (default: D0^2 / D).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing: Option<Spacing>,
    /// Explicit comma-separated time points, s; overrides the grid flags.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct SeriesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    #[serde(flatten)]
    grid: TimeGridArgs,
    /// Add the free-space reference as an extra column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    compare_unbounded: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct PeakArgs {
    #[command(flatten)]
    #[serde(flatten)]
    geometry: GeometryArgs,
    /// Transmitter distances start:end:step, um.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0_sweep: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    compare_unbounded: Option<bool>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TStarChoice {
    ClosedForm,
    Exact,
    Both,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct TStarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    geometry: GeometryArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0_sweep: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<TStarChoice>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct McArgs {
    #[command(flatten)]
    #[serde(flatten)]
    geometry: GeometryArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    particles: Option<u64>,
    /// Simulated horizon, s (default: D0^2 / D).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    /// Smallest time step, s (default: sqrt(2 D dt) = d0 / 10).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reflection: Option<ReflectionArg>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    step_policy: Option<StepArg>,
    /// Also write a per-bin comparison with the analytic prediction.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<bool>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ReflectionArg {
    Fold,
    Resample,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StepArg {
    Adaptive,
    Fixed,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct BerArgs {
    /// Receiver radius, um.
    #[arg(long = "d0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    d0: Option<f64>,
    /// Comma-separated boundary radii, um.
    #[arg(long = "D0", value_delimiter = ',')]
    #[serde(rename = "D0", skip_serializing_if = "Option::is_none")]
    big_d0: Option<Vec<f64>>,
    #[arg(long = "r0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[arg(long = "D")]
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    diffusivity: Option<f64>,
    /// Comma-separated symbol durations, s.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    ts: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    molecules: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    isi_length: Option<usize>,
    /// Fixed decision threshold; trained on a pilot sequence when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pilot_bits: Option<usize>,
}

/// Loaded `--config`: either bare parameters or a manifest.
struct Loaded {
    params: Value,
    seed: Option<u64>,
}

fn load_config(path: &Path) -> shellcir::Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{} is not valid JSON: {e}", path.display())))?;
    if !v.is_object() {
        return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
    }
    if let (Some(params), Some(_)) = (v.get("params"), v.get("command")) {
        let seed = v.get("seed").and_then(Value::as_u64);
        return Ok(Loaded {
            params: params.clone(),
            seed,
        });
    }
    let seed = v.get("seed").and_then(Value::as_u64);
    Ok(Loaded { params: v, seed })
}

/// Flags override config keys; anything still missing keeps its default.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Value>) -> shellcir::Result<T> {
    let mut base = match config {
        Some(Value::Object(m)) => m.clone(),
        _ => serde_json::Map::new(),
    };
    if let Value::Object(over) = serde_json::to_value(flags)? {
        for (k, v) in over {
            base.insert(k, v);
        }
    }
    base.remove("seed");
    base.remove("workers");
    serde_json::from_value(Value::Object(base)).map_err(|e| Error::Config(format!("bad parameter: {e}")))
}

fn parse_sweep(spec: &str) -> shellcir::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("sweep must be start:end:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<shellcir::Result<Vec<_>>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && end >= start && start.is_finite() && end.is_finite()) {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

struct Ctx {
    out: Option<PathBuf>,
    format: Format,
    seed: Option<u64>,
    workers: usize,
}

impl Ctx {
    fn emit(&self, text: &str) -> shellcir::Result<()> {
        match &self.out {
            Some(p) => cli_io::write_atomic(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn manifest(&self, command: &str, params: Value, seed: u64) -> shellcir::Result<()> {
        let m = RunManifest::new(command, params, Some(seed));
        let text = serde_json::to_string_pretty(&m)? + "\n";
        match &self.out {
            Some(p) => cli_io::write_atomic(&cli_io::manifest_path_for(p), &text),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}

fn json_text(v: &Value) -> shellcir::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cmd_modes(ctx: &Ctx, args: ModesArgs) -> shellcir::Result<()> {
    let alpha = args.alpha.ok_or_else(|| Error::Config("--alpha is required".into()))?;
    let count = args.count.unwrap_or(50);
    let table = find_modes(ShellRatio::new(alpha)?, count)?;
    match ctx.format {
        Format::Json => ctx.emit(&(table.to_json()? + "\n")),
        Format::Csv => {
            let mut s = String::from("n,beta,c,I\n");
            for m in table.modes() {
                s.push_str(&format!("{},{},{},{}\n", m.index, fmt_f64(m.beta), fmt_f64(m.c), fmt_f64(m.norm)));
            }
            ctx.emit(&s)
        }
    }
}

fn time_grid(grid: &TimeGridArgs, ch: &Channel) -> shellcir::Result<Vec<f64>> {
    if let Some(t) = &grid.times {
        return Ok(t.clone());
    }
    let start = grid.t_start.unwrap_or(ch.convergence_floor_s() * (1.0 + 1e-9));
    let end = grid.t_end.unwrap_or(ch.geometry().time_scale());
    let n = grid.points.unwrap_or(200);
    if n < 2 || !(end > start) || !(start > 0.0) {
        return Err(Error::Config(format!(
            "time grid needs 0 < t_start < t_end and at least 2 points, got {start}..{end} with {n}"
        )));
    }
    let spacing = grid.spacing.unwrap_or(Spacing::Linear);
    Ok((0..n)
        .map(|k| {
            let f = k as f64 / (n - 1) as f64;
            match spacing {
                Spacing::Linear => start + f * (end - start),
                Spacing::Log => start * (end / start).powf(f),
            }
        })
        .collect())
}

fn cmd_series(ctx: &Ctx, mut args: SeriesArgs, kind: SeriesKind) -> shellcir::Result<()> {
    args.geometry.resolve();
    let geom = args.geometry.geometry(args.geometry.r0.unwrap_or(DEFAULT_R0))?;
    let ch = Channel::new(geom)?;
    let times = time_grid(&args.grid, &ch)?;
    let series = ch.series(kind, &times)?;
    let compare = args.compare_unbounded.unwrap_or(false);
    let fs = geom.free_space();
    let reference = if compare {
        let f = match kind {
            SeriesKind::Rate => unbounded_rate,
            _ => unbounded_cdf,
        };
        Some(times.iter().map(|&t| f(t, &fs)).collect::<shellcir::Result<Vec<_>>>()?)
    } else {
        None
    };
    let col = match kind {
        SeriesKind::Rate => "unbounded_rate",
        _ => "unbounded_cdf",
    };
    match ctx.format {
        Format::Csv => {
            let extra: Vec<(&str, &[f64])> = reference.iter().map(|r| (col, r.as_slice())).collect();
            ctx.emit(&cli_io::time_series_csv(&series, &extra))
        }
        Format::Json => {
            let mut v = series_json(&series);
            if let Some(r) = reference {
                v[col] = json!(r);
            }
            v["geometry"] = serde_json::to_value(geom)?;
            ctx.emit(&json_text(&v)?)
        }
    }
}

fn series_json(s: &TimeSeries) -> Value {
    json!({"kind": s.kind.name(), "t_s": s.times, "value": s.values})
}

fn r0_grid(sweep: &Option<String>, geometry: &GeometryArgs) -> shellcir::Result<Vec<f64>> {
    match sweep {
        Some(s) => parse_sweep(s),
        None => Ok(vec![geometry.r0.unwrap_or(DEFAULT_R0)]),
    }
}

fn cmd_peak(ctx: &Ctx, mut args: PeakArgs) -> shellcir::Result<()> {
    args.geometry.resolve();
    let r0s = r0_grid(&args.r0_sweep, &args.geometry)?;
    let compare = args.compare_unbounded.unwrap_or(false);
    let mut rows = Vec::new();
    let mut modes = None;
    for r0 in r0s {
        let geom = args.geometry.geometry(r0)?;
        let ch = match &modes {
            Some(m) => Channel::with_modes(geom, std::sync::Arc::clone(m), Default::default())?,
            None => Channel::new(geom)?,
        };
        modes.get_or_insert_with(|| ch.shared_modes());
        let p = ch.find_peak()?;
        let free = if compare { Some(unbounded_peak(&geom.free_space())) } else { None };
        rows.push((r0, p, free));
    }
    match ctx.format {
        Format::Csv => {
            let mut s = String::from("r0_um,tau_peak_s,n_peak_per_s");
            if compare {
                s.push_str(",tau_peak_unbounded_s,n_peak_unbounded_per_s");
            }
            s.push('\n');
            for (r0, p, free) in &rows {
                s.push_str(&format!("{},{},{}", fmt_f64(*r0), fmt_f64(p.tau_peak_s), fmt_f64(p.n_peak_per_s)));
                if let Some(f) = free {
                    s.push_str(&format!(",{},{}", fmt_f64(f.tau_peak_s), fmt_f64(f.n_peak_per_s)));
                }
                s.push('\n');
            }
            ctx.emit(&s)
        }
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|(r0, p, free)| {
                    let mut o = json!({"r0_um": r0, "tau_peak_s": p.tau_peak_s, "n_peak_per_s": p.n_peak_per_s});
                    if let Some(f) = free {
                        o["tau_peak_unbounded_s"] = json!(f.tau_peak_s);
                        o["n_peak_unbounded_per_s"] = json!(f.n_peak_per_s);
                    }
                    o
                })
                .collect();
            ctx.emit(&json_text(&Value::Array(v))?)
        }
    }
}

fn cmd_tstar(ctx: &Ctx, mut args: TStarArgs) -> shellcir::Result<()> {
    args.geometry.resolve();
    let eps = args.eps.unwrap_or(0.03);
    let method = args.method.unwrap_or(TStarChoice::Both);
    let r0s = r0_grid(&args.r0_sweep, &args.geometry)?;
    let mut modes = None;
    let mut rows = Vec::new();
    for r0 in r0s {
        let geom = args.geometry.geometry(r0)?;
        let ch = match &modes {
            Some(m) => Channel::with_modes(geom, std::sync::Arc::clone(m), Default::default())?,
            None => Channel::new(geom)?,
        };
        modes.get_or_insert_with(|| ch.shared_modes());
        let closed = match method {
            TStarChoice::Exact => None,
            _ => Some(ch.t_star(eps, TStarMethod::ClosedForm)?),
        };
        let exact = match method {
            TStarChoice::ClosedForm => None,
            _ => Some(ch.t_star(eps, TStarMethod::ExactInversion)?),
        };
        rows.push((r0, closed, exact, ch.t_star_max(eps)?));
    }
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    match ctx.format {
        Format::Csv => {
            let mut s = String::from("r0_um,t_star_closed_s,t_star_exact_s,t_star_max_s\n");
            for (r0, c, e, m) in &rows {
                s.push_str(&format!("{},{},{},{}\n", fmt_f64(*r0), opt(*c), opt(*e), fmt_f64(*m)));
            }
            ctx.emit(&s)
        }
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|(r0, c, e, m)| {
                    json!({"r0_um": r0, "eps": eps, "t_star_closed_s": c, "t_star_exact_s": e, "t_star_max_s": m})
                })
                .collect();
            ctx.emit(&json_text(&Value::Array(v))?)
        }
    }
}

fn cmd_montecarlo(ctx: &Ctx, mut args: McArgs) -> shellcir::Result<()> {
    args.geometry.resolve();
    let geom = args
        .geometry
        .geometry(args.geometry.r0.unwrap_or(DEFAULT_R0))
        .map_err(|e| Error::Config(e.to_string()))?;
    let seed = ctx.seed.unwrap_or(1);
    let mut cfg = SimConfig::new(&geom, args.particles.unwrap_or(10_000), args.t_end.unwrap_or(geom.time_scale()), seed);
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(b) = args.bins {
        cfg.bins = b;
    }
    cfg.reflection_policy = match args.reflection.unwrap_or(ReflectionArg::Fold) {
        ReflectionArg::Fold => ReflectionPolicy::RadialFold,
        ReflectionArg::Resample => ReflectionPolicy::RejectResample,
    };
    cfg.step_policy = match args.step_policy.unwrap_or(StepArg::Adaptive) {
        StepArg::Adaptive => StepPolicy::Adaptive,
        StepArg::Fixed => StepPolicy::Fixed,
    };
    cfg.workers = ctx.workers;
    if !cfg.respects_step_rule(&geom) {
        eprintln!(
            "warning: dt = {} s gives a step of {:.3e} um, above d0 / 10 = {:.3e} um",
            cfg.dt,
            (2.0 * geom.diffusivity * cfg.dt).sqrt(),
            geom.receiver_radius / 10.0
        );
    }
    args.particles = Some(cfg.particles);
    args.t_end = Some(cfg.t_end);
    args.dt = Some(cfg.dt);
    args.bins = Some(cfg.bins);
    args.reflection.get_or_insert(ReflectionArg::Fold);
    args.step_policy.get_or_insert(StepArg::Adaptive);
    let hist = simulate(&geom, &cfg)?;
    match ctx.format {
        Format::Csv => ctx.emit(&cli_io::histogram_csv(&hist))?,
        Format::Json => ctx.emit(&json_text(&serde_json::to_value(&hist)?)?)?,
    }
    ctx.manifest("montecarlo", serde_json::to_value(&args)?, seed)?;
    if args.compare.unwrap_or(false) {
        let ch = Channel::new(geom)?;
        let report = compare_to_analytic(&hist, &ch)?;
        let text = json_text(&serde_json::to_value(&report)?)?;
        match &ctx.out {
            Some(p) => {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                cli_io::write_atomic(&p.with_file_name(format!("{stem}.compare.json")), &text)?;
            }
            None => eprint!("{text}"),
        }
        eprintln!(
            "bins within 3 sigma: {:.4}; max |z| = {:.3}; KS distance = {:.3e}",
            report.fraction_within_3sigma, report.max_abs_z, report.ks_distance
        );
    }
    Ok(())
}

fn cmd_ber(ctx: &Ctx, mut args: BerArgs) -> shellcir::Result<()> {
    let seed = ctx.seed.unwrap_or(1);
    let defaults = BerConfig::default();
    let cfg = BerConfig {
        molecules_per_bit: *args.molecules.get_or_insert(defaults.molecules_per_bit),
        n_bits: *args.bits.get_or_insert(defaults.n_bits),
        isi_length: args.isi_length,
        threshold_policy: match args.threshold {
            Some(t) => ThresholdPolicy::Fixed(t),
            None => ThresholdPolicy::Trained,
        },
        pilot_bits: *args.pilot_bits.get_or_insert(defaults.pilot_bits),
        seed,
    };
    let scenario = BerScenario {
        receiver_radius: *args.d0.get_or_insert(5.0),
        transmitter_distance: *args.r0.get_or_insert(10.0),
        diffusivity: *args.diffusivity.get_or_insert(80.0),
        boundary_radii: args.big_d0.get_or_insert_with(|| vec![15.0, 20.0]).clone(),
        symbol_durations: args.ts.get_or_insert_with(|| vec![0.05, 0.1, 0.2, 0.5, 1.0]).clone(),
    };
    let results = ber_sweep(&scenario, &cfg)?;
    match ctx.format {
        Format::Csv => ctx.emit(&cli_io::ber_csv(&results))?,
        Format::Json => ctx.emit(&json_text(&serde_json::to_value(&results)?)?)?,
    }
    ctx.manifest("ber", serde_json::to_value(&args)?, seed)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateGeometry(_) => 2,
        Error::ConvergenceFailure(_) | Error::NoSolution(_) => 3,
        Error::NotConverged { .. } => 4,
        Error::Config(_) | Error::Domain(_) => 5,
        Error::Io(_) | Error::Json(_) => 1,
    }
}

fn run(cli: Cli) -> shellcir::Result<()> {
    let loaded = cli.config.as_deref().map(load_config).transpose()?;
    let params = loaded.as_ref().map(|l| &l.params);
    let format = cli
        .format
        .or_else(|| params.and_then(|p| p.get("format")).and_then(|f| serde_json::from_value(f.clone()).ok()))
        .unwrap_or(match &cli.command {
            Command::Modes(_) => Format::Json,
            _ => Format::Csv,
        });
    let workers = cli.workers.unwrap_or(0);
    if workers > 0 {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let ctx = Ctx {
        out: cli.out,
        format,
        seed: cli.seed.or(loaded.as_ref().and_then(|l| l.seed)),
        workers,
    };
    match cli.command {
        Command::Modes(a) => cmd_modes(&ctx, merge(&a, params)?),
        Command::Cir(a) => cmd_series(&ctx, merge(&a, params)?, SeriesKind::Rate),
        Command::Cumulative(a) => cmd_series(&ctx, merge(&a, params)?, SeriesKind::Cumulative),
        Command::Peak(a) => cmd_peak(&ctx, merge(&a, params)?),
        Command::Tstar(a) => cmd_tstar(&ctx, merge(&a, params)?),
        Command::Montecarlo(a) => cmd_montecarlo(&ctx, merge(&a, params)?),
        Command::Ber(a) => cmd_ber(&ctx, merge(&a, params)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 5 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
