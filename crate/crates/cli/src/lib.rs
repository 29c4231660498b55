//! Command-line front end: model ingestion, subcommand dispatch and
//! deterministic output.
//!
//! Exit status is 0 on success, 1 on validation errors and 2 on numerical
//! failures; errors are reported as one JSON line on stderr.

pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use strange_segments::experiments::{run_strong_law, run_uldp, sla_plan, StrongLawConfig, UldpConfig};
use strange_segments::rate::{gaussian_closed_form, RateFunctionCtx, Transform};
use strange_segments::segments::{r_stat, t_stat, ThresholdSet};
use strange_segments::simulator::{injected_len, simulate, simulate_injected, NoiseMode, PathConfig, WorkloadPath};
use strange_segments::{Error, ModelSpec};

use manifest::RunManifest;
use output::{g17, opt_g17, opt_int, Table};

#[derive(Debug, Parser)]
#[command(name = "strange-segments", version, about = "Long latency periods in growing cloud workloads")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the rate function of the limit or of a segment position
    Rate(RateArgs),
    /// Simulate one workload path and print t, N, S (and D)
    Simulate(SimulateArgs),
    /// Longest strange segment R_t and first passage T_r on one path
    Segments(SegmentsArgs),
    /// Monte Carlo check of log T_r / r and R_t / log t against the prediction
    VerifyStrongLaw(StrongLawArgs),
    /// Monte Carlo check of segment tail exponents against the prediction
    VerifyUldp(UldpArgs),
    /// Capacity headroom for a latency target at a horizon
    Plan(PlanArgs),
    /// Re-run a recorded manifest and reproduce its outputs
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct IoArgs {
    /// Model JSON document
    #[arg(long, required = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Write output.csv, summary.json and manifest.json here instead of stdout/stderr
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NoiseArg {
    Aggregate,
    Literal,
    Off,
}

impl From<NoiseArg> for NoiseMode {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Aggregate => NoiseMode::Aggregate,
            NoiseArg::Literal => NoiseMode::Literal,
            NoiseArg::Off => NoiseMode::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Above,
    Below,
    Interval,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct SetArgs {
    /// Threshold set kind: above = (a, inf), below = (-inf, a), interval = (a, b)
    #[arg(long = "set", value_enum, default_value = "above")]
    pub kind: SetKind,
    /// Lower threshold (or the single threshold for above/below)
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    /// Upper threshold, interval sets only
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
}

impl SetArgs {
    fn resolve(&self) -> Result<ThresholdSet, Error> {
        match (self.kind, self.b) {
            (SetKind::Above, None) => Ok(ThresholdSet::Above(self.a)),
            (SetKind::Below, None) => Ok(ThresholdSet::Below(self.a)),
            (SetKind::Interval, Some(b)) => ThresholdSet::interval(self.a, b),
            (SetKind::Interval, None) => Err(Error::InvalidArgument("--set interval needs --b".into())),
            (_, Some(_)) => Err(Error::InvalidArgument("--b applies to --set interval only".into())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct RateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Points at which to evaluate the rate, comma separated
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub x: Vec<f64>,
    /// Segment position k >= 0; omit for the limit rate function
    #[arg(long)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Master seed; all randomness derives from it
    #[arg(long)]
    pub seed: u64,
    /// Path length
    #[arg(long)]
    pub t_max: usize,
    /// Noise summation mode (default: aggregate when exact, else literal)
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseArg>,
    /// Also print the per-step deviations D(t)
    #[arg(long)]
    pub record_steps: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct SegmentsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Seed for a simulated path (required unless a path is injected)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Length of the simulated path
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Per-step deviations D(1..t), comma separated, with unit population increments
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["inject_innovations", "t_max"])]
    pub inject: Option<String>,
    /// Innovation values driving the model, comma separated, dim values per time index
    #[arg(long, allow_hyphen_values = true, conflicts_with = "t_max")]
    pub inject_innovations: Option<String>,
    /// Noise summation mode for simulated or innovation-driven paths
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseArg>,
    #[command(flatten)]
    pub set: SetArgs,
    /// Minimum segment length for T_r
    #[arg(long)]
    pub r: Option<usize>,
    /// Horizon for R_t (default: the path length)
    #[arg(long)]
    pub t: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct StrongLawArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Master seed; replicate i uses a seed derived from it and i
    #[arg(long)]
    pub seed: u64,
    /// Capacity headroom per customer; the target set is (c_p, inf)
    #[arg(long, allow_negative_numbers = true)]
    pub c_p: f64,
    /// Segment lengths r for T_r, comma separated
    #[arg(long, value_delimiter = ',', default_value = "6,12,14")]
    pub r_grid: Vec<usize>,
    /// Horizons t for R_t, comma separated
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    pub t_grid: Vec<usize>,
    /// Number of independent replicates
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    /// First simulated horizon; doubled until T_r is observed
    #[arg(long, default_value_t = 1024)]
    pub initial_horizon: usize,
    /// Largest horizon; replicates still short of T_r are censored
    #[arg(long, default_value_t = 10_000_000)]
    pub horizon_cap: usize,
    /// Relative half-width of the acceptance band around the prediction
    #[arg(long, default_value_t = 0.4)]
    pub band: f64,
    /// Noise summation mode
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseArg>,
    /// Worker threads; results do not depend on it
    #[arg(long, default_value_t = 1)]
    #[serde(skip, default = "one")]
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct UldpArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Master seed; every window sample uses a seed derived from it
    #[arg(long)]
    pub seed: u64,
    /// Segment positions k (k * t must be an integer), comma separated
    #[arg(long, value_delimiter = ',', default_value = "0,1,4")]
    pub k_grid: Vec<f64>,
    /// Segment length
    #[arg(long, default_value_t = 40)]
    pub t: usize,
    #[command(flatten)]
    pub set: SetArgs,
    /// Window samples per k
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Relative half-width of the acceptance band around each prediction
    #[arg(long, default_value_t = 0.25)]
    pub band: f64,
    /// Noise summation mode
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseArg>,
    /// Worker threads; results do not depend on it
    #[arg(long, default_value_t = 1)]
    #[serde(skip, default = "one")]
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Longest tolerated latency period, in steps
    #[arg(long)]
    pub r_target: usize,
    /// Operating horizon, in steps
    #[arg(long)]
    pub horizon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Write outputs here instead of stdout/stderr
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for replicated subcommands
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Core(e) => (e.kind(), e.to_string()),
            CliError::Io { path, source } => ("io", format!("{}: {source}", path.display())),
            CliError::Usage(m) => ("usage", m.clone()),
        };
        json!({ "error": { "kind": kind, "message": message, "exit_code": self.exit_code() } })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

/// Results of one subcommand, before emission.
pub struct Outputs {
    pub table: Table,
    pub summary: Value,
    pub manifest: RunManifest,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_model(io: &IoArgs) -> Result<ModelSpec, CliError> {
    let path = io.model.as_deref().ok_or_else(|| CliError::Usage("--model is required".into()))?;
    Ok(ModelSpec::from_json(&read(path)?)?)
}

fn manifest<C: Serialize>(name: &str, cfg: &C, seed: Option<u64>, spec: &ModelSpec) -> RunManifest {
    RunManifest {
        subcommand: name.into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        master_seed: seed,
        version: env!("CARGO_PKG_VERSION").into(),
        input_digest: spec.digest(),
        model: spec.to_json(),
    }
}

fn parse_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("{flag}: {e}")))
}

fn cmd_rate(spec: &ModelSpec, a: &RateArgs) -> Result<Outputs, CliError> {
    let ctx = RateFunctionCtx::new(spec);
    let which = match a.k {
        Some(k) => Transform::Segment(k),
        None => Transform::Limit,
    };
    let mut table = Table::new(&["transform", "k", "x", "lambda_star", "argmax_lambda"]);
    let mut closed = Vec::new();
    for &x in &a.x {
        let res = ctx.legendre(which, x)?;
        table.push(vec![
            if a.k.is_some() { "segment" } else { "limit" }.into(),
            opt_g17(a.k),
            g17(x),
            g17(res.value),
            g17(res.argmax_lambda),
        ]);
        if a.k.is_none() {
            if let Ok(v) = gaussian_closed_form(spec, x) {
                closed.push(v);
            }
        }
    }
    let summary = json!({
        "transform": if a.k.is_some() { "segment" } else { "limit" },
        "k": a.k,
        "mean": ctx.mean(which)?,
        "gaussian_closed_form": if closed.is_empty() { Value::Null } else { json!(closed) },
    });
    Ok(Outputs {
        table,
        summary,
        manifest: manifest("rate", a, None, spec),
    })
}

fn path_table(path: &WorkloadPath) -> Table {
    let steps = path.steps();
    let mut table = if steps.is_some() {
        Table::new(&["t", "N", "S", "D"])
    } else {
        Table::new(&["t", "N", "S"])
    };
    for t in 0..=path.t_max() {
        let mut row = vec![t.to_string(), path.n()[t].to_string(), g17(path.s()[t])];
        if let Some(d) = steps {
            row.push(if t == 0 { String::new() } else { g17(d[t - 1]) });
        }
        table.push(row);
    }
    table
}

fn cmd_simulate(spec: &ModelSpec, a: &SimulateArgs) -> Result<Outputs, CliError> {
    let cfg = PathConfig {
        t_max: a.t_max,
        seed: a.seed,
        noise_mode: a.noise_mode.map(Into::into),
        record_steps: a.record_steps,
    };
    let path = simulate(spec, &cfg)?;
    let summary = json!({
        "t_max": path.t_max(),
        "seed": path.seed(),
        "spec_hash": path.spec_hash(),
        "final_s": path.s()[path.t_max()],
        "final_average": path.segment_average(0, path.t_max())?,
    });
    Ok(Outputs {
        table: path_table(&path),
        summary,
        manifest: manifest("simulate", a, Some(a.seed), spec),
    })
}

fn cmd_segments(spec: &ModelSpec, a: &SegmentsArgs) -> Result<Outputs, CliError> {
    let set = a.set.resolve()?;
    let path = if let Some(text) = &a.inject {
        WorkloadPath::from_unit_steps(&parse_list(text, "--inject")?)?
    } else if let Some(text) = &a.inject_innovations {
        let values = parse_list(text, "--inject-innovations")?;
        let dim = spec.innovations().dim();
        let window = injected_len(spec, 0);
        if values.len() % dim != 0 || values.len() / dim <= window {
            return Err(CliError::Usage(format!(
                "--inject-innovations needs a positive multiple of {dim} values covering more than {window} time indices"
            )));
        }
        let t_max = values.len() / dim - window;
        let mut cfg = PathConfig::new(t_max, a.seed.unwrap_or(0));
        cfg.noise_mode = Some(a.noise_mode.map_or(NoiseMode::Off, Into::into));
        if spec.noise().is_some() && cfg.noise_mode != Some(NoiseMode::Off) && a.seed.is_none() {
            return Err(CliError::Usage("--seed is required when noise is drawn".into()));
        }
        simulate_injected(spec, &cfg, &values)?
    } else {
        let (Some(seed), Some(t_max)) = (a.seed, a.t_max) else {
            return Err(CliError::Usage(
                "a simulated path needs --seed and --t-max (there is no implicit entropy)".into(),
            ));
        };
        let mut cfg = PathConfig::new(t_max, seed);
        cfg.noise_mode = a.noise_mode.map(Into::into);
        simulate(spec, &cfg)?
    };
    let t = a.t.unwrap_or(path.t_max());
    let mut table = Table::new(&["statistic", "value", "k", "l"]);
    let r = r_stat(&path, &set, t)?;
    table.push(vec![
        "R".into(),
        opt_int(r.value),
        opt_int(r.witness.map(|w| w.0)),
        opt_int(r.witness.map(|w| w.1)),
    ]);
    let mut summary = json!({ "t_max": path.t_max(), "set": set, "R": r });
    if let Some(rr) = a.r {
        let tr = t_stat(&path, &set, rr)?;
        table.push(vec![
            "T".into(),
            opt_int(tr.value),
            opt_int(tr.witness.map(|w| w.0)),
            opt_int(tr.witness.map(|w| w.1)),
        ]);
        summary["T"] = json!(tr);
    }
    Ok(Outputs {
        table,
        summary,
        manifest: manifest("segments", a, a.seed, spec),
    })
}

fn cmd_strong_law(spec: &ModelSpec, a: &StrongLawArgs) -> Result<Outputs, CliError> {
    let cfg = StrongLawConfig {
        noise_mode: a.noise_mode.map(Into::into),
        initial_horizon: a.initial_horizon,
        horizon_cap: a.horizon_cap,
        band: a.band,
        workers: a.workers,
        ..StrongLawConfig::new(a.c_p, a.r_grid.clone(), a.t_grid.clone(), a.replicates, a.seed)
    };
    let rep = run_strong_law(spec, &cfg)?;
    let mut table = Table::new(&["replicate", "seed", "horizon", "statistic", "grid_point", "value", "scaled"]);
    for r in &rep.replicates {
        for (&point, v) in cfg.r_grid.iter().zip(&r.t_r) {
            table.push(vec![
                r.index.to_string(),
                r.seed.to_string(),
                r.horizon.to_string(),
                "T".into(),
                point.to_string(),
                opt_int(*v),
                v.map_or_else(|| "inf".into(), |t| g17((t as f64).ln() / point as f64)),
            ]);
        }
        for (&point, v) in cfg.t_grid.iter().zip(&r.r_t) {
            table.push(vec![
                r.index.to_string(),
                r.seed.to_string(),
                r.horizon.to_string(),
                "R".into(),
                point.to_string(),
                v.to_string(),
                g17(*v as f64 / (point as f64).ln()),
            ]);
        }
    }
    let censored: usize = rep.replicates.iter().filter(|r| r.t_r.iter().any(Option::is_none)).count();
    let summary = json!({
        "c_p": rep.c_p,
        "predicted_rate": rep.predicted_rate,
        "predicted_reciprocal": rep.predicted_reciprocal,
        "log_t_r_over_r": rep.t_summary,
        "r_t_over_log_t": rep.r_summary,
        "censored_replicates": censored,
        "duality_violations": rep.duality_violations,
        "band": { "relative_half_width": a.band, "note": "band widths are engineering choices" },
        "checks": rep.checks,
    });
    Ok(Outputs {
        table,
        summary,
        manifest: manifest("verify-strong-law", a, Some(a.seed), spec),
    })
}

fn cmd_uldp(spec: &ModelSpec, a: &UldpArgs) -> Result<Outputs, CliError> {
    let cfg = UldpConfig {
        k_grid: a.k_grid.clone(),
        t: a.t,
        set: a.set.resolve()?,
        samples: a.samples,
        master_seed: a.seed,
        noise_mode: a.noise_mode.map(Into::into),
        band: a.band,
        workers: a.workers,
    };
    let rep = run_uldp(spec, &cfg)?;
    let mut table = Table::new(&[
        "k",
        "t",
        "samples",
        "successes",
        "p_hat",
        "std_error",
        "empirical_exponent",
        "exponent_lower_bound",
        "predicted_exponent",
    ]);
    for r in &rep.rows {
        table.push(vec![
            g17(r.k),
            r.t.to_string(),
            r.samples.to_string(),
            r.successes.to_string(),
            g17(r.p_hat),
            g17(r.std_error),
            opt_g17(r.empirical_exponent),
            opt_g17(r.exponent_lower_bound),
            g17(r.predicted_exponent),
        ]);
    }
    let summary = json!({
        "set": rep.set,
        "rows": rep.rows,
        "band": { "relative_half_width": a.band, "note": "band widths are engineering choices" },
        "checks": rep.checks,
    });
    Ok(Outputs {
        table,
        summary,
        manifest: manifest("verify-uldp", a, Some(a.seed), spec),
    })
}

fn cmd_plan(spec: &ModelSpec, a: &PlanArgs) -> Result<Outputs, CliError> {
    let plan = sla_plan(spec, a.r_target, a.horizon)?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }
    let mut table = Table::new(&[
        "r_target",
        "horizon",
        "target_rate",
        "c_p",
        "mean_workload",
        "relative_headroom",
        "predicted_r_at_horizon",
    ]);
    table.push(vec![
        plan.r_target.to_string(),
        g17(plan.horizon),
        g17(plan.target_rate),
        g17(plan.c_p),
        g17(plan.mean_workload),
        opt_g17(plan.relative_headroom),
        g17(plan.predicted_r_at_horizon),
    ]);
    Ok(Outputs {
        table,
        summary: serde_json::to_value(&plan).expect("plan serializes"),
        manifest: manifest("plan", a, None, spec),
    })
}

fn dispatch_config(name: &str, config: Value, spec: &ModelSpec, workers: usize) -> Result<Outputs, CliError> {
    fn cfg<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, CliError> {
        serde_json::from_value(v).map_err(|e| CliError::Usage(format!("manifest config: {e}")))
    }
    match name {
        "rate" => cmd_rate(spec, &cfg(config)?),
        "simulate" => cmd_simulate(spec, &cfg(config)?),
        "segments" => cmd_segments(spec, &cfg(config)?),
        "verify-strong-law" => cmd_strong_law(spec, &StrongLawArgs { workers, ..cfg(config)? }),
        "verify-uldp" => cmd_uldp(spec, &UldpArgs { workers, ..cfg(config)? }),
        "plan" => cmd_plan(spec, &cfg(config)?),
        other => Err(CliError::Usage(format!("manifest names unknown subcommand {other:?}"))),
    }
}

fn replay(a: &ReplayArgs) -> Result<Outputs, CliError> {
    let m: RunManifest =
        serde_json::from_str(&read(&a.manifest)?).map_err(|e| CliError::Usage(format!("manifest: {e}")))?;
    let spec = ModelSpec::from_json(&m.model.to_string())?;
    if spec.digest() != m.input_digest {
        return Err(CliError::Usage(format!(
            "manifest model digest {} does not match its inline model ({})",
            m.input_digest,
            spec.digest()
        )));
    }
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest written by version {}, replaying with {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    dispatch_config(&m.subcommand, m.config, &spec, a.workers)
}

fn execute(cmd: &Command) -> Result<(Outputs, Option<&Path>), CliError> {
    fn out(io: &IoArgs) -> Option<&Path> {
        io.out_dir.as_deref()
    }
    Ok(match cmd {
        Command::Rate(a) => (cmd_rate(&load_model(&a.io)?, a)?, out(&a.io)),
        Command::Simulate(a) => (cmd_simulate(&load_model(&a.io)?, a)?, out(&a.io)),
        Command::Segments(a) => (cmd_segments(&load_model(&a.io)?, a)?, out(&a.io)),
        Command::VerifyStrongLaw(a) => (cmd_strong_law(&load_model(&a.io)?, a)?, out(&a.io)),
        Command::VerifyUldp(a) => (cmd_uldp(&load_model(&a.io)?, a)?, out(&a.io)),
        Command::Plan(a) => (cmd_plan(&load_model(&a.io)?, a)?, out(&a.io)),
        Command::Replay(a) => (replay(a)?, a.out_dir.as_deref()),
    })
}

fn emit(outputs: &Outputs, dir: Option<&Path>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let mut summary = serde_json::to_string_pretty(&outputs.summary).expect("summary serializes");
    summary.push('\n');
    match dir {
        Some(dir) => {
            let write = |name: &str, body: &str| {
                let path = dir.join(name);
                std::fs::write(&path, body).map_err(|source| CliError::Io { path, source })
            };
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_owned(),
                source,
            })?;
            write("output.csv", &outputs.table.to_csv())?;
            write("summary.json", &summary)?;
            write("manifest.json", &outputs.manifest.to_pretty())?;
        }
        None => {
            let io = |source| CliError::Io {
                path: PathBuf::from("-"),
                source,
            };
            outputs.table.write_to(stdout).map_err(io)?;
            let trailer = json!({ "summary": outputs.summary, "manifest": outputs.manifest });
            writeln!(stderr, "{trailer}").map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim_end().to_owned());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = execute(&cli.command).and_then(|(outputs, dir)| emit(&outputs, dir, stdout, stderr));
    match result {
        Ok(()) => 0,
        Err(err) => {
            log::debug!("{err:?}");
            let _ = writeln!(stderr, "{}", err.to_json());
            err.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn every_flag_is_documented() {
        let cmd = Cli::command();
        cmd.clone().debug_assert();
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "{} has no description", sub.get_name());
            for arg in sub.get_arguments() {
                let id = arg.get_id().as_str();
                if id == "help" || id == "version" {
                    continue;
                }
                let help = arg.get_help().map(|h| h.to_string()).unwrap_or_default();
                assert!(!help.trim().is_empty(), "{} --{id} has no help", sub.get_name());
                let long = arg.get_long().expect("flags are long options");
                let mut rendered = Vec::new();
                sub.clone().write_long_help(&mut rendered).unwrap();
                let rendered = String::from_utf8(rendered).unwrap();
                assert!(rendered.contains(&format!("--{long}")), "{} help omits --{long}", sub.get_name());
            }
        }
    }

    #[test]
    fn set_resolution() {
        let s = |kind, b| SetArgs { kind, a: 0.5, b };
        assert_eq!(s(SetKind::Above, None).resolve().unwrap(), ThresholdSet::Above(0.5));
        assert!(s(SetKind::Interval, None).resolve().is_err());
        assert!(s(SetKind::Interval, Some(0.1)).resolve().is_err());
        assert!(s(SetKind::Below, Some(1.0)).resolve().is_err());
    }
}
