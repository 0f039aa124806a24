//! Command-line front end: `sbe <command> [flags]`.
//!
//! Every command writes its artifacts and a `manifest.json` into `--out`.
//! Failures print one line `error: <reason>` on stderr and exit with 2.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::deltak::{delta_k_coeffs, selftest};
use crate::error::{invalid, Result, SbeError};
use crate::experiments::{
    besov_sbe_comparison, demo_drift, invariance_suite, mc_moment_scaling, regularization_demo, sde_occupation_experiment,
    ComparisonConfig, DemoDrift, InvarianceConfig, MomentScalingConfig, RegularizationConfig, SdeDrift, SdeOccupationConfig,
};
use crate::io::{
    load_drift, load_measure, load_path, write_drift, write_file, write_json, write_measure_csv, write_path_bin,
    write_path_csv, FileHash, Manifest,
};
use crate::lnd::{cnu_linearity, lnd_constant_estimate, lnd_param_region, GaussianIncrementModel};
use crate::norms::{
    besov_norm, deposit_grid, p_variation, sbe_norm, BesovParams, GridSpec, SbeParams, Summability,
};
use crate::occupation::{occupation, OccupationMeasure, SmallBallIndex};
use crate::process::{euler_maruyama_1d, gen_gaussian, GaussianSpec};
use crate::young::{solve_ode_report, Drift, YoungParams};

#[derive(Parser, Debug)]
#[command(name = "sbe", version, about = "Occupation measures, SBE regularity and nonlinear Young ODEs")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed; falls back to SBE_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON object whose keys override the command's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "sbe-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a sample path.
    Gen(GenArgs),
    /// Occupation measure of a path over [s, t].
    Occ(OccArgs),
    /// Norms of occupation measures and paths.
    Norm {
        #[command(subcommand)]
        which: NormCommand,
    },
    /// Local non-determinism diagnostics for Gaussian drivers.
    Lnd(LndArgs),
    /// Nonlinear Young ODEs.
    Young {
        #[command(subcommand)]
        which: YoungCommand,
    },
    /// Run a named experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Run the dyadic-difference identity suite.
    Selftest,
    /// Dyadic-difference coefficients and identities.
    Deltak(DeltakArgs),
}

#[derive(Subcommand, Debug)]
pub enum NormCommand {
    Sbe(SbeArgs),
    Besov(BesovArgs),
    Pvar(PvarArgs),
}

#[derive(Subcommand, Debug)]
pub enum YoungCommand {
    /// Solve `x_t = x_0 − ω_t + ∫ f(s, x_s) ds`.
    Solve(SolveArgs),
    /// Write a synthetic drift container.
    Drift(DriftArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Bm,
    Fbm,
    /// Euler–Maruyama with drift `clamp(scale · sign x, −1, 1)`.
    Em,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathFormat {
    Csv,
    Sbep,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "bm")]
    pub kind: GenKind,
    /// Hurst parameter for `fbm`.
    #[arg(long = "H", default_value_t = 0.5)]
    pub hurst: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Number of samples.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub drift_scale: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: PathFormat,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OccArgs {
    #[arg(long)]
    pub path: PathBuf,
    /// Defaults to the start of the path.
    #[arg(long)]
    pub s: Option<f64>,
    /// Defaults to the end of the path.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSource {
    /// Path file (CSV or SBEP); its occupation measure on [s, t] is used.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Measure CSV, as written by `occ`.
    #[arg(long)]
    pub measure: Option<PathBuf>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SbeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MeasureSource,
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub per_octave: usize,
    #[arg(long)]
    pub y_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumKind {
    Sup,
    Sum,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BesovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MeasureSource,
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    /// Integrability exponent.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 6)]
    pub blocks: usize,
    #[arg(long, default_value_t = 1.0 / 512.0)]
    pub spacing: f64,
    /// Padding around the support, in units of its extent.
    #[arg(long, default_value_t = 1.0)]
    pub pad: f64,
    #[arg(long, value_enum, default_value = "sup")]
    pub summability: SumKind,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PvarArgs {
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LndArgs {
    #[arg(long = "H", default_value_t = 0.5)]
    pub hurst: f64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Number of times per configuration.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.0)]
    pub window_start: f64,
    #[arg(long, default_value_t = 1.0)]
    pub window_end: f64,
    /// Also run the linear-growth check of the increment-density integral.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 6)]
    pub refinements: usize,
    /// With `--p` and `--q`, report the parameter region.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SolveArgs {
    /// Drift container (SBED).
    #[arg(long)]
    pub drift: PathBuf,
    /// Driving path (CSV or SBEP).
    #[arg(long)]
    pub path: PathBuf,
    /// Initial value, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10)]
    pub level: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Disable extrapolation between levels L and L−1.
    #[arg(long)]
    pub no_richardson: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    Zero,
    Smooth,
    Rough,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DriftArgs {
    #[arg(long, value_enum, default_value = "smooth")]
    pub kind: DriftKind,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 256)]
    pub n_grid: usize,
    /// The grid covers `[−half_width, half_width]^d`.
    #[arg(long, default_value_t = 4.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 1.5)]
    pub p2: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q2: f64,
    #[arg(long, default_value_t = 24)]
    pub modes: usize,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    MomentScaling,
    SdeOccupation,
    Invariance,
    BesovComparison,
    Regularization,
}

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DeltakArgs {
    /// Run the identity suite.
    #[arg(long)]
    pub selftest: bool,
    /// Print the coefficients of this order.
    #[arg(long)]
    pub order: Option<usize>,
}

/// Files read and written by one command.
#[derive(Default)]
struct Artifacts {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

struct Ctx {
    out: PathBuf,
    seed: u64,
    config: Option<Map<String, Value>>,
    artifacts: Artifacts,
}

impl Ctx {
    fn output(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.artifacts.outputs.push(p.clone());
        p
    }

    fn input(&mut self, p: &Path) -> PathBuf {
        self.artifacts.inputs.push(p.to_path_buf());
        p.to_path_buf()
    }

    /// `args` with every config key applied; unknown keys are rejected.
    fn resolve<T: Serialize + DeserializeOwned>(&self, args: &T) -> Result<T> {
        let Some(cfg) = &self.config else {
            return serde_json::from_value(serde_json::to_value(args).map_err(fmt_err)?).map_err(fmt_err);
        };
        let mut value = serde_json::to_value(args).map_err(fmt_err)?;
        let map = value
            .as_object_mut()
            .ok_or_else(|| SbeError::Format("command has no configurable flags".into()))?;
        for (k, v) in cfg {
            if k == "seed" {
                continue;
            }
            if !map.contains_key(k) {
                return Err(SbeError::Format(format!("unknown config key `{k}`")));
            }
            map.insert(k.clone(), v.clone());
        }
        serde_json::from_value(value).map_err(fmt_err)
    }

    /// Experiment config from the config file alone.
    fn experiment_config<T: DeserializeOwned + Default>(&self) -> Result<T> {
        match &self.config {
            None => Ok(T::default()),
            Some(cfg) => {
                let mut cfg = cfg.clone();
                cfg.remove("seed");
                serde_json::from_value(Value::Object(cfg)).map_err(fmt_err)
            }
        }
    }
}

fn fmt_err(e: serde_json::Error) -> SbeError {
    SbeError::Format(e.to_string().replace('\n', " "))
}

fn resolve_seed(flag: Option<u64>, config: Option<&Map<String, Value>>) -> Result<u64> {
    if let Some(v) = config.and_then(|c| c.get("seed")) {
        return v
            .as_u64()
            .ok_or_else(|| SbeError::Format("config `seed` must be a non-negative integer".into()));
    }
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("SBE_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| invalid("SBE_SEED", format!("`{s}` is not a non-negative integer"))),
        Err(_) => Ok(0),
    }
}

fn read_config(file: &Path) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(file).map_err(|e| SbeError::Io(format!("{}: {e}", file.display())))?;
    match serde_json::from_str::<Value>(&text).map_err(fmt_err)? {
        Value::Object(m) => Ok(m),
        _ => Err(SbeError::Format("config must be a JSON object".into())),
    }
}

fn measure_from(ctx: &mut Ctx, src: &MeasureSource) -> Result<OccupationMeasure> {
    match (&src.path, &src.measure) {
        (Some(p), None) => {
            let path = load_path(&ctx.input(p))?;
            occupation(&path, src.s.unwrap_or(path.start()), src.t.unwrap_or(path.end()))
        }
        (None, Some(m)) => load_measure(&ctx.input(m)),
        _ => Err(invalid("path", "give exactly one of --path and --measure")),
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| invalid("x0", format!("cannot parse `{}`", v.trim())))
        })
        .collect()
}

fn cmd_gen(ctx: &mut Ctx, args: &GenArgs) -> Result<Value> {
    let span = (args.a, args.b);
    let path = match args.kind {
        GenKind::Bm => gen_gaussian(&GaussianSpec::brownian(args.dim)?, args.n, span, ctx.seed)?,
        GenKind::Fbm => gen_gaussian(&GaussianSpec::fbm(args.hurst, args.dim)?, args.n, span, ctx.seed)?,
        GenKind::Em => {
            if args.dim != 1 {
                return Err(invalid("dim", "Euler–Maruyama paths are one-dimensional"));
            }
            let b = SdeDrift::Sign { scale: args.drift_scale };
            let sigma = args.sigma;
            euler_maruyama_1d(|_, x| b.eval(x), |_, _| sigma, 0.0, args.n, span, ctx.seed)?
        }
    };
    match args.format {
        PathFormat::Csv => write_file(&ctx.output("path.csv"), |w| write_path_csv(&path, w))?,
        PathFormat::Sbep => write_file(&ctx.output("path.sbep"), |w| write_path_bin(&path, w))?,
    }
    Ok(json!({ "samples": path.len(), "dim": path.dim(), "sup_norm": path.sup_norm() }))
}

fn cmd_occ(ctx: &mut Ctx, args: &OccArgs) -> Result<Value> {
    let path = load_path(&ctx.input(&args.path))?;
    let mu = occupation(&path, args.s.unwrap_or(path.start()), args.t.unwrap_or(path.end()))?;
    write_file(&ctx.output("measure.csv"), |w| write_measure_csv(&mu, w))?;
    Ok(json!({
        "atoms": mu.len(),
        "total_mass": mu.total_mass(),
        "span": mu.span(),
        "bounding_box": mu.bounding_box(),
    }))
}

fn cmd_sbe(ctx: &mut Ctx, args: &SbeArgs) -> Result<Value> {
    let mu = measure_from(ctx, &args.source)?;
    let mut params = SbeParams::new(args.alpha, args.p, args.q);
    params.r_min = args.r_min;
    params.r_max = args.r_max;
    params.per_octave = args.per_octave;
    params.y_points = args.y_points;
    let v = sbe_norm(&SmallBallIndex::build(&mu), &params)?;
    serde_json::to_value(v).map_err(fmt_err)
}

fn cmd_besov(ctx: &mut Ctx, args: &BesovArgs) -> Result<Value> {
    let mu = measure_from(ctx, &args.source)?;
    let (lo, hi) = mu
        .bounding_box()
        .ok_or_else(|| SbeError::Degenerate("empty measure".into()))?;
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(args.spacing, f64::max);
    let grid = GridSpec::covering(&lo, &hi, args.spacing, args.pad * extent)?;
    let rho = deposit_grid(&mu, &grid)?;
    let mut params = BesovParams::new(args.alpha, args.q, args.blocks);
    params.summability = match args.summability {
        SumKind::Sup => Summability::Sup,
        SumKind::Sum => Summability::Sum,
    };
    let v = besov_norm(&rho, &params)?;
    Ok(json!({ "value": v.value, "blocks": v.blocks, "grid": grid }))
}

fn cmd_pvar(ctx: &mut Ctx, args: &PvarArgs) -> Result<Value> {
    let path = load_path(&ctx.input(&args.path))?;
    if !(args.p >= 1.0) {
        return Err(invalid("p", "must be >= 1"));
    }
    let d = path.dim();
    let pts: Vec<&[f64]> = (0..path.len()).map(|i| path.value(i)).collect();
    let v = p_variation(
        &pts,
        |a, b| (0..d).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>().sqrt(),
        args.p,
    );
    Ok(json!({ "p": args.p, "value": v }))
}

fn cmd_lnd(ctx: &mut Ctx, args: &LndArgs) -> Result<Value> {
    let model = GaussianIncrementModel::fbm(args.hurst, args.dim)?;
    let est = lnd_constant_estimate(&model, args.n, args.trials, (args.window_start, args.window_end), ctx.seed)?;
    let cnu = args
        .beta
        .map(|beta| cnu_linearity(&model, beta, (args.window_start, args.window_end), args.refinements))
        .transpose()?;
    let region = match (args.alpha, args.p, args.q) {
        (Some(a), Some(p), Some(q)) => Some(lnd_param_region(args.hurst, args.dim, a, p, q)?),
        (None, None, None) => None,
        _ => return Err(invalid("alpha", "the parameter region needs all of --alpha, --p, --q")),
    };
    Ok(json!({ "estimate": est, "cnu": cnu, "region": region }))
}

fn cmd_solve(ctx: &mut Ctx, args: &SolveArgs) -> Result<Value> {
    let field = load_drift(&ctx.input(&args.drift))?;
    let omega = load_path(&ctx.input(&args.path))?;
    let x0 = parse_point(&args.x0)?;
    let params = YoungParams {
        level: args.level,
        tol: args.tol,
        max_iter: args.max_iter,
        richardson: !args.no_richardson,
        budget: None,
    };
    let sol = solve_ode_report(&field, &omega, &x0, &params, None)?;
    write_file(&ctx.output("solution.csv"), |w| write_path_csv(&sol.x, w))?;
    Ok(json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "changes": sol.changes,
        "contraction": sol.contraction,
        "error_estimate": sol.error_estimate,
        "solver_tolerance": sol.solver_tolerance,
        "out_of_grid_fraction": field.out_of_grid_fraction(),
        "declared": field.declared(),
        "measured": field.measured(),
        "end_value": sol.end_value(),
    }))
}

fn cmd_drift(ctx: &mut Ctx, args: &DriftArgs) -> Result<Value> {
    let cfg = RegularizationConfig {
        dim: args.dim,
        drift: match args.kind {
            DriftKind::Zero => DemoDrift::Zero,
            DriftKind::Smooth => DemoDrift::Smooth,
            DriftKind::Rough => DemoDrift::Rough,
        },
        alpha2: args.alpha2,
        p2: args.p2,
        q2: args.q2,
        n_grid: args.n_grid,
        modes: args.modes,
        amplitude: args.amplitude,
        x0: vec![0.0; args.dim],
        ..Default::default()
    };
    let field = demo_drift(&cfg, -args.half_width, args.half_width, ctx.seed)?;
    write_file(&ctx.output("drift.sbed"), |w| write_drift(&field, w))?;
    Ok(json!({ "grid": field.grid(), "declared": field.declared(), "measured": field.measured() }))
}

fn moment_table(points: &[crate::experiments::SpanMoment]) -> String {
    let mut s = String::from("span,mean,std_error\n");
    for p in points {
        s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.span, p.mean, p.std_error));
    }
    s
}

fn cmd_experiment(ctx: &mut Ctx, name: ExperimentName) -> Result<Value> {
    let seed = ctx.seed;
    let (config, report, table): (Value, Value, Option<String>) = match name {
        ExperimentName::MomentScaling => {
            let cfg: MomentScalingConfig = ctx.experiment_config()?;
            let r = mc_moment_scaling(&cfg, seed)?;
            let t = moment_table(&r.points);
            (to_value(&cfg)?, to_value(&r)?, Some(t))
        }
        ExperimentName::SdeOccupation => {
            let cfg: SdeOccupationConfig = ctx.experiment_config()?;
            let r = sde_occupation_experiment(&cfg, seed)?;
            let t = moment_table(&r.sde_points);
            (to_value(&cfg)?, to_value(&r)?, Some(t))
        }
        ExperimentName::Invariance => {
            let cfg: InvarianceConfig = ctx.experiment_config()?;
            let r = invariance_suite(&cfg, seed)?;
            let mut t = String::from("pair,difference,base,f_minus_g_variation,f_minus_g_sup,g_variation,bound_ratio\n");
            for (i, s) in r.family.iter().enumerate() {
                t.push_str(&format!(
                    "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    s.difference, s.base, s.f_minus_g_variation, s.f_minus_g_sup, s.g_variation, s.bound_ratio
                ));
            }
            (to_value(&cfg)?, to_value(&r)?, Some(t))
        }
        ExperimentName::BesovComparison => {
            let cfg: ComparisonConfig = ctx.experiment_config()?;
            let r = besov_sbe_comparison(&cfg, seed)?;
            let mut t = String::from("measure,sbe,besov,ratio,relative\n");
            for row in &r.rows {
                t.push_str(&format!(
                    "\"{}\",{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    row.name, row.sbe, row.besov, row.ratio, row.relative
                ));
            }
            (to_value(&cfg)?, to_value(&r)?, Some(t))
        }
        ExperimentName::Regularization => {
            let cfg: RegularizationConfig = ctx.experiment_config()?;
            let r = regularization_demo(&cfg, seed)?;
            (to_value(&cfg)?, to_value(&r)?, None)
        }
    };
    write_json(&ctx.output("report.json"), &report)?;
    if let Some(t) = table {
        let p = ctx.output("table.csv");
        fs::write(&p, t)?;
    }
    Ok(json!({ "experiment": name, "config": config }))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(fmt_err)
}

/// Returns the exit code: 0 when every check passed, 1 otherwise.
fn cmd_selftest(ctx: &mut Ctx) -> Result<i32> {
    let checks = selftest(ctx.seed)?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    write_json(&ctx.output("selftest.json"), &checks)?;
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
}

/// Write the command's report and the manifest.
fn finish(ctx: &mut Ctx, argv: &[String], command: &str, config: Value, report: Option<Value>) -> Result<()> {
    if let Some(r) = report {
        write_json(&ctx.output("report.json"), &r)?;
    }
    let hash = |v: &[PathBuf]| -> Result<Vec<FileHash>> {
        let mut seen = Vec::new();
        for p in v {
            if !seen.iter().any(|h: &FileHash| h.path == p.display().to_string()) {
                seen.push(FileHash::of(p)?);
            }
        }
        Ok(seen)
    };
    let manifest = Manifest {
        tool: "sbe".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        command: command.into(),
        config,
        seed: Some(ctx.seed),
        inputs: hash(&ctx.artifacts.inputs)?,
        outputs: hash(&ctx.artifacts.outputs)?,
    };
    write_json(&ctx.out.join("manifest.json"), &manifest)
}

fn execute(cli: Cli, argv: &[String]) -> Result<i32> {
    let config = cli.config.as_deref().map(read_config).transpose()?;
    let seed = resolve_seed(cli.seed, config.as_ref())?;
    fs::create_dir_all(&cli.out).map_err(|e| SbeError::Io(format!("{}: {e}", cli.out.display())))?;
    let mut ctx = Ctx {
        out: cli.out.clone(),
        seed,
        config,
        artifacts: Artifacts::default(),
    };
    macro_rules! simple {
        ($name:expr, $args:expr, $f:ident) => {{
            let args = ctx.resolve($args)?;
            let report = $f(&mut ctx, &args)?;
            finish(&mut ctx, argv, $name, to_value(&args)?, Some(report))?;
            Ok(0)
        }};
    }
    match &cli.command {
        Command::Gen(a) => simple!("gen", a, cmd_gen),
        Command::Occ(a) => simple!("occ", a, cmd_occ),
        Command::Norm { which } => match which {
            NormCommand::Sbe(a) => simple!("norm sbe", a, cmd_sbe),
            NormCommand::Besov(a) => simple!("norm besov", a, cmd_besov),
            NormCommand::Pvar(a) => simple!("norm pvar", a, cmd_pvar),
        },
        Command::Lnd(a) => simple!("lnd", a, cmd_lnd),
        Command::Young { which } => match which {
            YoungCommand::Solve(a) => simple!("young solve", a, cmd_solve),
            YoungCommand::Drift(a) => simple!("young drift", a, cmd_drift),
        },
        Command::Experiment(a) => {
            let summary = cmd_experiment(&mut ctx, a.name)?;
            finish(&mut ctx, argv, "experiment", summary, None)?;
            Ok(0)
        }
        Command::Selftest => {
            let code = cmd_selftest(&mut ctx)?;
            finish(&mut ctx, argv, "selftest", Value::Null, None)?;
            Ok(code)
        }
        Command::Deltak(a) => {
            let args = ctx.resolve(a)?;
            if let Some(k) = args.order {
                let c = delta_k_coeffs(k)?;
                let exact: Vec<String> = c.exact().iter().map(|v| v.to_string()).collect();
                println!("{}", exact.join(" "));
                write_json(&ctx.output("coefficients.json"), &json!({ "order": k, "coefficients": exact }))?;
            }
            let code = if args.selftest { cmd_selftest(&mut ctx)? } else { 0 };
            if !args.selftest && args.order.is_none() {
                return Err(invalid("deltak", "give --selftest or --order"));
            }
            finish(&mut ctx, argv, "deltak", to_value(&args)?, None)?;
            Ok(code)
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = raw.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&raw) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error: usage: {line}");
            return 2;
        }
    };
    let threads = cli.threads;
    let go = move || match execute(cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            2
        }
    };
    match threads {
        Some(0) => {
            eprintln!("error: invalid parameter `threads`: must be at least 1");
            2
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(go),
            Err(e) => {
                eprintln!("error: cannot start thread pool: {e}");
                2
            }
        },
        None => go(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overlay_rejects_unknown_keys() {
        let args = GenArgs {
            kind: GenKind::Bm,
            hurst: 0.5,
            dim: 1,
            n: 8,
            a: 0.0,
            b: 1.0,
            sigma: 1.0,
            drift_scale: 1.0,
            format: PathFormat::Csv,
        };
        let mut ctx = Ctx {
            out: PathBuf::new(),
            seed: 0,
            config: Some(serde_json::from_str(r#"{"n": 64, "kind": "fbm", "seed": 3}"#).unwrap()),
            artifacts: Artifacts::default(),
        };
        let r = ctx.resolve(&args).unwrap();
        assert_eq!((r.n, r.kind), (64, GenKind::Fbm));
        ctx.config = Some(serde_json::from_str(r#"{"bogus": 1}"#).unwrap());
        assert!(ctx.resolve(&args).unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn seed_precedence() {
        let cfg: Map<String, Value> = serde_json::from_str(r#"{"seed": 11}"#).unwrap();
        assert_eq!(resolve_seed(Some(5), Some(&cfg)).unwrap(), 11);
        assert_eq!(resolve_seed(Some(5), None).unwrap(), 5);
    }

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("1, -2.5").unwrap(), vec![1.0, -2.5]);
        assert!(parse_point("1,x").is_err());
    }
}
