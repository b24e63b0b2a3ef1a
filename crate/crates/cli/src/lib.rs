//! The `pencil` command line: argument parsing, dispatch to the core crate,
//! and JSON/CSV/SVG emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pencil_core::expansion::{synthesize_boundary_trace, Expansion};
use pencil_core::nodal::{check_admissibility, enumerate_admissible, CrackConfig, Equation};
use pencil_core::pencil::{
    eigenfunction, pencil_residual, quadratic_eigenfunction, quadratic_spectrum, quartic_spectrum, reconstruct_xy, sturm_liouville_check, verify_characteristic_roots, PencilOrder,
};
use pencil_core::polyring::{int, parse_rational, rat, to_f64, RatPoly, Rational};
use pencil_core::semilinear::{
    crack_curves, solve_selfsimilar, solve_stationary_with, FarCondition, ProfileSolution, StationaryOptions,
    Symmetry,
};
use pencil_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::svg::{emit_svg, PlotStyle, Series};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Parser, Debug, Serialize)]
#[command(name = "pencil", version, about = "Operator pencils, crack nodal sets and semilinear profiles")]
pub struct Cli {
    /// Worker threads for independent work items; PENCIL_PARALLELISM overrides.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallelism: usize,
    /// Write the primary (JSON or text) output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// One monic polynomial eigenfunction.
    Eig(EigArgs),
    /// Eigenvalue families up to a maximal order.
    Spectrum(SpectrumArgs),
    /// Crack admissibility and enumeration.
    #[command(subcommand)]
    Cracks(CracksCommand),
    /// Truncated expansions near the tip.
    #[command(subcommand)]
    Expand(ExpandCommand),
    /// Semilinear profile ODEs.
    #[command(subcommand)]
    Ode(OdeCommand),
    /// Built-in verification suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderArg {
    Quadratic,
    Quartic,
}

impl From<OrderArg> for PencilOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Quadratic => PencilOrder::Quadratic,
            OrderArg::Quartic => PencilOrder::Quartic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationArg {
    Laplace,
    Bilaplace,
}

impl From<EquationArg> for Equation {
    fn from(e: EquationArg) -> Self {
        match e {
            EquationArg::Laplace => Equation::Laplace,
            EquationArg::Bilaplace => Equation::Bilaplace,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryArg {
    Symmetric,
    Antisymmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FarArg {
    Decay,
    Plateau,
}

#[derive(Args, Debug, Serialize)]
pub struct EigArgs {
    #[arg(long, value_enum)]
    pub order: OrderArg,
    #[arg(long)]
    pub l: usize,
    #[arg(long, default_value_t = 1)]
    pub family: u8,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    #[arg(long, value_enum)]
    pub order: OrderArg,
    #[arg(long, default_value_t = 10)]
    pub lmax: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CracksCommand {
    /// Admissibility of a slope tuple over a range of orders.
    Check(CracksCheckArgs),
    /// Configurations from the zeros of ψ_{l,1} + r ψ_{l-1,2}.
    Enum(CracksEnumArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct CracksCheckArgs {
    /// Comma-separated increasing slopes; rationals and decimals are exact.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: String,
    #[arg(long, value_enum, default_value = "laplace")]
    pub equation: EquationArg,
    #[arg(long)]
    pub lmin: Option<usize>,
    #[arg(long, default_value_t = 12)]
    pub lmax: usize,
    #[arg(long, default_value_t = pencil_core::nodal::DEFAULT_RANK_TOL)]
    pub tol: f64,
    /// Treat the slopes as floating-point data and decide ranks numerically.
    #[arg(long)]
    pub approximate: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CracksEnumArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub l: usize,
    /// `start:end:step`, evaluated exactly.
    #[arg(long, allow_hyphen_values = true, default_value = "-2:2:0.5")]
    pub ratios: String,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpandCommand {
    /// Evaluate on a (z, τ) grid.
    Eval(ExpandEvalArgs),
    /// Values on the lower unit semicircle.
    Trace(ExpandTraceArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ExpandEvalArgs {
    /// JSON map from order to coefficient tuple, e.g. '{"2":[1,0]}'.
    #[arg(long)]
    pub terms: String,
    #[arg(long, value_enum, default_value = "laplace")]
    pub equation: EquationArg,
    /// `z=start:end:step,tau=start:end:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ExpandTraceArgs {
    #[arg(long)]
    pub terms: String,
    #[arg(long, value_enum, default_value = "laplace")]
    pub equation: EquationArg,
    #[arg(long, default_value_t = 720)]
    pub samples: usize,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdeCommand {
    /// Shooting for a stationary profile.
    Stationary(StationaryArgs),
    /// Inward integration of the self-similar profile.
    Selfsimilar(SelfSimilarArgs),
    /// Crack curves from the self-similar zeros.
    Crackcurves(CrackCurvesArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct StationaryArgs {
    #[arg(long, default_value_t = 3.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value = "symmetric")]
    pub symmetry: SymmetryArg,
    #[arg(long, value_enum, default_value = "decay")]
    pub far: FarArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 50.0)]
    pub z_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct SelfSimilarArgs {
    #[arg(long, default_value_t = 3.0)]
    pub p: f64,
    /// Far-field amplitude in f ~ A/ξ.
    #[arg(long = "A", default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 100.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CrackCurvesArgs {
    #[arg(long, default_value_t = 3.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "A", default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 100.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// `start:end:step`, or `start:end:log` for logarithmic spacing in |y|.
    #[arg(long, allow_hyphen_values = true, default_value = "-0.5:-1e-4:log")]
    pub ygrid: String,
    /// Points for logarithmic y grids.
    #[arg(long, default_value_t = 100)]
    pub ypoints: usize,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Residuals,
    Roots,
    Reconstruction,
    SturmLiouville,
    AdmissibilityExamples,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, required_unless_present = "all")]
    pub suite: Option<Suite>,
    #[arg(long, conflicts_with = "suite")]
    pub all: bool,
    /// Largest order checked; each suite has its own default.
    #[arg(long)]
    pub lmax: Option<usize>,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            let body = json!({
                "schema_version": SCHEMA_VERSION,
                "error": { "kind": e.kind(), "message": e.to_string() },
            });
            eprintln!("{body}");
            match e {
                Error::Parse(_) => 2,
                _ => 1,
            }
        }
    }
}

fn resolve_parallelism(flag: usize) -> Result<usize> {
    let n = match std::env::var("PENCIL_PARALLELISM") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| Error::Parse(format!("PENCIL_PARALLELISM={v:?} is not a positive integer")))?,
        Err(_) => flag,
    };
    if n == 0 {
        return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
    }
    Ok(n)
}

/// The resolved configuration echoed into every output.
#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'static str,
    output: &'static str,
    output_path: Option<&'a Path>,
    parallelism: usize,
    tolerances: BTreeMap<&'static str, f64>,
    args: &'a Command,
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Value,
}

fn execute(cli: &Cli) -> Result<i32> {
    let parallelism = resolve_parallelism(cli.parallelism)?;
    let (command, json_out, tolerances) = describe(&cli.command);
    let config = RunConfig {
        command,
        output: if json_out { "json" } else { "text" },
        output_path: cli.output.as_deref(),
        parallelism,
        tolerances,
        args: &cli.command,
    };
    let ctx = Ctx { cli, config: serde_json::to_value(&config).expect("config serializes") };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&ctx))
}

fn describe(c: &Command) -> (&'static str, bool, BTreeMap<&'static str, f64>) {
    let mut tol = BTreeMap::new();
    let (name, json) = match c {
        Command::Eig(a) => ("eig", a.json),
        Command::Spectrum(a) => ("spectrum", a.json),
        Command::Cracks(CracksCommand::Check(a)) => {
            tol.insert("rank", a.tol);
            tol.insert("root", pencil_core::nodal::DEFAULT_ROOT_TOL);
            ("cracks-check", a.json)
        }
        Command::Cracks(CracksCommand::Enum(a)) => {
            tol.insert("root", pencil_core::nodal::DEFAULT_ROOT_TOL);
            ("cracks-enum", a.json)
        }
        Command::Expand(ExpandCommand::Eval(a)) => ("expand-eval", a.json),
        Command::Expand(ExpandCommand::Trace(a)) => {
            tol.insert("root", pencil_core::nodal::DEFAULT_ROOT_TOL);
            ("expand-trace", a.json)
        }
        Command::Ode(OdeCommand::Stationary(a)) => {
            tol.insert("ode", a.tol);
            ("ode-stationary", a.json)
        }
        Command::Ode(OdeCommand::Selfsimilar(a)) => {
            tol.insert("ode", a.tol);
            ("ode-selfsimilar", a.json)
        }
        Command::Ode(OdeCommand::Crackcurves(a)) => {
            tol.insert("ode", a.tol);
            ("ode-crackcurves", a.json)
        }
        Command::Verify(_) => {
            tol.insert("sturm-liouville", SL_TOL);
            ("verify", true)
        }
    };
    (name, json, tol)
}

fn dispatch(ctx: &Ctx) -> Result<i32> {
    match &ctx.cli.command {
        Command::Eig(a) => cmd_eig(ctx, a),
        Command::Spectrum(a) => cmd_spectrum(ctx, a),
        Command::Cracks(CracksCommand::Check(a)) => cmd_cracks_check(ctx, a),
        Command::Cracks(CracksCommand::Enum(a)) => cmd_cracks_enum(ctx, a),
        Command::Expand(ExpandCommand::Eval(a)) => cmd_expand_eval(ctx, a),
        Command::Expand(ExpandCommand::Trace(a)) => cmd_expand_trace(ctx, a),
        Command::Ode(OdeCommand::Stationary(a)) => cmd_stationary(ctx, a),
        Command::Ode(OdeCommand::Selfsimilar(a)) => cmd_selfsimilar(ctx, a),
        Command::Ode(OdeCommand::Crackcurves(a)) => cmd_crackcurves(ctx, a),
        Command::Verify(a) => cmd_verify(ctx, a),
    }
}

// ---- emission ----

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Error::InvalidArgument(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit_primary(ctx: &Ctx, text: String) -> Result<()> {
    match &ctx.cli.output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::InvalidArgument(format!("stdout: {e}")))
        }
    }
}

fn emit_json(ctx: &Ctx, result: impl Serialize) -> Result<()> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "config": ctx.config,
        "result": serde_json::to_value(result).map_err(|e| Error::InternalConsistency(e.to_string()))?,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("json value serializes");
    text.push('\n');
    emit_primary(ctx, text)
}

fn emit_csv(ctx: &Ctx, path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut buf = format!("# config: {}\n", ctx.config).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| Error::InternalConsistency(format!("csv: {e}"));
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::InternalConsistency(format!("csv: {e}")))?;
    }
    write_atomic(path, &buf)
}

fn emit_plot(ctx: &Ctx, path: &Path, series: &[Series], style: &PlotStyle) -> Result<()> {
    let doc = emit_svg(series, style, Some(&ctx.config.to_string()))?;
    write_atomic(path, doc.as_bytes())
}

/// Shortest decimal that round-trips, so CSV output is deterministic.
fn num(x: f64) -> String {
    format!("{x:?}")
}

// ---- argument parsing helpers ----

fn parse_list(text: &str) -> Result<Vec<Rational>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_rational(s.trim())).collect()
}

fn split_range(text: &str) -> Result<[&str; 3]> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    <[&str; 3]>::try_from(parts).map_err(|_| Error::Parse(format!("range {text:?} is not start:end:step")))
}

/// `start:end:step` over exact rationals, endpoints included.
pub fn rational_range(text: &str) -> Result<Vec<Rational>> {
    let [a, b, s] = split_range(text)?;
    let (a, b, s) = (parse_rational(a)?, parse_rational(b)?, parse_rational(s)?);
    if s <= int(0) {
        return Err(Error::Parse(format!("range step must be positive in {text:?}")));
    }
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let x = &a + &s * int(k);
        if x > b || out.len() > 1_000_000 {
            break;
        }
        out.push(x);
        k += 1;
    }
    Ok(out)
}

/// `start:end:step` in floating point, or `start:end:log` with `log_points`
/// values spaced logarithmically in magnitude.
pub fn float_range(text: &str, log_points: usize) -> Result<Vec<f64>> {
    let [a, b, s] = split_range(text)?;
    let f = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("{t:?} is not a number")));
    let (a, b) = (f(a)?, f(b)?);
    if s == "log" {
        if a == 0.0 || b == 0.0 || (a < 0.0) != (b < 0.0) || log_points < 2 {
            return Err(Error::Parse(format!("log range {text:?} needs same-sign nonzero ends and at least 2 points")));
        }
        let sign = a.signum();
        let (la, lb) = (a.abs().ln(), b.abs().ln());
        return Ok((0..log_points).map(|i| sign * (la + (lb - la) * i as f64 / (log_points - 1) as f64).exp()).collect());
    }
    let step = f(s)?;
    if !(step > 0.0) || b < a {
        return Err(Error::Parse(format!("range {text:?} needs start <= end and a positive step")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(Error::Parse(format!("range {text:?} has too many points")));
    }
    Ok((0..n).map(|i| a + step * i as f64).collect())
}

fn parse_grid(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut z = None;
    let mut tau = None;
    for part in text.split(',') {
        let (key, range) = part.split_once('=').ok_or_else(|| Error::Parse(format!("grid part {part:?} is not key=range")))?;
        match key.trim() {
            "z" => z = Some(float_range(range, 0)?),
            "tau" => tau = Some(float_range(range, 0)?),
            k => return Err(Error::Parse(format!("unknown grid axis {k:?}"))),
        }
    }
    match (z, tau) {
        (Some(z), Some(t)) => Ok((z, t)),
        _ => Err(Error::Parse("grid needs both z= and tau= ranges".into())),
    }
}

// ---- commands ----

fn cmd_eig(ctx: &Ctx, a: &EigArgs) -> Result<i32> {
    let pair = eigenfunction(a.order.into(), a.l, a.family)?;
    if a.json {
        emit_json(ctx, &pair)?;
    } else {
        emit_primary(ctx, format!("order={} family={} l={} lambda={}\npsi(z) = {}\n", pair.order, pair.family, pair.l, pair.lambda, pair.psi))?;
    }
    Ok(0)
}

fn cmd_spectrum(ctx: &Ctx, a: &SpectrumArgs) -> Result<i32> {
    let entries = match a.order {
        OrderArg::Quadratic => quadratic_spectrum(a.lmax)?,
        OrderArg::Quartic => quartic_spectrum(a.lmax)?,
    };
    if a.json {
        emit_json(ctx, &entries)?;
    } else {
        let mut text = String::from("family l lambda\n");
        for e in &entries {
            text.push_str(&format!("{} {} {}\n", e.family, e.l, e.lambda));
        }
        emit_primary(ctx, text)?;
    }
    Ok(0)
}

fn cmd_cracks_check(ctx: &Ctx, a: &CracksCheckArgs) -> Result<i32> {
    let alphas = parse_list(&a.alphas)?;
    let config = if a.approximate {
        CrackConfig::approximate(alphas.iter().map(to_f64).collect())?
    } else {
        CrackConfig::exact(alphas)?
    };
    let lmin = a.lmin.unwrap_or(config.m().max(1));
    let verdicts = check_admissibility(a.equation.into(), &config, lmin, a.lmax, a.tol)?;
    if a.json {
        emit_json(ctx, json!({ "config": config, "verdicts": verdicts }))?;
    } else {
        let mut text = String::new();
        for v in &verdicts {
            let combo = v.combination.as_ref().map_or("-".to_string(), RatPoly::to_string);
            text.push_str(&format!(
                "l={} admissible={} rank={} consecutive={} combination={}\n",
                v.l, v.admissible, v.rank, v.consecutive_flag, combo
            ));
        }
        emit_primary(ctx, text)?;
    }
    Ok(0)
}

fn cmd_cracks_enum(ctx: &Ctx, a: &CracksEnumArgs) -> Result<i32> {
    let ratios = rational_range(&a.ratios)?;
    let configs = enumerate_admissible(a.m, a.l, &ratios)?;
    if let Some(path) = &a.csv {
        let mut header = vec!["l", "ratio"];
        let names: Vec<String> = (1..=a.m).map(|k| format!("alpha{k}")).collect();
        header.extend(names.iter().map(String::as_str));
        let rows = configs.iter().map(|c| {
            let mut row = vec![c.l.to_string(), c.ratio.as_ref().map_or("inf".to_string(), |r| r.to_string())];
            row.extend(c.config.alphas.iter().map(|&x| num(x)));
            row
        });
        emit_csv(ctx, path, &header, rows)?;
    }
    if a.json {
        emit_json(ctx, &configs)?;
    } else if a.csv.is_none() {
        let mut text = String::new();
        for c in &configs {
            let r = c.ratio.as_ref().map_or("inf".to_string(), |r| r.to_string());
            text.push_str(&format!("l={} ratio={} alphas={:?}\n", c.l, r, c.config.alphas));
        }
        emit_primary(ctx, text)?;
    }
    Ok(0)
}

fn cmd_expand_eval(ctx: &Ctx, a: &ExpandEvalArgs) -> Result<i32> {
    let exp = Expansion::from_json(a.equation.into(), &a.terms)?;
    let (zs, taus) = parse_grid(&a.grid)?;
    let rows: Vec<[f64; 5]> = taus
        .par_iter()
        .flat_map_iter(|&tau| {
            let exp = &exp;
            zs.iter().map(move |&z| {
                let s = (-tau).exp();
                [z, tau, z * s, -s, exp.eval(z, tau)]
            })
        })
        .collect();
    if let Some(path) = &a.csv {
        emit_csv(ctx, path, &["z", "tau", "x", "y", "w"], rows.iter().map(|r| r.iter().map(|&v| num(v)).collect()))?;
    }
    if a.json {
        let cols: Vec<Value> = rows.iter().map(|r| json!({"z": r[0], "tau": r[1], "x": r[2], "y": r[3], "w": r[4]})).collect();
        emit_json(ctx, json!({ "l_start": exp.l_start(), "rows": cols }))?;
    } else if a.csv.is_none() {
        emit_primary(ctx, format!("{} points, leading order {}\n", rows.len(), exp.l_start()))?;
    }
    Ok(0)
}

fn cmd_expand_trace(ctx: &Ctx, a: &ExpandTraceArgs) -> Result<i32> {
    let exp = Expansion::from_json(a.equation.into(), &a.terms)?;
    let trace = synthesize_boundary_trace(&exp, a.samples)?;
    if let Some(path) = &a.svg {
        let mut series = vec![Series { label: "trace".into(), points: trace.samples.iter().map(|s| (s.theta, s.value)).collect() }];
        if !trace.crack_angles.is_empty() {
            series.push(Series {
                label: "crack directions".into(),
                points: trace.crack_angles.iter().zip(&trace.crack_values).flat_map(|(&t, &v)| [(t, v), (f64::NAN, f64::NAN)]).collect(),
            });
        }
        let style = PlotStyle { title: format!("boundary trace, leading order {}", exp.l_start()), x_label: "θ".into(), y_label: "u".into(), ..Default::default() };
        emit_plot(ctx, path, &series, &style)?;
    }
    if let Some(path) = &a.csv {
        emit_csv(ctx, path, &["theta", "value"], trace.samples.iter().map(|s| vec![num(s.theta), num(s.value)]))?;
    }
    if a.json {
        emit_json(ctx, &trace)?;
    } else if a.svg.is_none() && a.csv.is_none() {
        emit_primary(ctx, format!("{} samples, crack angles {:?}\n", trace.samples.len(), trace.crack_angles))?;
    }
    Ok(0)
}

fn profile_csv(ctx: &Ctx, path: &Path, sol: &ProfileSolution) -> Result<()> {
    let rows = sol.grid.iter().zip(&sol.values).zip(&sol.derivative_values).map(|((x, f), d)| vec![num(*x), num(*f), num(*d)]);
    emit_csv(ctx, path, &["abscissa", "f", "f'"], rows)
}

fn profile_summary(sol: &ProfileSolution) -> Value {
    json!({
        "problem": sol.problem,
        "shot_parameter": sol.shot_parameter,
        "asymptotic_constant": sol.asymptotic_constant,
        "far_exponent": sol.far_exponent,
        "zero_count": sol.zeros.len(),
        "zeros": sol.zeros,
        "max_residual": sol.max_residual,
        "truncated": sol.truncated,
        "steps": sol.steps,
    })
}

fn cmd_stationary(ctx: &Ctx, a: &StationaryArgs) -> Result<i32> {
    let symmetry = match a.symmetry {
        SymmetryArg::Symmetric => Symmetry::Symmetric,
        SymmetryArg::Antisymmetric => Symmetry::Antisymmetric,
    };
    let far = match a.far {
        FarArg::Decay => FarCondition::DecayInverse,
        FarArg::Plateau => FarCondition::PlateauOne,
    };
    let opts = StationaryOptions { tol: a.tol, z_max: a.z_max, grid_points: a.points, ..Default::default() };
    let sol = solve_stationary_with(a.p, symmetry, far, &opts)?;
    if let Some(path) = &a.svg {
        let series = [Series { label: format!("{symmetry}, {far}"), points: sol.grid.iter().copied().zip(sol.values.iter().copied()).collect() }];
        let style = PlotStyle { title: format!("stationary profile, p = {}", a.p), x_label: "z".into(), y_label: "f".into(), ..Default::default() };
        emit_plot(ctx, path, &series, &style)?;
    }
    if let Some(path) = &a.csv {
        profile_csv(ctx, path, &sol)?;
    }
    if a.json {
        emit_json(ctx, profile_summary(&sol))?;
    } else if a.svg.is_none() && a.csv.is_none() {
        emit_primary(
            ctx,
            format!(
                "shot parameter {:.12}\nasymptotic constant {:.12}\nzeros {:?}\nmax residual {:.3e}\n",
                sol.shot_parameter, sol.asymptotic_constant, sol.zeros, sol.max_residual
            ),
        )?;
    }
    Ok(0)
}

fn cmd_selfsimilar(ctx: &Ctx, a: &SelfSimilarArgs) -> Result<i32> {
    let sol = solve_selfsimilar(a.p, a.amplitude, a.xi_max, a.xi_min, a.tol)?;
    if let Some(path) = &a.svg {
        let series = [Series { label: format!("A = {}", a.amplitude), points: sol.grid.iter().copied().zip(sol.values.iter().copied()).collect() }];
        let style = PlotStyle { title: format!("self-similar profile, p = {}", a.p), x_label: "ξ".into(), y_label: "f".into(), log_x: true, ..Default::default() };
        emit_plot(ctx, path, &series, &style)?;
    }
    if let Some(path) = &a.csv {
        profile_csv(ctx, path, &sol)?;
    }
    if a.json {
        emit_json(ctx, profile_summary(&sol))?;
    } else if a.svg.is_none() && a.csv.is_none() {
        emit_primary(ctx, format!("{} zeros in ({}, {})\nmax residual {:.3e}\ntruncated {}\n", sol.zeros.len(), a.xi_min, a.xi_max, sol.max_residual, sol.truncated))?;
    }
    Ok(0)
}

fn cmd_crackcurves(ctx: &Ctx, a: &CrackCurvesArgs) -> Result<i32> {
    let ys = float_range(&a.ygrid, a.ypoints)?;
    let sol = solve_selfsimilar(a.p, a.amplitude, a.xi_max, a.xi_min, a.tol)?;
    let curves = crack_curves(&sol, a.alpha, a.p, &ys)?;
    if let Some(path) = &a.svg {
        let series: Vec<Series> = curves
            .iter()
            .map(|c| Series { label: format!("ξ = {:.4e}", c.xi), points: c.points.iter().map(|&(y, x)| (x, y)).collect() })
            .collect();
        let style = PlotStyle { title: format!("crack curves, p = {}, α = {}", a.p, a.alpha), x_label: "x".into(), y_label: "y".into(), ..Default::default() };
        emit_plot(ctx, path, &series, &style)?;
    }
    if let Some(path) = &a.csv {
        let rows = curves.iter().enumerate().flat_map(|(k, c)| c.points.iter().map(move |&(y, x)| vec![k.to_string(), num(c.xi), num(y), num(x)]));
        emit_csv(ctx, path, &["curve", "xi", "y", "x"], rows)?;
    }
    if a.json {
        emit_json(ctx, &curves)?;
    } else if a.svg.is_none() && a.csv.is_none() {
        let xis: Vec<f64> = curves.iter().map(|c| c.xi).collect();
        emit_primary(ctx, format!("{} curves, beta = {}\nxi = {xis:?}\n", curves.len(), a.alpha * (a.p - 1.0) / 2.0))?;
    }
    Ok(0)
}

// ---- verification suites ----

const SL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub item: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: usize,
    pub failed: usize,
    pub details: Vec<Failure>,
}

fn report(suite: Suite, results: Vec<(String, std::result::Result<(), String>)>) -> VerifyReport {
    let passed = results.iter().filter(|r| r.1.is_ok()).count();
    let details: Vec<Failure> = results.into_iter().filter_map(|(item, r)| r.err().map(|message| Failure { item, message })).collect();
    VerifyReport { suite, passed, failed: details.len(), details }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Work items in order, evaluated on the current thread pool.
fn run_items<T: Sync>(items: Vec<T>, f: impl Fn(&T) -> (String, std::result::Result<(), String>) + Sync + Send) -> Vec<(String, std::result::Result<(), String>)> {
    items.par_iter().map(f).collect()
}

pub fn verify_suite(suite: Suite, lmax: Option<usize>) -> VerifyReport {
    let results = match suite {
        Suite::Residuals => {
            let lmax = lmax.unwrap_or(30);
            let mut items = Vec::new();
            for l in 0..=lmax {
                for f in 1..=2u8 {
                    items.push((PencilOrder::Quadratic, l, f));
                }
                for f in 1..=4u8 {
                    items.push((PencilOrder::Quartic, l, f));
                }
            }
            items.retain(|&(_, l, f)| !(f == 1 && l == 0));
            run_items(items, |&(order, l, f)| {
                let item = format!("{order} l={l} family={f}");
                let r = eigenfunction(order, l, f)
                    .map_err(|e| e.to_string())
                    .and_then(|pair| {
                        let r = pencil_residual(&pair);
                        check(r.is_zero(), || format!("residual {r}"))
                    });
                (item, r)
            })
        }
        Suite::Roots => {
            let lmax = lmax.unwrap_or(50);
            let mut out = run_items((1..=lmax).collect(), |&l| {
                let r = quadratic_eigenfunction(l, 1).map_err(|e| e.to_string()).and_then(|pair| {
                    let set = pencil_core::nodal::isolate_real_roots(&pair.psi, pencil_core::nodal::DEFAULT_ROOT_TOL).map_err(|e| e.to_string())?;
                    check(set.len() == l && set.all_simple(), || format!("{} roots, multiplicities {:?}", set.len(), set.multiplicities))
                });
                (format!("transversal zeros l={l}"), r)
            });
            out.extend(run_items((0..=lmax).collect(), |&l| {
                (format!("characteristic roots l={l}"), verify_characteristic_roots(l).map_err(|e| e.to_string()))
            }));
            out
        }
        Suite::Reconstruction => {
            let lmax = lmax.unwrap_or(15);
            let mut items = Vec::new();
            for l in 0..=lmax {
                for f in 1..=2u8 {
                    items.push((PencilOrder::Quadratic, l, f));
                }
                for f in 1..=4u8 {
                    items.push((PencilOrder::Quartic, l, f));
                }
            }
            items.retain(|&(_, l, f)| !(f == 1 && l == 0));
            run_items(items, |&(order, l, f)| {
                let r = eigenfunction(order, l, f).and_then(|p| reconstruct_xy(&p)).map_err(|e| e.to_string()).and_then(|rep| {
                    check(rep.annihilated, || "reconstruction is not annihilated".into())?;
                    check(order == PencilOrder::Quadratic || f < 3 || !rep.harmonic, || "biharmonic mode is harmonic".into())
                });
                (format!("{order} l={l} family={f}"), r)
            })
        }
        Suite::SturmLiouville => {
            let lmax = lmax.unwrap_or(10);
            let points = [int(0), rat(1, 2), int(1), int(2), int(4)];
            let items: Vec<(usize, u8)> = (0..=lmax).flat_map(|l| [(l, 1u8), (l, 2)]).filter(|&(l, f)| !(f == 1 && l == 0)).collect();
            run_items(items, |&(l, f)| {
                let r = quadratic_eigenfunction(l, f).and_then(|p| sturm_liouville_check(&p, &points)).map_err(|e| e.to_string()).and_then(|sl| {
                    let worst = sl.phi_samples.iter().map(|s| s.residual).fold(0.0, f64::max);
                    check(worst < SL_TOL, || format!("residual {worst:e}"))
                });
                (format!("l={l} family={f}"), r)
            })
        }
        Suite::AdmissibilityExamples => admissibility_examples(),
    };
    report(suite, results)
}

fn admissibility_examples() -> Vec<(String, std::result::Result<(), String>)> {
    let laplace = |alphas: &[i64], lmin, lmax| {
        CrackConfig::from_ints(alphas).and_then(|c| check_admissibility(Equation::Laplace, &c, lmin, lmax, pencil_core::nodal::DEFAULT_RANK_TOL))
    };
    let mut out = Vec::new();
    out.push((
        "(-1, 1) at l = 2 with (c, d) = (1, 0)".to_string(),
        laplace(&[-1, 1], 2, 2).map_err(|e| e.to_string()).and_then(|v| {
            check(v[0].admissible && v[0].combo_exact.as_deref() == Some(&[int(1), int(0)][..]), || format!("{:?}", v[0].combo_exact))
        }),
    ));
    out.push((
        "(0, 1) inadmissible at l = 2, 3 and admissible at l = 4".to_string(),
        laplace(&[0, 1], 2, 4).map_err(|e| e.to_string()).and_then(|v| {
            let q = v[2].combination.as_ref().map(RatPoly::monic);
            check(!v[0].admissible && !v[1].admissible && v[2].admissible, || "wrong verdicts".into())?;
            check(q == Some(RatPoly::from_ints(&[0, -1, 0, 1])), || format!("combination {q:?}"))
        }),
    ));
    out.push((
        "(-2, 0, 1) inadmissible for l <= 10".to_string(),
        laplace(&[-2, 0, 1], 3, 10).map_err(|e| e.to_string()).and_then(|v| {
            check(v.iter().all(|v| v.exact && !v.admissible), || "admissible at some order".into())
        }),
    ));
    out.push((
        "Laplace certificates are bi-Laplace certificates".to_string(),
        (|| -> std::result::Result<(), String> {
            for alphas in [&[-1, 1][..], &[0, 1], &[-1, 0, 1]] {
                let c = CrackConfig::from_ints(alphas).map_err(|e| e.to_string())?;
                let lap = check_admissibility(Equation::Laplace, &c, alphas.len(), 10, 1e-9).map_err(|e| e.to_string())?;
                let bi = check_admissibility(Equation::Bilaplace, &c, alphas.len(), 10, 1e-9).map_err(|e| e.to_string())?;
                for (l, b) in lap.iter().zip(&bi) {
                    check(!l.admissible || b.admissible, || format!("{alphas:?} at l={}", l.l))?;
                }
            }
            Ok(())
        })(),
    ));
    out
}

fn cmd_verify(ctx: &Ctx, a: &VerifyArgs) -> Result<i32> {
    let suites: Vec<Suite> = if a.all {
        Suite::value_variants().to_vec()
    } else {
        a.suite.into_iter().collect()
    };
    let reports: Vec<VerifyReport> = suites.into_iter().map(|s| verify_suite(s, a.lmax)).collect();
    let failed: usize = reports.iter().map(|r| r.failed).sum();
    emit_json(ctx, &reports)?;
    Ok(if failed == 0 { 0 } else { 1 })
}
