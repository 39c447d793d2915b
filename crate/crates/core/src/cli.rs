//! Command-line front end: `rate`, `sweep` and `verify`.
//!
//! Settings come from flags, then an optional JSON config file, then
//! defaults. Exit codes: 0 success, 1 invalid input, 2 verification failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::Zero;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::baselines::{import_external_rates, scheme1_for, ExternalRates};
use crate::combinatorics::{int, parse_rational, to_decimal, Rational};
use crate::equal_cache::equal_params;
use crate::error::{Error, Result};
use crate::simulator::{verify, DemandMode, Fault, Instance};
use crate::unequal::{rate_ueq, UnequalConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

pub const CSV_HEADER: [&str; 16] = [
    "N",
    "K",
    "L",
    "Mhat",
    "M",
    "scheme",
    "rate_rational",
    "rate_decimal",
    "scenario",
    "t_int",
    "alpha",
    "Fprime",
    "Mprime",
    "Rprime",
    "Phi",
    "gamma",
];

const DEFAULT_RESOLUTION: u64 = 64;
const CSV_DIGITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Equal,
    Proposed,
    Scheme1,
}

impl SchemeName {
    fn label(self) -> &'static str {
        match self {
            SchemeName::Equal => "equal",
            SchemeName::Proposed => "proposed",
            SchemeName::Scheme1 => "scheme1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Vary M with Mhat fixed.
    M,
    /// Vary Mhat with M fixed.
    Mhat,
    /// Vary both over the same range, keeping Mhat >= M.
    Both,
    /// Vary M with Mhat = ratio * M.
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "coded-caching",
    version,
    about = "Rates, sweeps and bit-level verification for two-level coded caching"
)]
struct Cli {
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and verification (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate and intermediates at one point.
    Rate(RateArgs),
    /// Rates over a range of cache sizes as CSV or JSON.
    Sweep(SweepArgs),
    /// Simulate placement and delivery bit by bit and check every user decodes.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default)]
struct SystemArgs {
    /// Number of files.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Number of users.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Number of users with the larger cache.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Larger cache size, as p/q or a decimal.
    #[arg(long = "Mhat")]
    mhat: Option<String>,
    /// Smaller cache size, as p/q or a decimal.
    #[arg(long = "M")]
    m: Option<String>,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    /// Grid resolution for the scheme1 optimizer (at least 8).
    #[arg(long)]
    resolution: Option<u64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Comma-separated schemes, one row each per point.
    #[arg(long, value_enum, value_delimiter = ',')]
    scheme: Vec<SchemeName>,
    #[arg(long, value_enum)]
    sweep_axis: Option<SweepAxis>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    step: Option<String>,
    /// Mhat / M for the ratio axis.
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Table of externally computed rates ("N,K,L,Mhat,M,rate" rows).
    #[arg(long)]
    external_rates: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    /// Try all N^K demand vectors instead of distinct demands only.
    #[arg(long)]
    exhaustive: bool,
    /// Seed for the random file contents.
    #[arg(long)]
    seed: Option<u64>,
    /// Flip one broadcast bit, given as TRANSMISSION:BIT (default 0:0).
    #[arg(long, num_args = 0..=1, default_missing_value = "0:0")]
    inject_fault: Option<String>,
    /// Write one line per demand vector to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Rational given either as a JSON string ("3/2", "0.75") or a JSON number.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RationalField {
    Text(String),
    Number(serde_json::Number),
}

impl RationalField {
    fn text(&self) -> String {
        match self {
            RationalField::Text(s) => s.clone(),
            RationalField::Number(n) => n.to_string(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum SchemeField {
    One(SchemeName),
    Many(Vec<SchemeName>),
}

/// Contents of a `--config` file. Keys mirror the long flag names.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "K")]
    k: Option<usize>,
    #[serde(rename = "L")]
    l: Option<usize>,
    #[serde(rename = "Mhat")]
    mhat: Option<RationalField>,
    #[serde(rename = "M")]
    m: Option<RationalField>,
    scheme: Option<SchemeField>,
    #[serde(alias = "sweep-axis")]
    sweep_axis: Option<SweepAxis>,
    from: Option<RationalField>,
    to: Option<RationalField>,
    step: Option<RationalField>,
    ratio: Option<RationalField>,
    format: Option<Format>,
    #[serde(alias = "external-rates")]
    external_rates: Option<PathBuf>,
    exhaustive: Option<bool>,
    seed: Option<u64>,
    jobs: Option<usize>,
    resolution: Option<u64>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    fn schemes(&self) -> Vec<SchemeName> {
        match &self.scheme {
            None => Vec::new(),
            Some(SchemeField::One(s)) => vec![*s],
            Some(SchemeField::Many(v)) => v.clone(),
        }
    }
}

fn rational_setting(flag: &Option<String>, config: &Option<RationalField>, name: &str) -> Result<Option<Rational>> {
    let text = flag.clone().or_else(|| config.as_ref().map(RationalField::text));
    text.map(|t| {
        parse_rational(&t).map_err(|_| Error::InvalidConfig(format!("--{name}: cannot read {t:?} as a number")))
    })
    .transpose()
}

/// One system configuration; `L` and `Mhat` are only needed by two-level schemes.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub n: usize,
    pub k: usize,
    pub l: Option<usize>,
    pub mhat: Option<Rational>,
    pub m: Rational,
}

impl Point {
    fn two_level(&self) -> Result<UnequalConfig> {
        let l = self.l.ok_or_else(|| Error::InvalidConfig("--L is required for this scheme".into()))?;
        let mhat =
            self.mhat.clone().ok_or_else(|| Error::InvalidConfig("--Mhat is required for this scheme".into()))?;
        UnequalConfig::new(self.n, self.k, l, mhat, self.m.clone())
    }
}

struct System {
    n: usize,
    k: usize,
    l: Option<usize>,
    mhat: Option<Rational>,
    m: Option<Rational>,
}

fn system_settings(args: &SystemArgs, cfg: &ConfigFile) -> Result<System> {
    let n = args.n.or(cfg.n).ok_or_else(|| Error::InvalidConfig("--N is required".into()))?;
    let k = args.k.or(cfg.k).ok_or_else(|| Error::InvalidConfig("--K is required".into()))?;
    Ok(System {
        n,
        k,
        l: args.l.or(cfg.l),
        mhat: rational_setting(&args.mhat, &cfg.mhat, "Mhat")?,
        m: rational_setting(&args.m, &cfg.m, "M")?,
    })
}

impl System {
    fn point(&self) -> Result<Point> {
        let m = self.m.clone().ok_or_else(|| Error::InvalidConfig("--M is required".into()))?;
        Ok(Point { n: self.n, k: self.k, l: self.l, mhat: self.mhat.clone(), m })
    }
}

/// One output row of a rate query or sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub point: Point,
    pub scheme: SchemeName,
    pub rate: Rational,
    pub scenario: Option<u8>,
    pub t: Option<Rational>,
    pub t_int: Option<usize>,
    pub alpha: Option<Rational>,
    pub fprime: Option<Rational>,
    pub mprime: Option<Rational>,
    pub rprime: Option<Rational>,
    pub phi: Option<Rational>,
    pub gamma: Option<Rational>,
    pub no_pool: bool,
    pub beta: Option<String>,
}

impl RateRow {
    fn bare(point: &Point, scheme: SchemeName, rate: Rational) -> Self {
        RateRow {
            point: point.clone(),
            scheme,
            rate,
            scenario: None,
            t: None,
            t_int: None,
            alpha: None,
            fprime: None,
            mprime: None,
            rprime: None,
            phi: None,
            gamma: None,
            no_pool: false,
            beta: None,
        }
    }

    fn fields(&self) -> Vec<Option<String>> {
        let s = |q: &Option<Rational>| q.as_ref().map(ToString::to_string);
        vec![
            Some(self.point.n.to_string()),
            Some(self.point.k.to_string()),
            self.point.l.map(|l| l.to_string()),
            s(&self.point.mhat),
            Some(self.point.m.to_string()),
            Some(self.scheme.label().to_string()),
            Some(self.rate.to_string()),
            Some(to_decimal(&self.rate, CSV_DIGITS)),
            self.scenario.map(|x| x.to_string()),
            self.t_int.map(|x| x.to_string()),
            s(&self.alpha),
            s(&self.fprime),
            s(&self.mprime),
            s(&self.rprime),
            s(&self.phi),
            s(&self.gamma),
        ]
    }
}

/// Rate of `scheme` at `point` with its intermediates.
pub fn compute_row(point: &Point, scheme: SchemeName, resolution: u64) -> Result<RateRow> {
    match scheme {
        SchemeName::Equal => {
            let p = equal_params(point.n, point.k, &point.m)?;
            let mut row = RateRow::bare(point, scheme, p.rate());
            row.t = Some(p.t.clone());
            row.t_int = Some(p.t_int);
            row.alpha = Some(p.alpha.clone());
            Ok(row)
        }
        SchemeName::Proposed => {
            let cfg = point.two_level()?;
            let r = rate_ueq(&cfg)?;
            let p = r.params;
            let mut row = RateRow::bare(point, scheme, r.rate);
            row.scenario = Some(p.scenario.number());
            row.t = Some(p.base.t.clone());
            row.t_int = Some(p.base.t_int);
            row.alpha = Some(p.base.alpha.clone());
            row.fprime = Some(p.fprime);
            row.mprime = p.mprime;
            row.rprime = Some(p.rprime);
            row.phi = p.phi;
            row.gamma = p.gamma;
            row.no_pool = p.no_pool;
            Ok(row)
        }
        SchemeName::Scheme1 => {
            let cfg = point.two_level()?;
            let best = scheme1_for(&cfg, resolution)?;
            let mut row = RateRow::bare(point, scheme, best.rate);
            row.beta = Some(best.beta.to_string());
            Ok(row)
        }
    }
}

/// Cache-size values `from, from + step, ...` up to and including `to`.
pub fn axis_values(from: &Rational, to: &Rational, step: &Rational) -> Result<Vec<Rational>> {
    if *step <= Rational::zero() {
        return Err(Error::InvalidConfig("--step must be positive".into()));
    }
    let mut values = Vec::new();
    let mut v = from.clone();
    while v <= *to {
        values.push(v.clone());
        v += step;
    }
    Ok(values)
}

/// Fully resolved sweep request.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub n: usize,
    pub k: usize,
    pub l: Option<usize>,
    pub fixed_mhat: Option<Rational>,
    pub fixed_m: Option<Rational>,
    pub axis: SweepAxis,
    pub from: Rational,
    pub to: Rational,
    pub step: Rational,
    pub ratio: Option<Rational>,
    pub schemes: Vec<SchemeName>,
    pub format: Format,
    pub resolution: u64,
}

impl SweepSpec {
    /// Grid points in output order. For `both`, `M` is the outer loop.
    pub fn points(&self) -> Result<Vec<Point>> {
        let nq = int(self.n as i64);
        if self.from < Rational::zero() || self.to > nq {
            return Err(Error::InvalidConfig(format!("sweep range must lie within [0, {}]", self.n)));
        }
        let values = axis_values(&self.from, &self.to, &self.step)?;
        let point = |mhat: Option<Rational>, m: Rational| Point { n: self.n, k: self.k, l: self.l, mhat, m };
        let need = |value: &Option<Rational>, flag: &str| {
            value.clone().ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required for this sweep axis")))
        };
        let points: Vec<Point> = match self.axis {
            SweepAxis::M => values.into_iter().map(|m| point(self.fixed_mhat.clone(), m)).collect(),
            SweepAxis::Mhat => {
                let m = need(&self.fixed_m, "M")?;
                values.into_iter().map(|mh| point(Some(mh), m.clone())).collect()
            }
            SweepAxis::Both => values
                .iter()
                .flat_map(|m| values.iter().filter(move |mh| *mh >= m).map(move |mh| (mh.clone(), m.clone())))
                .map(|(mh, m)| point(Some(mh), m))
                .collect(),
            SweepAxis::Ratio => {
                let ratio = need(&self.ratio, "ratio")?;
                if ratio < Rational::from_integer(1.into()) {
                    return Err(Error::InvalidConfig("--ratio must be at least 1".into()));
                }
                values.into_iter().map(|m| point(Some(&m * &ratio), m)).collect()
            }
        };
        if points.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        for p in &points {
            if let Some(mh) = &p.mhat {
                if *mh < p.m {
                    return Err(Error::InvalidConfig(format!("Mhat = {mh} is below M = {} in the sweep", p.m)));
                }
                if *mh > nq {
                    return Err(Error::InvalidConfig(format!("Mhat = {mh} exceeds N = {} in the sweep", self.n)));
                }
            }
        }
        Ok(points)
    }

    /// Rows in deterministic order: points in grid order, schemes in the order requested.
    pub fn rows(&self) -> Result<Vec<RateRow>> {
        let points = self.points()?;
        let jobs: Vec<(usize, SchemeName)> =
            (0..points.len()).flat_map(|i| self.schemes.iter().map(move |s| (i, *s))).collect();
        jobs.par_iter().map(|(i, s)| compute_row(&points[*i], *s, self.resolution)).collect()
    }
}

/// Serializes rows; `external` holds one optional value per row.
pub fn render_rows(rows: &[RateRow], external: Option<&[Option<Rational>]>, format: Format) -> Result<String> {
    let ratio = |i: usize| -> Option<Rational> {
        let ext = external?.get(i)?.as_ref()?;
        (!ext.is_zero()).then(|| &rows[i].rate / ext)
    };
    match format {
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            let mut header: Vec<&str> = CSV_HEADER.to_vec();
            if external.is_some() {
                header.extend(["external", "ratio"]);
            }
            let io = |e: csv::Error| Error::Io(e.to_string());
            writer.write_record(&header).map_err(io)?;
            for (i, row) in rows.iter().enumerate() {
                let mut fields: Vec<String> = row.fields().into_iter().map(Option::unwrap_or_default).collect();
                if let Some(ext) = external {
                    fields.push(ext[i].as_ref().map(ToString::to_string).unwrap_or_default());
                    fields.push(ratio(i).map(|r| to_decimal(&r, CSV_DIGITS)).unwrap_or_default());
                }
                writer.write_record(&fields).map_err(io)?;
            }
            let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
        Format::Json => {
            let objects: Vec<Value> = rows
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let mut obj = Map::new();
                    for (key, value) in CSV_HEADER.iter().zip(row.fields()) {
                        let v = match (*key, value) {
                            (_, None) => Value::Null,
                            ("N" | "K" | "L" | "scenario" | "t_int", Some(text)) => {
                                json!(text.parse::<u64>().expect("integer field"))
                            }
                            (_, Some(text)) => Value::String(text),
                        };
                        obj.insert(key.to_string(), v);
                    }
                    if let Some(ext) = external {
                        obj.insert("external".into(), ext[i].as_ref().map_or(Value::Null, |e| json!(e.to_string())));
                        obj.insert("ratio".into(), ratio(i).map_or(Value::Null, |r| json!(to_decimal(&r, CSV_DIGITS))));
                    }
                    Value::Object(obj)
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&objects).map_err(|e| Error::Io(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
    }
}

enum Failure {
    Invalid(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs the tool with explicit arguments and output streams; returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INVALID
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
        Err(Failure::Verification) => EXIT_VERIFY_FAILED,
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let jobs = cli.jobs.or(cfg.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("--jobs: {e}")))?;
    match &cli.command {
        Command::Rate(args) => cmd_rate(args, &cfg, out),
        Command::Sweep(args) => cmd_sweep(args, &cfg, &pool, out, err),
        Command::Verify(args) => cmd_verify(args, &cfg, &pool, out, err),
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Invalid(Error::Io(e.to_string()))
}

fn cmd_rate(args: &RateArgs, cfg: &ConfigFile, out: &mut dyn Write) -> CmdResult {
    let point = system_settings(&args.system, cfg)?.point()?;
    let scheme = args.scheme.or_else(|| cfg.schemes().first().copied()).unwrap_or(SchemeName::Proposed);
    let resolution = args.resolution.or(cfg.resolution).unwrap_or(DEFAULT_RESOLUTION);
    let row = compute_row(&point, scheme, resolution)?;

    let mut lines = vec![format!("{} ({})", row.rate, to_decimal(&row.rate, 4)), format!("scheme: {}", scheme.label())];
    let mut add = |name: &str, value: Option<String>| {
        if let Some(v) = value {
            lines.push(format!("{name}: {v}"));
        }
    };
    let s = |q: &Option<Rational>| q.as_ref().map(ToString::to_string);
    add("scenario", row.scenario.map(|x| x.to_string()));
    add("t", s(&row.t));
    add("t_int", row.t_int.map(|x| x.to_string()));
    add("alpha", s(&row.alpha));
    add("Fprime", s(&row.fprime));
    add("Mprime", s(&row.mprime));
    add("Rprime", s(&row.rprime));
    add("Phi", s(&row.phi));
    add("gamma", s(&row.gamma));
    if row.no_pool {
        add("note", Some("no subfiles are cached only by the larger caches; the extra cache is unused".into()));
    }
    add("beta", row.beta.clone());
    if scheme == SchemeName::Scheme1 {
        add("resolution", Some(resolution.to_string()));
    }
    for line in lines {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

fn cmd_sweep(
    args: &SweepArgs,
    cfg: &ConfigFile,
    pool: &rayon::ThreadPool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let system = system_settings(&args.system, cfg)?;
    let required = |flag: &Option<String>, field: &Option<RationalField>, name: &str| -> Result<Rational> {
        rational_setting(flag, field, name)?.ok_or_else(|| Error::InvalidConfig(format!("--{name} is required")))
    };
    let mut schemes = args.scheme.clone();
    if schemes.is_empty() {
        schemes = cfg.schemes();
    }
    if schemes.is_empty() {
        schemes = vec![SchemeName::Proposed];
    }
    let spec = SweepSpec {
        n: system.n,
        k: system.k,
        l: system.l,
        fixed_mhat: system.mhat.clone(),
        fixed_m: system.m.clone(),
        axis: args.sweep_axis.or(cfg.sweep_axis).unwrap_or(SweepAxis::M),
        from: required(&args.from, &cfg.from, "from")?,
        to: required(&args.to, &cfg.to, "to")?,
        step: required(&args.step, &cfg.step, "step")?,
        ratio: rational_setting(&args.ratio, &cfg.ratio, "ratio")?,
        schemes,
        format: args.format.or(cfg.format).unwrap_or(Format::Csv),
        resolution: args.resolution.or(cfg.resolution).unwrap_or(DEFAULT_RESOLUTION),
    };
    let rows = pool.install(|| spec.rows())?;

    let external_path = args.external_rates.clone().or_else(|| cfg.external_rates.clone());
    let external = match external_path {
        Some(path) => {
            let table: ExternalRates = import_external_rates(&path)?;
            let points: Vec<UnequalConfig> = rows.iter().filter_map(|r| r.point.two_level().ok()).collect();
            table.attach(&points);
            let values: Vec<Option<Rational>> =
                rows.iter().map(|r| r.point.two_level().ok().and_then(|c| table.get(&c).cloned())).collect();
            Some(values)
        }
        None => None,
    };

    let text = render_rows(&rows, external.as_deref(), spec.format)?;
    out.write_all(text.as_bytes()).map_err(io_err)?;

    if let Some(ext) = &external {
        let best = rows
            .iter()
            .zip(ext)
            .filter(|(r, e)| r.scheme == SchemeName::Proposed && e.as_ref().is_some_and(|e| !e.is_zero()))
            .map(|(r, e)| (&r.rate / e.as_ref().expect("filtered"), r))
            .max_by(|a, b| a.0.cmp(&b.0));
        if let Some((ratio, row)) = best {
            writeln!(
                err,
                "max ratio proposed/external: {} ({}) at Mhat={} M={}",
                ratio,
                to_decimal(&ratio, 6),
                row.point.mhat.as_ref().map(ToString::to_string).unwrap_or_default(),
                row.point.m
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

fn parse_fault(text: &str) -> Result<Fault> {
    let bad = || Error::InvalidConfig(format!("--inject-fault expects TRANSMISSION:BIT, got {text:?}"));
    let (t, b) = text.split_once(':').ok_or_else(bad)?;
    Ok(Fault { transmission: t.trim().parse().map_err(|_| bad())?, bit: b.trim().parse().map_err(|_| bad())? })
}

fn cmd_verify(
    args: &VerifyArgs,
    cfg: &ConfigFile,
    pool: &rayon::ThreadPool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let point = system_settings(&args.system, cfg)?.point()?;
    let scheme = args.scheme.or_else(|| cfg.schemes().first().copied()).unwrap_or(SchemeName::Proposed);
    let instance = match scheme {
        SchemeName::Equal => Instance::Equal { n: point.n, k: point.k, m: point.m.clone() },
        SchemeName::Proposed => Instance::Proposed(point.two_level()?),
        SchemeName::Scheme1 => {
            return Err(Error::InvalidConfig(
                "scheme1 is evaluated from its rate expression only; verify equal or proposed".into(),
            )
            .into())
        }
    };
    let mode =
        if args.exhaustive || cfg.exhaustive.unwrap_or(false) { DemandMode::Exhaustive } else { DemandMode::Distinct };
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let fault = args.inject_fault.as_deref().map(parse_fault).transpose()?;

    let summary = pool.install(|| verify(&instance, mode, seed, fault))?;
    let total = summary.reports.len();
    writeln!(out, "scheme: {}", scheme.label()).map_err(io_err)?;
    writeln!(out, "demands: {}/{} pass", summary.passed(), total).map_err(io_err)?;
    writeln!(out, "load: {} (formula {})", summary.worst_load, summary.formula_rate).map_err(io_err)?;
    writeln!(out, "F_bits: {}", summary.f_bits).map_err(io_err)?;

    if let Some(path) = &args.report {
        let mut text = String::new();
        for r in &summary.reports {
            text.push_str(&r.to_record(summary.f_bits));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }

    match summary.first_failure() {
        Some(report) => {
            writeln!(err, "verification failed; first failing demand:\n{}", report.to_record(summary.f_bits))
                .map_err(io_err)?;
            Err(Failure::Verification)
        }
        None => {
            if fault.is_some() {
                writeln!(err, "warning: the injected fault did not land on a transmitted bit").map_err(io_err)?;
            }
            Ok(())
        }
    }
}
