//! Run configuration: flags layered over an optional flat `key = value` file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nct_core::algebra::RationalTheta;
use nct_core::arithmetic::{farey, make_weyl_context, WeylContext};

use crate::CliError;

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Flat `key = value` file; flags given on the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Rational parameter M/N (repeatable).
    #[arg(long, value_name = "M/N")]
    pub theta: Vec<String>,
    /// Use every reduced fraction in [0, 1] with denominator at most D.
    #[arg(long, value_name = "D")]
    pub farey: Option<i64>,
    /// Twist q,r of the Weyl representation (repeatable).
    #[arg(long, value_name = "q,r", allow_hyphen_values = true)]
    pub rep: Vec<String>,
    /// Grid points per direction of the Brillouin torus.
    #[arg(long, value_name = "G")]
    pub grid: Option<usize>,
    /// Minimal band-edge separation counted as a gap.
    #[arg(long, value_name = "X")]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Output format (repeatable).
    #[arg(long, value_enum)]
    pub format: Vec<Format>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub thetas: Vec<RationalTheta>,
    pub reps: Vec<(i64, i64)>,
    pub grid: usize,
    pub tol: f64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Every (θ, q, r) triple, validated up front.
    pub fn contexts(&self) -> Result<Vec<WeylContext>, CliError> {
        let mut out = Vec::new();
        for theta in &self.thetas {
            for &(q, r) in &self.reps {
                let c = make_weyl_context(*theta, q, r)
                    .map_err(|e| CliError::Config(format!("theta {theta}, rep ({q},{r}): {e}")))?;
                out.push(c);
            }
        }
        Ok(out)
    }
}

#[derive(Default)]
struct FileValues {
    theta: Vec<String>,
    farey: Option<i64>,
    rep: Vec<String>,
    grid: Option<usize>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    format: Vec<Format>,
}

fn parse_file(path: &Path) -> Result<FileValues, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut v = FileValues::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Config(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("expected key = value, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "theta" => v.theta.push(value.to_string()),
            "farey" => v.farey = Some(value.parse().map_err(|_| bad(format!("farey: not an integer: {value}")))?),
            "rep" => v.rep.push(value.to_string()),
            "grid" => v.grid = Some(value.parse().map_err(|_| bad(format!("grid: not a positive integer: {value}")))?),
            "tol" => v.tol = Some(value.parse().map_err(|_| bad(format!("tol: not a number: {value}")))?),
            "out" => v.out = Some(PathBuf::from(value)),
            "format" => v.format.push(Format::parse(value).ok_or_else(|| bad(format!("unknown format {value}")))?),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    Ok(v)
}

fn parse_rep(s: &str) -> Result<(i64, i64), CliError> {
    let bad = || CliError::Config(format!("rep must be q,r with integers, got `{s}`"));
    let (q, r) = s.split_once(',').ok_or_else(bad)?;
    Ok((q.trim().parse().map_err(|_| bad())?, r.trim().parse().map_err(|_| bad())?))
}

/// Merge flags over the file and validate everything that does not need computation.
pub fn resolve(args: &CommonArgs, default_format: Format) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => parse_file(path)?,
        None => FileValues::default(),
    };
    let pick = |flag: &Vec<String>, file: &Vec<String>| if flag.is_empty() { file.clone() } else { flag.clone() };

    let theta_strings = pick(&args.theta, &file.theta);
    let farey_bound = if args.theta.is_empty() { args.farey.or(file.farey) } else { args.farey };
    let mut thetas = Vec::new();
    for s in &theta_strings {
        thetas.push(s.parse::<RationalTheta>().map_err(|e| CliError::Config(format!("theta `{s}`: {e}")))?);
    }
    if let Some(d) = farey_bound {
        if d < 1 {
            return Err(CliError::Config(format!("farey bound must be at least 1, got {d}")));
        }
        thetas.extend(farey(d));
    }
    let mut seen = std::collections::BTreeSet::new();
    thetas.retain(|t| seen.insert(*t));
    if thetas.is_empty() {
        return Err(CliError::Config("no theta given (use --theta or --farey)".into()));
    }

    let rep_strings = pick(&args.rep, &file.rep);
    let mut reps = Vec::new();
    for s in &rep_strings {
        reps.push(parse_rep(s)?);
    }
    if reps.is_empty() {
        reps.push((1, 0));
    }

    let grid = args.grid.or(file.grid).unwrap_or(DEFAULT_GRID);
    if grid == 0 {
        return Err(CliError::Config("grid must be positive".into()));
    }
    let tol = args.tol.or(file.tol).unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Config(format!("tol must be a positive number, got {tol}")));
    }
    let out = args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("."));
    let mut formats = if args.format.is_empty() { file.format } else { args.format.clone() };
    if formats.is_empty() {
        formats.push(default_format);
    }
    formats.sort();
    formats.dedup();

    let cfg = RunConfig { thetas, reps, grid, tol, out, formats };
    cfg.contexts()?;
    Ok(cfg)
}

/// Rayon pool size from `NCT_THREADS`; unset means available parallelism.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NCT_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("NCT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}
