//! Command-line front end: `run`, `compare` and `stability`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use ddsplit::analysis::{transition_norm, DENSE_LIMIT};
use ddsplit::experiment::{build_setup, localization, run_on_setup, ExperimentConfig, Problem};
use ddsplit::operators::laplacian_max_eigenvalue;
use ddsplit::{Axis, Error, OverlapVariant, SchemeConfig, SchemeKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Norms above `1 + NORM_SLACK` are flagged.
pub const NORM_SLACK: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "ddsplit", version, about = "Domain decomposition time-stepping experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scheme and write `<out>_eps.csv` and `<out>_field.csv`.
    Run(RunArgs),
    /// Run several schemes and overlaps on one problem and summarize.
    Compare(CompareArgs),
    /// Tabulate dense transition norms over tau and sigma.
    Stability(StabilityArgs),
}

/// Problem, grid, time and decomposition flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// heat or convdiff
    #[arg(long, default_value = "heat")]
    pub problem: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long = "N1", default_value_t = 32)]
    pub cells1: usize,
    #[arg(long = "N2", default_value_t = 32)]
    pub cells2: usize,
    #[arg(long = "T", default_value_t = 0.01)]
    pub t_final: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 2)]
    pub n1: u32,
    #[arg(long, default_value_t = 1)]
    pub n2: u32,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub v1: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub v2: f64,
    /// Decomposition axis: 1 or 2
    #[arg(long, default_value_t = 1)]
    pub axis: u8,
    #[arg(long, default_value_t = 4)]
    pub strips: usize,
    /// Number of groups, i.e. split operators
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// integer, half or wide3h
    #[arg(long, default_value = "integer")]
    pub overlap: String,
    /// Band dilation in cells for the localization statistics
    #[arg(long, default_value_t = 2)]
    pub margin: usize,
    /// Vector-scheme recombination weights, comma separated
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value = "weighted")]
    pub scheme: String,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output path prefix
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Schemes to compare, comma separated
    #[arg(long, value_delimiter = ',', default_value = "weighted,regadd,regmult,vector")]
    pub schemes: Vec<String>,
    /// Overlap variants for the decomposed schemes, comma separated
    #[arg(long, value_delimiter = ',')]
    pub overlaps: Option<Vec<String>>,
    /// Also compute the dense transition norm of every row
    #[arg(long)]
    pub with_norm: bool,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[arg(long, value_delimiter = ',', default_value = "weighted,regadd,regmult")]
    pub schemes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-1,10")]
    pub taus: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    pub sigmas: Vec<f64>,
    /// Extra step sizes given as multiples of 1 / lambda_max
    #[arg(long, value_delimiter = ',')]
    pub tau_over_lmax: Option<Vec<f64>>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

type CliResult<V> = Result<V, CliError>;

fn parse<V: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<V> {
    s.parse().map_err(CliError::from)
}

impl CommonArgs {
    pub fn experiment(&self, scheme: SchemeKind) -> CliResult<ExperimentConfig<f64>> {
        let axis = match self.axis {
            1 => Axis::X1,
            2 => Axis::X2,
            other => return Err(CliError::Config(format!("axis must be 1 or 2, got {other}"))),
        };
        let cfg = ExperimentConfig {
            problem: parse::<Problem>(&self.problem)?,
            n1: self.n1,
            n2: self.n2,
            v1: self.v1,
            v2: self.v2,
            cells1: self.cells1,
            cells2: self.cells2,
            t_final: self.t_final,
            steps: self.steps,
            scheme,
            sigma: self.sigma,
            axis,
            strips: self.strips,
            groups: self.p,
            overlap: parse::<OverlapVariant>(&self.overlap)?,
            margin: self.margin,
            weights: if scheme == SchemeKind::VectorAdditive {
                self.weights.clone()
            } else {
                None
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

/// Final error and band statistics of one run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub scheme: SchemeKind,
    pub overlap: Option<OverlapVariant>,
    pub sigma: f64,
    pub final_eps: f64,
    pub inside_max: f64,
    pub outside_max: f64,
    pub exchange_volume: usize,
    pub norm: Option<f64>,
}

fn run_one(cfg: &ExperimentConfig<f64>, prefix: &Path, with_norm: bool) -> CliResult<RunSummary> {
    let setup = build_setup(cfg)?;
    let report = run_on_setup(cfg, &setup)?;
    let mut eps = create(&with_suffix(prefix, "_eps.csv"))?;
    report.write_eps_csv(&mut eps)?;
    eps.flush()?;
    let mut field = create(&with_suffix(prefix, "_field.csv"))?;
    report.write_field_csv(&mut field)?;
    field.flush()?;
    let stats = localization(cfg, &setup, &report)?;
    let norm = if with_norm {
        Some(transition_norm(&cfg.scheme_config(), setup.full(), setup.parts())?)
    } else {
        None
    };
    Ok(RunSummary {
        scheme: cfg.scheme,
        overlap: cfg.scheme.is_decomposed().then_some(cfg.overlap),
        sigma: cfg.sigma,
        final_eps: report.final_error(),
        inside_max: stats.inside_max,
        outside_max: stats.outside_max,
        exchange_volume: setup.exchange_volume(),
        norm,
    })
}

pub fn cmd_run(args: &RunArgs) -> CliResult<RunSummary> {
    let cfg = args.common.experiment(parse(&args.scheme)?)?;
    let summary = run_one(&cfg, &args.out, false)?;
    println!(
        "{} eps(T) = {:.6e}  band max {:.3e}  outside max {:.3e}",
        summary.scheme, summary.final_eps, summary.inside_max, summary.outside_max
    );
    Ok(summary)
}

fn row_label(s: &RunSummary) -> String {
    match s.overlap {
        Some(o) => format!("{}_{}", s.scheme, o.name()),
        None => s.scheme.to_string(),
    }
}

/// Every scheme crossed with every overlap; schemes without splitting appear
/// once. Members run concurrently, then rows are sorted by `eps(T)`.
pub fn cmd_compare(args: &CompareArgs) -> CliResult<Vec<RunSummary>> {
    let overlaps: Vec<OverlapVariant> = match &args.overlaps {
        Some(list) => list.iter().map(|s| parse(s)).collect::<CliResult<_>>()?,
        None => vec![parse(&args.common.overlap)?],
    };
    let mut configs = Vec::new();
    for name in &args.schemes {
        let kind: SchemeKind = parse(name)?;
        if kind.is_decomposed() {
            for &o in &overlaps {
                let mut c = args.common.experiment(kind)?;
                c.overlap = o;
                c.validate()?;
                configs.push(c);
            }
        } else {
            configs.push(args.common.experiment(kind)?);
        }
    }
    if configs.is_empty() {
        return Err(CliError::Config("no schemes to compare".into()));
    }
    if let Some(bad) = configs.iter().find(|c| !c.compatible_with(&configs[0])) {
        return Err(CliError::Config(format!("{} does not share grid and time parameters", bad.scheme)));
    }
    let mut rows: Vec<RunSummary> = configs
        .par_iter()
        .map(|c| {
            let label = match c.scheme.is_decomposed() {
                true => format!("_{}_{}", c.scheme, c.overlap.name()),
                false => format!("_{}", c.scheme),
            };
            run_one(c, &with_suffix(&args.out, &label), args.with_norm)
        })
        .collect::<CliResult<_>>()?;
    rows.sort_by(|a, b| a.final_eps.total_cmp(&b.final_eps).then_with(|| row_label(a).cmp(&row_label(b))));

    let mut out = create(&with_suffix(&args.out, "_summary.csv"))?;
    writeln!(out, "scheme,overlap,sigma,eps_T,transition_norm,exchange_volume,band_max,outside_max")?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{:.16e},{},{},{:.16e},{:.16e}",
            r.scheme,
            r.overlap.map_or("none", |o| o.name()),
            r.sigma,
            r.final_eps,
            r.norm.map_or(String::new(), |n| format!("{n:.16e}")),
            r.exchange_volume,
            r.inside_max,
            r.outside_max
        )?;
    }
    out.flush()?;
    for r in &rows {
        println!("{:<18} eps(T) = {:.6e}  exchange {}", row_label(r), r.final_eps, r.exchange_volume);
    }
    Ok(rows)
}

/// One row of the stability table.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityRow {
    pub scheme: SchemeKind,
    pub sigma: f64,
    pub tau: f64,
    pub norm: f64,
    pub flagged: bool,
}

pub fn cmd_stability(args: &StabilityArgs) -> CliResult<Vec<StabilityRow>> {
    let kinds: Vec<SchemeKind> = args.schemes.iter().map(|s| parse(s)).collect::<CliResult<_>>()?;
    let base = args.common.experiment(SchemeKind::RegAdditive)?;
    let setup = build_setup(&base)?;
    let dim = setup.grid.interior_count() * if kinds.contains(&SchemeKind::VectorAdditive) { base.groups } else { 1 };
    if dim > DENSE_LIMIT {
        return Err(CliError::Config(format!(
            "state dimension {dim} exceeds the dense limit {DENSE_LIMIT}"
        )));
    }
    let mut taus = args.taus.clone();
    if let Some(mults) = &args.tau_over_lmax {
        let lmax = laplacian_max_eigenvalue(&setup.grid);
        taus.extend(mults.iter().map(|m| m / lmax));
    }
    let mut jobs = Vec::new();
    for &kind in &kinds {
        let sigmas: &[f64] = if kind.uses_sigma() { &args.sigmas } else { &[1.0] };
        for &sigma in sigmas {
            for &tau in &taus {
                let cfg = SchemeConfig::new(kind, tau, 1).with_sigma(sigma);
                cfg.validate(setup.parts().len())?;
                jobs.push(cfg);
            }
        }
    }
    let rows: Vec<StabilityRow> = jobs
        .iter()
        .map(|cfg| {
            let norm = transition_norm(cfg, setup.full(), setup.parts())?;
            Ok(StabilityRow {
                scheme: cfg.kind,
                sigma: cfg.sigma,
                tau: cfg.tau,
                norm,
                flagged: norm > 1.0 + NORM_SLACK,
            })
        })
        .collect::<CliResult<_>>()?;
    let mut out = create(&with_suffix(&args.out, "_stability.csv"))?;
    writeln!(out, "scheme,sigma,tau,norm,flagged")?;
    for r in &rows {
        writeln!(out, "{},{},{:e},{:.16e},{}", r.scheme, r.sigma, r.tau, r.norm, r.flagged)?;
    }
    out.flush()?;
    for r in &rows {
        let mark = if r.flagged { "  > 1 (flagged)" } else { "" };
        println!("{:<9} sigma={:<5} tau={:<10.3e} norm={:.12}{mark}", r.scheme, r.sigma, r.tau, r.norm);
    }
    Ok(rows)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Compare(a) => cmd_compare(a).map(|_| ()),
        Command::Stability(a) => cmd_stability(a).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
