//! Command-line interface.
//!
//! Exit codes: 0 on success, 2 for bad flags or invalid input, 3 when an
//! estimator fails.

use crate::error::{Error, Result};
use crate::estimate::{estimate, EstimateOptions, EstimateResult, Method};
use crate::fixtures;
use crate::io::{read_summaries, RowError, SummaryRow};
use crate::meta::derive_and_pool_with;
use crate::sim::{self, DistributionSet, GridConfig, SimCell, SimSettings};
use crate::summaries::{QuantileSummary, Scenario, ShiftPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ESTIMATION: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "QM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "qmest",
    version,
    about = "Estimate sample means and SDs from reported quantiles, run simulation grids, and pool studies",
    after_help = "Set QM_THREADS to cap the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one study's mean and SD; prints JSON.
    Estimate(EstimateArgs),
    /// Estimate every row of a summaries CSV.
    Batch(BatchArgs),
    /// Run simulation cells and print average relative errors as CSV.
    Simulate(SimulateArgs),
    /// Estimate every study and pool the means by random-effects meta-analysis; prints JSON.
    Pool(PoolArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    S1,
    S2,
    S3,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::S1 => Scenario::S1,
            ScenarioArg::S2 => Scenario::S2,
            ScenarioArg::S3 => Scenario::S3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MethodArg {
    LuoWan,
    Qe,
    Bc,
    Abc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::LuoWan => Method::LuoWan,
            MethodArg::Qe => Method::Qe,
            MethodArg::Bc => Method::Bc,
            MethodArg::Abc => Method::Abc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BatchMethodArg {
    LuoWan,
    Qe,
    Bc,
    Abc,
    All,
}

/// When the positivity shift is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "kebab-case")]
pub enum ShiftMode {
    /// Only when the lowest reported quantile is zero or negative.
    WhenNonPositive,
    /// To every summary.
    Always,
    /// Never.
    Never,
}

fn policy(mode: ShiftMode, c: f64) -> ShiftPolicy {
    match mode {
        ShiftMode::WhenNonPositive => ShiftPolicy::WhenNonPositive(c),
        ShiftMode::Always => ShiftPolicy::Always(c),
        ShiftMode::Never => ShiftPolicy::None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Constant added to the quantiles before estimation
    #[arg(long, default_value_t = 0.5)]
    pub shift: f64,
    /// Seed for the Monte Carlo steps of bc and abc
    #[arg(long, default_value_t = crate::DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo draws for the bc back-transform
    #[arg(long, default_value_t = crate::bc::DEFAULT_MC_DRAWS)]
    pub mc_draws: usize,
    /// Prior draws per candidate family for abc
    #[arg(long, default_value_t = crate::abc::DEFAULT_N_ITER)]
    pub abc_iter: usize,
    /// Share of pooled abc draws that is accepted
    #[arg(long, default_value_t = crate::abc::DEFAULT_ACCEPT_FRACTION)]
    pub abc_accept: f64,
}

impl EstimatorArgs {
    fn options(&self, mode: ShiftMode) -> EstimateOptions {
        EstimateOptions {
            shift: policy(mode, self.shift),
            seed: self.seed,
            mc_draws: self.mc_draws,
            abc_n_iter: self.abc_iter,
            abc_accept_fraction: self.abc_accept,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct InputArgs {
    /// Summaries CSV with columns study_id,n,q_min,q1,q2,q3,q_max
    #[arg(long, group = "source")]
    pub input: Option<PathBuf>,
    /// Use a bundled dataset instead of --input
    #[arg(long, group = "source", value_parser = fixtures::NAMES)]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Sample minimum (s1, s3)
    #[arg(long, allow_negative_numbers = true)]
    pub qmin: Option<f64>,
    /// First quartile (s2, s3)
    #[arg(long, allow_negative_numbers = true)]
    pub q1: Option<f64>,
    /// Median
    #[arg(long, allow_negative_numbers = true)]
    pub q2: f64,
    /// Third quartile (s2, s3)
    #[arg(long, allow_negative_numbers = true)]
    pub q3: Option<f64>,
    /// Sample maximum (s1, s3)
    #[arg(long, allow_negative_numbers = true)]
    pub qmax: Option<f64>,
    /// Sample size
    #[arg(long)]
    pub n: u64,
    /// When to add the shift
    #[arg(long, value_enum, default_value_t = ShiftMode::WhenNonPositive)]
    pub shift_mode: ShiftMode,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub source: InputArgs,
    #[arg(long, value_enum)]
    pub method: BatchMethodArg,
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Write here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Exit nonzero if any row is malformed or fails to estimate
    #[arg(long)]
    pub strict: bool,
    /// When to add the shift
    #[arg(long, value_enum, default_value_t = ShiftMode::WhenNonPositive)]
    pub shift_mode: ShiftMode,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetArg {
    Primary,
    Sensitivity,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Distribution set of the full grid
    #[arg(long, value_enum, default_value_t = SetArg::Primary)]
    pub set: SetArg,
    /// Run only this cell, as DIST,SCENARIO,N (e.g. lognormal:5:1,s1,1000); repeatable
    #[arg(long)]
    pub cell: Vec<String>,
    /// Repetitions per cell
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Comma-separated estimators
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "luo_wan,qe,bc"
    )]
    pub methods: Vec<MethodArg>,
    /// Comma-separated sample sizes of the grid
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "25,50,75,100,150,200,250,300,350,400,450,500,550,600,650,700,750,800,850,900,950,1000"
    )]
    pub n_list: Vec<usize>,
    /// Write here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// When to add the shift
    #[arg(long, value_enum, default_value_t = ShiftMode::WhenNonPositive)]
    pub shift_mode: ShiftMode,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PoolArgs {
    #[command(flatten)]
    pub source: InputArgs,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Write here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Fail if any study cannot be estimated instead of leaving it out
    #[arg(long)]
    pub strict: bool,
    /// When to add the shift
    #[arg(long, value_enum, default_value_t = ShiftMode::Always)]
    pub shift_mode: ShiftMode,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

/// Map an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EstimationFailed(_) | Error::Degenerate(_) | Error::FitInfeasible { .. } => {
            EXIT_ESTIMATION
        }
        _ => EXIT_INVALID,
    }
}

/// Parse `args` (program name first) and run them, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(code) => code,
        // A closed pipe downstream (e.g. `| head`) is not our failure.
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() {
    let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    else {
        return;
    };
    if n > 0 {
        // Fails only if a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Pool(a) => cmd_pool(a),
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<i32> {
    let scenario: Scenario = a.scenario.into();
    let summary = QuantileSummary {
        scenario,
        q_min: a.qmin,
        q1: a.q1,
        q2: a.q2,
        q3: a.q3,
        q_max: a.qmax,
        n: a.n,
    };
    let extra: Vec<&str> = [
        ("--qmin", a.qmin),
        ("--q1", a.q1),
        ("--q3", a.q3),
        ("--qmax", a.qmax),
    ]
    .into_iter()
    .filter(|(_, v)| v.is_some())
    .map(|(name, _)| name)
    .filter(|name| {
        let used = summary.restrict(scenario);
        match *name {
            "--qmin" => used.q_min.is_none(),
            "--q1" => used.q1.is_none(),
            "--q3" => used.q3.is_none(),
            _ => used.q_max.is_none(),
        }
    })
    .collect();
    if !extra.is_empty() {
        return Err(Error::Contract(format!(
            "{} not reported under scenario {scenario}",
            extra.join(", ")
        )));
    }
    let r = estimate(
        &summary,
        a.method.into(),
        &a.estimator.options(a.shift_mode),
    )?;
    write_json(&r, &mut *open_output(&None)?)?;
    Ok(EXIT_OK)
}

fn load_rows(source: &InputArgs) -> Result<Vec<std::result::Result<SummaryRow, RowError>>> {
    match (&source.input, &source.fixture) {
        (Some(path), _) => read_summaries(File::open(path)?),
        (None, Some(name)) => fixtures::by_name(name)
            .map(|rows| rows.into_iter().map(Ok).collect())
            .ok_or_else(|| Error::Contract(format!("unknown fixture {name:?}"))),
        (None, None) => Err(Error::Contract("give --input or --fixture".into())),
    }
}

/// One line of batch output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRow {
    pub study_id: String,
    pub method: String,
    pub scenario: Scenario,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub selected_family: Option<String>,
    pub lambda: Option<f64>,
    pub shift_c: Option<f64>,
    pub error: Option<String>,
}

impl BatchRow {
    fn from_result(study_id: &str, r: &EstimateResult) -> Self {
        BatchRow {
            study_id: study_id.to_string(),
            method: r.method.to_string(),
            scenario: r.scenario,
            mean: Some(r.mean),
            sd: Some(r.sd),
            selected_family: r.selected.map(|p| p.family.to_string()),
            lambda: r.lambda,
            shift_c: Some(r.shift.c),
            error: None,
        }
    }

    fn failed(study_id: &str, method: &str, scenario: Scenario, error: String) -> Self {
        BatchRow {
            study_id: study_id.to_string(),
            method: method.to_string(),
            scenario,
            mean: None,
            sd: None,
            selected_family: None,
            lambda: None,
            shift_c: None,
            error: Some(error),
        }
    }
}

pub fn cmd_batch(a: &BatchArgs) -> Result<i32> {
    let scenario: Scenario = a.scenario.into();
    let methods: Vec<Method> = match a.method {
        BatchMethodArg::LuoWan => vec![Method::LuoWan],
        BatchMethodArg::Qe => vec![Method::Qe],
        BatchMethodArg::Bc => vec![Method::Bc],
        BatchMethodArg::Abc => vec![Method::Abc],
        BatchMethodArg::All => Method::ALL.to_vec(),
    };
    let rows = load_rows(&a.source)?;
    let base = a.estimator.options(a.shift_mode);

    let mut out_rows = Vec::new();
    let mut worst = EXIT_OK;
    for row in &rows {
        match row {
            Err(e) => {
                worst = worst.max(EXIT_INVALID);
                let id = format!("line {}", e.line);
                out_rows.push(BatchRow::failed(&id, "", scenario, e.message.clone()));
            }
            Ok(row) => {
                let summary = row.to_summary(scenario);
                for &m in &methods {
                    let opts = EstimateOptions {
                        seed: sim::derive_seed(base.seed, sim::fnv1a(row.study_id.as_bytes())),
                        ..base.clone()
                    };
                    match estimate(&summary, m, &opts) {
                        Ok(r) => out_rows.push(BatchRow::from_result(&row.study_id, &r)),
                        Err(e) => {
                            worst = worst.max(exit_code(&e));
                            out_rows.push(BatchRow::failed(
                                &row.study_id,
                                m.name(),
                                scenario,
                                e.to_string(),
                            ));
                        }
                    }
                }
            }
        }
    }

    let mut out = open_output(&a.output)?;
    match a.format {
        Format::Json => write_json(&out_rows, &mut *out)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &out_rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(if a.strict { worst } else { EXIT_OK })
}

fn parse_cell(text: &str) -> Result<(crate::dists::FamilyParams, Scenario, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Contract(format!(
            "--cell expects DIST,SCENARIO,N, got {text:?}"
        )));
    }
    let dist = sim::parse_distribution(parts[0])?;
    let scenario: Scenario = parts[1].parse()?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::Contract(format!("bad sample size {:?} in --cell", parts[2])))?;
    if n == 0 {
        return Err(Error::Contract(
            "--cell sample size must be positive".into(),
        ));
    }
    Ok((dist, scenario, n))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    if a.reps == 0 {
        return Err(Error::Contract("--reps must be at least 1".into()));
    }
    if a.n_list.contains(&0) {
        return Err(Error::Contract("--n-list entries must be positive".into()));
    }
    let config = GridConfig {
        reps: a.reps,
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        n_list: a.n_list.clone(),
        master_seed: a.estimator.seed,
        settings: SimSettings {
            estimate: a.estimator.options(a.shift_mode),
            ..SimSettings::default()
        },
        ..GridConfig::default()
    };
    let cells: Vec<SimCell> = if a.cell.is_empty() {
        let set = match a.set {
            SetArg::Primary => DistributionSet::Primary,
            SetArg::Sensitivity => DistributionSet::Sensitivity,
        };
        sim::grid_cells(set, &config)
    } else {
        a.cell
            .iter()
            .map(|text| {
                let (distribution, scenario, n) = parse_cell(text)?;
                Ok(SimCell {
                    distribution,
                    scenario,
                    n,
                    reps: config.reps,
                    methods: config.methods.clone(),
                    master_seed: sim::cell_seed(config.master_seed, &distribution, scenario, n),
                })
            })
            .collect::<Result<_>>()?
    };
    let mut records = Vec::new();
    for cell in &cells {
        records.extend(sim::run_cell(cell, &config.settings)?);
    }
    let mut out = open_output(&a.output)?;
    match a.format {
        Format::Csv => sim::write_records_csv(&records, &mut out)?,
        Format::Json => write_json(&records, &mut *out)?,
    }
    out.flush()?;
    Ok(EXIT_OK)
}

pub fn cmd_pool(a: &PoolArgs) -> Result<i32> {
    let scenario: Scenario = a.scenario.into();
    let mut studies = Vec::new();
    let mut bad_rows = Vec::new();
    for row in load_rows(&a.source)? {
        match row {
            Ok(r) => {
                let s = r.to_summary(scenario);
                studies.push((r.study_id, s));
            }
            Err(e) => bad_rows.push(e),
        }
    }
    if a.strict {
        if let Some(e) = bad_rows.first() {
            return Err(Error::Contract(format!("line {}: {}", e.line, e.message)));
        }
    }
    for e in &bad_rows {
        eprintln!("warning: skipped line {}: {}", e.line, e.message);
    }
    let report = derive_and_pool_with(
        &studies,
        a.method.into(),
        scenario,
        &a.estimator.options(a.shift_mode),
        a.strict,
    )?;
    write_json(&report, &mut *open_output(&a.output)?)?;
    Ok(EXIT_OK)
}
