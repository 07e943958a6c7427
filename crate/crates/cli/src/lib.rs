//! Command-line front end: census ingestion, apportionment tables, mark
//! tables, paradox scans, log-population statistics and bias simulation.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use seatcalc::census::{observed_support, MomentConvention};
use seatcalc::{
    apportion_at_divisor, apportion_for_house_size, check_new_states, family_of_families_fixture,
    find_multiple_solutions, log_histogram, log_moments_with, monte_carlo_bias,
    powerlaw_loglik_scan, scan_alabama, unbiased_mark, Apportionment, DistributionMarks,
    DivisorMarks, HouseSizeSolution, MethodSpec, Mode, ParadoxReport, PopulationDistribution,
    Rounding, SignpostRule, StateProfile, StateSet, Witness,
};

pub const DEFAULT_SEED: u64 = 20_201_231;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Core(#[from] seatcalc::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("write failed: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Conflict(_) => 4,
            CliError::Core(seatcalc::Error::InfeasibleTarget { .. })
            | CliError::Core(seatcalc::Error::NoExactSolution { .. }) => 3,
            CliError::Output(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "seatcalc", version, about = "Seat apportionment calculator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apportion seats for a census file.
    Apportion(ApportionArgs),
    /// Print rounding-mark tables.
    Marks(MarksArgs),
    /// Paradox scans and worked examples.
    #[command(subcommand)]
    Paradox(ParadoxCommand),
    /// Log-population statistics for one or more census files.
    Stats(StatsArgs),
    /// Monte Carlo estimate of per-family seat bias.
    Bias(BiasArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    State,
    Family,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::State => Mode::ByState,
            ModeArg::Family => Mode::ByFamily,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ApportionArgs {
    /// Census CSV with header `state,population`.
    pub input: PathBuf,
    /// adams, dean, hill, webster, jefferson, powerlaw:BETA, hamilton or lognormal:QG,SIGMA
    #[arg(long)]
    pub method: String,
    #[arg(long, value_enum, default_value = "state")]
    pub mode: ModeArg,
    /// Fixed divisor, or `vt/N` for the total population over N.
    #[arg(long)]
    pub divisor: Option<String>,
    /// Target house size.
    #[arg(long)]
    pub seats: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
    /// Minimum seats per state.
    #[arg(long)]
    pub min_seats: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MarksArgs {
    /// powerlaw:BETA, lognormal:QG,SIGMA or a named rule; repeatable.
    #[arg(long = "method", required = true)]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub fmax: u64,
    /// Only these families, comma separated (overrides --fmax).
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<u64>>,
    /// Decimal places; 2 by default, 3 when a lognormal column is present.
    #[arg(long)]
    pub digits: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, default_value = "webster")]
    pub method: String,
    #[arg(long, value_enum, default_value = "family")]
    pub mode: ModeArg,
    /// Comma-separated populations, named S1, S2, ...
    #[arg(long, value_delimiter = ',')]
    pub populations: Option<Vec<f64>>,
    /// Census CSV instead of --populations.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
}

#[derive(Debug, Subcommand)]
pub enum ParadoxCommand {
    /// Scan a divisor range for seat losses as the divisor decreases.
    Alabama {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        d_lo: f64,
        #[arg(long)]
        d_hi: f64,
    },
    /// Add a state at a fixed divisor and compare incumbents.
    Newstates {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        divisor: String,
        /// NAME:POPULATION
        #[arg(long)]
        add_state: String,
    },
    /// List every apportionment reaching a house size.
    Multisol {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seats: u64,
    },
    /// Run the built-in worked examples.
    Fixtures {
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Sample,
    Population,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Census files; the year is taken from each file name.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "sample")]
    pub convention: ConventionArg,
    /// Also print log-population histograms with this bin width.
    #[arg(long)]
    pub histogram: Option<f64>,
    #[arg(long, default_value_t = 13.0, allow_hyphen_values = true)]
    pub origin: f64,
    /// Also print integer power-law log-likelihoods for beta in -4..=4.
    #[arg(long)]
    pub loglik: bool,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// lognormal:QG,SIGMA, powerlaw:BETA,LO,HI or uniform:LO,HI (quota units).
    #[arg(long)]
    pub dist: String,
    /// `unbiased` for distribution-matched marks, or a named rule.
    #[arg(long, default_value = "unbiased")]
    pub marks: String,
    #[arg(long, default_value_t = 100_000)]
    pub replications: u64,
    #[arg(long, default_value_t = 50)]
    pub states: usize,
    /// Defaults to SEATCALC_SEED when set.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
}

/// A parsed `--method` value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodArg {
    Signpost(SignpostRule),
    Hamilton,
    LogNormal { qg: f64, sigma: f64 },
}

fn parse_beta(s: &str) -> CliResult<f64> {
    match s.trim() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|b| !b.is_nan())
            .ok_or_else(|| CliError::Usage(format!("bad exponent '{s}'"))),
    }
}

fn parse_numbers(s: &str, n: usize, what: &str) -> CliResult<Vec<f64>> {
    let xs: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad {what} parameters '{s}'")))?;
    if xs.len() != n || xs.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage(format!("{what} needs {n} finite numbers, got '{s}'")));
    }
    Ok(xs)
}

pub fn parse_method(s: &str) -> CliResult<MethodArg> {
    let lower = s.trim().to_ascii_lowercase();
    let rule = match lower.as_str() {
        "adams" => SignpostRule::Adams,
        "dean" => SignpostRule::Dean,
        "hill" | "huntington-hill" => SignpostRule::HuntingtonHill,
        "webster" => SignpostRule::Webster,
        "jefferson" => SignpostRule::Jefferson,
        "hamilton" => return Ok(MethodArg::Hamilton),
        other => {
            if let Some(b) = other.strip_prefix("powerlaw:") {
                SignpostRule::PowerLaw(parse_beta(b)?)
            } else if let Some(p) = other.strip_prefix("lognormal:") {
                let v = parse_numbers(p, 2, "lognormal")?;
                if v[0] <= 0.0 || v[1] <= 0.0 {
                    return Err(CliError::Usage(format!("lognormal needs qg > 0 and sigma > 0, got '{p}'")));
                }
                return Ok(MethodArg::LogNormal { qg: v[0], sigma: v[1] });
            } else {
                return Err(CliError::Usage(format!("unknown method '{s}'")));
            }
        }
    };
    Ok(MethodArg::Signpost(rule))
}

impl MethodArg {
    pub fn label(&self) -> String {
        match self {
            MethodArg::Signpost(r) => r.label(),
            MethodArg::Hamilton => "hamilton".into(),
            MethodArg::LogNormal { qg, sigma } => format!("lognormal:{qg},{sigma}"),
        }
    }

    /// The method spec, with lognormal marks anchored so the geometric-mean
    /// quota at `divisor` is `qg`.
    fn spec(&self, mode: Mode, divisor: f64) -> CliResult<MethodSpec> {
        let rounding = match *self {
            MethodArg::Signpost(r) => Rounding::Signpost(r),
            MethodArg::Hamilton => Rounding::Hamilton,
            MethodArg::LogNormal { qg, sigma } => Rounding::Unbiased(DistributionMarks::new(
                PopulationDistribution::lognormal_from_quota(qg, sigma, divisor)?,
            )),
        };
        Ok(MethodSpec::new(rounding, mode))
    }
}

fn parse_dist(s: &str) -> CliResult<PopulationDistribution> {
    let lower = s.trim().to_ascii_lowercase();
    let dist = if let Some(p) = lower.strip_prefix("lognormal:") {
        let v = parse_numbers(p, 2, "lognormal")?;
        if v[0] <= 0.0 {
            return Err(CliError::Usage(format!("lognormal needs qg > 0, got '{p}'")));
        }
        PopulationDistribution::lognormal(v[0].ln(), v[1])
    } else if let Some(p) = lower.strip_prefix("powerlaw:") {
        let v = parse_numbers(p, 3, "powerlaw")?;
        PopulationDistribution::power_law(v[0], v[1], v[2])
    } else if let Some(p) = lower.strip_prefix("uniform:") {
        let v = parse_numbers(p, 2, "uniform")?;
        PopulationDistribution::uniform(v[0], v[1])
    } else {
        return Err(CliError::Usage(format!("unknown distribution '{s}'")));
    };
    dist.map_err(|e| CliError::Usage(e.to_string()))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a census CSV: header `state,population`, positive integer counts.
pub fn parse_census(text: &str) -> CliResult<StateSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "state" || &headers[1] != "population" {
        return Err(CliError::Usage(
            "census header must be 'state,population'".into(),
        ));
    }
    let mut states = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or("");
        let pop = rec.get(1).unwrap_or("");
        if name.is_empty() {
            return Err(CliError::Usage(format!("row {}: empty state name", line + 2)));
        }
        let value: u64 = pop
            .parse()
            .ok()
            .filter(|&p| p >= 1)
            .ok_or_else(|| CliError::Usage(format!("row {}: population must be a positive integer, got '{pop}'", line + 2)))?;
        states.push(StateProfile::new(name, value as f64)?);
    }
    if states.is_empty() {
        return Err(CliError::Usage("census file has no rows".into()));
    }
    Ok(StateSet::new(states)?)
}

pub fn load_census(path: &Path) -> CliResult<StateSet> {
    parse_census(&read_text(path)?)
}

/// A row of the state section of an apportionment CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatRow {
    pub state: String,
    pub population: u64,
    pub quota: f64,
    pub seats: u64,
}

/// Reads the state section (up to the first blank line) of `apportion` CSV output.
pub fn parse_seat_rows(text: &str) -> CliResult<Vec<SeatRow>> {
    let section: String = text
        .lines()
        .skip_while(|l| !l.starts_with("state,"))
        .take_while(|l| !l.trim().is_empty())
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(section.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["state", "population", "quota", "seats"] {
        return Err(CliError::Usage("missing seat table header".into()));
    }
    rdr.records()
        .map(|r| {
            let r = r?;
            let num = |i: usize| r.get(i).unwrap_or("").to_string();
            let bad = |i: usize| CliError::Usage(format!("bad field '{}'", num(i)));
            Ok(SeatRow {
                state: num(0),
                population: num(1).parse().map_err(|_| bad(1))?,
                quota: num(2).parse().map_err(|_| bad(2))?,
                seats: num(3).parse().map_err(|_| bad(3))?,
            })
        })
        .collect()
}

fn parse_divisor(s: &str, states: &StateSet) -> CliResult<f64> {
    let t = s.trim().to_ascii_lowercase();
    let d = if let Some(n) = t.strip_prefix("vt/") {
        let n: f64 = n
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite() && *x > 0.0)
            .ok_or_else(|| CliError::Usage(format!("bad divisor '{s}'")))?;
        states.total_population() / n
    } else {
        t.parse()
            .map_err(|_| CliError::Usage(format!("bad divisor '{s}'")))?
    };
    if !(d.is_finite() && d > 0.0) {
        return Err(CliError::Usage(format!("divisor must be positive, got '{s}'")));
    }
    Ok(d)
}

fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::ByState => "state",
        Mode::ByFamily => "family",
    }
}

#[derive(Serialize)]
struct JsonState<'a> {
    name: &'a str,
    population: f64,
    quota: f64,
    family: u64,
    seats: u64,
}

#[derive(Serialize)]
struct JsonFamily {
    family: u64,
    members: usize,
    quota: f64,
    seats: u64,
}

#[derive(Serialize)]
struct JsonSolution<'a> {
    divisor: f64,
    divisor_ranges: Vec<(f64, f64)>,
    total: u64,
    states: Vec<JsonState<'a>>,
    families: Vec<JsonFamily>,
}

#[derive(Serialize)]
struct JsonApportionment<'a> {
    divisor: f64,
    method: String,
    mode: &'static str,
    states: Vec<JsonState<'a>>,
    families: Vec<JsonFamily>,
    solutions: Vec<JsonSolution<'a>>,
}

fn ordered_states(app: &Apportionment) -> Vec<&seatcalc::StateSeats> {
    let mut rows: Vec<&seatcalc::StateSeats> = app.states.iter().collect();
    rows.sort_by(|a, b| {
        a.population
            .total_cmp(&b.population)
            .then_with(|| a.name.as_bytes().cmp(b.name.as_bytes()))
    });
    rows
}

fn json_states(app: &Apportionment) -> Vec<JsonState<'_>> {
    ordered_states(app)
        .into_iter()
        .map(|s| JsonState {
            name: &s.name,
            population: s.population,
            quota: s.quota,
            family: s.family,
            seats: s.seats,
        })
        .collect()
}

fn json_families(app: &Apportionment) -> Vec<JsonFamily> {
    app.families
        .iter()
        .map(|f| JsonFamily {
            family: f.index,
            members: f.members,
            quota: f.quota,
            seats: f.seats,
        })
        .collect()
}

fn delimiter(format: TableFormat) -> u8 {
    if format == TableFormat::Tsv {
        b'\t'
    } else {
        b','
    }
}

fn table_writer(buf: &mut Vec<u8>, format: TableFormat) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .delimiter(delimiter(format))
        .flexible(true)
        .from_writer(buf)
}

fn write_apportionment_table(buf: &mut Vec<u8>, app: &Apportionment, format: TableFormat) -> CliResult<()> {
    {
        let mut w = table_writer(buf, format);
        w.write_record(["state", "population", "quota", "seats"])?;
        for s in ordered_states(app) {
            w.write_record([
                s.name.clone(),
                format!("{}", s.population),
                format!("{:.3}", s.quota),
                s.seats.to_string(),
            ])?;
        }
        w.flush()?;
    }
    buf.push(b'\n');
    let mut w = table_writer(buf, format);
    w.write_record(["family", "quota", "seats"])?;
    for f in &app.families {
        w.write_record([f.index.to_string(), format!("{:.3}", f.quota), f.seats.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn emit_apportionment(
    out: &mut dyn Write,
    method: &MethodArg,
    mode: Mode,
    solutions: &[HouseSizeSolution],
    format: TableFormat,
) -> CliResult<()> {
    if format == TableFormat::Json {
        let first = &solutions[0].apportionment;
        let doc = JsonApportionment {
            divisor: first.divisor,
            method: method.label(),
            mode: mode_label(mode),
            states: json_states(first),
            families: json_families(first),
            solutions: solutions
                .iter()
                .map(|s| JsonSolution {
                    divisor: s.apportionment.divisor,
                    divisor_ranges: s.divisor_ranges.clone(),
                    total: s.apportionment.total,
                    states: json_states(&s.apportionment),
                    families: json_families(&s.apportionment),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
        return Ok(());
    }
    let mut buf = Vec::new();
    let sep = delimiter(format) as char;
    if solutions.len() > 1 {
        buf.extend_from_slice(format!("MULTIPLE_SOLUTIONS{sep}{}\n", solutions.len()).as_bytes());
    }
    for (i, sol) in solutions.iter().enumerate() {
        if i > 0 {
            buf.push(b'\n');
        }
        if solutions.len() > 1 {
            let (lo, hi) = sol.divisor_ranges[0];
            buf.extend_from_slice(format!("solution{sep}{}{sep}{lo}{sep}{hi}\n", i + 1).as_bytes());
        }
        write_apportionment_table(&mut buf, &sol.apportionment, format)?;
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn cmd_apportion(args: &ApportionArgs, out: &mut dyn Write) -> CliResult<()> {
    let method = parse_method(&args.method)?;
    let mode: Mode = args.mode.into();
    match (&args.divisor, args.seats) {
        (Some(_), Some(_)) => {
            return Err(CliError::Conflict("give exactly one of --divisor and --seats".into()))
        }
        (None, None) => {
            return Err(CliError::Conflict("one of --divisor or --seats is required".into()))
        }
        (Some(_), None) if method == MethodArg::Hamilton => {
            return Err(CliError::Conflict("hamilton needs --seats, not --divisor".into()))
        }
        _ => {}
    }
    let states = load_census(&args.input)?;
    let solutions = if let Some(d) = &args.divisor {
        let d = parse_divisor(d, &states)?;
        let mut spec = method.spec(mode, d)?;
        spec.min_seat_floor = args.min_seats;
        let app = apportion_at_divisor(&states, d, &spec)?;
        vec![HouseSizeSolution {
            apportionment: app,
            divisor_ranges: Vec::new(),
        }]
    } else {
        let n = args.seats.expect("checked above");
        if n == 0 {
            return Err(seatcalc::Error::InfeasibleTarget {
                target: 0,
                reason: "house size must be at least 1".into(),
            }
            .into());
        }
        let mut spec = method.spec(mode, states.total_population() / n as f64)?;
        spec.min_seat_floor = args.min_seats;
        apportion_for_house_size(&states, n, &spec)?
    };
    emit_apportionment(out, &method, mode, &solutions, args.format)
}

#[derive(Serialize)]
struct JsonMarks {
    method: String,
    marks: Vec<(u64, f64)>,
}

fn mark_of(method: &MethodArg, f: u64) -> CliResult<f64> {
    match *method {
        MethodArg::Signpost(r) => Ok(r.mark(f)),
        MethodArg::LogNormal { qg, sigma } => {
            let dist = PopulationDistribution::lognormal(qg.ln(), sigma)?;
            Ok(unbiased_mark(&dist, f, 1.0)?)
        }
        MethodArg::Hamilton => Err(CliError::Usage("hamilton has no rounding marks".into())),
    }
}

pub fn cmd_marks(args: &MarksArgs, out: &mut dyn Write) -> CliResult<()> {
    let methods: Vec<MethodArg> = args.methods.iter().map(|m| parse_method(m)).collect::<CliResult<_>>()?;
    let families: Vec<u64> = match &args.families {
        Some(f) => f.clone(),
        None => (0..=args.fmax).collect(),
    };
    let digits = args.digits.unwrap_or_else(|| {
        if methods.iter().any(|m| matches!(m, MethodArg::LogNormal { .. })) {
            3
        } else {
            2
        }
    });
    let mut columns = Vec::with_capacity(methods.len());
    for m in &methods {
        let marks = families
            .iter()
            .map(|&f| Ok((f, mark_of(m, f)?)))
            .collect::<CliResult<Vec<_>>>()?;
        columns.push(JsonMarks {
            method: m.label(),
            marks,
        });
    }
    if args.format == TableFormat::Json {
        serde_json::to_writer_pretty(&mut *out, &columns)?;
        writeln!(out)?;
        return Ok(());
    }
    let mut buf = Vec::new();
    {
        let mut w = table_writer(&mut buf, args.format);
        let mut header = vec!["f".to_string()];
        header.extend(columns.iter().map(|c| c.method.clone()));
        w.write_record(&header)?;
        for (row, &f) in families.iter().enumerate() {
            let mut rec = vec![f.to_string()];
            rec.extend(columns.iter().map(|c| format!("{:.*}", digits, c.marks[row].1)));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    out.write_all(&buf)?;
    Ok(())
}

fn scenario_states(s: &ScenarioArgs) -> CliResult<StateSet> {
    match (&s.populations, &s.input) {
        (Some(_), Some(_)) => Err(CliError::Conflict("give only one of --populations and --input".into())),
        (None, None) => Err(CliError::Conflict("one of --populations or --input is required".into())),
        (Some(p), None) => StateSet::from_populations(p).map_err(|e| CliError::Usage(e.to_string())),
        (None, Some(path)) => load_census(path),
    }
}

fn scenario_method(s: &ScenarioArgs, divisor: f64) -> CliResult<(MethodArg, MethodSpec)> {
    let m = parse_method(&s.method)?;
    if m == MethodArg::Hamilton {
        return Err(CliError::Usage("paradox scans need a divisor method, not hamilton".into()));
    }
    let spec = m.spec(s.mode.into(), divisor)?;
    Ok((m, spec))
}

fn seats_line(app: &Apportionment) -> String {
    let s: Vec<String> = app.states.iter().map(|s| s.seats.to_string()).collect();
    format!("({})", s.join(", "))
}

fn describe_report(r: &ParadoxReport) -> String {
    let mut text = String::new();
    match &r.witness {
        Witness::DivisorDecrease { from, to, .. } => text.push_str(&format!(
            "  D {from} -> {to}: seats {} -> {}, total {} -> {}\n",
            seats_line(&r.before),
            seats_line(&r.after),
            r.before.total,
            r.after.total
        )),
        Witness::AddedState { name, population, divisor } => text.push_str(&format!(
            "  add {name} ({population}) at D {divisor}: seats {} -> {}\n",
            seats_line(&r.before),
            seats_line(&r.after)
        )),
        Witness::SharedTotal { total, divisors } => text.push_str(&format!(
            "  total {total} reached by {} and {} (D {:?})\n",
            seats_line(&r.before),
            seats_line(&r.after),
            divisors
        )),
    }
    for a in &r.affected_states {
        text.push_str(&format!("    {}: {} -> {}\n", a.name, a.before, a.after));
    }
    text
}

#[derive(Serialize)]
struct JsonParadox<'a> {
    check: &'a str,
    method: String,
    mode: &'static str,
    reports: &'a [ParadoxReport],
}

#[derive(Serialize)]
struct JsonMultisol<'a> {
    check: &'a str,
    method: String,
    mode: &'static str,
    target: u64,
    solutions: Vec<JsonSolution<'a>>,
}

fn emit_reports(
    out: &mut dyn Write,
    check: &str,
    method: &MethodArg,
    mode: Mode,
    reports: &[ParadoxReport],
    format: ReportFormat,
) -> CliResult<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(
                &mut *out,
                &JsonParadox {
                    check,
                    method: method.label(),
                    mode: mode_label(mode),
                    reports,
                },
            )?;
            writeln!(out)?;
        }
        ReportFormat::Text => {
            let head = format!("{check} [{} by {}]", method.label(), mode_label(mode));
            if reports.is_empty() {
                writeln!(out, "{head}: no violations")?;
            } else {
                writeln!(out, "{head}: {} violation(s)", reports.len())?;
                for r in reports {
                    write!(out, "{}", describe_report(r))?;
                }
            }
        }
    }
    Ok(())
}

fn emit_solutions(
    out: &mut dyn Write,
    method: &MethodArg,
    mode: Mode,
    target: u64,
    sols: &[HouseSizeSolution],
    format: ReportFormat,
) -> CliResult<()> {
    match format {
        ReportFormat::Json => {
            let doc = JsonMultisol {
                check: "multisol",
                method: method.label(),
                mode: mode_label(mode),
                target,
                solutions: sols
                    .iter()
                    .map(|s| JsonSolution {
                        divisor: s.apportionment.divisor,
                        divisor_ranges: s.divisor_ranges.clone(),
                        total: s.apportionment.total,
                        states: json_states(&s.apportionment),
                        families: json_families(&s.apportionment),
                    })
                    .collect(),
            };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
        ReportFormat::Text => {
            writeln!(
                out,
                "multisol [{} by {}]: {} solution(s) for {target} seats",
                method.label(),
                mode_label(mode),
                sols.len()
            )?;
            for (i, s) in sols.iter().enumerate() {
                let ranges: Vec<String> = s.divisor_ranges.iter().map(|(lo, hi)| format!("({lo}, {hi})")).collect();
                writeln!(out, "  {}: {} for D in {}", i + 1, seats_line(&s.apportionment), ranges.join(" "))?;
            }
        }
    }
    Ok(())
}

fn parse_added_state(s: &str) -> CliResult<StateProfile> {
    let (name, pop) = s
        .rsplit_once(':')
        .ok_or_else(|| CliError::Usage(format!("--add-state needs NAME:POPULATION, got '{s}'")))?;
    let pop: f64 = pop
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad population in '{s}'")))?;
    StateProfile::new(name.trim(), pop).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn cmd_paradox(cmd: &ParadoxCommand, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        ParadoxCommand::Alabama { scenario, d_lo, d_hi } => {
            let states = scenario_states(scenario)?;
            let (m, spec) = scenario_method(scenario, *d_hi)?;
            let reports = scan_alabama(&states, &spec, *d_lo, *d_hi).map_err(|e| CliError::Usage(e.to_string()))?;
            emit_reports(out, "alabama", &m, spec.mode, &reports, scenario.format)
        }
        ParadoxCommand::Newstates { scenario, divisor, add_state } => {
            let states = scenario_states(scenario)?;
            let d = parse_divisor(divisor, &states)?;
            let (m, spec) = scenario_method(scenario, d)?;
            let new = parse_added_state(add_state)?;
            let report = check_new_states(&states, &spec, d, new).map_err(|e| CliError::Usage(e.to_string()))?;
            let reports: Vec<ParadoxReport> = report.into_iter().collect();
            emit_reports(out, "newstates", &m, spec.mode, &reports, scenario.format)
        }
        ParadoxCommand::Multisol { scenario, seats } => {
            let states = scenario_states(scenario)?;
            let (m, spec) = scenario_method(scenario, states.total_population() / (*seats).max(1) as f64)?;
            let sols = find_multiple_solutions(&states, &spec, *seats)?;
            emit_solutions(out, &m, spec.mode, *seats, &sols, scenario.format)
        }
        ParadoxCommand::Fixtures { format } => run_fixtures(out, *format),
    }
}

#[derive(Serialize)]
struct FixtureOutcome {
    name: &'static str,
    expectation: &'static str,
    passed: bool,
    reports: Vec<ParadoxReport>,
    solutions: Vec<Vec<u64>>,
}

fn pops(p: &[f64]) -> StateSet {
    StateSet::from_populations(p).expect("fixture populations")
}

/// Runs every worked example and checks its expected outcome.
pub fn fixture_outcomes() -> CliResult<Vec<FixtureOutcomeView>> {
    let hill_f = MethodSpec::by_family(SignpostRule::HuntingtonHill);
    let web_f = MethodSpec::by_family(SignpostRule::Webster);
    let web_s = MethodSpec::by_state(SignpostRule::Webster);
    let mut out = Vec::new();

    let two = pops(&[0.999, 1.43]);
    let a = apportion_at_divisor(&two, 1.0, &hill_f)?.seats();
    let b = apportion_at_divisor(&two, 999.0 / 1001.0, &hill_f)?.seats();
    out.push(FixtureOutcome {
        name: "hill-family-two-states",
        expectation: "seats (1, 2) at D = 1, then (1, 1) at D = 999/1001",
        passed: a == [1, 2] && b == [1, 1],
        reports: Vec::new(),
        solutions: vec![a, b],
    });

    let three = pops(&[0.999, 1.43, 999.0]);
    let reps = scan_alabama(&three, &hill_f, 999.0 / 1001.0, 1.0)?;
    let passed = reps.len() == 1
        && reps[0].before.total == 1002
        && reps[0].after.total == 1003
        && reps[0].affected_states.len() == 1
        && reps[0].affected_states[0].name == "S2"
        && (reps[0].affected_states[0].before, reps[0].affected_states[0].after) == (2, 1);
    out.push(FixtureOutcome {
        name: "alabama-hill-family",
        expectation: "S2 drops 2 -> 1 while the total rises 1002 -> 1003",
        passed,
        reports: reps,
        solutions: Vec::new(),
    });

    let reps = scan_alabama(&three, &web_f, 999.0 / 1001.0, 1.0)?;
    out.push(FixtureOutcome {
        name: "alabama-webster-family",
        expectation: "no violations",
        passed: reps.is_empty(),
        reports: reps,
        solutions: Vec::new(),
    });

    let ms = pops(&[0.999, 1.43, 62.4375]);
    let sols = find_multiple_solutions(&ms, &hill_f, 65)?;
    let seats: Vec<Vec<u64>> = sols.iter().map(|s| s.apportionment.seats()).collect();
    out.push(FixtureOutcome {
        name: "multiple-solutions-hill-family",
        expectation: "65 seats as (1, 2, 62) or (1, 1, 63)",
        passed: seats == [vec![1, 2, 62], vec![1, 1, 63]],
        reports: seatcalc::paradox::multiple_solution_report(&sols).into_iter().collect(),
        solutions: seats,
    });

    let inc = pops(&[2.6, 5.3]);
    let added = StateProfile::new("N", 2.7)?;
    let rep = check_new_states(&inc, &web_f, 1.0, added.clone())?;
    let passed = rep.as_ref().is_some_and(|r| {
        r.affected_states.len() == 1
            && r.affected_states[0].name == "S1"
            && (r.affected_states[0].before, r.affected_states[0].after) == (3, 2)
    });
    out.push(FixtureOutcome {
        name: "new-states-webster-family",
        expectation: "the 2.6 state drops 3 -> 2 when a 2.7 state joins",
        passed,
        reports: rep.into_iter().collect(),
        solutions: Vec::new(),
    });

    let rep = check_new_states(&inc, &web_s, 1.0, added)?;
    out.push(FixtureOutcome {
        name: "new-states-webster-state",
        expectation: "no incumbent changes",
        passed: rep.is_none(),
        reports: rep.into_iter().collect(),
        solutions: Vec::new(),
    });

    let fof = family_of_families_fixture();
    let passed = fof.before.seats() == [1, 2, 3] && fof.after.seats() == [1, 2, 2];
    out.push(FixtureOutcome {
        name: "family-of-families",
        expectation: "(1, 2, 3) becomes (1, 2, 2) as D decreases",
        passed,
        reports: vec![fof],
        solutions: Vec::new(),
    });

    let fof_states = pops(&[0.99999, 1.7, 2.6]);
    let reps = scan_alabama(&fof_states, &web_f, 0.99999, 1.0)?;
    out.push(FixtureOutcome {
        name: "family-of-families-webster-family",
        expectation: "no violations",
        passed: reps.is_empty(),
        reports: reps,
        solutions: Vec::new(),
    });

    Ok(out.into_iter().map(FixtureOutcomeView).collect())
}

/// One worked example and whether it behaved as expected.
pub struct FixtureOutcomeView(FixtureOutcome);

impl FixtureOutcomeView {
    pub fn name(&self) -> &str {
        self.0.name
    }

    pub fn passed(&self) -> bool {
        self.0.passed
    }

    pub fn reports(&self) -> &[ParadoxReport] {
        &self.0.reports
    }
}

fn run_fixtures(out: &mut dyn Write, format: ReportFormat) -> CliResult<()> {
    let outcomes = fixture_outcomes()?;
    match format {
        ReportFormat::Json => {
            let inner: Vec<&FixtureOutcome> = outcomes.iter().map(|o| &o.0).collect();
            serde_json::to_writer_pretty(&mut *out, &inner)?;
            writeln!(out)?;
        }
        ReportFormat::Text => {
            for o in &outcomes {
                let o = &o.0;
                let tag = if o.passed { "ok" } else { "MISMATCH" };
                writeln!(out, "{} [{tag}]: {}", o.name, o.expectation)?;
                for r in &o.reports {
                    write!(out, "{}", describe_report(r))?;
                }
                for s in &o.solutions {
                    writeln!(out, "  seats {}", format_vec(s))?;
                }
            }
        }
    }
    Ok(())
}

fn format_vec(v: &[u64]) -> String {
    let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", s.join(", "))
}

fn year_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> CliResult<()> {
    let convention = match args.convention {
        ConventionArg::Sample => MomentConvention::SampleCorrected,
        ConventionArg::Population => MomentConvention::Population,
    };
    let sets: Vec<(String, StateSet)> = args
        .inputs
        .iter()
        .map(|p| Ok((year_label(p), load_census(p)?)))
        .collect::<CliResult<_>>()?;
    writeln!(out, "year,mean,std,skew,excess_kurtosis")?;
    for (year, s) in &sets {
        let m = log_moments_with(s, convention).map_err(|e| CliError::Usage(e.to_string()))?;
        writeln!(
            out,
            "{year},{:.3},{:.3},{:.3},{:.3}",
            m.mean, m.std, m.skew, m.excess_kurtosis
        )?;
    }
    if let Some(width) = args.histogram {
        writeln!(out)?;
        writeln!(out, "year,bin_lo,count")?;
        for (year, s) in &sets {
            for (lo, c) in log_histogram(s, width, args.origin).map_err(|e| CliError::Usage(e.to_string()))? {
                writeln!(out, "{year},{lo:.3},{c}")?;
            }
        }
    }
    if args.loglik {
        writeln!(out)?;
        writeln!(out, "year,support_lo,support_hi,beta,loglik")?;
        let betas: Vec<i32> = (-4..=4).collect();
        for (year, s) in &sets {
            let (lo, hi) = observed_support(s);
            for (b, ll) in powerlaw_loglik_scan(s, &betas, (lo, hi))? {
                writeln!(out, "{year},{lo},{hi},{b},{ll:.3}")?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonBias {
    dist: String,
    marks: String,
    replications: u64,
    states: usize,
    seed: u64,
    families: Vec<seatcalc::FamilyBias>,
}

pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("SEATCALC_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("SEATCALC_SEED must be an integer, got '{v}'"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

pub fn cmd_bias(args: &BiasArgs, out: &mut dyn Write) -> CliResult<()> {
    let dist = parse_dist(&args.dist)?;
    let seed = resolve_seed(args.seed)?;
    let matched = DistributionMarks::new(dist);
    let rule;
    let marks: &dyn DivisorMarks = if args.marks.trim().eq_ignore_ascii_case("unbiased") {
        &matched
    } else {
        rule = match parse_method(&args.marks)? {
            MethodArg::Signpost(r) => r,
            _ => return Err(CliError::Usage(format!("--marks must be 'unbiased' or a signpost rule, got '{}'", args.marks))),
        };
        &rule
    };
    let fams = monte_carlo_bias(&dist, 1.0, marks, args.replications, args.states, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let fams: Vec<_> = fams.into_iter().filter(|b| b.occupied > 0).collect();
    if args.format == TableFormat::Json {
        serde_json::to_writer_pretty(
            &mut *out,
            &JsonBias {
                dist: args.dist.clone(),
                marks: args.marks.clone(),
                replications: args.replications,
                states: args.states,
                seed,
                families: fams,
            },
        )?;
        writeln!(out)?;
        return Ok(());
    }
    let mut buf = Vec::new();
    {
        let mut w = table_writer(&mut buf, args.format);
        w.write_record(["family", "bias", "std_error", "z", "occupied"])?;
        for b in &fams {
            let z = if b.std_error > 0.0 { b.mean / b.std_error } else { 0.0 };
            w.write_record([
                b.family.to_string(),
                format!("{:.6}", b.mean),
                format!("{:.6}", b.std_error),
                format!("{z:.2}"),
                b.occupied.to_string(),
            ])?;
        }
        w.flush()?;
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Apportion(a) => cmd_apportion(a, out),
        Command::Marks(a) => cmd_marks(a, out),
        Command::Paradox(p) => cmd_paradox(p, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Bias(a) => cmd_bias(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings() {
        assert_eq!(parse_method("webster").unwrap(), MethodArg::Signpost(SignpostRule::Webster));
        assert_eq!(parse_method("powerlaw:-inf").unwrap(), MethodArg::Signpost(SignpostRule::PowerLaw(f64::NEG_INFINITY)));
        assert_eq!(parse_method("lognormal:5,1").unwrap(), MethodArg::LogNormal { qg: 5.0, sigma: 1.0 });
        assert!(parse_method("lognormal:5").is_err());
        assert!(parse_method("powerlaw:x").is_err());
        assert!(parse_method("sainte").is_err());
    }

    #[test]
    fn census_grammar() {
        let s = parse_census("state,population\nA,10\nB,20\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(parse_census("").is_err());
        assert!(parse_census("state,population\n").is_err());
        assert!(parse_census("name,pop\nA,1\n").is_err());
        assert!(parse_census("state,population\nA,0\n").is_err());
        assert!(parse_census("state,population\nA,1.5\n").is_err());
        assert!(parse_census("state,population\nA,1\nA,2\n").is_err());
    }

    #[test]
    fn divisor_token() {
        let s = parse_census("state,population\nA,300\nB,135\n").unwrap();
        assert_eq!(parse_divisor("vt/435", &s).unwrap(), 1.0);
        assert_eq!(parse_divisor("2.5", &s).unwrap(), 2.5);
        assert!(parse_divisor("vt/0", &s).is_err());
        assert!(parse_divisor("-1", &s).is_err());
    }

    #[test]
    fn added_state_syntax() {
        let s = parse_added_state("New State:2.7").unwrap();
        assert_eq!((s.name.as_str(), s.population), ("New State", 2.7));
        assert!(parse_added_state("x").is_err());
    }

    #[test]
    fn every_fixture_passes() {
        for o in fixture_outcomes().unwrap() {
            assert!(o.passed(), "{}", o.name());
        }
    }
}
