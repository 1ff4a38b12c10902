//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 malformed or invalid input,
//! 3 diagram node cap exceeded, 4 no trace of the requested length.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use serde::Serialize;
use serde_json::json;

use crate::dd::{DdError, Value};
use crate::error::{Error, Result};
use crate::ingest::{
    circuit_to_system, parse_aiger_ascii, parse_explicit_system, parse_final_states, parse_weight_spec, FinalStates,
    TransitionSystem,
};
use crate::ladder::{LadderStats, Mode, SamplingPlan};
use crate::oracle::{self, Distribution, ExplicitSystem};
use crate::random::DEFAULT_SEED;
use crate::sampler::{plan_sample_streams, plan_trace_probability, Trace};

#[derive(Debug, Parser)]
#[command(name = "trace-sampler", version, about = "Exact uniform and weighted sampling of fixed-length traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw traces and write one per line.
    Sample(RunArgs),
    /// Print the exact number (or total weight) of traces.
    Count(RunArgs),
    /// Compare exact per-trace probabilities with a sampled run.
    Check(RunArgs),
    /// Report ladder sizes and build times for both modes.
    Stats(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Aag,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Plain,
    Restricted,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Plain => Mode::Plain,
            ModeArg::Restricted => Mode::Restricted,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// AIGER ASCII circuit or explicit JSON system.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Trace length N (number of transitions).
    #[arg(short = 'n', long)]
    pub length: u64,
    #[arg(short = 's', long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "plain")]
    pub mode: ModeArg,
    /// `all`, a file of final states, or `output:<idx>` for a circuit output.
    #[arg(long = "final", default_value = "all")]
    pub final_states: String,
    /// JSON weight file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Maximum number of diagram nodes per manager.
    #[arg(long)]
    pub node_cap: Option<usize>,
    /// Maximum number of traces enumerated by `check`.
    #[arg(long, default_value_t = 1 << 20)]
    pub enum_cap: usize,
    #[arg(short = 'j', long, default_value_t = 1)]
    pub jobs: usize,
    /// Output file instead of stdout.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    pub length: u64,
    pub samples: usize,
    pub seed: u64,
    pub mode: Mode,
    pub final_states: FinalSource,
    pub weights: Option<PathBuf>,
    pub node_cap: Option<usize>,
    pub enum_cap: usize,
    pub jobs: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FinalSource {
    All,
    File(PathBuf),
    Output(usize),
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        if a.length == 0 {
            return Err(Error::Invalid("--length must be at least 1".into()));
        }
        let final_states = match a.final_states.as_str() {
            "all" => FinalSource::All,
            s => match s.strip_prefix("output:") {
                Some(idx) => FinalSource::Output(
                    idx.parse()
                        .map_err(|_| Error::Invalid(format!("bad output index {idx:?}")))?,
                ),
                None => FinalSource::File(PathBuf::from(s)),
            },
        };
        Ok(RunConfig {
            input: a.input.clone(),
            format: a.format,
            length: a.length,
            samples: a.samples,
            seed: a.seed,
            mode: a.mode.into(),
            final_states,
            weights: a.weights.clone(),
            node_cap: a.node_cap,
            enum_cap: a.enum_cap,
            jobs: a.jobs.max(1),
            out: a.out.clone(),
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn is_aag(cfg: &RunConfig) -> Result<bool> {
    Ok(match cfg.format {
        InputFormat::Aag => true,
        InputFormat::Json => false,
        InputFormat::Auto => match cfg.input.extension().and_then(|e| e.to_str()) {
            Some("aag") => true,
            Some("json") => false,
            _ => read(&cfg.input)?.trim_start().starts_with("aag"),
        },
    })
}

/// Loads the system with final states, weights and node cap applied.
pub fn load_system(cfg: &RunConfig) -> Result<TransitionSystem> {
    let text = read(&cfg.input)?;
    let mut sys = if is_aag(cfg)? {
        let circuit = parse_aiger_ascii(&text)?;
        let finals = match &cfg.final_states {
            FinalSource::All => FinalStates::All,
            FinalSource::Output(i) => FinalStates::Output(*i),
            FinalSource::File(p) => FinalStates::States(parse_final_states(&read(p)?, circuit.num_latches() as u32)?),
        };
        circuit_to_system(&circuit, &finals)?
    } else {
        let sys = parse_explicit_system(&text)?;
        match &cfg.final_states {
            FinalSource::All => sys,
            FinalSource::File(p) => {
                let states = parse_final_states(&read(p)?, sys.bits())?;
                sys.with_final_states(&states)?
            }
            FinalSource::Output(_) => return Err(Error::Invalid("output:<idx> needs an AIGER input".into())),
        }
    };
    if let Some(w) = &cfg.weights {
        let spec = parse_weight_spec(&read(w)?, sys.bits())?;
        sys = sys.apply_weights(&spec)?;
    }
    sys.set_node_limit(cfg.node_cap);
    Ok(sys)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Invalid(_) => 2,
        Error::Dd(DdError::BlowUp { .. }) => 3,
        Error::NoTrace => 4,
        _ => 1,
    }
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, body: &str) -> Result<()> {
    match &cfg.out {
        Some(p) => std::fs::write(p, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn stats_line(stats: &LadderStats) -> String {
    serde_json::to_string(stats).expect("stats serialize")
}

pub fn cmd_sample(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let sys = load_system(cfg)?;
    let plan = SamplingPlan::new(&sys, cfg.length, cfg.mode)?;
    writeln!(stderr, "{}", stats_line(plan.ladder.stats()))?;
    let traces = plan_sample_streams(&plan, cfg.samples, cfg.seed, cfg.jobs)?;
    let mut body = String::new();
    for t in &traces {
        body += &t.to_line(sys.bits());
        body.push('\n');
    }
    emit(cfg, stdout, &body)
}

pub fn cmd_count(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let sys = load_system(cfg)?;
    let plan = SamplingPlan::new(&sys, cfg.length, cfg.mode)?;
    writeln!(stderr, "{}", stats_line(plan.ladder.stats()))?;
    emit(cfg, stdout, &format!("{}\n", plan.count()?))
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub trace: String,
    pub analytic: String,
    pub expected: String,
    pub count: u64,
    pub empirical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    /// Times a trace was drawn.
    pub occurrences: u64,
    /// Distinct traces drawn that many times.
    pub traces: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub length: u64,
    pub mode: Mode,
    pub seed: u64,
    pub samples: usize,
    pub count: String,
    pub enumerated: Option<usize>,
    pub analytic_sum: Option<String>,
    pub analytic_matches_expected: Option<bool>,
    pub traces: Vec<TraceRow>,
    pub chi_square: Option<oracle::ChiSquare>,
    pub js_distance: Option<f64>,
    pub tv_distance: Option<f64>,
    pub histogram: Vec<HistogramBin>,
    pub histogram_js_distance: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn check_report(cfg: &RunConfig) -> Result<CheckReport> {
    let sys = load_system(cfg)?;
    let plan = SamplingPlan::new(&sys, cfg.length, cfg.mode)?;
    let count = plan.count()?;
    if count.is_zero() {
        return Err(Error::NoTrace);
    }
    let bits = sys.bits();
    let mut warnings = Vec::new();

    // analytic section: independent of the sample size
    let exact = ExplicitSystem::from_system(&sys, oracle::DEFAULT_EXTRACT_CAP)
        .and_then(|ex| oracle::exact_trace_distribution(&ex, cfg.length as usize, cfg.enum_cap));
    let exact = match exact {
        Ok(d) => Some(d),
        Err(Error::EnumerationCap { cap }) | Err(Error::Dd(DdError::EnumerationCap { cap })) => {
            warnings.push(format!("more than {cap} traces; per-trace comparison skipped"));
            None
        }
        Err(e) => return Err(e),
    };
    let mut rows: BTreeMap<Trace, (Value, Value, u64)> = BTreeMap::new();
    let mut analytic_sum = None;
    let mut matches = None;
    if let Some(exact) = &exact {
        let mut sum = Value::zero();
        let mut ok = true;
        for (t, target) in exact {
            let p = plan_trace_probability(&plan, t)?;
            sum += &p;
            ok &= &p == target;
            rows.insert(t.clone(), (p, target.clone(), 0));
        }
        analytic_sum = Some(sum.to_string());
        matches = Some(ok);
    }

    let traces = plan_sample_streams(&plan, cfg.samples, cfg.seed, cfg.jobs)?;
    let mut counts: BTreeMap<Trace, u64> = BTreeMap::new();
    for t in traces {
        *counts.entry(t).or_insert(0) += 1;
    }
    for (t, c) in &counts {
        match rows.get_mut(t) {
            Some(r) => r.2 = *c,
            None => {
                if exact.is_some() {
                    return Err(Error::Internal(format!("sampled {} is not an enumerated trace", t.to_line(bits))));
                }
                let p = plan_trace_probability(&plan, t)?;
                rows.insert(t.clone(), (p.clone(), p, *c));
            }
        }
    }

    let n = cfg.samples as u64;
    let (mut chi, mut js, mut tv, mut hist_js) = (None, None, None, None);
    let hist_counts: Vec<u64> = rows.values().map(|r| r.2).collect();
    if exact.is_some() && n > 0 {
        let expected = Distribution::from_exact(rows.iter().map(|(t, r)| (t.clone(), &r.1)));
        let observed: BTreeMap<Trace, u64> = rows.iter().map(|(t, r)| (t.clone(), r.2)).collect();
        let empirical = Distribution::from_counts(observed.clone());
        chi = Some(oracle::chi_square(&observed, &expected)?);
        js = Some(oracle::js_distance(&empirical, &expected));
        tv = Some(oracle::tv_distance(&empirical, &expected));
        let uniform = rows.values().all(|r| r.1 == rows.values().next().expect("nonempty").1);
        if uniform {
            let hist = Distribution::from_counts(oracle::frequency_of_frequencies(hist_counts.iter().copied()));
            let ideal = oracle::uniform_frequency_histogram(n, rows.len() as u64);
            hist_js = Some(oracle::js_distance(&hist, &ideal));
        }
    }
    let histogram = oracle::frequency_of_frequencies(hist_counts.into_iter().filter(|&c| c > 0 || exact.is_some()))
        .into_iter()
        .map(|(occurrences, traces)| HistogramBin { occurrences, traces })
        .collect();
    let traces = rows
        .into_iter()
        .map(|(t, (p, e, c))| TraceRow {
            trace: t.to_line(bits),
            analytic: p.to_string(),
            expected: e.to_string(),
            count: c,
            empirical: if n > 0 { c as f64 / n as f64 } else { 0.0 },
        })
        .collect();
    Ok(CheckReport {
        length: cfg.length,
        mode: cfg.mode,
        seed: cfg.seed,
        samples: cfg.samples,
        count: count.to_string(),
        enumerated: exact.as_ref().map(|e| e.len()),
        analytic_sum,
        analytic_matches_expected: matches,
        traces,
        chi_square: chi,
        js_distance: js,
        tv_distance: tv,
        histogram,
        histogram_js_distance: hist_js,
        warnings,
    })
}

pub fn cmd_check(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let report = check_report(cfg)?;
    for w in &report.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    emit(cfg, stdout, &(serde_json::to_string_pretty(&report).expect("report") + "\n"))
}

pub fn cmd_stats(cfg: &RunConfig, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<()> {
    let sys = load_system(cfg)?;
    let plain = SamplingPlan::new(&sys, cfg.length, Mode::Plain)?;
    let restricted = SamplingPlan::new(&sys, cfg.length, Mode::Restricted)?;
    let report = json!({
        "length": cfg.length,
        "padded_length": plain.projection.padded_length,
        "count": plain.count()?.to_string(),
        "plain": plain.ladder.stats(),
        "restricted": restricted.ladder.stats(),
    });
    emit(cfg, stdout, &(serde_json::to_string_pretty(&report).expect("stats") + "\n"))
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    let (args, f): (&RunArgs, fn(&RunConfig, &mut dyn Write, &mut dyn Write) -> Result<()>) = match &cli.command {
        Command::Sample(a) => (a, cmd_sample),
        Command::Count(a) => (a, cmd_count),
        Command::Check(a) => (a, cmd_check),
        Command::Stats(a) => (a, cmd_stats),
    };
    let result = RunConfig::from_args(args).and_then(|cfg| f(&cfg, stdout, stderr));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
