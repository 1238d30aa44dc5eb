//! Command-line front end for the case-management simulator.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tempfile::NamedTempFile;

use caseflow::scenario::metrics::write_samples_csv;
use caseflow::scenario::{
    compare_strategies, run_scenario, run_scenario_traced, sensitivity_sweep, ArrivalProcess,
    ConfigError, ExperimentError, ScenarioConfig, SweepParameter,
};

#[derive(Parser)]
#[command(
    name = "caseflow",
    version,
    about = "Simulate versioned collaboration on cancer case records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print its normalized form and digest.
    Validate(Common),
    /// Run one scenario; writes report.txt and samples.csv.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        /// Also write trace.tsv and audit.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// Paired-seed comparison of both strategies; writes comparison.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value_t = 30)]
        runs: usize,
    },
    /// Vary one parameter; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// arrival_rate (per day), capacity:<resource>, feedback_latency (s),
        /// validation_latency (s) or p_flag.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Output {
    #[arg(long, default_value = "caseflow-out")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Config(c),
            ExperimentError::UnknownParameter(_) | ExperimentError::NoRuns => {
                Failure::Usage(e.to_string())
            }
            ExperimentError::Sim(s) => Failure::Runtime(s.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(common) => {
            let config = load(&common)?;
            print!("{}", describe(&config));
        }
        Command::Run { common, out, trace } => {
            let config = load(&common)?;
            let outcome = if trace {
                run_scenario_traced(&config)
            } else {
                run_scenario(&config)
            }
            .map_err(|e| Failure::Runtime(e.to_string()))?;
            let mut files = vec![
                ("report.txt", outcome.report.to_text().into_bytes()),
                (
                    "samples.csv",
                    render(|w| write_samples_csv(&outcome.samples, w))?,
                ),
            ];
            if trace {
                files.push(("trace.tsv", render(|w| outcome.engine.write_trace(w))?));
                files.push((
                    "audit.jsonl",
                    render(|w| outcome.book.audit().write_jsonl(w))?,
                ));
            }
            write_all(&out.out, &files)?;
            let r = &outcome.report;
            println!(
                "{} cases closed, {} merges, {} samples; wrote {}",
                r.cases_closed,
                r.merges,
                outcome.samples.len(),
                out.out.display()
            );
        }
        Command::Compare { common, out, runs } => {
            let config = load(&common)?;
            let cmp = compare_strategies(&config, runs)?;
            write_all(
                &out.out,
                &[("comparison.csv", render(|w| cmp.write_csv(w))?)],
            )?;
            println!(
                "{runs} paired runs; wrote {}",
                out.out.join("comparison.csv").display()
            );
        }
        Command::Sweep {
            common,
            out,
            runs,
            param,
            values,
        } => {
            let config = load(&common)?;
            let parameter: SweepParameter = param.parse()?;
            let sweep = sensitivity_sweep(&config, &parameter, &values, runs)?;
            write_all(&out.out, &[("sweep.csv", render(|w| sweep.write_csv(w))?)])?;
            println!(
                "{} values x {runs} runs; wrote {}",
                values.len(),
                out.out.join("sweep.csv").display()
            );
        }
    }
    Ok(())
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes each file through a temporary sibling and renames it into place,
/// so a failed run never leaves a truncated output behind.
fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(name))
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn secs(d: caseflow::time::SimDuration) -> String {
    format!("{} s", d.as_secs_f64())
}

fn describe(c: &ScenarioConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "strategy = {}", c.strategy.name());
    let _ = writeln!(s, "horizon = {}", secs(c.horizon));
    match &c.arrival {
        ArrivalProcess::Poisson { rate } => {
            let _ = writeln!(s, "arrival = poisson {} /s ({} /d)", rate, rate * 86_400.0);
        }
        ArrivalProcess::List { times } => {
            let list: Vec<String> = times.iter().map(|t| secs(*t)).collect();
            let _ = writeln!(s, "arrival = list [{}]", list.join(", "));
        }
    }
    let _ = writeln!(s, "feedback_latency = {}", secs(c.latencies.feedback));
    let _ = writeln!(s, "validation_latency = {}", secs(c.latencies.validation));
    let _ = writeln!(s, "response_delay = {}", secs(c.response_delay));
    let _ = writeln!(
        s,
        "baseline_sync_interval = {}",
        secs(c.baseline_sync_interval)
    );
    let _ = writeln!(s, "p_flag = {}", c.p_flag);
    let _ = writeln!(s, "core_fraction = {}", c.core_fraction);
    let _ = writeln!(s, "contributions_per_stage = {}", c.contributions_per_stage);
    let _ = writeln!(
        s,
        "meeting = {} after enrollment, {} long",
        secs(c.meeting.offset),
        secs(c.meeting.duration)
    );
    let _ = writeln!(s, "bottleneck_threshold = {}", c.bottleneck_threshold);
    let _ = writeln!(s, "wait_ceiling = {}", secs(c.wait_ceiling));
    let _ = writeln!(s, "dwell_model = {:?}", c.transitions.dwell_model());
    for (stage, mean) in c.transitions.dwell_means() {
        let _ = writeln!(s, "dwell.{stage} = {}", secs(*mean));
    }
    for e in c.transitions.edges() {
        let _ = writeln!(s, "transition {} -> {} = {}", e.from, e.to, e.p);
    }
    for r in &c.resources {
        let stage = r.stage.map_or("-".to_owned(), |st| st.to_string());
        let _ = writeln!(
            s,
            "resource {} ({:?}) capacity {} stage {stage}",
            r.name, r.kind, r.capacity
        );
    }
    let _ = writeln!(s, "pool = {} subjects", c.pool.len());
    let _ = writeln!(s, "digest = {}", c.digest());
    s
}
