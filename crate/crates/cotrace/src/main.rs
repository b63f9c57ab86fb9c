//! Command-line front end: simulate → reorder → check / independence /
//! monitor / oracle-diff, composable through files.
//!
//! Machine-readable reports go to stdout as JSON; a short human summary
//! goes to stderr. Exit codes: 0 success, 1 I/O failure, 2 malformed
//! input or contract violation, 3 property violation, 4 trace not
//! monitorable (warnings raised).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};
use serde_json::json;

use cotrace::dfa::{independence_percentage, Dfa, Verdict};
use cotrace::engine::{run_decoupled, run_inline, EngineError};
use cotrace::event::{
    parse_stream, parse_trace, serialize_action, serialize_event, Action, ActionKind,
};
use cotrace::monitor::{monitor_trace, SliceField, SoundnessClause};
use cotrace::order::{
    check_faithfulness, check_soundness, execution_order, faithfulness_ratio, linear_trace,
    project, ConcurrentExecution, ConcurrentTrace, OrderError,
};
use cotrace::sim::{list_scenarios, replay, simulate, SimError};

#[derive(Parser)]
#[command(
    name = "cotrace",
    version,
    about = "Sound concurrent traces for online monitoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, ValueEnum)]
enum Mode {
    #[default]
    Inline,
    Decoupled,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    Scenarios,
    /// Generate a scenario action stream (and optionally its ground truth).
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated overrides, e.g. `producers=2,iters=3`.
        #[arg(long)]
        params: Option<String>,
        /// Output stream file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the scheduled execution edges as JSON.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Timestamp an action stream into a concurrent trace.
    Reorder {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output trace file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the engine inline or behind a queue; output is identical.
        #[arg(long, value_enum, default_value_t)]
        mode: Mode,
        /// Instead of the clock engine, timestamp by arrival order (the
        /// naive total order; unsound for concurrent events).
        #[arg(long)]
        linear: bool,
    },
    /// Compare a trace against ground truth: soundness, faithfulness, ratio.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
    },
    /// Extract the independence relation of a DFA property.
    Independence {
        #[arg(long)]
        dfa: PathBuf,
    },
    /// Monitor a concurrent trace against a DFA property.
    Monitor {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dfa: PathBuf,
        /// Restrict the necessary-order check to events sharing this
        /// field (`res` or `val`).
        #[arg(long)]
        slice_key: Option<SliceField>,
    },
    /// Diff engine-derived order against the brute-force oracle.
    OracleDiff {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum CliError {
    Io(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Data(m) => m,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            std::io::stdout()
                .flush()
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn load_stream(path: &Path) -> Result<Vec<Action>, CliError> {
    let text = read_file(path)?;
    parse_stream(&text)
        .map_err(|(line, e)| CliError::Data(format!("{}:{line}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<ConcurrentTrace, CliError> {
    let text = read_file(path)?;
    let events = parse_trace(&text)
        .map_err(|(line, e)| CliError::Data(format!("{}:{line}: {e}", path.display())))?;
    Ok(ConcurrentTrace::new(events))
}

fn load_dfa(path: &Path) -> Result<Dfa, CliError> {
    let text = read_file(path)?;
    Dfa::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_execution(path: &Path) -> Result<ConcurrentExecution, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_params(text: Option<&str>) -> Result<BTreeMap<String, u64>, CliError> {
    let mut out = BTreeMap::new();
    let Some(text) = text else { return Ok(out) };
    for piece in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = piece
            .split_once('=')
            .ok_or_else(|| CliError::Data(format!("parameter `{piece}` is not key=value")))?;
        let value: u64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Data(format!("parameter `{key}` needs an integer value")))?;
        out.insert(key.trim().to_owned(), value);
    }
    Ok(out)
}

fn stream_text(actions: &[Action]) -> String {
    let mut text = String::new();
    for a in actions {
        text.push_str(&serialize_action(a));
        text.push('\n');
    }
    text
}

fn trace_text(trace: &ConcurrentTrace) -> String {
    let mut text = String::new();
    for e in &trace.events {
        text.push_str(&serialize_event(e));
        text.push('\n');
    }
    text
}

fn sim_error(e: SimError) -> CliError {
    CliError::Data(e.to_string())
}

fn engine_error(e: EngineError) -> CliError {
    CliError::Data(e.to_string())
}

fn oracle_error(e: OrderError) -> CliError {
    CliError::Data(e.to_string())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Scenarios => {
            let list: Vec<_> = list_scenarios()
                .into_iter()
                .map(|s| {
                    json!({
                        "name": s.name,
                        "description": s.description,
                        "params": s.defaults,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&list).unwrap());
            Ok(0)
        }
        Command::Simulate {
            scenario,
            seed,
            params,
            out,
            ground_truth,
        } => {
            let overrides = parse_params(params.as_deref())?;
            let sim = simulate(&scenario, seed, &overrides).map_err(sim_error)?;
            info!(
                "simulated {} actions for `{scenario}` (seed {seed})",
                sim.stream.len()
            );
            emit(out.as_deref(), &stream_text(&sim.stream))?;
            if let Some(path) = ground_truth {
                let text = serde_json::to_string(&sim.ground_truth).unwrap();
                write_file(&path, &text)?;
            }
            eprintln!(
                "simulate: scenario `{scenario}` seed {seed}: {} actions",
                sim.stream.len()
            );
            Ok(0)
        }
        Command::Reorder {
            input,
            out,
            mode,
            linear,
        } => {
            let actions = load_stream(&input)?;
            let trace = if linear {
                linear_trace(&actions)
            } else {
                match mode {
                    Mode::Inline => run_inline(actions.clone()).map_err(engine_error)?,
                    Mode::Decoupled => run_decoupled(actions.clone()).map_err(engine_error)?,
                }
            };
            debug!(
                "reorder: {} actions -> {} events",
                actions.len(),
                trace.len()
            );
            emit(out.as_deref(), &trace_text(&trace))?;
            eprintln!(
                "reorder: {} actions in, {} events out ({})",
                actions.len(),
                trace.len(),
                if linear {
                    "arrival order"
                } else {
                    "vector clocks"
                }
            );
            Ok(0)
        }
        Command::Check {
            input,
            ground_truth,
        } => {
            let trace = load_trace(&input)?;
            let exec = load_execution(&ground_truth)?;
            let soundness = check_soundness(&exec, &trace).map_err(oracle_error)?;
            let faithfulness = check_faithfulness(&exec, &trace).map_err(oracle_error)?;
            let ratio = if soundness.holds {
                let r = faithfulness_ratio(&exec, &trace).map_err(oracle_error)?;
                Some(*r.numer() as f64 / *r.denom() as f64)
            } else {
                None
            };
            let report = json!({
                "sound": soundness.holds,
                "faithful": faithfulness.holds,
                "ratio": ratio,
                "violations": soundness.violations,
                "missing": faithfulness.missing,
            });
            println!("{report}");
            eprintln!(
                "check: sound={} faithful={} ratio={}",
                soundness.holds,
                faithfulness.holds,
                ratio.map_or("n/a".to_owned(), |r| format!("{r:.4}")),
            );
            Ok(0)
        }
        Command::Independence { dfa } => {
            let dfa = load_dfa(&dfa)?;
            let pairs = dfa.compute_independence().off_diagonal();
            let percentage = independence_percentage(&dfa);
            let report = json!({ "pairs": pairs, "percentage": percentage });
            println!("{report}");
            eprintln!(
                "independence: {} of {} distinct pairs ({percentage:.1}%)",
                pairs.len(),
                dfa.alphabet().len() * dfa.alphabet().len() - dfa.alphabet().len(),
            );
            Ok(0)
        }
        Command::Monitor {
            input,
            dfa,
            slice_key,
        } => {
            let trace = load_trace(&input)?;
            let dfa = load_dfa(&dfa)?;
            let report = monitor_trace(&dfa, &trace, slice_key, SoundnessClause::ByConstruction);
            println!("{}", serde_json::to_string(&report).unwrap());
            eprintln!(
                "monitor: verdict={:?} t_mon={} warnings={}",
                report.verdict,
                report.t_mon,
                report.warnings.len()
            );
            // An unreliable verdict outranks the verdict itself.
            if !report.t_mon {
                Ok(4)
            } else if report.verdict == Verdict::Violation {
                Ok(3)
            } else {
                Ok(0)
            }
        }
        Command::OracleDiff { input } => {
            let actions = load_stream(&input)?;
            let sim = replay(&actions).map_err(sim_error)?;
            let trace = run_inline(actions.clone()).map_err(engine_error)?;
            let engine_order = trace.order_pairs();
            let all_labels = actions
                .iter()
                .filter(|a| a.kind == ActionKind::Regular)
                .filter_map(|a| a.label().map(str::to_owned))
                .collect();
            let oracle_order = project(
                &execution_order(&sim.ground_truth).map_err(oracle_error)?,
                &sim.ground_truth.actions,
                &all_labels,
            );
            let oracle_minus_engine: Vec<_> = oracle_order.difference(&engine_order).collect();
            let engine_minus_oracle: Vec<_> = engine_order.difference(&oracle_order).collect();
            let report = json!({
                "oracle_minus_engine": oracle_minus_engine,
                "engine_minus_oracle": engine_minus_oracle,
            });
            println!("{report}");
            eprintln!(
                "oracle-diff: oracle-only={} engine-only={}",
                oracle_minus_engine.len(),
                engine_minus_oracle.len()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("COTRACE_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
