//! Command-line driver for the state-reverting-vulnerability analyzer.
//!
//! Subcommands:
//!
//! * `analyze` — run the full pipeline on EVM bytecode or a model JSON
//!   file, optionally with a transaction-trace file, and emit a report.
//! * `disasm` — print a disassembly listing of a bytecode file.
//! * `sdg` — build the state-dependency graph of a model and write DOT.
//! * `corpus` — analyze every fixture in a directory and compare the
//!   derived vulnerable traces against an expectations file.
//!
//! Exit codes: 0 no findings / corpus matches, 1 error, 2 findings present
//! / corpus mismatch, 3 timeout. Logging is controlled by `SRV_SCAN_LOG`
//! (error|warn|info|debug).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::builder::TypedValueParser as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use srv_core::deps::{extract_asd, extract_rw, AsdEdge};
use srv_core::evm::cfg::cfg_to_dot;
use srv_core::evm::disasm::disassemble;
use srv_core::fsm::{fsm_to_dot, ingest_traces, TransactionTrace, TsdEdge};
use srv_core::model::{format_canonical_u256, load_model, validate_model, ContractModel, VarRef};
use srv_core::pipeline::{
    analyze_bytecode, analyze_model, AnalysisOptions, BytecodeAnalysis, ModelAnalysis,
};
use srv_core::report::{all_traces, report_json, report_text};
use srv_core::sdg::{build_sdg, sdg_to_dot, sdg_to_json, Segmentation};

const EXIT_CLEAN: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_FINDINGS: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "srv-scan",
    version,
    about = "Detects state-reverting vulnerabilities in smart contracts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a contract and report state-reverting vulnerabilities.
    Analyze(Box<AnalyzeArgs>),
    /// Disassemble an EVM bytecode file to a listing on stdout.
    Disasm {
        /// Bytecode file (hex text, 0x-prefixed or bare, or raw bytes).
        file: PathBuf,
    },
    /// Build the state-dependency graph of a model and write it as DOT.
    Sdg {
        /// Contract model JSON file.
        #[arg(long)]
        model: PathBuf,
        /// Output DOT file ("-" for stdout).
        #[arg(long)]
        dot: PathBuf,
    },
    /// Analyze every fixture under a directory and compare the derived
    /// vulnerable traces against an expectations file. Per-fixture
    /// pass/fail lines go to stderr; a machine-readable JSON summary goes
    /// to stdout.
    Corpus {
        /// Directory of fixtures: one subdirectory per contract containing
        /// model.json or bytecode.hex, plus optional traces.jsonl.
        dir: PathBuf,
        /// Expectations file mapping contract name to its expected traces.
        #[arg(long)]
        expected: PathBuf,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["bytecode", "model"]))]
struct AnalyzeArgs {
    /// EVM bytecode file (hex text, 0x-prefixed or bare, or raw bytes).
    #[arg(long, value_name = "FILE")]
    bytecode: Option<PathBuf>,
    /// Contract model JSON file.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Transaction traces (JSON Lines), enables temporal dependency mining.
    #[arg(long, value_name = "FILE")]
    traces: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Wall-clock budget for the analysis in seconds.
    #[arg(long, default_value_t = 600, value_parser = clap::value_parser!(u64).range(1..))]
    timeout_secs: u64,
    /// Trace-equivalence horizon for FSM state merging.
    #[arg(
        long,
        default_value_t = 2,
        value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize),
    )]
    fsm_k: usize,
    /// Minimum observation count for a mined temporal dependency.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    min_support: u64,
    /// Ignore temporal (TSD) edges during taint propagation.
    #[arg(long)]
    no_tsd: bool,
    /// Dump the disassembly listing ("-" for stdout; bytecode input only).
    #[arg(long, value_name = "FILE")]
    dump_disasm: Option<PathBuf>,
    /// Dump the recovered control-flow graph as DOT (bytecode input only).
    #[arg(long, value_name = "FILE")]
    dump_cfg: Option<PathBuf>,
    /// Dump the state-dependency graph as JSON.
    #[arg(long, value_name = "FILE")]
    dump_sdg: Option<PathBuf>,
    /// Dump the merged trace FSM as DOT (requires --traces).
    #[arg(long, value_name = "FILE")]
    dump_fsm: Option<PathBuf>,
    /// Dump assertion-based state dependencies as JSON.
    #[arg(long, value_name = "FILE")]
    dump_asd: Option<PathBuf>,
    /// Dump mined temporal state dependencies as JSON.
    #[arg(long, value_name = "FILE")]
    dump_tsd: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

enum Input {
    Bytecode(Vec<u8>),
    Model(Box<ContractModel>),
}

enum Outcome {
    Model(Box<ModelAnalysis>),
    Bytecode(Box<BytecodeAnalysis>),
}

impl Outcome {
    fn analysis(&self) -> &ModelAnalysis {
        match self {
            Outcome::Model(a) => a,
            Outcome::Bytecode(b) => &b.analysis,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SRV_SCAN_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => run_analyze(*args),
        Command::Disasm { file } => run_disasm(&file),
        Command::Sdg { model, dot } => run_sdg(&model, &dot),
        Command::Corpus { dir, expected } => run_corpus(&dir, &expected),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<u8> {
    let traces = args.traces.as_deref().map(read_traces).transpose()?;
    let input = match (&args.bytecode, &args.model) {
        (Some(path), None) => Input::Bytecode(read_bytecode(path)?),
        (None, Some(path)) => Input::Model(Box::new(read_model(path)?)),
        _ => unreachable!("clap enforces exactly one input"),
    };
    let opts = AnalysisOptions {
        fsm_k: args.fsm_k,
        min_support: args.min_support,
        use_tsd: !args.no_tsd,
        ..AnalysisOptions::default()
    };

    let budget = Duration::from_secs(args.timeout_secs);
    let Some(outcome) = run_with_timeout(input, traces, opts, budget)? else {
        eprintln!(
            "error: analysis exceeded the {} s budget; partial diagnostics follow",
            args.timeout_secs
        );
        match &args.bytecode {
            Some(p) => eprintln!("  input: bytecode {}", p.display()),
            None => {
                eprintln!("  input: model {}", args.model.as_ref().expect("one input").display())
            }
        }
        return Ok(EXIT_TIMEOUT);
    };

    write_dumps(&args, &outcome)?;
    let a = outcome.analysis();
    let body = match args.format {
        Format::Json => report_json(&a.report),
        Format::Text => report_text(&a.model, &a.sdg, &a.report, &a.detect.findings),
    };
    match &args.out {
        Some(path) => fs::write(path, &body)
            .with_context(|| format!("writing report to {}", path.display()))?,
        None => print!("{body}"),
    }
    Ok(if a.report.findings.is_empty() { EXIT_CLEAN } else { EXIT_FINDINGS })
}

/// Runs the pipeline on a worker thread and waits up to `budget`. `None`
/// means the budget elapsed (the worker is abandoned; the process exits
/// right after).
fn run_with_timeout(
    input: Input,
    traces: Option<Vec<TransactionTrace>>,
    opts: AnalysisOptions,
    budget: Duration,
) -> Result<Option<Outcome>> {
    let (tx, rx) = mpsc::channel();
    std::thread::Builder::new()
        .name("analysis".into())
        .spawn(move || {
            let result = match input {
                Input::Model(m) => {
                    analyze_model(*m, traces.as_deref(), Vec::new(), BTreeSet::new(), &opts)
                        .map(|a| Outcome::Model(Box::new(a)))
                }
                Input::Bytecode(code) => analyze_bytecode(&code, traces.as_deref(), &opts)
                    .map(|b| Outcome::Bytecode(Box::new(b))),
            };
            let _ = tx.send(result);
        })
        .context("spawning analysis thread")?;
    match rx.recv_timeout(budget) {
        Ok(Ok(outcome)) => Ok(Some(outcome)),
        Ok(Err(e)) => Err(e.into()),
        Err(mpsc::RecvTimeoutError::Timeout) => Ok(None),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            bail!("analysis thread terminated without a result")
        }
    }
}

fn write_dumps(args: &AnalyzeArgs, outcome: &Outcome) -> Result<()> {
    let a = outcome.analysis();
    if let Some(path) = &args.dump_disasm {
        match outcome {
            Outcome::Bytecode(b) => write_output(path, &b.disassembly.listing())?,
            Outcome::Model(_) => {
                log::warn!("--dump-disasm ignored: model input has no bytecode artifacts")
            }
        }
    }
    if let Some(path) = &args.dump_cfg {
        match outcome {
            Outcome::Bytecode(b) => write_output(path, &cfg_to_dot(&b.cfg))?,
            Outcome::Model(_) => {
                log::warn!("--dump-cfg ignored: model input has no bytecode artifacts")
            }
        }
    }
    if let Some(path) = &args.dump_sdg {
        let doc = serde_json::to_string_pretty(&sdg_to_json(&a.sdg))
            .expect("SDG JSON serialization cannot fail");
        write_output(path, &(doc + "\n"))?;
    }
    if let Some(path) = &args.dump_fsm {
        match &a.fsm {
            Some(fsm) => write_output(path, &fsm_to_dot(fsm))?,
            None => log::warn!("--dump-fsm ignored: no traces given"),
        }
    }
    if let Some(path) = &args.dump_asd {
        write_output(path, &asd_json(&a.asd))?;
    }
    if let Some(path) = &args.dump_tsd {
        write_output(path, &tsd_json(&a.tsd))?;
    }
    Ok(())
}

fn var_json(v: &VarRef) -> serde_json::Value {
    serde_json::json!({
        "kind": v.kind.as_str(),
        "slot": format_canonical_u256(v.slot),
    })
}

fn asd_json(edges: &[AsdEdge]) -> String {
    let arr: Vec<serde_json::Value> = edges
        .iter()
        .map(|e| {
            serde_json::json!({
                "reader": e.reader,
                "writer": e.writer,
                "var": var_json(&e.var),
                "site": e.assert_site,
            })
        })
        .collect();
    serde_json::to_string_pretty(&arr).expect("ASD serialization cannot fail") + "\n"
}

fn tsd_json(edges: &[TsdEdge]) -> String {
    let arr: Vec<serde_json::Value> = edges
        .iter()
        .map(|e| {
            serde_json::json!({
                "dependent": e.dependent,
                "prerequisite": e.prerequisite,
            })
        })
        .collect();
    serde_json::to_string_pretty(&arr).expect("TSD serialization cannot fail") + "\n"
}

fn run_disasm(file: &Path) -> Result<u8> {
    let code = read_bytecode(file)?;
    let d = disassemble(&code).with_context(|| format!("disassembling {}", file.display()))?;
    print!("{}", d.listing());
    Ok(EXIT_CLEAN)
}

fn run_sdg(model_path: &Path, dot_path: &Path) -> Result<u8> {
    let model = read_model(model_path)?;
    let violations = validate_model(&model);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
        bail!("invalid model {}: {}", model_path.display(), lines.join("; "));
    }
    let seg = Segmentation::from_model(&model);
    let rw = extract_rw(&model);
    let asd = extract_asd(&model);
    let g = build_sdg(&model, &seg, &rw, &asd, &[])?;
    write_output(dot_path, &sdg_to_dot(&g))?;
    Ok(EXIT_CLEAN)
}

/// One vulnerable trace as the corpus expectations file records it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRecord {
    rule: String,
    trace: Vec<String>,
    vars: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpectedContract {
    #[serde(default)]
    traces: Vec<TraceRecord>,
}

fn run_corpus(dir: &Path, expected_path: &Path) -> Result<u8> {
    let expected: BTreeMap<String, ExpectedContract> = serde_json::from_str(
        &fs::read_to_string(expected_path)
            .with_context(|| format!("reading expectations {}", expected_path.display()))?,
    )
    .with_context(|| format!("parsing expectations {}", expected_path.display()))?;

    let mut fixtures: BTreeMap<String, PathBuf> = BTreeMap::new();
    let entries =
        fs::read_dir(dir).with_context(|| format!("reading corpus directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if !path.is_dir() {
            continue;
        }
        if path.join("model.json").exists() || path.join("bytecode.hex").exists() {
            let name = path
                .file_name()
                .expect("directory entries have names")
                .to_string_lossy()
                .into_owned();
            fixtures.insert(name, path);
        }
    }
    for name in expected.keys() {
        if !fixtures.contains_key(name) {
            bail!(
                "missing fixture: expectation '{name}' has no subdirectory with \
                 model.json or bytecode.hex under {}",
                dir.display()
            );
        }
    }
    for name in fixtures.keys() {
        if !expected.contains_key(name) {
            bail!(
                "missing expectation: corpus contract '{name}' has no entry in {}",
                expected_path.display()
            );
        }
    }

    let mut contracts = serde_json::Map::new();
    let mut passed = 0usize;
    let mut expected_total = 0usize;
    let mut actual_total = 0usize;
    let mut matched_total = 0usize;
    for (name, fixture_dir) in &fixtures {
        let started = Instant::now();
        let analysis = analyze_fixture(fixture_dir)
            .with_context(|| format!("analyzing corpus contract '{name}'"))?;
        let actual: BTreeSet<TraceRecord> =
            all_traces(&analysis.model, &analysis.sdg, &analysis.detect.findings)
                .into_iter()
                .map(|t| TraceRecord { rule: t.rule, trace: t.route, vars: t.vars })
                .collect();
        let want: BTreeSet<TraceRecord> = expected[name].traces.iter().cloned().collect();
        let missing: Vec<&TraceRecord> = want.difference(&actual).collect();
        let extra: Vec<&TraceRecord> = actual.difference(&want).collect();
        let pass = missing.is_empty() && extra.is_empty();
        expected_total += want.len();
        actual_total += actual.len();
        matched_total += want.intersection(&actual).count();
        if pass {
            passed += 1;
            eprintln!(
                "PASS {name} ({} traces, {} ms)",
                actual.len(),
                started.elapsed().as_millis()
            );
        } else {
            eprintln!("FAIL {name}");
            for t in &missing {
                eprintln!("  missing: {}", render_trace(t));
            }
            for t in &extra {
                eprintln!("  extra: {}", render_trace(t));
            }
        }
        contracts.insert(
            name.clone(),
            serde_json::json!({
                "pass": pass,
                "expected": want,
                "actual": actual,
                "missing": missing,
                "extra": extra,
                "report": analysis.report,
            }),
        );
    }

    let summary = serde_json::json!({
        "contracts": contracts,
        "totals": {
            "contracts": fixtures.len(),
            "passed": passed,
            "failed": fixtures.len() - passed,
            "expected_traces": expected_total,
            "actual_traces": actual_total,
            "matched_traces": matched_total,
        },
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail")
    );
    Ok(if passed == fixtures.len() { EXIT_CLEAN } else { EXIT_FINDINGS })
}

fn render_trace(t: &TraceRecord) -> String {
    let vars: Vec<&str> = t.vars.iter().map(String::as_str).collect();
    format!("[{}] {} → {{{}}}", t.rule, t.trace.join(" → "), vars.join(", "))
}

fn analyze_fixture(dir: &Path) -> Result<ModelAnalysis> {
    let traces_path = dir.join("traces.jsonl");
    let traces = if traces_path.exists() { Some(read_traces(&traces_path)?) } else { None };
    let opts = AnalysisOptions::default();
    let model_path = dir.join("model.json");
    if model_path.exists() {
        let model = read_model(&model_path)?;
        Ok(analyze_model(model, traces.as_deref(), Vec::new(), BTreeSet::new(), &opts)?)
    } else {
        let code = read_bytecode(&dir.join("bytecode.hex"))?;
        Ok(analyze_bytecode(&code, traces.as_deref(), &opts)?.analysis)
    }
}

fn read_model(path: &Path) -> Result<ContractModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let model = load_model(&text).with_context(|| format!("parsing model {}", path.display()))?;
    Ok(model)
}

fn read_traces(path: &Path) -> Result<Vec<TransactionTrace>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading traces {}", path.display()))?;
    let traces =
        ingest_traces(&text).with_context(|| format!("parsing traces {}", path.display()))?;
    Ok(traces)
}

/// Reads a bytecode file: hex text (0x-prefixed or bare, whitespace
/// ignored) or raw bytes.
fn read_bytecode(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).with_context(|| format!("reading bytecode {}", path.display()))?;
    let bytes = match std::str::from_utf8(&raw) {
        Ok(text) => {
            let compact: String = text.split_whitespace().collect();
            let digits = compact.strip_prefix("0x").unwrap_or(&compact);
            if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_hexdigit()) {
                if !digits.len().is_multiple_of(2) {
                    bail!("bytecode file {} holds an odd number of hex digits", path.display());
                }
                hex::decode(digits).expect("checked hex digits")
            } else {
                raw
            }
        }
        Err(_) => raw,
    };
    if bytes.is_empty() {
        bail!("bytecode file {} is empty", path.display());
    }
    Ok(bytes)
}

/// Writes `content` to `path`, or to stdout when `path` is `-`.
fn write_output(path: &Path, content: &str) -> Result<()> {
    if path == Path::new("-") {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(content.as_bytes())?;
        stdout.flush()?;
    } else {
        fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
