//! End-to-end analysis pipelines.
//!
//! [`analyze_model`] runs the dependency extraction, optional trace
//! mining, graph construction, detection, and report assembly for a
//! validated contract model. [`analyze_bytecode`] first lifts EVM runtime
//! (or creation) code into a model and then delegates to the same path,
//! translating trace labels given as 4-byte selectors into lifted
//! function names.

use crate::deps::{extract_asd, extract_rw, AsdEdge, RwEdge};
use crate::detector::{detect, DetectOptions, DetectOutput};
use crate::evm::cfg::{build_cfg, Cfg};
use crate::evm::disasm::{detect_creation, disassemble, DisasmError, Disassembly};
use crate::evm::functions::{discover_functions, FunctionMap};
use crate::evm::lift::{lift_to_model, LiftWarning};
use crate::evm::loops::{find_loops, NaturalLoop};
use crate::fsm::{
    build_initial_fsm, extract_tsd, merge_states, Fsm, TraceError, TransactionTrace, TsdEdge,
};
use crate::model::{validate_model, ContractModel, Violation};
use crate::report::{build_report, Report};
use crate::sdg::{build_sdg, Sdg, SdgError, Segmentation};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("model failed validation: {}", violation_summary(.0))]
    InvalidModel(Vec<Violation>),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Sdg(#[from] SdgError),
    #[error(transparent)]
    Disasm(#[from] DisasmError),
}

fn violation_summary(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Future depth for FSM state merging.
    pub fsm_k: usize,
    /// Minimum transition support for a mined sequential dependency.
    pub min_support: u64,
    /// Include mined sequential dependencies in the graph and detector.
    pub use_tsd: bool,
    pub shapes: crate::detector::AccessControlShapes,
    pub taint: crate::detector::TaintSpec,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            fsm_k: 2,
            min_support: 1,
            use_tsd: true,
            shapes: Default::default(),
            taint: Default::default(),
        }
    }
}

/// Everything the model pipeline produces.
#[derive(Debug, Clone)]
pub struct ModelAnalysis {
    pub model: ContractModel,
    pub rw: Vec<RwEdge>,
    pub asd: Vec<AsdEdge>,
    /// Mined sequential dependencies restricted to model functions
    /// (populated even when `use_tsd` is off, for ablation comparisons).
    pub tsd: Vec<TsdEdge>,
    pub initial_fsm: Option<Fsm>,
    pub fsm: Option<Fsm>,
    pub segmentation: Segmentation,
    pub sdg: Sdg,
    pub detect: DetectOutput,
    pub report: Report,
}

/// Runs the full analysis over an in-memory model.
pub fn analyze_model(
    model: ContractModel,
    traces: Option<&[TransactionTrace]>,
    lift_warnings: Vec<String>,
    low_confidence: BTreeSet<String>,
    opts: &AnalysisOptions,
) -> Result<ModelAnalysis, PipelineError> {
    let violations = validate_model(&model);
    if !violations.is_empty() {
        return Err(PipelineError::InvalidModel(violations));
    }

    let rw = extract_rw(&model);
    let asd = extract_asd(&model);

    let (initial_fsm, fsm, tsd) = match traces {
        Some(traces) if !traces.is_empty() => {
            let initial = build_initial_fsm(traces);
            let merged = merge_states(&initial, opts.fsm_k);
            let names: BTreeSet<&str> = model.functions.iter().map(|f| f.name.as_str()).collect();
            let tsd: Vec<TsdEdge> = extract_tsd(&merged, opts.min_support)
                .into_iter()
                .filter(|e| {
                    names.contains(e.dependent.as_str()) && names.contains(e.prerequisite.as_str())
                })
                .collect();
            (Some(initial), Some(merged), tsd)
        }
        _ => (None, None, Vec::new()),
    };
    let tsd_used: &[TsdEdge] = if opts.use_tsd { &tsd } else { &[] };

    let segmentation = Segmentation::from_model(&model);
    let sdg = build_sdg(&model, &segmentation, &rw, &asd, tsd_used)?;
    let detect_opts = DetectOptions {
        use_tsd: opts.use_tsd,
        shapes: opts.shapes,
        taint: opts.taint.clone(),
        low_confidence_functions: low_confidence,
    };
    let detect_out = detect(&model, &sdg, &segmentation, &detect_opts);
    let report = build_report(
        &model,
        &detect_out.findings,
        detect_out.unreachable_indicators.clone(),
        lift_warnings,
    );
    Ok(ModelAnalysis {
        model,
        rw,
        asd,
        tsd,
        initial_fsm,
        fsm,
        segmentation,
        sdg,
        detect: detect_out,
        report,
    })
}

/// Model pipeline output plus the frontend artifacts it was lifted from.
#[derive(Debug, Clone)]
pub struct BytecodeAnalysis {
    pub disassembly: Disassembly,
    pub cfg: Cfg,
    pub functions: FunctionMap,
    pub loops: Vec<NaturalLoop>,
    pub lift_warnings: Vec<LiftWarning>,
    pub analysis: ModelAnalysis,
}

/// Lifts EVM bytecode and runs the full analysis. Creation code (a deploy
/// wrapper that copies and returns the runtime segment) is detected and
/// unwrapped automatically.
pub fn analyze_bytecode(
    code: &[u8],
    traces: Option<&[TransactionTrace]>,
    opts: &AnalysisOptions,
) -> Result<BytecodeAnalysis, PipelineError> {
    let runtime: &[u8] = match detect_creation(code) {
        Some(range) => &code[range],
        None => code,
    };
    let disassembly = disassemble(runtime)?;
    let cfg = build_cfg(&disassembly);
    let functions = discover_functions(&cfg);
    let loops = find_loops(&cfg);
    let lifted = lift_to_model(&cfg, &functions, &loops);
    let warning_strings: Vec<String> = lifted.warnings.iter().map(|w| w.to_string()).collect();

    let mapped: Option<Vec<TransactionTrace>> =
        traces.map(|ts| map_trace_labels(ts, &lifted.model));
    let analysis = analyze_model(
        lifted.model,
        mapped.as_deref(),
        warning_strings,
        lifted.low_confidence,
        opts,
    )?;
    Ok(BytecodeAnalysis {
        disassembly,
        cfg,
        functions,
        loops,
        lift_warnings: lifted.warnings,
        analysis,
    })
}

/// Replaces `0x`-prefixed 4-byte selector labels in traces with the names
/// of the lifted functions bearing those selectors. Unmatched labels pass
/// through unchanged.
fn map_trace_labels(traces: &[TransactionTrace], model: &ContractModel) -> Vec<TransactionTrace> {
    let by_selector: BTreeMap<[u8; 4], &str> =
        model.functions.iter().filter_map(|f| f.selector.map(|s| (s, f.name.as_str()))).collect();
    traces
        .iter()
        .map(|t| TransactionTrace {
            sender: t.sender.clone(),
            calls: t
                .calls
                .iter()
                .map(|c| {
                    parse_selector(c)
                        .and_then(|s| by_selector.get(&s))
                        .map(|n| n.to_string())
                        .unwrap_or_else(|| c.clone())
                })
                .collect(),
        })
        .collect()
}

fn parse_selector(s: &str) -> Option<[u8; 4]> {
    let h = s.strip_prefix("0x")?;
    if h.len() != 8 {
        return None;
    }
    let bytes = hex::decode(h).ok()?;
    Some([bytes[0], bytes[1], bytes[2], bytes[3]])
}
