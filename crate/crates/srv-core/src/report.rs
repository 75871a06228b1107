//! Deterministic report rendering.
//!
//! The JSON report is UTF-8, newline-terminated, with a stable key order;
//! identical analyses produce byte-identical reports. The text format
//! prints one paragraph per finding with arrow-notation vulnerable traces
//! (entry function → ... → tainted variables).

use crate::detector::{Finding, IndicatorWitness};
use crate::model::ContractModel;
use crate::sdg::{NodeId, Sdg, SdgNode};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contract: Option<String>,
    pub findings: Vec<ReportFinding>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportFinding {
    pub rule: String,
    pub indicator_function: String,
    pub entry_trace: Vec<String>,
    pub tainted_state_vars: Vec<String>,
    /// SDG node-id witness path per tainted var, aligned with
    /// `tainted_state_vars`.
    pub paths: Vec<Vec<NodeId>>,
    pub confidence: String,
    pub witness: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Diagnostics {
    pub unreachable_indicators: Vec<String>,
    pub lift_warnings: Vec<String>,
}

/// A vulnerable trace in the paper's arrow notation: the function route
/// from the indicator plus the state variables tainted along it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct VulnTrace {
    pub rule: String,
    pub route: Vec<String>,
    pub vars: BTreeSet<String>,
}

impl VulnTrace {
    pub fn render(&self) -> String {
        let vars: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        format!("{} → {{{}}}", self.route.join(" → "), vars.join(", "))
    }
}

/// Projects a finding's witness paths onto function routes: block nodes map
/// to their function, consecutive duplicates collapse, vars sharing a route
/// group together.
pub fn finding_traces(m: &ContractModel, g: &Sdg, finding: &Finding) -> Vec<VulnTrace> {
    let mut grouped: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
    for (var, path) in &finding.tainted {
        let mut route: Vec<String> = Vec::new();
        for node in path {
            if let Some(SdgNode::Block { function, .. }) = g.node(*node) {
                if route.last() != Some(function) {
                    route.push(function.clone());
                }
            }
        }
        grouped.entry(route).or_default().insert(m.var_display(var));
    }
    grouped
        .into_iter()
        .map(|(route, vars)| VulnTrace { rule: finding.rule.as_str().to_string(), route, vars })
        .collect()
}

/// All distinct vulnerable traces of an analysis (the unit the corpus
/// expectations compare).
pub fn all_traces(m: &ContractModel, g: &Sdg, findings: &[Finding]) -> BTreeSet<VulnTrace> {
    findings.iter().flat_map(|f| finding_traces(m, g, f)).collect()
}

pub fn build_report(
    m: &ContractModel,
    findings: &[Finding],
    unreachable_indicators: Vec<String>,
    lift_warnings: Vec<String>,
) -> Report {
    Report {
        contract: m.address.map(|a| format!("0x{}", hex::encode(a))),
        findings: findings
            .iter()
            .map(|f| ReportFinding {
                rule: f.rule.as_str().to_string(),
                indicator_function: f.indicator_function.clone(),
                entry_trace: f.entry_trace.clone(),
                tainted_state_vars: f.tainted.iter().map(|(v, _)| m.var_display(v)).collect(),
                paths: f.tainted.iter().map(|(_, p)| p.clone()).collect(),
                confidence: f.confidence.as_str().to_string(),
                witness: witness_json(&f.indicator.witness),
            })
            .collect(),
        diagnostics: Diagnostics { unreachable_indicators, lift_warnings },
    }
}

fn witness_json(w: &IndicatorWitness) -> serde_json::Value {
    match w {
        IndicatorWitness::Randomness { atom, dependence, dep_site } => serde_json::json!({
            "kind": "randomness",
            "atom": atom.as_str(),
            "dependence": dependence.as_str(),
            "site": dep_site,
        }),
        IndicatorWitness::LoopExternalCall { loop_site, call_site, via_result_assert } => {
            serde_json::json!({
                "kind": "loop-external-call",
                "loop_site": loop_site,
                "call_site": call_site,
                "via_result_assert": via_result_assert,
            })
        }
    }
}

/// Canonical JSON bytes: pretty-printed, newline-terminated.
pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Human-readable report with arrow-notation traces.
pub fn report_text(m: &ContractModel, g: &Sdg, report: &Report, findings: &[Finding]) -> String {
    let mut out = String::new();
    match &report.contract {
        Some(addr) => out.push_str(&format!("contract {addr}\n")),
        None => out.push_str("contract <unnamed>\n"),
    }
    if report.findings.is_empty() {
        out.push_str("no findings\n");
    }
    for (rf, f) in report.findings.iter().zip(findings) {
        out.push_str(&format!(
            "\nfinding: {} at {} (confidence {})\n",
            rf.rule, rf.indicator_function, rf.confidence
        ));
        out.push_str(&format!("  entry: {}\n", rf.entry_trace.join(" → ")));
        for trace in finding_traces(m, g, f) {
            out.push_str(&format!("  trace: {}\n", trace.render()));
        }
    }
    if !report.diagnostics.unreachable_indicators.is_empty() {
        out.push_str("\nunreachable indicators:\n");
        for d in &report.diagnostics.unreachable_indicators {
            out.push_str(&format!("  - {d}\n"));
        }
    }
    if !report.diagnostics.lift_warnings.is_empty() {
        out.push_str("\nlift warnings:\n");
        for w in &report.diagnostics.lift_warnings {
            out.push_str(&format!("  - {w}\n"));
        }
    }
    out
}
