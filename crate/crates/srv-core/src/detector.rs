//! State-reverting vulnerability detection.
//!
//! Two indicator rules over the model:
//!
//! * **R1 (profit gain)** — a function writes a state variable with a value
//!   that depends on a randomness atom (data dependence through the written
//!   expression, or control dependence through a preceding assert / an
//!   enclosing loop bound), and no access-control assert guards the write.
//!   An attacker can revert unfavorable outcomes and retry.
//! * **R2 (denial of service)** — a function runs an external call inside a
//!   loop (or asserts on an external call's result inside a loop) while the
//!   contract state is modified in that function, without access control.
//!   Any callee that reverts wedges the loop for everyone.
//!
//! A finding is an indicator plus: an entry trace (shortest call chain from
//! a public/external function), the set of state variables reachable from
//! the indicator block over SDG edges (taint), and per-variable witness
//! paths.

use crate::model::{ContractModel, EnvAtom, Expr, FunctionDef, Statement, StmtPath, VarRef};
use crate::sdg::{EdgeLabel, NodeId, Sdg, SdgNode, Segmentation};
use std::collections::{BTreeMap, BTreeSet};

/// Environment atoms treated as randomness sources: miner/validator
/// influenced or trivially predictable block values.
pub const RANDOMNESS_ATOMS: [EnvAtom; 7] = [
    EnvAtom::Timestamp,
    EnvAtom::Number,
    EnvAtom::Prevrandao,
    EnvAtom::Difficulty,
    EnvAtom::Blockhash,
    EnvAtom::Coinbase,
    EnvAtom::Gaslimit,
];

pub fn is_randomness_atom(a: EnvAtom) -> bool {
    RANDOMNESS_ATOMS.contains(&a)
}

/// Taint sources and sinks. Sources: attacker-controlled inputs.
/// Sinks: value-bearing operations whose behavior the attacker then
/// influences. Public/external function parameters always count as sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintSpec {
    pub source_atoms: BTreeSet<EnvAtom>,
    pub public_params_are_sources: bool,
    pub sink_call_kinds: BTreeSet<crate::model::CallKind>,
    pub sink_state_writes: bool,
    pub sink_atoms: BTreeSet<EnvAtom>,
}

impl Default for TaintSpec {
    fn default() -> Self {
        use crate::model::CallKind::*;
        TaintSpec {
            source_atoms: BTreeSet::from([
                EnvAtom::Calldata,
                EnvAtom::Caller,
                EnvAtom::Origin,
                EnvAtom::Callvalue,
            ]),
            public_params_are_sources: true,
            sink_call_kinds: BTreeSet::from([Call, CallCode, StaticCall, DelegateCall, Transfer]),
            sink_state_writes: true,
            sink_atoms: BTreeSet::from([EnvAtom::Balance, EnvAtom::Address]),
        }
    }
}

/// Recognized access-control assert shapes; all enabled by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessControlShapes {
    /// `tx.origin == msg.sender` (defeats contract-mediated replays).
    pub origin_caller: bool,
    /// `msg.sender == <constant address>`.
    pub const_address: bool,
    /// `msg.sender == <state var>` (owner/admin slot).
    pub state_owner: bool,
}

impl Default for AccessControlShapes {
    fn default() -> Self {
        AccessControlShapes { origin_caller: true, const_address: true, state_owner: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessControlEvidence {
    pub shape: &'static str,
    pub assert_site: StmtPath,
}

/// Does an assert lexicographically preceding `site` in `f` match an
/// access-control shape? Pre-order path comparison matches program order in
/// this IR (a loop's body statements sort between the loop and its
/// successor).
pub fn has_access_control(
    f: &FunctionDef,
    site: &StmtPath,
    shapes: &AccessControlShapes,
) -> Option<AccessControlEvidence> {
    let mut evidence = None;
    f.walk(&mut |path, stmt| {
        if evidence.is_some() || path.as_slice() >= site.as_slice() {
            return;
        }
        if let Statement::Assert { cond } = stmt {
            if let Some(shape) = match_access_shape(cond, shapes) {
                evidence = Some(AccessControlEvidence { shape, assert_site: path.clone() });
            }
        }
    });
    evidence
}

fn match_access_shape(cond: &Expr, shapes: &AccessControlShapes) -> Option<&'static str> {
    let mut found = None;
    cond.walk(&mut |e| {
        if found.is_some() {
            return;
        }
        if let Expr::Cmp(crate::model::CmpOp::Eq, a, b) = e {
            let pair = (a.as_ref(), b.as_ref());
            let is_id_atom =
                |e: &Expr| matches!(e, Expr::Atom(EnvAtom::Caller) | Expr::Atom(EnvAtom::Origin));
            let origin_caller = matches!(
                pair,
                (Expr::Atom(EnvAtom::Origin), Expr::Atom(EnvAtom::Caller))
                    | (Expr::Atom(EnvAtom::Caller), Expr::Atom(EnvAtom::Origin))
            );
            if shapes.origin_caller && origin_caller {
                found = Some("origin-caller-eq");
            } else if shapes.const_address
                && ((is_id_atom(pair.0) && matches!(pair.1, Expr::Const(_)))
                    || (is_id_atom(pair.1) && matches!(pair.0, Expr::Const(_))))
            {
                found = Some("const-address-eq");
            } else if shapes.state_owner
                && ((is_id_atom(pair.0) && matches!(pair.1, Expr::Var(_)))
                    || (is_id_atom(pair.1) && matches!(pair.0, Expr::Var(_))))
            {
                found = Some("state-owner-eq");
            }
        }
    });
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    R1,
    R2,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::R1 => "R1",
            Rule::R2 => "R2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Data,
    Control,
}

impl Dependence {
    pub fn as_str(self) -> &'static str {
        match self {
            Dependence::Data => "data",
            Dependence::Control => "control",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndicatorWitness {
    /// R1: which randomness atom influences the write, and from where.
    Randomness { atom: EnvAtom, dependence: Dependence, dep_site: StmtPath },
    /// R2: the loop and the external-call site (or result-assert site)
    /// inside it.
    LoopExternalCall { loop_site: StmtPath, call_site: StmtPath, via_result_assert: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicator {
    pub rule: Rule,
    pub function: String,
    /// R1: the write site. R2: the loop site.
    pub site: StmtPath,
    /// R1: the written state variable.
    pub var: Option<VarRef>,
    pub witness: IndicatorWitness,
}

/// Why a state variable's value is uncertain at transaction-send time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UncertaintyWitness {
    /// Written under direct randomness influence.
    Direct { atom: EnvAtom, function: String, site: StmtPath, dependence: Dependence },
    /// Connected to a directly-uncertain variable over RW/ASD/TSD edges.
    Contagion { source: VarRef, path: Vec<NodeId> },
}

/// Direct randomness dependence of a write statement: the written value
/// mentions a randomness atom (data), or a preceding assert / enclosing
/// loop bound does (control).
fn write_randomness(
    f: &FunctionDef,
    path: &StmtPath,
    value: &Expr,
) -> Option<(EnvAtom, Dependence, StmtPath)> {
    if let Some(atom) = value.find_atom(is_randomness_atom) {
        return Some((atom, Dependence::Data, path.clone()));
    }
    // Enclosing loop with a randomness-dependent bound.
    for cut in 1..path.len() {
        let prefix = &path[..cut];
        if let Some(Statement::Loop { bound: Some(b), .. }) = f.statement_at(prefix) {
            if let Some(atom) = b.find_atom(is_randomness_atom) {
                return Some((atom, Dependence::Control, prefix.to_vec()));
            }
        }
    }
    // Preceding assert mentioning a randomness atom.
    let mut found = None;
    f.walk(&mut |p, stmt| {
        if found.is_some() || p.as_slice() >= path.as_slice() {
            return;
        }
        if let Statement::Assert { cond } = stmt {
            if let Some(atom) = cond.find_atom(is_randomness_atom) {
                found = Some((atom, Dependence::Control, p.clone()));
            }
        }
    });
    found
}

/// All variables with a direct randomness-influenced write, with their
/// first witness, in model order.
fn directly_uncertain(m: &ContractModel) -> Vec<(VarRef, UncertaintyWitness)> {
    let mut out: Vec<(VarRef, UncertaintyWitness)> = Vec::new();
    for f in &m.functions {
        f.walk(&mut |path, stmt| {
            if let Statement::Write { var, value } = stmt {
                if out.iter().any(|(v, _)| v == var) {
                    return;
                }
                if let Some((atom, dependence, _)) = write_randomness(f, path, value) {
                    out.push((
                        *var,
                        UncertaintyWitness::Direct {
                            atom,
                            function: f.name.clone(),
                            site: path.clone(),
                            dependence,
                        },
                    ));
                }
            }
        });
    }
    out
}

/// Is the variable's value unpredictable at the time an attacker submits a
/// transaction? Either written under direct randomness influence, or
/// connected (in either direction) to such a variable over RW/ASD/TSD
/// edges of the SDG.
pub fn is_uncertain(
    m: &ContractModel,
    g: &Sdg,
    var: &VarRef,
    use_tsd: bool,
) -> Option<UncertaintyWitness> {
    let direct = directly_uncertain(m);
    if let Some((_, w)) = direct.iter().find(|(v, _)| v == var) {
        return Some(w.clone());
    }
    let labels = contagion_labels(use_tsd);
    let var_node = g.var_node(var)?;
    for (source, _) in &direct {
        let source_node = match g.var_node(source) {
            Some(n) => n,
            None => continue,
        };
        if let Ok(Some(path)) = g.shortest_path(var_node, source_node, &labels) {
            return Some(UncertaintyWitness::Contagion { source: *source, path });
        }
        if let Ok(Some(path)) = g.shortest_path(source_node, var_node, &labels) {
            return Some(UncertaintyWitness::Contagion { source: *source, path });
        }
    }
    None
}

fn contagion_labels(use_tsd: bool) -> Vec<EdgeLabel> {
    let mut labels = vec![EdgeLabel::RwRead, EdgeLabel::RwWrite, EdgeLabel::Asd];
    if use_tsd {
        labels.push(EdgeLabel::Tsd);
    }
    labels
}

/// Scans every function for R1 and R2 indicator sites.
pub fn find_indicators(m: &ContractModel, shapes: &AccessControlShapes) -> Vec<Indicator> {
    let mut out = Vec::new();
    for f in &m.functions {
        // R1: first qualifying write per state var.
        let mut seen_vars: BTreeSet<VarRef> = BTreeSet::new();
        f.walk(&mut |path, stmt| {
            if let Statement::Write { var, value } = stmt {
                if seen_vars.contains(var) {
                    return;
                }
                if let Some((atom, dependence, dep_site)) = write_randomness(f, path, value) {
                    if has_access_control(f, path, shapes).is_none() {
                        seen_vars.insert(*var);
                        out.push(Indicator {
                            rule: Rule::R1,
                            function: f.name.clone(),
                            site: path.clone(),
                            var: Some(*var),
                            witness: IndicatorWitness::Randomness { atom, dependence, dep_site },
                        });
                    }
                }
            }
        });

        // R2: loops with an external call (or a result assert) inside,
        // while the function modifies contract state.
        let writes_state = {
            let mut any = false;
            f.walk(&mut |_, stmt| any |= matches!(stmt, Statement::Write { .. }));
            any
        };
        if writes_state {
            f.walk(&mut |path, stmt| {
                if let Statement::Loop { body, .. } = stmt {
                    if let Some((call_site, via_result_assert)) = loop_external_call(body, path) {
                        if has_access_control(f, path, shapes).is_none() {
                            out.push(Indicator {
                                rule: Rule::R2,
                                function: f.name.clone(),
                                site: path.clone(),
                                var: None,
                                witness: IndicatorWitness::LoopExternalCall {
                                    loop_site: path.clone(),
                                    call_site,
                                    via_result_assert,
                                },
                            });
                        }
                    }
                }
            });
        }
    }
    out
}

/// First external call (preferred) or call-result assert inside a loop
/// body, with its path.
fn loop_external_call(body: &[Statement], loop_path: &StmtPath) -> Option<(StmtPath, bool)> {
    let mut call: Option<StmtPath> = None;
    let mut result_assert: Option<StmtPath> = None;
    let mut path = loop_path.clone();
    walk_nested(body, &mut path, &mut |p, stmt| match stmt {
        Statement::ExternalCall { .. } if call.is_none() => call = Some(p.clone()),
        Statement::Assert { cond } if result_assert.is_none() && cond.contains_call_result() => {
            result_assert = Some(p.clone())
        }
        _ => {}
    });
    match (call, result_assert) {
        (Some(c), _) => Some((c, false)),
        (None, Some(a)) => Some((a, true)),
        (None, None) => None,
    }
}

fn walk_nested<'a>(
    body: &'a [Statement],
    path: &mut StmtPath,
    f: &mut impl FnMut(&StmtPath, &'a Statement),
) {
    for (ix, stmt) in body.iter().enumerate() {
        path.push(ix);
        f(path, stmt);
        if let Statement::Loop { body: inner, .. } = stmt {
            walk_nested(inner, path, f);
        }
        path.pop();
    }
}

/// Shortest call chain from a public/external function to the indicator's
/// function (inclusive on both ends). `None` when no transaction can reach
/// the indicator; ties break toward the lexicographically smallest chain.
pub fn entry_trace(m: &ContractModel, ind: &Indicator) -> Option<Vec<String>> {
    let target = &ind.function;
    if m.function(target)?.visibility.is_entry() {
        return Some(vec![target.clone()]);
    }
    // Call graph, callees name-sorted for deterministic BFS.
    let mut calls: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in &m.functions {
        let entry = calls.entry(f.name.as_str()).or_default();
        f.walk(&mut |_, stmt| {
            if let Statement::InternalCall { callee, .. } = stmt {
                entry.insert(callee.as_str());
            }
        });
    }
    let mut entries: Vec<&str> =
        m.functions.iter().filter(|f| f.visibility.is_entry()).map(|f| f.name.as_str()).collect();
    entries.sort();

    let mut best: Option<Vec<String>> = None;
    for entry in entries {
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = std::collections::VecDeque::from([entry]);
        let mut seen = BTreeSet::from([entry]);
        let mut found = false;
        while let Some(cur) = queue.pop_front() {
            if cur == target {
                found = true;
                break;
            }
            for &next in calls.get(cur).into_iter().flatten() {
                if seen.insert(next) {
                    parent.insert(next, cur);
                    queue.push_back(next);
                }
            }
        }
        if !found {
            continue;
        }
        let mut chain = vec![target.to_string()];
        let mut cur = target.as_str();
        while cur != entry {
            cur = parent[cur];
            chain.push(cur.to_string());
        }
        chain.reverse();
        if best.as_ref().is_none_or(|b| (chain.len(), &chain) < (b.len(), b)) {
            best = Some(chain);
        }
    }
    best
}

/// State variables reachable from the indicator block over C/RW/ASD(/TSD)
/// edges, each with its breadth-first witness path. Sorted by variable.
pub fn propagate_taint(
    g: &Sdg,
    indicator_block: NodeId,
    use_tsd: bool,
) -> Vec<(VarRef, Vec<NodeId>)> {
    let mut labels =
        vec![EdgeLabel::Control, EdgeLabel::RwRead, EdgeLabel::RwWrite, EdgeLabel::Asd];
    if use_tsd {
        labels.push(EdgeLabel::Tsd);
    }
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([indicator_block]);
    let mut seen = BTreeSet::from([indicator_block]);
    while let Some(n) = queue.pop_front() {
        for next in g.successors(n, &labels).unwrap_or_default() {
            if seen.insert(next) {
                parent.insert(next, n);
                queue.push_back(next);
            }
        }
    }
    let mut out = Vec::new();
    for &node in &seen {
        if let Some(SdgNode::StateVar { var, .. }) = g.node(node) {
            let mut path = vec![node];
            let mut cur = node;
            while cur != indicator_block {
                cur = parent[&cur];
                path.push(cur);
            }
            path.reverse();
            out.push((*var, path));
        }
    }
    out.sort_by_key(|(v, _)| *v);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confidence {
    High,
    Low,
}

impl Confidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::High => "high",
            Confidence::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub rule: Rule,
    pub indicator_function: String,
    pub entry_trace: Vec<String>,
    /// Tainted state vars with their SDG witness paths, var-sorted.
    pub tainted: Vec<(VarRef, Vec<NodeId>)>,
    pub confidence: Confidence,
    pub indicator: Indicator,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectOptions {
    pub use_tsd: bool,
    pub shapes: AccessControlShapes,
    pub taint: TaintSpec,
    /// Functions the frontend lifted with unresolved jumps or values.
    pub low_confidence_functions: BTreeSet<String>,
}

impl DetectOptions {
    pub fn new() -> Self {
        DetectOptions { use_tsd: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectOutput {
    pub findings: Vec<Finding>,
    /// Indicators with no entry path from a public/external function.
    pub unreachable_indicators: Vec<String>,
}

/// Runs the full detection: indicators, entry traces, taint propagation,
/// confidence assignment.
pub fn detect(
    m: &ContractModel,
    g: &Sdg,
    seg: &Segmentation,
    opts: &DetectOptions,
) -> DetectOutput {
    let mut out = DetectOutput::default();
    for ind in find_indicators(m, &opts.shapes) {
        let Some(entry) = entry_trace(m, &ind) else {
            out.unreachable_indicators.push(format!(
                "{} indicator in '{}' at {:?} is unreachable from any public or external function",
                ind.rule.as_str(),
                ind.function,
                ind.site
            ));
            continue;
        };
        let block_ix = seg
            .block_of_stmt(&ind.function, ind.site[0])
            .expect("indicator site lies in its function");
        let block_node = g.block_node(&ind.function, block_ix).expect("segmentation and SDG agree");
        let tainted = propagate_taint(g, block_node, opts.use_tsd);

        let mut involved: BTreeSet<&str> = entry.iter().map(String::as_str).collect();
        involved.insert(&ind.function);
        for (_, path) in &tainted {
            for node in path {
                if let Some(SdgNode::Block { function, .. }) = g.node(*node) {
                    involved.insert(function);
                }
            }
        }
        let confidence = if involved.iter().any(|f| opts.low_confidence_functions.contains(*f)) {
            Confidence::Low
        } else {
            Confidence::High
        };

        out.findings.push(Finding {
            rule: ind.rule,
            indicator_function: ind.function.clone(),
            entry_trace: entry,
            tainted,
            confidence,
            indicator: ind,
        });
    }
    out
}
