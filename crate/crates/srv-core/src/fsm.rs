//! Transaction-sequence dependency mining.
//!
//! Per-sender transaction traces are folded into a prefix-tree acceptor
//! (one transition per function call, labeled with the function name), then
//! generalized by two merging passes run to a fixpoint:
//!
//! * **k-tails equivalence** — states with identical sets of outgoing label
//!   sequences of length up to `k` merge;
//! * **subsumption** — a state whose (non-empty) outgoing label set is a
//!   subset of another's merges into it when their successors are
//!   recursively mergeable too.
//!
//! Nondeterminism introduced by a merge is folded away by merging the
//! conflicting targets, so the result stays a deterministic machine over
//! function labels. A transaction-sequence dependency (TSD) `(f2, f1)` holds
//! when every path from the start state to an `f2`-transition passes through
//! an `f1`-transition first: `f1` is a necessary predecessor of `f2` in the
//! mined behavior.

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// One transaction in a JSON-Lines trace file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub sender: String,
    pub function: String,
    pub block: u64,
    pub index: u64,
    pub timestamp: Option<u64>,
}

/// All calls of one sender, ordered by `(block, index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionTrace {
    pub sender: String,
    pub calls: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: malformed trace record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: duplicate order key (sender {sender}, block {block}, index {index})")]
    DuplicateOrderKey { line: usize, sender: String, block: u64, index: u64 },
}

/// Parses a JSON-Lines trace file and groups records into per-sender traces.
///
/// Senders are case-normalized 20-byte hex addresses. Output is sorted by
/// sender and each trace by `(block, index)`, so byte-identical files produce
/// identical traces regardless of line order.
pub fn ingest_traces(text: &str) -> Result<Vec<TransactionTrace>, TraceError> {
    let mut records: Vec<TxRecord> = Vec::new();
    let mut seen: BTreeSet<(String, u64, u64)> = BTreeSet::new();
    for (ix, line) in text.lines().enumerate() {
        let line_no = ix + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line)
            .map_err(|message| TraceError::MalformedLine { line: line_no, message })?;
        if !seen.insert((record.sender.clone(), record.block, record.index)) {
            return Err(TraceError::DuplicateOrderKey {
                line: line_no,
                sender: record.sender,
                block: record.block,
                index: record.index,
            });
        }
        records.push(record);
    }

    let mut by_sender: BTreeMap<String, Vec<TxRecord>> = BTreeMap::new();
    for r in records {
        by_sender.entry(r.sender.clone()).or_default().push(r);
    }
    Ok(by_sender
        .into_iter()
        .map(|(sender, mut rs)| {
            rs.sort_by_key(|r| (r.block, r.index));
            TransactionTrace { sender, calls: rs.into_iter().map(|r| r.function).collect() }
        })
        .collect())
}

fn parse_record(line: &str) -> Result<TxRecord, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("record must be a JSON object")?;
    for key in obj.keys() {
        if !["sender", "function", "block", "index", "timestamp"].contains(&key.as_str()) {
            return Err(format!("unknown key '{key}'"));
        }
    }
    let sender_raw =
        obj.get("sender").and_then(|v| v.as_str()).ok_or("missing string field 'sender'")?;
    let digits = sender_raw
        .strip_prefix("0x")
        .ok_or_else(|| format!("sender '{sender_raw}' lacks the 0x prefix"))?;
    if digits.len() != 40 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(format!("sender '{sender_raw}' is not a 20-byte hex address"));
    }
    let function =
        obj.get("function").and_then(|v| v.as_str()).ok_or("missing string field 'function'")?;
    if function.is_empty() {
        return Err("field 'function' must be non-empty".into());
    }
    let block = obj.get("block").and_then(|v| v.as_u64()).ok_or("missing integer field 'block'")?;
    let index = obj.get("index").and_then(|v| v.as_u64()).ok_or("missing integer field 'index'")?;
    let timestamp = match obj.get("timestamp") {
        None | Some(serde_json::Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or("field 'timestamp' must be an integer")?),
    };
    Ok(TxRecord {
        sender: format!("0x{}", digits.to_ascii_lowercase()),
        function: function.to_string(),
        block,
        index,
        timestamp,
    })
}

pub type StateId = u32;

/// Deterministic finite-state machine over function labels.
///
/// `origins` maps each state to the prefix-tree state ids it absorbed, so
/// tests and diagnostics can see exactly which states a merge combined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fsm {
    pub start: StateId,
    pub states: BTreeSet<StateId>,
    pub transitions: BTreeMap<(StateId, String), StateId>,
    pub support: BTreeMap<(StateId, String), u64>,
    pub origins: BTreeMap<StateId, BTreeSet<StateId>>,
}

impl Fsm {
    /// Alphabet: every function label appearing on a transition.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.transitions.keys().map(|(_, l)| l.as_str()).collect()
    }

    /// Total support of a label across all transitions.
    pub fn label_support(&self, label: &str) -> u64 {
        self.support.iter().filter(|((_, l), _)| l == label).map(|(_, s)| *s).sum()
    }

    /// Does the machine accept this call sequence (as a path from start)?
    pub fn accepts(&self, calls: &[String]) -> bool {
        let mut cur = self.start;
        for call in calls {
            match self.transitions.get(&(cur, call.clone())) {
                Some(&next) => cur = next,
                None => return false,
            }
        }
        true
    }

    /// Outgoing `(label, target)` pairs of a state, label-sorted.
    pub fn outgoing(&self, state: StateId) -> Vec<(&str, StateId)> {
        self.transitions
            .range((state, String::new())..)
            .take_while(|((s, _), _)| *s == state)
            .map(|((_, l), t)| (l.as_str(), *t))
            .collect()
    }
}

/// Builds the prefix-tree acceptor of the traces. State 0 is the start; new
/// states are numbered in insertion order; transition support counts how
/// many trace steps took the transition.
pub fn build_initial_fsm(traces: &[TransactionTrace]) -> Fsm {
    let mut next: StateId = 1;
    let mut transitions: BTreeMap<(StateId, String), StateId> = BTreeMap::new();
    let mut support: BTreeMap<(StateId, String), u64> = BTreeMap::new();
    let mut states: BTreeSet<StateId> = BTreeSet::from([0]);
    for trace in traces {
        let mut cur: StateId = 0;
        for call in &trace.calls {
            let key = (cur, call.clone());
            *support.entry(key.clone()).or_insert(0) += 1;
            cur = *transitions.entry(key).or_insert_with(|| {
                let s = next;
                next += 1;
                s
            });
            states.insert(cur);
        }
    }
    let origins = states.iter().map(|&s| (s, BTreeSet::from([s]))).collect();
    Fsm { start: 0, states, transitions, support, origins }
}

/// Applies k-tails equivalence merging and subsumption merging to a
/// fixpoint. Deterministic (classes keep their minimum member id as
/// representative; candidates scan in ascending id order) and idempotent.
pub fn merge_states(fsm: &Fsm, k: usize) -> Fsm {
    let mut uf = UnionFind::new(&fsm.states);
    loop {
        fold_nondeterminism(&mut uf, fsm);

        // Equivalence pass: group classes by k-future sets.
        let class_trans = class_transitions(&uf, fsm);
        let mut futures: BTreeMap<Vec<Vec<String>>, Vec<StateId>> = BTreeMap::new();
        for &class in class_trans.keys() {
            let f = k_futures(class, k, &class_trans);
            futures.entry(f.into_iter().collect()).or_default().push(class);
        }
        let mut changed = false;
        for group in futures.values() {
            for pair in group.windows(2) {
                if uf.union(pair[0], pair[1]) {
                    changed = true;
                }
            }
        }
        if changed {
            continue;
        }

        // Subsumption pass: merge the first (lowest-id) viable pair.
        let class_trans = class_transitions(&uf, fsm);
        let classes: Vec<StateId> = class_trans.keys().copied().collect();
        'scan: for &b in &classes {
            let b_labels: BTreeSet<&String> = class_trans[&b].keys().collect();
            if b_labels.is_empty() {
                // An all-accepting trailing state would subsume into
                // everything; only states with behavior participate.
                continue;
            }
            for &a in &classes {
                if a == b {
                    continue;
                }
                let mut assumed = BTreeSet::new();
                if mergeable(b, a, &class_trans, &mut assumed) {
                    uf.union(b, a);
                    changed = true;
                    break 'scan;
                }
            }
        }
        if !changed {
            break;
        }
    }
    fold_nondeterminism(&mut uf, fsm);
    rebuild(&uf, fsm)
}

/// Can `b` merge into `a`? Requires labels(b) ⊆ labels(a) and, coinductively,
/// the successors along shared labels to be mergeable as well.
fn mergeable(
    b: StateId,
    a: StateId,
    class_trans: &BTreeMap<StateId, BTreeMap<String, StateId>>,
    assumed: &mut BTreeSet<(StateId, StateId)>,
) -> bool {
    if b == a || !assumed.insert((b, a)) {
        return true;
    }
    let bt = &class_trans[&b];
    let at = &class_trans[&a];
    for (label, &b_next) in bt {
        match at.get(label) {
            Some(&a_next) => {
                if !mergeable(b_next, a_next, class_trans, assumed) {
                    return false;
                }
            }
            None => return false,
        }
    }
    true
}

/// Label sequences of length up to `k` leaving `class`; shorter sequences
/// appear only where a dead end cuts the walk short.
fn k_futures(
    class: StateId,
    k: usize,
    class_trans: &BTreeMap<StateId, BTreeMap<String, StateId>>,
) -> BTreeSet<Vec<String>> {
    if k == 0 {
        return BTreeSet::from([Vec::new()]);
    }
    let trans = &class_trans[&class];
    if trans.is_empty() {
        return BTreeSet::from([Vec::new()]);
    }
    let mut out = BTreeSet::new();
    for (label, &next) in trans {
        for mut tail in k_futures(next, k - 1, class_trans) {
            tail.insert(0, label.clone());
            out.insert(tail);
        }
    }
    out
}

/// Merges targets of same-labeled transitions out of one class until the
/// class-level machine is deterministic again.
fn fold_nondeterminism(uf: &mut UnionFind, fsm: &Fsm) {
    loop {
        let mut seen: BTreeMap<(StateId, &String), StateId> = BTreeMap::new();
        let mut changed = false;
        for ((src, label), dst) in &fsm.transitions {
            let key = (uf.find(*src), label);
            let dst = uf.find(*dst);
            match seen.get(&key) {
                Some(&prev) if prev != dst => {
                    uf.union(prev, dst);
                    changed = true;
                }
                _ => {
                    seen.insert(key, dst);
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Class-level transition map (deterministic: call after folding).
fn class_transitions(uf: &UnionFind, fsm: &Fsm) -> BTreeMap<StateId, BTreeMap<String, StateId>> {
    let mut out: BTreeMap<StateId, BTreeMap<String, StateId>> = BTreeMap::new();
    for &s in &fsm.states {
        out.entry(uf.find(s)).or_default();
    }
    for ((src, label), dst) in &fsm.transitions {
        out.entry(uf.find(*src)).or_default().insert(label.clone(), uf.find(*dst));
    }
    out
}

fn rebuild(uf: &UnionFind, fsm: &Fsm) -> Fsm {
    let mut transitions: BTreeMap<(StateId, String), StateId> = BTreeMap::new();
    let mut support: BTreeMap<(StateId, String), u64> = BTreeMap::new();
    for ((src, label), dst) in &fsm.transitions {
        let key = (uf.find(*src), label.clone());
        transitions.insert(key.clone(), uf.find(*dst));
        *support.entry(key.clone()).or_insert(0) +=
            fsm.support.get(&(*src, label.clone())).copied().unwrap_or(0);
    }
    let mut origins: BTreeMap<StateId, BTreeSet<StateId>> = BTreeMap::new();
    for &s in &fsm.states {
        let entry = origins.entry(uf.find(s)).or_default();
        match fsm.origins.get(&s) {
            Some(orig) => entry.extend(orig.iter().copied()),
            None => {
                entry.insert(s);
            }
        }
    }

    // Keep only states reachable from the start class.
    let start = uf.find(fsm.start);
    let mut reachable: BTreeSet<StateId> = BTreeSet::from([start]);
    let mut work = vec![start];
    while let Some(s) = work.pop() {
        for ((src, _), dst) in &transitions {
            if *src == s && reachable.insert(*dst) {
                work.push(*dst);
            }
        }
    }
    transitions.retain(|(src, _), dst| reachable.contains(src) && reachable.contains(dst));
    support.retain(|(src, _), _| reachable.contains(src));
    origins.retain(|s, _| reachable.contains(s));

    Fsm { start, states: reachable, transitions, support, origins }
}

/// Min-representative union-find over sparse state ids.
struct UnionFind {
    parent: BTreeMap<StateId, StateId>,
}

impl UnionFind {
    fn new(states: &BTreeSet<StateId>) -> Self {
        UnionFind { parent: states.iter().map(|&s| (s, s)).collect() }
    }

    fn find(&self, mut s: StateId) -> StateId {
        while self.parent[&s] != s {
            s = self.parent[&s];
        }
        s
    }

    /// Returns true when the classes were distinct. The smaller id becomes
    /// the representative, keeping numbering canonical.
    fn union(&mut self, a: StateId, b: StateId) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (keep, fold) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent.insert(fold, keep);
        true
    }
}

/// Transaction-sequence dependency: calling `dependent` requires having
/// called `prerequisite` earlier in the same trace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TsdEdge {
    pub dependent: String,
    pub prerequisite: String,
}

/// Necessary-predecessor mining over the FSM language: `(f2, f1)` is
/// emitted when no `f2`-transition source is reachable from the start
/// without taking an `f1`-transition, `f2 != f1`, and `f2`'s total support
/// meets `min_support`. Output is sorted by `(dependent, prerequisite)`.
pub fn extract_tsd(fsm: &Fsm, min_support: u64) -> Vec<TsdEdge> {
    let labels: Vec<String> = fsm.labels().into_iter().map(String::from).collect();
    let mut out = Vec::new();
    for f1 in &labels {
        // States reachable from start without ever taking an f1 transition.
        let mut reach: BTreeSet<StateId> = BTreeSet::from([fsm.start]);
        let mut work = vec![fsm.start];
        while let Some(s) = work.pop() {
            for (label, dst) in fsm.outgoing(s) {
                if label != f1 && reach.insert(dst) {
                    work.push(dst);
                }
            }
        }
        for f2 in &labels {
            if f2 == f1 || fsm.label_support(f2) < min_support {
                continue;
            }
            let avoidable =
                fsm.transitions.keys().any(|(src, label)| label == f2 && reach.contains(src));
            if !avoidable {
                out.push(TsdEdge { dependent: f2.clone(), prerequisite: f1.clone() });
            }
        }
    }
    out.sort();
    out
}

/// GraphViz rendering; start state drawn with a double circle, transitions
/// labeled `function (support)`.
pub fn fsm_to_dot(fsm: &Fsm) -> String {
    let mut dot = String::from("digraph fsm {\n  rankdir=LR;\n");
    for &s in &fsm.states {
        let shape = if s == fsm.start { "doublecircle" } else { "circle" };
        let origins = fsm
            .origins
            .get(&s)
            .map(|o| o.iter().map(|i| format!("s{i}")).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        dot.push_str(&format!("  n{s} [shape={shape}, label=\"{origins}\"];\n"));
    }
    for ((src, label), dst) in &fsm.transitions {
        let support = fsm.support.get(&(*src, label.clone())).copied().unwrap_or(0);
        dot.push_str(&format!("  n{src} -> n{dst} [label=\"{label} ({support})\"];\n"));
    }
    dot.push_str("}\n");
    dot
}
