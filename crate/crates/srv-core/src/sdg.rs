//! Labeled state-dependency graph (SDG).
//!
//! Nodes are state variables plus code blocks. Function bodies are
//! segmented into synthetic blocks: `Assert`, `ExternalCall`, `InternalCall`
//! and `Loop` statements form singleton blocks, maximal runs of the
//! remaining statements coalesce, and an empty body still yields one (empty)
//! block so every function has a start and an end site.
//!
//! Edge labels:
//!
//! * `C` — control flow between consecutive blocks, a self-edge on loop
//!   blocks, call edges into a callee's start block and return edges out of
//!   its end blocks;
//! * `RW-write` — writing block → variable; `RW-read` — variable → reading
//!   block;
//! * `ASD` — writer's end block(s) → reader's start block, annotated with
//!   the asserted variable;
//! * `TSD` — prerequisite's end block(s) → dependent's start block.

use crate::deps::{AccessMode, AsdEdge, RwEdge};
use crate::fsm::TsdEdge;
use crate::model::{ContractModel, Statement, VarRef};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdgError {
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
}

/// What a synthetic block holds; barriers carry their statement kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockKind {
    /// Run of plain statements (reads, writes, returns). May be empty.
    Plain,
    Assert,
    ExternalCall,
    InternalCall {
        callee: String,
    },
    Loop,
}

/// One synthetic block: the top-level statement range `[lo, hi)` it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegBlock {
    pub index: usize,
    pub stmt_range: (usize, usize),
    pub kind: BlockKind,
    pub is_start: bool,
    pub is_end: bool,
}

/// Per-function synthetic block lists (the CFG view the SDG is built over).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    per_function: BTreeMap<String, Vec<SegBlock>>,
}

impl Segmentation {
    pub fn from_model(m: &ContractModel) -> Segmentation {
        let mut per_function = BTreeMap::new();
        for f in &m.functions {
            per_function.insert(f.name.clone(), segment_body(&f.body));
        }
        Segmentation { per_function }
    }

    pub fn blocks(&self, function: &str) -> Option<&[SegBlock]> {
        self.per_function.get(function).map(Vec::as_slice)
    }

    /// Block index covering the top-level statement index `stmt_ix`.
    pub fn block_of_stmt(&self, function: &str, stmt_ix: usize) -> Option<usize> {
        self.per_function.get(function)?.iter().position(|b| {
            let (lo, hi) = b.stmt_range;
            (lo..hi).contains(&stmt_ix)
        })
    }
}

fn segment_body(body: &[Statement]) -> Vec<SegBlock> {
    let mut blocks: Vec<SegBlock> = Vec::new();
    let mut run_start: Option<usize> = None;
    let close_run = |blocks: &mut Vec<SegBlock>, run_start: &mut Option<usize>, end: usize| {
        if let Some(lo) = run_start.take() {
            blocks.push(SegBlock {
                index: blocks.len(),
                stmt_range: (lo, end),
                kind: BlockKind::Plain,
                is_start: false,
                is_end: false,
            });
        }
    };
    for (ix, stmt) in body.iter().enumerate() {
        let barrier = match stmt {
            Statement::Assert { .. } => Some(BlockKind::Assert),
            Statement::ExternalCall { .. } => Some(BlockKind::ExternalCall),
            Statement::InternalCall { callee, .. } => {
                Some(BlockKind::InternalCall { callee: callee.clone() })
            }
            Statement::Loop { .. } => Some(BlockKind::Loop),
            _ => None,
        };
        match barrier {
            Some(kind) => {
                close_run(&mut blocks, &mut run_start, ix);
                blocks.push(SegBlock {
                    index: blocks.len(),
                    stmt_range: (ix, ix + 1),
                    kind,
                    is_start: false,
                    is_end: false,
                });
            }
            None => {
                run_start.get_or_insert(ix);
            }
        }
    }
    close_run(&mut blocks, &mut run_start, body.len());
    if blocks.is_empty() {
        blocks.push(SegBlock {
            index: 0,
            stmt_range: (0, 0),
            kind: BlockKind::Plain,
            is_start: false,
            is_end: false,
        });
    }
    let last = blocks.len() - 1;
    blocks[0].is_start = true;
    blocks[last].is_end = true;
    // Every block containing a Return is also an end site.
    for b in &mut blocks {
        let (lo, hi) = b.stmt_range;
        if body[lo..hi].iter().any(|s| matches!(s, Statement::Return)) {
            b.is_end = true;
        }
    }
    blocks
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdgNode {
    StateVar { var: VarRef, name: Option<String> },
    Block { function: String, index: usize, is_start: bool, is_end: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Control,
    RwRead,
    RwWrite,
    Asd,
    Tsd,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 5] =
        [EdgeLabel::Control, EdgeLabel::RwRead, EdgeLabel::RwWrite, EdgeLabel::Asd, EdgeLabel::Tsd];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Control => "C",
            EdgeLabel::RwRead => "RW-read",
            EdgeLabel::RwWrite => "RW-write",
            EdgeLabel::Asd => "ASD",
            EdgeLabel::Tsd => "TSD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SdgEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: EdgeLabel,
    /// Variable annotation on ASD edges (which assertion the dependency
    /// runs through); `None` elsewhere.
    pub var: Option<VarRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sdg {
    pub nodes: Vec<SdgNode>,
    pub edges: Vec<SdgEdge>,
    var_ids: BTreeMap<VarRef, NodeId>,
    block_ids: BTreeMap<(String, usize), NodeId>,
    adjacency: BTreeMap<NodeId, Vec<(NodeId, EdgeLabel)>>,
}

impl Sdg {
    pub fn var_node(&self, var: &VarRef) -> Option<NodeId> {
        self.var_ids.get(var).copied()
    }

    pub fn block_node(&self, function: &str, index: usize) -> Option<NodeId> {
        self.block_ids.get(&(function.to_string(), index)).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&SdgNode> {
        self.nodes.get(id)
    }

    /// Start block of a function.
    pub fn function_start(&self, function: &str) -> Option<NodeId> {
        self.block_node(function, 0)
    }

    /// Successors of `node` along edges whose label is in `labels`,
    /// ascending and deduplicated.
    pub fn successors(&self, node: NodeId, labels: &[EdgeLabel]) -> Result<Vec<NodeId>, SdgError> {
        if node >= self.nodes.len() {
            return Err(SdgError::UnknownNode(node));
        }
        let mut out: Vec<NodeId> = self
            .adjacency
            .get(&node)
            .into_iter()
            .flatten()
            .filter(|(_, l)| labels.contains(l))
            .map(|(n, _)| *n)
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Forward closure of `from` (inclusive) along the given labels.
    pub fn reachable(
        &self,
        from: &[NodeId],
        labels: &[EdgeLabel],
    ) -> Result<BTreeSet<NodeId>, SdgError> {
        for &n in from {
            if n >= self.nodes.len() {
                return Err(SdgError::UnknownNode(n));
            }
        }
        let mut seen: BTreeSet<NodeId> = from.iter().copied().collect();
        let mut work: Vec<NodeId> = from.to_vec();
        while let Some(n) = work.pop() {
            for next in self.successors(n, labels)? {
                if seen.insert(next) {
                    work.push(next);
                }
            }
        }
        Ok(seen)
    }

    /// Breadth-first shortest path between two nodes along the given
    /// labels; neighbor order is ascending node id, so paths are
    /// deterministic.
    pub fn shortest_path(
        &self,
        from: NodeId,
        to: NodeId,
        labels: &[EdgeLabel],
    ) -> Result<Option<Vec<NodeId>>, SdgError> {
        if from >= self.nodes.len() {
            return Err(SdgError::UnknownNode(from));
        }
        if to >= self.nodes.len() {
            return Err(SdgError::UnknownNode(to));
        }
        let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut queue = std::collections::VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = parent[&cur];
                    path.push(cur);
                }
                path.reverse();
                return Ok(Some(path));
            }
            for next in self.successors(n, labels)? {
                if seen.insert(next) {
                    parent.insert(next, n);
                    queue.push_back(next);
                }
            }
        }
        Ok(None)
    }
}

/// Assembles the SDG. All RW/ASD/TSD inputs must name functions and state
/// vars present in the model — the pipeline filters TSD edges mined from
/// traces down to model functions before calling this.
pub fn build_sdg(
    m: &ContractModel,
    seg: &Segmentation,
    rw: &[RwEdge],
    asd: &[AsdEdge],
    tsd: &[TsdEdge],
) -> Result<Sdg, SdgError> {
    let mut nodes = Vec::new();
    let mut var_ids = BTreeMap::new();
    let mut block_ids = BTreeMap::new();

    for d in &m.state_vars {
        let id = nodes.len();
        nodes.push(SdgNode::StateVar { var: d.var_ref(), name: d.name.clone() });
        var_ids.insert(d.var_ref(), id);
    }
    for f in &m.functions {
        let blocks = seg.blocks(&f.name).ok_or_else(|| {
            SdgError::InconsistentInputs(format!("segmentation lacks function '{}'", f.name))
        })?;
        for b in blocks {
            let id = nodes.len();
            nodes.push(SdgNode::Block {
                function: f.name.clone(),
                index: b.index,
                is_start: b.is_start,
                is_end: b.is_end,
            });
            block_ids.insert((f.name.clone(), b.index), id);
        }
    }

    let block_id = |function: &str, index: usize| -> Result<NodeId, SdgError> {
        block_ids.get(&(function.to_string(), index)).copied().ok_or_else(|| {
            SdgError::InconsistentInputs(format!("no block {index} in function '{function}'"))
        })
    };
    let end_blocks = |function: &str| -> Result<Vec<NodeId>, SdgError> {
        let blocks = seg.blocks(function).ok_or_else(|| {
            SdgError::InconsistentInputs(format!("unknown function '{function}'"))
        })?;
        blocks.iter().filter(|b| b.is_end).map(|b| block_id(function, b.index)).collect()
    };

    let mut edges: BTreeSet<SdgEdge> = BTreeSet::new();

    // Control edges: consecutive blocks, loop self-edges, call/return edges.
    for f in &m.functions {
        let blocks = seg.blocks(&f.name).expect("checked above");
        for pair in blocks.windows(2) {
            edges.insert(SdgEdge {
                from: block_id(&f.name, pair[0].index)?,
                to: block_id(&f.name, pair[1].index)?,
                label: EdgeLabel::Control,
                var: None,
            });
        }
        for b in blocks {
            let this = block_id(&f.name, b.index)?;
            if b.kind == BlockKind::Loop {
                edges.insert(SdgEdge {
                    from: this,
                    to: this,
                    label: EdgeLabel::Control,
                    var: None,
                });
            }
            if let BlockKind::InternalCall { callee } = &b.kind {
                let callee_start = seg
                    .blocks(callee)
                    .and_then(|bs| bs.first())
                    .map(|b0| block_id(callee, b0.index))
                    .transpose()?
                    .ok_or_else(|| {
                        SdgError::InconsistentInputs(format!(
                            "internal call to function '{callee}' absent from segmentation"
                        ))
                    })?;
                edges.insert(SdgEdge {
                    from: this,
                    to: callee_start,
                    label: EdgeLabel::Control,
                    var: None,
                });
                if let Some(next) = blocks.get(b.index + 1) {
                    let back = block_id(&f.name, next.index)?;
                    for end in end_blocks(callee)? {
                        edges.insert(SdgEdge {
                            from: end,
                            to: back,
                            label: EdgeLabel::Control,
                            var: None,
                        });
                    }
                }
            }
        }
    }

    // RW edges: write block -> var, var -> read block.
    for e in rw {
        let var_node = var_ids.get(&e.var).copied().ok_or_else(|| {
            SdgError::InconsistentInputs(format!("RW edge names undeclared var {}", e.var))
        })?;
        let stmt_ix = *e.site.first().ok_or_else(|| {
            SdgError::InconsistentInputs(format!("RW edge in '{}' has an empty site", e.function))
        })?;
        let block_ix = seg.block_of_stmt(&e.function, stmt_ix).ok_or_else(|| {
            SdgError::InconsistentInputs(format!(
                "RW edge site {:?} outside function '{}'",
                e.site, e.function
            ))
        })?;
        let block = block_id(&e.function, block_ix)?;
        let edge = match e.mode {
            AccessMode::Write => {
                SdgEdge { from: block, to: var_node, label: EdgeLabel::RwWrite, var: None }
            }
            AccessMode::Read => {
                SdgEdge { from: var_node, to: block, label: EdgeLabel::RwRead, var: None }
            }
        };
        edges.insert(edge);
    }

    // ASD edges: writer end block(s) -> reader start block, var-annotated.
    for e in asd {
        if !var_ids.contains_key(&e.var) {
            return Err(SdgError::InconsistentInputs(format!(
                "ASD edge names undeclared var {}",
                e.var
            )));
        }
        let reader_start = block_id(&e.reader, 0)?;
        for end in end_blocks(&e.writer)? {
            edges.insert(SdgEdge {
                from: end,
                to: reader_start,
                label: EdgeLabel::Asd,
                var: Some(e.var),
            });
        }
    }

    // TSD edges: prerequisite end block(s) -> dependent start block.
    for e in tsd {
        if !seg.per_function.contains_key(&e.dependent) {
            return Err(SdgError::InconsistentInputs(format!(
                "TSD edge names function '{}' absent from the model",
                e.dependent
            )));
        }
        if !seg.per_function.contains_key(&e.prerequisite) {
            return Err(SdgError::InconsistentInputs(format!(
                "TSD edge names function '{}' absent from the model",
                e.prerequisite
            )));
        }
        let dependent_start = block_id(&e.dependent, 0)?;
        for end in end_blocks(&e.prerequisite)? {
            edges.insert(SdgEdge {
                from: end,
                to: dependent_start,
                label: EdgeLabel::Tsd,
                var: None,
            });
        }
    }

    let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, EdgeLabel)>> = BTreeMap::new();
    for e in &edges {
        adjacency.entry(e.from).or_default().push((e.to, e.label));
    }

    Ok(Sdg { nodes, edges: edges.into_iter().collect(), var_ids, block_ids, adjacency })
}

/// GraphViz rendering. Edge colors: C gray, RW black, ASD red, TSD blue.
pub fn sdg_to_dot(g: &Sdg) -> String {
    let mut dot = String::from("digraph sdg {\n  rankdir=LR;\n  node [fontsize=10];\n");
    for (id, node) in g.nodes.iter().enumerate() {
        match node {
            SdgNode::StateVar { var, name } => {
                let label = name.clone().unwrap_or_else(|| var.to_string());
                dot.push_str(&format!(
                    "  n{id} [shape=ellipse, style=filled, fillcolor=lightyellow, label=\"{label}\"];\n"
                ));
            }
            SdgNode::Block { function, index, is_start, is_end } => {
                let mut marks = String::new();
                if *is_start {
                    marks.push('S');
                }
                if *is_end {
                    marks.push('E');
                }
                let label = if marks.is_empty() {
                    format!("{function}#{index}")
                } else {
                    format!("{function}#{index} [{marks}]")
                };
                dot.push_str(&format!("  n{id} [shape=box, label=\"{label}\"];\n"));
            }
        }
    }
    for e in &g.edges {
        let color = match e.label {
            EdgeLabel::Control => "gray",
            EdgeLabel::RwRead | EdgeLabel::RwWrite => "black",
            EdgeLabel::Asd => "red",
            EdgeLabel::Tsd => "blue",
        };
        let mut label = e.label.as_str().to_string();
        if let Some(var) = &e.var {
            label.push_str(&format!(" {var}"));
        }
        dot.push_str(&format!("  n{} -> n{} [color={color}, label=\"{label}\"];\n", e.from, e.to));
    }
    dot.push_str("}\n");
    dot
}

/// JSON rendering of nodes and edges (stable order).
pub fn sdg_to_json(g: &Sdg) -> serde_json::Value {
    let nodes: Vec<serde_json::Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| match n {
            SdgNode::StateVar { var, name } => serde_json::json!({
                "id": id,
                "kind": "state-var",
                "slot": crate::model::format_canonical_u256(var.slot),
                "var_kind": var.kind.as_str(),
                "name": name,
            }),
            SdgNode::Block { function, index, is_start, is_end } => serde_json::json!({
                "id": id,
                "kind": "block",
                "function": function,
                "index": index,
                "start": is_start,
                "end": is_end,
            }),
        })
        .collect();
    let edges: Vec<serde_json::Value> = g
        .edges
        .iter()
        .map(|e| {
            let mut obj = serde_json::json!({
                "from": e.from,
                "to": e.to,
                "label": e.label.as_str(),
            });
            if let Some(var) = &e.var {
                obj["var"] = serde_json::Value::String(var.to_string());
            }
            obj
        })
        .collect();
    serde_json::json!({ "nodes": nodes, "edges": edges })
}
