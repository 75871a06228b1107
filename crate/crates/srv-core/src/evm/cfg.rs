//! Control-flow graph recovery.
//!
//! Basic blocks are maximal instruction runs between leaders (code start,
//! every `JUMPDEST`, and every instruction following a terminator). Jump
//! targets are resolved by a worklist fixpoint that propagates abstract
//! stacks ([`super::absint`]) along discovered edges; a jump whose target
//! never resolves to a constant conservatively fans out to every
//! `JUMPDEST` referenced by a push immediate and marks the block
//! unresolved.

use super::absint::{exec_block, AbsStack, BlockExec, JumpTarget};
use super::disasm::{Disassembly, Instruction};
use super::opcode::{self, is_terminator};
use primitive_types::U256;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

pub type BlockId = usize;

/// Re-executions of a single block before its entry state is widened to
/// unknown (guarantees termination on adversarial stack shuffling).
pub const MAX_BLOCK_VISITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub start_offset: usize,
    /// Index range into [`Cfg::instructions`].
    pub instr_range: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Jump,
    BranchTaken,
    BranchFallthrough,
    Sequential,
}

impl EdgeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeKind::Jump => "jump",
            EdgeKind::BranchTaken => "taken",
            EdgeKind::BranchFallthrough => "fall",
            EdgeKind::Sequential => "seq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CfgEdge {
    pub from: BlockId,
    pub to: BlockId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub instructions: Vec<Instruction>,
    pub blocks: Vec<Block>,
    pub edges: Vec<CfgEdge>,
    pub entry: BlockId,
    /// Blocks whose jump target never resolved to a constant.
    pub unresolved: BTreeSet<BlockId>,
    entry_stacks: Vec<Option<AbsStack>>,
    offset_to_block: BTreeMap<usize, BlockId>,
}

impl Cfg {
    pub fn block_instrs(&self, b: BlockId) -> &[Instruction] {
        let (lo, hi) = self.blocks[b].instr_range;
        &self.instructions[lo..hi]
    }

    /// Block starting exactly at the given byte offset.
    pub fn block_at_offset(&self, offset: usize) -> Option<BlockId> {
        self.offset_to_block.get(&offset).copied()
    }

    /// Block containing the given byte offset.
    pub fn block_containing(&self, offset: usize) -> Option<BlockId> {
        let (_, &b) = self.offset_to_block.range(..=offset).next_back()?;
        let instrs = self.block_instrs(b);
        let last = instrs.last()?;
        (offset < last.next_offset()).then_some(b)
    }

    /// True when the fixpoint reached this block from the entry.
    pub fn is_reachable(&self, b: BlockId) -> bool {
        self.entry_stacks[b].is_some()
    }

    /// Re-executes a block from its converged entry state.
    pub fn exec(&self, b: BlockId) -> Option<BlockExec> {
        let entry = self.entry_stacks[b].as_ref()?;
        Some(exec_block(self.block_instrs(b), entry))
    }

    pub fn successors(&self, b: BlockId) -> Vec<BlockId> {
        let mut out: Vec<BlockId> =
            self.edges.iter().filter(|e| e.from == b).map(|e| e.to).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn predecessors(&self, b: BlockId) -> Vec<BlockId> {
        let mut out: Vec<BlockId> =
            self.edges.iter().filter(|e| e.to == b).map(|e| e.from).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn last_instr(&self, b: BlockId) -> Option<&Instruction> {
        self.block_instrs(b).last()
    }
}

/// Builds the control-flow graph for runtime code.
pub fn build_cfg(d: &Disassembly) -> Cfg {
    let instructions = d.instructions.clone();
    let n = instructions.len();

    // Leaders: instruction indices that start a block.
    let mut leaders: BTreeSet<usize> = BTreeSet::new();
    if n > 0 {
        leaders.insert(0);
    }
    for (i, ins) in instructions.iter().enumerate() {
        if ins.opcode == opcode::JUMPDEST {
            leaders.insert(i);
        }
        if is_terminator(ins.opcode) && i + 1 < n {
            leaders.insert(i + 1);
        }
    }

    let starts: Vec<usize> = leaders.into_iter().collect();
    let mut blocks = Vec::with_capacity(starts.len());
    let mut offset_to_block = BTreeMap::new();
    for (id, &lo) in starts.iter().enumerate() {
        let hi = starts.get(id + 1).copied().unwrap_or(n);
        blocks.push(Block { id, start_offset: instructions[lo].offset, instr_range: (lo, hi) });
        offset_to_block.insert(instructions[lo].offset, id);
    }

    // JUMPDEST-starting blocks by offset, and the subset referenced by
    // push immediates.
    let jumpdest_blocks: BTreeMap<usize, BlockId> = blocks
        .iter()
        .filter(|b| instructions[b.instr_range.0].opcode == opcode::JUMPDEST)
        .map(|b| (b.start_offset, b.id))
        .collect();
    let jumpdest_block =
        |offset: U256| -> Option<BlockId> { jumpdest_blocks.get(&usize_of(offset)?).copied() };
    let mut push_targets: BTreeSet<BlockId> = BTreeSet::new();
    for ins in &instructions {
        if let Some(v) = ins.push_value() {
            if let Some(b) = jumpdest_block(v) {
                push_targets.insert(b);
            }
        }
    }

    let mut cfg = Cfg {
        instructions,
        blocks,
        edges: Vec::new(),
        entry: 0,
        unresolved: BTreeSet::new(),
        entry_stacks: vec![None; starts.len()],
        offset_to_block,
    };
    if starts.is_empty() {
        return cfg;
    }

    let mut edges: BTreeSet<CfgEdge> = BTreeSet::new();
    let mut visits = vec![0usize; cfg.blocks.len()];
    cfg.entry_stacks[0] = Some(AbsStack::unknown());
    let mut worklist: BTreeSet<BlockId> = BTreeSet::from([0]);

    while let Some(b) = worklist.pop_first() {
        visits[b] += 1;
        if visits[b] > MAX_BLOCK_VISITS {
            cfg.entry_stacks[b] = Some(AbsStack::unknown());
            if visits[b] > MAX_BLOCK_VISITS + 1 {
                continue; // already widened and re-executed once
            }
        }
        let entry = cfg.entry_stacks[b].clone().expect("worklist blocks are visited");
        let exec = exec_block(cfg.block_instrs(b), &entry);

        let mut targets: Vec<(BlockId, EdgeKind)> = Vec::new();
        match cfg.last_instr(b).map(|i| i.opcode) {
            Some(opcode::JUMP) | Some(opcode::JUMPI) => {
                let kind = if cfg.last_instr(b).map(|i| i.opcode) == Some(opcode::JUMP) {
                    EdgeKind::Jump
                } else {
                    EdgeKind::BranchTaken
                };
                match exec.jump_target {
                    JumpTarget::Const(c) => {
                        // A constant target that is not a JUMPDEST would
                        // revert at runtime; drop the edge.
                        if let Some(t) = jumpdest_block(c) {
                            targets.push((t, kind));
                        }
                    }
                    JumpTarget::Unknown => {
                        cfg.unresolved.insert(b);
                        for &t in &push_targets {
                            targets.push((t, kind));
                        }
                    }
                    JumpTarget::None => {}
                }
                if kind == EdgeKind::BranchTaken && b + 1 < cfg.blocks.len() {
                    targets.push((b + 1, EdgeKind::BranchFallthrough));
                }
            }
            Some(op) if is_terminator(op) => {}
            Some(_) if b + 1 < cfg.blocks.len() => {
                targets.push((b + 1, EdgeKind::Sequential));
            }
            Some(_) | None => {}
        }

        for (t, kind) in targets {
            edges.insert(CfgEdge { from: b, to: t, kind });
            let changed = match &cfg.entry_stacks[t] {
                None => {
                    cfg.entry_stacks[t] = Some(exec.exit_stack.clone());
                    true
                }
                Some(old) => {
                    let met = old.meet(&exec.exit_stack);
                    if met != *old {
                        cfg.entry_stacks[t] = Some(met);
                        true
                    } else {
                        false
                    }
                }
            };
            if changed {
                worklist.insert(t);
            }
        }
    }

    cfg.edges = edges.into_iter().collect();
    cfg
}

fn usize_of(v: U256) -> Option<usize> {
    if v.bits() <= usize::BITS as usize {
        Some(v.low_u64() as usize)
    } else {
        None
    }
}

/// DOT rendering of the graph (one node per block).
pub fn cfg_to_dot(cfg: &Cfg) -> String {
    let mut s = String::from("digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n");
    for b in &cfg.blocks {
        let term = cfg
            .block_instrs(b.id)
            .last()
            .map(|i| i.mnemonic())
            .unwrap_or_else(|| "EMPTY".to_string());
        let style = if cfg.unresolved.contains(&b.id) {
            ", style=dashed"
        } else if !cfg.is_reachable(b.id) {
            ", color=gray"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "  b{} [label=\"b{} @0x{:04x}\\n{}\"{}];",
            b.id, b.id, b.start_offset, term, style
        );
    }
    for e in &cfg.edges {
        let _ = writeln!(s, "  b{} -> b{} [label=\"{}\"];", e.from, e.to, e.kind.as_str());
    }
    s.push_str("}\n");
    s
}
