//! Lifting recovered control flow into the contract IR.
//!
//! Each discovered function's claimed blocks are emitted in address order;
//! natural loops become `Loop` statements wrapping the statements of their
//! body blocks. A conditional branch with one side that straight-lines
//! into `REVERT`/`INVALID` is rebuilt as an `Assert` on the surviving
//! side's condition. Anything the abstract interpreter could not resolve
//! (jump targets, storage slots, written values, call targets) degrades to
//! a conservative placeholder plus a lift warning, and marks the enclosing
//! function low-confidence.

use super::absint::{AccessDir, BlockExec, JumpTarget, SlotRef};
use super::accesses::classify_accesses;
use super::cfg::{BlockId, Cfg};
use super::functions::{FunctionEntry, FunctionMap};
use super::loops::NaturalLoop;
use super::opcode::{self, is_terminator, spec};
use crate::model::{
    BoolOp, ContractModel, Expr, FunctionDef, Provenance, StateVarDecl, Statement, VarKind, VarRef,
    Visibility,
};
use primitive_types::U256;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Name given to the synthetic variable standing in for storage accesses
/// whose slot never resolved.
pub const UNKNOWN_SLOT_NAME: &str = "__unknown_slot";

/// Name of the synthetic function collecting reachable storage-writing
/// blocks that no discovered function claimed.
pub const UNASSIGNED_NAME: &str = "__unassigned";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LiftWarning {
    UnresolvedJump { offset: usize },
    UnresolvedSlot { offset: usize },
    UnresolvedWriteValue { offset: usize },
    UnresolvedCallTarget { offset: usize },
    UnresolvedGuard { offset: usize },
}

impl fmt::Display for LiftWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftWarning::UnresolvedJump { offset } => write!(
                f,
                "unresolved jump target in block at 0x{offset:04x}; control flow over-approximated"
            ),
            LiftWarning::UnresolvedSlot { offset } => write!(
                f,
                "storage access at 0x{offset:04x} has an unresolved slot; attributed to a synthetic variable"
            ),
            LiftWarning::UnresolvedWriteValue { offset } => write!(
                f,
                "storage write at 0x{offset:04x} has an unresolvable value; recorded as constant zero"
            ),
            LiftWarning::UnresolvedCallTarget { offset } => write!(
                f,
                "external call at 0x{offset:04x} has an unresolvable target"
            ),
            LiftWarning::UnresolvedGuard { offset } => write!(
                f,
                "branch guard at 0x{offset:04x} could not be expressed; assertion dropped"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiftOutput {
    pub model: ContractModel,
    pub warnings: Vec<LiftWarning>,
    /// Functions whose lifted body relied on over-approximation.
    pub low_confidence: BTreeSet<String>,
}

/// A loop flattened to the contiguous block-id range it occupies inside
/// one function. Overlapping ranges are merged; distinct ranges either
/// nest or are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LoopRange {
    lo: BlockId,
    hi: BlockId,
    header: BlockId,
}

struct EmitCtx<'a> {
    cfg: &'a Cfg,
    facts: &'a BTreeMap<BlockId, BlockExec>,
    entry_names: &'a BTreeMap<BlockId, String>,
    own_blocks: &'a BTreeSet<BlockId>,
    state_vars: &'a mut BTreeSet<VarRef>,
    unknown_slot_used: &'a mut bool,
    warnings: &'a mut Vec<LiftWarning>,
    fn_degraded: bool,
}

/// Lifts a recovered control-flow graph into a contract model.
pub fn lift_to_model(cfg: &Cfg, map: &FunctionMap, loops: &[NaturalLoop]) -> LiftOutput {
    let facts = classify_accesses(cfg);
    let mut warnings: Vec<LiftWarning> = cfg
        .unresolved
        .iter()
        .map(|&b| LiftWarning::UnresolvedJump { offset: cfg.blocks[b].start_offset })
        .collect();
    let entry_names: BTreeMap<BlockId, String> =
        map.functions.iter().map(|f| (f.entry_block, f.name.clone())).collect();

    let mut state_vars: BTreeSet<VarRef> = BTreeSet::new();
    let mut unknown_slot_used = false;
    let mut low_confidence: BTreeSet<String> = BTreeSet::new();
    let mut functions: Vec<FunctionDef> = Vec::new();

    for fent in &map.functions {
        let ranges = collect_ranges(fent, loops);
        let blocks: Vec<BlockId> = fent.blocks.iter().copied().collect();
        let mut ctx = EmitCtx {
            cfg,
            facts: &facts,
            entry_names: &entry_names,
            own_blocks: &fent.blocks,
            state_vars: &mut state_vars,
            unknown_slot_used: &mut unknown_slot_used,
            warnings: &mut warnings,
            fn_degraded: false,
        };
        let body = emit_seq(&blocks, &ranges, &mut ctx);
        let degraded = ctx.fn_degraded || fent.blocks.iter().any(|b| cfg.unresolved.contains(b));
        if degraded {
            low_confidence.insert(fent.name.clone());
        }
        functions.push(FunctionDef {
            name: fent.name.clone(),
            selector: fent.selector,
            visibility: if fent.selector.is_some() {
                Visibility::External
            } else {
                Visibility::Public
            },
            param_count: count_params(&body),
            body,
        });
    }

    // Reachable storage-writing blocks nobody claimed.
    let claimed: BTreeSet<BlockId> = map
        .functions
        .iter()
        .flat_map(|f| f.blocks.iter().copied())
        .chain(map.dispatcher_blocks.iter().copied())
        .collect();
    let orphan: BTreeSet<BlockId> = facts
        .iter()
        .filter(|(b, e)| {
            !claimed.contains(b) && e.storage.iter().any(|a| a.dir == AccessDir::Write)
        })
        .map(|(&b, _)| b)
        .collect();
    if !orphan.is_empty() {
        let blocks: Vec<BlockId> = orphan.iter().copied().collect();
        let mut ctx = EmitCtx {
            cfg,
            facts: &facts,
            entry_names: &entry_names,
            own_blocks: &orphan,
            state_vars: &mut state_vars,
            unknown_slot_used: &mut unknown_slot_used,
            warnings: &mut warnings,
            fn_degraded: false,
        };
        let body = emit_seq(&blocks, &[], &mut ctx);
        low_confidence.insert(UNASSIGNED_NAME.to_string());
        functions.push(FunctionDef {
            name: UNASSIGNED_NAME.to_string(),
            selector: None,
            visibility: Visibility::Internal,
            param_count: count_params(&body),
            body,
        });
    }

    let state_vars: Vec<StateVarDecl> = state_vars
        .into_iter()
        .map(|var| StateVarDecl {
            slot: var.slot,
            kind: var.kind,
            name: (unknown_slot_used && var == unknown_slot_var())
                .then(|| UNKNOWN_SLOT_NAME.to_string()),
        })
        .collect();

    warnings.sort_unstable();
    warnings.dedup();
    LiftOutput {
        model: ContractModel {
            address: None,
            functions,
            state_vars,
            provenance: Provenance::LiftedFromBytecode,
        },
        warnings,
        low_confidence,
    }
}

fn unknown_slot_var() -> VarRef {
    VarRef { slot: U256::MAX, kind: VarKind::Scalar }
}

/// Loop ranges owned by one function: same-header duplicates and partially
/// overlapping ranges are merged until the set nests cleanly.
fn collect_ranges(fent: &FunctionEntry, loops: &[NaturalLoop]) -> Vec<LoopRange> {
    let mut rs: Vec<LoopRange> = Vec::new();
    for l in loops {
        if !fent.blocks.contains(&l.header) {
            continue;
        }
        let body: Vec<BlockId> =
            l.body.iter().copied().filter(|b| fent.blocks.contains(b)).collect();
        let (Some(&lo), Some(&hi)) = (body.first(), body.last()) else { continue };
        rs.push(LoopRange { lo, hi, header: l.header });
    }
    loop {
        let mut merged = None;
        'scan: for i in 0..rs.len() {
            for j in i + 1..rs.len() {
                let (a, b) = (rs[i], rs[j]);
                let nested = (a.lo <= b.lo && b.hi <= a.hi) || (b.lo <= a.lo && a.hi <= b.hi);
                let disjoint = a.hi < b.lo || b.hi < a.lo;
                let identical = a.lo == b.lo && a.hi == b.hi;
                if identical || (!nested && !disjoint) {
                    merged = Some((i, j));
                    break 'scan;
                }
            }
        }
        match merged {
            Some((i, j)) => {
                let b = rs.remove(j);
                let a = &mut rs[i];
                a.lo = a.lo.min(b.lo);
                a.hi = a.hi.max(b.hi);
                a.header = a.header.min(b.header);
            }
            None => break,
        }
    }
    rs.sort_by_key(|r| (r.lo, std::cmp::Reverse(r.hi)));
    rs
}

/// Emits the statements for an ascending run of blocks, wrapping loop
/// ranges into `Loop` statements.
fn emit_seq(blocks: &[BlockId], ranges: &[LoopRange], ctx: &mut EmitCtx<'_>) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < blocks.len() {
        let b = blocks[i];
        if let Some(r) = ranges.iter().find(|r| r.lo == b).copied() {
            let mut j = i;
            while j < blocks.len() && blocks[j] <= r.hi {
                j += 1;
            }
            let inner: Vec<LoopRange> = ranges
                .iter()
                .filter(|q| q.lo >= r.lo && q.hi <= r.hi && !(q.lo == r.lo && q.hi == r.hi))
                .copied()
                .collect();
            let body = emit_seq(&blocks[i..j], &inner, ctx);
            let bound = ctx.facts.get(&r.header).and_then(|e| e.branch_cond.clone());
            out.push(Statement::Loop { body, bound });
            i = j;
        } else {
            emit_block(b, &mut out, ctx);
            i += 1;
        }
    }
    out
}

/// Emits one block: storage accesses and calls in offset order, then a
/// rebuilt assert / internal tail-call / return where applicable.
fn emit_block(b: BlockId, out: &mut Vec<Statement>, ctx: &mut EmitCtx<'_>) {
    let Some(exec) = ctx.facts.get(&b) else { return };

    enum Ev<'a> {
        Store(&'a super::absint::StorageAccess),
        Call(&'a super::absint::ExtCallSite),
    }
    let mut events: Vec<(usize, Ev)> = exec
        .storage
        .iter()
        .map(|a| (a.offset, Ev::Store(a)))
        .chain(exec.ext_calls.iter().map(|c| (c.offset, Ev::Call(c))))
        .collect();
    events.sort_by_key(|(off, _)| *off);

    for (offset, ev) in events {
        match ev {
            Ev::Store(a) => {
                let var = self::var_of(a.slot, offset, ctx);
                match a.dir {
                    AccessDir::Read => out.push(Statement::Read(var)),
                    AccessDir::Write => {
                        let value = a.value.clone().unwrap_or_else(|| {
                            ctx.warnings.push(LiftWarning::UnresolvedWriteValue { offset });
                            ctx.fn_degraded = true;
                            Expr::Const(U256::zero())
                        });
                        out.push(Statement::Write { var, value });
                    }
                }
            }
            Ev::Call(c) => {
                let target = c.target.clone().unwrap_or_else(|| {
                    ctx.warnings.push(LiftWarning::UnresolvedCallTarget { offset });
                    ctx.fn_degraded = true;
                    Expr::Const(U256::zero())
                });
                out.push(Statement::ExternalCall {
                    kind: c.kind,
                    target,
                    result_used: c.result_used,
                });
            }
        }
    }

    let Some(last) = ctx.cfg.block_instrs(b).last() else { return };
    match last.opcode {
        opcode::JUMPI => {
            let taken = match exec.jump_target {
                JumpTarget::Const(c) => usize_of(c).and_then(|o| ctx.cfg.block_at_offset(o)),
                _ => None,
            };
            let fall = (b + 1 < ctx.cfg.blocks.len()).then_some(b + 1);
            let rev_taken = taken.is_some_and(|t| side_reverts(ctx.cfg, t, 3));
            let rev_fall = fall.is_some_and(|f| side_reverts(ctx.cfg, f, 3));
            if rev_taken || rev_fall {
                match &exec.branch_cond {
                    Some(cond) => {
                        let cond = if rev_taken && !rev_fall {
                            Expr::Bool(BoolOp::Not, vec![cond.clone()])
                        } else {
                            cond.clone()
                        };
                        out.push(Statement::Assert { cond });
                    }
                    None => {
                        ctx.warnings.push(LiftWarning::UnresolvedGuard { offset: last.offset });
                        ctx.fn_degraded = true;
                    }
                }
            }
        }
        opcode::JUMP => {
            // A resolved jump out of this function into another entry
            // block is a tail call.
            if let JumpTarget::Const(c) = exec.jump_target {
                if let Some(t) = usize_of(c).and_then(|o| ctx.cfg.block_at_offset(o)) {
                    if !ctx.own_blocks.contains(&t) {
                        if let Some(name) = ctx.entry_names.get(&t) {
                            out.push(Statement::InternalCall {
                                callee: name.clone(),
                                args: Vec::new(),
                            });
                        }
                    }
                }
            }
        }
        opcode::STOP | opcode::RETURN | opcode::SELFDESTRUCT => out.push(Statement::Return),
        _ => {}
    }
}

fn var_of(slot: SlotRef, offset: usize, ctx: &mut EmitCtx<'_>) -> VarRef {
    let var = match slot.var_ref() {
        Some(v) => v,
        None => {
            ctx.warnings.push(LiftWarning::UnresolvedSlot { offset });
            ctx.fn_degraded = true;
            *ctx.unknown_slot_used = true;
            unknown_slot_var()
        }
    };
    ctx.state_vars.insert(var);
    var
}

/// True when this block (following at most `depth` single-successor hops)
/// inevitably aborts execution.
fn side_reverts(cfg: &Cfg, b: BlockId, depth: usize) -> bool {
    let Some(last) = cfg.block_instrs(b).last() else { return false };
    match last.opcode {
        opcode::REVERT | opcode::INVALID => true,
        op if spec(op).is_none() => true,
        opcode::STOP | opcode::RETURN | opcode::SELFDESTRUCT => false,
        _ if is_terminator(last.opcode) && last.opcode != opcode::JUMP => false,
        _ => {
            if depth == 0 || cfg.unresolved.contains(&b) {
                return false;
            }
            let succ = cfg.successors(b);
            succ.len() == 1 && side_reverts(cfg, succ[0], depth - 1)
        }
    }
}

fn count_params(body: &[Statement]) -> u32 {
    fn scan(stmts: &[Statement], max: &mut Option<u32>) {
        for s in stmts {
            for e in s.exprs() {
                e.walk(&mut |x| {
                    if let Expr::Param(i) = x {
                        *max = Some(max.map_or(*i, |m: u32| m.max(*i)));
                    }
                });
            }
            if let Statement::Loop { body, .. } = s {
                scan(body, max);
            }
        }
    }
    let mut max = None;
    scan(body, &mut max);
    max.map_or(0, |m| m + 1)
}

fn usize_of(v: U256) -> Option<usize> {
    if v.bits() <= usize::BITS as usize {
        Some(v.low_u64() as usize)
    } else {
        None
    }
}
