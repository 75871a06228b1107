//! Public-function discovery from the selector dispatcher.
//!
//! Solidity-style runtime code begins with a dispatcher: a fallthrough
//! chain of blocks each ending in `[DUP1] PUSH<sel> EQ PUSH<dest> JUMPI`.
//! Walking that chain yields the selector table; remaining code reached
//! when no selector matches is the fallback. Each function then claims the
//! blocks reachable from its entry that no earlier function claimed.

use super::cfg::{BlockId, Cfg};
use super::disasm::Instruction;
use super::opcode;
use primitive_types::U256;
use std::collections::BTreeSet;

/// Upper bound on dispatcher chain length.
const MAX_DISPATCH_WALK: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionEntry {
    /// `None` for the fallback.
    pub selector: Option<[u8; 4]>,
    /// `func_0x<selector>` or `fallback`.
    pub name: String,
    pub entry_block: BlockId,
    pub blocks: BTreeSet<BlockId>,
    /// Claimed blocks ending in STOP/RETURN/SELFDESTRUCT.
    pub exit_blocks: BTreeSet<BlockId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionMap {
    /// Selector order ascending, fallback last.
    pub functions: Vec<FunctionEntry>,
    /// Blocks forming the dispatcher chain (owned by no function).
    pub dispatcher_blocks: BTreeSet<BlockId>,
}

/// Tail match for `[DUP1..16]? PUSH1-4 <sel> EQ PUSH <dest> JUMPI`.
fn selector_check(instrs: &[Instruction]) -> Option<([u8; 4], usize)> {
    let n = instrs.len();
    if n < 4 || instrs[n - 1].opcode != opcode::JUMPI || !instrs[n - 2].is_push() {
        return None;
    }
    let dest = usize_of(instrs[n - 2].push_value()?)?;
    // EQ immediately before the destination push; the selector push sits
    // before the EQ, optionally separated by a DUP (`PUSH sel DUP2 EQ`).
    if instrs[n - 3].opcode != opcode::EQ {
        return None;
    }
    let sel_push = if (0x80..=0x8f).contains(&instrs[n - 4].opcode) {
        if n < 5 {
            return None;
        }
        &instrs[n - 5]
    } else {
        &instrs[n - 4]
    };
    if !sel_push.is_push() || sel_push.imm.is_empty() || sel_push.imm.len() > 4 {
        return None;
    }
    let mut sel = [0u8; 4];
    sel[4 - sel_push.imm.len()..].copy_from_slice(&sel_push.imm);
    Some((sel, dest))
}

/// Tail match for a calldata-size guard: `... PUSH <dest> JUMPI` in a block
/// that reads CALLDATASIZE but performs no selector comparison. The taken
/// branch is the no-selector path (receive/fallback).
fn calldatasize_guard(instrs: &[Instruction]) -> Option<usize> {
    let n = instrs.len();
    if n < 2 || instrs[n - 1].opcode != opcode::JUMPI || !instrs[n - 2].is_push() {
        return None;
    }
    if !instrs.iter().any(|i| i.opcode == opcode::CALLDATASIZE) {
        return None;
    }
    usize_of(instrs[n - 2].push_value()?)
}

/// Discovers the public functions of runtime code.
pub fn discover_functions(cfg: &Cfg) -> FunctionMap {
    if cfg.blocks.is_empty() {
        return FunctionMap { functions: Vec::new(), dispatcher_blocks: BTreeSet::new() };
    }

    // Walk the dispatcher chain along fallthrough edges.
    let mut checks: Vec<([u8; 4], usize)> = Vec::new();
    let mut guard_target: Option<usize> = None;
    let mut chain: BTreeSet<BlockId> = BTreeSet::new();
    let mut cursor = cfg.entry;
    let mut terminal = cfg.entry;
    for _ in 0..MAX_DISPATCH_WALK {
        let instrs = cfg.block_instrs(cursor);
        let last_op = match instrs.last() {
            Some(i) => i.opcode,
            None => break,
        };
        if let Some((sel, dest)) = selector_check(instrs) {
            chain.insert(cursor);
            checks.push((sel, dest));
        } else if last_op == opcode::JUMPI {
            if let Some(dest) = calldatasize_guard(instrs) {
                guard_target = Some(dest);
            }
            chain.insert(cursor);
        } else {
            terminal = cursor;
            break;
        }
        if cursor + 1 < cfg.blocks.len() {
            cursor += 1;
            terminal = cursor;
        } else {
            break;
        }
    }

    let mut functions: Vec<FunctionEntry> = Vec::new();
    if checks.is_empty() {
        // No dispatcher: the whole contract is one public entry point.
        functions.push(FunctionEntry {
            selector: None,
            name: "fallback".to_string(),
            entry_block: cfg.entry,
            blocks: BTreeSet::new(),
            exit_blocks: BTreeSet::new(),
        });
        let mut map = FunctionMap { functions, dispatcher_blocks: BTreeSet::new() };
        claim_blocks(cfg, &mut map);
        return map;
    }

    checks.sort_unstable();
    checks.dedup_by_key(|(sel, _)| *sel);
    for (sel, dest) in &checks {
        let Some(entry_block) = cfg.block_at_offset(*dest) else { continue };
        functions.push(FunctionEntry {
            selector: Some(*sel),
            name: format!("func_0x{}", hex::encode(sel)),
            entry_block,
            blocks: BTreeSet::new(),
            exit_blocks: BTreeSet::new(),
        });
    }
    // Fallback entry: calldata-size guard target when present, otherwise
    // wherever the chain falls out after the last check.
    let fallback_entry = guard_target.and_then(|off| cfg.block_at_offset(off)).unwrap_or(terminal);
    functions.push(FunctionEntry {
        selector: None,
        name: "fallback".to_string(),
        entry_block: fallback_entry,
        blocks: BTreeSet::new(),
        exit_blocks: BTreeSet::new(),
    });

    let mut map = FunctionMap { functions, dispatcher_blocks: chain };
    claim_blocks(cfg, &mut map);
    map
}

/// Assigns every block reachable from a function entry to the first
/// function (in selector order) that reaches it. Dispatcher blocks stay
/// unowned.
fn claim_blocks(cfg: &Cfg, map: &mut FunctionMap) {
    let mut claimed: BTreeSet<BlockId> = map.dispatcher_blocks.clone();
    for f in &mut map.functions {
        if claimed.contains(&f.entry_block) {
            continue;
        }
        let mut queue = vec![f.entry_block];
        while let Some(b) = queue.pop() {
            if !claimed.insert(b) {
                continue;
            }
            f.blocks.insert(b);
            let last = cfg.block_instrs(b).last().map(|i| i.opcode);
            if matches!(
                last,
                Some(opcode::STOP) | Some(opcode::RETURN) | Some(opcode::SELFDESTRUCT)
            ) {
                f.exit_blocks.insert(b);
            }
            for s in cfg.successors(b) {
                if !claimed.contains(&s) {
                    queue.push(s);
                }
            }
        }
    }
}

fn usize_of(v: U256) -> Option<usize> {
    if v.bits() <= usize::BITS as usize {
        Some(v.low_u64() as usize)
    } else {
        None
    }
}
