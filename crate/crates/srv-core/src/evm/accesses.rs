//! Per-block access classification.
//!
//! Re-executes every reachable block from its converged entry state and
//! caches the resulting facts (storage reads/writes, environment reads,
//! external calls, branch condition). Downstream passes consume this map
//! instead of re-running the abstract interpreter.

use super::absint::{AccessDir, BlockExec, SlotRef};
use super::cfg::{BlockId, Cfg};
use std::collections::BTreeMap;

/// Facts for every reachable block, keyed by block id.
pub fn classify_accesses(cfg: &Cfg) -> BTreeMap<BlockId, BlockExec> {
    (0..cfg.blocks.len()).filter_map(|b| cfg.exec(b).map(|e| (b, e))).collect()
}

/// True when any classified block stores to a slot that never resolved.
pub fn has_unknown_slot(facts: &BTreeMap<BlockId, BlockExec>) -> bool {
    facts.values().flat_map(|e| &e.storage).any(|a| a.slot == SlotRef::Unknown)
}

/// Blocks that write storage, in block order.
pub fn writing_blocks(facts: &BTreeMap<BlockId, BlockExec>) -> Vec<BlockId> {
    facts
        .iter()
        .filter(|(_, e)| e.storage.iter().any(|a| a.dir == AccessDir::Write))
        .map(|(&b, _)| b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evm::cfg::build_cfg;
    use crate::evm::disasm::disassemble;

    #[test]
    fn unreachable_blocks_are_not_classified() {
        // PUSH1 5, JUMP; dead STOPs; JUMPDEST, PUSH1 0, PUSH1 5, JUMPI; STOP
        let cfg =
            build_cfg(&disassemble(&hex::decode("60055600005b600060055700").unwrap()).unwrap());
        let facts = classify_accesses(&cfg);
        let dead = cfg.block_at_offset(3).unwrap();
        assert!(!facts.contains_key(&dead));
        assert!(facts.contains_key(&cfg.block_at_offset(5).unwrap()));
    }

    #[test]
    fn storage_writes_surface_per_block() {
        // TIMESTAMP, PUSH1 1, SSTORE, STOP
        let cfg = build_cfg(&disassemble(&hex::decode("4260015500").unwrap()).unwrap());
        let facts = classify_accesses(&cfg);
        assert_eq!(writing_blocks(&facts), vec![0]);
        assert!(!has_unknown_slot(&facts));
    }
}
