//! Natural-loop detection on the recovered control-flow graph.
//!
//! Dominators are computed with the iterative bitset algorithm over the
//! subgraph of reachable blocks, ignoring edges out of unresolved-jump
//! blocks (their over-approximated fan-out would fabricate cycles). A back
//! edge `latch -> header` exists when the header dominates the latch; the
//! loop body is the backward closure from the latch that stops at the
//! header.

use super::cfg::{BlockId, Cfg};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaturalLoop {
    pub header: BlockId,
    pub latch: BlockId,
    /// Includes header and latch.
    pub body: BTreeSet<BlockId>,
}

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Bits {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    fn full(n: usize) -> Bits {
        let mut b = Bits(vec![!0u64; n.div_ceil(64).max(1)]);
        let tail = n % 64;
        if tail != 0 {
            *b.0.last_mut().unwrap() = (1u64 << tail) - 1;
        }
        b
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    fn intersect_with(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a &= b;
        }
    }
}

/// Finds all natural loops, sorted by (header offset, latch offset). One
/// loop is reported per back edge; headers shared by several latches
/// appear once per latch.
pub fn find_loops(cfg: &Cfg) -> Vec<NaturalLoop> {
    let n = cfg.blocks.len();
    if n == 0 {
        return Vec::new();
    }

    // Adjacency over resolved edges only.
    let mut succs: Vec<Vec<BlockId>> = vec![Vec::new(); n];
    let mut preds: Vec<Vec<BlockId>> = vec![Vec::new(); n];
    let mut edge_set: BTreeSet<(BlockId, BlockId)> = BTreeSet::new();
    for e in &cfg.edges {
        if cfg.unresolved.contains(&e.from) {
            continue;
        }
        if edge_set.insert((e.from, e.to)) {
            succs[e.from].push(e.to);
            preds[e.to].push(e.from);
        }
    }

    // Reachability from the entry within the filtered subgraph.
    let mut reach = vec![false; n];
    let mut queue = vec![cfg.entry];
    while let Some(b) = queue.pop() {
        if std::mem::replace(&mut reach[b], true) {
            continue;
        }
        for &s in &succs[b] {
            if !reach[s] {
                queue.push(s);
            }
        }
    }

    // Iterative dominators.
    let mut dom: Vec<Bits> = (0..n).map(|_| Bits::full(n)).collect();
    let mut entry_only = Bits::empty(n);
    entry_only.insert(cfg.entry);
    dom[cfg.entry] = entry_only;
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..n {
            if !reach[b] || b == cfg.entry {
                continue;
            }
            let mut new = Bits::full(n);
            let mut any_pred = false;
            for &p in &preds[b] {
                if reach[p] {
                    new.intersect_with(&dom[p]);
                    any_pred = true;
                }
            }
            if !any_pred {
                new = Bits::empty(n);
            }
            new.insert(b);
            if new != dom[b] {
                dom[b] = new;
                changed = true;
            }
        }
    }

    // Back edges and their natural loops.
    let mut loops = Vec::new();
    for &(u, v) in &edge_set {
        if !reach[u] || !reach[v] || !dom[u].contains(v) {
            continue;
        }
        let mut body: BTreeSet<BlockId> = BTreeSet::from([v, u]);
        let mut work = vec![u];
        while let Some(w) = work.pop() {
            if w == v {
                continue;
            }
            for &p in &preds[w] {
                if reach[p] && body.insert(p) {
                    work.push(p);
                }
            }
        }
        loops.push(NaturalLoop { header: v, latch: u, body });
    }
    loops.sort_by_key(|l| (cfg.blocks[l.header].start_offset, cfg.blocks[l.latch].start_offset));
    loops
}
