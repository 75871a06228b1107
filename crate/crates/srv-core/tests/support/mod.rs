//! Seeded random generators and brute-force oracles shared by the
//! property-test suites. Oracles deliberately re-derive results from first
//! principles (own recursions, path enumeration, node-removal dominance)
//! instead of reusing library traversals.

#![allow(dead_code)] // each test binary uses its own subset

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srv_core::deps::{extract_asd, extract_rw};
use srv_core::evm::cfg::Cfg;
use srv_core::evm::disasm::Instruction;
use srv_core::fsm::{Fsm, TransactionTrace, TsdEdge};
use srv_core::model::{
    ArithOp, BoolOp, CallKind, CmpOp, ContractModel, EnvAtom, Expr, FunctionDef, StateVarDecl,
    Statement, VarKind, VarRef, Visibility,
};
use srv_core::sdg::{build_sdg, EdgeLabel, NodeId, Sdg, Segmentation};
use std::collections::BTreeSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Random models
// ---------------------------------------------------------------------------

const ATOMS: [EnvAtom; 13] = [
    EnvAtom::Caller,
    EnvAtom::Origin,
    EnvAtom::Callvalue,
    EnvAtom::Calldata,
    EnvAtom::Timestamp,
    EnvAtom::Number,
    EnvAtom::Prevrandao,
    EnvAtom::Difficulty,
    EnvAtom::Blockhash,
    EnvAtom::Coinbase,
    EnvAtom::Gaslimit,
    EnvAtom::Balance,
    EnvAtom::Address,
];

const CALL_KINDS: [CallKind; 5] = [
    CallKind::Call,
    CallKind::CallCode,
    CallKind::StaticCall,
    CallKind::DelegateCall,
    CallKind::Transfer,
];

/// A random valid model: ≤6 functions, ≤4 state vars, ≤8 statements per
/// function body (loops nest up to 2 deep on top of that).
pub fn random_model(rng: &mut ChaCha8Rng) -> ContractModel {
    let n_vars = rng.random_range(1..=4);
    let state_vars: Vec<StateVarDecl> = (0..n_vars)
        .map(|i| StateVarDecl {
            slot: primitive_types::U256::from(i as u64),
            kind: if rng.random_bool(0.3) { VarKind::MappingBase } else { VarKind::Scalar },
            name: if rng.random_bool(0.7) { Some(format!("v{i}")) } else { None },
        })
        .collect();
    let vars: Vec<VarRef> = state_vars.iter().map(StateVarDecl::var_ref).collect();

    let n_fns = rng.random_range(1..=6);
    // Names, visibility and arity first, so internal calls can reference
    // any function with the right argument count.
    let mut metas: Vec<(String, Visibility, Option<[u8; 4]>, u32)> = Vec::new();
    let mut used_fallback = false;
    for i in 0..n_fns {
        let visibility = match rng.random_range(0..4) {
            0 => Visibility::Public,
            1 => Visibility::External,
            2 => Visibility::Internal,
            _ => Visibility::Private,
        };
        let selector = if visibility.is_entry() {
            if !used_fallback && rng.random_bool(0.15) {
                used_fallback = true;
                None
            } else {
                Some([0xa0, 0x00, 0x00, i as u8])
            }
        } else {
            None
        };
        metas.push((format!("f{i}"), visibility, selector, rng.random_range(0..=3)));
    }

    let functions: Vec<FunctionDef> = (0..n_fns)
        .map(|i| {
            let n_stmts = rng.random_range(1..=8);
            let body =
                (0..n_stmts).map(|_| random_stmt(rng, &vars, &metas, metas[i].3, 2)).collect();
            FunctionDef {
                name: metas[i].0.clone(),
                selector: metas[i].2,
                visibility: metas[i].1,
                param_count: metas[i].3,
                body,
            }
        })
        .collect();

    ContractModel { address: None, functions, state_vars, ..Default::default() }
}

fn pick_var(rng: &mut ChaCha8Rng, vars: &[VarRef]) -> VarRef {
    vars[rng.random_range(0..vars.len())]
}

fn random_stmt(
    rng: &mut ChaCha8Rng,
    vars: &[VarRef],
    metas: &[(String, Visibility, Option<[u8; 4]>, u32)],
    param_count: u32,
    depth: usize,
) -> Statement {
    match rng.random_range(0..12) {
        0 | 1 => Statement::Read(pick_var(rng, vars)),
        2..=4 => Statement::Write {
            var: pick_var(rng, vars),
            value: random_expr(rng, vars, param_count, 3),
        },
        5..=7 => Statement::Assert { cond: random_expr(rng, vars, param_count, 3) },
        8 => Statement::ExternalCall {
            kind: CALL_KINDS[rng.random_range(0..CALL_KINDS.len())],
            target: random_expr(rng, vars, param_count, 2),
            result_used: rng.random_bool(0.5),
        },
        9 => {
            let callee = &metas[rng.random_range(0..metas.len())];
            Statement::InternalCall {
                callee: callee.0.clone(),
                args: (0..callee.3).map(|_| random_expr(rng, vars, param_count, 2)).collect(),
            }
        }
        10 if depth > 0 => Statement::Loop {
            body: (0..rng.random_range(0..=3))
                .map(|_| random_stmt(rng, vars, metas, param_count, depth - 1))
                .collect(),
            bound: if rng.random_bool(0.6) {
                Some(random_expr(rng, vars, param_count, 2))
            } else {
                None
            },
        },
        _ => Statement::Return,
    }
}

fn random_expr(rng: &mut ChaCha8Rng, vars: &[VarRef], param_count: u32, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.45) {
        return match rng.random_range(0..5) {
            0 => Expr::Const(primitive_types::U256::from(rng.random::<u64>())),
            1 => Expr::Var(pick_var(rng, vars)),
            2 if param_count > 0 => Expr::Param(rng.random_range(0..param_count)),
            3 => Expr::Atom(ATOMS[rng.random_range(0..ATOMS.len())]),
            _ => Expr::CallResult,
        };
    }
    match rng.random_range(0..3) {
        0 => {
            let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge]
                [rng.random_range(0..6)];
            Expr::Cmp(
                op,
                Box::new(random_expr(rng, vars, param_count, depth - 1)),
                Box::new(random_expr(rng, vars, param_count, depth - 1)),
            )
        }
        1 => {
            let op = [BoolOp::And, BoolOp::Or, BoolOp::Not][rng.random_range(0..3)];
            let arity = if op == BoolOp::Not { 1 } else { rng.random_range(1..=3) };
            Expr::Bool(
                op,
                (0..arity).map(|_| random_expr(rng, vars, param_count, depth - 1)).collect(),
            )
        }
        _ => {
            let op = [
                ArithOp::Add,
                ArithOp::Sub,
                ArithOp::Mul,
                ArithOp::Div,
                ArithOp::Mod,
                ArithOp::Shl,
                ArithOp::Shr,
                ArithOp::BitAnd,
                ArithOp::Xor,
            ][rng.random_range(0..9)];
            Expr::Arith(
                op,
                (0..rng.random_range(1..=3))
                    .map(|_| random_expr(rng, vars, param_count, depth - 1))
                    .collect(),
            )
        }
    }
}

// ---------------------------------------------------------------------------
// RW / ASD oracles (independent recursion over the statement tree)
// ---------------------------------------------------------------------------

/// `(function, site, var, is_write)` storage accesses by brute force.
pub fn oracle_rw(m: &ContractModel) -> BTreeSet<(String, Vec<usize>, VarRef, bool)> {
    let mut out = BTreeSet::new();
    for f in &m.functions {
        rw_stmts(&f.name, &f.body, &mut Vec::new(), &mut out);
    }
    out
}

fn rw_stmts(
    name: &str,
    body: &[Statement],
    path: &mut Vec<usize>,
    out: &mut BTreeSet<(String, Vec<usize>, VarRef, bool)>,
) {
    for (ix, stmt) in body.iter().enumerate() {
        path.push(ix);
        let mut exprs: Vec<&Expr> = Vec::new();
        match stmt {
            Statement::Read(var) => {
                out.insert((name.to_string(), path.clone(), *var, false));
            }
            Statement::Write { var, value } => {
                exprs.push(value);
                out.insert((name.to_string(), path.clone(), *var, true));
            }
            Statement::Assert { cond } => exprs.push(cond),
            Statement::ExternalCall { target, .. } => exprs.push(target),
            Statement::InternalCall { args, .. } => exprs.extend(args.iter()),
            Statement::Loop { body: inner, bound } => {
                exprs.extend(bound.iter());
                rw_stmts(name, inner, path, out);
            }
            Statement::Return => {}
        }
        for e in exprs {
            for var in expr_vars(e) {
                out.insert((name.to_string(), path.clone(), var, false));
            }
        }
        path.pop();
    }
}

/// All `Var` leaves of an expression, by explicit recursion.
fn expr_vars(e: &Expr) -> BTreeSet<VarRef> {
    let mut out = BTreeSet::new();
    fn go(e: &Expr, out: &mut BTreeSet<VarRef>) {
        match e {
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Cmp(_, a, b) => {
                go(a, out);
                go(b, out);
            }
            Expr::Bool(_, ops) | Expr::Arith(_, ops) => ops.iter().for_each(|o| go(o, out)),
            Expr::Atom(_) | Expr::Param(_) | Expr::Const(_) | Expr::CallResult => {}
        }
    }
    go(e, &mut out);
    out
}

/// `(reader, writer, var)` assertion dependencies by triple enumeration.
pub fn oracle_asd(m: &ContractModel) -> BTreeSet<(String, String, VarRef)> {
    let mut out = BTreeSet::new();
    for reader in &m.functions {
        let mut asserted: BTreeSet<VarRef> = BTreeSet::new();
        collect_asserted(&reader.body, &mut asserted);
        for writer in &m.functions {
            let mut written: BTreeSet<VarRef> = BTreeSet::new();
            collect_written(&writer.body, &mut written);
            for var in asserted.intersection(&written) {
                out.insert((reader.name.clone(), writer.name.clone(), *var));
            }
        }
    }
    out
}

fn collect_asserted(body: &[Statement], out: &mut BTreeSet<VarRef>) {
    for stmt in body {
        match stmt {
            Statement::Assert { cond } => out.extend(expr_vars(cond)),
            Statement::Loop { body: inner, .. } => collect_asserted(inner, out),
            _ => {}
        }
    }
}

/// First pre-order `Assert` in `f` whose condition mentions `var`.
pub fn oracle_first_assert_site(f: &FunctionDef, var: &VarRef) -> Option<Vec<usize>> {
    fn go(body: &[Statement], path: &mut Vec<usize>, var: &VarRef, out: &mut Option<Vec<usize>>) {
        for (ix, stmt) in body.iter().enumerate() {
            if out.is_some() {
                return;
            }
            path.push(ix);
            match stmt {
                Statement::Assert { cond } => {
                    if expr_vars(cond).contains(var) {
                        *out = Some(path.clone());
                    }
                }
                Statement::Loop { body: inner, .. } => go(inner, path, var, out),
                _ => {}
            }
            path.pop();
        }
    }
    let mut out = None;
    go(&f.body, &mut Vec::new(), var, &mut out);
    out
}

fn collect_written(body: &[Statement], out: &mut BTreeSet<VarRef>) {
    for stmt in body {
        match stmt {
            Statement::Write { var, .. } => {
                out.insert(*var);
            }
            Statement::Loop { body: inner, .. } => collect_written(inner, out),
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Random control-flow graphs (as bytecode) and the loop oracle
// ---------------------------------------------------------------------------

/// Emits bytecode laying out `2..=max_blocks` JUMPDEST-led blocks whose
/// terminators jump to random block starts. Some blocks use an unresolved
/// (CALLDATALOAD-fed) jump to exercise the over-approximation path.
pub fn random_cfg_bytecode(rng: &mut ChaCha8Rng, max_blocks: usize) -> Vec<u8> {
    let n = rng.random_range(2..=max_blocks.max(2));
    // Kinds: 0 stop, 1 jump, 2 jumpi, 3 unresolved jump.
    let mut kinds: Vec<u8> = (0..n)
        .map(|_| {
            let r = rng.random_range(0..10);
            match r {
                0..=1 => 0,
                2..=5 => 1,
                6..=8 => 2,
                _ => 3,
            }
        })
        .collect();
    kinds[n - 1] = 0; // last block must not fall through past the end
    let sizes: Vec<usize> = kinds
        .iter()
        .map(|k| match k {
            0 => 2, // JUMPDEST STOP
            1 => 5, // JUMPDEST PUSH2 tt JUMP
            2 => 7, // JUMPDEST PUSH1 01 PUSH2 tt JUMPI
            _ => 5, // JUMPDEST PUSH1 00 CALLDATALOAD JUMP
        })
        .collect();
    let mut starts = Vec::with_capacity(n);
    let mut off = 0usize;
    for s in &sizes {
        starts.push(off);
        off += s;
    }
    let mut code = Vec::with_capacity(off);
    for (i, kind) in kinds.iter().enumerate() {
        let target = starts[rng.random_range(0..n)] as u16;
        code.push(0x5b); // JUMPDEST
        match kind {
            0 => code.push(0x00), // STOP
            1 => {
                code.push(0x61); // PUSH2
                code.extend_from_slice(&target.to_be_bytes());
                code.push(0x56); // JUMP
            }
            2 => {
                code.extend_from_slice(&[0x60, 0x01]); // PUSH1 1 (condition)
                code.push(0x61); // PUSH2
                code.extend_from_slice(&target.to_be_bytes());
                code.push(0x57); // JUMPI
            }
            _ => {
                code.extend_from_slice(&[0x60, 0x00, 0x35, 0x56]); // PUSH1 0 CALLDATALOAD JUMP
            }
        }
        let _ = i;
    }
    code
}

/// Natural loops by first principles: filtered adjacency (no edges out of
/// unresolved blocks), reachability, node-removal dominance, back edges,
/// backward-closure bodies.
pub fn oracle_loops(cfg: &Cfg) -> BTreeSet<(usize, usize, Vec<usize>)> {
    let n = cfg.blocks.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut radj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &cfg.edges {
        if !cfg.unresolved.contains(&e.from) {
            adj[e.from].insert(e.to);
            radj[e.to].insert(e.from);
        }
    }
    let reach = closure(cfg.entry, &adj, None);

    // v dominates u iff removing v cuts every entry→u path.
    let dominates = |v: usize, u: usize| -> bool {
        if v == u {
            return true;
        }
        !closure(cfg.entry, &adj, Some(v)).contains(&u)
    };

    let mut out = BTreeSet::new();
    for &latch in &reach {
        for &header in &adj[latch] {
            if !reach.contains(&header) || !dominates(header, latch) {
                continue;
            }
            // Body: header + every reachable block that reaches the latch
            // without passing through the header.
            let mut body = BTreeSet::from([header, latch]);
            let mut work = vec![latch];
            while let Some(b) = work.pop() {
                if b == header {
                    continue;
                }
                for &p in &radj[b] {
                    if reach.contains(&p) && body.insert(p) {
                        work.push(p);
                    }
                }
            }
            out.insert((header, latch, body.into_iter().collect()));
        }
    }
    out
}

fn closure(entry: usize, adj: &[BTreeSet<usize>], skip: Option<usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    if Some(entry) == skip {
        return seen;
    }
    seen.insert(entry);
    let mut work = vec![entry];
    while let Some(b) = work.pop() {
        for &next in &adj[b] {
            if Some(next) == skip {
                continue;
            }
            if seen.insert(next) {
                work.push(next);
            }
        }
    }
    seen
}

// ---------------------------------------------------------------------------
// SDG reachability oracle
// ---------------------------------------------------------------------------

/// A random model's SDG with its real RW/ASD edges plus random TSD pairs
/// over the model's function names (self-pairs excluded, mirroring the
/// miner's `f2 != f1` rule).
pub fn random_sdg(rng: &mut ChaCha8Rng) -> Sdg {
    let m = random_model(rng);
    let seg = Segmentation::from_model(&m);
    let rw = extract_rw(&m);
    let asd = extract_asd(&m);
    let names: Vec<String> = m.functions.iter().map(|f| f.name.clone()).collect();
    let mut tsd = Vec::new();
    for _ in 0..rng.random_range(0..=3) {
        let a = &names[rng.random_range(0..names.len())];
        let b = &names[rng.random_range(0..names.len())];
        if a != b {
            tsd.push(TsdEdge { dependent: a.clone(), prerequisite: b.clone() });
        }
    }
    tsd.sort();
    tsd.dedup();
    build_sdg(&m, &seg, &rw, &asd, &tsd).expect("consistent inputs")
}

/// A non-empty random subset of the five edge labels.
pub fn random_labels(rng: &mut ChaCha8Rng) -> Vec<EdgeLabel> {
    let mut labels: Vec<EdgeLabel> =
        EdgeLabel::ALL.into_iter().filter(|_| rng.random_bool(0.6)).collect();
    if labels.is_empty() {
        labels.push(EdgeLabel::Control);
    }
    labels
}

/// Forward closure over the raw edge list (the library answer goes through
/// its prebuilt adjacency map instead).
pub fn oracle_reachable(g: &Sdg, sources: &[NodeId], labels: &[EdgeLabel]) -> BTreeSet<NodeId> {
    let mut seen: BTreeSet<NodeId> = sources.iter().copied().collect();
    loop {
        let mut grew = false;
        for e in &g.edges {
            if labels.contains(&e.label) && seen.contains(&e.from) && seen.insert(e.to) {
                grew = true;
            }
        }
        if !grew {
            return seen;
        }
    }
}

// ---------------------------------------------------------------------------
// Random traces and the TSD oracle
// ---------------------------------------------------------------------------

pub fn random_traces(rng: &mut ChaCha8Rng) -> Vec<TransactionTrace> {
    let labels = ["A", "B", "C", "D"];
    let n_labels = rng.random_range(1..=labels.len());
    let n_traces = rng.random_range(1..=5);
    (0..n_traces)
        .map(|i| TransactionTrace {
            sender: format!("0x{:040x}", i + 1),
            calls: (0..rng.random_range(1..=6))
                .map(|_| labels[rng.random_range(0..n_labels)].to_string())
                .collect(),
        })
        .collect()
}

/// Necessary predecessors by path enumeration: `(f2, f1)` holds when every
/// start-path to an `f2`-transition source takes an `f1`-transition first.
/// States reachable without `f1` are found by enumerating simple paths.
pub fn oracle_tsd(fsm: &Fsm, min_support: u64) -> BTreeSet<(String, String)> {
    let labels: Vec<String> = fsm.labels().iter().map(|l| l.to_string()).collect();
    let mut out = BTreeSet::new();
    for f1 in &labels {
        // Simple-path enumeration from the start, refusing f1-labeled
        // transitions.
        let mut reachable: BTreeSet<u32> = BTreeSet::new();
        let mut stack = vec![(fsm.start, vec![fsm.start])];
        while let Some((state, path)) = stack.pop() {
            reachable.insert(state);
            for ((src, label), &dst) in &fsm.transitions {
                if *src == state && label != f1 && !path.contains(&dst) {
                    let mut next = path.clone();
                    next.push(dst);
                    stack.push((dst, next));
                }
            }
        }
        for f2 in &labels {
            if f2 == f1 || fsm.label_support(f2) < min_support {
                continue;
            }
            let blocked = fsm
                .transitions
                .keys()
                .filter(|(_, l)| l == f2)
                .all(|(src, _)| !reachable.contains(src));
            if blocked {
                out.insert((f2.clone(), f1.clone()));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Random instruction streams (disassembler round-trip)
// ---------------------------------------------------------------------------

/// Random bytes fixed up so no PUSH immediate runs past the end.
pub fn random_valid_code(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u8> {
    let target = rng.random_range(1..=max_len);
    let mut code: Vec<u8> = Vec::with_capacity(target + 32);
    while code.len() < target {
        let op: u8 = rng.random();
        code.push(op);
        if (0x60..=0x7f).contains(&op) {
            let width = (op - 0x5f) as usize;
            for _ in 0..width {
                code.push(rng.random());
            }
        }
    }
    code
}

// ---------------------------------------------------------------------------
// Straight-line stack programs and a concrete mini-interpreter
// ---------------------------------------------------------------------------

type U256 = primitive_types::U256;

/// Generates a straight-line program over PUSH/DUP/SWAP/ALU opcodes whose
/// stack depth never exceeds 20 and never underflows.
pub fn random_stack_program(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut code = Vec::new();
    let mut depth: usize = 0;
    let n_ops = rng.random_range(1..=24);
    for _ in 0..n_ops {
        // Pick an op compatible with the current depth.
        let choice = rng.random_range(0..10);
        if depth == 0 || (choice < 3 && depth < 20) {
            // PUSH with a random width.
            let width = [1usize, 2, 4, 32][rng.random_range(0..4)];
            code.push(0x5f + width as u8);
            for _ in 0..width {
                code.push(rng.random());
            }
            depth += 1;
        } else if choice < 5 && depth < 20 {
            // DUPn
            let n = rng.random_range(1..=depth.min(16));
            code.push(0x80 + (n as u8 - 1));
            depth += 1;
        } else if choice < 6 && depth >= 2 {
            // SWAPn
            let n = rng.random_range(1..=(depth - 1).min(16));
            code.push(0x90 + (n as u8 - 1));
        } else if choice < 8 && depth >= 1 {
            // Unary: ISZERO or NOT
            code.push(if rng.random_bool(0.5) { 0x15 } else { 0x19 });
        } else if depth >= 2 {
            // Binary ALU
            const BIN: [u8; 13] =
                [0x01, 0x02, 0x03, 0x04, 0x06, 0x0a, 0x10, 0x11, 0x14, 0x16, 0x17, 0x18, 0x1b];
            let mut op = BIN[rng.random_range(0..BIN.len())];
            if op == 0x1b && rng.random_bool(0.5) {
                op = 0x1c; // SHR half the time
            }
            code.push(op);
            depth -= 1;
        } else {
            code.push(0x5f + 1); // PUSH1
            code.push(rng.random());
            depth += 1;
        }
    }
    code
}

/// Concretely executes a straight-line stack program per EVM semantics
/// (`stack` is bottom-first). Panics on underflow — the generator prevents
/// it.
pub fn concrete_exec(instrs: &[Instruction]) -> Vec<U256> {
    let mut stack: Vec<U256> = Vec::new();
    for ins in instrs {
        let op = ins.opcode;
        match op {
            0x60..=0x7f => {
                let mut v = U256::zero();
                for b in &ins.imm {
                    v = (v << 8) | U256::from(*b);
                }
                stack.push(v);
            }
            0x80..=0x8f => {
                let n = (op - 0x80) as usize + 1;
                let v = stack[stack.len() - n];
                stack.push(v);
            }
            0x90..=0x9f => {
                let n = (op - 0x90) as usize + 1;
                let top = stack.len() - 1;
                stack.swap(top, top - n);
            }
            0x15 => {
                let a = stack.pop().unwrap();
                stack.push(if a.is_zero() { U256::one() } else { U256::zero() });
            }
            0x19 => {
                let a = stack.pop().unwrap();
                stack.push(!a);
            }
            _ => {
                let a = stack.pop().unwrap();
                let b = stack.pop().unwrap();
                let r = match op {
                    0x01 => a.overflowing_add(b).0,
                    0x02 => a.overflowing_mul(b).0,
                    0x03 => a.overflowing_sub(b).0,
                    0x04 => {
                        if b.is_zero() {
                            U256::zero()
                        } else {
                            a / b
                        }
                    }
                    0x06 => {
                        if b.is_zero() {
                            U256::zero()
                        } else {
                            a % b
                        }
                    }
                    0x0a => a.overflowing_pow(b).0,
                    0x10 => U256::from((a < b) as u8),
                    0x11 => U256::from((a > b) as u8),
                    0x14 => U256::from((a == b) as u8),
                    0x16 => a & b,
                    0x17 => a | b,
                    0x18 => a ^ b,
                    0x1b => {
                        // SHL: a is the shift, b the value.
                        if a >= U256::from(256u32) {
                            U256::zero()
                        } else {
                            b << a.as_usize()
                        }
                    }
                    0x1c => {
                        if a >= U256::from(256u32) {
                            U256::zero()
                        } else {
                            b >> a.as_usize()
                        }
                    }
                    other => panic!("concrete_exec: unsupported opcode 0x{other:02x}"),
                };
                stack.push(r);
            }
        }
    }
    stack
}
