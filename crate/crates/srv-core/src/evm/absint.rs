//! Constant-stack abstract interpretation of basic blocks.
//!
//! Values are tracked as exact 256-bit constants, keccak-derived mapping
//! slots (`keccak(key ++ base_slot)` with a constant base), or small
//! symbolic expressions over the contract IR; anything else is `Top`.
//! Stack depth is modeled to [`MAX_STACK_DEPTH`] entries; pops beyond the
//! modeled depth yield `Top`. A word-granular memory map supports the solc
//! mapping-access idiom (key at `0x00`, slot at `0x20`, `SHA3(0, 64)`).

use super::disasm::Instruction;
use super::opcode::{self, spec};
use crate::model::{ArithOp, CallKind, CmpOp, EnvAtom, Expr, VarKind, VarRef};
use primitive_types::U256;
use std::collections::{BTreeMap, BTreeSet};

/// Modeled stack depth; values deeper than this are forgotten.
pub const MAX_STACK_DEPTH: usize = 32;

/// Cap on symbolic expression depth; larger expressions collapse to `Top`.
pub const MAX_SYM_DEPTH: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbsVal {
    Top,
    Const(U256),
    /// Entry of the mapping whose base slot is the payload.
    MapSlot(U256),
    Sym(Expr),
}

impl AbsVal {
    /// IR expression for this value, when one exists.
    pub fn to_expr(&self) -> Option<Expr> {
        match self {
            AbsVal::Const(c) => Some(Expr::Const(*c)),
            AbsVal::Sym(e) => Some(e.clone()),
            AbsVal::Top | AbsVal::MapSlot(_) => None,
        }
    }

    fn meet(&self, other: &AbsVal) -> AbsVal {
        if self == other {
            self.clone()
        } else {
            AbsVal::Top
        }
    }
}

/// Abstract stack, bottom first. An empty vector means "no information":
/// pops produce `Top`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AbsStack {
    vals: Vec<AbsVal>,
}

impl AbsStack {
    pub fn unknown() -> AbsStack {
        AbsStack::default()
    }

    pub fn push(&mut self, v: AbsVal) {
        if self.vals.len() == MAX_STACK_DEPTH {
            self.vals.remove(0);
        }
        self.vals.push(v);
    }

    pub fn pop(&mut self) -> AbsVal {
        self.vals.pop().unwrap_or(AbsVal::Top)
    }

    /// Peek `n` entries below the top (0 = top).
    pub fn peek(&self, n: usize) -> AbsVal {
        if n < self.vals.len() {
            self.vals[self.vals.len() - 1 - n].clone()
        } else {
            AbsVal::Top
        }
    }

    pub fn depth(&self) -> usize {
        self.vals.len()
    }

    /// Pointwise meet aligned from the top; unequal heights truncate to the
    /// shorter stack (deeper values are forgotten).
    pub fn meet(&self, other: &AbsStack) -> AbsStack {
        let n = self.vals.len().min(other.vals.len());
        let a = &self.vals[self.vals.len() - n..];
        let b = &other.vals[other.vals.len() - n..];
        AbsStack { vals: a.iter().zip(b).map(|(x, y)| x.meet(y)).collect() }
    }
}

/// Where a storage access lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SlotRef {
    Const(U256),
    MappingBase(U256),
    Unknown,
}

impl SlotRef {
    pub fn var_ref(&self) -> Option<VarRef> {
        match self {
            SlotRef::Const(s) => Some(VarRef { slot: *s, kind: VarKind::Scalar }),
            SlotRef::MappingBase(s) => Some(VarRef { slot: *s, kind: VarKind::MappingBase }),
            SlotRef::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessDir {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageAccess {
    pub offset: usize,
    pub dir: AccessDir,
    pub slot: SlotRef,
    /// Written value, when expressible (writes only).
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtCallSite {
    pub offset: usize,
    pub kind: CallKind,
    pub target: Option<Expr>,
    /// False when the next instruction discards the result (`POP`).
    pub result_used: bool,
}

/// Jump-target resolution at a block's terminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpTarget {
    None,
    Const(U256),
    Unknown,
}

/// Everything one symbolic execution of a block yields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockExec {
    pub exit_stack: AbsStack,
    pub storage: Vec<StorageAccess>,
    pub env_reads: BTreeSet<EnvAtom>,
    pub ext_calls: Vec<ExtCallSite>,
    /// JUMPI condition, when expressible.
    pub branch_cond: Option<Expr>,
    pub jump_target: JumpTarget,
}

/// Executes a block's instructions from the given entry stack.
pub fn exec_block(instrs: &[Instruction], entry: &AbsStack) -> BlockExec {
    let mut stack = entry.clone();
    let mut memory: BTreeMap<u64, AbsVal> = BTreeMap::new();
    let mut out = BlockExec {
        exit_stack: AbsStack::unknown(),
        storage: Vec::new(),
        env_reads: BTreeSet::new(),
        ext_calls: Vec::new(),
        branch_cond: None,
        jump_target: JumpTarget::None,
    };

    for (ix, ins) in instrs.iter().enumerate() {
        let op = ins.opcode;
        match op {
            _ if ins.is_push() => {
                stack.push(AbsVal::Const(ins.push_value().expect("push")));
            }
            _ if (0x80..=0x8f).contains(&op) => {
                let n = (op - 0x80) as usize;
                let v = stack.peek(n);
                stack.push(v);
            }
            _ if (0x90..=0x9f).contains(&op) => {
                let n = (op - 0x8f) as usize;
                swap(&mut stack, n);
            }
            opcode::ADD
            | opcode::SUB
            | opcode::MUL
            | opcode::DIV
            | opcode::MOD
            | opcode::SHL
            | opcode::SHR
            | opcode::AND
            | opcode::OR
            | opcode::XOR
            | opcode::EXP => {
                let a = stack.pop();
                let b = stack.pop();
                stack.push(arith(op, a, b));
            }
            opcode::LT | opcode::GT | opcode::SLT | opcode::SGT | opcode::EQ => {
                let a = stack.pop();
                let b = stack.pop();
                stack.push(compare(op, a, b));
            }
            opcode::ISZERO => {
                let a = stack.pop();
                stack.push(iszero(a));
            }
            opcode::NOT => {
                let a = stack.pop();
                stack.push(match a {
                    AbsVal::Const(c) => AbsVal::Const(!c),
                    _ => AbsVal::Top,
                });
            }
            opcode::ADDRESS => push_atom(&mut stack, &mut out, EnvAtom::Address),
            opcode::ORIGIN => push_atom(&mut stack, &mut out, EnvAtom::Origin),
            opcode::CALLER => push_atom(&mut stack, &mut out, EnvAtom::Caller),
            opcode::CALLVALUE => push_atom(&mut stack, &mut out, EnvAtom::Callvalue),
            opcode::TIMESTAMP => push_atom(&mut stack, &mut out, EnvAtom::Timestamp),
            opcode::NUMBER => push_atom(&mut stack, &mut out, EnvAtom::Number),
            opcode::PREVRANDAO => push_atom(&mut stack, &mut out, EnvAtom::Prevrandao),
            opcode::GASLIMIT => push_atom(&mut stack, &mut out, EnvAtom::Gaslimit),
            opcode::COINBASE => push_atom(&mut stack, &mut out, EnvAtom::Coinbase),
            opcode::BALANCE | opcode::SELFBALANCE => {
                if op == opcode::BALANCE {
                    stack.pop();
                }
                push_atom(&mut stack, &mut out, EnvAtom::Balance);
            }
            opcode::BLOCKHASH => {
                stack.pop();
                push_atom(&mut stack, &mut out, EnvAtom::Blockhash);
            }
            opcode::CALLDATASIZE => push_atom(&mut stack, &mut out, EnvAtom::Calldata),
            opcode::CALLDATALOAD => {
                let off = stack.pop();
                out.env_reads.insert(EnvAtom::Calldata);
                stack.push(calldata_word(off));
            }
            opcode::CALLDATACOPY => {
                stack.pop();
                stack.pop();
                stack.pop();
                out.env_reads.insert(EnvAtom::Calldata);
                memory.clear();
            }
            opcode::MLOAD => {
                let off = stack.pop();
                stack.push(match word_offset(&off) {
                    Some(o) => memory.get(&o).cloned().unwrap_or(AbsVal::Top),
                    None => AbsVal::Top,
                });
            }
            opcode::MSTORE => {
                let off = stack.pop();
                let val = stack.pop();
                match word_offset(&off) {
                    Some(o) => {
                        // Invalidate any overlapping word-aligned entries.
                        let lo = o.saturating_sub(31);
                        let keys: Vec<u64> = memory.range(lo..o + 32).map(|(k, _)| *k).collect();
                        for k in keys {
                            if k != o {
                                memory.remove(&k);
                            }
                        }
                        memory.insert(o, val);
                    }
                    None => memory.clear(),
                }
            }
            opcode::MSTORE8 => {
                let off = stack.pop();
                stack.pop();
                match word_offset(&off) {
                    Some(o) => {
                        let lo = o.saturating_sub(31);
                        let keys: Vec<u64> = memory.range(lo..o + 1).map(|(k, _)| *k).collect();
                        for k in keys {
                            memory.remove(&k);
                        }
                    }
                    None => memory.clear(),
                }
            }
            opcode::SHA3 => {
                let off = stack.pop();
                let len = stack.pop();
                stack.push(keccak_slot(&memory, &off, &len));
            }
            opcode::SLOAD => {
                let slot = stack.pop();
                let slot_ref = slot_ref(&slot);
                out.storage.push(StorageAccess {
                    offset: ins.offset,
                    dir: AccessDir::Read,
                    slot: slot_ref,
                    value: None,
                });
                stack.push(match slot_ref.var_ref() {
                    Some(var) => AbsVal::Sym(Expr::Var(var)),
                    None => AbsVal::Top,
                });
            }
            opcode::SSTORE => {
                let slot = stack.pop();
                let value = stack.pop();
                out.storage.push(StorageAccess {
                    offset: ins.offset,
                    dir: AccessDir::Write,
                    slot: slot_ref(&slot),
                    value: value.to_expr(),
                });
            }
            opcode::CALL | opcode::CALLCODE | opcode::DELEGATECALL | opcode::STATICCALL => {
                let kind = match op {
                    opcode::CALL => CallKind::Call,
                    opcode::CALLCODE => CallKind::CallCode,
                    opcode::DELEGATECALL => CallKind::DelegateCall,
                    _ => CallKind::StaticCall,
                };
                let pops = spec(op).expect("call spec").pops;
                stack.pop(); // gas
                let target = stack.pop().to_expr();
                for _ in 2..pops {
                    stack.pop();
                }
                let result_used = !matches!(
                    instrs.get(ix + 1),
                    Some(next) if next.opcode == opcode::POP
                );
                out.ext_calls.push(ExtCallSite { offset: ins.offset, kind, target, result_used });
                stack.push(AbsVal::Sym(Expr::CallResult));
                memory.clear(); // return data may land anywhere
            }
            opcode::JUMP => {
                let target = stack.pop();
                out.jump_target = resolve_target(target);
            }
            opcode::JUMPI => {
                let target = stack.pop();
                let cond = stack.pop();
                out.jump_target = resolve_target(target);
                out.branch_cond = cond.to_expr();
            }
            opcode::POP => {
                stack.pop();
            }
            opcode::JUMPDEST => {}
            _ => {
                // Generic handling from the arity table; unknown opcodes
                // have no arity and terminate the block anyway.
                if let Some(s) = spec(op) {
                    for _ in 0..s.pops {
                        stack.pop();
                    }
                    for _ in 0..s.pushes {
                        stack.push(AbsVal::Top);
                    }
                    // Any memory-writing op not modeled above.
                    if matches!(s.mnemonic, "CODECOPY" | "EXTCODECOPY" | "RETURNDATACOPY" | "MCOPY")
                    {
                        memory.clear();
                    }
                }
            }
        }
    }

    out.exit_stack = stack;
    out
}

fn swap(stack: &mut AbsStack, n: usize) {
    // Materialize enough depth, then swap top with the n-th entry.
    let mut tops: Vec<AbsVal> = (0..=n).map(|i| stack.peek(i)).collect();
    for _ in 0..=n {
        stack.pop();
    }
    tops.swap(0, n);
    for v in tops.into_iter().rev() {
        stack.push(v);
    }
}

fn push_atom(stack: &mut AbsStack, out: &mut BlockExec, atom: EnvAtom) {
    out.env_reads.insert(atom);
    stack.push(AbsVal::Sym(Expr::Atom(atom)));
}

fn calldata_word(offset: AbsVal) -> AbsVal {
    match offset {
        AbsVal::Const(c) if c >= U256::from(4u8) => {
            let rel = c - U256::from(4u8);
            if (rel % U256::from(32u8)).is_zero() && rel < U256::from(32u64 * 1024) {
                let ix = (rel / U256::from(32u8)).low_u64() as u32;
                return AbsVal::Sym(Expr::Param(ix));
            }
            AbsVal::Top
        }
        _ => AbsVal::Top,
    }
}

fn word_offset(v: &AbsVal) -> Option<u64> {
    match v {
        AbsVal::Const(c) if *c < U256::from(1u64 << 20) => Some(c.low_u64()),
        _ => None,
    }
}

/// The solc mapping idiom: `SHA3(p, 64)` over `mem[p] = key`,
/// `mem[p+32] = base slot` resolves to an entry of that mapping. A keccak
/// whose second word is itself a mapping entry (nested mappings) keeps the
/// outer base slot.
fn keccak_slot(memory: &BTreeMap<u64, AbsVal>, off: &AbsVal, len: &AbsVal) -> AbsVal {
    let (Some(o), AbsVal::Const(l)) = (word_offset(off), len) else {
        return AbsVal::Top;
    };
    if *l != U256::from(64u8) {
        return AbsVal::Top;
    }
    match memory.get(&(o + 32)) {
        Some(AbsVal::Const(base)) => AbsVal::MapSlot(*base),
        Some(AbsVal::MapSlot(base)) => AbsVal::MapSlot(*base),
        _ => AbsVal::Top,
    }
}

fn slot_ref(v: &AbsVal) -> SlotRef {
    match v {
        AbsVal::Const(c) => SlotRef::Const(*c),
        AbsVal::MapSlot(b) => SlotRef::MappingBase(*b),
        _ => SlotRef::Unknown,
    }
}

fn resolve_target(v: AbsVal) -> JumpTarget {
    match v {
        AbsVal::Const(c) => JumpTarget::Const(c),
        _ => JumpTarget::Unknown,
    }
}

fn sym2(build: impl FnOnce(Expr, Expr) -> Expr, a: &AbsVal, b: &AbsVal) -> AbsVal {
    match (a.to_expr(), b.to_expr()) {
        (Some(ea), Some(eb)) => {
            let e = build(ea, eb);
            if e.depth() > MAX_SYM_DEPTH {
                AbsVal::Top
            } else {
                AbsVal::Sym(e)
            }
        }
        _ => AbsVal::Top,
    }
}

fn arith(op: u8, a: AbsVal, b: AbsVal) -> AbsVal {
    if let (AbsVal::Const(x), AbsVal::Const(y)) = (&a, &b) {
        let (x, y) = (*x, *y);
        let c = match op {
            opcode::ADD => x.overflowing_add(y).0,
            opcode::SUB => x.overflowing_sub(y).0,
            opcode::MUL => x.overflowing_mul(y).0,
            opcode::DIV => x.checked_div(y).unwrap_or_default(),
            opcode::MOD => x.checked_rem(y).unwrap_or_default(),
            // Shift amount is the first operand.
            opcode::SHL => {
                if x >= U256::from(256u16) {
                    U256::zero()
                } else {
                    y << x.low_u64() as usize
                }
            }
            opcode::SHR => {
                if x >= U256::from(256u16) {
                    U256::zero()
                } else {
                    y >> x.low_u64() as usize
                }
            }
            opcode::AND => x & y,
            opcode::OR => x | y,
            opcode::XOR => x ^ y,
            opcode::EXP => x.overflowing_pow(y).0,
            _ => return AbsVal::Top,
        };
        return AbsVal::Const(c);
    }
    match op {
        opcode::ADD => sym2(|x, y| Expr::Arith(ArithOp::Add, vec![x, y]), &a, &b),
        opcode::SUB => sym2(|x, y| Expr::Arith(ArithOp::Sub, vec![x, y]), &a, &b),
        opcode::MUL => sym2(|x, y| Expr::Arith(ArithOp::Mul, vec![x, y]), &a, &b),
        opcode::DIV => sym2(|x, y| Expr::Arith(ArithOp::Div, vec![x, y]), &a, &b),
        opcode::MOD => sym2(|x, y| Expr::Arith(ArithOp::Mod, vec![x, y]), &a, &b),
        // EVM shift operands: stack is [shift, value]; the IR puts the
        // shifted value first.
        opcode::SHL => sym2(|shift, value| Expr::Arith(ArithOp::Shl, vec![value, shift]), &a, &b),
        opcode::SHR => sym2(|shift, value| Expr::Arith(ArithOp::Shr, vec![value, shift]), &a, &b),
        opcode::AND => sym2(
            |x, y| {
                if is_boolish(&x) && is_boolish(&y) {
                    Expr::Bool(crate::model::BoolOp::And, vec![x, y])
                } else {
                    Expr::Arith(ArithOp::BitAnd, vec![x, y])
                }
            },
            &a,
            &b,
        ),
        opcode::OR => sym2(
            |x, y| {
                if is_boolish(&x) && is_boolish(&y) {
                    Expr::Bool(crate::model::BoolOp::Or, vec![x, y])
                } else {
                    // No bitwise-or in the IR arith set matters for
                    // dependency analysis; approximate with add.
                    Expr::Arith(ArithOp::Add, vec![x, y])
                }
            },
            &a,
            &b,
        ),
        opcode::XOR => sym2(|x, y| Expr::Arith(ArithOp::Xor, vec![x, y]), &a, &b),
        _ => AbsVal::Top,
    }
}

fn is_boolish(e: &Expr) -> bool {
    matches!(e, Expr::Cmp(..) | Expr::Bool(..))
}

fn compare(op: u8, a: AbsVal, b: AbsVal) -> AbsVal {
    if let (AbsVal::Const(x), AbsVal::Const(y)) = (&a, &b) {
        let truth = match op {
            opcode::LT => x < y,
            opcode::GT => x > y,
            opcode::EQ => x == y,
            // Signed comparisons on constants: compare as unsigned; exact
            // signedness does not matter for dependency extraction.
            opcode::SLT => x < y,
            opcode::SGT => x > y,
            _ => return AbsVal::Top,
        };
        return AbsVal::Const(U256::from(truth as u8));
    }
    let cmp = match op {
        opcode::LT | opcode::SLT => CmpOp::Lt,
        opcode::GT | opcode::SGT => CmpOp::Gt,
        opcode::EQ => CmpOp::Eq,
        _ => return AbsVal::Top,
    };
    sym2(|x, y| Expr::Cmp(cmp, Box::new(x), Box::new(y)), &a, &b)
}

fn iszero(a: AbsVal) -> AbsVal {
    match a {
        AbsVal::Const(c) => AbsVal::Const(U256::from(c.is_zero() as u8)),
        AbsVal::Sym(e) => {
            let out = if is_boolish(&e) {
                Expr::Bool(crate::model::BoolOp::Not, vec![e])
            } else {
                Expr::Cmp(CmpOp::Eq, Box::new(e), Box::new(Expr::Const(U256::zero())))
            };
            if out.depth() > MAX_SYM_DEPTH {
                AbsVal::Top
            } else {
                AbsVal::Sym(out)
            }
        }
        _ => AbsVal::Top,
    }
}
