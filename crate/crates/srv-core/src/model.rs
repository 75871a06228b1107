//! Canonical contract model: the IR every analysis in this crate runs on.
//!
//! A [`ContractModel`] is a flat list of state variables plus a list of
//! functions whose bodies are statement trees (loops nest). Expressions are
//! small trees over state-variable reads, environment atoms, call parameters,
//! 256-bit constants, external-call results, comparisons, boolean and
//! arithmetic operators.
//!
//! The JSON form is canonical: object keys sorted, no insignificant
//! whitespace, 256-bit integers as `0x`-prefixed lowercase minimal hex.
//! [`save_model`] always emits that form and `load_model(save_model(m)) == m`
//! holds for every valid model.

mod json;

pub use json::{load_model, save_model};

use primitive_types::U256;
use thiserror::Error;

/// Statement position inside a function: index list into nested bodies.
/// `[1, 0]` is the first statement of the loop at top-level index 1.
pub type StmtPath = Vec<usize>;

/// Maximum expression tree depth accepted by [`validate_model`].
pub const MAX_EXPR_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {pointer}: {message}")]
    SchemaViolation { pointer: String, message: String },
}

/// Storage layout class of a state variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    /// A plain slot read/written directly.
    Scalar,
    /// The base slot of a mapping; entries live at `keccak(key ++ slot)`.
    MappingBase,
}

impl VarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Scalar => "scalar",
            VarKind::MappingBase => "mapping-base",
        }
    }
}

/// Reference to a state variable from a statement or expression.
/// Variables are identified by `(slot, kind)`; names are display metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub slot: U256,
    pub kind: VarKind,
}

impl VarRef {
    pub fn scalar(slot: u64) -> Self {
        VarRef { slot: U256::from(slot), kind: VarKind::Scalar }
    }

    pub fn mapping(slot: u64) -> Self {
        VarRef { slot: U256::from(slot), kind: VarKind::MappingBase }
    }
}

impl std::fmt::Display for VarRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            VarKind::Scalar => write!(f, "slot[0x{:x}]", self.slot),
            VarKind::MappingBase => write!(f, "map[0x{:x}]", self.slot),
        }
    }
}

/// Declared state variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVarDecl {
    pub slot: U256,
    pub kind: VarKind,
    pub name: Option<String>,
}

impl StateVarDecl {
    pub fn var_ref(&self) -> VarRef {
        VarRef { slot: self.slot, kind: self.kind }
    }

    /// Human-readable label used in reports: the name when present,
    /// otherwise the slot reference.
    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => self.var_ref().to_string(),
        }
    }
}

/// Environment values observable by contract code. `CALLDATA` covers
/// CALLDATALOAD / CALLDATACOPY / CALLDATASIZE collectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnvAtom {
    Caller,
    Origin,
    Callvalue,
    Calldata,
    Timestamp,
    Number,
    Prevrandao,
    Difficulty,
    Blockhash,
    Coinbase,
    Gaslimit,
    Balance,
    Address,
}

impl EnvAtom {
    pub const ALL: [EnvAtom; 13] = [
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

    pub fn as_str(self) -> &'static str {
        match self {
            EnvAtom::Caller => "CALLER",
            EnvAtom::Origin => "ORIGIN",
            EnvAtom::Callvalue => "CALLVALUE",
            EnvAtom::Calldata => "CALLDATA",
            EnvAtom::Timestamp => "TIMESTAMP",
            EnvAtom::Number => "NUMBER",
            EnvAtom::Prevrandao => "PREVRANDAO",
            EnvAtom::Difficulty => "DIFFICULTY",
            EnvAtom::Blockhash => "BLOCKHASH",
            EnvAtom::Coinbase => "COINBASE",
            EnvAtom::Gaslimit => "GASLIMIT",
            EnvAtom::Balance => "BALANCE",
            EnvAtom::Address => "ADDRESS",
        }
    }

    pub fn parse(s: &str) -> Option<EnvAtom> {
        EnvAtom::ALL.iter().copied().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolOp {
    And,
    Or,
    Not,
}

impl BoolOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BoolOp::And => "and",
            BoolOp::Or => "or",
            BoolOp::Not => "not",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    BitAnd,
    Xor,
}

impl ArithOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            ArithOp::Mul => "mul",
            ArithOp::Div => "div",
            ArithOp::Mod => "mod",
            ArithOp::Shl => "shl",
            ArithOp::Shr => "shr",
            ArithOp::BitAnd => "and-bits",
            ArithOp::Xor => "xor",
        }
    }
}

/// Expression tree. Arity invariants: `Bool(Not, ops)` takes exactly one
/// operand; other `Bool` and all `Arith` nodes take at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Read of a state variable.
    Var(VarRef),
    /// Environment atom (caller, block timestamp, ...).
    Atom(EnvAtom),
    /// Call parameter by zero-based index.
    Param(u32),
    /// 256-bit constant.
    Const(U256),
    /// Result value of the most recent external call.
    CallResult,
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Bool(BoolOp, Vec<Expr>),
    Arith(ArithOp, Vec<Expr>),
}

impl Expr {
    pub fn constant(v: u64) -> Expr {
        Expr::Const(U256::from(v))
    }

    /// Pre-order walk over every node of the tree.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Cmp(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Bool(_, ops) | Expr::Arith(_, ops) => {
                for op in ops {
                    op.walk(f);
                }
            }
            _ => {}
        }
    }

    /// State variables read anywhere in the tree, in pre-order.
    pub fn var_leaves(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                out.push(*v);
            }
        });
        out
    }

    /// First environment atom satisfying `pred`, in pre-order.
    pub fn find_atom(&self, pred: impl Fn(EnvAtom) -> bool) -> Option<EnvAtom> {
        let mut found = None;
        self.walk(&mut |e| {
            if found.is_none() {
                if let Expr::Atom(a) = e {
                    if pred(*a) {
                        found = Some(*a);
                    }
                }
            }
        });
        found
    }

    pub fn contains_call_result(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::CallResult));
        found
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Cmp(_, a, b) => 1 + a.depth().max(b.depth()),
            Expr::Bool(_, ops) | Expr::Arith(_, ops) => {
                1 + ops.iter().map(Expr::depth).max().unwrap_or(0)
            }
            _ => 1,
        }
    }
}

/// External call flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CallKind {
    Call,
    CallCode,
    StaticCall,
    DelegateCall,
    Transfer,
}

impl CallKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::Call => "call",
            CallKind::CallCode => "callcode",
            CallKind::StaticCall => "staticcall",
            CallKind::DelegateCall => "delegatecall",
            CallKind::Transfer => "transfer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// Explicit read of a state variable (reads also occur inside exprs).
    Read(VarRef),
    /// Store to a state variable.
    Write { var: VarRef, value: Expr },
    /// State-reverting check: execution continues only if `cond` holds.
    Assert { cond: Expr },
    /// Call into another contract.
    ExternalCall { kind: CallKind, target: Expr, result_used: bool },
    /// Call of another function of the same contract.
    InternalCall { callee: String, args: Vec<Expr> },
    /// Loop with optional bound expression; body statements nest.
    Loop { body: Vec<Statement>, bound: Option<Expr> },
    /// Function exit.
    Return,
}

impl Statement {
    /// Expressions attached directly to this statement (not recursing into
    /// loop bodies).
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Statement::Read(_) | Statement::Return => Vec::new(),
            Statement::Write { value, .. } => vec![value],
            Statement::Assert { cond } => vec![cond],
            Statement::ExternalCall { target, .. } => vec![target],
            Statement::InternalCall { args, .. } => args.iter().collect(),
            Statement::Loop { bound, .. } => bound.iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::External => "external",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
        }
    }

    /// Callable straight from a transaction.
    pub fn is_entry(self) -> bool {
        matches!(self, Visibility::Public | Visibility::External)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// 4-byte dispatch selector; `None` marks the fallback.
    pub selector: Option<[u8; 4]>,
    pub visibility: Visibility,
    pub param_count: u32,
    pub body: Vec<Statement>,
}

impl FunctionDef {
    /// Pre-order walk over the statement tree with paths.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&StmtPath, &'a Statement)) {
        walk_statements(&self.body, &mut Vec::new(), f);
    }

    /// Statement at `path`, if it exists.
    pub fn statement_at(&self, path: &[usize]) -> Option<&Statement> {
        let mut body = &self.body;
        let mut stmt = None;
        for &ix in path {
            stmt = body.get(ix);
            match stmt? {
                Statement::Loop { body: inner, .. } => body = inner,
                _ => body = EMPTY_BODY,
            }
        }
        stmt
    }
}

static EMPTY_BODY: &Vec<Statement> = &Vec::new();

fn walk_statements<'a>(
    body: &'a [Statement],
    path: &mut StmtPath,
    f: &mut impl FnMut(&StmtPath, &'a Statement),
) {
    for (ix, stmt) in body.iter().enumerate() {
        path.push(ix);
        f(path, stmt);
        if let Statement::Loop { body: inner, .. } = stmt {
            walk_statements(inner, path, f);
        }
        path.pop();
    }
}

/// How the model came to exist. Not part of structural identity beyond
/// round-tripping: the canonical JSON omits the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Provenance {
    #[default]
    LoadedFromJson,
    LiftedFromBytecode,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::LoadedFromJson => "loaded-from-json",
            Provenance::LiftedFromBytecode => "lifted-from-bytecode",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContractModel {
    /// On-chain address, when known.
    pub address: Option<[u8; 20]>,
    pub functions: Vec<FunctionDef>,
    pub state_vars: Vec<StateVarDecl>,
    pub provenance: Provenance,
}

impl ContractModel {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn var_decl(&self, var: &VarRef) -> Option<&StateVarDecl> {
        self.state_vars.iter().find(|d| d.var_ref() == *var)
    }

    /// Display label for a variable reference (declared name when present).
    pub fn var_display(&self, var: &VarRef) -> String {
        match self.var_decl(var) {
            Some(d) => d.display_name(),
            None => var.to_string(),
        }
    }
}

/// Machine-readable class of a validation failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    DuplicateFunction,
    DuplicateSelector,
    MultipleFallbacks,
    DuplicateStateVar,
    DuplicateVarName,
    UnknownStateVar,
    UnknownCallee,
    EmptyOperands,
    ArityMismatch,
    ExprTooDeep,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DuplicateFunction => "duplicate-function",
            ViolationCode::DuplicateSelector => "duplicate-selector",
            ViolationCode::MultipleFallbacks => "multiple-fallbacks",
            ViolationCode::DuplicateStateVar => "duplicate-state-var",
            ViolationCode::DuplicateVarName => "duplicate-var-name",
            ViolationCode::UnknownStateVar => "unknown-state-var",
            ViolationCode::UnknownCallee => "unknown-callee",
            ViolationCode::EmptyOperands => "empty-operands",
            ViolationCode::ArityMismatch => "arity-mismatch",
            ViolationCode::ExprTooDeep => "expr-too-deep",
        }
    }
}

/// One validation failure with a JSON-pointer location into the canonical
/// serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", self.code.as_str(), self.pointer, self.message)
    }
}

/// Checks every model invariant; returns all violations (empty = valid).
///
/// Invariants: function names unique; selectors unique; at most one
/// public/external function without a selector (the fallback); state vars
/// unique per `(slot, kind)` and per name; every referenced state var is
/// declared; every internal-call target exists; boolean/arithmetic operand
/// arity; expression depth at most [`MAX_EXPR_DEPTH`].
pub fn validate_model(m: &ContractModel) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen_names = std::collections::BTreeSet::new();
    let mut seen_selectors = std::collections::BTreeSet::new();
    let mut fallback: Option<&str> = None;
    for (i, f) in m.functions.iter().enumerate() {
        let ptr = format!("/functions/{i}");
        if !seen_names.insert(f.name.as_str()) {
            out.push(Violation {
                code: ViolationCode::DuplicateFunction,
                pointer: format!("{ptr}/name"),
                message: format!("function '{}' declared more than once", f.name),
            });
        }
        match f.selector {
            Some(sel) => {
                if !seen_selectors.insert(sel) {
                    out.push(Violation {
                        code: ViolationCode::DuplicateSelector,
                        pointer: format!("{ptr}/selector"),
                        message: format!("selector 0x{} declared more than once", hex::encode(sel)),
                    });
                }
            }
            None if f.visibility.is_entry() => match fallback {
                None => fallback = Some(&f.name),
                Some(first) => out.push(Violation {
                    code: ViolationCode::MultipleFallbacks,
                    pointer: format!("{ptr}/selector"),
                    message: format!(
                        "'{}' and '{}' both lack a selector; only one fallback is allowed",
                        first, f.name
                    ),
                }),
            },
            None => {}
        }
    }

    let mut seen_vars = std::collections::BTreeSet::new();
    let mut seen_var_names = std::collections::BTreeSet::new();
    for (i, d) in m.state_vars.iter().enumerate() {
        let ptr = format!("/state_vars/{i}");
        if !seen_vars.insert((d.kind, d.slot)) {
            out.push(Violation {
                code: ViolationCode::DuplicateStateVar,
                pointer: ptr.clone(),
                message: format!("state var {} declared more than once", d.var_ref()),
            });
        }
        if let Some(name) = &d.name {
            if !seen_var_names.insert(name.as_str()) {
                out.push(Violation {
                    code: ViolationCode::DuplicateVarName,
                    pointer: format!("{ptr}/name"),
                    message: format!("state var name '{name}' declared more than once"),
                });
            }
        }
    }

    let declared: std::collections::BTreeSet<VarRef> =
        m.state_vars.iter().map(StateVarDecl::var_ref).collect();
    let names: std::collections::BTreeSet<&str> =
        m.functions.iter().map(|f| f.name.as_str()).collect();

    for (i, f) in m.functions.iter().enumerate() {
        f.walk(&mut |path, stmt| {
            let ptr = stmt_pointer(i, path);
            match stmt {
                Statement::Read(var) => {
                    check_var_ref(&declared, *var, format!("{ptr}/var"), &mut out);
                }
                Statement::Write { var, .. } => {
                    check_var_ref(&declared, *var, format!("{ptr}/var"), &mut out);
                }
                Statement::InternalCall { callee, .. } if !names.contains(callee.as_str()) => {
                    out.push(Violation {
                        code: ViolationCode::UnknownCallee,
                        pointer: format!("{ptr}/callee"),
                        message: format!("internal call to undefined function '{callee}'"),
                    });
                }
                _ => {}
            }
            for (label, expr) in stmt_expr_slots(stmt) {
                check_expr(&declared, expr, format!("{ptr}/{label}"), &mut out);
            }
        });
    }

    out
}

fn stmt_pointer(func_ix: usize, path: &[usize]) -> String {
    let mut ptr = format!("/functions/{func_ix}");
    for ix in path {
        ptr.push_str("/body/");
        ptr.push_str(&ix.to_string());
    }
    ptr
}

fn stmt_expr_slots(stmt: &Statement) -> Vec<(String, &Expr)> {
    match stmt {
        Statement::Read(_) | Statement::Return => Vec::new(),
        Statement::Write { value, .. } => vec![("value".into(), value)],
        Statement::Assert { cond } => vec![("cond".into(), cond)],
        Statement::ExternalCall { target, .. } => vec![("target".into(), target)],
        Statement::InternalCall { args, .. } => {
            args.iter().enumerate().map(|(i, a)| (format!("args/{i}"), a)).collect()
        }
        Statement::Loop { bound, .. } => bound.iter().map(|b| ("bound".into(), b)).collect(),
    }
}

fn check_var_ref(
    declared: &std::collections::BTreeSet<VarRef>,
    var: VarRef,
    pointer: String,
    out: &mut Vec<Violation>,
) {
    if !declared.contains(&var) {
        out.push(Violation {
            code: ViolationCode::UnknownStateVar,
            pointer,
            message: format!("reference to undeclared state var {var}"),
        });
    }
}

fn check_expr(
    declared: &std::collections::BTreeSet<VarRef>,
    expr: &Expr,
    pointer: String,
    out: &mut Vec<Violation>,
) {
    if expr.depth() > MAX_EXPR_DEPTH {
        out.push(Violation {
            code: ViolationCode::ExprTooDeep,
            pointer: pointer.clone(),
            message: format!(
                "expression depth {} exceeds maximum {}",
                expr.depth(),
                MAX_EXPR_DEPTH
            ),
        });
    }
    check_expr_inner(declared, expr, pointer, out);
}

fn check_expr_inner(
    declared: &std::collections::BTreeSet<VarRef>,
    expr: &Expr,
    pointer: String,
    out: &mut Vec<Violation>,
) {
    match expr {
        Expr::Var(v) => check_var_ref(declared, *v, pointer, out),
        Expr::Cmp(_, a, b) => {
            check_expr_inner(declared, a, format!("{pointer}/cmp/1"), out);
            check_expr_inner(declared, b, format!("{pointer}/cmp/2"), out);
        }
        Expr::Bool(op, ops) => {
            if *op == BoolOp::Not && ops.len() != 1 {
                out.push(Violation {
                    code: ViolationCode::ArityMismatch,
                    pointer: pointer.clone(),
                    message: format!("'not' takes exactly one operand, got {}", ops.len()),
                });
            } else if ops.is_empty() {
                out.push(Violation {
                    code: ViolationCode::EmptyOperands,
                    pointer: pointer.clone(),
                    message: format!("'{}' requires at least one operand", op.as_str()),
                });
            }
            for (i, e) in ops.iter().enumerate() {
                check_expr_inner(declared, e, format!("{pointer}/bool/{}", i + 1), out);
            }
        }
        Expr::Arith(op, ops) => {
            if ops.is_empty() {
                out.push(Violation {
                    code: ViolationCode::EmptyOperands,
                    pointer: pointer.clone(),
                    message: format!("'{}' requires at least one operand", op.as_str()),
                });
            }
            for (i, e) in ops.iter().enumerate() {
                check_expr_inner(declared, e, format!("{pointer}/arith/{}", i + 1), out);
            }
        }
        _ => {}
    }
}

/// Strict canonical-hex parsing shared by the JSON loader: `0x` prefix,
/// lowercase, minimal (no leading zeros except `0x0`).
pub fn parse_canonical_u256(s: &str) -> Result<U256, String> {
    let digits = s.strip_prefix("0x").ok_or_else(|| format!("'{s}' lacks the 0x prefix"))?;
    if digits.is_empty() {
        return Err(format!("'{s}' has no hex digits"));
    }
    if digits.len() > 64 {
        return Err(format!("'{s}' exceeds 256 bits"));
    }
    if !digits.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(format!("'{s}' is not lowercase hex"));
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return Err(format!("'{s}' has leading zeros (non-minimal hex)"));
    }
    U256::from_str_radix(digits, 16).map_err(|e| e.to_string())
}

/// Canonical form emitted by [`save_model`]: minimal lowercase hex.
pub fn format_canonical_u256(v: U256) -> String {
    format!("0x{v:x}")
}

/// Fixed-width lowercase hex for byte strings (selectors, addresses).
pub fn parse_fixed_hex<const N: usize>(s: &str) -> Result<[u8; N], String> {
    let digits = s.strip_prefix("0x").ok_or_else(|| format!("'{s}' lacks the 0x prefix"))?;
    if digits.len() != 2 * N {
        return Err(format!("'{s}' must be exactly {} hex digits", 2 * N));
    }
    if digits.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(format!("'{s}' must be lowercase hex"));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(digits, &mut out).map_err(|e| format!("'{s}': {e}"))?;
    Ok(out)
}
