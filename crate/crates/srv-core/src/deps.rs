//! Read/write and assertion-based state dependency extraction.
//!
//! RW edges record every `(function, statement, var, mode)` storage access
//! occurrence in the model, including reads buried in assert conditions,
//! write values, call targets/arguments and loop bounds.
//!
//! An ASD edge `(reader, writer, var)` exists when `reader` has an `Assert`
//! whose condition reads state var `var` and `writer` has a `Write` to that
//! same var anywhere in its body. A function asserting on a var it writes
//! itself yields a self-edge.

use crate::model::{ContractModel, Expr, Statement, StmtPath, VarRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AccessMode {
    Read,
    Write,
}

impl AccessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessMode::Read => "read",
            AccessMode::Write => "write",
        }
    }
}

/// One storage access occurrence. At most one edge exists per
/// `(function, site, var, mode)` tuple: several reads of the same var inside
/// one statement collapse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RwEdge {
    pub function: String,
    pub site: StmtPath,
    pub var: VarRef,
    pub mode: AccessMode,
}

/// Deterministic RW extraction: functions in model order, statements in
/// pre-order, reads before the write within a statement, vars in
/// `(kind, slot)` order.
pub fn extract_rw(m: &ContractModel) -> Vec<RwEdge> {
    let mut out = Vec::new();
    for f in &m.functions {
        f.walk(&mut |path, stmt| {
            let mut reads: Vec<VarRef> = Vec::new();
            if let Statement::Read(var) = stmt {
                reads.push(*var);
            }
            for expr in stmt.exprs() {
                reads.extend(expr.var_leaves());
            }
            reads.sort();
            reads.dedup();
            for var in reads {
                out.push(RwEdge {
                    function: f.name.clone(),
                    site: path.clone(),
                    var,
                    mode: AccessMode::Read,
                });
            }
            if let Statement::Write { var, .. } = stmt {
                out.push(RwEdge {
                    function: f.name.clone(),
                    site: path.clone(),
                    var: *var,
                    mode: AccessMode::Write,
                });
            }
        });
    }
    out
}

/// Assertion-based state dependency: `reader` asserts on `var`, `writer`
/// writes it. `assert_site` is the first (pre-order) assert in `reader`
/// whose condition reads `var`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsdEdge {
    pub reader: String,
    pub writer: String,
    pub var: VarRef,
    pub assert_site: StmtPath,
}

/// Deterministic ASD extraction: readers in model order, then writers in
/// model order, then vars in `(kind, slot)` order.
pub fn extract_asd(m: &ContractModel) -> Vec<AsdEdge> {
    // Vars written per function, with functions kept in model order.
    let writes: Vec<(usize, std::collections::BTreeSet<VarRef>)> = m
        .functions
        .iter()
        .enumerate()
        .map(|(ix, f)| {
            let mut vars = std::collections::BTreeSet::new();
            f.walk(&mut |_, stmt| {
                if let Statement::Write { var, .. } = stmt {
                    vars.insert(*var);
                }
            });
            (ix, vars)
        })
        .collect();

    let mut out = Vec::new();
    for reader in &m.functions {
        // First assert site per var asserted on in this reader.
        let mut asserted: Vec<(VarRef, StmtPath)> = Vec::new();
        reader.walk(&mut |path, stmt| {
            if let Statement::Assert { cond } = stmt {
                for var in unique_vars(cond) {
                    if !asserted.iter().any(|(v, _)| *v == var) {
                        asserted.push((var, path.clone()));
                    }
                }
            }
        });
        asserted.sort_by_key(|(v, _)| *v);

        for (writer_ix, written) in &writes {
            for (var, site) in &asserted {
                if written.contains(var) {
                    out.push(AsdEdge {
                        reader: reader.name.clone(),
                        writer: m.functions[*writer_ix].name.clone(),
                        var: *var,
                        assert_site: site.clone(),
                    });
                }
            }
        }
    }
    out
}

fn unique_vars(e: &Expr) -> Vec<VarRef> {
    let mut vars = e.var_leaves();
    vars.sort();
    vars.dedup();
    vars
}
