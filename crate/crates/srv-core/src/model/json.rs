//! Canonical JSON serialization of [`ContractModel`].
//!
//! Decoding is strict: unknown keys, wrong types, non-canonical hex and
//! semantic invariant violations all surface as
//! [`ModelError::SchemaViolation`] with a JSON-pointer location. Encoding
//! goes through `serde_json::Value` whose map is BTree-backed, so keys come
//! out sorted and equal models serialize to identical bytes.

use super::*;
use serde_json::{Map, Value};

/// Parses and validates a model from its JSON text.
pub fn load_model(text: &str) -> Result<ContractModel, ModelError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ModelError::MalformedJson(e.to_string()))?;
    let model = decode_model(&value)?;
    let violations = validate_model(&model);
    if let Some(first) = violations.first() {
        return Err(ModelError::SchemaViolation {
            pointer: first.pointer.clone(),
            message: if violations.len() == 1 {
                first.message.clone()
            } else {
                format!("{} (+{} more violations)", first.message, violations.len() - 1)
            },
        });
    }
    Ok(model)
}

/// Serializes to the canonical form: sorted keys, no whitespace,
/// minimal lowercase hex. Optional fields holding their defaults
/// (`address`, `selector`, `name`, `bound`, `provenance`) are omitted.
pub fn save_model(m: &ContractModel) -> String {
    serde_json::to_string(&encode_model(m)).expect("value serialization cannot fail")
}

fn err(pointer: &str, message: impl Into<String>) -> ModelError {
    ModelError::SchemaViolation { pointer: pointer.to_string(), message: message.into() }
}

fn as_object<'a>(v: &'a Value, ptr: &str) -> Result<&'a Map<String, Value>, ModelError> {
    v.as_object().ok_or_else(|| err(ptr, "expected an object"))
}

fn as_array<'a>(v: &'a Value, ptr: &str) -> Result<&'a Vec<Value>, ModelError> {
    v.as_array().ok_or_else(|| err(ptr, "expected an array"))
}

fn as_str<'a>(v: &'a Value, ptr: &str) -> Result<&'a str, ModelError> {
    v.as_str().ok_or_else(|| err(ptr, "expected a string"))
}

fn as_bool(v: &Value, ptr: &str) -> Result<bool, ModelError> {
    v.as_bool().ok_or_else(|| err(ptr, "expected a boolean"))
}

fn as_u32(v: &Value, ptr: &str) -> Result<u32, ModelError> {
    let n = v.as_u64().ok_or_else(|| err(ptr, "expected a non-negative integer"))?;
    u32::try_from(n).map_err(|_| err(ptr, "integer out of range"))
}

fn check_keys(
    obj: &Map<String, Value>,
    allowed: &[&str],
    required: &[&str],
    ptr: &str,
) -> Result<(), ModelError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(err(&format!("{ptr}/{key}"), format!("unknown key '{key}'")));
        }
    }
    for key in required {
        if !obj.contains_key(*key) {
            return Err(err(ptr, format!("missing required key '{key}'")));
        }
    }
    Ok(())
}

fn decode_model(v: &Value) -> Result<ContractModel, ModelError> {
    let obj = as_object(v, "")?;
    check_keys(
        obj,
        &["address", "functions", "provenance", "state_vars"],
        &["functions", "state_vars"],
        "",
    )?;

    let address = match obj.get("address") {
        None | Some(Value::Null) => None,
        Some(v) => {
            Some(parse_fixed_hex::<20>(as_str(v, "/address")?).map_err(|e| err("/address", e))?)
        }
    };

    let provenance = match obj.get("provenance") {
        None => Provenance::default(),
        Some(v) => match as_str(v, "/provenance")? {
            "loaded-from-json" => Provenance::LoadedFromJson,
            "lifted-from-bytecode" => Provenance::LiftedFromBytecode,
            other => return Err(err("/provenance", format!("unknown provenance '{other}'"))),
        },
    };

    let mut functions = Vec::new();
    for (i, f) in as_array(&obj["functions"], "/functions")?.iter().enumerate() {
        functions.push(decode_function(f, &format!("/functions/{i}"))?);
    }

    let mut state_vars = Vec::new();
    for (i, d) in as_array(&obj["state_vars"], "/state_vars")?.iter().enumerate() {
        state_vars.push(decode_state_var(d, &format!("/state_vars/{i}"))?);
    }

    Ok(ContractModel { address, functions, state_vars, provenance })
}

fn decode_state_var(v: &Value, ptr: &str) -> Result<StateVarDecl, ModelError> {
    let obj = as_object(v, ptr)?;
    check_keys(obj, &["kind", "name", "slot"], &["kind", "slot"], ptr)?;
    let slot = parse_canonical_u256(as_str(&obj["slot"], &format!("{ptr}/slot"))?)
        .map_err(|e| err(&format!("{ptr}/slot"), e))?;
    let kind = decode_var_kind(&obj["kind"], &format!("{ptr}/kind"))?;
    let name = match obj.get("name") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let s = as_str(v, &format!("{ptr}/name"))?;
            if s.is_empty() {
                return Err(err(&format!("{ptr}/name"), "name must be non-empty"));
            }
            Some(s.to_string())
        }
    };
    Ok(StateVarDecl { slot, kind, name })
}

fn decode_var_kind(v: &Value, ptr: &str) -> Result<VarKind, ModelError> {
    match as_str(v, ptr)? {
        "scalar" => Ok(VarKind::Scalar),
        "mapping-base" => Ok(VarKind::MappingBase),
        other => Err(err(ptr, format!("unknown var kind '{other}'"))),
    }
}

fn decode_var_ref(v: &Value, ptr: &str) -> Result<VarRef, ModelError> {
    let obj = as_object(v, ptr)?;
    check_keys(obj, &["kind", "slot"], &["kind", "slot"], ptr)?;
    let slot = parse_canonical_u256(as_str(&obj["slot"], &format!("{ptr}/slot"))?)
        .map_err(|e| err(&format!("{ptr}/slot"), e))?;
    let kind = decode_var_kind(&obj["kind"], &format!("{ptr}/kind"))?;
    Ok(VarRef { slot, kind })
}

fn decode_function(v: &Value, ptr: &str) -> Result<FunctionDef, ModelError> {
    let obj = as_object(v, ptr)?;
    check_keys(
        obj,
        &["body", "name", "param_count", "selector", "visibility"],
        &["body", "name", "param_count", "visibility"],
        ptr,
    )?;
    let name = as_str(&obj["name"], &format!("{ptr}/name"))?.to_string();
    if name.is_empty() {
        return Err(err(&format!("{ptr}/name"), "function name must be non-empty"));
    }
    let selector = match obj.get("selector") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            parse_fixed_hex::<4>(as_str(v, &format!("{ptr}/selector"))?)
                .map_err(|e| err(&format!("{ptr}/selector"), e))?,
        ),
    };
    let visibility = match as_str(&obj["visibility"], &format!("{ptr}/visibility"))? {
        "public" => Visibility::Public,
        "external" => Visibility::External,
        "internal" => Visibility::Internal,
        "private" => Visibility::Private,
        other => {
            return Err(err(&format!("{ptr}/visibility"), format!("unknown visibility '{other}'")))
        }
    };
    let param_count = as_u32(&obj["param_count"], &format!("{ptr}/param_count"))?;
    let body = decode_body(&obj["body"], &format!("{ptr}/body"))?;
    Ok(FunctionDef { name, selector, visibility, param_count, body })
}

fn decode_body(v: &Value, ptr: &str) -> Result<Vec<Statement>, ModelError> {
    let mut out = Vec::new();
    for (i, s) in as_array(v, ptr)?.iter().enumerate() {
        out.push(decode_statement(s, &format!("{ptr}/{i}"))?);
    }
    Ok(out)
}

fn decode_statement(v: &Value, ptr: &str) -> Result<Statement, ModelError> {
    let obj = as_object(v, ptr)?;
    let op = as_str(
        obj.get("op").ok_or_else(|| err(ptr, "missing required key 'op'"))?,
        &format!("{ptr}/op"),
    )?;
    match op {
        "read" => {
            check_keys(obj, &["op", "var"], &["op", "var"], ptr)?;
            Ok(Statement::Read(decode_var_ref(&obj["var"], &format!("{ptr}/var"))?))
        }
        "write" => {
            check_keys(obj, &["op", "value", "var"], &["op", "value", "var"], ptr)?;
            Ok(Statement::Write {
                var: decode_var_ref(&obj["var"], &format!("{ptr}/var"))?,
                value: decode_expr(&obj["value"], &format!("{ptr}/value"), 0)?,
            })
        }
        "assert" => {
            check_keys(obj, &["cond", "op"], &["cond", "op"], ptr)?;
            Ok(Statement::Assert { cond: decode_expr(&obj["cond"], &format!("{ptr}/cond"), 0)? })
        }
        "extcall" => {
            check_keys(
                obj,
                &["kind", "op", "result_used", "target"],
                &["kind", "op", "result_used", "target"],
                ptr,
            )?;
            let kind = match as_str(&obj["kind"], &format!("{ptr}/kind"))? {
                "call" => CallKind::Call,
                "callcode" => CallKind::CallCode,
                "staticcall" => CallKind::StaticCall,
                "delegatecall" => CallKind::DelegateCall,
                "transfer" => CallKind::Transfer,
                other => {
                    return Err(err(&format!("{ptr}/kind"), format!("unknown call kind '{other}'")))
                }
            };
            Ok(Statement::ExternalCall {
                kind,
                target: decode_expr(&obj["target"], &format!("{ptr}/target"), 0)?,
                result_used: as_bool(&obj["result_used"], &format!("{ptr}/result_used"))?,
            })
        }
        "icall" => {
            check_keys(obj, &["args", "callee", "op"], &["args", "callee", "op"], ptr)?;
            let callee = as_str(&obj["callee"], &format!("{ptr}/callee"))?.to_string();
            let mut args = Vec::new();
            for (i, a) in as_array(&obj["args"], &format!("{ptr}/args"))?.iter().enumerate() {
                args.push(decode_expr(a, &format!("{ptr}/args/{i}"), 0)?);
            }
            Ok(Statement::InternalCall { callee, args })
        }
        "loop" => {
            check_keys(obj, &["body", "bound", "op"], &["body", "op"], ptr)?;
            let bound = match obj.get("bound") {
                None | Some(Value::Null) => None,
                Some(b) => Some(decode_expr(b, &format!("{ptr}/bound"), 0)?),
            };
            Ok(Statement::Loop { body: decode_body(&obj["body"], &format!("{ptr}/body"))?, bound })
        }
        "return" => {
            check_keys(obj, &["op"], &["op"], ptr)?;
            Ok(Statement::Return)
        }
        other => Err(err(&format!("{ptr}/op"), format!("unknown statement op '{other}'"))),
    }
}

fn decode_expr(v: &Value, ptr: &str, depth: usize) -> Result<Expr, ModelError> {
    if depth >= MAX_EXPR_DEPTH {
        return Err(err(ptr, format!("expression nesting exceeds {MAX_EXPR_DEPTH}")));
    }
    let obj = as_object(v, ptr)?;
    if obj.len() != 1 {
        return Err(err(ptr, "an expression must have exactly one key"));
    }
    let (key, val) = obj.iter().next().expect("len checked");
    match key.as_str() {
        "const" => {
            let c = parse_canonical_u256(as_str(val, &format!("{ptr}/const"))?)
                .map_err(|e| err(&format!("{ptr}/const"), e))?;
            Ok(Expr::Const(c))
        }
        "var" => Ok(Expr::Var(decode_var_ref(val, &format!("{ptr}/var"))?)),
        "param" => Ok(Expr::Param(as_u32(val, &format!("{ptr}/param"))?)),
        "atom" => {
            let s = as_str(val, &format!("{ptr}/atom"))?;
            EnvAtom::parse(s)
                .map(Expr::Atom)
                .ok_or_else(|| err(&format!("{ptr}/atom"), format!("unknown env atom '{s}'")))
        }
        "call_result" => {
            if as_bool(val, &format!("{ptr}/call_result"))? {
                Ok(Expr::CallResult)
            } else {
                Err(err(&format!("{ptr}/call_result"), "must be true when present"))
            }
        }
        "cmp" => {
            let arr = as_array(val, &format!("{ptr}/cmp"))?;
            if arr.len() != 3 {
                return Err(err(
                    &format!("{ptr}/cmp"),
                    format!("comparison takes [op, lhs, rhs], got {} elements", arr.len()),
                ));
            }
            let op = match as_str(&arr[0], &format!("{ptr}/cmp/0"))? {
                "==" => CmpOp::Eq,
                "!=" => CmpOp::Ne,
                "<" => CmpOp::Lt,
                ">" => CmpOp::Gt,
                "<=" => CmpOp::Le,
                ">=" => CmpOp::Ge,
                other => {
                    return Err(err(
                        &format!("{ptr}/cmp/0"),
                        format!("unknown comparison operator '{other}'"),
                    ))
                }
            };
            Ok(Expr::Cmp(
                op,
                Box::new(decode_expr(&arr[1], &format!("{ptr}/cmp/1"), depth + 1)?),
                Box::new(decode_expr(&arr[2], &format!("{ptr}/cmp/2"), depth + 1)?),
            ))
        }
        "bool" => {
            let arr = as_array(val, &format!("{ptr}/bool"))?;
            if arr.is_empty() {
                return Err(err(&format!("{ptr}/bool"), "missing operator"));
            }
            let op = match as_str(&arr[0], &format!("{ptr}/bool/0"))? {
                "and" => BoolOp::And,
                "or" => BoolOp::Or,
                "not" => BoolOp::Not,
                other => {
                    return Err(err(
                        &format!("{ptr}/bool/0"),
                        format!("unknown boolean operator '{other}'"),
                    ))
                }
            };
            let operands = decode_operands(&arr[1..], &format!("{ptr}/bool"), depth)?;
            if op == BoolOp::Not && operands.len() != 1 {
                return Err(err(
                    &format!("{ptr}/bool"),
                    format!("'not' takes exactly one operand, got {}", operands.len()),
                ));
            }
            if operands.is_empty() {
                return Err(err(&format!("{ptr}/bool"), "boolean operator needs operands"));
            }
            Ok(Expr::Bool(op, operands))
        }
        "arith" => {
            let arr = as_array(val, &format!("{ptr}/arith"))?;
            if arr.is_empty() {
                return Err(err(&format!("{ptr}/arith"), "missing operator"));
            }
            let op = match as_str(&arr[0], &format!("{ptr}/arith/0"))? {
                "add" => ArithOp::Add,
                "sub" => ArithOp::Sub,
                "mul" => ArithOp::Mul,
                "div" => ArithOp::Div,
                "mod" => ArithOp::Mod,
                "shl" => ArithOp::Shl,
                "shr" => ArithOp::Shr,
                "and-bits" => ArithOp::BitAnd,
                "xor" => ArithOp::Xor,
                other => {
                    return Err(err(
                        &format!("{ptr}/arith/0"),
                        format!("unknown arithmetic operator '{other}'"),
                    ))
                }
            };
            let operands = decode_operands(&arr[1..], &format!("{ptr}/arith"), depth)?;
            if operands.is_empty() {
                return Err(err(&format!("{ptr}/arith"), "arithmetic operator needs operands"));
            }
            Ok(Expr::Arith(op, operands))
        }
        other => Err(err(ptr, format!("unknown expression key '{other}'"))),
    }
}

fn decode_operands(vals: &[Value], ptr: &str, depth: usize) -> Result<Vec<Expr>, ModelError> {
    let mut out = Vec::new();
    for (i, v) in vals.iter().enumerate() {
        out.push(decode_expr(v, &format!("{ptr}/{}", i + 1), depth + 1)?);
    }
    Ok(out)
}

fn encode_model(m: &ContractModel) -> Value {
    let mut obj = Map::new();
    if let Some(addr) = &m.address {
        obj.insert("address".into(), Value::String(format!("0x{}", hex::encode(addr))));
    }
    obj.insert("functions".into(), Value::Array(m.functions.iter().map(encode_function).collect()));
    if m.provenance != Provenance::default() {
        obj.insert("provenance".into(), Value::String(m.provenance.as_str().into()));
    }
    obj.insert(
        "state_vars".into(),
        Value::Array(m.state_vars.iter().map(encode_state_var).collect()),
    );
    Value::Object(obj)
}

fn encode_state_var(d: &StateVarDecl) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(d.kind.as_str().into()));
    if let Some(name) = &d.name {
        obj.insert("name".into(), Value::String(name.clone()));
    }
    obj.insert("slot".into(), Value::String(format_canonical_u256(d.slot)));
    Value::Object(obj)
}

fn encode_var_ref(v: &VarRef) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(v.kind.as_str().into()));
    obj.insert("slot".into(), Value::String(format_canonical_u256(v.slot)));
    Value::Object(obj)
}

fn encode_function(f: &FunctionDef) -> Value {
    let mut obj = Map::new();
    obj.insert("body".into(), Value::Array(f.body.iter().map(encode_statement).collect()));
    obj.insert("name".into(), Value::String(f.name.clone()));
    obj.insert("param_count".into(), Value::Number(f.param_count.into()));
    if let Some(sel) = &f.selector {
        obj.insert("selector".into(), Value::String(format!("0x{}", hex::encode(sel))));
    }
    obj.insert("visibility".into(), Value::String(f.visibility.as_str().into()));
    Value::Object(obj)
}

fn encode_statement(s: &Statement) -> Value {
    let mut obj = Map::new();
    match s {
        Statement::Read(var) => {
            obj.insert("op".into(), Value::String("read".into()));
            obj.insert("var".into(), encode_var_ref(var));
        }
        Statement::Write { var, value } => {
            obj.insert("op".into(), Value::String("write".into()));
            obj.insert("value".into(), encode_expr(value));
            obj.insert("var".into(), encode_var_ref(var));
        }
        Statement::Assert { cond } => {
            obj.insert("cond".into(), encode_expr(cond));
            obj.insert("op".into(), Value::String("assert".into()));
        }
        Statement::ExternalCall { kind, target, result_used } => {
            obj.insert("kind".into(), Value::String(kind.as_str().into()));
            obj.insert("op".into(), Value::String("extcall".into()));
            obj.insert("result_used".into(), Value::Bool(*result_used));
            obj.insert("target".into(), encode_expr(target));
        }
        Statement::InternalCall { callee, args } => {
            obj.insert("args".into(), Value::Array(args.iter().map(encode_expr).collect()));
            obj.insert("callee".into(), Value::String(callee.clone()));
            obj.insert("op".into(), Value::String("icall".into()));
        }
        Statement::Loop { body, bound } => {
            obj.insert("body".into(), Value::Array(body.iter().map(encode_statement).collect()));
            if let Some(b) = bound {
                obj.insert("bound".into(), encode_expr(b));
            }
            obj.insert("op".into(), Value::String("loop".into()));
        }
        Statement::Return => {
            obj.insert("op".into(), Value::String("return".into()));
        }
    }
    Value::Object(obj)
}

fn encode_expr(e: &Expr) -> Value {
    let mut obj = Map::new();
    match e {
        Expr::Const(c) => {
            obj.insert("const".into(), Value::String(format_canonical_u256(*c)));
        }
        Expr::Var(v) => {
            obj.insert("var".into(), encode_var_ref(v));
        }
        Expr::Param(p) => {
            obj.insert("param".into(), Value::Number((*p).into()));
        }
        Expr::Atom(a) => {
            obj.insert("atom".into(), Value::String(a.as_str().into()));
        }
        Expr::CallResult => {
            obj.insert("call_result".into(), Value::Bool(true));
        }
        Expr::Cmp(op, a, b) => {
            obj.insert(
                "cmp".into(),
                Value::Array(vec![
                    Value::String(op.as_str().into()),
                    encode_expr(a),
                    encode_expr(b),
                ]),
            );
        }
        Expr::Bool(op, ops) => {
            let mut arr = vec![Value::String(op.as_str().into())];
            arr.extend(ops.iter().map(encode_expr));
            obj.insert("bool".into(), Value::Array(arr));
        }
        Expr::Arith(op, ops) => {
            let mut arr = vec![Value::String(op.as_str().into())];
            arr.extend(ops.iter().map(encode_expr));
            obj.insert("arith".into(), Value::Array(arr));
        }
    }
    Value::Object(obj)
}
