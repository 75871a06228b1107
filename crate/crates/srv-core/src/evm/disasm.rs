//! Linear-sweep disassembler with metadata-trailer stripping and
//! creation-code detection.

use super::opcode;
use primitive_types::U256;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DisasmError {
    #[error("PUSH immediate at offset {offset} runs past end of code ({missing} bytes missing)")]
    TruncatedPush { offset: usize, missing: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: u8,
    pub imm: Vec<u8>,
}

impl Instruction {
    pub fn mnemonic(&self) -> String {
        match opcode::spec(self.opcode) {
            Some(s) => s.mnemonic.to_string(),
            None => format!("UNKNOWN_{:02x}", self.opcode),
        }
    }

    /// Encoded length: opcode byte plus immediate.
    pub fn len(&self) -> usize {
        1 + self.imm.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_push(&self) -> bool {
        (0x5f..=0x7f).contains(&self.opcode)
    }

    /// PUSH immediate as a 256-bit value (PUSH0 pushes zero).
    pub fn push_value(&self) -> Option<U256> {
        if !self.is_push() {
            return None;
        }
        if self.imm.is_empty() {
            return Some(U256::zero());
        }
        Some(U256::from_big_endian(&self.imm))
    }

    /// Offset of the next instruction.
    pub fn next_offset(&self) -> usize {
        self.offset + self.len()
    }
}

/// Disassembly of one code blob: instruction list plus the stripped
/// metadata trailer (CBOR blob and its 2-byte length suffix), if present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disassembly {
    pub instructions: Vec<Instruction>,
    pub metadata: Option<Vec<u8>>,
}

impl Disassembly {
    /// Exact byte round-trip: instructions re-encoded, trailer re-appended.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = reserialize(&self.instructions);
        if let Some(meta) = &self.metadata {
            out.extend_from_slice(meta);
        }
        out
    }

    /// Text listing: `0x<offset>: MNEMONIC [0x<imm>]` per line.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for ins in &self.instructions {
            out.push_str(&format!("0x{:04x}: {}", ins.offset, ins.mnemonic()));
            if !ins.imm.is_empty() {
                out.push_str(&format!(" 0x{}", hex::encode(&ins.imm)));
            }
            out.push('\n');
        }
        if let Some(meta) = &self.metadata {
            out.push_str(&format!("; metadata trailer: {} bytes\n", meta.len()));
        }
        out
    }
}

/// Disassembles runtime bytecode. The solc metadata trailer (a CBOR map
/// whose length lives in the last two bytes) is recognized and set aside so
/// its bytes are not misread as instructions.
pub fn disassemble(code: &[u8]) -> Result<Disassembly, DisasmError> {
    let (body, metadata) = strip_metadata(code);
    let mut instructions = Vec::new();
    let mut offset = 0usize;
    while offset < body.len() {
        let op = body[offset];
        let imm_len = opcode::immediate_len(op);
        let imm_end = offset + 1 + imm_len;
        if imm_end > body.len() {
            return Err(DisasmError::TruncatedPush { offset, missing: imm_end - body.len() });
        }
        instructions.push(Instruction {
            offset,
            opcode: op,
            imm: body[offset + 1..imm_end].to_vec(),
        });
        offset = imm_end;
    }
    Ok(Disassembly { instructions, metadata: metadata.map(<[u8]>::to_vec) })
}

/// Re-encodes instructions to bytes.
pub fn reserialize(instructions: &[Instruction]) -> Vec<u8> {
    let mut out = Vec::new();
    for ins in instructions {
        out.push(ins.opcode);
        out.extend_from_slice(&ins.imm);
    }
    out
}

const METADATA_MARKERS: [&[u8]; 5] = [b"bzzr0", b"bzzr1", b"ipfs", b"solc", b"experimental"];

/// Splits off the solc metadata trailer when the tail looks like one:
/// a big-endian 2-byte length `L` in the final two bytes, with the `L`
/// preceding bytes forming a small CBOR map containing a known key.
pub fn strip_metadata(code: &[u8]) -> (&[u8], Option<&[u8]>) {
    if code.len() < 4 {
        return (code, None);
    }
    let len = code.len();
    let meta_len = ((code[len - 2] as usize) << 8) | code[len - 1] as usize;
    if meta_len == 0 || meta_len + 2 > len {
        return (code, None);
    }
    let start = len - 2 - meta_len;
    let candidate = &code[start..len - 2];
    let looks_cbor_map = matches!(candidate.first(), Some(0xa1..=0xa3));
    let has_marker = METADATA_MARKERS.iter().any(|m| candidate.windows(m.len()).any(|w| w == *m));
    if looks_cbor_map && has_marker {
        (&code[..start], Some(&code[start..]))
    } else {
        (code, None)
    }
}

/// Detects creation code: a constant-arguments `CODECOPY` whose copied
/// slice is then `RETURN`ed. Returns the runtime code range within `code`.
///
/// The scan executes the instruction stream linearly with a consts-only
/// stack; that is exact enough for compiler-emitted constructor preludes,
/// where the copy length/offset are pushed immediately before use.
pub fn detect_creation(code: &[u8]) -> Option<std::ops::Range<usize>> {
    let disasm = disassemble(code).ok()?;
    let mut stack: Vec<Option<U256>> = Vec::new();
    let mut codecopy_args: Option<(U256, U256, U256)> = None; // dest, src, len

    for ins in &disasm.instructions {
        match ins.opcode {
            _ if ins.is_push() => stack.push(ins.push_value()),
            op if (0x80..=0x8f).contains(&op) => {
                let n = (op - 0x7f) as usize;
                let v = if stack.len() >= n { stack[stack.len() - n] } else { None };
                stack.push(v);
            }
            op if (0x90..=0x9f).contains(&op) => {
                let n = (op - 0x8f) as usize;
                let top = stack.len();
                if top > n {
                    stack.swap(top - 1, top - 1 - n);
                } else {
                    stack.clear();
                }
            }
            opcode::CODECOPY => {
                let dest = pop(&mut stack);
                let src = pop(&mut stack);
                let len = pop(&mut stack);
                if let (Some(d), Some(s), Some(l)) = (dest, src, len) {
                    codecopy_args = Some((d, s, l));
                }
            }
            opcode::RETURN => {
                let off = pop(&mut stack);
                let len = pop(&mut stack);
                if let (Some((d, s, l)), Some(o), Some(n)) = (codecopy_args, off, len) {
                    if d == o && l == n && l > U256::zero() {
                        let start = to_usize(s)?;
                        let count = to_usize(l)?;
                        let end = start.checked_add(count)?;
                        if end <= code.len() && start > 0 {
                            return Some(start..end);
                        }
                    }
                }
            }
            op => {
                if let Some(spec) = opcode::spec(op) {
                    for _ in 0..spec.pops {
                        pop(&mut stack);
                    }
                    for _ in 0..spec.pushes {
                        stack.push(None);
                    }
                }
            }
        }
    }
    None
}

fn pop(stack: &mut Vec<Option<U256>>) -> Option<U256> {
    stack.pop().flatten()
}

fn to_usize(v: U256) -> Option<usize> {
    if v > U256::from(u64::MAX) {
        return None;
    }
    usize::try_from(v.low_u64()).ok()
}
