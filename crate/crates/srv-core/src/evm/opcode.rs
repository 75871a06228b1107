//! EVM opcode table: mnemonics, immediate widths, stack arities.

pub const STOP: u8 = 0x00;
pub const ADD: u8 = 0x01;
pub const MUL: u8 = 0x02;
pub const SUB: u8 = 0x03;
pub const DIV: u8 = 0x04;
pub const MOD: u8 = 0x06;
pub const EXP: u8 = 0x0a;
pub const LT: u8 = 0x10;
pub const GT: u8 = 0x11;
pub const SLT: u8 = 0x12;
pub const SGT: u8 = 0x13;
pub const EQ: u8 = 0x14;
pub const ISZERO: u8 = 0x15;
pub const AND: u8 = 0x16;
pub const OR: u8 = 0x17;
pub const XOR: u8 = 0x18;
pub const NOT: u8 = 0x19;
pub const SHL: u8 = 0x1b;
pub const SHR: u8 = 0x1c;
pub const SHA3: u8 = 0x20;
pub const ADDRESS: u8 = 0x30;
pub const BALANCE: u8 = 0x31;
pub const ORIGIN: u8 = 0x32;
pub const CALLER: u8 = 0x33;
pub const CALLVALUE: u8 = 0x34;
pub const CALLDATALOAD: u8 = 0x35;
pub const CALLDATASIZE: u8 = 0x36;
pub const CALLDATACOPY: u8 = 0x37;
pub const CODECOPY: u8 = 0x39;
pub const BLOCKHASH: u8 = 0x40;
pub const COINBASE: u8 = 0x41;
pub const TIMESTAMP: u8 = 0x42;
pub const NUMBER: u8 = 0x43;
pub const PREVRANDAO: u8 = 0x44;
pub const GASLIMIT: u8 = 0x45;
pub const SELFBALANCE: u8 = 0x47;
pub const POP: u8 = 0x50;
pub const MLOAD: u8 = 0x51;
pub const MSTORE: u8 = 0x52;
pub const MSTORE8: u8 = 0x53;
pub const SLOAD: u8 = 0x54;
pub const SSTORE: u8 = 0x55;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const JUMPDEST: u8 = 0x5b;
pub const PUSH0: u8 = 0x5f;
pub const PUSH1: u8 = 0x60;
pub const PUSH4: u8 = 0x63;
pub const PUSH32: u8 = 0x7f;
pub const DUP1: u8 = 0x80;
pub const SWAP1: u8 = 0x90;
pub const CREATE: u8 = 0xf0;
pub const CALL: u8 = 0xf1;
pub const CALLCODE: u8 = 0xf2;
pub const RETURN: u8 = 0xf3;
pub const DELEGATECALL: u8 = 0xf4;
pub const STATICCALL: u8 = 0xfa;
pub const REVERT: u8 = 0xfd;
pub const INVALID: u8 = 0xfe;
pub const SELFDESTRUCT: u8 = 0xff;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpSpec {
    pub mnemonic: &'static str,
    /// Immediate bytes following the opcode (PUSH1..PUSH32 only).
    pub imm: usize,
    pub pops: usize,
    pub pushes: usize,
}

const fn op(mnemonic: &'static str, imm: usize, pops: usize, pushes: usize) -> OpSpec {
    OpSpec { mnemonic, imm, pops, pushes }
}

/// Known-opcode table; `None` for unassigned bytes (they disassemble as
/// `UNKNOWN_xx` terminators, and analysis continues past them).
pub fn spec(opcode: u8) -> Option<OpSpec> {
    Some(match opcode {
        0x00 => op("STOP", 0, 0, 0),
        0x01 => op("ADD", 0, 2, 1),
        0x02 => op("MUL", 0, 2, 1),
        0x03 => op("SUB", 0, 2, 1),
        0x04 => op("DIV", 0, 2, 1),
        0x05 => op("SDIV", 0, 2, 1),
        0x06 => op("MOD", 0, 2, 1),
        0x07 => op("SMOD", 0, 2, 1),
        0x08 => op("ADDMOD", 0, 3, 1),
        0x09 => op("MULMOD", 0, 3, 1),
        0x0a => op("EXP", 0, 2, 1),
        0x0b => op("SIGNEXTEND", 0, 2, 1),
        0x10 => op("LT", 0, 2, 1),
        0x11 => op("GT", 0, 2, 1),
        0x12 => op("SLT", 0, 2, 1),
        0x13 => op("SGT", 0, 2, 1),
        0x14 => op("EQ", 0, 2, 1),
        0x15 => op("ISZERO", 0, 1, 1),
        0x16 => op("AND", 0, 2, 1),
        0x17 => op("OR", 0, 2, 1),
        0x18 => op("XOR", 0, 2, 1),
        0x19 => op("NOT", 0, 1, 1),
        0x1a => op("BYTE", 0, 2, 1),
        0x1b => op("SHL", 0, 2, 1),
        0x1c => op("SHR", 0, 2, 1),
        0x1d => op("SAR", 0, 2, 1),
        0x20 => op("SHA3", 0, 2, 1),
        0x30 => op("ADDRESS", 0, 0, 1),
        0x31 => op("BALANCE", 0, 1, 1),
        0x32 => op("ORIGIN", 0, 0, 1),
        0x33 => op("CALLER", 0, 0, 1),
        0x34 => op("CALLVALUE", 0, 0, 1),
        0x35 => op("CALLDATALOAD", 0, 1, 1),
        0x36 => op("CALLDATASIZE", 0, 0, 1),
        0x37 => op("CALLDATACOPY", 0, 3, 0),
        0x38 => op("CODESIZE", 0, 0, 1),
        0x39 => op("CODECOPY", 0, 3, 0),
        0x3a => op("GASPRICE", 0, 0, 1),
        0x3b => op("EXTCODESIZE", 0, 1, 1),
        0x3c => op("EXTCODECOPY", 0, 4, 0),
        0x3d => op("RETURNDATASIZE", 0, 0, 1),
        0x3e => op("RETURNDATACOPY", 0, 3, 0),
        0x3f => op("EXTCODEHASH", 0, 1, 1),
        0x40 => op("BLOCKHASH", 0, 1, 1),
        0x41 => op("COINBASE", 0, 0, 1),
        0x42 => op("TIMESTAMP", 0, 0, 1),
        0x43 => op("NUMBER", 0, 0, 1),
        0x44 => op("PREVRANDAO", 0, 0, 1),
        0x45 => op("GASLIMIT", 0, 0, 1),
        0x46 => op("CHAINID", 0, 0, 1),
        0x47 => op("SELFBALANCE", 0, 0, 1),
        0x48 => op("BASEFEE", 0, 0, 1),
        0x49 => op("BLOBHASH", 0, 1, 1),
        0x4a => op("BLOBBASEFEE", 0, 0, 1),
        0x50 => op("POP", 0, 1, 0),
        0x51 => op("MLOAD", 0, 1, 1),
        0x52 => op("MSTORE", 0, 2, 0),
        0x53 => op("MSTORE8", 0, 2, 0),
        0x54 => op("SLOAD", 0, 1, 1),
        0x55 => op("SSTORE", 0, 2, 0),
        0x56 => op("JUMP", 0, 1, 0),
        0x57 => op("JUMPI", 0, 2, 0),
        0x58 => op("PC", 0, 0, 1),
        0x59 => op("MSIZE", 0, 0, 1),
        0x5a => op("GAS", 0, 0, 1),
        0x5b => op("JUMPDEST", 0, 0, 0),
        0x5c => op("TLOAD", 0, 1, 1),
        0x5d => op("TSTORE", 0, 2, 0),
        0x5e => op("MCOPY", 0, 3, 0),
        0x5f => op("PUSH0", 0, 0, 1),
        0x60..=0x7f => {
            const PUSH_NAMES: [&str; 32] = [
                "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9",
                "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17",
                "PUSH18", "PUSH19", "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24", "PUSH25",
                "PUSH26", "PUSH27", "PUSH28", "PUSH29", "PUSH30", "PUSH31", "PUSH32",
            ];
            let n = (opcode - 0x5f) as usize;
            op(PUSH_NAMES[n - 1], n, 0, 1)
        }
        0x80..=0x8f => {
            const DUP_NAMES: [&str; 16] = [
                "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10",
                "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
            ];
            let n = (opcode - 0x7f) as usize;
            op(DUP_NAMES[n - 1], 0, n, n + 1)
        }
        0x90..=0x9f => {
            const SWAP_NAMES: [&str; 16] = [
                "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9",
                "SWAP10", "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
            ];
            let n = (opcode - 0x8f) as usize;
            op(SWAP_NAMES[n - 1], 0, n + 1, n + 1)
        }
        0xa0 => op("LOG0", 0, 2, 0),
        0xa1 => op("LOG1", 0, 3, 0),
        0xa2 => op("LOG2", 0, 4, 0),
        0xa3 => op("LOG3", 0, 5, 0),
        0xa4 => op("LOG4", 0, 6, 0),
        0xf0 => op("CREATE", 0, 3, 1),
        0xf1 => op("CALL", 0, 7, 1),
        0xf2 => op("CALLCODE", 0, 7, 1),
        0xf3 => op("RETURN", 0, 2, 0),
        0xf4 => op("DELEGATECALL", 0, 6, 1),
        0xf5 => op("CREATE2", 0, 4, 1),
        0xfa => op("STATICCALL", 0, 6, 1),
        0xfd => op("REVERT", 0, 2, 0),
        0xfe => op("INVALID", 0, 0, 0),
        0xff => op("SELFDESTRUCT", 0, 1, 0),
        _ => return None,
    })
}

/// Number of immediate bytes after the opcode.
pub fn immediate_len(opcode: u8) -> usize {
    match opcode {
        0x60..=0x7f => (opcode - 0x5f) as usize,
        _ => 0,
    }
}

/// Does this opcode end a basic block?
pub fn is_terminator(opcode: u8) -> bool {
    matches!(opcode, STOP | JUMP | JUMPI | RETURN | REVERT | INVALID | SELFDESTRUCT)
        || spec(opcode).is_none()
}
