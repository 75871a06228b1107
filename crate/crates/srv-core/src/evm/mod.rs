//! EVM bytecode frontend: disassembly, CFG recovery with a constant-stack
//! abstract interpreter, selector-dispatcher and loop recovery, storage
//! access classification, and lifting into the contract model.

pub mod absint;
pub mod accesses;
pub mod cfg;
pub mod disasm;
pub mod functions;
pub mod lift;
pub mod loops;
pub mod opcode;
