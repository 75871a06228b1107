//! Core library for detecting state-reverting vulnerabilities (SRVs) in
//! smart contracts.
//!
//! The analysis pipeline:
//!
//! 1. [`model`] — a canonical contract IR (state variables, functions,
//!    statements, expressions) with a deterministic JSON serialization.
//! 2. [`evm`] — a bytecode frontend that disassembles EVM code, rebuilds a
//!    CFG with a constant-stack abstract interpreter, recovers the selector
//!    dispatcher and natural loops, classifies storage accesses, and lifts
//!    everything into the IR.
//! 3. [`deps`] — read/write (RW) and assertion-based state dependency (ASD)
//!    extraction from the IR.
//! 4. [`fsm`] — transaction-trace ingestion and FSM mining for
//!    transaction-sequence dependencies (TSD).
//! 5. [`sdg`] — the labeled state-dependency graph combining control, RW,
//!    ASD and TSD edges over state-variable and code-block nodes.
//! 6. [`detector`] — vulnerability-indicator search (profit-gain R1,
//!    denial-of-service R2), access-control suppression, entry-trace
//!    construction and SDG taint propagation.
//! 7. [`report`] / [`pipeline`] — deterministic report rendering and
//!    end-to-end orchestration.

pub mod deps;
pub mod detector;
pub mod evm;
pub mod fsm;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod sdg;
