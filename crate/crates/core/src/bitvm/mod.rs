//! The toy register machine: instruction set, assembler and interpreter.

mod asm;
mod isa;
mod vm;

pub use asm::{assemble, assemble_bits, disassemble, AsmError};
pub use isa::{oracle_index, Cond, EvalMode, Instr, Reg, Source, ToyProgram, ORACLE_SLOTS};
pub use vm::{
    Exhausted, Machine, Meter, Metered, Oracle, OracleFn, Outcome, SlotError, StepBudget,
    MAX_ORACLE_DEPTH,
};
