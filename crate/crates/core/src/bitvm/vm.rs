//! Step-budgeted interpreter with reflective evaluation and oracle slots.

use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::isa::{oracle_index, Cond, EvalMode, Instr, Reg, Source, ToyProgram, ORACLE_SLOTS};
use crate::bits::{tuple_encode, BitString};

/// Oracle calls nested deeper than this diverge. This is part of the
/// machine definition, so it does not depend on the budget.
pub const MAX_ORACLE_DEPTH: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepBudget(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Halted { output: BitString, steps: u64 },
    BudgetExceeded,
}

impl Outcome {
    pub fn output(&self) -> Option<&BitString> {
        match self {
            Outcome::Halted { output, .. } => Some(output),
            Outcome::BudgetExceeded => None,
        }
    }

    pub fn steps(&self) -> Option<u64> {
        match self {
            Outcome::Halted { steps, .. } => Some(*steps),
            Outcome::BudgetExceeded => None,
        }
    }

    pub fn halted(&self) -> bool {
        matches!(self, Outcome::Halted { .. })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Halted { output, steps } => {
                write!(f, "halted {} in {} steps", output.token(), steps)
            }
            Outcome::BudgetExceeded => f.write_str("budget exceeded"),
        }
    }
}

/// The computation ran out of steps (or provably never halts).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exhausted;

pub type Metered<T> = Result<T, Exhausted>;

/// Shared step counter threaded through nested evaluation.
#[derive(Debug)]
pub struct Meter {
    used: u64,
    limit: u64,
    depth: u32,
}

impl Meter {
    pub fn new(limit: u64) -> Self {
        Meter {
            used: 0,
            limit,
            depth: 0,
        }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    fn remaining(&self) -> u64 {
        self.limit - self.used
    }

    pub fn charge(&mut self, n: u64) -> Metered<()> {
        if n > self.remaining() {
            self.used = self.limit;
            return Err(Exhausted);
        }
        self.used += n;
        Ok(())
    }

    /// Runs `f` against a sub-meter capped at `limit` steps. If `f` does not
    /// finish within `limit`, `limit` steps are charged and `Ok(None)` is
    /// returned; if the outer meter runs dry first the whole call is
    /// exhausted.
    pub fn bounded<T>(
        &mut self,
        limit: u64,
        f: impl FnOnce(&mut Meter) -> Metered<T>,
    ) -> Metered<Option<T>> {
        let mut sub = Meter {
            used: 0,
            limit: limit.min(self.remaining()),
            depth: self.depth,
        };
        match f(&mut sub) {
            Ok(v) => {
                self.used += sub.used;
                Ok(Some(v))
            }
            Err(Exhausted) if limit <= self.remaining() => {
                self.used += limit;
                Ok(None)
            }
            Err(Exhausted) => {
                self.used = self.limit;
                Err(Exhausted)
            }
        }
    }
}

/// Behaviour behind an oracle slot. It receives the unread input and may
/// charge further steps (including nested runs) to the meter.
pub type OracleFn = dyn Fn(&Machine, &mut Meter, &BitString) -> Metered<BitString> + Send + Sync;

#[derive(Clone)]
pub struct Oracle {
    pub label: String,
    /// Steps charged on every call, before `call` runs.
    pub cost: u64,
    pub call: Arc<OracleFn>,
}

impl Oracle {
    pub fn new(
        label: impl Into<String>,
        cost: u64,
        call: impl Fn(&Machine, &mut Meter, &BitString) -> Metered<BitString> + Send + Sync + 'static,
    ) -> Self {
        Oracle {
            label: label.into(),
            cost,
            call: Arc::new(call),
        }
    }
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oracle({}, cost {})", self.label, self.cost)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlotError {
    #[error("all {ORACLE_SLOTS} oracle slots are in use")]
    Exhausted,
    #[error("oracle slot {0} is not allocated")]
    NotAllocated(u8),
    #[error("oracle slot {0} already has a behaviour installed")]
    AlreadyInstalled(u8),
}

#[derive(Clone, Debug)]
enum Slot {
    Free,
    Allocated,
    Installed(Oracle),
}

/// The base interpreter plus its oracle registry.
#[derive(Debug)]
pub struct Machine {
    slots: RwLock<Vec<Slot>>,
}

impl Default for Machine {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flag {
    Zero,
    One,
    Eof,
}

struct Frame {
    prog: ToyProgram,
    input: BitString,
    cursor: usize,
    pc: usize,
    flag: Flag,
    work: BitString,
    work_head: usize,
    out: BitString,
    idle: usize,
    halt_after_child: bool,
}

impl Frame {
    fn new(prog: ToyProgram, input: BitString) -> Self {
        Frame {
            prog,
            input,
            cursor: 0,
            pc: 0,
            flag: Flag::Eof,
            work: BitString::new(),
            work_head: 0,
            out: BitString::new(),
            idle: 0,
            halt_after_child: false,
        }
    }

    fn live_work(&self) -> BitString {
        self.work.suffix(self.work_head)
    }

    fn take_input(&mut self) -> BitString {
        let rest = self.input.suffix(self.cursor);
        self.cursor = self.input.len();
        rest
    }

    fn idle_limit(&self) -> usize {
        3 * (self.prog.len() + 1)
    }
}

enum Step {
    Continue,
    Progress,
    Halt,
    Push(Frame),
}

impl Machine {
    pub fn new() -> Self {
        Machine {
            slots: RwLock::new(vec![Slot::Free; ORACLE_SLOTS as usize]),
        }
    }

    /// Reserves a slot whose behaviour is installed later; the returned
    /// index may be baked into that behaviour.
    pub fn allocate(&self) -> Result<(u8, BitString), SlotError> {
        let mut slots = self.slots.write().expect("slot lock");
        let slot = slots
            .iter()
            .position(|s| matches!(s, Slot::Free))
            .ok_or(SlotError::Exhausted)?;
        slots[slot] = Slot::Allocated;
        Ok((slot as u8, oracle_index(slot as u8)))
    }

    pub fn install(&self, slot: u8, oracle: Oracle) -> Result<(), SlotError> {
        let mut slots = self.slots.write().expect("slot lock");
        match slots.get(slot as usize) {
            Some(Slot::Allocated) => {
                slots[slot as usize] = Slot::Installed(oracle);
                Ok(())
            }
            Some(Slot::Installed(_)) => Err(SlotError::AlreadyInstalled(slot)),
            _ => Err(SlotError::NotAllocated(slot)),
        }
    }

    pub fn register(&self, oracle: Oracle) -> Result<BitString, SlotError> {
        let (slot, index) = self.allocate()?;
        self.install(slot, oracle)?;
        Ok(index)
    }

    fn oracle(&self, slot: u8) -> Option<Oracle> {
        match self.slots.read().expect("slot lock").get(slot as usize) {
            Some(Slot::Installed(o)) => Some(o.clone()),
            _ => None,
        }
    }

    /// Runs `prog` on the tuple encoding of `args`.
    pub fn run(&self, prog: &ToyProgram, args: &[BitString], budget: StepBudget) -> Outcome {
        let input = tuple_encode(args);
        let mut meter = Meter::new(budget.0);
        match self.exec(&mut meter, prog, &input) {
            Ok(output) => Outcome::Halted {
                output,
                steps: meter.used(),
            },
            Err(Exhausted) => Outcome::BudgetExceeded,
        }
    }

    pub fn run_bits(&self, index: &BitString, input: &BitString, budget: StepBudget) -> Outcome {
        self.run(
            &ToyProgram::decode(index),
            std::slice::from_ref(input),
            budget,
        )
    }

    pub fn exec_bits(
        &self,
        meter: &mut Meter,
        index: &BitString,
        input: &BitString,
    ) -> Metered<BitString> {
        self.exec(meter, &ToyProgram::decode(index), input)
    }

    /// Executes `prog` on `input`, charging every executed instruction
    /// (including the implicit halt at the end) to `meter`.
    pub fn exec(
        &self,
        meter: &mut Meter,
        prog: &ToyProgram,
        input: &BitString,
    ) -> Metered<BitString> {
        let mut stack = vec![Frame::new(prog.clone(), input.clone())];
        loop {
            meter.charge(1)?;
            let frame = stack.last_mut().expect("non-empty frame stack");
            let step = self.step(meter, frame)?;
            match step {
                Step::Continue => {
                    frame.idle += 1;
                    if frame.idle > frame.idle_limit() {
                        // control state repeated with unchanged registers
                        return Err(Exhausted);
                    }
                }
                Step::Progress => frame.idle = 0,
                Step::Push(child) => {
                    frame.idle = 0;
                    stack.push(child);
                }
                Step::Halt => {
                    let mut out = stack.pop().expect("frame").out;
                    loop {
                        let Some(parent) = stack.last_mut() else {
                            return Ok(out);
                        };
                        parent.out.extend_from(&out);
                        if parent.halt_after_child {
                            out = stack.pop().expect("frame").out;
                            continue;
                        }
                        parent.pc += 1;
                        break;
                    }
                }
            }
        }
    }

    fn step(&self, meter: &mut Meter, f: &mut Frame) -> Metered<Step> {
        let Some(ins) = f.prog.instrs().get(f.pc).cloned() else {
            return Ok(Step::Halt);
        };
        let step = match &ins {
            Instr::Halt => return Ok(Step::Halt),
            Instr::Out(b) => {
                f.out.push(*b);
                Step::Continue
            }
            Instr::Mov(target) => {
                let rest = f.take_input();
                let moved = !rest.is_empty();
                match target {
                    Reg::Out => f.out.extend_from(&rest),
                    Reg::Work => f.work.extend_from(&rest),
                }
                if moved {
                    Step::Progress
                } else {
                    Step::Continue
                }
            }
            Instr::Lit { target, hat, bits } => {
                let lit = if *hat { bits.hat() } else { bits.clone() };
                match target {
                    Reg::Out => {
                        f.out.extend_from(&lit);
                        Step::Continue
                    }
                    Reg::Work if lit.is_empty() => Step::Continue,
                    Reg::Work => {
                        f.work.extend_from(&lit);
                        Step::Progress
                    }
                }
            }
            Instr::Read(src) => {
                let next = match src {
                    Source::Input => {
                        let b = f.input.get(f.cursor);
                        f.cursor += b.is_some() as usize;
                        b
                    }
                    Source::Work => {
                        let b = f.work.get(f.work_head);
                        f.work_head += b.is_some() as usize;
                        b
                    }
                };
                match next {
                    Some(b) => {
                        f.flag = if b { Flag::One } else { Flag::Zero };
                        Step::Progress
                    }
                    None => {
                        f.flag = Flag::Eof;
                        Step::Continue
                    }
                }
            }
            Instr::Jmp { cond, offset } => {
                let taken = match cond {
                    Cond::Always => true,
                    Cond::Zero => f.flag == Flag::Zero,
                    Cond::One => f.flag == Flag::One,
                    Cond::Eof => f.flag == Flag::Eof,
                };
                if taken {
                    let target = f.pc as i64 + offset;
                    if target < 0 || target > f.prog.len() as i64 {
                        // jump fault: halt with current output
                        return Ok(Step::Halt);
                    }
                    f.pc = target as usize;
                    return Ok(Step::Continue);
                }
                Step::Continue
            }
            Instr::Eval(EvalMode::Pair) => {
                let (p, y) = f.live_work().split_hat().map_err(|_| Exhausted)?;
                f.work.clear();
                f.work_head = 0;
                return Ok(Step::Push(Frame::new(ToyProgram::decode(&p), y)));
            }
            Instr::Eval(EvalMode::Tail) => {
                let tail = f.prog.tail_after(f.pc);
                let input = f.live_work();
                f.halt_after_child = true;
                return Ok(Step::Push(Frame::new(ToyProgram::decode(&tail), input)));
            }
            Instr::Oracle(slot) => {
                let oracle = self.oracle(*slot).ok_or(Exhausted)?;
                if meter.depth >= MAX_ORACLE_DEPTH {
                    return Err(Exhausted);
                }
                let input = f.take_input();
                meter.charge(oracle.cost)?;
                meter.depth += 1;
                let result = (oracle.call)(self, meter, &input);
                meter.depth -= 1;
                f.out.extend_from(&result?);
                if input.is_empty() {
                    Step::Continue
                } else {
                    Step::Progress
                }
            }
        };
        f.pc += 1;
        Ok(step)
    }
}
