//! Instruction set and the total bit-level decoder.
//!
//! Opcodes form a prefix code so that the shortest programs already do
//! something observable:
//!
//! | code                      | instruction                                   |
//! |---------------------------|-----------------------------------------------|
//! | `1`                       | `out 1`                                       |
//! | `01`                      | `out 0`                                       |
//! | `001 t`                   | `mov out` (t=0) / `mov work` (t=1)            |
//! | `0001 ssss`               | `oracle s` (slot 0..15)                       |
//! | `00001 t h γ(n+1) b1..bn` | `lit` n raw bits to out/work, hat-coded if h=1 |
//! | `000001 m`                | `eval pair` (m=0) / `eval tail` (m=1)         |
//! | `0000001 cc s γ(|o|+1)`   | relative jump, cond `cc`, sign `s`            |
//! | `00000001 s`              | `read in` (s=0) / `read work` (s=1)           |
//! | `00000000`                | `halt`                                        |
//!
//! `γ` is the Elias gamma code. Jump conditions: `00` always, `01` flag=0,
//! `10` flag=1, `11` flag=eof. Any truncated instruction decodes as `halt`
//! and ends the program, so every bit string is a program.

use std::fmt;

use crate::bits::BitString;

/// Number of oracle slots addressable by the 4-bit slot field.
pub const ORACLE_SLOTS: u8 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reg {
    Out,
    Work,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Input,
    Work,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cond {
    Always,
    Zero,
    One,
    Eof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EvalMode {
    /// `work` holds `p̂ y`; run `p` on `y`, append the result to `out`,
    /// clear `work` and continue.
    Pair,
    /// Run the remaining program bits (after this instruction) on `work`,
    /// append the result to `out` and halt.
    Tail,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Out(bool),
    Mov(Reg),
    Oracle(u8),
    Lit {
        target: Reg,
        hat: bool,
        bits: BitString,
    },
    Eval(EvalMode),
    Jmp {
        cond: Cond,
        offset: i64,
    },
    Read(Source),
    Halt,
}

/// A decoded program together with the bits it came from.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ToyProgram {
    instrs: Vec<Instr>,
    /// Bit offset just past each instruction in `source`.
    ends: Vec<usize>,
    source: BitString,
}

impl ToyProgram {
    /// The canonical immediate-halt program (decoded from ε).
    pub fn halt() -> Self {
        ToyProgram {
            instrs: Vec::new(),
            ends: Vec::new(),
            source: BitString::new(),
        }
    }

    pub fn from_instrs(instrs: Vec<Instr>) -> Self {
        let mut source = BitString::new();
        let mut ends = Vec::with_capacity(instrs.len());
        for ins in &instrs {
            encode_instr(ins, &mut source);
            ends.push(source.len());
        }
        ToyProgram {
            instrs,
            ends,
            source,
        }
    }

    pub fn decode(bits: &BitString) -> Self {
        let mut instrs = Vec::new();
        let mut ends = Vec::new();
        let mut r = Reader {
            bits: bits.bits(),
            pos: 0,
        };
        while r.pos < bits.len() {
            match decode_instr(&mut r) {
                Some(ins) => {
                    instrs.push(ins);
                    ends.push(r.pos);
                }
                None => {
                    instrs.push(Instr::Halt);
                    ends.push(bits.len());
                    break;
                }
            }
        }
        ToyProgram {
            instrs,
            ends,
            source: bits.clone(),
        }
    }

    pub fn encode(&self) -> BitString {
        let mut out = BitString::new();
        for ins in &self.instrs {
            encode_instr(ins, &mut out);
        }
        out
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn source(&self) -> &BitString {
        &self.source
    }

    /// Source bits following instruction `pc`.
    pub fn tail_after(&self, pc: usize) -> BitString {
        self.source.suffix(self.ends[pc])
    }
}

impl fmt::Debug for ToyProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.instrs.iter()).finish()
    }
}

struct Reader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl Reader<'_> {
    fn bit(&mut self) -> Option<bool> {
        let b = *self.bits.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn take(&mut self, n: usize) -> Option<BitString> {
        if self.pos + n > self.bits.len() {
            return None;
        }
        let s = BitString::from_bits(self.bits[self.pos..self.pos + n].to_vec());
        self.pos += n;
        Some(s)
    }

    fn gamma(&mut self) -> Option<u64> {
        let mut zeros = 0usize;
        while !self.bit()? {
            zeros += 1;
            if zeros >= 63 {
                return None;
            }
        }
        let mut v = 1u64;
        for _ in 0..zeros {
            v = (v << 1) | self.bit()? as u64;
        }
        Some(v)
    }
}

fn gamma_encode(n: u64, out: &mut BitString) {
    assert!(n >= 1, "gamma code is defined for n >= 1");
    let width = 64 - n.leading_zeros() as usize;
    for _ in 1..width {
        out.push(false);
    }
    out.extend_from(&BitString::from_u64(n, width));
}

fn reg(bit: bool) -> Reg {
    if bit {
        Reg::Work
    } else {
        Reg::Out
    }
}

fn decode_instr(r: &mut Reader<'_>) -> Option<Instr> {
    let mut zeros = 0;
    loop {
        if r.bit()? {
            break;
        }
        zeros += 1;
        if zeros == 8 {
            return Some(Instr::Halt);
        }
    }
    Some(match zeros {
        0 => Instr::Out(true),
        1 => Instr::Out(false),
        2 => Instr::Mov(reg(r.bit()?)),
        3 => {
            let slot = r.take(4)?;
            Instr::Oracle(slot.value() as u8)
        }
        4 => {
            let target = reg(r.bit()?);
            let hat = r.bit()?;
            let n = r.gamma()? - 1;
            let bits = r.take(usize::try_from(n).ok()?)?;
            Instr::Lit { target, hat, bits }
        }
        5 => Instr::Eval(if r.bit()? {
            EvalMode::Tail
        } else {
            EvalMode::Pair
        }),
        6 => {
            let cond = match (r.bit()?, r.bit()?) {
                (false, false) => Cond::Always,
                (false, true) => Cond::Zero,
                (true, false) => Cond::One,
                (true, true) => Cond::Eof,
            };
            let negative = r.bit()?;
            let magnitude = (r.gamma()? - 1) as i64;
            Instr::Jmp {
                cond,
                offset: if negative { -magnitude } else { magnitude },
            }
        }
        7 => Instr::Read(if r.bit()? {
            Source::Work
        } else {
            Source::Input
        }),
        _ => unreachable!(),
    })
}

fn opcode(zeros: usize, out: &mut BitString) {
    for _ in 0..zeros {
        out.push(false);
    }
    out.push(true);
}

pub(crate) fn encode_instr(ins: &Instr, out: &mut BitString) {
    match ins {
        Instr::Out(true) => opcode(0, out),
        Instr::Out(false) => opcode(1, out),
        Instr::Mov(t) => {
            opcode(2, out);
            out.push(*t == Reg::Work);
        }
        Instr::Oracle(slot) => {
            opcode(3, out);
            out.extend_from(&BitString::from_u64(*slot as u64, 4));
        }
        Instr::Lit { target, hat, bits } => {
            opcode(4, out);
            out.push(*target == Reg::Work);
            out.push(*hat);
            gamma_encode(bits.len() as u64 + 1, out);
            out.extend_from(bits);
        }
        Instr::Eval(m) => {
            opcode(5, out);
            out.push(*m == EvalMode::Tail);
        }
        Instr::Jmp { cond, offset } => {
            opcode(6, out);
            let (a, b) = match cond {
                Cond::Always => (false, false),
                Cond::Zero => (false, true),
                Cond::One => (true, false),
                Cond::Eof => (true, true),
            };
            out.push(a);
            out.push(b);
            out.push(*offset < 0);
            gamma_encode(offset.unsigned_abs() + 1, out);
        }
        Instr::Read(s) => {
            opcode(7, out);
            out.push(*s == Source::Work);
        }
        Instr::Halt => {
            for _ in 0..8 {
                out.push(false);
            }
        }
    }
}

/// Encoding of the single-instruction program `oracle slot`.
pub fn oracle_index(slot: u8) -> BitString {
    ToyProgram::from_instrs(vec![Instr::Oracle(slot)]).encode()
}
