//! Line-oriented assembler for toy programs.
//!
//! ```text
//! ; comment
//! loop:   read in          ; label definitions end with ':'
//!         jeof done
//!         out 1
//!         jmp loop
//! done:   halt
//!         .bits 0110        ; raw trailing bits (payload for `eval tail`)
//! ```
//!
//! Mnemonics (case-insensitive): `out 0|1`, `mov out|work`, `oracle N`,
//! `lit out|work [hat] BITS|-`, `eval pair|tail`, `jmp|j0|j1|jeof LABEL|±N`,
//! `read in|work`, `halt`, `.bits BITS`. Numeric jump offsets are relative to
//! the jump instruction itself.

use std::collections::HashMap;

use thiserror::Error;

use super::isa::{encode_instr, Cond, EvalMode, Instr, Reg, Source, ToyProgram, ORACLE_SLOTS};
use crate::bits::BitString;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct AsmError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

enum Target {
    Label(String, usize, usize),
    Offset(i64),
}

enum Item {
    Ready(Instr),
    Jump(Cond, Target),
}

struct Tokens<'a> {
    line: usize,
    words: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn err(&self, col: usize, msg: impl Into<String>) -> AsmError {
        AsmError {
            line: self.line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), AsmError> {
        let end_col = self.words.last().map_or(1, |(c, w)| c + w.len());
        let tok = self
            .words
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(end_col, format!("expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&'a str> {
        self.words.get(self.pos).map(|(_, w)| *w)
    }

    fn finish(&self) -> Result<(), AsmError> {
        match self.words.get(self.pos) {
            Some((col, w)) => Err(self.err(*col, format!("unexpected operand {w:?}"))),
            None => Ok(()),
        }
    }

    fn choice<T: Copy>(&mut self, what: &str, options: &[(&str, T)]) -> Result<T, AsmError> {
        let (col, w) = self.next(what)?;
        options
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(w))
            .map(|(_, v)| *v)
            .ok_or_else(|| self.err(col, format!("expected {what}, found {w:?}")))
    }

    fn bits(&mut self) -> Result<BitString, AsmError> {
        let (col, w) = self.next("bit string")?;
        BitString::parse_token(w).map_err(|e| self.err(col, e.to_string()))
    }
}

fn split_words(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &text[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &text[s..]));
    }
    out
}

/// Assembles `text` into the raw program bits.
pub fn assemble_bits(text: &str) -> Result<BitString, AsmError> {
    let mut items: Vec<(Item, usize)> = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut trailer = BitString::new();
    let mut trailer_line = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let code = raw.split(';').next().unwrap_or("");
        let mut words = split_words(code);
        while let Some((col, w)) = words.first().copied() {
            let Some(name) = w.strip_suffix(':') else {
                break;
            };
            if name.is_empty() || labels.insert(name.to_string(), items.len()).is_some() {
                return Err(AsmError {
                    line,
                    col,
                    msg: format!("bad or duplicate label {name:?}"),
                });
            }
            words.remove(0);
        }
        if words.is_empty() {
            continue;
        }
        let mut t = Tokens {
            line,
            words,
            pos: 0,
        };
        let (col, op) = t.next("mnemonic")?;
        if trailer_line.is_some() {
            return Err(t.err(col, "nothing may follow .bits"));
        }
        let item = match op.to_ascii_lowercase().as_str() {
            "halt" => Item::Ready(Instr::Halt),
            "out" => Item::Ready(Instr::Out(
                t.choice("0 or 1", &[("0", false), ("1", true)])?,
            )),
            "mov" => Item::Ready(Instr::Mov(
                t.choice("out or work", &[("out", Reg::Out), ("work", Reg::Work)])?,
            )),
            "read" => Item::Ready(Instr::Read(t.choice(
                "in or work",
                &[("in", Source::Input), ("work", Source::Work)],
            )?)),
            "eval" => Item::Ready(Instr::Eval(t.choice(
                "pair or tail",
                &[("pair", EvalMode::Pair), ("tail", EvalMode::Tail)],
            )?)),
            "oracle" => {
                let (c, w) = t.next("slot number")?;
                match w.parse::<u8>() {
                    Ok(s) if s < ORACLE_SLOTS => Item::Ready(Instr::Oracle(s)),
                    _ => {
                        return Err(t.err(c, format!("oracle slot must be 0..{}", ORACLE_SLOTS - 1)))
                    }
                }
            }
            "lit" => {
                let target = t.choice("out or work", &[("out", Reg::Out), ("work", Reg::Work)])?;
                let hat = t.peek().is_some_and(|w| w.eq_ignore_ascii_case("hat"));
                if hat {
                    t.pos += 1;
                }
                Item::Ready(Instr::Lit {
                    target,
                    hat,
                    bits: t.bits()?,
                })
            }
            "jmp" | "j0" | "j1" | "jeof" => {
                let cond = match op.to_ascii_lowercase().as_str() {
                    "jmp" => Cond::Always,
                    "j0" => Cond::Zero,
                    "j1" => Cond::One,
                    _ => Cond::Eof,
                };
                let (c, w) = t.next("jump target")?;
                let target =
                    if w.starts_with(['+', '-']) || w.starts_with(|ch: char| ch.is_ascii_digit()) {
                        Target::Offset(
                            w.parse()
                                .map_err(|_| t.err(c, format!("bad offset {w:?}")))?,
                        )
                    } else {
                        Target::Label(w.to_string(), line, c)
                    };
                Item::Jump(cond, target)
            }
            ".bits" => {
                trailer = t.bits()?;
                trailer_line = Some(line);
                t.finish()?;
                continue;
            }
            _ => return Err(t.err(col, format!("unknown mnemonic {op:?}"))),
        };
        t.finish()?;
        items.push((item, line));
    }

    let mut out = BitString::new();
    for (pc, (item, _)) in items.iter().enumerate() {
        let ins = match item {
            Item::Ready(ins) => ins.clone(),
            Item::Jump(cond, Target::Offset(o)) => Instr::Jmp {
                cond: *cond,
                offset: *o,
            },
            Item::Jump(cond, Target::Label(name, line, col)) => {
                let dest = labels.get(name).ok_or_else(|| AsmError {
                    line: *line,
                    col: *col,
                    msg: format!("undefined label {name:?}"),
                })?;
                Instr::Jmp {
                    cond: *cond,
                    offset: *dest as i64 - pc as i64,
                }
            }
        };
        encode_instr(&ins, &mut out);
    }
    out.extend_from(&trailer);
    Ok(out)
}

pub fn assemble(text: &str) -> Result<ToyProgram, AsmError> {
    assemble_bits(text).map(|b| ToyProgram::decode(&b))
}

/// Renders a program back to assembly (numeric jump offsets).
pub fn disassemble(prog: &ToyProgram) -> String {
    let mut s = String::new();
    for ins in prog.instrs() {
        let line = match ins {
            Instr::Out(b) => format!("out {}", *b as u8),
            Instr::Mov(Reg::Out) => "mov out".into(),
            Instr::Mov(Reg::Work) => "mov work".into(),
            Instr::Oracle(slot) => format!("oracle {slot}"),
            Instr::Lit { target, hat, bits } => format!(
                "lit {}{} {}",
                if *target == Reg::Out { "out" } else { "work" },
                if *hat { " hat" } else { "" },
                bits.token()
            ),
            Instr::Eval(EvalMode::Pair) => "eval pair".into(),
            Instr::Eval(EvalMode::Tail) => "eval tail".into(),
            Instr::Jmp { cond, offset } => {
                let m = match cond {
                    Cond::Always => "jmp",
                    Cond::Zero => "j0",
                    Cond::One => "j1",
                    Cond::Eof => "jeof",
                };
                format!("{m} {offset:+}")
            }
            Instr::Read(Source::Input) => "read in".into(),
            Instr::Read(Source::Work) => "read work".into(),
            Instr::Halt => "halt".into(),
        };
        s.push_str(&line);
        s.push('\n');
    }
    s
}
