//! Deterministic dovetailed enumeration of a numbering's graph.
//!
//! Stage `s` runs every index of length `<= min(s, max_index_len)` on every
//! argument tuple of total length `<= min(s, max_arg_len)` for `s²` steps.
//! Pairs that halt for the first time are emitted in length-lex order of
//! `(index, args)`, followed by a stage-complete marker.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitString, BitsError};
use crate::bitvm::{Outcome, StepBudget};
use crate::numbering::Numbering;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub max_index_len: usize,
    pub max_arg_len: usize,
}

impl Schedule {
    pub fn budget(stage: u64) -> StepBudget {
        StepBudget(stage * stage)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphEvent {
    pub machine: String,
    pub index: BitString,
    pub args: Vec<BitString>,
    pub output: BitString,
    pub stage: u64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dovetail {
    Event(GraphEvent),
    StageComplete(u64),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumError {
    #[error("stage {requested} not reached (completed up to {completed:?})")]
    StageNotReached {
        requested: u64,
        completed: Option<u64>,
    },
    #[error("transcript line {line}: {msg}")]
    Transcript { line: usize, msg: String },
}

type Key = (BitString, Vec<BitString>);

fn key_cmp(a: &Key, b: &Key) -> std::cmp::Ordering {
    a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// All tuples of `arity` strings whose lengths sum to at most `total`.
fn arg_tuples(arity: usize, total: usize) -> Vec<Vec<BitString>> {
    if arity == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in BitString::all_up_to(total) {
        let rest = total - first.len();
        for mut tail in arg_tuples(arity - 1, rest) {
            tail.insert(0, first.clone());
            out.push(tail);
        }
    }
    out
}

pub struct Dovetailer {
    numbering: Arc<dyn Numbering>,
    schedule: Schedule,
    stage: u64,
    ran_current: bool,
    pending: VecDeque<GraphEvent>,
    seen: HashSet<Key>,
    log: Vec<GraphEvent>,
}

impl Dovetailer {
    pub fn new(numbering: Arc<dyn Numbering>, schedule: Schedule) -> Self {
        Dovetailer {
            numbering,
            schedule,
            stage: 0,
            ran_current: false,
            pending: VecDeque::new(),
            seen: HashSet::new(),
            log: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        self.numbering.label()
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    /// Last fully completed stage.
    pub fn completed(&self) -> Option<u64> {
        let done = if self.ran_current && self.pending.is_empty() {
            self.stage + 1
        } else {
            self.stage
        };
        done.checked_sub(1)
    }

    pub fn events(&self) -> &[GraphEvent] {
        &self.log
    }

    fn run_stage(&mut self) {
        let s = self.stage;
        let max_index = (s as usize).min(self.schedule.max_index_len);
        let max_args = (s as usize).min(self.schedule.max_arg_len);
        let tuples = arg_tuples(self.numbering.arity(), max_args);
        let mut candidates: Vec<Key> = BitString::all_up_to(max_index)
            .flat_map(|i| tuples.iter().map(move |a| (i.clone(), a.clone())))
            .filter(|k| !self.seen.contains(k))
            .collect();
        candidates.sort_by(key_cmp);
        let budget = Schedule::budget(s);
        let numbering = &self.numbering;
        let halted: Vec<(Key, BitString, u64)> = candidates
            .into_par_iter()
            .filter_map(|k| match numbering.eval(&k.0, &k.1, budget) {
                Outcome::Halted { output, steps } => Some((k, output, steps)),
                Outcome::BudgetExceeded => None,
            })
            .collect();
        let label = self.numbering.label().to_string();
        for ((index, args), output, steps) in halted {
            self.seen.insert((index.clone(), args.clone()));
            self.pending.push_back(GraphEvent {
                machine: label.clone(),
                index,
                args,
                output,
                stage: s,
                steps,
            });
        }
        self.ran_current = true;
    }

    pub fn next_item(&mut self) -> Dovetail {
        loop {
            if let Some(e) = self.pending.pop_front() {
                self.log.push(e.clone());
                return Dovetail::Event(e);
            }
            if self.ran_current {
                let s = self.stage;
                self.stage += 1;
                self.ran_current = false;
                return Dovetail::StageComplete(s);
            }
            self.run_stage();
        }
    }

    /// Runs until `stage` is complete and returns the events emitted on the way.
    pub fn advance_to(&mut self, stage: u64) -> Vec<GraphEvent> {
        let mut out = Vec::new();
        while self.completed().is_none_or(|c| c < stage) {
            if let Dovetail::Event(e) = self.next_item() {
                out.push(e);
            }
        }
        out
    }

    pub fn subfunction_at(&self, stage: u64) -> Result<SubFunction, EnumError> {
        match self.completed() {
            Some(c) if c >= stage => Ok(SubFunction::from_events(
                self.log.iter().filter(|e| e.stage <= stage),
                stage,
            )),
            completed => Err(EnumError::StageNotReached {
                requested: stage,
                completed,
            }),
        }
    }

    /// Everything emitted so far, including a partially emitted stage.
    pub fn current(&self) -> SubFunction {
        SubFunction::from_events(self.log.iter(), self.stage)
    }

    pub fn transcript(&self) -> String {
        transcript(
            self.numbering.label(),
            self.numbering.arity(),
            self.schedule,
            &self.log,
        )
    }
}

impl Iterator for Dovetailer {
    type Item = Dovetail;

    fn next(&mut self) -> Option<Dovetail> {
        Some(self.next_item())
    }
}

/// A finite graph `Ū`: every pair enumerated up to a stage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubFunction {
    entries: BTreeMap<BitString, BTreeMap<Vec<BitString>, (BitString, u64)>>,
    watermark: u64,
}

impl SubFunction {
    pub fn from_events<'a>(
        events: impl IntoIterator<Item = &'a GraphEvent>,
        watermark: u64,
    ) -> Self {
        let mut sf = SubFunction {
            entries: BTreeMap::new(),
            watermark,
        };
        for e in events {
            sf.insert(e.index.clone(), e.args.clone(), e.output.clone(), e.stage);
        }
        sf
    }

    pub fn insert(
        &mut self,
        index: BitString,
        args: Vec<BitString>,
        output: BitString,
        stage: u64,
    ) {
        self.entries
            .entry(index)
            .or_default()
            .insert(args, (output, stage));
    }

    pub fn watermark(&self) -> u64 {
        self.watermark
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, index: &BitString, args: &[BitString]) -> Option<&BitString> {
        self.entries.get(index)?.get(args).map(|(o, _)| o)
    }

    /// Indices shorter than `below` with an entry whose output is `x`.
    pub fn inverse(&self, x: &BitString, below: usize) -> Vec<&BitString> {
        self.entries
            .iter()
            .filter(|(i, rows)| i.len() < below && rows.values().any(|(o, _)| o == x))
            .map(|(i, _)| i)
            .collect()
    }

    /// Length-lex least index with some entry equal to `x`.
    pub fn least_index_for(&self, x: &BitString) -> Option<&BitString> {
        self.entries
            .iter()
            .find(|(_, rows)| rows.values().any(|(o, _)| o == x))
            .map(|(i, _)| i)
    }

    pub fn contains(&self, other: &SubFunction) -> bool {
        other
            .entries
            .iter()
            .all(|(i, rows)| rows.iter().all(|(a, (o, _))| self.lookup(i, a) == Some(o)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitString, &Vec<BitString>, &BitString)> {
        self.entries
            .iter()
            .flat_map(|(i, rows)| rows.iter().map(move |(a, (o, _))| (i, a, o)))
    }
}

fn args_token(args: &[BitString]) -> String {
    if args.is_empty() {
        "()".to_string()
    } else {
        args.iter()
            .map(BitString::token)
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn parse_args(tok: &str) -> Result<Vec<BitString>, BitsError> {
    if tok == "()" {
        return Ok(Vec::new());
    }
    tok.split(',').map(BitString::parse_token).collect()
}

pub fn transcript(label: &str, arity: usize, schedule: Schedule, events: &[GraphEvent]) -> String {
    let mut s = format!(
        "# machine={label} arity={arity} max_index_len={} max_arg_len={}\n",
        schedule.max_index_len, schedule.max_arg_len
    );
    for e in events {
        writeln!(
            s,
            "{} {} {} {} {}",
            e.stage,
            e.index.token(),
            args_token(&e.args),
            e.output.token(),
            e.steps
        )
        .expect("write to string");
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub machine: String,
    pub arity: usize,
    pub schedule: Schedule,
    pub events: Vec<GraphEvent>,
}

impl Transcript {
    pub fn last_stage(&self) -> u64 {
        self.events.last().map_or(0, |e| e.stage)
    }
}

pub fn parse_transcript(text: &str) -> Result<Transcript, EnumError> {
    let err = |line: usize, msg: String| EnumError::Transcript { line, msg };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty transcript".into()))?;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| err(1, "missing '# ' header".into()))?;
    let mut fields = BTreeMap::new();
    for kv in header.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| err(1, format!("bad header field {kv:?}")))?;
        fields.insert(k, v);
    }
    let field = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| err(1, format!("header lacks {k}")))
    };
    let num = |k: &str| -> Result<usize, EnumError> {
        field(k)?
            .parse()
            .map_err(|_| err(1, format!("header field {k} is not a number")))
    };
    let machine = field("machine")?.to_string();
    let arity = num("arity")?;
    let schedule = Schedule {
        max_index_len: num("max_index_len")?,
        max_arg_len: num("max_arg_len")?,
    };
    let mut events = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [stage, index, args, output, steps] = cols[..] else {
            return Err(err(
                lineno,
                format!("expected 5 columns, found {}", cols.len()),
            ));
        };
        let bad = |e: BitsError| err(lineno, e.to_string());
        events.push(GraphEvent {
            machine: machine.clone(),
            index: BitString::parse_token(index).map_err(bad)?,
            args: parse_args(args).map_err(bad)?,
            output: BitString::parse_token(output).map_err(bad)?,
            stage: stage
                .parse()
                .map_err(|_| err(lineno, format!("bad stage {stage:?}")))?,
            steps: steps
                .parse()
                .map_err(|_| err(lineno, format!("bad step count {steps:?}")))?,
        });
    }
    Ok(Transcript {
        machine,
        arity,
        schedule,
        events,
    })
}

/// Re-runs the enumeration described by `t` and reports the first line
/// (0-based event position) where it diverges, if any.
pub fn replay(
    numbering: Arc<dyn Numbering>,
    t: &Transcript,
    through_stage: u64,
) -> Result<(), usize> {
    let mut d = Dovetailer::new(numbering, t.schedule);
    let fresh = d.advance_to(through_stage);
    let recorded: Vec<&GraphEvent> = t
        .events
        .iter()
        .filter(|e| e.stage <= through_stage)
        .collect();
    for (i, e) in recorded.iter().enumerate() {
        if fresh.get(i) != Some(*e) {
            return Err(i);
        }
    }
    if fresh.len() != recorded.len() {
        return Err(recorded.len());
    }
    Ok(())
}
