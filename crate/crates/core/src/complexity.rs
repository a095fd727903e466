//! Budgeted plain, list-restricted and total complexity.
//!
//! Every value is exact only for the machine truncated at the stated budget
//! and index length; the result carries those bounds.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::bitvm::StepBudget;
use crate::numbering::{fixtures, Numbering};

pub type ListValue = BTreeSet<BitString>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityResult {
    /// Length of the shortest qualifying index; `None` if there is none
    /// within the bounds.
    pub value: Option<usize>,
    pub witness: Option<BitString>,
    pub budget: u64,
    pub maxlen: Option<usize>,
}

impl ComplexityResult {
    fn found(witness: Option<BitString>, budget: StepBudget, maxlen: Option<usize>) -> Self {
        ComplexityResult {
            value: witness.as_ref().map(BitString::len),
            witness,
            budget: budget.0,
            maxlen,
        }
    }

    /// `value >= bound`, treating "none" as infinite.
    pub fn at_least(&self, bound: i64) -> bool {
        self.value.is_none_or(|v| v as i64 >= bound)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComplexityError {
    #[error("program {0} does not halt within {1} steps")]
    Undefined(String, u64),
    #[error("malformed list encoding: {0}")]
    BadList(String),
}

/// First index of length exactly `n` (lexicographic) satisfying `pred`.
fn first_of_len(n: usize, pred: impl Fn(&BitString) -> bool + Sync) -> Option<BitString> {
    (0..1u64 << n)
        .into_par_iter()
        .map(|v| BitString::from_u64(v, n))
        .find_first(|p| pred(p))
}

fn first_up_to(maxlen: usize, pred: impl Fn(&BitString) -> bool + Sync) -> Option<BitString> {
    (0..=maxlen).find_map(|n| first_of_len(n, &pred))
}

/// `C_U(x)` over indices of length `<= maxlen` at `budget`.
pub fn c_exact(
    u: &dyn Numbering,
    x: &BitString,
    maxlen: usize,
    budget: StepBudget,
) -> ComplexityResult {
    let w = first_up_to(maxlen, |p| {
        u.eval_raw(p, &BitString::new(), budget).output() == Some(x)
    });
    ComplexityResult::found(w, budget, Some(maxlen))
}

/// Least program for every output reachable within the bounds; answers
/// repeated `c_exact` queries without rescanning.
#[derive(Clone, Debug)]
pub struct ComplexityTable {
    least: BTreeMap<BitString, BitString>,
    maxlen: usize,
    budget: StepBudget,
}

impl ComplexityTable {
    pub fn build(u: &dyn Numbering, maxlen: usize, budget: StepBudget) -> Self {
        let mut least = BTreeMap::new();
        for n in 0..=maxlen {
            let outs: Vec<(BitString, BitString)> = (0..1u64 << n)
                .into_par_iter()
                .filter_map(|v| {
                    let p = BitString::from_u64(v, n);
                    u.eval_raw(&p, &BitString::new(), budget)
                        .output()
                        .cloned()
                        .map(|o| (o, p))
                })
                .collect();
            // `outs` is in index order, so the first hit per output wins
            for (o, p) in outs {
                least.entry(o).or_insert(p);
            }
        }
        ComplexityTable {
            least,
            maxlen,
            budget,
        }
    }

    pub fn query(&self, x: &BitString) -> ComplexityResult {
        ComplexityResult::found(self.least.get(x).cloned(), self.budget, Some(self.maxlen))
    }

    pub fn maxlen(&self) -> usize {
        self.maxlen
    }

    pub fn budget(&self) -> StepBudget {
        self.budget
    }

    /// Outputs whose least program is shorter than `below`.
    pub fn outputs_cheaper_than(&self, below: usize) -> impl Iterator<Item = &BitString> {
        self.least
            .iter()
            .filter(move |(_, p)| p.len() < below)
            .map(|(o, _)| o)
    }
}

/// `C_{U,L}(x)`: the shortest member of `list` computing `x`.
pub fn c_list(
    u: &dyn Numbering,
    list: &ListValue,
    x: &BitString,
    budget: StepBudget,
) -> ComplexityResult {
    // BTreeSet iterates in length-lex order, so the first hit is minimal.
    let w = list
        .iter()
        .find(|p| u.eval_raw(p, &BitString::new(), budget).output() == Some(x))
        .cloned();
    ComplexityResult::found(w, budget, None)
}

/// Canonical list code: members in length-lex order, each prefix-coded.
pub fn encode_list(list: &ListValue) -> BitString {
    let mut out = BitString::new();
    for s in list {
        out.extend_from(&s.hat());
    }
    out
}

/// Parses a concatenation of prefix codes; order and repeats are ignored.
pub fn decode_list(code: &BitString) -> Result<ListValue, ComplexityError> {
    let mut list = ListValue::new();
    let mut rest = code.clone();
    while !rest.is_empty() {
        let (s, r) = rest
            .split_hat()
            .map_err(|e| ComplexityError::BadList(e.to_string()))?;
        list.insert(s);
        rest = r;
    }
    Ok(list)
}

/// Like [`decode_list`] but only accepts the canonical encoding.
pub fn decode_list_canonical(code: &BitString) -> Option<ListValue> {
    decode_list(code).ok().filter(|l| encode_list(l) == *code)
}

/// Whether `Φ_r` halts within `budget` on every string of length `k`.
pub fn total_on_length(phi: &dyn Numbering, r: &BitString, k: usize, budget: StepBudget) -> bool {
    BitString::all_of_len(k).all(|q| phi.eval_raw(r, &q, budget).halted())
}

/// `CT_Φ(L|q)`: shortest `r` with `Φ_r` total on length `|q|` and
/// `Φ_r(q) = encode_list(L)`.
pub fn ct_total(
    phi: &dyn Numbering,
    list: &ListValue,
    q: &BitString,
    maxlen: usize,
    budget: StepBudget,
) -> ComplexityResult {
    let want = encode_list(list);
    let w = first_up_to(maxlen, |r| {
        phi.eval_raw(r, q, budget).output() == Some(&want)
            && total_on_length(phi, r, q.len(), budget)
    });
    ComplexityResult::found(w, budget, Some(maxlen))
}

/// `ε(p) = C_{U,L}(U(p)) - |U(p)|`; `Ok(None)` when no member of `L`
/// computes `U(p)`.
pub fn epsilon(
    u: &dyn Numbering,
    p: &BitString,
    list: &ListValue,
    budget: StepBudget,
) -> Result<Option<i64>, ComplexityError> {
    let x = u
        .eval_raw(p, &BitString::new(), budget)
        .output()
        .cloned()
        .ok_or_else(|| ComplexityError::Undefined(p.token(), budget.0))?;
    Ok(c_list(u, list, &x, budget)
        .value
        .map(|v| v as i64 - x.len() as i64))
}

/// U-program printing `x`: the echo program applied to `x`.
pub fn print_literal(x: &BitString) -> BitString {
    fixtures::bits_of(fixtures::ECHO).hat().concat(x)
}

/// Additive overhead of [`print_literal`]: `|print_literal(x)| - |x|`.
pub fn literal_overhead() -> usize {
    print_literal(&BitString::new()).len()
}
