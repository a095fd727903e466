//! The single-pair game: for every `k` keep `(q_k, x_k)` with `V(q_k) = x_k`
//! such that `L(prefix ++ q_k)` is large enough for `x_k` and contains no
//! short program for it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    Arena, Backend, Budgets, GameError, GameKind, Metrics, VGraph, Witness, WitnessConstants,
    LOG_RULE,
};
use crate::bits::BitString;
use crate::complexity::c_list;
use crate::enumeration::{Dovetail, Dovetailer, Schedule, SubFunction};
use crate::lists::{ListSpec, ListValue};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Th1Config {
    pub kmax: usize,
    pub stage_limit: u64,
    pub spec: ListSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub k: usize,
    pub stage: u64,
    /// The enumerated program that broke the old pair.
    pub trigger: BitString,
    pub old_q: BitString,
    pub q: BitString,
    pub list_size: usize,
    pub n: usize,
    /// Outputs of short listed programs, excluded as `x`.
    pub blocked: usize,
    pub x: BitString,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Th1Outcome {
    pub witnesses: Vec<Witness>,
    pub repairs: Vec<RepairRecord>,
    pub repair_counts: BTreeMap<usize, u64>,
    pub good_at_end: BTreeMap<usize, bool>,
    pub stage: u64,
    pub events: usize,
    #[serde(skip)]
    pub transcript: String,
}

struct Slot {
    q: BitString,
    x: BitString,
    repairs: u64,
    list: ListValue,
}

/// `(q, x)` is in the graph of `V`, `#L >= 2^{|x|} - 1`, and no listed
/// program shorter than `k` computes `x` in `ubar`.
pub fn goodness_th1(
    graph: &VGraph,
    ubar: &SubFunction,
    list: &ListValue,
    q: &BitString,
    x: &BitString,
    k: usize,
) -> bool {
    let assigned = graph.get(q).is_some_and(|a| a.x == *x);
    let big_enough = x.len() >= 63 || list.len() as u128 + 1 >= 1u128 << x.len();
    let unbeaten = !list
        .iter()
        .any(|s| s.len() < k && ubar.lookup(s, &[]) == Some(x));
    assigned && big_enough && unbeaten
}

fn game_kind(arena: &Arena) -> GameKind {
    match arena.backend {
        Backend::Fixpoint => GameKind::Th1,
        Backend::Teutsch => GameKind::Th1t,
    }
}

pub fn run_th1(arena: &Arena, cfg: &Th1Config) -> Result<Th1Outcome, GameError> {
    let env = arena.list_env();
    let mut slots = Vec::with_capacity(cfg.kmax);
    for k in 1..=cfg.kmax {
        let q = BitString::zeros(k);
        let list = cfg.spec.eval(env, &arena.prefix.concat(&q))?;
        arena
            .graph
            .assign(q.clone(), BitString::new(), 0, arena.list_budget)?;
        slots.push(Slot {
            q,
            x: BitString::new(),
            repairs: 0,
            list,
        });
    }

    let schedule = Schedule {
        max_index_len: cfg.kmax.saturating_sub(1),
        max_arg_len: 0,
    };
    let mut dove = Dovetailer::new(arena.target.clone(), schedule);
    let mut ubar = SubFunction::default();
    let mut repairs = Vec::new();
    loop {
        match dove.next_item() {
            Dovetail::StageComplete(s) if s >= cfg.stage_limit => break,
            Dovetail::StageComplete(_) => {}
            Dovetail::Event(e) => {
                ubar.insert(e.index.clone(), Vec::new(), e.output.clone(), e.stage);
                for k in e.index.len() + 1..=cfg.kmax {
                    let slot = &mut slots[k - 1];
                    if slot.x == e.output && slot.list.contains(&e.index) {
                        repairs.push(repair(arena, &cfg.spec, &ubar, slot, k, e.stage, &e.index)?);
                    }
                }
            }
        }
    }

    let stage = cfg.stage_limit;
    let budget = Schedule::budget(stage);
    let mut witnesses = Vec::new();
    let mut good_at_end = BTreeMap::new();
    for (i, slot) in slots.iter().enumerate() {
        let k = i + 1;
        good_at_end.insert(
            k,
            goodness_th1(&arena.graph, &ubar, &slot.list, &slot.q, &slot.x, k),
        );
        let p = arena.prefix.concat(&slot.q);
        let cl = c_list(arena.target.as_ref(), &slot.list, &slot.x, budget);
        witnesses.push(Witness {
            game: game_kind(arena),
            machine: arena.target.label().to_string(),
            k,
            n: None,
            q: slot.q.clone(),
            p: p.clone(),
            x: slot.x.clone(),
            spec: cfg.spec.to_string(),
            list: slot.list.iter().cloned().collect(),
            metrics: Metrics {
                list_size: slot.list.len(),
                x_len: slot.x.len(),
                p_len: p.len(),
                c_list: cl.value,
                c_exact: ubar.least_index_for(&slot.x).map(BitString::len),
                epsilon: cl.value.map(|v| v as i64 - slot.x.len() as i64),
                budget: budget.0,
                maxlen: Some(schedule.max_index_len),
            },
            stage,
            budgets: Budgets {
                stage_budget: budget.0,
                list_budget: arena.list_budget.0,
            },
            constants: WitnessConstants {
                log_rule: LOG_RULE.into(),
                c_len: arena.prefix.len(),
                complexity_floor: k,
            },
        });
    }
    Ok(Th1Outcome {
        witnesses,
        repair_counts: slots
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1, s.repairs))
            .collect(),
        repairs,
        good_at_end,
        stage,
        events: dove.events().len(),
        transcript: dove.transcript(),
    })
}

/// Runs the game against `aug(spec)` and restates each witness against
/// `spec` itself: the list loses at most `p`, so the size bound drops by one
/// and the complexity bound is unaffected.
pub fn augment_and_rerun(arena: &Arena, cfg: &Th1Config) -> Result<Th1Outcome, GameError> {
    let aug = Th1Config {
        spec: cfg.spec.clone().augmented(),
        ..cfg.clone()
    };
    let mut out = run_th1(arena, &aug)?;
    let budget = Schedule::budget(out.stage);
    for w in &mut out.witnesses {
        let list = cfg.spec.eval(arena.list_env(), &w.p)?;
        let cl = c_list(arena.target.as_ref(), &list, &w.x, budget);
        w.spec = cfg.spec.to_string();
        w.list = list.iter().cloned().collect();
        w.metrics.list_size = list.len();
        w.metrics.c_list = cl.value;
        w.metrics.epsilon = cl.value.map(|v| v as i64 - w.x.len() as i64);
    }
    Ok(out)
}

fn repair(
    arena: &Arena,
    spec: &ListSpec,
    ubar: &SubFunction,
    slot: &mut Slot,
    k: usize,
    stage: u64,
    trigger: &BitString,
) -> Result<RepairRecord, GameError> {
    let used = slot.repairs + 1;
    if used >= 1u64 << k {
        return Err(GameError::QExhausted { k, used });
    }
    // fresh q: the least string of length k not used before
    let q = BitString::from_u64(used, k);
    let list = spec.eval(arena.list_env(), &arena.prefix.concat(&q))?;
    // 2^{n+1} - 1 > #L >= 2^n - 1
    let n = (usize::BITS - 1 - (list.len() + 1).leading_zeros()) as usize;
    let candidates = (1u128 << (n + 1)) - 1;
    if list.len() as u128 >= candidates {
        return Err(GameError::Invariant(format!(
            "k={k}: list of size {} has no room below n={n}",
            list.len()
        )));
    }
    let blocked: BTreeSet<&BitString> = list
        .iter()
        .filter(|s| s.len() < k)
        .filter_map(|s| ubar.lookup(s, &[]))
        .collect();
    let x = BitString::all_up_to(n)
        .find(|x| !blocked.contains(x))
        .ok_or_else(|| {
            GameError::Invariant(format!("k={k}: every x of length <= {n} is blocked"))
        })?;
    arena
        .graph
        .assign(q.clone(), x.clone(), stage, arena.list_budget)?;
    let record = RepairRecord {
        k,
        stage,
        trigger: trigger.clone(),
        old_q: slot.q.clone(),
        q: q.clone(),
        list_size: list.len(),
        n,
        blocked: blocked.len(),
        x: x.clone(),
    };
    *slot = Slot {
        q,
        x,
        repairs: used,
        list,
    };
    Ok(record)
}
