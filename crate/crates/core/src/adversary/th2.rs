//! The bunch game: for every `k` and `n < k` keep `(q_kn, x_kn)` with
//! `|q_kn| = k`, `|x_kn| = n`, `x_kn` incompressible below `n - 1`, and no
//! small list that is cheap to compute from `q_kn` holding a program for
//! `x_kn` shorter than `k - 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    log_ceil, Arena, Budgets, GameError, GameKind, Metrics, Witness, WitnessConstants, LOG_RULE,
};
use crate::bits::BitString;
use crate::complexity::{decode_list_canonical, ListValue};
use crate::enumeration::{Dovetail, Dovetailer, GraphEvent, Schedule, SubFunction};
use crate::numbering::Numbering;

/// `k - ⌈log₂k⌉ - 2`: cheap lists have total complexity below this.
pub fn deficit_bound(k: usize) -> i64 {
    k as i64 - log_ceil(k) as i64 - 2
}

/// Number of fresh `q` of length `k` the game may consume:
/// `k + Σ_{δ<D(k)} k·2^δ + 2^{k-1}`.
pub fn needed_capacity(k: usize) -> Result<u64, GameError> {
    if k < 4 {
        return Err(GameError::Invariant(format!(
            "capacity is defined for k >= 4, got {k}"
        )));
    }
    let d = deficit_bound(k) as u32;
    let k64 = k as u64;
    let cap = k64 + (0..d).map(|delta| k64 << delta).sum::<u64>() + (1u64 << (k - 1));
    if cap >= 1u64 << k {
        return Err(GameError::Invariant(format!(
            "capacity {cap} for k={k} reaches 2^k"
        )));
    }
    Ok(cap)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Th2Config {
    pub kmax: usize,
    /// Largest `n` in a bunch (`n < k` as well).
    pub nmax: usize,
    pub stage_limit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheapList {
    pub list: ListValue,
    /// Length of the shortest program computing the list (stage-relative).
    pub delta: usize,
    pub program: BitString,
}

/// `#L < 2^{n - δ - ⌈log₂k⌉ - 1}`
pub fn is_small(list_len: usize, delta: usize, n: usize, k: usize) -> bool {
    let shift = delta + log_ceil(k) + 1;
    shift <= 120 && n <= 120 && (list_len as u128) << shift < 1u128 << n
}

/// Lists `Φ̄_t(q)` for `|t| < d` where `Φ̄_t` is defined on every string of
/// length `|q|`, each with its least `t`.
pub fn cheap_lists(phibar: &SubFunction, q: &BitString, d: i64) -> Vec<CheapList> {
    let mut by_list: BTreeMap<ListValue, (usize, BitString)> = BTreeMap::new();
    let indices: BTreeSet<&BitString> = phibar
        .iter()
        .map(|(t, _, _)| t)
        .filter(|t| (t.len() as i64) < d)
        .collect();
    for t in indices {
        let total = BitString::all_of_len(q.len()).all(|q2| phibar.lookup(t, &[q2]).is_some());
        if !total {
            continue;
        }
        let Some(list) = phibar
            .lookup(t, std::slice::from_ref(q))
            .and_then(decode_list_canonical)
        else {
            continue;
        };
        by_list.entry(list).or_insert_with(|| (t.len(), t.clone()));
    }
    by_list
        .into_iter()
        .map(|(list, (delta, program))| CheapList {
            list,
            delta,
            program,
        })
        .collect()
}

fn small_union(cheap: &[CheapList], n: usize, k: usize) -> BTreeSet<BitString> {
    cheap
        .iter()
        .filter(|c| is_small(c.list.len(), c.delta, n, k))
        .flat_map(|c| c.list.iter().cloned())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Th2RepairCounts {
    /// Members of all small cheap lists.
    pub union_size: usize,
    /// Strings of length `n` computed by a short member of that union.
    pub blocked: usize,
    /// Strings of length `n` with `C_Ū >= n - 1`.
    pub candidates: u64,
}

fn compressible(ubar: &SubFunction, x: &BitString, n: usize) -> bool {
    ubar.iter().any(|(s, _, o)| s.len() + 1 < n && o == x)
}

/// Picks the least `x` of length `n` with `C_Ū(x) >= n - 1` that no short
/// (`< k - 1`) member of `union` computes, asserting the counting bounds.
pub fn choose_th2_x(
    n: usize,
    k: usize,
    ubar: &SubFunction,
    union: &BTreeSet<BitString>,
) -> Result<(BitString, Th2RepairCounts), GameError> {
    let space = 1u64 << n;
    let low: BTreeSet<&BitString> = ubar
        .iter()
        .filter(|(s, _, o)| s.len() + 1 < n && o.len() == n)
        .map(|(_, _, o)| o)
        .collect();
    let candidates = space - low.len() as u64;
    let blocked: BTreeSet<&BitString> = union
        .iter()
        .filter(|s| s.len() + 1 < k)
        .filter_map(|s| ubar.lookup(s, &[]))
        .filter(|o| o.len() == n)
        .collect();
    let counts = Th2RepairCounts {
        union_size: union.len(),
        blocked: blocked.len(),
        candidates,
    };
    if 2 * union.len() as u64 >= space {
        return Err(GameError::Invariant(format!(
            "k={k} n={n}: small lists hold {} >= 2^(n-1) strings",
            union.len()
        )));
    }
    if 2 * candidates <= space {
        return Err(GameError::Invariant(format!(
            "k={k} n={n}: only {candidates} incompressible strings"
        )));
    }
    BitString::all_of_len(n)
        .find(|x| !low.contains(x) && !blocked.contains(x))
        .map(|x| (x, counts))
        .ok_or_else(|| GameError::Invariant(format!("k={k} n={n}: no eligible x")))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Th2Repair {
    pub k: usize,
    pub n: usize,
    pub stage: u64,
    pub old_q: BitString,
    pub q: BitString,
    pub x: BitString,
    pub counts: Th2RepairCounts,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Th2Outcome {
    pub witnesses: Vec<Witness>,
    pub repairs: Vec<Th2Repair>,
    /// `(k, n, good)` at the final stage.
    pub good_at_end: Vec<(usize, usize, bool)>,
    /// `(k, q consumed, capacity)`; capacity only for `k >= 4`.
    pub consumption: Vec<(usize, u64, Option<u64>)>,
    pub stage: u64,
    pub events: usize,
    #[serde(skip)]
    pub transcript: String,
}

struct Pair {
    q: BitString,
    x: BitString,
}

struct Bunch {
    k: usize,
    pairs: Vec<Pair>,
    next_q: u64,
}

struct State<'a> {
    arena: &'a Arena,
    bunches: Vec<Bunch>,
    ubar: SubFunction,
    phibar: SubFunction,
    cheap_cache: BTreeMap<BitString, Vec<CheapList>>,
    repairs: Vec<Th2Repair>,
}

impl State<'_> {
    fn cheap(&mut self, q: &BitString, k: usize) -> Vec<CheapList> {
        let phibar = &self.phibar;
        self.cheap_cache
            .entry(q.clone())
            .or_insert_with(|| cheap_lists(phibar, q, deficit_bound(k)))
            .clone()
    }

    fn good(&mut self, k: usize, n: usize, q: &BitString, x: &BitString) -> bool {
        if self.arena.graph.get(q).is_none_or(|a| a.x != *x) || compressible(&self.ubar, x, n) {
            return false;
        }
        let union = small_union(&self.cheap(q, k), n, k);
        !union
            .iter()
            .any(|s| s.len() + 1 < k && self.ubar.lookup(s, &[]) == Some(x))
    }

    fn recheck(&mut self, stage: u64) -> Result<(), GameError> {
        for b in 0..self.bunches.len() {
            let k = self.bunches[b].k;
            for n in 0..self.bunches[b].pairs.len() {
                let (q, x) = (
                    self.bunches[b].pairs[n].q.clone(),
                    self.bunches[b].pairs[n].x.clone(),
                );
                if !self.good(k, n, &q, &x) {
                    self.repair(b, n, stage)?;
                }
            }
        }
        Ok(())
    }

    fn repair(&mut self, b: usize, n: usize, stage: u64) -> Result<(), GameError> {
        let k = self.bunches[b].k;
        let used = self.bunches[b].next_q;
        if used >= 1u64 << k {
            return Err(GameError::QExhausted { k, used });
        }
        if k >= 4 && used >= needed_capacity(k)? {
            return Err(GameError::Invariant(format!(
                "k={k}: q consumption {used} reached the capacity bound"
            )));
        }
        if deficit_bound(k) > 0 && deficit_bound(k) as usize > 1 << log_ceil(k) {
            return Err(GameError::Invariant(format!(
                "k={k}: deficit bound exceeds 2^log k"
            )));
        }
        let q = BitString::from_u64(used, k);
        self.bunches[b].next_q += 1;
        let union = small_union(&self.cheap(&q, k), n, k);
        let (x, counts) = choose_th2_x(n, k, &self.ubar, &union)?;
        self.arena
            .graph
            .assign(q.clone(), x.clone(), stage, self.arena.list_budget)?;
        let old = std::mem::replace(
            &mut self.bunches[b].pairs[n],
            Pair {
                q: q.clone(),
                x: x.clone(),
            },
        );
        self.repairs.push(Th2Repair {
            k,
            n,
            stage,
            old_q: old.q,
            q,
            x,
            counts,
        });
        Ok(())
    }

    fn absorb(&mut self, e: &GraphEvent, from_phi: bool) {
        if from_phi {
            self.phibar
                .insert(e.index.clone(), e.args.clone(), e.output.clone(), e.stage);
            self.cheap_cache.clear();
        } else {
            self.ubar
                .insert(e.index.clone(), Vec::new(), e.output.clone(), e.stage);
        }
    }
}

fn drain_stage(
    dove: &mut Dovetailer,
    state: &mut State<'_>,
    from_phi: bool,
) -> Result<(), GameError> {
    loop {
        match dove.next_item() {
            Dovetail::StageComplete(_) => return Ok(()),
            Dovetail::Event(e) => {
                state.absorb(&e, from_phi);
                state.recheck(e.stage)?;
            }
        }
    }
}

pub fn run_th2(arena: &Arena, cfg: &Th2Config) -> Result<Th2Outcome, GameError> {
    let mut bunches = Vec::new();
    for k in 1..=cfg.kmax {
        let mut pairs = Vec::new();
        for n in 0..k.min(cfg.nmax + 1) {
            let q = BitString::from_u64(n as u64, k);
            let x = BitString::zeros(n);
            arena
                .graph
                .assign(q.clone(), x.clone(), 0, arena.list_budget)?;
            pairs.push(Pair { q, x });
        }
        let next_q = pairs.len() as u64;
        bunches.push(Bunch { k, pairs, next_q });
    }
    let d_max = (1..=cfg.kmax).map(deficit_bound).max().unwrap_or(0);
    let u_sched = Schedule {
        max_index_len: cfg.kmax.saturating_sub(2),
        max_arg_len: 0,
    };
    let phi_sched = Schedule {
        max_index_len: (d_max.max(1) - 1) as usize,
        max_arg_len: cfg.kmax,
    };
    let mut u_dove = Dovetailer::new(arena.target.clone(), u_sched);
    let phi: Arc<dyn Numbering> = arena.lab.phi.clone();
    let mut phi_dove = Dovetailer::new(phi, phi_sched);
    let mut state = State {
        arena,
        bunches,
        ubar: SubFunction::default(),
        phibar: SubFunction::default(),
        cheap_cache: BTreeMap::new(),
        repairs: Vec::new(),
    };
    for _ in 0..=cfg.stage_limit {
        drain_stage(&mut u_dove, &mut state, false)?;
        if d_max > 0 {
            drain_stage(&mut phi_dove, &mut state, true)?;
        }
    }

    let stage = cfg.stage_limit;
    let budget = Schedule::budget(stage);
    let mut witnesses = Vec::new();
    let mut good_at_end = Vec::new();
    let mut consumption = Vec::new();
    for b in 0..state.bunches.len() {
        let k = state.bunches[b].k;
        consumption.push((
            k,
            state.bunches[b].next_q,
            if k >= 4 {
                Some(needed_capacity(k)?)
            } else {
                None
            },
        ));
        for n in 0..state.bunches[b].pairs.len() {
            let (q, x) = (
                state.bunches[b].pairs[n].q.clone(),
                state.bunches[b].pairs[n].x.clone(),
            );
            good_at_end.push((k, n, state.good(k, n, &q, &x)));
            let union = small_union(&state.cheap(&q, k), n, k);
            let p = arena.prefix.concat(&q);
            witnesses.push(Witness {
                game: GameKind::Th2,
                machine: arena.target.label().to_string(),
                k,
                n: Some(n),
                q: q.clone(),
                p: p.clone(),
                x: x.clone(),
                spec: "ct-cheap".into(),
                list: union.iter().cloned().collect(),
                metrics: Metrics {
                    list_size: union.len(),
                    x_len: n,
                    p_len: p.len(),
                    c_list: None,
                    c_exact: state.ubar.least_index_for(&x).map(BitString::len),
                    epsilon: None,
                    budget: budget.0,
                    maxlen: Some(u_sched.max_index_len),
                },
                stage,
                budgets: Budgets {
                    stage_budget: budget.0,
                    list_budget: arena.list_budget.0,
                },
                constants: WitnessConstants {
                    log_rule: LOG_RULE.into(),
                    c_len: arena.prefix.len(),
                    complexity_floor: k - 1,
                },
            });
        }
    }
    let transcript = format!("{}{}", u_dove.transcript(), phi_dove.transcript());
    Ok(Th2Outcome {
        witnesses,
        repairs: state.repairs,
        good_at_end,
        consumption,
        stage,
        events: u_dove.events().len() + phi_dove.events().len(),
        transcript,
    })
}
