//! Diagonalization games against total list functions, witness
//! verification and transport between machines.

mod th1;
mod th2;
mod transport;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::bitvm::{Exhausted, Meter, Metered, Oracle, SlotError, StepBudget};
use crate::complexity::{literal_overhead, print_literal};
use crate::lists::{ListEnv, ListError};
use crate::numbering::{fixpoint, Lab, Numbering};

pub use th1::{augment_and_rerun, goodness_th1, run_th1, RepairRecord, Th1Config, Th1Outcome};
pub use th2::{
    cheap_lists, choose_th2_x, deficit_bound, needed_capacity, run_th2, CheapList, Th2Config,
    Th2Outcome, Th2Repair, Th2RepairCounts,
};
pub use transport::{
    minlist_consequence, transport_witness, v_side_spec, MinlistReport, MinlistStatus,
    TransportError,
};
pub use verify::{verify_th2, verify_witness, Clause, VerifyEnv, VerifyReport};

/// `⌈log₂ k⌉` for `k >= 1`.
pub fn log_ceil(k: usize) -> usize {
    assert!(k >= 1, "log of zero");
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

pub const LOG_RULE: &str = "ceil(log2 k)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Th1,
    Th1t,
    Th2,
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameKind::Th1 => "th1",
            GameKind::Th1t => "th1t",
            GameKind::Th2 => "th2",
        })
    }
}

impl FromStr for GameKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "th1" => Ok(GameKind::Th1),
            "th1t" => Ok(GameKind::Th1t),
            "th2" => Ok(GameKind::Th2),
            other => Err(format!(
                "unknown game {other:?} (expected th1, th1t or th2)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("ran out of fresh q of length {k} after {used} uses")]
    QExhausted { k: usize, used: u64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    List(#[from] ListError),
    #[error(transparent)]
    Slot(#[from] SlotError),
}

/// An adversarial assignment `V(q) = x`, enumerated at `stage`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub x: BitString,
    pub stage: u64,
    /// Steps charged when `V(q)` is looked up.
    pub cost: u64,
}

/// Lookup cost of an assignment made at `stage`. It always exceeds the list
/// budget, so list functions never observe the game's own assignments.
pub fn assignment_cost(stage: u64, list_budget: StepBudget) -> u64 {
    (stage * stage).max(list_budget.0) + 1
}

/// The graph of `V`, shared between the game and the oracle serving it.
#[derive(Clone, Debug, Default)]
pub struct VGraph(Arc<RwLock<BTreeMap<BitString, Assignment>>>);

impl VGraph {
    pub fn assign(
        &self,
        q: BitString,
        x: BitString,
        stage: u64,
        list_budget: StepBudget,
    ) -> Result<(), GameError> {
        let mut g = self.0.write().expect("graph lock");
        if g.contains_key(&q) {
            return Err(GameError::Invariant(format!(
                "q={} assigned twice",
                q.token()
            )));
        }
        g.insert(
            q,
            Assignment {
                x,
                stage,
                cost: assignment_cost(stage, list_budget),
            },
        );
        Ok(())
    }

    pub fn get(&self, q: &BitString) -> Option<Assignment> {
        self.0.read().expect("graph lock").get(q).cloned()
    }

    pub fn len(&self) -> usize {
        self.0.read().expect("graph lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn exec(&self, meter: &mut Meter, q: &BitString) -> Metered<BitString> {
        let a = self.get(q).ok_or(Exhausted)?;
        meter.charge(a.cost)?;
        Ok(a.x)
    }

    fn oracle(&self) -> Oracle {
        let graph = self.clone();
        Oracle::new("V", 0, move |_, meter, q| graph.exec(meter, q))
    }
}

/// `V(0q) = U(q)` (one extra step), `V(1q)` = adversarial assignment.
pub struct TeutschNumbering {
    u: Arc<dyn Numbering>,
    graph: VGraph,
}

impl Numbering for TeutschNumbering {
    fn arity(&self) -> usize {
        0
    }

    fn label(&self) -> &str {
        "V"
    }

    fn exec(&self, meter: &mut Meter, index: &BitString, _input: &BitString) -> Metered<BitString> {
        meter.charge(1)?;
        match index.get(0) {
            None => Err(Exhausted),
            Some(false) => self.u.exec(meter, &index.suffix(1), &BitString::new()),
            Some(true) => self.graph.exec(meter, &index.suffix(1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// `V = Φ_r` with `r` an extensional fixed point; witnesses are `r̂ q`.
    Fixpoint,
    /// `V` is itself a standard machine; witnesses are `1q`.
    Teutsch,
}

/// Machines and state one game runs against.
#[derive(Clone)]
pub struct Arena {
    pub lab: Lab,
    pub backend: Backend,
    pub graph: VGraph,
    /// The machine whose programs the lists contain (U or V).
    pub target: Arc<dyn Numbering>,
    /// Prepended to `q` to form the witness program.
    pub prefix: BitString,
    /// Φ-index with `Φ(v, w) = V(w)` (Teutsch backend only).
    pub v_index: Option<BitString>,
    pub list_budget: StepBudget,
}

impl Arena {
    pub fn new(backend: Backend, list_budget: StepBudget) -> Result<Self, GameError> {
        let lab = Lab::new();
        let graph = VGraph::default();
        match backend {
            Backend::Fixpoint => {
                let machine = lab.machine.clone();
                let mut reg_err = None;
                let r = fixpoint(&lab.machine, |_r| match machine.register(graph.oracle()) {
                    Ok(v) => v,
                    Err(e) => {
                        reg_err = Some(e);
                        BitString::new()
                    }
                })?;
                if let Some(e) = reg_err {
                    return Err(e.into());
                }
                let target: Arc<dyn Numbering> = Arc::new(lab.u.clone());
                Ok(Arena {
                    prefix: r.hat(),
                    lab,
                    backend,
                    graph,
                    target,
                    v_index: None,
                    list_budget,
                })
            }
            Backend::Teutsch => {
                let v = Arc::new(TeutschNumbering {
                    u: Arc::new(lab.u.clone()),
                    graph: graph.clone(),
                });
                let served = v.clone();
                let v_index =
                    lab.register_oracle(Oracle::new("V-as-Phi", 0, move |_, meter, w| {
                        served.exec(meter, w, &BitString::new())
                    }))?;
                Ok(Arena {
                    prefix: BitString::from_bits(vec![true]),
                    lab,
                    backend,
                    graph,
                    target: v,
                    v_index: Some(v_index),
                    list_budget,
                })
            }
        }
    }

    pub fn list_env(&self) -> ListEnv<'_> {
        ListEnv {
            target: self.target.as_ref(),
            base: self.lab.phi.as_ref(),
            list_budget: self.list_budget,
        }
    }

    /// Environment for lists over the underlying standard machine U.
    pub fn u_list_env(&self) -> ListEnv<'_> {
        ListEnv {
            target: &self.lab.u,
            base: self.lab.phi.as_ref(),
            list_budget: self.list_budget,
        }
    }

    /// A target-machine program printing `x`.
    pub fn literal(&self, x: &BitString) -> BitString {
        match self.backend {
            Backend::Fixpoint => print_literal(x),
            Backend::Teutsch => BitString::from_bits(vec![false]).concat(&print_literal(x)),
        }
    }

    /// `|literal(x)| - |x|` on the target machine.
    pub fn c_id(&self) -> usize {
        match self.backend {
            Backend::Fixpoint => literal_overhead(),
            Backend::Teutsch => literal_overhead() + 1,
        }
    }

    pub fn verify_env(&self) -> VerifyEnv<'_> {
        VerifyEnv {
            target: self.target.as_ref(),
            lists: self.list_env(),
            c_id: self.c_id(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub list_size: usize,
    pub x_len: usize,
    pub p_len: usize,
    pub c_list: Option<usize>,
    /// Stage-relative `C_Ū(x)`: least enumerated program for `x`.
    pub c_exact: Option<usize>,
    pub epsilon: Option<i64>,
    pub budget: u64,
    pub maxlen: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub stage_budget: u64,
    pub list_budget: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessConstants {
    pub log_rule: String,
    /// `|p| - k`, uniform over the witnesses of one construction.
    pub c_len: usize,
    /// Lower bound the game guarantees for `C_{U,L}(x)`.
    pub complexity_floor: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub game: GameKind,
    pub machine: String,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    pub q: BitString,
    pub p: BitString,
    pub x: BitString,
    pub spec: String,
    pub list: Vec<BitString>,
    pub metrics: Metrics,
    pub stage: u64,
    pub budgets: Budgets,
    pub constants: WitnessConstants,
}
