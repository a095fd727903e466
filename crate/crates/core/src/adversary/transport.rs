//! Moving witnesses from `V` back to `U`, and the minimal-index consequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Arena, Backend, GameError, Witness, WitnessConstants};
use crate::bits::BitString;
use crate::bitvm::StepBudget;
use crate::complexity::{c_list, ListValue};
use crate::lists::{ListError, ListSpec};
use crate::numbering::{min_index_approx, Numbering};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport needs the two-part machine V")]
    NotTeutsch,
    #[error("V program {0} does not start with the assignment bit")]
    NotAssigned(String),
    #[error("list on U has {u} members but its image on V has {v}")]
    Grew { u: usize, v: usize },
    #[error("U(p') = {got:?} differs from V(p) = {want}")]
    Output { got: Option<String>, want: String },
    #[error(transparent)]
    List(#[from] ListError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// The list spec a game on `V` must use so that its witnesses transport to
/// `U` with lists given by `spec_u`: `L_V(p) = { 0s : s ∈ L_U(v̂ p) }`.
pub fn v_side_spec(arena: &Arena, spec_u: &ListSpec) -> Result<ListSpec, TransportError> {
    let v = arena.v_index.as_ref().ok_or(TransportError::NotTeutsch)?;
    Ok(ListSpec::Translated {
        inner: Box::new(spec_u.clone()),
        pre: v.hat(),
        post: BitString::from_bits(vec![false]),
    })
}

/// Rewrites a witness `p = 1q` for `V` as `p' = v̂ p` for `U`, with
/// `k' = k - 1` and list `L_U(p')`.
pub fn transport_witness(
    arena: &Arena,
    w: &Witness,
    spec_u: &ListSpec,
    budget: StepBudget,
) -> Result<Witness, TransportError> {
    if arena.backend != Backend::Teutsch {
        return Err(TransportError::NotTeutsch);
    }
    let v = arena.v_index.as_ref().ok_or(TransportError::NotTeutsch)?;
    if w.p.get(0) != Some(true) {
        return Err(TransportError::NotAssigned(w.p.token()));
    }
    let p = v.hat().concat(&w.p);
    let u = &arena.lab.u;
    let got = u.eval_raw(&p, &BitString::new(), budget);
    if got.output() != Some(&w.x) {
        return Err(TransportError::Output {
            got: got.output().map(BitString::token),
            want: w.x.token(),
        });
    }
    let list: ListValue = spec_u.eval(arena.u_list_env(), &p)?;
    if w.list.len() > list.len() {
        return Err(TransportError::Grew {
            u: list.len(),
            v: w.list.len(),
        });
    }
    let k = w.k - 1;
    let cl = c_list(u, &list, &w.x, budget);
    let mut out = w.clone();
    out.machine = u.label().to_string();
    out.k = k;
    out.p = p.clone();
    out.spec = spec_u.to_string();
    out.list = list.iter().cloned().collect();
    out.metrics.list_size = list.len();
    out.metrics.p_len = p.len();
    out.metrics.c_list = cl.value;
    out.metrics.epsilon = cl.value.map(|c| c as i64 - w.x.len() as i64);
    out.metrics.budget = budget.0;
    out.constants = WitnessConstants {
        log_rule: w.constants.log_rule.clone(),
        c_len: p.len() - k,
        complexity_floor: k,
    };
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinlistStatus {
    /// The list holds the least equivalent index and is large enough.
    Holds,
    /// The list holds the least equivalent index but is too small.
    Violated,
    /// The least equivalent index is not listed.
    PremiseUnmet,
    /// `p` does not halt within the budget.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinlistReport {
    /// Budget-relative least index equivalent to `p`.
    pub min_index: BitString,
    pub list_size: usize,
    /// `|p| - c`; the list must hold at least `2^exponent` members.
    pub exponent: i64,
    pub status: MinlistStatus,
}

/// If `L` contains the least index equivalent to `p`, then `L` has at
/// least `2^{|p| - c}` members.
pub fn minlist_consequence(
    u: &dyn Numbering,
    p: &BitString,
    list: &ListValue,
    budget: StepBudget,
    c: usize,
) -> MinlistReport {
    let exponent = p.len() as i64 - c as i64;
    let halts = u.eval_raw(p, &BitString::new(), budget).halted();
    let min_index = min_index_approx(u, p, budget, 0);
    let big_enough = exponent < 0 || (exponent < 64 && list.len() as u128 >= 1u128 << exponent);
    let status = if !halts {
        MinlistStatus::Inconclusive
    } else if !list.contains(&min_index) {
        MinlistStatus::PremiseUnmet
    } else if big_enough {
        MinlistStatus::Holds
    } else {
        MinlistStatus::Violated
    };
    MinlistReport {
        min_index,
        list_size: list.len(),
        exponent,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::complexity::print_literal;
    use crate::lists::IRule;
    use crate::numbering::Lab;

    #[test]
    fn minimal_program_in_a_full_list_holds() {
        let lab = Lab::new();
        let p = print_literal(&bits("1"));
        let list: ListValue = BitString::all_up_to(p.len()).collect();
        let rep = minlist_consequence(&lab.u, &p, &list, StepBudget(200), 4);
        assert_eq!(rep.status, MinlistStatus::Holds);
        assert!(rep.min_index <= p);
    }

    #[test]
    fn singleton_of_a_long_program_is_premise_unmet_or_violated() {
        let lab = Lab::new();
        let p = print_literal(&bits("0"));
        let list: ListValue = [p.clone()].into_iter().collect();
        let rep = minlist_consequence(&lab.u, &p, &list, StepBudget(200), 4);
        // C_U("0") = 5 < |p|, so p is not minimal
        assert_eq!(rep.status, MinlistStatus::PremiseUnmet);
        assert_eq!(rep.min_index.len(), 5);
    }

    #[test]
    fn transport_needs_teutsch_backend() {
        let arena = Arena::new(Backend::Fixpoint, StepBudget(64)).unwrap();
        let spec = ListSpec::BelowI(IRule::Const(2));
        assert!(matches!(
            v_side_spec(&arena, &spec),
            Err(TransportError::NotTeutsch)
        ));
    }

    #[test]
    fn crafted_minimal_index_list_fails_verification() {
        use crate::adversary::{run_th1, verify_witness, Th1Config};
        use crate::complexity::ComplexityTable;
        let arena = Arena::new(Backend::Teutsch, StepBudget(256)).unwrap();
        let spec = ListSpec::MinIndex { budget: 10_000 };
        let out = run_th1(
            &arena,
            &Th1Config {
                kmax: 4,
                stage_limit: 16,
                spec: spec.clone(),
            },
        )
        .unwrap();
        let table = ComplexityTable::build(arena.target.as_ref(), 12, StepBudget(4096));
        let failed: Vec<_> = out
            .witnesses
            .iter()
            .map(|w| verify_witness(arena.verify_env(), w, &spec, 64, &table))
            .filter(|r| !r.passed())
            .collect();
        assert!(!failed.is_empty());
        let names: Vec<Vec<&str>> = failed.iter().map(|r| r.failures()).collect();
        // the list consults V, so it also drifts as the graph grows
        assert!(names.iter().all(|f| f.contains(&"list")), "{names:?}");
        assert!(names.iter().any(|f| f.contains(&"complexity")), "{names:?}");
    }
}
