//! Re-verification of witnesses from scratch at a later stage.

use serde::{Deserialize, Serialize};

use super::th2::is_small;
use super::{deficit_bound, GameKind, Witness};
use crate::bits::BitString;
use crate::complexity::{
    c_list, decode_list_canonical, total_on_length, ComplexityTable, ListValue,
};
use crate::enumeration::Schedule;
use crate::lists::{ListEnv, ListSpec};
use crate::numbering::{prepend_input, Numbering};

/// Machines a verification runs against.
#[derive(Clone, Copy)]
pub struct VerifyEnv<'a> {
    /// Machine the witness is a program of.
    pub target: &'a dyn Numbering,
    pub lists: ListEnv<'a>,
    /// Literal-print overhead on `target`.
    pub c_id: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub game: GameKind,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    pub p: BitString,
    pub x: BitString,
    pub stage: u64,
    pub budget: u64,
    pub maxlen: usize,
    pub clauses: Vec<Clause>,
    /// `C_U(x) + |p| - ⌊log₂#L⌋ - C_{U,L}(x)`, when all terms are defined.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eq2_deficit: Option<i64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.clauses
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }

    fn push(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.clauses.push(Clause {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }
}

/// `a >= 2^e - 2` over the integers.
fn at_least_pow_minus_two(a: usize, e: i64) -> bool {
    if e <= 1 {
        return true;
    }
    e < 120 && (a as u128) + 2 >= 1u128 << e
}

fn floor_log2(n: usize) -> Option<i64> {
    (n > 0).then(|| (usize::BITS - 1 - n.leading_zeros()) as i64)
}

fn header(w: &Witness, verify_stage: u64, table: &ComplexityTable) -> VerifyReport {
    VerifyReport {
        game: w.game,
        k: w.k,
        n: w.n,
        p: w.p.clone(),
        x: w.x.clone(),
        stage: verify_stage,
        budget: Schedule::budget(verify_stage).0,
        maxlen: table.maxlen(),
        clauses: Vec::new(),
        eq2_deficit: None,
    }
}

fn common_clauses(rep: &mut VerifyReport, env: VerifyEnv<'_>, w: &Witness, verify_stage: u64) {
    rep.push(
        "stage",
        verify_stage > w.stage,
        format!(
            "verified at stage {verify_stage}, found at stage {}",
            w.stage
        ),
    );
    let budget = Schedule::budget(verify_stage);
    let out = env.target.eval_raw(&w.p, &BitString::new(), budget);
    rep.push(
        "output",
        out.output() == Some(&w.x),
        format!("{}(p) = {out}", env.target.label()),
    );
    let (k, len, c) = (w.k, w.p.len(), w.constants.c_len);
    rep.push(
        "length",
        k <= len && len <= k + c,
        format!("k={k} <= |p|={len} <= k+{c}"),
    );
}

/// Recomputes every single-pair clause for `w` against `spec` at
/// `verify_stage` (budget `verify_stage²`).
pub fn verify_witness(
    env: VerifyEnv<'_>,
    w: &Witness,
    spec: &ListSpec,
    verify_stage: u64,
    table: &ComplexityTable,
) -> VerifyReport {
    let mut rep = header(w, verify_stage, table);
    common_clauses(&mut rep, env, w, verify_stage);
    let budget = Schedule::budget(verify_stage);
    let list = match spec.eval(env.lists, &w.p) {
        Ok(l) => l,
        Err(e) => {
            rep.push("list", false, e.to_string());
            return rep;
        }
    };
    let recorded: ListValue = w.list.iter().cloned().collect();
    rep.push(
        "list",
        recorded == list,
        format!("#L(p) = {} recomputed with {spec}", list.len()),
    );

    let (x_len, p_len, c) = (w.x.len() as i64, w.p.len() as i64, w.constants.c_len as i64);
    rep.push(
        "size",
        at_least_pow_minus_two(list.len(), x_len),
        format!("#L = {} vs 2^{x_len} - 2", list.len()),
    );
    let cl = c_list(env.target, &list, &w.x, budget);
    let floor = w.constants.complexity_floor as i64;
    rep.push(
        "complexity",
        cl.at_least(floor),
        format!("C_(U,L)(x) = {:?} vs {floor}", cl.value),
    );

    match cl.value {
        Some(v) => {
            let eps = v as i64 - x_len;
            let e = p_len - eps - c;
            let pass = at_least_pow_minus_two(list.len(), e) && x_len >= e;
            rep.push(
                "corollary",
                pass,
                format!(
                    "eps = {eps}; #L = {} and |x| = {x_len} vs exponent {e}",
                    list.len()
                ),
            );
        }
        None => rep.push("corollary", true, "vacuous: no listed program for x"),
    }

    let cx = table.query(&w.x);
    match (cl.value, cx.value, floor_log2(list.len())) {
        (Some(v), Some(cu), Some(lg)) => {
            let deficit = cu as i64 + p_len - lg - v as i64;
            let bound = env.c_id as i64 + c + 1;
            rep.eq2_deficit = Some(deficit);
            rep.push(
                "eq2",
                deficit <= bound,
                format!("deficit {deficit} vs bound {bound} (C_U(x) = {cu})"),
            );
        }
        (None, _, _) => rep.push("eq2", true, "vacuous: no listed program for x"),
        (_, None, _) => rep.push(
            "eq2",
            false,
            format!("inconclusive: C_U(x) exceeds maxlen {}", table.maxlen()),
        ),
        (_, _, None) => rep.push("eq2", true, "vacuous: empty list"),
    }
    rep
}

/// Clauses of the bunch game for one `(k, n)` witness. `v_prefix` is the
/// prefix turning `q` into `p`.
pub fn verify_th2(
    env: VerifyEnv<'_>,
    w: &Witness,
    verify_stage: u64,
    table: &ComplexityTable,
) -> VerifyReport {
    let mut rep = header(w, verify_stage, table);
    common_clauses(&mut rep, env, w, verify_stage);
    let budget = Schedule::budget(verify_stage);
    let n = w.n.unwrap_or(w.x.len());
    let k = w.k;
    let cx = table.query(&w.x);
    let incompressible =
        cx.at_least(n as i64 - 1) && (cx.value.is_some() || table.maxlen() + 2 >= n);
    rep.push(
        "incompressible",
        incompressible,
        format!("C_U(x) = {:?} vs {}", cx.value, n as i64 - 1),
    );

    let phi = env.lists.base;
    let d = deficit_bound(k);
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut seen: Vec<ListValue> = Vec::new();
    for t in BitString::all_up_to(d.max(0) as usize).filter(|t| (t.len() as i64) < d) {
        if !total_on_length(phi, &t, k, budget) {
            continue;
        }
        let Some(list) = phi
            .eval_raw(&t, &w.q, budget)
            .output()
            .and_then(decode_list_canonical)
        else {
            continue;
        };
        if seen.contains(&list) {
            continue;
        }
        seen.push(list.clone());
        if !is_small(list.len(), t.len(), n, k) {
            continue;
        }
        checked += 1;
        let cl = c_list(env.target, &list, &w.x, budget);
        if !cl.at_least(k as i64 - 1) {
            bad.push(t.token());
        }
    }
    rep.push(
        "cheap-lists",
        bad.is_empty(),
        format!("{checked} small lists with CT < {d}; violations by {bad:?}"),
    );

    // Φ_t applied to p equals Φ_{t'} applied to q for the prefix stub t'
    let prefix = w.p.slice(0, w.p.len() - w.q.len());
    let mut overhead = 0;
    let mut mismatches = 0;
    for t in BitString::all_up_to(3) {
        let t2 = prepend_input(&prefix, &t);
        overhead = overhead.max(t2.len() - t.len());
        if phi.eval_raw(&t2, &w.q, budget).output() != phi.eval_raw(&t, &w.p, budget).output() {
            mismatches += 1;
        }
    }
    rep.push(
        "ct-transport",
        mismatches == 0,
        format!(
            "CT(L|q) <= CT(L|p) + {overhead}; {mismatches} mismatches on programs up to length 3"
        ),
    );
    rep
}
