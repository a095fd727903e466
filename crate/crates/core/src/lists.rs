//! Total list functions `L(p)` and the log-size/complexity profile.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitString, BitsError};
use crate::bitvm::StepBudget;
use crate::complexity::{c_exact, c_list, decode_list, ComplexityTable};
use crate::numbering::{min_index_approx, Numbering};

pub use crate::complexity::ListValue;

/// Largest below-set exponent we are willing to materialise.
pub const MAX_BELOW: usize = 20;

/// How `BelowI` chooses its exponent `i` from `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IRule {
    Const(usize),
    /// `i = max(0, |p| + offset)`
    Length(i64),
}

impl IRule {
    pub fn apply(&self, p: &BitString) -> usize {
        match *self {
            IRule::Const(i) => i,
            IRule::Length(off) => (p.len() as i64 + off).max(0) as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ListSpec {
    /// `{p}`
    Singleton,
    /// `{p} ∪ {0,1}^{<i(p)}`
    BelowI(IRule),
    /// The list printed (as a list code) by `Φ_index` on `p`.
    ToyProgram { index: BitString },
    /// `L(p) ∪ {p}`
    Augmented(Box<ListSpec>),
    /// `{min_U(p)}` as approximated at `budget`.
    MinIndex { budget: u64 },
    /// `post ++ L(pre ++ p)` member-wise.
    Translated {
        inner: Box<ListSpec>,
        pre: BitString,
        post: BitString,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ListError {
    #[error("list function is not total: no halt on p={p} within {budget} steps")]
    NotTotal { p: String, budget: u64 },
    #[error("list program printed a malformed list code on p={0}")]
    BadCode(String),
    #[error("below-set exponent {0} exceeds the supported maximum {MAX_BELOW}")]
    TooLarge(usize),
    #[error("cannot parse list spec {0:?}: {1}")]
    Parse(String, String),
}

/// Machines a list function may consult.
#[derive(Clone, Copy)]
pub struct ListEnv<'a> {
    /// Standard machine whose programs the lists contain.
    pub target: &'a dyn Numbering,
    /// Unary numbering running `ToyProgram` lists.
    pub base: &'a dyn Numbering,
    pub list_budget: StepBudget,
}

impl ListSpec {
    pub fn augmented(self) -> ListSpec {
        match self {
            ListSpec::Singleton => ListSpec::Singleton,
            a @ ListSpec::Augmented(_) => a,
            other => ListSpec::Augmented(Box::new(other)),
        }
    }

    pub fn eval(&self, env: ListEnv<'_>, p: &BitString) -> Result<ListValue, ListError> {
        let mut out = ListValue::new();
        match self {
            ListSpec::Singleton => {
                out.insert(p.clone());
            }
            ListSpec::BelowI(rule) => {
                let i = rule.apply(p);
                if i > MAX_BELOW {
                    return Err(ListError::TooLarge(i));
                }
                out.insert(p.clone());
                if i > 0 {
                    out.extend(BitString::all_up_to(i - 1));
                }
            }
            ListSpec::ToyProgram { index } => {
                let res = env.base.eval_raw(index, p, env.list_budget);
                let code = res.output().ok_or_else(|| ListError::NotTotal {
                    p: p.token(),
                    budget: env.list_budget.0,
                })?;
                out = decode_list(code).map_err(|_| ListError::BadCode(p.token()))?;
            }
            ListSpec::Augmented(inner) => {
                out = inner.eval(env, p)?;
                out.insert(p.clone());
            }
            ListSpec::MinIndex { budget } => {
                out.insert(min_index_approx(env.target, p, StepBudget(*budget), 0));
            }
            ListSpec::Translated { inner, pre, post } => {
                out = inner
                    .eval(env, &pre.concat(p))?
                    .iter()
                    .map(|s| post.concat(s))
                    .collect();
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ListSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ListSpec::Singleton => f.write_str("singleton"),
            ListSpec::BelowI(IRule::Const(i)) => write!(f, "below:{i}"),
            ListSpec::BelowI(IRule::Length(o)) => write!(f, "below:len{o:+}"),
            ListSpec::ToyProgram { index } => write!(f, "toy:{}", index.token()),
            ListSpec::Augmented(inner) => write!(f, "aug({inner})"),
            ListSpec::MinIndex { budget } => write!(f, "min:{budget}"),
            ListSpec::Translated { inner, pre, post } => {
                write!(f, "tr({},{},{inner})", pre.token(), post.token())
            }
        }
    }
}

impl TryFrom<String> for ListSpec {
    type Error = ListError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ListSpec> for String {
    fn from(spec: ListSpec) -> String {
        spec.to_string()
    }
}

impl FromStr for ListSpec {
    type Err = ListError;

    /// Inverse of `Display`: `singleton`, `below:3`, `below:len+1`,
    /// `toy:BITS`, `aug(SPEC)`, `min:BUDGET`, `tr(PRE,POST,SPEC)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ListError::Parse(s.to_string(), why.to_string());
        let bits = |t: &str| BitString::parse_token(t).map_err(|e: BitsError| bad(&e.to_string()));
        let s = s.trim();
        if s == "singleton" {
            return Ok(ListSpec::Singleton);
        }
        if let Some(rest) = s.strip_prefix("below:") {
            let rule = match rest.strip_prefix("len") {
                Some("") => IRule::Length(0),
                Some(off) => IRule::Length(off.parse().map_err(|_| bad("bad length offset"))?),
                None => IRule::Const(rest.parse().map_err(|_| bad("bad exponent"))?),
            };
            return Ok(ListSpec::BelowI(rule));
        }
        if let Some(rest) = s.strip_prefix("toy:") {
            return Ok(ListSpec::ToyProgram { index: bits(rest)? });
        }
        if let Some(rest) = s.strip_prefix("min:") {
            return Ok(ListSpec::MinIndex {
                budget: rest.parse().map_err(|_| bad("bad budget"))?,
            });
        }
        if let Some(inner) = s.strip_prefix("aug(").and_then(|r| r.strip_suffix(')')) {
            return Ok(ListSpec::Augmented(Box::new(inner.parse()?)));
        }
        if let Some(body) = s.strip_prefix("tr(").and_then(|r| r.strip_suffix(')')) {
            let mut parts = body.splitn(3, ',');
            let (Some(pre), Some(post), Some(inner)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected tr(PRE,POST,SPEC)"));
            };
            return Ok(ListSpec::Translated {
                inner: Box::new(inner.parse()?),
                pre: bits(pre)?,
                post: bits(post)?,
            });
        }
        Err(bad("unknown list kind"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub i: usize,
    /// `log₂ #L_i(p)`, exact because the sizes are powers of two.
    pub logsize: f64,
    pub j: Option<usize>,
    pub p: BitString,
    pub x: BitString,
    pub budget: u64,
    pub maxlen: usize,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("program {0} does not halt within {1} steps")]
    Undefined(String, u64),
    #[error(transparent)]
    List(#[from] ListError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Points `(log #L_i(p), C_{U,L_i(p)}(x))` for `i = 0..=|p|` with
/// `L_i(p) = {p} ∪ {0,1}^{<i}`.
pub fn profile_li(
    u: &dyn Numbering,
    p: &BitString,
    budget: StepBudget,
) -> Result<Vec<ProfilePoint>, ProfileError> {
    let x = u
        .eval_raw(p, &BitString::new(), budget)
        .output()
        .cloned()
        .ok_or_else(|| ProfileError::Undefined(p.token(), budget.0))?;
    let env = ListEnv {
        target: u,
        base: u,
        list_budget: budget,
    };
    (0..=p.len())
        .map(|i| {
            let list = ListSpec::BelowI(IRule::Const(i)).eval(env, p)?;
            Ok(ProfilePoint {
                i,
                logsize: (list.len() as f64).log2(),
                j: c_list(u, &list, &x, budget).value,
                p: p.clone(),
                x: x.clone(),
                budget: budget.0,
                maxlen: p.len(),
            })
        })
        .collect()
}

pub const PROFILE_HEADER: &str = "i,logsize,j,p,x,budget,maxlen";

pub fn write_profile_csv(points: &[ProfilePoint], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{PROFILE_HEADER}")?;
    for pt in points {
        let j = pt.j.map_or_else(|| "none".to_string(), |j| j.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            pt.i,
            pt.logsize,
            j,
            pt.p.token(),
            pt.x.token(),
            pt.budget,
            pt.maxlen
        )?;
    }
    Ok(())
}

/// Deviations of a profile from the two-level staircase predicted by
/// `C_U(x)`: `j = C_U(x)` for `i > C_U(x)`, `j = |p|` otherwise. Uses
/// `table` when given, otherwise scans up to `|p|`.
pub fn staircase_deviations(
    u: &dyn Numbering,
    points: &[ProfilePoint],
    table: Option<&ComplexityTable>,
) -> Vec<String> {
    let mut out = Vec::new();
    for pt in points {
        let c = match table {
            Some(t) => t.query(&pt.x).value,
            None => c_exact(u, &pt.x, pt.maxlen, StepBudget(pt.budget)).value,
        };
        let Some(c) = c else {
            out.push(format!("i={}: no program for x within bounds", pt.i));
            continue;
        };
        let want = if pt.i > c { c } else { pt.p.len() };
        if pt.j != Some(want) {
            out.push(format!("i={}: j={:?}, expected {want}", pt.i, pt.j));
        }
        if pt.logsize != pt.i as f64 {
            out.push(format!("i={}: logsize {} differs from i", pt.i, pt.logsize));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;
    use crate::numbering::Lab;

    fn env(lab: &Lab) -> ListEnv<'_> {
        ListEnv {
            target: &lab.u,
            base: lab.phi.as_ref(),
            list_budget: StepBudget(256),
        }
    }

    #[test]
    fn builtin_lists() {
        let lab = Lab::new();
        let e = env(&lab);
        let p = bits("0101");
        assert_eq!(ListSpec::Singleton.eval(e, &bits("01")).unwrap().len(), 1);
        let l = ListSpec::BelowI(IRule::Const(2)).eval(e, &p).unwrap();
        assert_eq!(
            l,
            [bits("0101"), bits(""), bits("0"), bits("1")]
                .into_iter()
                .collect()
        );
        assert_eq!(
            ListSpec::BelowI(IRule::Const(0)).eval(e, &p).unwrap().len(),
            1
        );
    }

    #[test]
    fn cardinality_law() {
        let lab = Lab::new();
        for i in 0..=8 {
            for p in [BitString::zeros(i), BitString::from_u64(5, i + 3)] {
                assert_eq!(
                    ListSpec::BelowI(IRule::Const(i))
                        .eval(env(&lab), &p)
                        .unwrap()
                        .len(),
                    1 << i
                );
            }
        }
    }

    #[test]
    fn toy_program_list_and_totality() {
        let lab = Lab::new();
        // prints 0^{|p|} 1: the code of {ε} on ε, malformed otherwise
        let src = "l: read in\njeof e\nout 0\njmp l\ne: out 1\nhalt";
        let zeros_then_one = crate::numbering::fixtures::bits_of(src);
        let spec = ListSpec::ToyProgram {
            index: zeros_then_one,
        };
        assert!(spec.eval(env(&lab), &bits("")).unwrap().contains(&bits("")));
        assert!(matches!(
            spec.eval(env(&lab), &bits("01")),
            Err(ListError::BadCode(_))
        ));
        let spin = ListSpec::ToyProgram {
            index: crate::numbering::fixtures::bits_of("out 1\njmp -1"),
        };
        assert!(matches!(
            spin.eval(env(&lab), &bits("0")),
            Err(ListError::NotTotal { .. })
        ));
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "singleton",
            "below:3",
            "below:len+1",
            "below:len-2",
            "toy:0010",
            "aug(below:2)",
            "min:900",
            "tr(011,0,aug(singleton))",
        ] {
            let spec: ListSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("nope".parse::<ListSpec>().is_err());
    }

    #[test]
    fn translated_list() {
        let lab = Lab::new();
        let spec: ListSpec = "tr(11,0,singleton)".parse().unwrap();
        let l = spec.eval(env(&lab), &bits("01")).unwrap();
        assert_eq!(l, [bits("01101")].into_iter().collect());
    }

    #[test]
    fn profile_of_small_program() {
        let lab = Lab::new();
        let p = bits("0111");
        let pts = profile_li(&lab.u, &p, StepBudget(1000)).unwrap();
        assert_eq!(
            pts.iter().map(|pt| pt.j.unwrap()).collect::<Vec<_>>(),
            vec![4, 4, 4, 4, 3]
        );
        assert!(staircase_deviations(&lab.u, &pts, None).is_empty());
        let mut csv = Vec::new();
        write_profile_csv(&pts, &mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("i,logsize,j,p,x,budget,maxlen\n0,0,4,0111,1,1000,4\n"));
    }
}
