//! Numberings over the toy machine: the base numbering Φ, the prefix-coded
//! standard machine U, parameterisation, fixed points and translators.

use std::fmt;
use std::sync::Arc;

use crate::bits::{tuple_encode, BitString};
use crate::bitvm::{
    assemble, EvalMode, Exhausted, Instr, Machine, Meter, Metered, Oracle, Outcome, Reg, SlotError,
    StepBudget, ToyProgram,
};

/// A partial computable function `φ(p, x1..xm)` indexed by bit strings.
pub trait Numbering: Send + Sync {
    /// Number of arguments after the index.
    fn arity(&self) -> usize;

    fn label(&self) -> &str;

    /// Evaluates `index` on the tuple-encoded arguments.
    fn exec(&self, meter: &mut Meter, index: &BitString, input: &BitString) -> Metered<BitString>;

    fn eval(&self, index: &BitString, args: &[BitString], budget: StepBudget) -> Outcome {
        assert_eq!(
            args.len(),
            self.arity(),
            "{}: wrong number of arguments",
            self.label()
        );
        self.eval_raw(index, &tuple_encode(args), budget)
    }

    fn eval_raw(&self, index: &BitString, input: &BitString, budget: StepBudget) -> Outcome {
        let mut meter = Meter::new(budget.0);
        match self.exec(&mut meter, index, input) {
            Ok(output) => Outcome::Halted {
                output,
                steps: meter.used(),
            },
            Err(Exhausted) => Outcome::BudgetExceeded,
        }
    }
}

/// `Φ`: every bit string is decoded as a toy program and run on its input.
#[derive(Clone)]
pub struct BaseNumbering {
    machine: Arc<Machine>,
    arity: usize,
    label: String,
}

impl BaseNumbering {
    pub fn new(machine: Arc<Machine>, arity: usize) -> Self {
        BaseNumbering {
            machine,
            arity,
            label: format!("Phi/{arity}"),
        }
    }

    pub fn machine(&self) -> &Arc<Machine> {
        &self.machine
    }
}

impl Numbering for BaseNumbering {
    fn arity(&self) -> usize {
        self.arity
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn exec(&self, meter: &mut Meter, index: &BitString, input: &BitString) -> Metered<BitString> {
        self.machine.exec_bits(meter, index, input)
    }
}

/// `U(p̂ q, x..) = Φ(p, q, x..)`. Parsing the prefix costs one step; an
/// unparseable index is nowhere defined.
#[derive(Clone)]
pub struct StandardMachine {
    base: Arc<dyn Numbering>,
    label: String,
}

/// Steps charged for splitting `p̂ q`.
pub const PARSE_STEPS: u64 = 1;

impl StandardMachine {
    pub fn over(base: Arc<dyn Numbering>) -> Self {
        assert!(
            base.arity() >= 1,
            "standard machine needs a base of arity >= 1"
        );
        let label = if base.arity() == 1 {
            "U".to_string()
        } else {
            format!("U/{}", base.arity() - 1)
        };
        StandardMachine { base, label }
    }

    /// Runs a program of the arity-0 machine.
    pub fn run(&self, program: &BitString, budget: StepBudget) -> Outcome {
        self.eval_raw(program, &BitString::new(), budget)
    }

    /// Hat-prefix translator from `Φ_p` into this machine: `q ↦ p̂ q`.
    pub fn translator_from(&self, p: &BitString) -> Translator {
        Translator::prefix(format!("{}-from-{}", self.label, p.token()), p.hat())
    }
}

impl Numbering for StandardMachine {
    fn arity(&self) -> usize {
        self.base.arity() - 1
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn exec(&self, meter: &mut Meter, index: &BitString, input: &BitString) -> Metered<BitString> {
        meter.charge(PARSE_STEPS)?;
        let (p, q) = index.split_hat().map_err(|_| Exhausted)?;
        let inner = if self.arity() == 0 {
            q
        } else {
            q.hat().concat(input)
        };
        self.base.exec(meter, &p, &inner)
    }
}

/// A total transform between index sets with a measured additive bound
/// `|map(p)| <= |p| + bound_c`.
#[derive(Clone)]
pub struct Translator {
    pub label: String,
    pub map: Arc<dyn Fn(&BitString) -> BitString + Send + Sync>,
    pub bound_c: usize,
    /// Toy program computing `map`, when one is known.
    pub toy_witness: Option<ToyProgram>,
}

impl fmt::Debug for Translator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Translator({}, +{})", self.label, self.bound_c)
    }
}

impl Translator {
    pub fn identity() -> Self {
        Translator {
            label: "id".into(),
            map: Arc::new(|p: &BitString| p.clone()),
            bound_c: 0,
            toy_witness: Some(assemble("mov out").expect("fixture")),
        }
    }

    /// `p ↦ prefix ++ p`.
    pub fn prefix(label: impl Into<String>, prefix: BitString) -> Self {
        let bound_c = prefix.len();
        let lit = ToyProgram::from_instrs(vec![
            Instr::Lit {
                target: Reg::Out,
                hat: false,
                bits: prefix.clone(),
            },
            Instr::Mov(Reg::Out),
        ]);
        Translator {
            label: label.into(),
            map: Arc::new(move |p: &BitString| prefix.concat(p)),
            bound_c,
            toy_witness: Some(lit),
        }
    }

    pub fn apply(&self, p: &BitString) -> BitString {
        (self.map)(p)
    }

    /// Largest observed `|map(p)| - |p|` over `samples` (0 if never positive).
    pub fn measure<'a>(&self, samples: impl IntoIterator<Item = &'a BitString>) -> usize {
        samples
            .into_iter()
            .map(|p| self.apply(p).len().saturating_sub(p.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn within_bound(&self, p: &BitString) -> bool {
        self.apply(p).len() <= p.len() + self.bound_c
    }
}

fn stub(head: Vec<Instr>, payload: &BitString) -> BitString {
    let mut bits = ToyProgram::from_instrs(head).encode();
    bits.extend_from(payload);
    bits
}

/// `Φ(smn(p, a), x) = Φ(p, a, x)`: load `â` into work, append the input and
/// run `p` (stored after the stub) on the result.
pub fn smn(p: &BitString, a: &BitString) -> BitString {
    stub(
        vec![
            Instr::Lit {
                target: Reg::Work,
                hat: true,
                bits: a.clone(),
            },
            Instr::Mov(Reg::Work),
            Instr::Eval(EvalMode::Tail),
        ],
        p,
    )
}

/// `Φ(prepend_input(a, t), x) = Φ(t, a ++ x)`.
pub fn prepend_input(a: &BitString, t: &BitString) -> BitString {
    stub(
        vec![
            Instr::Lit {
                target: Reg::Work,
                hat: false,
                bits: a.clone(),
            },
            Instr::Mov(Reg::Work),
            Instr::Eval(EvalMode::Tail),
        ],
        t,
    )
}

/// Length overhead of [`smn`] for a parameter of length `a_len`.
pub fn smn_overhead(a_len: usize) -> usize {
    smn(&BitString::new(), &BitString::zeros(a_len)).len() - a_len
}

/// Extensional fixed point of `f` over `Φ`: allocates a slot `r`, then
/// makes `Φ_r` run `Φ_{f(r)}`.
pub fn fixpoint(
    machine: &Machine,
    f: impl FnOnce(&BitString) -> BitString,
) -> Result<BitString, SlotError> {
    let (slot, r) = machine.allocate()?;
    let target = ToyProgram::decode(&f(&r));
    machine.install(
        slot,
        Oracle::new(
            format!("fix:{}", r),
            0,
            move |m: &Machine, meter: &mut Meter, x: &BitString| m.exec(meter, &target, x),
        ),
    )?;
    Ok(r)
}

/// Runs `U(q)` and returns `y` if the result is `y`; diverges otherwise.
fn singl_behaviour(u: StandardMachine) -> Oracle {
    Oracle::new("singl", 0, move |_, meter, input| {
        let (q, y) = input.split_hat().map_err(|_| Exhausted)?;
        let x = u.exec(meter, &q, &BitString::new())?;
        if x == y {
            Ok(y)
        } else {
            Err(Exhausted)
        }
    })
}

/// Searches for a fixed point `y = φ_{p'}(y)` by dovetailing over inputs.
fn drop_behaviour(varphi: StandardMachine) -> Oracle {
    Oracle::new("drop", 0, move |_, meter, p| {
        for stage in 1u64.. {
            meter.charge(1)?;
            for rank in 0..stage {
                let y = BitString::unrank(rank);
                let hit = meter.bounded(stage, |m| varphi.exec(m, p, &y))?;
                if hit.as_ref() == Some(&y) {
                    return Ok(y);
                }
            }
        }
        unreachable!()
    })
}

/// Host-side description of the numbering stack, shared by games and tests.
#[derive(Clone)]
pub struct Lab {
    pub machine: Arc<Machine>,
    /// `Φ` with one argument.
    pub phi: Arc<BaseNumbering>,
    /// `Φ` with two arguments.
    pub phi2: Arc<BaseNumbering>,
    /// The standard machine `U(p̂q) = Φ(p, q)`.
    pub u: StandardMachine,
    /// Unary numbering `φ(p̂q, y) = Φ(p, q, y)`.
    pub varphi: StandardMachine,
    pub singl_index: BitString,
    pub drop_index: BitString,
}

impl Default for Lab {
    fn default() -> Self {
        Self::new()
    }
}

impl Lab {
    pub fn new() -> Self {
        let machine = Arc::new(Machine::new());
        let phi = Arc::new(BaseNumbering::new(machine.clone(), 1));
        let phi2 = Arc::new(BaseNumbering::new(machine.clone(), 2));
        let u = StandardMachine::over(phi.clone());
        let varphi = StandardMachine::over(phi2.clone());
        let singl_index = machine
            .register(singl_behaviour(u.clone()))
            .expect("fresh machine has free slots");
        let drop_index = machine
            .register(drop_behaviour(varphi.clone()))
            .expect("fresh machine has free slots");
        Lab {
            machine,
            phi,
            phi2,
            u,
            varphi,
            singl_index,
            drop_index,
        }
    }

    pub fn register_oracle(&self, oracle: Oracle) -> Result<BitString, SlotError> {
        self.machine.register(oracle)
    }

    /// U-program for `x` into a φ-program for `Singl_x`.
    pub fn singl_lift(&self) -> Translator {
        Translator::prefix("singl-lift", self.singl_index.hat())
    }

    /// φ-program for `Singl_x` back into a U-program for `x`.
    pub fn singl_drop(&self) -> Translator {
        Translator::prefix("singl-drop", self.drop_index.hat())
    }
}

/// Least index `p <= q` (length-lex) whose outputs match those of `q` on
/// every string of length `<= battery_len` at `budget` (on ε alone for a
/// machine without arguments). Budget-relative: the true least index may
/// be smaller.
pub fn min_index_approx(
    numbering: &dyn Numbering,
    q: &BitString,
    budget: StepBudget,
    battery_len: usize,
) -> BitString {
    assert!(
        numbering.arity() <= 1,
        "min_index_approx expects at most one argument"
    );
    let battery: Vec<BitString> = match numbering.arity() {
        0 => vec![BitString::new()],
        _ => BitString::all_up_to(battery_len).collect(),
    };
    let target: Vec<Option<BitString>> = battery
        .iter()
        .map(|x| numbering.eval_raw(q, x, budget).output().cloned())
        .collect();
    (0..q.rank())
        .map(BitString::unrank)
        .find(|p| {
            battery
                .iter()
                .zip(&target)
                .all(|(x, want)| numbering.eval_raw(p, x, budget).output() == want.as_ref())
        })
        .unwrap_or_else(|| q.clone())
}

/// Small assembly programs used as test fixtures and examples.
pub mod fixtures {
    use crate::bits::BitString;
    use crate::bitvm::assemble_bits;

    pub const ECHO: &str = "mov out";

    /// `â x ↦ a`
    pub const PROJ1: &str = "
count:  read in
        j1 body
        jeof done
        lit work 1
        jmp count
body:   read work
        jeof done
        read in
        jeof done
        j0 zero
        out 1
        jmp body
zero:   out 0
        jmp body
done:   halt";

    /// `â x ↦ x`
    pub const PROJ2: &str = "
count:  read in
        j1 skip
        jeof done
        lit work 1
        jmp count
skip:   read work
        jeof rest
        read in
        jmp skip
rest:   mov out
done:   halt";

    /// Unary one-argument programs exercised by the extensional suites.
    pub const UNARY: &[(&str, &str)] = &[
        ("halt", "halt"),
        ("echo", ECHO),
        ("const0", "out 0"),
        ("const1", "out 1"),
        ("const01", "out 0\nout 1"),
        ("lit110", "lit out 110"),
        ("mark-after-move", "lit out -\nmov work\nlit out hat -\nhalt"),
        ("complement", "l: read in\njeof e\nj0 z\nout 0\njmp l\nz: out 1\njmp l\ne: halt"),
        ("double", "l: read in\njeof e\nj0 z\nout 1\nout 1\njmp l\nz: out 0\nout 0\njmp l\ne: halt"),
        ("tail", "read in\nmov out"),
        ("head", "read in\njeof e\nj0 z\nout 1\nhalt\nz: out 0\ne: halt"),
        ("skip2", "read in
read in
mov out"),
        ("unary-length", "l: read in\njeof e\nout 1\njmp l\ne: halt"),
        ("parity", "l: read in\njeof even\nj0 l\nm: read in\njeof odd\nj0 m\njmp l\neven: out 0\nhalt\nodd: out 1"),
        ("ones-only", "l: read in\njeof e\nj0 l\nout 1\njmp l\ne: halt"),
        ("loop-on-1", "l: read in\nj1 stay\njeof e\njmp l\nstay: jmp stay\ne: out 0"),
        ("spin-on-empty", "read in\njeof spin\nmov out\nhalt\nspin: out 1\njmp spin"),
        ("append0", "mov out\nout 0"),
        ("prepend1", "out 1\nmov out"),
        ("universal", "mov work\neval pair"),
        ("self-tail", "mov work\neval tail\n.bits 0010"),
        ("jump-fault", "out 1\njmp +9"),
    ];

    pub fn bits_of(src: &str) -> BitString {
        assemble_bits(src).expect("fixture assembles")
    }

    pub fn unary() -> Vec<(&'static str, BitString)> {
        UNARY
            .iter()
            .map(|(name, src)| (*name, bits_of(src)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;

    fn halted(o: &Outcome) -> &BitString {
        o.output().expect("halted")
    }

    #[test]
    fn standard_machine_parses_prefix() {
        let lab = Lab::new();
        let echo = fixtures::bits_of(fixtures::ECHO);
        let w = echo.hat().concat(&bits("0110"));
        assert_eq!(halted(&lab.u.run(&w, StepBudget(100))), &bits("0110"));
        for budget in [1, 10, 10_000] {
            assert_eq!(
                lab.u.run(&bits("000"), StepBudget(budget)),
                Outcome::BudgetExceeded
            );
        }
    }

    #[test]
    fn example_translator_length() {
        let lab = Lab::new();
        let p = bits("0010");
        let t = lab.u.translator_from(&p);
        for q in BitString::all_up_to(5) {
            assert_eq!(t.apply(&q).len(), q.len() + 2 * p.len() + 1);
        }
    }

    #[test]
    fn projections() {
        let lab = Lab::new();
        let p1 = fixtures::bits_of(fixtures::PROJ1);
        let p2 = fixtures::bits_of(fixtures::PROJ2);
        for a in BitString::all_up_to(3) {
            for x in BitString::all_up_to(3) {
                let args = [a.clone(), x.clone()];
                assert_eq!(halted(&lab.phi2.eval(&p1, &args, StepBudget(10_000))), &a);
                assert_eq!(halted(&lab.phi2.eval(&p2, &args, StepBudget(10_000))), &x);
            }
        }
    }

    #[test]
    fn smn_specialises_first_argument() {
        let lab = Lab::new();
        let p1 = fixtures::bits_of(fixtures::PROJ1);
        let p2 = fixtures::bits_of(fixtures::PROJ2);
        for a in BitString::all_up_to(3) {
            for x in BitString::all_up_to(2) {
                let b = StepBudget(10_000);
                assert_eq!(
                    halted(&lab.phi.eval(&smn(&p2, &a), std::slice::from_ref(&x), b)),
                    &x
                );
                assert_eq!(
                    halted(&lab.phi.eval(&smn(&p1, &a), std::slice::from_ref(&x), b)),
                    &a
                );
            }
        }
        assert!(smn(&p1, &BitString::new()).len() <= p1.len() + smn_overhead(0));
        assert_eq!(smn_overhead(0), 19);
    }

    #[test]
    fn fixpoint_of_constant_map() {
        let lab = Lab::new();
        let const0 = fixtures::bits_of("out 0");
        let r = fixpoint(&lab.machine, |_| const0.clone()).unwrap();
        for x in BitString::all_up_to(3) {
            assert_eq!(halted(&lab.phi.eval(&r, &[x], StepBudget(100))), &bits("0"));
        }
    }

    #[test]
    fn self_printing_slot() {
        let lab = Lab::new();
        let (slot, idx) = lab.machine.allocate().unwrap();
        let me = idx.clone();
        lab.machine
            .install(slot, Oracle::new("quine", 0, move |_, _, _| Ok(me.clone())))
            .unwrap();
        assert_eq!(
            halted(&lab.phi.eval(&idx, &[BitString::new()], StepBudget(10))),
            &idx
        );
        let other = lab
            .register_oracle(Oracle::new("echo", 0, |_, _, x| Ok(x.clone())))
            .unwrap();
        assert_ne!(other, idx);
        assert!(other.len() <= 8);
    }

    #[test]
    fn singl_round_trip() {
        let lab = Lab::new();
        let p = fixtures::bits_of("out 0\nout 1").hat();
        assert_eq!(halted(&lab.u.run(&p, StepBudget(100))), &bits("01"));
        let lifted = lab.singl_lift().apply(&p);
        let b = StepBudget(10_000);
        assert_eq!(
            halted(&lab.varphi.eval(&lifted, &[bits("01")], b)),
            &bits("01")
        );
        assert_eq!(
            lab.varphi.eval(&lifted, &[bits("1")], b),
            Outcome::BudgetExceeded
        );
        let dropped = lab.singl_drop().apply(&lifted);
        assert_eq!(
            halted(&lab.u.run(&dropped, StepBudget(100_000))),
            &bits("01")
        );
        assert_eq!(lab.singl_lift().bound_c, 17);
    }

    #[test]
    fn singl_of_undefined_is_nowhere_defined() {
        let lab = Lab::new();
        let lifted = lab.singl_lift().apply(&bits("000"));
        for y in BitString::all_up_to(3) {
            assert_eq!(
                lab.varphi.eval(&lifted, &[y], StepBudget(5_000)),
                Outcome::BudgetExceeded
            );
        }
    }

    #[test]
    fn min_index_of_least_representative() {
        let lab = Lab::new();
        // ε and "0" both decode to an immediate halt
        assert_eq!(
            min_index_approx(lab.phi.as_ref(), &bits(""), StepBudget(100), 3),
            bits("")
        );
        assert_eq!(
            min_index_approx(lab.phi.as_ref(), &bits("0"), StepBudget(100), 3),
            bits("")
        );
        let echo = fixtures::bits_of(fixtures::ECHO);
        assert_eq!(
            min_index_approx(lab.phi.as_ref(), &echo, StepBudget(100), 3),
            echo
        );
    }
}
