//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use kolab_core::adversary::{needed_capacity, Arena, Backend, GameKind, VerifyReport};
use kolab_core::bits::{tuple_decode, tuple_encode, BitString};
use kolab_core::bitvm::{Machine, StepBudget, ToyProgram};
use kolab_core::complexity::{c_exact, print_literal};
use kolab_core::experiment::{run_experiment, ExperimentConfig, ExperimentReport, GameLog};
use kolab_core::lists::{profile_li, staircase_deviations, IRule, ListSpec, MAX_BELOW};
use kolab_core::numbering::{fixpoint, fixtures, smn, Lab, Numbering, PARSE_STEPS};
use rayon::prelude::*;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn th1_specs() -> Vec<ListSpec> {
    vec![
        ListSpec::Singleton,
        ListSpec::BelowI(IRule::Const(0)),
        ListSpec::BelowI(IRule::Const(2)),
        ListSpec::BelowI(IRule::Const(3)),
    ]
}

/// Smallest stage whose budget covers every U-program of length
/// `<= max_len` that halts within `cap` steps.
fn quiescence_stage(max_len: usize, cap: u64) -> u64 {
    let lab = Lab::new();
    let slowest = BitString::all_up_to(max_len)
        .filter_map(|p| lab.u.run(&p, StepBudget(cap)).steps())
        .max()
        .unwrap_or(0);
    (1..).find(|s: &u64| s * s >= slowest).unwrap()
}

struct Th1Runs {
    reports: Vec<(ListSpec, Backend, ExperimentReport)>,
    stage_limit: u64,
}

fn th1_runs(kmax: usize) -> Result<Th1Runs, String> {
    let stage_limit = (quiescence_stage(kmax - 1, 10_000) + 1).max(16);
    let verify_stage = (2 * stage_limit).max(64);
    let mut jobs = Vec::new();
    for spec in th1_specs() {
        for game in [GameKind::Th1, GameKind::Th1t] {
            let mut cfg = ExperimentConfig::new(game, kmax, stage_limit);
            cfg.verify_stage = verify_stage;
            cfg.list = spec.clone();
            cfg.augment = true;
            jobs.push(cfg);
        }
    }
    let reports = jobs
        .par_iter()
        .map(|cfg| {
            let out = run_experiment(cfg).map_err(|e| format!("{} {}: {e}", cfg.game, cfg.list))?;
            Ok((cfg.list.clone(), cfg.backend(), out.report))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Th1Runs {
        reports,
        stage_limit,
    })
}

fn clause_failures(r: &ExperimentReport, names: &[&str]) -> Vec<String> {
    r.verification
        .iter()
        .flat_map(|v| {
            names.iter().filter_map(move |n| match v.clause(n) {
                Some(c) if c.pass => None,
                Some(c) => Some(format!("{} k={} {n}: {}", r.config.list, v.k, c.detail)),
                None => Some(format!("{} k={} {n}: missing", r.config.list, v.k)),
            })
        })
        .collect()
}

fn standard_machine_identity() -> Verdict {
    let lab = Lab::new();
    let budget = StepBudget(10_000);
    let progs: Vec<BitString> = BitString::all_up_to(6).collect();
    let bad: Vec<String> = progs
        .par_iter()
        .flat_map_iter(|p| {
            let lab = &lab;
            BitString::all_up_to(6).filter_map(move |q| {
                let direct = lab.phi.eval(p, std::slice::from_ref(&q), budget);
                let via_u = lab
                    .u
                    .run(&p.hat().concat(&q), StepBudget(budget.0 + PARSE_STEPS));
                let same = match (direct.steps(), via_u.steps()) {
                    (Some(d), Some(u)) => direct.output() == via_u.output() && u == d + PARSE_STEPS,
                    (None, None) => true,
                    _ => false,
                };
                (!same).then(|| format!("p={} q={}", p.token(), q.token()))
            })
        })
        .collect();
    ensure(bad.is_empty(), || {
        format!("{} disagreements, first {:?}", bad.len(), bad.first())
    })?;
    let n = progs.len() * progs.len();
    Ok(format!("{n} pairs agree, parse offset {PARSE_STEPS} step"))
}

fn prefix_code_suite() -> Verdict {
    let all: Vec<BitString> = BitString::all_up_to(10).collect();
    let mut checked = 0usize;
    for p in &all {
        for q in BitString::all_up_to(3) {
            let (a, b) = p
                .hat()
                .concat(&q)
                .split_hat()
                .map_err(|e| format!("{}: {e}", p.token()))?;
            ensure(a == *p && b == q, || {
                format!("hat round trip failed on {}", p.token())
            })?;
            checked += 1;
        }
    }
    // sorted by raw bits, a prefix sits right before some extension of it
    let mut codes: Vec<Vec<bool>> = all.iter().map(|p| p.hat().bits().to_vec()).collect();
    codes.sort();
    for w in codes.windows(2) {
        ensure(!w[1].starts_with(&w[0]), || {
            "hat code is not prefix-free".to_string()
        })?;
    }
    for a in &all {
        for b in all.iter().take_while(|b| a.len() + b.len() <= 10) {
            let enc = tuple_encode(&[a.clone(), b.clone()]);
            let dec = tuple_decode(&enc, 2).map_err(|e| e.to_string())?;
            ensure(dec == [a.clone(), b.clone()], || {
                format!("tuple round trip failed on {a:?},{b:?}")
            })?;
            checked += 1;
        }
    }
    for b in &all {
        let prog = ToyProgram::decode(b);
        let again = ToyProgram::decode(&prog.encode());
        ensure(again.instrs() == prog.instrs(), || {
            format!("program round trip failed on {}", b.token())
        })?;
        checked += 1;
    }
    Ok(format!(
        "{checked} round trips, {} codewords prefix-free",
        codes.len()
    ))
}

fn smn_fixpoint_suite() -> Verdict {
    let lab = Lab::new();
    let battery = fixtures::unary();
    ensure(battery.len() >= 20, || {
        format!("only {} fixtures", battery.len())
    })?;
    let slack = 64;
    let mut cases = 0usize;
    let mut worst_len = 0usize;
    for (name, f) in &battery {
        for a in BitString::all_up_to(2) {
            let s = smn(f, &a);
            worst_len = worst_len.max(s.len() - f.len() - a.len());
            for x in BitString::all_up_to(4) {
                for b in [StepBudget(1_000), StepBudget(10_000)] {
                    let direct = lab.phi.eval(f, &[a.hat().concat(&x)], b);
                    let stub = lab
                        .phi
                        .eval(&s, std::slice::from_ref(&x), StepBudget(b.0 + slack));
                    ensure(
                        direct.output().is_none() || direct.output() == stub.output(),
                        || format!("smn({name}, {}) on {} at {}", a.token(), x.token(), b.0),
                    )?;
                    cases += 1;
                }
            }
        }
        let machine = Machine::new();
        let r = fixpoint(&machine, |_| f.clone()).map_err(|e| e.to_string())?;
        let phi = kolab_core::numbering::BaseNumbering::new(std::sync::Arc::new(machine), 1);
        for x in BitString::all_up_to(4) {
            for b in [StepBudget(1_000), StepBudget(10_000)] {
                let direct = lab.phi.eval(f, std::slice::from_ref(&x), b);
                let fixed = phi.eval(&r, std::slice::from_ref(&x), StepBudget(b.0 + slack));
                ensure(
                    direct.output().is_none() || direct.output() == fixed.output(),
                    || format!("fixpoint({name}) on {} at {}", x.token(), b.0),
                )?;
                cases += 1;
            }
        }
    }
    // a program printing its own index
    let machine = std::sync::Arc::new(Machine::new());
    let proj1 = fixtures::bits_of(fixtures::PROJ1);
    let r = fixpoint(&machine, |r| smn(&proj1, r)).map_err(|e| e.to_string())?;
    let phi = kolab_core::numbering::BaseNumbering::new(machine, 1);
    for x in BitString::all_up_to(3) {
        ensure(
            phi.eval(&r, &[x], StepBudget(10_000)).output() == Some(&r),
            || "self-printer".into(),
        )?;
    }
    ensure(worst_len <= 32, || format!("smn overhead {worst_len} > 32"))?;
    Ok(format!(
        "{} fixtures, {cases} agreements, c_smn {worst_len} <= 32",
        battery.len()
    ))
}

fn th1_invariants(runs: &Th1Runs) -> Verdict {
    let mut c_by_backend = std::collections::BTreeMap::new();
    let mut witnesses = 0;
    let mut total_repairs = 0;
    for (_, backend, r) in &runs.reports {
        let fails = clause_failures(
            r,
            &["stage", "output", "list", "size", "complexity", "length"],
        );
        ensure(fails.is_empty(), || fails.join("; "))?;
        let GameLog::Th1 {
            repair_counts,
            repairs,
            ..
        } = &r.log
        else {
            return Err("wrong log kind".into());
        };
        for (k, c) in repair_counts {
            ensure(*c < 1u64 << k, || format!("k={k}: {c} repairs"))?;
        }
        // counters at every repair, not only at the end
        let mut seen = std::collections::BTreeMap::<usize, u64>::new();
        for rep in repairs {
            let c = seen.entry(rep.k).or_default();
            *c += 1;
            ensure(*c < 1u64 << rep.k, || {
                format!("k={} exceeded its repair bound", rep.k)
            })?;
        }
        for w in &r.witnesses {
            c_by_backend
                .entry(*backend)
                .or_insert_with(BTreeSet::new)
                .insert(w.p.len() - w.k);
        }
        witnesses += r.witnesses.len();
        total_repairs += repairs.len();
    }
    ensure(c_by_backend.values().all(|s| s.len() == 1), || {
        format!("non-uniform c: {c_by_backend:?}")
    })?;
    Ok(format!(
        "{witnesses} witnesses at stage {}, {total_repairs} repairs, c per backend {c_by_backend:?}",
        runs.stage_limit
    ))
}

fn corollary_clause(runs: &Th1Runs) -> Verdict {
    let mut n = 0;
    for (_, _, r) in &runs.reports {
        let fails = clause_failures(r, &["corollary"]);
        ensure(fails.is_empty(), || fails.join("; "))?;
        n += r.verification.len();
    }
    Ok(format!("{n} witnesses"))
}

fn eq2_clause(runs: &Th1Runs) -> Verdict {
    let mut worst = None;
    for (_, _, r) in &runs.reports {
        let fails = clause_failures(r, &["eq2"]);
        ensure(fails.is_empty(), || fails.join("; "))?;
        worst = worst.max(r.max_eq2_deficit);
    }
    // rerun one configuration and compare the reported deficit
    let (_, _, first) = &runs.reports[runs.reports.len() - 1];
    let again = run_experiment(&first.config).map_err(|e| e.to_string())?;
    ensure(
        again.report.max_eq2_deficit == first.max_eq2_deficit,
        || "deficit changed on rerun".into(),
    )?;
    Ok(format!("max deficit {worst:?}, stable on rerun"))
}

fn tightness_profile() -> Verdict {
    let lab = Lab::new();
    let budget = StepBudget(10_000);
    let mut candidates: Vec<BitString> = ["1", "11", "110", "10101", "011", "0111", "0110"]
        .iter()
        .map(|t| BitString::parse_token(t).unwrap())
        .collect();
    candidates.push(print_literal(&BitString::new()));
    candidates.push(print_literal(&BitString::parse_token("1").unwrap()));
    let mut used = 0;
    for p in &candidates {
        if p.len() > MAX_BELOW {
            continue;
        }
        let Some(x) = lab.u.run(p, budget).output().cloned() else {
            continue;
        };
        let Some(c) = c_exact(&lab.u, &x, 3, budget).value else {
            continue;
        };
        let pts = profile_li(&lab.u, p, budget).map_err(|e| e.to_string())?;
        let dev = staircase_deviations(&lab.u, &pts, None);
        ensure(dev.is_empty(), || format!("{}: {dev:?}", p.token()))?;
        let switches = pts.windows(2).filter(|w| w[0].j != w[1].j).count();
        let expect = usize::from(c < p.len());
        ensure(switches == expect, || {
            format!("{}: {switches} switches", p.token())
        })?;
        used += 1;
    }
    ensure(used >= 5, || {
        format!("only {used} fixtures have complexity <= 3")
    })?;
    Ok(format!("{used} programs, zero deviations"))
}

fn th2_game() -> Verdict {
    let stage_limit = (quiescence_stage(4, 10_000) + 1).max(16);
    let mut cfg = ExperimentConfig::new(GameKind::Th2, 6, stage_limit);
    cfg.nmax = 4;
    cfg.verify_stage = (2 * stage_limit).max(64);
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let r = &out.report;
    ensure(r.passed, || format!("{:?}", r.failures()))?;
    let GameLog::Th2 {
        repairs,
        consumption,
        good_at_end,
    } = &r.log
    else {
        return Err("wrong log kind".into());
    };
    ensure(good_at_end.iter().all(|g| g.2), || {
        "a pair is bad at the final stage".into()
    })?;
    for rep in repairs {
        let half = 1u64 << (rep.n.max(1) - 1);
        ensure(
            (rep.counts.blocked as u64) < half && rep.counts.candidates > half,
            || format!("k={} n={}: counting failed {:?}", rep.k, rep.n, rep.counts),
        )?;
    }
    for (k, used, cap) in consumption {
        ensure(cap.is_none_or(|c| *used < c), || {
            format!("k={k} used {used} of {cap:?}")
        })?;
    }
    for k in 4..=16 {
        let cap = needed_capacity(k).map_err(|e| e.to_string())?;
        ensure(cap < 1 << k, || format!("capacity({k}) = {cap}"))?;
    }
    ensure(needed_capacity(8).ok() == Some(192), || {
        "capacity(8) != 192".into()
    })?;
    Ok(format!(
        "{} witnesses, {} repairs, capacity(8)=192",
        r.witnesses.len(),
        repairs.len()
    ))
}

fn backend_agreement(runs: &Th1Runs) -> Verdict {
    let clause_set = |v: &[VerifyReport]| -> BTreeSet<Vec<String>> {
        v.iter()
            .map(|r| r.clauses.iter().map(|c| c.name.clone()).collect())
            .collect()
    };
    for spec in th1_specs() {
        let pick = |b: Backend| {
            runs.reports
                .iter()
                .find(|(s, bb, _)| *s == spec && *bb == b)
                .map(|t| &t.2)
        };
        let (Some(a), Some(t)) = (pick(Backend::Fixpoint), pick(Backend::Teutsch)) else {
            return Err(format!("missing run for {spec}"));
        };
        ensure(a.passed && t.passed, || {
            format!("{spec}: {:?} / {:?}", a.failures(), t.failures())
        })?;
        ensure(
            clause_set(&a.verification) == clause_set(&t.verification),
            || format!("{spec}: clause sets differ"),
        )?;
        ensure(t.witnesses.iter().all(|w| w.p.len() == w.k + 1), || {
            format!("{spec}: witness length")
        })?;
    }
    let arena = Arena::new(Backend::Teutsch, StepBudget(256)).map_err(|e| e.to_string())?;
    let zero = BitString::parse_token("0").unwrap();
    let mut n = 0;
    for q in BitString::all_up_to(6) {
        let b = StepBudget(10_000);
        let v = arena
            .target
            .eval_raw(&zero.concat(&q), &BitString::new(), StepBudget(b.0 + 1));
        let u = arena.lab.u.run(&q, b);
        ensure(v.output() == u.output(), || {
            format!("V(0{}) != U({})", q.token(), q.token())
        })?;
        n += 1;
    }
    Ok(format!(
        "{} specs on both backends, V(0q)=U(q) on {n} q",
        th1_specs().len()
    ))
}

fn transport() -> Verdict {
    let stage_limit = (quiescence_stage(5, 10_000) + 1).max(16);
    let mut witnesses = 0;
    let mut offsets = BTreeSet::new();
    for spec in th1_specs() {
        let mut cfg = ExperimentConfig::new(GameKind::Th1t, 6, stage_limit);
        cfg.verify_stage = (2 * stage_limit).max(64);
        cfg.list = spec.clone();
        cfg.transport = true;
        let out = run_experiment(&cfg).map_err(|e| format!("{spec}: {e}"))?;
        let r = out.report;
        let moved = r.transported.as_ref().ok_or("no transported witnesses")?;
        ensure(moved.verification.iter().all(VerifyReport::passed), || {
            format!("{spec}: {:?}", r.failures())
        })?;
        for (w, m) in r.witnesses.iter().zip(&moved.witnesses) {
            offsets.insert(m.p.len() - w.p.len());
            ensure(m.list.len() >= w.list.len(), || {
                format!("{spec}: image larger than preimage")
            })?;
            witnesses += 1;
        }
        ensure(
            offsets.len() == 1 && offsets.contains(&r.constants.c_transport),
            || {
                format!(
                    "offsets {offsets:?} vs predicted {}",
                    r.constants.c_transport
                )
            },
        )?;
    }
    Ok(format!(
        "{witnesses} witnesses moved to U with offset {offsets:?}"
    ))
}

fn determinism() -> Verdict {
    let mut configs = Vec::new();
    for game in [GameKind::Th1, GameKind::Th1t, GameKind::Th2] {
        let mut cfg = ExperimentConfig::new(game, 4, 12);
        cfg.list = ListSpec::BelowI(IRule::Const(2));
        configs.push(cfg);
    }
    configs[1].transport = true;
    for cfg in &configs {
        let text = serde_json::to_string(cfg).map_err(|e| e.to_string())?;
        let a = run_experiment(cfg).map_err(|e| e.to_string())?;
        let back: ExperimentConfig = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let b = run_experiment(&back).map_err(|e| e.to_string())?;
        ensure(a.report.to_json() == b.report.to_json(), || {
            format!("{} report differs", cfg.game)
        })?;
        ensure(a.transcript == b.transcript, || {
            format!("{} transcript differs", cfg.game)
        })?;
    }
    Ok(format!("{} configs byte-identical on rerun", configs.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = th1_runs(6);
    let with_runs = |f: fn(&Th1Runs) -> Verdict| -> Verdict {
        match &runs {
            Ok(r) => f(r),
            Err(e) => Err(format!("game runs failed: {e}")),
        }
    };
    let results: Vec<(&str, Verdict)> = vec![
        ("standard machine identity", standard_machine_identity()),
        ("prefix codes", prefix_code_suite()),
        ("smn and fixpoint", smn_fixpoint_suite()),
        ("single-pair game invariants", with_runs(th1_invariants)),
        ("corollary clause", with_runs(corollary_clause)),
        ("eq2 clause", with_runs(eq2_clause)),
        ("tightness profile", tightness_profile()),
        ("bunch game", th2_game()),
        ("backend agreement", with_runs(backend_agreement)),
        ("transport", transport()),
        ("determinism", determinism()),
    ];
    let mut ok = true;
    for (i, (name, v)) in results.iter().enumerate() {
        match v {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                ok = false;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance finished in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
