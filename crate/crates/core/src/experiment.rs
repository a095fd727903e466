//! Configured, reproducible runs of the games with verification and a
//! constants report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    augment_and_rerun, run_th1, run_th2, transport_witness, v_side_spec, verify_th2,
    verify_witness, Arena, Backend, GameError, GameKind, RepairRecord, Th1Config, Th2Config,
    Th2Repair, TransportError, VerifyEnv, VerifyReport, Witness, LOG_RULE,
};
use crate::bits::BitString;
use crate::bitvm::StepBudget;
use crate::complexity::{literal_overhead, ComplexityTable};
use crate::enumeration::Schedule;
use crate::lists::{ListSpec, MAX_BELOW};
use crate::numbering::{fixtures, prepend_input, smn_overhead, Lab, Numbering, PARSE_STEPS};

pub const MAX_KMAX_TH1: usize = 10;
pub const MAX_KMAX_TH2: usize = 8;

fn default_verify_stage() -> u64 {
    64
}

fn default_list_budget() -> u64 {
    256
}

fn default_log_rule() -> String {
    LOG_RULE.to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameKind,
    pub kmax: usize,
    /// Largest `n` of a bunch (bunch game only).
    #[serde(default)]
    pub nmax: usize,
    pub stage_limit: u64,
    #[serde(default = "default_verify_stage")]
    pub verify_stage: u64,
    /// Step budget of list functions and of Φ-totality checks.
    #[serde(default = "default_list_budget")]
    pub list_budget: u64,
    /// List spec for the single-pair games.
    #[serde(default = "singleton")]
    pub list: ListSpec,
    /// Play against `aug(list)` and restate witnesses against `list`.
    #[serde(default)]
    pub augment: bool,
    /// Two-part backend only: play on V with the image of `list` and
    /// transport witnesses to U.
    #[serde(default)]
    pub transport: bool,
    #[serde(default = "default_log_rule")]
    pub log_rule: String,
}

fn singleton() -> ListSpec {
    ListSpec::Singleton
}

impl ExperimentConfig {
    pub fn new(game: GameKind, kmax: usize, stage_limit: u64) -> Self {
        ExperimentConfig {
            game,
            kmax,
            nmax: kmax.saturating_sub(1),
            stage_limit,
            verify_stage: default_verify_stage(),
            list_budget: default_list_budget(),
            list: ListSpec::Singleton,
            augment: false,
            transport: false,
            log_rule: default_log_rule(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let max = match self.game {
            GameKind::Th1 | GameKind::Th1t => MAX_KMAX_TH1,
            GameKind::Th2 => MAX_KMAX_TH2,
        };
        if self.kmax == 0 || self.kmax > max {
            return Err(ConfigError::Kmax {
                game: self.game,
                kmax: self.kmax,
                max,
            });
        }
        if self.game == GameKind::Th2 && self.nmax >= self.kmax {
            return Err(ConfigError::Nmax {
                nmax: self.nmax,
                kmax: self.kmax,
            });
        }
        if self.stage_limit == 0 {
            return Err(ConfigError::Stage("stage_limit must be at least 1".into()));
        }
        if self.verify_stage <= self.stage_limit {
            return Err(ConfigError::Stage(format!(
                "verify_stage {} must exceed stage_limit {}",
                self.verify_stage, self.stage_limit
            )));
        }
        if self.list_budget >= Schedule::budget(self.verify_stage).0 {
            return Err(ConfigError::Stage(format!(
                "list_budget {} must stay below the verification budget {}",
                self.list_budget,
                Schedule::budget(self.verify_stage).0
            )));
        }
        if self.log_rule != LOG_RULE {
            return Err(ConfigError::LogRule(self.log_rule.clone()));
        }
        if self.transport && self.game != GameKind::Th1t {
            return Err(ConfigError::Transport);
        }
        if let ListSpec::BelowI(crate::lists::IRule::Const(i)) = self.list {
            if i > MAX_BELOW {
                return Err(ConfigError::List(format!(
                    "below:{i} exceeds the limit {MAX_BELOW}"
                )));
            }
        }
        Ok(())
    }

    pub fn backend(&self) -> Backend {
        match self.game {
            GameKind::Th1t => Backend::Teutsch,
            _ => Backend::Fixpoint,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("kmax={kmax} is outside 1..={max} for game {game}")]
    Kmax {
        game: GameKind,
        kmax: usize,
        max: usize,
    },
    #[error("nmax={nmax} must be below kmax={kmax}")]
    Nmax { nmax: usize, kmax: usize },
    #[error("{0}")]
    Stage(String),
    #[error("unsupported log rule {0:?}; only {LOG_RULE:?} is implemented")]
    LogRule(String),
    #[error("transport is only available for game th1t")]
    Transport,
    #[error("{0}")]
    List(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Measured additive constants of this machine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub log_rule: String,
    /// Steps charged by U for splitting `p̂q`.
    pub c_parse: u64,
    /// `|smn(p, a)| - |p| - |a|` at `a = ε`.
    pub c_smn: usize,
    /// Largest `|smn(p, a)| - |p| - |a|` for `|a| <= 62`.
    pub c_smn_max: usize,
    /// `|prepend_input(ε, t)| - |t|`.
    pub c_prepend: usize,
    pub c_lift: usize,
    pub c_drop: usize,
    /// `|print(x)| - |x|` on U.
    pub c_id: usize,
    /// `|r̂|` of the fixed-point backend.
    pub c_fix: usize,
    /// `|v̂|` of the two-part backend's V-as-Φ index.
    pub c_transport: usize,
    /// Range of extra steps taken by the universal program over a direct
    /// run, across fixtures and inputs of length <= 3.
    pub eval_overhead_steps: (u64, u64),
    pub eval_overhead_budget: u64,
}

pub fn measure_constants() -> Result<ConstantsReport, GameError> {
    let lab = Lab::new();
    let fix = Arena::new(Backend::Fixpoint, StepBudget(1))?;
    let two = Arena::new(Backend::Teutsch, StepBudget(1))?;
    let universal = fixtures::unary()
        .into_iter()
        .find(|(name, _)| *name == "universal")
        .map(|(_, b)| b)
        .expect("universal fixture");
    let budget = StepBudget(10_000);
    let (mut lo, mut hi) = (u64::MAX, 0);
    for (_, f) in fixtures::unary() {
        for x in BitString::all_up_to(3) {
            let direct = lab.phi.eval(&f, std::slice::from_ref(&x), budget);
            let wrapped = lab.phi.eval(&universal, &[f.hat().concat(&x)], budget);
            if let (Some(d), Some(w)) = (direct.steps(), wrapped.steps()) {
                lo = lo.min(w - d);
                hi = hi.max(w - d);
            }
        }
    }
    Ok(ConstantsReport {
        log_rule: LOG_RULE.into(),
        c_parse: PARSE_STEPS,
        c_smn: smn_overhead(0),
        c_smn_max: (0..=62).map(smn_overhead).max().unwrap_or(0),
        c_prepend: prepend_input(&BitString::new(), &BitString::new()).len(),
        c_lift: lab.singl_lift().bound_c,
        c_drop: lab.singl_drop().bound_c,
        c_id: literal_overhead(),
        c_fix: fix.prefix.len(),
        c_transport: two.v_index.as_ref().map_or(0, |v| v.hat().len()),
        eval_overhead_steps: (lo, hi),
        eval_overhead_budget: budget.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameLog {
    Th1 {
        repairs: Vec<RepairRecord>,
        repair_counts: BTreeMap<usize, u64>,
        good_at_end: BTreeMap<usize, bool>,
    },
    Th2 {
        repairs: Vec<Th2Repair>,
        good_at_end: Vec<(usize, usize, bool)>,
        consumption: Vec<(usize, u64, Option<u64>)>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transported {
    pub witnesses: Vec<Witness>,
    pub verification: Vec<VerifyReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub constants: ConstantsReport,
    pub stage: u64,
    pub events: usize,
    pub log: GameLog,
    pub witnesses: Vec<Witness>,
    pub verification: Vec<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transported: Option<Transported>,
    /// Largest Eq. 2 deficit over all verified witnesses.
    pub max_eq2_deficit: Option<i64>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `(witness index, clause)` for every failed clause.
    pub fn failures(&self) -> Vec<(usize, String)> {
        let own = self.verification.iter().enumerate();
        let moved = self
            .transported
            .iter()
            .flat_map(|t| t.verification.iter().enumerate());
        own.chain(moved)
            .flat_map(|(i, r)| {
                r.failures()
                    .into_iter()
                    .map(move |c| (i, format!("k={} {c}", r.k)))
            })
            .collect()
    }
}

pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub transcript: String,
}

fn table_for(
    u: &dyn Numbering,
    witnesses: &[Witness],
    extra: usize,
    budget: StepBudget,
) -> ComplexityTable {
    let maxlen = witnesses.iter().map(|w| w.x.len()).max().unwrap_or(0) + extra;
    ComplexityTable::build(u, maxlen, budget)
}

/// A finished game together with the machines it ran against.
pub struct Played {
    pub arena: Arena,
    /// List spec the game itself used.
    pub spec: Option<ListSpec>,
    pub stage: u64,
    pub events: usize,
    pub log: GameLog,
    pub witnesses: Vec<Witness>,
    pub transcript: String,
}

pub fn play(cfg: &ExperimentConfig) -> Result<Played, ExperimentError> {
    cfg.validate()?;
    let arena = Arena::new(cfg.backend(), StepBudget(cfg.list_budget))?;
    if cfg.game == GameKind::Th2 {
        let out = run_th2(
            &arena,
            &Th2Config {
                kmax: cfg.kmax,
                nmax: cfg.nmax,
                stage_limit: cfg.stage_limit,
            },
        )?;
        return Ok(Played {
            arena,
            spec: None,
            stage: out.stage,
            events: out.events,
            log: GameLog::Th2 {
                repairs: out.repairs,
                good_at_end: out.good_at_end,
                consumption: out.consumption,
            },
            witnesses: out.witnesses,
            transcript: out.transcript,
        });
    }
    let spec = if cfg.transport {
        v_side_spec(&arena, &cfg.list)?
    } else {
        cfg.list.clone()
    };
    let th1 = Th1Config {
        kmax: cfg.kmax,
        stage_limit: cfg.stage_limit,
        spec: spec.clone(),
    };
    let out = if cfg.augment {
        augment_and_rerun(&arena, &th1)?
    } else {
        run_th1(&arena, &th1)?
    };
    Ok(Played {
        arena,
        spec: Some(spec),
        stage: out.stage,
        events: out.events,
        log: GameLog::Th1 {
            repairs: out.repairs,
            repair_counts: out.repair_counts,
            good_at_end: out.good_at_end,
        },
        witnesses: out.witnesses,
        transcript: out.transcript,
    })
}

/// Verifies `witnesses` against the machines of a replayed game at
/// `cfg.verify_stage`.
pub fn verify_played(
    cfg: &ExperimentConfig,
    played: &Played,
    witnesses: &[Witness],
) -> Vec<VerifyReport> {
    let arena = &played.arena;
    let budget = Schedule::budget(cfg.verify_stage);
    let table = table_for(arena.target.as_ref(), witnesses, arena.c_id(), budget);
    match &played.spec {
        None => witnesses
            .iter()
            .map(|w| verify_th2(arena.verify_env(), w, cfg.verify_stage, &table))
            .collect(),
        Some(spec) => witnesses
            .iter()
            .map(|w| verify_witness(arena.verify_env(), w, spec, cfg.verify_stage, &table))
            .collect(),
    }
}

fn transport_all(cfg: &ExperimentConfig, played: &Played) -> Result<Transported, ExperimentError> {
    let arena = &played.arena;
    let budget = Schedule::budget(cfg.verify_stage);
    let moved = played
        .witnesses
        .iter()
        .map(|w| transport_witness(arena, w, &cfg.list, budget))
        .collect::<Result<Vec<_>, _>>()?;
    let u = &arena.lab.u;
    let env = VerifyEnv {
        target: u,
        lists: arena.u_list_env(),
        c_id: literal_overhead(),
    };
    let table = table_for(u, &moved, literal_overhead(), budget);
    let verification = moved
        .iter()
        .map(|w| verify_witness(env, w, &cfg.list, cfg.verify_stage, &table))
        .collect();
    Ok(Transported {
        witnesses: moved,
        verification,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let played = play(cfg)?;
    let constants = measure_constants()?;
    let verification = verify_played(cfg, &played, &played.witnesses);
    let transported = if cfg.transport {
        Some(transport_all(cfg, &played)?)
    } else {
        None
    };
    let all = || {
        verification
            .iter()
            .chain(transported.iter().flat_map(|t| t.verification.iter()))
    };
    let passed = all().all(VerifyReport::passed);
    let max_eq2_deficit = all().filter_map(|r| r.eq2_deficit).max();
    let report = ExperimentReport {
        config: cfg.clone(),
        constants,
        stage: played.stage,
        events: played.events,
        log: played.log,
        witnesses: played.witnesses,
        verification,
        transported,
        max_eq2_deficit,
        passed,
    };
    Ok(ExperimentOutput {
        report,
        transcript: played.transcript,
    })
}

/// Replays the game recorded in `report` and re-verifies its witnesses (as
/// stored, not as regenerated) at `verify_stage`.
pub fn reverify(
    report: &ExperimentReport,
    verify_stage: u64,
) -> Result<Vec<VerifyReport>, ExperimentError> {
    let cfg = ExperimentConfig {
        verify_stage,
        ..report.config.clone()
    };
    let played = play(&cfg)?;
    Ok(verify_played(&cfg, &played, &report.witnesses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_desk_violations() {
        let mut cfg = ExperimentConfig::new(GameKind::Th1, 64, 10);
        assert!(matches!(cfg.validate(), Err(ConfigError::Kmax { .. })));
        cfg.kmax = 4;
        assert!(cfg.validate().is_ok());
        cfg.verify_stage = 10;
        assert!(matches!(cfg.validate(), Err(ConfigError::Stage(_))));
        let mut th2 = ExperimentConfig::new(GameKind::Th2, 9, 10);
        assert!(th2.validate().is_err());
        th2.kmax = 5;
        th2.nmax = 5;
        assert!(matches!(th2.validate(), Err(ConfigError::Nmax { .. })));
        let mut t = ExperimentConfig::new(GameKind::Th1, 4, 10);
        t.transport = true;
        assert!(matches!(t.validate(), Err(ConfigError::Transport)));
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = ExperimentConfig::new(GameKind::Th1t, 4, 12);
        cfg.list = "below:len+1".parse().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"below:len+1\""));
        assert_eq!(
            serde_json::from_str::<ExperimentConfig>(&text).unwrap(),
            cfg
        );
    }

    #[test]
    fn constants_are_stable() {
        let c = measure_constants().unwrap();
        assert_eq!(c.c_parse, 1);
        assert_eq!(c.c_smn, 19);
        assert!(c.c_smn_max <= 32);
        assert_eq!(c.c_id, 9);
        assert_eq!(c.c_fix, 17);
        assert_eq!((c.c_lift, c.c_drop), (17, 17));
        assert!(c.eval_overhead_steps.0 <= c.eval_overhead_steps.1);
    }

    #[test]
    fn small_th1_run_passes_and_is_deterministic() {
        let mut cfg = ExperimentConfig::new(GameKind::Th1, 3, 10);
        cfg.verify_stage = 24;
        let a = run_experiment(&cfg).unwrap();
        assert!(a.report.passed, "{:?}", a.report.failures());
        assert_eq!(a.report.witnesses.len(), 3);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.transcript, b.transcript);
        let again = reverify(&a.report, 40).unwrap();
        assert!(again.iter().all(VerifyReport::passed));
        let mut bad = a.report.clone();
        bad.witnesses[2].x = BitString::parse_token("0110").unwrap();
        assert!(!reverify(&bad, 40).unwrap()[2].passed());
    }
}
