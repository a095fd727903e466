use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kolab_core::adversary::GameKind;
use kolab_core::bits::BitString;
use kolab_core::bitvm::{assemble_bits, disassemble, Machine, StepBudget, ToyProgram};
use kolab_core::complexity::{c_exact, c_list, ct_total, ListValue};
use kolab_core::enumeration::{parse_transcript, replay};
use kolab_core::experiment::{
    measure_constants, reverify, run_experiment, ExperimentConfig, ExperimentReport,
};
use kolab_core::lists::{profile_li, staircase_deviations, write_profile_csv, ListEnv, ListSpec};
use kolab_core::numbering::{Lab, Numbering};

#[derive(Parser)]
#[command(name = "kolab", version, about = "Budgeted computability lab")]
struct Cli {
    /// Default step budget for runs and complexity searches.
    #[arg(long, global = true, env = "KOLAB_BUDGET", default_value_t = 10_000)]
    budget: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run or assemble toy programs.
    #[command(subcommand)]
    Vm(VmCmd),
    /// Numbering utilities.
    #[command(subcommand)]
    Num(NumCmd),
    /// Budgeted complexity oracles on U.
    #[command(subcommand)]
    Cx(CxCmd),
    /// CSV profile of `(log #L_i(p), C_{U,L_i(p)}(U(p)))` for `i = 0..=|p|`.
    Profile {
        p: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play a game and verify its witnesses.
    Game(GameArgs),
    /// Re-verify the witnesses of a saved report.
    Verify {
        report: PathBuf,
        /// Verification stage (default: the one in the report's config).
        #[arg(long)]
        stage: Option<u64>,
    },
    /// Check a transcript against a fresh enumeration.
    Replay {
        transcript: PathBuf,
        /// Rerun this experiment config and compare the whole transcript.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum VmCmd {
    /// Run Φ on a program given as bits, a bits file or an assembly file.
    Run {
        #[arg(long)]
        program: String,
        #[arg(long, default_value = "-")]
        input: String,
    },
    /// Assemble a source file and print its bits.
    Asm {
        file: PathBuf,
        /// Print the disassembly of the decoded program instead.
        #[arg(long)]
        disasm: bool,
    },
}

#[derive(Subcommand)]
enum NumCmd {
    /// Measured additive constants as JSON.
    Constants,
}

#[derive(Subcommand)]
enum CxCmd {
    /// `C_U(x)` by exhaustive search up to `maxlen`.
    Exact {
        x: String,
        #[arg(long, default_value_t = 14)]
        maxlen: usize,
    },
    /// `C_{U,L(p)}(x)` for a list spec evaluated at `p`.
    List {
        #[arg(long)]
        spec: ListSpec,
        #[arg(long)]
        p: String,
        #[arg(long)]
        x: String,
    },
    /// Least `|t|` with `Φ_t` total on length `|q|` and printing `list` on `q`.
    Ct {
        /// Comma-separated members (`-` for the empty string).
        #[arg(long, default_value = "")]
        list: String,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 8)]
        maxlen: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GameArg {
    Th1,
    Th1t,
    Th2,
}

impl From<GameArg> for GameKind {
    fn from(g: GameArg) -> Self {
        match g {
            GameArg::Th1 => GameKind::Th1,
            GameArg::Th1t => GameKind::Th1t,
            GameArg::Th2 => GameKind::Th2,
        }
    }
}

#[derive(Args)]
struct GameArgs {
    game: GameArg,
    /// TOML file with experiment keys; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    list: Option<ListSpec>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    stages: Option<u64>,
    #[arg(long)]
    verify_stage: Option<u64>,
    #[arg(long)]
    list_budget: Option<u64>,
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    transport: bool,
    /// Report (witness) JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    constants: Option<PathBuf>,
}

fn parse_bits(s: &str) -> Result<BitString> {
    BitString::parse_token(s.trim()).with_context(|| format!("not a bit string: {s:?}"))
}

/// Bits given inline, or a file holding bits or assembly.
fn load_program(arg: &str) -> Result<BitString> {
    let path = Path::new(arg);
    if !path.exists() {
        return parse_bits(arg);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
    match BitString::parse_token(text.trim()) {
        Ok(b) => Ok(b),
        Err(_) => Ok(assemble_bits(&text).with_context(|| format!("assembling {arg}"))?),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn game(args: GameArgs) -> Result<ExitCode> {
    let game = GameKind::from(args.game);
    let mut cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::new(game, args.kmax.unwrap_or(6), args.stages.unwrap_or(16)),
    };
    cfg.game = game;
    if let Some(k) = args.kmax {
        cfg.kmax = k;
        cfg.nmax = cfg.nmax.min(k.saturating_sub(1));
    }
    if let Some(n) = args.nmax {
        cfg.nmax = n;
    }
    if let Some(s) = args.stages {
        cfg.stage_limit = s;
    }
    if let Some(s) = args.verify_stage {
        cfg.verify_stage = s;
    }
    if let Some(b) = args.list_budget {
        cfg.list_budget = b;
    }
    if let Some(l) = args.list {
        cfg.list = l;
    }
    cfg.augment |= args.augment;
    cfg.transport |= args.transport;

    let out = run_experiment(&cfg)?;
    let report = &out.report;
    write_out(args.out.as_deref(), &(report.to_json() + "\n"))?;
    if let Some(p) = &args.transcript {
        fs::write(p, &out.transcript).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.constants {
        fs::write(p, serde_json::to_string_pretty(&report.constants)? + "\n")?;
    }
    Ok(failures_to_exit(report.passed, report.failures()))
}

fn failures_to_exit(passed: bool, failures: Vec<(usize, String)>) -> ExitCode {
    if passed {
        return ExitCode::SUCCESS;
    }
    for (i, clause) in failures {
        eprintln!("witness {i}: clause {clause} failed");
    }
    ExitCode::FAILURE
}

fn verify(path: &Path, stage: Option<u64>) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: ExperimentReport = serde_json::from_str(&text).context("parsing report")?;
    let stage = stage.unwrap_or(report.config.verify_stage);
    let reports = reverify(&report, stage)?;
    let mut failures = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let verdict = if r.passed() { "pass" } else { "FAIL" };
        println!(
            "witness {i} k={} p={} x={}: {verdict}",
            r.k,
            r.p.token(),
            r.x.token()
        );
        for c in r.clauses.iter().filter(|c| !c.pass) {
            println!("  {}: {}", c.name, c.detail);
            failures.push((i, c.name.clone()));
        }
    }
    Ok(failures_to_exit(failures.is_empty(), failures))
}

fn replay_cmd(path: &Path, config: Option<&Path>) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(cfg) = config {
        let out = run_experiment(&load_config(cfg)?)?;
        if out.transcript == text {
            println!("transcript reproduced exactly");
            return Ok(ExitCode::SUCCESS);
        }
        let line = out
            .transcript
            .lines()
            .zip(text.lines())
            .position(|(a, b)| a != b);
        eprintln!(
            "transcript differs (first differing line {:?})",
            line.map(|l| l + 1)
        );
        return Ok(ExitCode::FAILURE);
    }
    let lab = Lab::new();
    let mut sections: Vec<String> = Vec::new();
    for line in text.lines() {
        if line.starts_with("# ") || sections.is_empty() {
            sections.push(String::new());
        }
        let cur = sections.last_mut().expect("section");
        cur.push_str(line);
        cur.push('\n');
    }
    let mut ok = true;
    for section in &sections {
        let t = parse_transcript(section)?;
        let numbering: Arc<dyn Numbering> = match t.machine.as_str() {
            "U" => Arc::new(lab.u.clone()),
            "Phi/1" => lab.phi.clone(),
            "Phi/2" => lab.phi2.clone(),
            other => bail!(
                "machine {other} depends on game state; pass --config to rerun the experiment"
            ),
        };
        match replay(numbering, &t, t.last_stage()) {
            Ok(()) => println!(
                "{}: {} events through stage {} reproduced",
                t.machine,
                t.events.len(),
                t.last_stage()
            ),
            Err(i) => {
                ok = false;
                println!("{}: event {i} differs", t.machine);
            }
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let budget = StepBudget(cli.budget);
    match cli.cmd {
        Cmd::Vm(VmCmd::Run { program, input }) => {
            let prog = load_program(&program)?;
            let outcome = Machine::new().run_bits(&prog, &parse_bits(&input)?, budget);
            println!("{outcome}");
        }
        Cmd::Vm(VmCmd::Asm { file, disasm }) => {
            let text =
                fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let bits = assemble_bits(&text)?;
            if disasm {
                print!("{}", disassemble(&ToyProgram::decode(&bits)));
            } else {
                println!("{}", bits.token());
            }
        }
        Cmd::Num(NumCmd::Constants) => {
            println!("{}", serde_json::to_string_pretty(&measure_constants()?)?);
        }
        Cmd::Cx(cx) => {
            let lab = Lab::new();
            let res = match cx {
                CxCmd::Exact { x, maxlen } => c_exact(&lab.u, &parse_bits(&x)?, maxlen, budget),
                CxCmd::List { spec, p, x } => {
                    let env = ListEnv {
                        target: &lab.u,
                        base: lab.phi.as_ref(),
                        list_budget: budget,
                    };
                    let list = spec.eval(env, &parse_bits(&p)?)?;
                    c_list(&lab.u, &list, &parse_bits(&x)?, budget)
                }
                CxCmd::Ct { list, q, maxlen } => {
                    let members: ListValue = list
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(parse_bits)
                        .collect::<Result<_>>()?;
                    ct_total(lab.phi.as_ref(), &members, &parse_bits(&q)?, maxlen, budget)
                }
            };
            println!("{}", serde_json::to_string_pretty(&res)?);
        }
        Cmd::Profile { p, out } => {
            let lab = Lab::new();
            let p = load_program(&p)?;
            let points = profile_li(&lab.u, &p, budget)?;
            let mut csv = Vec::new();
            write_profile_csv(&points, &mut csv)?;
            write_out(out.as_deref(), std::str::from_utf8(&csv)?)?;
            for d in staircase_deviations(&lab.u, &points, None) {
                eprintln!("staircase deviation: {d}");
            }
        }
        Cmd::Game(args) => return game(args),
        Cmd::Verify { report, stage } => return verify(&report, stage),
        Cmd::Replay { transcript, config } => return replay_cmd(&transcript, config.as_deref()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
