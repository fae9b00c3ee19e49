//! Command-line frontend tying code generation, certification, game solving,
//! compilation, and channel simulation into reproducible pipelines.
//!
//! Exit codes: 0 on success or a positive verdict, 1 on a verified negative
//! result (the certificate or counterexample is printed), 2 on usage errors.
//! Summaries go to stdout as single JSON objects; diagnostics go to stderr.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num::ToPrimitive;
use serde::de::DeserializeOwned;
use serde_json::json;

use manifest::Session;
use ulamtree::bridge::{
    check_protocol_locality, compile_coordinator, compile_parallel, protocol_to_strategy,
    robustness_bound, ProtocolTree, RobustProtocol,
};
use ulamtree::channelsim::{
    adversarial_sweep, chernoff_bound, monte_carlo, parse_channel_spec, run, ChannelModel,
    SweepOptions, SweepVerdict,
};
use ulamtree::treecode::{
    decode_prefix, failure_prob_bound, generate_tsequence, greedy_extend, verify_code, BoundKind,
    TSequence,
};
use ulamtree::ulamgame::{
    check_winning, make_semi_static, solve_game, FunctionTable, GameConfig, LossWitness,
    StrategyTree, Verdict, Winner,
};

#[derive(Parser)]
#[command(
    name = "ulamtree",
    version,
    about = "Binary tree codes, question games with lies, and noise-resistant protocols"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, certify, decode, and extend tree codes
    #[command(subcommand)]
    Treecode(TreecodeCmd),
    /// Solve games, verify strategies, reshape them semi-static
    #[command(subcommand)]
    Game(GameCmd),
    /// Convert protocols to strategies and compile strategies to protocols
    #[command(subcommand)]
    Compile(CompileCmd),
    /// Execute compiled protocols over noisy channels
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Closed-form bounds
    #[command(subcommand)]
    Bound(BoundCmd),
}

#[derive(Subcommand)]
enum TreecodeCmd {
    /// Generate a generator sequence with a fixed independent prefix
    Gen(GenArgs),
    /// Certify the distance property by exhaustive difference enumeration
    Verify(VerifyArgs),
    /// Decode a received letter prefix to the nearest path
    Decode(DecodeArgs),
    /// Extend a certified sequence letter by letter
    Extend(ExtendArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Bit width of the alphabet
    #[arg(long)]
    r: u32,
    /// Number of letters
    #[arg(long)]
    depth: usize,
    /// Seed for the random tail
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    code: PathBuf,
    /// Defaults to min(20, code depth)
    #[arg(long)]
    max_depth: Option<usize>,
    /// half | piecewise
    #[arg(long, default_value = "piecewise")]
    bound: String,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    code: PathBuf,
    /// Comma-separated received letters
    #[arg(long)]
    received: String,
}

#[derive(Args)]
struct ExtendArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    target_depth: usize,
    #[arg(long, default_value_t = 16)]
    candidates: usize,
    #[arg(long, default_value = "piecewise")]
    bound: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GameCmd {
    /// Decide a game and emit a winning strategy when one exists
    Solve(SolveArgs),
    /// Check a strategy against every adversary answer sequence
    Check(CheckArgs),
    /// Reshape a strategy to one coordinate per depth, uniform leaf depth
    Semistatic(SemistaticArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    function: PathBuf,
    /// Question budget
    #[arg(long)]
    q: u32,
    /// Lie budget
    #[arg(long)]
    l: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long)]
    function: PathBuf,
    /// Lie budget
    #[arg(long)]
    l: u32,
}

#[derive(Args)]
struct SemistaticArgs {
    #[arg(long)]
    strategy: PathBuf,
    /// Arity of the round-robin schedule
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CompileCmd {
    /// Protocol to strategy (checks sender locality on the way)
    P2s(P2sArgs),
    /// Semi-static strategy plus tree code to a runnable protocol
    S2p(S2pArgs),
}

#[derive(Args)]
struct P2sArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    function: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct S2pArgs {
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    k: usize,
    /// coordinator | parallel
    #[arg(long, default_value = "coordinator")]
    mode: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// One execution over an explicit channel
    Run(RunArgs),
    /// Exhaustive (or sampled) sweep over flip patterns up to a budget
    Sweep(SweepArgs),
    /// Monte Carlo failure estimation over a probabilistic channel
    Mc(McArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    protocol: PathBuf,
    /// Comma-separated input tuple, e.g. 1,0
    #[arg(long)]
    inputs: String,
    /// adversarial:pattern=<msg:bit,..> or bsc:eps=<f>:seed=<n>
    #[arg(long)]
    channel: String,
    /// Compare outputs against this function (exit 1 on mismatch)
    #[arg(long)]
    function: Option<PathBuf>,
    /// Write the bit-level transcript as JSON lines
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    function: PathBuf,
    /// adversarial:budget=<b>[:samples=<m>]
    #[arg(long)]
    channel: String,
    /// Seed for sampled sweeps
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on exhaustive executions
    #[arg(long)]
    limit: Option<u128>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    function: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Fixed input tuple; random per trial when omitted
    #[arg(long)]
    input: Option<String>,
}

#[derive(Subcommand)]
enum BoundCmd {
    /// Worst-case bits and tolerated error fraction of a compilation
    Robustness(RobustnessArgs),
    /// Binomial tail bound for a probabilistic channel
    Chernoff(ChernoffArgs),
    /// Probability that a random generator sequence fails certification
    TreecodeP(TreecodePArgs),
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long)]
    k: usize,
    /// Strategy depth
    #[arg(long)]
    q: u64,
    /// Lie budget
    #[arg(long)]
    l: u64,
}

#[derive(Args)]
struct ChernoffArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    eps0: f64,
    #[arg(long)]
    bits: u64,
}

#[derive(Args)]
struct TreecodePArgs {
    #[arg(long)]
    r: u32,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

const PASS: ExitCode = ExitCode::SUCCESS;
const NEGATIVE: ExitCode = ExitCode::FAILURE;

fn execute(command: Command) -> Result<ExitCode> {
    let mut session = Session::new();
    match command {
        Command::Treecode(cmd) => treecode_cmd(cmd, &mut session),
        Command::Game(cmd) => game_cmd(cmd, &mut session),
        Command::Compile(cmd) => compile_cmd(cmd, &mut session),
        Command::Simulate(cmd) => simulate_cmd(cmd, &mut session),
        Command::Bound(cmd) => bound_cmd(cmd),
    }
}

fn load<T: DeserializeOwned>(session: &mut Session, path: &Path, what: &str) -> Result<T> {
    let bytes = session.read_file(path)?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not a valid {what} file", path.display()))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} entry {p:?}: {e}"))
        })
        .collect()
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

// typed outputs keep their declared field order
fn emit_typed<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

// ---------------------------------------------------------------------------

fn treecode_cmd(cmd: TreecodeCmd, session: &mut Session) -> Result<ExitCode> {
    match cmd {
        TreecodeCmd::Gen(a) => {
            session.note_seed(a.seed);
            let ts = generate_tsequence(a.r, a.depth, a.seed)?;
            session.write_artifact(&a.out, &serde_json::to_string_pretty(&ts)?)?;
            emit(json!({"written": a.out.display().to_string(), "r": a.r, "depth": a.depth}));
            Ok(PASS)
        }
        TreecodeCmd::Verify(a) => {
            let ts: TSequence = load(session, &a.code, "t-sequence")?;
            let bound = BoundKind::from_str(&a.bound)?;
            let depth = a.max_depth.unwrap_or_else(|| ts.depth().min(20));
            let cert = verify_code(&ts, depth, bound)?;
            let pass = cert.is_pass();
            emit_typed(&cert)?;
            Ok(if pass { PASS } else { NEGATIVE })
        }
        TreecodeCmd::Decode(a) => {
            let ts: TSequence = load(session, &a.code, "t-sequence")?;
            let received = parse_list::<u64>(&a.received, "letter")?;
            let path = decode_prefix(&ts, &received)?;
            emit(json!({"path": path.to_string(), "depth": path.depth()}));
            Ok(PASS)
        }
        TreecodeCmd::Extend(a) => {
            let ts: TSequence = load(session, &a.code, "t-sequence")?;
            let bound = BoundKind::from_str(&a.bound)?;
            let result = greedy_extend(&ts, a.target_depth, a.candidates, bound)?;
            session.write_artifact(&a.out, &serde_json::to_string_pretty(&result.sequence)?)?;
            let pass = result.certificate.is_pass();
            emit(json!({
                "written": a.out.display().to_string(),
                "depth": result.sequence.depth(),
                "margin": result.best_margin,
                "certificate": serde_json::to_value(&result.certificate)?,
            }));
            Ok(if pass { PASS } else { NEGATIVE })
        }
    }
}

fn game_cmd(cmd: GameCmd, session: &mut Session) -> Result<ExitCode> {
    match cmd {
        GameCmd::Solve(a) => {
            let f: FunctionTable = load(session, &a.function, "function table")?;
            let outcome = solve_game(&f, GameConfig { q: a.q, l: a.l })?;
            match outcome.winner {
                Winner::Paul => {
                    let strategy = outcome.strategy.expect("winner carries a witness");
                    if let Some(out) = &a.out {
                        session.write_artifact(out, &serde_json::to_string_pretty(&strategy)?)?;
                    }
                    emit(json!({
                        "winner": "paul",
                        "depth": strategy.depth(),
                        "written": a.out.map(|p| p.display().to_string()),
                    }));
                    Ok(PASS)
                }
                Winner::Carole => {
                    emit(json!({"winner": "carole"}));
                    Ok(NEGATIVE)
                }
            }
        }
        GameCmd::Check(a) => {
            let strategy: StrategyTree = load(session, &a.strategy, "strategy")?;
            let f: FunctionTable = load(session, &a.function, "function table")?;
            match check_winning(&strategy, &f, a.l)? {
                Verdict::Winning => {
                    emit(json!({"winning": true, "l": a.l}));
                    Ok(PASS)
                }
                Verdict::Loss(report) => {
                    let answers: String = report
                        .answers
                        .iter()
                        .map(|&b| if b { '1' } else { '0' })
                        .collect();
                    let witness = match &report.witness {
                        LossWitness::ConflictingSurvivors { first, second } => json!({
                            "conflicting_survivors": [first, second],
                        }),
                        LossWitness::SurvivorContradictsLeaf { tuple } => json!({
                            "survivor_contradicts_leaf": tuple,
                        }),
                    };
                    emit(json!({
                        "winning": false,
                        "l": a.l,
                        "answers": answers,
                        "leaf": report.leaf_value,
                        "witness": witness,
                    }));
                    Ok(NEGATIVE)
                }
            }
        }
        GameCmd::Semistatic(a) => {
            let strategy: StrategyTree = load(session, &a.strategy, "strategy")?;
            let out = make_semi_static(&strategy, a.k)?;
            session.write_artifact(&a.out, &serde_json::to_string_pretty(&out)?)?;
            emit(json!({
                "written": a.out.display().to_string(),
                "depth": out.depth(),
                "k": a.k,
            }));
            Ok(PASS)
        }
    }
}

fn compile_cmd(cmd: CompileCmd, session: &mut Session) -> Result<ExitCode> {
    match cmd {
        CompileCmd::P2s(a) => {
            let protocol: ProtocolTree = load(session, &a.protocol, "protocol")?;
            let f: FunctionTable = load(session, &a.function, "function table")?;
            let locality = check_protocol_locality(&protocol);
            let strategy = protocol_to_strategy(&protocol, &f)?;
            session.write_artifact(&a.out, &serde_json::to_string_pretty(&strategy)?)?;
            emit(json!({
                "written": a.out.display().to_string(),
                "depth": strategy.depth(),
                "locality": serde_json::to_value(&locality)?,
            }));
            Ok(if locality.consistent { PASS } else { NEGATIVE })
        }
        CompileCmd::S2p(a) => {
            let strategy: StrategyTree = load(session, &a.strategy, "strategy")?;
            let ts: TSequence = load(session, &a.code, "t-sequence")?;
            let rp = match a.mode.as_str() {
                "coordinator" => compile_coordinator(&strategy, &ts, a.k)?,
                "parallel" => compile_parallel(&strategy, &ts, a.k)?,
                other => bail!("unknown mode {other:?} (expected coordinator or parallel)"),
            };
            session.write_artifact(&a.out, &serde_json::to_string_pretty(&rp)?)?;
            emit(json!({
                "written": a.out.display().to_string(),
                "mode": a.mode,
                "rounds": rp.rounds(),
                "bit_total": rp.bit_total(),
            }));
            Ok(PASS)
        }
    }
}

fn simulate_cmd(cmd: SimulateCmd, session: &mut Session) -> Result<ExitCode> {
    match cmd {
        SimulateCmd::Run(a) => {
            let rp: RobustProtocol = load(session, &a.protocol, "robust protocol")?;
            let inputs = parse_list::<usize>(&a.inputs, "input")?;
            let channel = parse_channel_spec(&a.channel)?;
            if let ChannelModel::Probabilistic { seed, .. } = &channel {
                session.note_seed(*seed);
            }
            let expected = match &a.function {
                Some(path) => {
                    let f: FunctionTable = load(session, path, "function table")?;
                    Some(f.value(&inputs)?)
                }
                None => None,
            };
            let outcome = run(&rp, &inputs, &channel)?;
            if let Some(path) = &a.transcript {
                session.write_artifact(path, &outcome.transcript.to_jsonl())?;
            }
            let t = &outcome.transcript;
            emit(json!({
                "outputs": outcome.outputs,
                "q1": t.q1, "q2": t.q2, "r1": t.r1, "r2": t.r2,
                "bit_total": t.bit_total,
                "expected": expected,
            }));
            let ok = expected
                .map(|v| outcome.outputs.iter().all(|o| *o == Some(v)))
                .unwrap_or(true);
            Ok(if ok { PASS } else { NEGATIVE })
        }
        SimulateCmd::Sweep(a) => {
            let rp: RobustProtocol = load(session, &a.protocol, "robust protocol")?;
            let f: FunctionTable = load(session, &a.function, "function table")?;
            let ChannelModel::Budget { budget, samples } = parse_channel_spec(&a.channel)? else {
                bail!("sweep needs an adversarial:budget=<b> channel spec");
            };
            let mut opts = SweepOptions {
                samples,
                ..SweepOptions::default()
            };
            if let Some(limit) = a.limit {
                opts.limit = limit;
            }
            if let Some(seed) = a.seed {
                session.note_seed(seed);
                opts.seed = seed;
            } else if samples.is_some() {
                bail!("sampled sweeps need an explicit --seed");
            }
            let report = adversarial_sweep(&rp, &f, budget, opts)?;
            let pass = matches!(report.verdict, SweepVerdict::Pass);
            emit_typed(&report)?;
            Ok(if pass { PASS } else { NEGATIVE })
        }
        SimulateCmd::Mc(a) => {
            let rp: RobustProtocol = load(session, &a.protocol, "robust protocol")?;
            let f: FunctionTable = load(session, &a.function, "function table")?;
            session.note_seed(a.seed);
            let fixed = match &a.input {
                Some(s) => Some(parse_list::<usize>(s, "input")?),
                None => None,
            };
            let est = monte_carlo(&rp, &f, a.eps, a.trials, a.seed, fixed.as_deref())?;
            emit_typed(&est)?;
            Ok(PASS)
        }
    }
}

fn bound_cmd(cmd: BoundCmd) -> Result<ExitCode> {
    match cmd {
        BoundCmd::Robustness(a) => {
            let report = robustness_bound(a.k, a.q, a.l)?;
            let decimal = report.fraction.to_f64().unwrap_or(f64::NAN);
            let mut value = serde_json::to_value(&report)?;
            value["decimal"] = json!(decimal);
            emit(value);
            Ok(PASS)
        }
        BoundCmd::Chernoff(a) => {
            let bound = chernoff_bound(a.eps, a.eps0, a.bits)?;
            emit(json!({
                "epsilon": a.eps,
                "epsilon0": a.eps0,
                "bits": a.bits,
                "bound": bound,
            }));
            Ok(PASS)
        }
        BoundCmd::TreecodeP(a) => {
            let p = failure_prob_bound(a.r)?;
            emit(json!({
                "r": a.r,
                "p_bound": p.to_string(),
                "decimal": p.to_f64().unwrap_or(f64::NAN),
            }));
            Ok(PASS)
        }
    }
}
