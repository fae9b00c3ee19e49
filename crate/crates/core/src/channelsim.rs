//! Execution of compiled protocols over noisy binary symmetric channels.
//!
//! A channel can flip an explicit set of bits (adversarial), any set up to a
//! budget (swept exhaustively or sampled), or each bit independently with
//! probability epsilon (probabilistic). Bits are never lost or inserted, so
//! the transcript shape depends on the protocol alone. Every run is a pure
//! function of (protocol, inputs, channel), including the probabilistic case,
//! which draws its flips from an explicit seed in transmission order.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::{Mode, RobustProtocol};
use crate::rng;
use crate::treecode::{decode_prefix, last_label, Letter, TSequence};
use crate::ulamgame::FunctionTable;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("flip pattern out of range: {0}")]
    PatternOverflow(String),
    #[error("sweep too large: {runs} runs exceed the limit {limit}; pass a sample count")]
    ResourceLimit { runs: u128, limit: u128 },
}

type Result<T> = std::result::Result<T, SimError>;

// ---------------------------------------------------------------------------
// Channels

/// Channel noise model for a single run.
///
/// CLI syntax: `adversarial:pattern=<msg:bit,..>`,
/// `adversarial:budget=<b>[:samples=<m>]`, `bsc:eps=<float>:seed=<int>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "lowercase")]
pub enum ChannelModel {
    /// Flip exactly the listed (message index, bit position) pairs.
    Adversarial { pattern: Vec<(usize, u8)> },
    /// Flip budget for [`adversarial_sweep`]; not runnable directly.
    Budget { budget: usize, samples: Option<u64> },
    /// Independent flips with probability `epsilon`, drawn from `seed`.
    Probabilistic { epsilon: f64, seed: u64 },
}

impl ChannelModel {
    pub fn noiseless() -> Self {
        ChannelModel::Adversarial { pattern: vec![] }
    }
}

/// Parses the CLI channel grammar.
pub fn parse_channel_spec(spec: &str) -> Result<ChannelModel> {
    let bad = |msg: String| SimError::InvalidParameter(msg);
    if let Some(rest) = spec.strip_prefix("adversarial:") {
        if let Some(list) = rest.strip_prefix("pattern=") {
            let mut pattern = Vec::new();
            for item in list.split(',').filter(|s| !s.is_empty()) {
                let (msg, bit) = item
                    .split_once(':')
                    .ok_or_else(|| bad(format!("pattern item {item:?} is not msg:bit")))?;
                let msg = msg
                    .parse::<usize>()
                    .map_err(|e| bad(format!("bad message index {msg:?}: {e}")))?;
                let bit = bit
                    .parse::<u8>()
                    .map_err(|e| bad(format!("bad bit position {bit:?}: {e}")))?;
                pattern.push((msg, bit));
            }
            return Ok(ChannelModel::Adversarial { pattern });
        }
        if let Some(rest) = rest.strip_prefix("budget=") {
            let (budget, samples) = match rest.split_once(":samples=") {
                None => (rest, None),
                Some((b, m)) => (
                    b,
                    Some(
                        m.parse::<u64>()
                            .map_err(|e| bad(format!("bad sample count {m:?}: {e}")))?,
                    ),
                ),
            };
            let budget = budget
                .parse::<usize>()
                .map_err(|e| bad(format!("bad budget {budget:?}: {e}")))?;
            return Ok(ChannelModel::Budget { budget, samples });
        }
        return Err(bad(format!("unknown adversarial channel spec {spec:?}")));
    }
    if let Some(rest) = spec.strip_prefix("bsc:") {
        let mut epsilon = None;
        let mut seed = None;
        for part in rest.split(':') {
            if let Some(e) = part.strip_prefix("eps=") {
                epsilon = Some(
                    e.parse::<f64>()
                        .map_err(|err| bad(format!("bad epsilon {e:?}: {err}")))?,
                );
            } else if let Some(s) = part.strip_prefix("seed=") {
                seed = Some(
                    s.parse::<u64>()
                        .map_err(|err| bad(format!("bad seed {s:?}: {err}")))?,
                );
            } else {
                return Err(bad(format!("unknown bsc field {part:?}")));
            }
        }
        let epsilon = epsilon.ok_or_else(|| bad("bsc channel needs eps=<float>".to_string()))?;
        let seed = seed.ok_or_else(|| bad("bsc channel needs seed=<int>".to_string()))?;
        check_epsilon(epsilon)?;
        return Ok(ChannelModel::Probabilistic { epsilon, seed });
    }
    Err(bad(format!("unknown channel spec {spec:?}")))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(SimError::InvalidParameter(format!(
            "epsilon {epsilon} outside [0, 1]"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Transcripts

/// One transmitted bit, as sent and as received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRecord {
    pub round: usize,
    pub sender: usize,
    pub receiver: usize,
    pub sent: u8,
    pub received: u8,
}

/// Full record of a run: every bit on the wire, each processor's final state
/// estimates (as root paths), the outputs, and the error counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<BitRecord>,
    /// Per processor: the paths it tracks (one in coordinator mode, k in
    /// parallel mode, own column included).
    pub final_paths: Vec<Vec<String>>,
    /// Per processor output; `None` is a declared failure (majority tie).
    pub outputs: Vec<Option<i64>>,
    /// Answer bits transmitted.
    pub q1: u64,
    /// Letters transmitted.
    pub q2: u64,
    /// Flipped answer bits.
    pub r1: u64,
    /// Letters with at least one flipped bit.
    pub r2: u64,
    pub bit_total: u64,
}

impl Transcript {
    /// JSON lines: one record per transmitted bit, then a summary record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(rec).unwrap());
        }
        let summary = serde_json::json!({
            "summary": {
                "outputs": self.outputs,
                "final_paths": self.final_paths,
                "q1": self.q1,
                "q2": self.q2,
                "r1": self.r1,
                "r2": self.r2,
                "bit_total": self.bit_total,
            }
        });
        let _ = writeln!(out, "{summary}");
        out
    }
}

/// Outputs plus the transcript of one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub outputs: Vec<Option<i64>>,
    pub transcript: Transcript,
}

// ---------------------------------------------------------------------------
// Message plan and flips

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageSpec {
    pub round: usize,
    pub sender: usize,
    pub receiver: usize,
    pub bits: u8,
}

/// Transmission layout of a protocol: every message in order with its width.
/// Depends only on the protocol, never on inputs or the channel.
pub fn message_plan(rp: &RobustProtocol) -> Vec<MessageSpec> {
    let letter_bits = rp.code.r() as u8;
    let mut plan = Vec::new();
    for spec in &rp.schedule {
        for &(sender, receiver) in &spec.uplinks {
            plan.push(MessageSpec {
                round: spec.round,
                sender,
                receiver,
                bits: 1,
            });
        }
        for &(sender, receiver) in &spec.downlinks {
            plan.push(MessageSpec {
                round: spec.round,
                sender,
                receiver,
                bits: letter_bits,
            });
        }
    }
    plan
}

enum Flipper {
    Pattern(HashSet<(usize, u8)>),
    Bernoulli(Box<ChaCha8Rng>, f64),
}

impl Flipper {
    fn new(ch: &ChannelModel, plan: &[MessageSpec]) -> Result<Self> {
        match ch {
            ChannelModel::Adversarial { pattern } => {
                for &(msg, bit) in pattern {
                    let spec = plan.get(msg).ok_or_else(|| {
                        SimError::PatternOverflow(format!(
                            "message index {msg} beyond the {} transmissions",
                            plan.len()
                        ))
                    })?;
                    if bit >= spec.bits {
                        return Err(SimError::PatternOverflow(format!(
                            "bit {bit} beyond the {}-bit message {msg}",
                            spec.bits
                        )));
                    }
                }
                Ok(Flipper::Pattern(pattern.iter().copied().collect()))
            }
            ChannelModel::Probabilistic { epsilon, seed } => {
                check_epsilon(*epsilon)?;
                Ok(Flipper::Bernoulli(Box::new(rng::seeded(*seed)), *epsilon))
            }
            ChannelModel::Budget { .. } => Err(SimError::InvalidParameter(
                "budget channels drive adversarial_sweep, not single runs".into(),
            )),
        }
    }

    fn flip(&mut self, msg: usize, bit: u8) -> bool {
        match self {
            Flipper::Pattern(set) => set.contains(&(msg, bit)),
            Flipper::Bernoulli(rng, eps) => rng.gen_bool(*eps),
        }
    }
}

// ---------------------------------------------------------------------------
// Execution

struct Wire<'a> {
    flipper: Flipper,
    records: Vec<BitRecord>,
    msg_idx: usize,
    q1: u64,
    q2: u64,
    r1: u64,
    r2: u64,
    plan: &'a [MessageSpec],
}

impl Wire<'_> {
    fn send_answer(&mut self, round: usize, sender: usize, receiver: usize, bit: bool) -> bool {
        debug_assert_eq!(self.plan[self.msg_idx].bits, 1);
        let flipped = self.flipper.flip(self.msg_idx, 0);
        let received = bit ^ flipped;
        self.records.push(BitRecord {
            round,
            sender,
            receiver,
            sent: bit.into(),
            received: received.into(),
        });
        self.msg_idx += 1;
        self.q1 += 1;
        self.r1 += u64::from(flipped);
        received
    }

    fn send_letter(
        &mut self,
        round: usize,
        sender: usize,
        receiver: usize,
        letter: Letter,
        width: u8,
    ) -> Letter {
        debug_assert_eq!(self.plan[self.msg_idx].bits, width);
        let mut received = 0u64;
        let mut corrupted = false;
        for b in 0..width {
            let sent = letter >> b & 1 == 1;
            let flipped = self.flipper.flip(self.msg_idx, b);
            let got = sent ^ flipped;
            corrupted |= flipped;
            received |= u64::from(got) << b;
            self.records.push(BitRecord {
                round,
                sender,
                receiver,
                sent: sent.into(),
                received: got.into(),
            });
        }
        self.msg_idx += 1;
        self.q2 += 1;
        self.r2 += u64::from(corrupted);
        received
    }
}

fn path_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Executes one run. Deterministic in (protocol, inputs, channel).
pub fn run(rp: &RobustProtocol, inputs: &[usize], ch: &ChannelModel) -> Result<RunOutcome> {
    if inputs.len() != rp.k {
        return Err(SimError::InvalidParameter(format!(
            "{} inputs for {} processors",
            inputs.len(),
            rp.k
        )));
    }
    if let Some(bad) = inputs.iter().find(|&&x| x >= 64) {
        return Err(SimError::InvalidParameter(format!(
            "input value {bad} out of range"
        )));
    }
    // protocols may come from files; refuse schedules that name processors
    // outside 1..=k rather than indexing out of bounds
    for spec in &rp.schedule {
        let ids = spec
            .uplinks
            .iter()
            .chain(&spec.downlinks)
            .flat_map(|&(a, b)| [a, b])
            .chain(std::iter::once(spec.index));
        for id in ids {
            if id < 1 || id > rp.k {
                return Err(SimError::InvalidParameter(format!(
                    "schedule names processor {id} outside 1..={}",
                    rp.k
                )));
            }
        }
    }
    let plan = message_plan(rp);
    let wire = Wire {
        flipper: Flipper::new(ch, &plan)?,
        records: Vec::new(),
        msg_idx: 0,
        q1: 0,
        q2: 0,
        r1: 0,
        r2: 0,
        plan: &plan,
    };
    match rp.mode {
        Mode::Coordinator => run_coordinator(rp, inputs, wire),
        Mode::Parallel => run_parallel(rp, inputs, wire),
    }
}

fn membership(subset: u64, x: usize) -> bool {
    subset >> x & 1 == 1
}

fn answer_for(
    rp: &RobustProtocol,
    inputs: &[usize],
    processor: usize,
    state: &[bool],
) -> Result<bool> {
    let (_, subset) = rp
        .strategy
        .node_at(state)
        .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
    Ok(membership(subset, inputs[processor - 1]))
}

fn leaf_at(rp: &RobustProtocol, path: &[bool]) -> Result<i64> {
    rp.strategy
        .walk(path)
        .map_err(|e| SimError::InvalidParameter(e.to_string()))
}

fn decode_path(ts: &TSequence, letters: &[Letter]) -> Result<Vec<bool>> {
    Ok(decode_prefix(ts, letters)
        .map_err(|e| SimError::InvalidParameter(e.to_string()))?
        .bits()
        .to_vec())
}

// Processor 1 plays the strategy for real; everyone else re-decodes its
// letter stream each round and answers from the decoded state.
fn run_coordinator(rp: &RobustProtocol, inputs: &[usize], mut wire: Wire) -> Result<RunOutcome> {
    let k = rp.k;
    let width = rp.code.r() as u8;
    let mut coord_path: Vec<bool> = Vec::with_capacity(rp.rounds());
    let mut heard: Vec<Vec<Letter>> = vec![Vec::new(); k + 1];
    for spec in &rp.schedule {
        let i = spec.index;
        let answer = if i == 1 {
            answer_for(rp, inputs, 1, &coord_path)?
        } else {
            let estimate = decode_path(&rp.code, &heard[i])?;
            answer_for(rp, inputs, i, &estimate)?
        };
        let mut received = answer;
        for &(from, to) in &spec.uplinks {
            received = wire.send_answer(spec.round, from, to, answer);
        }
        coord_path.push(received);
        let letter = last_label(&rp.code, &coord_path);
        for &(from, to) in &spec.downlinks {
            let got = wire.send_letter(spec.round, from, to, letter, width);
            heard[to].push(got);
        }
    }
    let mut outputs: Vec<Option<i64>> = Vec::with_capacity(k);
    let mut final_paths: Vec<Vec<String>> = Vec::with_capacity(k);
    outputs.push(Some(leaf_at(rp, &coord_path)?));
    final_paths.push(vec![path_string(&coord_path)]);
    for j in 2..=k {
        let estimate = decode_path(&rp.code, &heard[j])?;
        outputs.push(Some(leaf_at(rp, &estimate)?));
        final_paths.push(vec![path_string(&estimate)]);
    }
    Ok(finish(wire, outputs, final_paths))
}

// Every processor advances its own state and tracks everyone else's by
// decoding their letter streams; outputs are the majority of the k leaves.
fn run_parallel(rp: &RobustProtocol, inputs: &[usize], mut wire: Wire) -> Result<RunOutcome> {
    let k = rp.k;
    let width = rp.code.r() as u8;
    let mut own: Vec<Vec<bool>> = vec![Vec::new(); k + 1];
    // heard[j][m]: letters j received from m
    let mut heard: Vec<Vec<Vec<Letter>>> = vec![vec![Vec::new(); k + 1]; k + 1];
    for spec in &rp.schedule {
        let i = spec.index;
        // answers to each peer, from the sender's estimate of that peer
        let mut incoming: Vec<bool> = vec![false; k + 1];
        incoming[i] = answer_for(rp, inputs, i, &own[i])?;
        for &(from, to) in &spec.uplinks {
            let estimate = decode_path(&rp.code, &heard[from][to])?;
            let answer = answer_for(rp, inputs, from, &estimate)?;
            incoming[to] = wire.send_answer(spec.round, from, to, answer);
        }
        for j in 1..=k {
            let bit = incoming[j];
            own[j].push(bit);
        }
        for &(from, to) in &spec.downlinks {
            let letter = last_label(&rp.code, &own[from]);
            let got = wire.send_letter(spec.round, from, to, letter, width);
            heard[to][from].push(got);
        }
    }
    let mut outputs: Vec<Option<i64>> = Vec::with_capacity(k);
    let mut final_paths: Vec<Vec<String>> = Vec::with_capacity(k);
    for j in 1..=k {
        let mut values: Vec<i64> = Vec::with_capacity(k);
        let mut paths: Vec<String> = Vec::with_capacity(k);
        for m in 1..=k {
            let path = if m == j {
                own[j].clone()
            } else {
                decode_path(&rp.code, &heard[j][m])?
            };
            values.push(leaf_at(rp, &path)?);
            paths.push(path_string(&path));
        }
        outputs.push(majority(&values, k));
        final_paths.push(paths);
    }
    Ok(finish(wire, outputs, final_paths))
}

// strict majority of the k tracked values; a tie is a declared failure
fn majority(values: &[i64], k: usize) -> Option<i64> {
    let need = k / 2 + 1;
    values
        .iter()
        .find(|&&v| values.iter().filter(|&&w| w == v).count() >= need)
        .copied()
}

fn finish(wire: Wire, outputs: Vec<Option<i64>>, final_paths: Vec<Vec<String>>) -> RunOutcome {
    let transcript = Transcript {
        records: wire.records,
        final_paths,
        outputs: outputs.clone(),
        q1: wire.q1,
        q2: wire.q2,
        r1: wire.r1,
        r2: wire.r2,
        bit_total: wire.q1 + 4 * wire.q2,
    };
    RunOutcome {
        outputs,
        transcript,
    }
}

// ---------------------------------------------------------------------------
// Adversarial sweeps

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVerdict {
    Pass,
    Fail {
        inputs: Vec<usize>,
        pattern: Vec<(usize, u8)>,
        outputs: Vec<Option<i64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub verdict: SweepVerdict,
    pub budget: usize,
    pub bit_total: u64,
    pub exhaustive: bool,
    pub runs: u64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        matches!(self.verdict, SweepVerdict::Pass)
    }
}

/// Default ceiling on sweep executions.
pub const DEFAULT_SWEEP_LIMIT: u128 = 5_000_000;

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub limit: u128,
    /// Fall back to this many random (input, pattern) samples when the
    /// exhaustive count exceeds the limit.
    pub samples: Option<u64>,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            limit: DEFAULT_SWEEP_LIMIT,
            samples: None,
            seed: 0,
        }
    }
}

fn correct_outputs(mode: Mode, outputs: &[Option<i64>], expected: i64) -> bool {
    match mode {
        // every processor must produce the value
        Mode::Coordinator => outputs.iter().all(|o| *o == Some(expected)),
        // declared failures are tolerated, wrong answers are not
        Mode::Parallel => outputs.iter().all(|o| o.is_none_or(|v| v == expected)),
    }
}

/// Checks every input against every flip pattern of at most `budget` bits
/// (or a seeded random sample when that is too large). Returns the first
/// counterexample in enumeration order.
pub fn adversarial_sweep(
    rp: &RobustProtocol,
    f: &FunctionTable,
    budget: usize,
    opts: SweepOptions,
) -> Result<SweepReport> {
    if f.arity() != rp.k {
        return Err(SimError::InvalidParameter(format!(
            "function arity {} does not match k={}",
            f.arity(),
            rp.k
        )));
    }
    let plan = message_plan(rp);
    let bit_total: u64 = plan.iter().map(|m| m.bits as u64).sum();
    let budget_eff = budget.min(bit_total as usize);
    let combos: u128 = (0..=budget_eff as u64)
        .map(|b| binomial_u128(bit_total, b))
        .sum();
    let total_runs = combos.saturating_mul(f.num_tuples() as u128);

    // global bit index -> (message, bit)
    let mut bit_slots: Vec<(usize, u8)> = Vec::with_capacity(bit_total as usize);
    for (mi, m) in plan.iter().enumerate() {
        for b in 0..m.bits {
            bit_slots.push((mi, b));
        }
    }

    let mut runs = 0u64;
    if total_runs <= opts.limit {
        for t in 0..f.num_tuples() {
            let tuple = f.tuple_at(t);
            let expected = f.value_at(t);
            for size in 0..=budget_eff {
                let mut combo: Vec<usize> = (0..size).collect();
                loop {
                    let pattern: Vec<(usize, u8)> = combo.iter().map(|&i| bit_slots[i]).collect();
                    let outcome = run(
                        rp,
                        &tuple,
                        &ChannelModel::Adversarial {
                            pattern: pattern.clone(),
                        },
                    )?;
                    runs += 1;
                    if !correct_outputs(rp.mode, &outcome.outputs, expected) {
                        return Ok(SweepReport {
                            verdict: SweepVerdict::Fail {
                                inputs: tuple,
                                pattern,
                                outputs: outcome.outputs,
                            },
                            budget,
                            bit_total,
                            exhaustive: true,
                            runs,
                        });
                    }
                    if !next_combination(&mut combo, bit_slots.len()) {
                        break;
                    }
                }
            }
        }
        return Ok(SweepReport {
            verdict: SweepVerdict::Pass,
            budget,
            bit_total,
            exhaustive: true,
            runs,
        });
    }

    let Some(samples) = opts.samples else {
        return Err(SimError::ResourceLimit {
            runs: total_runs,
            limit: opts.limit,
        });
    };
    for trial in 0..samples {
        let mut trial_rng = rng::split(opts.seed, trial);
        let tuple: Vec<usize> = f
            .domain_sizes()
            .iter()
            .map(|&d| trial_rng.gen_range(0..d))
            .collect();
        let expected = f
            .value(&tuple)
            .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
        let mut picks: HashSet<usize> = HashSet::new();
        while picks.len() < budget_eff {
            picks.insert(trial_rng.gen_range(0..bit_slots.len()));
        }
        let mut pattern: Vec<(usize, u8)> = picks.iter().map(|&i| bit_slots[i]).collect();
        pattern.sort_unstable();
        let outcome = run(
            rp,
            &tuple,
            &ChannelModel::Adversarial {
                pattern: pattern.clone(),
            },
        )?;
        runs += 1;
        if !correct_outputs(rp.mode, &outcome.outputs, expected) {
            return Ok(SweepReport {
                verdict: SweepVerdict::Fail {
                    inputs: tuple,
                    pattern,
                    outputs: outcome.outputs,
                },
                budget,
                bit_total,
                exhaustive: false,
                runs,
            });
        }
    }
    Ok(SweepReport {
        verdict: SweepVerdict::Pass,
        budget,
        bit_total,
        exhaustive: false,
        runs,
    })
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.saturating_mul((n - k + i) as u128) / i as u128;
    }
    acc
}

// lexicographic next k-combination of 0..n
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation

/// Estimated failure rate over seeded trials, with a binomial 95% interval
/// half-width (normal approximation; rule-of-three when no side failed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEstimate {
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub seed: u64,
    pub half_width: f64,
    /// "random" inputs per trial or "fixed" when one tuple was supplied.
    pub input_mode: String,
}

/// Runs `trials` independent executions over a probabilistic channel with
/// flip probability `epsilon` and counts runs where any processor misses the
/// function value (declared failures count as failures). Trial `t` draws
/// everything from sub-stream `t` of `seed`, so the estimate is independent
/// of execution order.
pub fn monte_carlo(
    rp: &RobustProtocol,
    f: &FunctionTable,
    epsilon: f64,
    trials: u64,
    seed: u64,
    fixed_input: Option<&[usize]>,
) -> Result<FailureEstimate> {
    if trials < 1 {
        return Err(SimError::InvalidParameter("need at least one trial".into()));
    }
    check_epsilon(epsilon)?;
    if f.arity() != rp.k {
        return Err(SimError::InvalidParameter(format!(
            "function arity {} does not match k={}",
            f.arity(),
            rp.k
        )));
    }
    if let Some(tuple) = fixed_input {
        f.value(tuple)
            .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
    }
    let mut failures = 0u64;
    for trial in 0..trials {
        let mut trial_rng = rng::split(seed, trial);
        let tuple: Vec<usize> = match fixed_input {
            Some(t) => t.to_vec(),
            None => f
                .domain_sizes()
                .iter()
                .map(|&d| trial_rng.gen_range(0..d))
                .collect(),
        };
        let expected = f
            .value(&tuple)
            .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
        let ch = ChannelModel::Probabilistic {
            epsilon,
            seed: trial_rng.next_u64(),
        };
        let outcome = run(rp, &tuple, &ch)?;
        if !outcome.outputs.iter().all(|o| *o == Some(expected)) {
            failures += 1;
        }
    }
    let n = trials as f64;
    let rate = failures as f64 / n;
    let half_width = if failures == 0 || failures == trials {
        3.0 / n
    } else {
        1.96 * (rate * (1.0 - rate) / n).sqrt()
    };
    Ok(FailureEstimate {
        trials,
        failures,
        rate,
        seed,
        half_width,
        input_mode: if fixed_input.is_some() {
            "fixed"
        } else {
            "random"
        }
        .into(),
    })
}

// ---------------------------------------------------------------------------
// Tail bound

/// Upper bound on P(X >= epsilon0 * n) for X ~ Binomial(n, epsilon), from
/// the exponential moment inequality evaluated at its optimal parameter
/// `lambda* = ln(eps0 (1-eps) / (eps (1-eps0)))`:
///
/// ```text
/// ((eps e^l + 1 - eps) / e^(l eps0))^n
/// ```
///
/// Requires `epsilon < epsilon0`; the bound degenerates to 1 otherwise.
pub fn chernoff_bound(epsilon: f64, epsilon0: f64, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(SimError::InvalidParameter("need at least one bit".into()));
    }
    let in_order =
        (0.0..1.0).contains(&epsilon) && (0.0..=1.0).contains(&epsilon0) && epsilon < epsilon0;
    if !in_order {
        return Err(SimError::InvalidParameter(format!(
            "need 0 <= epsilon < epsilon0 <= 1, got epsilon={epsilon}, epsilon0={epsilon0}"
        )));
    }
    if epsilon == 0.0 {
        // X is identically zero; the infimum over lambda is 0
        return Ok(0.0);
    }
    if epsilon0 == 1.0 {
        // P(X >= n) exactly
        return Ok(epsilon.powf(n as f64));
    }
    let lambda = (epsilon0 * (1.0 - epsilon) / (epsilon * (1.0 - epsilon0))).ln();
    debug_assert!(lambda >= 0.0);
    let base = (epsilon * lambda.exp() + 1.0 - epsilon) / (lambda * epsilon0).exp();
    Ok(base.powf(n as f64).min(1.0))
}

// ---------------------------------------------------------------------------
