//! Conversions between multi-party bit protocols and question-game
//! strategies, and compilation of semi-static strategies into protocols that
//! tolerate channel noise.
//!
//! One direction replays a noiseless protocol as a question game: the bit a
//! processor would send becomes a subset question about its input, and a bit
//! inversion on the wire is exactly a lie. The other direction schedules a
//! semi-static strategy over real channels: a coordinator holds the ground
//! truth state and announces each move as a 4-bit tree-code letter, and every
//! other processor tracks the coordinator by prefix-decoding its letter
//! stream. A parallel variant runs that machinery from all processors at once
//! and takes a majority at the end.

use std::collections::HashMap;
use std::fmt;

use num::rational::BigRational;
use num::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::treecode::TSequence;
use crate::ulamgame::{
    semi_static_schedule, subset_mask, subset_members, FunctionTable, StrategyTree,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BridgeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed protocol: {0}")]
    Structural(String),
}

type Result<T> = std::result::Result<T, BridgeError>;

// ---------------------------------------------------------------------------
// Noiseless protocols

/// A deterministic bit protocol: at each step one processor sends one bit,
/// computed as membership of its input in `predicate`; the children follow
/// the bit as received. Serialized as `{"leaf": y}` or
/// `{"from": i, "to": j, "F": [..], "b0": .., "b1": ..}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolTree {
    Leaf {
        value: i64,
    },
    Step {
        sender: usize,
        receiver: usize,
        predicate: u64,
        bit0: Box<ProtocolTree>,
        bit1: Box<ProtocolTree>,
    },
}

impl ProtocolTree {
    pub fn leaf(value: i64) -> Self {
        ProtocolTree::Leaf { value }
    }

    pub fn step(
        sender: usize,
        receiver: usize,
        predicate: u64,
        bit0: ProtocolTree,
        bit1: ProtocolTree,
    ) -> Self {
        ProtocolTree::Step {
            sender,
            receiver,
            predicate,
            bit0: Box::new(bit0),
            bit1: Box::new(bit1),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ProtocolTree::Leaf { .. } => 0,
            ProtocolTree::Step { bit0, bit1, .. } => 1 + bit0.depth().max(bit1.depth()),
        }
    }

    fn validate(&self, arity: usize, domains: &[usize]) -> Result<()> {
        match self {
            ProtocolTree::Leaf { .. } => Ok(()),
            ProtocolTree::Step {
                sender,
                receiver,
                predicate,
                bit0,
                bit1,
            } => {
                if *sender < 1 || *sender > arity || *receiver < 1 || *receiver > arity {
                    return Err(BridgeError::Structural(format!(
                        "processor ids ({sender}, {receiver}) outside 1..={arity}"
                    )));
                }
                if arity >= 2 && sender == receiver {
                    return Err(BridgeError::Structural(
                        "a step must have distinct sender and receiver".into(),
                    ));
                }
                let d = domains[sender - 1];
                if *predicate >> d != 0 {
                    return Err(BridgeError::Structural(format!(
                        "predicate {predicate:#b} does not fit a domain of size {d}"
                    )));
                }
                bit0.validate(arity, domains)?;
                bit1.validate(arity, domains)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProtocolWire {
    Leaf {
        leaf: i64,
    },
    Step {
        from: usize,
        to: usize,
        #[serde(rename = "F")]
        members: Vec<usize>,
        b0: Box<ProtocolWire>,
        b1: Box<ProtocolWire>,
    },
}

impl ProtocolWire {
    fn from_tree(t: &ProtocolTree) -> Self {
        match t {
            ProtocolTree::Leaf { value } => ProtocolWire::Leaf { leaf: *value },
            ProtocolTree::Step {
                sender,
                receiver,
                predicate,
                bit0,
                bit1,
            } => ProtocolWire::Step {
                from: *sender,
                to: *receiver,
                members: subset_members(*predicate),
                b0: Box::new(ProtocolWire::from_tree(bit0)),
                b1: Box::new(ProtocolWire::from_tree(bit1)),
            },
        }
    }

    fn into_tree(self) -> Result<ProtocolTree> {
        Ok(match self {
            ProtocolWire::Leaf { leaf } => ProtocolTree::Leaf { value: leaf },
            ProtocolWire::Step {
                from,
                to,
                members,
                b0,
                b1,
            } => ProtocolTree::Step {
                sender: from,
                receiver: to,
                predicate: subset_mask(&members)
                    .map_err(|e| BridgeError::Structural(e.to_string()))?,
                bit0: Box::new(b0.into_tree()?),
                bit1: Box::new(b1.into_tree()?),
            },
        })
    }
}

impl Serialize for ProtocolTree {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ProtocolWire::from_tree(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ProtocolTree {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        ProtocolWire::deserialize(de)?
            .into_tree()
            .map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Protocol -> strategy

/// Replays a protocol as a question game: each step becomes the question
/// "is the sender's input in the predicate?", the transmitted bit becomes
/// the answer, and protocol outputs become leaf labels. Depth and shape are
/// preserved exactly.
pub fn protocol_to_strategy(p: &ProtocolTree, f: &FunctionTable) -> Result<StrategyTree> {
    p.validate(f.arity(), f.domain_sizes())?;
    Ok(convert(p))
}

fn convert(p: &ProtocolTree) -> StrategyTree {
    match p {
        ProtocolTree::Leaf { value } => StrategyTree::leaf(*value),
        ProtocolTree::Step {
            sender,
            predicate,
            bit0,
            bit1,
            ..
        } => StrategyTree::node(*sender, *predicate, convert(bit0), convert(bit1)),
    }
}

/// Why a protocol is not locally computable: two nodes where the sender has
/// seen exactly the same bits but is asked to apply different predicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalityReport {
    pub consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflict: Option<LocalityConflict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalityConflict {
    pub sender: usize,
    pub first_path: String,
    pub second_path: String,
}

/// Checks that each sender's predicate depends only on its own view: the
/// bits it previously sent and received, in order. Nodes are grouped by
/// (sender, view); any group with two different predicates is a violation.
pub fn check_protocol_locality(p: &ProtocolTree) -> LocalityReport {
    // view events: sent/received flag in bit 1, bit value in bit 0
    let mut seen: HashMap<(usize, Vec<u8>), (u64, String)> = HashMap::new();
    let mut views: HashMap<usize, Vec<u8>> = HashMap::new();
    let mut path = String::new();
    match visit(p, &mut views, &mut path, &mut seen) {
        None => LocalityReport {
            consistent: true,
            conflict: None,
        },
        Some(conflict) => LocalityReport {
            consistent: false,
            conflict: Some(conflict),
        },
    }
}

fn visit(
    node: &ProtocolTree,
    views: &mut HashMap<usize, Vec<u8>>,
    path: &mut String,
    seen: &mut HashMap<(usize, Vec<u8>), (u64, String)>,
) -> Option<LocalityConflict> {
    let ProtocolTree::Step {
        sender,
        receiver,
        predicate,
        bit0,
        bit1,
    } = node
    else {
        return None;
    };
    let view = views.entry(*sender).or_default().clone();
    match seen.get(&(*sender, view.clone())) {
        Some((known, first_path)) if known != predicate => {
            return Some(LocalityConflict {
                sender: *sender,
                first_path: first_path.clone(),
                second_path: path.clone(),
            });
        }
        Some(_) => {}
        None => {
            seen.insert((*sender, view), (*predicate, path.clone()));
        }
    }
    for (bit, child) in [(0u8, bit0), (1u8, bit1)] {
        views.entry(*sender).or_default().push(0b10 | bit);
        views.entry(*receiver).or_default().push(bit);
        path.push(if bit == 1 { '1' } else { '0' });
        let conflict = visit(child, views, path, seen);
        path.pop();
        views.get_mut(receiver).unwrap().pop();
        views.get_mut(sender).unwrap().pop();
        if conflict.is_some() {
            return conflict;
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Robust protocols

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Coordinator,
    Parallel,
}

/// One round of the compiled schedule: the coordinate queried at this depth
/// and the (sender, receiver) pairs for the answer bits and the 4-bit code
/// letters, in transmission order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSpec {
    pub round: usize,
    pub index: usize,
    pub uplinks: Vec<(usize, usize)>,
    pub downlinks: Vec<(usize, usize)>,
}

/// A compiled multi-round protocol: the semi-static strategy it plays, the
/// tree code labeling the strategy tree, and the full round schedule.
/// Construction is deterministic, so equal inputs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustProtocol {
    pub mode: Mode,
    pub k: usize,
    pub strategy: StrategyTree,
    pub code: TSequence,
    pub schedule: Vec<RoundSpec>,
}

impl RobustProtocol {
    pub fn rounds(&self) -> usize {
        self.schedule.len()
    }

    /// Total bits on the wire: one per uplink, `r` per letter.
    pub fn bit_total(&self) -> u64 {
        let r = self.code.r() as u64;
        self.schedule
            .iter()
            .map(|s| s.uplinks.len() as u64 + r * s.downlinks.len() as u64)
            .sum()
    }
}

fn compile_checks(strategy: &StrategyTree, ts: &TSequence, k: usize) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(BridgeError::InvalidParameter(
            "compilation needs at least two processors".into(),
        ));
    }
    if ts.r() != 4 {
        return Err(BridgeError::InvalidParameter(format!(
            "compilation labels arcs with 4-bit letters, got r={}",
            ts.r()
        )));
    }
    let info = semi_static_schedule(strategy).ok_or_else(|| {
        BridgeError::InvalidParameter("strategy must be semi-static with uniform leaf depth".into())
    })?;
    if info.indices.iter().any(|&i| i < 1 || i > k) {
        return Err(BridgeError::InvalidParameter(format!(
            "strategy queries a coordinate outside 1..={k}"
        )));
    }
    if ts.depth() < info.depth {
        return Err(BridgeError::InvalidParameter(format!(
            "tree code depth {} is below the strategy depth {}",
            ts.depth(),
            info.depth
        )));
    }
    Ok(info.indices)
}

/// Compiles a semi-static strategy into the coordinator protocol: each round
/// the scheduled processor answers to processor 1, processor 1 advances the
/// true state and sends the new arc letter to everyone else, and receivers
/// re-decode their full letter history to track it.
pub fn compile_coordinator(
    strategy: &StrategyTree,
    ts: &TSequence,
    k: usize,
) -> Result<RobustProtocol> {
    let indices = compile_checks(strategy, ts, k)?;
    let schedule = indices
        .iter()
        .enumerate()
        .map(|(round, &index)| RoundSpec {
            round,
            index,
            uplinks: if index == 1 { vec![] } else { vec![(index, 1)] },
            downlinks: (2..=k).map(|j| (1, j)).collect(),
        })
        .collect();
    Ok(RobustProtocol {
        mode: Mode::Coordinator,
        k,
        strategy: strategy.clone(),
        code: ts.clone(),
        schedule,
    })
}

/// Compiles a semi-static strategy into the parallel protocol: every
/// processor maintains an estimate of every other processor's state, the
/// scheduled sender answers each peer according to its estimate of that
/// peer, all processors advance and broadcast their own arc letters, and
/// each processor ends with k leaf values and outputs their majority.
pub fn compile_parallel(
    strategy: &StrategyTree,
    ts: &TSequence,
    k: usize,
) -> Result<RobustProtocol> {
    let indices = compile_checks(strategy, ts, k)?;
    let schedule = indices
        .iter()
        .enumerate()
        .map(|(round, &index)| RoundSpec {
            round,
            index,
            uplinks: (1..=k)
                .filter(|&j| j != index)
                .map(|j| (index, j))
                .collect(),
            downlinks: (1..=k)
                .flat_map(|from| {
                    (1..=k)
                        .filter(move |&to| to != from)
                        .map(move |to| (from, to))
                })
                .collect(),
        })
        .collect();
    Ok(RobustProtocol {
        mode: Mode::Parallel,
        k,
        strategy: strategy.clone(),
        code: ts.clone(),
        schedule,
    })
}

// ---------------------------------------------------------------------------
// Robustness accounting

/// Static bit accounting for a coordinator compilation, or the measured
/// counts of one run. `bit_total = q1 + 4*q2`; a run is guaranteed correct
/// when `r1 + 4*r2 <= lie_budget`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Answer bits received by the coordinator.
    pub q1: u64,
    /// Code letters sent.
    pub q2: u64,
    /// Erroneous answer bits.
    pub r1: u64,
    /// Corrupted letters (any of the 4 bits flipped).
    pub r2: u64,
    pub lie_budget: u64,
    pub bit_total: u64,
    /// Guaranteed-tolerable fraction of flipped bits.
    #[serde(with = "rational_string")]
    pub fraction: BigRational,
}

/// Worst-case accounting for compiling a depth-`q` strategy with lie budget
/// `l` over `k` processors: at most `k(4k-3)q` bits on the wire and a
/// guaranteed error fraction of `l / (4k(4k-3)q)`, i.e. at least `l/4`
/// tolerated bit flips.
pub fn robustness_bound(k: usize, q: u64, l: u64) -> Result<RobustnessReport> {
    if k < 2 {
        return Err(BridgeError::InvalidParameter(
            "bound needs at least two processors".into(),
        ));
    }
    if q < 1 {
        return Err(BridgeError::InvalidParameter(
            "strategy depth must be at least 1".into(),
        ));
    }
    let k64 = k as u64;
    let q1 = k64 * q;
    let q2 = k64 * (k64 - 1) * q;
    let bit_total = q1 + 4 * q2;
    debug_assert_eq!(bit_total, k64 * (4 * k64 - 3) * q);
    let fraction = BigRational::new(BigInt::from(l), BigInt::from(4 * bit_total));
    Ok(RobustnessReport {
        q1,
        q2,
        r1: 0,
        r2: 0,
        lie_budget: l,
        bit_total,
        fraction,
    })
}

impl RobustnessReport {
    /// Bit flips the compiled protocol is guaranteed to survive.
    pub fn guaranteed_bit_errors(&self) -> u64 {
        self.lie_budget / 4
    }
}

pub(crate) mod rational_string {
    use super::*;
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(
        value: &BigRational,
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(de)?;
        BigRational::from_str(&s).map_err(D::Error::custom)
    }
}

impl fmt::Display for RobustnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q1={} q2={} bits={} tolerated fraction={}",
            self.q1, self.q2, self.bit_total, self.fraction
        )
    }
}

// ---------------------------------------------------------------------------
