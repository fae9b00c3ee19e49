//! Question games against an adversarial answerer.
//!
//! A game is defined by a k-argument function over finite domains, a question
//! budget `q` and a lie budget `l`. The questioner asks subset questions
//! about single coordinates; the answerer never commits to a tuple and may
//! contradict any fixed tuple at most `l` times. The questioner wins when the
//! reached leaf pins down the function value for every tuple still
//! consistent with the answers.
//!
//! [`check_winning`] judges an explicit strategy tree, [`solve_game`]
//! decides small games by backward induction over lie-counter states, and
//! [`make_semi_static`] reshapes a strategy so each depth queries one fixed
//! coordinate.

use std::collections::HashMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed tree: {0}")]
    Structural(String),
    #[error("state space too large: {states} exceeds the limit {limit}")]
    ResourceLimit { states: u128, limit: u128 },
}

type Result<T> = std::result::Result<T, GameError>;

// ---------------------------------------------------------------------------
// Function tables

/// A dense k-argument function over finite domains, row-major with the last
/// argument varying fastest. Serialized as
/// `{"k": .., "domains": [..], "values": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionTable {
    domains: Vec<usize>,
    values: Vec<i64>,
    strides: Vec<usize>,
}

impl FunctionTable {
    pub fn new(domains: Vec<usize>, values: Vec<i64>) -> Result<Self> {
        if domains.is_empty() {
            return Err(GameError::InvalidParameter(
                "function needs at least one argument".into(),
            ));
        }
        if let Some(bad) = domains.iter().find(|&&d| !(1..=63).contains(&d)) {
            return Err(GameError::InvalidParameter(format!(
                "domain size {bad} out of range 1..=63"
            )));
        }
        let mut product: usize = 1;
        for &d in &domains {
            product = product
                .checked_mul(d)
                .ok_or_else(|| GameError::InvalidParameter("domain product overflows".into()))?;
        }
        if values.len() != product {
            return Err(GameError::InvalidParameter(format!(
                "value table has {} entries, domains require {product}",
                values.len()
            )));
        }
        let mut strides = vec![1usize; domains.len()];
        for i in (0..domains.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * domains[i + 1];
        }
        Ok(FunctionTable {
            domains,
            values,
            strides,
        })
    }

    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    pub fn domain_sizes(&self) -> &[usize] {
        &self.domains
    }

    pub fn num_tuples(&self) -> usize {
        self.values.len()
    }

    /// Coordinate `index` (1-based) of the tuple with row-major index `t`.
    pub fn coordinate(&self, t: usize, index: usize) -> usize {
        t / self.strides[index - 1] % self.domains[index - 1]
    }

    pub fn value_at(&self, t: usize) -> i64 {
        self.values[t]
    }

    pub fn tuple_at(&self, t: usize) -> Vec<usize> {
        (1..=self.arity()).map(|i| self.coordinate(t, i)).collect()
    }

    pub fn index_of(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.arity() {
            return Err(GameError::InvalidParameter(format!(
                "tuple has {} coordinates, expected {}",
                tuple.len(),
                self.arity()
            )));
        }
        let mut idx = 0usize;
        for (i, (&x, &d)) in tuple.iter().zip(&self.domains).enumerate() {
            if x >= d {
                return Err(GameError::InvalidParameter(format!(
                    "coordinate {} value {x} outside domain of size {d}",
                    i + 1
                )));
            }
            idx += x * self.strides[i];
        }
        Ok(idx)
    }

    pub fn value(&self, tuple: &[usize]) -> Result<i64> {
        Ok(self.values[self.index_of(tuple)?])
    }
}

impl Serialize for FunctionTable {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            k: usize,
            domains: &'a [usize],
            values: &'a [i64],
        }
        Wire {
            k: self.arity(),
            domains: &self.domains,
            values: &self.values,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FunctionTable {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            k: usize,
            domains: Vec<usize>,
            values: Vec<i64>,
        }
        let w = Wire::deserialize(de)?;
        if w.k != w.domains.len() {
            return Err(D::Error::custom(format!(
                "k={} does not match {} domains",
                w.k,
                w.domains.len()
            )));
        }
        FunctionTable::new(w.domains, w.values).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Strategy trees

/// The questioner's plan: internal nodes carry a coordinate index (1-based)
/// and a subset of that coordinate's domain as a bitmask; the `no`/`yes`
/// children follow the answer; leaves claim a function value.
///
/// Serialized as `{"leaf": y}` or `{"i": .., "F": [..], "no": .., "yes": ..}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyTree {
    Leaf {
        value: i64,
    },
    Node {
        index: usize,
        subset: u64,
        no: Box<StrategyTree>,
        yes: Box<StrategyTree>,
    },
}

/// Bitmask for an explicit member list.
pub fn subset_mask(members: &[usize]) -> Result<u64> {
    let mut mask = 0u64;
    for &m in members {
        if m >= 64 {
            return Err(GameError::Structural(format!(
                "subset member {m} out of the supported range"
            )));
        }
        mask |= 1u64 << m;
    }
    Ok(mask)
}

/// Sorted member list of a bitmask.
pub fn subset_members(mask: u64) -> Vec<usize> {
    (0..64).filter(|&b| mask >> b & 1 == 1).collect()
}

impl StrategyTree {
    pub fn leaf(value: i64) -> Self {
        StrategyTree::Leaf { value }
    }

    pub fn node(index: usize, subset: u64, no: StrategyTree, yes: StrategyTree) -> Self {
        StrategyTree::Node {
            index,
            subset,
            no: Box::new(no),
            yes: Box::new(yes),
        }
    }

    /// Longest root-to-leaf question count.
    pub fn depth(&self) -> usize {
        match self {
            StrategyTree::Leaf { .. } => 0,
            StrategyTree::Node { no, yes, .. } => 1 + no.depth().max(yes.depth()),
        }
    }

    /// Checks indices and subset masks against the function's domains.
    pub fn validate(&self, arity: usize, domains: &[usize]) -> Result<()> {
        match self {
            StrategyTree::Leaf { .. } => Ok(()),
            StrategyTree::Node {
                index,
                subset,
                no,
                yes,
            } => {
                if *index < 1 || *index > arity {
                    return Err(GameError::Structural(format!(
                        "question index {index} outside 1..={arity}"
                    )));
                }
                let d = domains[index - 1];
                if *subset >> d != 0 {
                    return Err(GameError::Structural(format!(
                        "subset {subset:#b} does not fit a domain of size {d}"
                    )));
                }
                no.validate(arity, domains)?;
                yes.validate(arity, domains)
            }
        }
    }

    /// Follows an answer sequence; errors when it runs past a leaf or stops
    /// short of one.
    pub fn walk(&self, answers: &[bool]) -> Result<i64> {
        let mut node = self;
        for &a in answers {
            node = match node {
                StrategyTree::Node { no, yes, .. } => {
                    if a {
                        yes
                    } else {
                        no
                    }
                }
                StrategyTree::Leaf { .. } => {
                    return Err(GameError::Structural(
                        "answer sequence longer than the tree".into(),
                    ))
                }
            };
        }
        match node {
            StrategyTree::Leaf { value } => Ok(*value),
            StrategyTree::Node { .. } => Err(GameError::Structural(
                "answer sequence stops before a leaf".into(),
            )),
        }
    }

    /// The internal node reached by a (proper) answer prefix.
    pub fn node_at(&self, answers: &[bool]) -> Result<(usize, u64)> {
        let mut node = self;
        for &a in answers {
            node = match node {
                StrategyTree::Node { no, yes, .. } => {
                    if a {
                        yes
                    } else {
                        no
                    }
                }
                StrategyTree::Leaf { .. } => {
                    return Err(GameError::Structural("prefix runs past a leaf".into()))
                }
            };
        }
        match node {
            StrategyTree::Node { index, subset, .. } => Ok((*index, *subset)),
            StrategyTree::Leaf { .. } => Err(GameError::Structural(
                "prefix ends on a leaf, not a question".into(),
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StrategyWire {
    Leaf {
        leaf: i64,
    },
    Node {
        i: usize,
        #[serde(rename = "F")]
        members: Vec<usize>,
        no: Box<StrategyWire>,
        yes: Box<StrategyWire>,
    },
}

impl StrategyWire {
    fn from_tree(t: &StrategyTree) -> Self {
        match t {
            StrategyTree::Leaf { value } => StrategyWire::Leaf { leaf: *value },
            StrategyTree::Node {
                index,
                subset,
                no,
                yes,
            } => StrategyWire::Node {
                i: *index,
                members: subset_members(*subset),
                no: Box::new(StrategyWire::from_tree(no)),
                yes: Box::new(StrategyWire::from_tree(yes)),
            },
        }
    }

    fn into_tree(self) -> Result<StrategyTree> {
        Ok(match self {
            StrategyWire::Leaf { leaf } => StrategyTree::Leaf { value: leaf },
            StrategyWire::Node {
                i,
                members,
                no,
                yes,
            } => StrategyTree::Node {
                index: i,
                subset: subset_mask(&members)?,
                no: Box::new(no.into_tree()?),
                yes: Box::new(yes.into_tree()?),
            },
        })
    }
}

impl Serialize for StrategyTree {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        StrategyWire::from_tree(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for StrategyTree {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        StrategyWire::deserialize(de)?
            .into_tree()
            .map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Game state

/// Question and lie budgets for one game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub q: u32,
    pub l: u32,
}

/// Per-tuple lie counters; a tuple is eliminated once a further contradiction
/// would push it past the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeState {
    counters: Vec<Option<u32>>,
    budget: u32,
}

impl KnowledgeState {
    pub fn initial(num_tuples: usize, budget: u32) -> Self {
        KnowledgeState {
            counters: vec![Some(0); num_tuples],
            budget,
        }
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn survivors(&self) -> impl Iterator<Item = usize> + '_ {
        self.counters
            .iter()
            .enumerate()
            .filter_map(|(t, c)| c.map(|_| t))
    }

    pub fn lies(&self, t: usize) -> Option<u32> {
        self.counters[t]
    }

    /// State after the answer `answer` to "is coordinate `index` in
    /// `subset`?". Every tuple the answer contradicts pays one lie.
    pub fn record(&self, f: &FunctionTable, index: usize, subset: u64, answer: bool) -> Self {
        let counters = self
            .counters
            .iter()
            .enumerate()
            .map(|(t, c)| match c {
                None => None,
                Some(lies) => {
                    let truth = subset >> f.coordinate(t, index) & 1 == 1;
                    if truth == answer {
                        Some(*lies)
                    } else if *lies < self.budget {
                        Some(*lies + 1)
                    } else {
                        None
                    }
                }
            })
            .collect();
        KnowledgeState {
            counters,
            budget: self.budget,
        }
    }

    /// Value shared by all surviving tuples, if any survive and agree.
    fn resolved_value(&self, f: &FunctionTable) -> Option<Option<i64>> {
        let mut value: Option<i64> = None;
        for t in self.survivors() {
            match value {
                None => value = Some(f.value_at(t)),
                Some(v) if v != f.value_at(t) => return None,
                Some(_) => {}
            }
        }
        Some(value)
    }

    fn encode(&self) -> Box<[u8]> {
        self.counters
            .iter()
            .map(|c| match c {
                Some(v) => *v as u8,
                None => u8::MAX,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Strategy verification

/// Outcome of [`check_winning`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Winning,
    Loss(LossReport),
}

impl Verdict {
    pub fn is_winning(&self) -> bool {
        matches!(self, Verdict::Winning)
    }
}

/// A leaf that does not settle the game: the answers reaching it, its label,
/// and surviving tuples that defeat it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossReport {
    pub answers: Vec<bool>,
    pub leaf_value: i64,
    pub witness: LossWitness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LossWitness {
    /// Two survivors whose function values differ.
    ConflictingSurvivors {
        first: Vec<usize>,
        second: Vec<usize>,
    },
    /// A survivor whose function value is not the leaf label.
    SurvivorContradictsLeaf { tuple: Vec<usize> },
}

/// Judges a strategy against every answer sequence. Winning means every
/// leaf's surviving tuples (those contradicted at most `lie_budget` times)
/// agree with the leaf label; leaves with no survivors are vacuously fine.
pub fn check_winning(
    strategy: &StrategyTree,
    f: &FunctionTable,
    lie_budget: u32,
) -> Result<Verdict> {
    strategy.validate(f.arity(), f.domain_sizes())?;
    let state = KnowledgeState::initial(f.num_tuples(), lie_budget);
    let mut answers = Vec::new();
    Ok(judge(strategy, f, &state, &mut answers))
}

fn judge(
    node: &StrategyTree,
    f: &FunctionTable,
    state: &KnowledgeState,
    answers: &mut Vec<bool>,
) -> Verdict {
    match node {
        StrategyTree::Leaf { value } => {
            let survivors: Vec<usize> = state.survivors().collect();
            if let Some(&first) = survivors.first() {
                for &other in &survivors[1..] {
                    if f.value_at(other) != f.value_at(first) {
                        return Verdict::Loss(LossReport {
                            answers: answers.clone(),
                            leaf_value: *value,
                            witness: LossWitness::ConflictingSurvivors {
                                first: f.tuple_at(first),
                                second: f.tuple_at(other),
                            },
                        });
                    }
                }
                if f.value_at(first) != *value {
                    return Verdict::Loss(LossReport {
                        answers: answers.clone(),
                        leaf_value: *value,
                        witness: LossWitness::SurvivorContradictsLeaf {
                            tuple: f.tuple_at(first),
                        },
                    });
                }
            }
            Verdict::Winning
        }
        StrategyTree::Node {
            index,
            subset,
            no,
            yes,
        } => {
            for (answer, child) in [(false, no), (true, yes)] {
                answers.push(answer);
                let next = state.record(f, *index, *subset, answer);
                let verdict = judge(child, f, &next, answers);
                if !verdict.is_winning() {
                    return verdict;
                }
                answers.pop();
            }
            Verdict::Winning
        }
    }
}

// ---------------------------------------------------------------------------
// Exact solving

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Paul,
    Carole,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub winner: Winner,
    pub strategy: Option<StrategyTree>,
}

/// Default ceiling on `(l+2)^num_tuples` lie-counter states.
pub const DEFAULT_STATE_LIMIT: u128 = 4_000_000;

/// Decides a game by backward induction with memoized lie-counter states and
/// returns a winning strategy for the questioner when one exists.
pub fn solve_game(f: &FunctionTable, cfg: GameConfig) -> Result<SolveOutcome> {
    solve_game_with_limit(f, cfg, DEFAULT_STATE_LIMIT)
}

pub fn solve_game_with_limit(
    f: &FunctionTable,
    cfg: GameConfig,
    state_limit: u128,
) -> Result<SolveOutcome> {
    if cfg.l > 200 {
        return Err(GameError::InvalidParameter(format!(
            "lie budget {} is out of the supported range",
            cfg.l
        )));
    }
    let states = (cfg.l as u128 + 2)
        .checked_pow(f.num_tuples() as u32)
        .unwrap_or(u128::MAX);
    if states > state_limit {
        return Err(GameError::ResourceLimit {
            states,
            limit: state_limit,
        });
    }
    let mut solver = Solver {
        f,
        questions: canonical_questions(f),
        memo: HashMap::new(),
    };
    let initial = KnowledgeState::initial(f.num_tuples(), cfg.l);
    if solver.questioner_wins(&initial, cfg.q) {
        let strategy = solver.build_strategy(&initial, cfg.q);
        Ok(SolveOutcome {
            winner: Winner::Paul,
            strategy: Some(strategy),
        })
    } else {
        Ok(SolveOutcome {
            winner: Winner::Carole,
            strategy: None,
        })
    }
}

// Nonempty proper subsets, deduplicated against their complements by fixing
// element 0 inside the subset (complement questions differ only by a child
// swap).
fn canonical_questions(f: &FunctionTable) -> Vec<(usize, u64)> {
    let mut qs = Vec::new();
    for i in 1..=f.arity() {
        let d = f.domain_sizes()[i - 1];
        let full = (1u64 << d) - 1;
        let mut mask = 1u64;
        while mask < full {
            qs.push((i, mask));
            mask += 2;
        }
    }
    qs
}

struct Solver<'a> {
    f: &'a FunctionTable,
    questions: Vec<(usize, u64)>,
    memo: HashMap<(Box<[u8]>, u32), bool>,
}

impl Solver<'_> {
    fn questioner_wins(&mut self, state: &KnowledgeState, q: u32) -> bool {
        if state.resolved_value(self.f).is_some() {
            return true;
        }
        if q == 0 {
            return false;
        }
        let key = (state.encode(), q);
        if let Some(&won) = self.memo.get(&key) {
            return won;
        }
        let mut won = false;
        for qi in 0..self.questions.len() {
            let (index, subset) = self.questions[qi];
            let no = state.record(self.f, index, subset, false);
            if !self.questioner_wins(&no, q - 1) {
                continue;
            }
            let yes = state.record(self.f, index, subset, true);
            if self.questioner_wins(&yes, q - 1) {
                won = true;
                break;
            }
        }
        self.memo.insert(key, won);
        won
    }

    // Only called on winning (state, q); replays the first winning question.
    fn build_strategy(&mut self, state: &KnowledgeState, q: u32) -> StrategyTree {
        if let Some(value) = state.resolved_value(self.f) {
            // no survivors: any label is vacuously correct
            return StrategyTree::leaf(value.unwrap_or_else(|| self.f.value_at(0)));
        }
        for qi in 0..self.questions.len() {
            let (index, subset) = self.questions[qi];
            let no = state.record(self.f, index, subset, false);
            let yes = state.record(self.f, index, subset, true);
            if self.questioner_wins(&no, q - 1) && self.questioner_wins(&yes, q - 1) {
                return StrategyTree::node(
                    index,
                    subset,
                    self.build_strategy(&no, q - 1),
                    self.build_strategy(&yes, q - 1),
                );
            }
        }
        unreachable!("winning state must have a winning question");
    }
}

// ---------------------------------------------------------------------------
// Semi-static conversion

/// Per-depth question indices of a semi-static strategy with uniform leaf
/// depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemiStaticInfo {
    pub indices: Vec<usize>,
    pub depth: usize,
}

/// Returns the per-depth schedule when every node at a depth queries the same
/// coordinate and all leaves sit at the same depth.
pub fn semi_static_schedule(strategy: &StrategyTree) -> Option<SemiStaticInfo> {
    fn scan(
        node: &StrategyTree,
        depth: usize,
        indices: &mut Vec<Option<usize>>,
        leaf_depth: &mut Option<usize>,
    ) -> bool {
        match node {
            StrategyTree::Leaf { .. } => match leaf_depth {
                None => {
                    *leaf_depth = Some(depth);
                    true
                }
                Some(d) => *d == depth,
            },
            StrategyTree::Node { index, no, yes, .. } => {
                if indices.len() == depth {
                    indices.push(Some(*index));
                } else if indices[depth] != Some(*index) {
                    return false;
                }
                scan(no, depth + 1, indices, leaf_depth)
                    && scan(yes, depth + 1, indices, leaf_depth)
            }
        }
    }
    let mut indices = Vec::new();
    let mut leaf_depth = None;
    if !scan(strategy, 0, &mut indices, &mut leaf_depth) {
        return None;
    }
    let depth = leaf_depth.unwrap_or(0);
    if indices.len() != depth {
        return None;
    }
    Some(SemiStaticInfo {
        indices: indices.into_iter().map(|i| i.unwrap()).collect(),
        depth,
    })
}

/// Reshapes a strategy so depth `d` always queries coordinate
/// `(d mod k) + 1` and all leaves share one depth.
///
/// Questions wait for their coordinate's slot; the slots in between carry
/// dummy questions with an empty subset whose children continue identically,
/// and short branches are padded the same way. A "yes" to an empty subset
/// contradicts every tuple, so lying on a dummy costs the adversary budget
/// and the winning verdict is preserved for every lie budget. Output depth is
/// at most `k` times the input depth.
pub fn make_semi_static(strategy: &StrategyTree, k: usize) -> Result<StrategyTree> {
    if k < 1 {
        return Err(GameError::InvalidParameter(
            "arity must be at least 1".into(),
        ));
    }
    check_indices(strategy, k)?;
    let woven = weave(strategy, 0, k);
    let target = woven.depth();
    Ok(pad(&woven, 0, target, k))
}

fn check_indices(node: &StrategyTree, k: usize) -> Result<()> {
    match node {
        StrategyTree::Leaf { .. } => Ok(()),
        StrategyTree::Node { index, no, yes, .. } => {
            if *index < 1 || *index > k {
                return Err(GameError::Structural(format!(
                    "question index {index} outside 1..={k}"
                )));
            }
            check_indices(no, k)?;
            check_indices(yes, k)
        }
    }
}

fn weave(node: &StrategyTree, depth: usize, k: usize) -> StrategyTree {
    match node {
        StrategyTree::Leaf { .. } => node.clone(),
        StrategyTree::Node {
            index,
            subset,
            no,
            yes,
        } => {
            let slot = depth % k + 1;
            if slot == *index {
                StrategyTree::node(
                    *index,
                    *subset,
                    weave(no, depth + 1, k),
                    weave(yes, depth + 1, k),
                )
            } else {
                let cont = weave(node, depth + 1, k);
                StrategyTree::node(slot, 0, cont.clone(), cont)
            }
        }
    }
}

fn pad(node: &StrategyTree, depth: usize, target: usize, k: usize) -> StrategyTree {
    match node {
        StrategyTree::Node {
            index,
            subset,
            no,
            yes,
        } => StrategyTree::node(
            *index,
            *subset,
            pad(no, depth + 1, target, k),
            pad(yes, depth + 1, target, k),
        ),
        StrategyTree::Leaf { .. } => {
            if depth == target {
                node.clone()
            } else {
                let cont = pad(node, depth + 1, target, k);
                StrategyTree::node(depth % k + 1, 0, cont.clone(), cont)
            }
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_bit() -> FunctionTable {
        FunctionTable::new(vec![2], vec![0, 1]).unwrap()
    }

    fn xor2() -> FunctionTable {
        FunctionTable::new(vec![2, 2], vec![0, 1, 1, 0]).unwrap()
    }

    fn ask(index: usize, member: usize, no: StrategyTree, yes: StrategyTree) -> StrategyTree {
        StrategyTree::node(index, 1 << member, no, yes)
    }

    // ask "x in {1}?" three times, answer by majority
    fn majority_of_three() -> StrategyTree {
        let leaf = |bits: [bool; 3]| {
            let ones = bits.iter().filter(|&&b| b).count();
            StrategyTree::leaf(i64::from(ones >= 2))
        };
        let level2 = |b0: bool, b1: bool| ask(1, 1, leaf([b0, b1, false]), leaf([b0, b1, true]));
        let level1 = |b0: bool| ask(1, 1, level2(b0, false), level2(b0, true));
        ask(1, 1, level1(false), level1(true))
    }

    fn xor_strategy() -> StrategyTree {
        let leaf = |a: bool, b: bool| StrategyTree::leaf(i64::from(a ^ b));
        ask(
            1,
            1,
            ask(2, 1, leaf(false, false), leaf(false, true)),
            ask(2, 1, leaf(true, false), leaf(true, true)),
        )
    }

    #[test]
    fn table_layout_is_row_major_last_fastest() {
        let f = FunctionTable::new(vec![2, 3], vec![10, 11, 12, 20, 21, 22]).unwrap();
        assert_eq!(f.value(&[0, 2]).unwrap(), 12);
        assert_eq!(f.value(&[1, 0]).unwrap(), 20);
        assert_eq!(f.tuple_at(4), vec![1, 1]);
        assert_eq!(f.coordinate(4, 2), 1);
        assert!(f.value(&[2, 0]).is_err());
    }

    #[test]
    fn table_rejects_bad_shapes() {
        assert!(FunctionTable::new(vec![], vec![]).is_err());
        assert!(FunctionTable::new(vec![2], vec![1]).is_err());
        assert!(FunctionTable::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn majority_strategy_beats_one_lie() {
        let v = check_winning(&majority_of_three(), &identity_bit(), 1).unwrap();
        assert!(v.is_winning());
    }

    #[test]
    fn single_question_loses_to_one_lie() {
        let s = ask(1, 1, StrategyTree::leaf(0), StrategyTree::leaf(1));
        let v = check_winning(&s, &identity_bit(), 1).unwrap();
        let Verdict::Loss(report) = v else {
            panic!("expected a loss");
        };
        // with one lie both tuples survive at every leaf
        match report.witness {
            LossWitness::ConflictingSurvivors { .. } => {}
            _ => panic!("expected two conflicting survivors"),
        }
    }

    #[test]
    fn xor_strategy_wins_without_lies() {
        assert!(check_winning(&xor_strategy(), &xor2(), 0)
            .unwrap()
            .is_winning());
        assert!(!check_winning(&xor_strategy(), &xor2(), 1)
            .unwrap()
            .is_winning());
    }

    #[test]
    fn loss_reports_replay() {
        let s = ask(1, 1, StrategyTree::leaf(0), StrategyTree::leaf(1));
        let f = identity_bit();
        let Verdict::Loss(report) = check_winning(&s, &f, 1).unwrap() else {
            panic!("expected a loss");
        };
        assert_eq!(s.walk(&report.answers).unwrap(), report.leaf_value);
        let LossWitness::ConflictingSurvivors { first, second } = &report.witness else {
            panic!("expected conflicting survivors");
        };
        // replay the answers against both witnesses: each stays within budget
        for tuple in [first, second] {
            let mut state = KnowledgeState::initial(f.num_tuples(), 1);
            let mut node = &s;
            for &a in &report.answers {
                let StrategyTree::Node {
                    index,
                    subset,
                    no,
                    yes,
                } = node
                else {
                    panic!("ran past a leaf");
                };
                state = state.record(&f, *index, *subset, a);
                node = if a { yes } else { no };
            }
            let idx = f.index_of(tuple).unwrap();
            assert!(state.lies(idx).is_some(), "witness was eliminated");
        }
        assert_ne!(f.value(first).unwrap(), f.value(second).unwrap());
    }

    #[test]
    fn check_winning_rejects_malformed_trees() {
        let f = identity_bit();
        let bad_index = ask(2, 1, StrategyTree::leaf(0), StrategyTree::leaf(1));
        assert!(matches!(
            check_winning(&bad_index, &f, 0),
            Err(GameError::Structural(_))
        ));
        let bad_subset = StrategyTree::node(1, 0b100, StrategyTree::leaf(0), StrategyTree::leaf(1));
        assert!(matches!(
            check_winning(&bad_subset, &f, 0),
            Err(GameError::Structural(_))
        ));
    }

    #[test]
    fn truthful_play_reaches_the_correct_leaf() {
        // with no lies the unique consistent path ends at f(tuple)
        let f = xor2();
        let s = xor_strategy();
        for t in 0..f.num_tuples() {
            let tuple = f.tuple_at(t);
            let mut node = &s;
            let mut answers = Vec::new();
            while let StrategyTree::Node {
                index,
                subset,
                no,
                yes,
            } = node
            {
                let a = subset >> tuple[index - 1] & 1 == 1;
                answers.push(a);
                node = if a { yes } else { no };
            }
            assert_eq!(s.walk(&answers).unwrap(), f.value_at(t));
        }
    }

    #[test]
    fn solver_handles_the_identity_game() {
        let f = identity_bit();
        let one = solve_game(&f, GameConfig { q: 1, l: 0 }).unwrap();
        assert_eq!(one.winner, Winner::Paul);
        let two = solve_game(&f, GameConfig { q: 2, l: 1 }).unwrap();
        assert_eq!(two.winner, Winner::Carole);
        assert!(two.strategy.is_none());
        let three = solve_game(&f, GameConfig { q: 3, l: 1 }).unwrap();
        assert_eq!(three.winner, Winner::Paul);
        let witness = three.strategy.unwrap();
        assert!(witness.depth() <= 3);
        assert!(check_winning(&witness, &f, 1).unwrap().is_winning());
    }

    #[test]
    fn solver_monotonicity_small() {
        let tables = [
            identity_bit(),
            xor2(),
            FunctionTable::new(vec![4], vec![0, 1, 2, 3]).unwrap(),
            FunctionTable::new(vec![4], vec![0, 1, 1, 0]).unwrap(),
        ];
        for f in &tables {
            for l in 0..=1u32 {
                for q in 0..=3u32 {
                    let here = solve_game(f, GameConfig { q, l }).unwrap().winner;
                    if here == Winner::Paul {
                        let more_q = solve_game(f, GameConfig { q: q + 1, l }).unwrap().winner;
                        assert_eq!(more_q, Winner::Paul);
                        if l >= 1 {
                            let fewer_lies =
                                solve_game(f, GameConfig { q, l: l - 1 }).unwrap().winner;
                            assert_eq!(fewer_lies, Winner::Paul);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn solver_refuses_oversized_state_spaces() {
        let f = FunctionTable::new(vec![6, 6], vec![0; 36]).unwrap();
        let err = solve_game(&f, GameConfig { q: 3, l: 1 }).unwrap_err();
        assert!(matches!(err, GameError::ResourceLimit { .. }));
    }

    // smallest winning question budgets for the four-value identity game,
    // per lie budget; no general rule is claimed, these are just the solved
    // data points
    #[test]
    fn feasibility_frontier_for_two_bit_identity() {
        let f = FunctionTable::new(vec![4], vec![0, 1, 2, 3]).unwrap();
        let mut frontier = Vec::new();
        for l in 0..=2u32 {
            let q_min = (0..=12u32)
                .find(|&q| solve_game(&f, GameConfig { q, l }).unwrap().winner == Winner::Paul)
                .expect("solvable within 12 questions");
            frontier.push(q_min);
        }
        assert!(frontier.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(frontier[0], 2);
        // classic lie-game answers for four candidates
        assert_eq!(frontier, vec![2, 5, 8]);
    }

    #[test]
    fn dummy_yes_charges_every_tuple() {
        let f = xor2();
        let state = KnowledgeState::initial(f.num_tuples(), 1);
        let after_yes = state.record(&f, 1, 0, true);
        for t in 0..f.num_tuples() {
            assert_eq!(after_yes.lies(t), Some(1));
        }
        let after_no = state.record(&f, 1, 0, false);
        for t in 0..f.num_tuples() {
            assert_eq!(after_no.lies(t), Some(0));
        }
    }

    #[test]
    fn semi_static_keeps_single_leaf() {
        let s = StrategyTree::leaf(7);
        assert_eq!(make_semi_static(&s, 3).unwrap(), s);
    }

    // classic single-coordinate games are already semi-static at k = 1
    #[test]
    fn semi_static_is_identity_for_single_coordinate_games() {
        let s = majority_of_three();
        assert_eq!(make_semi_static(&s, 1).unwrap(), s);
    }

    #[test]
    fn semi_static_keeps_aligned_strategy() {
        let s = xor_strategy();
        let out = make_semi_static(&s, 2).unwrap();
        assert_eq!(out, s);
        let info = semi_static_schedule(&out).unwrap();
        assert_eq!(info.indices, vec![1, 2]);
        assert_eq!(info.depth, 2);
    }

    #[test]
    fn semi_static_interleaves_mismatched_indices() {
        // depth-2 tree whose children query different coordinates
        let f = xor2();
        let s = ask(
            1,
            1,
            ask(2, 1, StrategyTree::leaf(0), StrategyTree::leaf(1)),
            ask(1, 1, StrategyTree::leaf(1), StrategyTree::leaf(0)),
        );
        let out = make_semi_static(&s, 2).unwrap();
        let info = semi_static_schedule(&out).expect("output must be semi-static");
        assert!(info.depth <= 2 * s.depth());
        for (d, &i) in info.indices.iter().enumerate() {
            assert_eq!(i, d % 2 + 1);
        }
        for l in 0..=1 {
            assert_eq!(
                check_winning(&out, &f, l).unwrap().is_winning(),
                check_winning(&s, &f, l).unwrap().is_winning(),
                "verdict changed at l={l}"
            );
        }
    }

    #[test]
    fn strategy_json_shape() {
        let s = ask(1, 1, StrategyTree::leaf(0), StrategyTree::leaf(1));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"i":1,"F":[1],"no":{"leaf":0},"yes":{"leaf":1}}"#);
        let back: StrategyTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn function_json_shape() {
        let f = xor2();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"k":2,"domains":[2,2],"values":[0,1,1,0]}"#);
        let back: FunctionTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<FunctionTable>(
            r#"{"k":1,"domains":[2,2],"values":[0,1,1,0]}"#
        )
        .is_err());
    }

    fn arb_strategy() -> impl Strategy<Value = StrategyTree> {
        let leaf = (0i64..3).prop_map(StrategyTree::leaf);
        leaf.prop_recursive(3, 24, 2, |inner| {
            (1usize..=2, 1u64..4, inner.clone(), inner)
                .prop_map(|(i, subset, no, yes)| StrategyTree::node(i, subset, no, yes))
        })
    }

    proptest! {
        // the semi-static reshaping never changes who wins
        #[test]
        fn semi_static_preserves_verdicts(s in arb_strategy(), l in 0u32..3) {
            let f = xor2();
            let out = make_semi_static(&s, 2).unwrap();
            let info = semi_static_schedule(&out).expect("semi-static output");
            prop_assert!(info.depth <= 2 * s.depth());
            for (d, &i) in info.indices.iter().enumerate() {
                prop_assert_eq!(i, d % 2 + 1);
            }
            let before = check_winning(&s, &f, l).unwrap().is_winning();
            let after = check_winning(&out, &f, l).unwrap().is_winning();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn strategy_serialization_round_trips(s in arb_strategy()) {
            let json = serde_json::to_string(&s).unwrap();
            let back: StrategyTree = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
