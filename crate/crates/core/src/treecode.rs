//! r-bit binary tree codes built from an XOR convolution of a generator
//! sequence.
//!
//! A code is determined by a sequence of letters `t_0..t_{n-1}` from the
//! alphabet `{0, .., 2^r - 1}`. The arc label at depth `h` of the binary tree,
//! for the path with arc bits `a'_1..a'_h`, is
//!
//! ```text
//! a_h = XOR over { t_{h-i} : a'_i = 1 }
//! ```
//!
//! Labels are linear in the path bits, so the distance between any two
//! equal-depth paths depends only on their bitwise difference below the fork.
//! The certifier exploits this: instead of comparing node pairs it enumerates
//! difference sequences, which halves the exponent of the search.

use std::fmt;
use std::str::FromStr;

use num::bigint::BigUint;
use num::rational::BigRational;
use num::{BigInt, One};
use rand::RngCore;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::rng;

/// One code letter, an r-bit vector stored in the low bits.
pub type Letter = u64;

/// Widths above this make the exhaustive certifier and the uniform-letter
/// mask impractical; the construction targets small alphabets anyway.
pub const MAX_BIT_WIDTH: u32 = 60;

/// Difference-sequence enumeration is `2^(l-1)` per length `l`; refuse
/// depths where that is hopeless.
pub const MAX_VERIFY_DEPTH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeCodeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

type Result<T> = std::result::Result<T, TreeCodeError>;

fn letter_mask(r: u32) -> u64 {
    (1u64 << r) - 1
}

// ---------------------------------------------------------------------------
// Generator sequence

/// The generator letters of a code, plus the seed that produced the random
/// tail. Serialized as `{"r": .., "seed": .., "t": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TSequence {
    r: u32,
    seed: u64,
    #[serde(rename = "t")]
    letters: Vec<Letter>,
}

impl TSequence {
    /// Builds a sequence from explicit letters, checking only that every
    /// letter fits in `r` bits. Degenerate sequences (for example with a
    /// repeated first letter) are allowed: the certifier exists to reject
    /// them.
    pub fn new(r: u32, seed: u64, letters: Vec<Letter>) -> Result<Self> {
        if !(1..=MAX_BIT_WIDTH).contains(&r) {
            return Err(TreeCodeError::InvalidParameter(format!(
                "bit width r must be in 1..={MAX_BIT_WIDTH}, got {r}"
            )));
        }
        if letters.is_empty() {
            return Err(TreeCodeError::InvalidParameter(
                "sequence needs at least one letter".into(),
            ));
        }
        if let Some(bad) = letters.iter().find(|&&t| t > letter_mask(r)) {
            return Err(TreeCodeError::InvalidParameter(format!(
                "letter {bad} does not fit in {r} bits"
            )));
        }
        Ok(TSequence { r, seed, letters })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Tree depth supported by this sequence.
    pub fn depth(&self) -> usize {
        self.letters.len()
    }

    /// Whether the first `min(r, n)` letters are linearly independent over
    /// GF(2). Holds by construction for generated sequences.
    pub fn has_independent_prefix(&self) -> bool {
        let take = (self.r as usize).min(self.letters.len());
        let mut basis: Vec<u64> = Vec::with_capacity(take);
        for &t in &self.letters[..take] {
            let mut v = t;
            for &b in &basis {
                let high = 63 - b.leading_zeros();
                if v >> high & 1 == 1 {
                    v ^= b;
                }
            }
            if v == 0 {
                return false;
            }
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
        true
    }
}

impl<'de> Deserialize<'de> for TSequence {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            r: u32,
            seed: u64,
            t: Vec<Letter>,
        }
        let w = Wire::deserialize(de)?;
        TSequence::new(w.r, w.seed, w.t).map_err(D::Error::custom)
    }
}

/// Generates a depth-`n` sequence: a fixed triangular prefix
/// `t_i = 2^(r-i) - 1` for `i < min(r, n)` (linearly independent by
/// construction), then uniform letters from sub-stream 0 of `seed`.
pub fn generate_tsequence(r: u32, n: usize, seed: u64) -> Result<TSequence> {
    if !(1..=MAX_BIT_WIDTH).contains(&r) {
        return Err(TreeCodeError::InvalidParameter(format!(
            "bit width r must be in 1..={MAX_BIT_WIDTH}, got {r}"
        )));
    }
    if n < 1 {
        return Err(TreeCodeError::InvalidParameter(
            "depth n must be at least 1".into(),
        ));
    }
    let mut letters = Vec::with_capacity(n);
    for i in 0..n.min(r as usize) {
        letters.push((1u64 << (r - i as u32)) - 1);
    }
    // 2^r divides the generator range, so masking r bits is exactly uniform.
    let mut tail = rng::split(seed, 0);
    while letters.len() < n {
        letters.push(tail.next_u64() & letter_mask(r));
    }
    TSequence::new(r, seed, letters)
}

// ---------------------------------------------------------------------------
// Paths and labels

/// A root-to-node path as its sequence of arc bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodePath {
    bits: Vec<bool>,
}

impl CodePath {
    pub fn new(bits: Vec<bool>) -> Self {
        CodePath { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn depth(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }
}

impl fmt::Display for CodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for CodePath {
    type Err = TreeCodeError;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(TreeCodeError::InvalidParameter(format!(
                        "path must be a 0/1 string, got {s:?}"
                    )))
                }
            }
        }
        Ok(CodePath { bits })
    }
}

/// Labels of every arc along `path`: output[h-1] is the letter on the arc
/// entering depth `h`. Prefix paths yield prefix labels.
pub fn path_labels(ts: &TSequence, path: &CodePath) -> Result<Vec<Letter>> {
    if path.depth() > ts.depth() {
        return Err(TreeCodeError::InvalidParameter(format!(
            "path depth {} exceeds sequence depth {}",
            path.depth(),
            ts.depth()
        )));
    }
    let mut labels = Vec::with_capacity(path.depth());
    for h in 1..=path.depth() {
        let mut acc = 0u64;
        for (i, &bit) in path.bits[..h].iter().enumerate() {
            if bit {
                acc ^= ts.letters[h - 1 - i];
            }
        }
        labels.push(acc);
    }
    Ok(labels)
}

// Label on the arc entering depth `path.len()`, O(ones) instead of O(depth^2).
pub(crate) fn last_label(ts: &TSequence, path: &[bool]) -> Letter {
    let h = path.len();
    let mut acc = 0u64;
    for (i, &bit) in path.iter().enumerate() {
        if bit {
            acc ^= ts.letters[h - 1 - i];
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Distance bounds and certification

/// Lower bound required of the letter distance over a divergence of length
/// `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// `ceil(l/2)`: the plain distance-1/2 requirement.
    Half,
    /// `l` up to the bit width, then flat `r`, then `ceil(l/2)`.
    Piecewise,
}

impl BoundKind {
    pub fn required(self, l: usize, r: u32) -> usize {
        let r = r as usize;
        match self {
            BoundKind::Half => l.div_ceil(2),
            BoundKind::Piecewise => {
                if l <= r {
                    l
                } else if l <= 2 * r {
                    r
                } else {
                    l.div_ceil(2)
                }
            }
        }
    }
}

impl FromStr for BoundKind {
    type Err = TreeCodeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(BoundKind::Half),
            "piecewise" => Ok(BoundKind::Piecewise),
            _ => Err(TreeCodeError::InvalidParameter(format!(
                "unknown bound {s:?} (expected half or piecewise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertVerdict {
    Pass,
    Fail,
}

/// Outcome of certification. On failure, carries the first violating
/// divergence in (length, lexicographic) order: the difference bit string
/// `c` (always starting with 1), the letter distance it achieved, and the
/// bound it had to meet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceCertificate {
    pub verdict: CertVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required: Option<usize>,
}

impl DistanceCertificate {
    fn pass() -> Self {
        DistanceCertificate {
            verdict: CertVerdict::Pass,
            l: None,
            c: None,
            achieved: None,
            required: None,
        }
    }

    fn fail(l: usize, diff: String, achieved: usize, required: usize) -> Self {
        debug_assert!(diff.starts_with('1'));
        debug_assert!(achieved < required);
        DistanceCertificate {
            verdict: CertVerdict::Fail,
            l: Some(l),
            c: Some(diff),
            achieved: Some(achieved),
            required: Some(required),
        }
    }

    pub fn is_pass(&self) -> bool {
        self.verdict == CertVerdict::Pass
    }
}

struct LevelScan {
    min_weight: usize,
    // lexicographically smallest violating mask and its weight
    worst: Option<(u64, usize)>,
}

// Scans every difference sequence of length `l` (first bit fixed to 1) in
// Gray-code order, maintaining the convolved letters incrementally. The mask
// holds bits c'_2..c'_l with c'_2 most significant, so mask order equals
// lexicographic order on the difference string.
fn scan_level(letters: &[Letter], l: usize, required: usize) -> LevelScan {
    let mut vals: Vec<Letter> = letters[..l].to_vec();
    let mut weight = vals.iter().filter(|&&v| v != 0).count();
    let mut min_weight = weight;
    let mut worst: Option<(u64, usize)> = None;
    let mut mask = 0u64;
    if weight < required {
        worst = Some((0, weight));
    }
    let total = 1u64 << (l - 1);
    for step in 1..total {
        let b = step.trailing_zeros() as usize;
        let j = l - b; // c'_j toggles; affects positions j..=l
        mask ^= 1u64 << b;
        for h in j..=l {
            let v = &mut vals[h - 1];
            let was = *v != 0;
            *v ^= letters[h - j];
            let now = *v != 0;
            if was && !now {
                weight -= 1;
            } else if !was && now {
                weight += 1;
            }
        }
        min_weight = min_weight.min(weight);
        if weight < required && worst.is_none_or(|(m, _)| mask < m) {
            worst = Some((mask, weight));
        }
    }
    LevelScan { min_weight, worst }
}

fn difference_string(l: usize, mask: u64) -> String {
    let mut s = String::with_capacity(l);
    s.push('1');
    for j in 2..=l {
        s.push(if mask >> (l - j) & 1 == 1 { '1' } else { '0' });
    }
    s
}

fn check_verify_depth(ts: &TSequence, max_depth: usize) -> Result<()> {
    if max_depth > ts.depth() {
        return Err(TreeCodeError::InvalidParameter(format!(
            "max_depth {} exceeds sequence depth {}",
            max_depth,
            ts.depth()
        )));
    }
    if max_depth > MAX_VERIFY_DEPTH {
        return Err(TreeCodeError::InvalidParameter(format!(
            "max_depth {max_depth} exceeds the exhaustive-check limit {MAX_VERIFY_DEPTH}"
        )));
    }
    Ok(())
}

/// Certifies the code against `bound` for every divergence length up to
/// `max_depth`. Returns the first violation in (length, lexicographic)
/// order, or a pass certificate.
pub fn verify_code(
    ts: &TSequence,
    max_depth: usize,
    bound: BoundKind,
) -> Result<DistanceCertificate> {
    check_verify_depth(ts, max_depth)?;
    for l in 1..=max_depth {
        let required = bound.required(l, ts.r);
        let scan = scan_level(&ts.letters, l, required);
        if let Some((mask, weight)) = scan.worst {
            return Ok(DistanceCertificate::fail(
                l,
                difference_string(l, mask),
                weight,
                required,
            ));
        }
    }
    Ok(DistanceCertificate::pass())
}

/// Minimum of `achieved - required` over every divergence length up to
/// `max_depth`; non-negative exactly when [`verify_code`] passes.
pub fn distance_margin(ts: &TSequence, max_depth: usize, bound: BoundKind) -> Result<i64> {
    check_verify_depth(ts, max_depth)?;
    let mut margin = i64::MAX;
    for l in 1..=max_depth {
        let required = bound.required(l, ts.r);
        let scan = scan_level(&ts.letters, l, required);
        margin = margin.min(scan.min_weight as i64 - required as i64);
    }
    Ok(margin)
}

// ---------------------------------------------------------------------------
// Decoding

/// Exact nearest-path decoding of a received letter prefix.
///
/// Minimizes, in order: letter mismatch count, then bitwise distance, then
/// the lexicographic value of the path. Branch-and-bound over the path tree;
/// both tie-break keys grow monotonically along a path, so a partial cost
/// that already reaches the incumbent can be cut.
pub fn decode_prefix(ts: &TSequence, received: &[Letter]) -> Result<CodePath> {
    if received.len() > ts.depth() {
        return Err(TreeCodeError::InvalidParameter(format!(
            "received length {} exceeds sequence depth {}",
            received.len(),
            ts.depth()
        )));
    }
    if let Some(bad) = received.iter().find(|&&v| v > letter_mask(ts.r)) {
        return Err(TreeCodeError::InvalidParameter(format!(
            "received letter {bad} does not fit in {} bits",
            ts.r
        )));
    }
    let mut best: Option<(Vec<bool>, usize, u32)> = None;
    let mut bits: Vec<bool> = Vec::with_capacity(received.len());
    let mut ones: Vec<usize> = Vec::new();
    descend(ts, received, &mut bits, &mut ones, 0, 0, &mut best);
    Ok(CodePath::new(best.map(|(b, _, _)| b).unwrap_or_default()))
}

fn descend(
    ts: &TSequence,
    received: &[Letter],
    bits: &mut Vec<bool>,
    ones: &mut Vec<usize>, // 1-based positions of set bits
    mismatches: usize,
    bit_distance: u32,
    best: &mut Option<(Vec<bool>, usize, u32)>,
) {
    if let Some((_, bm, bb)) = best {
        // equal cost cannot beat the incumbent: the 0-first visit order
        // already made it the lexicographic minimum
        if (mismatches, bit_distance) >= (*bm, *bb) {
            return;
        }
    }
    let d = bits.len();
    if d == received.len() {
        *best = Some((bits.clone(), mismatches, bit_distance));
        return;
    }
    let mut base = 0u64;
    for &i in ones.iter() {
        base ^= ts.letters[d + 1 - i];
    }
    for bit in [false, true] {
        let label = if bit { base ^ ts.letters[0] } else { base };
        let delta = label ^ received[d];
        let nm = mismatches + usize::from(delta != 0);
        let nb = bit_distance + delta.count_ones();
        bits.push(bit);
        if bit {
            ones.push(d + 1);
        }
        descend(ts, received, bits, ones, nm, nb, best);
        if bit {
            ones.pop();
        }
        bits.pop();
    }
}

// ---------------------------------------------------------------------------
// Counting and probability bounds

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::default();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 1..=k {
        acc = acc * (n - k + i) / i;
    }
    acc
}

/// Number of weighted lattice walks that witness a first distance violation
/// after `2m + 2r + 1` steps:
///
/// ```text
/// B(m, r) = (r+1)/(m+r+1) * C(2m+r, m) * (2^r - 1)^m
/// ```
///
/// Exact integer arithmetic throughout.
pub fn bad_walk_count(m: u64, r: u32) -> BigUint {
    assert!(r >= 1, "bad_walk_count requires r >= 1");
    let r64 = r as u64;
    let numer = binomial(2 * m + r64, m) * (r64 + 1);
    let denom = BigUint::from(m + r64 + 1);
    let paths = &numer / &denom;
    assert!(&paths * &denom == numer, "ballot count must divide exactly");
    let up_choices = (BigUint::from(2u32).pow(r) - 1u32).pow(m as u32);
    paths * up_choices
}

/// Upper bound on the probability that a random tail of letters violates the
/// piecewise distance schedule: `(r+1)/r * 2^(-r^2 + r + 5)`, exact.
///
/// The chain of inequalities behind it needs `r >= 4`.
pub fn failure_prob_bound(r: u32) -> Result<BigRational> {
    if r < 4 {
        return Err(TreeCodeError::InvalidParameter(format!(
            "failure bound requires r >= 4, got {r}"
        )));
    }
    // exponent r^2 - r - 5 is positive for r >= 4
    let exp = r * r - r - 5;
    let denom = BigInt::from(r) * BigInt::from(2u32).pow(exp);
    Ok(BigRational::new(BigInt::from(r + 1), denom))
}

// ---------------------------------------------------------------------------
// Greedy extension

/// Result of [`greedy_extend`]: the extended sequence, its certificate at the
/// target depth, and the final distance margin.
#[derive(Debug, Clone)]
pub struct GreedyResult {
    pub sequence: TSequence,
    pub certificate: DistanceCertificate,
    pub best_margin: i64,
}

/// Extends a certified prefix one letter at a time. Each step scores a
/// seeded sample of candidate letters by the distance margin up to the new
/// depth and keeps the first maximal one; candidate order comes from
/// sub-stream `1 + step` of the prefix seed, so identical inputs extend
/// identically.
///
/// If no candidate preserves the bound the best-margin letter is kept anyway
/// and the final certificate reports the failure.
pub fn greedy_extend(
    prefix: &TSequence,
    target_depth: usize,
    candidates_per_step: usize,
    bound: BoundKind,
) -> Result<GreedyResult> {
    if candidates_per_step < 1 {
        return Err(TreeCodeError::InvalidParameter(
            "need at least one candidate per step".into(),
        ));
    }
    if target_depth < prefix.depth() {
        return Err(TreeCodeError::InvalidParameter(format!(
            "target depth {target_depth} is below the prefix depth {}",
            prefix.depth()
        )));
    }
    if target_depth > MAX_VERIFY_DEPTH {
        return Err(TreeCodeError::InvalidParameter(format!(
            "target depth {target_depth} exceeds the exhaustive-check limit {MAX_VERIFY_DEPTH}"
        )));
    }
    if !verify_code(prefix, prefix.depth(), bound)?.is_pass() {
        return Err(TreeCodeError::InvalidParameter(
            "prefix does not pass certification at its own depth".into(),
        ));
    }

    let r = prefix.r;
    let alphabet = 1u64 << r;
    let want = (candidates_per_step as u64).min(alphabet) as usize;
    let mut work = prefix.clone();
    for step in prefix.depth()..target_depth {
        let mut order = rng::split(prefix.seed, 1 + step as u64);
        let mut candidates: Vec<Letter> = Vec::with_capacity(want);
        while candidates.len() < want {
            let cand = order.next_u64() & letter_mask(r);
            if !candidates.contains(&cand) {
                candidates.push(cand);
            }
        }
        let mut best: Option<(Letter, i64)> = None;
        for cand in candidates {
            work.letters.push(cand);
            let margin = distance_margin(&work, step + 1, bound)?;
            work.letters.pop();
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((cand, margin));
            }
        }
        let (chosen, _) = best.expect("at least one candidate");
        work.letters.push(chosen);
    }
    let certificate = verify_code(&work, target_depth, bound)?;
    let best_margin = distance_margin(&work, target_depth, bound)?;
    Ok(GreedyResult {
        sequence: work,
        certificate,
        best_margin,
    })
}

// ---------------------------------------------------------------------------
