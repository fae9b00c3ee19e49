//! Cross-module checks: protocol -> strategy -> compilation -> simulation,
//! the lie-budget guarantee under exhaustive error patterns, and agreement
//! between simulated, enumerated, and bounded failure probabilities.

use ulamtree::bridge::{
    check_protocol_locality, compile_coordinator, compile_parallel, protocol_to_strategy, Mode,
    ProtocolTree, RobustProtocol,
};
use ulamtree::channelsim::{
    adversarial_sweep, chernoff_bound, message_plan, monte_carlo, run, ChannelModel, SweepOptions,
};
use ulamtree::treecode::generate_tsequence;
use ulamtree::ulamgame::{check_winning, make_semi_static, FunctionTable, StrategyTree};

fn xor2() -> FunctionTable {
    FunctionTable::new(vec![2, 2], vec![0, 1, 1, 0]).unwrap()
}

// P1 announces x1; P2 replies with received ^ x2
fn xor_protocol() -> ProtocolTree {
    let after0 = ProtocolTree::step(2, 1, 0b10, ProtocolTree::leaf(0), ProtocolTree::leaf(1));
    let after1 = ProtocolTree::step(2, 1, 0b01, ProtocolTree::leaf(0), ProtocolTree::leaf(1));
    ProtocolTree::step(1, 2, 0b10, after0, after1)
}

// asks "x_index in {1}?" `reps` times per coordinate (1 then 2), leaves are
// the xor of the per-coordinate answer majorities; wins with l = reps/2 lies
fn repeated_xor_strategy(reps: usize) -> StrategyTree {
    fn build(reps: usize, depth: usize, ones1: usize, ones2: usize) -> StrategyTree {
        if depth == 2 * reps {
            let a = ones1 > reps / 2;
            let b = ones2 > reps / 2;
            return StrategyTree::leaf(i64::from(a ^ b));
        }
        let first_block = depth < reps;
        let index = if first_block { 1 } else { 2 };
        let no = build(reps, depth + 1, ones1, ones2);
        let yes = build(
            reps,
            depth + 1,
            ones1 + usize::from(first_block),
            ones2 + usize::from(!first_block),
        );
        StrategyTree::node(index, 0b10, no, yes)
    }
    build(reps, 0, 0, 0)
}

// asks "x2 in {1}?" three times; f = x2
fn maj3_x2_strategy() -> StrategyTree {
    fn build(depth: usize, ones: usize) -> StrategyTree {
        if depth == 3 {
            return StrategyTree::leaf(i64::from(ones >= 2));
        }
        StrategyTree::node(2, 0b10, build(depth + 1, ones), build(depth + 1, ones + 1))
    }
    build(0, 0)
}

fn second_coordinate() -> FunctionTable {
    FunctionTable::new(vec![2, 2], vec![0, 1, 0, 1]).unwrap()
}

fn parity3() -> FunctionTable {
    FunctionTable::new(vec![2, 2, 2], vec![0, 1, 1, 0, 1, 0, 0, 1]).unwrap()
}

fn parity3_strategy() -> StrategyTree {
    fn build(index: usize, acc: bool) -> StrategyTree {
        if index > 3 {
            return StrategyTree::leaf(i64::from(acc));
        }
        StrategyTree::node(index, 0b10, build(index + 1, acc), build(index + 1, !acc))
    }
    build(1, false)
}

fn all_outputs_equal(outputs: &[Option<i64>], expected: i64) -> bool {
    outputs.iter().all(|o| *o == Some(expected))
}

// ---------------------------------------------------------------------------

#[test]
fn protocol_to_compiled_run_round_trip() {
    let f = xor2();
    let p = xor_protocol();
    assert!(check_protocol_locality(&p).consistent);
    let s = protocol_to_strategy(&p, &f).unwrap();
    assert!(check_winning(&s, &f, 0).unwrap().is_winning());

    let semi = make_semi_static(&s, 2).unwrap();
    let ts = generate_tsequence(4, 8, 1).unwrap();
    for rp in [
        compile_coordinator(&semi, &ts, 2).unwrap(),
        compile_parallel(&semi, &ts, 2).unwrap(),
    ] {
        for t in 0..f.num_tuples() {
            let tuple = f.tuple_at(t);
            let out = run(&rp, &tuple, &ChannelModel::noiseless()).unwrap();
            assert!(all_outputs_equal(&out.outputs, f.value_at(t)));
            // without noise every tracked state follows the truthful path
            let truthful: Vec<String> = out.transcript.final_paths.concat();
            assert!(truthful.iter().all(|p| p == &truthful[0]));
        }
        let sweep = adversarial_sweep(&rp, &f, 0, SweepOptions::default()).unwrap();
        assert!(sweep.passed());
    }
}

#[test]
fn coordinator_transcript_accounting() {
    let ts = generate_tsequence(4, 8, 5).unwrap();
    let rp = compile_coordinator(&maj3_x2_strategy(), &ts, 2).unwrap();
    let pattern = vec![(0usize, 0u8), (1, 0), (1, 3)];
    let out = run(&rp, &[1, 1], &ChannelModel::Adversarial { pattern }).unwrap();
    let t = &out.transcript;
    let depth = rp.rounds() as u64;
    assert!(t.q1 <= depth);
    assert_eq!(t.q2, (rp.k as u64 - 1) * depth);
    assert_eq!(t.bit_total, t.q1 + 4 * t.q2);
    assert_eq!(t.bit_total, rp.bit_total());

    // error counts recompute exactly from the bit records and the layout
    let plan = message_plan(&rp);
    let mut cursor = 0usize;
    let (mut r1, mut r2) = (0u64, 0u64);
    for msg in &plan {
        let bits = &t.records[cursor..cursor + msg.bits as usize];
        let corrupted = bits.iter().any(|b| b.sent != b.received);
        if msg.bits == 1 {
            r1 += u64::from(corrupted);
        } else {
            r2 += u64::from(corrupted);
        }
        cursor += msg.bits as usize;
    }
    assert_eq!(cursor, t.records.len());
    assert_eq!((r1, r2), (t.r1, t.r2));
}

// a misaligned strategy stretches to at most k times its depth and the
// compiled bit total stays under the worst-case accounting for the original
#[test]
fn reshaped_strategy_stays_inside_worst_case_bits() {
    let f = xor2();
    // ask x2 first, then x1: both slots miss by one
    let leaf = |a: bool, b: bool| StrategyTree::leaf(i64::from(a ^ b));
    let s = StrategyTree::node(
        2,
        0b10,
        StrategyTree::node(1, 0b10, leaf(false, false), leaf(false, true)),
        StrategyTree::node(1, 0b10, leaf(true, false), leaf(true, true)),
    );
    let semi = make_semi_static(&s, 2).unwrap();
    assert!(semi.depth() <= 2 * s.depth());
    let ts = generate_tsequence(4, 8, 1).unwrap();
    let rp = compile_coordinator(&semi, &ts, 2).unwrap();
    let bound = ulamtree::bridge::robustness_bound(2, s.depth() as u64, 0).unwrap();
    assert!(rp.bit_total() <= bound.bit_total);
    for t in 0..f.num_tuples() {
        let tuple = f.tuple_at(t);
        let out = run(&rp, &tuple, &ChannelModel::noiseless()).unwrap();
        assert!(all_outputs_equal(&out.outputs, f.value_at(t)));
    }
}

// every error pattern within the lie budget (r1 + 4*r2 <= l) leaves all
// outputs correct; exhaustive over uplink flip subsets and single-letter
// corruptions
#[test]
fn coordinator_guarantee_within_lie_budget() {
    let ts = generate_tsequence(4, 8, 5).unwrap();
    assert!(
        ulamtree::treecode::verify_code(&ts, 8, ulamtree::treecode::BoundKind::Piecewise)
            .unwrap()
            .is_pass()
    );

    // f = x2, majority of three, lie budget 1: patterns with r1 <= 1
    let f = second_coordinate();
    let s = maj3_x2_strategy();
    assert!(check_winning(&s, &f, 1).unwrap().is_winning());
    let rp = compile_coordinator(&s, &ts, 2).unwrap();
    let plan = message_plan(&rp);
    let uplinks: Vec<usize> = plan
        .iter()
        .enumerate()
        .filter(|(_, m)| m.bits == 1)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(uplinks.len(), 3);
    for t in 0..f.num_tuples() {
        let tuple = f.tuple_at(t);
        for flip in std::iter::once(None).chain(uplinks.iter().map(Some)) {
            let pattern = flip.map(|&m| vec![(m, 0u8)]).unwrap_or_default();
            let out = run(&rp, &tuple, &ChannelModel::Adversarial { pattern }).unwrap();
            assert!(
                all_outputs_equal(&out.outputs, f.value_at(t)),
                "tuple {tuple:?} flip {flip:?}"
            );
        }
    }
}

// one corrupted downlink letter (any nonzero xor on its 4 bits) against an
// l = 4 strategy: r1 + 4*r2 = 4, still within budget everywhere
#[test]
fn coordinator_survives_any_single_letter_corruption() {
    let f = xor2();
    let s = repeated_xor_strategy(9);
    assert!(check_winning(&s, &f, 4).unwrap().is_winning());
    let ts = generate_tsequence(4, 18, 5).unwrap();
    assert!(
        ulamtree::treecode::verify_code(&ts, 18, ulamtree::treecode::BoundKind::Piecewise)
            .unwrap()
            .is_pass()
    );
    let rp = compile_coordinator(&s, &ts, 2).unwrap();
    let plan = message_plan(&rp);
    let letters: Vec<usize> = plan
        .iter()
        .enumerate()
        .filter(|(_, m)| m.bits == 4)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(letters.len(), 18);
    for t in 0..f.num_tuples() {
        let tuple = f.tuple_at(t);
        for &msg in &letters {
            for xor in 1u8..16 {
                let pattern: Vec<(usize, u8)> = (0..4)
                    .filter(|b| xor >> b & 1 == 1)
                    .map(|b| (msg, b))
                    .collect();
                let out = run(&rp, &tuple, &ChannelModel::Adversarial { pattern }).unwrap();
                assert!(
                    all_outputs_equal(&out.outputs, f.value_at(t)),
                    "tuple {tuple:?} letter msg {msg} xor {xor:#06b}"
                );
            }
        }
    }
}

// the shared-state broadcast with perfect feedback: everyone follows the
// received bit, so e inverted broadcasts are exactly e lies
fn naive_broadcast_run(s: &StrategyTree, tuple: &[usize], flips: &[bool]) -> i64 {
    let mut node = s;
    let mut round = 0;
    loop {
        match node {
            StrategyTree::Leaf { value } => return *value,
            StrategyTree::Node {
                index,
                subset,
                no,
                yes,
            } => {
                let answer = subset >> tuple[index - 1] & 1 == 1;
                let received = answer ^ flips[round];
                node = if received { yes } else { no };
                round += 1;
            }
        }
    }
}

// the broadcast oracle and the game verdict agree exactly: the strategy wins
// with lie budget e iff no pattern of at most e inversions misleads anyone
#[test]
fn naive_broadcast_oracle_matches_check_winning() {
    let f = second_coordinate();
    let s = maj3_x2_strategy();
    let depth = 3usize;
    for budget in 0..=3u32 {
        let mut all_good = true;
        for t in 0..f.num_tuples() {
            let tuple = f.tuple_at(t);
            for mask in 0u32..1 << depth {
                if mask.count_ones() > budget {
                    continue;
                }
                let flips: Vec<bool> = (0..depth).map(|i| mask >> i & 1 == 1).collect();
                if naive_broadcast_run(&s, &tuple, &flips) != f.value_at(t) {
                    all_good = false;
                }
            }
        }
        let winning = check_winning(&s, &f, budget).unwrap().is_winning();
        assert_eq!(all_good, winning, "budget {budget}");
    }
}

// if at least floor(k/2)+1 of a processor's tracked leaves carry the right
// value, its output is right; and the output always matches the majority of
// its tracked leaves
#[test]
fn parallel_outputs_follow_tracked_majorities() {
    let f = parity3();
    let s = parity3_strategy();
    let ts = generate_tsequence(4, 4, 1).unwrap();
    let rp = compile_parallel(&s, &ts, 3).unwrap();
    let plan = message_plan(&rp);

    let mut patterns: Vec<Vec<(usize, u8)>> = vec![vec![]];
    // total corruption of each processor's outgoing letters
    for m in 1..=3usize {
        patterns.push(
            plan.iter()
                .enumerate()
                .filter(|(_, spec)| spec.bits == 4 && spec.sender == m)
                .flat_map(|(i, _)| (0..4).map(move |b| (i, b)))
                .collect(),
        );
    }
    // a few scattered corruptions (uplinks are 1 bit, letters 4)
    patterns.push(vec![(2, 0), (5, 3), (10, 1)]);
    patterns.push(vec![(0, 0), (3, 0), (3, 1), (18, 2)]);

    for pattern in patterns {
        for t in 0..f.num_tuples() {
            let tuple = f.tuple_at(t);
            let expected = f.value_at(t);
            let out = run(
                &rp,
                &tuple,
                &ChannelModel::Adversarial {
                    pattern: pattern.clone(),
                },
            )
            .unwrap();
            for (j, tracked) in out.transcript.final_paths.iter().enumerate() {
                let values: Vec<i64> = tracked
                    .iter()
                    .map(|p| {
                        let bits: Vec<bool> = p.chars().map(|c| c == '1').collect();
                        rp.strategy.walk(&bits).unwrap()
                    })
                    .collect();
                let correct = values.iter().filter(|&&v| v == expected).count();
                if correct >= 2 {
                    assert_eq!(
                        out.outputs[j],
                        Some(expected),
                        "pattern {pattern:?} tuple {tuple:?} processor {}",
                        j + 1
                    );
                }
                // output is exactly the strict majority of the tracked values
                let majority = values
                    .iter()
                    .find(|&&v| values.iter().filter(|&&w| w == v).count() >= 2)
                    .copied();
                assert_eq!(out.outputs[j], majority);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exact enumeration vs Monte Carlo vs the tail bound

fn exact_failure_prob(
    rp: &RobustProtocol,
    f: &FunctionTable,
    tuple: &[usize],
    epsilon: f64,
) -> f64 {
    let plan = message_plan(rp);
    let slots: Vec<(usize, u8)> = plan
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..m.bits).map(move |b| (mi, b)))
        .collect();
    let n = slots.len();
    assert!(n <= 20, "enumeration only makes sense for small protocols");
    let expected = f.value(tuple).unwrap();
    let mut prob = 0.0f64;
    for mask in 0u32..1 << n {
        let pattern: Vec<(usize, u8)> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| slots[i])
            .collect();
        let weight = pattern.len() as i32;
        let out = run(rp, tuple, &ChannelModel::Adversarial { pattern }).unwrap();
        if !all_outputs_equal(&out.outputs, expected) {
            prob += epsilon.powi(weight) * (1.0 - epsilon).powi(n as i32 - weight);
        }
    }
    prob
}

fn nine_bit_xor_protocol() -> (RobustProtocol, FunctionTable) {
    let f = xor2();
    let s = protocol_to_strategy(&xor_protocol(), &f).unwrap();
    let semi = make_semi_static(&s, 2).unwrap();
    let ts = generate_tsequence(4, 8, 1).unwrap();
    let rp = compile_coordinator(&semi, &ts, 2).unwrap();
    assert_eq!(rp.bit_total(), 9);
    (rp, f)
}

#[test]
fn monte_carlo_agrees_with_exact_enumeration() {
    let (rp, f) = nine_bit_xor_protocol();
    // worst input by exact failure probability at a reference epsilon
    let worst = (0..f.num_tuples())
        .max_by(|&a, &b| {
            let pa = exact_failure_prob(&rp, &f, &f.tuple_at(a), 0.1);
            let pb = exact_failure_prob(&rp, &f, &f.tuple_at(b), 0.1);
            pa.partial_cmp(&pb).unwrap()
        })
        .unwrap();
    let tuple = f.tuple_at(worst);
    for epsilon in [0.05, 0.1, 0.2] {
        let exact = exact_failure_prob(&rp, &f, &tuple, epsilon);
        let est = monte_carlo(&rp, &f, epsilon, 100_000, 31, Some(&tuple)).unwrap();
        assert!(
            (est.rate - exact).abs() <= 3.0 * est.half_width,
            "epsilon {epsilon}: estimate {} vs exact {exact} (hw {})",
            est.rate,
            est.half_width
        );
    }
}

#[test]
fn enumerated_failure_stays_below_the_tail_bound() {
    let (rp, f) = nine_bit_xor_protocol();
    let sweep = adversarial_sweep(&rp, &f, 0, SweepOptions::default()).unwrap();
    assert!(sweep.passed());
    let n = rp.bit_total();
    // robust to fraction (budget+1)/n: failures need at least one flip
    let epsilon0 = 1.0 / n as f64;
    for epsilon in [0.01, 0.05, epsilon0 * 0.9] {
        let bound = chernoff_bound(epsilon, epsilon0, n).unwrap();
        for t in 0..f.num_tuples() {
            let exact = exact_failure_prob(&rp, &f, &f.tuple_at(t), epsilon);
            assert!(
                exact <= bound + 1e-12,
                "epsilon {epsilon} tuple {t}: exact {exact} above bound {bound}"
            );
        }
    }
    // a sampled estimate also respects the bound up to sampling error
    let epsilon = epsilon0 / 2.0;
    let bound = chernoff_bound(epsilon, epsilon0, n).unwrap();
    let est = monte_carlo(&rp, &f, epsilon, 20_000, 17, None).unwrap();
    assert!(est.rate <= bound + 3.0 * est.half_width);
}

#[test]
fn parallel_mode_counts_ties_as_failures() {
    let f = xor2();
    let s = protocol_to_strategy(&xor_protocol(), &f).unwrap();
    let semi = make_semi_static(&s, 2).unwrap();
    let ts = generate_tsequence(4, 8, 1).unwrap();
    let rp = compile_parallel(&semi, &ts, 2).unwrap();
    assert_eq!(rp.mode, Mode::Parallel);
    // heavy noise: ties must show up as failures in the estimate, never as
    // silently wrong sweep passes
    let est = monte_carlo(&rp, &f, 0.5, 2_000, 3, None).unwrap();
    assert!(est.failures > 0);
}
