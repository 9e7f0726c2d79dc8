//! CRI-length evaluators over a realized splitting tree.
//!
//! Four semantics, all pure functions over the same immutable tree:
//!
//! - [`slot_level_cri`]: ground truth — a slot-by-slot simulation of the
//!   receiver with signal storage and interference cancellation.
//! - [`corrected_length`]: the early-stop recursion. Splitting stops as soon
//!   as a single user remains from the original collision, and when all `d`
//!   groups must be visited the last group's signal is derivable from the
//!   parent by cancellation, so its own slot is free:
//!   `l_n = 1 + sum_{j<=d_min} l_{I_j} - [d_min = d]` for `n >= 2`.
//! - [`yg_length`]: the Yu–Giannakis model, `l_n = sum_{j=1}^d l_{I_j}`,
//!   which visits every group and overcounts for d > 2.
//! - [`standard_ta_length`]: the classical tree algorithm without
//!   cancellation, `l'_n = 1 + sum_{j=1}^d l'_{I_j}`.
//!
//! All recursions share the base case `l = 1` for occupancy 0 or 1.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::policy::Occupancy;
use crate::tree::SplitTree;

/// Slot-level outcome of one collision resolution interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CriBreakdown {
    /// Slots actually transmitted — the CRI length.
    pub total_slots: u64,
    pub collision_slots: u64,
    pub singleton_slots: u64,
    pub idle_slots: u64,
    /// Signals obtained by cancelling known siblings from a stored parent
    /// signal; they cost no slot.
    pub derived_signals: u64,
    /// Users decoded from a stored signal's residual rather than from a
    /// clean singleton slot.
    pub sic_recoveries: u64,
}

/// Which evaluator to run on a sampled tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Evaluator {
    Corrected,
    Yg,
    Standard,
    SlotLevel,
}

impl Evaluator {
    /// Canonical report order.
    pub const ALL: [Evaluator; 4] = [
        Evaluator::Corrected,
        Evaluator::Yg,
        Evaluator::Standard,
        Evaluator::SlotLevel,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Evaluator::Corrected => "corrected",
            Evaluator::Yg => "yg",
            Evaluator::Standard => "standard",
            Evaluator::SlotLevel => "slot_level",
        }
    }

    /// CRI length of `tree` under this evaluator's semantics.
    pub fn evaluate(self, tree: &SplitTree) -> u64 {
        match self {
            Evaluator::Corrected => corrected_length(tree),
            Evaluator::Yg => yg_length(tree),
            Evaluator::Standard => standard_ta_length(tree),
            Evaluator::SlotLevel => slot_level_cri(tree).total_slots,
        }
    }
}

impl fmt::Display for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Evaluator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Evaluator::Corrected),
            "yg" => Ok(Evaluator::Yg),
            "standard" => Ok(Evaluator::Standard),
            "slot_level" | "slot-level" => Ok(Evaluator::SlotLevel),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?}; expected corrected|yg|standard|slot_level"
            ))),
        }
    }
}

/// Smallest number of leading groups whose cumulative occupancy reaches
/// `n - 1` (1-based). Past that point at most one user of the original
/// collision remains and is recoverable from the stored parent signal.
pub fn d_min(occ: &Occupancy, n: u32) -> Result<usize> {
    if n < 2 {
        return Err(Error::ContractViolation(format!(
            "d_min requires n >= 2, got n={n}"
        )));
    }
    if occ.total() != n {
        return Err(Error::ContractViolation(format!(
            "occupancy sums to {}, expected n={n}",
            occ.total()
        )));
    }
    Ok(d_min_counts(occ.counts(), n))
}

/// `d_min` over a raw slice; the caller guarantees `sum(counts) = n >= 2`.
pub(crate) fn d_min_counts(counts: &[u32], n: u32) -> usize {
    let mut cumulative = 0u32;
    for (j, &c) in counts.iter().enumerate() {
        cumulative += c;
        if cumulative >= n - 1 {
            return j + 1;
        }
    }
    unreachable!("cumulative occupancy reaches n-1 since the counts sum to n")
}

/// CRI length under SIC with early termination; equal to
/// `slot_level_cri(tree).total_slots` on every tree.
pub fn corrected_length(tree: &SplitTree) -> u64 {
    fold_lengths(tree, |i, values| {
        let children = tree.children(i).expect("collision node is expanded");
        let first = children.start;
        let mut cumulative = 0u32;
        let mut sum = 0u64;
        let mut dmin = tree.d();
        for (j, c) in children.enumerate() {
            cumulative += tree.nodes()[c].occupancy;
            sum += values[c];
            if cumulative >= tree.nodes()[i].occupancy - 1 {
                dmin = j + 1;
                break;
            }
        }
        debug_assert_eq!(dmin, {
            let counts: Vec<u32> = (first..first + tree.d())
                .map(|c| tree.nodes()[c].occupancy)
                .collect();
            d_min_counts(&counts, tree.nodes()[i].occupancy)
        });
        1 + sum - u64::from(dmin == tree.d())
    })
}

/// CRI length claimed by the Yu–Giannakis model: every group is visited and
/// the root slot is absorbed by cancellation.
pub fn yg_length(tree: &SplitTree) -> u64 {
    fold_lengths(tree, |i, values| {
        let children = tree.children(i).expect("collision node is expanded");
        children.map(|c| values[c]).sum()
    })
}

/// CRI length of the classical collision-resolution algorithm (no SIC):
/// every slot, including the root's, is transmitted.
pub fn standard_ta_length(tree: &SplitTree) -> u64 {
    fold_lengths(tree, |i, values| {
        let children = tree.children(i).expect("collision node is expanded");
        1 + children.map(|c| values[c]).sum::<u64>()
    })
}

/// Post-order fold: the arena is in breadth-first order, so children always
/// sit at higher indices and a reverse sweep visits them first.
fn fold_lengths(tree: &SplitTree, combine: impl Fn(usize, &[u64]) -> u64) -> u64 {
    let nodes = tree.nodes();
    let mut values = vec![0u64; nodes.len()];
    for i in (0..nodes.len()).rev() {
        values[i] = if nodes[i].occupancy <= 1 {
            1
        } else {
            combine(i, &values)
        };
    }
    values[0]
}

/// Simulate the receiver slot by slot in depth-first group order.
///
/// The receiver stores every signal it observes or derives and tracks the
/// set of decoded users. A scheduled node's slot is transmitted unless its
/// signal is already determined without it: either its parent's signal has
/// an empty undecoded residual (the whole subtree is resolved, nothing more
/// will be transmitted there), or it is the last of the `d` groups and all
/// sibling signals are known, so it equals the parent signal minus the
/// siblings. After every new signal or decode the cancellation cascade runs:
/// any stored signal whose undecoded residual is a single packet yields that
/// packet. The CRI ends the moment every user at the root is decoded;
/// anything still scheduled is discarded.
pub fn slot_level_cri(tree: &SplitTree) -> CriBreakdown {
    let nodes = tree.nodes();
    let d = tree.d();
    let total_users = nodes[0].occupancy;

    let mut b = CriBreakdown::default();
    // Decoded users within each node's subtree; the undecoded residual of a
    // stored signal at node v is occupancy(v) - decoded(v).
    let mut decoded = vec![0u32; nodes.len()];
    let mut available = vec![false; nodes.len()];
    let mut schedule: Vec<usize> = Vec::new();
    let mut cascade: VecDeque<usize> = VecDeque::new();

    let push_children = |schedule: &mut Vec<usize>, i: usize| {
        if let Some(range) = tree.children(i) {
            for c in range.rev() {
                schedule.push(c);
            }
        }
    };

    // Walk one decoded user from its leaf up to the root, updating residuals
    // and collecting stored signals that just became single-packet.
    let decode_leaf = |leaf: usize,
                       decoded: &mut [u32],
                       available: &[bool],
                       cascade: &mut VecDeque<usize>| {
        let mut x = leaf;
        loop {
            decoded[x] += 1;
            if available[x] && nodes[x].occupancy - decoded[x] == 1 {
                cascade.push_back(x);
            }
            let parent = nodes[x].parent;
            if parent == crate::tree::NO_NODE {
                break;
            }
            x = parent as usize;
        }
    };

    // Drain the cancellation cascade: each single-packet residual decodes
    // one user, which may expose further single-packet residuals upstream.
    macro_rules! drain_cascade {
        () => {
            while let Some(s) = cascade.pop_front() {
                if nodes[s].occupancy - decoded[s] != 1 {
                    continue; // stale: a later decode already cleared it
                }
                let mut x = s;
                while let Some(children) = tree.children(x) {
                    x = children
                        .clone()
                        .find(|&c| nodes[c].occupancy > decoded[c])
                        .expect("a child holds the residual user");
                }
                b.sic_recoveries += 1;
                decode_leaf(x, &mut decoded, &available, &mut cascade);
            }
        };
    }

    macro_rules! transmit {
        ($v:expr) => {{
            let v = $v;
            b.total_slots += 1;
            available[v] = true;
            match nodes[v].occupancy {
                0 => b.idle_slots += 1,
                1 => {
                    b.singleton_slots += 1;
                    decode_leaf(v, &mut decoded, &available, &mut cascade);
                    drain_cascade!();
                }
                _ => {
                    b.collision_slots += 1;
                    push_children(&mut schedule, v);
                }
            }
        }};
    }

    // The gated CRI always spends the root slot, even on an empty root.
    transmit!(0);

    while let Some(v) = schedule.pop() {
        if decoded[0] == total_users {
            break; // all users recovered: discard the remaining schedule
        }
        let p = nodes[v].parent as usize;
        let group = v - tree.children(p).expect("scheduled node has children range").start;
        if decoded[p] == nodes[p].occupancy || group == d - 1 {
            // Derivable without a transmission: the parent's residual is
            // empty, or every sibling signal is already known and can be
            // cancelled from the parent signal.
            b.derived_signals += 1;
            available[v] = true;
            push_children(&mut schedule, v);
            if nodes[v].occupancy - decoded[v] == 1 {
                cascade.push_back(v);
                drain_cascade!();
            }
            continue;
        }
        transmit!(v);
    }

    debug_assert_eq!(
        b.total_slots,
        b.collision_slots + b.singleton_slots + b.idle_slots
    );
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::SplitPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree(text: &str) -> SplitTree {
        SplitTree::parse(text).unwrap()
    }

    #[test]
    fn d_min_examples() {
        let occ = |c: &[u32]| Occupancy::new(c.to_vec());
        assert_eq!(d_min(&occ(&[1, 1, 0]), 2).unwrap(), 1);
        assert_eq!(d_min(&occ(&[0, 1, 1]), 2).unwrap(), 2);
        assert_eq!(d_min(&occ(&[0, 0, 2]), 2).unwrap(), 3);
        assert!(matches!(
            d_min(&occ(&[1, 1, 0]), 3),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            d_min(&occ(&[1, 0]), 1),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn counterexample_pair() {
        // A single user in the first group resolves in 2 slots no matter
        // what the model claims; with an idle first group it takes 3.
        let a = tree("2(1,1,0)");
        assert_eq!(corrected_length(&a), 2);
        assert_eq!(yg_length(&a), 3);
        let breakdown = slot_level_cri(&a);
        assert_eq!(breakdown.total_slots, 2);
        assert_eq!(breakdown.sic_recoveries, 1);
        assert_eq!(breakdown.idle_slots, 0);

        let b = tree("2(0,1,1)");
        assert_eq!(corrected_length(&b), 3);
        assert_eq!(yg_length(&b), 3);
        let breakdown = slot_level_cri(&b);
        assert_eq!(breakdown.total_slots, 3);
        assert_eq!(breakdown.idle_slots, 1);
        assert_eq!(breakdown.sic_recoveries, 1);
    }

    #[test]
    fn derived_collision_signal() {
        // Root collision, two idle slots, the third group's signal is
        // derived for free, then one singleton and a cancellation recovery.
        let t = tree("2(0,0,2(1,1,0))");
        assert_eq!(corrected_length(&t), 4);
        let breakdown = slot_level_cri(&t);
        assert_eq!(breakdown.total_slots, 4);
        assert_eq!(breakdown.idle_slots, 2);
        assert_eq!(breakdown.derived_signals, 1);
        assert_eq!(breakdown.sic_recoveries, 1);
    }

    #[test]
    fn trivial_roots() {
        let empty = tree("0");
        for eval in [corrected_length, yg_length, standard_ta_length] {
            assert_eq!(eval(&empty), 1);
        }
        let breakdown = slot_level_cri(&empty);
        assert_eq!(breakdown.total_slots, 1);
        assert_eq!(breakdown.idle_slots, 1);

        let single = tree("1");
        assert_eq!(corrected_length(&single), 1);
        assert_eq!(yg_length(&single), 1);
        let breakdown = slot_level_cri(&single);
        assert_eq!(breakdown.total_slots, 1);
        assert_eq!(breakdown.singleton_slots, 1);
        assert_eq!(breakdown.sic_recoveries, 0);
    }

    #[test]
    fn standard_ta_examples() {
        assert_eq!(standard_ta_length(&tree("2(1,1,0)")), 4);
        assert_eq!(standard_ta_length(&tree("0")), 1);
        // standard = yg + number of internal nodes
        for text in ["2(1,1,0)", "2(0,0,2(1,1,0))", "4(2(1,1,0),2(1,1,0),0)"] {
            let t = tree(text);
            assert_eq!(
                standard_ta_length(&t),
                yg_length(&t) + t.internal_node_count() as u64
            );
        }
    }

    #[test]
    fn resolved_subtree_skips_pending_slots() {
        // After the first subtree's users are both decoded, its remaining
        // scheduled groups cost nothing; the second subtree still pays.
        let t = tree("4(2(1,1,0),2(1,1,0),0)");
        assert_eq!(corrected_length(&t), 5);
        let breakdown = slot_level_cri(&t);
        assert_eq!(breakdown.total_slots, 5);
        assert_eq!(breakdown.collision_slots, 3);
        assert_eq!(breakdown.singleton_slots, 2);
        assert_eq!(breakdown.idle_slots, 0);
        assert_eq!(breakdown.derived_signals, 2);
        assert_eq!(breakdown.sic_recoveries, 2);
    }

    #[test]
    fn unobserved_empty_sibling_blocks_derivation() {
        // With occupancies (0,2,0) the receiver cannot anticipate that the
        // third group is empty, so the middle collision must be transmitted.
        let t = tree("2(0,2(1,1,0),0)");
        assert_eq!(corrected_length(&t), 4);
        let breakdown = slot_level_cri(&t);
        assert_eq!(breakdown.total_slots, 4);
        assert_eq!(breakdown.idle_slots, 1);
        assert_eq!(breakdown.collision_slots, 2);
        assert_eq!(breakdown.derived_signals, 0);
    }

    #[test]
    fn evaluators_are_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = SplitPolicy::fair(3).unwrap();
        let t = SplitTree::generate(12, &policy, &mut rng, 10_000).unwrap();
        for eval in Evaluator::ALL {
            assert_eq!(eval.evaluate(&t), eval.evaluate(&t));
        }
        assert_eq!(slot_level_cri(&t), slot_level_cri(&t));
    }

    #[test]
    fn equivalence_and_dominance_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for d in 2..=5usize {
            let policy = SplitPolicy::fair(d).unwrap();
            for n in 2..=30u32 {
                let t = SplitTree::generate(n, &policy, &mut rng, 10_000).unwrap();
                let corrected = corrected_length(&t);
                let yg = yg_length(&t);
                let standard = standard_ta_length(&t);
                let slots = slot_level_cri(&t);
                assert_eq!(corrected, slots.total_slots, "tree {}", t.dump());
                assert!(corrected >= 2, "root collision costs at least 2 slots");
                assert!(corrected <= yg);
                assert!(yg <= standard);
                if d == 2 {
                    assert_eq!(corrected, yg);
                }
                assert_eq!(
                    slots.total_slots,
                    slots.collision_slots + slots.singleton_slots + slots.idle_slots
                );
            }
        }
    }
}
