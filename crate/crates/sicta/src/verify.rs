//! Invariant suites behind the `verify` subcommand.
//!
//! Each suite checks one contract between the evaluators or between the
//! exact tables and the simulation, over a seeded, reproducible sample of
//! random trees. A failing check names the tree by (seed, index, d, n,
//! policy) so it can be regenerated exactly.

use rayon::prelude::*;

use crate::analytic::{
    self, check_yg_relation, expected_cri_table, expected_cri_table_exact, rational_to_f64,
    throughput_estimate, yg_closed_form_mst, Variant,
};
use crate::error::Result;
use crate::evaluators::{
    corrected_length, slot_level_cri, standard_ta_length, yg_length, CriBreakdown, Evaluator,
};
use crate::montecarlo::{run_experiment, run_seed, ExperimentConfig};
use crate::policy::SplitPolicy;
use crate::tree::{SplitTree, DEFAULT_MAX_DEPTH};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sample sizes and seed for one verification pass.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    /// Number of random trees for the per-tree suites.
    pub trees: u64,
    pub seed: u64,
    pub max_depth: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trees: 100_000,
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Outcome of one invariant suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    /// Description of the first few failures, if any.
    pub detail: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Full verification report.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }
}

/// The evaluator functions under test; swappable so the suites themselves
/// can be shown to catch a broken evaluator.
#[derive(Clone, Copy)]
pub(crate) struct TreeEvaluators {
    pub corrected: fn(&SplitTree) -> u64,
    pub yg: fn(&SplitTree) -> u64,
    pub standard: fn(&SplitTree) -> u64,
    pub slot_level: fn(&SplitTree) -> CriBreakdown,
}

impl Default for TreeEvaluators {
    fn default() -> Self {
        Self {
            corrected: corrected_length,
            yg: yg_length,
            standard: standard_ta_length,
            slot_level: slot_level_cri,
        }
    }
}

/// Run every suite. Failures do not abort the pass; they are reported.
pub fn run_all(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut suites = tree_invariant_suites(config);
    suites.push(strict_dominance(config));
    suites.push(dp_hand_values_suite()?);
    suites.push(d2_table_equivalence_suite()?);
    suites.push(table_ordering_suite()?);
    suites.push(yg_relation_suite()?);
    suites.push(corrected_relation_breaks_suite()?);
    suites.push(dp_vs_montecarlo(config)?);
    suites.push(yg_asymptote()?);
    Ok(VerifyReport {
        config: *config,
        suites,
    })
}

/// The per-tree invariant suites over `config.trees` random trees.
pub fn tree_invariant_suites(config: &VerifyConfig) -> Vec<SuiteResult> {
    tree_suites(config, &TreeEvaluators::default())
}

/// Strict-dominance occurrence check at (n=10, d=3).
pub fn strict_dominance(config: &VerifyConfig) -> SuiteResult {
    strict_dominance_suite(config, &TreeEvaluators::default())
}

/// Monte Carlo vs. exact tables at n=12, d in {2,3}, all variants.
pub fn dp_vs_montecarlo(config: &VerifyConfig) -> Result<SuiteResult> {
    dp_vs_montecarlo_suite(config)
}

/// Throughput proxy of the yg tables vs. ln(d)/(d-1).
pub fn yg_asymptote() -> Result<SuiteResult> {
    yg_asymptote_suite()
}

// ─── Per-tree suites ────────────────────────────────────────────────────────

struct TreeFailures {
    structure: Vec<String>,
    equivalence: Vec<String>,
    binary: Vec<String>,
    dominance: Vec<String>,
    accounting: Vec<String>,
    bounds: Vec<String>,
}

/// One pass over `config.trees` random trees covering d in 2..=5,
/// n in 2..=50, fair and biased policies, checking all per-tree contracts.
pub(crate) fn tree_suites(config: &VerifyConfig, evals: &TreeEvaluators) -> Vec<SuiteResult> {
    let failures: Vec<TreeFailures> = (0..config.trees)
        .into_par_iter()
        .map(|i| check_one_tree(config, i, evals))
        .collect();

    let collect = |pick: fn(&TreeFailures) -> &Vec<String>| -> (u64, String) {
        let mut count = 0u64;
        let mut detail = String::new();
        for f in failures.iter().flat_map(pick) {
            count += 1;
            if count <= 3 {
                if !detail.is_empty() {
                    detail.push_str("; ");
                }
                detail.push_str(f);
            }
        }
        (count, detail)
    };

    let mut suites = Vec::new();
    for (name, pick) in [
        (
            "tree_structure",
            (|f| &f.structure) as fn(&TreeFailures) -> &Vec<String>,
        ),
        ("ground_truth_equivalence", |f| &f.equivalence),
        ("binary_equivalence", |f| &f.binary),
        ("dominance", |f| &f.dominance),
        ("no_sic_accounting", |f| &f.accounting),
        ("bounds_and_breakdown", |f| &f.bounds),
    ] {
        let (fail_count, detail) = collect(pick);
        suites.push(SuiteResult {
            name,
            checks: config.trees,
            failures: fail_count,
            detail,
        });
    }
    suites
}

fn check_one_tree(config: &VerifyConfig, index: u64, evals: &TreeEvaluators) -> TreeFailures {
    let seed = run_seed(config.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=5usize);
    let n = rng.random_range(2..=50u32);
    let biased = rng.random::<bool>();
    let policy = if biased {
        SplitPolicy::biased(d).unwrap()
    } else {
        SplitPolicy::fair(d).unwrap()
    };
    let mut failures = TreeFailures {
        structure: Vec::new(),
        equivalence: Vec::new(),
        binary: Vec::new(),
        dominance: Vec::new(),
        accounting: Vec::new(),
        bounds: Vec::new(),
    };
    let who = || {
        format!(
            "tree #{index} (seed={seed}, d={d}, n={n}, policy={})",
            policy.label()
        )
    };
    let tree = match SplitTree::generate(n, &policy, &mut rng, config.max_depth) {
        Ok(tree) => tree,
        Err(e) => {
            // Not asserted: a depth excursion is logged, never a failure.
            failures.structure.push(format!("{}: generate: {e}", who()));
            return failures;
        }
    };

    if let Err(e) = tree.validate() {
        failures.structure.push(format!("{}: {e}", who()));
    }
    let corrected = (evals.corrected)(&tree);
    let yg = (evals.yg)(&tree);
    let standard = (evals.standard)(&tree);
    let breakdown = (evals.slot_level)(&tree);

    if corrected != breakdown.total_slots {
        failures.equivalence.push(format!(
            "{}: corrected={corrected} != slot_level={}",
            who(),
            breakdown.total_slots
        ));
    }
    if d == 2 && corrected != yg {
        failures
            .binary
            .push(format!("{}: corrected={corrected} != yg={yg}", who()));
    }
    if corrected > yg || yg > standard {
        failures.dominance.push(format!(
            "{}: corrected={corrected}, yg={yg}, standard={standard}",
            who()
        ));
    }
    let internal = tree.internal_node_count() as u64;
    if standard - yg != internal {
        failures.accounting.push(format!(
            "{}: standard-yg={} != internal nodes={internal}",
            who(),
            standard - yg
        ));
    }
    let sum = breakdown.collision_slots + breakdown.singleton_slots + breakdown.idle_slots;
    if corrected < 2 || breakdown.total_slots != sum {
        failures.bounds.push(format!(
            "{}: total={}, breakdown sum={sum}, corrected={corrected}",
            who(),
            breakdown.total_slots
        ));
    }
    failures
}

/// Strict dominance must actually occur for d >= 3: at (n=10, d=3, fair)
/// at least one of 10^4 trees has corrected < yg.
pub(crate) fn strict_dominance_suite(
    config: &VerifyConfig,
    evals: &TreeEvaluators,
) -> SuiteResult {
    let trees = 10_000u64;
    let policy = SplitPolicy::fair(3).unwrap();
    let strict: u64 = (0..trees)
        .into_par_iter()
        .map(|i| {
            let seed = run_seed(config.seed ^ 0x5D1C_E377, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = SplitTree::generate(10, &policy, &mut rng, config.max_depth)
                .expect("depth bound unreachable at n=10");
            u64::from((evals.corrected)(&tree) < (evals.yg)(&tree))
        })
        .sum();
    SuiteResult {
        name: "strict_dominance_cases",
        checks: trees,
        failures: u64::from(strict == 0),
        detail: if strict == 0 {
            "no strictly shorter corrected CRI in 10^4 trees at n=10, d=3".into()
        } else {
            format!("{strict} strict cases observed")
        },
    }
}

// ─── Exact-table suites ─────────────────────────────────────────────────────

fn dp_hand_values_suite() -> Result<SuiteResult> {
    let rat = |n: i64, d: i64| {
        num::BigRational::new(num::BigInt::from(n), num::BigInt::from(d))
    };
    let fair2 = SplitPolicy::fair(2)?;
    let fair3 = SplitPolicy::fair(3)?;
    let cases = [
        ("d=2 fair corrected L_2", Variant::Corrected, &fair2, rat(3, 1)),
        ("d=3 fair corrected L_2", Variant::Corrected, &fair3, rat(19, 6)),
        ("d=3 fair yg L_2", Variant::Yg, &fair3, rat(4, 1)),
        ("d=3 fair standard L_2", Variant::Standard, &fair3, rat(11, 2)),
    ];
    let mut failures = 0;
    let mut detail = String::new();
    for (name, variant, policy, expected) in cases {
        let table = expected_cri_table_exact(2, policy, variant)?;
        if table.values[2] != expected {
            failures += 1;
            detail.push_str(&format!("{name}: got {}; ", table.values[2]));
        }
    }
    Ok(SuiteResult {
        name: "dp_hand_values",
        checks: 4,
        failures,
        detail,
    })
}

fn d2_table_equivalence_suite() -> Result<SuiteResult> {
    let mut failures = 0;
    let mut detail = String::new();
    for policy in [SplitPolicy::fair(2)?, SplitPolicy::custom(&[0.3, 0.7])?] {
        let corrected = expected_cri_table_exact(30, &policy, Variant::Corrected)?;
        let yg = expected_cri_table_exact(30, &policy, Variant::Yg)?;
        for n in 0..=30 {
            if corrected.values[n] != yg.values[n] {
                failures += 1;
                detail.push_str(&format!("{} n={n}; ", policy.label()));
            }
        }
    }
    Ok(SuiteResult {
        name: "d2_table_equivalence",
        checks: 62,
        failures,
        detail,
    })
}

fn table_ordering_suite() -> Result<SuiteResult> {
    let mut checks = 0;
    let mut failures = 0;
    let mut detail = String::new();
    for d in [2usize, 3, 4] {
        let policy = SplitPolicy::fair(d)?;
        let corrected = expected_cri_table_exact(30, &policy, Variant::Corrected)?;
        let yg = expected_cri_table_exact(30, &policy, Variant::Yg)?;
        let standard = expected_cri_table_exact(30, &policy, Variant::Standard)?;
        for n in 0..=30 {
            checks += 1;
            if corrected.values[n] > yg.values[n] || yg.values[n] > standard.values[n] {
                failures += 1;
                detail.push_str(&format!("d={d} n={n}; "));
            }
        }
    }
    Ok(SuiteResult {
        name: "table_ordering",
        checks,
        failures,
        detail,
    })
}

/// The relation `(d-1)(L'_n-1) = d(L_n-1)` is the fixed point of the
/// Yu–Giannakis algebra: it must hold exactly for the yg tables at every d
/// and policy.
fn yg_relation_suite() -> Result<SuiteResult> {
    let mut checks = 0;
    let mut failures = 0;
    let mut detail = String::new();
    for d in [2usize, 3, 4] {
        for policy in [SplitPolicy::fair(d)?, SplitPolicy::biased(d)?] {
            let report = check_yg_relation(30, &policy, Variant::Yg)?;
            debug_assert!(report.exact);
            for row in &report.rows {
                checks += 1;
                if !row.holds {
                    failures += 1;
                    detail.push_str(&format!(
                        "d={d} {} n={}: {} != {}; ",
                        policy.label(),
                        row.n,
                        row.lhs,
                        row.rhs
                    ));
                }
            }
        }
    }
    Ok(SuiteResult {
        name: "yg_relation_fixed_point",
        checks,
        failures,
        detail,
    })
}

/// The corrected tables must break the relation for d >= 3 — at n=2, d=3
/// the sides are exactly 9 and 13/2.
fn corrected_relation_breaks_suite() -> Result<SuiteResult> {
    let report = check_yg_relation(2, &SplitPolicy::fair(3)?, Variant::Corrected)?;
    let row = report.rows[2];
    let as_expected = !row.holds && row.lhs == 9.0 && row.rhs == 6.5;
    Ok(SuiteResult {
        name: "corrected_relation_breaks",
        checks: 1,
        failures: u64::from(!as_expected),
        detail: format!("n=2, d=3: lhs={}, rhs={}, holds={}", row.lhs, row.rhs, row.holds),
    })
}

/// Monte Carlo means agree with the exact tables within 3 standard errors
/// at n = 12, d in {2, 3}, fair splitting, 10^5 runs, every variant.
fn dp_vs_montecarlo_suite(config: &VerifyConfig) -> Result<SuiteResult> {
    let runs = 100_000u64;
    let mut checks = 0;
    let mut failures = 0;
    let mut detail = String::new();
    for d in [2usize, 3] {
        let policy = SplitPolicy::fair(d)?;
        let summary = run_experiment(&ExperimentConfig {
            n: 12,
            policy: policy.clone(),
            runs,
            master_seed: run_seed(config.seed ^ 0xD12A_57A7, d as u64),
            variants: Evaluator::ALL.to_vec(),
            max_depth: config.max_depth,
        })?;
        for stats in &summary.stats {
            let variant = match stats.evaluator {
                Evaluator::Corrected | Evaluator::SlotLevel => Variant::Corrected,
                Evaluator::Yg => Variant::Yg,
                Evaluator::Standard => Variant::Standard,
            };
            let exact = expected_cri_table_exact(12, &policy, variant)?;
            let target = rational_to_f64(&exact.values[12]);
            let standard_error = stats.std_dev / (runs as f64).sqrt();
            checks += 1;
            if (stats.mean_cri - target).abs() > 3.0 * standard_error {
                failures += 1;
                detail.push_str(&format!(
                    "d={d} {}: mean={} vs exact={target} (se={standard_error}); ",
                    stats.evaluator, stats.mean_cri
                ));
            }
        }
    }
    Ok(SuiteResult {
        name: "dp_vs_montecarlo",
        checks,
        failures,
        detail,
    })
}

/// The yg tables' throughput proxy approaches ln(d)/(d-1).
fn yg_asymptote_suite() -> Result<SuiteResult> {
    let mut failures = 0;
    let mut detail = String::new();
    for (d, n_max) in [(2usize, 512usize), (3, 200)] {
        let table = expected_cri_table(n_max, &SplitPolicy::fair(d)?, Variant::Yg)?;
        let proxy = throughput_estimate(&table).mst_proxy;
        let target = yg_closed_form_mst(d);
        let relative = (proxy - target).abs() / target;
        if relative > 0.02 {
            failures += 1;
        }
        detail.push_str(&format!(
            "d={d}: T_{n_max}={proxy:.5} vs ln({d})/{}={target:.5} ({:.2}%); ",
            d - 1,
            relative * 100.0
        ));
    }
    Ok(SuiteResult {
        name: "yg_asymptote",
        checks: 2,
        failures,
        detail,
    })
}

/// Internal consistency of the analytic module used by the report: the
/// multinomial pmf sums to one over all compositions.
pub fn pmf_normalization_check(d: usize, n: u32) -> Result<bool> {
    let policy = SplitPolicy::fair(d)?;
    let total: num::BigRational = analytic::compositions(n, d)
        .map(|c| {
            analytic::multinomial_pmf_exact(&crate::policy::Occupancy::new(c), n, &policy)
                .expect("composition sums to n")
        })
        .sum();
    Ok(num::One::is_one(&total))
}
