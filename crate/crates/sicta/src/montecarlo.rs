//! Seeded, reproducible Monte Carlo experiments over the evaluators.
//!
//! Runs are embarrassingly parallel. The determinism contract — identical
//! config gives bit-identical output at any thread count — rests on two
//! decisions: every run derives its own generator from a fixed 64-bit mix of
//! (master seed, run index), and aggregation folds the per-run results in
//! run-index order regardless of which worker produced them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluators::{
    corrected_length, slot_level_cri, standard_ta_length, yg_length, CriBreakdown, Evaluator,
};
use crate::policy::{PolicyForm, SplitPolicy};
use crate::tree::SplitTree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in output metadata so results name their randomness source.
pub const GENERATOR: &str = "chacha8 (rand_chacha 0.9), run seed = splitmix64(master_seed, run_index)";

/// splitmix64 finalizer over the sequence `master_seed + (i+1)*golden`.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(run_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One Monte Carlo experiment: n contenders, one policy, `runs` trees.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: u32,
    pub policy: SplitPolicy,
    pub runs: u64,
    pub master_seed: u64,
    /// Evaluators to run on every sampled tree (paired design: all of them
    /// see the identical realization).
    pub variants: Vec<Evaluator>,
    pub max_depth: usize,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::InvalidArgument("runs must be >= 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one variant must be requested".into(),
            ));
        }
        Ok(())
    }
}

/// Aggregate statistics for one evaluator across all runs.
#[derive(Debug, Clone, Copy)]
pub struct VariantStats {
    pub evaluator: Evaluator,
    pub runs: u64,
    pub mean_cri: f64,
    /// Sample standard deviation of the CRI length.
    pub std_dev: f64,
    /// 95% confidence half-width under the normal approximation.
    pub ci95_half_width: f64,
    /// `n / mean(l)` — matches the structure of the throughput proxy.
    pub throughput_ratio_of_means: f64,
    /// `mean(n / l)` — the other reading of "averaging n/L_n".
    pub throughput_mean_of_ratios: f64,
}

/// Monte Carlo aggregate with full provenance.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub stats: Vec<VariantStats>,
    pub generator: &'static str,
}

impl RunSummary {
    pub fn stats_for(&self, evaluator: Evaluator) -> Option<&VariantStats> {
        self.stats.iter().find(|s| s.evaluator == evaluator)
    }
}

/// Everything measured on one sampled tree; one CSV row in per-tree exports.
#[derive(Debug, Clone, Copy)]
pub struct TreeRecord {
    pub run_index: u64,
    pub seed: u64,
    pub corrected: u64,
    pub yg: u64,
    pub standard: u64,
    pub breakdown: CriBreakdown,
}

struct RunOutcome {
    lengths: [u64; 4],
    record: Option<TreeRecord>,
}

/// Run the experiment; aggregation order is fixed by run index, so the
/// summary is identical at any parallelism degree.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    run_impl(config, false).map(|(summary, _)| summary)
}

/// As [`run_experiment`], additionally returning one [`TreeRecord`] per run
/// (all evaluators are computed regardless of the requested variants).
pub fn run_experiment_detailed(config: &ExperimentConfig) -> Result<(RunSummary, Vec<TreeRecord>)> {
    run_impl(config, true).map(|(summary, records)| (summary, records.expect("detailed run")))
}

fn run_impl(
    config: &ExperimentConfig,
    detailed: bool,
) -> Result<(RunSummary, Option<Vec<TreeRecord>>)> {
    config.validate()?;
    let outcomes: Vec<Result<RunOutcome>> = (0..config.runs)
        .into_par_iter()
        .map(|i| one_run(config, i, detailed))
        .collect();

    let failed = outcomes.iter().filter(|o| o.is_err()).count() as u64;
    if failed > 0 {
        return Err(Error::RunsFailed {
            failed,
            runs: config.runs,
            max_depth: config.max_depth,
        });
    }

    let mut stats = Vec::with_capacity(config.variants.len());
    for &evaluator in &config.variants {
        let idx = evaluator_slot(evaluator);
        let mut sum: u64 = 0;
        let mut sum_sq: u128 = 0;
        let mut ratio_sum: f64 = 0.0;
        for outcome in &outcomes {
            let l = outcome.as_ref().expect("no failed runs").lengths[idx];
            sum += l;
            sum_sq += (l as u128) * (l as u128);
            ratio_sum += config.n as f64 / l as f64;
        }
        let runs = config.runs as f64;
        let mean = sum as f64 / runs;
        let variance = if config.runs > 1 {
            ((sum_sq as f64) - (sum as f64) * (sum as f64) / runs) / (runs - 1.0)
        } else {
            0.0
        };
        let std_dev = variance.max(0.0).sqrt();
        stats.push(VariantStats {
            evaluator,
            runs: config.runs,
            mean_cri: mean,
            std_dev,
            ci95_half_width: 1.96 * std_dev / runs.sqrt(),
            throughput_ratio_of_means: config.n as f64 / mean,
            throughput_mean_of_ratios: ratio_sum / runs,
        });
    }

    let records = detailed.then(|| {
        outcomes
            .into_iter()
            .map(|o| o.expect("no failed runs").record.expect("detailed run"))
            .collect()
    });
    Ok((
        RunSummary {
            config: config.clone(),
            stats,
            generator: GENERATOR,
        },
        records,
    ))
}

fn evaluator_slot(evaluator: Evaluator) -> usize {
    Evaluator::ALL
        .iter()
        .position(|&e| e == evaluator)
        .expect("evaluator in canonical list")
}

fn one_run(config: &ExperimentConfig, run_index: u64, detailed: bool) -> Result<RunOutcome> {
    let seed = run_seed(config.master_seed, run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = SplitTree::generate(config.n, &config.policy, &mut rng, config.max_depth)?;

    let mut lengths = [0u64; 4];
    let mut record = None;
    if detailed {
        let breakdown = slot_level_cri(&tree);
        let corrected = corrected_length(&tree);
        let yg = yg_length(&tree);
        let standard = standard_ta_length(&tree);
        lengths = [corrected, yg, standard, breakdown.total_slots];
        record = Some(TreeRecord {
            run_index,
            seed,
            corrected,
            yg,
            standard,
            breakdown,
        });
    } else {
        for &evaluator in &config.variants {
            lengths[evaluator_slot(evaluator)] = evaluator.evaluate(&tree);
        }
    }
    Ok(RunOutcome { lengths, record })
}

// ─── Sweep over (d, policy) cells ───────────────────────────────────────────

/// Base parameters shared by every cell of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub n: u32,
    pub runs: u64,
    pub master_seed: u64,
    pub max_depth: usize,
}

/// One (d, policy) cell: simulated throughput of the actual CRI plus the
/// closed-form curve the original analysis claimed.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub d: usize,
    pub policy_form: PolicyForm,
    pub n: u32,
    pub runs: u64,
    /// Per-cell seed, derived from the master seed and the cell coordinates.
    pub seed: u64,
    pub stats: VariantStats,
    pub yg_closed_form: f64,
}

/// Simulate every (d, policy) combination. Each cell gets an independent
/// seed derived from the master seed, so adding cells never perturbs others.
pub fn sweep(
    d_values: &[usize],
    policies: &[PolicyForm],
    base: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(d_values.len() * policies.len());
    for &d in d_values {
        for &form in policies {
            let policy = match form {
                PolicyForm::Fair => SplitPolicy::fair(d)?,
                PolicyForm::Biased => SplitPolicy::biased(d)?,
                PolicyForm::Custom => {
                    return Err(Error::InvalidArgument(
                        "sweep supports fair and biased policies".into(),
                    ))
                }
            };
            let seed = run_seed(run_seed(base.master_seed, d as u64), form as u64);
            let config = ExperimentConfig {
                n: base.n,
                policy,
                runs: base.runs,
                master_seed: seed,
                variants: vec![Evaluator::Corrected],
                max_depth: base.max_depth,
            };
            let summary = run_experiment(&config)?;
            rows.push(SweepRow {
                d,
                policy_form: form,
                n: base.n,
                runs: base.runs,
                seed,
                stats: summary.stats[0],
                yg_closed_form: crate::analytic::yg_closed_form_mst(d),
            });
        }
    }
    Ok(rows)
}
