//! Command-line front end.
//!
//! Four subcommands bind the library into reproducible experiments:
//! `simulate` (Monte Carlo at one configuration), `exact` (expected-CRI
//! tables), `sweep` (throughput vs. splitting factor) and `verify` (the
//! invariant suites). CSV is the primary output; `--json` mirrors it with
//! metadata. Every output embeds a replay command line that reproduces it.
//!
//! Exit codes: 0 success, 1 usage/validation error, 2 runtime failure or
//! invariant violation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytic::{
    expected_cri_table_exact_with_budget, expected_cri_table_with_budget, yg_closed_form_mst,
    Variant, DEFAULT_COMPOSITION_BUDGET,
};
use crate::error::{Error, Result};
use crate::evaluators::Evaluator;
use crate::montecarlo::{
    run_experiment, run_experiment_detailed, run_seed, ExperimentConfig, RunSummary, SweepConfig,
    TreeRecord, GENERATOR,
};
use crate::policy::{PolicyForm, SplitPolicy};
use crate::tree::{SplitTree, DEFAULT_MAX_DEPTH};
use crate::verify::{VerifyConfig, VerifyReport};

/// Largest n_max served in exact rational mode; the identity checks need
/// exactness only in this range, and doubles are accurate far beyond it.
pub const RATIONAL_N_MAX: usize = 64;

/// Parse `std::env::args`, execute, and return the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors by default; this tool reserves 2
            // for runtime failures, so print and map to 1 ourselves.
            if e.use_stderr() {
                eprint!("{e}");
                return 1;
            }
            print!("{e}"); // --help / --version
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        // One command per process; ignore the error if a pool already exists
        // (only possible in-process, e.g. under tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config = cli
        .config
        .as_deref()
        .map(load_config_file)
        .transpose()?
        .unwrap_or_default();
    match cli.command {
        Command::Simulate(args) => exec_simulate(resolve_simulate(args, &config)?),
        Command::Exact(args) => exec_exact(resolve_exact(args, &config)?),
        Command::Sweep(args) => exec_sweep(resolve_sweep(args, &config)?),
        Command::Verify(args) => exec_verify(resolve_verify(args, &config)?),
    }
}

#[derive(Parser)]
#[command(
    name = "sicta",
    version,
    about = "Simulate and analyze d-ary tree random access with successive interference cancellation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap worker threads (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Flat key=value file supplying defaults for the subcommand's flags;
    /// explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo experiment at one (n, d, policy)
    Simulate(SimulateArgs),
    /// Exact expected CRI lengths L_0..L_nmax via the composition DP
    Exact(ExactArgs),
    /// Simulated throughput over splitting factors and policies
    Sweep(SweepArgs),
    /// Run the invariant verification suites
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Initial contenders
    #[arg(long)]
    n: Option<u32>,
    /// Splitting factor
    #[arg(long)]
    d: Option<usize>,
    /// fair | biased | custom
    #[arg(long)]
    policy: Option<String>,
    /// Comma-separated group probabilities (with --policy custom)
    #[arg(long)]
    probs: Option<String>,
    /// Simulation runs [default: 10000]
    #[arg(long)]
    runs: Option<u64>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of corrected,yg,standard,slot_level
    #[arg(long)]
    variants: Option<String>,
    /// Splitting depth bound [default: 10000]
    #[arg(long)]
    max_depth: Option<usize>,
    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary path
    #[arg(long)]
    json: Option<PathBuf>,
    /// Per-tree breakdown CSV path
    #[arg(long)]
    per_tree: Option<PathBuf>,
    /// Emit every generated tree to stderr as nested occupancies
    #[arg(long)]
    dump_tree: bool,
}

#[derive(Args)]
struct ExactArgs {
    /// Largest n in the table
    #[arg(long)]
    nmax: Option<usize>,
    /// Splitting factor
    #[arg(long)]
    d: Option<usize>,
    /// fair | biased | custom
    #[arg(long)]
    policy: Option<String>,
    /// Comma-separated group probabilities (with --policy custom)
    #[arg(long)]
    probs: Option<String>,
    /// Restrict output to one of standard|yg|corrected (default: all three)
    #[arg(long)]
    variant: Option<String>,
    /// Exact rational arithmetic; prints fractions like 19/6
    #[arg(long)]
    rational: bool,
    /// Composition enumeration budget [default: 10000000]
    #[arg(long)]
    budget: Option<u64>,
    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary path
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated splitting factors [default: 2,3,4,5,6,7,8,9,10]
    #[arg(long)]
    d_values: Option<String>,
    /// Comma-separated subset of fair,biased [default: fair,biased]
    #[arg(long)]
    policies: Option<String>,
    /// Initial contenders [default: 1000]
    #[arg(long)]
    n: Option<u32>,
    /// Simulation runs per cell [default: 10000]
    #[arg(long)]
    runs: Option<u64>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Splitting depth bound [default: 10000]
    #[arg(long)]
    max_depth: Option<usize>,
    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary path
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random trees for the per-tree suites [default: 100000]
    #[arg(long)]
    trees: Option<u64>,
    /// Seed for the verification sample [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Splitting depth bound [default: 10000]
    #[arg(long)]
    max_depth: Option<usize>,
    /// JSON report path
    #[arg(long)]
    json: Option<PathBuf>,
}

// ─── Config file merging ────────────────────────────────────────────────────

type ConfigMap = HashMap<String, String>;

fn load_config_file(path: &Path) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!(
                "config line {} is not key=value: {raw:?}",
                lineno + 1
            ))
        })?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

/// Flag value if given, else the config-file value parsed as T.
fn merged<T: std::str::FromStr>(
    flag: Option<T>,
    config: &ConfigMap,
    key: &str,
) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match config.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            Error::InvalidArgument(format!("config key {key}: cannot parse {raw:?}"))
        }),
    }
}

fn merged_flag(flag: bool, config: &ConfigMap, key: &str) -> Result<bool> {
    if flag {
        return Ok(true);
    }
    match config.get(key).map(String::as_str) {
        None => Ok(false),
        Some("true" | "1") => Ok(true),
        Some("false" | "0") => Ok(false),
        Some(other) => Err(Error::InvalidArgument(format!(
            "config key {key}: expected true/false, got {other:?}"
        ))),
    }
}

fn check_config_keys(config: &ConfigMap, allowed: &[&str]) -> Result<()> {
    for key in config.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown config key {key:?}; allowed: {}",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("missing required flag --{flag}")))
}

// ─── Shared flag parsing ────────────────────────────────────────────────────

fn parse_policy(
    name: Option<&str>,
    d: Option<usize>,
    probs: Option<&str>,
) -> Result<(SplitPolicy, Option<Vec<f64>>)> {
    let name = name.unwrap_or("fair");
    match name {
        "fair" | "biased" => {
            let d = require(d, "d")?;
            if probs.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "--probs only applies to --policy custom, not {name:?}"
                )));
            }
            let policy = if name == "fair" {
                SplitPolicy::fair(d)?
            } else {
                SplitPolicy::biased(d)?
            };
            Ok((policy, None))
        }
        "custom" => {
            let raw = probs.ok_or_else(|| {
                Error::InvalidArgument("--policy custom requires --probs".into())
            })?;
            let values = parse_f64_list(raw)?;
            if let Some(d) = d {
                if d != values.len() {
                    return Err(Error::InvalidArgument(format!(
                        "--d {d} disagrees with {} probabilities",
                        values.len()
                    )));
                }
            }
            Ok((SplitPolicy::custom(&values)?, Some(values)))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown policy {other:?}; expected fair|biased|custom"
        ))),
    }
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse probability {s:?}")))
        })
        .collect()
}

fn parse_variants(raw: &str) -> Result<Vec<Evaluator>> {
    let mut variants = Vec::new();
    for part in raw.split(',') {
        let evaluator: Evaluator = part.trim().parse()?;
        if !variants.contains(&evaluator) {
            variants.push(evaluator);
        }
    }
    Ok(variants)
}

fn parse_usize_list(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse integer {s:?}")))
        })
        .collect()
}

// ─── simulate ───────────────────────────────────────────────────────────────

struct SimulateSpec {
    config: ExperimentConfig,
    d: usize,
    policy_label: String,
    probs: Option<Vec<f64>>,
    out: Option<PathBuf>,
    json: Option<PathBuf>,
    per_tree: Option<PathBuf>,
    dump_tree: bool,
}

fn resolve_simulate(args: SimulateArgs, config: &ConfigMap) -> Result<SimulateSpec> {
    check_config_keys(
        config,
        &[
            "n", "d", "policy", "probs", "runs", "seed", "variants", "max_depth", "out", "json",
            "per_tree", "dump_tree",
        ],
    )?;
    let n = require(merged(args.n, config, "n")?, "n")?;
    let d = merged(args.d, config, "d")?;
    let policy_name = merged(args.policy, config, "policy")?;
    let probs_raw = merged(args.probs, config, "probs")?;
    let (policy, probs) = parse_policy(policy_name.as_deref(), d, probs_raw.as_deref())?;
    let variants = match merged(args.variants, config, "variants")? {
        Some(raw) => parse_variants(&raw)?,
        None => vec![Evaluator::Corrected],
    };
    Ok(SimulateSpec {
        d: policy.d(),
        policy_label: policy.label().to_string(),
        probs,
        config: ExperimentConfig {
            n,
            policy,
            runs: merged(args.runs, config, "runs")?.unwrap_or(10_000),
            master_seed: merged(args.seed, config, "seed")?.unwrap_or(0),
            variants,
            max_depth: merged(args.max_depth, config, "max_depth")?.unwrap_or(DEFAULT_MAX_DEPTH),
        },
        out: merged(args.out, config, "out")?,
        json: merged(args.json, config, "json")?,
        per_tree: merged(args.per_tree, config, "per_tree")?,
        dump_tree: merged_flag(args.dump_tree, config, "dump_tree")?,
    })
}

fn simulate_replay(spec: &SimulateSpec) -> String {
    let mut replay = format!(
        "sicta simulate --n {} --d {} --policy {}",
        spec.config.n, spec.d, spec.policy_label
    );
    if let Some(probs) = &spec.probs {
        let joined: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
        write!(replay, " --probs {}", joined.join(",")).unwrap();
    }
    let variants: Vec<&str> = spec.config.variants.iter().map(|v| v.label()).collect();
    write!(
        replay,
        " --runs {} --seed {} --variants {} --max-depth {}",
        spec.config.runs,
        spec.config.master_seed,
        variants.join(","),
        spec.config.max_depth
    )
    .unwrap();
    replay
}

fn exec_simulate(spec: SimulateSpec) -> Result<i32> {
    let started = Instant::now();
    if spec.dump_tree {
        dump_trees(&spec.config)?;
    }
    let (summary, records) = if spec.per_tree.is_some() {
        let (summary, records) = run_experiment_detailed(&spec.config)?;
        (summary, Some(records))
    } else {
        (run_experiment(&spec.config)?, None)
    };
    let replay = simulate_replay(&spec);

    let csv = simulate_csv(&spec, &summary, &replay);
    emit(spec.out.as_deref(), &csv)?;

    if let (Some(path), Some(records)) = (spec.per_tree.as_deref(), records.as_deref()) {
        write_atomic(path, &per_tree_csv(&spec, records, &replay))?;
    }
    if let Some(path) = spec.json.as_deref() {
        let json = simulate_json(&spec, &summary, &replay, started.elapsed().as_secs_f64());
        write_atomic(path, &json)?;
    }
    Ok(0)
}

/// Regenerate each run's tree (same per-run seeding as the experiment) and
/// print it to stderr.
fn dump_trees(config: &ExperimentConfig) -> Result<()> {
    for i in 0..config.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(config.master_seed, i));
        let tree = SplitTree::generate(config.n, &config.policy, &mut rng, config.max_depth)?;
        eprintln!("run {i}: {}", tree.dump());
    }
    Ok(())
}

/// Provenance comment block carried by every CSV: the exact replay command
/// line and the producing version.
fn csv_preamble(replay: &str) -> String {
    format!(
        "# replay: {replay}\n# version: sicta {}\n",
        env!("CARGO_PKG_VERSION")
    )
}

fn simulate_csv(spec: &SimulateSpec, summary: &RunSummary, replay: &str) -> String {
    let mut out = csv_preamble(replay);
    writeln!(out, "# generator: {GENERATOR}").unwrap();
    writeln!(
        out,
        "d,policy,n,runs,seed,variant,mean_cri,std,ci95,throughput_rom,throughput_mor,yg_closed_form"
    )
    .unwrap();
    let closed_form = yg_closed_form_mst(spec.d);
    for stats in &summary.stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            spec.d,
            spec.policy_label,
            spec.config.n,
            spec.config.runs,
            spec.config.master_seed,
            stats.evaluator,
            stats.mean_cri,
            stats.std_dev,
            stats.ci95_half_width,
            stats.throughput_ratio_of_means,
            stats.throughput_mean_of_ratios,
            closed_form
        )
        .unwrap();
    }
    out
}

fn per_tree_csv(spec: &SimulateSpec, records: &[TreeRecord], replay: &str) -> String {
    let mut out = csv_preamble(&format!("{replay} --per-tree <path>"));
    writeln!(
        out,
        "n,d,policy,corrected,yg,standard,slots_idle,slots_collision,slots_singleton,sic_recoveries,derived_signals"
    )
    .unwrap();
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            spec.config.n,
            spec.d,
            spec.policy_label,
            r.corrected,
            r.yg,
            r.standard,
            r.breakdown.idle_slots,
            r.breakdown.collision_slots,
            r.breakdown.singleton_slots,
            r.breakdown.sic_recoveries,
            r.breakdown.derived_signals
        )
        .unwrap();
    }
    out
}

fn simulate_json(
    spec: &SimulateSpec,
    summary: &RunSummary,
    replay: &str,
    wall_time_s: f64,
) -> String {
    let results: Vec<serde_json::Value> = summary
        .stats
        .iter()
        .map(|s| {
            serde_json::json!({
                "variant": s.evaluator.label(),
                "runs": s.runs,
                "mean_cri": s.mean_cri,
                "std": s.std_dev,
                "ci95": s.ci95_half_width,
                "throughput_rom": s.throughput_ratio_of_means,
                "throughput_mor": s.throughput_mean_of_ratios,
            })
        })
        .collect();
    let value = serde_json::json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "generator": summary.generator,
        "replay": replay,
        "config": {
            "n": spec.config.n,
            "d": spec.d,
            "policy": spec.policy_label,
            "probs": spec.config.policy.probs(),
            "runs": spec.config.runs,
            "seed": spec.config.master_seed,
            "variants": spec.config.variants.iter().map(|v| v.label()).collect::<Vec<_>>(),
            "max_depth": spec.config.max_depth,
        },
        "results": results,
        "yg_closed_form": yg_closed_form_mst(spec.d),
        "wall_time_s": wall_time_s,
    });
    serde_json::to_string_pretty(&value).expect("serializable") + "\n"
}

// ─── exact ──────────────────────────────────────────────────────────────────

struct ExactSpec {
    n_max: usize,
    policy: SplitPolicy,
    probs: Option<Vec<f64>>,
    variant_filter: Option<Variant>,
    rational: bool,
    budget: u64,
    out: Option<PathBuf>,
    json: Option<PathBuf>,
}

fn resolve_exact(args: ExactArgs, config: &ConfigMap) -> Result<ExactSpec> {
    check_config_keys(
        config,
        &[
            "nmax", "d", "policy", "probs", "variant", "rational", "budget", "out", "json",
        ],
    )?;
    let n_max = require(merged(args.nmax, config, "nmax")?, "nmax")?;
    let d = merged(args.d, config, "d")?;
    let policy_name = merged(args.policy, config, "policy")?;
    let probs_raw = merged(args.probs, config, "probs")?;
    let (policy, probs) = parse_policy(policy_name.as_deref(), d, probs_raw.as_deref())?;
    let variant_filter = merged(args.variant, config, "variant")?
        .map(|raw: String| raw.parse::<Variant>())
        .transpose()?;
    let rational = merged_flag(args.rational, config, "rational")?;
    if rational && n_max > RATIONAL_N_MAX {
        return Err(Error::InvalidArgument(format!(
            "--rational supports --nmax <= {RATIONAL_N_MAX}; double precision covers larger n"
        )));
    }
    Ok(ExactSpec {
        n_max,
        policy,
        probs,
        variant_filter,
        rational,
        budget: merged(args.budget, config, "budget")?
            .unwrap_or(DEFAULT_COMPOSITION_BUDGET as u64),
        out: merged(args.out, config, "out")?,
        json: merged(args.json, config, "json")?,
    })
}

fn exact_replay(spec: &ExactSpec) -> String {
    let mut replay = format!(
        "sicta exact --nmax {} --d {} --policy {}",
        spec.n_max,
        spec.policy.d(),
        spec.policy.label()
    );
    if let Some(probs) = &spec.probs {
        let joined: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
        write!(replay, " --probs {}", joined.join(",")).unwrap();
    }
    if let Some(variant) = spec.variant_filter {
        write!(replay, " --variant {variant}").unwrap();
    }
    if spec.rational {
        replay.push_str(" --rational");
    }
    if spec.budget != DEFAULT_COMPOSITION_BUDGET as u64 {
        write!(replay, " --budget {}", spec.budget).unwrap();
    }
    replay
}

/// Emitted tables, either one filtered variant or all three.
fn exact_variants(spec: &ExactSpec) -> Vec<Variant> {
    match spec.variant_filter {
        Some(v) => vec![v],
        None => vec![Variant::Standard, Variant::Yg, Variant::Corrected],
    }
}

fn exec_exact(spec: ExactSpec) -> Result<i32> {
    let started = Instant::now();
    let variants = exact_variants(&spec);
    let replay = exact_replay(&spec);
    let budget = spec.budget as u128;

    // The throughput column follows the last emitted variant: `corrected`
    // in the default all-variant layout, or the filtered one.
    let throughput_variant = *variants.last().expect("at least one variant");

    let (csv, json_rows) = if spec.rational {
        let tables: Vec<_> = variants
            .iter()
            .map(|&v| expected_cri_table_exact_with_budget(spec.n_max, &spec.policy, v, budget))
            .collect::<Result<_>>()?;
        exact_rows(&spec, &variants, throughput_variant, &replay, |n, t| {
            let value = &tables[t].values[n];
            (value.to_string(), crate::analytic::rational_to_f64(value))
        })
    } else {
        let tables: Vec<_> = variants
            .iter()
            .map(|&v| expected_cri_table_with_budget(spec.n_max, &spec.policy, v, budget))
            .collect::<Result<_>>()?;
        exact_rows(&spec, &variants, throughput_variant, &replay, |n, t| {
            let value = tables[t].values[n];
            (value.to_string(), value)
        })
    };

    emit(spec.out.as_deref(), &csv)?;
    if let Some(path) = spec.json.as_deref() {
        let value = serde_json::json!({
            "command": "exact",
            "version": env!("CARGO_PKG_VERSION"),
            "replay": replay,
            "config": {
                "nmax": spec.n_max,
                "d": spec.policy.d(),
                "policy": spec.policy.label(),
                "probs": spec.policy.probs(),
                "variants": variants.iter().map(|v| v.label()).collect::<Vec<_>>(),
                "rational": spec.rational,
                "budget": spec.budget,
            },
            "rows": json_rows,
            "wall_time_s": started.elapsed().as_secs_f64(),
        });
        write_atomic(
            path,
            &(serde_json::to_string_pretty(&value).expect("serializable") + "\n"),
        )?;
    }
    Ok(0)
}

/// Render the CSV plus its JSON row mirror. `cell(n, table_index)` returns
/// the display string and f64 value of `L_n` in that table.
fn exact_rows(
    spec: &ExactSpec,
    variants: &[Variant],
    throughput_variant: Variant,
    replay: &str,
    cell: impl Fn(usize, usize) -> (String, f64),
) -> (String, Vec<serde_json::Value>) {
    let mut csv = csv_preamble(replay);
    let mut header = String::from("n");
    for v in variants {
        write!(header, ",L_{v}").unwrap();
    }
    write!(header, ",T_{throughput_variant}").unwrap();
    writeln!(csv, "{header}").unwrap();

    let throughput_index = variants
        .iter()
        .position(|&v| v == throughput_variant)
        .expect("throughput variant emitted");
    let mut json_rows = Vec::with_capacity(spec.n_max + 1);
    for n in 0..=spec.n_max {
        let mut row = serde_json::Map::new();
        row.insert("n".into(), serde_json::json!(n));
        write!(csv, "{n}").unwrap();
        for (t, v) in variants.iter().enumerate() {
            let (display, value) = cell(n, t);
            write!(csv, ",{display}").unwrap();
            row.insert(format!("L_{v}"), serde_json::json!(value));
        }
        let (t_display, t_value) = throughput_cell(spec, n, throughput_index, &cell);
        writeln!(csv, ",{t_display}").unwrap();
        row.insert(format!("T_{throughput_variant}"), serde_json::json!(t_value));
        json_rows.push(serde_json::Value::Object(row));
    }
    (csv, json_rows)
}

fn throughput_cell(
    spec: &ExactSpec,
    n: usize,
    table_index: usize,
    cell: &impl Fn(usize, usize) -> (String, f64),
) -> (String, f64) {
    if n == 0 {
        return ("0".into(), 0.0);
    }
    let (display, value) = cell(n, table_index);
    if spec.rational {
        // n / L_n stays exact: parse back the fraction just rendered.
        let l: BigRational = display.parse().expect("rendered rational");
        let t = BigRational::from_integer(n.into()) / l;
        (t.to_string(), n as f64 / value)
    } else {
        let t = n as f64 / value;
        (t.to_string(), t)
    }
}

// ─── sweep ──────────────────────────────────────────────────────────────────

struct SweepSpec {
    d_values: Vec<usize>,
    policies: Vec<PolicyForm>,
    base: SweepConfig,
    out: Option<PathBuf>,
    json: Option<PathBuf>,
}

fn resolve_sweep(args: SweepArgs, config: &ConfigMap) -> Result<SweepSpec> {
    check_config_keys(
        config,
        &[
            "d_values", "policies", "n", "runs", "seed", "max_depth", "out", "json",
        ],
    )?;
    let d_values = match merged(args.d_values, config, "d_values")? {
        Some(raw) => parse_usize_list(&raw)?,
        None => (2..=10).collect(),
    };
    for &d in &d_values {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "splitting factor must satisfy d >= 2, got d={d}"
            )));
        }
    }
    let policies = match merged(args.policies, config, "policies")? {
        Some(raw) => raw
            .split(',')
            .map(|s| match s.trim() {
                "fair" => Ok(PolicyForm::Fair),
                "biased" => Ok(PolicyForm::Biased),
                other => Err(Error::InvalidArgument(format!(
                    "sweep policy must be fair or biased, got {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![PolicyForm::Fair, PolicyForm::Biased],
    };
    if policies.is_empty() || d_values.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one d value and one policy".into(),
        ));
    }
    Ok(SweepSpec {
        d_values,
        policies,
        base: SweepConfig {
            n: merged(args.n, config, "n")?.unwrap_or(1000),
            runs: merged(args.runs, config, "runs")?.unwrap_or(10_000),
            master_seed: merged(args.seed, config, "seed")?.unwrap_or(0),
            max_depth: merged(args.max_depth, config, "max_depth")?.unwrap_or(DEFAULT_MAX_DEPTH),
        },
        out: merged(args.out, config, "out")?,
        json: merged(args.json, config, "json")?,
    })
}

fn exec_sweep(spec: SweepSpec) -> Result<i32> {
    let started = Instant::now();
    let rows = crate::montecarlo::sweep(&spec.d_values, &spec.policies, &spec.base)?;
    let d_list: Vec<String> = spec.d_values.iter().map(|d| d.to_string()).collect();
    let policy_list: Vec<&str> = spec.policies.iter().map(|p| p.label()).collect();
    let replay = format!(
        "sicta sweep --d-values {} --policies {} --n {} --runs {} --seed {} --max-depth {}",
        d_list.join(","),
        policy_list.join(","),
        spec.base.n,
        spec.base.runs,
        spec.base.master_seed,
        spec.base.max_depth
    );

    let mut csv = csv_preamble(&replay);
    writeln!(csv, "# generator: {GENERATOR}").unwrap();
    writeln!(
        csv,
        "d,policy,n,runs,seed,mean_cri,std,ci95,throughput_rom,throughput_mor,yg_closed_form"
    )
    .unwrap();
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.d,
            row.policy_form.label(),
            row.n,
            row.runs,
            row.seed,
            row.stats.mean_cri,
            row.stats.std_dev,
            row.stats.ci95_half_width,
            row.stats.throughput_ratio_of_means,
            row.stats.throughput_mean_of_ratios,
            row.yg_closed_form
        )
        .unwrap();
    }
    emit(spec.out.as_deref(), &csv)?;

    if let Some(path) = spec.json.as_deref() {
        let json_rows: Vec<serde_json::Value> = rows
            .iter()
            .map(|row| {
                serde_json::json!({
                    "d": row.d,
                    "policy": row.policy_form.label(),
                    "n": row.n,
                    "runs": row.runs,
                    "seed": row.seed,
                    "mean_cri": row.stats.mean_cri,
                    "std": row.stats.std_dev,
                    "ci95": row.stats.ci95_half_width,
                    "throughput_rom": row.stats.throughput_ratio_of_means,
                    "throughput_mor": row.stats.throughput_mean_of_ratios,
                    "yg_closed_form": row.yg_closed_form,
                })
            })
            .collect();
        let value = serde_json::json!({
            "command": "sweep",
            "version": env!("CARGO_PKG_VERSION"),
            "generator": GENERATOR,
            "replay": replay,
            "config": {
                "d_values": spec.d_values,
                "policies": policy_list,
                "n": spec.base.n,
                "runs": spec.base.runs,
                "seed": spec.base.master_seed,
                "max_depth": spec.base.max_depth,
            },
            "rows": json_rows,
            "wall_time_s": started.elapsed().as_secs_f64(),
        });
        write_atomic(
            path,
            &(serde_json::to_string_pretty(&value).expect("serializable") + "\n"),
        )?;
    }
    Ok(0)
}

// ─── verify ─────────────────────────────────────────────────────────────────

struct VerifySpec {
    config: VerifyConfig,
    json: Option<PathBuf>,
}

fn resolve_verify(args: VerifyArgs, config: &ConfigMap) -> Result<VerifySpec> {
    check_config_keys(config, &["trees", "seed", "max_depth", "json"])?;
    let defaults = VerifyConfig::default();
    Ok(VerifySpec {
        config: VerifyConfig {
            trees: merged(args.trees, config, "trees")?.unwrap_or(defaults.trees),
            seed: merged(args.seed, config, "seed")?.unwrap_or(defaults.seed),
            max_depth: merged(args.max_depth, config, "max_depth")?.unwrap_or(defaults.max_depth),
        },
        json: merged(args.json, config, "json")?,
    })
}

fn exec_verify(spec: VerifySpec) -> Result<i32> {
    let report = crate::verify::run_all(&spec.config)?;
    let replay = format!(
        "sicta verify --trees {} --seed {} --max-depth {}",
        spec.config.trees, spec.config.seed, spec.config.max_depth
    );
    print!("{}", verify_text(&report, &replay));
    if let Some(path) = spec.json.as_deref() {
        write_atomic(path, &verify_json(&report, &replay))?;
    }
    Ok(if report.all_passed() { 0 } else { 2 })
}

fn verify_text(report: &VerifyReport, replay: &str) -> String {
    let mut out = csv_preamble(replay);
    writeln!(
        out,
        "{:<28} {:>10} {:>9}  status",
        "suite", "checks", "failures"
    )
    .unwrap();
    for suite in &report.suites {
        writeln!(
            out,
            "{:<28} {:>10} {:>9}  {}",
            suite.name,
            suite.checks,
            suite.failures,
            if suite.passed() { "PASS" } else { "FAIL" }
        )
        .unwrap();
        if !suite.detail.is_empty() && !suite.passed() {
            writeln!(out, "    {}", suite.detail).unwrap();
        }
    }
    writeln!(
        out,
        "verify: {} ({} suites)",
        if report.all_passed() { "PASS" } else { "FAIL" },
        report.suites.len()
    )
    .unwrap();
    out
}

fn verify_json(report: &VerifyReport, replay: &str) -> String {
    let suites: Vec<serde_json::Value> = report
        .suites
        .iter()
        .map(|s| {
            serde_json::json!({
                "name": s.name,
                "checks": s.checks,
                "failures": s.failures,
                "passed": s.passed(),
                "detail": s.detail,
            })
        })
        .collect();
    let value = serde_json::json!({
        "command": "verify",
        "version": env!("CARGO_PKG_VERSION"),
        "generator": GENERATOR,
        "replay": replay,
        "config": {
            "trees": report.config.trees,
            "seed": report.config.seed,
            "max_depth": report.config.max_depth,
        },
        "suites": suites,
        "all_passed": report.all_passed(),
    });
    serde_json::to_string_pretty(&value).expect("serializable") + "\n"
}

// ─── Output plumbing ────────────────────────────────────────────────────────

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Write via a sibling temp file and rename, so a failure never leaves a
/// partial output behind.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
