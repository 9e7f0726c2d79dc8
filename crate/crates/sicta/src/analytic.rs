//! Exact conditional expected CRI lengths by dynamic programming.
//!
//! For each n the expectation is taken over all compositions of n into d
//! groups, weighted by the multinomial law of the split. The conditional
//! expected length given a split I is, by independence of the subtrees:
//!
//! - standard:  `1 + sum_j L_{I_j}`
//! - yg:        `sum_j L_{I_j}`
//! - corrected: `1 + sum_{j <= d_min(I)} L_{I_j} - [d_min(I) = d]`
//!
//! Splits that put all n users into one group reference `L_n` itself; their
//! total probability coefficient `c` is collected separately and the table
//! entry solved in closed form as `L_n = b / (1 - c)`. Tables can be built
//! in exact rational arithmetic (identity checks demand exactness) or in
//! double precision for large n.

use num::traits::Zero;
use num::{BigInt, BigRational, One};

use crate::error::{Error, Result};
use crate::evaluators::d_min_counts;
use crate::policy::{Occupancy, SplitPolicy};

/// Default cap on the total number of compositions enumerated while building
/// one table. `C(n+d-1, d-1)` grows fast in d; past this budget the exact
/// table is impractical and Monte Carlo covers the regime.
pub const DEFAULT_COMPOSITION_BUDGET: u128 = 10_000_000;

/// Which recursion a table follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Standard,
    Yg,
    Corrected,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Standard, Variant::Yg, Variant::Corrected];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Yg => "yg",
            Variant::Corrected => "corrected",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "yg" => Ok(Variant::Yg),
            "corrected" => Ok(Variant::Corrected),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?}; expected standard|yg|corrected"
            ))),
        }
    }
}

/// Conditional expected CRI lengths `L_0..L_max` for one variant and policy.
#[derive(Debug, Clone)]
pub struct ExpectedCriTable<T> {
    pub variant: Variant,
    pub policy: SplitPolicy,
    pub values: Vec<T>,
}

impl<T> ExpectedCriTable<T> {
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }
}

pub type FloatTable = ExpectedCriTable<f64>;
pub type ExactTable = ExpectedCriTable<BigRational>;

/// Double-precision table with the default composition budget.
pub fn expected_cri_table(
    n_max: usize,
    policy: &SplitPolicy,
    variant: Variant,
) -> Result<FloatTable> {
    expected_cri_table_with_budget(n_max, policy, variant, DEFAULT_COMPOSITION_BUDGET)
}

pub fn expected_cri_table_with_budget(
    n_max: usize,
    policy: &SplitPolicy,
    variant: Variant,
    budget: u128,
) -> Result<FloatTable> {
    Ok(ExpectedCriTable {
        variant,
        policy: policy.clone(),
        values: table_impl::<f64>(n_max, policy, variant, budget)?,
    })
}

/// Exact rational table with the default composition budget.
pub fn expected_cri_table_exact(
    n_max: usize,
    policy: &SplitPolicy,
    variant: Variant,
) -> Result<ExactTable> {
    expected_cri_table_exact_with_budget(n_max, policy, variant, DEFAULT_COMPOSITION_BUDGET)
}

pub fn expected_cri_table_exact_with_budget(
    n_max: usize,
    policy: &SplitPolicy,
    variant: Variant,
    budget: u128,
) -> Result<ExactTable> {
    Ok(ExpectedCriTable {
        variant,
        policy: policy.clone(),
        values: table_impl::<BigRational>(n_max, policy, variant, budget)?,
    })
}

/// Multinomial probability of the split `occ` for `n` users:
/// `n! / prod(I_j!) * prod(p_j^I_j)`.
pub fn multinomial_pmf(occ: &Occupancy, n: u32, policy: &SplitPolicy) -> Result<f64> {
    check_pmf_contract(occ, n, policy)?;
    let ctx = <f64 as DpNum>::pmf_ctx(n as usize, policy);
    Ok(<f64 as DpNum>::pmf(&ctx, n, occ.counts()))
}

/// Exact rational counterpart of [`multinomial_pmf`].
pub fn multinomial_pmf_exact(
    occ: &Occupancy,
    n: u32,
    policy: &SplitPolicy,
) -> Result<BigRational> {
    check_pmf_contract(occ, n, policy)?;
    let ctx = <BigRational as DpNum>::pmf_ctx(n as usize, policy);
    Ok(<BigRational as DpNum>::pmf(&ctx, n, occ.counts()))
}

fn check_pmf_contract(occ: &Occupancy, n: u32, policy: &SplitPolicy) -> Result<()> {
    if occ.d() != policy.d() {
        return Err(Error::ContractViolation(format!(
            "occupancy has {} groups, policy has {}",
            occ.d(),
            policy.d()
        )));
    }
    if occ.total() != n {
        return Err(Error::ContractViolation(format!(
            "occupancy sums to {}, expected n={n}",
            occ.total()
        )));
    }
    Ok(())
}

/// One row of the Yu–Giannakis relation check.
#[derive(Debug, Clone, Copy)]
pub struct YgRelationRow {
    pub n: usize,
    /// `(d-1) * (L'_n - 1)` with `L'_n` from the standard table.
    pub lhs: f64,
    /// `d * (L_n - 1)` with `L_n` from the chosen variant.
    pub rhs: f64,
    pub holds: bool,
}

/// Result of checking `(d-1)(L'_n - 1) = d(L_n - 1)` for n = 0..=n_max.
#[derive(Debug, Clone)]
pub struct YgRelationReport {
    pub d: usize,
    pub variant: Variant,
    /// True when the comparison ran in exact rational arithmetic.
    pub exact: bool,
    pub rows: Vec<YgRelationRow>,
    pub holds_for_all: bool,
}

/// Comparison tolerance used when the relation check runs in doubles.
pub const YG_RELATION_TOLERANCE: f64 = 1e-9;

/// Largest n for which the relation check uses exact rationals.
pub const EXACT_CHECK_N_MAX: usize = 64;

/// Check the relation `(d-1)(L'_n - 1) = d(L_n - 1)` between the standard
/// table and the chosen variant's table, per n.
///
/// The identity is the fixed point of the Yu–Giannakis algebra, so it holds
/// at every d for the yg variant; for the corrected variant it fails for
/// some n whenever d >= 3. Up to n_max = [`EXACT_CHECK_N_MAX`] the check is
/// exact; beyond that it compares doubles within [`YG_RELATION_TOLERANCE`].
pub fn check_yg_relation(
    n_max: usize,
    policy: &SplitPolicy,
    variant: Variant,
) -> Result<YgRelationReport> {
    let d = policy.d();
    let mut rows = Vec::with_capacity(n_max + 1);
    let exact = n_max <= EXACT_CHECK_N_MAX;
    if exact {
        let standard = expected_cri_table_exact(n_max, policy, Variant::Standard)?;
        let chosen = expected_cri_table_exact(n_max, policy, variant)?;
        let d_minus_1 = BigRational::from_integer(BigInt::from(d as u64 - 1));
        let d_exact = BigRational::from_integer(BigInt::from(d as u64));
        for n in 0..=n_max {
            let one = <BigRational as One>::one();
            let lhs = &d_minus_1 * (&standard.values[n] - &one);
            let rhs = &d_exact * (&chosen.values[n] - &one);
            rows.push(YgRelationRow {
                n,
                lhs: rational_to_f64(&lhs),
                rhs: rational_to_f64(&rhs),
                holds: lhs == rhs,
            });
        }
    } else {
        let standard = expected_cri_table(n_max, policy, Variant::Standard)?;
        let chosen = expected_cri_table(n_max, policy, variant)?;
        for n in 0..=n_max {
            let lhs = (d as f64 - 1.0) * (standard.values[n] - 1.0);
            let rhs = d as f64 * (chosen.values[n] - 1.0);
            rows.push(YgRelationRow {
                n,
                lhs,
                rhs,
                holds: (lhs - rhs).abs() <= YG_RELATION_TOLERANCE,
            });
        }
    }
    let holds_for_all = rows.iter().all(|r| r.holds);
    Ok(YgRelationReport {
        d,
        variant,
        exact,
        rows,
        holds_for_all,
    })
}

/// Finite-n throughput proxy values `T_n = n / L_n`.
#[derive(Debug, Clone)]
pub struct ThroughputCurve {
    /// `values[n] = n / L_n`; entry 0 is 0 by convention.
    pub values: Vec<f64>,
    /// The largest-n value, used as the maximum-stable-throughput proxy.
    pub mst_proxy: f64,
}

pub fn throughput_estimate(table: &FloatTable) -> ThroughputCurve {
    curve(table.values.iter().copied())
}

pub fn throughput_estimate_exact(table: &ExactTable) -> ThroughputCurve {
    curve(table.values.iter().map(rational_to_f64))
}

fn curve(values: impl Iterator<Item = f64>) -> ThroughputCurve {
    let values: Vec<f64> = values
        .enumerate()
        .map(|(n, l)| if n == 0 { 0.0 } else { n as f64 / l })
        .collect();
    let mst_proxy = *values.last().expect("table has at least L_0");
    ThroughputCurve { values, mst_proxy }
}

/// The closed-form maximum stable throughput claimed by Yu–Giannakis for
/// fair d-ary splitting: `ln(d) / (d - 1)`.
pub fn yg_closed_form_mst(d: usize) -> f64 {
    assert!(d >= 2, "splitting factor must be >= 2");
    (d as f64).ln() / (d as f64 - 1.0)
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    // Ratio::to_f64 via num::ToPrimitive handles bigint magnitudes.
    num::ToPrimitive::to_f64(r).expect("rational representable as f64")
}

// ─── DP core ────────────────────────────────────────────────────────────────

/// Numeric abstraction the table construction is generic over: exact
/// rationals in verify mode, doubles otherwise.
trait DpNum: Clone + Sized {
    type PmfCtx;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign(&mut self, o: &Self);
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;

    fn pmf_ctx(n_max: usize, policy: &SplitPolicy) -> Self::PmfCtx;
    fn pmf(ctx: &Self::PmfCtx, n: u32, counts: &[u32]) -> Self;
}

struct FloatPmfCtx {
    ln_factorial: Vec<f64>,
    ln_probs: Vec<f64>,
}

impl DpNum for f64 {
    type PmfCtx = FloatPmfCtx;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }

    fn pmf_ctx(n_max: usize, policy: &SplitPolicy) -> FloatPmfCtx {
        let mut ln_factorial = Vec::with_capacity(n_max + 1);
        ln_factorial.push(0.0);
        for k in 1..=n_max {
            ln_factorial.push(ln_factorial[k - 1] + (k as f64).ln());
        }
        // ln(0) is never consumed: zero-probability groups with users short-
        // circuit to pmf 0 below.
        let ln_probs = policy.probs().iter().map(|&p| p.ln()).collect();
        FloatPmfCtx {
            ln_factorial,
            ln_probs,
        }
    }

    fn pmf(ctx: &FloatPmfCtx, n: u32, counts: &[u32]) -> f64 {
        let mut ln = ctx.ln_factorial[n as usize];
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if ctx.ln_probs[j] == f64::NEG_INFINITY {
                return 0.0;
            }
            ln += c as f64 * ctx.ln_probs[j] - ctx.ln_factorial[c as usize];
        }
        ln.exp()
    }
}

struct ExactPmfCtx {
    factorial: Vec<BigInt>,
    probs: Vec<BigRational>,
}

impl DpNum for BigRational {
    type PmfCtx = ExactPmfCtx;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_assign(&mut self, o: &Self) {
        *self = &*self + o;
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }

    fn pmf_ctx(n_max: usize, policy: &SplitPolicy) -> ExactPmfCtx {
        let mut factorial = Vec::with_capacity(n_max + 1);
        factorial.push(BigInt::one());
        for k in 1..=n_max {
            let next = &factorial[k - 1] * BigInt::from(k as u64);
            factorial.push(next);
        }
        ExactPmfCtx {
            factorial,
            probs: policy.exact_probs().to_vec(),
        }
    }

    fn pmf(ctx: &ExactPmfCtx, n: u32, counts: &[u32]) -> BigRational {
        let mut denom = BigInt::one();
        let mut prob = <BigRational as One>::one();
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if Zero::is_zero(&ctx.probs[j]) {
                return <BigRational as Zero>::zero();
            }
            denom *= &ctx.factorial[c as usize];
            prob *= num::pow::pow(ctx.probs[j].clone(), c as usize);
        }
        // The multinomial coefficient n!/prod(I_j!) is an exact integer.
        let coefficient = &ctx.factorial[n as usize] / denom;
        BigRational::from_integer(coefficient) * prob
    }
}

fn table_impl<T: DpNum>(
    n_max: usize,
    policy: &SplitPolicy,
    variant: Variant,
    budget: u128,
) -> Result<Vec<T>> {
    let d = policy.d();
    check_budget(n_max, d, budget)?;
    let ctx = T::pmf_ctx(n_max, policy);
    let mut table: Vec<T> = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max.min(1) {
        table.push(T::one());
    }
    for n in 2..=n_max {
        let mut constant_total = T::zero();
        let mut self_coefficient = T::zero();
        for counts in compositions(n as u32, d) {
            let pmf = T::pmf(&ctx, n as u32, &counts);
            if pmf.is_zero() {
                continue;
            }
            let (term, self_referential) =
                conditional_term::<T>(&counts, n as u32, d, variant, &table);
            constant_total.add_assign(&pmf.mul(&term));
            if self_referential {
                self_coefficient.add_assign(&pmf);
            }
        }
        // L_n appears on both sides when a split keeps all n users together;
        // solve the scalar equation L_n = b + c * L_n directly.
        let denominator = T::one().sub(&self_coefficient);
        table.push(constant_total.div(&denominator));
    }
    Ok(table)
}

/// Conditional expected length given one split, decomposed into the part
/// made of already-known table entries and a flag for an `L_n` self-term.
fn conditional_term<T: DpNum>(
    counts: &[u32],
    n: u32,
    d: usize,
    variant: Variant,
    table: &[T],
) -> (T, bool) {
    let mut self_referential = false;
    let included = match variant {
        Variant::Standard | Variant::Yg => d,
        Variant::Corrected => d_min_counts(counts, n),
    };
    let mut constant = match variant {
        Variant::Yg => T::zero(),
        Variant::Standard => T::one(),
        Variant::Corrected => {
            if included == d {
                T::zero() // the 1 for the root slot cancels against -[d_min = d]
            } else {
                T::one()
            }
        }
    };
    for &c in &counts[..included] {
        if c == n {
            self_referential = true;
        } else {
            constant.add_assign(&table[c as usize]);
        }
    }
    (constant, self_referential)
}

// ─── Composition enumeration ────────────────────────────────────────────────

/// Compositions of `n` into exactly `d` non-negative parts, in
/// colexicographic order: `(n,0,..,0)` first, `(0,..,0,n)` last.
pub(crate) fn compositions(n: u32, d: usize) -> Compositions {
    Compositions {
        next: Some({
            let mut first = vec![0u32; d];
            first[0] = n;
            first
        }),
        n,
    }
}

pub(crate) struct Compositions {
    next: Option<Vec<u32>>,
    n: u32,
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let d = current.len();
        if current[d - 1] != self.n || self.n == 0 {
            if current[d - 1] == self.n {
                // n = 0: the single all-zero composition is terminal.
                self.next = None;
            } else {
                let mut succ = current.clone();
                let j = succ
                    .iter()
                    .position(|&c| c > 0)
                    .expect("non-terminal composition has mass");
                let moved = succ[j];
                succ[j] = 0;
                succ[0] = moved - 1;
                succ[j + 1] += 1;
                self.next = Some(succ);
            }
        }
        Some(current)
    }
}

/// Number of compositions of n into d parts, saturating on overflow.
fn composition_count(n: u128, d: u128) -> u128 {
    // C(n + d - 1, d - 1), multiplicative form.
    let k = d - 1;
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result.saturating_mul(n + i);
        result /= i; // exact: result is always a binomial prefix
    }
    result
}

fn check_budget(n_max: usize, d: usize, budget: u128) -> Result<()> {
    let mut required: u128 = 0;
    for n in 2..=n_max.max(1) {
        required = required.saturating_add(composition_count(n as u128, d as u128));
        if required > budget {
            return Err(Error::BudgetExceeded {
                n_max,
                d,
                required,
                budget,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn fair(d: usize) -> SplitPolicy {
        SplitPolicy::fair(d).unwrap()
    }

    #[test]
    fn composition_enumeration_colex() {
        let all: Vec<Vec<u32>> = compositions(2, 3).collect();
        assert_eq!(
            all,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
        assert_eq!(compositions(0, 4).count(), 1);
        assert_eq!(compositions(5, 1).count(), 1);
        // C(n+d-1, d-1)
        assert_eq!(compositions(6, 3).count(), 28);
        assert_eq!(compositions(4, 5).count(), 70);
    }

    #[test]
    fn pmf_hand_values() {
        let occ = Occupancy::new(vec![1, 1, 0]);
        let p = multinomial_pmf(&occ, 2, &fair(3)).unwrap();
        assert!((p - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(multinomial_pmf_exact(&occ, 2, &fair(3)).unwrap(), rat(2, 9));

        let occ = Occupancy::new(vec![2, 0]);
        assert_eq!(multinomial_pmf_exact(&occ, 2, &fair(2)).unwrap(), rat(1, 4));
    }

    #[test]
    fn pmf_normalizes() {
        for (n, d) in [(3u32, 3usize), (5, 2), (4, 4)] {
            let policy = fair(d);
            let sum: f64 = compositions(n, d)
                .map(|c| multinomial_pmf(&Occupancy::new(c), n, &policy).unwrap())
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum={sum} for n={n}, d={d}");
            let exact: BigRational = compositions(n, d)
                .map(|c| multinomial_pmf_exact(&Occupancy::new(c), n, &policy).unwrap())
                .sum();
            assert!(exact.is_one());
        }
    }

    #[test]
    fn pmf_contract_violations() {
        let occ = Occupancy::new(vec![1, 1]);
        assert!(multinomial_pmf(&occ, 3, &fair(2)).is_err());
        assert!(multinomial_pmf(&occ, 2, &fair(3)).is_err());
    }

    #[test]
    fn hand_solved_table_entries() {
        // Binary SICTA: L_2 = 1/2 * 2 + 1/2 * (1 + L_2)  =>  L_2 = 3.
        let t = expected_cri_table_exact(2, &fair(2), Variant::Corrected).unwrap();
        assert_eq!(t.values[2], rat(3, 1));
        // Ternary, all six compositions of 2: L_2 = (19 + 3 L_2) / 9.
        let t = expected_cri_table_exact(2, &fair(3), Variant::Corrected).unwrap();
        assert_eq!(t.values[2], rat(19, 6));
        let t = expected_cri_table_exact(2, &fair(3), Variant::Yg).unwrap();
        assert_eq!(t.values[2], rat(4, 1));
        let t = expected_cri_table_exact(2, &fair(3), Variant::Standard).unwrap();
        assert_eq!(t.values[2], rat(11, 2));
        // Binary identity (d-1)(L'_2 - 1) = d(L_2 - 1) forces L'_2 = 5.
        let t = expected_cri_table_exact(2, &fair(2), Variant::Standard).unwrap();
        assert_eq!(t.values[2], rat(5, 1));
    }

    #[test]
    fn base_cases_and_lower_bound() {
        for variant in Variant::ALL {
            let t = expected_cri_table_exact(8, &fair(3), variant).unwrap();
            assert!(t.values[0].is_one());
            assert!(t.values[1].is_one());
            for n in 2..=8 {
                assert!(
                    t.values[n] >= rat(2, 1),
                    "L_{n} = {} < 2 for {variant}",
                    t.values[n]
                );
            }
        }
    }

    #[test]
    fn binary_tables_identical() {
        for policy in [fair(2), SplitPolicy::custom(&[0.3, 0.7]).unwrap()] {
            let corrected = expected_cri_table_exact(20, &policy, Variant::Corrected).unwrap();
            let yg = expected_cri_table_exact(20, &policy, Variant::Yg).unwrap();
            assert_eq!(corrected.values, yg.values);
        }
    }

    #[test]
    fn table_ordering() {
        for d in [2usize, 3, 4] {
            let policy = fair(d);
            let corrected = expected_cri_table_exact(16, &policy, Variant::Corrected).unwrap();
            let yg = expected_cri_table_exact(16, &policy, Variant::Yg).unwrap();
            let standard = expected_cri_table_exact(16, &policy, Variant::Standard).unwrap();
            for n in 0..=16 {
                assert!(corrected.values[n] <= yg.values[n], "n={n}, d={d}");
                assert!(yg.values[n] <= standard.values[n], "n={n}, d={d}");
            }
        }
    }

    /// Independent route to the same tables: plain fixed-point iteration of
    /// the expectation equations, never using the b/(1-c) closed form.
    fn iterated_table(n_max: usize, policy: &SplitPolicy, variant: Variant) -> Vec<f64> {
        let d = policy.d();
        let mut table = vec![1.0f64; n_max + 1];
        for _ in 0..400 {
            for n in 2..=n_max {
                let mut expect = 0.0;
                for counts in compositions(n as u32, d) {
                    let occ = Occupancy::new(counts.clone());
                    let pmf = multinomial_pmf(&occ, n as u32, policy).unwrap();
                    if pmf == 0.0 {
                        continue;
                    }
                    let included = match variant {
                        Variant::Standard | Variant::Yg => d,
                        Variant::Corrected => d_min_counts(&counts, n as u32),
                    };
                    let base = match variant {
                        Variant::Yg => 0.0,
                        Variant::Standard => 1.0,
                        Variant::Corrected => {
                            if included == d {
                                0.0
                            } else {
                                1.0
                            }
                        }
                    };
                    let sum: f64 = counts[..included]
                        .iter()
                        .map(|&c| table[c as usize])
                        .sum();
                    expect += pmf * (base + sum);
                }
                table[n] = expect;
            }
        }
        table
    }

    #[test]
    fn dp_matches_fixed_point_iteration() {
        for d in [2usize, 3] {
            let policy = fair(d);
            for variant in Variant::ALL {
                let dp = expected_cri_table(10, &policy, variant).unwrap();
                let iterated = iterated_table(10, &policy, variant);
                for (n, (a, b)) in dp.values.iter().zip(&iterated).enumerate() {
                    assert!(
                        (a - b).abs() < 1e-9,
                        "n={n}, d={d}, {variant}: dp={a} iter={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn float_and_exact_tables_agree() {
        for variant in Variant::ALL {
            let exact = expected_cri_table_exact(24, &fair(3), variant).unwrap();
            let float = expected_cri_table(24, &fair(3), variant).unwrap();
            for n in 0..=24 {
                let reference = rational_to_f64(&exact.values[n]);
                assert!(
                    (float.values[n] - reference).abs() <= 1e-9 * reference.max(1.0),
                    "n={n} {variant}"
                );
            }
        }
    }

    #[test]
    fn relation_check_reports() {
        // yg variant: the relation is its own fixed point, exact at every d.
        for d in [2usize, 3, 4] {
            let report = check_yg_relation(12, &fair(d), Variant::Yg).unwrap();
            assert!(report.exact);
            assert!(report.holds_for_all, "d={d}");
        }
        // corrected variant: holds at d=2, fails at d=3 from n=2 on.
        let report = check_yg_relation(12, &fair(2), Variant::Corrected).unwrap();
        assert!(report.holds_for_all);
        let report = check_yg_relation(4, &fair(3), Variant::Corrected).unwrap();
        assert!(!report.holds_for_all);
        let row = &report.rows[2];
        assert!(!row.holds);
        assert_eq!(row.lhs, 9.0);
        assert_eq!(row.rhs, 6.5);
    }

    #[test]
    fn throughput_values() {
        let table = expected_cri_table_exact(2, &fair(2), Variant::Corrected).unwrap();
        let curve = throughput_estimate_exact(&table);
        assert_eq!(curve.values[1], 1.0);
        assert!((curve.values[2] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(curve.mst_proxy, curve.values[2]);
    }

    #[test]
    fn closed_form_values() {
        assert!((yg_closed_form_mst(2) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((yg_closed_form_mst(3) - 0.5493).abs() < 1e-4);
        assert!((yg_closed_form_mst(10) - 0.2558).abs() < 1e-4);
    }

    #[test]
    fn budget_guard() {
        let err =
            expected_cri_table_with_budget(50, &fair(6), Variant::Corrected, 1_000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        // Count sanity: saturating arithmetic never panics.
        assert_eq!(composition_count(2, 3), 6);
        assert_eq!(composition_count(6, 3), 28);
        assert!(composition_count(u128::MAX / 2, 9) > DEFAULT_COMPOSITION_BUDGET);
    }

    #[test]
    fn custom_policy_exact_probabilities_stay_normalized() {
        // Dyadic renormalization keeps the rational DP on a true distribution.
        let policy = SplitPolicy::custom(&[0.2, 0.3, 0.5]).unwrap();
        let sum: BigRational = policy.exact_probs().iter().sum();
        assert!(sum.is_one());
        let t = expected_cri_table_exact(6, &policy, Variant::Corrected).unwrap();
        let f = expected_cri_table(6, &policy, Variant::Corrected).unwrap();
        for n in 0..=6 {
            assert!((rational_to_f64(&t.values[n]) - f.values[n]).abs() < 1e-9);
        }
    }
}
