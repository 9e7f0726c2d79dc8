//! Splitting policies and multinomial group assignment.
//!
//! A policy is the splitting factor `d` together with the probability vector
//! `p_1..p_d` a colliding user draws its group from. Policies are immutable
//! values; sampling mutates only the caller's random stream.

use num::{BigInt, BigRational};
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on |sum(p_j) - 1| accepted by [`SplitPolicy::custom`].
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// How a policy was constructed; used for labeling output rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyForm {
    Fair,
    Biased,
    Custom,
}

impl PolicyForm {
    pub fn label(self) -> &'static str {
        match self {
            PolicyForm::Fair => "fair",
            PolicyForm::Biased => "biased",
            PolicyForm::Custom => "custom",
        }
    }
}

/// A validated d-ary splitting policy.
///
/// Invariants: `d >= 2`, all probabilities non-negative and summing to 1
/// (within [`PROB_SUM_TOLERANCE`]), and at least two strictly positive
/// entries — with fewer, a collision among users in the same group could
/// never split and the recursion would not terminate.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPolicy {
    form: PolicyForm,
    probs: Vec<f64>,
    /// Exact rational probabilities, used by the exact-expectation tables.
    /// For custom policies these are the dyadic values of the given floats,
    /// normalized so they sum to exactly 1.
    exact: Vec<BigRational>,
    /// Cumulative sums of `probs`, for categorical sampling.
    cumulative: Vec<f64>,
    /// Largest group index with positive probability (sampling fallback).
    last_positive: usize,
}

impl SplitPolicy {
    /// Fair splitting: every group chosen with probability 1/d.
    pub fn fair(d: usize) -> Result<Self> {
        check_d(d)?;
        let probs = vec![1.0 / d as f64; d];
        let exact = vec![ratio(1, d as i64); d];
        Ok(Self::assemble(PolicyForm::Fair, probs, exact))
    }

    /// Geometric biased splitting: `p_j = 0.5^j` for `j < d`, `p_d = 0.5^(d-1)`.
    ///
    /// The probabilities sum to 1 exactly; at `d = 2` the policy reduces to
    /// fair splitting.
    pub fn biased(d: usize) -> Result<Self> {
        check_d(d)?;
        let mut probs = Vec::with_capacity(d);
        let mut exact = Vec::with_capacity(d);
        for j in 1..=d {
            let exp = if j < d { j } else { d - 1 } as i32;
            probs.push(0.5f64.powi(exp));
            exact.push(ratio(1, 1i64 << exp));
        }
        Ok(Self::assemble(PolicyForm::Biased, probs, exact))
    }

    /// Arbitrary probability vector, validated against the policy invariants.
    ///
    /// Zero entries are permitted (groups that are never chosen); at least
    /// two entries must be strictly positive.
    pub fn custom(probs: &[f64]) -> Result<Self> {
        check_d(probs.len())?;
        for (j, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPolicy(format!(
                    "probability for group {} is {}; must be finite and >= 0",
                    j + 1,
                    p
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidPolicy(format!(
                "probabilities sum to {sum}, not 1 (tolerance {PROB_SUM_TOLERANCE})"
            )));
        }
        let positive = probs.iter().filter(|&&p| p > 0.0).count();
        if positive < 2 {
            return Err(Error::InvalidPolicy(format!(
                "only {positive} group(s) have positive probability; at least two are \
                 required or the splitting recursion never terminates"
            )));
        }
        // Dyadic rationals of the given floats, renormalized to sum to 1
        // exactly so the rational tables see a true distribution.
        let dyadic: Vec<BigRational> = probs
            .iter()
            .map(|&p| BigRational::from_float(p).expect("finite float"))
            .collect();
        let total: BigRational = dyadic.iter().sum();
        let exact = dyadic.into_iter().map(|p| p / &total).collect();
        Ok(Self::assemble(PolicyForm::Custom, probs.to_vec(), exact))
    }

    fn assemble(form: PolicyForm, probs: Vec<f64>, exact: Vec<BigRational>) -> Self {
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        let last_positive = probs
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("validated policy has positive entries");
        Self {
            form,
            probs,
            exact,
            cumulative,
            last_positive,
        }
    }

    /// Splitting factor (number of groups).
    pub fn d(&self) -> usize {
        self.probs.len()
    }

    /// Group-selection probabilities `p_1..p_d`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Exact rational probabilities (sum to 1 exactly).
    pub fn exact_probs(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn form(&self) -> PolicyForm {
        self.form
    }

    pub fn label(&self) -> &'static str {
        self.form.label()
    }

    /// Assign `n` users to groups: `n` independent categorical draws.
    ///
    /// The resulting occupancy vector is multinomial with parameters
    /// `(n, probs)` and always sums to exactly `n`.
    pub fn sample_split<R: Rng + ?Sized>(&self, n: u32, rng: &mut R) -> Occupancy {
        let mut counts = vec![0u32; self.d()];
        for _ in 0..n {
            counts[self.pick(rng.random::<f64>())] += 1;
        }
        Occupancy { counts }
    }

    /// Map a uniform draw in [0,1) to a group index (0-based).
    fn pick(&self, u: f64) -> usize {
        for (j, &c) in self.cumulative.iter().enumerate() {
            if u < c {
                return j;
            }
        }
        // u fell past the last cumulative value (floating-point shortfall);
        // attribute it to the last group that can actually be chosen.
        self.last_positive
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidPolicy(format!(
            "splitting factor must satisfy d >= 2, got d={d}"
        )));
    }
    Ok(())
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Occupancy of the d groups after one split: `I_1..I_d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occupancy {
    counts: Vec<u32>,
}

impl Occupancy {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}
