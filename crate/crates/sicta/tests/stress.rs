//! Termination statistics for tree generation. Depth excursions past the
//! default bound are theoretically possible but should never be observed;
//! this logs them rather than asserting, and is ignored by default because
//! of its runtime (minutes). Run with:
//!
//! ```text
//! cargo test -p sicta --test stress -- --ignored --nocapture
//! ```

use rayon::prelude::*;

use sicta::montecarlo::run_seed;
use sicta::policy::SplitPolicy;
use sicta::tree::{SplitTree, DEFAULT_MAX_DEPTH};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
#[ignore = "long-running statistical check"]
fn depth_bound_unreached_in_a_million_trees() {
    let trees: u64 = 1_000_000;
    let failures: u64 = (0..trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(0xDEE9, i));
            let d = rng.random_range(2..=5usize);
            let n = rng.random_range(0..=1000u32);
            let policy = if rng.random::<bool>() {
                SplitPolicy::fair(d).unwrap()
            } else {
                SplitPolicy::biased(d).unwrap()
            };
            u64::from(SplitTree::generate(n, &policy, &mut rng, DEFAULT_MAX_DEPTH).is_err())
        })
        .sum();
    // Logged, not asserted: a depth excursion here is a statistical event
    // worth investigating, not a correctness failure by itself.
    println!("depth-exceeded errors: {failures} / {trees} trees at max_depth={DEFAULT_MAX_DEPTH}");
}
