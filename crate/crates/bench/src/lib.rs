//! Shared fixtures for the solver benchmarks.

use ssmusic_core::harness::{generate_problem, EnsembleSpec};
use ssmusic_core::JsrProblem;

/// Benchmark ensembles as `(label, m, K, N)`: full rank, the standard
/// rank-defective case and the minimal-measurement case.
pub const CASES: [(&str, usize, usize, usize); 3] = [
    ("full_rank_21_20_20", 21, 20, 20),
    ("defective_40_30_20", 40, 30, 20),
    ("minimal_31_30_20", 31, 30, 20),
];

/// A fixed noiseless instance with `n = 100`.
pub fn fixture(m: usize, k: usize, big_n: usize, seed: u64) -> JsrProblem {
    generate_problem(&EnsembleSpec::new(m, k, big_n, 1, seed), 0).expect("valid benchmark ensemble")
}
