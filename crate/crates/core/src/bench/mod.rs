//! Repeated campaigns over benchmark suites and their statistical
//! comparison.

pub mod stats;
pub mod suite;
pub mod synth;

pub use stats::{compare_outcomes, median_tte, sign_test, MedianTte, PairOutcome, Tally, Verdict};
pub use suite::{run_suite, Comparison, FuzzerConfig, RunRecord, SuiteConfig, SuiteResult};
