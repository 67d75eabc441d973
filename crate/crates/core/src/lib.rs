//! Directed greybox fuzzing driven by predicted target call stacks.
//!
//! Programs under test are deterministic interpreted models
//! ([`model::TargetProgram`]) loaded from TOML benchmark documents. On top of
//! the executor sit the static views the schedulers consume (call graph,
//! control and value flow graphs), the stack predictors, the seed scheduler,
//! an AFL-style mutator, the fuzzing loop, and a benchmark harness that
//! compares fuzzer configurations by median time-to-exposure.
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run -p stackfuzz --example seed_scores
//! cargo run -p stackfuzz --example execute_and_witness
//! cargo run -p stackfuzz --example slice_and_prompt
//! cargo run -p stackfuzz --example predict_stack
//! cargo run -p stackfuzz --example mutators
//! cargo run -p stackfuzz --example campaign
//! cargo run -p stackfuzz --release --example suite
//! ```

pub mod bench;
pub mod builtin;
pub mod callgraph;
pub mod campaign;
pub mod distance;
pub mod error;
pub mod location;
pub mod model;
pub mod mutate;
pub mod predictor;
pub mod scheduler;

pub use callgraph::{build_call_graph, reachable_functions, render_slice, CallGraph, CodeSlice};
pub use campaign::{run_campaign, triage, CampaignConfig, CampaignReport, Triage};
pub use distance::{Metric, ScoreValue};
pub use error::{BenchError, CampaignError, ExecError, GraphError, LoadError, PredictError};
pub use location::Location;
pub use model::{execute, load_program, witness_stack, Benchmark, ExecutionResult, TargetProgram};
pub use predictor::{predict, PredictedStack, PredictorConfig, Strategy};
