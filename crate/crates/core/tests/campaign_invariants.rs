use std::collections::BTreeSet;
use std::sync::Arc;

use stackfuzz::bench::synth::{directed_benchmark, SynthParams};
use stackfuzz::builtin;
use stackfuzz::campaign::{run_campaign, verify_crashes, CampaignConfig};
use stackfuzz::model::Benchmark;
use stackfuzz::predictor::{PredictorConfig, Strategy};
use stackfuzz::scheduler::DEFAULT_BASE_ENERGY;
use stackfuzz::{Location, Metric};

// Two crash sites; only the one in `deep` is the target.
const TWO_CRASHES: &str = r#"
name = "two_crashes"
entry = "main"
targets = ["t.c:21"]
seeds = ["0000"]

[functions.main]
file = "t.c"
[[functions.main.blocks]]
id = "a"
statements = [{ line = 1, kind = "crash_if", cond = "in[0] == 7" }]
terminator = { kind = "branch", cond = "in[1] == 200", then = "b", else = "c" }
[[functions.main.blocks]]
id = "b"
statements = [{ line = 2, kind = "call", callee = "deep", args = [] }]
terminator = { kind = "goto", target = "c" }
[[functions.main.blocks]]
id = "c"
statements = [{ line = 3, kind = "nop" }]
terminator = { kind = "return" }

[functions.deep]
file = "t.c"
[[functions.deep.blocks]]
id = "a"
statements = [{ line = 21, kind = "crash_if", cond = "in[0] == 9" }]
terminator = { kind = "return" }
"#;

fn runs() -> Vec<CampaignConfig> {
    let mut v = Vec::new();
    let benches = [
        builtin::cxxfilt_toy(),
        Benchmark::from_doc(&directed_benchmark(3, 0, SynthParams::default())).unwrap(),
        Benchmark::from_toml_str(TWO_CRASHES).unwrap(),
    ];
    for b in &benches {
        for metric in Metric::ALL {
            let predictor = PredictorConfig::with_strategy(Strategy::Ablation);
            let mut c = CampaignConfig::new(b, metric, predictor);
            c.budget.max_executions = 4_000;
            c.stop_on_target = false;
            c.rng_seed = 17;
            v.push(c);
        }
    }
    v
}

#[test]
fn crashes_replay_and_budget_is_respected() {
    for cfg in runs() {
        let r = run_campaign(&cfg).unwrap().report;
        verify_crashes(&cfg.program, &r, cfg.step_limit).unwrap();
        // One batch may straddle the budget; a batch is at most 16 x e0
        // base energy times the corpus size.
        let slack = 16 * DEFAULT_BASE_ENERGY * r.corpus_size as u64;
        assert!(r.executions >= cfg.budget.max_executions, "{} {}", cfg.name, cfg.metric);
        assert!(r.executions <= cfg.budget.max_executions + slack, "{} {}", cfg.name, cfg.metric);
        assert_eq!(r.corpus_size_over_time.last().map(|p| p.1), Some(r.corpus_size));
    }
}

#[test]
fn other_crashes_are_kept_and_do_not_stop_the_run() {
    let b = Benchmark::from_toml_str(TWO_CRASHES).unwrap();
    let mut cfg = CampaignConfig::new(&b, Metric::Afl, PredictorConfig::default());
    cfg.budget.max_executions = 50_000;
    let r = run_campaign(&cfg).unwrap().report;
    let locs: BTreeSet<Location> = r.crashes.iter().map(|c| c.location.clone()).collect();
    assert!(locs.contains(&Location::new("t.c", 1)), "{locs:?}");
    assert!(r.crashes.iter().any(|c| !c.target));
    if r.target_hit {
        let last = r.crashes.last().unwrap();
        assert!(last.target);
        assert_eq!(Some(last.execution), r.tte_executions);
        assert_eq!(r.executions, last.execution);
    }
}

#[test]
fn shared_program_across_threads() {
    let b = builtin::cxxfilt_toy();
    let program = Arc::new(b.program.clone());
    let handles: Vec<_> = (0..4)
        .map(|seed| {
            let mut cfg = CampaignConfig::new(&b, Metric::Staczzer, PredictorConfig::default());
            cfg.program = program.clone();
            cfg.rng_seed = seed;
            std::thread::spawn(move || run_campaign(&cfg).unwrap().report)
        })
        .collect();
    for (seed, h) in handles.into_iter().enumerate() {
        let r = h.join().unwrap();
        let mut cfg = CampaignConfig::new(&b, Metric::Staczzer, PredictorConfig::default());
        cfg.rng_seed = seed as u64;
        assert_eq!(run_campaign(&cfg).unwrap().report, r);
    }
}
