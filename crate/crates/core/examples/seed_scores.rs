//! Scores the two initial seeds of the cxxfilt fragment under every metric
//! and shows which one each scheduler would mutate first.

use stackfuzz::builtin;
use stackfuzz::callgraph::build_call_graph;
use stackfuzz::distance::TraceScorer;
use stackfuzz::model::{execute, DEFAULT_STEP_LIMIT};
use stackfuzz::predictor::{predict, PredictorConfig};
use stackfuzz::scheduler::{assign_energy, choose_seed, CorpusView, Seed};
use stackfuzz::Metric;

fn main() {
    let b = builtin::cxxfilt_toy();
    let target = &b.targets[0];
    let cg = build_call_graph(&b.program);
    let stack = predict(&PredictorConfig::default(), &b.program, b.witness.as_deref(), &cg, target)
        .expect("oracle")
        .stack
        .as_set();

    println!("{:<11} {:>8} {:>8}  first  energies", "metric", "s0", "s1");
    for metric in Metric::ALL {
        let scorer = TraceScorer::new(metric, &b.program, target, &stack);
        let mut view = CorpusView::new(metric);
        for (id, input) in b.seeds.iter().enumerate() {
            let result = execute(&b.program, input, DEFAULT_STEP_LIMIT);
            let score = scorer.score(&result.trace);
            view.push(Seed { id: id as u64, input: input.clone(), result, score, discovery_step: 0 });
        }
        let energies: Vec<u64> = view.seeds.iter().map(|s| assign_energy(&view, s)).collect();
        let (a, b1) = (view.seeds[0].score, view.seeds[1].score);
        let first = choose_seed(&mut view);
        println!("{metric:<11} {:>8} {:>8}  s{first}     {energies:?}", fmt(a.value()), fmt(b1.value()));
    }
}

fn fmt(v: f64) -> String {
    if v.fract() == 0.0 { format!("{v}") } else { format!("{v:.4}") }
}
