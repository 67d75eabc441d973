//! Runs each predictor strategy on the cxxfilt fragment. The llm strategy
//! only runs when STACKFUZZ_ENDPOINT and STACKFUZZ_MODEL are set.

use stackfuzz::builtin;
use stackfuzz::callgraph::{build_call_graph, reachable_functions};
use stackfuzz::predictor::{parse_response, predict, PredictorConfig, Strategy};
use stackfuzz::Location;

fn main() {
    let b = builtin::cxxfilt_toy();
    let target = &b.targets[0];
    let cg = build_call_graph(&b.program);

    let mut configs = vec![
        PredictorConfig::with_strategy(Strategy::Oracle),
        PredictorConfig::with_strategy(Strategy::Ablation),
    ];
    let mut mock = PredictorConfig::with_strategy(Strategy::Mock);
    mock.mock_script = Some(["cxxfilt.c:11", "cxxfilt.c:26", "cxxfilt.c:35"].map(|s| s.parse().unwrap()).to_vec());
    configs.push(mock);
    if let (Ok(url), Ok(model)) = (std::env::var("STACKFUZZ_ENDPOINT"), std::env::var("STACKFUZZ_MODEL")) {
        let mut llm = PredictorConfig::with_strategy(Strategy::Llm);
        llm.endpoint_url = Some(url);
        llm.model_name = Some(model);
        configs.push(llm);
    }

    for cfg in &configs {
        match predict(cfg, &b.program, b.witness.as_deref(), &cg, target) {
            Ok(p) => {
                let frames: Vec<String> = p.stack.frames().iter().map(Location::to_string).collect();
                println!("{:<9} {:?} {}", cfg.strategy.name(), p.stack.kind(), frames.join(" "));
                for w in p.warnings {
                    println!("          warning: {w}");
                }
            }
            Err(e) => println!("{:<9} error: {e}", cfg.strategy.name()),
        }
    }

    // What the parser makes of a chatty, incomplete answer.
    let reachable = reachable_functions(&cg, "gnu_special").unwrap();
    let raw = "Sure! The stack is:\ncxxfilt.c:21\ncxxfilt.c:35\n";
    let (stack, warnings) = parse_response(raw, &b.program, &cg, &reachable, target).unwrap();
    println!("\nparsed:\n{}warnings: {warnings:?}", stack.render());
}
