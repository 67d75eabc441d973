//! Builds the call graph, slices the functions that can reach the target
//! and renders the prompt sent to a language model.

use stackfuzz::builtin;
use stackfuzz::callgraph::{build_call_graph, reachable_functions, render_slice};
use stackfuzz::predictor::build_prompt;

fn main() {
    let b = builtin::cxxfilt_toy();
    let target = &b.targets[0];
    let cg = build_call_graph(&b.program);
    for e in &cg.edges {
        println!("call {} -> {} at {}", e.caller, e.callee, e.site);
    }
    let reachable = reachable_functions(&cg, "gnu_special").unwrap();
    println!("functions reaching gnu_special: {reachable:?}\n");

    let slice = render_slice(&b.program, &cg, &reachable, target).unwrap();
    let prompt = build_prompt(&slice, target, "gnu_special");
    println!("{}", prompt.text());
}
