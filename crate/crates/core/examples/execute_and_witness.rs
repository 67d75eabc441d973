//! Loads a benchmark document, runs a few inputs through the interpreter
//! and prints the crash stack of the witness.

use stackfuzz::builtin;
use stackfuzz::model::{execute, witness_stack, DEFAULT_STEP_LIMIT};

fn main() {
    // Any benchmark file works the same way: Benchmark::from_toml_str(&text).
    let b = builtin::cxxfilt_toy();
    println!("entry {}, {} statements, target {}", b.program.entry_name(), b.program.statement_count(), b.targets[0]);

    let inputs = [
        ("seed 0", b.seeds[0].clone()),
        ("seed 1", b.seeds[1].clone()),
        ("flag + digits", builtin::cxxfilt_input(true, b"12")),
        ("witness", b.witness.clone().unwrap()),
    ];
    for (label, input) in &inputs {
        let r = execute(&b.program, input, DEFAULT_STEP_LIMIT);
        let lines: Vec<String> = r.trace_locations(&b.program).iter().map(|l| l.line.to_string()).collect();
        println!(
            "{label:<14} steps {:>3}  crashed {:<5} trace lines {}",
            r.step_count,
            r.crashed,
            lines.join(",")
        );
    }

    let stack = witness_stack(&b.program, b.witness.as_ref().unwrap()).unwrap();
    println!("\nwitness crash stack, innermost first:");
    for (i, frame) in stack.iter().enumerate() {
        println!("  #{i} {frame}");
    }
}
