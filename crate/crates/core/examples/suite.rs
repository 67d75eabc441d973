//! Generates a small synthetic suite, runs the stack-overlap fuzzer
//! against uniform scheduling, and prints the comparison table.
//! Arguments: [benchmarks] [repetitions]; run with --release.

use stackfuzz::bench::suite::{run_suite, SuiteConfig};
use stackfuzz::bench::synth::{write_directed_suite, SynthParams};

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let count = args.next().unwrap_or(4);
    let reps = args.next().unwrap_or(5) as u32;

    let dir = std::env::temp_dir().join("stackfuzz-suite-example");
    let suite = write_directed_suite(&dir, 1, count, SynthParams::default(), &["staczzer:oracle", "afl", "aflgo"]).unwrap();
    let mut cfg = SuiteConfig::load(&suite).unwrap();
    cfg.repetitions = reps;
    cfg.output_dir = Some(dir.join("results"));
    let result = run_suite(&cfg).unwrap();
    print!("{}", result.render_table());
    println!("results and campaign reports in {}", dir.join("results").display());
}
