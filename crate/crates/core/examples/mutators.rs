//! Applies each mutation operator to one input, then shows a short
//! stream of havoc mutations with the operator that produced each.

use stackfuzz::mutate::{mutate_logged, mutate_with_kind, rng_from_seed, MutatorKind, DEFAULT_MAX_INPUT_LEN};

fn main() {
    let input = b"HELLO, fuzz";
    let mut rng = rng_from_seed(42);
    for kind in MutatorKind::ALL {
        let out = mutate_with_kind(input, kind, &mut rng, DEFAULT_MAX_INPUT_LEN);
        println!("{:<22} {}", kind.name(), String::from_utf8_lossy(&out).escape_debug());
    }
    println!();
    let mut rng = rng_from_seed(7);
    let mut cur = input.to_vec();
    for _ in 0..8 {
        let (kind, out) = mutate_logged(&cur, &mut rng, 32);
        println!("{:<22} {}", kind.name(), hex::encode(&out));
        cur = out;
    }
}
