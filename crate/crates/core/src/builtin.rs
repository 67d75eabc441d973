//! Benchmarks shipped with the crate.

use std::collections::BTreeSet;

use crate::location::Location;
use crate::model::Benchmark;

/// The cxxfilt demangler fragment around CVE-2016-4489.
pub const CXXFILT_TOY: &str = include_str!("../benchmarks/cxxfilt_toy.toml");

pub fn cxxfilt_toy() -> Benchmark {
    Benchmark::from_toml_str(CXXFILT_TOY).expect("built-in benchmark is valid")
}

/// Encodes the two input channels of `cxxfilt_toy`: byte 0 carries the
/// boolean, the remaining bytes the mangled string.
pub fn cxxfilt_input(flag: bool, mangled: &[u8]) -> Vec<u8> {
    let mut v = Vec::with_capacity(mangled.len() + 1);
    v.push(flag as u8);
    v.extend_from_slice(mangled);
    v
}

/// The 18 numbered statement nodes of the fragment's control flow graph;
/// the `...` placeholder lines are excluded.
pub fn cxxfilt_labelled_lines() -> BTreeSet<Location> {
    [33, 34, 35, 17, 18, 19, 20, 21, 24, 25, 26, 4, 5, 6, 7, 8, 9, 11]
        .into_iter()
        .map(|l| Location::new("cxxfilt.c", l))
        .collect()
}

/// Looks up a shipped benchmark by name.
pub fn by_name(name: &str) -> Option<Benchmark> {
    match name {
        "cxxfilt_toy" => Some(cxxfilt_toy()),
        _ => None,
    }
}
