//! AFL-style byte mutators.
//!
//! All randomness comes from a caller-owned [`MutRng`] and is drawn through
//! fixed-width integer ranges, so a given seed yields the same outputs on
//! every platform.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

pub type MutRng = Xoshiro256PlusPlus;

pub const DEFAULT_MAX_INPUT_LEN: usize = 4096;

const INTERESTING_8: [u8; 9] = [0, 1, 16, 32, 64, 100, 127, 128, 255];
const INTERESTING_16: [u16; 10] = [0, 128, 255, 256, 512, 1000, 1024, 4096, 32767, 65535];
const INTERESTING_32: [u32; 8] = [
    0,
    1,
    32768,
    65535,
    65536,
    100_663_045,
    2_147_483_647,
    4_294_967_295,
];

const ARITH_MAX: u32 = 35;
const MAX_INSERT: u64 = 32;

pub fn rng_from_seed(seed: u64) -> MutRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutatorKind {
    BitFlip,
    ByteFlip,
    ArithAddSub,
    InterestingSubstitute,
    DeleteSpan,
    InsertRandom,
    DuplicateSpan,
    HavocStack,
}

impl MutatorKind {
    pub const ALL: [MutatorKind; 8] = [
        MutatorKind::BitFlip,
        MutatorKind::ByteFlip,
        MutatorKind::ArithAddSub,
        MutatorKind::InterestingSubstitute,
        MutatorKind::DeleteSpan,
        MutatorKind::InsertRandom,
        MutatorKind::DuplicateSpan,
        MutatorKind::HavocStack,
    ];

    const SIMPLE: [MutatorKind; 7] = [
        MutatorKind::BitFlip,
        MutatorKind::ByteFlip,
        MutatorKind::ArithAddSub,
        MutatorKind::InterestingSubstitute,
        MutatorKind::DeleteSpan,
        MutatorKind::InsertRandom,
        MutatorKind::DuplicateSpan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutatorKind::BitFlip => "bit_flip",
            MutatorKind::ByteFlip => "byte_flip",
            MutatorKind::ArithAddSub => "arith_add_sub",
            MutatorKind::InterestingSubstitute => "interesting_substitute",
            MutatorKind::DeleteSpan => "delete_span",
            MutatorKind::InsertRandom => "insert_random",
            MutatorKind::DuplicateSpan => "duplicate_span",
            MutatorKind::HavocStack => "havoc_stack",
        }
    }
}

impl fmt::Display for MutatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn below(rng: &mut MutRng, n: usize) -> usize {
    rng.random_range(0..n as u64) as usize
}

fn pick<T: Copy>(rng: &mut MutRng, items: &[T]) -> T {
    items[below(rng, items.len())]
}

/// Output length bound for an input of `len` bytes.
pub fn output_cap(len: usize, max_len: usize) -> usize {
    (2 * len + 16).min(max_len)
}

/// Applies one uniformly chosen mutator. Empty inputs always get an
/// insertion.
pub fn mutate(input: &[u8], rng: &mut MutRng, max_len: usize) -> Vec<u8> {
    mutate_logged(input, rng, max_len).1
}

/// Like [`mutate`], also reporting which mutator was drawn.
pub fn mutate_logged(input: &[u8], rng: &mut MutRng, max_len: usize) -> (MutatorKind, Vec<u8>) {
    let kind = if input.is_empty() {
        MutatorKind::InsertRandom
    } else {
        pick(rng, &MutatorKind::ALL)
    };
    (kind, mutate_with_kind(input, kind, rng, max_len))
}

pub fn mutate_with_kind(input: &[u8], kind: MutatorKind, rng: &mut MutRng, max_len: usize) -> Vec<u8> {
    assert!(max_len >= 1, "max input length must be positive");
    let cap = output_cap(input.len(), max_len);
    let mut out = input.to_vec();
    let kind = if out.is_empty() { MutatorKind::InsertRandom } else { kind };
    if kind == MutatorKind::HavocStack {
        let ops = 1usize << rng.random_range(1..=7u32);
        for _ in 0..ops {
            let k = if out.is_empty() {
                MutatorKind::InsertRandom
            } else {
                pick(rng, &MutatorKind::SIMPLE)
            };
            apply(&mut out, k, rng, cap);
        }
    } else {
        apply(&mut out, kind, rng, cap);
    }
    if out.len() > cap {
        log::debug!("mutant truncated from {} to {} bytes", out.len(), cap);
        out.truncate(cap);
    }
    out
}

fn apply(buf: &mut Vec<u8>, kind: MutatorKind, rng: &mut MutRng, cap: usize) {
    let len = buf.len();
    match kind {
        MutatorKind::BitFlip => {
            let pos = below(rng, len);
            buf[pos] ^= 1 << rng.random_range(0..8u32);
        }
        MutatorKind::ByteFlip => {
            let pos = below(rng, len);
            buf[pos] ^= 0xff;
        }
        MutatorKind::ArithAddSub => {
            let pos = below(rng, len);
            let delta = rng.random_range(1..=ARITH_MAX) as u8;
            buf[pos] = if rng.random_bool(0.5) {
                buf[pos].wrapping_add(delta)
            } else {
                buf[pos].wrapping_sub(delta)
            };
        }
        MutatorKind::InterestingSubstitute => {
            let widths: &[usize] = match len {
                1 => &[1],
                2 | 3 => &[1, 2],
                _ => &[1, 2, 4],
            };
            let width = pick(rng, widths);
            let pos = below(rng, len - width + 1);
            let big_endian = rng.random_bool(0.5);
            let bytes: Vec<u8> = match width {
                1 => vec![pick(rng, &INTERESTING_8)],
                2 => {
                    let v = pick(rng, &INTERESTING_16);
                    if big_endian { v.to_be_bytes() } else { v.to_le_bytes() }.to_vec()
                }
                _ => {
                    let v = pick(rng, &INTERESTING_32);
                    if big_endian { v.to_be_bytes() } else { v.to_le_bytes() }.to_vec()
                }
            };
            buf[pos..pos + width].copy_from_slice(&bytes);
        }
        MutatorKind::DeleteSpan => {
            let n = 1 + below(rng, len);
            let pos = below(rng, len - n + 1);
            buf.drain(pos..pos + n);
        }
        MutatorKind::InsertRandom => {
            let room = cap.saturating_sub(len).max(1) as u64;
            let n = rng.random_range(1..=room.min(MAX_INSERT)) as usize;
            let pos = below(rng, len + 1);
            let bytes: Vec<u8> = (0..n).map(|_| rng.random_range(0..=255u32) as u8).collect();
            buf.splice(pos..pos, bytes);
        }
        MutatorKind::DuplicateSpan => {
            let n = 1 + below(rng, len);
            let from = below(rng, len - n + 1);
            let to = below(rng, len + 1);
            let span = buf[from..from + n].to_vec();
            buf.splice(to..to, span);
        }
        MutatorKind::HavocStack => unreachable!("havoc is expanded by the caller"),
    }
}
