//! Generated benchmarks: a gated call chain down to a crash, next to a
//! decoy scanner whose branches yield many distinct traces.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::model::doc::{BlockDoc, BenchmarkDoc, FunctionDoc, StatementDoc, TerminatorDoc};
use crate::mutate::{rng_from_seed, MutRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    /// Functions in the chain below `main`; the last one holds the target.
    pub depth: usize,
    /// Independent decoy branches, each on its own input byte.
    pub decoy_width: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            depth: 4,
            decoy_width: 10,
        }
    }
}

struct Lines {
    next: u32,
}

impl Lines {
    fn take(&mut self) -> u32 {
        self.next += 1;
        self.next
    }
}

fn block(id: impl Into<String>, statements: Vec<StatementDoc>, terminator: TerminatorDoc) -> BlockDoc {
    BlockDoc {
        id: id.into(),
        statements,
        terminator,
    }
}

fn goto(t: impl Into<String>) -> TerminatorDoc {
    TerminatorDoc::Goto { target: t.into() }
}

fn branch(cond: String, then: impl Into<String>, otherwise: impl Into<String>) -> TerminatorDoc {
    TerminatorDoc::Branch {
        cond,
        then: then.into(),
        otherwise: otherwise.into(),
    }
}

fn magic(rng: &mut MutRng) -> u8 {
    rng.random_range(0x21..=0x7eu32) as u8
}

/// Builds benchmark number `index` of a suite generated from `seed`.
///
/// Input layout: byte 0 gates the call from `main`, byte `i` gates the
/// call out of chain function `i`, bytes `depth` and `depth + 1` guard the
/// crash in the chain's last function, and the rest feed the decoy.
pub fn directed_benchmark(seed: u64, index: usize, params: SynthParams) -> BenchmarkDoc {
    let mut rng = rng_from_seed(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let name = format!("synth{index:02}");
    let file = format!("{name}.c");
    let mut lines = Lines { next: 0 };
    let mut functions = BTreeMap::new();
    let gates: Vec<u8> = (0..=params.depth).map(|_| magic(&mut rng)).collect();
    let chain: Vec<String> = (1..=params.depth).map(|i| format!("level{i}")).collect();

    let decoy_base = params.depth + 2;
    let mut scan_blocks = Vec::new();
    for j in 0..params.decoy_width {
        let threshold = rng.random_range(0x30..0xd0u32);
        let next = if j + 1 == params.decoy_width {
            "done".to_string()
        } else {
            format!("probe{}", j + 1)
        };
        scan_blocks.push(block(
            format!("probe{j}"),
            vec![StatementDoc::Nop { line: lines.take() }],
            branch(format!("in[{}] > {threshold}", decoy_base + j), format!("hit{j}"), next.clone()),
        ));
        scan_blocks.push(block(
            format!("hit{j}"),
            vec![StatementDoc::Assign {
                line: lines.take(),
                var: "seen".into(),
                expr: format!("seen + {}", j + 1),
            }],
            goto(next),
        ));
    }
    scan_blocks.push(block(
        "done",
        vec![StatementDoc::Nop { line: lines.take() }],
        TerminatorDoc::Return,
    ));
    functions.insert(
        "scan".to_string(),
        FunctionDoc {
            file: file.clone(),
            params: vec![],
            entry_block: None,
            source: vec![],
            blocks: scan_blocks,
        },
    );

    for (i, f) in chain.iter().enumerate() {
        let level = i + 1;
        let blocks = if level == params.depth {
            vec![
                block(
                    "check",
                    vec![StatementDoc::Nop { line: lines.take() }],
                    branch(format!("in[p] == {}", gates[level] - 1), "copy", "tail"),
                ),
                block(
                    "copy",
                    vec![StatementDoc::CrashIf {
                        line: lines.take(),
                        cond: format!("in[p + 1] >= {}", gates[level]),
                    }],
                    goto("tail"),
                ),
                block("tail", vec![StatementDoc::Nop { line: lines.take() }], TerminatorDoc::Return),
            ]
        } else {
            vec![
                block(
                    "check",
                    vec![StatementDoc::Nop { line: lines.take() }],
                    branch(format!("in[p] == {}", gates[level]), "descend", "tail"),
                ),
                block(
                    "descend",
                    vec![StatementDoc::Call {
                        line: lines.take(),
                        callee: chain[i + 1].clone(),
                        args: vec!["p + 1".into()],
                    }],
                    goto("tail"),
                ),
                block("tail", vec![StatementDoc::Nop { line: lines.take() }], TerminatorDoc::Return),
            ]
        };
        functions.insert(
            f.clone(),
            FunctionDoc {
                file: file.clone(),
                params: vec!["p".into()],
                entry_block: None,
                source: vec![],
                blocks,
            },
        );
    }

    let main_blocks = vec![
        block(
            "start",
            vec![StatementDoc::Call {
                line: lines.take(),
                callee: "scan".into(),
                args: vec![],
            }],
            branch(format!("in[0] == {}", gates[0]), "enter", "tail"),
        ),
        block(
            "enter",
            vec![StatementDoc::Call {
                line: lines.take(),
                callee: chain[0].clone(),
                args: vec!["1".into()],
            }],
            goto("tail"),
        ),
        block("tail", vec![StatementDoc::Nop { line: lines.take() }], TerminatorDoc::Return),
    ];
    functions.insert(
        "main".to_string(),
        FunctionDoc {
            file: file.clone(),
            params: vec![],
            entry_block: None,
            source: vec![],
            blocks: main_blocks,
        },
    );

    let target_line = {
        let f = &functions[chain.last().unwrap()];
        match f.blocks[1].statements[0] {
            StatementDoc::CrashIf { line, .. } => line,
            _ => unreachable!(),
        }
    };

    let input_len = decoy_base + params.decoy_width;
    let mut witness: Vec<u8> = gates[..params.depth].to_vec();
    witness.push(gates[params.depth] - 1);
    witness.push(gates[params.depth]);
    witness.resize(input_len, b'.');
    let seeds: Vec<String> = (0..2)
        .map(|_| {
            let s: Vec<u8> = (0..input_len)
                .map(|_| loop {
                    let b = magic(&mut rng);
                    if !gates.contains(&b) {
                        break b;
                    }
                })
                .collect();
            hex::encode(s)
        })
        .collect();

    BenchmarkDoc {
        name: Some(name),
        entry: "main".into(),
        targets: vec![format!("{file}:{target_line}")],
        witness: Some(hex::encode(witness)),
        seeds,
        vfg_edges: None,
        functions,
    }
}

/// `count` benchmarks from one seed.
pub fn directed_suite(seed: u64, count: usize, params: SynthParams) -> Vec<BenchmarkDoc> {
    (0..count).map(|i| directed_benchmark(seed, i, params)).collect()
}

/// Writes the benchmarks plus a `suite.toml` comparing `configs` into
/// `dir` and returns the suite file path.
pub fn write_directed_suite(
    dir: &Path,
    seed: u64,
    count: usize,
    params: SynthParams,
    configs: &[&str],
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for doc in directed_suite(seed, count, params) {
        let file = format!("{}.toml", doc.name.as_deref().unwrap_or("synth"));
        fs::write(dir.join(&file), doc.to_toml_string())?;
        names.push(format!("{file:?}"));
    }
    let configs: Vec<String> = configs.iter().map(|c| format!("{c:?}")).collect();
    let suite = format!(
        "benchmarks = [{}]\nconfigs = [{}]\nrng_seed = {seed}\n",
        names.join(", "),
        configs.join(", ")
    );
    let path = dir.join("suite.toml");
    fs::write(&path, suite)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{execute, witness_stack, Benchmark};

    #[test]
    fn generated_benchmarks_load_and_witness_crashes_at_target() {
        for i in 0..12 {
            let doc = directed_benchmark(5, i, SynthParams::default());
            let b = Benchmark::from_doc(&doc).unwrap();
            let stack = witness_stack(&b.program, b.witness.as_ref().unwrap()).unwrap();
            assert_eq!(stack[0], b.targets[0]);
            assert_eq!(stack.len(), SynthParams::default().depth + 1);
            for s in &b.seeds {
                assert!(!execute(&b.program, s, 10_000).crashed);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_toml_round_trips() {
        let a = directed_benchmark(1, 3, SynthParams::default());
        assert_eq!(a, directed_benchmark(1, 3, SynthParams::default()));
        let text = a.to_toml_string();
        let b = Benchmark::from_toml_str(&text).unwrap();
        assert_eq!(b.name, "synth03");
    }
}
