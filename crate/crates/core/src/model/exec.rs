//! Deterministic interpreter for [`TargetProgram`]s.

use std::collections::BTreeSet;

use super::expr::EvalCtx;
use super::{StatementKind, StmtId, TargetProgram, Terminator};
use crate::error::ExecError;
use crate::location::Location;

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

/// Set of executed statements, stored as a bitset over statement ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Trace {
    words: Vec<u64>,
}

impl Trace {
    pub fn with_capacity(statements: usize) -> Self {
        Trace {
            words: vec![0; statements.div_ceil(64)],
        }
    }

    fn insert(&mut self, id: StmtId) {
        let i = id.index();
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, id: StmtId) -> bool {
        let i = id.index();
        self.words
            .get(i / 64)
            .is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = StmtId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64)
                .filter(move |b| w & (1u64 << b) != 0)
                .map(move |b| StmtId((wi * 64 + b) as u32))
        })
    }

    pub fn locations(&self, program: &TargetProgram) -> BTreeSet<Location> {
        self.iter().map(|id| program.location(id).clone()).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub trace: Trace,
    pub crashed: bool,
    pub crash_location: Option<Location>,
    /// Innermost first: the crash location, then each pending call site.
    pub crash_stack: Option<Vec<Location>>,
    pub step_count: u64,
    /// Step limit exhausted before the program finished; `step_count` then
    /// equals the limit.
    pub hang: bool,
}

impl ExecutionResult {
    pub fn trace_locations(&self, program: &TargetProgram) -> BTreeSet<Location> {
        self.trace.locations(program)
    }
}

struct Frame {
    func: usize,
    block: usize,
    pc: usize,
    vars: Vec<i64>,
    call_site: Option<StmtId>,
}

/// Runs `program` on `input` for at most `step_limit` steps.
///
/// Each statement and each terminator costs one step. A `crash_if` whose
/// condition holds stops execution and records the live call chain.
pub fn execute(program: &TargetProgram, input: &[u8], step_limit: u64) -> ExecutionResult {
    let mut trace = Trace::with_capacity(program.statement_count());
    let entry = program.entry();
    let mut stack = vec![Frame {
        func: entry,
        block: program.function(entry).entry_block,
        pc: 0,
        vars: vec![0; program.function(entry).slots.len()],
        call_site: None,
    }];
    let mut steps = 0u64;

    loop {
        if steps >= step_limit {
            return ExecutionResult {
                trace,
                crashed: false,
                crash_location: None,
                crash_stack: None,
                step_count: step_limit,
                hang: true,
            };
        }
        steps += 1;
        let frame = stack.last_mut().expect("stack is non-empty while running");
        let func = program.function(frame.func);
        let block = &func.blocks[frame.block];

        if let Some(stmt) = block.statements.get(frame.pc) {
            frame.pc += 1;
            trace.insert(stmt.id);
            match &stmt.kind {
                StatementKind::Nop => {}
                StatementKind::Assign { slot, expr, .. } => {
                    let v = expr.eval(&EvalCtx {
                        input,
                        vars: &frame.vars,
                    });
                    frame.vars[*slot] = v;
                }
                StatementKind::CrashIf(cond) => {
                    let hit = cond.eval(&EvalCtx {
                        input,
                        vars: &frame.vars,
                    }) != 0;
                    if hit {
                        let mut crash_stack = vec![stmt.location.clone()];
                        crash_stack.extend(
                            stack
                                .iter()
                                .rev()
                                .filter_map(|f| f.call_site)
                                .map(|id| program.location(id).clone()),
                        );
                        return ExecutionResult {
                            trace,
                            crashed: true,
                            crash_location: Some(stmt.location.clone()),
                            crash_stack: Some(crash_stack),
                            step_count: steps,
                            hang: false,
                        };
                    }
                }
                StatementKind::Call {
                    callee_id, args, ..
                } => {
                    let callee = program.function(*callee_id);
                    let mut vars = vec![0; callee.slots.len()];
                    let ctx = EvalCtx {
                        input,
                        vars: &frame.vars,
                    };
                    for (slot, arg) in vars.iter_mut().zip(args) {
                        *slot = arg.eval(&ctx);
                    }
                    let call_site = Some(stmt.id);
                    stack.push(Frame {
                        func: *callee_id,
                        block: callee.entry_block,
                        pc: 0,
                        vars,
                        call_site,
                    });
                }
            }
            continue;
        }

        match &block.terminator {
            Terminator::Goto(t) => {
                frame.block = *t;
                frame.pc = 0;
            }
            Terminator::Branch {
                cond,
                then_block,
                else_block,
            } => {
                let taken = cond.eval(&EvalCtx {
                    input,
                    vars: &frame.vars,
                }) != 0;
                frame.block = if taken { *then_block } else { *else_block };
                frame.pc = 0;
            }
            Terminator::Return => {
                stack.pop();
                if stack.is_empty() {
                    return ExecutionResult {
                        trace,
                        crashed: false,
                        crash_location: None,
                        crash_stack: None,
                        step_count: steps,
                        hang: false,
                    };
                }
            }
        }
    }
}

/// Call stack captured when the witness input crashes the program.
pub fn witness_stack(program: &TargetProgram, witness: &[u8]) -> Result<Vec<Location>, ExecError> {
    execute(program, witness, DEFAULT_STEP_LIMIT)
        .crash_stack
        .ok_or(ExecError::WitnessDoesNotCrash)
}
