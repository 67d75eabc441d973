//! Simulated program representation.
//!
//! A [`TargetProgram`] is a set of functions made of basic blocks of
//! statements. Every statement sits on its own source [`Location`]; calls,
//! crash points and plain computation are statements, control flow lives in
//! block terminators.

pub mod doc;
pub mod exec;
pub mod expr;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::LoadError;
use crate::location::Location;

pub use doc::BenchmarkDoc;
pub use exec::{execute, witness_stack, ExecutionResult, Trace, DEFAULT_STEP_LIMIT};
pub use expr::{parse_expr, Expr};

/// Dense index of a statement within its program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtId(pub u32);

impl StmtId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of a function within its program (functions are sorted by name).
pub type FuncId = usize;

#[derive(Debug, Clone)]
pub enum StatementKind {
    Assign {
        var: String,
        slot: usize,
        expr: Expr,
    },
    Call {
        callee: String,
        callee_id: FuncId,
        args: Vec<Expr>,
    },
    CrashIf(Expr),
    Nop,
}

#[derive(Debug, Clone)]
pub struct Statement {
    pub id: StmtId,
    pub location: Location,
    pub kind: StatementKind,
    pub uses: BTreeSet<String>,
    pub defs: Option<String>,
}

impl Statement {
    pub fn callee(&self) -> Option<&str> {
        match &self.kind {
            StatementKind::Call { callee, .. } => Some(callee),
            _ => None,
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StatementKind::Assign { var, expr, .. } => write!(f, "{var} = {expr};"),
            StatementKind::Call { callee, args, .. } => {
                write!(f, "{callee}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(");")
            }
            StatementKind::CrashIf(cond) => write!(f, "if ({cond}) crash();"),
            StatementKind::Nop => f.write_str(";"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Terminator {
    Goto(usize),
    Branch {
        cond: Expr,
        then_block: usize,
        else_block: usize,
    },
    Return,
}

impl Terminator {
    pub fn successors(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match self {
            Terminator::Goto(t) => (Some(*t), None),
            Terminator::Branch {
                then_block,
                else_block,
                ..
            } => (Some(*then_block), Some(*else_block)),
            Terminator::Return => (None, None),
        };
        a.into_iter().chain(b)
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub id: String,
    pub statements: Vec<Statement>,
    pub terminator: Terminator,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub file: String,
    pub params: Vec<String>,
    pub blocks: Vec<Block>,
    pub entry_block: usize,
    /// Local variable names; index = slot. Parameters come first.
    pub slots: Vec<String>,
}

impl Function {
    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.blocks.iter().flat_map(|b| b.statements.iter())
    }
}

#[derive(Debug, Clone, Copy)]
struct StmtPos {
    func: FuncId,
    block: usize,
    index: usize,
}

/// A validated program model.
#[derive(Debug, Clone)]
pub struct TargetProgram {
    functions: Vec<Function>,
    by_name: HashMap<String, FuncId>,
    entry: FuncId,
    positions: Vec<StmtPos>,
    locations: Vec<Location>,
    by_location: HashMap<Location, StmtId>,
    source_text: BTreeMap<String, Vec<(Location, String)>>,
    vfg_override: Option<Vec<(Location, Location)>>,
}

impl TargetProgram {
    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn function(&self, id: FuncId) -> &Function {
        &self.functions[id]
    }

    pub fn function_id(&self, name: &str) -> Option<FuncId> {
        self.by_name.get(name).copied()
    }

    pub fn function_by_name(&self, name: &str) -> Option<&Function> {
        self.function_id(name).map(|id| &self.functions[id])
    }

    pub fn entry(&self) -> FuncId {
        self.entry
    }

    pub fn entry_name(&self) -> &str {
        &self.functions[self.entry].name
    }

    pub fn statement_count(&self) -> usize {
        self.locations.len()
    }

    pub fn statement(&self, id: StmtId) -> &Statement {
        let p = self.positions[id.index()];
        &self.functions[p.func].blocks[p.block].statements[p.index]
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.functions.iter().flat_map(Function::statements)
    }

    pub fn location(&self, id: StmtId) -> &Location {
        &self.locations[id.index()]
    }

    pub fn statement_id(&self, loc: &Location) -> Option<StmtId> {
        self.by_location.get(loc).copied()
    }

    /// Function containing the statement at `loc`.
    pub fn function_of(&self, loc: &Location) -> Option<FuncId> {
        self.statement_id(loc)
            .map(|id| self.positions[id.index()].func)
    }

    pub fn function_of_id(&self, id: StmtId) -> FuncId {
        self.positions[id.index()].func
    }

    pub(crate) fn block_of_id(&self, id: StmtId) -> (usize, usize) {
        let p = self.positions[id.index()];
        (p.block, p.index)
    }

    pub fn source_text(&self) -> &BTreeMap<String, Vec<(Location, String)>> {
        &self.source_text
    }

    pub fn vfg_override(&self) -> Option<&[(Location, Location)]> {
        self.vfg_override.as_deref()
    }

    /// Loads and validates the program part of a benchmark document.
    pub fn from_doc(doc: &BenchmarkDoc) -> Result<Self, LoadError> {
        build_program(doc)
    }
}

/// A loaded benchmark: program plus targets, witness and initial seeds.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub program: TargetProgram,
    pub targets: Vec<Location>,
    pub witness: Option<Vec<u8>>,
    pub seeds: Vec<Vec<u8>>,
}

impl Benchmark {
    pub fn from_doc(doc: &BenchmarkDoc) -> Result<Self, LoadError> {
        let program = build_program(doc)?;
        let mut targets = Vec::new();
        for (i, t) in doc.targets.iter().enumerate() {
            let path = format!("targets[{i}]");
            let loc: Location = t
                .parse()
                .map_err(|e: crate::error::ParseLocationError| LoadError::parse(&path, e.to_string()))?;
            if program.statement_id(&loc).is_none() {
                return Err(LoadError::invalid(path, format!("{loc} is not a statement")));
            }
            targets.push(loc);
        }
        let witness = doc
            .witness
            .as_deref()
            .map(|w| hex::decode(w).map_err(|e| LoadError::parse("witness", e.to_string())))
            .transpose()?;
        let seeds = doc
            .seeds
            .iter()
            .enumerate()
            .map(|(i, s)| hex::decode(s).map_err(|e| LoadError::parse(format!("seeds[{i}]"), e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Benchmark {
            name: doc.name.clone().unwrap_or_else(|| "benchmark".to_string()),
            program,
            targets,
            witness,
            seeds,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LoadError> {
        Self::from_doc(&BenchmarkDoc::from_toml_str(text)?)
    }
}

/// Parses and validates a program from TOML text.
pub fn load_program(text: &str) -> Result<TargetProgram, LoadError> {
    TargetProgram::from_doc(&BenchmarkDoc::from_toml_str(text)?)
}

fn parse_at(src: &str, path: &str) -> Result<Expr, LoadError> {
    parse_expr(src).map_err(|m| LoadError::parse(path, m))
}

fn build_program(doc: &BenchmarkDoc) -> Result<TargetProgram, LoadError> {
    use doc::{StatementDoc, TerminatorDoc};

    if !doc.functions.contains_key(&doc.entry) {
        return Err(LoadError::invalid(
            "entry",
            format!("entry function `{}` is not defined", doc.entry),
        ));
    }
    // BTreeMap iteration gives name order, so FuncId order is by name.
    let by_name: HashMap<String, FuncId> = doc
        .functions
        .keys()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();

    let mut functions = Vec::with_capacity(doc.functions.len());
    let mut positions = Vec::new();
    let mut locations = Vec::new();
    let mut by_location = HashMap::new();
    let mut source_text = BTreeMap::new();
    let mut source_owner: HashMap<Location, String> = HashMap::new();

    for (fid, (fname, fdoc)) in doc.functions.iter().enumerate() {
        let fpath = format!("functions.{fname}");
        if fdoc.file.is_empty() || fdoc.file.contains(char::is_whitespace) || fdoc.file.contains(':') {
            return Err(LoadError::invalid(
                format!("{fpath}.file"),
                "file name must be non-empty without whitespace or `:`",
            ));
        }
        if fdoc.blocks.is_empty() {
            return Err(LoadError::invalid(format!("{fpath}.blocks"), "function has no blocks"));
        }
        let mut block_index = HashMap::new();
        for (bi, b) in fdoc.blocks.iter().enumerate() {
            if block_index.insert(b.id.as_str(), bi).is_some() {
                return Err(LoadError::invalid(
                    format!("{fpath}.blocks[{bi}].id"),
                    format!("duplicate block id `{}`", b.id),
                ));
            }
        }
        let resolve_block = |id: &str, path: String| {
            block_index
                .get(id)
                .copied()
                .ok_or_else(|| LoadError::invalid(path, format!("unknown block `{id}`")))
        };
        let entry_block = match &fdoc.entry_block {
            Some(id) => resolve_block(id, format!("{fpath}.entry_block"))?,
            None => 0,
        };

        let mut slots: Vec<String> = Vec::new();
        for (pi, p) in fdoc.params.iter().enumerate() {
            if slots.contains(p) {
                return Err(LoadError::invalid(
                    format!("{fpath}.params[{pi}]"),
                    format!("duplicate parameter `{p}`"),
                ));
            }
            slots.push(p.clone());
        }
        let mut slot_of = |name: &str| -> usize {
            if let Some(i) = slots.iter().position(|s| s == name) {
                i
            } else {
                slots.push(name.to_string());
                slots.len() - 1
            }
        };

        let mut blocks = Vec::with_capacity(fdoc.blocks.len());
        for (bi, bdoc) in fdoc.blocks.iter().enumerate() {
            let bpath = format!("{fpath}.blocks[{bi}]");
            let mut statements = Vec::with_capacity(bdoc.statements.len());
            for (si, sdoc) in bdoc.statements.iter().enumerate() {
                let spath = format!("{bpath}.statements[{si}]");
                let line = sdoc.line();
                if line == 0 {
                    return Err(LoadError::invalid(format!("{spath}.line"), "line must be positive"));
                }
                let location = Location::new(fdoc.file.clone(), line);
                if by_location.contains_key(&location) {
                    return Err(LoadError::invalid(
                        format!("{spath}.line"),
                        format!("location {location} used by more than one statement"),
                    ));
                }
                let (kind, uses, defs) = match sdoc {
                    StatementDoc::Assign { var, expr, .. } => {
                        let mut e = parse_at(expr, &format!("{spath}.expr"))?;
                        e.resolve_slots(&mut slot_of);
                        let uses = e.uses();
                        let slot = slot_of(var);
                        (
                            StatementKind::Assign {
                                var: var.clone(),
                                slot,
                                expr: e,
                            },
                            uses,
                            Some(var.clone()),
                        )
                    }
                    StatementDoc::Call { callee, args, .. } => {
                        let Some(&callee_id) = by_name.get(callee) else {
                            return Err(LoadError::invalid(
                                format!("{spath}.callee"),
                                format!("call to undefined function `{callee}`"),
                            ));
                        };
                        let want = doc.functions[callee].params.len();
                        if args.len() != want {
                            return Err(LoadError::invalid(
                                format!("{spath}.args"),
                                format!("`{callee}` takes {want} argument(s), {} given", args.len()),
                            ));
                        }
                        let mut parsed = Vec::with_capacity(args.len());
                        let mut uses = BTreeSet::new();
                        for (ai, a) in args.iter().enumerate() {
                            let mut e = parse_at(a, &format!("{spath}.args[{ai}]"))?;
                            e.resolve_slots(&mut slot_of);
                            uses.extend(e.uses());
                            parsed.push(e);
                        }
                        (
                            StatementKind::Call {
                                callee: callee.clone(),
                                callee_id,
                                args: parsed,
                            },
                            uses,
                            None,
                        )
                    }
                    StatementDoc::CrashIf { cond, .. } => {
                        let mut e = parse_at(cond, &format!("{spath}.cond"))?;
                        e.resolve_slots(&mut slot_of);
                        let uses = e.uses();
                        (StatementKind::CrashIf(e), uses, None)
                    }
                    StatementDoc::Nop { .. } => (StatementKind::Nop, BTreeSet::new(), None),
                };
                let id = StmtId(locations.len() as u32);
                by_location.insert(location.clone(), id);
                locations.push(location.clone());
                positions.push(StmtPos {
                    func: fid,
                    block: bi,
                    index: si,
                });
                statements.push(Statement {
                    id,
                    location,
                    kind,
                    uses,
                    defs,
                });
            }
            let terminator = match &bdoc.terminator {
                TerminatorDoc::Goto { target } => {
                    Terminator::Goto(resolve_block(target, format!("{bpath}.terminator.target"))?)
                }
                TerminatorDoc::Branch {
                    cond,
                    then,
                    otherwise,
                } => {
                    let mut e = parse_at(cond, &format!("{bpath}.terminator.cond"))?;
                    e.resolve_slots(&mut slot_of);
                    Terminator::Branch {
                        cond: e,
                        then_block: resolve_block(then, format!("{bpath}.terminator.then"))?,
                        else_block: resolve_block(otherwise, format!("{bpath}.terminator.else"))?,
                    }
                }
                TerminatorDoc::Return => Terminator::Return,
            };
            blocks.push(Block {
                id: bdoc.id.clone(),
                statements,
                terminator,
            });
        }

        let func = Function {
            name: fname.clone(),
            file: fdoc.file.clone(),
            params: fdoc.params.clone(),
            blocks,
            entry_block,
            slots,
        };

        let text = if fdoc.source.is_empty() {
            synthesize_source(&func)
        } else {
            let mut lines = Vec::with_capacity(fdoc.source.len());
            for (i, (line, text)) in fdoc.source.iter().enumerate() {
                if *line == 0 {
                    return Err(LoadError::invalid(
                        format!("{fpath}.source[{i}]"),
                        "line must be positive",
                    ));
                }
                lines.push((Location::new(fdoc.file.clone(), *line), text.clone()));
            }
            lines.sort_by(|a, b| a.0.cmp(&b.0));
            for s in func.statements() {
                if lines.binary_search_by(|(l, _)| l.cmp(&s.location)).is_err() {
                    return Err(LoadError::invalid(
                        format!("{fpath}.source"),
                        format!("statement line {} has no source text", s.location),
                    ));
                }
            }
            lines
        };
        for (i, (loc, _)) in text.iter().enumerate() {
            if let Some(prev) = source_owner.insert(loc.clone(), fname.clone()) {
                return Err(LoadError::invalid(
                    format!("{fpath}.source[{i}]"),
                    format!("source line {loc} already belongs to `{prev}`"),
                ));
            }
        }
        source_text.insert(fname.clone(), text);
        functions.push(func);
    }

    let vfg_override = match &doc.vfg_edges {
        None => None,
        Some(edges) => {
            let mut out = Vec::with_capacity(edges.len());
            for (i, (from, to)) in edges.iter().enumerate() {
                let mut ends = Vec::with_capacity(2);
                for (k, s) in [from, to].into_iter().enumerate() {
                    let path = format!("vfg_edges[{i}][{k}]");
                    let loc: Location = s
                        .parse()
                        .map_err(|e: crate::error::ParseLocationError| LoadError::parse(&path, e.to_string()))?;
                    if !by_location.contains_key(&loc) {
                        return Err(LoadError::invalid(path, format!("{loc} is not a statement")));
                    }
                    ends.push(loc);
                }
                let to = ends.pop().unwrap();
                let from = ends.pop().unwrap();
                out.push((from, to));
            }
            Some(out)
        }
    };

    Ok(TargetProgram {
        entry: by_name[&doc.entry],
        functions,
        by_name,
        positions,
        locations,
        by_location,
        source_text,
        vfg_override,
    })
}

fn synthesize_source(func: &Function) -> Vec<(Location, String)> {
    let mut lines: Vec<(Location, String)> = func
        .statements()
        .map(|s| (s.location.clone(), format!("  {s}")))
        .collect();
    lines.sort_by(|a, b| a.0.cmp(&b.0));
    lines
}
