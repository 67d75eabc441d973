//! Flow graphs over statement locations and the seed scores computed on them.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::location::Location;
use crate::model::{StatementKind, StmtId, TargetProgram, Terminator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Cfg,
    Vfg,
}

/// Directed graph whose nodes are statement locations.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub kind: GraphKind,
    nodes: Vec<Location>,
    index: HashMap<Location, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl FlowGraph {
    pub fn from_edges(
        kind: GraphKind,
        nodes: impl IntoIterator<Item = Location>,
        edges: impl IntoIterator<Item = (Location, Location)>,
    ) -> Self {
        let mut all: BTreeSet<Location> = nodes.into_iter().collect();
        let edges: BTreeSet<(Location, Location)> = edges.into_iter().collect();
        for (a, b) in &edges {
            all.insert(a.clone());
            all.insert(b.clone());
        }
        let nodes: Vec<Location> = all.into_iter().collect();
        let index: HashMap<Location, usize> =
            nodes.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let mut succ = vec![Vec::new(); nodes.len()];
        let mut pred = vec![Vec::new(); nodes.len()];
        for (a, b) in &edges {
            succ[index[a]].push(index[b]);
            pred[index[b]].push(index[a]);
        }
        FlowGraph {
            kind,
            nodes,
            index,
            succ,
            pred,
        }
    }

    pub fn nodes(&self) -> &[Location] {
        &self.nodes
    }

    pub fn contains(&self, loc: &Location) -> bool {
        self.index.contains_key(loc)
    }

    pub fn edges(&self) -> BTreeSet<(Location, Location)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (self.nodes[a].clone(), self.nodes[b].clone()))
            .collect()
    }

    pub fn successors(&self, loc: &Location) -> impl Iterator<Item = &Location> {
        self.index
            .get(loc)
            .into_iter()
            .flat_map(|&i| self.succ[i].iter().map(|&j| &self.nodes[j]))
    }

    /// Shortest unit-weight distances from every node to `target`.
    pub fn distances_to(&self, target: &Location) -> DistanceMap {
        let mut dist = vec![None; self.nodes.len()];
        if let Some(&t) = self.index.get(target) {
            dist[t] = Some(0u32);
            let mut queue = VecDeque::from([t]);
            while let Some(v) = queue.pop_front() {
                let d = dist[v].unwrap() + 1;
                for &u in &self.pred[v] {
                    if dist[u].is_none() {
                        dist[u] = Some(d);
                        queue.push_back(u);
                    }
                }
            }
        }
        DistanceMap {
            target: target.clone(),
            dist: self
                .nodes
                .iter()
                .cloned()
                .zip(dist)
                .filter_map(|(l, d)| d.map(|d| (l, d)))
                .collect(),
        }
    }
}

/// Distances to one target. Locations absent from `dist` are unreachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    pub target: Location,
    pub dist: BTreeMap<Location, u32>,
}

impl DistanceMap {
    pub fn get(&self, loc: &Location) -> Option<u32> {
        self.dist.get(loc).copied()
    }

    pub fn max_finite(&self) -> u32 {
        self.dist.values().copied().max().unwrap_or(0)
    }

    /// The map re-indexed by statement id for fast trace scoring.
    pub fn per_statement(&self, program: &TargetProgram) -> Vec<Option<u32>> {
        program
            .statements()
            .map(|s| self.get(&s.location))
            .collect()
    }
}

#[derive(Clone, Copy)]
enum Node {
    Stmt(StmtId),
    BlockEntry(usize, usize),
    Exit(usize),
    AfterCall(StmtId),
}

/// Interprocedural control flow graph with one node per statement.
///
/// A call statement's successors are the callee's first statements; the
/// callee's last statements flow to whatever follows each of its call sites.
/// Blocks without statements are transparent.
pub fn build_cfg(program: &TargetProgram) -> FlowGraph {
    let mut callers: Vec<Vec<StmtId>> = vec![Vec::new(); program.functions().len()];
    for s in program.statements() {
        if let StatementKind::Call { callee_id, .. } = s.kind {
            callers[callee_id].push(s.id);
        }
    }

    // Virtual successors of a node, before contraction.
    let step = |node: Node, out: &mut Vec<Node>| match node {
        Node::Stmt(id) => {
            let stmt = program.statement(id);
            if let StatementKind::Call { callee_id, .. } = stmt.kind {
                let f = program.function(callee_id);
                out.push(Node::BlockEntry(callee_id, f.entry_block));
            } else {
                after_statement(program, id, out);
            }
        }
        Node::AfterCall(id) => after_statement(program, id, out),
        Node::BlockEntry(f, b) => {
            let block = &program.function(f).blocks[b];
            match block.statements.first() {
                Some(s) => out.push(Node::Stmt(s.id)),
                None => after_terminator(f, &block.terminator, out),
            }
        }
        Node::Exit(f) => out.extend(callers[f].iter().map(|&c| Node::AfterCall(c))),
    };

    let nodes_per_fn = program.functions().iter().map(|f| f.blocks.len()).max().unwrap_or(0);
    let mut edges = Vec::new();
    let mut buf = Vec::new();
    for s in program.statements() {
        // Depth-first walk across virtual nodes until statements are hit.
        let mut seen_virtual: BTreeSet<(u8, usize)> = BTreeSet::new();
        let mut found: BTreeSet<StmtId> = BTreeSet::new();
        let mut stack = Vec::new();
        step(Node::Stmt(s.id), &mut stack);
        while let Some(node) = stack.pop() {
            let key = match node {
                Node::Stmt(id) => {
                    found.insert(id);
                    continue;
                }
                Node::BlockEntry(f, b) => (0, f * nodes_per_fn + b),
                Node::Exit(f) => (1, f),
                Node::AfterCall(id) => (2, id.index()),
            };
            if seen_virtual.insert(key) {
                buf.clear();
                step(node, &mut buf);
                stack.extend(buf.iter().copied());
            }
        }
        for t in found {
            edges.push((s.location.clone(), program.location(t).clone()));
        }
    }
    FlowGraph::from_edges(
        GraphKind::Cfg,
        program.statements().map(|s| s.location.clone()),
        edges,
    )
}

fn after_statement(program: &TargetProgram, id: StmtId, out: &mut Vec<Node>) {
    let f = program.function_of_id(id);
    let (b, pc) = program.block_of_id(id);
    let block = &program.function(f).blocks[b];
    match block.statements.get(pc + 1) {
        Some(next) => out.push(Node::Stmt(next.id)),
        None => after_terminator(f, &block.terminator, out),
    }
}

fn after_terminator(f: usize, term: &Terminator, out: &mut Vec<Node>) {
    match term {
        Terminator::Return => out.push(Node::Exit(f)),
        t => out.extend(t.successors().map(|b| Node::BlockEntry(f, b))),
    }
}

/// Value flow graph: the document's explicit edges when present, otherwise
/// flow-insensitive def-use pairs within each function plus edges from a
/// call site to the callee statements that read a parameter.
pub fn build_vfg(program: &TargetProgram) -> FlowGraph {
    if let Some(edges) = program.vfg_override() {
        return FlowGraph::from_edges(GraphKind::Vfg, [], edges.iter().cloned());
    }
    FlowGraph::from_edges(GraphKind::Vfg, [], computed_vfg_edges(program))
}

fn computed_vfg_edges(program: &TargetProgram) -> BTreeSet<(Location, Location)> {
    let mut edges = BTreeSet::new();
    for f in program.functions() {
        let mut defs: BTreeMap<&str, Vec<&Location>> = BTreeMap::new();
        for s in f.statements() {
            if let Some(v) = &s.defs {
                defs.entry(v).or_default().push(&s.location);
            }
        }
        for s in f.statements() {
            for v in &s.uses {
                for d in defs.get(v.as_str()).into_iter().flatten() {
                    edges.insert(((*d).clone(), s.location.clone()));
                }
            }
            if let StatementKind::Call { callee_id, .. } = s.kind {
                let callee = program.function(callee_id);
                for u in callee.statements() {
                    if u.uses.iter().any(|v| callee.params.contains(v)) {
                        edges.insert((s.location.clone(), u.location.clone()));
                    }
                }
            }
        }
    }
    edges
}

/// A seed score. `ScoreValue::INFINITY` stands for "no information".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue(f64);

impl ScoreValue {
    pub const INFINITY: ScoreValue = ScoreValue(f64::INFINITY);
    pub const ZERO: ScoreValue = ScoreValue(0.0);

    pub fn new(v: f64) -> Self {
        assert!(v >= 0.0, "scores are non-negative");
        ScoreValue(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Eq for ScoreValue {}

impl PartialOrd for ScoreValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScoreValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for ScoreValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ScoreValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

fn harmonic_mean(dists: impl Iterator<Item = u32>) -> ScoreValue {
    let (n, inv) = dists
        .filter(|&d| d > 0)
        .fold((0u32, 0.0f64), |(n, s), d| (n + 1, s + 1.0 / d as f64));
    if n == 0 {
        ScoreValue::INFINITY
    } else {
        ScoreValue::new(n as f64 / inv)
    }
}

fn arithmetic_mean(dists: impl Iterator<Item = u32>) -> ScoreValue {
    let (n, sum) = dists.fold((0u64, 0u64), |(n, s), d| (n + 1, s + d as u64));
    if n == 0 {
        ScoreValue::INFINITY
    } else {
        ScoreValue::new(sum as f64 / n as f64)
    }
}

fn dafl_sum(dists: impl Iterator<Item = u32>, l_max: u32) -> ScoreValue {
    ScoreValue::new(
        dists
            .filter(|&d| d <= l_max)
            .map(|d| (l_max - d + 1) as u64)
            .sum::<u64>() as f64,
    )
}

/// Harmonic mean of the positive finite distances of the traced nodes.
pub fn score_aflgo(trace: &BTreeSet<Location>, dm: &DistanceMap) -> ScoreValue {
    harmonic_mean(trace.iter().filter_map(|l| dm.get(l)))
}

/// Nodes that can reach the target but have a successor that cannot.
///
/// Nodes at distance 0 are left out: the target itself is never a deviation.
pub fn deviation_basic_blocks(cfg: &FlowGraph, dm: &DistanceMap) -> BTreeSet<Location> {
    cfg.nodes()
        .iter()
        .filter(|l| dm.get(l).is_some_and(|d| d > 0))
        .filter(|l| cfg.successors(l).any(|s| dm.get(s).is_none()))
        .cloned()
        .collect()
}

pub fn score_windranger(
    trace: &BTreeSet<Location>,
    dbbs: &BTreeSet<Location>,
    dm: &DistanceMap,
) -> ScoreValue {
    arithmetic_mean(trace.intersection(dbbs).filter_map(|l| dm.get(l)))
}

/// Sum of `l_max - i + 1` over traced nodes at finite distance `i`.
pub fn score_dafl(trace: &BTreeSet<Location>, dm: &DistanceMap, l_max: u32) -> ScoreValue {
    dafl_sum(trace.iter().filter_map(|l| dm.get(l)), l_max)
}

pub fn score_stack_overlap(trace: &BTreeSet<Location>, predicted: &BTreeSet<Location>) -> ScoreValue {
    ScoreValue::new(trace.intersection(predicted).count() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Staczzer,
    Aflgo,
    Windranger,
    Dafl,
    Afl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    LowerIsBetter,
    HigherIsBetter,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Staczzer,
        Metric::Aflgo,
        Metric::Windranger,
        Metric::Dafl,
        Metric::Afl,
    ];

    pub fn polarity(self) -> Polarity {
        match self {
            Metric::Aflgo | Metric::Windranger => Polarity::LowerIsBetter,
            Metric::Staczzer | Metric::Dafl | Metric::Afl => Polarity::HigherIsBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Staczzer => "staczzer",
            Metric::Aflgo => "aflgo",
            Metric::Windranger => "windranger",
            Metric::Dafl => "dafl",
            Metric::Afl => "afl",
        }
    }

    /// `a` is strictly preferable to `b` under this metric.
    pub fn better(self, a: ScoreValue, b: ScoreValue) -> bool {
        match self.polarity() {
            Polarity::LowerIsBetter => a < b,
            Polarity::HigherIsBetter => a > b,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric `{s}` (expected staczzer, aflgo, windranger, dafl or afl)"))
    }
}

/// Precomputed per-statement tables that score a trace bitset under one
/// metric.
#[derive(Debug, Clone)]
pub enum TraceScorer {
    Aflgo(Vec<Option<u32>>),
    Windranger(Vec<Option<u32>>),
    Dafl { dist: Vec<Option<u32>>, l_max: u32 },
    Overlap(Vec<bool>),
    Uniform,
}

impl TraceScorer {
    /// `predicted` is only consulted for [`Metric::Staczzer`].
    pub fn new(
        metric: Metric,
        program: &TargetProgram,
        target: &Location,
        predicted: &BTreeSet<Location>,
    ) -> Self {
        match metric {
            Metric::Aflgo => TraceScorer::Aflgo(build_cfg(program).distances_to(target).per_statement(program)),
            Metric::Windranger => {
                let cfg = build_cfg(program);
                let dm = cfg.distances_to(target);
                let dbbs = deviation_basic_blocks(&cfg, &dm);
                TraceScorer::Windranger(
                    program
                        .statements()
                        .map(|s| dbbs.contains(&s.location).then(|| dm.get(&s.location)).flatten())
                        .collect(),
                )
            }
            Metric::Dafl => {
                let dm = build_vfg(program).distances_to(target);
                TraceScorer::Dafl {
                    l_max: dm.max_finite(),
                    dist: dm.per_statement(program),
                }
            }
            Metric::Staczzer => TraceScorer::Overlap(
                program
                    .statements()
                    .map(|s| predicted.contains(&s.location))
                    .collect(),
            ),
            Metric::Afl => TraceScorer::Uniform,
        }
    }

    pub fn score(&self, trace: &crate::model::Trace) -> ScoreValue {
        fn dists<'a>(
            trace: &'a crate::model::Trace,
            table: &'a [Option<u32>],
        ) -> impl Iterator<Item = u32> + 'a {
            trace.iter().filter_map(|id| table[id.index()])
        }
        match self {
            TraceScorer::Aflgo(t) => harmonic_mean(dists(trace, t)),
            TraceScorer::Windranger(t) => arithmetic_mean(dists(trace, t)),
            TraceScorer::Dafl { dist, l_max } => dafl_sum(dists(trace, dist), *l_max),
            TraceScorer::Overlap(mask) => {
                ScoreValue::new(trace.iter().filter(|id| mask[id.index()]).count() as f64)
            }
            TraceScorer::Uniform => ScoreValue::new(1.0),
        }
    }
}
