//! Seed choice and energy assignment.

use std::collections::BTreeSet;

use crate::distance::{Metric, Polarity, ScoreValue};
use crate::model::ExecutionResult;

pub const DEFAULT_BASE_ENERGY: u64 = 64;

#[derive(Debug, Clone)]
pub struct Seed {
    pub id: u64,
    pub input: Vec<u8>,
    pub result: ExecutionResult,
    /// Score under the corpus' active metric.
    pub score: ScoreValue,
    /// Executions performed when the seed was added.
    pub discovery_step: u64,
}

/// Corpus averages feeding [`base_energy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusStats {
    pub avg_step_count: f64,
    pub avg_trace_size: f64,
}

#[derive(Debug, Clone)]
pub struct CorpusView {
    pub seeds: Vec<Seed>,
    pub chosen_this_round: BTreeSet<u64>,
    pub metric: Metric,
    pub e0: u64,
}

impl CorpusView {
    pub fn new(metric: Metric) -> Self {
        CorpusView {
            seeds: Vec::new(),
            chosen_this_round: BTreeSet::new(),
            metric,
            e0: DEFAULT_BASE_ENERGY,
        }
    }

    /// Adds a seed; it is eligible in the current round.
    pub fn push(&mut self, seed: Seed) {
        debug_assert!(self.seeds.last().is_none_or(|s| s.id < seed.id));
        self.seeds.push(seed);
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn stats(&self) -> CorpusStats {
        let n = self.seeds.len().max(1) as f64;
        CorpusStats {
            avg_step_count: self.seeds.iter().map(|s| s.result.step_count as f64).sum::<f64>() / n,
            avg_trace_size: self.seeds.iter().map(|s| s.result.trace.len() as f64).sum::<f64>() / n,
        }
    }

    /// Sum and count of the finite scores, kept apart so that score ratios
    /// are a single correctly rounded division.
    pub fn finite_score_total(&self) -> (f64, usize) {
        self.seeds
            .iter()
            .map(|s| s.score)
            .filter(|s| !s.is_infinite())
            .fold((0.0, 0), |(sum, n), s| (sum + s.value(), n + 1))
    }

    pub fn average_score(&self) -> Option<f64> {
        let (sum, n) = self.finite_score_total();
        (n > 0).then(|| sum / n as f64)
    }
}

/// Picks the best seed not yet chosen this round and marks it; starts a new
/// round first when every seed has been chosen. Ties go to the smallest id.
///
/// Panics on an empty corpus.
pub fn choose_seed(view: &mut CorpusView) -> usize {
    assert!(!view.seeds.is_empty(), "choose_seed on empty corpus");
    if view.chosen_this_round.len() >= view.seeds.len() {
        view.chosen_this_round.clear();
    }
    let mut best: Option<usize> = None;
    for (i, s) in view.seeds.iter().enumerate() {
        if view.chosen_this_round.contains(&s.id) {
            continue;
        }
        if best.is_none_or(|b| view.metric.better(s.score, view.seeds[b].score)) {
            best = Some(i);
        }
    }
    let i = best.expect("an unchosen seed exists");
    view.chosen_this_round.insert(view.seeds[i].id);
    i
}

/// AFL-flavoured energy from execution cost and trace size relative to the
/// corpus average.
pub fn base_energy(seed: &Seed, stats: &CorpusStats, e0: u64) -> u64 {
    let speed = if seed.result.step_count == 0 {
        4.0
    } else {
        (stats.avg_step_count / seed.result.step_count as f64).clamp(0.25, 4.0)
    };
    let size = if stats.avg_trace_size == 0.0 {
        1.0
    } else {
        (seed.result.trace.len() as f64 / stats.avg_trace_size).clamp(0.25, 4.0)
    };
    ((e0 as f64 * speed * size).ceil() as u64).max(1)
}

/// Base energy scaled by how the seed's score compares with the corpus mean.
///
/// Reward-like metrics scale by `score / mean`; distance-like ones by
/// `mean / score`. Seeds without a finite score, a zero mean, and the
/// uniform metric all get the base energy.
pub fn assign_energy(view: &CorpusView, seed: &Seed) -> u64 {
    let base = base_energy(seed, &view.stats(), view.e0);
    if view.metric == Metric::Afl || seed.score.is_infinite() {
        return base;
    }
    let (sum, n) = view.finite_score_total();
    let s = seed.score.value();
    let factor = match view.metric.polarity() {
        Polarity::HigherIsBetter if sum > 0.0 => s * n as f64 / sum,
        Polarity::LowerIsBetter if s > 0.0 && n > 0 => sum / (s * n as f64),
        _ => return base,
    };
    (ceil_snapped(factor * base as f64) as u64).max(1)
}

/// Ceiling that treats values within a few ulps of an integer as that
/// integer, so the energy does not depend on how the scores were scaled.
fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}
