//! Median time-to-exposure, pairwise comparison and the sign test.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedianTte {
    /// Lower median of the outcomes, or the penalty `2 * limit`.
    pub value: u64,
    pub reproducible: bool,
}

/// Failures count as +inf. The result is reproducible only when strictly
/// more than half of the runs succeeded; otherwise the value is the
/// penalty `2 * limit`.
pub fn median_tte(outcomes: &[Option<u64>], limit: u64) -> MedianTte {
    assert!(!outcomes.is_empty(), "median of no outcomes");
    let mut hits: Vec<u64> = outcomes.iter().flatten().copied().collect();
    hits.sort_unstable();
    let n = outcomes.len();
    if hits.len() * 2 > n {
        MedianTte {
            value: hits[(n - 1) / 2],
            reproducible: true,
        }
    } else {
        MedianTte {
            value: 2 * limit,
            reproducible: false,
        }
    }
}

fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for k in 0..n {
        let next = &row[k as usize] * BigUint::from(n - k) / BigUint::from(k + 1);
        row.push(next);
    }
    row
}

/// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`, exactly.
pub fn sign_test_exact(wins: u64, losses: u64) -> BigRational {
    let n = wins + losses;
    assert!(n >= 1, "sign test needs at least one non-tied pair");
    let row = binomial_row(n);
    let tail: BigUint = row[wins as usize..].iter().sum();
    BigRational::new(tail.into(), (BigUint::one() << n as usize).into())
}

/// One-tailed sign test p-value for `wins` positive and `losses` negative
/// signs.
pub fn sign_test(wins: u64, losses: u64) -> f64 {
    sign_test_exact(wins, losses)
        .to_f64()
        .expect("probability is representable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The subject configuration wins.
    Win,
    Loss,
    Tie,
}

impl Verdict {
    pub fn flip(self) -> Verdict {
        match self {
            Verdict::Win => Verdict::Loss,
            Verdict::Loss => Verdict::Win,
            Verdict::Tie => Verdict::Tie,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub baseline: MedianTte,
    pub subject: MedianTte,
    pub baseline_successes: usize,
    pub subject_successes: usize,
    pub verdict: Verdict,
    /// Baseline median over subject median, penalties substituted.
    pub ratio: f64,
}

/// Compares two configurations on one benchmark: lower median when both
/// are reproducible, the reproducible one when only one is, and the
/// higher success count when neither is.
pub fn compare_outcomes(baseline: &[Option<u64>], subject: &[Option<u64>], limit: u64) -> PairOutcome {
    let b = median_tte(baseline, limit);
    let s = median_tte(subject, limit);
    let bs = baseline.iter().flatten().count();
    let ss = subject.iter().flatten().count();
    let by_order = |o: std::cmp::Ordering| match o {
        std::cmp::Ordering::Less => Verdict::Win,
        std::cmp::Ordering::Greater => Verdict::Loss,
        std::cmp::Ordering::Equal => Verdict::Tie,
    };
    let verdict = match (b.reproducible, s.reproducible) {
        (true, true) => by_order(s.value.cmp(&b.value)),
        (false, true) => Verdict::Win,
        (true, false) => Verdict::Loss,
        (false, false) => by_order(bs.cmp(&ss)),
    };
    PairOutcome {
        baseline: b,
        subject: s,
        baseline_successes: bs,
        subject_successes: ss,
        verdict,
        ratio: b.value as f64 / s.value.max(1) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub average_ratio: f64,
    /// Absent when every benchmark tied.
    pub p_value: Option<f64>,
}

pub fn tally<'a>(rows: impl IntoIterator<Item = &'a PairOutcome>) -> Tally {
    let (mut wins, mut losses, mut ties, mut sum, mut n) = (0, 0, 0, 0.0, 0usize);
    for r in rows {
        match r.verdict {
            Verdict::Win => wins += 1,
            Verdict::Loss => losses += 1,
            Verdict::Tie => ties += 1,
        }
        sum += r.ratio;
        n += 1;
    }
    Tally {
        wins,
        losses,
        ties,
        average_ratio: if n == 0 { 0.0 } else { sum / n as f64 },
        p_value: (wins + losses > 0).then(|| sign_test(wins, losses)),
    }
}
