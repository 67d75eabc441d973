//! Suite files, the repetition runner, and result files.
//!
//! A suite is a TOML document:
//!
//! ```toml
//! benchmarks = ["synth00.toml", "builtin:cxxfilt_toy"]  # paths relative to the suite file
//! configs = ["staczzer:oracle", "afl"]                  # first entry is the subject
//! repetitions = 20
//! budget = 200000          # executions per campaign
//! parallelism = 4
//! rng_seed = 0             # mixed into every per-repetition seed
//! max_input_len = 4096
//!
//! [predictor]              # optional settings for `staczzer:llm`
//! endpoint_url = "http://localhost:8000/v1"
//! model_name = "some-model"
//! ```
//!
//! `run_suite` writes `results.json` (versioned by `format_version`),
//! `table.txt`, `table.csv`, and a directory per campaign holding
//! `report.json`, `timing.json` and `crash-NNN.hex` files.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::stats::{compare_outcomes, median_tte, tally, MedianTte, PairOutcome, Tally};
use crate::builtin;
use crate::campaign::{run_campaign, write_campaign_dir, Budget, CampaignConfig};
use crate::distance::Metric;
use crate::error::BenchError;
use crate::model::Benchmark;
use crate::mutate::DEFAULT_MAX_INPUT_LEN;
use crate::predictor::{PredictorConfig, Strategy};

pub const RESULTS_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_REPETITIONS: u32 = 20;
pub const DEFAULT_BUDGET: u64 = 200_000;

/// A metric plus, for the stack-overlap metric, the predictor feeding it.
/// Written `metric` or `metric:predictor`, e.g. `afl`, `staczzer:oracle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuzzerConfig {
    pub metric: Metric,
    pub predictor: Option<Strategy>,
}

impl fmt::Display for FuzzerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.predictor {
            Some(p) => write!(f, "{}:{}", self.metric, p),
            None => write!(f, "{}", self.metric),
        }
    }
}

impl FromStr for FuzzerConfig {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let bad = || BenchError::BadConfig(s.to_string());
        let (m, p) = match s.split_once(':') {
            Some((m, p)) => (m, Some(p)),
            None => (s, None),
        };
        let metric: Metric = m.parse().map_err(|_| bad())?;
        let predictor = p.map(str::parse::<Strategy>).transpose().map_err(|_| bad())?;
        if (metric == Metric::Staczzer) != predictor.is_some() {
            return Err(bad());
        }
        Ok(FuzzerConfig { metric, predictor })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    benchmarks: Vec<String>,
    configs: Vec<String>,
    repetitions: Option<u32>,
    budget: Option<u64>,
    parallelism: Option<usize>,
    rng_seed: Option<u64>,
    max_input_len: Option<usize>,
    predictor: Option<PredictorConfig>,
}

#[derive(Debug, Clone)]
pub enum BenchmarkSource {
    Path(PathBuf),
    Builtin(String),
    Inline(Box<Benchmark>),
}

impl BenchmarkSource {
    /// `builtin:<name>` or a path, taken relative to `base`.
    pub fn parse(spec: &str, base: &Path) -> Self {
        match spec.strip_prefix("builtin:") {
            Some(name) => BenchmarkSource::Builtin(name.to_string()),
            None => BenchmarkSource::Path(base.join(spec)),
        }
    }

    pub fn load(&self) -> Result<Benchmark, BenchError> {
        load_benchmark(self)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub benchmarks: Vec<BenchmarkSource>,
    pub configs: Vec<FuzzerConfig>,
    pub repetitions: u32,
    pub budget: u64,
    pub parallelism: usize,
    pub rng_seed: u64,
    pub max_input_len: usize,
    /// Endpoint and sampling settings used by `staczzer:llm`.
    pub predictor: PredictorConfig,
    pub output_dir: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(benchmarks: Vec<BenchmarkSource>, configs: Vec<FuzzerConfig>) -> Self {
        SuiteConfig {
            benchmarks,
            configs,
            repetitions: DEFAULT_REPETITIONS,
            budget: DEFAULT_BUDGET,
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            rng_seed: 0,
            max_input_len: DEFAULT_MAX_INPUT_LEN,
            predictor: PredictorConfig::default(),
            output_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let format = |message: String| BenchError::Format {
            path: path.display().to_string(),
            message,
        };
        let file: SuiteFile = toml::from_str(&text).map_err(|e| format(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let benchmarks = file.benchmarks.iter().map(|b| BenchmarkSource::parse(b, base)).collect();
        let configs = file
            .configs
            .iter()
            .map(|c| c.parse())
            .collect::<Result<Vec<FuzzerConfig>, _>>()?;
        let mut cfg = SuiteConfig::new(benchmarks, configs);
        cfg.repetitions = file.repetitions.unwrap_or(DEFAULT_REPETITIONS);
        cfg.budget = file.budget.unwrap_or(DEFAULT_BUDGET);
        if let Some(p) = file.parallelism {
            cfg.parallelism = p;
        }
        cfg.rng_seed = file.rng_seed.unwrap_or(0);
        cfg.max_input_len = file.max_input_len.unwrap_or(DEFAULT_MAX_INPUT_LEN);
        if let Some(p) = file.predictor {
            cfg.predictor = p;
        }
        cfg.validate().map_err(format)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.configs.is_empty() {
            return Err("at least one config is required".into());
        }
        if self.repetitions == 0 || self.budget == 0 || self.parallelism == 0 {
            return Err("repetitions, budget and parallelism must be positive".into());
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> BenchError {
    BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load_benchmark(src: &BenchmarkSource) -> Result<Benchmark, BenchError> {
    match src {
        BenchmarkSource::Inline(b) => Ok((**b).clone()),
        BenchmarkSource::Builtin(name) => builtin::by_name(name).ok_or_else(|| BenchError::Format {
            path: format!("builtin:{name}"),
            message: "no such built-in benchmark".into(),
        }),
        BenchmarkSource::Path(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let mut b = Benchmark::from_toml_str(&text).map_err(|source| BenchError::Load {
                path: p.display().to_string(),
                source,
            })?;
            if b.name.is_empty() {
                b.name = p.file_stem().map_or("benchmark".into(), |s| s.to_string_lossy().into_owned());
            }
            Ok(b)
        }
    }
}

/// Seed for one repetition, stable across runs and platforms.
pub fn repetition_seed(base: u64, benchmark: &str, config: &FuzzerConfig, rep: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(benchmark.as_bytes());
    h.update([0]);
    h.update(config.to_string().as_bytes());
    h.update([0]);
    h.update(rep.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub config: String,
    pub rep: u32,
    pub rng_seed: u64,
    pub target_hit: bool,
    pub tte_executions: Option<u64>,
    pub executions: u64,
    pub predictor_downgraded: bool,
    /// Set when the campaign could not run; counts as a failed repetition.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub benchmark: String,
    pub config: String,
    pub successes: usize,
    pub repetitions: usize,
    pub median_tte: MedianTte,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub format_version: u32,
    pub budget: u64,
    pub repetitions: u32,
    pub benchmarks: Vec<String>,
    pub configs: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub subject: String,
    pub rows: Vec<(String, PairOutcome)>,
    pub tally: Tally,
}

impl SuiteResult {
    fn new(budget: u64, repetitions: u32, benchmarks: Vec<String>, configs: Vec<String>, runs: Vec<RunRecord>) -> Self {
        let mut r = SuiteResult {
            format_version: RESULTS_FORMAT_VERSION,
            budget,
            repetitions,
            benchmarks,
            configs,
            runs,
            summary: Vec::new(),
        };
        let mut summary = Vec::new();
        for b in &r.benchmarks {
            for c in &r.configs {
                let o = r.outcomes(b, c).expect("config present");
                summary.push(SummaryRow {
                    benchmark: b.clone(),
                    config: c.clone(),
                    successes: o.iter().flatten().count(),
                    repetitions: o.len(),
                    median_tte: median_tte(&o, budget),
                });
            }
        }
        r.summary = summary;
        r
    }

    /// TTE per repetition, in repetition order.
    pub fn outcomes(&self, benchmark: &str, config: &str) -> Result<Vec<Option<u64>>, BenchError> {
        if !self.configs.iter().any(|c| c == config) {
            return Err(BenchError::MissingConfig(config.to_string()));
        }
        let mut runs: Vec<&RunRecord> = self
            .runs
            .iter()
            .filter(|r| r.benchmark == benchmark && r.config == config)
            .collect();
        runs.sort_by_key(|r| r.rep);
        Ok(runs.iter().map(|r| r.tte_executions).collect())
    }

    pub fn compare(&self, baseline: &str, subject: &str) -> Result<Comparison, BenchError> {
        let mut rows = Vec::new();
        for b in &self.benchmarks {
            let base = self.outcomes(b, baseline)?;
            let subj = self.outcomes(b, subject)?;
            if base.is_empty() || subj.is_empty() {
                continue;
            }
            rows.push((b.clone(), compare_outcomes(&base, &subj, self.budget)));
        }
        let t = tally(rows.iter().map(|(_, r)| r));
        Ok(Comparison {
            baseline: baseline.to_string(),
            subject: subject.to_string(),
            rows,
            tally: t,
        })
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let path = dir.join("results.json");
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let r: SuiteResult = serde_json::from_str(&text).map_err(|e| BenchError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if r.format_version != RESULTS_FORMAT_VERSION {
            return Err(BenchError::Format {
                path: path.display().to_string(),
                message: format!("unsupported format_version {}", r.format_version),
            });
        }
        Ok(r)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize") + "\n"
    }

    fn summary_for(&self, benchmark: &str, config: &str) -> &SummaryRow {
        self.summary
            .iter()
            .find(|s| s.benchmark == benchmark && s.config == config)
            .expect("summary row exists")
    }

    fn cell(&self, benchmark: &str, config: &str) -> String {
        let s = self.summary_for(benchmark, config);
        let mark = if s.median_tte.reproducible { "" } else { "*" };
        format!("{}{mark} ({}/{})", s.median_tte.value, s.successes, s.repetitions)
    }

    /// Plain-text table: the first config is the subject; every other
    /// config gets an MTTE column and a ratio column against it.
    pub fn render_table(&self) -> String {
        let subject = &self.configs[0];
        let baselines = &self.configs[1..];
        let comparisons: Vec<Comparison> = baselines
            .iter()
            .map(|b| self.compare(b, subject).expect("configs present"))
            .collect();
        let mut header = vec!["benchmark".to_string(), format!("{subject} MTTE")];
        for b in baselines {
            header.push(format!("{b} MTTE"));
            header.push(format!("{b} ratio"));
        }
        let mut rows = vec![header];
        for (i, bench) in self.benchmarks.iter().enumerate() {
            let mut row = vec![bench.clone(), self.cell(bench, subject)];
            for (b, cmp) in baselines.iter().zip(&comparisons) {
                row.push(self.cell(bench, b));
                row.push(format!("{:.2}", cmp.rows[i].1.ratio));
            }
            rows.push(row);
        }
        let mut footer = |label: &str, f: &dyn Fn(&Tally) -> String| {
            let mut row = vec![label.to_string(), String::new()];
            for c in &comparisons {
                row.push(String::new());
                row.push(f(&c.tally));
            }
            rows.push(row);
        };
        footer("win/loss/tie", &|t| format!("{}/{}/{}", t.wins, t.losses, t.ties));
        footer("average ratio", &|t| format!("{:.2}", t.average_ratio));
        footer("sign test p", &|t| t.p_value.map_or("-".into(), |p| format!("{p:.3e}")));

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        out.push_str(&format!(
            "\nMTTE in executions; * marks the penalty value 2 x {} (target hit in at most half the runs).\n",
            self.budget
        ));
        out
    }

    pub fn render_csv(&self) -> String {
        let subject = &self.configs[0];
        let mut out = String::from("benchmark,config,mtte,reproducible,successes,repetitions,ratio_vs_subject,verdict\n");
        for b in &self.benchmarks {
            for c in &self.configs {
                let s = self.summary_for(b, c);
                let (ratio, verdict) = if c == subject {
                    (String::new(), String::new())
                } else {
                    let o = compare_outcomes(
                        &self.outcomes(b, c).unwrap(),
                        &self.outcomes(b, subject).unwrap(),
                        self.budget,
                    );
                    (format!("{:.4}", o.ratio), format!("{:?}", o.verdict).to_lowercase())
                };
                out.push_str(&format!(
                    "{b},{c},{},{},{},{},{ratio},{verdict}\n",
                    s.median_tte.value, s.median_tte.reproducible, s.successes, s.repetitions
                ));
            }
        }
        out
    }
}

fn config_dir_name(label: &str) -> String {
    label.replace(':', "-")
}

/// Runs every (benchmark, config, repetition) campaign and writes the
/// outputs when `cfg.output_dir` is set. A campaign that fails to run is
/// recorded as a failed repetition.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult, BenchError> {
    cfg.validate().map_err(|message| BenchError::Format {
        path: "<suite>".into(),
        message,
    })?;
    let benchmarks: Vec<Arc<Benchmark>> = cfg
        .benchmarks
        .iter()
        .map(|s| load_benchmark(s).map(Arc::new))
        .collect::<Result<_, _>>()?;
    let mut names = BTreeSet::new();
    for b in &benchmarks {
        if !names.insert(b.name.clone()) {
            return Err(BenchError::Format {
                path: "<suite>".into(),
                message: format!("duplicate benchmark name `{}`", b.name),
            });
        }
    }

    let mut jobs = Vec::new();
    for b in &benchmarks {
        let program = Arc::new(b.program.clone());
        for c in &cfg.configs {
            for rep in 0..cfg.repetitions {
                jobs.push((b.clone(), program.clone(), *c, rep));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .expect("thread pool");
    let runs: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(b, program, c, rep)| run_one(cfg, b, program, c, *rep))
            .collect::<Result<Vec<_>, BenchError>>()
    })?;

    let result = SuiteResult::new(
        cfg.budget,
        cfg.repetitions,
        benchmarks.iter().map(|b| b.name.clone()).collect(),
        cfg.configs.iter().map(ToString::to_string).collect(),
        runs,
    );
    if let Some(out) = &cfg.output_dir {
        fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        let write = |name: &str, text: String| {
            let p = out.join(name);
            fs::write(&p, text).map_err(|e| io_err(&p, e))
        };
        write("results.json", result.to_json())?;
        write("table.txt", result.render_table())?;
        write("table.csv", result.render_csv())?;
    }
    Ok(result)
}

fn run_one(
    cfg: &SuiteConfig,
    b: &Benchmark,
    program: &Arc<crate::model::TargetProgram>,
    c: &FuzzerConfig,
    rep: u32,
) -> Result<RunRecord, BenchError> {
    let rng_seed = repetition_seed(cfg.rng_seed, &b.name, c, rep);
    let mut predictor = cfg.predictor.clone();
    predictor.strategy = c.predictor.unwrap_or(Strategy::Oracle);
    let campaign = CampaignConfig {
        name: b.name.clone(),
        program: program.clone(),
        targets: b.targets.clone(),
        seeds: b.seeds.clone(),
        witness: b.witness.clone(),
        metric: c.metric,
        predictor,
        budget: Budget {
            max_executions: cfg.budget,
            max_wall_seconds: None,
        },
        rng_seed,
        stop_on_target: true,
        max_input_len: cfg.max_input_len,
        step_limit: crate::campaign::DEFAULT_CAMPAIGN_STEP_LIMIT,
    };
    let mut record = RunRecord {
        benchmark: b.name.clone(),
        config: c.to_string(),
        rep,
        rng_seed,
        target_hit: false,
        tte_executions: None,
        executions: 0,
        predictor_downgraded: false,
        error: None,
    };
    match run_campaign(&campaign) {
        Ok(outcome) => {
            let r = &outcome.report;
            record.target_hit = r.target_hit;
            record.tte_executions = r.tte_executions;
            record.executions = r.executions;
            record.predictor_downgraded = r.predictor.as_ref().is_some_and(|p| p.downgraded);
            if let Some(out) = &cfg.output_dir {
                let dir = out
                    .join("campaigns")
                    .join(&b.name)
                    .join(config_dir_name(&record.config))
                    .join(format!("rep-{rep:03}"));
                write_campaign_dir(&dir, program, &outcome, campaign.step_limit).map_err(|e| io_err(&dir, e))?;
            }
        }
        Err(e) => {
            log::error!("{} {} rep {rep}: {e}", b.name, c);
            record.error = Some(e.to_string());
        }
    }
    Ok(record)
}
