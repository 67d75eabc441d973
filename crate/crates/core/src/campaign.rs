//! The fuzzing loop.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::callgraph::build_call_graph;
use crate::distance::{Metric, TraceScorer};
use crate::error::{CampaignError, PredictError};
use crate::location::Location;
use crate::model::{execute, Benchmark, ExecutionResult, TargetProgram};
use crate::mutate::{mutate, rng_from_seed, DEFAULT_MAX_INPUT_LEN};
use crate::predictor::{predict, PredictedStack, PredictorConfig, StackKind, Strategy};
use crate::scheduler::{assign_energy, choose_seed, CorpusView, Seed};

pub const DEFAULT_CAMPAIGN_STEP_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_executions: u64,
    /// Optional wall-clock cap; leaves runs non-reproducible when it bites.
    pub max_wall_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub name: String,
    pub program: Arc<TargetProgram>,
    /// Crashes at any of these count as target crashes. The first one is
    /// the location scores and predictions are computed for.
    pub targets: Vec<Location>,
    pub seeds: Vec<Vec<u8>>,
    pub witness: Option<Vec<u8>>,
    pub metric: Metric,
    pub predictor: PredictorConfig,
    pub budget: Budget,
    pub rng_seed: u64,
    pub stop_on_target: bool,
    pub max_input_len: usize,
    pub step_limit: u64,
}

impl CampaignConfig {
    pub fn new(benchmark: &Benchmark, metric: Metric, predictor: PredictorConfig) -> Self {
        CampaignConfig {
            name: benchmark.name.clone(),
            program: Arc::new(benchmark.program.clone()),
            targets: benchmark.targets.clone(),
            seeds: benchmark.seeds.clone(),
            witness: benchmark.witness.clone(),
            metric,
            predictor,
            budget: Budget {
                max_executions: 200_000,
                max_wall_seconds: None,
            },
            rng_seed: 0,
            stop_on_target: true,
            max_input_len: DEFAULT_MAX_INPUT_LEN,
            step_limit: DEFAULT_CAMPAIGN_STEP_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Triage {
    TargetCrash,
    OtherCrash,
    NoCrash,
    Hang,
}

pub fn triage(result: &ExecutionResult, targets: &[Location]) -> Triage {
    if result.hang {
        Triage::Hang
    } else if let Some(l) = &result.crash_location {
        if targets.contains(l) {
            Triage::TargetCrash
        } else {
            Triage::OtherCrash
        }
    } else {
        Triage::NoCrash
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashRecord {
    #[serde(with = "hex_bytes")]
    pub input: Vec<u8>,
    pub location: Location,
    pub stack: Vec<Location>,
    pub target: bool,
    /// Execution count at which the input was first run.
    pub execution: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorUsage {
    pub strategy: Strategy,
    /// The configured predictor's answer was unusable and the ablation set
    /// was used instead.
    pub downgraded: bool,
    pub stack: Vec<Location>,
    pub stack_kind: Option<StackKind>,
    pub warnings: Vec<String>,
    pub raw_response: Option<String>,
}

/// Deterministic outcome of one campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub benchmark: String,
    pub metric: Metric,
    pub rng_seed: u64,
    pub budget_executions: u64,
    pub target_hit: bool,
    pub tte_executions: Option<u64>,
    pub executions: u64,
    pub corpus_size: usize,
    pub hangs: u64,
    pub crashes: Vec<CrashRecord>,
    /// `(executions, corpus size)` at powers of two and at the end.
    pub corpus_size_over_time: Vec<(u64, usize)>,
    pub predictor: Option<PredictorUsage>,
}

/// Wall-clock measurements, kept out of [`CampaignReport`] so the report
/// stays reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub predictor_seconds: f64,
    pub tte_wall_seconds: Option<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub timing: Timing,
}

fn resolve_prediction(
    config: &CampaignConfig,
    target: &Location,
) -> Result<(PredictedStack, PredictorUsage), CampaignError> {
    let program = &config.program;
    let cg = build_call_graph(program);
    let ablation = || {
        predict(
            &PredictorConfig::with_strategy(Strategy::Ablation),
            program,
            None,
            &cg,
            target,
        )
    };
    match predict(&config.predictor, program, config.witness.as_deref(), &cg, target) {
        Ok(p) => {
            let usage = PredictorUsage {
                strategy: config.predictor.strategy,
                downgraded: false,
                stack: p.stack.frames().to_vec(),
                stack_kind: Some(p.stack.kind()),
                warnings: p.warnings,
                raw_response: p.raw_response,
            };
            Ok((p.stack, usage))
        }
        Err(PredictError::Invalid { reason, raw }) => {
            log::warn!("prediction invalid ({reason}); falling back to the ablation set");
            let p = ablation()?;
            let usage = PredictorUsage {
                strategy: config.predictor.strategy,
                downgraded: true,
                stack: p.stack.frames().to_vec(),
                stack_kind: Some(p.stack.kind()),
                warnings: vec![format!("prediction invalid: {reason}")],
                raw_response: Some(raw),
            };
            Ok((p.stack, usage))
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs one campaign: seed the corpus, then repeatedly choose a seed,
/// assign energy, and execute that many mutants of it.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutcome, CampaignError> {
    let started = Instant::now();
    if config.seeds.is_empty() {
        return Err(CampaignError::Config("at least one initial seed is required".into()));
    }
    if config.budget.max_executions == 0 {
        return Err(CampaignError::Config("execution budget must be positive".into()));
    }
    let target = config
        .targets
        .first()
        .ok_or_else(|| CampaignError::Config("no target location".into()))?
        .clone();
    let program: &TargetProgram = &config.program;
    if program.statement_id(&target).is_none() {
        return Err(crate::error::GraphError::UnknownLocation(target).into());
    }

    let (predicted, usage) = if config.metric == Metric::Staczzer {
        let (s, u) = resolve_prediction(config, &target)?;
        (s.as_set(), Some(u))
    } else {
        (BTreeSet::new(), None)
    };
    let predictor_seconds = started.elapsed().as_secs_f64();
    let scorer = TraceScorer::new(config.metric, program, &target, &predicted);

    let mut st = State {
        config,
        scorer,
        view: CorpusView::new(config.metric),
        seen: HashSet::new(),
        crashes: Vec::new(),
        executions: 0,
        hangs: 0,
        tte: None,
        tte_wall: None,
        next_id: 0,
        series: Vec::new(),
        started,
    };

    let mut initial = HashSet::new();
    for input in &config.seeds {
        if !initial.insert(input.as_slice()) {
            continue;
        }
        let r = st.run(input);
        st.record_crash(input, &r, true);
        st.seen.insert(r.trace.clone());
        st.add_seed(input.clone(), r);
        if st.done() {
            break;
        }
    }

    let mut rng = rng_from_seed(config.rng_seed);
    while !st.done() && st.executions < config.budget.max_executions && !st.out_of_time() {
        let i = choose_seed(&mut st.view);
        let energy = assign_energy(&st.view, &st.view.seeds[i]);
        let parent = st.view.seeds[i].input.clone();
        for _ in 0..energy {
            let child = mutate(&parent, &mut rng, config.max_input_len);
            let r = st.run(&child);
            if r.hang {
                st.hangs += 1;
                continue;
            }
            let fresh = !st.seen.contains(&r.trace);
            st.record_crash(&child, &r, fresh);
            if fresh {
                st.seen.insert(r.trace.clone());
                st.add_seed(child, r);
            }
            if st.done() {
                break;
            }
        }
    }

    st.series.push((st.executions, st.view.len()));
    st.series.dedup();
    let report = CampaignReport {
        benchmark: config.name.clone(),
        metric: config.metric,
        rng_seed: config.rng_seed,
        budget_executions: config.budget.max_executions,
        target_hit: st.tte.is_some(),
        tte_executions: st.tte,
        executions: st.executions,
        corpus_size: st.view.len(),
        hangs: st.hangs,
        crashes: st.crashes,
        corpus_size_over_time: st.series,
        predictor: usage,
    };
    Ok(CampaignOutcome {
        report,
        timing: Timing {
            predictor_seconds,
            tte_wall_seconds: st.tte_wall,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

struct State<'a> {
    config: &'a CampaignConfig,
    scorer: TraceScorer,
    view: CorpusView,
    seen: HashSet<crate::model::Trace>,
    crashes: Vec<CrashRecord>,
    executions: u64,
    hangs: u64,
    tte: Option<u64>,
    tte_wall: Option<f64>,
    next_id: u64,
    series: Vec<(u64, usize)>,
    started: Instant,
}

impl State<'_> {
    fn run(&mut self, input: &[u8]) -> ExecutionResult {
        let r = execute(&self.config.program, input, self.config.step_limit);
        self.executions += 1;
        if self.executions.is_power_of_two() {
            self.series.push((self.executions, self.view.len()));
        }
        if self.tte.is_none() && triage(&r, &self.config.targets) == Triage::TargetCrash {
            self.tte = Some(self.executions);
            self.tte_wall = Some(self.started.elapsed().as_secs_f64());
        }
        r
    }

    /// Stores crashes with new traces, plus the first target crash whatever
    /// its trace.
    fn record_crash(&mut self, input: &[u8], r: &ExecutionResult, fresh: bool) {
        let Some(location) = r.crash_location.clone() else {
            return;
        };
        let target = self.config.targets.contains(&location);
        let first_target = target && self.tte == Some(self.executions);
        if fresh || first_target {
            self.crashes.push(CrashRecord {
                input: input.to_vec(),
                location,
                stack: r.crash_stack.clone().unwrap_or_default(),
                target,
                execution: self.executions,
            });
        }
    }

    fn add_seed(&mut self, input: Vec<u8>, result: ExecutionResult) {
        let score = self.scorer.score(&result.trace);
        self.view.push(Seed {
            id: self.next_id,
            input,
            result,
            score,
            discovery_step: self.executions,
        });
        self.next_id += 1;
    }

    fn done(&self) -> bool {
        self.config.stop_on_target && self.tte.is_some()
    }

    fn out_of_time(&self) -> bool {
        self.config
            .budget
            .max_wall_seconds
            .is_some_and(|m| self.started.elapsed().as_secs_f64() >= m)
    }
}

/// Re-executes every recorded crash and checks location and stack.
pub fn verify_crashes(program: &TargetProgram, report: &CampaignReport, step_limit: u64) -> Result<(), String> {
    for (i, c) in report.crashes.iter().enumerate() {
        let r = execute(program, &c.input, step_limit);
        if r.crash_location.as_ref() != Some(&c.location) || r.crash_stack.as_deref() != Some(&c.stack[..]) {
            return Err(format!("crash {i} ({}) does not replay", hex::encode(&c.input)));
        }
    }
    Ok(())
}

/// Writes `report.json`, `timing.json` and one `crash-NNN.hex` per crash
/// into `dir`, after checking that every crash replays.
pub fn write_campaign_dir(
    dir: &Path,
    program: &TargetProgram,
    outcome: &CampaignOutcome,
    step_limit: u64,
) -> std::io::Result<()> {
    verify_crashes(program, &outcome.report, step_limit)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report_json(&outcome.report))?;
    let timing = serde_json::to_string_pretty(&outcome.timing).expect("timing serializes");
    fs::write(dir.join("timing.json"), timing + "\n")?;
    for (i, c) in outcome.report.crashes.iter().enumerate() {
        fs::write(dir.join(format!("crash-{i:03}.hex")), hex::encode(&c.input) + "\n")?;
    }
    Ok(())
}

pub fn report_json(report: &CampaignReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::model::load_program;

    fn toy_config(metric: Metric, strategy: Strategy, rng_seed: u64) -> CampaignConfig {
        let mut c = CampaignConfig::new(&builtin::cxxfilt_toy(), metric, PredictorConfig::with_strategy(strategy));
        c.rng_seed = rng_seed;
        c.budget.max_executions = 1_000_000;
        c
    }

    #[test]
    fn toy_target_is_found() {
        let out = run_campaign(&toy_config(Metric::Staczzer, Strategy::Oracle, 1)).unwrap();
        let r = &out.report;
        assert!(r.target_hit);
        let tte = r.tte_executions.unwrap();
        assert!(tte <= r.executions);
        let first = r.crashes.iter().find(|c| c.target).unwrap();
        assert_eq!(first.execution, tte);
        assert_eq!(first.stack[0], Location::new("cxxfilt.c", 11));
        verify_crashes(&builtin::cxxfilt_toy().program, r, DEFAULT_CAMPAIGN_STEP_LIMIT).unwrap();
        let usage = r.predictor.as_ref().unwrap();
        assert!(!usage.downgraded);
        assert_eq!(usage.stack.len(), 3);
    }

    #[test]
    fn every_metric_finds_the_toy_target() {
        for m in Metric::ALL {
            let out = run_campaign(&toy_config(m, Strategy::Ablation, 7)).unwrap();
            assert!(out.report.target_hit, "{m}");
            assert_eq!(out.report.predictor.is_some(), m == Metric::Staczzer);
        }
    }

    #[test]
    fn reports_are_reproducible() {
        for strategy in [Strategy::Oracle, Strategy::Ablation] {
            let c = toy_config(Metric::Staczzer, strategy, 99);
            let a = report_json(&run_campaign(&c).unwrap().report);
            let b = report_json(&run_campaign(&c).unwrap().report);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn crash_free_program_runs_to_budget() {
        let p = load_program(
            r#"
entry = "main"
[functions.main]
file = "m.c"
[[functions.main.blocks]]
id = "b"
statements = [{ line = 1, kind = "assign", var = "x", expr = "in[0]" }]
terminator = { kind = "branch", cond = "x == 'A'", then = "a", else = "z" }
[[functions.main.blocks]]
id = "a"
statements = [{ line = 2, kind = "nop" }]
terminator = { kind = "return" }
[[functions.main.blocks]]
id = "z"
statements = [{ line = 3, kind = "nop" }]
terminator = { kind = "return" }
"#,
        )
        .unwrap();
        let c = CampaignConfig {
            name: "flat".into(),
            program: Arc::new(p),
            targets: vec![Location::new("m.c", 2)],
            seeds: vec![b"B".to_vec(), b"B".to_vec()],
            witness: None,
            metric: Metric::Afl,
            predictor: PredictorConfig::default(),
            budget: Budget {
                max_executions: 500,
                max_wall_seconds: None,
            },
            rng_seed: 3,
            stop_on_target: true,
            max_input_len: 64,
            step_limit: 1000,
        };
        let r = run_campaign(&c).unwrap().report;
        assert!(!r.target_hit && r.tte_executions.is_none() && r.crashes.is_empty());
        assert!(r.executions >= 500);
        // One batch may straddle the budget, never more.
        assert!(r.executions < 500 + 64 * 16 * 4);
        assert!(r.corpus_size <= 2);
    }

    #[test]
    fn invalid_mock_falls_back_to_ablation() {
        let mut c = toy_config(Metric::Staczzer, Strategy::Mock, 5);
        c.predictor.mock_script = Some(vec![Location::new("cxxfilt.c", 11), Location::new("cxxfilt.c", 35)]);
        let r = run_campaign(&c).unwrap().report;
        let usage = r.predictor.unwrap();
        assert!(usage.downgraded);
        assert_eq!(usage.stack.len(), 4);
    }

    #[test]
    fn hard_predictor_failure_is_an_error() {
        let mut c = toy_config(Metric::Staczzer, Strategy::Oracle, 5);
        c.witness = None;
        assert!(matches!(run_campaign(&c), Err(CampaignError::Predictor(PredictError::MissingWitness))));
    }

    #[test]
    fn triage_classes() {
        let p = builtin::cxxfilt_toy().program;
        let t = [Location::new("cxxfilt.c", 11)];
        let crash = execute(&p, &builtin::cxxfilt_input(true, b"99"), 1000);
        assert_eq!(triage(&crash, &t), Triage::TargetCrash);
        assert_eq!(triage(&crash, &[Location::new("cxxfilt.c", 4)]), Triage::OtherCrash);
        let ok = execute(&p, &builtin::cxxfilt_input(true, b"Alice"), 1000);
        assert_eq!(triage(&ok, &t), Triage::NoCrash);
        let hang = execute(&p, &builtin::cxxfilt_input(true, b"Alice"), 3);
        assert_eq!(triage(&hang, &t), Triage::Hang);
    }

    #[test]
    fn campaign_dir_contents() {
        let c = toy_config(Metric::Staczzer, Strategy::Oracle, 1);
        let out = run_campaign(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_campaign_dir(dir.path(), &c.program, &out, c.step_limit).unwrap();
        let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back: CampaignReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, out.report);
        let hex0 = fs::read_to_string(dir.path().join("crash-000.hex")).unwrap();
        assert_eq!(hex::decode(hex0.trim()).unwrap(), out.report.crashes[0].input);
        assert!(dir.path().join("timing.json").exists());
    }
}
