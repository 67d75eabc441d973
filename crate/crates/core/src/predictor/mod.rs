//! Predicting the call stack at the target crash.

pub mod llm;
pub mod prompt;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::callgraph::{reachable_functions, render_slice, CallGraph};
use crate::error::PredictError;
use crate::location::Location;
use crate::model::{witness_stack, TargetProgram};

pub use prompt::{build_prompt, Prompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Oracle,
    Ablation,
    Llm,
    Mock,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Oracle, Strategy::Ablation, Strategy::Llm, Strategy::Mock];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Oracle => "oracle",
            Strategy::Ablation => "ablation",
            Strategy::Llm => "llm",
            Strategy::Mock => "mock",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown predictor `{s}` (expected oracle, ablation, llm or mock)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub strategy: Strategy,
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    pub timeout_secs: u64,
    pub mock_script: Option<Vec<Location>>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            strategy: Strategy::Oracle,
            endpoint_url: None,
            model_name: None,
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: 1.0,
            max_retries: 3,
            retry_base_delay_ms: 1000,
            timeout_secs: 300,
            mock_script: None,
        }
    }
}

impl PredictorConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        PredictorConfig {
            strategy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        match self.strategy {
            Strategy::Llm if self.endpoint_url.is_none() || self.model_name.is_none() => Err(
                PredictError::Config("llm strategy needs endpoint_url and model_name".into()),
            ),
            Strategy::Mock if self.mock_script.as_ref().is_none_or(Vec::is_empty) => Err(
                PredictError::Config("mock strategy needs a non-empty mock_script".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    /// An ordered call chain, innermost first.
    Chain,
    /// The target plus an unordered set of call sites; no chain order holds.
    SiteSet,
}

/// Predicted target call stack, innermost frame first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictedStack {
    frames: Vec<Location>,
    kind: StackKind,
}

impl PredictedStack {
    /// Builds a chain, checking that frame 0 is `target`, frames are
    /// distinct, and each frame lies in the callee of the next frame's call.
    pub fn chain(
        program: &TargetProgram,
        cg: &CallGraph,
        target: &Location,
        frames: Vec<Location>,
    ) -> Result<Self, String> {
        if frames.first() != Some(target) {
            return Err(format!("first frame must be the target {target}"));
        }
        let mut seen = BTreeSet::new();
        for f in &frames {
            if !seen.insert(f) {
                return Err(format!("frame {f} repeats"));
            }
        }
        for pair in frames.windows(2) {
            let inner_fn = function_of_frame(program, cg, &pair[0])
                .ok_or_else(|| format!("frame {} is not a program statement", pair[0]))?;
            let edge = cg
                .edge_at(&pair[1])
                .ok_or_else(|| format!("frame {} is not a call site", pair[1]))?;
            if edge.callee != inner_fn {
                return Err(format!(
                    "chain break: {} calls {}, but {} lies in {}",
                    pair[1], edge.callee, pair[0], inner_fn
                ));
            }
        }
        Ok(PredictedStack {
            frames,
            kind: StackKind::Chain,
        })
    }

    pub fn site_set(target: Location, sites: impl IntoIterator<Item = Location>) -> Self {
        let mut frames = vec![target.clone()];
        frames.extend(sites.into_iter().filter(|s| *s != target).collect::<BTreeSet<_>>());
        PredictedStack {
            frames,
            kind: StackKind::SiteSet,
        }
    }

    pub fn frames(&self) -> &[Location] {
        &self.frames
    }

    pub fn as_set(&self) -> BTreeSet<Location> {
        self.frames.iter().cloned().collect()
    }

    pub fn kind(&self) -> StackKind {
        self.kind
    }

    pub fn target(&self) -> &Location {
        &self.frames[0]
    }

    /// One frame per line, the format the parser accepts.
    pub fn render(&self) -> String {
        self.frames.iter().map(|f| format!("{f}\n")).collect()
    }
}

fn function_of_frame(program: &TargetProgram, cg: &CallGraph, loc: &Location) -> Option<String> {
    cg.edge_at(loc)
        .map(|e| e.caller.clone())
        .or_else(|| program.function_of(loc).map(|id| program.function(id).name.clone()))
}

/// Outcome of [`predict`]: the stack plus parser warnings and, for the llm
/// strategy, the raw response.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub stack: PredictedStack,
    pub warnings: Vec<String>,
    pub raw_response: Option<String>,
}

/// Produces the predicted stack for `target` with the configured strategy.
/// `witness` is only consulted by the oracle.
pub fn predict(
    config: &PredictorConfig,
    program: &TargetProgram,
    witness: Option<&[u8]>,
    cg: &CallGraph,
    target: &Location,
) -> Result<Prediction, PredictError> {
    config.validate()?;
    let target_fn = program
        .function_of(target)
        .map(|id| program.function(id).name.clone())
        .ok_or_else(|| crate::error::GraphError::UnknownLocation(target.clone()))?;
    let plain = |stack| Prediction {
        stack,
        warnings: Vec::new(),
        raw_response: None,
    };
    match config.strategy {
        Strategy::Oracle => {
            let witness = witness.ok_or(PredictError::MissingWitness)?;
            let frames = witness_stack(program, witness)?;
            let stack = PredictedStack::chain(program, cg, target, frames.clone()).map_err(|reason| {
                PredictError::Invalid {
                    reason,
                    raw: frames.iter().map(|f| format!("{f}\n")).collect(),
                }
            })?;
            Ok(plain(stack))
        }
        Strategy::Ablation => {
            let reachable = reachable_functions(cg, &target_fn)?;
            Ok(plain(PredictedStack::site_set(
                target.clone(),
                cg.internal_sites(&reachable),
            )))
        }
        Strategy::Mock => {
            let script = config.mock_script.clone().unwrap_or_default();
            let stack = PredictedStack::chain(program, cg, target, script.clone()).map_err(|reason| {
                PredictError::Invalid {
                    reason,
                    raw: script.iter().map(|f| format!("{f}\n")).collect(),
                }
            })?;
            Ok(plain(stack))
        }
        Strategy::Llm => {
            let reachable = reachable_functions(cg, &target_fn)?;
            let slice = render_slice(program, cg, &reachable, target)?;
            let prompt = build_prompt(&slice, target, &target_fn);
            let raw = llm::complete(config, &prompt)?;
            let (stack, warnings) = parse_response(&raw, program, cg, &reachable, target)?;
            for w in &warnings {
                log::warn!("{w}");
            }
            Ok(Prediction {
                stack,
                warnings,
                raw_response: Some(raw),
            })
        }
    }
}

/// Accepts `file:line` and `file:line:col`; anything else is not a frame.
fn parse_frame(line: &str) -> Option<Location> {
    let parts: Vec<&str> = line.split(':').collect();
    let numeric = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let text = match parts.as_slice() {
        [file, l, col] if numeric(l) && numeric(col) => format!("{file}:{l}"),
        [_, _] => line.to_string(),
        _ => return None,
    };
    text.parse().ok()
}

/// Turns a model response into a validated chain.
///
/// Comments after `#` and lines that are not `file:line` are ignored. A
/// missing innermost frame is prepended, and frames that are not call sites
/// among `reachable` are dropped with a warning. What remains must form an
/// unbroken chain ending in the entry function.
pub fn parse_response(
    raw: &str,
    program: &TargetProgram,
    cg: &CallGraph,
    reachable: &BTreeSet<String>,
    target: &Location,
) -> Result<(PredictedStack, Vec<String>), PredictError> {
    let invalid = |reason: String| PredictError::Invalid {
        reason,
        raw: raw.to_string(),
    };
    let mut frames: Vec<Location> = raw
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .filter_map(parse_frame)
        .collect();
    if frames.is_empty() {
        return Err(invalid("response contains no file:line frames".into()));
    }
    let mut warnings = Vec::new();
    if frames[0] != *target {
        warnings.push(format!("innermost frame {target} missing; prepended"));
        frames.retain(|f| f != target);
        frames.insert(0, target.clone());
    }
    let sites = cg.internal_sites(reachable);
    let mut kept = vec![frames[0].clone()];
    for f in frames.into_iter().skip(1) {
        if sites.contains(&f) {
            kept.push(f);
        } else {
            warnings.push(format!("dropped {f}: not a call site among the reachable functions"));
        }
    }
    let stack = PredictedStack::chain(program, cg, target, kept).map_err(invalid)?;
    let last = stack.frames().last().unwrap();
    let last_fn = function_of_frame(program, cg, last).unwrap_or_default();
    if last_fn != program.entry_name() {
        return Err(invalid(format!(
            "outermost frame {last} lies in {last_fn}, not the entry function {}",
            program.entry_name()
        )));
    }
    Ok((stack, warnings))
}
