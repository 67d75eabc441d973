use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stackfuzz::bench::suite::{run_suite, BenchmarkSource, SuiteConfig, SuiteResult};
use stackfuzz::bench::synth::{write_directed_suite, SynthParams};
use stackfuzz::callgraph::{build_call_graph, reachable_functions, render_slice};
use stackfuzz::campaign::{run_campaign, write_campaign_dir, CampaignConfig};
use stackfuzz::model::Benchmark;
use stackfuzz::mutate::DEFAULT_MAX_INPUT_LEN;
use stackfuzz::predictor::{build_prompt, predict, PredictorConfig, Strategy};
use stackfuzz::{Location, Metric};

#[derive(Parser)]
#[command(name = "stackfuzz", version, about = "Directed greybox fuzzing over program models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign.
    Fuzz(FuzzArgs),
    /// Print the predicted target stack (and optionally the prompt).
    Predict(PredictArgs),
    /// Repeated campaigns and their comparison.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct PredictorArgs {
    #[arg(long, default_value = "oracle")]
    predictor: Strategy,
    /// Chat-completions base URL, for `--predictor llm`.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated `file:line` frames, innermost first, for `--predictor mock`.
    #[arg(long, value_delimiter = ',')]
    mock_stack: Vec<Location>,
}

impl PredictorArgs {
    fn config(&self) -> PredictorConfig {
        let mut c = PredictorConfig::with_strategy(self.predictor);
        c.endpoint_url = self.endpoint.clone();
        c.model_name = self.model.clone();
        if !self.mock_stack.is_empty() {
            c.mock_script = Some(self.mock_stack.clone());
        }
        c
    }
}

#[derive(Args)]
struct FuzzArgs {
    /// Benchmark file, or `builtin:<name>`.
    #[arg(long)]
    benchmark: String,
    #[arg(long, default_value = "staczzer")]
    metric: Metric,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_INPUT_LEN)]
    max_input_len: usize,
    /// Execution budget.
    #[arg(long, default_value_t = 200_000)]
    budget: u64,
    /// Optional wall-clock cap in seconds.
    #[arg(long)]
    max_seconds: Option<f64>,
    /// Keep fuzzing after the target crashes.
    #[arg(long)]
    no_stop_on_target: bool,
    /// Campaign directory for report.json, timing.json and crash files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    benchmark: String,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    show_prompt: bool,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run a suite file; flags override the file's settings.
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two configs from a results directory.
    Compare {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        subject: String,
    },
    /// Generate a synthetic suite of deep-chain benchmarks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 2026)]
        seed: u64,
        #[arg(long, default_value_t = SynthParams::default().depth)]
        depth: usize,
        #[arg(long, default_value_t = SynthParams::default().decoy_width)]
        decoy_width: usize,
    },
}

fn load(spec: &str) -> Result<Benchmark> {
    Ok(BenchmarkSource::parse(spec, Path::new(".")).load()?)
}

fn fuzz(a: FuzzArgs) -> Result<()> {
    let b = load(&a.benchmark)?;
    let mut cfg = CampaignConfig::new(&b, a.metric, a.predictor.config());
    cfg.rng_seed = a.rng_seed;
    cfg.max_input_len = a.max_input_len;
    cfg.budget.max_executions = a.budget;
    cfg.budget.max_wall_seconds = a.max_seconds;
    cfg.stop_on_target = !a.no_stop_on_target;
    let outcome = run_campaign(&cfg)?;
    let r = &outcome.report;
    match r.tte_executions {
        Some(t) => println!("target hit after {t} executions ({:.2}s)", outcome.timing.tte_wall_seconds.unwrap_or(0.0)),
        None => println!("target not hit in {} executions", r.executions),
    }
    println!("corpus {}, crashes {}, hangs {}", r.corpus_size, r.crashes.len(), r.hangs);
    if let Some(p) = &r.predictor {
        let frames: Vec<String> = p.stack.iter().map(ToString::to_string).collect();
        println!("predictor {}{}: {}", p.strategy, if p.downgraded { " (downgraded)" } else { "" }, frames.join(" "));
    }
    if let Some(dir) = &a.out {
        write_campaign_dir(dir, &cfg.program, &outcome, cfg.step_limit)
            .with_context(|| format!("writing {}", dir.display()))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn show_prediction(a: PredictArgs) -> Result<()> {
    let b = load(&a.benchmark)?;
    let Some(target) = b.targets.first() else {
        bail!("benchmark has no target");
    };
    let cg = build_call_graph(&b.program);
    if a.show_prompt {
        let function = b
            .program
            .function_of(target)
            .map(|f| b.program.function(f).name.clone())
            .context("target is not a statement")?;
        let reachable = reachable_functions(&cg, &function)?;
        let slice = render_slice(&b.program, &cg, &reachable, target)?;
        println!("{}\n", build_prompt(&slice, target, &function).text());
    }
    let p = predict(&a.predictor.config(), &b.program, b.witness.as_deref(), &cg, target)?;
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", p.stack.render());
    Ok(())
}

fn bench(c: BenchCommand) -> Result<()> {
    match c {
        BenchCommand::Run {
            suite,
            reps,
            budget,
            parallelism,
            out,
        } => {
            let mut cfg = SuiteConfig::load(&suite)?;
            if let Some(r) = reps {
                cfg.repetitions = r;
            }
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            cfg.output_dir = Some(out.clone());
            let r = run_suite(&cfg)?;
            print!("{}", r.render_table());
            let failed = r.runs.iter().filter(|x| x.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} campaigns failed to run; see results.json");
            }
            println!("results in {}", out.display());
        }
        BenchCommand::Compare {
            results,
            baseline,
            subject,
        } => {
            let r = SuiteResult::load(&results)?;
            let cmp = r.compare(&baseline, &subject)?;
            println!("benchmark,baseline_mtte,subject_mtte,ratio,verdict");
            for (b, o) in &cmp.rows {
                println!(
                    "{b},{},{},{:.4},{}",
                    o.baseline.value,
                    o.subject.value,
                    o.ratio,
                    format!("{:?}", o.verdict).to_lowercase()
                );
            }
            let t = &cmp.tally;
            println!(
                "{subject} vs {baseline}: {} wins, {} losses, {} ties, average ratio {:.2}, sign test p = {}",
                t.wins,
                t.losses,
                t.ties,
                t.average_ratio,
                t.p_value.map_or("-".into(), |p| format!("{p:.3e}"))
            );
        }
        BenchCommand::Synth {
            out,
            count,
            seed,
            depth,
            decoy_width,
        } => {
            let params = SynthParams { depth, decoy_width };
            let path = write_directed_suite(&out, seed, count, params, &["staczzer:oracle", "afl"])?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Fuzz(a) => fuzz(a),
        Command::Predict(a) => show_prediction(a),
        Command::Bench(c) => bench(c),
    }
}
