//! One campaign per metric on the cxxfilt fragment, then a campaign
//! directory written for the stack-overlap run.

use stackfuzz::builtin;
use stackfuzz::campaign::{run_campaign, write_campaign_dir, CampaignConfig};
use stackfuzz::predictor::PredictorConfig;
use stackfuzz::Metric;

fn main() {
    let b = builtin::cxxfilt_toy();
    for metric in Metric::ALL {
        let mut cfg = CampaignConfig::new(&b, metric, PredictorConfig::default());
        cfg.rng_seed = 11;
        cfg.budget.max_executions = 20_000;
        let out = run_campaign(&cfg).unwrap();
        let r = &out.report;
        println!(
            "{metric:<11} tte {:>6}  executions {:>6}  corpus {:>3}",
            r.tte_executions.map_or("-".into(), |t| t.to_string()),
            r.executions,
            r.corpus_size
        );
    }

    let cfg = CampaignConfig::new(&b, Metric::Staczzer, PredictorConfig::default());
    let out = run_campaign(&cfg).unwrap();
    let dir = std::env::temp_dir().join("stackfuzz-campaign-example");
    write_campaign_dir(&dir, &cfg.program, &out, cfg.step_limit).unwrap();
    println!("\nwrote {}:", dir.display());
    println!("{}", std::fs::read_to_string(dir.join("report.json")).unwrap());
}
