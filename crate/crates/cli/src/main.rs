mod config;
mod experiments;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use maslow_core::lmkit::CareOracle;
use maslow_core::optimize::{ga_run, smbo_run, CareObjective};
use maslow_core::{EngagementScope, Objective};
use serde_json::json;

use config::{ExperimentConfig, ExperimentId, ProviderKind};
use experiments::{search, Ctx, Outcome, Summary};
use output::OutDir;

/// Maslow's gridworld experiment runner.
#[derive(Debug, Parser)]
#[command(name = "maslow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment end to end.
    Run {
        #[arg(value_enum)]
        experiment: ExperimentId,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Flourishing and engagement across adversarial replenishment rates.
    Sweep {
        /// Comma-separated replenishment rates.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Search environment genomes for one objective.
    Optimize {
        #[arg(long, value_enum, default_value = "ga")]
        method: Method,
        #[arg(long, value_enum, default_value = "engagement")]
        objective: ObjectiveArg,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        evaluations: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the checks recorded in every summary.json under a directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit nonzero if any recorded check failed.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Ga,
    Smbo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Engagement,
    BelongingEngagement,
    Flourishing,
    Care,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Worker threads for independent runs.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on live completion requests.
    #[arg(long)]
    max_requests: Option<usize>,
    /// Skip per-run JSONL logs.
    #[arg(long)]
    no_logs: bool,
    /// Exit nonzero if any acceptance check fails.
    #[arg(long)]
    check: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.runs.is_some() {
            cfg.runs = self.runs;
        }
        if let Some(p) = self.provider {
            cfg.provider = p;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.max_requests.is_some() {
            cfg.max_requests = self.max_requests;
        }
        if self.no_logs {
            cfg.write_logs = false;
        }
        if let Some(jobs) = cfg.jobs {
            rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("configuring worker pool")?;
        }
        Ok(cfg)
    }
}

fn print_summary(summary: &Summary) {
    println!("{} ({:?} provider)", summary.experiment, summary.provider);
    for c in &summary.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("  {status} {} {}", c.name, c.detail);
    }
}

fn optimize(method: Method, objective: ObjectiveArg, generations: Option<usize>, evaluations: Option<usize>, cfg: &mut ExperimentConfig) -> Result<Summary> {
    if let Some(g) = generations {
        cfg.ga.generations = g;
    }
    if let Some(e) = evaluations {
        cfg.smbo.evaluations = e;
    }
    cfg.validate()?;
    let method_name = match method {
        Method::Ga => "ga",
        Method::Smbo => "smbo",
    };
    let name = format!("optimize-{method_name}-{}", objective.to_possible_value().expect("named").get_name());
    let ctx = Ctx { cfg, out: OutDir::create(cfg.out.join(&name))? };
    let objective = match objective {
        ObjectiveArg::Engagement => Objective::Engagement(EngagementScope::AllNeeds),
        ObjectiveArg::BelongingEngagement => Objective::Engagement(EngagementScope::BelongingOnly),
        ObjectiveArg::Flourishing => Objective::Flourishing,
        ObjectiveArg::Care => Objective::Care(CareObjective::new(ctx.provider(CareOracle::default())?)),
    };
    let runs = cfg.runs.unwrap_or(20);
    let results = match method {
        Method::Ga => {
            let r = ga_run(&objective, &cfg.ga, cfg.seed)?;
            search::write_ga_history(&ctx, &[&r])?;
            ctx.out.write_json("best_genome.json", &r.best)?;
            let f = search::evaluate_flourishing(&ctx, "best", &r.best, runs)?;
            json!({ "best": r.best, "search_eval": r.best_eval, "flourishing": experiments::metric(maslow_core::stats::mean(&f), &f) })
        }
        Method::Smbo => {
            let r = smbo_run(&objective, &cfg.smbo, cfg.seed)?;
            search::write_trials(&ctx, "trials.jsonl", &r)?;
            ctx.out.write_json("best_genome.json", &r.best)?;
            let f = search::evaluate_flourishing(&ctx, "best", &r.best, runs)?;
            json!({ "best": r.best, "search_eval": r.best_eval, "flourishing": experiments::metric(maslow_core::stats::mean(&f), &f) })
        }
    };
    experiments::finish(&ctx, &name, Outcome { results, checks: Vec::new() })
}

fn run(cli: Cli) -> Result<bool> {
    let (summary, check) = match cli.command {
        Command::Run { experiment, common } => {
            let cfg = common.resolve()?;
            (experiments::run_experiment(experiment, &cfg)?, common.check)
        }
        Command::Sweep { rates, common } => {
            let mut cfg = common.resolve()?;
            if let Some(r) = rates {
                if r.is_empty() {
                    bail!("--rates needs at least one value");
                }
                cfg.replenish_levels = r;
            }
            cfg.validate()?;
            let ctx = Ctx { cfg: &cfg, out: OutDir::create(cfg.out.join("sweep"))? };
            let outcome = experiments::gridworld::replenish_sweep(&ctx, &cfg.replenish_levels)?;
            (experiments::finish(&ctx, "sweep", outcome)?, common.check)
        }
        Command::Optimize { method, objective, generations, evaluations, common } => {
            let mut cfg = common.resolve()?;
            (optimize(method, objective, generations, evaluations, &mut cfg)?, common.check)
        }
        Command::Report { out, check } => return report::report(&out).map(|ok| ok || !check),
    };
    print_summary(&summary);
    Ok(summary.passed() || !check)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
