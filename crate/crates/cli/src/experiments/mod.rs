use std::sync::Arc;

use anyhow::Result;
use maslow_core::lmkit::{OpenAiCompletions, Provider};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentId, ProviderKind};
use crate::output::OutDir;

pub mod gridworld;
pub mod language;
pub mod search;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub provider: ProviderKind,
    pub config: ExperimentConfig,
    pub results: Value,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: OutDir,
}

impl Ctx<'_> {
    pub fn seeds(&self, runs: usize) -> Vec<u64> {
        (0..runs as u64).map(|i| self.cfg.seed.wrapping_add(i)).collect()
    }

    /// The live client, or `mock` when running offline.
    pub fn provider<P: Provider + 'static>(&self, mock: P) -> Result<Arc<dyn Provider>> {
        Ok(match self.cfg.provider {
            ProviderKind::Mock => Arc::new(mock),
            ProviderKind::Live => Arc::new(OpenAiCompletions::from_env(self.cfg.live_config())?),
        })
    }
}

pub fn run_experiment(id: ExperimentId, cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let ctx = Ctx { cfg, out: OutDir::create(cfg.out.join(id.name()))? };
    log::info!("running {} into {}", id.name(), ctx.out.root().display());
    let outcome = match id {
        ExperimentId::FixedEnvs => gridworld::fixed_envs(&ctx)?,
        ExperimentId::ReplenishSweep => gridworld::replenish_sweep(&ctx, &cfg.replenish_levels)?,
        ExperimentId::KnowledgeGridworld => gridworld::knowledge(&ctx)?,
        ExperimentId::GaOpt => search::ga_opt(&ctx)?,
        ExperimentId::CareOpt => search::care_opt(&ctx)?,
        ExperimentId::Respect => language::respect(&ctx)?,
        ExperimentId::Aas => language::aas(&ctx)?,
        ExperimentId::RelationshipInference => language::relationship_inference(&ctx)?,
    };
    finish(&ctx, id.name(), outcome)
}

pub fn finish(ctx: &Ctx, name: &str, outcome: Outcome) -> Result<Summary> {
    let summary = Summary {
        experiment: name.to_owned(),
        provider: ctx.cfg.provider,
        config: ctx.cfg.clone(),
        results: outcome.results,
        checks: outcome.checks,
    };
    ctx.out.write_json("summary.json", &summary)?;
    Ok(summary)
}

pub fn metric(mean: f64, values: &[f64]) -> Value {
    json!({ "mean": mean, "n": values.len(), "values": values })
}
