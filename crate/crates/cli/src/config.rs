use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use maslow_core::attachment::KnowledgeConfig;
use maslow_core::lmkit::live::API_KEY_ENV;
use maslow_core::lmkit::LiveConfig;
use maslow_core::optimize::{GaConfig, SmboConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    FixedEnvs,
    ReplenishSweep,
    GaOpt,
    CareOpt,
    Respect,
    Aas,
    RelationshipInference,
    KnowledgeGridworld,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::FixedEnvs => "fixed-envs",
            ExperimentId::ReplenishSweep => "replenish-sweep",
            ExperimentId::GaOpt => "ga-opt",
            ExperimentId::CareOpt => "care-opt",
            ExperimentId::Respect => "respect",
            ExperimentId::Aas => "aas",
            ExperimentId::RelationshipInference => "relationship-inference",
            ExperimentId::KnowledgeGridworld => "knowledge-gridworld",
        }
    }

    /// Independent runs per condition when neither flag nor config sets them.
    pub fn default_runs(self) -> usize {
        match self {
            ExperimentId::FixedEnvs | ExperimentId::ReplenishSweep => 40,
            ExperimentId::GaOpt | ExperimentId::CareOpt => 20,
            ExperimentId::Respect => 15,
            ExperimentId::Aas => 1,
            ExperimentId::RelationshipInference | ExperimentId::KnowledgeGridworld => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Live,
}

/// Everything that determines an experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: Option<usize>,
    pub provider: ProviderKind,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub max_requests: Option<usize>,
    pub write_logs: bool,
    pub steps: usize,
    pub adv_replenish: f64,
    pub replenish_levels: Vec<f64>,
    /// Steps aggregated into one metrics.csv row.
    pub metrics_bin: usize,
    pub ewma_alpha: f64,
    pub ga: GaConfig,
    pub smbo: SmboConfig,
    pub knowledge: KnowledgeConfig,
    pub live: LiveConfig,
    pub aas_items: Option<PathBuf>,
    pub interview_rounds: usize,
    pub interview_state: String,
    pub entries_per_run: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            runs: None,
            provider: ProviderKind::Mock,
            out: PathBuf::from("out"),
            jobs: None,
            max_requests: None,
            write_logs: true,
            steps: 5000,
            adv_replenish: 0.25,
            replenish_levels: vec![1.0, 0.75, 0.5, 0.25, 0.1],
            metrics_bin: 50,
            ewma_alpha: 0.01,
            ga: GaConfig::default(),
            smbo: SmboConfig::default(),
            knowledge: KnowledgeConfig::default(),
            live: LiveConfig::default(),
            aas_items: None,
            interview_rounds: 2,
            interview_state: "browsed social media".into(),
            entries_per_run: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn runs_for(&self, id: ExperimentId) -> usize {
        self.runs.unwrap_or_else(|| id.default_runs())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == Some(0) {
            bail!("--runs must be positive");
        }
        if self.steps == 0 || self.metrics_bin == 0 {
            bail!("steps and metrics_bin must be positive");
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            bail!("ewma_alpha must lie in (0, 1]");
        }
        if self.provider == ProviderKind::Live && std::env::var_os(API_KEY_ENV).is_none() {
            bail!("live provider requires the {API_KEY_ENV} environment variable");
        }
        self.ga.validate()?;
        self.smbo.validate()?;
        Ok(())
    }

    pub fn live_config(&self) -> LiveConfig {
        LiveConfig { max_requests: self.max_requests.or(self.live.max_requests), ..self.live.clone() }
    }
}
