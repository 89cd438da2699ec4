//! Black-box search over environment genomes.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    compute_engagement, compute_flourishing, run_simulation, EngagementScope, EngineError, SimConfig,
};
use crate::envgen::{genome_to_environment, EnvGenome};
use crate::lmkit::{care_evaluate, LmError, Provider};
use crate::narrate::{render_transcript, ActivityMap};

pub mod ga;
pub mod smbo;

pub use ga::{crossover, ga_run, mutate, GaConfig, GaResult, GenerationStats};
pub use smbo::{smbo_run, SearchBounds, SmboConfig, SmboResult};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("invalid optimizer config: {0}")]
    Config(String),
}

/// Scores a genome by LM judgment of a transcript window.
#[derive(Clone)]
pub struct CareObjective {
    pub provider: Arc<dyn Provider>,
    pub window: Range<usize>,
    pub map: ActivityMap,
}

impl CareObjective {
    pub const DEFAULT_WINDOW: Range<usize> = 4000..4500;

    pub fn new(provider: Arc<dyn Provider>) -> Self {
        CareObjective { provider, window: Self::DEFAULT_WINDOW, map: ActivityMap::default() }
    }
}

impl fmt::Debug for CareObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CareObjective").field("window", &self.window).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Objective {
    Engagement(EngagementScope),
    Flourishing,
    Care(CareObjective),
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Engagement(_) => "engagement",
            Objective::Flourishing => "flourishing",
            Objective::Care(_) => "care",
        }
    }
}

/// Averages over the simulations behind one fitness value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenomeEval {
    /// Objective value; `-inf` for genomes that do not build a world.
    pub score: f64,
    pub engagement: f64,
    pub flourishing: f64,
    pub valid: bool,
}

impl GenomeEval {
    pub const INVALID: GenomeEval =
        GenomeEval { score: f64::NEG_INFINITY, engagement: 0.0, flourishing: 0.0, valid: false };
}

/// Deterministic seed for one simulation of one candidate.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        x = splitmix(x ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Simulates `genome` once per seed (world layout and agent share the seed).
pub fn evaluate_genome(
    objective: &Objective,
    genome: &EnvGenome,
    seeds: &[u64],
    steps: usize,
) -> Result<GenomeEval, OptimizeError> {
    if seeds.is_empty() {
        return Err(OptimizeError::Config("at least one evaluation run is required".into()));
    }
    let mut score = 0.0;
    let mut engagement = 0.0;
    let mut flourishing = 0.0;
    for &seed in seeds {
        let Ok(env) = genome_to_environment(genome, seed) else {
            return Ok(GenomeEval::INVALID);
        };
        let record = run_simulation(&env, &SimConfig { steps, ..SimConfig::with_seed(seed) })?;
        let e = compute_engagement(&record, EngagementScope::AllNeeds)?;
        let f = compute_flourishing(&record)?;
        score += match objective {
            Objective::Engagement(EngagementScope::AllNeeds) => e,
            Objective::Engagement(scope) => compute_engagement(&record, *scope)?,
            Objective::Flourishing => f,
            Objective::Care(care) => {
                let transcript = render_transcript(&record, care.window.clone(), &care.map);
                if transcript.is_empty() {
                    0.0
                } else {
                    care_evaluate(care.provider.as_ref(), &transcript)?.p_yes
                }
            }
        };
        engagement += e;
        flourishing += f;
    }
    let n = seeds.len() as f64;
    Ok(GenomeEval { score: score / n, engagement: engagement / n, flourishing: flourishing / n, valid: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmkit::CareOracle;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(7, &[0, 1, 0]);
        assert_eq!(a, derive_seed(7, &[0, 1, 0]));
        assert_ne!(a, derive_seed(7, &[0, 1, 1]));
        assert_ne!(a, derive_seed(7, &[1, 0, 0]));
        assert_ne!(a, derive_seed(8, &[0, 1, 0]));
    }

    #[test]
    fn invalid_genomes_score_worst() {
        let mut g = EnvGenome::default();
        g.n_adversarial_belonging = 80;
        let e = evaluate_genome(&Objective::Flourishing, &g, &[1], 100).unwrap();
        assert_eq!(e, GenomeEval::INVALID);
        assert!(evaluate_genome(&Objective::Flourishing, &EnvGenome::default(), &[], 100).is_err());
    }

    #[test]
    fn objectives_read_the_right_metric() {
        let g = EnvGenome::default();
        let f = evaluate_genome(&Objective::Flourishing, &g, &[3, 4], 600).unwrap();
        assert_eq!(f.score, f.flourishing);
        let e = evaluate_genome(&Objective::Engagement(EngagementScope::AllNeeds), &g, &[3, 4], 600).unwrap();
        assert_eq!(e.score, e.engagement);
        assert_eq!(e.flourishing, f.flourishing);
        let care = Objective::Care(CareObjective { window: 100..600, ..CareObjective::new(Arc::new(CareOracle::default())) });
        let c = evaluate_genome(&care, &g, &[3, 4], 600).unwrap();
        assert!((0.0..=1.0).contains(&c.score));
    }

    #[test]
    fn idle_window_scores_zero_care() {
        let mut g = EnvGenome::default();
        g.n_supportive_per_need.insert(crate::engine::NeedKind::Physiological, 0);
        let care = Objective::Care(CareObjective { window: 100..600, ..CareObjective::new(Arc::new(CareOracle::default())) });
        let c = evaluate_genome(&care, &g, &[3], 600).unwrap();
        assert!(c.valid);
        assert_eq!(c.score, 0.0);
    }
}
