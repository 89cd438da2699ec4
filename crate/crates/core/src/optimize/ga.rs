//! Genetic algorithm with truncation selection and elitism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, evaluate_genome, GenomeEval, Objective, OptimizeError};
use crate::engine::NeedKind;
use crate::envgen::EnvGenome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub truncation_fraction: f64,
    pub elites: usize,
    /// Share of non-elite offspring produced by crossover; the rest mutate.
    pub crossover_fraction: f64,
    pub cont_mut_prob: f64,
    pub cont_mut_range: f64,
    pub disc_mut_prob: f64,
    pub disc_mut_delta: u32,
    pub generations: usize,
    pub evals_per_candidate: usize,
    pub sim_steps: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 30,
            truncation_fraction: 0.5,
            elites: 2,
            crossover_fraction: 0.5,
            cont_mut_prob: 0.15,
            cont_mut_range: 0.1,
            disc_mut_prob: 0.10,
            disc_mut_delta: 1,
            generations: 100,
            evals_per_candidate: 2,
            sim_steps: 5000,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let probs = [self.truncation_fraction, self.crossover_fraction, self.cont_mut_prob, self.disc_mut_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(OptimizeError::Config("fractions and probabilities must lie in [0, 1]".into()));
        }
        if self.population == 0 || self.population % 2 != 0 {
            return Err(OptimizeError::Config("population must be even and positive".into()));
        }
        if self.elites > self.population || self.parents() == 0 {
            return Err(OptimizeError::Config("elites and parents must fit in the population".into()));
        }
        if self.generations == 0 || self.evals_per_candidate == 0 || self.sim_steps == 0 {
            return Err(OptimizeError::Config("generations, evaluations and steps must be positive".into()));
        }
        Ok(())
    }

    pub fn parents(&self) -> usize {
        ((self.population as f64 * self.truncation_fraction).round() as usize).min(self.population)
    }

    /// (crossover, mutation-only) offspring per generation.
    pub fn offspring_split(&self) -> (usize, usize) {
        let budget = self.population - self.elites;
        let crossover = (budget as f64 * self.crossover_fraction).round() as usize;
        (crossover, budget - crossover)
    }
}

fn nudge<R: Rng + ?Sized>(count: u32, delta: u32, rng: &mut R) -> u32 {
    if rng.random_bool(0.5) {
        count.saturating_add(delta)
    } else {
        count.saturating_sub(delta)
    }
}

pub fn mutate<R: Rng + ?Sized>(g: &EnvGenome, cfg: &GaConfig, rng: &mut R) -> EnvGenome {
    let mut out = g.clone();
    if rng.random_bool(cfg.disc_mut_prob) {
        out.n_adversarial_belonging = nudge(out.n_adversarial_belonging, cfg.disc_mut_delta, rng);
    }
    for need in NeedKind::ALL {
        if rng.random_bool(cfg.disc_mut_prob) {
            let n = out.supportive_count(need);
            out.n_supportive_per_need.insert(need, nudge(n, cfg.disc_mut_delta, rng));
        }
    }
    for field in [&mut out.adv_salience, &mut out.adv_replenish] {
        if rng.random_bool(cfg.cont_mut_prob) {
            *field = (*field + rng.random_range(-cfg.cont_mut_range..=cfg.cont_mut_range)).max(0.0);
        }
    }
    out
}

/// Uniform crossover: every field from either parent with equal odds.
pub fn crossover<R: Rng + ?Sized>(a: &EnvGenome, b: &EnvGenome, rng: &mut R) -> EnvGenome {
    let mut pick = |x: f64, y: f64| if rng.random_bool(0.5) { x } else { y };
    let adv_salience = pick(a.adv_salience, b.adv_salience);
    let adv_replenish = pick(a.adv_replenish, b.adv_replenish);
    let n_adversarial_belonging = pick(a.n_adversarial_belonging as f64, b.n_adversarial_belonging as f64) as u32;
    let n_supportive_per_need = NeedKind::ALL
        .iter()
        .map(|&n| (n, pick(a.supportive_count(n) as f64, b.supportive_count(n) as f64) as u32))
        .collect();
    EnvGenome { n_adversarial_belonging, n_supportive_per_need, adv_salience, adv_replenish }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_score: f64,
    pub best_engagement: f64,
    pub best_flourishing: f64,
    pub mean_engagement: f64,
    pub mean_flourishing: f64,
    pub best_genome: EnvGenome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub objective: String,
    pub best: EnvGenome,
    pub best_eval: GenomeEval,
    /// Generation 0 is the initial population.
    pub history: Vec<GenerationStats>,
}

fn rank(evals: &[GenomeEval]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..evals.len()).collect();
    order.sort_by(|&i, &j| evals[j].score.total_cmp(&evals[i].score).then(i.cmp(&j)));
    order
}

fn stats(generation: usize, pop: &[EnvGenome], evals: &[GenomeEval], order: &[usize]) -> GenerationStats {
    let best = order[0];
    let valid: Vec<&GenomeEval> = evals.iter().filter(|e| e.valid).collect();
    let n = valid.len().max(1) as f64;
    GenerationStats {
        generation,
        best_score: evals[best].score,
        best_engagement: evals[best].engagement,
        best_flourishing: evals[best].flourishing,
        mean_engagement: valid.iter().map(|e| e.engagement).sum::<f64>() / n,
        mean_flourishing: valid.iter().map(|e| e.flourishing).sum::<f64>() / n,
        best_genome: pop[best].clone(),
    }
}

fn evaluate_all(
    objective: &Objective,
    cfg: &GaConfig,
    seed: u64,
    generation: usize,
    pop: &[EnvGenome],
    cached: &[Option<GenomeEval>],
) -> Result<Vec<GenomeEval>, OptimizeError> {
    pop.par_iter()
        .zip(cached.par_iter())
        .enumerate()
        .map(|(i, (g, cache))| match cache {
            Some(e) => Ok(*e),
            None => {
                let seeds: Vec<u64> = (0..cfg.evals_per_candidate)
                    .map(|r| derive_seed(seed, &[generation as u64, i as u64, r as u64]))
                    .collect();
                evaluate_genome(objective, g, &seeds, cfg.sim_steps)
            }
        })
        .collect()
}

/// Evolves from an all-neutral population. Elites keep their cached
/// fitness, so the best score never decreases.
pub fn ga_run(objective: &Objective, cfg: &GaConfig, seed: u64) -> Result<GaResult, OptimizeError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop = vec![EnvGenome::default(); cfg.population];
    let mut evals = evaluate_all(objective, cfg, seed, 0, &pop, &vec![None; cfg.population])?;
    let mut order = rank(&evals);
    let mut history = vec![stats(0, &pop, &evals, &order)];
    let (n_cross, n_mut) = cfg.offspring_split();
    let n_parents = cfg.parents();

    for generation in 1..=cfg.generations {
        let parents: Vec<&EnvGenome> = order[..n_parents].iter().map(|&i| &pop[i]).collect();
        let mut next: Vec<EnvGenome> = order[..cfg.elites].iter().map(|&i| pop[i].clone()).collect();
        let mut cached: Vec<Option<GenomeEval>> = order[..cfg.elites].iter().map(|&i| Some(evals[i])).collect();
        for _ in 0..n_cross {
            let a = parents[rng.random_range(0..n_parents)];
            let b = parents[rng.random_range(0..n_parents)];
            next.push(crossover(a, b, &mut rng));
        }
        for _ in 0..n_mut {
            let p = parents[rng.random_range(0..n_parents)];
            next.push(mutate(p, cfg, &mut rng));
        }
        cached.resize(cfg.population, None);
        pop = next;
        evals = evaluate_all(objective, cfg, seed, generation, &pop, &cached)?;
        order = rank(&evals);
        let s = stats(generation, &pop, &evals, &order);
        log::debug!("generation {generation}: best {:.4} ({})", s.best_score, objective.name());
        history.push(s);
    }
    Ok(GaResult {
        objective: objective.name().to_owned(),
        best: pop[order[0]].clone(),
        best_eval: evals[order[0]],
        history,
    })
}
