use anyhow::Result;
use maslow_core::envgen::{genome_to_environment, make_adversarial};
use maslow_core::lmkit::CareOracle;
use maslow_core::optimize::{ga_run, smbo_run, CareObjective, GaResult, GenerationStats, SmboResult};
use maslow_core::stats::{mean, t_test};
use maslow_core::{EngagementScope, EnvGenome, Objective};
use serde::Serialize;
use serde_json::json;

use super::gridworld::simulate_many;
use super::{metric, Check, Ctx, Outcome};
use crate::config::ExperimentId;
use crate::output::Schema;

/// Seeds for re-evaluating optimized genomes, disjoint from search seeds.
const EVAL_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Serialize)]
struct HistoryRow<'a> {
    objective: &'a str,
    generation: usize,
    best_score: f64,
    best_engagement: f64,
    best_flourishing: f64,
    mean_engagement: f64,
    mean_flourishing: f64,
    best_genome: String,
}

fn history_rows<'a>(objective: &'a str, history: &[GenerationStats]) -> Result<Vec<HistoryRow<'a>>> {
    history
        .iter()
        .map(|h| {
            Ok(HistoryRow {
                objective,
                generation: h.generation,
                best_score: h.best_score,
                best_engagement: h.best_engagement,
                best_flourishing: h.best_flourishing,
                mean_engagement: h.mean_engagement,
                mean_flourishing: h.mean_flourishing,
                best_genome: serde_json::to_string(&h.best_genome)?,
            })
        })
        .collect()
}

pub fn write_ga_history(ctx: &Ctx, results: &[&GaResult]) -> Result<()> {
    let mut rows = Vec::new();
    for r in results {
        rows.extend(history_rows(&r.objective, &r.history)?);
    }
    ctx.out.csv("ga_history.csv", &Schema::new("ga_history", 1), rows)
}

/// Flourishing of `genome` over fresh evaluation seeds.
pub fn evaluate_flourishing(ctx: &Ctx, label: &str, genome: &EnvGenome, runs: usize) -> Result<Vec<f64>> {
    let seeds: Vec<u64> = ctx.seeds(runs).iter().map(|s| s.wrapping_add(EVAL_SEED_OFFSET)).collect();
    let results = simulate_many(label, &seeds, ctx.cfg.steps, |s| Ok(genome_to_environment(genome, s)?))?;
    Ok(results.iter().map(|r| r.flourishing).collect())
}

fn engagement_objective() -> Objective {
    Objective::Engagement(EngagementScope::AllNeeds)
}

pub fn ga_opt(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let runs = cfg.runs_for(ExperimentId::GaOpt);
    let eng = ga_run(&engagement_objective(), &cfg.ga, cfg.seed)?;
    let flo = ga_run(&Objective::Flourishing, &cfg.ga, cfg.seed)?;
    write_ga_history(ctx, &[&eng, &flo])?;
    ctx.out.write_json("best_engagement_genome.json", &eng.best)?;
    ctx.out.write_json("best_flourishing_genome.json", &flo.best)?;

    let fe = evaluate_flourishing(ctx, "engagement_best", &eng.best, runs)?;
    let ff = evaluate_flourishing(ctx, "flourishing_best", &flo.best, runs)?;
    let t = t_test(&fe, &ff)?;
    let g = &eng.best;
    let checks = vec![
        Check::new("engagement-optimized adv_replenish < 0.5", g.adv_replenish < 0.5, format!("{:.3}", g.adv_replenish)),
        Check::new(
            "engagement-optimized has >= 3 adversarial cells",
            g.n_adversarial_belonging >= 3,
            g.n_adversarial_belonging.to_string(),
        ),
        Check::new(
            "engagement-optimized flourishing below flourishing-optimized (p < 0.01)",
            mean(&fe) < mean(&ff) && t.p_value < 0.01,
            format!("{:.3} vs {:.3}, p = {:.3e}", mean(&fe), mean(&ff), t.p_value),
        ),
    ];
    let results = json!({
        "generations": cfg.ga.generations,
        "engagement_optimized": { "genome": eng.best, "search_eval": eng.best_eval, "flourishing": metric(mean(&fe), &fe) },
        "flourishing_optimized": { "genome": flo.best, "search_eval": flo.best_eval, "flourishing": metric(mean(&ff), &ff) },
        "flourishing_t_test": t,
    });
    Ok(Outcome { results, checks })
}

pub fn write_trials(ctx: &Ctx, name: &str, r: &SmboResult) -> Result<()> {
    ctx.out.write_jsonl(name, &r.trials)
}

pub fn care_opt(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let runs = cfg.runs_for(ExperimentId::CareOpt);
    let care = Objective::Care(CareObjective::new(ctx.provider(CareOracle::default())?));
    let smbo = smbo_run(&care, &cfg.smbo, cfg.seed)?;
    write_trials(ctx, "care_trials.jsonl", &smbo)?;
    ctx.out.write_json("best_care_genome.json", &smbo.best)?;
    let eng = ga_run(&engagement_objective(), &cfg.ga, cfg.seed)?;
    let flo = ga_run(&Objective::Flourishing, &cfg.ga, cfg.seed)?;
    write_ga_history(ctx, &[&eng, &flo])?;

    let fc = evaluate_flourishing(ctx, "care_best", &smbo.best, runs)?;
    let fe = evaluate_flourishing(ctx, "engagement_best", &eng.best, runs)?;
    let ff = evaluate_flourishing(ctx, "flourishing_best", &flo.best, runs)?;
    let adv_seeds: Vec<u64> = ctx.seeds(runs).iter().map(|s| s.wrapping_add(EVAL_SEED_OFFSET)).collect();
    let adv = simulate_many("adversarial", &adv_seeds, cfg.steps, |s| Ok(make_adversarial(s, cfg.adv_replenish)?))?;
    let fa: Vec<f64> = adv.iter().map(|r| r.flourishing).collect();
    let (c, e, f, a) = (mean(&fc), mean(&fe), mean(&ff), mean(&fa));

    let mut checks = vec![
        Check::new("care-optimized flourishing > adversarial environment", c > a, format!("{c:.3} vs {a:.3}")),
        Check::new("care-optimized flourishing >= engagement-optimized + 0.5", c >= e + 0.5, format!("{c:.3} vs {e:.3}")),
    ];
    if cfg.provider == crate::config::ProviderKind::Live {
        checks.push(Check::new(
            "live ordering care >= flourishing-opt >= engagement-opt",
            c >= f && f >= e,
            format!("{c:.3} / {f:.3} / {e:.3}"),
        ));
    }
    let results = json!({
        "care_optimized": { "genome": smbo.best, "search_eval": smbo.best_eval, "flourishing": metric(c, &fc) },
        "engagement_optimized": { "genome": eng.best, "flourishing": metric(e, &fe) },
        "flourishing_optimized": { "genome": flo.best, "flourishing": metric(f, &ff) },
        "adversarial": { "adv_replenish": cfg.adv_replenish, "flourishing": metric(a, &fa) },
    });
    Ok(Outcome { results, checks })
}
