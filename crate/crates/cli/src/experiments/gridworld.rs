use anyhow::Result;
use maslow_core::attachment::knowledge::{compare_conditions, SMOOTHING_ALPHA};
use maslow_core::attachment::{run_knowledge_experiment, AttachmentStyle, InferenceSource, KnowledgeConfig, KnowledgeSeries, RelationshipScript};
use maslow_core::envgen::{make_adversarial, make_supportive};
use maslow_core::stats::{ewma, mean, t_test};
use maslow_core::{compute_engagement, compute_flourishing, run_simulation, EngagementScope, EnvironmentSpec, NeedKind, RunRecord, SimConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::{metric, Check, Ctx, Outcome};
use crate::config::{ExperimentId, ProviderKind};
use crate::output::Schema;

pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub flourishing: f64,
    pub engagement: f64,
    pub record: RunRecord,
}

/// Simulates one environment per seed; layout and agent share the seed.
pub fn simulate_many<F>(label: &str, seeds: &[u64], steps: usize, build: F) -> Result<Vec<RunResult>>
where
    F: Fn(u64) -> Result<EnvironmentSpec> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let env = build(seed)?;
            let record = run_simulation(&env, &SimConfig { steps, ..SimConfig::with_seed(seed) })?;
            Ok(RunResult {
                label: label.to_owned(),
                seed,
                flourishing: compute_flourishing(&record)?,
                engagement: compute_engagement(&record, EngagementScope::AllNeeds)?,
                record,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct MetricsRow<'a> {
    run: usize,
    env: &'a str,
    seed: u64,
    step_start: usize,
    step_end: usize,
    flourishing: f64,
    engagement: f64,
    physiological: f64,
    safety: f64,
    belonging: f64,
    esteem: f64,
    self_actualization: f64,
}

fn metrics_rows(runs: &[RunResult], bin: usize) -> Vec<MetricsRow<'_>> {
    let mut rows = Vec::new();
    for (run, r) in runs.iter().enumerate() {
        for (k, chunk) in r.record.events.chunks(bin).enumerate() {
            let n = chunk.len() as f64;
            let level = |need: NeedKind| chunk.iter().map(|e| e.satiation[need.index()]).sum::<f64>() / n;
            rows.push(MetricsRow {
                run,
                env: &r.label,
                seed: r.seed,
                step_start: k * bin,
                step_end: k * bin + chunk.len(),
                flourishing: chunk.iter().map(|e| e.needs_met as f64).sum::<f64>() / n,
                engagement: chunk.iter().filter(|e| e.activity.is_engaging()).count() as f64 / n,
                physiological: level(NeedKind::Physiological),
                safety: level(NeedKind::Safety),
                belonging: level(NeedKind::Belonging),
                esteem: level(NeedKind::Esteem),
                self_actualization: level(NeedKind::SelfActualization),
            });
        }
    }
    rows
}

fn persist(ctx: &Ctx, groups: &[&[RunResult]]) -> Result<()> {
    let all: Vec<&RunResult> = groups.iter().flat_map(|g| g.iter()).collect();
    if ctx.cfg.write_logs {
        for r in &all {
            let mut w = ctx.out.file(&format!("logs/{}_seed{}.jsonl", r.label, r.seed))?;
            r.record.write_jsonl(&mut w)?;
        }
    }
    let schema = Schema::new("metrics", 1).with("ewma_alpha", ctx.cfg.ewma_alpha).with("bin_steps", ctx.cfg.metrics_bin);
    let rows: Vec<MetricsRow> = groups.iter().flat_map(|g| metrics_rows(g, ctx.cfg.metrics_bin)).collect();
    ctx.out.csv("metrics.csv", &schema, rows)
}

fn flourishing(runs: &[RunResult]) -> Vec<f64> {
    runs.iter().map(|r| r.flourishing).collect()
}

fn engagement(runs: &[RunResult]) -> Vec<f64> {
    runs.iter().map(|r| r.engagement).collect()
}

fn env_summary(runs: &[RunResult]) -> Value {
    let (f, e) = (flourishing(runs), engagement(runs));
    json!({ "flourishing": metric(mean(&f), &f), "engagement": metric(mean(&e), &e) })
}

pub fn fixed_envs(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let seeds = ctx.seeds(cfg.runs_for(ExperimentId::FixedEnvs));
    let sup = simulate_many("supportive", &seeds, cfg.steps, |s| Ok(make_supportive(s)))?;
    let adv = simulate_many("adversarial", &seeds, cfg.steps, |s| Ok(make_adversarial(s, cfg.adv_replenish)?))?;
    persist(ctx, &[&sup, &adv])?;

    let tf = t_test(&flourishing(&sup), &flourishing(&adv))?;
    let te = t_test(&engagement(&sup), &engagement(&adv))?;
    let (fs, fa) = (mean(&flourishing(&sup)), mean(&flourishing(&adv)));
    let (es, ea) = (mean(&engagement(&sup)), mean(&engagement(&adv)));
    let checks = vec![
        Check::new("flourishing supportive > adversarial", fs > fa, format!("{fs:.3} vs {fa:.3}")),
        Check::new("engagement supportive < adversarial", es < ea, format!("{es:.3} vs {ea:.3}")),
        Check::new("flourishing difference p < 1e-3", tf.p_value < 1e-3, format!("p = {:.3e}", tf.p_value)),
        Check::new("engagement difference p < 1e-3", te.p_value < 1e-3, format!("p = {:.3e}", te.p_value)),
    ];
    let results = json!({
        "adv_replenish": cfg.adv_replenish,
        "supportive": env_summary(&sup),
        "adversarial": env_summary(&adv),
        "flourishing_t_test": tf,
        "engagement_t_test": te,
    });
    Ok(Outcome { results, checks })
}

pub fn replenish_sweep(ctx: &Ctx, levels: &[f64]) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let seeds = ctx.seeds(cfg.runs_for(ExperimentId::ReplenishSweep));
    let groups: Vec<Vec<RunResult>> = levels
        .iter()
        .map(|&rate| simulate_many(&format!("adversarial_r{rate}"), &seeds, cfg.steps, |s| Ok(make_adversarial(s, rate)?)))
        .collect::<Result<_>>()?;
    persist(ctx, &groups.iter().map(Vec::as_slice).collect::<Vec<_>>())?;

    let f: Vec<Vec<f64>> = groups.iter().map(|g| flourishing(g)).collect();
    let means: Vec<f64> = f.iter().map(|x| mean(x)).collect();
    let mut pairs = Vec::new();
    let mut max_p: f64 = 0.0;
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            let t = t_test(&f[i], &f[j])?;
            max_p = max_p.max(t.p_value);
            pairs.push(json!({ "a": levels[i], "b": levels[j], "t_test": t }));
        }
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let checks = vec![
        Check::new("flourishing strictly decreasing with replenishment", decreasing, format!("{means:.3?}")),
        Check::new("all pairwise differences p < 0.01", max_p < 0.01, format!("max p = {max_p:.3e}")),
    ];
    let per_level: Vec<Value> = levels
        .iter()
        .zip(&groups)
        .map(|(rate, g)| json!({ "adv_replenish": rate, "summary": env_summary(g) }))
        .collect();
    Ok(Outcome { results: json!({ "levels": per_level, "pairwise": pairs }), checks })
}

#[derive(Debug, Serialize)]
struct KnowledgeRow<'a> {
    style: &'a str,
    condition: &'a str,
    step: usize,
    mean_awareness: f64,
    mean_flourishing: f64,
    smoothed_flourishing: f64,
}

pub fn knowledge(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let seeds = ctx.seeds(cfg.runs_for(ExperimentId::KnowledgeGridworld));
    let inference = match cfg.provider {
        ProviderKind::Live => InferenceSource::Provider,
        ProviderKind::Mock => cfg.knowledge.inference,
    };
    let provider = match inference {
        InferenceSource::Provider => Some(ctx.provider(RelationshipScript::default())?),
        InferenceSource::Oracle => None,
    };
    let mut rows_src: Vec<(AttachmentStyle, KnowledgeSeries)> = Vec::new();
    let mut results = serde_json::Map::new();
    let mut checks = Vec::new();
    let tail = 1000.min(cfg.knowledge.steps);
    for style in [AttachmentStyle::Anxious, AttachmentStyle::Avoidant] {
        let base = KnowledgeConfig { user_style: style, seeds: seeds.clone(), inference, ..cfg.knowledge.clone() };
        let run = |with_app: bool, bonuses_enabled: bool| {
            run_knowledge_experiment(&KnowledgeConfig { with_app, bonuses_enabled, ..base.clone() }, provider.as_deref())
        };
        let control = run(false, true)?;
        let app = run(true, true)?;
        let ablation = run(true, false)?;
        let cmp = compare_conditions(&control, &app, &base.belonging, tail);
        let identical = ablation.runs.iter().zip(&control.runs).all(|(a, c)| a.needs_met == c.needs_met);
        checks.push(Check::new(
            format!("{style}: app ahead of control across the transient window"),
            cmp.app_leads_throughout(),
            format!("window {:?}, min gap {:?}", cmp.window, cmp.min_gap_in_window),
        ));
        checks.push(Check::new(
            format!("{style}: conditions converge by end of run"),
            cmp.final_gap.abs() <= 0.1,
            format!("final gap {:.4} over last {} steps", cmp.final_gap, cmp.tail),
        ));
        checks.push(Check::new(format!("{style}: bonus-free ablation equals control"), identical, ""));
        let escapes = |s: &KnowledgeSeries| s.runs.iter().map(|r| r.escape_step).collect::<Vec<_>>();
        results.insert(
            style.name().to_owned(),
            json!({ "comparison": cmp, "escape_steps": { "control": escapes(&control), "with_app": escapes(&app) } }),
        );
        rows_src.extend([(style, control), (style, app), (style, ablation)]);
    }
    let mut rows = Vec::new();
    for (style, series) in &rows_src {
        let smooth = ewma(&series.mean_flourishing, SMOOTHING_ALPHA);
        for (step, ((aw, fl), sm)) in series.mean_awareness.iter().zip(&series.mean_flourishing).zip(&smooth).enumerate() {
            rows.push(KnowledgeRow {
                style: style.name(),
                condition: &series.label,
                step,
                mean_awareness: *aw,
                mean_flourishing: *fl,
                smoothed_flourishing: *sm,
            });
        }
    }
    ctx.out.csv("knowledge.csv", &Schema::new("knowledge", 1).with("ewma_alpha", SMOOTHING_ALPHA), rows)?;
    if cfg.write_logs {
        let runs = rows_src.iter().flat_map(|(style, s)| s.runs.iter().map(move |r| json!({ "style": style, "condition": s.label, "run": r })));
        ctx.out.write_jsonl("logs/knowledge_runs.jsonl", runs)?;
    }
    Ok(Outcome { results: Value::Object(results), checks })
}
