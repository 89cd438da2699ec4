use anyhow::Result;
use maslow_core::attachment::{
    aas_administer, aas_score, simulate_relationship, synthetic_items, AasItem, AasOracle, AasPersona,
    AttachmentStyle, RelationshipConfig, RelationshipScript, TraceScore,
};
use maslow_core::lmkit::mock::respect_script;
use maslow_core::lmkit::{respect_evaluate, run_interview, Persona, Verdict};
use maslow_core::optimize::derive_seed;
use maslow_core::stats::fisher_exact;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Check, Ctx, Outcome};
use crate::config::{ExperimentId, ProviderKind};
use crate::output::Schema;

pub fn respect(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let runs = cfg.runs_for(ExperimentId::Respect);
    let provider = ctx.provider(respect_script())?;
    let mut records = Vec::new();
    // Rows: growth, addictive persona. Columns: judged helpful yes, no.
    let mut table = [[0u64; 2]; 2];
    for (row, persona) in [Persona::Growth, Persona::Addictive].into_iter().enumerate() {
        let outcomes: Vec<_> = (0..runs)
            .into_par_iter()
            .map(|run| -> Result<_> {
                let conversation = run_interview(&provider, &provider, persona, &cfg.interview_state, cfg.interview_rounds)?;
                let eval = respect_evaluate(&provider, &conversation)?;
                Ok((run, conversation, eval))
            })
            .collect::<Result<_>>()?;
        for (run, conversation, eval) in outcomes {
            match eval.verdict {
                Verdict::Yes => table[row][0] += 1,
                Verdict::No => table[row][1] += 1,
                Verdict::Unparsed => {}
            }
            records.push(json!({
                "persona": persona,
                "run": run,
                "transcript": conversation.to_string(),
                "evaluation": eval,
            }));
        }
    }
    ctx.out.write_jsonl("conversations.jsonl", &records)?;
    let test = fisher_exact(table)?;
    let n = runs as u64;
    let separated = table == [[n, 0], [0, n]];
    let checks = vec![
        Check::new("respect verdicts perfectly separate personas", separated, format!("{table:?}")),
        Check::new("fisher exact p < 1e-4", test.p_value < 1e-4, format!("p = {:.3e}", test.p_value)),
    ];
    Ok(Outcome { results: json!({ "table": table, "rows": ["growth", "addictive"], "columns": ["yes", "no"], "fisher_exact": test }), checks })
}

#[derive(Debug, Serialize)]
struct AasRow {
    persona: &'static str,
    anxiety: Option<f64>,
    avoidance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AasItemRow<'a> {
    persona: &'static str,
    item: usize,
    subscale: &'a str,
    reverse_coded: bool,
    p_true: f64,
}

pub fn aas(ctx: &Ctx) -> Result<Outcome> {
    let items = match &ctx.cfg.aas_items {
        Some(path) => AasItem::load(path)?,
        None => synthetic_items(),
    };
    let provider = ctx.provider(AasOracle::new(&items))?;
    let mut scores = Vec::new();
    let mut item_rows = Vec::new();
    for persona in AasPersona::ALL {
        let responses = aas_administer(&provider, persona, &items)?;
        let s = aas_score(&responses, &items)?;
        for (k, (item, p)) in items.iter().zip(&responses).enumerate() {
            let subscale = match item.subscale {
                maslow_core::attachment::Subscale::Anxiety => "anxiety",
                maslow_core::attachment::Subscale::Avoidance => "avoidance",
            };
            item_rows.push(AasItemRow { persona: persona.label(), item: k, subscale, reverse_coded: item.reverse_coded, p_true: *p });
        }
        scores.push((persona, s));
    }
    let rows: Vec<AasRow> = scores
        .iter()
        .map(|(p, s)| AasRow { persona: p.label(), anxiety: s.anxiety, avoidance: s.avoidance })
        .collect();
    ctx.out.csv("aas.csv", &Schema::new("aas", 1), &rows)?;
    ctx.out.csv("aas_items.csv", &Schema::new("aas_items", 1), &item_rows)?;

    let get = |who: AasPersona, f: fn(&maslow_core::attachment::AasScores) -> Option<f64>| {
        scores.iter().find(|(p, _)| *p == who).and_then(|(_, s)| f(s)).unwrap_or(f64::NAN)
    };
    let anx = |p| get(p, |s| s.anxiety);
    let avo = |p| get(p, |s| s.avoidance);
    let others = |p: AasPersona| AasPersona::ALL.into_iter().filter(move |&q| q != p);
    use AasPersona::*;
    let checks = vec![
        Check::new("secure lowest on both subscales", others(Secure).all(|q| anx(Secure) < anx(q) && avo(Secure) < avo(q)), ""),
        Check::new("avoidant highest on avoidance", others(Avoidant).all(|q| avo(Avoidant) >= avo(q)), ""),
        Check::new("anxious-secure highest on anxiety", others(AnxiousSecure).all(|q| anx(AnxiousSecure) >= anx(q)), ""),
        Check::new("anxious-avoidant high on both", anx(AnxiousAvoidant) > 0.5 && avo(AnxiousAvoidant) > 0.5, ""),
    ];
    Ok(Outcome { results: json!({ "items": items.len(), "scores": rows }), checks })
}

/// Published live-mode accuracies, used only for the optional live check.
const PAPER_ACCURACY: [(&str, f64); 6] = [
    ("attachment", 0.87),
    ("attachment_after_min_entries", 0.97),
    ("attachment_declared", 1.0),
    ("contempt", 0.98),
    ("contempt_excluding_rupture", 0.99),
    ("contempt_confident", 0.996),
];

#[derive(Debug, Serialize)]
struct AccuracyRow {
    pairing: String,
    metric: &'static str,
    correct: usize,
    total: usize,
    accuracy: Option<f64>,
}

fn accuracy_rows(pairing: &str, s: &TraceScore) -> Vec<AccuracyRow> {
    let tallies = [
        ("attachment", s.attachment),
        ("attachment_after_min_entries", s.attachment_after_min_entries),
        ("attachment_declared", s.attachment_declared),
        ("contempt", s.contempt),
        ("contempt_excluding_rupture", s.contempt_excluding_rupture),
        ("contempt_confident", s.contempt_confident),
    ];
    tallies
        .into_iter()
        .map(|(metric, t)| AccuracyRow { pairing: pairing.to_owned(), metric, correct: t.correct, total: t.total, accuracy: t.accuracy() })
        .collect()
}

pub const PAIRINGS: [(AttachmentStyle, AttachmentStyle); 3] = [
    (AttachmentStyle::Anxious, AttachmentStyle::Avoidant),
    (AttachmentStyle::Avoidant, AttachmentStyle::Anxious),
    (AttachmentStyle::Secure, AttachmentStyle::Secure),
];

pub fn relationship_inference(ctx: &Ctx) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let runs = cfg.runs_for(ExperimentId::RelationshipInference);
    let provider = ctx.provider(RelationshipScript::default())?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut total = TraceScore::default();
    for (k, (logger, partner)) in PAIRINGS.into_iter().enumerate() {
        let pairing = format!("{logger}-{partner}");
        let results: Vec<_> = (0..runs)
            .into_par_iter()
            .map(|run| -> Result<_> {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[k as u64, run as u64]));
                let rc = RelationshipConfig::sample(logger, partner, &mut rng)?;
                Ok(simulate_relationship(&provider, rc, cfg.entries_per_run)?)
            })
            .collect::<Result<_>>()?;
        let mut score = TraceScore::default();
        for (run, trace) in results.into_iter().enumerate() {
            score.merge(&trace.score());
            traces.push(json!({ "pairing": pairing, "run": run, "trace": trace }));
        }
        total.merge(&score);
        rows.extend(accuracy_rows(&pairing, &score));
    }
    rows.extend(accuracy_rows("all", &total));
    ctx.out.csv("accuracy.csv", &Schema::new("accuracy", 1), &rows)?;
    ctx.out.write_jsonl("traces.jsonl", &traces)?;

    let all = |metric: &str| rows.iter().find(|r| r.pairing == "all" && r.metric == metric).and_then(|r| r.accuracy);
    let declared = all("attachment_declared");
    let mut checks = vec![Check::new(
        "no errors among gated attachment declarations",
        declared.is_some_and(|a| a == 1.0),
        format!("{declared:?}"),
    )];
    if cfg.provider == ProviderKind::Live {
        for (metric, target) in PAPER_ACCURACY {
            let got = all(metric);
            checks.push(Check::new(
                format!("live {metric} within 10 points of {target}"),
                got.is_some_and(|a| (a - target).abs() <= 0.10),
                format!("{got:?}"),
            ));
        }
    } else {
        let contempt = all("contempt");
        checks.push(Check::new("contempt accuracy >= 0.95", contempt.is_some_and(|a| a >= 0.95), format!("{contempt:?}")));
    }
    Ok(Outcome { results: json!({ "accuracy": rows }), checks })
}
