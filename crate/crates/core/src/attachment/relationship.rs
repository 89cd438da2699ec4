//! Simulated relationship logs and inference of attachment style and contempt.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttachmentError, AttachmentStyle};
use crate::lmkit::{normalize_token, template, CompletionRequest, CompletionResult, LmError, Provider};

pub const MALE_NAMES: [&str; 5] = ["James", "Mark", "John", "David", "Michael"];
pub const FEMALE_NAMES: [&str; 5] = ["Sue", "Pam", "Mary", "Linda", "Susan"];
pub const AGE_RANGE: std::ops::RangeInclusive<u32> = 25..=35;
pub const ENTRIES_PER_CYCLE: usize = 5;

pub const BLACKLIST_STEMS: [&str; 3] = ["anxious", "avoid", "attachment"];
pub const BANNED_BIAS: f64 = -100.0;

pub const DECLARE_MIN_ENTRIES: usize = 4;
pub const DECLARE_MIN_CONFIDENCE: f64 = 0.95;

/// Separator between journal entries when they are fed back to the model.
pub const ENTRY_SEPARATOR: &str = "\n\n###\n\n";

pub const SECURE_INTENTION: &str = "acting in a secure, confident, loving way";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partner {
    /// Writes the journal.
    Logger,
    Partner,
}

impl Partner {
    pub fn other(self) -> Partner {
        match self {
            Partner::Logger => Partner::Partner,
            Partner::Partner => Partner::Logger,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipConfig {
    pub logger_style: AttachmentStyle,
    pub partner_style: AttachmentStyle,
    pub logger_name: String,
    pub partner_name: String,
    pub logger_age: u32,
    pub partner_age: u32,
    pub entries_per_cycle: usize,
    pub generation_temperature: f64,
    /// Token ids to ban in addition to the plain-text stems; a live endpoint
    /// only honors ids.
    #[serde(default)]
    pub blacklist_token_ids: Vec<u64>,
}

impl RelationshipConfig {
    /// Samples names (one per gender) and ages.
    pub fn sample<R: Rng + ?Sized>(
        logger_style: AttachmentStyle,
        partner_style: AttachmentStyle,
        rng: &mut R,
    ) -> Result<Self, AttachmentError> {
        let (a, b) = if rng.random_bool(0.5) { (&MALE_NAMES, &FEMALE_NAMES) } else { (&FEMALE_NAMES, &MALE_NAMES) };
        let cfg = RelationshipConfig {
            logger_style,
            partner_style,
            logger_name: a.choose(rng).expect("names").to_string(),
            partner_name: b.choose(rng).expect("names").to_string(),
            logger_age: rng.random_range(AGE_RANGE),
            partner_age: rng.random_range(AGE_RANGE),
            entries_per_cycle: ENTRIES_PER_CYCLE,
            generation_temperature: 0.7,
            blacklist_token_ids: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Anxious/avoidant pairings cycle; any pairing with a secure partner
    /// does not. Two partners of the same insecure style are not modeled.
    pub fn validate(&self) -> Result<(), AttachmentError> {
        if self.logger_style.is_insecure() && self.logger_style == self.partner_style {
            return Err(AttachmentError::UnsupportedPairing(self.logger_style, self.partner_style));
        }
        Ok(())
    }

    pub fn is_cycling(&self) -> bool {
        self.logger_style.complement() == Some(self.partner_style)
    }

    pub fn style(&self, who: Partner) -> AttachmentStyle {
        match who {
            Partner::Logger => self.logger_style,
            Partner::Partner => self.partner_style,
        }
    }

    pub fn name(&self, who: Partner) -> &str {
        match who {
            Partner::Logger => &self.logger_name,
            Partner::Partner => &self.partner_name,
        }
    }

    /// Whose intention steers each entry: the avoidant partner in a cycling
    /// pairing, otherwise the secure one.
    pub fn target(&self) -> Partner {
        let wanted = if self.is_cycling() { AttachmentStyle::Avoidant } else { AttachmentStyle::Secure };
        if self.partner_style == wanted || self.logger_style != wanted {
            Partner::Partner
        } else {
            Partner::Logger
        }
    }

    pub fn blacklist_bias(&self) -> BTreeMap<String, f64> {
        BLACKLIST_STEMS
            .iter()
            .map(|s| s.to_string())
            .chain(self.blacklist_token_ids.iter().map(u64::to_string))
            .map(|k| (k, BANNED_BIAS))
            .collect()
    }

    fn persona_vars(&self) -> Vec<(&'static str, String)> {
        vec![
            ("p1name", self.logger_name.clone()),
            ("p2name", self.partner_name.clone()),
            ("p1age", self.logger_age.to_string()),
            ("p2age", self.partner_age.to_string()),
            ("p1attach", self.logger_style.name().to_owned()),
            ("p2attach", self.partner_style.name().to_owned()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclePhase {
    Reconnect,
    Avoidance,
    Contempt,
    Rupture,
}

impl CyclePhase {
    /// Phase of a 1-based entry index within the five-entry cycle.
    pub fn at(entry_index: usize) -> CyclePhase {
        let offset = entry_index.checked_sub(1).expect("entry indices start at 1") % ENTRIES_PER_CYCLE;
        match offset {
            0 => CyclePhase::Reconnect,
            1 | 2 => CyclePhase::Avoidance,
            3 => CyclePhase::Contempt,
            _ => CyclePhase::Rupture,
        }
    }

    pub fn intention(self) -> &'static str {
        match self {
            CyclePhase::Reconnect => "eager to reconnect and passionately dote",
            CyclePhase::Avoidance => "acting disinterested and distancing",
            CyclePhase::Contempt => "actively mocking, ridiculing, disrespecting, and scoffing",
            CyclePhase::Rupture => "angrily suggesting they break up and is withdrawing",
        }
    }
}

impl fmt::Display for CyclePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CyclePhase::Reconnect => "reconnect",
            CyclePhase::Avoidance => "avoidance",
            CyclePhase::Contempt => "contempt",
            CyclePhase::Rupture => "rupture",
        })
    }
}

fn phase_of(entry_index: usize, cfg: &RelationshipConfig) -> Option<CyclePhase> {
    cfg.is_cycling().then(|| CyclePhase::at(entry_index))
}

/// Intention of the target partner for a 1-based entry index.
pub fn cycle_intention(entry_index: usize, cfg: &RelationshipConfig) -> &'static str {
    match phase_of(entry_index, cfg) {
        Some(phase) => phase.intention(),
        None => {
            assert!(entry_index >= 1, "entry indices start at 1");
            SECURE_INTENTION
        }
    }
}

pub fn entry_prompt(cfg: &RelationshipConfig, history: &[String], intention: &str) -> String {
    let mut vars: BTreeMap<&str, String> = cfg.persona_vars().into_iter().collect();
    if history.is_empty() {
        return template("relationship_first_entry").render(&vars).expect("first-entry variables");
    }
    vars.insert("prev_entries", history.join(ENTRY_SEPARATOR));
    vars.insert("target_name", cfg.name(cfg.target()).to_owned());
    vars.insert("emotion", intention.to_owned());
    template("relationship_next_entry").render(&vars).expect("next-entry variables")
}

/// Writes the next journal entry with the attachment vocabulary suppressed.
pub fn generate_log_entry<P: Provider + ?Sized>(
    provider: &P,
    cfg: &RelationshipConfig,
    history: &[String],
    intention: &str,
) -> Result<String, AttachmentError> {
    let req = CompletionRequest::new(entry_prompt(cfg, history, intention), cfg.generation_temperature)
        .logit_bias(cfg.blacklist_bias());
    Ok(provider.complete(&req)?.text.trim().to_owned())
}

/// An answer with the probability mass behind it; `answer: None` is unsure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guess<T> {
    pub answer: Option<T>,
    pub confidence: f64,
}

impl<T> Guess<T> {
    pub fn unsure() -> Self {
        Guess { answer: None, confidence: 0.0 }
    }
}

/// Sums first-token mass per category; the heaviest category wins. Tokens
/// mapping to `Some(None)` count toward an explicit "unsure".
fn classify<T: Copy + Ord>(result: &CompletionResult, map: impl Fn(&str) -> Option<Option<T>>) -> Guess<T> {
    let mut mass: BTreeMap<Option<T>, f64> = BTreeMap::new();
    for (tok, lp) in &result.top_logprobs {
        if let Some(cat) = map(tok) {
            *mass.entry(cat).or_default() += lp.exp();
        }
    }
    if mass.is_empty() {
        let first = result.text.split_whitespace().next().unwrap_or("");
        return match map(first) {
            Some(answer) if result.top_logprobs.is_empty() => Guess { answer, confidence: 0.0 },
            _ => Guess::unsure(),
        };
    }
    let (answer, confidence) = mass
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    Guess { answer, confidence: confidence.min(1.0) }
}

fn map_style(tok: &str) -> Option<Option<AttachmentStyle>> {
    if normalize_token(tok).trim_matches(|c: char| c.is_ascii_punctuation()) == "unsure" {
        return Some(None);
    }
    AttachmentStyle::from_answer(tok).map(Some)
}

fn map_contempt(tok: &str) -> Option<Option<bool>> {
    match normalize_token(tok).trim_matches(|c: char| c.is_ascii_punctuation()) {
        "yes" => Some(Some(true)),
        "no" => Some(Some(false)),
        "unsure" => Some(None),
        _ => None,
    }
}

pub fn summarize_log<P: Provider + ?Sized>(
    provider: &P,
    cfg: &RelationshipConfig,
    entries: &[String],
) -> Result<String, AttachmentError> {
    if entries.is_empty() {
        return Err(LmError::EmptyInput("relationship log").into());
    }
    let prompt = template("relationship_log_summarization").fill(&[
        ("prev_entries", &entries.join(ENTRY_SEPARATOR)),
        ("p1name", &cfg.logger_name),
        ("p2name", &cfg.partner_name),
    ])?;
    Ok(provider.complete(&CompletionRequest::new(prompt, 0.5))?.text.trim().to_owned())
}

/// Classifies one partner's style from a log summary.
pub fn classify_attachment<P: Provider + ?Sized>(
    provider: &P,
    cfg: &RelationshipConfig,
    summary: &str,
    subject: Partner,
) -> Result<Guess<AttachmentStyle>, AttachmentError> {
    let prompt = template("attachment_summary_classification").fill(&[
        ("summary", summary),
        ("p1name", &cfg.logger_name),
        ("p2name", &cfg.partner_name),
        ("name", cfg.name(subject)),
    ])?;
    let result = provider.complete(&CompletionRequest::new(prompt, 0.0).max_tokens(1))?;
    Ok(classify(&result, map_style))
}

/// Summarizes all entries so far, then classifies `subject`.
pub fn infer_attachment<P: Provider + ?Sized>(
    provider: &P,
    cfg: &RelationshipConfig,
    entries: &[String],
    subject: Partner,
) -> Result<Guess<AttachmentStyle>, AttachmentError> {
    let summary = summarize_log(provider, cfg, entries)?;
    classify_attachment(provider, cfg, &summary, subject)
}

/// Whether `actor` treats the other partner with contempt in one entry.
pub fn infer_contempt<P: Provider + ?Sized>(
    provider: &P,
    cfg: &RelationshipConfig,
    entry: &str,
    actor: Partner,
) -> Result<Guess<bool>, AttachmentError> {
    if entry.trim().is_empty() {
        return Err(LmError::EmptyInput("journal entry").into());
    }
    let prompt = template("contempt_evaluation").fill(&[
        ("entry", entry),
        ("p1name", &cfg.logger_name),
        ("other_name", cfg.name(actor)),
        ("name", cfg.name(actor.other())),
    ])?;
    let result = provider.complete(&CompletionRequest::new(prompt, 0.0).max_tokens(1))?;
    Ok(classify(&result, map_contempt))
}

/// Communicates a guess only with enough evidence and confidence.
pub fn declare<T: Copy>(guess: &Guess<T>, entries_seen: usize) -> Option<T> {
    if entries_seen >= DECLARE_MIN_ENTRIES && guess.confidence >= DECLARE_MIN_CONFIDENCE {
        guess.answer
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryInference {
    pub summary: String,
    pub logger_style: Guess<AttachmentStyle>,
    pub partner_style: Guess<AttachmentStyle>,
    pub contempt_by_logger: Guess<bool>,
    pub contempt_by_partner: Guess<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based.
    pub index: usize,
    pub phase: Option<CyclePhase>,
    pub intention: String,
    pub text: String,
    pub inference: EntryInference,
}

impl TraceEntry {
    pub fn style_guess(&self, who: Partner) -> &Guess<AttachmentStyle> {
        match who {
            Partner::Logger => &self.inference.logger_style,
            Partner::Partner => &self.inference.partner_style,
        }
    }

    pub fn contempt_guess(&self, actor: Partner) -> &Guess<bool> {
        match actor {
            Partner::Logger => &self.inference.contempt_by_logger,
            Partner::Partner => &self.inference.contempt_by_partner,
        }
    }

    /// Both styles declared and correct.
    pub fn styles_declared_correctly(&self, cfg: &RelationshipConfig) -> bool {
        [Partner::Logger, Partner::Partner]
            .into_iter()
            .all(|who| declare(self.style_guess(who), self.index) == Some(cfg.style(who)))
    }

    /// Contempt truly present and declared with high confidence.
    pub fn contempt_declared_correctly(&self, cfg: &RelationshipConfig) -> bool {
        [Partner::Logger, Partner::Partner].into_iter().any(|actor| {
            contempt_truth(cfg, self.phase, actor)
                && declare(self.contempt_guess(actor), self.index) == Some(true)
        })
    }
}

/// Contempt flows from the avoidant partner during the contempt phase only.
pub fn contempt_truth(cfg: &RelationshipConfig, phase: Option<CyclePhase>, actor: Partner) -> bool {
    phase == Some(CyclePhase::Contempt) && cfg.style(actor) == AttachmentStyle::Avoidant
}

/// A relationship in progress: entries are generated strictly in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipTrace {
    pub config: RelationshipConfig,
    pub entries: Vec<TraceEntry>,
}

impl RelationshipTrace {
    pub fn new(config: RelationshipConfig) -> Result<Self, AttachmentError> {
        config.validate()?;
        Ok(RelationshipTrace { config, entries: Vec::new() })
    }

    pub fn texts(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.text.clone()).collect()
    }

    /// Generates the next entry, then re-runs every inference.
    pub fn advance<P: Provider + ?Sized>(&mut self, provider: &P) -> Result<&TraceEntry, AttachmentError> {
        let cfg = &self.config;
        let index = self.entries.len() + 1;
        let intention = cycle_intention(index, cfg);
        let mut texts = self.texts();
        let text = generate_log_entry(provider, cfg, &texts, intention)?;
        texts.push(text.clone());
        let summary = summarize_log(provider, cfg, &texts)?;
        let inference = EntryInference {
            logger_style: classify_attachment(provider, cfg, &summary, Partner::Logger)?,
            partner_style: classify_attachment(provider, cfg, &summary, Partner::Partner)?,
            contempt_by_logger: infer_contempt(provider, cfg, &text, Partner::Logger)?,
            contempt_by_partner: infer_contempt(provider, cfg, &text, Partner::Partner)?,
            summary,
        };
        self.entries.push(TraceEntry {
            index,
            phase: phase_of(index, cfg),
            intention: intention.to_owned(),
            text,
            inference,
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, AttachmentError> {
        serde_json::from_str(s).map_err(|e| AttachmentError::ItemFile(e.to_string()))
    }

    pub fn score(&self) -> TraceScore {
        let cfg = &self.config;
        let mut s = TraceScore::default();
        for e in &self.entries {
            for who in [Partner::Logger, Partner::Partner] {
                let g = e.style_guess(who);
                let ok = g.answer == Some(cfg.style(who));
                s.attachment.record(ok);
                if e.index >= DECLARE_MIN_ENTRIES {
                    s.attachment_after_min_entries.record(ok);
                }
                if declare(g, e.index).is_some() {
                    s.attachment_declared.record(ok);
                }
                let c = e.contempt_guess(who);
                let ok = c.answer == Some(contempt_truth(cfg, e.phase, who));
                s.contempt.record(ok);
                if e.phase != Some(CyclePhase::Rupture) {
                    s.contempt_excluding_rupture.record(ok);
                }
                if c.answer.is_some() && c.confidence >= DECLARE_MIN_CONFIDENCE {
                    s.contempt_confident.record(ok);
                }
            }
        }
        s
    }
}

/// Runs `n_entries` entries of a fresh relationship.
pub fn simulate_relationship<P: Provider + ?Sized>(
    provider: &P,
    cfg: RelationshipConfig,
    n_entries: usize,
) -> Result<RelationshipTrace, AttachmentError> {
    let mut trace = RelationshipTrace::new(cfg)?;
    for _ in 0..n_entries {
        trace.advance(provider)?;
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub correct: usize,
}

impl Tally {
    pub fn record(&mut self, ok: bool) {
        self.total += 1;
        self.correct += ok as usize;
    }

    pub fn merge(&mut self, other: Tally) {
        self.total += other.total;
        self.correct += other.correct;
    }

    /// `None` when nothing was counted.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceScore {
    pub attachment: Tally,
    pub attachment_after_min_entries: Tally,
    pub attachment_declared: Tally,
    pub contempt: Tally,
    pub contempt_excluding_rupture: Tally,
    pub contempt_confident: Tally,
}

impl TraceScore {
    pub fn merge(&mut self, o: &TraceScore) {
        self.attachment.merge(o.attachment);
        self.attachment_after_min_entries.merge(o.attachment_after_min_entries);
        self.attachment_declared.merge(o.attachment_declared);
        self.contempt.merge(o.contempt);
        self.contempt_excluding_rupture.merge(o.contempt_excluding_rupture);
        self.contempt_confident.merge(o.contempt_confident);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attachment::script::RelationshipScript;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use AttachmentStyle::*;

    fn config(logger: AttachmentStyle, partner: AttachmentStyle) -> RelationshipConfig {
        RelationshipConfig {
            logger_style: logger,
            partner_style: partner,
            logger_name: "Sue".into(),
            partner_name: "Mark".into(),
            logger_age: 28,
            partner_age: 31,
            entries_per_cycle: ENTRIES_PER_CYCLE,
            generation_temperature: 0.7,
            blacklist_token_ids: Vec::new(),
        }
    }

    #[test]
    fn intention_table_over_two_cycles() {
        let expected = [
            "eager to reconnect and passionately dote",
            "acting disinterested and distancing",
            "acting disinterested and distancing",
            "actively mocking, ridiculing, disrespecting, and scoffing",
            "angrily suggesting they break up and is withdrawing",
        ];
        for cfg in [config(Anxious, Avoidant), config(Avoidant, Anxious)] {
            for i in 1..=10 {
                assert_eq!(cycle_intention(i, &cfg), expected[(i - 1) % 5], "index {i}");
            }
        }
        for cfg in [config(Secure, Secure), config(Anxious, Secure), config(Secure, Avoidant)] {
            for i in 1..=10 {
                assert_eq!(cycle_intention(i, &cfg), "acting in a secure, confident, loving way");
            }
        }
    }

    #[test]
    fn targets_and_pairings() {
        assert_eq!(config(Anxious, Avoidant).target(), Partner::Partner);
        assert_eq!(config(Avoidant, Anxious).target(), Partner::Logger);
        assert_eq!(config(Secure, Anxious).target(), Partner::Logger);
        assert_eq!(config(Secure, Secure).target(), Partner::Partner);
        assert!(config(Anxious, Anxious).validate().is_err());
        assert!(config(Secure, Secure).validate().is_ok());
    }

    #[test]
    fn sampled_configs_use_name_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let c = RelationshipConfig::sample(Anxious, Avoidant, &mut rng).unwrap();
            let male = |n: &str| MALE_NAMES.contains(&n);
            let female = |n: &str| FEMALE_NAMES.contains(&n);
            assert!((male(&c.logger_name) && female(&c.partner_name)) || (female(&c.logger_name) && male(&c.partner_name)));
            assert!(AGE_RANGE.contains(&c.logger_age) && AGE_RANGE.contains(&c.partner_age));
        }
    }

    #[test]
    fn entry_prompts() {
        let cfg = config(Anxious, Avoidant);
        let first = entry_prompt(&cfg, &[], "ignored");
        assert!(first.starts_with("Imagine a 31-year-old named Mark is dating a 28-year-old named Sue. Sue has a very anxiously-attached attachment style, and Mark has a very avoidantly-attached attachment style."));
        assert!(first.ends_with("writing about Sue and Mark's first date (mention feelings; make it realistic):"));
        let next = entry_prompt(&cfg, &["one".into(), "two".into()], cycle_intention(4, &cfg));
        assert!(next.starts_with("one\n\n###\n\ntwo\n\nImagine"));
        assert!(next.contains("taking into account that **Mark** is now actively mocking, ridiculing, disrespecting, and scoffing (write"));
    }

    #[test]
    fn blacklist_reaches_provider() {
        let mut cfg = config(Anxious, Avoidant);
        cfg.blacklist_token_ids = vec![19_634];
        let bias = cfg.blacklist_bias();
        assert_eq!(bias.len(), 4);
        assert!(bias.values().all(|&v| v == BANNED_BIAS));
        let script = RelationshipScript::default();
        let trace = simulate_relationship(&script, cfg, 10).unwrap();
        for e in &trace.entries {
            let lower = e.text.to_lowercase();
            for stem in BLACKLIST_STEMS {
                assert!(!lower.contains(stem), "{stem} in {}", e.text);
            }
        }
    }

    #[test]
    fn scripted_trace_behaves() {
        let script = RelationshipScript::default();
        let cfg = config(Anxious, Avoidant);
        let trace = simulate_relationship(&script, cfg.clone(), 5).unwrap();
        assert!(trace.entries[0].text.contains("first date"));
        assert!(trace.entries[3].text.contains("mock"));
        let e4 = &trace.entries[3];
        assert_eq!(e4.inference.contempt_by_partner.answer, Some(true));
        assert_eq!(e4.inference.contempt_by_logger.answer, Some(false));
        assert!(e4.contempt_declared_correctly(&cfg));
        assert!(!trace.entries[0].styles_declared_correctly(&cfg));
        assert!(e4.styles_declared_correctly(&cfg));
        assert!(trace.entries[0].inference.logger_style.confidence < DECLARE_MIN_CONFIDENCE);
        let back = RelationshipTrace::from_json(&trace.to_json()).unwrap();
        assert_eq!(back, trace);

        let secure = simulate_relationship(&script, config(Secure, Secure), 5).unwrap();
        for e in &secure.entries {
            assert_eq!(e.inference.logger_style.answer, Some(Secure));
            assert_eq!(e.inference.partner_style.answer, Some(Secure));
            assert_eq!(e.inference.contempt_by_partner.answer, Some(false));
        }
        let score = secure.score();
        assert_eq!(score.attachment.accuracy(), Some(1.0));
        assert_eq!(score.contempt.accuracy(), Some(1.0));
    }

    #[test]
    fn declaration_examples() {
        let g = |c| Guess { answer: Some(Avoidant), confidence: c };
        assert_eq!(declare(&g(0.99), 3), None);
        assert_eq!(declare(&g(0.96), 4), Some(Avoidant));
        assert_eq!(declare(&g(0.90), 5), None);
        assert_eq!(declare(&Guess::<AttachmentStyle>::unsure(), 9), None);
    }

    #[test]
    fn classification_from_logprobs() {
        let r = CompletionResult::new(" avoid", vec![(" avoid".into(), 0.9f64.ln()), (" anxious".into(), 0.05f64.ln()), (" Avoid".into(), 0.03f64.ln())]);
        let g = classify(&r, map_style);
        assert_eq!(g.answer, Some(Avoidant));
        assert!((g.confidence - 0.93).abs() < 1e-9);
        let r = CompletionResult::new(" hmm", vec![(" hmm".into(), -0.1)]);
        assert_eq!(classify(&r, map_style), Guess::unsure());
        let r = CompletionResult::new(" unsure", vec![(" unsure".into(), 0.7f64.ln()), (" yes".into(), 0.2f64.ln())]);
        let g = classify(&r, map_contempt);
        assert_eq!(g.answer, None);
        assert!((g.confidence - 0.7).abs() < 1e-9);
        let g = classify(&CompletionResult::text_only(" Secure"), map_style);
        assert_eq!(g, Guess { answer: Some(Secure), confidence: 0.0 });
    }

    proptest! {
        #[test]
        fn phase_is_periodic(i in 1usize..10_000) {
            prop_assert_eq!(CyclePhase::at(i), CyclePhase::at(i + ENTRIES_PER_CYCLE));
        }

        #[test]
        fn declared_implies_gates(n in 0usize..12, c in 0.0f64..=1.0) {
            let g = Guess { answer: Some(Anxious), confidence: c };
            if declare(&g, n).is_some() {
                prop_assert!(n >= DECLARE_MIN_ENTRIES && c >= DECLARE_MIN_CONFIDENCE);
            } else {
                prop_assert!(n < DECLARE_MIN_ENTRIES || c < DECLARE_MIN_CONFIDENCE);
            }
        }

        #[test]
        fn declaration_is_monotone(n in 0usize..12, extra in 0usize..6, c in 0.0f64..=1.0, dc in 0.0f64..0.2) {
            let g = Guess { answer: Some(Secure), confidence: c };
            let later = Guess { answer: Some(Secure), confidence: (c + dc).min(1.0) };
            if declare(&g, n).is_some() {
                prop_assert!(declare(&later, n + extra).is_some());
            }
        }
    }
}
