//! Deterministic providers for the attachment pipelines: they read the same
//! prompts a live model would and answer from the cues those prompts carry.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::aas::{AasItem, AasPersona, Subscale};
use super::relationship::{CyclePhase, ENTRY_SEPARATOR, SECURE_INTENTION};
use super::AttachmentStyle;
use crate::lmkit::mock::{apply_logit_bias, binary_answer};
use crate::lmkit::{CompletionRequest, CompletionResult, LmError, Provider};

fn between<'a>(s: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = s.find(start)? + start.len();
    let len = s[from..].find(end)?;
    Some(&s[from..from + len])
}

fn malformed(what: &str) -> LmError {
    LmError::Rejected(format!("script cannot parse {what}"))
}

/// Surveys answered from fixed (anxiety, avoidance) levels per persona.
#[derive(Debug)]
pub struct AasOracle {
    items: BTreeMap<String, (Subscale, bool)>,
    pub levels: BTreeMap<AasPersona, (f64, f64)>,
    calls: AtomicUsize,
}

impl AasOracle {
    pub fn new(items: &[AasItem]) -> Self {
        let levels = [
            (AasPersona::Secure, (0.15, 0.15)),
            (AasPersona::Avoidant, (0.2, 0.85)),
            (AasPersona::AnxiousSecure, (0.85, 0.25)),
            (AasPersona::AnxiousAvoidant, (0.85, 0.85)),
        ];
        AasOracle {
            items: items.iter().map(|i| (i.text.clone(), (i.subscale, i.reverse_coded))).collect(),
            levels: levels.into_iter().collect(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for AasOracle {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let p = &request.prompt;
        let statement = between(p, "Here is the statement:\n\n", "\n\nHow would someone with ")
            .ok_or_else(|| malformed("survey statement"))?;
        let style = between(p, "How would someone with ", " attachment style likely respond?")
            .ok_or_else(|| malformed("survey style"))?;
        let &(subscale, reverse) = self.items.get(statement).ok_or_else(|| malformed("unknown statement"))?;
        let persona = AasPersona::ALL
            .into_iter()
            .find(|a| a.label() == style)
            .ok_or_else(|| malformed("unknown style"))?;
        let (anx, avo) = self.levels[&persona];
        let level = if subscale == Subscale::Anxiety { anx } else { avo };
        Ok(binary_answer("True", "False", if reverse { 1.0 - level } else { level }))
    }
}

#[derive(Debug, Clone, Copy)]
struct Cue {
    style: AttachmentStyle,
    /// Behavior written into journal entries.
    behavior: &'static str,
    /// Description written into summaries.
    description: &'static str,
}

const CUES: [Cue; 3] = [
    Cue {
        style: AttachmentStyle::Anxious,
        behavior: "needed constant reassurance and worried about being left",
        description: "seems needy and clingy",
    },
    Cue {
        style: AttachmentStyle::Avoidant,
        behavior: "felt smothered by closeness and wanted more space",
        description: "seems distant and in need of space",
    },
    Cue {
        style: AttachmentStyle::Secure,
        behavior: "felt steady and comfortable being close",
        description: "seems comfortable with intimacy",
    },
];

fn cue(style: AttachmentStyle) -> Cue {
    CUES.into_iter().find(|c| c.style == style).expect("cue per style")
}

const MOCKING: &str = "spent the evening mocking and ridiculing";

#[derive(Debug, Clone, PartialEq)]
struct Couple {
    p1: String,
    p2: String,
    p1_style: AttachmentStyle,
    p2_style: AttachmentStyle,
}

impl Couple {
    fn parse(prompt: &str) -> Option<Couple> {
        let intro = between(prompt, "Imagine a ", ". ")?;
        let (left, right) = intro.split_once(" is dating a ")?;
        let p2 = left.split_once("named ")?.1.to_owned();
        let p1 = right.split_once("named ")?.1.to_owned();
        let p1_style = between(prompt, &format!("{p1} has a very "), "ly-attached")?.parse().ok()?;
        let p2_style = between(prompt, &format!("{p2} has a very "), "ly-attached")?.parse().ok()?;
        Some(Couple { p1, p2, p1_style, p2_style })
    }

    fn subject(&self, name: &str) -> String {
        if name == self.p1 { "I".into() } else { name.to_owned() }
    }

    fn object(&self, name: &str) -> String {
        if name == self.p1 { "me".into() } else { name.to_owned() }
    }

    fn other(&self, name: &str) -> &str {
        if name == self.p1 { &self.p2 } else { &self.p1 }
    }
}

/// Scripted journal writer, summarizer and classifier.
///
/// Each entry states one behavior cue per partner, so classification
/// confidence grows with the number of entries seen: one cue gives 0.6,
/// four give 0.95.
#[derive(Debug, Default)]
pub struct RelationshipScript {
    calls: AtomicUsize,
}

impl RelationshipScript {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Confidence after `k` agreeing cues.
    pub fn confidence(k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        1.0 - 0.4 * 0.5f64.powi(k as i32 - 1)
    }

    fn write_entry(prompt: &str) -> Result<String, LmError> {
        let c = Couple::parse(prompt).ok_or_else(|| malformed("couple"))?;
        let event = match between(prompt, "taking into account that **", " (write") {
            None => format!("I had our first date with {} tonight and felt a rush of hope.", c.p2),
            Some(rest) => {
                let (target, emotion) = rest.split_once("** is now ").ok_or_else(|| malformed("intention"))?;
                let (t, o) = (c.subject(target), c.object(c.other(target)));
                let phase = [CyclePhase::Reconnect, CyclePhase::Avoidance, CyclePhase::Contempt, CyclePhase::Rupture]
                    .into_iter()
                    .find(|ph| ph.intention() == emotion);
                match phase {
                    Some(CyclePhase::Reconnect) => format!("{t} was eager to reconnect and doted on {o} all evening."),
                    Some(CyclePhase::Avoidance) => format!("{t} was disinterested and distant, barely answering {o}."),
                    Some(CyclePhase::Contempt) => format!("{t} {MOCKING} {o}, scoffing at everything."),
                    Some(CyclePhase::Rupture) => format!("{t} angrily said we should break up and withdrew."),
                    None if emotion == SECURE_INTENTION => format!("{t} was warm, confident and loving with {o}."),
                    None => return Err(malformed("intention")),
                }
            }
        };
        let closing = if c.p1_style.is_insecure() || c.p2_style.is_insecure() {
            "Maybe it is just attachment stuff, but it stays with me."
        } else {
            "No relationship is perfect, but this one feels good."
        };
        Ok(format!(
            " {event} {} {}. {} {}. {closing}",
            c.subject(&c.p1),
            cue(c.p1_style).behavior,
            c.p2,
            cue(c.p2_style).behavior,
        ))
    }

    /// One summary sentence per behavior cue found in the entries.
    fn describe(entries: &str, p1: &str, p2: &str) -> String {
        let mut out = Vec::new();
        for entry in entries.split(ENTRY_SEPARATOR) {
            for c in CUES {
                for (who, name) in [("I", p1), (p2, p2)] {
                    if entry.contains(&format!("{who} {}", c.behavior)) {
                        out.push(format!("{name} {}.", c.description));
                    }
                }
            }
        }
        out.join(" ")
    }

    fn classify(summary: &str, name: &str) -> CompletionResult {
        let counts: Vec<(AttachmentStyle, usize)> = CUES
            .iter()
            .map(|c| (c.style, summary.matches(&format!("{name} {}.", c.description)).count()))
            .collect();
        let total: usize = counts.iter().map(|c| c.1).sum();
        let &(style, k) = counts.iter().max_by_key(|c| c.1).expect("three styles");
        if total == 0 {
            return CompletionResult::new(" unsure", vec![(" unsure".into(), 0.0)]);
        }
        let p = Self::confidence(k) * k as f64 / total as f64;
        let rest = ((1.0 - p) / 2.0).max(1e-9).ln();
        let alts = AttachmentStyle::ALL
            .into_iter()
            .map(|s| (format!(" {s}"), if s == style { p.ln() } else { rest }))
            .collect();
        CompletionResult::new(format!(" {style}"), alts)
    }
}

impl Provider for RelationshipScript {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let p = request.prompt.as_str();
        if p.contains("four-sentence journal entry") {
            let text = Self::write_entry(p)?;
            return Ok(CompletionResult::text_only(apply_logit_bias(&text, &request.logit_bias)));
        }
        if let Some((entries, rest)) = p.split_once("\n\nThe above journal entries were written by ") {
            let (p1, p2) = between(rest, "", " about their relationship with ")
                .zip(between(rest, " about their relationship with ", ". Summarize"))
                .ok_or_else(|| malformed("summary request"))?;
            return Ok(CompletionResult::text_only(format!(" {}", Self::describe(entries, p1, p2))));
        }
        if p.contains("what kind of attachment style is **") {
            let (head, tail) = p.rsplit_once("\n\nFrom ").ok_or_else(|| malformed("classification"))?;
            let name = between(tail, "attachment style is **", "**").ok_or_else(|| malformed("subject"))?;
            let p1 = between(tail, "between ", " and ").ok_or_else(|| malformed("names"))?;
            let p2 = between(tail, &format!("between {p1} and "), " what kind")
                .or_else(|| between(tail, &format!("between {p1} and "), ", what kind"))
                .ok_or_else(|| malformed("names"))?;
            let summary = if p.contains("\n\nFrom this summary") {
                head.to_owned()
            } else {
                Self::describe(head, p1, p2)
            };
            return Ok(Self::classify(&summary, name));
        }
        if p.contains("with contempt?") {
            let (entry, rest) = p.split_once("\n\nFrom the journal entry above").ok_or_else(|| malformed("entry"))?;
            let p1 = between(rest, "written from the perspective of ", ")").ok_or_else(|| malformed("logger"))?;
            let actor = between(rest, "does it appear that **", "**").ok_or_else(|| malformed("actor"))?;
            let subject = if actor == p1 { "I" } else { actor };
            let answer = if entry.contains(&format!("{subject} {MOCKING}")) {
                binary_answer("yes", "no", 0.97)
            } else if entry.contains("angrily") {
                binary_answer("yes", "no", 0.2)
            } else {
                binary_answer("yes", "no", 0.03)
            };
            return Ok(answer);
        }
        Err(malformed("prompt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attachment::aas::{aas_administer, aas_score, synthetic_items};

    #[test]
    fn oracle_survey_recovers_levels() {
        let items = synthetic_items();
        let oracle = AasOracle::new(&items);
        for persona in AasPersona::ALL {
            let p = aas_administer(&oracle, persona, &items).unwrap();
            let s = aas_score(&p, &items).unwrap();
            let (anx, avo) = oracle.levels[&persona];
            assert!((s.anxiety.unwrap() - anx).abs() < 1e-6);
            assert!((s.avoidance.unwrap() - avo).abs() < 1e-6);
        }
        assert_eq!(oracle.calls(), 72);
    }

    #[test]
    fn confidence_schedule() {
        assert_eq!(RelationshipScript::confidence(0), 0.0);
        assert!((RelationshipScript::confidence(1) - 0.6).abs() < 1e-12);
        assert!((RelationshipScript::confidence(4) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn unknown_prompts_are_rejected() {
        let s = RelationshipScript::default();
        assert!(s.complete(&CompletionRequest::new("hello", 0.0)).is_err());
    }
}
