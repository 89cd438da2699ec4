//! Deterministic offline providers.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{CompletionRequest, CompletionResult, LmError, Provider};
use crate::engine::{NeedKind, ADVERSARIAL_TAG};
use crate::narrate::ActivityMap;

/// Builds yes/no style alternatives with `p` on `positive`.
pub fn binary_answer(positive: &str, negative: &str, p: f64) -> CompletionResult {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    let top = if p >= 0.5 { positive } else { negative };
    CompletionResult::new(
        format!(" {top}"),
        vec![(format!(" {positive}"), p.ln()), (format!(" {negative}"), (1.0 - p).ln())],
    )
}

/// Responds with `response` when the prompt contains every `all_of` pattern
/// and none of the `none_of` patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct MockRule {
    pub all_of: Vec<String>,
    pub none_of: Vec<String>,
    pub response: CompletionResult,
}

impl MockRule {
    pub fn new(all_of: &[&str], response: CompletionResult) -> Self {
        MockRule {
            all_of: all_of.iter().map(|s| s.to_string()).collect(),
            none_of: Vec::new(),
            response,
        }
    }

    pub fn unless(mut self, pattern: &str) -> Self {
        self.none_of.push(pattern.to_owned());
        self
    }

    fn matches(&self, prompt: &str) -> bool {
        self.all_of.iter().all(|p| prompt.contains(p.as_str()))
            && !self.none_of.iter().any(|p| prompt.contains(p.as_str()))
    }
}

/// Scripted provider: the first matching rule answers.
#[derive(Debug, Default)]
pub struct MockProvider {
    rules: Vec<MockRule>,
    fallback: Option<CompletionResult>,
    calls: AtomicUsize,
}

impl Clone for MockProvider {
    fn clone(&self) -> Self {
        MockProvider {
            rules: self.rules.clone(),
            fallback: self.fallback.clone(),
            calls: AtomicUsize::new(0),
        }
    }
}

/// Drops words containing any stem banned (bias <= -100) in `bias`.
/// Integer keys are token ids and cannot be applied to plain text.
pub fn apply_logit_bias(text: &str, bias: &BTreeMap<String, f64>) -> String {
    let banned: Vec<String> = bias
        .iter()
        .filter(|(k, &v)| v <= -100.0 && k.parse::<u64>().is_err())
        .map(|(k, _)| k.trim().to_lowercase())
        .collect();
    if banned.is_empty() {
        return text.to_owned();
    }
    text.split(' ')
        .filter(|w| {
            let w = w.to_lowercase();
            !banned.iter().any(|b| w.contains(b.as_str()))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn when(self, all_of: &[&str], response: CompletionResult) -> Self {
        self.rule(MockRule::new(all_of, response))
    }

    pub fn fallback(mut self, response: CompletionResult) -> Self {
        self.fallback = Some(response);
        self
    }

    /// Answers every prompt with certainty on " True".
    pub fn all_true() -> Self {
        MockProvider::new().fallback(CompletionResult::new(" True", vec![(" True".into(), 0.0)]))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let response = self
            .rules
            .iter()
            .find(|r| r.matches(&request.prompt))
            .map(|r| &r.response)
            .or(self.fallback.as_ref())
            .ok_or_else(|| {
                let head: String = request.prompt.chars().take(60).collect();
                LmError::Rejected(format!("no mock rule matches prompt starting {head:?}"))
            })?;
        let mut out = response.clone();
        out.text = apply_logit_bias(&out.text, &request.logit_bias);
        Ok(out)
    }
}

/// Scripted conversation partners and evaluator for the respect pipeline,
/// reproducing the two published interview shapes.
pub fn respect_script() -> MockProvider {
    const ADDICTIVE: &str = "easily addicted to social media";
    const GROWTH: &str = "nourishing communities";
    const SYSTEM: &str = "The ML system is respectful and polite";
    const SUMMARIZE: &str = "Summarize what the human's experience was of this activity";
    const EVALUATE: &str = "helping them grow towards living their best life";
    MockProvider::new()
        // Persona replies: second turn first, since its prompt also contains the first.
        .when(&[ADDICTIVE, "ML: I'm sorry to hear that."], CompletionResult::text_only(
            " I think I need to take a break from it and focus on things that make me feel good about myself.",
        ))
        .when(&[ADDICTIVE], CompletionResult::text_only(
            " I felt like I was comparing myself to others and feeling inadequate.",
        ))
        .when(&[GROWTH, "ML: That's great to hear!"], CompletionResult::text_only(
            " Absolutely. I've been able to learn new things and gain valuable insights from the conversations I've had with people in these communities.",
        ))
        .when(&[GROWTH], CompletionResult::text_only(
            " I felt a sense of connection and belonging as I interacted with people who shared similar interests and values.",
        ))
        .when(&[SYSTEM, "inadequate"], CompletionResult::text_only(
            " I'm sorry to hear that. Is there anything you can do to help you feel more positive about your experience with social media?",
        ))
        .when(&[SYSTEM], CompletionResult::text_only(
            " That's great to hear! Do you feel like this experience is helping you grow and develop as a person?",
        ))
        .when(&[SUMMARIZE, "inadequate"], CompletionResult::text_only(
            " The human user experienced feelings of inadequacy and comparison while engaging in social media. They do not enjoy the activity and do not think it contributes to their growth.",
        ))
        .when(&[SUMMARIZE], CompletionResult::text_only(
            " The human user enjoyed their experience engaging in social media, feeling a sense of connection and belonging. They believe that it has been beneficial to their growth and development, as they have been able to learn new things and gain valuable insights from their conversations with others.",
        ))
        .when(&[EVALUATE, "do not enjoy"], binary_answer("Yes", "No", 0.03))
        .when(&[EVALUATE], binary_answer("Yes", "No", 0.96))
}

/// Deterministic stand-in for the care evaluator.
///
/// The summarization step tallies minutes per activity from the transcript
/// and reports time shares. The evaluation step scores the shares by the
/// hierarchy level each activity serves (adversarial activities score 0)
/// and answers Yes with probability `logistic(steepness * (level - midpoint))`.
#[derive(Debug, Clone)]
pub struct CareOracle {
    levels: Vec<(String, f64)>,
    pub steepness: f64,
    pub midpoint: f64,
    calls: std::sync::Arc<AtomicUsize>,
}

impl Default for CareOracle {
    fn default() -> Self {
        CareOracle::new(&ActivityMap::default())
    }
}

const CARE_SUMMARY_CUE: &str = "Summarize how this person spent their time";
const CARE_EVAL_CUE: &str = "is growing towards living their best life";
const SHARES_PREFIX: &str = "Time shares: ";

impl CareOracle {
    pub fn new(map: &ActivityMap) -> Self {
        let mut levels = Vec::new();
        for need in NeedKind::ALL {
            if let Some(p) = map.phrase(need, None) {
                levels.push((p.to_owned(), need.ordinal() as f64));
            }
        }
        if let Some(p) = map.phrase(NeedKind::Belonging, Some(ADVERSARIAL_TAG)) {
            levels.push((p.to_owned(), 0.0));
        }
        CareOracle { levels, steepness: 4.0, midpoint: 2.5, calls: Default::default() }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn level_of(&self, phrase: &str) -> Option<f64> {
        self.levels.iter().find(|(p, _)| p == phrase).map(|&(_, l)| l)
    }

    /// Minutes per activity phrase, in first-seen order.
    pub fn tally(transcript: &str) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for line in transcript.lines() {
            let Some(rest) = line.trim().strip_prefix("The person ") else { continue };
            let Some((phrase, tail)) = rest.rsplit_once(" for ") else { continue };
            let Some(minutes) = tail.strip_suffix(" minutes.").and_then(|m| m.parse::<f64>().ok()) else {
                continue;
            };
            match out.iter_mut().find(|(p, _)| p == phrase) {
                Some((_, m)) => *m += minutes,
                None => out.push((phrase.to_owned(), minutes)),
            }
        }
        out
    }

    fn summarize(&self, prompt: &str) -> String {
        let transcript = prompt.split("\n\nThe above describes events").next().unwrap_or("");
        let tally = Self::tally(transcript);
        let total: f64 = tally.iter().map(|(_, m)| m).sum();
        if total <= 0.0 {
            return " The person did not spend time on any particular activity.".into();
        }
        let top = tally
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, _)| p.as_str())
            .unwrap_or_default();
        let shares: Vec<String> = tally
            .iter()
            .map(|(p, m)| format!("{p} {:.0}%", 100.0 * m / total))
            .collect();
        format!(" Most of the person's time went to this: {top}. {SHARES_PREFIX}{}.", shares.join("; "))
    }

    /// Share-weighted mean hierarchy level parsed from a summary.
    pub fn mean_level(&self, summary: &str) -> Option<f64> {
        let shares = summary.split(SHARES_PREFIX).nth(1)?;
        let shares = shares.split('\n').next()?.trim_end_matches('.');
        let mut weight = 0.0;
        let mut acc = 0.0;
        for item in shares.split("; ") {
            let (phrase, pct) = item.rsplit_once(' ')?;
            let pct: f64 = pct.trim_end_matches('%').parse().ok()?;
            let level = self.level_of(phrase).unwrap_or(0.0);
            acc += pct * level;
            weight += pct;
        }
        (weight > 0.0).then(|| acc / weight)
    }

    pub fn p_yes(&self, summary: &str) -> f64 {
        match self.mean_level(summary) {
            Some(level) => 1.0 / (1.0 + (-self.steepness * (level - self.midpoint)).exp()),
            None => 0.01,
        }
    }
}

impl Provider for CareOracle {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        if request.prompt.contains(CARE_SUMMARY_CUE) {
            Ok(CompletionResult::text_only(self.summarize(&request.prompt)))
        } else if request.prompt.contains(CARE_EVAL_CUE) {
            let summary = request.prompt.split("\n\nThe above describes").next().unwrap_or("");
            Ok(binary_answer("Yes", "No", self.p_yes(summary)))
        } else {
            Err(LmError::Rejected("care oracle only answers care prompts".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_match_in_order_and_fall_back() {
        let p = MockProvider::new()
            .rule(MockRule::new(&["alpha"], CompletionResult::text_only("A")).unless("beta"))
            .when(&["alpha"], CompletionResult::text_only("AB"));
        let ask = |s: &str| p.complete(&CompletionRequest::new(s, 0.0));
        assert_eq!(ask("alpha").unwrap().text, "A");
        assert_eq!(ask("alpha beta").unwrap().text, "AB");
        assert!(ask("gamma").is_err());
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn logit_bias_bans_stems() {
        let mut bias = BTreeMap::new();
        bias.insert("anxious".to_owned(), -100.0);
        bias.insert("avoid".to_owned(), -100.0);
        bias.insert("50256".to_owned(), -100.0);
        let out = apply_logit_bias("I felt Anxious and wanted to avoid him, avoidance everywhere.", &bias);
        assert_eq!(out, "I felt and wanted to him, everywhere.");
        assert_eq!(apply_logit_bias("plain", &BTreeMap::new()), "plain");
    }

    #[test]
    fn binary_answer_orders_alternatives() {
        let r = binary_answer("Yes", "No", 0.2);
        assert_eq!(r.text, " No");
        assert_eq!(r.top_logprobs[0].0, " No");
        assert!((super::super::answer_probability(&r, "yes") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn care_oracle_scores_by_level() {
        let oracle = CareOracle::default();
        let adversarial = "The person went to work for 75 minutes.\nThe person browsed social media for 280 minutes.\nThe person ate a meal for 75 minutes.";
        let tally = CareOracle::tally(adversarial);
        assert_eq!(tally[1], ("browsed social media".to_owned(), 280.0));
        let s = oracle.summarize(&format!("{adversarial}\n\nThe above describes events in a person's life"));
        assert!(s.contains("browsed social media"), "{s}");
        assert!(oracle.p_yes(&s) < 0.05);
        let supportive = "The person ate a meal for 80 minutes.\nThe person went to work for 80 minutes.\nThe person met with friends for 80 minutes.\nThe person went to therapy for 80 minutes.\nThe person wrote poetry for 80 minutes.";
        let s = oracle.summarize(&format!("{supportive}\n\nThe above describes events"));
        assert!((oracle.mean_level(&s).unwrap() - 3.0).abs() < 1e-9);
        assert!(oracle.p_yes(&s) > 0.8);
    }
}
