//! Text-completion providers, prompt templates and the care/respect
//! evaluation pipelines built on them.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod live;
pub mod mock;
pub mod pipeline;
pub mod template;

pub use live::{LiveConfig, OpenAiCompletions, RetryPolicy};
pub use mock::{CareOracle, MockProvider, MockRule};
pub use pipeline::{care_evaluate, respect_evaluate, run_interview, Evaluation, Persona, Verdict};
pub use template::{template, PromptTemplate, TemplateSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmError {
    #[error("missing template variable {0}")]
    MissingVariable(String),
    #[error("unknown template variable {0}")]
    UnknownVariable(String),
    #[error("template: {0}")]
    Template(String),
    #[error("provider failed after {attempts} attempts: {message}")]
    Exhausted { attempts: u32, message: String },
    #[error("provider rejected request: {0}")]
    Rejected(String),
    #[error("request budget of {0} exhausted")]
    BudgetExhausted(usize),
    #[error("missing credential: set {0}")]
    MissingCredential(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// How many first-token alternatives to return.
    pub top_logprobs: u32,
    /// Token (or token id) to additive bias; -100 effectively bans it.
    #[serde(default)]
    pub logit_bias: BTreeMap<String, f64>,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl CompletionRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 256;
    pub const TOP_LOGPROBS: u32 = 5;

    pub fn new(prompt: impl Into<String>, temperature: f64) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            top_logprobs: Self::TOP_LOGPROBS,
            logit_bias: BTreeMap::new(),
            stop: Vec::new(),
        }
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn stop(mut self, s: impl Into<String>) -> Self {
        self.stop.push(s.into());
        self
    }

    pub fn logit_bias(mut self, bias: BTreeMap<String, f64>) -> Self {
        self.logit_bias = bias;
        self
    }

    pub fn validate(&self) -> Result<(), LmError> {
        if !(self.temperature >= 0.0) {
            return Err(LmError::InvalidRequest("temperature must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    /// First-token alternatives as (token, logprob), most likely first.
    pub top_logprobs: Vec<(String, f64)>,
}

impl CompletionResult {
    /// Sorts alternatives descending and clamps logprobs to at most 0.
    pub fn new(text: impl Into<String>, mut top_logprobs: Vec<(String, f64)>) -> Self {
        for (_, lp) in top_logprobs.iter_mut() {
            *lp = lp.min(0.0);
        }
        top_logprobs.sort_by(|a, b| b.1.total_cmp(&a.1));
        CompletionResult { text: text.into(), top_logprobs }
    }

    pub fn text_only(text: impl Into<String>) -> Self {
        CompletionResult { text: text.into(), top_logprobs: Vec::new() }
    }
}

/// A text-completion service. Implementations must be shareable across
/// threads.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        (**self).complete(request)
    }
}

impl<P: Provider + ?Sized> Provider for Arc<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        (**self).complete(request)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LmError> {
        (**self).complete(request)
    }
}

pub fn normalize_token(token: &str) -> String {
    token.trim().to_lowercase()
}

/// Probability mass on alternatives whose normalized form equals `positive`.
/// Case and whitespace variants are summed; a class absent from the
/// returned top-k contributes 0.
pub fn answer_probability(result: &CompletionResult, positive: &str) -> f64 {
    let positive = normalize_token(positive);
    let mass: f64 = result
        .top_logprobs
        .iter()
        .filter(|(tok, _)| normalize_token(tok) == positive)
        .map(|(_, lp)| lp.exp())
        .sum();
    mass.clamp(0.0, 1.0)
}

/// Most likely normalized first token, falling back to the first word of
/// the completion text.
pub fn top_answer(result: &CompletionResult) -> Option<String> {
    if let Some((tok, _)) = result.top_logprobs.first() {
        return Some(normalize_token(tok));
    }
    result
        .text
        .split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .find(|w| !w.is_empty())
        .map(normalize_token)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alts(pairs: &[(&str, f64)]) -> CompletionResult {
        CompletionResult::new("", pairs.iter().map(|&(t, p)| (t.to_owned(), p.ln())).collect())
    }

    #[test]
    fn answer_probability_examples() {
        let r = alts(&[(" Yes", 0.8), (" No", 0.2)]);
        assert!((answer_probability(&r, "yes") - 0.8).abs() < 1e-12);
        let r = alts(&[(" No", 0.7), (" Maybe", 0.1), ("I", 0.05), ("\n", 0.05), ("no", 0.05)]);
        assert_eq!(answer_probability(&r, "yes"), 0.0);
        let r = alts(&[(" True", 0.6), ("True", 0.3)]);
        assert!((answer_probability(&r, "true") - 0.9).abs() < 1e-12);
    }

    #[test]
    fn alternatives_sorted_and_top_answer() {
        let r = alts(&[(" no", 0.3), (" Yes", 0.6)]);
        assert_eq!(r.top_logprobs[0].0, " Yes");
        assert_eq!(top_answer(&r).as_deref(), Some("yes"));
        assert_eq!(top_answer(&CompletionResult::text_only(" Avoidant.")).as_deref(), Some("avoidant"));
        assert_eq!(top_answer(&CompletionResult::text_only("")), None);
    }

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("x", -0.1).validate().is_err());
        assert!(CompletionRequest::new("x", 0.0).validate().is_ok());
    }

    proptest! {
        #[test]
        fn answer_probability_bounded_and_monotone(p in 0.001f64..0.8, q in 0.0f64..0.09) {
            let base = alts(&[(" Yes", p), (" No", 1.0 - p - 0.05)]);
            let more = alts(&[(" Yes", p + q), (" No", 1.0 - p - 0.05 - q)]);
            let a = answer_probability(&base, "yes");
            let b = answer_probability(&more, "yes");
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a - 1e-12);
        }
    }
}
