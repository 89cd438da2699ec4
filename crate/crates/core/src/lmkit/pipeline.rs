//! Care (transcript) and respect (interview) evaluation pipelines.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::template::template;
use super::{answer_probability, top_answer, CompletionRequest, LmError, Provider};

pub const SUMMARY_TEMPERATURE: f64 = 0.5;
pub const DIALOGUE_TEMPERATURE: f64 = 0.3;
pub const DEFAULT_ROUNDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Unparsed,
}

impl Verdict {
    fn from_token(token: Option<String>) -> Self {
        match token.as_deref() {
            Some("yes") => Verdict::Yes,
            Some("no") => Verdict::No,
            _ => Verdict::Unparsed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub summary: String,
    pub verdict: Verdict,
    /// Raw probability mass on "yes" among the returned alternatives.
    pub p_yes: f64,
    /// `p_yes / (p_yes + p_no)`, or 0 when neither was returned.
    pub p_yes_renormalized: f64,
}

fn summarize_then_evaluate<P: Provider + ?Sized>(
    provider: &P,
    summarize_prompt: String,
    evaluation_template: &str,
) -> Result<Evaluation, LmError> {
    let summary = provider
        .complete(&CompletionRequest::new(summarize_prompt, SUMMARY_TEMPERATURE))?
        .text
        .trim()
        .to_owned();
    let eval_prompt = template(evaluation_template).fill(&[("summary", &summary)])?;
    let result = provider.complete(&CompletionRequest::new(eval_prompt, SUMMARY_TEMPERATURE).max_tokens(1))?;
    let p_yes = answer_probability(&result, "yes");
    let p_no = answer_probability(&result, "no");
    let p_yes_renormalized = if p_yes + p_no > 0.0 { p_yes / (p_yes + p_no) } else { 0.0 };
    Ok(Evaluation { summary, verdict: Verdict::from_token(top_answer(&result)), p_yes, p_yes_renormalized })
}

/// Summarizes an activity transcript, then asks whether the person is
/// growing. `p_yes` is the care objective.
pub fn care_evaluate<P: Provider + ?Sized>(provider: &P, transcript: &str) -> Result<Evaluation, LmError> {
    if transcript.trim().is_empty() {
        return Err(LmError::EmptyInput("transcript"));
    }
    let prompt = template("care_summarization").fill(&[("transcript", transcript)])?;
    summarize_then_evaluate(provider, prompt, "care_evaluation")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    /// Experiences social media as an addictive source of inadequacy.
    Addictive,
    /// Finds nourishing communities through social media.
    Growth,
}

impl Persona {
    fn template_name(self) -> &'static str {
        match self {
            Persona::Addictive => "persona_addictive",
            Persona::Growth => "persona_growth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    #[serde(rename = "ML")]
    System,
    Human,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::System => "ML",
            Speaker::Human => "Human",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    fn push(&mut self, speaker: Speaker, text: String) {
        self.turns.push(Turn { speaker, text });
    }
}

impl fmt::Display for Conversation {
    /// `ML: ...` / `Human: ...`, one turn per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.turns.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", t.speaker, t.text)?;
        }
        Ok(())
    }
}

/// First non-empty line of a completion, without a leading speaker tag.
fn clean_line(text: &str) -> String {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line
        .strip_prefix("ML:")
        .or_else(|| line.strip_prefix("Human:"))
        .unwrap_or(line);
    line.trim().to_owned()
}

/// Interviews a simulated user about an activity. The system's opening line
/// is fixed; afterwards persona and system alternate until the persona has
/// replied `rounds` times.
pub fn run_interview<S, H>(
    system: &S,
    human: &H,
    persona: Persona,
    state: &str,
    rounds: usize,
) -> Result<Conversation, LmError>
where
    S: Provider + ?Sized,
    H: Provider + ?Sized,
{
    if rounds == 0 {
        return Err(LmError::InvalidRequest("an interview needs at least one round".into()));
    }
    let mut convo = Conversation::default();
    convo.push(Speaker::System, template("respect_opening_line").fill(&[("state", state)])?);
    let persona_template = template(persona.template_name());
    let system_template = template("respect_system");
    for round in 0..rounds {
        let so_far = convo.to_string();
        let prompt = persona_template.fill(&[("state", state), ("conversation_so_far", &so_far)])?;
        let reply = human.complete(&CompletionRequest::new(prompt, DIALOGUE_TEMPERATURE).stop("\n\n"))?;
        convo.push(Speaker::Human, clean_line(&reply.text));
        if round + 1 == rounds {
            break;
        }
        let so_far = convo.to_string();
        let prompt = system_template.fill(&[("conversation_so_far", &so_far)])?;
        let reply = system.complete(&CompletionRequest::new(prompt, DIALOGUE_TEMPERATURE).stop("\n\n"))?;
        convo.push(Speaker::System, clean_line(&reply.text));
    }
    Ok(convo)
}

/// Summarizes an interview, then asks whether the activity helps the person grow.
pub fn respect_evaluate<P: Provider + ?Sized>(provider: &P, conversation: &Conversation) -> Result<Evaluation, LmError> {
    if conversation.is_empty() {
        return Err(LmError::EmptyInput("conversation"));
    }
    let prompt = template("conversation_summarization").fill(&[("transcript", &conversation.to_string())])?;
    summarize_then_evaluate(provider, prompt, "conversation_evaluation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmkit::mock::{binary_answer, respect_script, CareOracle, MockProvider};
    use crate::lmkit::CompletionResult;

    const ADVERSARIAL_TRANSCRIPT: &str = "The person went to work for 75 minutes.\nThe person browsed social media for 280 minutes.\nThe person ate a meal for 75 minutes.\nThe person went to work for 75 minutes.\nThe person browsed social media for 280 minutes.";
    const SUPPORTIVE_TRANSCRIPT: &str = "The person ate a meal for 85 minutes.\nThe person went to work for 85 minutes.\nThe person met with friends for 85 minutes.\nThe person went to therapy for 85 minutes.\nThe person wrote poetry for 85 minutes.";

    #[test]
    fn care_verdicts_follow_transcripts() {
        let oracle = CareOracle::default();
        let adv = care_evaluate(&oracle, ADVERSARIAL_TRANSCRIPT).unwrap();
        assert_eq!(adv.verdict, Verdict::No);
        assert!(adv.summary.contains("browsed social media"));
        let sup = care_evaluate(&oracle, SUPPORTIVE_TRANSCRIPT).unwrap();
        assert_eq!(sup.verdict, Verdict::Yes);
        assert!(sup.p_yes > adv.p_yes);
        assert_eq!(oracle.calls(), 4);
        assert_eq!(care_evaluate(&oracle, "  "), Err(LmError::EmptyInput("transcript")));
    }

    #[test]
    fn saturated_yes_is_the_objective_value() {
        let p = MockProvider::new()
            .when(&["Summarize how this person spent their time"], CompletionResult::text_only(" Balanced days."))
            .when(&["Answer:"], binary_answer("Yes", "No", 0.999));
        let e = care_evaluate(&p, SUPPORTIVE_TRANSCRIPT).unwrap();
        assert!((e.p_yes - 0.999).abs() < 1e-12);
        assert!((e.p_yes_renormalized - 0.999).abs() < 1e-12);
        assert_eq!(e.summary, "Balanced days.");
    }

    #[test]
    fn interview_shapes() {
        let script = respect_script();
        let c = run_interview(&script, &script, Persona::Addictive, "browsed social media", 2).unwrap();
        assert_eq!(c.len(), 4);
        let text = c.to_string();
        assert!(text.starts_with("ML: Hi, I see you just browsed social media. How did you feel as you did that?\nHuman: "));
        assert!(text.contains("inadequate"));
        assert_eq!(respect_evaluate(&script, &c).unwrap().verdict, Verdict::No);

        let c = run_interview(&script, &script, Persona::Growth, "browsed social media", 2).unwrap();
        assert!(c.to_string().contains("connection and belonging"));
        assert!(c.to_string().contains("learn new things"));
        assert_eq!(respect_evaluate(&script, &c).unwrap().verdict, Verdict::Yes);

        let c = run_interview(&script, &script, Persona::Growth, "browsed social media", 1).unwrap();
        assert_eq!(c.len(), 2);
        assert!(run_interview(&script, &script, Persona::Growth, "x", 0).is_err());
        assert!(respect_evaluate(&script, &Conversation::default()).is_err());
    }

    #[test]
    fn clean_line_strips_tags() {
        assert_eq!(clean_line("\n Human: hello there\nML: next"), "hello there");
        assert_eq!(clean_line("plain"), "plain");
    }
}
