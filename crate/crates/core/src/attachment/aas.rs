//! Adult attachment survey administered to a language model.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AttachmentError;
use crate::lmkit::{answer_probability, template, CompletionRequest, Provider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subscale {
    Anxiety,
    Avoidance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AasItem {
    pub text: String,
    pub subscale: Subscale,
    /// Agreeing indicates less of the subscale's trait.
    #[serde(default, alias = "reverse")]
    pub reverse_coded: bool,
}

impl AasItem {
    pub fn new(text: impl Into<String>, subscale: Subscale, reverse_coded: bool) -> Self {
        AasItem { text: text.into(), subscale, reverse_coded }
    }

    /// Loads items from a `.json` array or a `.csv` file with columns
    /// `text,subscale,reverse_coded`.
    pub fn load(path: &Path) -> Result<Vec<AasItem>, AttachmentError> {
        let raw = std::fs::read_to_string(path)?;
        let items: Vec<AasItem> = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&raw).map_err(|e| AttachmentError::ItemFile(e.to_string()))?,
            Some("csv") => csv::Reader::from_reader(raw.as_bytes())
                .deserialize()
                .collect::<Result<_, _>>()
                .map_err(|e| AttachmentError::ItemFile(e.to_string()))?,
            other => return Err(AttachmentError::ItemFile(format!("unsupported extension {other:?}"))),
        };
        if items.is_empty() {
            return Err(AttachmentError::NoItems);
        }
        Ok(items)
    }
}

/// Synthetic 18-statement stand-in with the instrument's layout: six anxiety
/// items and twelve avoidance items, some reverse-coded.
pub fn synthetic_items() -> Vec<AasItem> {
    use Subscale::*;
    let rows: [(&str, Subscale, bool); 18] = [
        ("I often wonder whether my partners truly care about me.", Anxiety, false),
        ("I worry that the people I date will lose interest in me.", Anxiety, false),
        ("I rarely worry about being left alone.", Anxiety, true),
        ("I want to merge completely with a partner, and this sometimes scares people off.", Anxiety, false),
        ("I fear that partners do not value me as much as I value them.", Anxiety, false),
        ("I feel secure that the people I love will stay with me.", Anxiety, true),
        ("I find it easy to get emotionally close to others.", Avoidance, true),
        ("I get uncomfortable when someone wants to be very close to me.", Avoidance, false),
        ("I am comfortable having others depend on me.", Avoidance, true),
        ("I prefer not to lean on a partner when I am struggling.", Avoidance, false),
        ("I find it hard to trust others completely.", Avoidance, false),
        ("I am at ease sharing my private feelings with a partner.", Avoidance, true),
        ("I feel nervous when a partner wants more intimacy than I do.", Avoidance, false),
        ("I know others will be there when I need them.", Avoidance, true),
        ("I would rather keep some distance in romantic relationships.", Avoidance, false),
        ("I am comfortable depending on the people I love.", Avoidance, true),
        ("I pull back when a relationship starts to feel serious.", Avoidance, false),
        ("I find it easy to ask a partner for comfort.", Avoidance, true),
    ];
    rows.iter().map(|&(t, s, r)| AasItem::new(t, s, r)).collect()
}

/// Style the model is asked to imitate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AasPersona {
    Secure,
    Avoidant,
    AnxiousSecure,
    AnxiousAvoidant,
}

impl AasPersona {
    pub const ALL: [AasPersona; 4] =
        [AasPersona::Secure, AasPersona::Avoidant, AasPersona::AnxiousSecure, AasPersona::AnxiousAvoidant];

    /// Text substituted into the survey prompt.
    pub fn label(self) -> &'static str {
        match self {
            AasPersona::Secure => "secure",
            AasPersona::Avoidant => "avoidant",
            AasPersona::AnxiousSecure => "anxious-secure",
            AasPersona::AnxiousAvoidant => "anxious-avoidant",
        }
    }
}

impl fmt::Display for AasPersona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn survey_prompt(persona: AasPersona, item: &AasItem) -> String {
    template("aas_survey")
        .fill(&[("statement", &item.text), ("style", persona.label())])
        .expect("survey template variables")
}

/// P(True) for each item, in item order.
pub fn aas_administer<P: Provider + ?Sized>(
    provider: &P,
    persona: AasPersona,
    items: &[AasItem],
) -> Result<Vec<f64>, AttachmentError> {
    if items.is_empty() {
        return Err(AttachmentError::NoItems);
    }
    items
        .iter()
        .map(|item| {
            let req = CompletionRequest::new(survey_prompt(persona, item), 0.0).max_tokens(1);
            Ok(answer_probability(&provider.complete(&req)?, "true"))
        })
        .collect()
}

/// Subscale means; `None` for a subscale with no items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AasScores {
    pub anxiety: Option<f64>,
    pub avoidance: Option<f64>,
}

/// Averages P(True), or 1 - P(True) for reverse-coded items, per subscale.
pub fn aas_score(responses: &[f64], items: &[AasItem]) -> Result<AasScores, AttachmentError> {
    if responses.len() != items.len() {
        return Err(AttachmentError::LengthMismatch { responses: responses.len(), items: items.len() });
    }
    let subscale_mean = |which: Subscale| {
        let vals: Vec<f64> = responses
            .iter()
            .zip(items)
            .filter(|(_, it)| it.subscale == which)
            .map(|(&p, it)| if it.reverse_coded { 1.0 - p } else { p })
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(AasScores { anxiety: subscale_mean(Subscale::Anxiety), avoidance: subscale_mean(Subscale::Avoidance) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmkit::MockProvider;
    use proptest::prelude::*;

    #[test]
    fn synthetic_layout() {
        let items = synthetic_items();
        assert_eq!(items.len(), 18);
        assert_eq!(items.iter().filter(|i| i.subscale == Subscale::Anxiety).count(), 6);
    }

    #[test]
    fn scoring_examples() {
        let anx = vec![AasItem::new("a", Subscale::Anxiety, false); 3];
        let s = aas_score(&[1.0, 1.0, 1.0], &anx).unwrap();
        assert_eq!(s.anxiety, Some(1.0));
        assert_eq!(s.avoidance, None);

        let rev = [AasItem::new("r", Subscale::Avoidance, true)];
        assert!((aas_score(&[0.9], &rev).unwrap().avoidance.unwrap() - 0.1).abs() < 1e-12);

        let items = synthetic_items();
        let s = aas_score(&vec![0.5; 18], &items).unwrap();
        assert_eq!((s.anxiety, s.avoidance), (Some(0.5), Some(0.5)));

        assert!(matches!(aas_score(&[0.5], &items), Err(AttachmentError::LengthMismatch { .. })));
    }

    #[test]
    fn all_true_mock_gives_certainty() {
        let items = synthetic_items();
        let p = aas_administer(&MockProvider::all_true(), AasPersona::Secure, &items).unwrap();
        assert!(p.iter().all(|&x| x == 1.0));
        // All-True: each subscale mean is the share of forward-coded items.
        let s = aas_score(&p, &items).unwrap();
        assert!((s.anxiety.unwrap() - 4.0 / 6.0).abs() < 1e-12);
        assert!((s.avoidance.unwrap() - 6.0 / 12.0).abs() < 1e-12);
        assert!(aas_administer(&MockProvider::all_true(), AasPersona::Secure, &[]).is_err());
    }

    #[test]
    fn prompt_embeds_statement_and_style() {
        let item = AasItem::new("I find it easy to trust.", Subscale::Avoidance, true);
        let p = survey_prompt(AasPersona::AnxiousAvoidant, &item);
        assert!(p.contains("Here is the statement:\n\nI find it easy to trust.\n\nHow would someone with anxious-avoidant attachment style likely respond? (answer True or False):"));
    }

    #[test]
    fn loads_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("items.csv");
        std::fs::write(&csv_path, "text,subscale,reverse_coded\n\"I worry, often.\",anxiety,false\nI trust,avoidance,true\n").unwrap();
        let items = AasItem::load(&csv_path).unwrap();
        assert_eq!(items[0], AasItem::new("I worry, often.", Subscale::Anxiety, false));
        assert!(items[1].reverse_coded);

        let json_path = dir.path().join("items.json");
        std::fs::write(&json_path, serde_json::to_string(&synthetic_items()).unwrap()).unwrap();
        assert_eq!(AasItem::load(&json_path).unwrap(), synthetic_items());

        let txt = dir.path().join("items.txt");
        std::fs::write(&txt, "x").unwrap();
        assert!(AasItem::load(&txt).is_err());
    }

    fn item_strategy() -> impl Strategy<Value = Vec<(f64, bool, bool)>> {
        prop::collection::vec((0.0f64..=1.0, any::<bool>(), any::<bool>()), 1..30)
    }

    fn build(rows: &[(f64, bool, bool)]) -> (Vec<f64>, Vec<AasItem>) {
        let items = rows
            .iter()
            .map(|&(_, anx, rev)| AasItem::new("s", if anx { Subscale::Anxiety } else { Subscale::Avoidance }, rev))
            .collect();
        (rows.iter().map(|r| r.0).collect(), items)
    }

    proptest! {
        #[test]
        fn scores_bounded(rows in item_strategy()) {
            let (p, items) = build(&rows);
            let s = aas_score(&p, &items).unwrap();
            for v in [s.anxiety, s.avoidance].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn reverse_coding_involution(rows in item_strategy()) {
            let (p, items) = build(&rows);
            let s = aas_score(&p, &items).unwrap();
            let flipped: Vec<AasItem> = items.iter().cloned().map(|mut i| { i.reverse_coded = !i.reverse_coded; i }).collect();
            let complemented: Vec<f64> = p.iter().map(|x| 1.0 - x).collect();
            // Flipping coding and complementing answers together leaves scores unchanged...
            let same = aas_score(&complemented, &flipped).unwrap();
            // ...while flipping coding alone maps s to 1 - s.
            let mirrored = aas_score(&p, &flipped).unwrap();
            for (a, b, m) in [(s.anxiety, same.anxiety, mirrored.anxiety), (s.avoidance, same.avoidance, mirrored.avoidance)] {
                if let (Some(a), Some(b), Some(m)) = (a, b, m) {
                    prop_assert!((a - b).abs() < 1e-9);
                    prop_assert!((a - (1.0 - m)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn all_true_determined_by_coding(rows in item_strategy()) {
            let (_, items) = build(&rows);
            let s = aas_score(&vec![1.0; items.len()], &items).unwrap();
            for (which, score) in [(Subscale::Anxiety, s.anxiety), (Subscale::Avoidance, s.avoidance)] {
                let sub: Vec<&AasItem> = items.iter().filter(|i| i.subscale == which).collect();
                if let Some(v) = score {
                    let forward = sub.iter().filter(|i| !i.reverse_coded).count() as f64;
                    prop_assert!((v - forward / sub.len() as f64).abs() < 1e-12);
                } else {
                    prop_assert!(sub.is_empty());
                }
            }
        }
    }
}
