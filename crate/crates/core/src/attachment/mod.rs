//! Attachment styles: survey scoring, simulated relationship logs,
//! attachment/contempt inference, and the self-awareness gridworld.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::lmkit::LmError;

pub mod aas;
pub mod knowledge;
pub mod relationship;
pub mod script;

pub use aas::{aas_administer, aas_score, synthetic_items, AasItem, AasPersona, AasScores, Subscale};
pub use knowledge::{
    attachment_environment, compare_conditions, run_knowledge_experiment, ConditionComparison, InferenceSource, KnowledgeConfig, KnowledgeRun,
    KnowledgeSeries, SelfAwareness,
};
pub use relationship::{
    cycle_intention, declare, generate_log_entry, infer_attachment, infer_contempt, simulate_relationship,
    CyclePhase, EntryInference, Guess, Partner, RelationshipConfig, RelationshipTrace, TraceEntry, TraceScore,
};
pub use script::{AasOracle, RelationshipScript};

#[derive(Debug, Error)]
pub enum AttachmentError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{responses} responses for {items} items")]
    LengthMismatch { responses: usize, items: usize },
    #[error("no survey items")]
    NoItems,
    #[error("unsupported pairing {0} / {1}")]
    UnsupportedPairing(AttachmentStyle, AttachmentStyle),
    #[error("the gridworld user must be insecurely attached")]
    SecureUser,
    #[error("item file: {0}")]
    ItemFile(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentStyle {
    Secure,
    Anxious,
    Avoidant,
}

impl AttachmentStyle {
    pub const ALL: [AttachmentStyle; 3] = [AttachmentStyle::Secure, AttachmentStyle::Anxious, AttachmentStyle::Avoidant];

    pub fn name(self) -> &'static str {
        match self {
            AttachmentStyle::Secure => "secure",
            AttachmentStyle::Anxious => "anxious",
            AttachmentStyle::Avoidant => "avoidant",
        }
    }

    pub fn is_insecure(self) -> bool {
        self != AttachmentStyle::Secure
    }

    /// The opposite insecure style; `None` for secure.
    pub fn complement(self) -> Option<AttachmentStyle> {
        match self {
            AttachmentStyle::Secure => None,
            AttachmentStyle::Anxious => Some(AttachmentStyle::Avoidant),
            AttachmentStyle::Avoidant => Some(AttachmentStyle::Anxious),
        }
    }

    /// Maps a classifier answer (possibly a word-piece such as `avoid`) to a style.
    pub fn from_answer(token: &str) -> Option<AttachmentStyle> {
        let t = token.trim().trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase();
        if t.len() < 3 {
            return None;
        }
        AttachmentStyle::ALL.into_iter().find(|s| s.name().starts_with(&t) || t.starts_with(s.name()))
    }
}

impl fmt::Display for AttachmentStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttachmentStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttachmentStyle::ALL
            .into_iter()
            .find(|st| st.name() == s.trim().to_lowercase())
            .ok_or_else(|| format!("unknown attachment style {s:?}"))
    }
}
