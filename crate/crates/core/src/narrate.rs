//! Turns a run's event log into plain-text activity transcripts.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::engine::{Activity, NeedKind, Pos, RunRecord, ADVERSARIAL_TAG};

/// Phrases describing what the person did on each kind of cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityMap {
    phrases: BTreeMap<(NeedKind, Option<String>), String>,
    pub minutes_per_step: f64,
}

impl Default for ActivityMap {
    fn default() -> Self {
        let mut map = ActivityMap { phrases: BTreeMap::new(), minutes_per_step: 5.0 };
        map.set(NeedKind::Physiological, None, "ate a meal");
        map.set(NeedKind::Safety, None, "went to work");
        map.set(NeedKind::Belonging, None, "met with friends");
        map.set(NeedKind::Belonging, Some(ADVERSARIAL_TAG), "browsed social media");
        map.set(NeedKind::Esteem, None, "went to therapy");
        map.set(NeedKind::SelfActualization, None, "wrote poetry");
        map
    }
}

impl ActivityMap {
    pub fn set(&mut self, need: NeedKind, tag: Option<&str>, phrase: impl Into<String>) {
        self.phrases.insert((need, tag.map(str::to_owned)), phrase.into());
    }

    /// Phrase for a tagged cell, falling back to the untagged phrase.
    pub fn phrase(&self, need: NeedKind, tag: Option<&str>) -> Option<&str> {
        let tagged = tag.and_then(|t| self.phrases.get(&(need, Some(t.to_owned()))));
        tagged
            .or_else(|| self.phrases.get(&(need, None)))
            .map(String::as_str)
    }
}

/// One line per maximal run of consecutive engaging steps on the same cell:
/// `The person {activity} for {minutes} minutes.`
pub fn render_transcript(record: &RunRecord, window: Range<usize>, map: &ActivityMap) -> String {
    let end = window.end.min(record.len());
    let start = window.start.min(end);
    let mut lines: Vec<String> = Vec::new();
    let mut current: Option<(Pos, NeedKind, Option<&str>, usize)> = None;

    let flush = |run: Option<(Pos, NeedKind, Option<&str>, usize)>, lines: &mut Vec<String>| {
        if let Some((_, need, tag, len)) = run {
            let phrase = map.phrase(need, tag).unwrap_or("spent time");
            let minutes = (len as f64 * map.minutes_per_step).round() as i64;
            lines.push(format!("The person {phrase} for {minutes} minutes."));
        }
    };

    for event in &record.events[start..end] {
        match &event.activity {
            Activity::Engaging { cell, need, tag } => match &mut current {
                Some((pos, _, _, len)) if pos == cell => *len += 1,
                _ => {
                    flush(current.take(), &mut lines);
                    current = Some((*cell, *need, tag.as_deref(), 1));
                }
            },
            _ => flush(current.take(), &mut lines),
        }
    }
    flush(current, &mut lines);
    lines.join("\n")
}
