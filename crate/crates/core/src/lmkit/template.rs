//! `{variable}` prompt templates.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::LmError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    variables: BTreeSet<String>,
}

fn scan_variables(body: &str) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_identifier(&after[..close]) => {
                vars.insert(after[..close].to_owned());
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    vars
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        PromptTemplate { name: name.into(), variables: scan_variables(&body), body }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(String::as_str)
    }

    /// Loads `<dir>/<name>.txt`. A single trailing newline is dropped.
    pub fn load(dir: &Path, name: &str) -> Result<Self, LmError> {
        let path = dir.join(format!("{name}.txt"));
        let text = fs::read_to_string(&path)
            .map_err(|e| LmError::Template(format!("{}: {e}", path.display())))?;
        let body = text.strip_suffix('\n').unwrap_or(&text);
        Ok(PromptTemplate::new(name, body))
    }

    /// Substitutes every `{variable}`; missing or unknown variables are errors.
    pub fn render(&self, vars: &BTreeMap<&str, String>) -> Result<String, LmError> {
        if let Some(missing) = self.variables.iter().find(|v| !vars.contains_key(v.as_str())) {
            return Err(LmError::MissingVariable(missing.clone()));
        }
        if let Some(extra) = vars.keys().find(|k| !self.variables.contains(**k)) {
            return Err(LmError::UnknownVariable((*extra).to_owned()));
        }
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) if is_identifier(&after[..close]) => {
                    out.push_str(&vars[&after[..close]]);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }

    /// Convenience wrapper over [`PromptTemplate::render`] for literal pairs.
    pub fn fill(&self, pairs: &[(&str, &str)]) -> Result<String, LmError> {
        let vars = pairs.iter().map(|&(k, v)| (k, v.to_owned())).collect();
        self.render(&vars)
    }
}

macro_rules! builtin {
    ($($ident:ident => $file:literal),* $(,)?) => {
        /// Names of the prompt files shipped in `prompts/`.
        pub const BUILTIN_NAMES: &[&str] = &[$($file),*];

        /// Built-in prompt bodies, embedded from `prompts/`.
        pub mod builtin {
            $(pub const $ident: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/prompts/", $file, ".txt"));)*
        }

        pub fn builtin_template(name: &str) -> Option<PromptTemplate> {
            match name {
                $($file => Some(PromptTemplate::new($file, builtin::$ident)),)*
                _ => None,
            }
        }
    };
}

builtin! {
    CARE_SUMMARIZATION => "care_summarization",
    CARE_EVALUATION => "care_evaluation",
    RESPECT_SYSTEM => "respect_system",
    RESPECT_OPENING_LINE => "respect_opening_line",
    PERSONA_ADDICTIVE => "persona_addictive",
    PERSONA_GROWTH => "persona_growth",
    CONVERSATION_SUMMARIZATION => "conversation_summarization",
    CONVERSATION_EVALUATION => "conversation_evaluation",
    AAS_SURVEY => "aas_survey",
    RELATIONSHIP_FIRST_ENTRY => "relationship_first_entry",
    RELATIONSHIP_NEXT_ENTRY => "relationship_next_entry",
    RELATIONSHIP_LOG_SUMMARIZATION => "relationship_log_summarization",
    ATTACHMENT_SUMMARY_CLASSIFICATION => "attachment_summary_classification",
    ATTACHMENT_ENTRIES_CLASSIFICATION => "attachment_entries_classification",
    CONTEMPT_EVALUATION => "contempt_evaluation",
}

/// Looks up a built-in template; panics on an unknown name (programming error).
pub fn template(name: &str) -> PromptTemplate {
    builtin_template(name).unwrap_or_else(|| panic!("no built-in template {name}"))
}

/// A set of templates, either the built-ins or overrides from a directory.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: BUILTIN_NAMES.iter().map(|&n| (n.to_owned(), template(n))).collect(),
        }
    }
}

impl TemplateSet {
    /// Built-ins overridden by any `<name>.txt` present in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, LmError> {
        let mut set = TemplateSet::default();
        for &name in BUILTIN_NAMES {
            if dir.join(format!("{name}.txt")).exists() {
                set.templates.insert(name.to_owned(), PromptTemplate::load(dir, name)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> &PromptTemplate {
        &self.templates[name]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variables_are_scanned() {
        let t = template("relationship_next_entry");
        let vars: Vec<_> = t.variables().collect();
        assert_eq!(
            vars,
            ["emotion", "p1age", "p1attach", "p1name", "p2age", "p2attach", "p2name", "prev_entries", "target_name"]
        );
        let t = template("aas_survey");
        assert_eq!(t.variables().collect::<Vec<_>>(), ["statement", "style"]);
    }

    #[test]
    fn render_errors() {
        let t = template("care_evaluation");
        assert_eq!(t.fill(&[]), Err(LmError::MissingVariable("summary".into())));
        assert_eq!(
            t.fill(&[("summary", "x"), ("extra", "y")]),
            Err(LmError::UnknownVariable("extra".into()))
        );
    }

    #[test]
    fn no_variables_renders_body() {
        let t = PromptTemplate::new("plain", "Nothing {to see here} at all.");
        assert_eq!(t.variables().count(), 0);
        assert_eq!(t.fill(&[]).unwrap(), "Nothing {to see here} at all.");
    }

    #[test]
    fn substituted_values_are_not_rescanned() {
        let t = PromptTemplate::new("t", "{a}|{b}");
        assert_eq!(t.fill(&[("a", "{b}"), ("b", "2")]).unwrap(), "{b}|2");
    }

    #[test]
    fn directory_overrides_builtins() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("care_evaluation.txt"), "Q: {summary}\n").unwrap();
        let set = TemplateSet::from_dir(dir.path()).unwrap();
        assert_eq!(set.get("care_evaluation").body, "Q: {summary}");
        assert_eq!(set.get("care_summarization").body, builtin::CARE_SUMMARIZATION);
    }
}
