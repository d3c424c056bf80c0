use std::collections::HashSet;
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

/// A known grapheme confusion: OCR engines trained on MSA tend to turn
/// `darija_form` into `msa_form`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionRule {
    pub rule_id: String,
    pub darija_form: String,
    pub msa_form: String,
    #[serde(default)]
    pub note: String,
}

impl ConfusionRule {
    pub fn new(rule_id: &str, darija_form: &str, msa_form: &str) -> Self {
        ConfusionRule {
            rule_id: rule_id.to_string(),
            darija_form: darija_form.to_string(),
            msa_form: msa_form.to_string(),
            note: String::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfusionTableError {
    #[error("rule `{0}` has an empty form")]
    EmptyForm(String),
    #[error("rule `{0}` maps a form onto itself")]
    IdenticalForms(String),
    #[error("rule `{0}`: darija form contains the msa form, corrections would be re-flagged")]
    SelfMatching(String),
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),
    #[error("reading confusion table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing confusion table {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

/// A validated confusion table with a prebuilt matcher.
#[derive(Debug, Clone)]
pub struct ConfusionTable {
    rules: Vec<ConfusionRule>,
    matcher: AhoCorasick,
}

impl ConfusionTable {
    pub fn new(rules: Vec<ConfusionRule>) -> Result<Self, ConfusionTableError> {
        let mut seen = HashSet::new();
        for rule in &rules {
            if rule.darija_form.is_empty() || rule.msa_form.is_empty() {
                return Err(ConfusionTableError::EmptyForm(rule.rule_id.clone()));
            }
            if rule.darija_form == rule.msa_form {
                return Err(ConfusionTableError::IdenticalForms(rule.rule_id.clone()));
            }
            if rule.darija_form.contains(&rule.msa_form) {
                return Err(ConfusionTableError::SelfMatching(rule.rule_id.clone()));
            }
            if !seen.insert(rule.rule_id.as_str()) {
                return Err(ConfusionTableError::DuplicateRuleId(rule.rule_id.clone()));
            }
        }
        let matcher = AhoCorasickBuilder::new()
            .match_kind(MatchKind::LeftmostLongest)
            .build(rules.iter().map(|r| r.msa_form.as_str()))
            .expect("confusion patterns are small");
        Ok(ConfusionTable { rules, matcher })
    }

    /// The one confusion pair attested for Moroccan Darija OCR output:
    /// alef with fatha read as alef with hamza above.
    pub fn attested() -> Self {
        let mut rule = ConfusionRule::new("alef-fatha-hamza", "\u{0627}\u{064E}", "\u{0623}");
        rule.note = "alef + fatha recognized as alef with hamza above".to_string();
        ConfusionTable::new(vec![rule]).expect("built-in rule is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfusionTableError> {
        let rules: Vec<ConfusionRule> =
            serde_json::from_str(text).map_err(|source| ConfusionTableError::Json {
                path: "<inline>".into(),
                source,
            })?;
        Self::new(rules)
    }

    pub fn load(path: &Path) -> Result<Self, ConfusionTableError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfusionTableError::Io {
            path: shown.clone(),
            source,
        })?;
        let rules: Vec<ConfusionRule> =
            serde_json::from_str(&text).map_err(|source| ConfusionTableError::Json {
                path: shown,
                source,
            })?;
        Self::new(rules)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rules).expect("rules serialize")
    }

    pub fn rules(&self) -> &[ConfusionRule] {
        &self.rules
    }

    pub fn rule(&self, rule_id: &str) -> Option<&ConfusionRule> {
        self.rules.iter().find(|r| r.rule_id == rule_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetField {
    Lemma,
    RawText,
}

/// A region of text matching a rule's MSA form. Offsets count codepoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuspectSpan {
    pub target_field: TargetField,
    pub offset: usize,
    pub length: usize,
    pub rule_id: String,
    pub suggested_form: String,
}

impl SuspectSpan {
    pub fn end(&self) -> usize {
        self.offset + self.length
    }
}

/// Flag every non-overlapping occurrence of a rule's `msa_form`, scanning
/// leftmost-longest. When two rules share an msa form the earlier rule wins.
pub fn detect_suspects(
    text: &str,
    table: &ConfusionTable,
    target_field: TargetField,
) -> Vec<SuspectSpan> {
    if table.rules.is_empty() {
        return Vec::new();
    }
    // byte offset -> codepoint offset
    let mut cp_index = vec![0usize; text.len() + 1];
    let mut count = 0;
    for (byte, ch) in text.char_indices() {
        cp_index[byte] = count;
        count += 1;
        cp_index[byte + 1..byte + ch.len_utf8()].fill(count);
    }
    cp_index[text.len()] = count;

    table
        .matcher
        .find_iter(text)
        .map(|m| {
            let rule = &table.rules[m.pattern().as_usize()];
            let offset = cp_index[m.start()];
            SuspectSpan {
                target_field,
                offset,
                length: cp_index[m.end()] - offset,
                rule_id: rule.rule_id.clone(),
                suggested_form: rule.darija_form.clone(),
            }
        })
        .collect()
}

/// Replace each span's text with its suggested form. Spans must be sorted
/// and non-overlapping, as [`detect_suspects`] returns them.
pub fn apply_suggestions(text: &str, spans: &[SuspectSpan]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for span in spans {
        out.extend(&chars[pos..span.offset]);
        out.push_str(&span.suggested_form);
        pos = span.end();
    }
    out.extend(&chars[pos..]);
    out
}
