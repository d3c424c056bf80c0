//! Entry-level invariant checking.

use serde::Serialize;

use crate::config::{ProjectConfig, RequiredField};
use crate::model::{is_valid_origin, LexemeEntry, VerificationState};
use crate::normalize::TargetField;

/// Separator between multiple glosses in one tabular cell.
pub const GLOSS_SEPARATOR: char = '|';

/// One broken invariant. The derived ordering is the canonical report order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Violation {
    EmptyLemma,
    NonArabicLemma,
    /// A tab, newline or (in glosses) separator character that the tabular
    /// format cannot carry.
    UnsafeText {
        field: &'static str,
    },
    EmptyVariant,
    MissingProvenance,
    EmptySourceId {
        index: usize,
    },
    InvalidPage {
        index: usize,
    },
    InvalidLine {
        index: usize,
    },
    InvalidEtymologyOrigin {
        origin: String,
    },
    EmptyGloss {
        index: usize,
    },
    MissingRequiredField {
        field: RequiredField,
        state: VerificationState,
    },
    FlagOutOfBounds {
        index: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyLemma => write!(f, "lemma is empty"),
            Violation::NonArabicLemma => write!(f, "lemma contains no Arabic-script codepoint"),
            Violation::UnsafeText { field } => {
                write!(f, "{field} contains a tab, newline or separator")
            }
            Violation::EmptyVariant => write!(f, "empty variant spelling"),
            Violation::MissingProvenance => write!(f, "no provenance record"),
            Violation::EmptySourceId { index } => {
                write!(f, "provenance #{index} has an empty source id")
            }
            Violation::InvalidPage { index } => write!(f, "provenance #{index} has page 0"),
            Violation::InvalidLine { index } => write!(f, "provenance #{index} has line 0"),
            Violation::InvalidEtymologyOrigin { origin } => {
                write!(f, "etymology origin `{origin}` is not a language tag")
            }
            Violation::EmptyGloss { index } => {
                write!(f, "gloss #{index} has empty language or text")
            }
            Violation::MissingRequiredField { field, state } => {
                write!(f, "{field:?} is required in state {state}")
            }
            Violation::FlagOutOfBounds { index } => {
                write!(f, "suspect span #{index} lies outside its target text")
            }
        }
    }
}

/// Arabic (U+0600–U+06FF) and Arabic Supplement (U+0750–U+077F).
pub const ARABIC_BLOCKS: [[u32; 2]; 2] = [[0x0600, 0x06FF], [0x0750, 0x077F]];

pub fn has_script_codepoint(text: &str, extra: &[[u32; 2]]) -> bool {
    text.chars().any(|c| {
        let cp = c as u32;
        ARABIC_BLOCKS
            .iter()
            .chain(extra)
            .any(|&[lo, hi]| (lo..=hi).contains(&cp))
    })
}

fn has_line_breaks(text: &str) -> bool {
    text.contains(['\t', '\n', '\r'])
}

/// Every invariant violation of `entry`, sorted and deduplicated.
pub fn validate_entry(entry: &LexemeEntry, config: &ProjectConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    if entry.lemma.trim().is_empty() {
        out.push(Violation::EmptyLemma);
    } else if !has_script_codepoint(&entry.lemma, &config.extra_script_ranges) {
        out.push(Violation::NonArabicLemma);
    }
    if has_line_breaks(&entry.lemma) {
        out.push(Violation::UnsafeText { field: "lemma" });
    }
    for v in &entry.variants {
        if v.trim().is_empty() {
            out.push(Violation::EmptyVariant);
        }
        if has_line_breaks(v) {
            out.push(Violation::UnsafeText { field: "variants" });
        }
    }

    if entry.provenance.is_empty() {
        out.push(Violation::MissingProvenance);
    }
    for (index, p) in entry.provenance.iter().enumerate() {
        if p.source_id.trim().is_empty() {
            out.push(Violation::EmptySourceId { index });
        }
        if p.page == 0 {
            out.push(Violation::InvalidPage { index });
        }
        if p.line == Some(0) {
            out.push(Violation::InvalidLine { index });
        }
    }

    if !is_valid_origin(&entry.etymology.origin) {
        out.push(Violation::InvalidEtymologyOrigin {
            origin: entry.etymology.origin.clone(),
        });
    }
    if has_line_breaks(&entry.etymology.note) {
        out.push(Violation::UnsafeText {
            field: "etymology.note",
        });
    }

    for (index, g) in entry.glosses.iter().enumerate() {
        if g.lang.trim().is_empty() || g.text.trim().is_empty() {
            out.push(Violation::EmptyGloss { index });
        }
        if has_line_breaks(&g.lang)
            || has_line_breaks(&g.text)
            || g.lang.contains(GLOSS_SEPARATOR)
            || g.text.contains(GLOSS_SEPARATOR)
        {
            out.push(Violation::UnsafeText { field: "glosses" });
        }
    }

    for rule in &config.required_fields {
        if !rule.applies(entry.state, entry.category) {
            continue;
        }
        let missing = match rule.field {
            RequiredField::Category => entry.category.is_unknown(),
            RequiredField::Gender => entry.gender.is_unspecified(),
            RequiredField::Etymology => entry.etymology.is_unknown(),
            RequiredField::Gloss => entry.glosses.is_empty(),
        };
        if missing {
            out.push(Violation::MissingRequiredField {
                field: rule.field,
                state: entry.state,
            });
        }
    }

    let lemma_len = entry.lemma.chars().count();
    let raw_len = entry
        .primary_provenance()
        .map(|p| p.raw_text.chars().count());
    for (index, span) in entry.flags.iter().enumerate() {
        let bound = match span.target_field {
            TargetField::Lemma => Some(lemma_len),
            TargetField::RawText => raw_len,
        };
        if span.length == 0 || bound.is_none_or(|b| span.end() > b) {
            out.push(Violation::FlagOutOfBounds { index });
        }
    }

    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use crate::normalize::SuspectSpan;

    fn entry(lemma: &str) -> LexemeEntry {
        let mut e = LexemeEntry::imported(
            "01J00000000000000000000000",
            lemma,
            ProvenanceRecord {
                source_id: "amili2011".into(),
                page: 44,
                line: Some(3),
                raw_text: lemma.into(),
                capture_method: CaptureMethod::Manual,
                verified_text: None,
            },
        );
        e.category = LexicalCategory::Noun;
        e
    }

    #[test]
    fn valid_entry_has_no_violations() {
        assert!(validate_entry(&entry("كتاب"), &ProjectConfig::default()).is_empty());
    }

    #[test]
    fn empty_lemma() {
        assert_eq!(
            validate_entry(&entry(""), &ProjectConfig::default()),
            vec![Violation::EmptyLemma]
        );
        assert_eq!(
            validate_entry(&entry("   "), &ProjectConfig::default()),
            vec![Violation::EmptyLemma]
        );
    }

    #[test]
    fn latin_lemma() {
        assert_eq!(
            validate_entry(&entry("book"), &ProjectConfig::default()),
            vec![Violation::NonArabicLemma]
        );
        let cfg = ProjectConfig {
            extra_script_ranges: vec![[0x41, 0x7A]],
            ..Default::default()
        };
        assert!(validate_entry(&entry("book"), &cfg).is_empty());
    }

    #[test]
    fn supplement_block_counts_as_arabic() {
        assert!(validate_entry(&entry("\u{0750}"), &ProjectConfig::default()).is_empty());
    }

    #[test]
    fn verified_noun_needs_gender() {
        let mut e = entry("كتاب");
        e.state = VerificationState::Pass2Verified;
        assert_eq!(
            validate_entry(&e, &ProjectConfig::default()),
            vec![Violation::MissingRequiredField {
                field: RequiredField::Gender,
                state: VerificationState::Pass2Verified
            }]
        );
        e.category = LexicalCategory::Verb;
        assert!(validate_entry(&e, &ProjectConfig::default()).is_empty());
        e.category = LexicalCategory::Unknown;
        assert_eq!(
            validate_entry(&e, &ProjectConfig::default()),
            vec![Violation::MissingRequiredField {
                field: RequiredField::Category,
                state: VerificationState::Pass2Verified
            }]
        );
    }

    #[test]
    fn canonical_order_is_deterministic() {
        let mut e = entry("book\t");
        e.provenance.clear();
        e.etymology.origin = "123".into();
        e.flags.push(SuspectSpan {
            target_field: TargetField::Lemma,
            offset: 4,
            length: 3,
            rule_id: "r".into(),
            suggested_form: "x".into(),
        });
        let v = validate_entry(&e, &ProjectConfig::default());
        assert_eq!(
            v,
            vec![
                Violation::NonArabicLemma,
                Violation::UnsafeText { field: "lemma" },
                Violation::MissingProvenance,
                Violation::InvalidEtymologyOrigin {
                    origin: "123".into()
                },
                Violation::FlagOutOfBounds { index: 0 },
            ]
        );
        assert_eq!(v, validate_entry(&e, &ProjectConfig::default()));
    }
}
