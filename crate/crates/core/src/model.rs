//! Canonical data model: lexeme entries, provenance, verification state and
//! relation edges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::normalize::SuspectSpan;

/// Identifier of a [`LexemeEntry`]: a 26-character, lexicographically
/// sortable string.
pub type EntryId = String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized {kind} label `{label}`")]
pub struct ParseLabelError {
    pub kind: &'static str,
    pub label: String,
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ParseLabelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    _ => Err(ParseLabelError { kind: $kind, label: s.to_string() }),
                }
            }
        }
    };
}

label_enum!(
    /// Part of speech of a headword.
    LexicalCategory, "category", {
        Noun => "noun",
        Verb => "verb",
        Adjective => "adjective",
        Adverb => "adverb",
        Pronoun => "pronoun",
        Preposition => "preposition",
        Conjunction => "conjunction",
        Interjection => "interjection",
        Particle => "particle",
        Numeral => "numeral",
        ProperNoun => "proper-noun",
        Unknown => "unknown",
    }
);

label_enum!(GrammaticalGender, "gender", {
    Masculine => "masculine",
    Feminine => "feminine",
    Unspecified => "unspecified",
});

label_enum!(
    /// How the source text was captured.
    CaptureMethod, "capture method", {
        Ocr => "ocr",
        Manual => "manual",
    }
);

label_enum!(
    /// Position of an entry in the dual-pass verification protocol.
    VerificationState, "state", {
        Imported => "Imported",
        Pass1Verified => "Pass1Verified",
        Pass2Verified => "Pass2Verified",
        Exported => "Exported",
        Rejected => "Rejected",
    }
);

label_enum!(RelationKind, "relation kind", {
    DerivedFrom => "derived_from",
    VariantOf => "variant_of",
    SemanticRelated => "semantic_related",
});

impl LexicalCategory {
    pub fn is_unknown(self) -> bool {
        self == LexicalCategory::Unknown
    }
}

impl GrammaticalGender {
    pub fn is_unspecified(self) -> bool {
        self == GrammaticalGender::Unspecified
    }
}

impl VerificationState {
    /// The whitelisted transitions. Nothing else is ever permitted.
    pub fn can_transition_to(self, next: VerificationState) -> bool {
        use VerificationState::*;
        matches!(
            (self, next),
            (Imported, Pass1Verified)
                | (Imported, Rejected)
                | (Pass1Verified, Pass2Verified)
                | (Pass1Verified, Rejected)
                | (Pass2Verified, Exported)
        )
    }

    /// True once both verification passes have been completed.
    pub fn is_fully_verified(self) -> bool {
        matches!(
            self,
            VerificationState::Pass2Verified | VerificationState::Exported
        )
    }
}

/// Origin language of a word plus a free-text note.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EtymologyRecord {
    pub origin: String,
    #[serde(default)]
    pub note: String,
}

impl EtymologyRecord {
    pub const UNKNOWN: &'static str = "unknown";

    pub fn unknown() -> Self {
        EtymologyRecord {
            origin: Self::UNKNOWN.to_string(),
            note: String::new(),
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.origin == Self::UNKNOWN
    }
}

impl Default for EtymologyRecord {
    fn default() -> Self {
        Self::unknown()
    }
}

/// `unknown`, or a language tag whose primary subtag has 2–3 ASCII letters
/// (further `-`-separated alphanumeric subtags of 1–8 characters allowed).
pub fn is_valid_origin(origin: &str) -> bool {
    if origin == EtymologyRecord::UNKNOWN {
        return true;
    }
    let mut parts = origin.split('-');
    let primary = parts.next().unwrap_or("");
    if !(2..=3).contains(&primary.len()) || !primary.bytes().all(|b| b.is_ascii_alphabetic()) {
        return false;
    }
    parts.all(|p| (1..=8).contains(&p.len()) && p.bytes().all(|b| b.is_ascii_alphanumeric()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gloss {
    pub lang: String,
    pub text: String,
}

impl Gloss {
    pub fn new(lang: impl Into<String>, text: impl Into<String>) -> Self {
        Gloss {
            lang: lang.into(),
            text: text.into(),
        }
    }
}

/// Where an entry came from, with the text exactly as captured.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub source_id: String,
    pub page: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    pub raw_text: String,
    pub capture_method: CaptureMethod,
    /// Human-verified transcription of `raw_text`, set during pass 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified_text: Option<String>,
}

/// One dictionary headword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexemeEntry {
    pub id: EntryId,
    pub lemma: String,
    #[serde(default)]
    pub variants: Vec<String>,
    pub category: LexicalCategory,
    pub gender: GrammaticalGender,
    #[serde(default)]
    pub etymology: EtymologyRecord,
    #[serde(default)]
    pub glosses: Vec<Gloss>,
    pub provenance: Vec<ProvenanceRecord>,
    pub state: VerificationState,
    #[serde(default)]
    pub flags: Vec<SuspectSpan>,
}

impl LexemeEntry {
    /// A fresh Imported entry with unknown metadata.
    pub fn imported(
        id: impl Into<EntryId>,
        lemma: impl Into<String>,
        provenance: ProvenanceRecord,
    ) -> Self {
        LexemeEntry {
            id: id.into(),
            lemma: lemma.into(),
            variants: Vec::new(),
            category: LexicalCategory::Unknown,
            gender: GrammaticalGender::Unspecified,
            etymology: EtymologyRecord::unknown(),
            glosses: Vec::new(),
            provenance: vec![provenance],
            state: VerificationState::Imported,
            flags: Vec::new(),
        }
    }

    /// The first provenance record, i.e. the original capture.
    pub fn primary_provenance(&self) -> Option<&ProvenanceRecord> {
        self.provenance.first()
    }
}

/// A typed link between two entries. `derived_from` points child → parent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub from_id: EntryId,
    pub to_id: EntryId,
    pub kind: RelationKind,
    #[serde(default)]
    pub note: String,
}

impl RelationEdge {
    pub fn new(from_id: impl Into<EntryId>, to_id: impl Into<EntryId>, kind: RelationKind) -> Self {
        RelationEdge {
            from_id: from_id.into(),
            to_id: to_id.into(),
            kind,
            note: String::new(),
        }
    }

    /// `variant_of` is symmetric and stored with `from_id < to_id`.
    pub fn canonical(mut self) -> Self {
        if self.kind == RelationKind::VariantOf && self.from_id > self.to_id {
            std::mem::swap(&mut self.from_id, &mut self.to_id);
        }
        self
    }

    pub fn same_link(&self, other: &RelationEdge) -> bool {
        self.kind == other.kind && self.from_id == other.from_id && self.to_id == other.to_id
    }
}

/// Bibliographic source registry record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub capture_method_default: CaptureMethod,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for c in LexicalCategory::ALL {
            assert_eq!(c.as_str().parse::<LexicalCategory>().unwrap(), *c);
        }
        for g in GrammaticalGender::ALL {
            assert_eq!(g.as_str().parse::<GrammaticalGender>().unwrap(), *g);
        }
        assert!("Noun".parse::<LexicalCategory>().is_err());
        assert_eq!(
            serde_json::to_string(&LexicalCategory::ProperNoun).unwrap(),
            "\"proper-noun\""
        );
    }

    #[test]
    fn transition_whitelist() {
        use VerificationState::*;
        let allowed: Vec<_> = VerificationState::ALL
            .iter()
            .flat_map(|a| VerificationState::ALL.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_transition_to(*b))
            .collect();
        assert_eq!(
            allowed,
            vec![
                (Imported, Pass1Verified),
                (Imported, Rejected),
                (Pass1Verified, Pass2Verified),
                (Pass1Verified, Rejected),
                (Pass2Verified, Exported),
            ]
        );
    }

    #[test]
    fn origin_tags() {
        assert!(is_valid_origin("unknown"));
        assert!(is_valid_origin("ar"));
        assert!(is_valid_origin("ber"));
        assert!(is_valid_origin("fr-MA"));
        assert!(!is_valid_origin(""));
        assert!(!is_valid_origin("f"));
        assert!(!is_valid_origin("arab"));
        assert!(!is_valid_origin("a1"));
        assert!(!is_valid_origin("fr-"));
    }

    #[test]
    fn variant_edges_are_canonicalized() {
        let e = RelationEdge::new("B", "A", RelationKind::VariantOf).canonical();
        assert_eq!((e.from_id.as_str(), e.to_id.as_str()), ("A", "B"));
        let d = RelationEdge::new("B", "A", RelationKind::DerivedFrom).canonical();
        assert_eq!(d.from_id, "B");
    }
}
