use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{GrammaticalGender, LexicalCategory, RelationKind};

fn default_lemma_code() -> String {
    "ary".to_string()
}

/// Wikibase identifiers for an export. There are no built-in defaults: every
/// id comes from the operator's mapping file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WikibaseMapping {
    /// Item of the lexeme language.
    pub language_item: String,
    /// Spelling-variant code used as the lemma key.
    #[serde(default = "default_lemma_code")]
    pub lemma_language_code: String,
    pub category_map: BTreeMap<LexicalCategory, String>,
    #[serde(default)]
    pub gender_map: BTreeMap<GrammaticalGender, String>,
    #[serde(default)]
    pub relation_property_map: BTreeMap<RelationKind, String>,
    /// Property carrying the etymology origin; etymology is omitted when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etymology_property: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum MappingError {
    #[error("reading mapping {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing mapping {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{field}: `{id}` is not a valid {expected} identifier")]
    InvalidId {
        field: String,
        id: String,
        expected: &'static str,
    },
    #[error("lemma language code must not be empty")]
    EmptyLemmaCode,
}

/// `prefix` followed by one or more ASCII digits.
pub fn is_wikibase_id(id: &str, prefixes: &str) -> bool {
    let mut chars = id.chars();
    chars.next().is_some_and(|c| prefixes.contains(c)) && {
        let digits = chars.as_str();
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    }
}

impl WikibaseMapping {
    pub fn from_json(text: &str, path: &str) -> Result<Self, MappingError> {
        let mapping: WikibaseMapping =
            serde_json::from_str(text).map_err(|source| MappingError::Json {
                path: path.into(),
                source,
            })?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn load(path: &Path) -> Result<Self, MappingError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| MappingError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::from_json(&text, &shown)
    }

    /// Items are `Q`/`L` ids, properties are `P` ids.
    pub fn validate(&self) -> Result<(), MappingError> {
        let item = |field: String, id: &str| {
            if is_wikibase_id(id, "QL") {
                Ok(())
            } else {
                Err(MappingError::InvalidId {
                    field,
                    id: id.to_string(),
                    expected: "item",
                })
            }
        };
        let property = |field: String, id: &str| {
            if is_wikibase_id(id, "P") {
                Ok(())
            } else {
                Err(MappingError::InvalidId {
                    field,
                    id: id.to_string(),
                    expected: "property",
                })
            }
        };
        if self.lemma_language_code.trim().is_empty() {
            return Err(MappingError::EmptyLemmaCode);
        }
        item("language_item".into(), &self.language_item)?;
        for (k, v) in &self.category_map {
            item(format!("category_map.{k}"), v)?;
        }
        for (k, v) in &self.gender_map {
            item(format!("gender_map.{k}"), v)?;
        }
        for (k, v) in &self.relation_property_map {
            property(format!("relation_property_map.{k}"), v)?;
        }
        if let Some(p) = &self.etymology_property {
            property("etymology_property".into(), p)?;
        }
        Ok(())
    }

    /// Canonical serialization, used for the manifest checksum.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("mapping serializes");
        serde_json::to_string(&value).expect("value serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAPPING: &str = r#"{
        "language_item": "Q56426",
        "category_map": {"noun": "Q1084", "verb": "Q24905"},
        "gender_map": {"masculine": "Q499327"},
        "relation_property_map": {"derived_from": "P5191"}
    }"#;

    #[test]
    fn parses_with_default_code() {
        let m = WikibaseMapping::from_json(MAPPING, "m.json").unwrap();
        assert_eq!(m.lemma_language_code, "ary");
        assert_eq!(m.category_map[&LexicalCategory::Noun], "Q1084");
    }

    #[test]
    fn id_grammar() {
        assert!(is_wikibase_id("Q1", "Q"));
        assert!(is_wikibase_id("L42", "QL"));
        assert!(!is_wikibase_id("Q", "Q"));
        assert!(!is_wikibase_id("Q12a", "Q"));
        assert!(!is_wikibase_id("P31", "Q"));
        assert!(!is_wikibase_id("", "QPL"));
    }

    #[test]
    fn rejects_property_in_item_slot() {
        let text = MAPPING.replace("Q1084", "P1084");
        assert!(matches!(
            WikibaseMapping::from_json(&text, "m"),
            Err(MappingError::InvalidId {
                expected: "item",
                ..
            })
        ));
    }

    #[test]
    fn rejects_unknown_labels_and_fields() {
        assert!(
            WikibaseMapping::from_json(&MAPPING.replace("\"verb\"", "\"verbal\""), "m").is_err()
        );
        assert!(
            WikibaseMapping::from_json(&MAPPING.replace("gender_map", "genders"), "m").is_err()
        );
    }

    #[test]
    fn canonical_json_is_stable() {
        let a = WikibaseMapping::from_json(MAPPING, "m").unwrap();
        let b =
            WikibaseMapping::from_json(&serde_json::to_string_pretty(&a).unwrap(), "m").unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());
    }
}
