//! Wikibase-Lexeme shaped JSON, a QuickStatements-style command file and
//! the canonical TSV re-export.
//!
//! Only fully verified entries (Pass2Verified, or Exported by an earlier
//! run) are exported. Writing is all-or-nothing: mapping gaps abort the
//! batch before any file is touched, and entries move to Exported only
//! after every output file has been synced.

mod mapping;
mod quickstatements;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audit::{content_hash, export_gate_violations, AuditAction};
use crate::model::{
    EntryId, GrammaticalGender, LexemeEntry, LexicalCategory, RelationEdge, RelationKind,
    VerificationState,
};
use crate::store::{write_atomic, Project, StoreError};

pub use crate::ingest::emit_tabular;
pub use mapping::{is_wikibase_id, MappingError, WikibaseMapping};
pub use quickstatements::{quickstatements, QS_HEADER};

pub const LEXEMES_FILE: &str = "lexemes.json";
pub const RELATIONS_FILE: &str = "relations.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("no Pass2Verified entries to export")]
    EmptyExport,
    #[error("entry {id}: category `{category}` has no item in the mapping")]
    UnmappedCategory {
        id: EntryId,
        category: LexicalCategory,
    },
    #[error("entry {id}: gender `{gender}` has no item in the mapping")]
    UnmappedGender {
        id: EntryId,
        gender: GrammaticalGender,
    },
    #[error("relation kind `{0}` has no property in the mapping")]
    UnmappedRelation(RelationKind),
    #[error("entries lack a pass-1 or pass-2 verification event: {}", .0.join(", "))]
    GateViolation(Vec<EntryId>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ExportError {
    pub fn code(&self) -> &'static str {
        match self {
            ExportError::EmptyExport => "EmptyExport",
            ExportError::UnmappedCategory { .. } => "UnmappedCategory",
            ExportError::UnmappedGender { .. } => "UnmappedGender",
            ExportError::UnmappedRelation(_) => "UnmappedRelation",
            ExportError::GateViolation(_) => "GateViolation",
            ExportError::Io { .. } | ExportError::Store(_) => "StoreError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportCounts {
    pub lexemes: usize,
    pub relations: usize,
    /// Entries moved from Pass2Verified to Exported by this run.
    pub newly_exported: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub counts: ExportCounts,
    pub mapping_checksum: String,
    /// SHA-256 of each written data file.
    pub files: BTreeMap<String, String>,
    pub tool_version: String,
}

/// Entries eligible for export, ordered by id.
pub fn exportable(project: &Project) -> Vec<&LexemeEntry> {
    project
        .entries()
        .filter(|e| e.state.is_fully_verified())
        .collect()
}

fn check_mapping(
    entries: &[&LexemeEntry],
    edges: &[&RelationEdge],
    mapping: &WikibaseMapping,
) -> Result<(), ExportError> {
    for e in entries {
        if !mapping.category_map.contains_key(&e.category) {
            return Err(ExportError::UnmappedCategory {
                id: e.id.clone(),
                category: e.category,
            });
        }
        if !e.gender.is_unspecified() && !mapping.gender_map.contains_key(&e.gender) {
            return Err(ExportError::UnmappedGender {
                id: e.id.clone(),
                gender: e.gender,
            });
        }
    }
    for edge in edges {
        if !mapping.relation_property_map.contains_key(&edge.kind) {
            return Err(ExportError::UnmappedRelation(edge.kind));
        }
    }
    Ok(())
}

/// Record for one lexeme. Other lexemes are referenced by entry id.
pub fn lexeme_record(
    entry: &LexemeEntry,
    outgoing: &[&RelationEdge],
    mapping: &WikibaseMapping,
) -> Value {
    let code = &mapping.lemma_language_code;
    let mut claims: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for edge in outgoing {
        let property = mapping.relation_property_map[&edge.kind].clone();
        claims
            .entry(property)
            .or_default()
            .push(json!({ "value": edge.to_id }));
    }
    if let Some(property) = &mapping.etymology_property {
        if !entry.etymology.is_unknown() {
            let mut claim = json!({ "value": entry.etymology.origin });
            if !entry.etymology.note.is_empty() {
                claim["note"] = json!(entry.etymology.note);
            }
            claims.entry(property.clone()).or_default().push(claim);
        }
    }
    let features: Vec<&str> = mapping
        .gender_map
        .get(&entry.gender)
        .into_iter()
        .map(String::as_str)
        .collect();
    let senses: Vec<Value> = entry
        .glosses
        .iter()
        .map(|g| json!({ "glosses": { g.lang.clone(): { "language": g.lang, "value": g.text } } }))
        .collect();
    json!({
        "id": entry.id,
        "lemmas": { code.clone(): { "language": code, "value": entry.lemma } },
        "language": mapping.language_item,
        "lexicalCategory": mapping.category_map[&entry.category],
        "grammaticalFeatures": features,
        "senses": senses,
        "claims": claims,
    })
}

fn canonical(value: &Value) -> Vec<u8> {
    // serde_json maps are ordered by key, so this is stable
    let mut bytes = serde_json::to_vec_pretty(value).expect("json serializes");
    bytes.push(b'\n');
    bytes
}

/// Write `lexemes.json`, `relations.json` and `manifest.json` into `out`,
/// then mark newly exported entries Exported.
pub fn export_lexemes(
    project: &mut Project,
    mapping: &WikibaseMapping,
    out: &Path,
    reviewer: &str,
) -> Result<ExportManifest, ExportError> {
    let entries = exportable(project);
    if entries.is_empty() {
        return Err(ExportError::EmptyExport);
    }
    let gate = export_gate_violations(project.audit(), entries.iter().copied());
    if !gate.is_empty() {
        return Err(ExportError::GateViolation(gate));
    }
    let ids: BTreeSet<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    let mut edges: Vec<&RelationEdge> = project
        .edges()
        .iter()
        .filter(|e| ids.contains(e.from_id.as_str()) && ids.contains(e.to_id.as_str()))
        .collect();
    edges.sort_by(|a, b| (&a.from_id, &a.to_id, a.kind).cmp(&(&b.from_id, &b.to_id, b.kind)));
    check_mapping(&entries, &edges, mapping)?;

    let records: Vec<Value> = entries
        .iter()
        .map(|e| {
            let outgoing: Vec<&RelationEdge> = edges
                .iter()
                .copied()
                .filter(|edge| edge.from_id == e.id)
                .collect();
            lexeme_record(e, &outgoing, mapping)
        })
        .collect();
    let relations: Vec<Value> = edges
        .iter()
        .map(|e| {
            json!({
                "from": e.from_id,
                "to": e.to_id,
                "kind": e.kind,
                "property": mapping.relation_property_map[&e.kind],
                "note": e.note,
            })
        })
        .collect();
    let lexemes_bytes = canonical(&Value::Array(records));
    let relations_bytes = canonical(&Value::Array(relations));

    let pending: Vec<EntryId> = entries
        .iter()
        .filter(|e| e.state == VerificationState::Pass2Verified)
        .map(|e| e.id.clone())
        .collect();
    let manifest = ExportManifest {
        counts: ExportCounts {
            lexemes: entries.len(),
            relations: edges.len(),
            newly_exported: pending.len(),
        },
        mapping_checksum: content_hash(mapping.to_canonical_json().as_bytes()),
        files: BTreeMap::from([
            (LEXEMES_FILE.to_string(), content_hash(&lexemes_bytes)),
            (RELATIONS_FILE.to_string(), content_hash(&relations_bytes)),
        ]),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    // counts differ between a first export and a re-export; the files
    // themselves do not
    let manifest_bytes = canonical(&json!({
        "counts": { "lexemes": manifest.counts.lexemes, "relations": manifest.counts.relations },
        "mapping_checksum": manifest.mapping_checksum,
        "files": manifest.files,
        "tool_version": manifest.tool_version,
    }));

    fs::create_dir_all(out).map_err(|source| ExportError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    write_atomic(&out.join(LEXEMES_FILE), &lexemes_bytes)?;
    write_atomic(&out.join(RELATIONS_FILE), &relations_bytes)?;
    write_atomic(&out.join(MANIFEST_FILE), &manifest_bytes)?;
    if let Ok(dir) = fs::File::open(out) {
        let _ = dir.sync_all();
    }

    let checksum = content_hash(&manifest_bytes);
    for id in pending {
        let mut entry = project.entry(&id).expect("listed above").clone();
        entry.state = VerificationState::Exported;
        project.commit(
            entry,
            reviewer,
            AuditAction::Export {
                manifest_checksum: checksum.clone(),
            },
        )?;
    }
    project.sync()?;
    Ok(manifest)
}

/// Write the QuickStatements-style command file. Returns the number of
/// command lines (header comments excluded). Entry states are unchanged.
pub fn export_quickstatements(
    project: &Project,
    mapping: &WikibaseMapping,
    out: &Path,
) -> Result<usize, ExportError> {
    let entries = exportable(project);
    if entries.is_empty() {
        return Err(ExportError::EmptyExport);
    }
    check_mapping(&entries, &[], mapping)?;
    let (text, lines) = quickstatements(&entries, mapping);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| ExportError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    write_atomic(out, text.as_bytes())?;
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProjectConfig;
    use crate::model::*;
    use crate::relations::add_relation;
    use crate::workflow::{apply_decision, Action, Corrections, Decision, Pass};

    fn mapping() -> WikibaseMapping {
        WikibaseMapping::from_json(
            r#"{"language_item": "Q56426", "category_map": {"noun": "Q1084", "verb": "Q24905"},
                "gender_map": {"masculine": "Q499327"}, "relation_property_map": {"derived_from": "P5191"},
                "etymology_property": "P5914"}"#,
            "m",
        )
        .unwrap()
    }

    fn project(lemmas: &[&str]) -> (Project, Vec<EntryId>) {
        let mut p = Project::in_memory(ProjectConfig::default());
        p.register_source(
            "s",
            SourceInfo {
                title: "S".into(),
                year: None,
                capture_method_default: CaptureMethod::Manual,
            },
        )
        .unwrap();
        let entries = lemmas
            .iter()
            .map(|l| {
                LexemeEntry::imported(
                    "",
                    *l,
                    ProvenanceRecord {
                        source_id: "s".into(),
                        page: 1,
                        line: None,
                        raw_text: l.to_string(),
                        capture_method: CaptureMethod::Manual,
                        verified_text: None,
                    },
                )
            })
            .collect();
        let ids = p
            .import(
                entries,
                "t",
                AuditAction::Import {
                    content_hash: "x".into(),
                    capture_method: CaptureMethod::Manual,
                },
            )
            .unwrap()
            .ids;
        (p, ids)
    }

    fn verify(p: &mut Project, id: &str, category: LexicalCategory, gender: GrammaticalGender) {
        apply_decision(p, Decision::new(id, Pass::One, Action::Accept, "t")).unwrap();
        let c = Corrections {
            category: Some(category),
            gender: Some(gender),
            ..Default::default()
        };
        apply_decision(
            p,
            Decision::new(id, Pass::Two, Action::Correct, "t").with_corrections(c),
        )
        .unwrap();
    }

    #[test]
    fn only_imported_is_empty_export() {
        let (mut p, _) = project(&["كتاب"]);
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_lexemes(&mut p, &mapping(), dir.path(), "t"),
            Err(ExportError::EmptyExport)
        ));
        assert!(!dir.path().join(LEXEMES_FILE).exists());
    }

    #[test]
    fn record_shape() {
        let (mut p, ids) = project(&["كتاب", "قلم"]);
        verify(
            &mut p,
            &ids[0],
            LexicalCategory::Noun,
            GrammaticalGender::Masculine,
        );
        let dir = tempfile::tempdir().unwrap();
        let m = export_lexemes(&mut p, &mapping(), dir.path(), "t").unwrap();
        assert_eq!(m.counts.lexemes, 1);
        assert_eq!(p.entry(&ids[0]).unwrap().state, VerificationState::Exported);
        assert_eq!(p.entry(&ids[1]).unwrap().state, VerificationState::Imported);
        let records: Value =
            serde_json::from_slice(&fs::read(dir.path().join(LEXEMES_FILE)).unwrap()).unwrap();
        let r = &records[0];
        assert_eq!(r["lemmas"]["ary"]["value"], "كتاب");
        assert_eq!(r["lexicalCategory"], "Q1084");
        assert_eq!(r["grammaticalFeatures"], json!(["Q499327"]));
        assert_eq!(r["language"], "Q56426");
        p.verify_audit().unwrap();
    }

    #[test]
    fn derivation_edge_between_exported_entries() {
        let (mut p, ids) = project(&["كتب", "كتاب", "قلم"]);
        add_relation(
            &mut p,
            RelationEdge::new(ids[1].clone(), ids[0].clone(), RelationKind::DerivedFrom),
        )
        .unwrap();
        add_relation(
            &mut p,
            RelationEdge::new(ids[2].clone(), ids[0].clone(), RelationKind::DerivedFrom),
        )
        .unwrap();
        verify(
            &mut p,
            &ids[0],
            LexicalCategory::Verb,
            GrammaticalGender::Unspecified,
        );
        verify(
            &mut p,
            &ids[1],
            LexicalCategory::Noun,
            GrammaticalGender::Masculine,
        );
        let dir = tempfile::tempdir().unwrap();
        let m = export_lexemes(&mut p, &mapping(), dir.path(), "t").unwrap();
        assert_eq!(m.counts.relations, 1);
        let rel: Value =
            serde_json::from_slice(&fs::read(dir.path().join(RELATIONS_FILE)).unwrap()).unwrap();
        assert_eq!(rel.as_array().unwrap().len(), 1);
        assert_eq!(rel[0]["from"], json!(ids[1]));
        assert_eq!(rel[0]["property"], "P5191");
        let lex: Value =
            serde_json::from_slice(&fs::read(dir.path().join(LEXEMES_FILE)).unwrap()).unwrap();
        assert_eq!(lex[1]["claims"]["P5191"][0]["value"], json!(ids[0]));
    }

    #[test]
    fn unmapped_gender_aborts_before_writing() {
        let (mut p, ids) = project(&["مدينة"]);
        verify(
            &mut p,
            &ids[0],
            LexicalCategory::Noun,
            GrammaticalGender::Feminine,
        );
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_lexemes(&mut p, &mapping(), dir.path(), "t"),
            Err(ExportError::UnmappedGender { .. })
        ));
        assert!(!dir.path().join(LEXEMES_FILE).exists());
        assert_eq!(
            p.entry(&ids[0]).unwrap().state,
            VerificationState::Pass2Verified
        );
    }

    #[test]
    fn reexport_is_byte_identical() {
        let (mut p, ids) = project(&["كتاب", "قلم"]);
        verify(
            &mut p,
            &ids[0],
            LexicalCategory::Noun,
            GrammaticalGender::Masculine,
        );
        verify(
            &mut p,
            &ids[1],
            LexicalCategory::Noun,
            GrammaticalGender::Masculine,
        );
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        export_lexemes(&mut p, &mapping(), a.path(), "t").unwrap();
        let second = export_lexemes(&mut p, &mapping(), b.path(), "t").unwrap();
        assert_eq!(second.counts.newly_exported, 0);
        for f in [LEXEMES_FILE, RELATIONS_FILE, MANIFEST_FILE] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }
}
