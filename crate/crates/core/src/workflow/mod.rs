//! Dual-pass verification: decisions, the review queue and project stats.
//!
//! Pass 1 checks the captured text against the printed source (lemma,
//! variants, raw text). Pass 2 completes the metadata (category, gender,
//! etymology, glosses). An entry moves Imported → Pass1Verified →
//! Pass2Verified, or to Rejected from either of the first two states.

pub mod api;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::audit::AuditAction;
use crate::model::{
    CaptureMethod, EntryId, Gloss, GrammaticalGender, LexemeEntry, LexicalCategory,
    VerificationState,
};
use crate::normalize::TargetField;
use crate::store::{Project, StoreError};
use crate::validate::{validate_entry, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Pass {
    One,
    Two,
}

impl Pass {
    /// The state an entry must be in to receive a decision for this pass.
    pub fn expected_state(self) -> VerificationState {
        match self {
            Pass::One => VerificationState::Imported,
            Pass::Two => VerificationState::Pass1Verified,
        }
    }

    pub fn verified_state(self) -> VerificationState {
        match self {
            Pass::One => VerificationState::Pass1Verified,
            Pass::Two => VerificationState::Pass2Verified,
        }
    }
}

impl TryFrom<u8> for Pass {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Pass::One),
            2 => Ok(Pass::Two),
            other => Err(format!("pass must be 1 or 2, got {other}")),
        }
    }
}

impl From<Pass> for u8 {
    fn from(p: Pass) -> u8 {
        match p {
            Pass::One => 1,
            Pass::Two => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accept,
    Correct,
    Reject,
}

/// Field changes carried by a decision. Pass 1 may only set the textual
/// fields, pass 2 only the metadata fields.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corrections {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<LexicalCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<GrammaticalGender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etymology_origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etymology_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glosses: Option<Vec<Gloss>>,
}

impl Corrections {
    pub fn is_empty(&self) -> bool {
        self == &Corrections::default()
    }

    fn touches_text(&self) -> bool {
        self.lemma.is_some() || self.raw_text.is_some() || self.variants.is_some()
    }

    fn touches_metadata(&self) -> bool {
        self.category.is_some()
            || self.gender.is_some()
            || self.etymology_origin.is_some()
            || self.etymology_note.is_some()
            || self.glosses.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub entry_id: EntryId,
    pub pass: Pass,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Corrections::is_empty")]
    pub corrections: Corrections,
    pub reviewer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

impl Decision {
    pub fn new(
        entry_id: impl Into<EntryId>,
        pass: Pass,
        action: Action,
        reviewer: impl Into<String>,
    ) -> Self {
        Decision {
            entry_id: entry_id.into(),
            pass,
            action,
            corrections: Corrections::default(),
            reviewer: reviewer.into(),
            timestamp: None,
        }
    }

    pub fn with_corrections(mut self, corrections: Corrections) -> Self {
        self.corrections = corrections;
        self
    }

    /// Structural checks that do not depend on the entry.
    pub fn check(&self) -> Result<(), String> {
        match (self.action, self.corrections.is_empty()) {
            (Action::Correct, true) => return Err("action `correct` requires corrections".into()),
            (Action::Reject, false) => {
                return Err("action `reject` cannot carry corrections".into())
            }
            _ => {}
        }
        match self.pass {
            Pass::One if self.corrections.touches_metadata() => {
                Err("pass 1 decisions may only correct lemma, variants or raw text".into())
            }
            Pass::Two if self.corrections.touches_text() => {
                Err("pass 2 decisions may only set category, gender, etymology or glosses".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecisionError {
    #[error("unknown entry {0}")]
    UnknownEntry(EntryId),
    #[error("entry {id} is in state {state}; a pass {} decision is not permitted", u8::from(*pass))]
    IllegalTransition {
        id: EntryId,
        state: VerificationState,
        pass: Pass,
    },
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
    #[error("corrected entry is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<Violation>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl DecisionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            DecisionError::UnknownEntry(_) => "UnknownEntry",
            DecisionError::IllegalTransition { .. } => "IllegalTransition",
            DecisionError::InvalidDecision(_) => "InvalidDecision",
            DecisionError::ValidationFailed(_) => "ValidationFailed",
            DecisionError::Store(StoreError::UnknownSource(_)) => "UnknownSource",
            DecisionError::Store(_) => "StoreError",
        }
    }
}

/// Rewrite the first occurrence of `old` in `text` with `new`.
fn replace_first(text: &str, old: &str, new: &str) -> Option<String> {
    if old.is_empty() {
        return None;
    }
    text.find(old)
        .map(|at| format!("{}{}{}", &text[..at], new, &text[at + old.len()..]))
}

fn apply_corrections(entry: &mut LexemeEntry, decision: &Decision) {
    let c = &decision.corrections;
    match decision.pass {
        Pass::One => {
            if decision.action == Action::Accept && c.is_empty() {
                entry.flags.clear();
            }
            let mut touched = Vec::new();
            if let Some(lemma) = &c.lemma {
                touched.push(TargetField::Lemma);
                if c.raw_text.is_none() && *lemma != entry.lemma {
                    // Carry the headword fix into the verified transcription.
                    if let Some(p) = entry.provenance.first_mut() {
                        let basis = p.verified_text.as_deref().unwrap_or(&p.raw_text);
                        if let Some(fixed) = replace_first(basis, &entry.lemma, lemma) {
                            p.verified_text = Some(fixed);
                        }
                    }
                }
                entry.lemma = lemma.clone();
            }
            if let Some(raw) = &c.raw_text {
                touched.push(TargetField::RawText);
                if let Some(p) = entry.provenance.first_mut() {
                    p.verified_text = Some(raw.clone());
                }
            }
            if decision.action == Action::Accept && !c.is_empty() {
                // an accept vouches for the whole capture
                touched = vec![TargetField::Lemma, TargetField::RawText];
            }
            if let Some(variants) = &c.variants {
                entry.variants = variants.clone();
            }
            entry.flags.retain(|f| !touched.contains(&f.target_field));
        }
        Pass::Two => {
            if let Some(category) = c.category {
                entry.category = category;
            }
            if let Some(gender) = c.gender {
                entry.gender = gender;
            }
            if let Some(origin) = &c.etymology_origin {
                entry.etymology.origin = origin.clone();
            }
            if let Some(note) = &c.etymology_note {
                entry.etymology.note = note.clone();
            }
            if let Some(glosses) = &c.glosses {
                entry.glosses = glosses.clone();
            }
        }
    }
}

/// Apply a reviewer decision: corrections and the state transition happen
/// together, with exactly one audit event.
pub fn apply_decision(
    project: &mut Project,
    mut decision: Decision,
) -> Result<LexemeEntry, DecisionError> {
    let entry = project
        .entry(&decision.entry_id)
        .ok_or_else(|| DecisionError::UnknownEntry(decision.entry_id.clone()))?;
    if entry.state != decision.pass.expected_state() {
        return Err(DecisionError::IllegalTransition {
            id: entry.id.clone(),
            state: entry.state,
            pass: decision.pass,
        });
    }
    decision.check().map_err(DecisionError::InvalidDecision)?;

    let mut updated = entry.clone();
    apply_corrections(&mut updated, &decision);
    updated.state = match decision.action {
        Action::Reject => VerificationState::Rejected,
        Action::Accept | Action::Correct => decision.pass.verified_state(),
    };
    let violations = validate_entry(&updated, project.config());
    if !violations.is_empty() {
        return Err(DecisionError::ValidationFailed(violations));
    }

    decision.timestamp.get_or_insert_with(Utc::now);
    let reviewer = decision.reviewer.clone();
    let committed = project.commit(updated, &reviewer, AuditAction::Decision { decision })?;
    Ok(committed.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source_id: String,
    pub page: u32,
    pub capture_method: CaptureMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueItem {
    pub id: EntryId,
    pub lemma: String,
    pub flags_count: usize,
    pub state: VerificationState,
    pub source: Option<SourceSummary>,
}

/// Entries awaiting `pass`, most-flagged first, then by id.
pub fn review_queue(project: &Project, pass: Pass, limit: usize) -> Vec<QueueItem> {
    let want = pass.expected_state();
    let mut items: Vec<QueueItem> = project
        .entries()
        .filter(|e| e.state == want)
        .map(|e| QueueItem {
            id: e.id.clone(),
            lemma: e.lemma.clone(),
            flags_count: e.flags.len(),
            state: e.state,
            source: e.primary_provenance().map(|p| SourceSummary {
                source_id: p.source_id.clone(),
                page: p.page,
                capture_method: p.capture_method,
            }),
        })
        .collect();
    items.sort_by(|a, b| {
        b.flags_count
            .cmp(&a.flags_count)
            .then_with(|| a.id.cmp(&b.id))
    });
    items.truncate(limit);
    items
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub per_state: BTreeMap<VerificationState, usize>,
    pub total_flags: usize,
    /// Entries per source of their primary provenance record.
    pub per_source: BTreeMap<String, usize>,
}

pub fn stats(project: &Project) -> Stats {
    let mut per_state: BTreeMap<VerificationState, usize> =
        VerificationState::ALL.iter().map(|s| (*s, 0)).collect();
    let mut per_source = BTreeMap::new();
    let mut total_flags = 0;
    for e in project.entries() {
        *per_state.entry(e.state).or_default() += 1;
        total_flags += e.flags.len();
        if let Some(p) = e.primary_provenance() {
            *per_source.entry(p.source_id.clone()).or_default() += 1;
        }
    }
    Stats {
        per_state,
        total_flags,
        per_source,
    }
}
