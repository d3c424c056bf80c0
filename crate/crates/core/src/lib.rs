//! Lexical dataset pipeline: turns OCR output and manual transcriptions of
//! print dictionaries into a verified, deduplicated and relation-linked
//! lexicon, and exports it in Wikibase-Lexeme shaped formats.
//!
//! The usual flow is [`ingest`] → [`normalize`] → [`dedup`] and
//! [`relations`] → [`workflow`] (two human review passes) → [`export`], with
//! [`metrics`] measuring OCR error rates against the verified text. All
//! state lives in a [`store::Project`].

pub mod audit;
pub mod config;
pub mod dedup;
pub mod export;
pub mod ids;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod normalize;
pub mod relations;
pub mod store;
pub mod validate;
pub mod workflow;

pub use audit::{AuditAction, AuditEvent, ChainError};
pub use config::ProjectConfig;
pub use model::{
    CaptureMethod, EntryId, EtymologyRecord, Gloss, GrammaticalGender, LexemeEntry,
    LexicalCategory, ProvenanceRecord, RelationEdge, RelationKind, SourceInfo, VerificationState,
};
pub use normalize::{
    ConfusionRule, ConfusionTable, NormalizationProfile, SuspectSpan, TargetField,
};
pub use store::{Project, StoreError};
pub use validate::{validate_entry, Violation};
pub use workflow::{apply_decision, Action, Corrections, Decision, DecisionError, Pass};
