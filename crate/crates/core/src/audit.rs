//! Append-only audit log with a per-entry content hash chain.
//!
//! Every entry mutation appends exactly one [`AuditEvent`]. The event
//! records the SHA-256 of the entry before and after the change; for any
//! entry, the after-hash of one event equals the before-hash of the next
//! event touching that entry, and the last after-hash equals the hash of the
//! entry as currently stored.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{CaptureMethod, EntryId, LexemeEntry, VerificationState};
use crate::workflow::{Action, Decision, Pass};

/// Before-hash of the event that creates an entry.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub fn entry_hash(entry: &LexemeEntry) -> String {
    let bytes = serde_json::to_vec(entry).expect("entries serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRole {
    Survivor,
    Absorbed,
}

/// What happened to the entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AuditAction {
    Import {
        content_hash: String,
        capture_method: CaptureMethod,
    },
    Normalize {
        profile: String,
    },
    Flag {
        spans: usize,
    },
    Decision {
        decision: Decision,
    },
    Merge {
        role: MergeRole,
        surviving_id: EntryId,
        absorbed_ids: Vec<EntryId>,
    },
    Export {
        manifest_checksum: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub reviewer: String,
    pub entry_id: EntryId,
    pub action: AuditAction,
    /// `None` for the event that creates the entry.
    pub from_state: Option<VerificationState>,
    pub to_state: VerificationState,
    pub hash_before: String,
    pub hash_after: String,
}

impl AuditEvent {
    pub fn changes_state(&self) -> bool {
        self.from_state.is_some_and(|s| s != self.to_state)
    }

    /// True for a pass-`pass` accept or correct decision.
    pub fn is_verifying(&self, pass: Pass) -> bool {
        matches!(&self.action, AuditAction::Decision { decision }
            if decision.pass == pass && matches!(decision.action, Action::Accept | Action::Correct))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("event sequence not strictly increasing at seq {0}")]
    SequenceOrder(u64),
    #[error("entry {entry_id}: event seq {seq} breaks the hash chain")]
    BrokenLink { entry_id: EntryId, seq: u64 },
    #[error(
        "entry {entry_id}: event seq {seq} records transition {from} -> {to} outside the whitelist"
    )]
    IllegalTransition {
        entry_id: EntryId,
        seq: u64,
        from: VerificationState,
        to: VerificationState,
    },
    #[error(
        "entry {entry_id}: event seq {seq} starts from state {found:?}, expected {expected:?}"
    )]
    StateMismatch {
        entry_id: EntryId,
        seq: u64,
        expected: Option<VerificationState>,
        found: Option<VerificationState>,
    },
    #[error("entry {0} has no audit history")]
    MissingHistory(EntryId),
    #[error("entry {0}: stored content does not match the last audited hash")]
    HeadMismatch(EntryId),
    #[error("audit history references unknown entry {0}")]
    OrphanEvent(EntryId),
}

/// Verify sequence order, per-entry hash links, state continuity and the
/// transition whitelist, and that every stored entry matches its chain head.
pub fn verify_chain<'a>(
    events: &[AuditEvent],
    entries: impl IntoIterator<Item = &'a LexemeEntry>,
) -> Result<(), ChainError> {
    let mut heads: HashMap<&str, (&str, VerificationState)> = HashMap::new();
    let mut last_seq = None;
    for ev in events {
        if last_seq.is_some_and(|s| ev.seq <= s) {
            return Err(ChainError::SequenceOrder(ev.seq));
        }
        last_seq = Some(ev.seq);
        let head = heads.get(ev.entry_id.as_str()).copied();
        let expected_before = head.map_or(GENESIS_HASH, |(h, _)| h);
        if ev.hash_before != expected_before {
            return Err(ChainError::BrokenLink {
                entry_id: ev.entry_id.clone(),
                seq: ev.seq,
            });
        }
        let expected_state = head.map(|(_, s)| s);
        if ev.from_state != expected_state {
            return Err(ChainError::StateMismatch {
                entry_id: ev.entry_id.clone(),
                seq: ev.seq,
                expected: expected_state,
                found: ev.from_state,
            });
        }
        if let Some(from) = ev.from_state {
            if from != ev.to_state && !from.can_transition_to(ev.to_state) {
                return Err(ChainError::IllegalTransition {
                    entry_id: ev.entry_id.clone(),
                    seq: ev.seq,
                    from,
                    to: ev.to_state,
                });
            }
        }
        heads.insert(ev.entry_id.as_str(), (ev.hash_after.as_str(), ev.to_state));
    }
    let mut stored = std::collections::HashSet::new();
    for entry in entries {
        stored.insert(entry.id.as_str());
        match heads.get(entry.id.as_str()) {
            None => return Err(ChainError::MissingHistory(entry.id.clone())),
            Some((hash, _)) if *hash != entry_hash(entry) => {
                return Err(ChainError::HeadMismatch(entry.id.clone()))
            }
            Some(_) => {}
        }
    }
    let mut orphans: Vec<&str> = heads
        .keys()
        .filter(|id| !stored.contains(*id))
        .copied()
        .collect();
    orphans.sort_unstable();
    match orphans.first() {
        Some(id) => Err(ChainError::OrphanEvent(id.to_string())),
        None => Ok(()),
    }
}

/// Entries in a fully verified state whose history lacks an accepting or
/// correcting decision for either pass.
pub fn export_gate_violations<'a>(
    events: &[AuditEvent],
    entries: impl IntoIterator<Item = &'a LexemeEntry>,
) -> Vec<EntryId> {
    let mut passes: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for ev in events {
        let slot = passes.entry(ev.entry_id.as_str()).or_default();
        slot.0 |= ev.is_verifying(Pass::One);
        slot.1 |= ev.is_verifying(Pass::Two);
    }
    entries
        .into_iter()
        .filter(|e| e.state.is_fully_verified())
        .filter(|e| {
            passes
                .get(e.id.as_str())
                .is_none_or(|&(one, two)| !(one && two))
        })
        .map(|e| e.id.clone())
        .collect()
}
