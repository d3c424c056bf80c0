//! Typed relation graph between entries and single-hop field propagation
//! along derivation links.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{EntryId, LexemeEntry, RelationEdge, RelationKind};
use crate::store::{Project, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum RelationError {
    #[error("edge {from} -> {to} would close a derivation cycle")]
    CycleWouldForm { from: EntryId, to: EntryId },
    #[error("edge from {0} to itself")]
    SelfLoop(EntryId),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(EntryId),
    #[error("edge {from} -> {to} ({kind}) already exists")]
    DuplicateEdge {
        from: EntryId,
        to: EntryId,
        kind: RelationKind,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// True if `target` is reachable from `start` following `derived_from`
/// edges child → parent.
pub fn derivation_reaches(edges: &[RelationEdge], start: &str, target: &str) -> bool {
    let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in edges.iter().filter(|e| e.kind == RelationKind::DerivedFrom) {
        parents
            .entry(e.from_id.as_str())
            .or_default()
            .push(e.to_id.as_str());
    }
    let mut stack = vec![start];
    let mut seen = HashSet::new();
    while let Some(node) = stack.pop() {
        if node == target {
            return true;
        }
        if seen.insert(node) {
            stack.extend(parents.get(node).into_iter().flatten());
        }
    }
    false
}

/// Check an edge against the current graph. Returns the canonical edge.
pub fn check_edge(
    edges: &[RelationEdge],
    exists: impl Fn(&str) -> bool,
    edge: RelationEdge,
) -> Result<RelationEdge, RelationError> {
    if edge.from_id == edge.to_id {
        return Err(RelationError::SelfLoop(edge.from_id));
    }
    for id in [&edge.from_id, &edge.to_id] {
        if !exists(id) {
            return Err(RelationError::UnknownEndpoint(id.clone()));
        }
    }
    let edge = edge.canonical();
    if edges.iter().any(|e| e.same_link(&edge)) {
        return Err(RelationError::DuplicateEdge {
            from: edge.from_id,
            to: edge.to_id,
            kind: edge.kind,
        });
    }
    // child -> parent closes a cycle iff parent already derives from child
    if edge.kind == RelationKind::DerivedFrom
        && derivation_reaches(edges, &edge.to_id, &edge.from_id)
    {
        return Err(RelationError::CycleWouldForm {
            from: edge.from_id,
            to: edge.to_id,
        });
    }
    Ok(edge)
}

/// Validate and persist a relation edge.
pub fn add_relation(
    project: &mut Project,
    edge: RelationEdge,
) -> Result<RelationEdge, RelationError> {
    let edge = check_edge(project.edges(), |id| project.entry(id).is_some(), edge)?;
    project.push_edge(edge.clone())?;
    Ok(edge)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillField {
    Category,
    Gender,
    Etymology,
}

/// A suggested value for a missing field, taken from a derivation parent.
/// Fills are never applied automatically; they are offered during pass 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProposedFill {
    pub child_id: EntryId,
    pub field: FillField,
    pub value: String,
    pub parent_id: EntryId,
}

/// One hop: for every `derived_from` edge child → parent, propose the
/// parent's value for each child field that is still unknown.
pub fn propagate_fields<'a>(
    edges: &[RelationEdge],
    entries: impl IntoIterator<Item = &'a LexemeEntry>,
) -> Vec<ProposedFill> {
    let by_id: BTreeMap<&str, &LexemeEntry> =
        entries.into_iter().map(|e| (e.id.as_str(), e)).collect();
    let mut out = Vec::new();
    for edge in edges.iter().filter(|e| e.kind == RelationKind::DerivedFrom) {
        let (Some(child), Some(parent)) = (
            by_id.get(edge.from_id.as_str()),
            by_id.get(edge.to_id.as_str()),
        ) else {
            continue;
        };
        let mut propose = |field, value: String| {
            out.push(ProposedFill {
                child_id: child.id.clone(),
                field,
                value,
                parent_id: parent.id.clone(),
            })
        };
        if child.category.is_unknown() && !parent.category.is_unknown() {
            propose(FillField::Category, parent.category.to_string());
        }
        if child.gender.is_unspecified() && !parent.gender.is_unspecified() {
            propose(FillField::Gender, parent.gender.to_string());
        }
        if child.etymology.is_unknown() && !parent.etymology.is_unknown() {
            propose(FillField::Etymology, parent.etymology.origin.clone());
        }
    }
    out.sort();
    out.dedup();
    out
}
