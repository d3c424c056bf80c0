//! Duplicate detection across sources and merge proposals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audit::{AuditAction, MergeRole};
use crate::metrics::edit_distance;
use crate::model::{EntryId, LexemeEntry, LexicalCategory, VerificationState};
use crate::normalize::{normalize, NormalizationProfile};
use crate::store::{Project, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKind {
    Exact,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: EntryId,
    pub b: EntryId,
    /// Edit distance over the longer lemma length.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    pub member_ids: Vec<EntryId>,
    pub kind: ClusterKind,
    pub pairwise_scores: Vec<PairScore>,
    pub tau: f64,
}

/// Edit distance divided by the longer length, in codepoints.
pub fn normalized_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / longest as f64
}

fn categories_compatible(a: LexicalCategory, b: LexicalCategory) -> bool {
    a == b || a.is_unknown() || b.is_unknown()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = x;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Exact clusters group identical normalized lemmas. The fuzzy pass then
/// runs single-linkage over one representative (smallest id) per distinct
/// normalized lemma, linking pairs within `tau` whose categories agree or
/// where either is unknown. Clusters are ordered by smallest member id,
/// exact before fuzzy on ties.
pub fn find_duplicates<'a>(
    entries: impl IntoIterator<Item = &'a LexemeEntry>,
    profile: &NormalizationProfile,
    tau: f64,
) -> Vec<DuplicateCluster> {
    let mut groups: BTreeMap<String, Vec<&LexemeEntry>> = BTreeMap::new();
    for e in entries {
        groups
            .entry(normalize(&e.lemma, profile))
            .or_default()
            .push(e);
    }
    let mut clusters = Vec::new();
    let mut reps: Vec<(String, &LexemeEntry)> = Vec::new();
    for (key, mut members) in groups {
        members.sort_by(|a, b| a.id.cmp(&b.id));
        if members.len() > 1 {
            let first = members[0].id.clone();
            clusters.push(DuplicateCluster {
                member_ids: members.iter().map(|e| e.id.clone()).collect(),
                kind: ClusterKind::Exact,
                pairwise_scores: members[1..]
                    .iter()
                    .map(|e| PairScore {
                        a: first.clone(),
                        b: e.id.clone(),
                        distance: 0.0,
                    })
                    .collect(),
                tau,
            });
        }
        reps.push((key, members[0]));
    }
    reps.sort_by(|a, b| a.1.id.cmp(&b.1.id));

    let lens: Vec<usize> = reps.iter().map(|(k, _)| k.chars().count()).collect();
    let mut uf = UnionFind((0..reps.len()).collect());
    let mut links: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            let longest = lens[i].max(lens[j]);
            if longest == 0 || lens[i].abs_diff(lens[j]) as f64 / longest as f64 > tau {
                continue;
            }
            if !categories_compatible(reps[i].1.category, reps[j].1.category) {
                continue;
            }
            let d = normalized_distance(&reps[i].0, &reps[j].0);
            if d <= tau {
                uf.union(i, j);
                links.push((i, j, d));
            }
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..reps.len() {
        let root = uf.find(i);
        components.entry(root).or_default().push(i);
    }
    for (root, members) in components {
        if members.len() < 2 {
            continue;
        }
        clusters.push(DuplicateCluster {
            member_ids: members.iter().map(|&i| reps[i].1.id.clone()).collect(),
            kind: ClusterKind::Fuzzy,
            pairwise_scores: links
                .iter()
                .filter(|(i, _, _)| uf.find(*i) == root)
                .map(|&(i, j, d)| PairScore {
                    a: reps[i].1.id.clone(),
                    b: reps[j].1.id.clone(),
                    distance: d,
                })
                .collect(),
            tau,
        });
    }
    clusters.sort_by(|a, b| {
        a.member_ids[0]
            .cmp(&b.member_ids[0])
            .then_with(|| (a.kind == ClusterKind::Fuzzy).cmp(&(b.kind == ClusterKind::Fuzzy)))
    });
    clusters
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub field: String,
    pub value_a: String,
    pub value_b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeProposal {
    pub surviving_id: EntryId,
    pub absorbed_ids: Vec<EntryId>,
    pub merged_entry: LexemeEntry,
    pub conflicts: Vec<Conflict>,
}

#[derive(Debug, thiserror::Error)]
pub enum MergeError {
    #[error("unknown entry {0}")]
    UnknownEntry(EntryId),
    #[error("a merge needs at least two members")]
    TooFewMembers,
    #[error("merge has {0} unresolved conflicts")]
    Conflicted(usize),
    #[error(
        "entry {id} is in state {state}; members must share one state, Imported or Pass1Verified"
    )]
    StateMismatch {
        id: EntryId,
        state: VerificationState,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn push_unique<T: PartialEq + Clone>(into: &mut Vec<T>, items: &[T]) {
    for item in items {
        if !into.contains(item) {
            into.push(item.clone());
        }
    }
}

/// Merge a scalar field: equal values collapse, a missing value yields to a
/// concrete one, two concrete values conflict and the survivor's is kept.
fn merge_scalar<T: PartialEq + Copy + ToString>(
    field: &str,
    current: &mut T,
    other: T,
    missing: impl Fn(T) -> bool,
    conflicts: &mut Vec<Conflict>,
) {
    if *current == other || missing(other) {
        return;
    }
    if missing(*current) {
        *current = other;
    } else {
        conflicts.push(Conflict {
            field: field.into(),
            value_a: current.to_string(),
            value_b: other.to_string(),
        });
    }
}

fn merge_text(
    field: &str,
    current: &mut String,
    other: &str,
    missing: &str,
    conflicts: &mut Vec<Conflict>,
) {
    if current == other || other == missing {
        return;
    }
    if current == missing {
        *current = other.to_string();
    } else {
        conflicts.push(Conflict {
            field: field.into(),
            value_a: current.clone(),
            value_b: other.to_string(),
        });
    }
}

/// Field-wise merge of a cluster into its smallest-id member.
pub fn propose_merge<'a>(
    cluster: &DuplicateCluster,
    lookup: impl Fn(&str) -> Option<&'a LexemeEntry>,
) -> Result<MergeProposal, MergeError> {
    let mut members = cluster
        .member_ids
        .iter()
        .map(|id| lookup(id).ok_or_else(|| MergeError::UnknownEntry(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    if members.len() < 2 {
        return Err(MergeError::TooFewMembers);
    }
    members.sort_by(|a, b| a.id.cmp(&b.id));
    let mut merged = members[0].clone();
    let mut conflicts = Vec::new();
    for other in &members[1..] {
        if other.lemma != merged.lemma && !merged.variants.contains(&other.lemma) {
            merged.variants.push(other.lemma.clone());
        }
        let extra: Vec<String> = other
            .variants
            .iter()
            .filter(|v| **v != merged.lemma)
            .cloned()
            .collect();
        push_unique(&mut merged.variants, &extra);
        merge_scalar(
            "category",
            &mut merged.category,
            other.category,
            |c| c.is_unknown(),
            &mut conflicts,
        );
        merge_scalar(
            "gender",
            &mut merged.gender,
            other.gender,
            |g| g.is_unspecified(),
            &mut conflicts,
        );
        merge_text(
            "etymology.origin",
            &mut merged.etymology.origin,
            &other.etymology.origin,
            "unknown",
            &mut conflicts,
        );
        merge_text(
            "etymology.note",
            &mut merged.etymology.note,
            &other.etymology.note,
            "",
            &mut conflicts,
        );
        push_unique(&mut merged.glosses, &other.glosses);
        push_unique(&mut merged.provenance, &other.provenance);
    }
    Ok(MergeProposal {
        surviving_id: merged.id.clone(),
        absorbed_ids: members[1..].iter().map(|e| e.id.clone()).collect(),
        merged_entry: merged,
        conflicts,
    })
}

/// Commit a conflict-free proposal: the survivor is replaced by the merged
/// entry and every absorbed entry moves to Rejected.
pub fn apply_merge(
    project: &mut Project,
    proposal: &MergeProposal,
    reviewer: &str,
) -> Result<(), MergeError> {
    if !proposal.conflicts.is_empty() {
        return Err(MergeError::Conflicted(proposal.conflicts.len()));
    }
    let survivor = project
        .entry(&proposal.surviving_id)
        .ok_or_else(|| MergeError::UnknownEntry(proposal.surviving_id.clone()))?;
    let state = survivor.state;
    for id in std::iter::once(&proposal.surviving_id).chain(&proposal.absorbed_ids) {
        let e = project
            .entry(id)
            .ok_or_else(|| MergeError::UnknownEntry(id.clone()))?;
        if e.state != state
            || !matches!(
                e.state,
                VerificationState::Imported | VerificationState::Pass1Verified
            )
        {
            return Err(MergeError::StateMismatch {
                id: id.clone(),
                state: e.state,
            });
        }
    }
    let action = |role| AuditAction::Merge {
        role,
        surviving_id: proposal.surviving_id.clone(),
        absorbed_ids: proposal.absorbed_ids.clone(),
    };
    let mut merged = proposal.merged_entry.clone();
    merged.state = state;
    project.commit(merged, reviewer, action(MergeRole::Survivor))?;
    for id in &proposal.absorbed_ids {
        let mut absorbed = project.entry(id).expect("checked above").clone();
        absorbed.state = VerificationState::Rejected;
        project.commit(absorbed, reviewer, action(MergeRole::Absorbed))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn entry(id: &str, lemma: &str, source: &str) -> LexemeEntry {
        LexemeEntry::imported(
            id,
            lemma,
            ProvenanceRecord {
                source_id: source.into(),
                page: 1,
                line: None,
                raw_text: lemma.into(),
                capture_method: CaptureMethod::Manual,
                verified_text: None,
            },
        )
    }

    fn profile() -> NormalizationProfile {
        NormalizationProfile::conservative()
    }

    #[test]
    fn exact_pair() {
        let (a, b) = (entry("A", "كتاب", "s1"), entry("B", "كتاب", "s2"));
        let c = find_duplicates([&a, &b], &profile(), 0.25);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, ClusterKind::Exact);
        assert_eq!(c[0].member_ids, vec!["A", "B"]);
    }

    #[test]
    fn exact_after_normalization() {
        let (a, b) = (entry("A", "كـتاب", "s1"), entry("B", "كتاب", "s2"));
        assert_eq!(
            find_duplicates([&a, &b], &profile(), 0.0)[0].kind,
            ClusterKind::Exact
        );
    }

    #[test]
    fn fuzzy_within_threshold() {
        // length 5, one substitution: 0.2 <= 0.25
        let (a, b) = (entry("A", "مكتوب", "s1"), entry("B", "مكتون", "s2"));
        assert_eq!(normalized_distance("مكتوب", "مكتون"), 0.2);
        let c = find_duplicates([&a, &b], &profile(), 0.25);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, ClusterKind::Fuzzy);
        assert_eq!(c[0].pairwise_scores[0].distance, 0.2);
    }

    #[test]
    fn above_threshold_not_clustered() {
        // length 5, two substitutions: 0.4
        let (a, b) = (entry("A", "مكتوب", "s1"), entry("B", "مكسون", "s2"));
        assert_eq!(normalized_distance("مكتوب", "مكسون"), 0.4);
        assert!(find_duplicates([&a, &b], &profile(), 0.25).is_empty());
    }

    #[test]
    fn categories_must_agree() {
        let (mut a, mut b) = (entry("A", "مكتوب", "s1"), entry("B", "مكتون", "s2"));
        a.category = LexicalCategory::Noun;
        b.category = LexicalCategory::Verb;
        assert!(find_duplicates([&a, &b], &profile(), 0.25).is_empty());
        b.category = LexicalCategory::Unknown;
        assert_eq!(find_duplicates([&a, &b], &profile(), 0.25).len(), 1);
    }

    #[test]
    fn single_linkage_chains() {
        let (a, b, c) = (
            entry("A", "ببببب", "s"),
            entry("B", "بببتب", "s"),
            entry("C", "ببتتب", "s"),
        );
        let clusters = find_duplicates([&a, &b, &c], &profile(), 0.2);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].member_ids, vec!["A", "B", "C"]);
        assert_eq!(clusters[0].pairwise_scores.len(), 2);
    }

    #[test]
    fn missing_gender_yields() {
        let (mut a, b) = (entry("A", "كتاب", "s1"), entry("B", "كتاب", "s2"));
        a.gender = GrammaticalGender::Masculine;
        let c = &find_duplicates([&a, &b], &profile(), 0.25)[0];
        let lookup = |id: &str| [&a, &b].into_iter().find(|e| e.id == id);
        let p = propose_merge(c, lookup).unwrap();
        assert_eq!(p.merged_entry.gender, GrammaticalGender::Masculine);
        assert!(p.conflicts.is_empty());
        assert_eq!(p.merged_entry.provenance.len(), 2);
        assert_eq!(p.surviving_id, "A");
        assert_eq!(p.absorbed_ids, vec!["B"]);
    }

    #[test]
    fn contradicting_gender_conflicts() {
        let (mut a, mut b) = (entry("A", "كتاب", "s1"), entry("B", "كتاب", "s2"));
        a.gender = GrammaticalGender::Masculine;
        b.gender = GrammaticalGender::Feminine;
        let c = &find_duplicates([&a, &b], &profile(), 0.25)[0];
        let p = propose_merge(c, |id| [&a, &b].into_iter().find(|e| e.id == id)).unwrap();
        assert_eq!(
            p.conflicts,
            vec![Conflict {
                field: "gender".into(),
                value_a: "masculine".into(),
                value_b: "feminine".into()
            }]
        );
    }

    #[test]
    fn spellings_become_variants() {
        let (a, mut b) = (entry("A", "مكتوب", "s1"), entry("B", "مكتون", "s2"));
        b.glosses.push(Gloss::new("en", "written"));
        let c = &find_duplicates([&a, &b], &profile(), 0.25)[0];
        let p = propose_merge(c, |id| [&a, &b].into_iter().find(|e| e.id == id)).unwrap();
        assert_eq!(p.merged_entry.variants, vec!["مكتون"]);
        assert_eq!(p.merged_entry.glosses, vec![Gloss::new("en", "written")]);
    }
}
