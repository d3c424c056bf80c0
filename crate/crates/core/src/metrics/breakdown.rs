use serde::{Deserialize, Serialize};

use super::align::{Alignment, EditKind};
use crate::normalize::ConfusionTable;

/// Error counts for one (reference, hypothesis) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub ref_len: usize,
    pub distance: usize,
    /// `distance / ref_len`; absent for an empty reference.
    pub cer: Option<f64>,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    /// Error windows explained by a confusion rule.
    pub msa_bias_count: usize,
    /// `msa_bias_count / distance`; absent when there are no errors.
    pub msa_bias_share: Option<f64>,
}

/// Classify the errors of an alignment.
///
/// Within each maximal run of non-match operations, windows of adjacent
/// operations are matched leftmost-longest against the table: a window
/// counts as MSA bias when its reference side equals a rule's darija form
/// and its hypothesis side equals the msa form. For single-grapheme rules
/// the window is one substitution.
pub fn breakdown(alignment: &Alignment, table: &ConfusionTable) -> ErrorBreakdown {
    let ops = &alignment.ops;
    let mut bias = 0;
    let mut i = 0;
    while i < ops.len() {
        if !ops[i].is_error() {
            i += 1;
            continue;
        }
        let run_end = ops[i..]
            .iter()
            .position(|op| !op.is_error())
            .map_or(ops.len(), |p| i + p);
        let mut start = i;
        while start < run_end {
            let mut best = None;
            let (mut r, mut h) = (String::new(), String::new());
            for (end, op) in ops.iter().enumerate().take(run_end).skip(start) {
                r.push_str(alignment.ref_grapheme(op).unwrap_or(""));
                h.push_str(alignment.hyp_grapheme(op).unwrap_or(""));
                if table
                    .rules()
                    .iter()
                    .any(|rule| rule.darija_form == r && rule.msa_form == h)
                {
                    best = Some(end + 1);
                }
            }
            match best {
                Some(end) => {
                    bias += 1;
                    start = end;
                }
                None => start += 1,
            }
        }
        i = run_end;
    }

    let ref_len = alignment.ref_len();
    let distance = alignment.distance();
    ErrorBreakdown {
        ref_len,
        distance,
        cer: (ref_len > 0).then(|| distance as f64 / ref_len as f64),
        substitutions: alignment.count(EditKind::Substitute),
        insertions: alignment.count(EditKind::Insert),
        deletions: alignment.count(EditKind::Delete),
        msa_bias_count: bias,
        msa_bias_share: (distance > 0).then(|| bias as f64 / distance as f64),
    }
}
