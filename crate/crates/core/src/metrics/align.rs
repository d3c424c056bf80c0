use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

/// Unit over which edit operations are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphemeUnit {
    /// Unicode scalar values; combining marks count separately.
    #[default]
    Codepoint,
    /// Extended grapheme clusters (a letter with its marks is one unit).
    Cluster,
}

impl GraphemeUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphemeUnit::Codepoint => "codepoint",
            GraphemeUnit::Cluster => "cluster",
        }
    }
}

/// Split text into units.
pub fn graphemes(text: &str, unit: GraphemeUnit) -> Vec<&str> {
    match unit {
        GraphemeUnit::Codepoint => text
            .char_indices()
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
        GraphemeUnit::Cluster => text.graphemes(true).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// One step of an alignment. Spans are byte ranges of the unit in the
/// reference and hypothesis texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EditOp {
    pub kind: EditKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_span: Option<Range<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyp_span: Option<Range<usize>>,
}

impl EditOp {
    pub fn is_error(&self) -> bool {
        self.kind != EditKind::Match
    }
}

/// A minimal-cost edit script turning the reference into the hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alignment<'a> {
    pub ref_text: &'a str,
    pub hyp_text: &'a str,
    pub ops: Vec<EditOp>,
}

impl<'a> Alignment<'a> {
    pub fn ref_grapheme(&self, op: &EditOp) -> Option<&'a str> {
        op.ref_span.clone().map(|s| &self.ref_text[s])
    }

    pub fn hyp_grapheme(&self, op: &EditOp) -> Option<&'a str> {
        op.hyp_span.clone().map(|s| &self.hyp_text[s])
    }

    pub fn distance(&self) -> usize {
        self.ops.iter().filter(|op| op.is_error()).count()
    }

    pub fn count(&self, kind: EditKind) -> usize {
        self.ops.iter().filter(|op| op.kind == kind).count()
    }

    /// Concatenated reference side of the ops.
    pub fn reference(&self) -> String {
        self.ops
            .iter()
            .filter_map(|op| self.ref_grapheme(op))
            .collect()
    }

    /// Concatenated hypothesis side of the ops.
    pub fn hypothesis(&self) -> String {
        self.ops
            .iter()
            .filter_map(|op| self.hyp_grapheme(op))
            .collect()
    }

    pub fn ref_len(&self) -> usize {
        self.ops.iter().filter(|op| op.ref_span.is_some()).count()
    }
}

/// Levenshtein alignment over codepoints.
pub fn align<'a>(reference: &'a str, hypothesis: &'a str) -> Alignment<'a> {
    let total = reference.len() + hypothesis.len();
    let mut stack = [(0usize, '\0'); 32];
    let mut heap = Vec::new();
    let units = if total <= stack.len() {
        &mut stack[..total]
    } else {
        heap.resize(total, (0, '\0'));
        &mut heap[..]
    };
    let mut len = 0;
    for unit in reference.char_indices().chain(hypothesis.char_indices()) {
        units[len] = unit;
        len += 1;
    }
    let split = reference.chars().count();
    let (r, h) = units[..len].split_at(split);
    Alignment {
        ref_text: reference,
        hyp_text: hypothesis,
        ops: align_seq(r, reference.len(), h, hypothesis.len()),
    }
}

pub fn align_with<'a>(
    reference: &'a str,
    hypothesis: &'a str,
    unit: GraphemeUnit,
) -> Alignment<'a> {
    match unit {
        GraphemeUnit::Codepoint => align(reference, hypothesis),
        GraphemeUnit::Cluster => {
            let r: Vec<(usize, &str)> = reference.grapheme_indices(true).collect();
            let h: Vec<(usize, &str)> = hypothesis.grapheme_indices(true).collect();
            Alignment {
                ref_text: reference,
                hyp_text: hypothesis,
                ops: align_seq(&r, reference.len(), &h, hypothesis.len()),
            }
        }
    }
}

/// Unit-cost alignment with a full DP table over (offset, unit) pairs.
/// When several predecessors reach a cell at equal cost the backtrace
/// prefers match, then substitution, then deletion, then insertion.
fn align_seq<T: PartialEq>(
    r: &[(usize, T)],
    r_end: usize,
    h: &[(usize, T)],
    h_end: usize,
) -> Vec<EditOp> {
    // a shared suffix is always matched by the backtrace below
    let mut suffix = 0;
    while suffix < r.len().min(h.len()) && r[r.len() - 1 - suffix].1 == h[h.len() - 1 - suffix].1 {
        suffix += 1;
    }
    let (n, m) = (r.len() - suffix, h.len() - suffix);
    let width = m + 1;
    let mut stack = [0u32; 128];
    let mut heap = Vec::new();
    let dp = if (n + 1) * width <= stack.len() {
        &mut stack[..(n + 1) * width]
    } else {
        heap.resize((n + 1) * width, 0);
        &mut heap[..]
    };
    for (j, cell) in dp[..width].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for (i, (_, ru)) in r[..n].iter().enumerate() {
        let (done, rest) = dp.split_at_mut((i + 1) * width);
        let prev = &done[i * width..];
        let row = &mut rest[..width];
        row[0] = i as u32 + 1;
        for (j, (_, hu)) in h[..m].iter().enumerate() {
            let diag = prev[j] + u32::from(ru != hu);
            row[j + 1] = diag.min(prev[j + 1] + 1).min(row[j] + 1);
        }
    }

    let r_span = |k: usize| r[k].0..r.get(k + 1).map_or(r_end, |u| u.0);
    let h_span = |k: usize| h[k].0..h.get(k + 1).map_or(h_end, |u| u.0);
    let mut ops = Vec::with_capacity(r.len().max(h.len()));
    for k in 0..suffix {
        let (i, j) = (r.len() - 1 - k, h.len() - 1 - k);
        ops.push(EditOp {
            kind: EditKind::Match,
            ref_span: Some(r_span(i)),
            hyp_span: Some(h_span(j)),
        });
    }
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * width + j];
        if i > 0 && j > 0 {
            let diag = dp[(i - 1) * width + j - 1];
            let same = r[i - 1].1 == h[j - 1].1;
            if (same && diag == here) || (!same && diag + 1 == here) {
                let kind = if same {
                    EditKind::Match
                } else {
                    EditKind::Substitute
                };
                ops.push(EditOp {
                    kind,
                    ref_span: Some(r_span(i - 1)),
                    hyp_span: Some(h_span(j - 1)),
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp {
                kind: EditKind::Delete,
                ref_span: Some(r_span(i - 1)),
                hyp_span: None,
            });
            i -= 1;
        } else {
            ops.push(EditOp {
                kind: EditKind::Insert,
                ref_span: None,
                hyp_span: Some(h_span(j - 1)),
            });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Edit distance over codepoints with two rolling rows.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != cb))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
