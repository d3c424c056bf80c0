use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{CaptureMethod, Gloss, LexemeEntry, ProvenanceRecord};
use crate::validate::ARABIC_BLOCKS;

/// Language code for glosses whose language was not identified.
pub const UNDETERMINED_LANG: &str = "und";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrPage {
    pub source_id: String,
    pub page: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OcrError {
    #[error("line {0}: content before the first page marker")]
    NoPageMarker(usize),
    #[error("line {line}: page {page} of source `{source_id}` appears twice")]
    DuplicatePage {
        line: usize,
        source_id: String,
        page: u32,
    },
    #[error("line {0}: page numbers start at 1")]
    InvalidPage(usize),
}

/// `### PAGE <n> SOURCE <source_id>`, exactly.
fn parse_marker(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix("### PAGE ")?;
    let (n, source) = rest.split_once(" SOURCE ")?;
    let n_ok = !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit());
    let source_ok = !source.is_empty() && !source.contains(char::is_whitespace);
    (n_ok && source_ok).then_some((n, source))
}

/// Split an OCR dump into pages. Page text is everything between two
/// marker lines, verbatim. Whitespace before the first marker is ignored.
pub fn parse_ocr_pages(text: &str) -> Result<Vec<OcrPage>, OcrError> {
    let mut pages: Vec<OcrPage> = Vec::new();
    let mut seen = HashSet::new();
    let mut body_start: Option<usize> = None;
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let bare = line.trim_end_matches('\n').trim_end_matches('\r');
        if let Some((n, source)) = parse_marker(bare) {
            if let (Some(start), Some(last)) = (body_start, pages.last_mut()) {
                last.text = text[start..offset].to_string();
            }
            let page = match n.parse::<u32>() {
                Ok(p) if p > 0 => p,
                _ => return Err(OcrError::InvalidPage(i + 1)),
            };
            if !seen.insert((source.to_string(), page)) {
                return Err(OcrError::DuplicatePage {
                    line: i + 1,
                    source_id: source.to_string(),
                    page,
                });
            }
            pages.push(OcrPage {
                source_id: source.to_string(),
                page,
                text: String::new(),
            });
            body_start = Some(offset + line.len());
        } else if body_start.is_none() && !line.trim().is_empty() {
            return Err(OcrError::NoPageMarker(i + 1));
        }
        offset += line.len();
    }
    if let (Some(start), Some(last)) = (body_start, pages.last_mut()) {
        last.text = text[start..].to_string();
    }
    Ok(pages)
}

/// How headword lines are recognized on a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationRules {
    /// A headword is a single Arabic-script token followed by one of these.
    pub separators: Vec<String>,
    #[serde(default)]
    pub extra_script_ranges: Vec<[u32; 2]>,
}

impl Default for SegmentationRules {
    fn default() -> Self {
        SegmentationRules {
            separators: [":", "\u{2013}", "\u{2014}", "\t"]
                .map(String::from)
                .to_vec(),
            extra_script_ranges: Vec::new(),
        }
    }
}

impl SegmentationRules {
    fn in_script(&self, c: char) -> bool {
        let cp = c as u32;
        ARABIC_BLOCKS
            .iter()
            .chain(&self.extra_script_ranges)
            .any(|&[lo, hi]| (lo..=hi).contains(&cp))
    }

    /// `(headword, rest of line)` when `line` starts an entry.
    fn headword<'a>(&self, line: &'a str) -> Option<(&'a str, &'a str)> {
        let (pos, sep) = self
            .separators
            .iter()
            .filter(|s| !s.is_empty())
            .filter_map(|s| line.find(s.as_str()).map(|p| (p, s.len())))
            .min_by_key(|&(p, _)| p)?;
        let head = line[..pos].trim();
        let single_token = !head.is_empty() && !head.contains(char::is_whitespace);
        (single_token && head.chars().all(|c| self.in_script(c)))
            .then(|| (head, &line[pos + sep..]))
    }
}

/// Cut a page into entries: each headword line opens an entry, and the
/// text after its separator plus all following lines up to the next
/// headword become one `und` gloss. Lines before the first headword are
/// dropped.
pub fn segment_ocr_page(page: &OcrPage, rules: &SegmentationRules) -> Vec<LexemeEntry> {
    struct Open<'a> {
        line: usize,
        lemma: &'a str,
        raw: Vec<&'a str>,
        gloss: Vec<&'a str>,
    }

    fn close(open: Open<'_>, page: &OcrPage) -> LexemeEntry {
        let mut entry = LexemeEntry::imported(
            "",
            open.lemma,
            ProvenanceRecord {
                source_id: page.source_id.clone(),
                page: page.page,
                line: Some(open.line as u32),
                raw_text: open.raw.join("\n"),
                capture_method: CaptureMethod::Ocr,
                verified_text: None,
            },
        );
        let gloss = open.gloss.join(" ");
        if !gloss.is_empty() {
            entry.glosses.push(Gloss::new(UNDETERMINED_LANG, gloss));
        }
        entry
    }

    let mut out = Vec::new();
    let mut current: Option<Open> = None;
    for (i, line) in page.text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if let Some((lemma, rest)) = rules.headword(line) {
            if let Some(open) = current.take() {
                out.push(close(open, page));
            }
            let rest = rest.trim();
            current = Some(Open {
                line: i + 1,
                lemma,
                raw: vec![line],
                gloss: if rest.is_empty() { vec![] } else { vec![rest] },
            });
        } else if let Some(open) = current.as_mut() {
            open.raw.push(line);
            let t = line.trim();
            if !t.is_empty() {
                open.gloss.push(t);
            }
        }
    }
    if let Some(open) = current {
        out.push(close(open, page));
    }
    // trailing blank lines are not part of the article
    for e in &mut out {
        let raw = &mut e.provenance[0].raw_text;
        raw.truncate(raw.trim_end().len());
    }
    out
}
