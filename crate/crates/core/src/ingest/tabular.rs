use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ProjectConfig;
use crate::model::{
    CaptureMethod, EtymologyRecord, Gloss, GrammaticalGender, LexemeEntry, LexicalCategory,
    ProvenanceRecord,
};
use crate::validate::{validate_entry, Violation, GLOSS_SEPARATOR};

/// Canonical column names, in emission order.
pub const HEADER: [&str; 10] = [
    "lemma",
    "category",
    "gender",
    "etym_origin",
    "etym_note",
    "gloss_lang",
    "gloss",
    "source_id",
    "page",
    "line",
];

/// Source label → canonical category or gender token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap(pub BTreeMap<String, String>);

#[derive(Debug, thiserror::Error)]
pub enum LabelMapError {
    #[error("reading label map {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing label map {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("label `{label}` maps to `{token}`, which is neither a category nor a gender")]
    UnknownToken { label: String, token: String },
}

impl LabelMap {
    pub fn from_json(text: &str, path: &str) -> Result<Self, LabelMapError> {
        let map: LabelMap = serde_json::from_str(text).map_err(|source| LabelMapError::Json {
            path: path.into(),
            source,
        })?;
        for (label, token) in &map.0 {
            if token.parse::<LexicalCategory>().is_err()
                && token.parse::<GrammaticalGender>().is_err()
            {
                return Err(LabelMapError::UnknownToken {
                    label: label.clone(),
                    token: token.clone(),
                });
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, LabelMapError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| LabelMapError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::from_json(&text, &shown)
    }

    fn resolve<'a>(&'a self, label: &'a str) -> &'a str {
        self.0.get(label).map_or(label, String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TabularError {
    #[error("missing header row")]
    MissingHeader,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("header lacks column `{0}`")]
    MissingColumn(&'static str),
    #[error("column `{0}` appears twice")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowProblem {
    FieldCount { expected: usize, found: usize },
    InvalidNumber { column: &'static str, value: String },
    GlossMismatch { langs: usize, texts: usize },
    Invalid { violations: Vec<Violation> },
}

impl std::fmt::Display for RowProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowProblem::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            RowProblem::InvalidNumber { column, value } => {
                write!(f, "{column} `{value}` is not a positive integer")
            }
            RowProblem::GlossMismatch { langs, texts } => {
                write!(f, "{langs} gloss languages for {texts} gloss texts")
            }
            RowProblem::Invalid { violations } => {
                let parts: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                f.write_str(&parts.join("; "))
            }
        }
    }
}

/// A skipped row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: usize,
    pub problem: RowProblem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct TabularParse {
    /// Parsed entries with the line they came from.
    pub entries: Vec<(usize, LexemeEntry)>,
    pub errors: Vec<RowError>,
    pub warnings: Vec<RowWarning>,
}

/// Parser for the canonical TSV format.
#[derive(Debug, Clone)]
pub struct TabularParser {
    pub capture_method: CaptureMethod,
    pub label_map: LabelMap,
    /// Used for rows whose `source_id` cell is empty.
    pub default_source: Option<String>,
    pub config: ProjectConfig,
}

impl TabularParser {
    pub fn new(capture_method: CaptureMethod) -> Self {
        TabularParser {
            capture_method,
            label_map: LabelMap::default(),
            default_source: None,
            config: ProjectConfig::default(),
        }
    }

    /// Parse a TSV stream. Header problems are fatal; row problems are
    /// collected and the row skipped.
    pub fn parse(&self, text: &str) -> Result<TabularParse, TabularError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
        let header = loop {
            match lines.next() {
                None => return Err(TabularError::MissingHeader),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l,
            }
        };
        let columns = parse_header(header)?;

        let mut out = TabularParse::default();
        for (line, raw) in lines {
            if raw.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = raw.split('\t').collect();
            if cells.len() != HEADER.len() {
                out.errors.push(RowError {
                    line,
                    problem: RowProblem::FieldCount {
                        expected: HEADER.len(),
                        found: cells.len(),
                    },
                });
                continue;
            }
            let mut row = [""; 10];
            for (cell, &slot) in cells.iter().zip(&columns) {
                row[slot] = cell;
            }
            match self.parse_row(line, raw, &row, &mut out.warnings) {
                Ok(entry) => out.entries.push((line, entry)),
                Err(problem) => out.errors.push(RowError { line, problem }),
            }
        }
        Ok(out)
    }

    fn parse_row(
        &self,
        line: usize,
        raw: &str,
        row: &[&str; 10],
        warnings: &mut Vec<RowWarning>,
    ) -> Result<LexemeEntry, RowProblem> {
        let [lemma, category, gender, origin, note, gloss_lang, gloss, source_id, page, line_no] =
            *row;

        let page = parse_positive("page", page)?;
        let line_no = match line_no.trim() {
            "" => None,
            v => Some(parse_positive("line", v)?),
        };
        let source_id = match (source_id.trim(), &self.default_source) {
            ("", Some(default)) => default.clone(),
            (s, _) => s.to_string(),
        };

        let mut entry = LexemeEntry::imported(
            "",
            lemma,
            ProvenanceRecord {
                source_id,
                page,
                line: line_no,
                raw_text: raw.to_string(),
                capture_method: self.capture_method,
                verified_text: None,
            },
        );
        entry.category = self.label(
            line,
            "category",
            category,
            LexicalCategory::Unknown,
            warnings,
        );
        entry.gender = self.label(
            line,
            "gender",
            gender,
            GrammaticalGender::Unspecified,
            warnings,
        );
        entry.etymology = EtymologyRecord {
            origin: match origin.trim() {
                "" => EtymologyRecord::UNKNOWN.to_string(),
                o => o.to_string(),
            },
            note: note.to_string(),
        };
        entry.glosses = split_glosses(gloss_lang, gloss)?;

        let violations = validate_entry(&entry, &self.config);
        if !violations.is_empty() {
            return Err(RowProblem::Invalid { violations });
        }
        Ok(entry)
    }

    /// Empty cells give the fallback silently; unrecognized labels give it
    /// with a warning.
    fn label<T: std::str::FromStr + Copy>(
        &self,
        line: usize,
        column: &str,
        cell: &str,
        fallback: T,
        warnings: &mut Vec<RowWarning>,
    ) -> T {
        let cell = cell.trim();
        if cell.is_empty() {
            return fallback;
        }
        self.label_map.resolve(cell).parse().unwrap_or_else(|_| {
            warnings.push(RowWarning {
                line,
                message: format!("unrecognized {column} label `{cell}`"),
            });
            fallback
        })
    }
}

fn parse_header(header: &str) -> Result<Vec<usize>, TabularError> {
    let names: Vec<&str> = header
        .trim_start_matches('\u{feff}')
        .split('\t')
        .map(str::trim)
        .collect();
    if !names.iter().any(|n| HEADER.contains(n)) {
        return Err(TabularError::MissingHeader);
    }
    let mut seen = HashSet::new();
    let mut slots = Vec::with_capacity(names.len());
    for name in &names {
        let slot = HEADER
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TabularError::UnknownColumn(name.to_string()))?;
        if !seen.insert(slot) {
            return Err(TabularError::DuplicateColumn(name.to_string()));
        }
        slots.push(slot);
    }
    if let Some(missing) = HEADER.iter().enumerate().find(|(i, _)| !seen.contains(i)) {
        return Err(TabularError::MissingColumn(missing.1));
    }
    Ok(slots)
}

fn parse_positive(column: &'static str, value: &str) -> Result<u32, RowProblem> {
    match value.trim().parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(RowProblem::InvalidNumber {
            column,
            value: value.to_string(),
        }),
    }
}

/// Glosses share a cell, separated by `|`. A single language applies to
/// every text.
fn split_glosses(langs: &str, texts: &str) -> Result<Vec<Gloss>, RowProblem> {
    if langs.is_empty() && texts.is_empty() {
        return Ok(Vec::new());
    }
    let langs: Vec<&str> = langs.split(GLOSS_SEPARATOR).collect();
    let texts: Vec<&str> = texts.split(GLOSS_SEPARATOR).collect();
    if langs.len() == texts.len() {
        Ok(langs
            .iter()
            .zip(&texts)
            .map(|(l, t)| Gloss::new(*l, *t))
            .collect())
    } else if langs.len() == 1 {
        Ok(texts.iter().map(|t| Gloss::new(langs[0], *t)).collect())
    } else {
        Err(RowProblem::GlossMismatch {
            langs: langs.len(),
            texts: texts.len(),
        })
    }
}

/// Canonical TSV for `entries`, in the order given: header line, then one
/// row per entry. Location columns come from the first provenance record.
pub fn emit_tabular<'a>(entries: impl IntoIterator<Item = &'a LexemeEntry>) -> String {
    let mut out = HEADER.join("\t");
    out.push('\n');
    for e in entries {
        let sep = GLOSS_SEPARATOR.to_string();
        let langs: Vec<&str> = e.glosses.iter().map(|g| g.lang.as_str()).collect();
        let texts: Vec<&str> = e.glosses.iter().map(|g| g.text.as_str()).collect();
        let (source, page, line) = e
            .primary_provenance()
            .map(|p| {
                (
                    p.source_id.as_str(),
                    p.page.to_string(),
                    p.line.map(|l| l.to_string()).unwrap_or_default(),
                )
            })
            .unwrap_or_default();
        let row = [
            e.lemma.as_str(),
            e.category.as_str(),
            e.gender.as_str(),
            e.etymology.origin.as_str(),
            e.etymology.note.as_str(),
            &langs.join(&sep),
            &texts.join(&sep),
            source,
            &page,
            &line,
        ];
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tsv(rows: &[&str]) -> String {
        let mut s = HEADER.join("\t");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    fn parser() -> TabularParser {
        TabularParser::new(CaptureMethod::Manual)
    }

    #[test]
    fn direct_field_mapping() {
        let out = parser()
            .parse(&tsv(&[
                "كتاب\tnoun\tmasculine\tar\t\ten\tbook\tamili2011\t44\t3",
            ]))
            .unwrap();
        assert!(out.errors.is_empty() && out.warnings.is_empty());
        let (line, e) = &out.entries[0];
        assert_eq!(*line, 2);
        assert_eq!(e.lemma, "كتاب");
        assert_eq!(e.category, LexicalCategory::Noun);
        assert_eq!(e.gender, GrammaticalGender::Masculine);
        assert_eq!(e.etymology.origin, "ar");
        assert_eq!(e.glosses, vec![Gloss::new("en", "book")]);
        let p = &e.provenance[0];
        assert_eq!(
            (p.source_id.as_str(), p.page, p.line),
            ("amili2011", 44, Some(3))
        );
        assert_eq!(p.capture_method, CaptureMethod::Manual);
    }

    #[test]
    fn label_map_resolves_source_labels() {
        let mut p = parser();
        p.label_map =
            LabelMap::from_json(r#"{"اسم": "noun", "مذكر": "masculine"}"#, "map.json").unwrap();
        let out = p.parse(&tsv(&["كتاب\tاسم\tمذكر\t\t\t\t\ts\t1\t"])).unwrap();
        assert_eq!(out.entries[0].1.category, LexicalCategory::Noun);
        assert_eq!(out.entries[0].1.gender, GrammaticalGender::Masculine);
    }

    #[test]
    fn label_map_rejects_unknown_tokens() {
        assert!(matches!(
            LabelMap::from_json(r#"{"x": "thing"}"#, "m"),
            Err(LabelMapError::UnknownToken { .. })
        ));
    }

    #[test]
    fn unknown_label_warns() {
        let out = parser()
            .parse(&tsv(&["كتاب\tnominal\t\t\t\t\t\ts\t1\t"]))
            .unwrap();
        assert_eq!(out.entries[0].1.category, LexicalCategory::Unknown);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].line, 2);
    }

    #[test]
    fn empty_lemma_reported_and_parsing_continues() {
        let out = parser()
            .parse(&tsv(&[
                "\tnoun\t\t\t\t\t\ts\t1\t",
                "كتاب\tnoun\t\t\t\t\t\ts\t1\t",
            ]))
            .unwrap();
        assert_eq!(out.entries.len(), 1);
        assert_eq!(
            out.errors,
            vec![RowError {
                line: 2,
                problem: RowProblem::Invalid {
                    violations: vec![Violation::EmptyLemma]
                }
            }]
        );
    }

    #[test]
    fn row_problems() {
        let out = parser()
            .parse(&tsv(&[
                "كتاب\tnoun",
                "كتاب\t\t\t\t\t\t\ts\tzero\t",
                "كتاب\t\t\t\t\ten|fr|de\ta|b\ts\t1\t",
                "book\t\t\t\t\t\t\ts\t1\t",
            ]))
            .unwrap();
        let problems: Vec<_> = out.errors.iter().map(|e| (e.line, &e.problem)).collect();
        assert_eq!(problems.len(), 4);
        assert!(matches!(
            problems[0],
            (
                2,
                RowProblem::FieldCount {
                    expected: 10,
                    found: 2
                }
            )
        ));
        assert!(matches!(
            problems[1],
            (3, RowProblem::InvalidNumber { column: "page", .. })
        ));
        assert!(matches!(
            problems[2],
            (4, RowProblem::GlossMismatch { langs: 3, texts: 2 })
        ));
        assert!(matches!(problems[3], (5, RowProblem::Invalid { .. })));
    }

    #[test]
    fn header_errors_are_fatal() {
        assert_eq!(parser().parse("").unwrap_err(), TabularError::MissingHeader);
        assert_eq!(
            parser().parse("كتاب\tnoun\n").unwrap_err(),
            TabularError::MissingHeader
        );
        let extra = format!("{}\tcomment\n", HEADER.join("\t"));
        assert_eq!(
            parser().parse(&extra).unwrap_err(),
            TabularError::UnknownColumn("comment".into())
        );
        assert_eq!(
            parser().parse(&HEADER[..9].join("\t")).unwrap_err(),
            TabularError::MissingColumn("line")
        );
    }

    #[test]
    fn header_order_is_free() {
        let mut cols = HEADER.to_vec();
        cols.reverse();
        let text = format!(
            "{}\n3\t44\tamili2011\tbook\ten\t\tar\tmasculine\tnoun\tكتاب\n",
            cols.join("\t")
        );
        let out = parser().parse(&text).unwrap();
        assert_eq!(out.entries[0].1.lemma, "كتاب");
        assert_eq!(out.entries[0].1.provenance[0].page, 44);
    }

    #[test]
    fn default_source_fills_empty_cells() {
        let mut p = parser();
        p.default_source = Some("amili2011".into());
        let out = p.parse(&tsv(&["كتاب\t\t\t\t\t\t\t\t1\t"])).unwrap();
        assert_eq!(out.entries[0].1.provenance[0].source_id, "amili2011");
    }

    #[test]
    fn multiple_glosses_round_trip() {
        let out = parser()
            .parse(&tsv(&["كتاب\tnoun\t\t\t\ten|fr\tbook|livre\ts\t2\t"]))
            .unwrap();
        let e = &out.entries[0].1;
        assert_eq!(
            e.glosses,
            vec![Gloss::new("en", "book"), Gloss::new("fr", "livre")]
        );
        let again = parser().parse(&emit_tabular([e])).unwrap();
        assert_eq!(again.entries[0].1.glosses, e.glosses);
    }

    #[test]
    fn empty_input_emits_header_only() {
        assert_eq!(emit_tabular([]), format!("{}\n", HEADER.join("\t")));
    }
}
