//! Command dialect, one block per lexeme, fields separated by tabs:
//!
//! ```text
//! CREATE_LEXEME  <entry id>  <lemma code>  "<lemma>"  <language item>  <category item>
//! LAST           GENDER      <gender item>                 (only when gender is set)
//! LAST           GLOSS       <lang>        "<text>"        (one per gloss)
//! ```
//!
//! Quoted values escape `\` and `"` with a backslash. Lines starting with
//! `#` are comments.

use std::fmt::Write as _;

use super::WikibaseMapping;
use crate::model::LexemeEntry;

pub const QS_HEADER: &str = "\
# lrelf QuickStatements dialect v1
# CREATE_LEXEME\t<entry id>\t<lemma code>\t\"<lemma>\"\t<language item>\t<category item>
# LAST\tGENDER\t<gender item>
# LAST\tGLOSS\t<lang>\t\"<text>\"
# This dialect is not accepted by QuickStatements as is. The operator must
# translate it to the live lexeme command syntax and check every item id.
";

fn quoted(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Render the command file. Returns the text and its command line count.
/// The caller checks that every category and set gender is mapped.
pub fn quickstatements(entries: &[&LexemeEntry], mapping: &WikibaseMapping) -> (String, usize) {
    let mut out = String::from(QS_HEADER);
    let mut lines = 0;
    for e in entries {
        let _ = writeln!(
            out,
            "CREATE_LEXEME\t{}\t{}\t{}\t{}\t{}",
            e.id,
            mapping.lemma_language_code,
            quoted(&e.lemma),
            mapping.language_item,
            mapping.category_map[&e.category]
        );
        lines += 1;
        if let Some(item) = mapping
            .gender_map
            .get(&e.gender)
            .filter(|_| !e.gender.is_unspecified())
        {
            let _ = writeln!(out, "LAST\tGENDER\t{item}");
            lines += 1;
        }
        for g in &e.glosses {
            let _ = writeln!(out, "LAST\tGLOSS\t{}\t{}", g.lang, quoted(&g.text));
            lines += 1;
        }
    }
    (out, lines)
}
