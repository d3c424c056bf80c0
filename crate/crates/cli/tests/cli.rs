use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use lrelf_core::model::{GrammaticalGender, LexicalCategory};
use lrelf_core::{apply_decision, Action, Corrections, Decision, Pass, Project};

const HEADER: &str =
    "lemma\tcategory\tgender\tetym_origin\tetym_note\tgloss_lang\tgloss\tsource_id\tpage\tline\n";

const MAPPING: &str = r#"{"language_item": "Q56426", "category_map": {"noun": "Q1084", "verb": "Q24905"},
 "gender_map": {"masculine": "Q499327", "feminine": "Q1775415"},
 "relation_property_map": {"derived_from": "P5191"}}"#;

fn lrelf(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lrelf"));
    cmd.args(args)
        .env_remove("LRELF_PROJECT")
        .env_remove("LRELF_REVIEWER");
    cmd
}

fn run(project: &Path, args: &[&str]) -> Output {
    lrelf(&["--project", project.to_str().unwrap()])
        .args(args)
        .output()
        .unwrap()
}

fn last_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .last()
        .unwrap_or("")
        .to_string()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compare with a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn assert_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended"
    );
}

fn write_words(dir: &Path, rows: &[&str]) -> PathBuf {
    let path = dir.join("words.tsv");
    fs::write(&path, format!("{HEADER}{}", rows.join(""))).unwrap();
    path
}

const ROWS: [&str; 3] = [
    "كتاب\tnoun\tmasculine\tar\t\ten\tbook\t\t12\t3\n",
    "مشى\tverb\t\tunknown\t\ten|fr\tto walk|marcher\t\t12\t4\n",
    "دار\tnoun\tfeminine\tar\tsee \"dwr\"\ten\thouse\t\t13\t1\n",
];

#[test]
fn init_then_validate_on_empty_project() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["init"]);
    assert!(out.status.success());
    assert!(last_line(&out).starts_with("initialized=1 entries=0"));
    let out = run(dir.path(), &["validate"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        last_line(&out).starts_with("entries=0 invalid=0 chain=ok"),
        "{}",
        last_line(&out)
    );
}

#[test]
fn ingest_reports_counts_and_skips_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_words(dir.path(), &ROWS);
    let out = run(
        dir.path(),
        &[
            "ingest",
            "tsv",
            file.to_str().unwrap(),
            "--source",
            "lex1990",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(last_line(&out), "imported=3 errors=0 warnings=0");

    let again = run(
        dir.path(),
        &[
            "ingest",
            "tsv",
            file.to_str().unwrap(),
            "--source",
            "lex1990",
        ],
    );
    assert!(again.status.success());
    assert!(
        last_line(&again).contains("skipped=1"),
        "{}",
        last_line(&again)
    );
    let project = Project::open(dir.path()).unwrap();
    assert_eq!(project.len(), 3);
}

#[test]
fn bad_rows_are_reported_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_words(
        dir.path(),
        &[
            ROWS[0],
            "book\tnoun\t\t\t\ten\tbook\t\t1\t1\n",
            "كلب\tnoun\t\t\t\ten\tdog\t\tzero\t1\n",
        ],
    );
    let out = run(
        dir.path(),
        &["ingest", "tsv", file.to_str().unwrap(), "--source", "s"],
    );
    assert_eq!(last_line(&out), "imported=1 errors=2 warnings=0");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("words.tsv:3: lemma"), "{stderr}");
    assert!(stderr.contains("words.tsv:4: page"), "{stderr}");
}

#[test]
fn unknown_column_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    fs::write(&path, HEADER.replace("gloss\t", "meaning\t")).unwrap();
    let out = run(dir.path(), &["ingest", "tsv", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("meaning"));
}

#[test]
fn export_without_verified_entries_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_words(dir.path(), &ROWS);
    run(
        dir.path(),
        &["ingest", "tsv", file.to_str().unwrap(), "--source", "s"],
    );
    let mapping = dir.path().join("mapping.json");
    fs::write(&mapping, MAPPING).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        dir.path(),
        &[
            "export",
            "lexemes",
            "--mapping",
            mapping.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyExport"));
    assert!(!out_dir.join("lexemes.json").exists());
}

#[test]
fn invalid_tau_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["dedupe", "--tau", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn metrics_without_ocr_entries_reports_shortfall() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["init"]);
    let out = run(dir.path(), &["metrics", "sample", "--n", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InsufficientEligibleEntries"));
}

#[test]
fn ocr_dump_is_segmented() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("pages.txt");
    fs::write(&dump, "### PAGE 7 SOURCE colin\nكتاب: book\n  written thing\nدار – house\n### PAGE 8 SOURCE colin\nnot a headword\n").unwrap();
    let out = run(dir.path(), &["ingest", "ocr", dump.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(last_line(&out), "pages=2 imported=2 errors=0");
    let project = Project::open(dir.path()).unwrap();
    let lemmas: Vec<&str> = project.entries().map(|e| e.lemma.as_str()).collect();
    assert_eq!(lemmas, ["كتاب", "دار"]);
}

#[test]
fn help_matches_golden() {
    let out = lrelf(&["--help"]).output().unwrap();
    assert!(out.status.success());
    assert_golden("help.txt", &String::from_utf8(out.stdout).unwrap());
}

#[test]
fn quickstatements_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_words(dir.path(), &ROWS);
    run(
        dir.path(),
        &["ingest", "tsv", file.to_str().unwrap(), "--source", "s"],
    );
    let ids: Vec<String> = {
        let mut project = Project::open(dir.path()).unwrap();
        let ids: Vec<String> = project.entries().map(|e| e.id.clone()).collect();
        for id in &ids {
            apply_decision(
                &mut project,
                Decision::new(id.clone(), Pass::One, Action::Accept, "t"),
            )
            .unwrap();
            let entry = project.entry(id).unwrap();
            let mut c = Corrections::default();
            if entry.category == LexicalCategory::Noun
                && entry.gender == GrammaticalGender::Unspecified
            {
                c.gender = Some(GrammaticalGender::Masculine);
            }
            let action = if c.is_empty() {
                Action::Accept
            } else {
                Action::Correct
            };
            apply_decision(
                &mut project,
                Decision::new(id.clone(), Pass::Two, action, "t").with_corrections(c),
            )
            .unwrap();
        }
        project.sync().unwrap();
        ids
    };
    let mapping = dir.path().join("mapping.json");
    fs::write(&mapping, MAPPING).unwrap();
    let qs = dir.path().join("out.qs");
    let out = run(
        dir.path(),
        &[
            "export",
            "qs",
            "--mapping",
            mapping.to_str().unwrap(),
            "--out",
            qs.to_str().unwrap(),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        last_line(&out).starts_with("lines=9 "),
        "{}",
        last_line(&out)
    );

    // ids are time-based; replace them with stable placeholders
    let mut text = fs::read_to_string(&qs).unwrap();
    for (n, id) in ids.iter().enumerate() {
        text = text.replace(id.as_str(), &format!("<id{}>", n + 1));
    }
    assert_golden("export.qs", &text);
}

#[test]
fn review_server_answers_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_words(dir.path(), &ROWS);
    run(
        dir.path(),
        &["ingest", "tsv", file.to_str().unwrap(), "--source", "s"],
    );
    let mut child = lrelf(&[
        "--project",
        dir.path().to_str().unwrap(),
        "review",
        "--port",
        "0",
    ])
    .stdout(Stdio::piped())
    .stderr(Stdio::null())
    .spawn()
    .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first
        .strip_prefix("url=http://")
        .and_then(|rest| rest.split('/').next())
        .unwrap_or_else(|| panic!("unexpected banner `{first}`"))
        .to_string();
    assert!(first.ends_with("entries=3"), "{first}");

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(
        stream,
        "GET /api/queue?pass=1 HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = response.split("\r\n\r\n").nth(1).unwrap();
    let queue: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(queue.as_array().map(Vec::len), Some(3), "{body}");
}

#[test]
fn validate_reports_a_cycle_written_behind_its_back() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_words(dir.path(), &ROWS);
    run(
        dir.path(),
        &["ingest", "tsv", file.to_str().unwrap(), "--source", "s"],
    );
    let ids: Vec<String> = Project::open(dir.path())
        .unwrap()
        .entries()
        .map(|e| e.id.clone())
        .collect();
    let out = run(
        dir.path(),
        &["link", "--kind", "derived_from", &ids[0], &ids[1]],
    );
    assert!(out.status.success());
    let refused = run(
        dir.path(),
        &["link", "--kind", "derived_from", &ids[1], &ids[0]],
    );
    assert_eq!(refused.status.code(), Some(1));

    let mut edges = fs::OpenOptions::new()
        .append(true)
        .open(dir.path().join("edges.jsonl"))
        .unwrap();
    writeln!(
        edges,
        r#"{{"from_id":"{}","to_id":"{}","kind":"derived_from","note":""}}"#,
        ids[1], ids[0]
    )
    .unwrap();
    let out = run(dir.path(), &["validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad_edges=1"));
}
