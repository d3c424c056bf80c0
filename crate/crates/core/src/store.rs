//! On-disk project store.
//!
//! Layout of a project directory:
//!
//! ```text
//! project.json     configuration, carries `schema_version`
//! sources.json     source_id -> {title, year, capture_method_default}
//! entries.jsonl    one entry version per line; the last line per id wins
//! edges.jsonl      one relation edge per line
//! audit.jsonl      one audit event per line
//! confusion.json   default confusion table written by `init`
//! .lrelf.lock      exclusive writer lock
//! ```
//!
//! Entries are immutable values: a mutation appends the new version and one
//! audit event. [`Project::compact`] rewrites `entries.jsonl` with exactly
//! one line per entry.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::audit::{entry_hash, AuditAction, AuditEvent, ChainError, GENESIS_HASH};
use crate::config::{ConfigError, ProjectConfig, SCHEMA_VERSION};
use crate::ids::IdGenerator;
use crate::model::{EntryId, LexemeEntry, RelationEdge, SourceInfo, VerificationState};
use crate::normalize::ConfusionTable;
use crate::validate::{validate_entry, Violation};

pub const CONFIG_FILE: &str = "project.json";
pub const SOURCES_FILE: &str = "sources.json";
pub const ENTRIES_FILE: &str = "entries.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const CONFUSION_FILE: &str = "confusion.json";
pub const LOCK_FILE: &str = ".lrelf.lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("project is locked by another process ({0})")]
    LockHeld(PathBuf),
    #[error("store schema version {found} is not supported (expected {supported})")]
    SchemaMismatch { found: u64, supported: u32 },
    #[error("corrupt store: {file}:{line}: {message}")]
    CorruptStore {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown entry {0}")]
    UnknownEntry(EntryId),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("entry {id}: transition {from} -> {to} is not permitted")]
    IllegalTransition {
        id: EntryId,
        from: VerificationState,
        to: VerificationState,
    },
    #[error("entry {id} is invalid: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid {
        id: EntryId,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Removes the lock file when dropped.
#[derive(Debug)]
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(LOCK_FILE);
        for attempt in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(LockGuard { path });
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    if attempt == 0 && Self::is_stale(&path) {
                        let _ = fs::remove_file(&path);
                        continue;
                    }
                    return Err(StoreError::LockHeld(path));
                }
                Err(e) => return Err(StoreError::Io { path, source: e }),
            }
        }
        Err(StoreError::LockHeld(path))
    }

    /// A lock whose recorded process no longer exists. Only decidable
    /// where `/proc` is available; elsewhere locks are never stale.
    fn is_stale(path: &Path) -> bool {
        let Ok(text) = fs::read_to_string(path) else {
            return false;
        };
        let Ok(pid) = text.trim().parse::<u32>() else {
            return false;
        };
        let proc_root = Path::new("/proc");
        pid != std::process::id()
            && proc_root.join("self").exists()
            && !proc_root.join(pid.to_string()).exists()
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug)]
struct DiskBackend {
    dir: PathBuf,
    entries: File,
    edges: File,
    audit: File,
    _lock: LockGuard,
}

fn append_line<T: Serialize>(file: &mut File, value: &T) -> io::Result<()> {
    let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)
}

fn open_append(path: &Path) -> Result<File, StoreError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => {
            return Err(StoreError::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }
    };
    let mut out = Vec::new();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let corrupt = |message: String| StoreError::CorruptStore {
            file: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if !line.ends_with('\n') {
            return Err(corrupt("truncated line (missing newline)".into()));
        }
        let body = line.trim_end_matches('\n');
        if body.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(body).map_err(|e| corrupt(e.to_string()))?);
    }
    Ok(out)
}

/// Write `bytes` to `path` via a synced temporary file and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Outcome of importing a batch of new entries.
#[derive(Debug, Default)]
pub struct ImportOutcome {
    pub ids: Vec<EntryId>,
    /// Input index and violations of each entry that was refused.
    pub rejected: Vec<(usize, Vec<Violation>)>,
}

/// An open project: entries, edges, audit log, sources and config.
#[derive(Debug)]
pub struct Project {
    config: ProjectConfig,
    sources: BTreeMap<String, SourceInfo>,
    entries: BTreeMap<EntryId, LexemeEntry>,
    edges: Vec<RelationEdge>,
    audit: Vec<AuditEvent>,
    ids: IdGenerator,
    disk: Option<DiskBackend>,
}

impl Project {
    /// A project that lives only in memory.
    pub fn in_memory(config: ProjectConfig) -> Self {
        Project {
            config,
            sources: BTreeMap::new(),
            entries: BTreeMap::new(),
            edges: Vec::new(),
            audit: Vec::new(),
            ids: IdGenerator::new(),
            disk: None,
        }
    }

    /// Open (or initialize) the project in `dir` and take the writer lock.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with_config(dir, None)
    }

    /// Like [`Project::open`], reading configuration from `config_path`
    /// instead of the project's own `project.json`.
    pub fn open_with_config(
        dir: impl AsRef<Path>,
        config_path: Option<&Path>,
    ) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lock = LockGuard::acquire(dir)?;

        let config_file = dir.join(CONFIG_FILE);
        if !config_file.exists() {
            Self::initialize(dir)?;
        }
        let config = Self::load_config(config_path.unwrap_or(&config_file))?;

        let sources_path = dir.join(SOURCES_FILE);
        let sources = match fs::read_to_string(&sources_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::CorruptStore {
                file: sources_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => {
                return Err(StoreError::Io {
                    path: sources_path,
                    source: e,
                })
            }
        };

        let mut entries = BTreeMap::new();
        for entry in read_jsonl::<LexemeEntry>(&dir.join(ENTRIES_FILE))? {
            entries.insert(entry.id.clone(), entry);
        }
        let edges = read_jsonl(&dir.join(EDGES_FILE))?;
        let audit: Vec<AuditEvent> = read_jsonl(&dir.join(AUDIT_FILE))?;

        let mut ids = IdGenerator::new();
        if let Some(last) = entries.keys().next_back() {
            ids.observe(last);
        }
        let disk = DiskBackend {
            dir: dir.to_path_buf(),
            entries: open_append(&dir.join(ENTRIES_FILE))?,
            edges: open_append(&dir.join(EDGES_FILE))?,
            audit: open_append(&dir.join(AUDIT_FILE))?,
            _lock: lock,
        };
        Ok(Project {
            config,
            sources,
            entries,
            edges,
            audit,
            ids,
            disk: Some(disk),
        })
    }

    fn load_config(path: &Path) -> Result<ProjectConfig, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| StoreError::CorruptStore {
                file: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?;
        let found = raw
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0);
        if found != u64::from(SCHEMA_VERSION) {
            return Err(StoreError::SchemaMismatch {
                found,
                supported: SCHEMA_VERSION,
            });
        }
        Ok(ProjectConfig::load(path)?)
    }

    fn initialize(dir: &Path) -> Result<(), StoreError> {
        let config = ProjectConfig {
            confusion_table: Some(CONFUSION_FILE.into()),
            ..Default::default()
        };
        write_atomic(
            &dir.join(CONFUSION_FILE),
            ConfusionTable::attested().to_json().as_bytes(),
        )?;
        write_atomic(&dir.join(SOURCES_FILE), b"{}\n")?;
        for name in [ENTRIES_FILE, EDGES_FILE, AUDIT_FILE] {
            let p = dir.join(name);
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&p)
                .map_err(io_err(&p))?;
        }
        let mut text = config.to_json();
        text.push('\n');
        write_atomic(&dir.join(CONFIG_FILE), text.as_bytes())
    }

    pub fn dir(&self) -> Option<&Path> {
        self.disk.as_ref().map(|d| d.dir.as_path())
    }

    /// Directory that relative config paths resolve against.
    pub fn base_dir(&self) -> &Path {
        self.dir().unwrap_or(Path::new("."))
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.config
    }

    pub fn confusion_table(&self) -> Result<ConfusionTable, StoreError> {
        Ok(self.config.load_confusion_table(self.base_dir())?)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexemeEntry> {
        self.entries.values()
    }

    pub fn entry(&self, id: &str) -> Option<&LexemeEntry> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn audit(&self) -> &[AuditEvent] {
        &self.audit
    }

    pub fn sources(&self) -> &BTreeMap<String, SourceInfo> {
        &self.sources
    }

    /// True when an import with this content hash has already happened.
    pub fn has_imported(&self, hash: &str) -> bool {
        self.audit
            .iter()
            .any(|ev| matches!(&ev.action, AuditAction::Import { content_hash, .. } if content_hash == hash))
    }

    /// Register (or replace) a source and persist the registry.
    pub fn register_source(&mut self, source_id: &str, info: SourceInfo) -> Result<(), StoreError> {
        self.sources.insert(source_id.to_string(), info);
        if let Some(disk) = &self.disk {
            let mut text = serde_json::to_string_pretty(&self.sources).expect("sources serialize");
            text.push('\n');
            write_atomic(&disk.dir.join(SOURCES_FILE), text.as_bytes())?;
        }
        Ok(())
    }

    fn check(&self, entry: &LexemeEntry) -> Result<(), StoreError> {
        let violations = validate_entry(entry, &self.config);
        if !violations.is_empty() {
            return Err(StoreError::Invalid {
                id: entry.id.clone(),
                violations,
            });
        }
        for p in &entry.provenance {
            if !self.sources.contains_key(&p.source_id) {
                return Err(StoreError::UnknownSource(p.source_id.clone()));
            }
        }
        Ok(())
    }

    fn next_seq(&self) -> u64 {
        self.audit.last().map_or(1, |ev| ev.seq + 1)
    }

    fn persist(&mut self, entry: &LexemeEntry, event: &AuditEvent) -> Result<(), StoreError> {
        if let Some(disk) = &mut self.disk {
            let path = disk.dir.join(ENTRIES_FILE);
            append_line(&mut disk.entries, entry).map_err(io_err(&path))?;
            let path = disk.dir.join(AUDIT_FILE);
            append_line(&mut disk.audit, event).map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Import new entries in state Imported. Each entry receives a fresh
    /// identifier and one creation event. Invalid entries are refused and
    /// reported; the rest are stored.
    pub fn import(
        &mut self,
        entries: Vec<LexemeEntry>,
        reviewer: &str,
        action: AuditAction,
    ) -> Result<ImportOutcome, StoreError> {
        let mut outcome = ImportOutcome::default();
        for (index, mut entry) in entries.into_iter().enumerate() {
            entry.id = self.ids.next_id();
            entry.state = VerificationState::Imported;
            match self.check(&entry) {
                Ok(()) => {}
                Err(StoreError::Invalid { violations, .. }) => {
                    outcome.rejected.push((index, violations));
                    continue;
                }
                Err(e) => return Err(e),
            }
            let event = AuditEvent {
                seq: self.next_seq(),
                timestamp: Utc::now(),
                reviewer: reviewer.to_string(),
                entry_id: entry.id.clone(),
                action: action.clone(),
                from_state: None,
                to_state: entry.state,
                hash_before: GENESIS_HASH.to_string(),
                hash_after: entry_hash(&entry),
            };
            self.persist(&entry, &event)?;
            self.audit.push(event);
            outcome.ids.push(entry.id.clone());
            self.entries.insert(entry.id.clone(), entry);
        }
        Ok(outcome)
    }

    /// Replace an existing entry with a new version, appending exactly one
    /// audit event. The state change, if any, must be whitelisted and the
    /// new version must be valid.
    pub fn commit(
        &mut self,
        updated: LexemeEntry,
        reviewer: &str,
        action: AuditAction,
    ) -> Result<&LexemeEntry, StoreError> {
        let current = self
            .entries
            .get(&updated.id)
            .ok_or_else(|| StoreError::UnknownEntry(updated.id.clone()))?;
        if current.state != updated.state && !current.state.can_transition_to(updated.state) {
            return Err(StoreError::IllegalTransition {
                id: updated.id.clone(),
                from: current.state,
                to: updated.state,
            });
        }
        self.check(&updated)?;
        let event = AuditEvent {
            seq: self.next_seq(),
            timestamp: Utc::now(),
            reviewer: reviewer.to_string(),
            entry_id: updated.id.clone(),
            action,
            from_state: Some(current.state),
            to_state: updated.state,
            hash_before: entry_hash(current),
            hash_after: entry_hash(&updated),
        };
        self.persist(&updated, &event)?;
        self.audit.push(event);
        let id = updated.id.clone();
        self.entries.insert(id.clone(), updated);
        Ok(&self.entries[&id])
    }

    /// Append an edge without any graph checks; see [`crate::relations`].
    pub(crate) fn push_edge(&mut self, edge: RelationEdge) -> Result<(), StoreError> {
        if let Some(disk) = &mut self.disk {
            let path = disk.dir.join(EDGES_FILE);
            append_line(&mut disk.edges, &edge).map_err(io_err(&path))?;
        }
        self.edges.push(edge);
        Ok(())
    }

    /// Flush appended data to stable storage.
    pub fn sync(&mut self) -> Result<(), StoreError> {
        if let Some(disk) = &mut self.disk {
            for (file, name) in [
                (&disk.entries, ENTRIES_FILE),
                (&disk.edges, EDGES_FILE),
                (&disk.audit, AUDIT_FILE),
            ] {
                file.sync_all().map_err(io_err(&disk.dir.join(name)))?;
            }
        }
        Ok(())
    }

    /// Rewrite `entries.jsonl` with one line per entry, in id order.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        let Some(disk) = &mut self.disk else {
            return Ok(());
        };
        let mut buf = Vec::new();
        for entry in self.entries.values() {
            serde_json::to_writer(&mut buf, entry).expect("entries serialize");
            buf.push(b'\n');
        }
        let path = disk.dir.join(ENTRIES_FILE);
        write_atomic(&path, &buf)?;
        disk.entries = open_append(&path)?;
        Ok(())
    }

    /// Verify the audit hash chain against the stored entries.
    pub fn verify_audit(&self) -> Result<(), ChainError> {
        crate::audit::verify_chain(&self.audit, self.entries.values())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn sample(lemma: &str, source: &str) -> LexemeEntry {
        LexemeEntry::imported(
            "",
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

    fn import_action() -> AuditAction {
        AuditAction::Import {
            content_hash: "h".into(),
            capture_method: CaptureMethod::Manual,
        }
    }

    fn register(p: &mut Project) {
        p.register_source(
            "src",
            SourceInfo {
                title: "Source".into(),
                year: Some(2011),
                capture_method_default: CaptureMethod::Manual,
            },
        )
        .unwrap();
    }

    #[test]
    fn empty_dir_initializes() {
        let dir = tempfile::tempdir().unwrap();
        let p = Project::open(dir.path()).unwrap();
        assert!(p.is_empty());
        let cfg: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap())
                .unwrap();
        assert_eq!(cfg["schema_version"], 1);
        assert!(dir.path().join(CONFUSION_FILE).is_file());
    }

    #[test]
    fn reopen_reads_entries() {
        let dir = tempfile::tempdir().unwrap();
        let ids = {
            let mut p = Project::open(dir.path()).unwrap();
            register(&mut p);
            let out = p
                .import(
                    vec![
                        sample("كتاب", "src"),
                        sample("دار", "src"),
                        sample("باب", "src"),
                    ],
                    "t",
                    import_action(),
                )
                .unwrap();
            out.ids
        };
        let p = Project::open(dir.path()).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.entries().map(|e| e.id.clone()).collect::<Vec<_>>(), ids);
        p.verify_audit().unwrap();
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let p = Project::open(dir.path()).unwrap();
        assert!(matches!(
            Project::open(dir.path()),
            Err(StoreError::LockHeld(_))
        ));
        drop(p);
        Project::open(dir.path()).unwrap();
    }

    #[test]
    fn truncated_last_line_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut p = Project::open(dir.path()).unwrap();
            register(&mut p);
            p.import(
                vec![sample("كتاب", "src"), sample("دار", "src")],
                "t",
                import_action(),
            )
            .unwrap();
        }
        let path = dir.path().join(ENTRIES_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() - 10]).unwrap();
        match Project::open(dir.path()) {
            Err(StoreError::CorruptStore { line, file, .. }) => {
                assert_eq!(line, 2);
                assert!(file.ends_with(ENTRIES_FILE));
            }
            other => panic!("expected CorruptStore, got {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        drop(Project::open(dir.path()).unwrap());
        let path = dir.path().join(CONFIG_FILE);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 9");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            Project::open(dir.path()),
            Err(StoreError::SchemaMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn import_refuses_invalid_and_unknown_source() {
        let mut p = Project::in_memory(ProjectConfig::default());
        register(&mut p);
        let out = p
            .import(
                vec![sample("book", "src"), sample("كتاب", "src")],
                "t",
                import_action(),
            )
            .unwrap();
        assert_eq!(out.ids.len(), 1);
        assert_eq!(out.rejected, vec![(0, vec![Violation::NonArabicLemma])]);
        assert!(matches!(
            p.import(vec![sample("كتاب", "nowhere")], "t", import_action()),
            Err(StoreError::UnknownSource(_))
        ));
    }

    #[test]
    fn every_mutation_appends_one_event() {
        let mut p = Project::in_memory(ProjectConfig::default());
        register(&mut p);
        let ids = p
            .import(
                vec![sample("كتاب", "src"), sample("دار", "src")],
                "t",
                import_action(),
            )
            .unwrap()
            .ids;
        assert_eq!(p.audit().len(), 2);
        let mut e = p.entry(&ids[0]).unwrap().clone();
        e.lemma = "كتب".into();
        p.commit(
            e,
            "t",
            AuditAction::Normalize {
                profile: "default".into(),
            },
        )
        .unwrap();
        assert_eq!(p.audit().len(), 3);
        let mut bad = p.entry(&ids[1]).unwrap().clone();
        bad.state = VerificationState::Exported;
        assert!(matches!(
            p.commit(
                bad,
                "t",
                AuditAction::Normalize {
                    profile: "x".into()
                }
            ),
            Err(StoreError::IllegalTransition { .. })
        ));
        assert_eq!(p.audit().len(), 3);
        p.verify_audit().unwrap();
    }

    #[test]
    fn compact_keeps_content() {
        let dir = tempfile::tempdir().unwrap();
        let before: Vec<LexemeEntry> = {
            let mut p = Project::open(dir.path()).unwrap();
            register(&mut p);
            let ids = p
                .import(vec![sample("كتاب", "src")], "t", import_action())
                .unwrap()
                .ids;
            let mut e = p.entry(&ids[0]).unwrap().clone();
            e.lemma = "كتب".into();
            p.commit(
                e,
                "t",
                AuditAction::Normalize {
                    profile: "default".into(),
                },
            )
            .unwrap();
            p.compact().unwrap();
            p.entries().cloned().collect()
        };
        let text = fs::read_to_string(dir.path().join(ENTRIES_FILE)).unwrap();
        assert_eq!(text.lines().count(), 1);
        let p = Project::open(dir.path()).unwrap();
        assert_eq!(p.entries().cloned().collect::<Vec<_>>(), before);
        p.verify_audit().unwrap();
    }
}
