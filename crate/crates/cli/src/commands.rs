use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;

use lrelf_core::audit::content_hash;
use lrelf_core::dedup::{
    apply_merge, find_duplicates, propose_merge, ClusterKind, DuplicateCluster, MergeError,
};
use lrelf_core::export::{
    emit_tabular, export_lexemes, export_quickstatements, ExportError, WikibaseMapping,
};
use lrelf_core::ingest::{
    parse_ocr_pages, segment_ocr_page, LabelMap, SegmentationRules, TabularParser,
};
use lrelf_core::metrics::{sample_report, SampleError};
use lrelf_core::normalize::{detect_suspects, normalize};
use lrelf_core::relations::{add_relation, propagate_fields};
use lrelf_core::workflow::api::{ApiState, ReviewServer};
use lrelf_core::{
    AuditAction, CaptureMethod, LexemeEntry, Project, RelationEdge, SourceInfo, TargetField,
    VerificationState,
};

use crate::args::{Cli, Command, ExportCommand, IngestCommand, MetricsCommand};

/// A failed command: message for stderr and the exit status.
#[derive(Debug)]
pub struct Failure {
    pub status: u8,
    pub message: String,
}

impl Failure {
    pub fn data(message: impl Display) -> Self {
        Failure {
            status: 1,
            message: message.to_string(),
        }
    }

    fn coded(code: &str, message: impl Display) -> Self {
        Failure {
            status: 1,
            message: format!("{code}: {message}"),
        }
    }
}

impl From<lrelf_core::StoreError> for Failure {
    fn from(e: lrelf_core::StoreError) -> Self {
        Failure::data(e)
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        Failure::coded(e.code(), e)
    }
}

type Outcome = Result<(), Failure>;

fn open(cli: &Cli) -> Result<Project, Failure> {
    Ok(Project::open_with_config(
        &cli.project,
        cli.config.as_deref(),
    )?)
}

fn read_text(path: &Path) -> Result<(String, String), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let hash = content_hash(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|e| Failure::data(format!("{}: not UTF-8: {e}", path.display())))?;
    Ok((text, hash))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json serializes")
    );
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Init => init(cli),
        Command::Ingest(IngestCommand::Tsv {
            file,
            source,
            capture,
            label_map,
        }) => ingest_tsv(
            cli,
            file,
            source.as_deref(),
            (*capture).into(),
            label_map.as_deref(),
        ),
        Command::Ingest(IngestCommand::Ocr { file, separators }) => {
            ingest_ocr(cli, file, separators)
        }
        Command::Normalize { profile } => normalize_entries(cli, profile.as_deref()),
        Command::Flags => flags(cli),
        Command::Dedupe { tau, json } => dedupe(cli, *tau, *json),
        Command::Merge {
            ids,
            tau,
            dry_run,
            json,
        } => merge(cli, ids, *tau, *dry_run, *json),
        Command::Link {
            kind,
            from,
            to,
            note,
        } => {
            let mut project = open(cli)?;
            let mut edge = RelationEdge::new(from.clone(), to.clone(), *kind);
            edge.note = note.clone();
            let edge = add_relation(&mut project, edge).map_err(Failure::data)?;
            project.sync()?;
            println!(
                "linked=1 kind={} from={} to={}",
                edge.kind, edge.from_id, edge.to_id
            );
            Ok(())
        }
        Command::Propagate { json } => {
            let project = open(cli)?;
            let fills = propagate_fields(project.edges(), project.entries());
            if *json {
                print_json(&fills);
            } else {
                for f in &fills {
                    println!(
                        "{}\t{:?}\t{}\tfrom {}",
                        f.child_id, f.field, f.value, f.parent_id
                    );
                }
            }
            println!("proposals={}", fills.len());
            Ok(())
        }
        Command::Review { port, bind, ui_dir } => {
            review(cli, SocketAddr::new(*bind, *port), ui_dir.clone())
        }
        Command::Metrics(MetricsCommand::Sample {
            n,
            seed,
            unit,
            json,
        }) => {
            let project = open(cli)?;
            let config = project.config();
            let n = n.unwrap_or(config.sample_size);
            let seed = seed.unwrap_or(config.seed);
            let unit = unit.map_or(config.grapheme_unit, Into::into);
            let table = project.confusion_table()?;
            let report = sample_report(&project, n, seed, &table, unit).map_err(|e| match e {
                SampleError::InsufficientEligibleEntries { .. } => {
                    Failure::coded("InsufficientEligibleEntries", &e)
                }
                SampleError::EmptySample => Failure::data(&e),
            })?;
            if *json {
                print_json(&report);
            } else {
                print!("{}", report.to_table());
            }
            println!("{}", report.summary());
            Ok(())
        }
        Command::Export(cmd) => export(cli, cmd),
        Command::Validate => validate(cli),
    }
}

fn init(cli: &Cli) -> Outcome {
    let existed = cli.project.join(lrelf_core::store::CONFIG_FILE).exists();
    let project = open(cli)?;
    if existed {
        eprintln!("warning: {} is already a project", cli.project.display());
    }
    println!(
        "initialized={} entries={} path={}",
        u8::from(!existed),
        project.len(),
        cli.project.display()
    );
    Ok(())
}

/// Register unknown sources named by `entries`, warning once per source.
fn register_sources(
    project: &mut Project,
    entries: &[LexemeEntry],
    capture: CaptureMethod,
) -> Outcome {
    let missing: BTreeSet<String> = entries
        .iter()
        .flat_map(|e| &e.provenance)
        .map(|p| p.source_id.clone())
        .filter(|s| !s.trim().is_empty() && !project.sources().contains_key(s))
        .collect();
    for source in missing {
        eprintln!("warning: registering unknown source `{source}`; edit sources.json to add its title and year");
        let info = SourceInfo {
            title: source.clone(),
            year: None,
            capture_method_default: capture,
        };
        project.register_source(&source, info)?;
    }
    Ok(())
}

fn already_ingested(project: &Project, path: &Path, hash: &str) -> bool {
    let seen = project.has_imported(hash);
    if seen {
        eprintln!(
            "warning: {} was already ingested (sha256 {hash}); skipping",
            path.display()
        );
    }
    seen
}

fn ingest_tsv(
    cli: &Cli,
    file: &Path,
    source: Option<&str>,
    capture: CaptureMethod,
    label_map: Option<&Path>,
) -> Outcome {
    let mut project = open(cli)?;
    let (text, hash) = read_text(file)?;
    if already_ingested(&project, file, &hash) {
        println!("imported=0 errors=0 warnings=0 skipped=1");
        return Ok(());
    }
    let label_map = match label_map.map(Path::to_path_buf).or_else(|| {
        project
            .config()
            .label_map
            .as_ref()
            .map(|p| project.base_dir().join(p))
    }) {
        Some(path) => LabelMap::load(&path).map_err(Failure::data)?,
        None => LabelMap::default(),
    };
    let parser = TabularParser {
        capture_method: capture,
        label_map,
        default_source: source.map(str::to_string),
        config: project.config().clone(),
    };
    let parsed = parser
        .parse(&text)
        .map_err(|e| Failure::data(format!("{}: {e}", file.display())))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}:{}: {}", file.display(), w.line, w.message);
    }
    for e in &parsed.errors {
        eprintln!("{}:{}: {}", file.display(), e.line, e.problem);
    }
    let (lines, entries): (Vec<usize>, Vec<LexemeEntry>) = parsed.entries.into_iter().unzip();
    register_sources(&mut project, &entries, capture)?;
    let outcome = project.import(
        entries,
        &cli.reviewer,
        AuditAction::Import {
            content_hash: hash,
            capture_method: capture,
        },
    )?;
    for (index, violations) in &outcome.rejected {
        for v in violations {
            eprintln!("{}:{}: {v}", file.display(), lines[*index]);
        }
    }
    project.sync()?;
    println!(
        "imported={} errors={} warnings={}",
        outcome.ids.len(),
        parsed.errors.len() + outcome.rejected.len(),
        parsed.warnings.len()
    );
    Ok(())
}

fn ingest_ocr(cli: &Cli, file: &Path, separators: &[String]) -> Outcome {
    let mut project = open(cli)?;
    let (text, hash) = read_text(file)?;
    if already_ingested(&project, file, &hash) {
        println!("pages=0 imported=0 errors=0 skipped=1");
        return Ok(());
    }
    let pages =
        parse_ocr_pages(&text).map_err(|e| Failure::data(format!("{}: {e}", file.display())))?;
    let mut rules = SegmentationRules {
        extra_script_ranges: project.config().extra_script_ranges.clone(),
        ..Default::default()
    };
    if !separators.is_empty() {
        rules.separators = separators.to_vec();
    }
    let entries: Vec<LexemeEntry> = pages
        .iter()
        .flat_map(|p| segment_ocr_page(p, &rules))
        .collect();
    register_sources(&mut project, &entries, CaptureMethod::Ocr)?;
    let located: Vec<(String, u32, Option<u32>)> = entries
        .iter()
        .map(|e| {
            (
                e.provenance[0].source_id.clone(),
                e.provenance[0].page,
                e.provenance[0].line,
            )
        })
        .collect();
    let action = AuditAction::Import {
        content_hash: hash,
        capture_method: CaptureMethod::Ocr,
    };
    let outcome = project.import(entries, &cli.reviewer, action)?;
    for (index, violations) in &outcome.rejected {
        let (source, page, line) = &located[*index];
        for v in violations {
            eprintln!("{source} page {page} line {}: {v}", line.unwrap_or(0));
        }
    }
    project.sync()?;
    println!(
        "pages={} imported={} errors={}",
        pages.len(),
        outcome.ids.len(),
        outcome.rejected.len()
    );
    Ok(())
}

fn normalize_entries(cli: &Cli, profile: Option<&str>) -> Outcome {
    let mut project = open(cli)?;
    let profile = match profile {
        Some(name) => project.config().profile(name),
        None => project.config().active_profile(),
    }
    .map_err(Failure::data)?
    .clone();
    let candidates: Vec<LexemeEntry> = project
        .entries()
        .filter(|e| e.state == VerificationState::Imported)
        .cloned()
        .collect();
    let (mut changed, mut failed) = (0, 0);
    for mut entry in candidates {
        let lemma = normalize(&entry.lemma, &profile);
        let variants: Vec<String> = entry
            .variants
            .iter()
            .map(|v| normalize(v, &profile))
            .collect();
        if lemma == entry.lemma && variants == entry.variants {
            continue;
        }
        let id = entry.id.clone();
        entry.lemma = lemma;
        entry.variants = variants;
        // offsets into the old lemma no longer hold
        entry.flags.retain(|f| f.target_field != TargetField::Lemma);
        match project.commit(
            entry,
            &cli.reviewer,
            AuditAction::Normalize {
                profile: profile.name.clone(),
            },
        ) {
            Ok(_) => changed += 1,
            Err(e) => {
                eprintln!("{id}: {e}");
                failed += 1;
            }
        }
    }
    project.sync()?;
    println!(
        "normalized={changed} errors={failed} entries={} profile={}",
        project.len(),
        profile.name
    );
    Ok(())
}

fn flags(cli: &Cli) -> Outcome {
    let mut project = open(cli)?;
    let table = project.confusion_table()?;
    let candidates: Vec<LexemeEntry> = project
        .entries()
        .filter(|e| e.state == VerificationState::Imported)
        .cloned()
        .collect();
    let (mut flagged, mut spans) = (0, 0);
    for mut entry in candidates {
        let mut found = detect_suspects(&entry.lemma, &table, TargetField::Lemma);
        if let Some(p) = entry.primary_provenance() {
            found.extend(detect_suspects(&p.raw_text, &table, TargetField::RawText));
        }
        if !found.is_empty() {
            flagged += 1;
            spans += found.len();
        }
        if found == entry.flags {
            continue;
        }
        let n = found.len();
        entry.flags = found;
        project.commit(entry, &cli.reviewer, AuditAction::Flag { spans: n })?;
    }
    project.sync()?;
    println!(
        "flagged_entries={flagged} spans={spans} rules={}",
        table.rules().len()
    );
    Ok(())
}

fn clusters(project: &Project, tau: Option<f64>) -> Result<(Vec<DuplicateCluster>, f64), Failure> {
    let tau = tau.unwrap_or(project.config().dedup_tau);
    let profile = project.config().active_profile().map_err(Failure::data)?;
    let live = project
        .entries()
        .filter(|e| e.state != VerificationState::Rejected);
    Ok((find_duplicates(live, profile, tau), tau))
}

fn describe(project: &Project, id: &str) -> String {
    match project.entry(id) {
        Some(e) => {
            let source = e.primary_provenance().map_or("?", |p| p.source_id.as_str());
            format!("{id}({}@{source})", e.lemma)
        }
        None => id.to_string(),
    }
}

fn dedupe(cli: &Cli, tau: Option<f64>, json: bool) -> Outcome {
    let project = open(cli)?;
    let (clusters, tau) = clusters(&project, tau)?;
    if json {
        print_json(&clusters);
    } else {
        for (i, c) in clusters.iter().enumerate() {
            let max = c
                .pairwise_scores
                .iter()
                .map(|s| s.distance)
                .fold(0.0, f64::max);
            let members: Vec<String> = c
                .member_ids
                .iter()
                .map(|id| describe(&project, id))
                .collect();
            println!("{}\t{:?}\t{max:.3}\t{}", i + 1, c.kind, members.join(" "));
        }
    }
    let exact = clusters
        .iter()
        .filter(|c| c.kind == ClusterKind::Exact)
        .count();
    println!(
        "clusters={} exact={exact} fuzzy={} tau={tau}",
        clusters.len(),
        clusters.len() - exact
    );
    Ok(())
}

fn merge(cli: &Cli, ids: &[String], tau: Option<f64>, dry_run: bool, json: bool) -> Outcome {
    let mut project = open(cli)?;
    let targets = if ids.is_empty() {
        clusters(&project, tau)?.0
    } else {
        if ids.len() < 2 {
            return Err(Failure {
                status: 2,
                message: "merge needs at least two entry ids".into(),
            });
        }
        vec![DuplicateCluster {
            member_ids: ids.to_vec(),
            kind: ClusterKind::Fuzzy,
            pairwise_scores: Vec::new(),
            tau: tau.unwrap_or(project.config().dedup_tau),
        }]
    };
    let (mut merged, mut absorbed, mut conflicted, mut skipped) = (0, 0, 0, 0);
    let mut proposals = Vec::new();
    for cluster in &targets {
        // earlier merges may have rejected some members
        let mut cluster = cluster.clone();
        cluster.member_ids.retain(|id| {
            project
                .entry(id)
                .is_none_or(|e| e.state != VerificationState::Rejected)
        });
        if cluster.member_ids.len() < 2 {
            continue;
        }
        let proposal = match propose_merge(&cluster, |id| project.entry(id)) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("skipped: {e}");
                skipped += 1;
                continue;
            }
        };
        if !proposal.conflicts.is_empty() {
            conflicted += 1;
            for c in &proposal.conflicts {
                eprintln!(
                    "conflict: {} {}: `{}` vs `{}`",
                    describe(&project, &proposal.surviving_id),
                    c.field,
                    c.value_a,
                    c.value_b
                );
            }
        } else if !dry_run {
            match apply_merge(&mut project, &proposal, &cli.reviewer) {
                Ok(()) => {
                    merged += 1;
                    absorbed += proposal.absorbed_ids.len();
                }
                Err(e @ (MergeError::StateMismatch { .. } | MergeError::Store(_))) => {
                    eprintln!("skipped {}: {e}", proposal.surviving_id);
                    skipped += 1;
                }
                Err(e) => return Err(Failure::data(e)),
            }
        }
        proposals.push(proposal);
    }
    project.sync()?;
    if json {
        print_json(&proposals);
    } else if dry_run {
        for p in &proposals {
            println!("{}\t<- {}", p.surviving_id, p.absorbed_ids.join(" "));
        }
    }
    println!("merged={merged} absorbed={absorbed} conflicted={conflicted} skipped={skipped} dry_run={dry_run}");
    Ok(())
}

fn review(cli: &Cli, addr: SocketAddr, ui_dir: Option<std::path::PathBuf>) -> Outcome {
    let project = open(cli)?;
    let entries = project.len();
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::data)?;
    runtime.block_on(async move {
        let server = ReviewServer::bind(addr, ApiState::new(project, cli.reviewer.clone()), ui_dir)
            .await
            .map_err(Failure::data)?;
        let local = server.local_addr().map_err(Failure::data)?;
        println!("url=http://{local}/ entries={entries}");
        server.run(shutdown_signal()).await.map_err(Failure::data)
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

fn load_mapping(path: &Path) -> Result<WikibaseMapping, Failure> {
    WikibaseMapping::load(path).map_err(Failure::data)
}

fn export(cli: &Cli, cmd: &ExportCommand) -> Outcome {
    let mut project = open(cli)?;
    match cmd {
        ExportCommand::Lexemes { mapping, out } => {
            let mapping = load_mapping(&mapping.mapping)?;
            let manifest = export_lexemes(&mut project, &mapping, out, &cli.reviewer)?;
            println!(
                "lexemes={} relations={} newly_exported={} out={}",
                manifest.counts.lexemes,
                manifest.counts.relations,
                manifest.counts.newly_exported,
                out.display()
            );
        }
        ExportCommand::Qs { mapping, out } => {
            let mapping = load_mapping(&mapping.mapping)?;
            let lines = export_quickstatements(&project, &mapping, out)?;
            println!("lines={lines} out={}", out.display());
        }
        ExportCommand::Tsv { out } => {
            let text = emit_tabular(project.entries());
            fs::write(out, &text).map_err(|e| Failure::data(format!("{}: {e}", out.display())))?;
            println!("rows={} out={}", project.len(), out.display());
        }
    }
    Ok(())
}

fn validate(cli: &Cli) -> Outcome {
    let project = open(cli)?;
    let mut invalid = 0;
    for e in project.entries() {
        let violations = lrelf_core::validate_entry(e, project.config());
        if !violations.is_empty() {
            invalid += 1;
            for v in violations {
                eprintln!("{}: {v}", e.id);
            }
        }
        for p in &e.provenance {
            if !project.sources().contains_key(&p.source_id) {
                invalid += 1;
                eprintln!("{}: unknown source `{}`", e.id, p.source_id);
            }
        }
    }
    let chain = match project.verify_audit() {
        Ok(()) => "ok",
        Err(e) => {
            eprintln!("audit: {e}");
            "broken"
        }
    };
    let gate = lrelf_core::audit::export_gate_violations(project.audit(), project.entries());
    for id in &gate {
        eprintln!("{id}: fully verified without both verification passes in its history");
    }
    // replaying the edges in order catches dangling endpoints, duplicates and cycles
    let mut replayed: Vec<RelationEdge> = Vec::new();
    let mut bad_edges = 0;
    for edge in project.edges() {
        match lrelf_core::relations::check_edge(
            &replayed,
            |id| project.entry(id).is_some(),
            edge.clone(),
        ) {
            Ok(edge) => replayed.push(edge),
            Err(e) => {
                bad_edges += 1;
                eprintln!("edge {} -> {}: {e}", edge.from_id, edge.to_id);
            }
        }
    }
    let summary = format!(
        "entries={} invalid={invalid} chain={chain} gate_violations={} edges={} bad_edges={bad_edges}",
        project.len(),
        gate.len(),
        project.edges().len()
    );
    if invalid > 0 || chain != "ok" || !gate.is_empty() || bad_edges > 0 {
        return Err(Failure::data(summary));
    }
    println!("{summary}");
    Ok(())
}
