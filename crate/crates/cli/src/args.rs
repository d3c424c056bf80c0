use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrelf_core::metrics::GraphemeUnit;
use lrelf_core::{CaptureMethod, RelationKind};

#[derive(Debug, Parser)]
#[command(
    name = "lrelf",
    version,
    about = "Turn dictionary OCR output and transcriptions into a verified, linked lexical dataset",
    after_help = "Every command ends with a one-line key=value summary on stdout.\n\
                  Exit status: 0 success, 1 data or validation error, 2 usage error."
)]
pub struct Cli {
    /// Project directory
    #[arg(long, global = true, env = "LRELF_PROJECT", default_value = ".")]
    pub project: PathBuf,

    /// Configuration file to use instead of the project's project.json
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Name recorded in the audit log
    #[arg(
        long,
        global = true,
        env = "LRELF_REVIEWER",
        default_value = "anonymous"
    )]
    pub reviewer: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty project
    Init,
    /// Import entries from a TSV file or an OCR page dump
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Apply the normalization profile to lemmas of Imported entries
    Normalize {
        /// Profile name (default: the project's active profile)
        #[arg(long)]
        profile: Option<String>,
    },
    /// Flag suspected MSA-bias graphemes in Imported entries
    Flags,
    /// List duplicate clusters
    Dedupe {
        #[arg(long, value_parser = parse_tau)]
        tau: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Merge conflict-free duplicate clusters, or the given entries
    Merge {
        /// Entries to merge into one; without ids every detected cluster is tried
        ids: Vec<String>,
        #[arg(long, value_parser = parse_tau)]
        tau: Option<f64>,
        /// Show proposals without applying them
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        json: bool,
    },
    /// Add a relation edge between two entries
    Link {
        #[arg(long, value_parser = parse_kind)]
        kind: RelationKind,
        from: String,
        to: String,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// List field values proposed along derivation links
    Propagate {
        #[arg(long)]
        json: bool,
    },
    /// Serve the review API (and UI assets) until interrupted
    Review {
        #[arg(long, default_value_t = lrelf_core::workflow::api::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Directory with the built review UI
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Character error rate measurements
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Write export files
    #[command(subcommand)]
    Export(ExportCommand),
    /// Check every entry, the audit chain and the export gate
    Validate,
}

#[derive(Debug, Subcommand)]
pub enum IngestCommand {
    /// Canonical TSV with a header row
    Tsv {
        file: PathBuf,
        /// Source id for rows with an empty source_id cell
        #[arg(long)]
        source: Option<String>,
        #[arg(long, value_enum, default_value_t = Capture::Manual)]
        capture: Capture,
        /// Label map (default: the project's configured one)
        #[arg(long)]
        label_map: Option<PathBuf>,
    },
    /// OCR dump with `### PAGE <n> SOURCE <id>` markers
    Ocr {
        file: PathBuf,
        /// Headword separator; repeatable (default: ":", "–", "—", tab)
        #[arg(long = "separator")]
        separators: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// CER and MSA-bias share over a seeded random sample
    Sample {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        unit: Option<Unit>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct MappingArgs {
    /// Wikibase mapping file
    #[arg(long)]
    pub mapping: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// lexemes.json, relations.json and manifest.json; marks entries Exported
    Lexemes {
        #[command(flatten)]
        mapping: MappingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// QuickStatements-style command file
    Qs {
        #[command(flatten)]
        mapping: MappingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Canonical TSV of all entries
    Tsv {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Capture {
    Ocr,
    Manual,
}

impl From<Capture> for CaptureMethod {
    fn from(c: Capture) -> Self {
        match c {
            Capture::Ocr => CaptureMethod::Ocr,
            Capture::Manual => CaptureMethod::Manual,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Unit {
    Codepoint,
    Cluster,
}

impl From<Unit> for GraphemeUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Codepoint => GraphemeUnit::Codepoint,
            Unit::Cluster => GraphemeUnit::Cluster,
        }
    }
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let tau: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&tau) {
        Ok(tau)
    } else {
        Err(format!("{tau} is outside [0, 1]"))
    }
}

fn parse_kind(s: &str) -> Result<RelationKind, String> {
    s.parse().map_err(|_| {
        let all: Vec<&str> = RelationKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("expected one of {}", all.join(", "))
    })
}
