use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align::{align_with, GraphemeUnit};
use super::breakdown::{breakdown, ErrorBreakdown};
use crate::model::{CaptureMethod, EntryId, VerificationState};
use crate::normalize::ConfusionTable;
use crate::store::Project;

/// Aggregation used for the corpus CER: total distance over total
/// reference length.
pub const AVERAGING: &str = "micro";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("requested a sample of {requested} but only {available} eligible entries exist")]
    InsufficientEligibleEntries { requested: usize, available: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleItem {
    pub entry_id: EntryId,
    #[serde(flatten)]
    pub breakdown: ErrorBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub seed: u64,
    pub sample_size: usize,
    pub averaging: String,
    pub unit: GraphemeUnit,
    pub entries: Vec<SampleItem>,
    pub total_ref_len: usize,
    pub total_distance: usize,
    pub total_msa_bias_count: usize,
    pub cer: f64,
    pub msa_bias_share: Option<f64>,
}

/// (entry id, reference, hypothesis) for every entry that passed at least
/// pass 1 and carries an OCR capture. The reference is the verified
/// transcription, or the raw capture when the reviewer accepted it as is.
pub fn eligible_pairs(project: &Project) -> Vec<(EntryId, String, String)> {
    project
        .entries()
        .filter(|e| {
            matches!(
                e.state,
                VerificationState::Pass1Verified
                    | VerificationState::Pass2Verified
                    | VerificationState::Exported
            )
        })
        .filter_map(|e| {
            let p = e
                .provenance
                .iter()
                .find(|p| p.capture_method == CaptureMethod::Ocr)?;
            let reference = p
                .verified_text
                .clone()
                .unwrap_or_else(|| p.raw_text.clone());
            Some((e.id.clone(), reference, p.raw_text.clone()))
        })
        .collect()
}

/// Draw `n` eligible entries without replacement (ChaCha8 seeded with
/// `seed`) and compute per-entry and aggregate error rates.
pub fn sample_report(
    project: &Project,
    n: usize,
    seed: u64,
    table: &ConfusionTable,
    unit: GraphemeUnit,
) -> Result<SampleReport, SampleError> {
    if n == 0 {
        return Err(SampleError::EmptySample);
    }
    let pairs = eligible_pairs(project);
    if pairs.len() < n {
        return Err(SampleError::InsufficientEligibleEntries {
            requested: n,
            available: pairs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, pairs.len(), n).into_vec();
    picked.sort_unstable();

    let entries: Vec<SampleItem> = picked
        .into_iter()
        .map(|i| {
            let (id, reference, hypothesis) = &pairs[i];
            SampleItem {
                entry_id: id.clone(),
                breakdown: breakdown(&align_with(reference, hypothesis, unit), table),
            }
        })
        .collect();
    let total_ref_len: usize = entries.iter().map(|e| e.breakdown.ref_len).sum();
    let total_distance: usize = entries.iter().map(|e| e.breakdown.distance).sum();
    let total_bias: usize = entries.iter().map(|e| e.breakdown.msa_bias_count).sum();
    Ok(SampleReport {
        seed,
        sample_size: n,
        averaging: AVERAGING.to_string(),
        unit,
        entries,
        total_ref_len,
        total_distance,
        total_msa_bias_count: total_bias,
        cer: if total_ref_len == 0 {
            0.0
        } else {
            total_distance as f64 / total_ref_len as f64
        },
        msa_bias_share: (total_distance > 0).then(|| total_bias as f64 / total_distance as f64),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl SampleReport {
    /// Human-readable table, one row per sampled entry plus totals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<26}  {:>7}  {:>4}  {:>4}  {:>4}  {:>4}  {:>6}  {:>4}  {:>6}",
            "entry", "ref_len", "dist", "sub", "ins", "del", "cer", "msa", "share"
        );
        for item in &self.entries {
            let b = &item.breakdown;
            let _ = writeln!(
                out,
                "{:<26}  {:>7}  {:>4}  {:>4}  {:>4}  {:>4}  {:>6}  {:>4}  {:>6}",
                item.entry_id,
                b.ref_len,
                b.distance,
                b.substitutions,
                b.insertions,
                b.deletions,
                fmt_opt(b.cer),
                b.msa_bias_count,
                fmt_opt(b.msa_bias_share)
            );
        }
        let _ = writeln!(
            out,
            "total: n={} ref_len={} distance={} msa_bias={} cer={:.4} msa_bias_share={} ({}-averaged, unit={})",
            self.sample_size,
            self.total_ref_len,
            self.total_distance,
            self.total_msa_bias_count,
            self.cer,
            fmt_opt(self.msa_bias_share),
            self.averaging,
            self.unit.as_str()
        );
        out
    }

    /// One-line `key=value` summary.
    pub fn summary(&self) -> String {
        format!(
            "n={} seed={} cer={:.4} msa_bias_share={} distance={} ref_len={} averaging={} unit={}",
            self.sample_size,
            self.seed,
            self.cer,
            fmt_opt(self.msa_bias_share),
            self.total_distance,
            self.total_ref_len,
            self.averaging,
            self.unit.as_str()
        )
    }
}
