//! Project configuration (`project.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::GraphemeUnit;
use crate::model::{LexicalCategory, VerificationState};
use crate::normalize::{ConfusionTable, ConfusionTableError, NormalizationProfile};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TAU: f64 = 0.25;
pub const DEFAULT_SAMPLE_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequiredField {
    /// Category must not be `unknown`.
    Category,
    /// Gender must not be `unspecified`.
    Gender,
    /// Etymology origin must not be `unknown`.
    Etymology,
    /// At least one gloss.
    Gloss,
}

/// A field that must be concrete once an entry reaches one of `states`,
/// optionally only for some categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredFieldRule {
    pub field: RequiredField,
    pub states: Vec<VerificationState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<LexicalCategory>>,
}

impl RequiredFieldRule {
    pub fn applies(&self, state: VerificationState, category: LexicalCategory) -> bool {
        self.states.contains(&state)
            && self
                .categories
                .as_ref()
                .is_none_or(|cats| cats.contains(&category))
    }
}

pub fn default_required_fields() -> Vec<RequiredFieldRule> {
    let verified = vec![
        VerificationState::Pass2Verified,
        VerificationState::Exported,
    ];
    vec![
        RequiredFieldRule {
            field: RequiredField::Category,
            states: verified.clone(),
            categories: None,
        },
        RequiredFieldRule {
            field: RequiredField::Gender,
            states: verified,
            categories: Some(vec![LexicalCategory::Noun, LexicalCategory::Adjective]),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub schema_version: u32,
    /// Name of the active entry in `profiles`.
    pub normalization_profile: String,
    pub profiles: Vec<NormalizationProfile>,
    /// Confusion table, relative to the project directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion_table: Option<PathBuf>,
    pub dedup_tau: f64,
    pub sample_size: usize,
    pub seed: u64,
    /// Source label → canonical category/gender token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_map: Option<PathBuf>,
    pub required_fields: Vec<RequiredFieldRule>,
    /// Codepoint ranges accepted as lemma script besides the Arabic blocks.
    #[serde(default)]
    pub extra_script_ranges: Vec<[u32; 2]>,
    #[serde(default)]
    pub grapheme_unit: GraphemeUnit,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            schema_version: SCHEMA_VERSION,
            normalization_profile: NormalizationProfile::DEFAULT_NAME.to_string(),
            profiles: vec![NormalizationProfile::conservative()],
            confusion_table: None,
            dedup_tau: DEFAULT_TAU,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
            label_map: None,
            required_fields: default_required_fields(),
            extra_script_ranges: Vec::new(),
            grapheme_unit: GraphemeUnit::Codepoint,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("dedup threshold {0} is outside [0, 1]")]
    InvalidTau(f64),
    #[error("sample size must be at least 1")]
    InvalidSampleSize,
    #[error("normalization profile `{0}` is not declared")]
    UnknownProfile(String),
    #[error("duplicate normalization profile `{0}`")]
    DuplicateProfile(String),
    #[error("referenced file {0} does not exist")]
    MissingFile(PathBuf),
    #[error("invalid script range {0:#x}..={1:#x}")]
    InvalidRange(u32, u32),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    ConfusionTable(#[from] ConfusionTableError),
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: ProjectConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.validate(base)?;
        Ok(config)
    }

    /// Check value ranges and that referenced files exist relative to `base`.
    pub fn validate(&self, base: &Path) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.dedup_tau) {
            return Err(ConfigError::InvalidTau(self.dedup_tau));
        }
        if self.sample_size == 0 {
            return Err(ConfigError::InvalidSampleSize);
        }
        let mut names = std::collections::HashSet::new();
        for p in &self.profiles {
            if !names.insert(p.name.as_str()) {
                return Err(ConfigError::DuplicateProfile(p.name.clone()));
            }
        }
        self.active_profile()?;
        for &[lo, hi] in &self.extra_script_ranges {
            if lo > hi || hi > 0x10FFFF {
                return Err(ConfigError::InvalidRange(lo, hi));
            }
        }
        for rel in self.confusion_table.iter().chain(self.label_map.iter()) {
            let full = base.join(rel);
            if !full.is_file() {
                return Err(ConfigError::MissingFile(full));
            }
        }
        Ok(())
    }

    pub fn profile(&self, name: &str) -> Result<&NormalizationProfile, ConfigError> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))
    }

    pub fn active_profile(&self) -> Result<&NormalizationProfile, ConfigError> {
        self.profile(&self.normalization_profile)
    }

    /// The configured confusion table, or the built-in attested rule.
    pub fn load_confusion_table(&self, base: &Path) -> Result<ConfusionTable, ConfigError> {
        match &self.confusion_table {
            Some(rel) => Ok(ConfusionTable::load(&base.join(rel))?),
            None => Ok(ConfusionTable::attested()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
