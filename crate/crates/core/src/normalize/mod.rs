//! Conservative Arabic-script normalization and detection of suspected
//! MSA-bias graphemes.
//!
//! Normalization only removes presentation noise (tatweel, vowel marks) and
//! canonicalizes Unicode. Hamza and alef letter variants are never
//! rewritten here; those are surfaced through [`detect_suspects`] so that a
//! reviewer decides.

mod suspects;

pub use suspects::{
    apply_suggestions, detect_suspects, ConfusionRule, ConfusionTable, ConfusionTableError,
    SuspectSpan, TargetField,
};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

pub const TATWEEL: char = '\u{0640}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DigitDirection {
    /// Arabic-Indic and extended Arabic-Indic digits become ASCII.
    ToAscii,
    /// ASCII digits become Arabic-Indic (U+0660..U+0669).
    ToArabicIndic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationProfile {
    pub name: String,
    pub apply_nfc: bool,
    pub strip_tatweel: bool,
    pub strip_diacritics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unify_digits: Option<DigitDirection>,
}

impl NormalizationProfile {
    pub const DEFAULT_NAME: &'static str = "default";

    /// NFC and tatweel removal only.
    pub fn conservative() -> Self {
        NormalizationProfile {
            name: Self::DEFAULT_NAME.to_string(),
            apply_nfc: true,
            strip_tatweel: true,
            strip_diacritics: false,
            unify_digits: None,
        }
    }

    /// Everything off: the identity transform.
    pub fn identity(name: impl Into<String>) -> Self {
        NormalizationProfile {
            name: name.into(),
            apply_nfc: false,
            strip_tatweel: false,
            strip_diacritics: false,
            unify_digits: None,
        }
    }
}

impl Default for NormalizationProfile {
    fn default() -> Self {
        Self::conservative()
    }
}

/// Arabic vocalization and Quranic annotation marks.
///
/// Maddah and hamza above/below (U+0653..U+0655) are excluded: they form
/// distinct letters (آ أ إ) and fall under detection, not normalization.
pub fn is_arabic_diacritic(c: char) -> bool {
    matches!(c,
        '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{0652}'
        | '\u{0656}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06DC}'
        | '\u{06DF}'..='\u{06E4}'
        | '\u{06E7}'..='\u{06E8}'
        | '\u{06EA}'..='\u{06ED}'
        | '\u{08D3}'..='\u{08E1}'
        | '\u{08E3}'..='\u{08FF}'
    )
}

fn convert_digit(c: char, direction: DigitDirection) -> char {
    match direction {
        DigitDirection::ToAscii => match c {
            '\u{0660}'..='\u{0669}' => char::from(b'0' + (c as u32 - 0x0660) as u8),
            '\u{06F0}'..='\u{06F9}' => char::from(b'0' + (c as u32 - 0x06F0) as u8),
            _ => c,
        },
        DigitDirection::ToArabicIndic => match c {
            '0'..='9' => char::from_u32(0x0660 + (c as u32 - '0' as u32)).unwrap_or(c),
            _ => c,
        },
    }
}

/// Apply the profile's enabled transforms. Idempotent for every profile.
pub fn normalize(text: &str, profile: &NormalizationProfile) -> String {
    let stripped: String = text
        .chars()
        .filter(|&c| !(profile.strip_tatweel && c == TATWEEL))
        .filter(|&c| !(profile.strip_diacritics && is_arabic_diacritic(c)))
        .collect();
    let composed = if profile.apply_nfc {
        stripped.nfc().collect()
    } else {
        stripped
    };
    match profile.unify_digits {
        Some(dir) => composed.chars().map(|c| convert_digit(c, dir)).collect(),
        None => composed,
    }
}
