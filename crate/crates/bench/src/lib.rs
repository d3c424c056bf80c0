//! Seeded synthetic inputs shared by the benchmarks.

use lrelf_core::model::{CaptureMethod, LexicalCategory};
use lrelf_core::{LexemeEntry, ProvenanceRecord};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTERS: &[char] = &[
    'ا', 'ب', 'ت', 'ج', 'ح', 'د', 'ر', 'ز', 'س', 'ش', 'ع', 'ف', 'ق', 'ك', 'ل', 'م', 'ن', 'ه', 'و',
    'ي', 'ڭ',
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn arabic_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| *LETTERS.choose(rng).unwrap()).collect()
}

/// A line of dictionary text with roughly one MSA alef per `every` words.
pub fn dictionary_line(rng: &mut ChaCha8Rng, words: usize, every: usize) -> String {
    let mut parts = Vec::with_capacity(words);
    for i in 0..words {
        let len = rng.random_range(2..=7);
        let mut w = arabic_word(rng, len);
        if every > 0 && i % every == 0 {
            w.push('أ');
        }
        parts.push(w);
    }
    parts.join(" ")
}

/// Reference text and an OCR-like copy with about `rate` of the
/// codepoints substituted, dropped or doubled.
pub fn noisy_pair(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> (String, String) {
    let reference = arabic_word(rng, len);
    let mut hypothesis = String::with_capacity(reference.len());
    for c in reference.chars() {
        if !rng.random_bool(rate) {
            hypothesis.push(c);
            continue;
        }
        match rng.random_range(0..3) {
            0 => hypothesis.push(*LETTERS.choose(rng).unwrap()),
            1 => {}
            _ => {
                hypothesis.push(c);
                hypothesis.push(c);
            }
        }
    }
    (reference, hypothesis)
}

/// `n` Imported entries where about a tenth repeat an earlier lemma,
/// half of those with one letter changed.
pub fn entries_with_duplicates(rng: &mut ChaCha8Rng, n: usize) -> Vec<LexemeEntry> {
    let mut lemmas: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let lemma = if !lemmas.is_empty() && rng.random_bool(0.1) {
            let mut chars: Vec<char> = lemmas.choose(rng).unwrap().chars().collect();
            if rng.random_bool(0.5) {
                let at = rng.random_range(0..chars.len());
                chars[at] = *LETTERS.choose(rng).unwrap();
            }
            chars.into_iter().collect()
        } else {
            let len = rng.random_range(3..=9);
            arabic_word(rng, len)
        };
        lemmas.push(lemma);
    }
    lemmas
        .into_iter()
        .enumerate()
        .map(|(i, lemma)| {
            let prov = ProvenanceRecord {
                source_id: format!("src{}", i % 3),
                page: i as u32 / 40 + 1,
                line: Some(i as u32 % 40 + 1),
                raw_text: lemma.clone(),
                capture_method: CaptureMethod::Ocr,
                verified_text: None,
            };
            let mut e = LexemeEntry::imported(format!("E{i:06}"), lemma, prov);
            if i % 4 == 0 {
                e.category = LexicalCategory::Noun;
            }
            e
        })
        .collect()
}
