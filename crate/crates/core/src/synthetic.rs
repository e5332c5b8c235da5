//! Seeded synthetic post-editing corpus with a planted feature/TER signal.
//!
//! Source words are syllable strings; the reference translates each one by
//! appending a suffix, so clean output shares most character n-grams with
//! its source. Each segment draws an error rate and corrupts the reference
//! into the MT hypothesis with substitutions (mostly noisy uppercase/digit
//! junk, sometimes wrong dictionary words), deletions, insertions and
//! adjacent swaps. Heavier corruption lowers source/target n-gram overlap,
//! shifts the length ratio and raises the junk-character counts, so surface
//! features predict TER. The gold post-edit is the reference.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Hypothesis, LangCode, Segment, SegmentId};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub segments: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    /// Per-segment error rates are uniform on `[0, max_error_rate]`.
    pub max_error_rate: f64,
    /// Share of substitutions that use a plausible dictionary word instead
    /// of visible junk.
    pub subtle_share: f64,
    pub vocabulary: usize,
    pub source_lang: String,
    pub target_lang: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            segments: 2000,
            seed: 1,
            min_len: 5,
            max_len: 20,
            max_error_rate: 0.8,
            subtle_share: 0.3,
            vocabulary: 400,
            source_lang: "en".into(),
            target_lang: "de".into(),
        }
    }
}

impl SyntheticConfig {
    pub fn describe(&self) -> String {
        format!(
            "synthetic(segments={}, seed={}, len={}..={}, max_error_rate={}, subtle_share={}, vocabulary={}, {}-{})",
            self.segments,
            self.seed,
            self.min_len,
            self.max_len,
            self.max_error_rate,
            self.subtle_share,
            self.vocabulary,
            self.source_lang,
            self.target_lang
        )
    }
}

const ONSETS: [&str; 12] = ["k", "t", "m", "s", "r", "l", "b", "d", "p", "n", "v", "g"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const SUFFIX: &str = "en";

fn word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(1..=3);
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS[rng.gen_range(0..ONSETS.len())], VOWELS[rng.gen_range(0..VOWELS.len())]))
        .collect()
}

fn junk(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"QXZWJKVY0123456789";
    let len = rng.gen_range(2..=5);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect()
}

pub fn generate(config: &SyntheticConfig) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab: Vec<String> = (0..config.vocabulary.max(2)).map(|_| word(&mut rng)).collect();
    let src_lang = LangCode::new(&config.source_lang)?;
    let tgt_lang = LangCode::new(&config.target_lang)?;
    let mut segments = Vec::with_capacity(config.segments);
    for id in 0..config.segments {
        let len = rng.gen_range(config.min_len..=config.max_len.max(config.min_len));
        let source: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let reference: Vec<String> = source.iter().map(|w| format!("{w}{SUFFIX}")).collect();
        let rate = rng.gen::<f64>() * config.max_error_rate;
        let mut hyp: Vec<String> = Vec::with_capacity(len + 4);
        for w in &reference {
            if !rng.gen_bool(rate) {
                hyp.push(w.clone());
                continue;
            }
            let op = rng.gen::<f64>();
            if op < 0.5 {
                if rng.gen_bool(config.subtle_share) {
                    hyp.push(format!("{}{SUFFIX}", vocab[rng.gen_range(0..vocab.len())]));
                } else {
                    hyp.push(junk(&mut rng));
                }
            } else if op < 0.7 {
                // deleted
            } else if op < 0.9 {
                hyp.push(w.clone());
                hyp.push(junk(&mut rng));
            } else {
                hyp.push(w.clone());
                let n = hyp.len();
                if n >= 2 {
                    hyp.swap(n - 1, n - 2);
                }
            }
        }
        let reference = reference.join(" ");
        segments.push(Segment::new(
            SegmentId(id),
            source.join(" "),
            src_lang.clone(),
            tgt_lang.clone(),
            alloc::vec![Hypothesis::new("synthetic-mt", hyp.join(" ")).with_gold(reference.clone())],
            Some(reference),
        )?);
    }
    Corpus::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let c = SyntheticConfig {
            segments: 50,
            ..SyntheticConfig::default()
        };
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        let other = SyntheticConfig { seed: 2, ..c.clone() };
        assert_ne!(generate(&c).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn gold_equals_reference() {
        let corpus = generate(&SyntheticConfig {
            segments: 20,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for seg in corpus.segments() {
            assert_eq!(seg.hypotheses[0].gold_post_edit, seg.reference);
        }
    }
}
