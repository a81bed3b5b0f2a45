//! Seeded toy languages for experiments and tests.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Sentence, TaggedSentence};
use crate::{seeded_rng, SeededRng};

/// Suffix and the tag it determines.
pub const SUFFIX_TAGS: [(&str, &str); 5] = [
    ("ing", "VBG"),
    ("ed", "VBD"),
    ("ly", "RB"),
    ("ous", "JJ"),
    ("ity", "NN"),
];

const STEM_LETTERS: &[u8] = b"bcdfghjkmnprstvwz";
const STEM_VOWELS: &[u8] = b"aeiou";

#[derive(Clone, Debug, PartialEq)]
pub struct SuffixLanguageConfig {
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    /// Distinct stems per split; splits never share a stem.
    pub train_stems: usize,
    pub heldout_stems: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SuffixLanguageConfig {
    fn default() -> Self {
        SuffixLanguageConfig {
            train_sentences: 500,
            dev_sentences: 100,
            test_sentences: 200,
            train_stems: 300,
            heldout_stems: 100,
            min_len: 4,
            max_len: 10,
            seed: 7,
        }
    }
}

/// A tagged language where every token is `stem + suffix` and the tag is a
/// function of the suffix alone. Tags are drawn independently per token, so
/// context carries no information. Train, dev and test use disjoint stems,
/// hence disjoint word forms.
#[derive(Clone, Debug, PartialEq)]
pub struct SuffixLanguage {
    pub train: Vec<TaggedSentence>,
    pub dev: Vec<TaggedSentence>,
    pub test: Vec<TaggedSentence>,
    pub train_stems: Vec<String>,
    pub dev_stems: Vec<String>,
    pub test_stems: Vec<String>,
}

fn random_stem(rng: &mut SeededRng) -> String {
    let syllables = rng.gen_range(1..=2);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*STEM_LETTERS.choose(rng).expect("letters") as char);
        s.push(*STEM_VOWELS.choose(rng).expect("vowels") as char);
    }
    s.push(*STEM_LETTERS.choose(rng).expect("letters") as char);
    s
}

/// `n` distinct stems not in `taken`, which is updated.
pub fn fresh_stems(n: usize, taken: &mut BTreeSet<String>, rng: &mut SeededRng) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = random_stem(rng);
        if taken.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

fn tagged_sentences(
    n: usize,
    stems: &[String],
    cfg: &SuffixLanguageConfig,
    rng: &mut SeededRng,
) -> Vec<TaggedSentence> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(cfg.min_len..=cfg.max_len);
            let (words, tags) = (0..len)
                .map(|_| {
                    let stem = stems.choose(rng).expect("stems");
                    let (suffix, tag) = SUFFIX_TAGS[rng.gen_range(0..SUFFIX_TAGS.len())];
                    (format!("{stem}{suffix}"), tag.to_string())
                })
                .unzip();
            TaggedSentence::new(words, tags).expect("nonempty and parallel")
        })
        .collect()
}

pub fn suffix_language(cfg: &SuffixLanguageConfig) -> SuffixLanguage {
    assert!(cfg.min_len >= 1 && cfg.min_len <= cfg.max_len);
    let mut rng = seeded_rng(cfg.seed);
    let mut taken = BTreeSet::new();
    let train_stems = fresh_stems(cfg.train_stems, &mut taken, &mut rng);
    let dev_stems = fresh_stems(cfg.heldout_stems, &mut taken, &mut rng);
    let test_stems = fresh_stems(cfg.heldout_stems, &mut taken, &mut rng);
    SuffixLanguage {
        train: tagged_sentences(cfg.train_sentences, &train_stems, cfg, &mut rng),
        dev: tagged_sentences(cfg.dev_sentences, &dev_stems, cfg, &mut rng),
        test: tagged_sentences(cfg.test_sentences, &test_stems, cfg, &mut rng),
        train_stems,
        dev_stems,
        test_stems,
    }
}

/// Sentences over a chain `w0 → w1 → … → w{n-1}`: each starts at a random
/// word and follows the chain to the last word, so every word but the
/// first is determined by its predecessor. Sentences have at least
/// `min_len` words.
pub fn bigram_chain_corpus(sentences: usize, chain_len: usize, min_len: usize, seed: u64) -> Vec<Sentence> {
    assert!(min_len >= 1 && min_len <= chain_len);
    let mut rng = seeded_rng(seed);
    let words: Vec<String> = (0..chain_len).map(|i| format!("w{i}")).collect();
    (0..sentences)
        .map(|_| {
            let start = rng.gen_range(0..=chain_len - min_len);
            Sentence::new(words[start..].to_vec()).expect("nonempty")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokens;

    #[test]
    fn suffix_determines_tag_and_splits_are_disjoint() {
        let lang = suffix_language(&SuffixLanguageConfig::default());
        assert_eq!(lang.train.len(), 500);
        let forms = |c: &[TaggedSentence]| -> BTreeSet<String> {
            c.iter().flat_map(|s| s.tokens().iter().cloned()).collect()
        };
        assert!(forms(&lang.train).is_disjoint(&forms(&lang.test)));
        assert!(forms(&lang.train).is_disjoint(&forms(&lang.dev)));
        for s in lang.train.iter().chain(&lang.test) {
            assert!((4..=10).contains(&s.len()));
            for (w, t) in s.tokens().iter().zip(s.tags()) {
                let (suffix, _) = SUFFIX_TAGS.iter().find(|(_, tag)| tag == t).unwrap();
                assert!(w.ends_with(suffix));
            }
        }
    }

    #[test]
    fn same_seed_same_language() {
        let cfg = SuffixLanguageConfig::default();
        assert_eq!(suffix_language(&cfg), suffix_language(&cfg));
    }

    #[test]
    fn chain_successors_are_unique() {
        let c = bigram_chain_corpus(50, 12, 4, 3);
        for s in &c {
            let t = s.tokens();
            assert!(t.len() >= 4);
            assert_eq!(t.last().unwrap(), "w11");
            for pair in t.windows(2) {
                let a: usize = pair[0][1..].parse().unwrap();
                let b: usize = pair[1][1..].parse().unwrap();
                assert_eq!(b, a + 1);
            }
        }
    }
}
