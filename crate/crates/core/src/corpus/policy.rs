use rand::seq::SliceRandom;
use rand::Rng;

use super::{CharVocabulary, Vocabulary};
use crate::SeededRng;

/// Stochastic replacement of training singletons by the unknown symbol.
pub struct Replacement<'a> {
    pub rng: &'a mut SeededRng,
    pub prob: f64,
}

impl Replacement<'_> {
    fn draw(&mut self) -> bool {
        self.rng.gen_bool(self.prob)
    }
}

fn replaced(replace: &mut Option<&mut Replacement<'_>>, count: usize) -> bool {
    count == 1 && replace.as_deref_mut().is_some_and(Replacement::draw)
}

/// Maps tokens to ids. Unseen tokens always map to unknown. In training mode
/// (`replace` given) each token seen exactly once in training is also
/// replaced with probability `prob`, one independent draw per occurrence.
pub fn apply_unk_policy(
    tokens: &[String],
    vocab: &Vocabulary,
    mut replace: Option<&mut Replacement<'_>>,
) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| match vocab.get(t) {
            None => Vocabulary::UNK_ID,
            Some(id) if replaced(&mut replace, vocab.count(id)) => Vocabulary::UNK_ID,
            Some(id) => id,
        })
        .collect()
}

/// Character-level counterpart of [`apply_unk_policy`].
pub fn apply_char_unk_policy(
    word: &str,
    charset: &CharVocabulary,
    mut replace: Option<&mut Replacement<'_>>,
) -> Vec<usize> {
    word.chars()
        .map(|ch| match charset.get(ch) {
            None => CharVocabulary::UNK_ID,
            Some(id) if replaced(&mut replace, charset.count(id)) => CharVocabulary::UNK_ID,
            Some(id) => id,
        })
        .collect()
}

/// Seeded shuffle followed by consecutive groups of `batch_size`; the last
/// batch may be short.
pub fn make_batches<'a, T>(items: &'a [T], batch_size: usize, rng: &mut SeededRng) -> Vec<Vec<&'a T>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|chunk| chunk.iter().map(|&i| &items[i]).collect())
        .collect()
}

/// Splits off the last `n` items as a tuning set.
pub fn withdraw_tail<T: Clone>(items: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let cut = items.len().saturating_sub(n);
    (items[..cut].to_vec(), items[cut..].to_vec())
}
