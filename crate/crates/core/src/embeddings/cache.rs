//! Memoization of composed word vectors between parameter updates.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use super::{compose_word, C2WParams};
use crate::corpus::Vocabulary;
use crate::error::Result;
use crate::nncore::{ParamStore, Tape, Tensor};

pub const DEFAULT_CACHE_CAPACITY: usize = 10_000;

/// Cache of composed vectors for the most frequent word types.
///
/// Entries are tagged with the [`ParamStore`] generation they were computed
/// under and are served only while that generation is current, so an
/// optimizer step invalidates everything at once.
#[derive(Debug)]
pub struct EmbeddingCache {
    capacity: usize,
    admissible: HashSet<String>,
    entries: RwLock<HashMap<String, (Tensor, u64)>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    compositions: AtomicUsize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub compositions: usize,
    pub entries: usize,
}

impl EmbeddingCache {
    /// Admits the `capacity` most frequent content types of `vocab`
    /// (vocabulary order is frequency order).
    pub fn new(capacity: usize, vocab: &Vocabulary) -> Self {
        let admissible = vocab
            .content()
            .filter(|(_, count)| *count > 0)
            .take(capacity)
            .map(|(w, _)| w.to_string())
            .collect();
        EmbeddingCache {
            capacity,
            admissible,
            entries: RwLock::new(HashMap::new()),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            compositions: AtomicUsize::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_admissible(&self, word: &str) -> bool {
        self.admissible.contains(word)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            compositions: self.compositions.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }

    /// Returns the vector for `word` at `generation`, calling `compose` on a
    /// miss and storing the result if the word is admissible.
    pub fn get_or_compose(
        &self,
        word: &str,
        generation: u64,
        compose: impl FnOnce() -> Result<Tensor>,
    ) -> Result<Tensor> {
        if let Some((v, g)) = self.entries.read().expect("cache lock").get(word) {
            if *g == generation {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(v.clone());
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.compositions.fetch_add(1, Ordering::Relaxed);
        let v = compose()?;
        if self.admissible.contains(word) {
            let mut entries = self.entries.write().expect("cache lock");
            // Stale entries are dropped before inserting so size stays bounded.
            entries.retain(|_, (_, g)| *g == generation);
            if entries.len() < self.capacity || entries.contains_key(word) {
                entries.insert(word.to_string(), (v.clone(), generation));
            }
        }
        Ok(v)
    }
}

/// Composed vector of `word` under the current parameters, served from the
/// cache when possible. Bit-identical to a direct [`compose_word`] call.
pub fn cache_get_or_compose(
    cache: &EmbeddingCache,
    store: &ParamStore,
    p: &C2WParams,
    word: &str,
    char_ids: &[usize],
) -> Result<Tensor> {
    cache.get_or_compose(word, store.generation(), || {
        let mut tape = Tape::new();
        let node = compose_word(&mut tape, store, p, char_ids)?;
        Ok(tape.value(node).clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CharVocabulary;
    use crate::nncore::sgd_momentum_step;
    use crate::seeded_rng;

    fn setup() -> (ParamStore, C2WParams, CharVocabulary, Vocabulary) {
        let corpus: Vec<Vec<String>> = vec!["the cat the dog".split(' ').map(str::to_string).collect()];
        let cs = CharVocabulary::build(&corpus);
        let vocab = Vocabulary::build(&corpus, None, false);
        let mut store = ParamStore::new();
        let p = C2WParams::new(&mut store, "c2w", cs.len(), 3, 4, 2, &mut seeded_rng(3));
        (store, p, cs, vocab)
    }

    #[test]
    fn hit_after_first_query() {
        let (store, p, cs, vocab) = setup();
        let cache = EmbeddingCache::new(10, &vocab);
        let ids = cs.char_ids("cat");
        let a = cache_get_or_compose(&cache, &store, &p, "cat", &ids).unwrap();
        let b = cache_get_or_compose(&cache, &store, &p, "cat", &ids).unwrap();
        assert_eq!(a, b);
        let s = cache.stats();
        assert_eq!((s.hits, s.misses, s.compositions), (1, 1, 1));
    }

    #[test]
    fn optimizer_step_invalidates() {
        let (mut store, p, cs, vocab) = setup();
        let cache = EmbeddingCache::new(10, &vocab);
        let ids = cs.char_ids("cat");
        cache_get_or_compose(&cache, &store, &p, "cat", &ids).unwrap();
        sgd_momentum_step(&mut store, 0.1, 0.9);
        cache_get_or_compose(&cache, &store, &p, "cat", &ids).unwrap();
        assert_eq!(cache.stats().compositions, 2);
    }

    #[test]
    fn bounded_by_capacity_and_admission() {
        let (store, p, cs, vocab) = setup();
        let cache = EmbeddingCache::new(1, &vocab);
        assert!(cache.is_admissible("the"));
        assert!(!cache.is_admissible("cat"));
        for w in ["the", "cat", "dog", "the"] {
            cache_get_or_compose(&cache, &store, &p, w, &cs.char_ids(w)).unwrap();
        }
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.stats().hits, 1);
    }

    #[test]
    fn matches_direct_composition_bitwise() {
        let (store, p, cs, vocab) = setup();
        let cache = EmbeddingCache::new(10, &vocab);
        let ids = cs.char_ids("dog");
        let mut tape = Tape::new();
        let direct = compose_word(&mut tape, &store, &p, &ids).unwrap();
        for _ in 0..2 {
            let cached = cache_get_or_compose(&cache, &store, &p, "dog", &ids).unwrap();
            assert_eq!(&cached, tape.value(direct));
        }
    }
}
