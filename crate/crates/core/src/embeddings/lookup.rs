use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::nncore::{NodeId, ParamId, ParamStore, Tape};
use crate::SeededRng;

/// Word lookup table `P ∈ R^{d×|V|}`; the embedding of word `w` is column `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordLookupTable {
    pub table: ParamId,
    pub vocab: Vocabulary,
    pub dim: usize,
}

impl WordLookupTable {
    pub fn new(store: &mut ParamStore, name: &str, vocab: Vocabulary, dim: usize, rng: &mut SeededRng) -> Self {
        let table = store.add_uniform(name, name, &[dim, vocab.len()], rng);
        WordLookupTable { table, vocab, dim }
    }

    pub fn lookup_word(&self, tape: &mut Tape, store: &ParamStore, word_id: usize) -> Result<NodeId> {
        if word_id >= self.vocab.len() {
            return Err(Error::Index {
                op: "lookup_word",
                index: word_id,
                size: self.vocab.len(),
            });
        }
        let table = tape.param(store, self.table);
        tape.column(table, word_id)
    }

    pub fn closed_form_count(vocab_size: usize, dim: usize) -> usize {
        vocab_size * dim
    }
}
