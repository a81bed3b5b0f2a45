//! Corpus ingestion, vocabularies, OOV policies and batching.

mod charset;
mod policy;
mod readers;
mod vocab;

pub use charset::CharVocabulary;
pub use policy::{apply_char_unk_policy, apply_unk_policy, make_batches, withdraw_tail, Replacement};
pub use readers::{
    read_conll, read_plaintext, write_tagged, PlainCorpus, Sentence, TaggedSentence,
    CONLL_TAG_COL, CONLL_WORD_COL,
};
pub use vocab::{TagSet, Tokens, Vocabulary, END, START, UNK};
