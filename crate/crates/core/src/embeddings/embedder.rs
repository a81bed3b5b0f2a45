use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{compose_word, C2WParams, EmbeddingCache, WordLookupTable};
use crate::corpus::{apply_char_unk_policy, apply_unk_policy, CharVocabulary, Replacement, Tokens, Vocabulary};
use crate::error::{Error, Result};
use crate::nncore::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    /// Word lookup table over lowercased words.
    Lookup,
    /// Character composition over case-preserved characters.
    C2w,
    /// Sum of the C2W vector (optionally through tanh) and the lookup vector.
    Combined,
}

impl std::str::FromStr for EmbedderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lookup" => Ok(EmbedderKind::Lookup),
            "c2w" => Ok(EmbedderKind::C2w),
            "combined" => Ok(EmbedderKind::Combined),
            other => Err(Error::Config(format!(
                "unknown embedder `{other}` (expected lookup, c2w or combined)"
            ))),
        }
    }
}

impl EmbedderKind {
    pub fn uses_lookup(self) -> bool {
        matches!(self, EmbedderKind::Lookup | EmbedderKind::Combined)
    }

    pub fn uses_c2w(self) -> bool {
        matches!(self, EmbedderKind::C2w | EmbedderKind::Combined)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    /// Word vector size.
    pub d: usize,
    /// Character vector size.
    pub d_c: usize,
    /// Character LSTM state size.
    pub d_cs: usize,
    /// Apply tanh to the C2W branch of the combined embedder.
    pub c2w_tanh: bool,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: EmbedderKind::C2w,
            d: 50,
            d_c: 50,
            d_cs: 150,
            c2w_tanh: false,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d_c == 0 || self.d_cs == 0 {
            return Err(Error::Config("embedder dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Vocabularies an embedder is built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedderVocabs {
    /// Case-preserved training word types with counts: cache admission and
    /// neighbor candidates.
    pub words: Vocabulary,
    /// Lowercased lookup vocabulary (lookup and combined kinds).
    pub lookup: Option<Vocabulary>,
    pub charset: Option<CharVocabulary>,
}

impl EmbedderVocabs {
    pub fn build<'a, S, I>(kind: EmbedderKind, sentences: I) -> Self
    where
        S: Tokens + 'a,
        I: IntoIterator<Item = &'a S> + Clone,
    {
        EmbedderVocabs {
            words: Vocabulary::build(sentences.clone(), None, false),
            lookup: kind
                .uses_lookup()
                .then(|| Vocabulary::build(sentences.clone(), None, true)),
            charset: kind.uses_c2w().then(|| CharVocabulary::build(sentences)),
        }
    }
}

/// What one embedding request consists of after the OOV policies have been
/// applied. Equal keys produce equal vectors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EmbedKey {
    pub word_id: Option<usize>,
    pub char_ids: Option<Vec<usize>>,
}

/// Maps a token to a `d`-dimensional vector. All kinds have the same output
/// size, so they are interchangeable in downstream models.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedder {
    pub config: EmbedderConfig,
    pub words: Vocabulary,
    pub lookup: Option<WordLookupTable>,
    pub c2w: Option<C2WParams>,
    pub charset: Option<CharVocabulary>,
}

impl Embedder {
    /// Registers the C2W parameters (if any) and then the lookup table.
    pub fn new(store: &mut ParamStore, config: EmbedderConfig, vocabs: EmbedderVocabs, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let kind = config.kind;
        let (c2w, charset) = if kind.uses_c2w() {
            let charset = vocabs
                .charset
                .ok_or_else(|| Error::Config("c2w embedder needs a charset".into()))?;
            let p = C2WParams::new(store, "c2w", charset.len(), config.d_c, config.d_cs, config.d, rng);
            (Some(p), Some(charset))
        } else {
            (None, None)
        };
        let lookup = if kind.uses_lookup() {
            let vocab = vocabs
                .lookup
                .ok_or_else(|| Error::Config("lookup embedder needs a vocabulary".into()))?;
            Some(WordLookupTable::new(store, "lookup", vocab, config.d, rng))
        } else {
            None
        };
        Ok(Embedder {
            config,
            words: vocabs.words,
            lookup,
            c2w,
            charset,
        })
    }

    pub fn vocabs(&self) -> EmbedderVocabs {
        EmbedderVocabs {
            words: self.words.clone(),
            lookup: self.lookup.as_ref().map(|l| l.vocab.clone()),
            charset: self.charset.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.config.d
    }

    pub fn kind(&self) -> EmbedderKind {
        self.config.kind
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.c2w.as_ref().map(C2WParams::ids).unwrap_or_default();
        ids.extend(self.lookup.as_ref().map(|l| l.table));
        ids
    }

    /// Applies the word- and character-level OOV policies to `word`.
    pub fn key(&self, word: &str, mut replace: Option<&mut Replacement<'_>>) -> EmbedKey {
        let word_id = self.lookup.as_ref().map(|l| {
            apply_unk_policy(std::slice::from_ref(&word.to_string()), &l.vocab, replace.as_deref_mut())[0]
        });
        let char_ids = self
            .charset
            .as_ref()
            .map(|cs| apply_char_unk_policy(word, cs, replace));
        EmbedKey { word_id, char_ids }
    }

    /// Key for the sentence-start symbol.
    pub fn start_key(&self) -> EmbedKey {
        EmbedKey {
            word_id: self.lookup.as_ref().map(|_| Vocabulary::START_ID),
            char_ids: self.charset.as_ref().map(|_| vec![CharVocabulary::START_ID]),
        }
    }

    fn combine(&self, tape: &mut Tape, store: &ParamStore, composed: Option<NodeId>, key: &EmbedKey) -> Result<NodeId> {
        let looked_up = match (&self.lookup, key.word_id) {
            (Some(l), Some(id)) => Some(l.lookup_word(tape, store, id)?),
            _ => None,
        };
        match (composed, looked_up) {
            (Some(c), Some(w)) => {
                let c = if self.config.c2w_tanh { tape.tanh(c) } else { c };
                tape.add(c, w)
            }
            (Some(c), None) => Ok(c),
            (None, Some(w)) => Ok(w),
            (None, None) => Err(Error::Config("embed key does not match the embedder kind".into())),
        }
    }

    /// Embeds a prepared key on the tape.
    pub fn embed_key(&self, tape: &mut Tape, store: &ParamStore, key: &EmbedKey) -> Result<NodeId> {
        let composed = match (&self.c2w, &key.char_ids) {
            (Some(p), Some(ids)) => Some(compose_word(tape, store, p, ids)?),
            _ => None,
        };
        self.combine(tape, store, composed, key)
    }

    /// Evaluation-mode embedding of `word` on the tape.
    pub fn embed(&self, tape: &mut Tape, store: &ParamStore, word: &str) -> Result<NodeId> {
        if word.is_empty() {
            return Err(Error::EmptyInput("embed"));
        }
        let key = self.key(word, None);
        self.embed_key(tape, store, &key)
    }

    /// Evaluation-mode embedding of `word`, reusing `cache` for the
    /// composed part. The result is bit-identical to [`Embedder::embed`].
    pub fn embed_cached(&self, tape: &mut Tape, store: &ParamStore, word: &str, cache: &EmbeddingCache) -> Result<NodeId> {
        if word.is_empty() {
            return Err(Error::EmptyInput("embed"));
        }
        let key = self.key(word, None);
        let composed = match (&self.c2w, &key.char_ids) {
            (Some(p), Some(ids)) => {
                let v = super::cache_get_or_compose(cache, store, p, word, ids)?;
                Some(tape.constant(v))
            }
            _ => None,
        };
        self.combine(tape, store, composed, &key)
    }

    pub fn embed_vector(&self, store: &ParamStore, word: &str) -> Result<Tensor> {
        let mut tape = Tape::new();
        let e = self.embed(&mut tape, store, word)?;
        Ok(tape.value(e).clone())
    }
}

/// Per-batch memo: each distinct key is embedded once per tape and every
/// repeat reuses the node, so its gradient accumulates before reaching the
/// parameters.
#[derive(Debug)]
pub struct EmbedSession {
    memo: Option<HashMap<EmbedKey, NodeId>>,
    /// Number of times the character composer ran.
    pub compositions: usize,
    pub requests: usize,
}

impl EmbedSession {
    pub fn new(memoize: bool) -> Self {
        EmbedSession {
            memo: memoize.then(HashMap::new),
            compositions: 0,
            requests: 0,
        }
    }

    pub fn embed(&mut self, tape: &mut Tape, store: &ParamStore, embedder: &Embedder, key: &EmbedKey) -> Result<NodeId> {
        self.requests += 1;
        if let Some(&node) = self.memo.as_ref().and_then(|m| m.get(key)) {
            return Ok(node);
        }
        let node = embedder.embed_key(tape, store, key)?;
        if embedder.c2w.is_some() {
            self.compositions += 1;
        }
        if let Some(m) = self.memo.as_mut() {
            m.insert(key.clone(), node);
        }
        Ok(node)
    }
}
