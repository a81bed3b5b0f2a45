//! Bidirectional LSTM part-of-speech tagger with a per-token softmax.

use serde::{Deserialize, Serialize};

use crate::corpus::{Replacement, TagSet, TaggedSentence, Tokens};
use crate::embeddings::{EmbedKey, EmbedSession, Embedder, EmbedderConfig, EmbedderVocabs, EmbeddingCache, HasParameters, DEFAULT_CACHE_CAPACITY};
use crate::error::{Error, Result};
use crate::nncore::{affine, lstm_forward, softmax, GradCheckOptions, GradCheckReport, LstmParams, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::seeded_rng;
use crate::training::{self, BatchGraph, EpochRecord, Selection, TrainConfig, TrainLog, Trainable, TrainingSummary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggerConfig {
    pub embedder: EmbedderConfig,
    pub d_ws_f: usize,
    pub d_ws_b: usize,
    /// Size of the combined layer `l_i`.
    pub d_ws: usize,
    pub cache_capacity: usize,
    pub train: TrainConfig,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            embedder: EmbedderConfig::default(),
            d_ws_f: 50,
            d_ws_b: 50,
            d_ws: 50,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            train: TrainConfig {
                clip_norm: Some(TAGGER_CLIP_NORM),
                ..TrainConfig::default()
            },
        }
    }
}

/// The tagger's summed per-batch gradient is larger and noisier than the
/// language model's; a tighter clip keeps momentum SGD stable.
pub const TAGGER_CLIP_NORM: f64 = 1.0;

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedder.validate()?;
        self.train.validate()?;
        if self.d_ws_f == 0 || self.d_ws_b == 0 || self.d_ws == 0 {
            return Err(Error::Config("tagger state sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub store: ParamStore,
    pub embedder: Embedder,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub l_f: ParamId,
    pub l_b: ParamId,
    pub b_l: ParamId,
    pub tag_proj: ParamId,
    pub tag_bias: ParamId,
    pub tagset: TagSet,
    pub summary: Option<TrainingSummary>,
}

/// How a sentence's tokens are embedded: eval keys, training keys, or the
/// frozen-model cache.
enum Inputs<'a, 'r> {
    Keys(&'a mut EmbedSession, Option<&'a mut Replacement<'r>>),
    Cached(&'a EmbeddingCache),
}

impl TaggerModel {
    pub fn new(config: TaggerConfig, train: &[TaggedSentence]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("tagger training corpus"));
        }
        let vocabs = EmbedderVocabs::build(config.embedder.kind, train);
        let tagset = TagSet::build(train.iter().flat_map(|s| s.tags().iter().map(String::as_str)))?;
        TaggerModel::from_parts(config, vocabs, tagset)
    }

    pub fn from_parts(config: TaggerConfig, vocabs: EmbedderVocabs, tagset: TagSet) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.train.seed);
        let mut store = ParamStore::new();
        let d = config.embedder.d;
        let embedder = Embedder::new(&mut store, config.embedder.clone(), vocabs, &mut rng)?;
        let fwd = LstmParams::new(&mut store, "tagger.fwd", d, config.d_ws_f, &mut rng);
        let bwd = LstmParams::new(&mut store, "tagger.bwd", d, config.d_ws_b, &mut rng);
        let mut add = |name: &str, shape: &[usize]| store.add_uniform(name, name, shape, &mut rng);
        let l_f = add("tagger.l_f", &[config.d_ws, config.d_ws_f]);
        let l_b = add("tagger.l_b", &[config.d_ws, config.d_ws_b]);
        let b_l = add("tagger.b_l", &[config.d_ws]);
        let tag_proj = add("tagger.tag_proj", &[tagset.len(), config.d_ws]);
        let tag_bias = add("tagger.tag_bias", &[tagset.len()]);
        Ok(TaggerModel {
            config,
            store,
            embedder,
            fwd,
            bwd,
            l_f,
            l_b,
            b_l,
            tag_proj,
            tag_bias,
            tagset,
            summary: None,
        })
    }

    /// Records `l_i` for every position.
    fn combined_nodes(&self, tape: &mut Tape, tokens: &[String], inputs: Inputs<'_, '_>) -> Result<Vec<NodeId>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("tagger sentence"));
        }
        let store = &self.store;
        let xs = match inputs {
            Inputs::Keys(session, mut replace) => {
                let keys: Vec<EmbedKey> = tokens.iter().map(|t| self.embedder.key(t, replace.as_deref_mut())).collect();
                keys.iter()
                    .map(|k| session.embed(tape, store, &self.embedder, k))
                    .collect::<Result<Vec<_>>>()?
            }
            Inputs::Cached(cache) => tokens
                .iter()
                .map(|t| self.embedder.embed_cached(tape, store, t, cache))
                .collect::<Result<Vec<_>>>()?,
        };
        let fwd = lstm_forward(tape, store, &self.fwd, &xs)?;
        let reversed: Vec<NodeId> = xs.iter().rev().copied().collect();
        let mut bwd = lstm_forward(tape, store, &self.bwd, &reversed)?;
        // Position i pairs the prefix state with the state that has read the
        // suffix from the last token back to i.
        bwd.reverse();
        let l_f = tape.param(store, self.l_f);
        fwd.iter()
            .zip(&bwd)
            .map(|(f, b)| {
                let lf = tape.matvec(l_f, f.h)?;
                let pre = affine(tape, store, self.l_b, b.h, self.b_l)?;
                let sum = tape.add(lf, pre)?;
                Ok(tape.tanh(sum))
            })
            .collect()
    }

    fn logits(&self, tape: &mut Tape, tokens: &[String], inputs: Inputs<'_, '_>) -> Result<Vec<NodeId>> {
        let ls = self.combined_nodes(tape, tokens, inputs)?;
        ls.into_iter()
            .map(|l| affine(tape, &self.store, self.tag_proj, l, self.tag_bias))
            .collect()
    }

    /// The combined layer `l_i` for every position (evaluation mode).
    pub fn combined_layer(&self, tokens: &[String]) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let mut session = EmbedSession::new(true);
        let ls = self.combined_nodes(&mut tape, tokens, Inputs::Keys(&mut session, None))?;
        Ok(ls.into_iter().map(|l| tape.value(l).clone()).collect())
    }

    /// Per-token distributions over the tagset.
    pub fn tag_forward(&self, tokens: &[String]) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let mut session = EmbedSession::new(true);
        let logits = self.logits(&mut tape, tokens, Inputs::Keys(&mut session, None))?;
        Ok(logits
            .into_iter()
            .map(|l| Tensor::vector(softmax(tape.value(l).data())))
            .collect())
    }

    fn decode(&self, tape: &Tape, logits: &[NodeId]) -> Vec<usize> {
        logits.iter().map(|&l| argmax(&softmax(tape.value(l).data()))).collect()
    }

    /// Argmax tag per token; ties go to the lowest tag id.
    pub fn tag_sentence(&self, tokens: &[String]) -> Result<Vec<String>> {
        let ids = self.tag_ids(tokens, None)?;
        Ok(ids.into_iter().map(|i| self.tagset.tag(i).to_string()).collect())
    }

    fn tag_ids(&self, tokens: &[String], cache: Option<&EmbeddingCache>) -> Result<Vec<usize>> {
        let mut tape = Tape::new();
        let mut session = EmbedSession::new(true);
        let inputs = match cache {
            Some(c) => Inputs::Cached(c),
            None => Inputs::Keys(&mut session, None),
        };
        let logits = self.logits(&mut tape, tokens, inputs)?;
        Ok(self.decode(&tape, &logits))
    }

    /// Micro-averaged token accuracy. Gold tags outside the tagset are an
    /// error listing every such tag.
    pub fn tagging_accuracy(&self, corpus: &[TaggedSentence]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::EmptyInput("accuracy corpus"));
        }
        let mut unknown: Vec<String> = corpus
            .iter()
            .flat_map(|s| s.tags())
            .filter(|t| self.tagset.get(t).is_none())
            .cloned()
            .collect();
        if !unknown.is_empty() {
            unknown.sort();
            unknown.dedup();
            return Err(Error::UnknownTags(unknown));
        }
        let cache = EmbeddingCache::new(self.config.cache_capacity, &self.embedder.words);
        let (mut correct, mut total) = (0usize, 0usize);
        for s in corpus {
            let predicted = self.tag_ids(s.tokens(), Some(&cache))?;
            for (p, gold) in predicted.iter().zip(s.tags()) {
                correct += usize::from(self.tagset.get(gold) == Some(*p));
            }
            total += s.len();
        }
        Ok(correct as f64 / total as f64)
    }

    pub fn batch_graph(
        &self,
        batch: &[&TaggedSentence],
        mut replace: Option<&mut Replacement<'_>>,
        memoize: bool,
    ) -> Result<BatchGraph> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("tagger batch"));
        }
        let mut tape = Tape::new();
        let mut session = EmbedSession::new(memoize);
        let mut terms = Vec::new();
        for s in batch {
            let logits = self.logits(&mut tape, s.tokens(), Inputs::Keys(&mut session, replace.as_deref_mut()))?;
            for (l, gold) in logits.into_iter().zip(s.tags()) {
                let target = self.tagset.get(gold).ok_or_else(|| Error::UnknownTags(vec![gold.clone()]))?;
                terms.push(tape.softmax_cross_entropy(l, target)?);
            }
        }
        let loss = tape.add_n(&terms)?;
        Ok(BatchGraph {
            tape,
            loss,
            predictions: terms.len(),
            tokens: terms.len(),
            compositions: session.compositions,
        })
    }

    /// Compares analytic and finite-difference gradients of the summed
    /// evaluation-mode loss of `batch` for every parameter.
    pub fn gradient_check(
        &mut self,
        batch: &[&TaggedSentence],
        opts: &GradCheckOptions,
        tamper: impl FnMut(&mut ParamStore),
    ) -> Result<GradCheckReport> {
        training::check_gradients(self, batch, opts, tamper)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.embedder.param_ids();
        ids.extend(self.fwd.ids());
        ids.extend(self.bwd.ids());
        ids.extend([self.l_f, self.l_b, self.b_l, self.tag_proj, self.tag_bias]);
        ids
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl HasParameters for TaggerModel {
    fn param_ids(&self) -> Vec<ParamId> {
        TaggerModel::param_ids(self)
    }
}

impl Trainable for TaggerModel {
    type Example = TaggedSentence;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn batch_graph(&self, batch: &[&TaggedSentence], replace: Option<&mut Replacement<'_>>, memoize: bool) -> Result<BatchGraph> {
        TaggerModel::batch_graph(self, batch, replace, memoize)
    }

    fn dev_metric(&self, dev: &[TaggedSentence]) -> Result<f64> {
        self.tagging_accuracy(dev)
    }

    fn selection(&self) -> Selection {
        Selection::Higher
    }
}

/// Trains a fresh tagger, keeping the epoch with the highest dev accuracy
/// (earliest on ties).
pub fn train_tagger(config: TaggerConfig, train: &[TaggedSentence], dev: &[TaggedSentence]) -> Result<(TaggerModel, TrainLog)> {
    let model = TaggerModel::new(config, train)?;
    continue_tagger(model, train, dev, |_| {})
}

pub fn continue_tagger(
    mut model: TaggerModel,
    train: &[TaggedSentence],
    dev: &[TaggedSentence],
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(TaggerModel, TrainLog)> {
    let cfg = model.config.train.clone();
    let log = training::train(&mut model, &cfg, train, dev, on_epoch)?;
    model.summary = Some(TrainingSummary {
        best_epoch: log.best_epoch,
        dev_metric: log.best_dev_metric,
    });
    Ok((model, log))
}
