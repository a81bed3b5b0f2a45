//! Recurrent LSTM language model over word embeddings with a pruned,
//! lowercased output vocabulary.

use serde::{Deserialize, Serialize};

use crate::corpus::{Replacement, Sentence, Tokens, Vocabulary};
use crate::embeddings::{EmbedSession, Embedder, EmbedderConfig, EmbedderVocabs, EmbeddingCache, HasParameters, DEFAULT_CACHE_CAPACITY};
use crate::error::{Error, Result};
use crate::nncore::{affine, log_softmax, lstm_forward, GradCheckOptions, GradCheckReport, LstmParams, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::seeded_rng;
use crate::training::{self, BatchGraph, EpochRecord, Selection, TrainConfig, TrainLog, Trainable, TrainingSummary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub embedder: EmbedderConfig,
    pub d_lm: usize,
    /// Content words in the output softmax, besides the sentinels.
    pub out_vocab_size: usize,
    pub cache_capacity: usize,
    pub train: TrainConfig,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            embedder: EmbedderConfig::default(),
            d_lm: 150,
            out_vocab_size: 5000,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            train: TrainConfig::default(),
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedder.validate()?;
        self.train.validate()?;
        if self.d_lm == 0 || self.out_vocab_size == 0 {
            return Err(Error::Config("d_lm and out_vocab_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LmModel {
    pub config: LmConfig,
    pub store: ParamStore,
    pub embedder: Embedder,
    pub seq: LstmParams,
    pub out_proj: ParamId,
    pub out_bias: ParamId,
    pub out_vocab: Vocabulary,
    pub summary: Option<TrainingSummary>,
}

impl LmModel {
    /// Builds vocabularies from `train` and initializes all parameters.
    pub fn new(config: LmConfig, train: &[Sentence]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("language model training corpus"));
        }
        let vocabs = EmbedderVocabs::build(config.embedder.kind, train);
        let out_vocab = Vocabulary::build(train, Some(config.out_vocab_size), true);
        LmModel::from_parts(config, vocabs, out_vocab)
    }

    /// Initializes parameters for given vocabularies. Initialization is a
    /// pure function of the config, so this also rebuilds saved models.
    pub fn from_parts(config: LmConfig, vocabs: EmbedderVocabs, out_vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        if !out_vocab.lowercase() {
            return Err(Error::Config("output vocabulary must be lowercased".into()));
        }
        let mut rng = seeded_rng(config.train.seed);
        let mut store = ParamStore::new();
        let embedder = Embedder::new(&mut store, config.embedder.clone(), vocabs, &mut rng)?;
        let seq = LstmParams::new(&mut store, "lm.seq", config.embedder.d, config.d_lm, &mut rng);
        let out_proj = store.add_uniform("lm.out_proj", "lm.out_proj", &[out_vocab.len(), config.d_lm], &mut rng);
        let out_bias = store.add_uniform("lm.out_bias", "lm.out_bias", &[out_vocab.len()], &mut rng);
        Ok(LmModel {
            config,
            store,
            embedder,
            seq,
            out_proj,
            out_bias,
            out_vocab,
            summary: None,
        })
    }

    /// Output targets: every token followed by the end symbol, with
    /// out-of-vocabulary words mapped to unknown.
    pub fn targets(&self, tokens: &[String]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.out_vocab.id(t))
            .chain(std::iter::once(Vocabulary::END_ID))
            .collect()
    }

    /// Records the logits for every position of one sentence.
    fn sentence_logits(
        &self,
        tape: &mut Tape,
        session: &mut EmbedSession,
        tokens: &[String],
        mut replace: Option<&mut Replacement<'_>>,
    ) -> Result<Vec<NodeId>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("language model sentence"));
        }
        let mut inputs = Vec::with_capacity(tokens.len() + 1);
        inputs.push(session.embed(tape, &self.store, &self.embedder, &self.embedder.start_key())?);
        for t in tokens {
            let key = self.embedder.key(t, replace.as_deref_mut());
            inputs.push(session.embed(tape, &self.store, &self.embedder, &key)?);
        }
        let states = lstm_forward(tape, &self.store, &self.seq, &inputs)?;
        states
            .iter()
            .map(|s| affine(tape, &self.store, self.out_proj, s.h, self.out_bias))
            .collect()
    }

    /// Log-probability rows over the output vocabulary: row `i` predicts
    /// token `i + 1` given the start symbol and the first `i` tokens; the
    /// last row predicts the end symbol.
    pub fn lm_forward(&self, tokens: &[String]) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let mut session = EmbedSession::new(true);
        let logits = self.sentence_logits(&mut tape, &mut session, tokens, None)?;
        Ok(logits
            .into_iter()
            .map(|l| Tensor::vector(log_softmax(tape.value(l).data())))
            .collect())
    }

    /// Records the summed cross-entropy of `batch`. With `memoize`, each
    /// distinct embedding key is computed once per batch.
    pub fn batch_graph<S: Tokens>(
        &self,
        batch: &[&S],
        mut replace: Option<&mut Replacement<'_>>,
        memoize: bool,
    ) -> Result<BatchGraph> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("language model batch"));
        }
        let mut tape = Tape::new();
        let mut session = EmbedSession::new(memoize);
        let mut terms = Vec::new();
        let mut tokens = 0;
        for s in batch {
            let toks = s.tokens();
            let logits = self.sentence_logits(&mut tape, &mut session, toks, replace.as_deref_mut())?;
            for (l, target) in logits.into_iter().zip(self.targets(toks)) {
                terms.push(tape.softmax_cross_entropy(l, target)?);
            }
            tokens += toks.len();
        }
        let loss = tape.add_n(&terms)?;
        Ok(BatchGraph {
            tape,
            loss,
            predictions: terms.len(),
            tokens,
            compositions: session.compositions,
        })
    }

    /// Summed evaluation-mode cross-entropy of `batch`.
    pub fn lm_loss<S: Tokens>(&self, batch: &[&S]) -> Result<f64> {
        let g = self.batch_graph(batch, None, true)?;
        Ok(g.tape.value(g.loss).data()[0])
    }

    /// Negative log-likelihood of one sentence and its number of
    /// predictions, with composed vectors served from `cache`.
    fn sentence_nll(&self, tokens: &[String], cache: &EmbeddingCache) -> Result<(f64, usize)> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("language model sentence"));
        }
        let mut tape = Tape::new();
        let mut inputs = Vec::with_capacity(tokens.len() + 1);
        inputs.push(self.embedder.embed_key(&mut tape, &self.store, &self.embedder.start_key())?);
        for t in tokens {
            inputs.push(self.embedder.embed_cached(&mut tape, &self.store, t, cache)?);
        }
        let states = lstm_forward(&mut tape, &self.store, &self.seq, &inputs)?;
        let mut nll = 0.0;
        for (s, target) in states.iter().zip(self.targets(tokens)) {
            let logits = affine(&mut tape, &self.store, self.out_proj, s.h, self.out_bias)?;
            nll -= log_softmax(tape.value(logits).data())[target];
        }
        Ok((nll, tokens.len() + 1))
    }

    /// `exp(total NLL / predictions)`, counting end-symbol and unknown
    /// targets as predictions.
    pub fn perplexity<S: Tokens>(&self, corpus: &[S]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::EmptyInput("perplexity corpus"));
        }
        let cache = EmbeddingCache::new(self.config.cache_capacity, &self.embedder.words);
        let (mut nll, mut n) = (0.0, 0usize);
        for s in corpus {
            let (l, k) = self.sentence_nll(s.tokens(), &cache)?;
            nll += l;
            n += k;
        }
        Ok((nll / n as f64).exp())
    }

    /// Compares analytic and finite-difference gradients of the summed
    /// evaluation-mode loss of `batch` for every parameter.
    pub fn gradient_check(
        &mut self,
        batch: &[&Sentence],
        opts: &GradCheckOptions,
        tamper: impl FnMut(&mut ParamStore),
    ) -> Result<GradCheckReport> {
        training::check_gradients(self, batch, opts, tamper)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.embedder.param_ids();
        ids.extend(self.seq.ids());
        ids.extend([self.out_proj, self.out_bias]);
        ids
    }
}

impl HasParameters for LmModel {
    fn param_ids(&self) -> Vec<ParamId> {
        LmModel::param_ids(self)
    }
}

impl Trainable for LmModel {
    type Example = Sentence;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn batch_graph(&self, batch: &[&Sentence], replace: Option<&mut Replacement<'_>>, memoize: bool) -> Result<BatchGraph> {
        LmModel::batch_graph(self, batch, replace, memoize)
    }

    fn dev_metric(&self, dev: &[Sentence]) -> Result<f64> {
        self.perplexity(dev)
    }

    fn selection(&self) -> Selection {
        Selection::Lower
    }
}

/// Trains a fresh model on `train`, keeping the epoch with the lowest dev
/// perplexity.
pub fn train_lm(config: LmConfig, train: &[Sentence], dev: &[Sentence]) -> Result<(LmModel, TrainLog)> {
    let model = LmModel::new(config, train)?;
    continue_lm(model, train, dev, |_| {})
}

/// Trains an already-initialized model (e.g. one with pretrained vectors).
pub fn continue_lm(
    mut model: LmModel,
    train: &[Sentence],
    dev: &[Sentence],
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(LmModel, TrainLog)> {
    let cfg = model.config.train.clone();
    let log = training::train(&mut model, &cfg, train, dev, on_epoch)?;
    model.summary = Some(TrainingSummary {
        best_epoch: log.best_epoch,
        dev_metric: log.best_dev_metric,
    });
    Ok((model, log))
}
